//! Prompt templates sent to the evaluator, constructor and prompt-writer
//! models. Chinese templates are the ones used on the wire; English
//! renderings exist for readability and for English-marker evaluation.

/// Identifier stamped into run records for the evaluation prompt.
pub const EXPERT_COT_TEMPLATE_ID: &str = "expert-cot-zh-v1";

/// Single-turn evaluation prompt sent with an image.
pub const EXPERT_COT_PROMPT_ZH: &str = "\
你是一位中国传统绘画鉴赏专家，熟悉笔墨技法、中国画美学、艺术史与文人画理论。请对输入的国风绘画图像进行深入、专业、客观的艺术评估。让我们一步一步思考并回复

1. 观察这幅画作描述了什么内容，包括画面主体、构图特点以及可能的艺术风格，使用中文输出，确保描述清晰、详细

2. 请明确这幅作品的具体题材分类（如：山水画、花鸟画、人物画）

人物画（包括历史故事、宗教人物、文人雅士、仕女、市井风俗、农耕商旅、现实人物）

山水画（包括青绿山水、水墨山水、浅绛山水）

花鸟画（包括花卉、禽鸟、翎毛、蔬果、草虫、畜兽、鳞介、鱼藻）

3. 观察画作的局部内容，确定值得分析的区域，并放大查看

4. 根据画作的题材，以及该题材的评判标准，给出对这幅画的专业评价

人物画题材：
首先检验人物造型是否符合结构与比例，动态是否自然协调；其次重点判断人物是否具备清晰的精神气质、情绪表达与性格特征，尤其关注眼神、姿态与整体神态是否生动；同时分析线条是否具有书法性的节奏、骨力与提按变化，用笔是否支撑人物结构；再综合评估画面整体是否呈现连贯流动的生命感与精神统一性，即“气韵生动”；最终以“形神兼备、以神为主、气韵为最高标准”作为优劣判定依据，而非单纯追求形似或细节精度。

山水画题材：
首先分析山石、树木、水体等物象的结构是否合理，皴法与笔法是否符合自然形态与山体结构；其次评估构图章法是否完整，散点透视是否自然，虚实、疏密、动静关系是否协调，留白是否有效参与空间营造；再次重点判断笔墨变化是否丰富，干湿浓淡是否层次分明，线条是否具有节奏与骨力；最后综合评估画面是否形成连贯统一的意境空间，是否呈现“可行、可望、可游、可居”的整体境界，并以“气韵生动、境由心造、笔墨当随时代”作为最高优劣判断标准，而非单纯写实或细节复杂。

花鸟画题材：
首先分析花卉、禽鸟、草虫、鱼兽等物象的形态结构是否准确自然，比例与动态是否符合生物特征；其次重点判断物象是否具有鲜明的生命感与生动气息，是否体现自然生长节律；再次评估用笔是否灵动有力、富有节奏，墨色与设色是否协调雅致、层次分明；同时分析构图是否疏密有致、主次清晰、虚实得当；最后综合判断作品是否通过物象表达情感与人格象征，即“托物言志、以小见大”，并以“生意盎然、气韵生动、意象统一”作为最高优劣评判依据，而非单纯工细程度或色彩浓艳度。

5. 根据笔墨-气韵-意境三个层次进行评估。
评判时需兼顾艺术真实感、生命感与文化深度，避免仅以画面精致度、工整度或装饰性效果作为高分依据。对于自然笔触的不完美所产生的生命感、节奏感与艺术真实，应给予正向评价；对于过度工整、机械化、装饰化的画面效果，应保持审慎态度。

原则：

笔墨：关注线条质量、运笔控制、墨色层次与结构塑造，判断其是否自然、稳定、生动，而非仅仅是否干净、精细

气韵：关注画面是否具有内在生命流动感、气场贯通性、节奏变化与动势走向，判断作品是否“活”，而非只是构图完整

意境：关注作品是否营造出诗意空间、情绪表达与文化审美高度，是否引发联想与回味，而非堆砌符号或套用意象模板

在综合评价中，意境权重高于气韵，气韵权重高于笔墨。若意境明显不足，即使笔墨精致，整体评分也不应过高。

6. 根据以上所有的评价，给出这张画作的综合艺术评估分数（0-5分），分数必须为整数。

5分：局部与整体在笔墨结构、气韵流动与精神指向上高度同构，意境深远，气韵化生，笔墨随心而不逾法，形成高度统一的生命结构与文化境界，具有不可替代的艺术原创性。

4分：关键局部笔墨精到、气脉贯通，整体节奏自然，意境清远深长，文化气息浓厚，艺术语言成熟稳定，具有鲜明而稳定的艺术品格。

3分：局部具备基本结构与气韵支撑，画面开始“有呼吸”，意境初步成立，但思想深度、文化厚度与局部与整体的协同仍有限。

2分：局部描绘精细但重技巧轻生发，整体结构严谨却气韵不足，精神指向薄弱，艺术表达主要停留在技法与形式层面。

1分：构图完整，形象清晰，具备基本绘画表达，局部结构松散，笔墨僵滞，节奏单一，整体气息闭塞，尚未形成完整艺术语言。

0分：画面虽然好看、精致，但缺乏笔墨逻辑、气韵流动与意境生成，整体停留在表层视觉美感，更接近插画或装饰图。

按以下格式输出分数

最终分数: [整数分数]";

/// Section layout appended to the evaluation prompt so replies parse.
pub const EXPERT_COT_FORMAT_ZH: &str = "

请严格按以下格式组织回复：
画面描述: [内容描述]
题材: [题材分类]
感兴趣区域:
[按 regions_of_interest JSON 格式输出的感兴趣区域，坐标归一化到0-1]
题材评价: [基于题材的专业评价]
笔墨分析: [笔墨分析结果]
气韵分析: [气韵分析结果]
意境分析: [意境分析结果]
最终分数: [整数分数]";

/// Appended once when an evaluator reply carried no readable score.
pub const SCORE_REPROMPT_ZH: &str =
    "你的回复中没有可识别的最终分数。请只按以下格式输出分数，不要输出额外内容。\n\n最终分数: [整数分数]";

/// Asks a language model for text-to-image prompts in `[PromptN]:` form.
pub const T2I_PROMPT_REQUEST_ZH: &str = "\
生成一个聚焦于中国画作的prompt，按格式输出20个详细的、可直接用于文本生成图像模型的prompt

1. 需要充分发挥想象，并且对出现的元素进行详细描述，但不要写出画作的名字

2. 可以指定题材，包括但不限于山水/花鸟/人物

3. 可以指定绘画手法以及色彩

4. 需要符合中国画中的笔墨-气韵-意境的特点

5. 每条prompt应该不少于150词，以中文输出

[Prompt1]: <prompt1>

[Prompt2]: <prompt2>

[Prompt3]: <prompt3>

...

(up to 20 prompts)";

pub const ROUND1_ZH: &str = "\
请尽可能详细描述这幅图像的内容，包括画面主体、构图特点以及可能的艺术风格，使用中文输出，确保描述清晰、详细，不少于100个词。

基于前面的描述，请明确这幅作品的具体题材分类（如：山水画、花鸟画、人物画等）。

人物画（包括历史故事、宗教人物、文人雅士、仕女、市井风俗、农耕商旅、现实人物）

山水画（包括青绿山水、水墨山水、浅绛山水）

花鸟画（包括花卉、禽鸟、翎毛、蔬果、草虫、畜兽、鳞介、鱼藻）

按以下格式输出：
画面描述: [内容描述]
题材: [题材分类]";

pub const ROUND2_ZH: &str = r#"基于上述描述，请你从艺术与视觉结构角度分析画面内容，识别出最具研究价值的感兴趣区域（Region of Interest, ROI），并为每个区域提供精确的 bounding box。

你需要仔细看一下这张图像的内容，然后根据图像的内容分析出具体需要有几个感兴趣区域。

分析要求：
1. 综合考虑中国画的构图方式（如：主次关系、散点透视）、笔墨技法、题材象征意义。

2. 感兴趣区域可以包括：主要描绘对象、视觉中心、具有显著笔墨特征的局部，视觉中心或视觉动线的关键节点。

3. 每个感兴趣区域需给出明确的语义说明。

4. 不要分析题跋章印或者文字部分，聚焦在画作视觉元素本身

输出格式要求：

请以 JSON 格式输出结果，使用归一化的像素坐标（范围0-1），注意精度尽可能准确到小数点后5位，坐标原点为图像左上角。

确保输出为合法 JSON，输出一个 JSON 对象。

使用中文。

{
  "height": {height},
  "width": {width},
  "num_regions": N,
  "regions_of_interest": [
    {
      "label": "区域名称",
      "description": "该区域在中国画中的艺术或研究意义",
      "bounding_box": {
        "x_min": x1,
        "y_min": y1,
        "x_max": x2,
        "y_max": y2
      }
    }
  ]
}"#;

pub const ROUND3_ZH: &str = "\
基于前面的描述，根据该题材所属的特定审美标准，对作品进行简要评价。

人物画题材：

首先检验人物造型是否符合结构与比例，动态是否自然协调；其次重点判断人物是否具备清晰的精神气质、情绪表达与性格特征，尤其关注眼神、姿态与整体神态是否生动；同时分析线条是否具有书法性的节奏、骨力与提按变化，用笔是否支撑人物结构；再综合评估画面整体是否呈现连贯流动的生命感与精神统一性，即“气韵生动”；最终以“形神兼备、以神为主、气韵为最高标准”作为优劣判定依据，而非单纯追求形似或细节精度。

山水画题材：

首先分析山石、树木、水体等物象的结构是否合理，皴法与笔法是否符合自然形态与山体结构；其次评估构图章法是否完整，散点透视是否自然，虚实、疏密、动静关系是否协调，留白是否有效参与空间营造；再次重点判断笔墨变化是否丰富，干湿浓淡是否层次分明，线条是否具有节奏与骨力；最后综合评估画面是否形成连贯统一的意境空间，是否呈现“可行、可望、可游、可居”的整体境界，并以“气韵生动、境由心造、笔墨当随时代”作为最高优劣判断标准，而非单纯写实程度或细节复杂度。

花鸟画题材：

首先分析花卉、禽鸟、草虫、鱼兽等物象的形态结构是否准确自然，比例与动态是否符合生物特征；其次重点判断物象是否具有鲜明的生命感与生动气息，是否体现自然生长节律；再次评估用笔是否灵动有力、富有节奏，墨色与设色是否协调雅致、层次分明；同时分析构图是否疏密有致、主次清晰、虚实得当；最后综合判断作品是否通过物象表达情感与人格象征，即“托物言志、以小见大”，并以“生意盎然、气韵生动、意象统一”作为最高优劣评判依据，而非单纯工细程度或色彩浓艳度。

按以下格式输出：
题材评价: [评价内容]";

pub const ROUND4_ZH: &str = "\
请从 笔墨、气韵、意境 三个层次进行逐级分析。三者之间存在递进关系：

评判时需兼顾艺术真实感、生命感与文化深度，避免仅以画面精致度、工整度或装饰性效果作为高分依据。对于自然笔触的不完美所产生的生命感、节奏感与艺术真实，应给予正向评价；对于过度工整、机械化、装饰化的画面效果，应保持审慎态度。

原则：

笔墨：关注线条质量、运笔控制、墨色层次与结构塑造，判断其是否自然、稳定、生动，而非仅仅是否干净、精细

气韵：关注画面是否具有内在生命流动感、气场贯通性、节奏变化与动势走向，判断作品是否“活”，而非只是构图完整

意境：关注作品是否营造出诗意空间、情绪表达与文化审美高度，是否引发联想与回味，而非堆砌符号或套用意象模板

在综合评价中，意境权重高于气韵，气韵权重高于笔墨。若意境明显不足，即使笔墨精致，整体评分也不应过高。

请按以下顺序进行分析：

1. 笔墨分析：用一段自然语言，评估线条、运笔、墨色变化与造型结构，指出优点与不足。

2. 气韵分析：评估画面整体生命感、动势、节奏与气场流动，判断其是否生动、有呼吸感。

3. 意境分析：评估作品是否营造出明确审美境界，是否具有情绪感染力与文化韵味，是否在有限视觉信息中，构建出超出画面本身的空间感、情绪感与联想空间

按以下格式输出：

笔墨分析: [笔墨分析结果]

气韵分析: [气韵分析结果]

意境分析: [意境分析结果]";

pub const ROUND5_ZH: &str = "\
在综合图像描述、基于题材的艺术分析和评价、RoI感兴趣区域的描述和评价以及三层次分析后，给出这张画作最终的综合艺术评估分数（0-5分），分数必须为整数。

5分：局部与整体在笔墨结构、气韵流动与精神指向上高度同构，意境深远，气韵化生，笔墨随心而不逾法，形成高度统一的生命结构与文化境界，具有不可替代的艺术原创性。

4分：关键局部笔墨精到、气脉贯通，整体节奏自然，意境清远深长，文化气息浓厚，艺术语言成熟稳定，具有鲜明而稳定的艺术品格。

3分：局部具备基本结构与气韵支撑，画面开始“有呼吸”，意境初步成立，但思想深度、文化厚度与局部与整体的协同仍有限。

2分：局部描绘精细但重技巧轻生发，整体结构严谨却气韵不足，精神指向薄弱，艺术表达主要停留在技法与形式层面。

1分：构图完整，形象清晰，具备基本绘画表达，局部结构松散，笔墨僵滞，节奏单一，整体气息闭塞，尚未形成完整艺术语言。

0分：画面虽然好看、精致，缺乏笔墨逻辑、气韵流动与意境生成，整体停留在表层视觉美感，更接近插画或装饰图。

按以下格式输出，不要输出额外内容。

最终分数: [整数分数]";

/// Appended to round 5 when the first answer disagreed with the known score.
pub const ROUND5_RETRY_ZH: &str = "你给出的最终分数与专家评定分数不一致。请重新给出最终分数，必须与专家评定分数一致，只按以下格式输出。\n\n最终分数: [整数分数]";

/// The round prompts in order. Round 2 has `{width}`/`{height}` placeholders.
pub const ROUNDS_ZH: [&str; 5] = [ROUND1_ZH, ROUND2_ZH, ROUND3_ZH, ROUND4_ZH, ROUND5_ZH];

pub fn round_prompt(round: usize, width: u32, height: u32) -> String {
    ROUNDS_ZH[round].replace("{width}", &width.to_string()).replace("{height}", &height.to_string())
}

/// System message that discloses the known label to the constructor model.
pub fn preconditioning_message(score: u8, authentic: bool, theme_hint: Option<&str>) -> String {
    let source = if authentic { "拍卖记录中的真迹作品" } else { "AI生成作品" };
    let mut msg = format!(
        "你是一位中国传统绘画鉴赏专家。本次需要你为一幅画作构建专家级评估思维链。\n\
         作品来源: {source}\n\
         专家评定分数: {score}\n\
         你的所有描述、分析与评价都必须与该来源和专家评定分数保持一致，最终分数必须为 {score}。"
    );
    if let Some(theme) = theme_hint {
        msg.push_str(&format!("\n题材参考: {theme}"));
    }
    msg
}
