//! Deterministic stand-ins for model endpoints.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, LazyLock, Mutex};

use regex::Regex;
use sha2::{Digest, Sha256};

use super::{ChatClient, ChatRequest, ContentStore, GatewayError, GenerationRequest, ImageClient};
use crate::model::{BoundingBox, ExpertResponse, RoiRegion, Score, TierEvaluation};
use crate::parser::{render_response, render_roi_json, MarkerLanguage};
use crate::prompts::{ROUND5_RETRY_ZH, SCORE_REPROMPT_ZH};
use crate::theme::{detect_theme, MajorTheme, Theme};

type Responder = Box<dyn Fn(&ChatRequest) -> Result<String, GatewayError> + Send + Sync>;

/// Chat client backed by a closure. Counts calls.
pub struct MockChatClient {
    responder: Responder,
    calls: AtomicUsize,
}

impl MockChatClient {
    pub fn new(responder: impl Fn(&ChatRequest) -> Result<String, GatewayError> + Send + Sync + 'static) -> Self {
        MockChatClient { responder: Box::new(responder), calls: AtomicUsize::new(0) }
    }

    pub fn fixed(text: impl Into<String>) -> Self {
        let text = text.into();
        MockChatClient::new(move |_| Ok(text.clone()))
    }

    /// Answers with `script` in order, then fails with `EndpointUnavailable`.
    pub fn scripted(script: Vec<Result<String, GatewayError>>) -> Self {
        let queue = Mutex::new(VecDeque::from(script));
        MockChatClient::new(move |_| {
            queue
                .lock()
                .unwrap_or_else(|p| p.into_inner())
                .pop_front()
                .unwrap_or_else(|| Err(GatewayError::EndpointUnavailable("mock script exhausted".into())))
        })
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatClient for MockChatClient {
    fn chat(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        request.validate()?;
        (self.responder)(request)
    }
}

/// Image client whose output bytes are a pure function of the request.
pub struct MockImageClient {
    store: Arc<ContentStore>,
    calls: AtomicUsize,
}

impl MockImageClient {
    pub fn new(store: Arc<ContentStore>) -> Self {
        MockImageClient { store, calls: AtomicUsize::new(0) }
    }

    pub fn image_bytes(request: &GenerationRequest) -> Vec<u8> {
        let mut bytes = b"MOCKIMG\n".to_vec();
        bytes.extend(serde_json::to_vec(request).expect("requests always serialize"));
        bytes
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ImageClient for MockImageClient {
    fn generate_image(&self, request: &GenerationRequest) -> Result<String, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        request.validate()?;
        self.store.put(&Self::image_bytes(request))
    }
}

/// How the simulated constructor answers the final-score round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreDrift {
    /// Always agrees with the disclosed score.
    #[default]
    None,
    /// Disagrees once, then agrees when asked again.
    FirstAnswer,
    /// Never agrees.
    Always,
}

static DISCLOSED_SCORE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"专家评定分数[:：]\s*(\d)").unwrap());
static THEME_HINT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"题材参考[:：]\s*(\S+)").unwrap());
static DIMENSION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#""(width|height)":\s*(\d+)"#).unwrap());

const QUALITY: [&str; 6] = [
    "画面装饰化明显，笔墨逻辑缺失",
    "笔墨僵滞，节奏单一，气息闭塞",
    "描绘精细而重技巧轻生发",
    "局部具备气韵支撑，意境初步成立",
    "关键局部笔墨精到，气脉贯通",
    "意境深远，气韵化生，笔墨随心而不逾法",
];

fn digest(text: &str) -> [u8; 32] {
    Sha256::digest(text.as_bytes()).into()
}

/// A simulated expert that answers both single-turn evaluation prompts and
/// the five-round construction dialogue.
///
/// Evaluation: the score for an image is taken from [`ExpertMock::with_score`]
/// overrides, else derived from a hash of the image reference. An override
/// of `None` makes the image unscoreable (replies never contain a score).
/// Construction: a system message disclosing the score switches the mock
/// into dialogue mode; it answers round `k` by the number of user turns.
#[derive(Debug, Clone, Default)]
pub struct ExpertMock {
    overrides: HashMap<String, Option<u8>>,
    drift: ScoreDrift,
    english: bool,
}

impl ExpertMock {
    pub fn new() -> Self {
        ExpertMock::default()
    }

    pub fn with_score(mut self, image_ref: impl Into<String>, score: Option<u8>) -> Self {
        self.overrides.insert(image_ref.into(), score);
        self
    }

    pub fn with_drift(mut self, drift: ScoreDrift) -> Self {
        self.drift = drift;
        self
    }

    /// Use English section markers in evaluation replies.
    pub fn english(mut self) -> Self {
        self.english = true;
        self
    }

    /// The score this mock assigns to `image_ref` in evaluation mode.
    pub fn score_for(&self, image_ref: &str) -> Option<u8> {
        match self.overrides.get(image_ref) {
            Some(s) => *s,
            None => Some(digest(image_ref)[0] % 6),
        }
    }

    fn theme_for(seed: &[u8; 32]) -> Theme {
        let major = MajorTheme::ALL[seed[1] as usize % 3];
        let subs = major.sub_categories();
        Theme::with_sub(major, subs[seed[2] as usize % subs.len()].0).expect("sub belongs to major")
    }

    fn rois_for(seed: &[u8; 32]) -> Vec<RoiRegion> {
        let n = 1 + seed[3] as usize % 3;
        (0..n)
            .map(|i| {
                let a = seed[4 + i] as f64 / 255.0 * 0.4;
                let b = seed[8 + i] as f64 / 255.0 * 0.4;
                let bbox = BoundingBox::new(a, b, a + 0.3 + 0.05 * i as f64, b + 0.3).expect("box inside unit square");
                RoiRegion::new(format!("区域{}", i + 1), format!("局部{}的笔墨与构图关系", i + 1), bbox)
                    .expect("non-empty fields")
            })
            .collect()
    }

    fn response(&self, key: &str, score: Option<u8>, theme: Option<Theme>) -> ExpertResponse {
        let seed = digest(key);
        let theme = theme.unwrap_or_else(|| Self::theme_for(&seed));
        let quality = QUALITY[score.unwrap_or(2) as usize];
        ExpertResponse {
            caption: format!("画面以{}为主体，构图开合有致，{}。", theme.statement(), quality),
            theme_text: theme.statement(),
            theme: Some(theme),
            rois: Some(Self::rois_for(&seed)),
            theme_eval: format!("依题材标准观之，{quality}。"),
            tier_eval: TierEvaluation {
                brush_ink: format!("笔墨方面，{quality}。"),
                spirit_resonance: "气韵方面，画面节奏与动势相互呼应。".into(),
                artistic_conception: "意境方面，留白营造出可游可居的空间。".into(),
            },
            final_score: score.map(|s| Score::new(s as i64).expect("mock scores are in range")),
            raw_text: String::new(),
        }
    }

    fn evaluate(&self, request: &ChatRequest) -> String {
        let image = request.image_ref().unwrap_or_default();
        let score = self.score_for(image);
        if request.last_user_text() == Some(SCORE_REPROMPT_ZH) {
            return match score {
                Some(s) => format!("最终分数: {s}"),
                None => "无法给出分数。".into(),
            };
        }
        let lang = if self.english { MarkerLanguage::English } else { MarkerLanguage::Chinese };
        render_response(&self.response(image, score, None), 1024, 1024, lang)
    }

    fn construct(&self, request: &ChatRequest, disclosed: u8) -> String {
        let image = request.image_ref().unwrap_or_default();
        let hint = request.system_text().and_then(|s| THEME_HINT.captures(s)).and_then(|c| detect_theme(&c[1]));
        let r = self.response(image, Some(disclosed), hint);
        let round = request.user_turns();
        let last = request.last_user_text().unwrap_or_default();
        let drifted = (disclosed + 1) % 6;
        match round {
            1 => format!("画面描述: {}\n题材: {}", r.caption, r.theme_text),
            2 => {
                let dim = |name: &str| {
                    DIMENSION
                        .captures_iter(last)
                        .find(|c| &c[1] == name)
                        .and_then(|c| c[2].parse().ok())
                        .unwrap_or(1024)
                };
                render_roi_json(r.rois(), dim("width"), dim("height"))
            }
            3 => format!("题材评价: {}", r.theme_eval),
            4 => format!(
                "笔墨分析: {}\n\n气韵分析: {}\n\n意境分析: {}",
                r.tier_eval.brush_ink, r.tier_eval.spirit_resonance, r.tier_eval.artistic_conception
            ),
            _ => {
                let retry = last == ROUND5_RETRY_ZH;
                let score = match (self.drift, retry) {
                    (ScoreDrift::None, _) | (ScoreDrift::FirstAnswer, true) => disclosed,
                    _ => drifted,
                };
                format!("最终分数: {score}")
            }
        }
    }
}

impl ChatClient for ExpertMock {
    fn chat(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        request.validate()?;
        let disclosed =
            request.system_text().and_then(|s| DISCLOSED_SCORE.captures(s)).and_then(|c| c[1].parse::<u8>().ok());
        Ok(match disclosed {
            Some(score) => self.construct(request, score),
            None => self.evaluate(request),
        })
    }
}

/// Prompt writer that answers with `count` numbered `[PromptN]:` entries.
pub fn prompt_writer_mock(count: usize) -> MockChatClient {
    MockChatClient::new(move |req| {
        let salt = req.seed.unwrap_or(0);
        Ok((1..=count)
            .map(|i| {
                let theme = ["山水", "花鸟", "人物"][(i + salt as usize) % 3];
                format!("[Prompt{i}]: 一幅{theme}题材的中国画，水墨淡彩，留白含蓄，编号{salt}-{i}。")
            })
            .collect::<Vec<_>>()
            .join("\n\n"))
    })
}
