use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{EndpointSection, FileConfig};
use super::*;
use crate::bon::{run_bon, BonConfig, BonError, BonRunRecord};
use crate::dataset::{
    apply_expert_reviews, attach_cot, balance_records, build_cots, classify_scroll_type, emit_manifest,
    ingest_synthetic_labels, load_manifest, manifest_to_string, scale_auction_labels, DatasetError, ExpertReview,
    Manifest, Split,
};
use crate::gateway::mock::{ExpertMock, MockImageClient};
use crate::gateway::{
    content_ref, CachedChatClient, ChatClient, ContentStore, EndpointConfig, GenerationRequest, HttpChatClient,
    HttpImageClient, ImageClient, ResponseCache, RetryPolicy, Retrying, Throttled,
};
use crate::grpo::{clipped_surrogate, group_advantages, importance_ratio, GrpoError};
use crate::metrics::{
    evaluate_responses, rank_correlations, rank_correlations_tied, scores_to_ranking, MetricReport,
    RankCorrelationReport,
};
use crate::model::{ExpertResponse, PaintingRecord, Provenance, Score};
use crate::parser::{parse_expert_response, render_response, MarkerLanguage, ParseReport};
use crate::reward::reward_from_report;
use crate::similarity::{Similarity, SimilarityScorer};
use crate::theme::{MajorTheme, Theme};

const DEFAULT_PARALLELISM: usize = 8;
const DEFAULT_INFLIGHT: usize = 8;
const DEFAULT_STORE_DIR: &str = ".inkeval";

struct Ctx<'a> {
    global: &'a GlobalArgs,
    file: FileConfig,
}

#[derive(Clone, Copy)]
enum Role {
    Evaluator,
    Constructor,
    T2i,
}

impl Ctx<'_> {
    fn parallelism(&self) -> usize {
        self.global.parallelism.or(self.file.parallelism).unwrap_or(DEFAULT_PARALLELISM).max(1)
    }

    fn max_inflight(&self) -> usize {
        self.global.max_inflight.or(self.file.max_inflight).unwrap_or(DEFAULT_INFLIGHT).max(1)
    }

    fn cache_dir(&self) -> Option<PathBuf> {
        self.global.cache_dir.clone().or_else(|| self.file.cache_dir.clone())
    }

    fn pool(&self) -> rayon::ThreadPool {
        rayon::ThreadPoolBuilder::new().num_threads(self.parallelism()).build().expect("thread pool")
    }

    fn scorer(&self) -> SimilarityScorer {
        match self.global.similarity_url.clone().or_else(|| self.file.similarity.url.clone()) {
            Some(url) => {
                let timeout = Duration::from_secs(self.file.similarity.timeout_secs.unwrap_or(30));
                SimilarityScorer::remote(url, timeout, self.max_inflight())
            }
            None => SimilarityScorer::builtin(),
        }
    }

    fn endpoint(&self, role: Role) -> EndpointConfig {
        let (flag_url, flag_model, section, prefix, default_model): (_, _, &EndpointSection, _, _) = match role {
            Role::Evaluator => (
                &self.global.evaluator_url,
                &self.global.evaluator_model,
                &self.file.evaluator,
                "INKEVAL_EVALUATOR",
                "evaluator",
            ),
            Role::Constructor => (
                &self.global.constructor_url,
                &self.global.constructor_model,
                &self.file.constructor,
                "INKEVAL_CONSTRUCTOR",
                "constructor",
            ),
            Role::T2i => (&self.global.t2i_url, &self.global.t2i_model, &self.file.t2i, "INKEVAL_T2I", "t2i"),
        };
        let key = std::env::var(format!("{prefix}_KEY")).ok().filter(|k| !k.is_empty()).or_else(|| section.key.clone());
        EndpointConfig {
            base_url: flag_url.clone().or_else(|| section.url.clone()),
            api_key: key,
            model_id: flag_model.clone().or_else(|| section.model.clone()).unwrap_or_else(|| default_model.into()),
            timeout: Duration::from_secs(section.timeout_secs.unwrap_or(120)),
        }
    }

    fn store(&self) -> Arc<ContentStore> {
        let dir = self.cache_dir().unwrap_or_else(|| PathBuf::from(DEFAULT_STORE_DIR));
        Arc::new(ContentStore::at(dir.join("content")))
    }

    fn chat_client(&self, role: Role, store: Arc<ContentStore>) -> Result<Box<dyn ChatClient>, CliError> {
        let http = HttpChatClient::new(self.endpoint(role)).with_store(store);
        let retrying = Retrying::new(Throttled::new(http, self.max_inflight()), self.retry_policy()?);
        let cache = match self.cache_dir() {
            Some(dir) => ResponseCache::at(dir.join("responses")),
            None => ResponseCache::in_memory(),
        };
        Ok(Box::new(CachedChatClient::new(retrying, cache)))
    }

    fn image_client(&self, store: Arc<ContentStore>) -> Result<Box<dyn ImageClient>, CliError> {
        let http = HttpImageClient::new(self.endpoint(Role::T2i), store);
        Ok(Box::new(Retrying::new(Throttled::new(http, self.max_inflight()), self.retry_policy()?)))
    }

    fn retry_policy(&self) -> Result<RetryPolicy, CliError> {
        self.file.retry_policy().map_err(CliError::usage)
    }
}

pub(super) fn dispatch(cli: &Cli) -> Result<Outcome, CliError> {
    let file = match &cli.global.config {
        Some(path) => FileConfig::load(path).map_err(CliError::usage)?,
        None => FileConfig::default(),
    };
    let ctx = Ctx { global: &cli.global, file };
    match &cli.command {
        Command::Parse(a) => cmd_parse(a),
        Command::Reward(a) => cmd_reward(&ctx, a),
        Command::Advantages(a) => cmd_advantages(&ctx, a),
        Command::Surrogate(a) => cmd_surrogate(&ctx, a),
        Command::Evaluate(a) => cmd_evaluate(&ctx, a),
        Command::Bon(a) => cmd_bon(&ctx, a),
        Command::BuildDataset(a) => cmd_build_dataset(&ctx, a),
        Command::HumanCorr(a) => cmd_human_corr(a),
    }
}

fn read_input(path: &Path) -> Result<String, CliError> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| CliError::validation(format!("stdin: {e}")))?;
        return Ok(s);
    }
    std::fs::read_to_string(path).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

fn json_line<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

fn dataset_err(e: DatasetError) -> CliError {
    match e {
        DatasetError::ConstructorUnavailable { .. } => CliError::external(e.to_string()),
        other => CliError::validation(other.to_string()),
    }
}

fn cmd_parse(args: &ParseArgs) -> Result<Outcome, CliError> {
    let text = read_input(&args.input)?;
    let report = parse_expert_response(&text, args.width.max(1), args.height.max(1));
    let mut out = Outcome::ok(json_line(&report));
    if !report.complete {
        out.code = EXIT_VALIDATION;
        let mut problems = report.errors.clone();
        problems.push(format!("missing parts: {}", report.missing_parts.join(", ")));
        out.stderr = format!("incomplete response: {}\n", problems.join("; "));
    }
    Ok(out)
}

#[derive(Deserialize)]
struct ResponseLine {
    id: String,
    response: String,
}

fn read_responses(path: &Path) -> Result<Vec<ResponseLine>, CliError> {
    read_input(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::validation(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn cmd_reward(ctx: &Ctx, args: &RewardArgs) -> Result<Outcome, CliError> {
    let weights = ctx.file.weights([args.w_acc, args.w_bert, args.w_miou, args.w_format]).map_err(CliError::usage)?;
    let manifest = load_manifest(&args.manifest).map_err(dataset_err)?;
    let lines = read_responses(&args.responses)?;
    let by_id: HashMap<&str, &PaintingRecord> = manifest.records.iter().map(|r| (r.id.as_str(), r)).collect();
    if let Some(l) = lines.iter().find(|l| !by_id.contains_key(l.id.as_str())) {
        return Err(CliError::validation(format!("response id {:?} is not in the manifest", l.id)));
    }
    let scorer = ctx.scorer();
    let breakdowns: Vec<_> = ctx.pool().install(|| {
        lines
            .par_iter()
            .map(|l| {
                let rec = by_id[l.id.as_str()];
                let report = parse_expert_response(&l.response, rec.width, rec.height);
                reward_from_report(&report, &rec.gt, weights, &scorer)
            })
            .collect()
    });
    let stdout = match args.format {
        TableFormat::Json => {
            let rows: Vec<Value> =
                lines.iter().zip(&breakdowns).map(|(l, b)| json!({"id": l.id, "reward": b})).collect();
            json_line(&rows)
        }
        TableFormat::Table => {
            let mut s = String::from("id\tr_acc\tr_bert\tr_miou\tr_format\ttotal\n");
            for (l, b) in lines.iter().zip(&breakdowns) {
                s.push_str(&format!(
                    "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\n",
                    l.id, b.r_acc, b.r_bert, b.r_miou, b.r_format, b.total
                ));
            }
            s
        }
    };
    let mut out = Outcome::ok(stdout);
    out.stderr = format!("similarity backend: {}\n", scorer_stamp(&scorer));
    Ok(out)
}

fn scorer_stamp(s: &SimilarityScorer) -> String {
    s.stamp()
}

fn grpo_err(e: GrpoError) -> CliError {
    CliError::validation(e.to_string())
}

fn cmd_advantages(ctx: &Ctx, args: &AdvantagesArgs) -> Result<Outcome, CliError> {
    let floor = ctx.file.grpo(args.std_floor, None).map_err(CliError::usage)?.std_floor;
    let value: Value = serde_json::from_str(&read_input(&args.input)?)
        .map_err(|e| CliError::validation(format!("rewards JSON: {e}")))?;
    let as_group = |v: &Value| -> Result<Vec<f64>, CliError> {
        v.as_array()
            .ok_or_else(|| CliError::validation("expected an array of numbers"))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| CliError::validation(format!("not a number: {x}"))))
            .collect()
    };
    let nested = value.as_array().is_some_and(|a| a.first().is_some_and(Value::is_array));
    let out = if nested {
        let groups = value.as_array().expect("checked");
        let mut all = Vec::with_capacity(groups.len());
        for g in groups {
            all.push(group_advantages(&as_group(g)?, floor).map_err(grpo_err)?);
        }
        json!(all)
    } else {
        json!(group_advantages(&as_group(&value)?, floor).map_err(grpo_err)?)
    };
    let mut s = serde_json::to_string(&out).expect("serializes");
    s.push('\n');
    Ok(Outcome::ok(s))
}

#[derive(Deserialize)]
struct SurrogateInput {
    rewards: Vec<f64>,
    ratios: Option<Vec<f64>>,
    logp_new: Option<Vec<f64>>,
    logp_old: Option<Vec<f64>>,
}

fn cmd_surrogate(ctx: &Ctx, args: &SurrogateArgs) -> Result<Outcome, CliError> {
    let cfg = ctx.file.grpo(args.std_floor, args.clip_epsilon).map_err(CliError::usage)?;
    let input: SurrogateInput = serde_json::from_str(&read_input(&args.input)?)
        .map_err(|e| CliError::validation(format!("surrogate JSON: {e}")))?;
    let ratios = match (input.ratios, input.logp_new, input.logp_old) {
        (Some(r), _, _) => r,
        (None, Some(new), Some(old)) if new.len() == old.len() => {
            new.iter().zip(&old).map(|(n, o)| importance_ratio(*n, *o, cfg.max_ratio)).collect()
        }
        _ => return Err(CliError::validation("need \"ratios\" or equally long \"logp_new\" and \"logp_old\"")),
    };
    let advantages = group_advantages(&input.rewards, cfg.std_floor).map_err(grpo_err)?;
    let objective = clipped_surrogate(&advantages, &ratios, cfg.clip_epsilon).map_err(grpo_err)?;
    Ok(Outcome::ok(json_line(&json!({
        "advantages": advantages,
        "ratios": ratios,
        "clip_epsilon": cfg.clip_epsilon,
        "objective": objective,
    }))))
}

fn evaluate_subset(
    idx: &[usize],
    parsed: &[ParseReport],
    manifest: &Manifest,
    texts: &[(String, String)],
    scorer: &SimilarityScorer,
) -> Result<MetricReport, CliError> {
    let preds: Vec<Option<ExpertResponse>> = idx.iter().map(|&i| parsed[i].response.clone()).collect();
    let gts: Vec<ExpertResponse> = idx.iter().map(|&i| manifest.records[i].gt.clone()).collect();
    let full: Vec<(String, String)> = idx.iter().map(|&i| texts[i].clone()).collect();
    evaluate_responses(&preds, &gts, &full, scorer).map_err(|e| CliError::validation(e.to_string()))
}

fn cmd_evaluate(ctx: &Ctx, args: &EvaluateArgs) -> Result<Outcome, CliError> {
    let manifest = load_manifest(&args.manifest).map_err(dataset_err)?;
    let lines = read_responses(&args.predictions)?;
    let mut by_id: HashMap<&str, &str> = HashMap::new();
    for l in &lines {
        if by_id.insert(l.id.as_str(), l.response.as_str()).is_some() {
            return Err(CliError::validation(format!("duplicate prediction id {:?}", l.id)));
        }
    }
    let manifest_ids: HashSet<&str> = manifest.records.iter().map(|r| r.id.as_str()).collect();
    if let Some(extra) = by_id.keys().find(|id| !manifest_ids.contains(*id)) {
        return Err(CliError::validation(format!("prediction id {extra:?} is not in the manifest")));
    }
    if let Some(missing) = manifest.records.iter().find(|r| !by_id.contains_key(r.id.as_str())) {
        return Err(CliError::validation(format!("no prediction for manifest id {:?}", missing.id)));
    }
    let scorer = ctx.scorer();
    let (parsed, texts): (Vec<ParseReport>, Vec<(String, String)>) = ctx.pool().install(|| {
        manifest
            .records
            .par_iter()
            .map(|r| {
                let text = by_id[r.id.as_str()];
                let reference = render_response(&r.gt, r.width, r.height, MarkerLanguage::Chinese);
                (parse_expert_response(text, r.width, r.height), (text.to_string(), reference))
            })
            .unzip()
    });
    let all: Vec<usize> = (0..manifest.records.len()).collect();
    let overall = evaluate_subset(&all, &parsed, &manifest, &texts, &scorer)?;
    let mut per_type: BTreeMap<String, MetricReport> = BTreeMap::new();
    if args.by_scroll_type {
        let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in manifest.records.iter().enumerate() {
            let kind = classify_scroll_type(r.width, r.height).map_err(dataset_err)?;
            groups.entry(kind.to_string()).or_default().push(i);
        }
        for (kind, idx) in groups {
            per_type.insert(kind, evaluate_subset(&idx, &parsed, &manifest, &texts, &scorer)?);
        }
    }
    let stdout = match args.format {
        ReportFormat::Json => {
            let mut v = serde_json::to_value(&overall).expect("serializes");
            if args.by_scroll_type {
                v["by_scroll_type"] = serde_json::to_value(&per_type).expect("serializes");
            }
            json_line(&v)
        }
        ReportFormat::Kv => {
            let mut s = overall.to_kv();
            for (kind, report) in &per_type {
                for line in report.to_kv().lines() {
                    s.push_str(&format!("{kind}.{line}\n"));
                }
            }
            s
        }
    };
    Ok(Outcome::ok(stdout))
}

fn parse_mock_scores(list: &str) -> Result<Vec<Option<u8>>, CliError> {
    list.split(',')
        .map(str::trim)
        .map(|t| match t {
            "x" | "X" | "-" => Ok(None),
            _ => t
                .parse::<u8>()
                .ok()
                .filter(|v| *v <= 5)
                .map(Some)
                .ok_or_else(|| CliError::usage(format!("bad mock score {t:?}; use 0-5 or x"))),
        })
        .collect()
}

fn cmd_bon(ctx: &Ctx, args: &BonArgs) -> Result<Outcome, CliError> {
    if args.n == 0 {
        return Err(CliError::usage("n must be at least 1"));
    }
    let prompt = match (&args.prompt, &args.prompt_file) {
        (Some(p), _) => p.clone(),
        (None, Some(f)) => read_input(f)?.trim().to_string(),
        (None, None) => return Err(CliError::usage("--prompt or --prompt-file is required")),
    };
    if prompt.is_empty() {
        return Err(CliError::usage("prompt is empty"));
    }
    let config = BonConfig {
        n: args.n,
        base_seed: args.seed,
        aspect: args.aspect.into(),
        evaluator_model: ctx.endpoint(Role::Evaluator).model_id,
        t2i_model: ctx.endpoint(Role::T2i).model_id,
        parallelism: ctx.parallelism(),
    };
    let result = if args.mock {
        let store = Arc::new(ContentStore::in_memory());
        let t2i = MockImageClient::new(Arc::clone(&store));
        let mut evaluator = ExpertMock::new();
        if let Some(list) = &args.mock_scores {
            for (i, score) in parse_mock_scores(list)?.into_iter().enumerate() {
                let req = GenerationRequest {
                    prompt: prompt.clone(),
                    aspect: config.aspect,
                    model_id: config.t2i_model.clone(),
                    seed: Some(config.base_seed.wrapping_add(i as u64)),
                };
                evaluator = evaluator.with_score(content_ref(&MockImageClient::image_bytes(&req)), score);
            }
        }
        run_bon(&prompt, &config, &t2i, &evaluator)
    } else {
        let store = ctx.store();
        let t2i = ctx.image_client(Arc::clone(&store))?;
        let evaluator = ctx.chat_client(Role::Evaluator, store)?;
        run_bon(&prompt, &config, t2i.as_ref(), evaluator.as_ref())
    };
    let (record, failure): (BonRunRecord, Option<CliError>) = match result {
        Ok(r) => (r, None),
        Err(BonError::InvalidN) => return Err(CliError::usage("n must be at least 1")),
        Err(BonError::NoValidCandidates(record)) => {
            let external = record
                .candidates
                .iter()
                .all(|c| c.failure_note.as_deref().is_some_and(|n| !n.starts_with("ScoreUnparseable")));
            let msg = format!("NoValidCandidates: none of the {} candidates could be scored", record.n);
            let err = if external { CliError::external(msg) } else { CliError::validation(msg) };
            (*record, Some(err))
        }
    };
    let line = record.to_jsonl();
    if let Some(path) = &args.output {
        use std::io::Write;
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        f.write_all(line.as_bytes()).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    }
    let mut out = Outcome::ok(line);
    if let Some(err) = failure {
        out.code = err.code;
        out.stderr = format!("error: {}\n", err.message);
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CsvSource {
    csv: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourcesConfig {
    #[serde(default = "default_split")]
    split: Split,
    #[serde(default)]
    seed: u64,
    balance_tolerance: Option<f64>,
    #[serde(default = "default_true")]
    build_cot: bool,
    authentic: Option<CsvSource>,
    synthetic: Option<CsvSource>,
    reviews: Option<CsvSource>,
}

fn default_split() -> Split {
    Split::Train
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Deserialize)]
struct AuthenticRow {
    id: String,
    image_ref: String,
    width: u32,
    height: u32,
    valuation: f64,
    #[serde(default)]
    theme_major: Option<String>,
    #[serde(default)]
    theme_sub: Option<String>,
}

#[derive(Debug, Deserialize)]
struct SyntheticRow {
    id: String,
    image_ref: String,
    width: u32,
    height: u32,
    label: i64,
    #[serde(default)]
    rejected: Option<bool>,
    #[serde(default)]
    theme_major: Option<String>,
    #[serde(default)]
    theme_sub: Option<String>,
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    reader.deserialize().map(|r| r.map_err(|e| CliError::validation(format!("{}: {e}", path.display())))).collect()
}

fn parse_theme(id: &str, major: Option<&str>, sub: Option<&str>) -> Result<Option<Theme>, CliError> {
    let major = match major.filter(|m| !m.is_empty()) {
        None => return Ok(None),
        Some(m) => {
            MajorTheme::from_name(m).ok_or_else(|| CliError::validation(format!("{id}: unknown theme {m:?}")))?
        }
    };
    match sub.filter(|s| !s.is_empty()) {
        None => Ok(Some(Theme::new(major))),
        Some(s) => Theme::with_sub(major, s).map(Some).map_err(|e| CliError::validation(format!("{id}: {e}"))),
    }
}

/// A synthetic record; authentic callers override provenance and valuation.
fn new_record(
    id: &str,
    image_ref: &str,
    width: u32,
    height: u32,
    score: Score,
    theme: Option<Theme>,
) -> PaintingRecord {
    PaintingRecord {
        id: id.to_string(),
        image_ref: image_ref.to_string(),
        width,
        height,
        provenance: Provenance::Synthetic,
        raw_valuation: None,
        gt: ExpertResponse { final_score: Some(score), theme, ..Default::default() },
        validated: false,
    }
}

fn cmd_build_dataset(ctx: &Ctx, args: &BuildDatasetArgs) -> Result<Outcome, CliError> {
    let text = read_input(&args.sources)?;
    let sources: SourcesConfig =
        toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", args.sources.display())))?;
    let base = args.sources.parent().map(Path::to_path_buf).unwrap_or_default();
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };

    let mut records = Vec::new();
    if let Some(src) = &sources.authentic {
        let rows: Vec<AuthenticRow> = read_csv(&resolve(&src.csv))?;
        let vals: Vec<(String, f64)> = rows.iter().map(|r| (r.id.clone(), r.valuation)).collect();
        let scores = scale_auction_labels(&vals).map_err(dataset_err)?;
        for (row, (_, score)) in rows.iter().zip(scores) {
            let theme = parse_theme(&row.id, row.theme_major.as_deref(), row.theme_sub.as_deref())?;
            records.push(PaintingRecord {
                provenance: Provenance::Authentic,
                raw_valuation: Some(row.valuation),
                ..new_record(&row.id, &row.image_ref, row.width, row.height, score, theme)
            });
        }
    }
    if let Some(src) = &sources.synthetic {
        let rows: Vec<SyntheticRow> = read_csv(&resolve(&src.csv))?;
        let labels: Vec<(String, i64)> = rows.iter().map(|r| (r.id.clone(), r.label)).collect();
        let rejected: HashSet<String> =
            rows.iter().filter(|r| r.rejected == Some(true)).map(|r| r.id.clone()).collect();
        let kept: HashMap<String, Score> =
            ingest_synthetic_labels(&labels, &rejected).map_err(dataset_err)?.into_iter().collect();
        for row in &rows {
            if let Some(score) = kept.get(&row.id) {
                let theme = parse_theme(&row.id, row.theme_major.as_deref(), row.theme_sub.as_deref())?;
                records.push(new_record(&row.id, &row.image_ref, row.width, row.height, *score, theme));
            }
        }
    }
    if records.is_empty() {
        return Err(CliError::validation("sources produced no records"));
    }
    if let Some(tol) = sources.balance_tolerance {
        records = balance_records(records, tol, sources.seed);
    }

    let mut queue = Vec::new();
    if sources.build_cot {
        let mock = ExpertMock::new();
        let real;
        let (constructor, model): (&dyn ChatClient, String) = if args.mock {
            (&mock, "mock-constructor".into())
        } else {
            real = ctx.chat_client(Role::Constructor, ctx.store())?;
            (real.as_ref(), ctx.endpoint(Role::Constructor).model_id)
        };
        let outcomes = build_cots(&records, constructor, &model, ctx.parallelism());
        let mut by_id: HashMap<String, _> = HashMap::new();
        for (id, result) in outcomes {
            by_id.insert(id, result.map_err(dataset_err)?);
        }
        for rec in &mut records {
            let outcome = &by_id[&rec.id];
            attach_cot(rec, outcome);
            if outcome.is_flagged() {
                queue.push(json!({"id": rec.id, "flags": outcome.flags, "transcript": outcome.transcript}));
            }
        }
    }
    let mut removed = Vec::new();
    if let Some(src) = &sources.reviews {
        let reviews: Vec<ExpertReview> = read_csv(&resolve(&src.csv))?;
        removed = apply_expert_reviews(&mut records, &reviews);
    }

    let mut manifest = Manifest::new(sources.split, records);
    manifest.sort_by_id();
    queue.sort_by(|a, b| a["id"].as_str().cmp(&b["id"].as_str()));

    let mut tiers = [0usize; 6];
    for r in &manifest.records {
        if let Some(s) = r.gt.final_score {
            tiers[s.value() as usize] += 1;
        }
    }
    let summary = format!(
        "records={} score5={} score4={} score3={} score2={} score1={} score0={} flagged={} removed_by_review={}\n",
        manifest.records.len(),
        tiers[5],
        tiers[4],
        tiers[3],
        tiers[2],
        tiers[1],
        tiers[0],
        queue.len(),
        removed.len()
    );

    let queue_text: String = queue.iter().map(|q| format!("{q}\n")).collect();
    let mut out = Outcome { code: EXIT_OK, stdout: String::new(), stderr: summary };
    match &args.output {
        Some(path) => {
            emit_manifest(&manifest, path).map_err(dataset_err)?;
            let qpath = args.review_queue.clone().unwrap_or_else(|| path.with_extension("review.jsonl"));
            if !queue.is_empty() || args.review_queue.is_some() {
                std::fs::write(&qpath, &queue_text)
                    .map_err(|e| CliError::validation(format!("{}: {e}", qpath.display())))?;
            }
        }
        None => {
            out.stdout = manifest_to_string(&manifest).map_err(dataset_err)?;
            if let Some(qpath) = &args.review_queue {
                std::fs::write(qpath, &queue_text)
                    .map_err(|e| CliError::validation(format!("{}: {e}", qpath.display())))?;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct ScoreRow {
    #[serde(default)]
    group: Option<String>,
    item: String,
    score: f64,
}

#[derive(Debug, Deserialize)]
struct RankRow {
    #[serde(default)]
    group: Option<String>,
    item: String,
    rank: f64,
}

#[derive(Debug, Serialize)]
struct GroupCorrelation {
    group: String,
    #[serde(flatten)]
    report: RankCorrelationReport,
}

fn cmd_human_corr(args: &HumanCorrArgs) -> Result<Outcome, CliError> {
    let scores: Vec<ScoreRow> = read_csv(&args.model_scores)?;
    let ranks: Vec<RankRow> = read_csv(&args.human_rankings)?;
    let mut model: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
    for r in scores {
        model.entry(r.group.unwrap_or_default()).or_default().push((r.item, r.score));
    }
    let mut human: BTreeMap<String, HashMap<String, f64>> = BTreeMap::new();
    for r in ranks {
        if human.entry(r.group.clone().unwrap_or_default()).or_default().insert(r.item.clone(), r.rank).is_some() {
            return Err(CliError::validation(format!("duplicate human rank for item {:?}", r.item)));
        }
    }
    if model.keys().ne(human.keys()) {
        return Err(CliError::validation("model and human files list different groups"));
    }
    let mut per_group = Vec::new();
    for (group, items) in &model {
        let h = &human[group];
        if items.len() != h.len() || items.iter().any(|(item, _)| !h.contains_key(item)) {
            return Err(CliError::validation(format!("group {group:?}: model and human items differ")));
        }
        let model_scores: Vec<f64> = items.iter().map(|(_, s)| *s).collect();
        let human_ranks: Vec<f64> = items.iter().map(|(item, _)| h[item]).collect();
        let as_perm: Option<Vec<usize>> =
            human_ranks.iter().map(|&r| (r.fract() == 0.0 && r >= 1.0).then_some(r as usize)).collect();
        let err = |e: crate::metrics::MetricsError| CliError::validation(format!("group {group:?}: {e}"));
        let model_ranks = scores_to_ranking(&model_scores).map_err(err)?;
        let report = match as_perm.map(|p| rank_correlations(&p, &model_ranks)) {
            Some(Ok(r)) => r,
            _ => {
                let negated: Vec<f64> = human_ranks.iter().map(|r| -r).collect();
                rank_correlations_tied(&negated, &model_scores).map_err(err)?
            }
        };
        per_group.push(GroupCorrelation { group: group.clone(), report });
    }
    let g = per_group.len() as f64;
    let mean = |f: fn(&RankCorrelationReport) -> f64| per_group.iter().map(|p| f(&p.report)).sum::<f64>() / g;
    let variants: HashSet<_> = per_group.iter().map(|p| p.report.tau_variant).collect();
    let variant = match (variants.len(), variants.iter().next()) {
        (1, Some(v)) => serde_json::to_value(v).expect("serializes"),
        _ => json!("mixed"),
    };
    Ok(Outcome::ok(json_line(&json!({
        "groups": per_group.len(),
        "kendall_tau": mean(|r| r.kendall_tau),
        "spearman_rho": mean(|r| r.spearman_rho),
        "top1_accuracy": mean(|r| r.top1_accuracy),
        "pairwise_accuracy": mean(|r| r.pairwise_accuracy),
        "tau_variant": variant,
        "per_group": per_group,
    }))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mock_score_list() {
        assert_eq!(parse_mock_scores("2, x,5").unwrap(), [Some(2), None, Some(5)]);
        assert!(parse_mock_scores("7").is_err());
    }
}
