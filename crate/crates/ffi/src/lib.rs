//! C ABI over the `inkeval` core.
//!
//! Every entry point returns an [`InkevalStatus`]; results are written through
//! out-pointers. On failure a message is available from
//! [`inkeval_last_error`] on the same thread until the next failing call.
//! Strings returned by the library are freed with [`inkeval_string_free`];
//! the reward scorer handle with [`inkeval_scorer_free`].
//!
//! Scores cross the boundary as `int32_t`, with `-1` meaning "no score".
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::time::Duration;

use inkeval::grpo::{clipped_surrogate, group_advantages};
use inkeval::metrics::{rank_correlations, rank_correlations_tied, TauVariant};
use inkeval::model::{BoundingBox, RewardWeights, Score};
use inkeval::parser::parse_expert_response;
use inkeval::reward::{accuracy_reward, final_reward, iou};
use inkeval::similarity::SimilarityScorer;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InkevalStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    /// The input was understood but the computation rejected it (e.g. a group
    /// of one sample, or rankings that are not permutations).
    Rejected = 4,
    /// A Rust panic was caught at the boundary.
    Internal = 5,
}

/// Reward terms for one response.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InkevalReward {
    pub r_acc: f64,
    pub r_bert: f64,
    pub r_miou: f64,
    pub r_format: f64,
    pub total: f64,
}

/// Rank agreement between two orderings.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InkevalRankReport {
    pub n: usize,
    pub kendall_tau: f64,
    pub spearman_rho: f64,
    pub top1_accuracy: f64,
    pub pairwise_accuracy: f64,
    /// 0 for tau-a (tie-free input), 1 for tau-b.
    pub tau_variant: i32,
}

/// Opaque reward scorer: a similarity backend plus reward weights.
pub struct InkevalScorer {
    similarity: SimilarityScorer,
    weights: RewardWeights,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(InkevalStatus, String);

impl Failure {
    fn null(what: &str) -> Self {
        Failure(InkevalStatus::NullPointer, format!("{what} is null"))
    }
    fn arg(msg: impl Into<String>) -> Self {
        Failure(InkevalStatus::InvalidArgument, msg.into())
    }
    fn rejected(e: impl std::fmt::Display) -> Self {
        Failure(InkevalStatus::Rejected, e.to_string())
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> InkevalStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => InkevalStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            InkevalStatus::Internal
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(InkevalStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::null(what))
}

fn score(v: i32, what: &str) -> Result<Option<Score>, Failure> {
    match v {
        -1 => Ok(None),
        _ => Score::new(v.into()).map(Some).map_err(|e| Failure::arg(format!("{what}: {e}"))),
    }
}

fn bbox(c: [f64; 4]) -> Result<BoundingBox, Failure> {
    BoundingBox::new(c[0], c[1], c[2], c[3]).map_err(|e| Failure::arg(e.to_string()))
}

fn owned_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(InkevalStatus::Internal, "interior NUL in output".into()))
}

fn rank_report(r: inkeval::metrics::RankCorrelationReport) -> InkevalRankReport {
    InkevalRankReport {
        n: r.n,
        kendall_tau: r.kendall_tau,
        spearman_rho: r.spearman_rho,
        top1_accuracy: r.top1_accuracy,
        pairwise_accuracy: r.pairwise_accuracy,
        tau_variant: match r.tau_variant {
            TauVariant::TauA => 0,
            TauVariant::TauB => 1,
        },
    }
}

/// Message of the last failing call on this thread, or null. The pointer is
/// owned by the library and valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn inkeval_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn inkeval_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn inkeval_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a scorer with the built-in token-F1 similarity and default weights.
#[no_mangle]
pub unsafe extern "C" fn inkeval_scorer_new(out_scorer: *mut *mut InkevalScorer) -> InkevalStatus {
    guard(|| {
        let slot = out(out_scorer, "out_scorer")?;
        let scorer = InkevalScorer { similarity: SimilarityScorer::builtin(), weights: RewardWeights::default() };
        *slot = Box::into_raw(Box::new(scorer));
        Ok(())
    })
}

/// Creates a scorer that asks the similarity service at `base_url`, falling
/// back to the built-in measure when it is unreachable.
#[no_mangle]
pub unsafe extern "C" fn inkeval_scorer_new_remote(
    base_url: *const c_char,
    timeout_ms: u64,
    out_scorer: *mut *mut InkevalScorer,
) -> InkevalStatus {
    guard(|| {
        let url = text(base_url, "base_url")?;
        if url.trim().is_empty() {
            return Err(Failure::arg("base_url is empty"));
        }
        let slot = out(out_scorer, "out_scorer")?;
        let similarity = SimilarityScorer::remote(url, Duration::from_millis(timeout_ms.max(1)), 8);
        *slot = Box::into_raw(Box::new(InkevalScorer { similarity, weights: RewardWeights::default() }));
        Ok(())
    })
}

/// Replaces the reward weights. Weights must be finite, non-negative and not all zero.
#[no_mangle]
pub unsafe extern "C" fn inkeval_scorer_set_weights(
    scorer: *mut InkevalScorer,
    w_acc: f64,
    w_bert: f64,
    w_miou: f64,
    w_format: f64,
) -> InkevalStatus {
    guard(|| {
        let scorer = out(scorer, "scorer")?;
        scorer.weights =
            RewardWeights::new(w_acc, w_bert, w_miou, w_format).map_err(|e| Failure::arg(e.to_string()))?;
        Ok(())
    })
}

/// Destroys a scorer. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn inkeval_scorer_free(scorer: *mut InkevalScorer) {
    if !scorer.is_null() {
        drop(Box::from_raw(scorer));
    }
}

/// Scores `response` against the reference response text `reference`, both
/// parsed for an image of `width` x `height` pixels. The reference must
/// contain a final score.
#[no_mangle]
pub unsafe extern "C" fn inkeval_final_reward(
    scorer: *const InkevalScorer,
    response: *const c_char,
    reference: *const c_char,
    width: u32,
    height: u32,
    out_reward: *mut InkevalReward,
) -> InkevalStatus {
    guard(|| {
        let scorer = scorer.as_ref().ok_or_else(|| Failure::null("scorer"))?;
        let response = text(response, "response")?;
        let reference = text(reference, "reference")?;
        let slot = out(out_reward, "out_reward")?;
        let gt = parse_expert_response(reference, width, height)
            .response
            .filter(|r| r.final_score.is_some())
            .ok_or_else(|| Failure::arg("reference has no final score"))?;
        let r = final_reward(response, &gt, width, height, scorer.weights, &scorer.similarity);
        *slot =
            InkevalReward { r_acc: r.r_acc, r_bert: r.r_bert, r_miou: r.r_miou, r_format: r.r_format, total: r.total };
        Ok(())
    })
}

/// Score-accuracy term for scores in 0..=5; `predicted` may be -1.
#[no_mangle]
pub unsafe extern "C" fn inkeval_accuracy_reward(predicted: i32, reference: i32, out_value: *mut f64) -> InkevalStatus {
    guard(|| {
        let gt = score(reference, "reference")?.ok_or_else(|| Failure::arg("reference score is required"))?;
        let p = score(predicted, "predicted")?;
        *out(out_value, "out_value")? = accuracy_reward(p, gt);
        Ok(())
    })
}

/// IoU of two normalized boxes given as `[x_min, y_min, x_max, y_max]`.
#[no_mangle]
pub unsafe extern "C" fn inkeval_iou(a: *const f64, b: *const f64, out_value: *mut f64) -> InkevalStatus {
    guard(|| {
        let a = slice(a, 4, "a")?;
        let b = slice(b, 4, "b")?;
        let (a, b) = (bbox([a[0], a[1], a[2], a[3]])?, bbox([b[0], b[1], b[2], b[3]])?);
        *out(out_value, "out_value")? = iou(&a, &b);
        Ok(())
    })
}

/// Group-normalized advantages. `out_advantages` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn inkeval_group_advantages(
    rewards: *const f64,
    len: usize,
    std_floor: f64,
    out_advantages: *mut f64,
) -> InkevalStatus {
    guard(|| {
        let rewards = slice(rewards, len, "rewards")?;
        let adv = group_advantages(rewards, std_floor).map_err(Failure::rejected)?;
        if out_advantages.is_null() {
            return Err(Failure::null("out_advantages"));
        }
        std::slice::from_raw_parts_mut(out_advantages, len).copy_from_slice(&adv);
        Ok(())
    })
}

/// Mean clipped surrogate objective over `len` samples.
#[no_mangle]
pub unsafe extern "C" fn inkeval_clipped_surrogate(
    advantages: *const f64,
    ratios: *const f64,
    len: usize,
    clip_epsilon: f64,
    out_value: *mut f64,
) -> InkevalStatus {
    guard(|| {
        let adv = slice(advantages, len, "advantages")?;
        let ratios = slice(ratios, len, "ratios")?;
        *out(out_value, "out_value")? = clipped_surrogate(adv, ratios, clip_epsilon).map_err(Failure::rejected)?;
        Ok(())
    })
}

/// Parses an expert response into a JSON parse report written to
/// `out_json` (free with [`inkeval_string_free`]). Incomplete responses are
/// not an error; check the report's `complete` field.
#[no_mangle]
pub unsafe extern "C" fn inkeval_parse_response(
    response: *const c_char,
    width: u32,
    height: u32,
    out_json: *mut *mut c_char,
) -> InkevalStatus {
    guard(|| {
        let response = text(response, "response")?;
        let slot = out(out_json, "out_json")?;
        let report = parse_expert_response(response, width, height);
        let json = serde_json::to_string(&report).map_err(|e| Failure(InkevalStatus::Internal, e.to_string()))?;
        *slot = owned_string(json)?;
        Ok(())
    })
}

/// Correlations between two 1-based tie-free rankings of `len` items.
#[no_mangle]
pub unsafe extern "C" fn inkeval_rank_correlations(
    rank_a: *const usize,
    rank_b: *const usize,
    len: usize,
    out_report: *mut InkevalRankReport,
) -> InkevalStatus {
    guard(|| {
        let a = slice(rank_a, len, "rank_a")?;
        let b = slice(rank_b, len, "rank_b")?;
        *out(out_report, "out_report")? = rank_report(rank_correlations(a, b).map_err(Failure::rejected)?);
        Ok(())
    })
}

/// Correlations between two score vectors that may contain ties (higher is better).
#[no_mangle]
pub unsafe extern "C" fn inkeval_rank_correlations_tied(
    scores_a: *const f64,
    scores_b: *const f64,
    len: usize,
    out_report: *mut InkevalRankReport,
) -> InkevalStatus {
    guard(|| {
        let a = slice(scores_a, len, "scores_a")?;
        let b = slice(scores_b, len, "scores_b")?;
        *out(out_report, "out_report")? = rank_report(rank_correlations_tied(a, b).map_err(Failure::rejected)?);
        Ok(())
    })
}

/// Maps auction valuations to 3/4/5 score tiers, in input order.
/// `out_scores` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn inkeval_scale_auction_labels(
    valuations: *const f64,
    len: usize,
    out_scores: *mut u8,
) -> InkevalStatus {
    guard(|| {
        let vals = slice(valuations, len, "valuations")?;
        let input: Vec<(String, f64)> = vals.iter().enumerate().map(|(i, v)| (i.to_string(), *v)).collect();
        let tiers = inkeval::dataset::scale_auction_labels(&input).map_err(Failure::rejected)?;
        if out_scores.is_null() {
            return Err(Failure::null("out_scores"));
        }
        let dst = std::slice::from_raw_parts_mut(out_scores, len);
        for (d, (_, s)) in dst.iter_mut().zip(tiers) {
            *d = s.value();
        }
        Ok(())
    })
}
