//! Generators and brute-force oracles shared by the integration suites.
//! Oracles are written from the definitions, not from the library code.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;

use inkeval::model::{BoundingBox, ExpertResponse, RoiRegion, Score, TierEvaluation};
use inkeval::theme::{MajorTheme, Theme};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const WORDS: [&str; 16] = [
    "远山", "近水", "孤舟", "笔墨", "线条", "留白", "苍润", "皴法", "设色", "点景", "云烟", "松石", "brush", "ink",
    "mist", "pine",
];

pub fn phrase(rng: &mut ChaCha8Rng, min_words: usize, max_words: usize) -> String {
    let n = rng.random_range(min_words..=max_words);
    let words: Vec<&str> = (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect();
    words.join(" ")
}

pub fn random_box(rng: &mut ChaCha8Rng) -> BoundingBox {
    let x0 = rng.random_range(0.0..0.9);
    let y0 = rng.random_range(0.0..0.9);
    let x1 = rng.random_range(x0 + 0.01..=1.0);
    let y1 = rng.random_range(y0 + 0.01..=1.0);
    BoundingBox::new(x0, y0, x1, y1).unwrap()
}

pub fn random_region(rng: &mut ChaCha8Rng, i: usize) -> RoiRegion {
    RoiRegion::new(format!("区域{i}"), phrase(rng, 1, 4), random_box(rng)).unwrap()
}

pub fn random_theme(rng: &mut ChaCha8Rng) -> Theme {
    let major = *MajorTheme::ALL.choose(rng).unwrap();
    if rng.random_bool(0.5) {
        let subs = major.sub_categories();
        Theme::with_sub(major, subs[rng.random_range(0..subs.len())].0).unwrap()
    } else {
        Theme::new(major)
    }
}

/// A complete, marker-free response with `n_rois` regions.
pub fn gold_response(rng: &mut ChaCha8Rng, n_rois: usize, score: u8) -> ExpertResponse {
    let theme = random_theme(rng);
    ExpertResponse {
        caption: phrase(rng, 2, 8),
        theme_text: theme.statement(),
        theme: Some(theme),
        rois: Some((0..n_rois).map(|i| random_region(rng, i + 1)).collect()),
        theme_eval: phrase(rng, 2, 6),
        tier_eval: TierEvaluation {
            brush_ink: phrase(rng, 1, 4),
            spirit_resonance: phrase(rng, 1, 4),
            artistic_conception: phrase(rng, 1, 4),
        },
        final_score: Some(Score::new(score as i64).unwrap()),
        raw_text: String::new(),
    }
}

/// Closed form of the accuracy term, from a table of score distances.
pub fn oracle_accuracy(pred: Option<u8>, gt: u8) -> f64 {
    const BY_DISTANCE: [f64; 6] = [1.0, 0.8, 0.6, 0.4, 0.2, 0.0];
    match pred {
        Some(p) => BY_DISTANCE[(p as i32 - gt as i32).unsigned_abs() as usize],
        None => 0.0,
    }
}

/// Intersection over union from corner coordinates.
pub fn oracle_iou(a: [f64; 4], b: [f64; 4]) -> f64 {
    let ix = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let iy = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = ix * iy;
    let area = |r: [f64; 4]| (r[2] - r[0]) * (r[3] - r[1]);
    let union = area(a) + area(b) - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Enumerates every (pred, gt) pair and keeps, per prediction, the strictly
/// best reference scanning from index 0.
pub fn oracle_match(pred: &[BoundingBox], gt: &[BoundingBox]) -> Vec<Option<(usize, f64)>> {
    let table: Vec<Vec<f64>> =
        pred.iter().map(|p| gt.iter().map(|g| oracle_iou(p.coords(), g.coords())).collect()).collect();
    table
        .iter()
        .map(|row| {
            let mut best: Option<(usize, f64)> = None;
            for (j, &v) in row.iter().enumerate() {
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((j, v));
                }
            }
            best
        })
        .collect()
}

/// Population mean / std normalization, written as plain loops.
pub fn oracle_advantages(rewards: &[f64], floor: f64) -> Vec<f64> {
    let n = rewards.len() as f64;
    let mut mean = 0.0;
    for r in rewards {
        mean += r;
    }
    mean /= n;
    let mut var = 0.0;
    for r in rewards {
        var += (r - mean) * (r - mean);
    }
    let std = (var / n).sqrt();
    if std == 0.0 && floor == 0.0 {
        return vec![0.0; rewards.len()];
    }
    let d = std.max(floor);
    rewards.iter().map(|r| (r - mean) / d).collect()
}

/// Mean over samples of min(ratio * A, clip(ratio) * A), one sample at a time.
pub fn oracle_surrogate(adv: &[f64], ratios: &[f64], eps: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..adv.len() {
        let r = ratios[i];
        let clipped = if r < 1.0 - eps {
            1.0 - eps
        } else if r > 1.0 + eps {
            1.0 + eps
        } else {
            r
        };
        let a = r * adv[i];
        let b = clipped * adv[i];
        total += if a < b { a } else { b };
    }
    total / adv.len() as f64
}

/// Kendall tau-a by checking every pair.
pub fn oracle_kendall(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut c, mut d) = (0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let s = (a[i] as i64 - a[j] as i64) * (b[i] as i64 - b[j] as i64);
            if s > 0 {
                c += 1;
            } else if s < 0 {
                d += 1;
            }
        }
    }
    (c - d) as f64 / (n * (n - 1) / 2) as f64
}

/// Spearman rho on tie-free ranks via the d^2 formula.
pub fn oracle_spearman(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

/// Tier by percentile of the item's mean 0-based position in descending
/// valuation order: below 10% is 5, below 60% is 4, else 3.
pub fn oracle_tiers(valuations: &[f64]) -> Vec<u8> {
    let n = valuations.len();
    valuations
        .iter()
        .map(|&v| {
            let above = valuations.iter().filter(|&&w| w > v).count();
            let equal = valuations.iter().filter(|&&w| w == v).count();
            let mean_pos = above as f64 + (equal as f64 - 1.0) / 2.0;
            let p = mean_pos / n as f64;
            if p < 0.1 - 1e-12 {
                5
            } else if p < 0.6 - 1e-12 {
                4
            } else {
                3
            }
        })
        .collect()
}

pub fn random_permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut v: Vec<usize> = (1..=n).collect();
    v.shuffle(rng);
    v
}

/// A received HTTP request.
#[derive(Debug, Clone)]
pub struct Captured {
    pub method: String,
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl Captured {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }
}

/// Minimal HTTP/1.1 server on an ephemeral port. `respond` maps each request
/// to (status, JSON body). Every request is forwarded on the returned channel.
pub fn serve(respond: impl Fn(&Captured) -> (u16, String) + Send + 'static) -> (String, mpsc::Receiver<Captured>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            if reader.read_line(&mut line).unwrap_or(0) == 0 {
                continue;
            }
            let mut parts = line.split_whitespace();
            let method = parts.next().unwrap_or_default().to_string();
            let path = parts.next().unwrap_or_default().to_string();
            let mut headers = Vec::new();
            let mut length = 0usize;
            loop {
                let mut h = String::new();
                reader.read_line(&mut h).unwrap();
                let h = h.trim_end();
                if h.is_empty() {
                    break;
                }
                if let Some((k, v)) = h.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        length = v.trim().parse().unwrap_or(0);
                    }
                    headers.push((k.trim().to_string(), v.trim().to_string()));
                }
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            let req = Captured { method, path, headers, body: String::from_utf8_lossy(&body).into_owned() };
            let (status, payload) = respond(&req);
            let _ = tx.send(req);
            let reply = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                payload.len()
            );
            let _ = stream.write_all(reply.as_bytes());
        }
    });
    (base, rx)
}
