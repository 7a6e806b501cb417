//! Independent reference computations shared by the integration and
//! acceptance tests. Nothing here calls into the code under test except for
//! types needed to hand data back and forth.

#![allow(dead_code, clippy::manual_is_multiple_of)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

pub fn resources_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("resources")
}

#[derive(Debug, Clone, Deserialize)]
pub struct CorpusCase {
    pub name: String,
    pub raw: String,
    pub k: u8,
    pub c: usize,
    pub out_of_order: bool,
}

/// Hand-counted block and extraneous-character totals.
pub fn turn_corpus() -> Vec<CorpusCase> {
    let text = std::fs::read_to_string(data_dir().join("turn_corpus.json")).expect("corpus file");
    serde_json::from_str(&text).expect("corpus json")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StallExpectation {
    pub task_id: String,
    pub gold_len: usize,
    pub switched_at: usize,
    pub device_steps: usize,
    pub cloud_steps: usize,
}

/// Frozen per-task outcome of the stalling-device suite under plan (1, 2).
pub fn stall_expected() -> Vec<StallExpectation> {
    let text = std::fs::read_to_string(data_dir().join("stall_expected.tsv")).expect("table file");
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            let n = |i: usize| f[i].parse::<usize>().expect("integer column");
            StallExpectation {
                task_id: f[0].to_string(),
                gold_len: n(1),
                switched_at: n(2),
                device_steps: n(3),
                cloud_steps: n(4),
            }
        })
        .collect()
}

/// Step-by-step simulation of the switching schedule for a device that
/// plays `prefix` productive steps and then repeats one ineffective action,
/// with a cloud tier that finishes the remaining `gold_len - prefix` steps.
/// Returns `(switched_at, device_steps, cloud_steps)`.
pub fn simulate_stall(gold_len: usize, prefix: usize, start: usize, every: usize) -> (usize, usize, usize) {
    // (action id, ineffective, well-formed block count) per completed step
    let mut done: Vec<(usize, bool, u8)> = Vec::new();
    let mut t = 0;
    loop {
        let monitor = t >= start && (t - start) % every == 0;
        if monitor && !done.is_empty() {
            let n = done.len();
            let repeat = n >= 2 && done[n - 1].0 == done[n - 2].0 && done[n - 1].1 && done[n - 2].1;
            let stuck = n >= 3 && done[n - 3..].iter().all(|s| s.1);
            let sloppy = n >= 2 && done[n - 2..].iter().all(|s| s.2 < 3);
            if repeat || stuck || sloppy {
                return (t, t, gold_len - prefix);
            }
        }
        if t < prefix {
            done.push((t, false, 3));
        } else {
            done.push((usize::MAX, true, 3));
        }
        t += 1;
        assert!(t < 1000, "simulated device never switched");
    }
}

/// `r_fmt * (k / 3) * gamma^c`, with the power taken by repeated multiplication.
pub fn format_reward_oracle(k: u8, c: usize, r_fmt: f64, gamma: f64) -> f64 {
    let mut decay = 1.0;
    for _ in 0..c {
        decay *= gamma;
    }
    r_fmt * (k as f64 / 3.0) * decay
}

/// Welford mean and population variance, then standardization.
pub fn standardize_oracle(rewards: &[f64]) -> Vec<f64> {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, r) in rewards.iter().enumerate() {
        let n = (i + 1) as f64;
        let delta = r - mean;
        mean += delta / n;
        m2 += delta * (r - mean);
    }
    let std = (m2 / rewards.len() as f64).sqrt();
    rewards.iter().map(|r| (r - mean) / std).collect()
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let z: f64 = logits.iter().map(|l| l.exp()).sum();
    logits.iter().map(|l| l.exp() / z).collect()
}

/// One sampled group in plain arrays.
#[derive(Debug, Clone)]
pub struct OracleGroup {
    pub context: usize,
    pub outputs: Vec<usize>,
    pub rewards: Vec<f64>,
    pub old_probs: Vec<f64>,
    pub ref_probs: Vec<f64>,
}

/// The clipped objective with KL penalty, written out directly from its
/// definition. Tied groups contribute zero.
pub fn loss_oracle(logits: &[Vec<f64>], groups: &[OracleGroup], eps: f64, beta: f64) -> f64 {
    let mut total = 0.0;
    for g in groups {
        let n = g.rewards.len() as f64;
        let mean = g.rewards.iter().sum::<f64>() / n;
        let std = (g.rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
        if std < 1e-12 {
            continue;
        }
        let p = softmax(&logits[g.context]);
        let mut acc = 0.0;
        for i in 0..g.outputs.len() {
            let a = (g.rewards[i] - mean) / std;
            let pi = p[g.outputs[i]];
            let rho = pi / g.old_probs[i];
            let unclipped = rho * a;
            let clipped = rho.max(1.0 - eps).min(1.0 + eps) * a;
            let ratio = g.ref_probs[i] / pi;
            acc += -unclipped.min(clipped) + beta * (ratio - ratio.ln() - 1.0);
        }
        total += acc / n;
    }
    total / groups.len() as f64
}

/// Central finite differences of [`loss_oracle`].
pub fn fd_gradient(logits: &[Vec<f64>], groups: &[OracleGroup], eps: f64, beta: f64, h: f64) -> Vec<Vec<f64>> {
    let mut grad = vec![vec![0.0; logits[0].len()]; logits.len()];
    for c in 0..logits.len() {
        for j in 0..logits[c].len() {
            let mut plus = logits.to_vec();
            let mut minus = logits.to_vec();
            plus[c][j] += h;
            minus[c][j] -= h;
            grad[c][j] = (loss_oracle(&plus, groups, eps, beta) - loss_oracle(&minus, groups, eps, beta)) / (2.0 * h);
        }
    }
    grad
}

fn draw(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Plain REINFORCE with a mean baseline on a single-context table of
/// rewards. Returns the probability of `target` after every update.
pub fn reinforce_oracle(rewards: &[f64], target: usize, group: usize, lr: f64, iterations: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = vec![0.0; rewards.len()];
    let mut curve = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let p = softmax(&theta);
        let draws: Vec<usize> = (0..group).map(|_| draw(&p, &mut rng)).collect();
        let baseline = draws.iter().map(|&o| rewards[o]).sum::<f64>() / group as f64;
        let mut grad = vec![0.0; theta.len()];
        for &o in &draws {
            let adv = rewards[o] - baseline;
            for (j, g) in grad.iter_mut().enumerate() {
                let indicator = if j == o { 1.0 } else { 0.0 };
                *g += adv * (indicator - p[j]) / group as f64;
            }
        }
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t += lr * g;
        }
        curve.push(softmax(&theta)[target]);
    }
    curve
}

/// Score-function gradient of `-(1/G) sum A_i log pi(o_i)` at one context.
pub fn score_function_gradient(logits: &[f64], outputs: &[usize], advantages: &[f64]) -> Vec<f64> {
    let p = softmax(logits);
    let g = outputs.len() as f64;
    let mut grad = vec![0.0; logits.len()];
    for (&o, &a) in outputs.iter().zip(advantages) {
        for (j, d) in grad.iter_mut().enumerate() {
            let indicator = if j == o { 1.0 } else { 0.0 };
            *d -= a * (indicator - p[j]) / g;
        }
    }
    grad
}

/// Segment of a synthetic turn with known scoring.
#[derive(Debug, Clone)]
pub enum Piece {
    Text(String),
    Block(usize, String),
}

pub const OPEN: [&str; 3] = ["<REASONING>", "<STATE_ASSESSMENT>", "<CALLED_FUNCTION>"];
pub const CLOSE: [&str; 3] = ["</REASONING>", "</STATE_ASSESSMENT>", "</CALLED_FUNCTION>"];

/// Random tag-free text drawn from letters, digits, punctuation, spaces and
/// a few multi-byte characters.
pub fn random_text(rng: &mut ChaCha8Rng, max_len: usize) -> String {
    const ALPHABET: &[&str] = &["a", "Z", "7", "(", ")", "\"", ",", " ", " ", "\n", "\t", "é", "✓", "<", ">", "/", "_"];
    let len = rng.random_range(0..=max_len);
    let mut s = String::new();
    for _ in 0..len {
        s.push_str(ALPHABET[rng.random_range(0..ALPHABET.len())]);
    }
    // A stray '<' followed by letters never spells a full tag here, because
    // tag names need uppercase runs the alphabet cannot produce.
    s
}

/// Builds a random interleaving and the `(k, c, out_of_order)` it must score.
pub fn random_turn(rng: &mut ChaCha8Rng) -> (String, usize, usize, bool) {
    let pieces = rng.random_range(0..8);
    let mut raw = String::new();
    let mut seen = [false; 3];
    let mut order = Vec::new();
    let mut c = 0;
    let non_ws = |s: &str| s.chars().filter(|ch| !ch.is_whitespace()).count();
    for _ in 0..pieces {
        if rng.random_bool(0.5) {
            let t = random_text(rng, 12);
            c += non_ws(&t);
            raw.push_str(&t);
        } else {
            let kind = rng.random_range(0..3);
            let body = random_text(rng, 12);
            let block = format!("{}{}{}", OPEN[kind], body, CLOSE[kind]);
            if seen[kind] {
                c += non_ws(&block);
            } else {
                seen[kind] = true;
                order.push(kind);
            }
            raw.push_str(&block);
        }
    }
    let k = seen.iter().filter(|s| **s).count();
    let out_of_order = order.windows(2).any(|w| w[0] > w[1]);
    (raw, k, c, out_of_order)
}
