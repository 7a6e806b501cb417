//! Tabular softmax policy.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Logits indexed `[context][action]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub logits: Vec<Vec<f64>>,
}

impl PolicyParams {
    /// Uniform policy.
    pub fn zeros(contexts: usize, actions: usize) -> Self {
        PolicyParams { logits: vec![vec![0.0; actions]; contexts] }
    }

    pub fn contexts(&self) -> usize {
        self.logits.len()
    }

    pub fn actions(&self) -> usize {
        self.logits.first().map_or(0, Vec::len)
    }

    pub fn probs(&self, context: usize) -> Vec<f64> {
        softmax(&self.logits[context])
    }

    pub fn prob(&self, context: usize, action: usize) -> f64 {
        self.probs(context)[action]
    }

    pub fn sample<R: Rng + ?Sized>(&self, context: usize, rng: &mut R) -> usize {
        sample_from(&self.probs(context), rng)
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Inverse-CDF draw from a categorical distribution.
pub fn sample_from<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
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
