//! Answer similarity for query tasks.
//!
//! The default is token-level F1 over lowercased whitespace tokens. It is
//! exact and reproducible; an embedding-backed scorer can be plugged in via
//! [`Similarity`].

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub trait Similarity: Send + Sync {
    /// Score in `[0, 1]`; identical inputs score 1.
    fn score(&self, predicted: &str, gold: &str) -> f64;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityKind {
    #[default]
    TokenF1,
    Exact,
}

impl SimilarityKind {
    pub fn scorer(self) -> &'static dyn Similarity {
        match self {
            SimilarityKind::TokenF1 => &TokenF1,
            SimilarityKind::Exact => &ExactMatch,
        }
    }

    pub fn score(self, predicted: &str, gold: &str) -> f64 {
        self.scorer().score(predicted, gold)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TokenF1;

fn tokens(s: &str) -> HashMap<String, usize> {
    let mut bag = HashMap::new();
    for t in s.split_whitespace() {
        *bag.entry(t.to_lowercase()).or_insert(0) += 1;
    }
    bag
}

impl Similarity for TokenF1 {
    fn score(&self, predicted: &str, gold: &str) -> f64 {
        let p = tokens(predicted);
        let g = tokens(gold);
        let np: usize = p.values().sum();
        let ng: usize = g.values().sum();
        if np == 0 && ng == 0 {
            return 1.0;
        }
        if np == 0 || ng == 0 {
            return 0.0;
        }
        let overlap: usize = p.iter().map(|(t, n)| (*n).min(*g.get(t).unwrap_or(&0))).sum();
        if overlap == 0 {
            return 0.0;
        }
        let precision = overlap as f64 / np as f64;
        let recall = overlap as f64 / ng as f64;
        2.0 * precision * recall / (precision + recall)
    }
}

/// Case-insensitive, whitespace-normalized equality.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactMatch;

impl Similarity for ExactMatch {
    fn score(&self, predicted: &str, gold: &str) -> f64 {
        let norm = |s: &str| s.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>();
        if norm(predicted) == norm(gold) {
            1.0
        } else {
            0.0
        }
    }
}
