//! Group-relative advantages.

use serde::{Deserialize, Serialize};

use super::GrpoError;

/// Below this population std a group is treated as tied.
pub const DEGENERATE_STD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Advantages {
    pub values: Vec<f64>,
    pub degenerate: bool,
}

/// `(r_i - mean) / population_std`; all zeros for a tied group.
pub fn group_advantages(rewards: &[f64]) -> Result<Advantages, GrpoError> {
    let g = rewards.len();
    if g < 2 {
        return Err(GrpoError::GroupTooSmall(g));
    }
    let mean = rewards.iter().sum::<f64>() / g as f64;
    let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / g as f64;
    let std = var.sqrt();
    if std < DEGENERATE_STD {
        return Ok(Advantages { values: vec![0.0; g], degenerate: true });
    }
    Ok(Advantages { values: rewards.iter().map(|r| (r - mean) / std).collect(), degenerate: false })
}
