//! Clipped surrogate, KL estimator, loss and its analytic gradient.

use serde::{Deserialize, Serialize};

use super::advantage::{group_advantages, Advantages};
use super::policy::PolicyParams;
use super::GrpoError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrpoConfig {
    pub group_size: usize,
    pub epsilon: f64,
    pub beta: f64,
    pub lr: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        GrpoConfig { group_size: 8, epsilon: 0.2, beta: 0.04, lr: 0.1, iterations: 500, seed: 7 }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<(), GrpoError> {
        if self.group_size < 2 {
            return Err(GrpoError::GroupTooSmall(self.group_size));
        }
        if !(self.epsilon > 0.0 && self.beta >= 0.0 && self.lr > 0.0) {
            return Err(GrpoError::InvalidConfig("epsilon and lr must be positive, beta non-negative".into()));
        }
        Ok(())
    }
}

/// Sampled outputs for one question, with the old- and reference-policy
/// probabilities captured at sampling time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub context: usize,
    pub outputs: Vec<usize>,
    pub rewards: Vec<f64>,
    pub old_probs: Vec<f64>,
    pub ref_probs: Vec<f64>,
}

impl Group {
    pub fn new(context: usize, outputs: Vec<usize>, rewards: Vec<f64>, old: &PolicyParams, reference: &PolicyParams) -> Self {
        let po = old.probs(context);
        let pr = reference.probs(context);
        Group {
            context,
            old_probs: outputs.iter().map(|&o| po[o]).collect(),
            ref_probs: outputs.iter().map(|&o| pr[o]).collect(),
            outputs,
            rewards,
        }
    }

    pub fn advantages(&self) -> Result<Advantages, GrpoError> {
        group_advantages(&self.rewards)
    }
}

/// `r - ln r - 1` with `r = prob_ref / prob_theta`.
pub fn kl_unbiased(prob_ref: f64, prob_theta: f64) -> Result<f64, GrpoError> {
    if !(prob_ref > 0.0 && prob_theta > 0.0) {
        return Err(GrpoError::NonPositiveProbability);
    }
    let r = prob_ref / prob_theta;
    Ok(r - r.ln() - 1.0)
}

pub fn clipped_term(rho: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = rho.clamp(1.0 - epsilon, 1.0 + epsilon);
    (rho * advantage).min(clipped * advantage)
}

/// Per-group pieces of the loss at the current parameters.
#[derive(Debug, Clone, PartialEq)]
struct GroupTerms {
    surrogate: f64,
    kl: f64,
    degenerate: bool,
}

fn group_terms(policy: &PolicyParams, group: &Group, cfg: &GrpoConfig) -> Result<(GroupTerms, Advantages), GrpoError> {
    let adv = group.advantages()?;
    if adv.degenerate {
        return Ok((GroupTerms { surrogate: 0.0, kl: 0.0, degenerate: true }, adv));
    }
    let p = policy.probs(group.context);
    let g = group.outputs.len() as f64;
    let mut surrogate = 0.0;
    let mut kl = 0.0;
    for (i, &o) in group.outputs.iter().enumerate() {
        let rho = p[o] / group.old_probs[i];
        surrogate += clipped_term(rho, adv.values[i], cfg.epsilon);
        kl += kl_unbiased(group.ref_probs[i], p[o])?;
    }
    Ok((GroupTerms { surrogate: surrogate / g, kl: kl / g, degenerate: false }, adv))
}

/// Mean over groups of `-(1/G) sum clipped + beta * KL`. Tied groups add zero.
pub fn loss(policy: &PolicyParams, groups: &[Group], cfg: &GrpoConfig) -> Result<f64, GrpoError> {
    if groups.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for g in groups {
        let (t, _) = group_terms(policy, g, cfg)?;
        total += -t.surrogate + cfg.beta * t.kl;
    }
    Ok(total / groups.len() as f64)
}

/// Analytic gradient of [`loss`] with respect to the logits.
pub fn gradient(policy: &PolicyParams, groups: &[Group], cfg: &GrpoConfig) -> Result<Vec<Vec<f64>>, GrpoError> {
    let mut grad = vec![vec![0.0; policy.actions()]; policy.contexts()];
    if groups.is_empty() {
        return Ok(grad);
    }
    let scale = 1.0 / groups.len() as f64;
    for group in groups {
        let adv = group.advantages()?;
        if adv.degenerate {
            continue;
        }
        let p = policy.probs(group.context);
        let g = group.outputs.len() as f64;
        let row = &mut grad[group.context];
        for (i, &o) in group.outputs.iter().enumerate() {
            let a = adv.values[i];
            let rho = p[o] / group.old_probs[i];
            let clipped = rho.clamp(1.0 - cfg.epsilon, 1.0 + cfg.epsilon);
            let active = rho * a <= clipped * a;
            let r = group.ref_probs[i] / p[o];
            // d(pi_o)/d(theta_j) = pi_o * (1[j = o] - pi_j)
            let coef = (if active { -a * rho } else { 0.0 }) - cfg.beta * (r - 1.0);
            for (j, gj) in row.iter_mut().enumerate() {
                let indicator = if j == o { 1.0 } else { 0.0 };
                *gj += scale * coef * (indicator - p[j]) / g;
            }
        }
    }
    Ok(grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub loss: f64,
    pub mean_reward: f64,
    pub mean_abs_advantage: f64,
    pub kl: f64,
    pub grad_norm: f64,
    pub degenerate_groups: usize,
}

/// One descent step on the loss. The caller refreshes the old policy.
pub fn grpo_step(
    policy: &PolicyParams,
    groups: &[Group],
    cfg: &GrpoConfig,
) -> Result<(PolicyParams, StepDiagnostics), GrpoError> {
    let mut rewards = 0.0;
    let mut abs_adv = 0.0;
    let mut kl = 0.0;
    let mut samples = 0usize;
    let mut degenerate = 0;
    for g in groups {
        let (terms, adv) = group_terms(policy, g, cfg)?;
        rewards += g.rewards.iter().sum::<f64>();
        abs_adv += adv.values.iter().map(|a| a.abs()).sum::<f64>();
        samples += g.rewards.len();
        kl += terms.kl;
        degenerate += usize::from(terms.degenerate);
    }
    let grad = gradient(policy, groups, cfg)?;
    let grad_norm = grad.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let mut next = policy.clone();
    for (row, grow) in next.logits.iter_mut().zip(&grad) {
        for (l, d) in row.iter_mut().zip(grow) {
            *l -= cfg.lr * d;
        }
    }
    let n = samples.max(1) as f64;
    let diagnostics = StepDiagnostics {
        loss: loss(policy, groups, cfg)?,
        mean_reward: rewards / n,
        mean_abs_advantage: abs_adv / n,
        kl: if groups.is_empty() { 0.0 } else { kl / groups.len() as f64 },
        grad_norm,
        degenerate_groups: degenerate,
    };
    Ok((next, diagnostics))
}
