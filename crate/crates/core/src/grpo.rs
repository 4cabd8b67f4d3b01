//! Group-relative advantages and the clipped GRPO objective.
//!
//! Pure functions over reward and probability arrays; gradient computation
//! and rollout generation belong to the trainer.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Groups whose reward std falls below this get all-zero advantages.
pub const DEGENERATE_STD: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum GrpoError {
    #[error("a group needs at least 2 rewards, got {0}")]
    GroupTooSmall(usize),
    #[error("reward {index} is not finite ({value})")]
    NonFiniteReward { index: usize, value: f64 },
    #[error("sample {index}: {what} must be a probability in (0, 1], got {value}")]
    BadProbability { index: usize, what: &'static str, value: f64 },
    #[error("sample {index}: {what} must be a finite log-probability <= 0, got {value}")]
    BadLogProbability { index: usize, what: &'static str, value: f64 },
    #[error("clip epsilon must lie in (0, 1), got {0}")]
    BadEpsilon(f64),
    #[error("KL coefficient must be finite and >= 0, got {0}")]
    BadKlCoefficient(f64),
    #[error("advantage {index} is not finite")]
    NonFiniteAdvantage { index: usize },
    #[error("batch is empty")]
    EmptyBatch,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StdKind {
    #[default]
    Population,
    /// Bessel-corrected (divides by G - 1).
    Sample,
}

/// Mean and standard deviation of a reward group.
pub fn group_stats(rewards: &[f64], kind: StdKind) -> (f64, f64) {
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let ss: f64 = rewards.iter().map(|r| (r - mean).powi(2)).sum();
    let denom = match kind {
        StdKind::Population => n,
        StdKind::Sample => n - 1.0,
    };
    (mean, (ss / denom).sqrt())
}

/// `A_i = (r_i - mean) / std` over one rollout group.
pub fn normalize_advantages(rewards: &[f64], kind: StdKind) -> Result<Vec<f64>, GrpoError> {
    if rewards.len() < 2 {
        return Err(GrpoError::GroupTooSmall(rewards.len()));
    }
    if let Some((index, &value)) = rewards.iter().enumerate().find(|(_, r)| !r.is_finite()) {
        return Err(GrpoError::NonFiniteReward { index, value });
    }
    let (mean, std) = group_stats(rewards, kind);
    if std < DEGENERATE_STD {
        return Ok(vec![0.0; rewards.len()]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / std).collect())
}

/// Rewards and advantages of one group of rollouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutGroup {
    pub rewards: Vec<f64>,
    pub advantages: Vec<f64>,
}

impl RolloutGroup {
    pub fn normalized(rewards: Vec<f64>, kind: StdKind) -> Result<Self, GrpoError> {
        let advantages = normalize_advantages(&rewards, kind)?;
        Ok(Self { rewards, advantages })
    }
}

/// `x - ln x - 1` with `x = p_ref / p_theta`; non-negative, zero at `x = 1`.
pub fn kl_approx(p_theta: f64, p_ref: f64) -> Result<f64, GrpoError> {
    for (what, value) in [("p_theta", p_theta), ("p_ref", p_ref)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(GrpoError::BadProbability { index: 0, what, value });
        }
    }
    Ok(kl_from_log_ratio(p_ref.ln() - p_theta.ln()))
}

/// Same as [`kl_approx`] from `ln(p_ref / p_theta)`.
pub fn kl_from_log_ratio(log_x: f64) -> f64 {
    if log_x == 0.0 {
        return 0.0;
    }
    // exp_m1 keeps precision near x = 1, where x - 1 and ln x nearly cancel.
    (log_x.exp_m1() - log_x).max(0.0)
}

/// `min(rho * A, clip(rho, 1 - eps, 1 + eps) * A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * advantage).min(clipped * advantage)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbDomain {
    #[default]
    Linear,
    /// Inputs are natural-log probabilities; avoids underflow for long sequences.
    Log,
}

/// Per-sample policy probabilities at whatever granularity the caller uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicySample {
    pub p_theta: f64,
    pub p_old: f64,
    pub p_ref: f64,
    pub advantage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEvalBatch {
    pub samples: Vec<PolicySample>,
    pub clip_epsilon: f64,
    /// KL penalty weight (distinct from the reward-combination beta).
    pub kl_coefficient: f64,
    #[serde(default)]
    pub domain: ProbDomain,
}

impl PolicyEvalBatch {
    pub fn validate(&self) -> Result<(), GrpoError> {
        if self.samples.is_empty() {
            return Err(GrpoError::EmptyBatch);
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(GrpoError::BadEpsilon(self.clip_epsilon));
        }
        if !(self.kl_coefficient >= 0.0 && self.kl_coefficient.is_finite()) {
            return Err(GrpoError::BadKlCoefficient(self.kl_coefficient));
        }
        for (index, s) in self.samples.iter().enumerate() {
            if !s.advantage.is_finite() {
                return Err(GrpoError::NonFiniteAdvantage { index });
            }
            for (what, value) in [("p_theta", s.p_theta), ("p_old", s.p_old), ("p_ref", s.p_ref)] {
                match self.domain {
                    ProbDomain::Linear if !(value > 0.0 && value <= 1.0) => {
                        return Err(GrpoError::BadProbability { index, what, value })
                    }
                    ProbDomain::Log if !(value.is_finite() && value <= 0.0) => {
                        return Err(GrpoError::BadLogProbability { index, what, value })
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    fn log_probs(&self, s: &PolicySample) -> (f64, f64, f64) {
        match self.domain {
            ProbDomain::Linear => (s.p_theta.ln(), s.p_old.ln(), s.p_ref.ln()),
            ProbDomain::Log => (s.p_theta, s.p_old, s.p_ref),
        }
    }

    /// Importance ratio `pi_theta / pi_old` for each sample.
    pub fn ratios(&self) -> Vec<f64> {
        self.samples
            .iter()
            .map(|s| match self.domain {
                ProbDomain::Linear => s.p_theta / s.p_old,
                ProbDomain::Log => (s.p_theta - s.p_old).exp(),
            })
            .collect()
    }
}

/// Breakdown of one objective evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerms {
    pub surrogate: f64,
    pub kl: f64,
    pub objective: f64,
}

pub fn grpo_terms(batch: &PolicyEvalBatch) -> Result<ObjectiveTerms, GrpoError> {
    batch.validate()?;
    let g = batch.samples.len() as f64;
    let ratios = batch.ratios();
    let mut surrogate = 0.0;
    let mut kl = 0.0;
    for (s, &rho) in batch.samples.iter().zip(&ratios) {
        surrogate += clipped_surrogate(rho, s.advantage, batch.clip_epsilon);
        let (lt, _, lr) = batch.log_probs(s);
        kl += kl_from_log_ratio(lr - lt);
    }
    let surrogate = surrogate / g;
    let kl = kl / g;
    Ok(ObjectiveTerms {
        surrogate,
        kl,
        objective: surrogate - batch.kl_coefficient * kl,
    })
}

/// Mean clipped surrogate minus `kl_coefficient` times the mean KL estimate.
pub fn grpo_objective(batch: &PolicyEvalBatch) -> Result<f64, GrpoError> {
    grpo_terms(batch).map(|t| t.objective)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(ratio: f64, advantage: f64) -> PolicyEvalBatch {
        PolicyEvalBatch {
            samples: vec![PolicySample {
                p_theta: 0.5 * ratio,
                p_old: 0.5,
                p_ref: 0.5 * ratio,
                advantage,
            }],
            clip_epsilon: 0.2,
            kl_coefficient: 0.0,
            domain: ProbDomain::Linear,
        }
    }

    #[test]
    fn advantages_examples() {
        let a = normalize_advantages(&[1.0, 2.0, 3.0], StdKind::Population).unwrap();
        let expected = 1.0 / (2.0f64 / 3.0).sqrt();
        assert!((a[0] + expected).abs() < 1e-12 && a[1].abs() < 1e-12 && (a[2] - expected).abs() < 1e-12);
        assert_eq!(normalize_advantages(&[5.0; 4], StdKind::Population).unwrap(), [0.0; 4]);
        assert_eq!(normalize_advantages(&[0.0, 1.0], StdKind::Population).unwrap(), [-1.0, 1.0]);
        let s = normalize_advantages(&[0.0, 1.0], StdKind::Sample).unwrap();
        assert!((s[1] - 1.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn advantages_errors() {
        assert_eq!(normalize_advantages(&[1.0], StdKind::Population), Err(GrpoError::GroupTooSmall(1)));
        assert!(matches!(
            normalize_advantages(&[1.0, f64::NAN], StdKind::Population),
            Err(GrpoError::NonFiniteReward { index: 1, .. })
        ));
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_approx(0.3, 0.3).unwrap(), 0.0);
        assert!((kl_approx(0.25, 0.5).unwrap() - (2.0 - 2f64.ln() - 1.0)).abs() < 1e-12);
        assert!((kl_approx(0.5, 0.25).unwrap() - (0.5 - 0.5f64.ln() - 1.0)).abs() < 1e-12);
        assert!(kl_approx(0.0, 0.5).is_err());
        assert!(kl_approx(0.5, -1.0).is_err());
    }

    #[test]
    fn clip_cases() {
        assert_eq!(grpo_objective(&single(2.0, 1.0)).unwrap(), 1.2);
        assert_eq!(grpo_objective(&single(2.0, -1.0)).unwrap(), -2.0);
    }

    #[test]
    fn identity_policy_is_mean_advantage() {
        let adv = normalize_advantages(&[0.3, 0.9, 0.1, 0.5], StdKind::Population).unwrap();
        let batch = PolicyEvalBatch {
            samples: adv
                .iter()
                .map(|&a| PolicySample {
                    p_theta: 0.4,
                    p_old: 0.4,
                    p_ref: 0.4,
                    advantage: a,
                })
                .collect(),
            clip_epsilon: 0.2,
            kl_coefficient: 0.04,
            domain: ProbDomain::Linear,
        };
        assert!(grpo_objective(&batch).unwrap().abs() < 1e-12);
    }

    #[test]
    fn log_domain_matches_linear() {
        let linear = PolicyEvalBatch {
            samples: vec![
                PolicySample { p_theta: 0.3, p_old: 0.2, p_ref: 0.25, advantage: 0.7 },
                PolicySample { p_theta: 0.1, p_old: 0.15, p_ref: 0.2, advantage: -1.1 },
            ],
            clip_epsilon: 0.2,
            kl_coefficient: 0.1,
            domain: ProbDomain::Linear,
        };
        let mut log = linear.clone();
        log.domain = ProbDomain::Log;
        for s in &mut log.samples {
            s.p_theta = s.p_theta.ln();
            s.p_old = s.p_old.ln();
            s.p_ref = s.p_ref.ln();
        }
        let (a, b) = (grpo_objective(&linear).unwrap(), grpo_objective(&log).unwrap());
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn validation() {
        let mut b = single(1.0, 1.0);
        b.clip_epsilon = 1.0;
        assert_eq!(grpo_objective(&b), Err(GrpoError::BadEpsilon(1.0)));
        let mut b = single(1.0, 1.0);
        b.samples[0].p_old = 0.0;
        assert!(matches!(grpo_objective(&b), Err(GrpoError::BadProbability { what: "p_old", .. })));
        let mut b = single(1.0, 1.0);
        b.kl_coefficient = -0.1;
        assert!(grpo_objective(&b).is_err());
        let mut b = single(1.0, 1.0);
        b.samples.clear();
        assert_eq!(grpo_objective(&b), Err(GrpoError::EmptyBatch));
    }

    proptest! {
        #[test]
        fn kl_nonnegative(p in 1e-9f64..1.0, q in 1e-9f64..1.0) {
            prop_assert!(kl_approx(p, q).unwrap() >= 0.0);
            prop_assert_eq!(kl_approx(p, p).unwrap(), 0.0);
        }

        #[test]
        fn advantages_sum_to_zero(rewards in prop::collection::vec(-10.0f64..10.0, 2..32)) {
            let a = normalize_advantages(&rewards, StdKind::Population).unwrap();
            prop_assert!(a.iter().sum::<f64>().abs() < 1e-9);
        }

        #[test]
        fn clip_bounds(rho in 0.01f64..5.0, adv in -3.0f64..3.0, eps in 0.01f64..0.99) {
            let s = clipped_surrogate(rho, adv, eps);
            // unclipped oracle
            let unclipped = rho * adv;
            prop_assert!(s <= unclipped + 1e-12);
            if adv > 0.0 {
                prop_assert!(s <= (1.0 + eps) * adv + 1e-12);
            }
        }

        #[test]
        fn scale_invariance(
            rewards in prop::collection::vec(0.0f64..2.0, 3..17),
            scale in 0.1f64..50.0,
            ratio in 0.5f64..1.5,
        ) {
            let (_, std) = group_stats(&rewards, StdKind::Population);
            prop_assume!(std > 1e-6);
            let base = normalize_advantages(&rewards, StdKind::Population).unwrap();
            let scaled: Vec<f64> = rewards.iter().map(|r| r * scale).collect();
            let other = normalize_advantages(&scaled, StdKind::Population).unwrap();
            for (a, b) in base.iter().zip(&other) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            let batch = |adv: &[f64]| PolicyEvalBatch {
                samples: adv
                    .iter()
                    .map(|&a| PolicySample { p_theta: 0.5 * ratio, p_old: 0.5, p_ref: 0.4, advantage: a })
                    .collect(),
                clip_epsilon: 0.2,
                kl_coefficient: 0.05,
                domain: ProbDomain::Linear,
            };
            let (x, y) = (grpo_objective(&batch(&base)).unwrap(), grpo_objective(&batch(&other)).unwrap());
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}
