use serde::{Deserialize, Serialize};

use super::format::ParsedOutput;
use super::RewardError;
use crate::policy::{Intersection, ThinkMatch};

/// Weights of the alignment rewards in the overall reward. The semantic
/// score always has weight 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bleu_weight: Option<f64>,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.1,
            gamma: 0.1,
            bleu_weight: None,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<(), RewardError> {
        let named = [("alpha", Some(self.alpha)), ("beta", Some(self.beta)), ("gamma", Some(self.gamma)), ("bleu_weight", self.bleu_weight)];
        for (name, value) in named {
            if let Some(v) = value {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(RewardError::BadWeight { name, value: v });
                }
            }
        }
        Ok(())
    }
}

/// Raw component values before gating.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ComponentValues {
    /// Unrounded semantic score.
    pub comet: f64,
    pub aaw: f64,
    pub aao: f64,
    pub taw: f64,
    pub bleu: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub src_len: usize,
    pub ref_len: usize,
    pub pred_len: usize,
    pub ref_key_links: usize,
    pub pred_key_links: usize,
    pub matched_links: usize,
    pub ref_order_pairs: usize,
    pub matched_order_pairs: usize,
    pub think_hits: usize,
    pub oov_tokens: usize,
    pub case_folded: bool,
    pub intersection: Intersection,
    pub think_match: ThinkMatch,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub empty_lexicon: bool,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub segmentation_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_format: u8,
    pub r_comet: f64,
    pub r_aaw: f64,
    pub r_aao: f64,
    pub r_taw: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_bleu: Option<f64>,
    pub r_all: f64,
    pub weights: RewardWeights,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
}

/// Rounds to two decimals, halves away from zero.
pub fn round_comet(score: f64) -> f64 {
    (score * 100.0).round() / 100.0
}

/// Overall reward: zero on a format failure, otherwise
/// `round(comet, 2) + alpha*aaw + beta*aao + gamma*taw (+ bleu_weight*bleu)`.
pub fn combine(parsed: &ParsedOutput, components: &ComponentValues, weights: &RewardWeights) -> Result<RewardBreakdown, RewardError> {
    weights.validate()?;
    let named = [
        ("comet", Some(components.comet)),
        ("aaw", Some(components.aaw)),
        ("aao", Some(components.aao)),
        ("taw", Some(components.taw)),
        ("bleu", components.bleu),
    ];
    for (name, value) in named {
        if let Some(v) = value {
            if !v.is_finite() {
                return Err(RewardError::NonFiniteComponent { name, value: v });
            }
        }
    }
    let r_comet = round_comet(components.comet);
    let r_all = if parsed.format_ok {
        let mut total = r_comet + weights.alpha * components.aaw + weights.beta * components.aao + weights.gamma * components.taw;
        if let (Some(w), Some(b)) = (weights.bleu_weight, components.bleu) {
            total += w * b;
        }
        total
    } else {
        0.0
    };
    Ok(RewardBreakdown {
        r_format: u8::from(parsed.format_ok),
        r_comet,
        r_aaw: components.aaw,
        r_aao: components.aao,
        r_taw: components.taw,
        r_bleu: components.bleu,
        r_all,
        weights: *weights,
        diagnostics: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::format::{parse_output, FormatMode};

    fn ok() -> ParsedOutput {
        parse_output("<think>t</think><answer>a</answer>", FormatMode::Strict)
    }

    #[test]
    fn gate_zeroes_everything() {
        let bad = parse_output("<answer>a</answer>", FormatMode::Strict);
        let c = ComponentValues {
            comet: 0.9,
            aaw: 0.4,
            aao: 1.0,
            taw: 1.0,
            bleu: Some(0.7),
        };
        let b = combine(&bad, &c, &RewardWeights::default()).unwrap();
        assert_eq!((b.r_format, b.r_all), (0, 0.0));
    }

    #[test]
    fn default_weights_arithmetic() {
        let c = ComponentValues {
            comet: 0.80,
            aaw: 0.25,
            aao: 2.0 / 3.0,
            taw: 0.5,
            bleu: None,
        };
        let b = combine(&ok(), &c, &RewardWeights::default()).unwrap();
        assert!((b.r_all - (0.80 + 0.25 + 0.1 * 2.0 / 3.0 + 0.05)).abs() < 1e-12);
        assert!((b.r_all - 1.1667).abs() < 1e-4);
    }

    #[test]
    fn zero_weights_leave_comet() {
        let w = RewardWeights {
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
            bleu_weight: None,
        };
        let c = ComponentValues {
            comet: 0.734,
            aaw: 0.3,
            aao: 0.2,
            taw: 0.1,
            bleu: None,
        };
        assert_eq!(combine(&ok(), &c, &w).unwrap().r_all, 0.73);
    }

    #[test]
    fn comet_rounding() {
        assert_eq!(round_comet(0.9132), 0.91);
        assert_eq!(round_comet(0.125), 0.13);
        assert_eq!(round_comet(-0.125), -0.13);
        assert_eq!(round_comet(0.8), 0.8);
    }

    #[test]
    fn bleu_term_only_with_weight() {
        let c = ComponentValues {
            comet: 0.5,
            bleu: Some(0.4),
            ..Default::default()
        };
        let mut w = RewardWeights::default();
        assert_eq!(combine(&ok(), &c, &w).unwrap().r_all, 0.5);
        w.bleu_weight = Some(1.0);
        assert!((combine(&ok(), &c, &w).unwrap().r_all - 0.9).abs() < 1e-15);
    }

    #[test]
    fn rejects_negative_weight_and_nan() {
        let w = RewardWeights {
            beta: -0.1,
            ..Default::default()
        };
        assert!(matches!(
            combine(&ok(), &ComponentValues::default(), &w),
            Err(RewardError::BadWeight { name: "beta", .. })
        ));
        let c = ComponentValues {
            taw: f64::NAN,
            ..Default::default()
        };
        assert!(combine(&ok(), &c, &RewardWeights::default()).is_err());
    }
}
