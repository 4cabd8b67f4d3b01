//! Matching knobs shared by the rewards and the terminology metric.

use serde::{Deserialize, Serialize};

use crate::text::primary_subtag;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseMode {
    Exact,
    Folded,
    /// Folded for English targets, exact otherwise.
    #[default]
    Auto,
}

impl CaseMode {
    pub fn folds_for(self, tgt_lang: &str) -> bool {
        match self {
            Self::Exact => false,
            Self::Folded => true,
            Self::Auto => primary_subtag(tgt_lang) == "en",
        }
    }
}

/// How a reference key link and a predicted key link are judged equal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Intersection {
    /// Same source index and same target surface form.
    #[default]
    Surface,
    /// Same source index and same target index.
    Position,
}

/// How "appears in think" is tested.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThinkMatch {
    /// Membership in the tokenized think text.
    #[default]
    Tokens,
    /// Raw substring search.
    Substring,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchPolicy {
    pub case: CaseMode,
    pub intersection: Intersection,
    pub think: ThinkMatch,
    /// Order reward when the reference has no ordered pairs.
    pub empty_order_reward: f64,
}

impl Default for MatchPolicy {
    fn default() -> Self {
        Self {
            case: CaseMode::Auto,
            intersection: Intersection::Surface,
            think: ThinkMatch::Tokens,
            empty_order_reward: 1.0,
        }
    }
}

/// A [`MatchPolicy`] with the case decision fixed for one target language.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedPolicy {
    pub fold: bool,
    pub intersection: Intersection,
    pub think: ThinkMatch,
    pub empty_order_reward: f64,
}

impl MatchPolicy {
    pub fn resolve(&self, tgt_lang: &str) -> ResolvedPolicy {
        ResolvedPolicy {
            fold: self.case.folds_for(tgt_lang),
            intersection: self.intersection,
            think: self.think,
            empty_order_reward: self.empty_order_reward,
        }
    }
}

impl ResolvedPolicy {
    pub fn exact() -> Self {
        MatchPolicy {
            case: CaseMode::Exact,
            ..MatchPolicy::default()
        }
        .resolve("")
    }

    pub fn norm<'a>(&self, s: &'a str) -> std::borrow::Cow<'a, str> {
        if self.fold {
            std::borrow::Cow::Owned(s.to_lowercase())
        } else {
            std::borrow::Cow::Borrowed(s)
        }
    }

    pub fn same(&self, a: &str, b: &str) -> bool {
        if self.fold {
            a == b || a.to_lowercase() == b.to_lowercase()
        } else {
            a == b
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auto_case_follows_target_language() {
        assert!(CaseMode::Auto.folds_for("en-GB"));
        assert!(!CaseMode::Auto.folds_for("de"));
        assert!(!CaseMode::Auto.folds_for("zh"));
        assert!(CaseMode::Folded.folds_for("de"));
    }

    #[test]
    fn resolved_comparison() {
        let p = MatchPolicy::default().resolve("en");
        assert!(p.same("Paris", "paris"));
        let p = MatchPolicy::default().resolve("de");
        assert!(!p.same("Haus", "haus"));
    }
}
