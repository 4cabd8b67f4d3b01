use proptest::prelude::*;
use termalign_core::text::{tokenize, TokenSequence};

proptest! {
    #[test]
    fn retokenizing_is_idempotent(
        text in "[a-zA-Z0-9 .,!?'()\u{4e00}-\u{4e20}\u{00e9}-]{0,40}",
        lang in prop::sample::select(vec!["en", "de", "zh", "ja", "xx"]),
    ) {
        let once = tokenize(&text, lang);
        let twice = tokenize(&once.tokens().join(" "), lang);
        prop_assert_eq!(once.tokens(), twice.tokens());
    }

    #[test]
    fn tokens_are_never_empty(text in "\\PC{0,40}", lang in prop::sample::select(vec!["en", "th", "zz"])) {
        let seq = tokenize(&text, lang);
        prop_assert!(seq.tokens().iter().all(|t| !t.is_empty() && !t.chars().any(char::is_whitespace)));
        prop_assert!(TokenSequence::from_pretokenized(seq.tokens(), lang).is_ok());
    }
}
