use molgen_core::lexicon::{build_vocabulary, corpus_text, normalize, window_corpus, window_count, Vocabulary};
use molgen_core::toycorpus::toy_molecule;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn brute_force_starts(len: usize, seq_len: usize, stride: usize) -> usize {
    let mut starts = 0;
    let mut s = 0;
    while s + seq_len < len {
        starts += 1;
        s += stride;
    }
    starts
}

fn raw_smiles() -> impl Strategy<Value = String> {
    prop_oneof![
        any::<u64>().prop_map(|seed| toy_molecule(&mut ChaCha8Rng::seed_from_u64(seed))),
        "[CNOSPFIBcnosp()=#123456789%\\[\\]H+@/\\\\lr-]{1,24}",
        prop::collection::vec(
            prop::sample::select(vec!["C", "Cl", "Br", "[nH]", "[C@@H]", "/", "c1", "1", "(", ")", "=", "N", "O", "[NH4+]", "F"]),
            1..12
        )
        .prop_map(|parts| parts.concat()),
    ]
}

proptest! {
    #[test]
    fn normalize_is_idempotent(raw in raw_smiles()) {
        if let Ok(once) = normalize(&raw) {
            let twice = normalize(once.as_str()).expect("normalized text is accepted again");
            prop_assert_eq!(once.as_str(), twice.as_str());
        }
    }

    #[test]
    fn normalized_text_has_no_multichar_tokens(raw in raw_smiles()) {
        if let Ok(n) = normalize(&raw) {
            for bad in ["Cl", "Br", "[nH]", "+", "-", "/", "\\", "@"] {
                prop_assert!(!n.as_str().contains(bad), "{} in {}", bad, n);
            }
        }
    }

    #[test]
    fn window_count_matches_enumeration(len in 1usize..400, seq_len in 1usize..50, stride in 1usize..12) {
        let expected = brute_force_starts(len, seq_len, stride);
        match window_count(len, seq_len, stride) {
            Ok(n) => prop_assert_eq!(n, expected),
            Err(_) => prop_assert_eq!(expected, 0),
        }
    }

    #[test]
    fn windows_decode_to_corpus_text(seeds in prop::collection::vec(any::<u64>(), 3..12), seq_len in 2usize..20, stride in 1usize..5) {
        let corpus: Vec<String> = seeds
            .iter()
            .map(|&s| normalize(&toy_molecule(&mut ChaCha8Rng::seed_from_u64(s))).unwrap().into_string())
            .collect();
        let vocab = build_vocabulary(&corpus).unwrap();
        let text = corpus_text(&corpus);
        for c in text.chars() {
            prop_assert!(vocab.index_of(c).is_some());
        }
        let windows = window_corpus(&text, &vocab, seq_len, stride).unwrap();
        let chars: Vec<char> = text.chars().collect();
        prop_assert_eq!(windows.len(), brute_force_starts(chars.len(), seq_len, stride));
        for (k, w) in windows.iter().enumerate() {
            let start = k * stride;
            let expected: String = chars[start..start + seq_len].iter().collect();
            prop_assert_eq!(vocab.decode(&w.input).unwrap(), expected);
            prop_assert_eq!(vocab.symbol(w.target), Some(chars[start + seq_len]));
        }
    }
}

#[test]
fn vocabulary_json_round_trip() {
    let corpus = ["CC(=O)Nc1ccc(O)cc1", "LC(R)F"];
    let vocab = build_vocabulary(&corpus).unwrap();
    assert_eq!(Vocabulary::from_json(&vocab.to_json()).unwrap(), vocab);
}
