use std::sync::OnceLock;

use molgen_core::baseline::{self, BaselineModel, ATOM_SYMBOLS};
use molgen_core::chemstats::{
    feature_vector, ks_statistic, ks_two_sample, morgan_fingerprint, scaffold_stats, tanimoto, Fingerprint,
    Table1Column,
};
use molgen_core::lexicon::normalize;
use molgen_core::molparse::{parse_str, syntactic_prefilter, write_smiles, MoleculeGraph};
use molgen_core::toycorpus::{toy_corpus, toy_molecule};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn toy_graph(seed: u64) -> MoleculeGraph {
    let raw = toy_molecule(&mut ChaCha8Rng::seed_from_u64(seed));
    parse_str(normalize(&raw).unwrap().as_str()).unwrap()
}

fn respelled(g: &MoleculeGraph, seed: u64) -> MoleculeGraph {
    let mut ranks: Vec<usize> = (0..g.atom_count()).collect();
    ranks.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    parse_str(&write_smiles(g, &ranks)).unwrap()
}

fn brute_force_d(a: &[f64], b: &[f64]) -> f64 {
    let cdf = |s: &[f64], t: f64| s.iter().filter(|&&x| x <= t).count() as f64 / s.len() as f64;
    a.iter().chain(b).map(|&t| (cdf(a, t) - cdf(b, t)).abs()).fold(0.0, f64::max)
}

fn toy_model() -> &'static BaselineModel {
    static MODEL: OnceLock<BaselineModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let corpus: Vec<String> = toy_corpus(2000, 4).iter().map(|s| normalize(s).unwrap().into_string()).collect();
        baseline::fit(&corpus).unwrap()
    })
}

fn sample() -> impl Strategy<Value = Vec<f64>> {
    prop_oneof![
        prop::collection::vec((0i32..8).prop_map(f64::from), 1..100),
        prop::collection::vec(-50.0f64..50.0, 1..100),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn features_and_fingerprints_ignore_spelling(seed in any::<u64>(), order in any::<u64>()) {
        let g = toy_graph(seed);
        let h = respelled(&g, order);
        prop_assert_eq!(feature_vector(&g), feature_vector(&h));
        prop_assert_eq!(morgan_fingerprint(&g, 2, 2048).unwrap(), morgan_fingerprint(&h, 2, 2048).unwrap());
    }

    #[test]
    fn tanimoto_is_a_bounded_symmetric_similarity(a in any::<u64>(), b in any::<u64>()) {
        let fa = morgan_fingerprint(&toy_graph(a), 2, 1024).unwrap();
        let fb = morgan_fingerprint(&toy_graph(b), 2, 1024).unwrap();
        let ab = tanimoto(&fa, &fb).unwrap();
        prop_assert_eq!(ab, tanimoto(&fb, &fa).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(tanimoto(&fa, &fa).unwrap(), 1.0);
    }

    #[test]
    fn tanimoto_on_raw_bits(a in prop::collection::btree_set(0usize..256, 0..40), b in prop::collection::btree_set(0usize..256, 0..40)) {
        let mut fa = Fingerprint::empty(256, 0).unwrap();
        let mut fb = Fingerprint::empty(256, 0).unwrap();
        a.iter().for_each(|&i| fa.set(i));
        b.iter().for_each(|&i| fb.set(i));
        let union = a.union(&b).count();
        let expected = if union == 0 { 1.0 } else { a.intersection(&b).count() as f64 / union as f64 };
        prop_assert_eq!(tanimoto(&fa, &fb).unwrap(), expected);
    }

    #[test]
    fn ks_merge_matches_brute_force(a in sample(), b in sample()) {
        let d = ks_statistic(&a, &b).unwrap();
        prop_assert!((d - brute_force_d(&a, &b)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&d));
        let ab = ks_two_sample(&a, &b, 0.05).unwrap();
        let ba = ks_two_sample(&b, &a, 0.05).unwrap();
        prop_assert_eq!(ab.d, ba.d);
        prop_assert_eq!(ab.critical, ba.critical);
        prop_assert_eq!(ab.reject, ab.d > ab.critical);
    }

    #[test]
    fn ring_buckets_partition_a_set(seeds in prop::collection::vec(any::<u64>(), 1..30)) {
        let features: Vec<_> = seeds.iter().map(|&s| feature_vector(&toy_graph(s))).collect();
        let col = Table1Column::from_features(&features);
        prop_assert!((col.ring_buckets.iter().sum::<f64>() - 100.0).abs() < 1e-9);
        for f in &features {
            prop_assert_eq!(f.without_nos, !(f.contains_n || f.contains_o || f.contains_s));
        }
    }

    #[test]
    fn scaffold_overlap_bounded(a in prop::collection::vec(any::<u64>(), 1..15), b in prop::collection::vec(any::<u64>(), 1..15)) {
        let ga: Vec<_> = a.iter().map(|&s| toy_graph(s)).collect();
        let gb: Vec<_> = b.iter().map(|&s| toy_graph(s)).collect();
        let st = scaffold_stats(&ga, &gb);
        prop_assert!(st.overlap <= st.unique_a.min(st.unique_b));
        prop_assert_eq!(scaffold_stats(&ga, &ga).overlap, scaffold_stats(&ga, &ga).unique_a);
    }

    #[test]
    fn baseline_output_is_grammatical(seed in any::<u64>()) {
        let s = baseline::generate(toy_model(), &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(syntactic_prefilter(&s).is_ok(), "{}", s);
    }
}

#[test]
fn baseline_atom_frequencies_track_the_model() {
    let model = toy_model();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut counts = [0usize; ATOM_SYMBOLS.len()];
    let mut chars = 0;
    while chars < 100_000 {
        let s = baseline::generate(model, &mut rng);
        chars += s.chars().count();
        for c in s.chars() {
            if let Some(i) = ATOM_SYMBOLS.iter().position(|&a| a == c) {
                counts[i] += 1;
            }
        }
    }
    let atoms: usize = counts.iter().sum();
    for (i, &c) in ATOM_SYMBOLS.iter().enumerate() {
        let got = counts[i] as f64 / atoms as f64;
        assert!((got - model.atom_freq[i]).abs() < 0.01, "{c}: {got} vs {}", model.atom_freq[i]);
    }
}

