//! Deterministic synthetic corpus of drug-like SMILES.
//!
//! Molecules are assembled from ring templates joined by linkers and
//! decorated with substituents, written in standard SMILES (`Cl`, `Br`,
//! `[nH]`). Every string passes [`crate::lexicon::normalize`] and parses.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A ring template. `{a}` and `{b}` are ring labels filled in at assembly
/// time; `open` lists token positions that may carry a substituent. The
/// first token is the entry atom and the last token is the exit atom.
struct Template {
    tokens: &'static [&'static str],
    open: &'static [usize],
}

const RINGS: &[Template] = &[
    Template { tokens: &["c{a}", "c", "c", "c", "c", "c{a}"], open: &[1, 2, 3, 4] },
    Template { tokens: &["c{a}", "c", "c", "c", "c", "c{a}"], open: &[2, 3] },
    Template { tokens: &["c{a}", "c", "c", "n", "c", "c{a}"], open: &[1, 2, 4] },
    Template { tokens: &["c{a}", "c", "n", "c", "c", "c{a}"], open: &[1, 3] },
    Template { tokens: &["c{a}", "c", "n", "c", "n", "c{a}"], open: &[1, 3] },
    Template { tokens: &["c{a}", "c", "c", "s", "c{a}"], open: &[1, 2] },
    Template { tokens: &["c{a}", "c", "c", "o", "c{a}"], open: &[1] },
    Template { tokens: &["c{a}", "c", "c", "[nH]", "c{a}"], open: &[1] },
    Template { tokens: &["n{a}", "c", "c", "c", "c{a}"], open: &[2] },
    Template { tokens: &["c{a}", "[nH]", "c", "n", "c{a}"], open: &[] },
    Template { tokens: &["c{a}", "s", "c", "n", "c{a}"], open: &[2] },
    Template { tokens: &["c{a}", "o", "c", "n", "c{a}"], open: &[] },
    Template { tokens: &["C{a}", "C", "C", "C", "C", "C{a}"], open: &[2, 3] },
    Template { tokens: &["C{a}", "C", "C", "C", "C{a}"], open: &[2] },
    Template { tokens: &["C{a}", "C", "C{a}"], open: &[] },
    Template { tokens: &["N{a}", "C", "C", "C", "C", "C{a}"], open: &[3] },
    Template { tokens: &["N{a}", "C", "C", "O", "C", "C{a}"], open: &[] },
    Template { tokens: &["N{a}", "C", "C", "N", "C", "C{a}"], open: &[] },
    Template { tokens: &["C{a}", "C", "N", "C", "C{a}"], open: &[2] },
    Template { tokens: &["C{a}", "C", "O", "C", "C{a}"], open: &[] },
    Template { tokens: &["C{a}", "C", "C", "C(=O)", "N{a}"], open: &[] },
    Template { tokens: &["c{a}", "c", "c", "c{b}", "c", "c", "c", "c", "c{b}", "c{a}"], open: &[1, 5, 6] },
    Template { tokens: &["c{a}", "c", "c", "c{b}", "[nH]", "c", "c", "c{b}", "c{a}"], open: &[1, 5] },
    Template { tokens: &["c{a}", "c", "c", "c{b}", "n", "c", "c", "c", "c{b}", "c{a}"], open: &[1, 6] },
    Template { tokens: &["c{a}", "c", "c", "c{b}", "[nH]", "c", "n", "c{b}", "c{a}"], open: &[1] },
    Template { tokens: &["c{a}", "c", "c", "c{b}", "o", "c", "c", "c{b}", "c{a}"], open: &[1] },
    Template { tokens: &["c{a}", "c", "c", "c{b}", "C", "C", "N", "C", "c{b}", "c{a}"], open: &[1] },
    Template { tokens: &["c{a}", "c", "c", "c{b}", "O", "C", "O", "c{b}", "c{a}"], open: &[1] },
];

const LINKERS: &[&str] = &[
    "", "", "C", "CC", "C(=O)N", "NC(=O)", "O", "N", "C(=O)", "OC", "CO", "S(=O)(=O)N", "NC(=O)N", "CN", "NC",
    "C=C", "CCN", "C(=O)NC",
];

const SUBSTITUENTS: &[&str] = &[
    "C", "C", "C", "CC", "O", "OC", "OC", "F", "F", "Cl", "Cl", "Br", "N", "C(=O)O", "C(=O)N", "C#N", "C(F)(F)F",
    "N(C)C", "S(C)(=O)=O", "C(C)C", "CO", "OCC", "C(=O)OC", "NC(C)=O", "S(N)(=O)=O", "I", "C(C)(C)C", "OC(F)(F)F",
];

const HEADS: &[&str] = &["", "", "", "C", "CC", "CO", "CCN", "CC(C)", "OCC", "NC(=O)C", "CN(C)C", "COC(=O)", "CCOC(=O)"];

const TAILS: &[&str] = &["", "", "", "C", "O", "N", "C(=O)O", "C(=O)N", "CC(=O)O", "N(C)C", "CO", "F", "CCO", "C#N"];

// Every template closes its own rings, so labels restart at 1 for each.
fn ring_string<R: Rng>(t: &Template, rng: &mut R) -> String {
    let (a, b) = (1, 2);
    let mut chosen: Vec<usize> = t.open.to_vec();
    chosen.shuffle(rng);
    let n_subs = rng.gen_range(0..=chosen.len().min(2));
    let subs: HashSet<usize> = chosen.into_iter().take(n_subs).collect();
    let mut out = String::new();
    for (i, tok) in t.tokens.iter().enumerate() {
        let tok = tok.replace("{a}", &a.to_string()).replace("{b}", &b.to_string());
        out.push_str(&tok);
        if subs.contains(&i) {
            out.push('(');
            out.push_str(SUBSTITUENTS.choose(rng).expect("non-empty"));
            out.push(')');
        }
    }
    out
}

/// One synthetic molecule in standard SMILES.
pub fn toy_molecule<R: Rng>(rng: &mut R) -> String {
    let systems = match rng.gen_range(0..10) {
        0 => 1,
        1..=5 => 2,
        _ => 3,
    };
    let mut out = String::from(*HEADS.choose(rng).expect("non-empty"));
    for k in 0..systems {
        if k > 0 {
            out.push_str(LINKERS.choose(rng).expect("non-empty"));
        }
        let t = RINGS.choose(rng).expect("non-empty");
        if out.is_empty() && t.tokens[0].starts_with('n') {
            // a pyrrole-type nitrogen needs its third neighbor
            out.push('C');
        }
        out.push_str(&ring_string(t, rng));
    }
    out.push_str(TAILS.choose(rng).expect("non-empty"));
    out
}

/// `n` distinct synthetic molecules, fully determined by `seed`.
pub fn toy_corpus(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let m = toy_molecule(&mut rng);
        if seen.insert(m.clone()) {
            out.push(m);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::normalize;
    use crate::molparse::parse;

    #[test]
    fn every_molecule_normalizes_and_parses() {
        for (i, s) in toy_corpus(3000, 5).iter().enumerate() {
            let norm = normalize(s).unwrap_or_else(|e| panic!("{i}: {s}: {e}"));
            parse(&norm).unwrap_or_else(|e| panic!("{i}: {s}: {e}"));
        }
    }

    #[test]
    fn seeded() {
        assert_eq!(toy_corpus(50, 1), toy_corpus(50, 1));
        assert_ne!(toy_corpus(50, 1), toy_corpus(50, 2));
    }
}
