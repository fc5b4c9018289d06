//! Browser bindings. Every export takes plain strings and numbers and
//! returns a JSON document; failures come back as `{"error": "..."}`.

use molgen_core::baseline;
use molgen_core::chemstats::{feature_vector, functional_groups, ks_two_sample, morgan_fingerprint, tanimoto};
use molgen_core::lexicon::{normalize, to_standard_smiles};
use molgen_core::molparse::{canonical_form, parse_str, scaffold, MoleculeGraph};
use molgen_core::toycorpus::toy_corpus;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn respond(r: Result<Value, String>) -> String {
    r.unwrap_or_else(|e| json!({ "error": e })).to_string()
}

fn graph(smiles: &str) -> Result<MoleculeGraph, String> {
    let n = normalize(smiles).map_err(|r| format!("cannot normalize: {r}"))?;
    parse_str(n.as_str()).map_err(|e| e.to_string())
}

fn inspect_value(smiles: &str) -> Result<Value, String> {
    let g = graph(smiles)?;
    let canonical = canonical_form(&g);
    let groups: std::collections::BTreeMap<_, _> = functional_groups(&g).into_iter().filter(|(_, n)| *n > 0).collect();
    Ok(json!({
        "canonical": to_standard_smiles(&canonical),
        "atoms": g.atom_count(),
        "bonds": g.bonds().len(),
        "rings": g.rings().iter().map(Vec::len).collect::<Vec<_>>(),
        "scaffold": to_standard_smiles(&canonical_form(&scaffold(&g))),
        "features": feature_vector(&g),
        "functional_groups": groups,
    }))
}

/// Parses one SMILES string and describes the molecule.
#[wasm_bindgen]
pub fn inspect(smiles: &str) -> String {
    respond(inspect_value(smiles))
}

fn similarity_value(a: &str, b: &str, radius: usize, nbits: usize) -> Result<Value, String> {
    let fa = morgan_fingerprint(&graph(a)?, radius, nbits).map_err(|e| e.to_string())?;
    let fb = morgan_fingerprint(&graph(b)?, radius, nbits).map_err(|e| e.to_string())?;
    Ok(json!({
        "tanimoto": tanimoto(&fa, &fb).map_err(|e| e.to_string())?,
        "bits_a": fa.count_ones(),
        "bits_b": fb.count_ones(),
    }))
}

/// Tanimoto similarity of two molecules' circular fingerprints.
#[wasm_bindgen]
pub fn similarity(a: &str, b: &str, radius: usize, nbits: usize) -> String {
    respond(similarity_value(a, b, radius, nbits))
}

fn control_set_value(corpus: &str, count: usize, seed: u64) -> Result<Value, String> {
    if count == 0 || count > 5000 {
        return Err("count must lie between 1 and 5000".into());
    }
    let lines: Vec<String> = if corpus.trim().is_empty() {
        toy_corpus(500, seed).iter().filter_map(|s| normalize(s).ok()).map(|s| s.into_string()).collect()
    } else {
        corpus.lines().filter(|l| !l.trim().is_empty()).filter_map(|l| normalize(l).ok()).map(|s| s.into_string()).collect()
    };
    let reference: Vec<MoleculeGraph> = lines.iter().filter_map(|l| parse_str(l).ok()).collect();
    if reference.is_empty() {
        return Err("no parseable molecules in the corpus".into());
    }
    let model = baseline::fit(&lines).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut made = Vec::new();
    let mut tries = 0;
    while made.len() < count && tries < count * 1000 {
        tries += 1;
        if let Ok(g) = parse_str(&baseline::generate(&model, &mut rng)) {
            made.push(g);
        }
    }
    if made.is_empty() {
        return Err("no baseline string parsed".into());
    }
    let weights = |set: &[MoleculeGraph]| set.iter().map(MoleculeGraph::molecular_weight).collect::<Vec<_>>();
    let ks = ks_two_sample(&weights(&reference), &weights(&made), 0.05).map_err(|e| e.to_string())?;
    let share = |set: &[MoleculeGraph], f: fn(&molgen_core::chemstats::FeatureVector) -> bool| {
        100.0 * set.iter().filter(|g| f(&feature_vector(g))).count() as f64 / set.len() as f64
    };
    Ok(json!({
        "molecules": made.iter().map(|g| to_standard_smiles(&canonical_form(g))).collect::<Vec<_>>(),
        "tries": tries,
        "reference_size": reference.len(),
        "large_ring_percent": { "reference": share(&reference, |f| f.has_large_ring), "control": share(&made, |f| f.has_large_ring) },
        "fused_aromatic_percent": { "reference": share(&reference, |f| f.has_fused_aromatic), "control": share(&made, |f| f.has_fused_aromatic) },
        "molecular_weight_ks": ks,
    }))
}

/// Fits the random-string control model on a corpus (one SMILES per line,
/// or a built-in synthetic set when empty), draws `count` parseable
/// molecules and compares their weight distribution with the corpus.
#[wasm_bindgen]
pub fn control_set(corpus: &str, count: usize, seed: u64) -> String {
    respond(control_set_value(corpus, count, seed))
}
