//! Descriptor statistics over molecule sets: substructure features, weight
//! histograms, scaffolds, fingerprint similarity, functional groups and
//! two-sample KS comparisons.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::molparse::{canonical_form, scaffold, Element, MoleculeGraph};

pub mod fingerprint;
mod groups;
pub mod ks;

pub use fingerprint::{environment_ids, morgan_fingerprint, tanimoto, Fingerprint, DEFAULT_NBITS, DEFAULT_RADIUS};
pub use groups::{functional_groups, group_names};
pub use ks::{ks_coefficient, ks_critical, ks_statistic, ks_two_sample, KsResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChemError {
    #[error("alpha must lie in (0, 1), got {0}")]
    Alpha(f64),
    #[error("empty sample")]
    EmptySample,
    #[error("sample contains NaN")]
    NanSample,
    #[error("fingerprint width {0} is not a power of two")]
    Width(usize),
    #[error("fingerprint widths differ: {0} vs {1}")]
    WidthMismatch(usize, usize),
    #[error("molecule set `{0}` is empty")]
    EmptySet(String),
    #[error("reference set is empty")]
    EmptyReference,
}

/// Width of a similarity histogram bin.
pub const SIMILARITY_BIN: f64 = 0.05;
/// Width of a molecular-weight histogram bin in daltons.
pub const MW_BIN: f64 = 50.0;

/// Ring-count rows of the substructure table; the last one is "more than 4".
pub const RING_BUCKETS: [&str; 6] = ["0", "1", "2", "3", "4", ">4"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub ring_count: usize,
    /// Index into [`RING_BUCKETS`].
    pub ring_count_bucket: usize,
    pub has_fused_aromatic: bool,
    pub has_large_ring: bool,
    pub has_spiro: bool,
    pub contains_n: bool,
    pub contains_o: bool,
    pub contains_s: bool,
    pub contains_halogen: bool,
    pub without_nos: bool,
    pub molecular_weight: f64,
}

fn ring_bonds(ring: &[usize]) -> Vec<(usize, usize)> {
    (0..ring.len())
        .map(|i| {
            let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
            (a.min(b), a.max(b))
        })
        .collect()
}

pub fn feature_vector(g: &MoleculeGraph) -> FeatureVector {
    let rings = g.rings();
    let bonds: Vec<HashSet<(usize, usize)>> = rings.iter().map(|r| ring_bonds(r).into_iter().collect()).collect();
    let aromatic: Vec<bool> = rings.iter().map(|r| r.iter().all(|&a| g.atoms()[a].aromatic)).collect();
    let (mut fused, mut spiro) = (false, false);
    for i in 0..rings.len() {
        for j in i + 1..rings.len() {
            let shares_bond = !bonds[i].is_disjoint(&bonds[j]);
            if shares_bond && aromatic[i] && aromatic[j] {
                fused = true;
            }
            let shared_atoms = rings[i].iter().filter(|a| rings[j].contains(a)).count();
            if shared_atoms == 1 && !shares_bond {
                spiro = true;
            }
        }
    }
    let has = |e: Element| g.atoms().iter().any(|a| a.element == e);
    let (n, o, s) = (has(Element::N), has(Element::O), has(Element::S));
    FeatureVector {
        ring_count: rings.len(),
        ring_count_bucket: rings.len().min(5),
        has_fused_aromatic: fused,
        has_large_ring: rings.iter().any(|r| r.len() > 8),
        has_spiro: spiro,
        contains_n: n,
        contains_o: o,
        contains_s: s,
        contains_halogen: g.atoms().iter().any(|a| a.element.is_halogen()),
        without_nos: !(n || o || s),
        molecular_weight: g.molecular_weight(),
    }
}

/// Maps `f` over `items` on up to `workers` scoped threads, keeping order.
fn par_map<T: Sync, U: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> U + Sync) -> Vec<U> {
    let workers = workers.max(1).min(items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    let f = &f;
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(f).collect::<Vec<U>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// `counts[k]` covers `[k·w, (k+1)·w)`.
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

fn mw_histogram(values: &[f64]) -> Histogram {
    let mut counts = Vec::new();
    for &v in values {
        let k = (v / MW_BIN).floor().max(0.0) as usize;
        if counts.len() <= k {
            counts.resize(k + 1, 0);
        }
        counts[k] += 1;
    }
    Histogram { bin_width: MW_BIN, counts }
}

fn similarity_histogram(values: &[f64]) -> Histogram {
    let bins = (1.0 / SIMILARITY_BIN).round() as usize;
    let mut counts = vec![0; bins];
    for &v in values {
        // 1.0 falls in the last bin
        let k = ((v / SIMILARITY_BIN).floor() as usize).min(bins - 1);
        counts[k] += 1;
    }
    Histogram {
        bin_width: SIMILARITY_BIN,
        counts,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearestSimilarity {
    pub values: Vec<f64>,
    pub histogram: Histogram,
}

fn nearest_with(
    query: &[Fingerprint],
    reference: &[Fingerprint],
    skip: Option<(&[String], &[String])>,
    workers: usize,
) -> Result<NearestSimilarity, ChemError> {
    if reference.is_empty() {
        return Err(ChemError::EmptyReference);
    }
    if let Some(r) = reference.iter().find(|r| r.nbits() != reference[0].nbits()) {
        return Err(ChemError::WidthMismatch(reference[0].nbits(), r.nbits()));
    }
    if let Some(q) = query.iter().find(|q| q.nbits() != reference[0].nbits()) {
        return Err(ChemError::WidthMismatch(q.nbits(), reference[0].nbits()));
    }
    let indices: Vec<usize> = (0..query.len()).collect();
    let values = par_map(&indices, workers, |&qi| {
        let mut best = 0.0f64;
        for (ri, r) in reference.iter().enumerate() {
            if let Some((qk, rk)) = skip {
                if qk[qi] == rk[ri] {
                    continue;
                }
            }
            best = best.max(tanimoto(&query[qi], r).expect("widths checked"));
        }
        best
    });
    let histogram = similarity_histogram(&values);
    Ok(NearestSimilarity { values, histogram })
}

/// Highest Tanimoto similarity of each query to any reference.
pub fn nearest_similarity(
    query: &[Fingerprint],
    reference: &[Fingerprint],
    workers: usize,
) -> Result<NearestSimilarity, ChemError> {
    nearest_with(query, reference, None, workers)
}

/// As [`nearest_similarity`], but references whose key equals the query's
/// key are skipped. A query with no remaining reference scores 0.
pub fn nearest_similarity_excluding(
    query: &[Fingerprint],
    query_keys: &[String],
    reference: &[Fingerprint],
    reference_keys: &[String],
    workers: usize,
) -> Result<NearestSimilarity, ChemError> {
    assert_eq!(query.len(), query_keys.len());
    assert_eq!(reference.len(), reference_keys.len());
    nearest_with(query, reference, Some((query_keys, reference_keys)), workers)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaffoldStats {
    pub unique_a: usize,
    pub unique_b: usize,
    pub overlap: usize,
}

pub fn scaffold_keys(set: &[MoleculeGraph]) -> HashSet<String> {
    set.iter().map(|g| canonical_form(&scaffold(g))).collect()
}

pub fn scaffold_stats(a: &[MoleculeGraph], b: &[MoleculeGraph]) -> ScaffoldStats {
    let (ka, kb) = (scaffold_keys(a), scaffold_keys(b));
    ScaffoldStats {
        unique_a: ka.len(),
        unique_b: kb.len(),
        overlap: ka.intersection(&kb).count(),
    }
}

/// Percent of molecules per substructure row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Column {
    pub ring_buckets: [f64; 6],
    pub fused_aromatic: f64,
    pub large_ring: f64,
    pub spiro: f64,
    pub contains_n: f64,
    pub contains_o: f64,
    pub contains_s: f64,
    pub contains_halogen: f64,
    pub without_nos: f64,
}

impl Table1Column {
    pub fn from_features(features: &[FeatureVector]) -> Self {
        let n = features.len().max(1) as f64;
        let pct = |f: &dyn Fn(&FeatureVector) -> bool| 100.0 * features.iter().filter(|v| f(v)).count() as f64 / n;
        let mut ring_buckets = [0.0; 6];
        for (k, slot) in ring_buckets.iter_mut().enumerate() {
            *slot = pct(&|v| v.ring_count_bucket == k);
        }
        Table1Column {
            ring_buckets,
            fused_aromatic: pct(&|v| v.has_fused_aromatic),
            large_ring: pct(&|v| v.has_large_ring),
            spiro: pct(&|v| v.has_spiro),
            contains_n: pct(&|v| v.contains_n),
            contains_o: pct(&|v| v.contains_o),
            contains_s: pct(&|v| v.contains_s),
            contains_halogen: pct(&|v| v.contains_halogen),
            without_nos: pct(&|v| v.without_nos),
        }
    }

    /// `(row label, percent)` in table order.
    pub fn rows(&self) -> Vec<(String, f64)> {
        let mut rows: Vec<(String, f64)> = RING_BUCKETS
            .iter()
            .zip(self.ring_buckets)
            .map(|(b, v)| (format!("rings {b}"), v))
            .collect();
        rows.extend([
            ("fused aromatic rings".to_string(), self.fused_aromatic),
            ("large rings (>8)".to_string(), self.large_ring),
            ("spiro rings".to_string(), self.spiro),
            ("contains N".to_string(), self.contains_n),
            ("contains O".to_string(), self.contains_o),
            ("contains S".to_string(), self.contains_s),
            ("contains halogen".to_string(), self.contains_halogen),
            ("without N, O, S".to_string(), self.without_nos),
        ]);
        rows
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetSummary {
    pub name: String,
    pub size: usize,
    pub table1: Table1Column,
    pub mean_molecular_weight: f64,
    pub mw_histogram: Histogram,
    /// Percent of molecules with at least one match of each group.
    pub functional_groups: BTreeMap<String, f64>,
    /// Total matches of each group divided by set size.
    pub functional_groups_per_molecule: BTreeMap<String, f64>,
    pub unique_scaffolds: usize,
    /// Nearest similarity to the training set, identical molecules skipped.
    pub similarity_to_training: Histogram,
    pub mean_similarity_to_training: f64,
    pub duplicates_of_training: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsComparison {
    pub quantity: String,
    pub first: String,
    pub second: String,
    pub result: KsResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaffoldOverlap {
    pub first: String,
    pub second: String,
    pub stats: ScaffoldStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChemStatsReport {
    pub radius: usize,
    pub nbits: usize,
    pub alpha: f64,
    pub sets: Vec<SetSummary>,
    pub scaffold_overlap: Vec<ScaffoldOverlap>,
    pub ks: Vec<KsComparison>,
}

impl ChemStatsReport {
    pub fn set(&self, name: &str) -> Option<&SetSummary> {
        self.sets.iter().find(|s| s.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The substructure table, one column per set.
    pub fn table1_csv(&self) -> String {
        let mut out = String::from("feature");
        for s in &self.sets {
            out.push(',');
            out.push_str(&s.name);
        }
        out.push('\n');
        let columns: Vec<Vec<(String, f64)>> = self.sets.iter().map(|s| s.table1.rows()).collect();
        for (r, (label, _)) in columns[0].iter().enumerate() {
            out.push_str(label);
            for col in &columns {
                out.push_str(&format!(",{:.1}", col[r].1));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub radius: usize,
    pub nbits: usize,
    pub alpha: f64,
    pub workers: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            radius: DEFAULT_RADIUS,
            nbits: DEFAULT_NBITS,
            alpha: 0.05,
            workers: 1,
        }
    }
}

struct Prepared<'a> {
    name: &'a str,
    graphs: &'a [MoleculeGraph],
    features: Vec<FeatureVector>,
    canonical: Vec<String>,
    fingerprints: Vec<Fingerprint>,
    similarity: Vec<f64>,
}

fn prepare<'a>(name: &'a str, graphs: &'a [MoleculeGraph], cfg: &ReportConfig) -> Result<Prepared<'a>, ChemError> {
    if graphs.is_empty() {
        return Err(ChemError::EmptySet(name.to_string()));
    }
    let features = par_map(graphs, cfg.workers, feature_vector);
    let canonical = par_map(graphs, cfg.workers, canonical_form);
    let fingerprints = par_map(graphs, cfg.workers, |g| morgan_fingerprint(g, cfg.radius, cfg.nbits))
        .into_iter()
        .collect::<Result<_, _>>()?;
    Ok(Prepared {
        name,
        graphs,
        features,
        canonical,
        fingerprints,
        similarity: Vec::new(),
    })
}

fn summarize(p: &Prepared, training: &HashSet<&str>, workers: usize) -> SetSummary {
    let size = p.graphs.len();
    let n = size as f64;
    let weights: Vec<f64> = p.features.iter().map(|f| f.molecular_weight).collect();
    let counts = par_map(p.graphs, workers, functional_groups);
    let mut present = BTreeMap::new();
    let mut per_molecule = BTreeMap::new();
    for name in group_names() {
        let hits = counts.iter().filter(|c| c[name] > 0).count();
        let total: usize = counts.iter().map(|c| c[name]).sum();
        present.insert(name.to_string(), 100.0 * hits as f64 / n);
        per_molecule.insert(name.to_string(), total as f64 / n);
    }
    SetSummary {
        name: p.name.to_string(),
        size,
        table1: Table1Column::from_features(&p.features),
        mean_molecular_weight: weights.iter().sum::<f64>() / n,
        mw_histogram: mw_histogram(&weights),
        functional_groups: present,
        functional_groups_per_molecule: per_molecule,
        unique_scaffolds: scaffold_keys(p.graphs).len(),
        similarity_to_training: similarity_histogram(&p.similarity),
        mean_similarity_to_training: p.similarity.iter().sum::<f64>() / n,
        duplicates_of_training: p.canonical.iter().filter(|c| training.contains(c.as_str())).count(),
    }
}

/// Compares a generated set and a baseline set against the training set.
///
/// Similarity distributions are nearest-neighbor similarities to the
/// training set with identical molecules (same canonical form) skipped,
/// so the training column measures its own internal spread.
pub fn build_report(
    training: &[MoleculeGraph],
    generated: &[MoleculeGraph],
    baseline: &[MoleculeGraph],
    cfg: &ReportConfig,
) -> Result<ChemStatsReport, ChemError> {
    compare_sets(training, &[("generated", generated), ("baseline", baseline)], cfg)
}

/// Like [`build_report`] for any number of named sets compared against the
/// training set, including none.
pub fn compare_sets(
    training: &[MoleculeGraph],
    others: &[(&str, &[MoleculeGraph])],
    cfg: &ReportConfig,
) -> Result<ChemStatsReport, ChemError> {
    ks_coefficient(cfg.alpha)?;
    Fingerprint::empty(cfg.nbits, cfg.radius)?;
    let mut sets = vec![prepare("training", training, cfg)?];
    for &(name, graphs) in others {
        sets.push(prepare(name, graphs, cfg)?);
    }
    let (train_fps, train_keys) = (sets[0].fingerprints.clone(), sets[0].canonical.clone());
    for p in &mut sets {
        p.similarity = nearest_similarity_excluding(&p.fingerprints, &p.canonical, &train_fps, &train_keys, cfg.workers)?.values;
    }
    let training_keys: HashSet<&str> = train_keys.iter().map(String::as_str).collect();
    let summaries: Vec<SetSummary> = sets.iter().map(|p| summarize(p, &training_keys, cfg.workers)).collect();

    let mut ks = Vec::new();
    let mut overlap = Vec::new();
    for other in &sets[1..] {
        let weights = |p: &Prepared| p.features.iter().map(|f| f.molecular_weight).collect::<Vec<_>>();
        ks.push(KsComparison {
            quantity: "molecular_weight".into(),
            first: sets[0].name.into(),
            second: other.name.into(),
            result: ks_two_sample(&weights(&sets[0]), &weights(other), cfg.alpha)?,
        });
        ks.push(KsComparison {
            quantity: "similarity_to_training".into(),
            first: sets[0].name.into(),
            second: other.name.into(),
            result: ks_two_sample(&sets[0].similarity, &other.similarity, cfg.alpha)?,
        });
        overlap.push(ScaffoldOverlap {
            first: sets[0].name.into(),
            second: other.name.into(),
            stats: scaffold_stats(sets[0].graphs, other.graphs),
        });
    }
    Ok(ChemStatsReport {
        radius: cfg.radius,
        nbits: cfg.nbits,
        alpha: cfg.alpha,
        sets: summaries,
        scaffold_overlap: overlap,
        ks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molparse::parse_str;

    fn fv(s: &str) -> FeatureVector {
        feature_vector(&parse_str(s).unwrap())
    }

    fn graphs(list: &[&str]) -> Vec<MoleculeGraph> {
        list.iter().map(|s| parse_str(s).unwrap()).collect()
    }

    #[test]
    fn features() {
        let b = fv("c1ccccc1");
        assert_eq!(b.ring_count, 1);
        assert!(!b.has_fused_aromatic && !b.has_large_ring && b.without_nos);
        assert!((b.molecular_weight - (6.0 * 12.011 + 6.0 * 1.008)).abs() < 1e-9);
        let n = fv("c1ccc2ccccc2c1");
        assert_eq!(n.ring_count, 2);
        assert!(n.has_fused_aromatic && !n.has_spiro);
        assert!(fv("C1CCCCCCCC1").has_large_ring);
        let s = fv("C1CCC2(CC1)CCCC2");
        assert!(s.has_spiro && !s.has_fused_aromatic);
        // biphenyl: two aromatic rings joined by a single bond are not fused
        assert!(!fv("c1ccc(cc1)c1ccccc1").has_fused_aromatic);
        // decalin shares a bond but is not aromatic
        assert!(!fv("C1CCC2CCCCC2C1").has_fused_aromatic);
        assert_eq!(fv("C1CC1C1CC1C1CC1C1CC1C1CC1").ring_count_bucket, 5);
        let w = fv("CCOc1ccncc1L");
        assert!(w.contains_n && w.contains_o && w.contains_halogen && !w.without_nos);
    }

    #[test]
    fn scaffolds() {
        let s = scaffold_stats(&graphs(&["CCc1ccccc1", "Cc1ccccc1"]), &graphs(&["c1ccccc1O", "C1CCCCC1"]));
        assert_eq!(s, ScaffoldStats { unique_a: 1, unique_b: 2, overlap: 1 });
    }

    #[test]
    fn nearest() {
        let g = graphs(&["CCO", "c1ccccc1", "CC(=O)O"]);
        let fps: Vec<Fingerprint> = g.iter().map(|g| morgan_fingerprint(g, 2, 1024).unwrap()).collect();
        let r = nearest_similarity(&fps[..1], &fps, 2).unwrap();
        assert_eq!(r.values, vec![1.0]);
        assert_eq!(r.histogram.counts[19], 1);
        let single = nearest_similarity(&fps[1..2], &fps[2..3], 1).unwrap();
        assert_eq!(single.values[0], tanimoto(&fps[1], &fps[2]).unwrap());
        assert_eq!(nearest_similarity(&fps, &[], 1), Err(ChemError::EmptyReference));
        let keys: Vec<String> = g.iter().map(canonical_form).collect();
        let loo = nearest_similarity_excluding(&fps, &keys, &fps, &keys, 3).unwrap();
        assert!(loo.values.iter().all(|&v| v < 1.0));
        assert_eq!(loo.histogram.total(), 3);
    }

    #[test]
    fn report_identical_sets() {
        let set = graphs(&["CCO", "c1ccccc1C", "c1ccc2ccccc2c1", "C1CCC2(CC1)CCCC2", "CC(=O)Nc1ccccc1", "C1CCCCCCCC1"]);
        let r = build_report(&set, &set, &set, &ReportConfig { workers: 2, ..Default::default() }).unwrap();
        assert_eq!(r.sets[0].table1, r.sets[1].table1);
        assert_eq!(r.sets[0].similarity_to_training, r.sets[2].similarity_to_training);
        assert!(r.ks.iter().all(|k| k.result.d == 0.0 && !k.result.reject));
        for s in &r.sets {
            assert!((s.table1.ring_buckets.iter().sum::<f64>() - 100.0).abs() < 1e-9);
            assert_eq!(s.mw_histogram.total(), set.len());
            assert_eq!(s.similarity_to_training.total(), set.len());
            assert_eq!(s.duplicates_of_training, set.len());
        }
        let csv = r.table1_csv();
        assert!(csv.starts_with("feature,training,generated,baseline\n"));
        assert_eq!(csv.lines().count(), 1 + 14);
        assert!(matches!(build_report(&set, &[], &set, &ReportConfig::default()), Err(ChemError::EmptySet(n)) if n == "generated"));
    }
}
