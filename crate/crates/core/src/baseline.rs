//! Naive roulette-wheel SMILES generator used as the weak control.
//!
//! Fitting collects atom-symbol frequencies, the mean distance between
//! paired parentheses and paired ring digits, per-atom branch and ring
//! opening rates, bond-symbol rates and the line-length distribution.
//! Generation fills a string symbol by symbol from those numbers. Closures
//! follow a geometric hazard of `1 / mean span` per step, so the expected
//! span matches the corpus; the ring to close is chosen uniformly among
//! the open ones.
//!
//! Aromatic symbols only appear between the two digits of a ring pair. A
//! ring takes the flavor of the atom that opens it and every further atom
//! on its path is drawn from the matching part of the wheel. An aromatic
//! atom drawn outside any ring opens one; atoms on an aromatic ring path
//! never open another. Ring closures happen at the branch depth of the
//! opening, and a branch closes only after the rings opened inside it.
//!
//! Output always passes the syntactic prefilter; chemistry is not checked.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The atom symbols of the normalized alphabet.
pub const ATOM_SYMBOLS: [char; 14] = ['C', 'N', 'O', 'S', 'P', 'F', 'L', 'R', 'I', 'c', 'n', 'o', 's', 'A'];

const MAX_LABELS: u8 = 5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BaselineError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("corpus contains no atoms")]
    NoAtoms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    /// Probability of each symbol in [`ATOM_SYMBOLS`], same order.
    pub atom_freq: Vec<f64>,
    pub mean_paren_span: f64,
    pub mean_ring_span: f64,
    pub branch_open_prob: f64,
    pub ring_open_prob: f64,
    pub double_bond_prob: f64,
    pub triple_bond_prob: f64,
    /// Line length in characters → number of corpus lines.
    pub target_length: BTreeMap<usize, usize>,
    /// Chance that an atom drawn outside every ring is aromatic. Tuned so
    /// the aromatic share of generated atoms matches `atom_freq`.
    pub aromatic_start_prob: f64,
}

impl BaselineModel {
    pub fn frequency(&self, symbol: char) -> f64 {
        ATOM_SYMBOLS
            .iter()
            .position(|&c| c == symbol)
            .map_or(0.0, |i| self.atom_freq[i])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

fn is_aromatic(c: char) -> bool {
    matches!(c, 'c' | 'n' | 'o' | 's' | 'A')
}

/// Collects corpus statistics from normalized SMILES lines.
pub fn fit<S: AsRef<str>>(corpus: &[S]) -> Result<BaselineModel, BaselineError> {
    if corpus.is_empty() {
        return Err(BaselineError::EmptyCorpus);
    }
    let mut atom_counts = [0usize; 14];
    let (mut paren_spans, mut paren_pairs) = (0usize, 0usize);
    let (mut ring_spans, mut ring_pairs) = (0usize, 0usize);
    let (mut doubles, mut triples) = (0usize, 0usize);
    let mut target_length = BTreeMap::new();
    for line in corpus {
        let chars: Vec<char> = line.as_ref().chars().collect();
        *target_length.entry(chars.len()).or_insert(0) += 1;
        let mut stack = Vec::new();
        let mut open_ring: [Option<usize>; 10] = [None; 10];
        for (pos, &c) in chars.iter().enumerate() {
            if let Some(i) = ATOM_SYMBOLS.iter().position(|&a| a == c) {
                atom_counts[i] += 1;
                continue;
            }
            match c {
                '(' => stack.push(pos),
                ')' => {
                    if let Some(open) = stack.pop() {
                        paren_spans += pos - open;
                        paren_pairs += 1;
                    }
                }
                '=' => doubles += 1,
                '#' => triples += 1,
                d if d.is_ascii_digit() => {
                    let k = d.to_digit(10).expect("digit") as usize;
                    match open_ring[k].take() {
                        Some(open) => {
                            ring_spans += pos - open;
                            ring_pairs += 1;
                        }
                        None => open_ring[k] = Some(pos),
                    }
                }
                _ => {}
            }
        }
    }
    let atoms: usize = atom_counts.iter().sum();
    if atoms == 0 {
        return Err(BaselineError::NoAtoms);
    }
    let bonds_between = atoms.saturating_sub(corpus.len()).max(1) as f64;
    let mut model = BaselineModel {
        atom_freq: atom_counts.iter().map(|&n| n as f64 / atoms as f64).collect(),
        mean_paren_span: if paren_pairs > 0 { (paren_spans as f64 / paren_pairs as f64).max(1.0) } else { 1.0 },
        mean_ring_span: if ring_pairs > 0 { (ring_spans as f64 / ring_pairs as f64).max(1.0) } else { 1.0 },
        branch_open_prob: paren_pairs as f64 / atoms as f64,
        ring_open_prob: ring_pairs as f64 / atoms as f64,
        double_bond_prob: doubles as f64 / bonds_between,
        triple_bond_prob: triples as f64 / bonds_between,
        target_length,
        aromatic_start_prob: 0.0,
    };
    model.aromatic_start_prob = calibrate_aromatic_start(&model);
    Ok(model)
}

fn aromatic_share(model: &BaselineModel) -> f64 {
    ATOM_SYMBOLS
        .iter()
        .zip(&model.atom_freq)
        .filter(|(c, _)| is_aromatic(**c))
        .map(|(_, p)| p)
        .sum()
}

/// Fixed-point search on simulated output: with start probability `q` and
/// observed share `s`, an aromatic start yields `r = s(1-q) / ((1-s)q)`
/// times as many atoms as an aliphatic one.
fn calibrate_aromatic_start(model: &BaselineModel) -> f64 {
    const ROUNDS: usize = 6;
    const ATOMS: usize = 200_000;
    let target = aromatic_share(model);
    if target <= 0.0 || target >= 1.0 {
        return target.clamp(0.0, 1.0);
    }
    let mut trial = model.clone();
    let mut q = target;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..ROUNDS {
        trial.aromatic_start_prob = q;
        let (mut aromatic, mut atoms) = (0usize, 0usize);
        while atoms < ATOMS {
            for c in generate(&trial, &mut rng).chars() {
                if ATOM_SYMBOLS.contains(&c) {
                    atoms += 1;
                    aromatic += usize::from(is_aromatic(c));
                }
            }
        }
        let s = aromatic as f64 / atoms as f64;
        if s <= 0.0 || s >= 1.0 {
            break;
        }
        let r = s * (1.0 - q) / ((1.0 - s) * q);
        q = target / (target + (1.0 - target) * r);
    }
    q
}

#[derive(Debug, Clone, Copy)]
struct OpenRing {
    label: u8,
    // atoms written on the ring path since opening
    atoms: usize,
    depth: usize,
    aromatic: bool,
}

struct Builder<'m, R> {
    model: &'m BaselineModel,
    rng: &'m mut R,
    out: String,
    rings: Vec<OpenRing>,
    // open branches: atoms written directly inside each
    branches: Vec<usize>,
    // aromatic flag of the last atom written at each depth
    last: Vec<bool>,
}

impl<R: Rng> Builder<'_, R> {
    fn depth(&self) -> usize {
        self.branches.len()
    }

    fn wheel(&mut self, keep: impl Fn(char) -> bool) -> char {
        let total: f64 = (0..ATOM_SYMBOLS.len())
            .filter(|&i| keep(ATOM_SYMBOLS[i]))
            .map(|i| self.model.atom_freq[i])
            .sum();
        let u = self.rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut fallback = None;
        for (i, &p) in self.model.atom_freq.iter().enumerate() {
            if !keep(ATOM_SYMBOLS[i]) || p == 0.0 {
                continue;
            }
            fallback = Some(ATOM_SYMBOLS[i]);
            acc += p;
            if u < acc {
                return ATOM_SYMBOLS[i];
            }
        }
        fallback.unwrap_or('C')
    }

    /// The innermost ring whose path runs through the current depth.
    fn context(&self) -> Option<OpenRing> {
        let d = self.depth();
        self.rings.iter().rev().find(|r| r.depth == d).copied()
    }

    fn draw_atom(&mut self) -> char {
        match self.context() {
            Some(r) if r.aromatic => self.wheel(is_aromatic),
            Some(_) => self.wheel(|c| !is_aromatic(c)),
            None => {
                let aromatic = self.rng.gen::<f64>() < self.model.aromatic_start_prob;
                if aromatic && self.free_label().is_some() {
                    self.wheel(is_aromatic)
                } else {
                    self.wheel(|c| !is_aromatic(c))
                }
            }
        }
    }

    fn free_label(&self) -> Option<u8> {
        (1..=MAX_LABELS).find(|l| self.rings.iter().all(|r| r.label != *l))
    }

    fn open_ring(&mut self) {
        if let Some(label) = self.free_label() {
            let depth = self.depth();
            self.out.push(char::from(b'0' + label));
            self.rings.push(OpenRing {
                label,
                atoms: 0,
                depth,
                aromatic: self.last[depth],
            });
        }
    }

    fn write_atom(&mut self, atom: char) {
        let d = self.depth();
        let had_context = self.context().is_some();
        let prev = if self.out.is_empty() {
            None
        } else if self.out.ends_with('(') {
            Some(self.last[d - 1])
        } else {
            Some(self.last[d])
        };
        // bond symbols never sit between two aromatic atoms
        if prev.is_some() && !(prev == Some(true) && is_aromatic(atom)) {
            self.bond();
        }
        self.out.push(atom);
        for r in self.rings.iter_mut().filter(|r| r.depth == d) {
            r.atoms += 1;
        }
        if let Some(b) = self.branches.last_mut() {
            *b += 1;
        }
        if self.last.len() <= d {
            self.last.resize(d + 1, false);
        }
        self.last[d] = is_aromatic(atom);
        if is_aromatic(atom) && !had_context {
            self.open_ring();
        }
    }

    fn close_ring(&mut self, idx: usize) {
        let r = self.rings.remove(idx);
        self.out.push(char::from(b'0' + r.label));
    }

    fn open_branch(&mut self) {
        self.out.push('(');
        self.branches.push(0);
    }

    fn close_branch(&mut self) {
        self.branches.pop();
        self.out.push(')');
    }

    fn bond(&mut self) {
        let u: f64 = self.rng.gen();
        if u < self.model.double_bond_prob {
            self.out.push('=');
        } else if u < self.model.double_bond_prob + self.model.triple_bond_prob {
            self.out.push('#');
        }
    }

    fn eligible_rings(&self) -> Vec<usize> {
        let d = self.depth();
        (0..self.rings.len())
            .filter(|&i| self.rings[i].depth == d && self.rings[i].atoms >= 2)
            .collect()
    }

    fn rings_here(&self) -> bool {
        let d = self.depth();
        self.rings.iter().any(|r| r.depth == d)
    }
}

fn sample_length<R: Rng>(model: &BaselineModel, rng: &mut R) -> usize {
    let total: usize = model.target_length.values().sum();
    if total == 0 {
        return 1;
    }
    let mut pick = rng.gen_range(0..total);
    for (&len, &n) in &model.target_length {
        if pick < n {
            return len.max(1);
        }
        pick -= n;
    }
    1
}

/// One raw string.
pub fn generate<R: Rng>(model: &BaselineModel, rng: &mut R) -> String {
    let target = sample_length(model, rng);
    let ring_hazard = 1.0 / model.mean_ring_span.max(1.0);
    let paren_hazard = 1.0 / model.mean_paren_span.max(1.0);
    let mut b = Builder {
        model,
        rng,
        out: String::new(),
        rings: Vec::new(),
        branches: Vec::new(),
        last: vec![false],
    };
    let first = b.draw_atom();
    b.write_atom(first);
    while b.out.chars().count() < target {
        // ring events on the atom just written
        let eligible = b.eligible_rings();
        let p_close = 1.0 - (1.0 - ring_hazard).powi(eligible.len() as i32);
        if !eligible.is_empty() && b.rng.gen::<f64>() < p_close {
            let pick = eligible[b.rng.gen_range(0..eligible.len())];
            b.close_ring(pick);
        } else if b.context().is_none_or(|r| !r.aromatic) && b.rng.gen::<f64>() < model.ring_open_prob {
            b.open_ring();
        }
        // a branch closes only once the rings opened inside it are closed
        let closable = b.branches.last().is_some_and(|&n| n >= 1) && !b.rings_here();
        if closable && b.rng.gen::<f64>() < paren_hazard {
            b.close_branch();
        } else if b.rng.gen::<f64>() < model.branch_open_prob {
            b.open_branch();
        }
        let atom = b.draw_atom();
        b.write_atom(atom);
    }
    // wind down: nothing new opens, open rings keep their closing hazard
    loop {
        if b.rings_here() {
            let eligible = b.eligible_rings();
            let p_close = 1.0 - (1.0 - ring_hazard).powi(eligible.len() as i32);
            if !eligible.is_empty() && b.rng.gen::<f64>() < p_close {
                let pick = eligible[b.rng.gen_range(0..eligible.len())];
                b.close_ring(pick);
            } else {
                let atom = b.draw_atom();
                b.write_atom(atom);
            }
        } else if let Some(&n) = b.branches.last() {
            if n == 0 {
                let atom = b.wheel(|c| !is_aromatic(c));
                b.write_atom(atom);
            } else {
                b.close_branch();
            }
        } else {
            break;
        }
    }
    b.out
}
