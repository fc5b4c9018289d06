//! Validation of generated SMILES: a one-pass textual prefilter followed by a
//! structural parse into a [`MoleculeGraph`] with ring perception,
//! kekulization and valence checks. Canonical strings and scaffolds built on
//! top of the graph drive deduplication and novelty statistics.

mod canon;
mod kekule;
mod parser;
mod prefilter;
mod rings;
mod scaffold;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use canon::{canonical_form, canonical_ranks, write_smiles};
pub use kekule::{check_aromaticity, maximum_matching};
pub use parser::{parse, parse_str};
pub use prefilter::{syntactic_prefilter, PrefilterFailure};
pub use rings::perceive_rings;
pub use scaffold::scaffold;

/// Elements of the organic subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Element {
    H,
    C,
    N,
    O,
    S,
    P,
    F,
    Cl,
    Br,
    I,
}

impl Element {
    pub const ALL: [Element; 10] = [
        Element::H,
        Element::C,
        Element::N,
        Element::O,
        Element::S,
        Element::P,
        Element::F,
        Element::Cl,
        Element::Br,
        Element::I,
    ];

    /// Allowed total valences of the neutral atom, ascending.
    pub fn valences(self) -> &'static [u8] {
        match self {
            Element::C => &[4],
            Element::N => &[3],
            Element::O => &[2],
            Element::S => &[2, 4, 6],
            Element::P => &[3, 5],
            Element::H | Element::F | Element::Cl | Element::Br | Element::I => &[1],
        }
    }

    /// Standard atomic weight in daltons.
    pub fn atomic_weight(self) -> f64 {
        match self {
            Element::H => 1.008,
            Element::C => 12.011,
            Element::N => 14.007,
            Element::O => 15.999,
            Element::S => 32.06,
            Element::P => 30.974,
            Element::F => 18.998,
            Element::Cl => 35.45,
            Element::Br => 79.904,
            Element::I => 126.904,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Element::H => "H",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::S => "S",
            Element::P => "P",
            Element::F => "F",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
        }
    }

    pub fn is_halogen(self) -> bool {
        matches!(self, Element::F | Element::Cl | Element::Br | Element::I)
    }

    /// Smallest allowed valence that accommodates `bond_sum`.
    pub fn default_valence(self, bond_sum: u8) -> Option<u8> {
        self.valences().iter().copied().find(|&v| v >= bond_sum)
    }
}

/// Immutable element → allowed valence lookup.
pub struct ValenceTable;

impl ValenceTable {
    pub const ELEMENTS: [Element; 10] = [
        Element::H,
        Element::C,
        Element::N,
        Element::O,
        Element::S,
        Element::P,
        Element::F,
        Element::Cl,
        Element::Br,
        Element::I,
    ];

    pub fn allowed(element: Element) -> &'static [u8] {
        element.valences()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    pub aromatic: bool,
    pub hydrogens: u8,
}

impl Atom {
    /// Symbol in the normalized alphabet.
    pub fn normalized_symbol(&self) -> char {
        match (self.element, self.aromatic) {
            (Element::N, true) if self.hydrogens == 1 => 'A',
            (Element::C, true) => 'c',
            (Element::N, true) => 'n',
            (Element::O, true) => 'o',
            (Element::S, true) => 's',
            (Element::P, true) => 'p',
            (Element::Cl, _) => 'L',
            (Element::Br, _) => 'R',
            (e, _) => e.symbol().chars().next().unwrap_or('C'),
        }
    }
}

/// A bond with its Kekulé order; `aromatic` marks membership in an aromatic
/// system regardless of the concrete order assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: u8,
    pub aromatic: bool,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }

    /// Label used by graph invariants: aromatic bonds compare equal whatever
    /// their Kekulé order.
    pub fn label(&self) -> u8 {
        if self.aromatic {
            4
        } else {
            self.order
        }
    }
}

/// A validated molecule: a connected simple graph with hydrogens assigned
/// and rings perceived.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MoleculeGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    rings: Vec<Vec<usize>>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl MoleculeGraph {
    /// Assembles a graph from parts; rings are perceived here.
    pub(crate) fn assemble(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Self {
        let adjacency = build_adjacency(atoms.len(), &bonds);
        let rings = rings::sssr(atoms.len(), &bonds);
        MoleculeGraph {
            atoms,
            bonds,
            rings,
            adjacency,
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    /// Smallest set of smallest rings, each as an ordered atom cycle.
    pub fn rings(&self) -> &[Vec<usize>] {
        &self.rings
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// `(neighbor, bond index)` pairs of an atom.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency[a]
            .iter()
            .find(|&&(n, _)| n == b)
            .map(|&(_, bi)| &self.bonds[bi])
    }

    /// Sum of Kekulé bond orders at an atom, hydrogens excluded.
    pub fn bond_order_sum(&self, atom: usize) -> u8 {
        self.adjacency[atom]
            .iter()
            .map(|&(_, bi)| self.bonds[bi].order)
            .sum()
    }

    pub fn ring_membership(&self) -> Vec<bool> {
        let mut member = vec![false; self.atoms.len()];
        for ring in &self.rings {
            for &a in ring {
                member[a] = true;
            }
        }
        member
    }

    pub fn is_connected(&self) -> bool {
        if self.atoms.is_empty() {
            return false;
        }
        let mut seen = vec![false; self.atoms.len()];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &(v, _) in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == self.atoms.len()
    }

    /// Sum of atomic weights including implicit hydrogens.
    /// Element counts are summed first, so the result does not depend on
    /// atom order.
    pub fn molecular_weight(&self) -> f64 {
        let mut counts = [0u64; 10];
        for a in &self.atoms {
            counts[a.element as usize] += 1;
            counts[Element::H as usize] += u64::from(a.hydrogens);
        }
        Element::ALL
            .iter()
            .map(|&e| counts[e as usize] as f64 * e.atomic_weight())
            .sum()
    }

    /// Induced subgraph on `keep` (in ascending order), with hydrogens
    /// recomputed from the default valence of each atom's remaining bonds.
    pub(crate) fn induced_subgraph(&self, keep: &[usize]) -> MoleculeGraph {
        let mut remap = vec![usize::MAX; self.atoms.len()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let bonds: Vec<Bond> = self
            .bonds
            .iter()
            .filter(|b| remap[b.a] != usize::MAX && remap[b.b] != usize::MAX)
            .map(|b| Bond {
                a: remap[b.a],
                b: remap[b.b],
                ..*b
            })
            .collect();
        let mut atoms: Vec<Atom> = keep.iter().map(|&i| self.atoms[i]).collect();
        let mut sums = vec![0u8; atoms.len()];
        for b in &bonds {
            sums[b.a] += b.order;
            sums[b.b] += b.order;
        }
        for (atom, &sum) in atoms.iter_mut().zip(&sums) {
            let valence = atom.element.default_valence(sum).unwrap_or(sum);
            atom.hydrogens = valence - sum;
        }
        MoleculeGraph::assemble(atoms, bonds)
    }
}

pub(crate) fn build_adjacency(n: usize, bonds: &[Bond]) -> Vec<Vec<(usize, usize)>> {
    let mut adjacency = vec![Vec::new(); n];
    for (i, b) in bonds.iter().enumerate() {
        adjacency[b.a].push((b.b, i));
        adjacency[b.b].push((b.a, i));
    }
    adjacency
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParseErrorKind {
    SyntaxError,
    ValenceError,
    AromaticityError,
    KekulizationError,
    DisconnectedError,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// The first problem found while parsing. `position` is a character offset
/// for syntax errors and an atom index otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at {position}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub position: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(kind: ParseErrorKind, position: usize, message: impl Into<String>) -> Self {
        ParseError {
            kind,
            position,
            message: message.into(),
        }
    }
}

/// Verifies that every atom's bond order sum plus hydrogens is an allowed
/// valence for its element.
pub fn check_valence(graph: &MoleculeGraph) -> Result<(), ParseError> {
    for (i, atom) in graph.atoms.iter().enumerate() {
        let total = graph.bond_order_sum(i) + atom.hydrogens;
        if !atom.element.valences().contains(&total) {
            return Err(ParseError::new(
                ParseErrorKind::ValenceError,
                i,
                format!("{} with total valence {}", atom.element.symbol(), total),
            ));
        }
    }
    Ok(())
}
