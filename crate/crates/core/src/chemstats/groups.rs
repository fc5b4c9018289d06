//! Built-in functional-group patterns.
//!
//! A pattern is a small connected graph whose atoms carry predicates over
//! the host atom (element, aromaticity, hydrogens, neighbors) and whose
//! bonds require a Kekulé order. Matches are counted once per distinct set
//! of host atoms.
//!
//! Nitro groups need a charge-separated or pentavalent nitrogen, neither of
//! which the neutral valence table accepts, so that pattern never matches
//! a parsed molecule; it is kept so the table stays complete.

use std::collections::{BTreeMap, HashSet};

use crate::molparse::{Element, MoleculeGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BondKind {
    Single,
    Double,
    Triple,
}

type AtomTest = fn(&MoleculeGraph, usize) -> bool;

struct Pattern {
    name: &'static str,
    atoms: &'static [AtomTest],
    /// `(earlier, later, kind)`; every atom after the first is bonded to an
    /// earlier one
    bonds: &'static [(usize, usize, BondKind)],
}

fn el(g: &MoleculeGraph, i: usize) -> Element {
    g.atoms()[i].element
}

fn aliphatic(g: &MoleculeGraph, i: usize) -> bool {
    !g.atoms()[i].aromatic
}

fn double_to(g: &MoleculeGraph, i: usize, e: Element) -> usize {
    g.neighbors(i)
        .iter()
        .filter(|&&(v, bi)| {
            let b = &g.bonds()[bi];
            !b.aromatic && b.order == 2 && el(g, v) == e
        })
        .count()
}

fn single_neighbors(g: &MoleculeGraph, i: usize, e: Element) -> usize {
    g.neighbors(i)
        .iter()
        .filter(|&&(v, bi)| {
            let b = &g.bonds()[bi];
            (b.aromatic || b.order == 1) && el(g, v) == e
        })
        .count()
}

fn is_carbonyl_c(g: &MoleculeGraph, i: usize) -> bool {
    el(g, i) == Element::C && (double_to(g, i, Element::O) > 0 || double_to(g, i, Element::S) > 0)
}

fn near_carbonyl(g: &MoleculeGraph, i: usize) -> bool {
    g.neighbors(i).iter().any(|&(v, _)| is_carbonyl_c(g, v))
}

fn any_c(g: &MoleculeGraph, i: usize) -> bool {
    el(g, i) == Element::C
}

fn plain_c(g: &MoleculeGraph, i: usize) -> bool {
    any_c(g, i) && !is_carbonyl_c(g, i) && double_to(g, i, Element::N) == 0
}

fn o_atom(g: &MoleculeGraph, i: usize) -> bool {
    el(g, i) == Element::O && aliphatic(g, i)
}

fn oh(g: &MoleculeGraph, i: usize) -> bool {
    o_atom(g, i) && g.atoms()[i].hydrogens == 1
}

fn o_bridge(g: &MoleculeGraph, i: usize) -> bool {
    o_atom(g, i) && g.atoms()[i].hydrogens == 0 && g.degree(i) == 2
}

fn n_atom(g: &MoleculeGraph, i: usize) -> bool {
    el(g, i) == Element::N && aliphatic(g, i)
}

fn s_atom(g: &MoleculeGraph, i: usize) -> bool {
    el(g, i) == Element::S && aliphatic(g, i)
}

fn halogen(g: &MoleculeGraph, i: usize) -> bool {
    el(g, i).is_halogen()
}

// carbonyl carbons classified by their single-bonded heteroatoms
fn acid_like_c(g: &MoleculeGraph, i: usize) -> bool {
    el(g, i) == Element::C
        && aliphatic(g, i)
        && double_to(g, i, Element::O) == 1
        && single_neighbors(g, i, Element::O) == 1
        && single_neighbors(g, i, Element::N) == 0
}

fn amide_c(g: &MoleculeGraph, i: usize) -> bool {
    el(g, i) == Element::C
        && aliphatic(g, i)
        && double_to(g, i, Element::O) == 1
        && single_neighbors(g, i, Element::N) == 1
        && single_neighbors(g, i, Element::O) == 0
}

fn ketone_c(g: &MoleculeGraph, i: usize) -> bool {
    el(g, i) == Element::C
        && double_to(g, i, Element::O) == 1
        && g.atoms()[i].hydrogens == 0
        && g.neighbors(i).iter().filter(|&&(v, _)| el(g, v) == Element::C).count() == 2
}

fn aldehyde_c(g: &MoleculeGraph, i: usize) -> bool {
    el(g, i) == Element::C
        && aliphatic(g, i)
        && double_to(g, i, Element::O) == 1
        && g.atoms()[i].hydrogens == 1
        && g.degree(i) == 2
        && g.neighbors(i).iter().all(|&(v, _)| el(g, v) == Element::C || el(g, v) == Element::O)
}

fn urea_c(g: &MoleculeGraph, i: usize) -> bool {
    el(g, i) == Element::C && aliphatic(g, i) && double_to(g, i, Element::O) == 1 && single_neighbors(g, i, Element::N) == 2
}

fn carbamate_c(g: &MoleculeGraph, i: usize) -> bool {
    el(g, i) == Element::C
        && aliphatic(g, i)
        && double_to(g, i, Element::O) == 1
        && single_neighbors(g, i, Element::N) == 1
        && single_neighbors(g, i, Element::O) == 1
}

fn amine_n(g: &MoleculeGraph, i: usize, h: u8) -> bool {
    n_atom(g, i)
        && g.atoms()[i].hydrogens == h
        && g.degree(i) + h as usize == 3
        && g.neighbors(i).iter().all(|&(v, bi)| {
            let b = &g.bonds()[bi];
            b.order == 1 && !b.aromatic && plain_c(g, v)
        })
        && !g.neighbors(i).iter().any(|&(v, _)| g.neighbors(v).iter().any(|&(w, _)| el(g, w) == Element::S && double_to(g, w, Element::O) > 0))
}

fn primary_n(g: &MoleculeGraph, i: usize) -> bool {
    amine_n(g, i, 2)
}

fn secondary_n(g: &MoleculeGraph, i: usize) -> bool {
    amine_n(g, i, 1)
}

fn tertiary_n(g: &MoleculeGraph, i: usize) -> bool {
    amine_n(g, i, 0)
}

fn o_dbl(g: &MoleculeGraph, i: usize) -> bool {
    el(g, i) == Element::O
}

fn n_any(g: &MoleculeGraph, i: usize) -> bool {
    el(g, i) == Element::N
}

fn ether_o(g: &MoleculeGraph, i: usize) -> bool {
    o_bridge(g, i) && !near_carbonyl(g, i)
}

fn hydroxyl_o(g: &MoleculeGraph, i: usize) -> bool {
    oh(g, i) && !near_carbonyl(g, i)
}

fn sulfonyl_s(g: &MoleculeGraph, i: usize) -> bool {
    s_atom(g, i) && double_to(g, i, Element::O) == 2
}

fn sulfone_s(g: &MoleculeGraph, i: usize) -> bool {
    sulfonyl_s(g, i) && g.degree(i) == 4 && g.neighbors(i).iter().filter(|&&(v, _)| el(g, v) == Element::C).count() == 2
}

use BondKind::{Double, Single, Triple};

const PATTERNS: &[Pattern] = &[
    Pattern { name: "carboxylic_acid", atoms: &[acid_like_c, o_dbl, oh], bonds: &[(0, 1, Double), (0, 2, Single)] },
    Pattern { name: "ester", atoms: &[acid_like_c, o_dbl, o_bridge, any_c], bonds: &[(0, 1, Double), (0, 2, Single), (2, 3, Single)] },
    Pattern { name: "amide", atoms: &[amide_c, o_dbl, n_any], bonds: &[(0, 1, Double), (0, 2, Single)] },
    Pattern { name: "ketone", atoms: &[ketone_c, o_dbl], bonds: &[(0, 1, Double)] },
    Pattern { name: "aldehyde", atoms: &[aldehyde_c, o_dbl], bonds: &[(0, 1, Double)] },
    Pattern { name: "ether", atoms: &[ether_o, any_c, any_c], bonds: &[(0, 1, Single), (0, 2, Single)] },
    Pattern { name: "hydroxyl", atoms: &[hydroxyl_o, any_c], bonds: &[(0, 1, Single)] },
    Pattern { name: "primary_amine", atoms: &[primary_n, any_c], bonds: &[(0, 1, Single)] },
    Pattern { name: "secondary_amine", atoms: &[secondary_n], bonds: &[] },
    Pattern { name: "tertiary_amine", atoms: &[tertiary_n], bonds: &[] },
    Pattern { name: "nitrile", atoms: &[any_c, n_atom], bonds: &[(0, 1, Triple)] },
    Pattern { name: "nitro", atoms: &[n_atom, o_dbl, o_atom], bonds: &[(0, 1, Double), (0, 2, Single)] },
    Pattern { name: "sulfonamide", atoms: &[sulfonyl_s, o_dbl, o_dbl, n_any], bonds: &[(0, 1, Double), (0, 2, Double), (0, 3, Single)] },
    Pattern { name: "sulfone", atoms: &[sulfone_s, o_dbl, o_dbl], bonds: &[(0, 1, Double), (0, 2, Double)] },
    Pattern { name: "urea", atoms: &[urea_c, o_dbl, n_any, n_any], bonds: &[(0, 1, Double), (0, 2, Single), (0, 3, Single)] },
    Pattern { name: "carbamate", atoms: &[carbamate_c, o_dbl, n_any, o_bridge], bonds: &[(0, 1, Double), (0, 2, Single), (0, 3, Single)] },
    Pattern { name: "halogen_on_carbon", atoms: &[halogen, any_c], bonds: &[(0, 1, Single)] },
];

/// Names of every reported group, in report order.
pub fn group_names() -> Vec<&'static str> {
    PATTERNS.iter().map(|p| p.name).chain(["aromatic_n_heterocycle"]).collect()
}

fn bond_ok(g: &MoleculeGraph, a: usize, b: usize, kind: BondKind) -> bool {
    g.bond_between(a, b).is_some_and(|bond| {
        let order = bond.order;
        match kind {
            Single => order == 1,
            Double => !bond.aromatic && order == 2,
            Triple => order == 3,
        }
    })
}

fn extend(g: &MoleculeGraph, p: &Pattern, mapped: &mut Vec<usize>, found: &mut HashSet<Vec<usize>>) {
    let k = mapped.len();
    if k == p.atoms.len() {
        let mut key = mapped.clone();
        key.sort_unstable();
        found.insert(key);
        return;
    }
    let &(parent, _, _) = p
        .bonds
        .iter()
        .find(|&&(_, later, _)| later == k)
        .expect("pattern atoms are connected in order");
    for &(cand, _) in g.neighbors(mapped[parent]) {
        if mapped.contains(&cand) || !(p.atoms[k])(g, cand) {
            continue;
        }
        let consistent = p
            .bonds
            .iter()
            .filter(|&&(_, later, _)| later == k)
            .all(|&(earlier, _, kind)| bond_ok(g, mapped[earlier], cand, kind));
        if consistent {
            mapped.push(cand);
            extend(g, p, mapped, found);
            mapped.pop();
        }
    }
}

fn count_pattern(g: &MoleculeGraph, p: &Pattern) -> usize {
    let mut found = HashSet::new();
    for root in 0..g.atom_count() {
        if (p.atoms[0])(g, root) {
            let mut mapped = vec![root];
            extend(g, p, &mut mapped, &mut found);
        }
    }
    found.len()
}

fn aromatic_n_rings(g: &MoleculeGraph) -> usize {
    g.rings()
        .iter()
        .filter(|r| r.iter().all(|&a| g.atoms()[a].aromatic) && r.iter().any(|&a| el(g, a) == Element::N))
        .count()
}

/// Match counts for every group in [`group_names`] order.
pub fn functional_groups(g: &MoleculeGraph) -> BTreeMap<&'static str, usize> {
    let mut out: BTreeMap<&'static str, usize> = PATTERNS.iter().map(|p| (p.name, count_pattern(g, p))).collect();
    out.insert("aromatic_n_heterocycle", aromatic_n_rings(g));
    out
}
