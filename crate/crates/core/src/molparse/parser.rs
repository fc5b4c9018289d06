use crate::lexicon::NormalizedSmiles;

use super::{
    check_aromaticity, check_valence, Atom, Bond, Element, MoleculeGraph, ParseError,
    ParseErrorKind,
};

/// Full structural parse of a normalized SMILES string.
///
/// Checks run in a fixed order and the first failure is reported:
/// syntax, aromatic ring membership, kekulization, valence.
pub fn parse(s: &NormalizedSmiles) -> Result<MoleculeGraph, ParseError> {
    parse_str(s.as_str())
}

pub fn parse_str(s: &str) -> Result<MoleculeGraph, ParseError> {
    let (atoms, raw_bonds) = build(s)?;
    let mut bonds: Vec<Bond> = raw_bonds
        .iter()
        .map(|rb| Bond {
            a: rb.a,
            b: rb.b,
            order: rb.order.unwrap_or(1),
            aromatic: false,
        })
        .collect();
    let mut graph = MoleculeGraph::assemble(atoms, std::mem::take(&mut bonds));
    if !graph.is_connected() {
        return Err(ParseError::new(ParseErrorKind::DisconnectedError, 0, "graph is disconnected"));
    }

    // an unwritten bond between aromatic atoms is aromatic when it lies in an
    // all-aromatic ring, otherwise single (biaryl links)
    let mut aromatic_pairs = std::collections::HashSet::new();
    for ring in graph.rings() {
        if ring.iter().all(|&a| graph.atoms[a].aromatic) {
            for k in 0..ring.len() {
                let (x, y) = (ring[k], ring[(k + 1) % ring.len()]);
                aromatic_pairs.insert((x.min(y), x.max(y)));
            }
        }
    }
    for (bond, raw) in graph.bonds.iter_mut().zip(&raw_bonds) {
        if raw.order.is_none() && aromatic_pairs.contains(&(bond.a.min(bond.b), bond.a.max(bond.b))) {
            bond.aromatic = true;
        }
    }

    let mut graph = check_aromaticity(&graph)?;
    assign_hydrogens(&mut graph)?;
    check_valence(&graph)?;
    Ok(graph)
}

struct RawBond {
    a: usize,
    b: usize,
    order: Option<u8>,
}

fn atom_for(c: char) -> Option<Atom> {
    let (element, aromatic, hydrogens) = match c {
        'C' => (Element::C, false, 0),
        'N' => (Element::N, false, 0),
        'O' => (Element::O, false, 0),
        'S' => (Element::S, false, 0),
        'P' => (Element::P, false, 0),
        'F' => (Element::F, false, 0),
        'I' => (Element::I, false, 0),
        'H' => (Element::H, false, 0),
        'L' => (Element::Cl, false, 0),
        'R' => (Element::Br, false, 0),
        'c' => (Element::C, true, 0),
        'n' => (Element::N, true, 0),
        'o' => (Element::O, true, 0),
        's' => (Element::S, true, 0),
        'p' => (Element::P, true, 0),
        // pyrrole-type nitrogen carries exactly one hydrogen
        'A' => (Element::N, true, 1),
        _ => return None,
    };
    Some(Atom {
        element,
        aromatic,
        hydrogens,
    })
}

fn syntax(pos: usize, msg: &str) -> ParseError {
    ParseError::new(ParseErrorKind::SyntaxError, pos, msg)
}

/// Builds atoms and bonds from the token stream with standard SMILES
/// semantics for branches, ring closures and bond symbols.
fn build(s: &str) -> Result<(Vec<Atom>, Vec<RawBond>), ParseError> {
    let chars: Vec<char> = s.chars().collect();
    if chars.is_empty() {
        return Err(syntax(0, "empty string"));
    }
    let mut atoms: Vec<Atom> = Vec::new();
    let mut bonds: Vec<RawBond> = Vec::new();
    let mut prev: Option<usize> = None;
    let mut pending: Option<u8> = None;
    // (atom before the branch, atoms in branch so far)
    let mut branches: Vec<(usize, usize)> = Vec::new();
    // label -> (atom, bond order written at the opening, position)
    let mut open: std::collections::BTreeMap<u32, (usize, Option<u8>, usize)> = Default::default();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = i;
        i += 1;
        if let Some(atom) = atom_for(c) {
            let idx = atoms.len();
            atoms.push(atom);
            if let Some(p) = prev {
                bonds.push(RawBond {
                    a: p,
                    b: idx,
                    order: pending.take(),
                });
            } else if pending.is_some() {
                return Err(syntax(pos, "bond without a preceding atom"));
            }
            if let Some(top) = branches.last_mut() {
                top.1 += 1;
            }
            prev = Some(idx);
            continue;
        }
        match c {
            '=' | '#' => {
                if prev.is_none() {
                    return Err(syntax(pos, "bond without a preceding atom"));
                }
                if pending.is_some() {
                    return Err(syntax(pos, "consecutive bond symbols"));
                }
                pending = Some(if c == '=' { 2 } else { 3 });
            }
            '(' => {
                if branches.last().is_some_and(|b| b.1 == 0) {
                    return Err(syntax(pos, "branch must start with an atom"));
                }
                let p = prev.ok_or_else(|| syntax(pos, "branch without a preceding atom"))?;
                if pending.is_some() {
                    return Err(syntax(pos, "bond symbol before a branch"));
                }
                branches.push((p, 0));
            }
            ')' => {
                if pending.is_some() {
                    return Err(syntax(pos, "bond symbol before ')'"));
                }
                let (p, count) = branches.pop().ok_or_else(|| syntax(pos, "unmatched ')'"))?;
                if count == 0 {
                    return Err(syntax(pos, "empty branch"));
                }
                prev = Some(p);
            }
            '0'..='9' | '%' => {
                let label = if c == '%' {
                    match (chars.get(i), chars.get(i + 1)) {
                        (Some(a), Some(b)) if a.is_ascii_digit() && b.is_ascii_digit() => {
                            i += 2;
                            10 + a.to_digit(10).unwrap_or(0) * 10 + b.to_digit(10).unwrap_or(0)
                        }
                        _ => return Err(syntax(pos, "malformed %nn ring label")),
                    }
                } else {
                    c.to_digit(10).unwrap_or(0)
                };
                if branches.last().is_some_and(|b| b.1 == 0) {
                    return Err(syntax(pos, "branch must start with an atom"));
                }
                let here = prev.ok_or_else(|| syntax(pos, "ring label without a preceding atom"))?;
                let written = pending.take();
                match open.remove(&label) {
                    None => {
                        open.insert(label, (here, written, pos));
                    }
                    Some((other, opened_with, _)) => {
                        if other == here {
                            return Err(syntax(pos, "ring closure to the same atom"));
                        }
                        if bonds
                            .iter()
                            .any(|b| (b.a == other && b.b == here) || (b.a == here && b.b == other))
                        {
                            return Err(syntax(pos, "ring closure duplicates an existing bond"));
                        }
                        let order = match (opened_with, written) {
                            (Some(x), Some(y)) if x != y => {
                                return Err(syntax(pos, "conflicting ring bond orders"))
                            }
                            (x, y) => x.or(y),
                        };
                        bonds.push(RawBond {
                            a: other,
                            b: here,
                            order,
                        });
                    }
                }
            }
            _ => return Err(syntax(pos, "character outside the SMILES alphabet")),
        }
    }
    if pending.is_some() {
        return Err(syntax(chars.len(), "trailing bond symbol"));
    }
    if !branches.is_empty() {
        return Err(syntax(chars.len(), "unclosed branch"));
    }
    if let Some((_, &(_, _, pos))) = open.iter().next() {
        return Err(syntax(pos, "unclosed ring"));
    }
    Ok((atoms, bonds))
}

/// Implicit hydrogens from the smallest allowed valence covering the bond
/// order sum. Pyrrole-type nitrogen keeps its single hydrogen.
fn assign_hydrogens(graph: &mut MoleculeGraph) -> Result<(), ParseError> {
    for i in 0..graph.atom_count() {
        let sum = graph.bond_order_sum(i);
        let atom = &mut graph.atoms[i];
        if atom.element == Element::N && atom.aromatic && atom.hydrogens == 1 {
            continue;
        }
        match atom.element.default_valence(sum) {
            Some(v) => atom.hydrogens = v - sum,
            None => {
                return Err(ParseError::new(
                    ParseErrorKind::ValenceError,
                    i,
                    format!("{} with bond order sum {}", atom.element.symbol(), sum),
                ))
            }
        }
    }
    Ok(())
}
