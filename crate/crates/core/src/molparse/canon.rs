//! Canonical atom ranking and SMILES emission.
//!
//! Ranks start from `(element, aromatic, degree, hydrogens)` and are refined
//! with neighbor ranks and bond labels until stable; remaining ties are
//! broken at the lowest-index atom of the lowest tied class and refinement
//! resumes. The string is written by a depth-first walk from rank 0 that
//! visits neighbors in rank order.

use super::MoleculeGraph;

/// Canonical string in the normalized alphabet.
pub fn canonical_form(graph: &MoleculeGraph) -> String {
    let ranks = canonical_ranks(graph);
    write_smiles(graph, &ranks)
}

/// A permutation of `0..n` that depends only on the graph up to isomorphism.
pub fn canonical_ranks(graph: &MoleculeGraph) -> Vec<usize> {
    let n = graph.atom_count();
    if n == 0 {
        return Vec::new();
    }
    let initial: Vec<(u8, bool, usize, u8)> = graph
        .atoms()
        .iter()
        .enumerate()
        .map(|(i, a)| (a.element as u8, a.aromatic, graph.degree(i), a.hydrogens))
        .collect();
    let mut ranks = dense_ranks(&initial);
    refine(graph, &mut ranks);
    while distinct(&ranks) < n {
        let tied = lowest_tied_rank(&ranks);
        let chosen = (0..n).find(|&i| ranks[i] == tied).expect("tied class is non-empty");
        let keys: Vec<(usize, bool)> = (0..n).map(|i| (ranks[i], i != chosen)).collect();
        ranks = dense_ranks(&keys);
        refine(graph, &mut ranks);
    }
    ranks
}

fn refine(graph: &MoleculeGraph, ranks: &mut Vec<usize>) {
    let mut classes = distinct(ranks);
    loop {
        let keys: Vec<(usize, Vec<(usize, u8)>)> = (0..graph.atom_count())
            .map(|i| {
                let mut env: Vec<(usize, u8)> = graph
                    .neighbors(i)
                    .iter()
                    .map(|&(v, bi)| (ranks[v], graph.bonds()[bi].label()))
                    .collect();
                env.sort_unstable();
                (ranks[i], env)
            })
            .collect();
        let next = dense_ranks(&keys);
        let next_classes = distinct(&next);
        *ranks = next;
        if next_classes == classes {
            break;
        }
        classes = next_classes;
    }
}

fn dense_ranks<K: Ord + Clone>(keys: &[K]) -> Vec<usize> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).expect("key present"))
        .collect()
}

fn distinct(ranks: &[usize]) -> usize {
    let mut seen = vec![false; ranks.len()];
    ranks.iter().filter(|&&r| !std::mem::replace(&mut seen[r], true)).count()
}

fn lowest_tied_rank(ranks: &[usize]) -> usize {
    let mut count = vec![0usize; ranks.len()];
    for &r in ranks {
        count[r] += 1;
    }
    count.iter().position(|&c| c > 1).expect("some rank is tied")
}

struct Walk {
    children: Vec<Vec<(usize, usize)>>,
    // ring bonds per atom: (bond, partner, is_opening)
    ring_bonds: Vec<Vec<(usize, usize, bool)>>,
}

/// Writes the graph as SMILES, starting at the lowest-ranked atom and
/// visiting neighbors in rank order. Any permutation gives a valid spelling.
pub fn write_smiles(graph: &MoleculeGraph, ranks: &[usize]) -> String {
    let n = graph.atom_count();
    if n == 0 {
        return String::new();
    }
    let start = (0..n).min_by_key(|&i| ranks[i]).expect("non-empty");
    let mut walk = Walk {
        children: vec![Vec::new(); n],
        ring_bonds: vec![Vec::new(); n],
    };
    let mut visited = vec![false; n];
    let mut bond_seen = vec![false; graph.bonds().len()];
    discover(graph, ranks, start, usize::MAX, &mut visited, &mut bond_seen, &mut walk);
    for list in &mut walk.ring_bonds {
        // closings first, then openings by partner rank
        list.sort_by_key(|&(_, partner, opening)| (opening, ranks[partner]));
    }
    let mut out = String::new();
    let mut digit_of = vec![0u32; graph.bonds().len()];
    let mut in_use: Vec<bool> = vec![false; 100];
    write_atom(graph, start, &walk, &mut digit_of, &mut in_use, &mut out);
    out
}

fn discover(
    graph: &MoleculeGraph,
    ranks: &[usize],
    u: usize,
    via: usize,
    visited: &mut [bool],
    bond_seen: &mut [bool],
    walk: &mut Walk,
) {
    visited[u] = true;
    let mut nbrs: Vec<(usize, usize)> = graph.neighbors(u).to_vec();
    nbrs.sort_by_key(|&(v, _)| ranks[v]);
    for (v, bi) in nbrs {
        if bi == via || bond_seen[bi] {
            continue;
        }
        bond_seen[bi] = true;
        if visited[v] {
            // v is an ancestor: the ring opens there and closes here
            walk.ring_bonds[v].push((bi, u, true));
            walk.ring_bonds[u].push((bi, v, false));
        } else {
            walk.children[u].push((v, bi));
            discover(graph, ranks, v, bi, visited, bond_seen, walk);
        }
    }
}

fn bond_symbol(graph: &MoleculeGraph, bi: usize) -> &'static str {
    let b = &graph.bonds()[bi];
    if b.aromatic {
        return "";
    }
    match b.order {
        2 => "=",
        3 => "#",
        _ => "",
    }
}

fn write_label(label: u32, out: &mut String) {
    if label < 10 {
        out.push(char::from_digit(label, 10).expect("single digit"));
    } else {
        out.push('%');
        out.push_str(&format!("{label:02}"));
    }
}

fn write_atom(
    graph: &MoleculeGraph,
    u: usize,
    walk: &Walk,
    digit_of: &mut [u32],
    in_use: &mut [bool],
    out: &mut String,
) {
    out.push(graph.atoms()[u].normalized_symbol());
    let mut released = Vec::new();
    for &(bi, _, opening) in &walk.ring_bonds[u] {
        if opening {
            let label = (1..in_use.len()).find(|&l| !in_use[l]).expect("fewer than 100 open rings") as u32;
            in_use[label as usize] = true;
            digit_of[bi] = label;
            out.push_str(bond_symbol(graph, bi));
            write_label(label, out);
        } else {
            write_label(digit_of[bi], out);
            released.push(digit_of[bi]);
        }
    }
    for label in released {
        in_use[label as usize] = false;
    }
    let children = &walk.children[u];
    for (k, &(v, bi)) in children.iter().enumerate() {
        let last = k + 1 == children.len();
        if !last {
            out.push('(');
        }
        out.push_str(bond_symbol(graph, bi));
        write_atom(graph, v, walk, digit_of, in_use, out);
        if !last {
            out.push(')');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_str;
    use super::*;

    fn canon(s: &str) -> String {
        canonical_form(&parse_str(s).unwrap())
    }

    #[test]
    fn same_molecule_different_spellings() {
        assert_eq!(canon("OCC"), canon("CCO"));
        assert_eq!(canon("c1ccccc1"), canon("c1ccccc1"));
        assert_eq!(canon("Cc1ccccc1"), canon("c1ccc(C)cc1"));
        assert_eq!(canon("OC(=O)c1ccccc1"), canon("c1ccccc1C(O)=O"));
        assert_eq!(canon("c1ccc2ccccc2c1"), canon("c1cc2ccccc2cc1"));
    }

    #[test]
    fn different_molecules_differ() {
        assert_ne!(canon("CCO"), canon("CCN"));
        assert_ne!(canon("C=CC"), canon("CCC"));
        assert_ne!(canon("Cc1ccccc1C"), canon("Cc1cccc(C)c1"));
    }

    #[test]
    fn canonical_string_reparses_to_itself() {
        for s in [
            "CC(=O)Nc1ccc(O)cc1",
            "c1ccc2c(c1)Ac1ccccc12",
            "C1CCC2(CC1)CCCC2",
            "O=C1CCCN1C1CC2CCC1C2",
            "c1ccccc1c1ccccc1",
            "C12C3C4C1C5C2C3C45",
        ] {
            let c = canon(s);
            assert_eq!(canon(&c), c, "{s} -> {c}");
        }
    }

    #[test]
    fn ranks_are_a_permutation() {
        let g = parse_str("CC(C)(C)c1ccccc1").unwrap();
        let mut r = canonical_ranks(&g);
        r.sort_unstable();
        assert_eq!(r, (0..g.atom_count()).collect::<Vec<_>>());
    }
}
