//! Smallest set of smallest rings.
//!
//! Candidate cycles follow Horton: for every root atom and every cyclic bond
//! `(x, y)`, the cycle formed by the shortest paths root→x, root→y and the
//! bond itself, kept when the two paths share only the root. Candidates are
//! sorted by size and added greedily while linearly independent over GF(2);
//! this yields a minimum cycle basis of size `|bonds| - |atoms| + 1`.

use std::collections::{HashSet, VecDeque};

use super::{build_adjacency, Bond, MoleculeGraph};

/// Ring list of a graph; the same rings the graph stores.
pub fn perceive_rings(graph: &MoleculeGraph) -> Vec<Vec<usize>> {
    sssr(graph.atom_count(), graph.bonds())
}

pub(crate) fn sssr(n: usize, bonds: &[Bond]) -> Vec<Vec<usize>> {
    if n == 0 {
        return Vec::new();
    }
    let adjacency = build_adjacency(n, bonds);
    let components = count_components(&adjacency);
    let target = (bonds.len() + components).saturating_sub(n);
    if target == 0 {
        return Vec::new();
    }
    let cyclic = non_bridge_bonds(&adjacency, bonds.len());
    // adjacency restricted to cyclic bonds, neighbors in index order
    let mut cyc_adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (bi, b) in bonds.iter().enumerate() {
        if cyclic[bi] {
            cyc_adj[b.a].push((b.b, bi));
            cyc_adj[b.b].push((b.a, bi));
        }
    }
    for list in &mut cyc_adj {
        list.sort_unstable();
    }

    let words = bonds.len().div_ceil(64);
    let mut candidates: Vec<Candidate> = Vec::new();
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    for root in 0..n {
        if cyc_adj[root].is_empty() {
            continue;
        }
        let (dist, parent) = bfs(&cyc_adj, root);
        for (bi, b) in bonds.iter().enumerate() {
            if !cyclic[bi] {
                continue;
            }
            let (x, y) = (b.a, b.b);
            if dist[x] == usize::MAX || dist[y] == usize::MAX {
                continue;
            }
            // tree edges do not close a cycle
            if parent[x].map(|p| p.1) == Some(bi) || parent[y].map(|p| p.1) == Some(bi) {
                continue;
            }
            let px = path_to_root(&parent, x);
            let py = path_to_root(&parent, y);
            let sx: HashSet<usize> = px.atoms.iter().copied().collect();
            if py.atoms[..py.atoms.len() - 1].iter().any(|a| sx.contains(a)) {
                continue;
            }
            let mut edges = vec![0u64; words];
            for &e in px.bonds.iter().chain(&py.bonds).chain(std::iter::once(&bi)) {
                edges[e / 64] |= 1 << (e % 64);
            }
            if !seen.insert(edges.clone()) {
                continue;
            }
            // x .. root .. y, closed by the bond (y, x)
            let mut atoms = px.atoms.clone();
            atoms.extend(py.atoms.iter().rev().skip(1));
            let mut sorted = atoms.clone();
            sorted.sort_unstable();
            candidates.push(Candidate {
                atoms: canonical_rotation(atoms),
                sorted,
                edges,
            });
        }
    }
    candidates.sort_by(|a, b| a.sorted.len().cmp(&b.sorted.len()).then_with(|| a.sorted.cmp(&b.sorted)));

    let mut basis: Vec<(usize, Vec<u64>)> = Vec::new();
    let mut rings = Vec::new();
    for cand in candidates {
        let mut v = cand.edges.clone();
        for (pivot, row) in &basis {
            if v[pivot / 64] >> (pivot % 64) & 1 == 1 {
                for (w, r) in v.iter_mut().zip(row) {
                    *w ^= r;
                }
            }
        }
        if let Some(pivot) = lowest_bit(&v) {
            // keep rows reduced on each other's pivots
            for (_, row) in basis.iter_mut() {
                if row[pivot / 64] >> (pivot % 64) & 1 == 1 {
                    for (r, w) in row.iter_mut().zip(&v) {
                        *r ^= w;
                    }
                }
            }
            basis.push((pivot, v));
            rings.push(cand.atoms);
            if rings.len() == target {
                break;
            }
        }
    }
    rings
}

struct Candidate {
    atoms: Vec<usize>,
    sorted: Vec<usize>,
    edges: Vec<u64>,
}

struct RootPath {
    atoms: Vec<usize>,
    bonds: Vec<usize>,
}

fn path_to_root(parent: &[Option<(usize, usize)>], from: usize) -> RootPath {
    let mut atoms = vec![from];
    let mut bonds = Vec::new();
    let mut cur = from;
    while let Some((p, bi)) = parent[cur] {
        atoms.push(p);
        bonds.push(bi);
        cur = p;
    }
    RootPath { atoms, bonds }
}

fn bfs(adj: &[Vec<(usize, usize)>], root: usize) -> (Vec<usize>, Vec<Option<(usize, usize)>>) {
    let n = adj.len();
    let mut dist = vec![usize::MAX; n];
    let mut parent = vec![None; n];
    let mut queue = VecDeque::new();
    dist[root] = 0;
    queue.push_back(root);
    while let Some(u) = queue.pop_front() {
        for &(v, bi) in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                parent[v] = Some((u, bi));
                queue.push_back(v);
            }
        }
    }
    (dist, parent)
}

fn lowest_bit(v: &[u64]) -> Option<usize> {
    v.iter()
        .enumerate()
        .find(|(_, &w)| w != 0)
        .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
}

/// Rotates a cycle to start at its smallest atom, walking towards the smaller
/// of that atom's two cycle neighbors.
fn canonical_rotation(mut cycle: Vec<usize>) -> Vec<usize> {
    let n = cycle.len();
    let (min_pos, _) = cycle
        .iter()
        .enumerate()
        .min_by_key(|&(_, &a)| a)
        .expect("cycle is non-empty");
    cycle.rotate_left(min_pos);
    if n > 2 && cycle[n - 1] < cycle[1] {
        cycle[1..].reverse();
    }
    cycle
}

fn count_components(adj: &[Vec<(usize, usize)>]) -> usize {
    let mut seen = vec![false; adj.len()];
    let mut components = 0;
    for start in 0..adj.len() {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &(v, _) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    components
}

/// Marks bonds that lie on at least one cycle (iterative bridge finding).
pub(crate) fn non_bridge_bonds(adj: &[Vec<(usize, usize)>], nbonds: usize) -> Vec<bool> {
    let n = adj.len();
    let mut cyclic = vec![true; nbonds];
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut time = 0;
    for start in 0..n {
        if disc[start] != usize::MAX {
            continue;
        }
        // (atom, bond used to reach it, next neighbor position)
        let mut stack: Vec<(usize, usize, usize)> = vec![(start, usize::MAX, 0)];
        disc[start] = time;
        low[start] = time;
        time += 1;
        while let Some(&mut (u, via, ref mut pos)) = stack.last_mut() {
            if *pos < adj[u].len() {
                let (v, bi) = adj[u][*pos];
                *pos += 1;
                if bi == via {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = time;
                    low[v] = time;
                    time += 1;
                    stack.push((v, bi, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[u]);
                    if low[u] > disc[p] {
                        cyclic[via] = false;
                    }
                }
            }
        }
    }
    cyclic
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bonds(pairs: &[(usize, usize)]) -> Vec<Bond> {
        pairs
            .iter()
            .map(|&(a, b)| Bond {
                a,
                b,
                order: 1,
                aromatic: false,
            })
            .collect()
    }

    #[test]
    fn hexagon() {
        let b = bonds(&[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)]);
        assert_eq!(sssr(6, &b), vec![vec![0, 1, 2, 3, 4, 5]]);
    }

    #[test]
    fn chain_has_no_rings() {
        let b = bonds(&[(0, 1), (1, 2), (2, 3)]);
        assert!(sssr(4, &b).is_empty());
    }

    #[test]
    fn fused_bicycle_gives_two_six_rings() {
        // naphthalene skeleton
        let b = bonds(&[
            (0, 1),
            (1, 2),
            (2, 3),
            (3, 4),
            (4, 5),
            (5, 6),
            (6, 7),
            (7, 8),
            (8, 3),
            (8, 9),
            (9, 0),
        ]);
        let rings = sssr(10, &b);
        assert_eq!(rings.len(), 2);
        assert!(rings.iter().all(|r| r.len() == 6));
    }

    #[test]
    fn cube_has_five_four_rings() {
        let b = bonds(&[
            (0, 1),
            (1, 2),
            (2, 3),
            (3, 0),
            (4, 5),
            (5, 6),
            (6, 7),
            (7, 4),
            (0, 4),
            (1, 5),
            (2, 6),
            (3, 7),
        ]);
        let rings = sssr(8, &b);
        assert_eq!(rings.len(), 5);
        assert!(rings.iter().all(|r| r.len() == 4));
    }

    #[test]
    fn bridges_are_detected() {
        // two triangles joined by a bridge (2,3)
        let b = bonds(&[(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5), (5, 3)]);
        let adj = build_adjacency(6, &b);
        let cyc = non_bridge_bonds(&adj, b.len());
        assert_eq!(cyc, vec![true, true, true, false, true, true, true]);
        assert_eq!(sssr(6, &b).len(), 2);
    }
}
