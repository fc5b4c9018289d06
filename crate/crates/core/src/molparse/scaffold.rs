use std::collections::VecDeque;

use super::{canonical_form, MoleculeGraph};

/// Ring systems plus the linkers between them, or the longest chain of an
/// acyclic molecule.
///
/// Terminal non-ring atoms are stripped until none remain, except atoms
/// held by a double or triple bond to an aromatic atom: dropping those
/// would leave an aromatic system that can no longer be kekulized.
pub fn scaffold(graph: &MoleculeGraph) -> MoleculeGraph {
    if graph.rings().is_empty() {
        return longest_chain(graph);
    }
    let n = graph.atom_count();
    let in_ring = graph.ring_membership();
    let mut alive = vec![true; n];
    let mut degree: Vec<usize> = (0..n).map(|i| graph.degree(i)).collect();
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| degree[i] <= 1 && !in_ring[i]).collect();
    while let Some(u) = queue.pop_front() {
        if !alive[u] || degree[u] > 1 || in_ring[u] {
            continue;
        }
        let live: Vec<(usize, usize)> = graph
            .neighbors(u)
            .iter()
            .copied()
            .filter(|&(v, _)| alive[v])
            .collect();
        if let Some(&(v, bi)) = live.first() {
            if graph.bonds()[bi].order >= 2 && graph.atoms()[v].aromatic {
                continue;
            }
        }
        alive[u] = false;
        for (v, _) in live {
            degree[v] -= 1;
            if degree[v] <= 1 && !in_ring[v] {
                queue.push_back(v);
            }
        }
    }
    let keep: Vec<usize> = (0..n).filter(|&i| alive[i]).collect();
    graph.induced_subgraph(&keep)
}

/// Longest simple path in an acyclic graph; ties go to the path whose
/// canonical string sorts first.
fn longest_chain(graph: &MoleculeGraph) -> MoleculeGraph {
    let n = graph.atom_count();
    if n <= 2 {
        return graph.induced_subgraph(&(0..n).collect::<Vec<_>>());
    }
    let leaves: Vec<usize> = (0..n).filter(|&i| graph.degree(i) <= 1).collect();
    let mut best_len = 0;
    let mut paths: Vec<Vec<usize>> = Vec::new();
    for &s in &leaves {
        let (dist, parent) = bfs_tree(graph, s);
        for &t in &leaves {
            if t <= s {
                continue;
            }
            let d = dist[t];
            if d > best_len {
                best_len = d;
                paths.clear();
            }
            if d == best_len {
                let mut path = vec![t];
                let mut cur = t;
                while let Some(p) = parent[cur] {
                    path.push(p);
                    cur = p;
                }
                paths.push(path);
            }
        }
    }
    paths
        .into_iter()
        .map(|mut p| {
            p.sort_unstable();
            let sub = graph.induced_subgraph(&p);
            (canonical_form(&sub), sub)
        })
        .min_by(|a, b| a.0.cmp(&b.0))
        .map(|(_, g)| g)
        .expect("acyclic graph with three or more atoms has two leaves")
}

fn bfs_tree(graph: &MoleculeGraph, root: usize) -> (Vec<usize>, Vec<Option<usize>>) {
    let n = graph.atom_count();
    let mut dist = vec![usize::MAX; n];
    let mut parent = vec![None; n];
    dist[root] = 0;
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        for &(v, _) in graph.neighbors(u) {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                parent[v] = Some(u);
                queue.push_back(v);
            }
        }
    }
    (dist, parent)
}
