//! Aromatic system checks and Kekulé assignment.
//!
//! Aromatic atoms that still need a π bond (carbon without an exocyclic
//! multiple bond, pyridine-type nitrogen or phosphorus) must be perfectly
//! matched along aromatic bonds. Lone-pair donors (`A`, `o`, `s`, and three
//! connected `n`/`p`) take no part in the matching.

use std::collections::VecDeque;

use super::{Element, MoleculeGraph, ParseError, ParseErrorKind};

/// Checks aromatic ring membership and assigns concrete orders to aromatic
/// bonds. Aromatic bond orders in the input are ignored.
pub fn check_aromaticity(graph: &MoleculeGraph) -> Result<MoleculeGraph, ParseError> {
    let n = graph.atom_count();
    let mut in_aromatic_ring = vec![false; n];
    for ring in graph.rings() {
        if ring.iter().all(|&a| graph.atoms[a].aromatic) {
            for &a in ring {
                in_aromatic_ring[a] = true;
            }
        }
    }
    if let Some(bad) = (0..n).find(|&a| graph.atoms[a].aromatic && !in_aromatic_ring[a]) {
        return Err(ParseError::new(
            ParseErrorKind::AromaticityError,
            bad,
            "aromatic atom outside an aromatic ring",
        ));
    }

    let needs: Vec<bool> = (0..n).map(|a| needs_pi_bond(graph, a)).collect();
    let mut edges = Vec::new();
    for (bi, b) in graph.bonds.iter().enumerate() {
        if b.aromatic && needs[b.a] && needs[b.b] {
            edges.push((b.a, b.b, bi));
        }
    }
    let pairs: Vec<(usize, usize)> = edges.iter().map(|&(a, b, _)| (a, b)).collect();
    let mate = maximum_matching(n, &pairs);
    if let Some(unmatched) = (0..n).find(|&a| needs[a] && mate[a].is_none()) {
        return Err(ParseError::new(
            ParseErrorKind::KekulizationError,
            unmatched,
            "no alternating double bond assignment",
        ));
    }

    let mut out = graph.clone();
    for b in out.bonds.iter_mut().filter(|b| b.aromatic) {
        b.order = 1;
    }
    for &(a, b, bi) in &edges {
        if mate[a] == Some(b) {
            out.bonds[bi].order = 2;
        }
    }
    Ok(out)
}

fn needs_pi_bond(graph: &MoleculeGraph, atom: usize) -> bool {
    let at = &graph.atoms[atom];
    if !at.aromatic {
        return false;
    }
    let mut sigma = 0u8;
    let mut has_multiple = false;
    for &(_, bi) in graph.neighbors(atom) {
        let b = &graph.bonds[bi];
        if b.aromatic {
            sigma += 1;
        } else {
            sigma += b.order;
            has_multiple |= b.order >= 2;
        }
    }
    match at.element {
        Element::C => !has_multiple && sigma <= 3,
        Element::N | Element::P => !has_multiple && at.hydrogens == 0 && sigma == 2,
        _ => false,
    }
}

/// Maximum cardinality matching in a general graph (Edmonds' blossom
/// algorithm). Returns each vertex's mate.
pub fn maximum_matching(n: usize, edges: &[(usize, usize)]) -> Vec<Option<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        if a != b {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let mut m = Blossom {
        adj,
        mate: vec![None; n],
        parent: vec![None; n],
        base: (0..n).collect(),
        used: vec![false; n],
        blossom: vec![false; n],
        queue: VecDeque::new(),
    };
    for v in 0..n {
        if m.mate[v].is_none() {
            if let Some(end) = m.find_path(v) {
                m.augment(end);
            }
        }
    }
    m.mate
}

struct Blossom {
    adj: Vec<Vec<usize>>,
    mate: Vec<Option<usize>>,
    parent: Vec<Option<usize>>,
    base: Vec<usize>,
    used: Vec<bool>,
    blossom: Vec<bool>,
    queue: VecDeque<usize>,
}

impl Blossom {
    fn lca(&self, mut a: usize, mut b: usize) -> usize {
        let mut seen = vec![false; self.adj.len()];
        loop {
            a = self.base[a];
            seen[a] = true;
            match self.mate[a] {
                None => break,
                Some(m) => match self.parent[m] {
                    Some(p) => a = p,
                    None => break,
                },
            }
        }
        loop {
            b = self.base[b];
            if seen[b] {
                return b;
            }
            b = self.parent[self.mate[b].expect("matched on alternating path")]
                .expect("alternating path has parents");
        }
    }

    fn mark_path(&mut self, mut v: usize, b: usize, mut child: usize) {
        while self.base[v] != b {
            let mv = self.mate[v].expect("inner vertex is matched");
            self.blossom[self.base[v]] = true;
            self.blossom[self.base[mv]] = true;
            self.parent[v] = Some(child);
            child = mv;
            v = self.parent[mv].expect("outer vertex has parent");
        }
    }

    fn find_path(&mut self, root: usize) -> Option<usize> {
        let n = self.adj.len();
        self.used.iter_mut().for_each(|u| *u = false);
        self.parent.iter_mut().for_each(|p| *p = None);
        for (i, b) in self.base.iter_mut().enumerate() {
            *b = i;
        }
        self.used[root] = true;
        self.queue.clear();
        self.queue.push_back(root);
        while let Some(v) = self.queue.pop_front() {
            for k in 0..self.adj[v].len() {
                let to = self.adj[v][k];
                if self.base[v] == self.base[to] || self.mate[v] == Some(to) {
                    continue;
                }
                let to_is_outer = to == root
                    || self.mate[to].is_some_and(|m| self.parent[m].is_some());
                if to_is_outer {
                    let cur = self.lca(v, to);
                    self.blossom.iter_mut().for_each(|b| *b = false);
                    self.mark_path(v, cur, to);
                    self.mark_path(to, cur, v);
                    for i in 0..n {
                        if self.blossom[self.base[i]] {
                            self.base[i] = cur;
                            if !self.used[i] {
                                self.used[i] = true;
                                self.queue.push_back(i);
                            }
                        }
                    }
                } else if self.parent[to].is_none() {
                    self.parent[to] = Some(v);
                    match self.mate[to] {
                        None => return Some(to),
                        Some(m) => {
                            self.used[m] = true;
                            self.queue.push_back(m);
                        }
                    }
                }
            }
        }
        None
    }

    fn augment(&mut self, mut u: usize) {
        loop {
            let pv = self.parent[u].expect("augmenting path is connected");
            let ppv = self.mate[pv];
            self.mate[u] = Some(pv);
            self.mate[pv] = Some(u);
            match ppv {
                Some(next) => u = next,
                None => break,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_max(n: usize, edges: &[(usize, usize)]) -> usize {
        fn rec(i: usize, edges: &[(usize, usize)], used: &mut Vec<bool>) -> usize {
            if i == edges.len() {
                return 0;
            }
            let mut best = rec(i + 1, edges, used);
            let (a, b) = edges[i];
            if !used[a] && !used[b] && a != b {
                used[a] = true;
                used[b] = true;
                best = best.max(1 + rec(i + 1, edges, used));
                used[a] = false;
                used[b] = false;
            }
            best
        }
        rec(0, edges, &mut vec![false; n])
    }

    #[test]
    fn odd_cycle_has_no_perfect_matching() {
        let edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)];
        let mate = maximum_matching(5, &edges);
        assert_eq!(mate.iter().filter(|m| m.is_some()).count(), 4);
    }

    #[test]
    fn matches_brute_force_on_random_graphs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let n = rng.gen_range(2..9);
            let mut edges = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    if rng.gen_bool(0.35) {
                        edges.push((a, b));
                    }
                }
            }
            let mate = maximum_matching(n, &edges);
            for (v, m) in mate.iter().enumerate() {
                if let Some(w) = m {
                    assert_eq!(mate[*w], Some(v));
                    assert!(edges.contains(&(v.min(*w), v.max(*w))));
                }
            }
            let size = mate.iter().filter(|m| m.is_some()).count() / 2;
            assert_eq!(size, brute_force_max(n, &edges), "edges {edges:?}");
        }
    }
}
