//! Dinic max-flow over exact capacities.
//!
//! Used as the separation engine for the stroll polytopes, for the
//! aggregated Held-Karp certificate, and (with integer capacities) inside
//! the tree decomposition. Min cuts are reported as the set of vertices
//! reachable from the source in the final residual network, which makes
//! separation output deterministic.

use crate::rat::Rat;
use num_traits::Zero;
use std::collections::VecDeque;

/// Capacity domain for the flow network.
pub trait FlowCap: Clone + PartialOrd {
    fn zero() -> Self;
    fn is_zero(&self) -> bool;
    fn add_assign(&mut self, other: &Self);
    fn sub_assign(&mut self, other: &Self);
    fn min_of(a: &Self, b: &Self) -> Self;
}

impl FlowCap for Rat {
    fn zero() -> Self {
        <Rat as Zero>::zero()
    }
    fn is_zero(&self) -> bool {
        <Rat as Zero>::is_zero(self)
    }
    fn add_assign(&mut self, other: &Self) {
        *self += other;
    }
    fn sub_assign(&mut self, other: &Self) {
        *self -= other;
    }
    fn min_of(a: &Self, b: &Self) -> Self {
        if a <= b {
            a.clone()
        } else {
            b.clone()
        }
    }
}

impl FlowCap for u128 {
    fn zero() -> Self {
        0
    }
    fn is_zero(&self) -> bool {
        *self == 0
    }
    fn add_assign(&mut self, other: &Self) {
        *self += other;
    }
    fn sub_assign(&mut self, other: &Self) {
        *self -= other;
    }
    fn min_of(a: &Self, b: &Self) -> Self {
        *a.min(b)
    }
}

struct Arc<C> {
    to: usize,
    cap: C,
}

/// Flow network with explicit residual arcs.
pub struct FlowNetwork<C> {
    n: usize,
    arcs: Vec<Arc<C>>,
    adj: Vec<Vec<usize>>,
}

impl<C: FlowCap> FlowNetwork<C> {
    pub fn new(n: usize) -> Self {
        FlowNetwork { n, arcs: Vec::new(), adj: vec![Vec::new(); n] }
    }

    /// Adds a directed arc with the given capacity (reverse residual arc
    /// starts at zero).
    pub fn add_arc(&mut self, from: usize, to: usize, cap: C) {
        let id = self.arcs.len();
        self.arcs.push(Arc { to, cap });
        self.arcs.push(Arc { to: from, cap: C::zero() });
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
    }

    /// Adds an undirected edge of the given capacity: one arc per direction,
    /// each serving as the other's residual.
    pub fn add_undirected(&mut self, u: usize, v: usize, cap: C) {
        let id = self.arcs.len();
        self.arcs.push(Arc { to: v, cap: cap.clone() });
        self.arcs.push(Arc { to: u, cap });
        self.adj[u].push(id);
        self.adj[v].push(id + 1);
    }

    fn bfs_levels(&self, s: usize, t: usize) -> Option<Vec<u32>> {
        let mut level = vec![u32::MAX; self.n];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &a in &self.adj[u] {
                let arc = &self.arcs[a];
                if !arc.cap.is_zero() && level[arc.to] == u32::MAX {
                    level[arc.to] = level[u] + 1;
                    queue.push_back(arc.to);
                }
            }
        }
        if level[t] == u32::MAX {
            None
        } else {
            Some(level)
        }
    }

    fn dfs_push(
        &mut self,
        u: usize,
        t: usize,
        limit: Option<C>,
        level: &[u32],
        iter: &mut [usize],
    ) -> Option<C> {
        if u == t {
            return limit;
        }
        while iter[u] < self.adj[u].len() {
            let a = self.adj[u][iter[u]];
            let (to, cap) = {
                let arc = &self.arcs[a];
                (arc.to, arc.cap.clone())
            };
            if !cap.is_zero() && level[to] == level[u] + 1 {
                let next_limit = match &limit {
                    None => Some(cap.clone()),
                    Some(l) => Some(C::min_of(l, &cap)),
                };
                if let Some(pushed) = self.dfs_push(to, t, next_limit, level, iter) {
                    if !pushed.is_zero() {
                        self.arcs[a].cap.sub_assign(&pushed);
                        self.arcs[a ^ 1].cap.add_assign(&pushed);
                        return Some(pushed);
                    }
                }
            }
            iter[u] += 1;
        }
        None
    }

    /// Runs Dinic to completion and returns the max-flow value.
    pub fn max_flow(&mut self, s: usize, t: usize) -> C {
        assert_ne!(s, t, "max_flow endpoints must differ");
        let mut total = C::zero();
        while let Some(level) = self.bfs_levels(s, t) {
            let mut iter = vec![0usize; self.n];
            while let Some(pushed) = self.dfs_push(s, t, None, &level, &mut iter) {
                if pushed.is_zero() {
                    break;
                }
                total.add_assign(&pushed);
            }
        }
        total
    }

    /// Total flow currently pushed on directed arcs from `u` to `v`.
    /// Meaningful for networks built with `add_arc`, where even arc ids are
    /// the forward arcs and their odd partners accumulate the flow.
    pub fn flow_on(&self, u: usize, v: usize) -> C {
        let mut total = C::zero();
        for &a in &self.adj[u] {
            if a % 2 == 0 && self.arcs[a].to == v {
                total.add_assign(&self.arcs[a ^ 1].cap);
            }
        }
        total
    }

    /// Vertices reachable from `s` in the residual network. After
    /// `max_flow(s, t)` this is the source side of a minimum cut.
    pub fn residual_source_side(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &a in &self.adj[u] {
                let arc = &self.arcs[a];
                if !arc.cap.is_zero() && !seen[arc.to] {
                    seen[arc.to] = true;
                    queue.push_back(arc.to);
                }
            }
        }
        seen
    }
}

/// Max-flow value and source-side min cut for an undirected capacitated
/// graph given as an edge list.
pub fn undirected_min_cut<C: FlowCap>(
    n: usize,
    edges: &[(usize, usize, C)],
    s: usize,
    t: usize,
) -> (C, Vec<bool>) {
    let mut net = FlowNetwork::new(n);
    for (u, v, cap) in edges {
        net.add_undirected(*u, *v, cap.clone());
    }
    let value = net.max_flow(s, t);
    let side = net.residual_source_side(s);
    (value, side)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{rat_frac, rat_int};

    #[test]
    fn unit_path_has_unit_flow() {
        let edges = vec![(0, 1, rat_int(1)), (1, 2, rat_int(1))];
        let (value, side) = undirected_min_cut(3, &edges, 0, 2);
        assert_eq!(value, rat_int(1));
        assert!(side[0] && !side[2]);
    }

    #[test]
    fn fractional_capacities_are_exact() {
        // Two parallel routes of capacity 1/4 and 1/2.
        let edges = vec![
            (0, 1, rat_frac(1, 4)),
            (1, 3, rat_frac(1, 4)),
            (0, 2, rat_frac(1, 2)),
            (2, 3, rat_frac(1, 2)),
        ];
        let (value, _) = undirected_min_cut(4, &edges, 0, 3);
        assert_eq!(value, rat_frac(3, 4));
    }

    #[test]
    fn disconnected_sink_gives_zero_flow_and_reachable_side() {
        let edges = vec![(0, 1, rat_int(2))];
        let (value, side) = undirected_min_cut(3, &edges, 0, 2);
        assert_eq!(value, rat_int(0));
        assert_eq!(side, vec![true, true, false]);
    }

    #[test]
    fn integer_capacities_saturate_cut() {
        let edges: Vec<(usize, usize, u128)> =
            vec![(0, 1, 3), (0, 2, 2), (1, 3, 2), (2, 3, 3), (1, 2, 10)];
        let (value, _) = undirected_min_cut(4, &edges, 0, 3);
        assert_eq!(value, 5);
    }

    #[test]
    fn residual_side_is_minimal_cut_side() {
        // Bottleneck in the middle; source side is {0, 1}.
        let edges = vec![
            (0, 1, rat_int(5)),
            (1, 2, rat_int(1)),
            (2, 3, rat_int(5)),
        ];
        let (value, side) = undirected_min_cut(4, &edges, 0, 3);
        assert_eq!(value, rat_int(1));
        assert_eq!(side, vec![true, true, false, false]);
    }
}
