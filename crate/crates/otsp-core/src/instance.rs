//! Instance data model: cost matrices, order constraints, chain constraints,
//! tours, metric validation and repair, and seeded instance generation.
//!
//! Costs are arbitrary-precision integers. Fractional input data is scaled
//! to integers at parse time and the power-of-ten scale factor is recorded,
//! so every downstream bound can be checked exactly.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

pub mod format;

/// Symmetric metric cost matrix over `n` vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostMatrix {
    n: usize,
    scale: u32,
    cost: Vec<BigInt>, // row-major n*n
}

/// Outcome of a triangle-inequality scan.
#[derive(Clone, Debug)]
pub struct MetricReport {
    /// Triples `(u, v, w)` with `c(u,w) > c(u,v) + c(v,w)`.
    pub violations: Vec<(usize, usize, usize)>,
}

impl MetricReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl CostMatrix {
    /// Builds a matrix from row-major entries, checking shape, symmetry,
    /// nonnegativity and a zero diagonal.
    pub fn new(rows: Vec<Vec<BigInt>>, scale: u32) -> Result<CostMatrix> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Structural("empty cost matrix".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Structural(format!(
                    "row {} has {} entries, expected {}",
                    i,
                    row.len(),
                    n
                )));
            }
        }
        let mut cost = Vec::with_capacity(n * n);
        for row in &rows {
            cost.extend(row.iter().cloned());
        }
        let m = CostMatrix { n, scale, cost };
        for u in 0..n {
            if !m.at(u, u).is_zero() {
                return Err(Error::Structural(format!("nonzero diagonal entry at {}", u)));
            }
            for v in 0..u {
                if m.at(u, v) != m.at(v, u) {
                    return Err(Error::Structural(format!(
                        "asymmetric entries at ({}, {})",
                        u, v
                    )));
                }
                if m.at(u, v).is_negative() {
                    return Err(Error::Structural(format!(
                        "negative cost at ({}, {})",
                        u, v
                    )));
                }
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn at(&self, u: usize, v: usize) -> &BigInt {
        &self.cost[u * self.n + v]
    }

    /// Cost of an edge list.
    pub fn edge_set_cost<'a>(&self, edges: impl IntoIterator<Item = &'a (usize, usize)>) -> BigInt {
        let mut total = BigInt::zero();
        for &(u, v) in edges {
            total += self.at(u, v);
        }
        total
    }

    /// Scans all ordered triples for triangle-inequality violations.
    pub fn validate_metric(&self) -> MetricReport {
        let mut violations = Vec::new();
        for u in 0..self.n {
            for v in 0..self.n {
                if v == u {
                    continue;
                }
                for w in 0..self.n {
                    if w == u || w == v {
                        continue;
                    }
                    if self.at(u, w) > &(self.at(u, v) + self.at(v, w)) {
                        violations.push((u, v, w));
                    }
                }
            }
        }
        MetricReport { violations }
    }

    pub fn require_metric(&self) -> Result<()> {
        let report = self.validate_metric();
        match report.violations.first() {
            None => Ok(()),
            Some(&first) => Err(Error::NotMetric { count: report.violations.len(), first }),
        }
    }

    /// All-pairs shortest paths under the current costs. The result satisfies
    /// the triangle inequality and is entrywise at most the input.
    pub fn metric_closure(&self) -> CostMatrix {
        let mut d = self.cost.clone();
        let n = self.n;
        for m in 0..n {
            for u in 0..n {
                if u == m {
                    continue;
                }
                for v in 0..n {
                    if v == u || v == m {
                        continue;
                    }
                    let via = &d[u * n + m] + &d[m * n + v];
                    if via < d[u * n + v] {
                        d[u * n + v] = via;
                    }
                }
            }
        }
        CostMatrix { n, scale: self.scale, cost: d }
    }
}

/// The prescribed visit order `d_1, ..., d_k`. Indices are cyclic: the
/// successor of the last entry is the first one again.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderConstraint {
    order: Vec<usize>,
}

impl OrderConstraint {
    pub fn new(order: Vec<usize>, n: usize) -> Result<OrderConstraint> {
        if order.len() < 2 {
            return Err(Error::Parameter(format!(
                "order constraint needs at least 2 vertices, got {}; for an empty or singleton \
                 order use the plain-TSP mode (christofides)",
                order.len()
            )));
        }
        if order.len() > n {
            return Err(Error::Parameter(format!(
                "order lists {} vertices but the instance has only {}",
                order.len(),
                n
            )));
        }
        let mut seen = vec![false; n];
        for &d in &order {
            if d >= n {
                return Err(Error::Parameter(format!("order vertex {} out of range", d)));
            }
            if seen[d] {
                return Err(Error::Parameter(format!("duplicate order vertex {}", d)));
            }
            seen[d] = true;
        }
        Ok(OrderConstraint { order })
    }

    pub fn k(&self) -> usize {
        self.order.len()
    }

    pub fn vertices(&self) -> &[usize] {
        &self.order
    }

    /// `d_{i+1}` for 0-based stroll index `i`, wrapping to `d_1`.
    pub fn successor(&self, i: usize) -> usize {
        self.order[(i + 1) % self.order.len()]
    }

    pub fn contains(&self, v: usize) -> bool {
        self.order.contains(&v)
    }
}

/// An ordered TSP instance: metric costs plus the visit order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub costs: CostMatrix,
    pub order: OrderConstraint,
}

impl Instance {
    pub fn new(costs: CostMatrix, order: OrderConstraint) -> Result<Instance> {
        if order.k() > costs.n() {
            return Err(Error::Parameter("more ordered vertices than vertices".into()));
        }
        Ok(Instance { costs, order })
    }

    pub fn n(&self) -> usize {
        self.costs.n()
    }

    pub fn k(&self) -> usize {
        self.order.k()
    }

    /// Cost of the cycle that visits exactly the ordered vertices.
    pub fn ordered_cycle_cost(&self) -> BigInt {
        let d = self.order.vertices();
        let mut total = BigInt::zero();
        for i in 0..d.len() {
            total += self.costs.at(d[i], d[(i + 1) % d.len()]);
        }
        total
    }
}

/// A precedence instance with independent chains: disjoint vertex sequences
/// that each must be visited in their internal order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainInstance {
    pub costs: CostMatrix,
    chains: Vec<Vec<usize>>,
}

impl ChainInstance {
    pub fn new(costs: CostMatrix, chains: Vec<Vec<usize>>) -> Result<ChainInstance> {
        if chains.is_empty() {
            return Err(Error::Parameter("chain instance needs at least one chain".into()));
        }
        let n = costs.n();
        let mut seen = vec![false; n];
        for (j, chain) in chains.iter().enumerate() {
            if chain.is_empty() {
                return Err(Error::Parameter(format!("chain {} is empty", j)));
            }
            for &v in chain {
                if v >= n {
                    return Err(Error::Parameter(format!(
                        "chain {} vertex {} out of range",
                        j, v
                    )));
                }
                if seen[v] {
                    return Err(Error::Parameter(format!(
                        "vertex {} appears in more than one chain",
                        v
                    )));
                }
                seen[v] = true;
            }
        }
        Ok(ChainInstance { costs, chains })
    }

    pub fn n(&self) -> usize {
        self.costs.n()
    }

    pub fn chains(&self) -> &[Vec<usize>] {
        &self.chains
    }
}

/// A spanning cycle with its certified cost.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tour {
    cycle: Vec<usize>,
    cost: BigInt,
}

impl Tour {
    /// Builds a tour from a cyclic vertex sequence, recomputing and storing
    /// its cost. Fails unless the sequence is a permutation of all vertices.
    pub fn new(cycle: Vec<usize>, costs: &CostMatrix) -> Result<Tour> {
        let n = costs.n();
        if cycle.len() != n {
            return Err(Error::Structural(format!(
                "cycle visits {} vertices, instance has {}",
                cycle.len(),
                n
            )));
        }
        let mut seen = vec![false; n];
        for &v in &cycle {
            if v >= n || seen[v] {
                return Err(Error::Structural(format!("cycle entry {} repeated or out of range", v)));
            }
            seen[v] = true;
        }
        let cost = cycle_cost(&cycle, costs);
        Ok(Tour { cycle, cost })
    }

    pub fn cycle(&self) -> &[usize] {
        &self.cycle
    }

    pub fn cost(&self) -> &BigInt {
        &self.cost
    }

    /// True iff some rotation or direction of the cycle visits the given
    /// vertices in their listed order.
    pub fn respects_order(&self, order: &OrderConstraint) -> bool {
        cycle_respects_order(&self.cycle, order.vertices())
    }
}

/// Sum of consecutive-pair costs including the closing edge.
pub fn cycle_cost(cycle: &[usize], costs: &CostMatrix) -> BigInt {
    let mut total = BigInt::zero();
    for i in 0..cycle.len() {
        total += costs.at(cycle[i], cycle[(i + 1) % cycle.len()]);
    }
    total
}

/// Rotation/direction-insensitive check that `ordered` appears in order on
/// the cycle.
pub fn cycle_respects_order(cycle: &[usize], ordered: &[usize]) -> bool {
    if ordered.len() <= 2 {
        return ordered.iter().all(|d| cycle.contains(d));
    }
    let n = cycle.len();
    let mut pos = vec![usize::MAX; cycle.iter().copied().max().unwrap_or(0) + 1];
    for (i, &v) in cycle.iter().enumerate() {
        pos[v] = i;
    }
    if ordered.iter().any(|&d| d >= pos.len() || pos[d] == usize::MAX) {
        return false;
    }
    let anchor = pos[ordered[0]];
    let forward = ordered[1..]
        .iter()
        .map(|&d| (pos[d] + n - anchor) % n)
        .collect::<Vec<_>>();
    let backward = ordered[1..]
        .iter()
        .map(|&d| (anchor + n - pos[d]) % n)
        .collect::<Vec<_>>();
    forward.windows(2).all(|w| w[0] < w[1]) || backward.windows(2).all(|w| w[0] < w[1])
}

/// Instance generator family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GenKind {
    /// Random planar points with rounded Euclidean distances, then closed.
    Euclidean,
    /// Random symmetric integer matrix repaired by metric closure.
    RandomClosure,
}

impl GenKind {
    pub fn parse(s: &str) -> Result<GenKind> {
        match s {
            "euclidean" => Ok(GenKind::Euclidean),
            "random_closure" => Ok(GenKind::RandomClosure),
            other => Err(Error::Parameter(format!("unknown generator kind '{}'", other))),
        }
    }
}

fn generate_costs(kind: GenKind, n: usize, rng: &mut ChaCha12Rng) -> CostMatrix {
    const COORD_RANGE: i64 = 10_000;
    let mut cost = vec![BigInt::zero(); n * n];
    match kind {
        GenKind::Euclidean => {
            let pts: Vec<(i64, i64)> = (0..n)
                .map(|_| (rng.random_range(0..=COORD_RANGE), rng.random_range(0..=COORD_RANGE)))
                .collect();
            for u in 0..n {
                for v in 0..u {
                    let dx = (pts[u].0 - pts[v].0) as f64;
                    let dy = (pts[u].1 - pts[v].1) as f64;
                    let d = (dx * dx + dy * dy).sqrt().round() as i64;
                    cost[u * n + v] = BigInt::from(d);
                    cost[v * n + u] = BigInt::from(d);
                }
            }
        }
        GenKind::RandomClosure => {
            for u in 0..n {
                for v in 0..u {
                    let d = rng.random_range(1..=COORD_RANGE);
                    cost[u * n + v] = BigInt::from(d);
                    cost[v * n + u] = BigInt::from(d);
                }
            }
        }
    }
    let raw = CostMatrix { n, scale: 0, cost };
    // Rounding (or raw random entries) can break the triangle inequality.
    raw.metric_closure()
}

fn sample_distinct(count: usize, n: usize, rng: &mut ChaCha12Rng) -> Vec<usize> {
    let mut all: Vec<usize> = (0..n).collect();
    all.shuffle(rng);
    all.truncate(count);
    all
}

/// Generates a deterministic ordered instance for a given seed.
pub fn generate(kind: GenKind, n: usize, k: usize, seed: u64) -> Result<Instance> {
    if n < 2 || k < 2 || k > n {
        return Err(Error::Parameter(format!(
            "generation needs 2 <= k <= n, got n={}, k={}",
            n, k
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let costs = generate_costs(kind, n, &mut rng);
    let order = OrderConstraint::new(sample_distinct(k, n, &mut rng), n)?;
    Instance::new(costs, order)
}

/// Generates a deterministic chain instance with the given chain sizes.
pub fn generate_chains(kind: GenKind, n: usize, sizes: &[usize], seed: u64) -> Result<ChainInstance> {
    let total: usize = sizes.iter().sum();
    if sizes.is_empty() || sizes.iter().any(|&s| s == 0) {
        return Err(Error::Parameter("chain sizes must be positive".into()));
    }
    if total > n {
        return Err(Error::Parameter(format!(
            "chain sizes sum to {} but the instance has only {} vertices",
            total, n
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let costs = generate_costs(kind, n, &mut rng);
    let picked = sample_distinct(total, n, &mut rng);
    let mut chains = Vec::with_capacity(sizes.len());
    let mut at = 0;
    for &s in sizes {
        chains.push(picked[at..at + s].to_vec());
        at += s;
    }
    ChainInstance::new(costs, chains)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;
    use proptest::prelude::*;

    fn unit_triangle() -> CostMatrix {
        let one = BigInt::one();
        let zero = BigInt::zero();
        CostMatrix::new(
            vec![
                vec![zero.clone(), one.clone(), one.clone()],
                vec![one.clone(), zero.clone(), one.clone()],
                vec![one.clone(), one.clone(), zero.clone()],
            ],
            0,
        )
        .unwrap()
    }

    fn matrix_from_i64(rows: &[&[i64]]) -> CostMatrix {
        CostMatrix::new(
            rows.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn unit_triangle_is_metric() {
        assert!(unit_triangle().validate_metric().ok());
    }

    #[test]
    fn violation_is_reported_with_triple() {
        let m = matrix_from_i64(&[&[0, 1, 5], &[1, 0, 1], &[5, 1, 0]]);
        let report = m.validate_metric();
        assert!(report.violations.contains(&(0, 1, 2)));
        assert!(m.require_metric().is_err());
    }

    #[test]
    fn generated_euclidean_is_metric() {
        let inst = generate(GenKind::Euclidean, 20, 4, 7).unwrap();
        // Brute force over all triples.
        assert!(inst.costs.validate_metric().ok());
    }

    #[test]
    fn closure_is_identity_on_metrics() {
        let m = unit_triangle();
        assert_eq!(m.metric_closure(), m);
    }

    #[test]
    fn closure_shortens_direct_edge_through_path() {
        let m = matrix_from_i64(&[&[0, 1, 5], &[1, 0, 1], &[5, 1, 0]]);
        let closed = m.metric_closure();
        assert_eq!(closed.at(0, 2), &BigInt::from(2));
        assert!(closed.validate_metric().ok());
    }

    #[test]
    fn asymmetric_input_is_structural_error() {
        let rows = vec![
            vec![BigInt::zero(), BigInt::from(2)],
            vec![BigInt::from(3), BigInt::zero()],
        ];
        assert!(matches!(CostMatrix::new(rows, 0), Err(Error::Structural(_))));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(GenKind::Euclidean, 10, 3, 7).unwrap();
        let b = generate(GenKind::Euclidean, 10, 3, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn full_order_is_permutation() {
        let inst = generate(GenKind::RandomClosure, 5, 5, 1).unwrap();
        let mut order = inst.order.vertices().to_vec();
        order.sort_unstable();
        assert_eq!(order, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn k_exceeding_n_is_parameter_error() {
        assert!(matches!(generate(GenKind::Euclidean, 4, 5, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn singleton_order_is_rejected() {
        let err = OrderConstraint::new(vec![0], 4).unwrap_err();
        assert!(err.to_string().contains("christofides"));
    }

    #[test]
    fn chain_overlap_is_rejected() {
        let m = unit_triangle();
        let err = ChainInstance::new(m, vec![vec![0, 1], vec![1, 2]]).unwrap_err();
        assert!(err.to_string().contains("more than one chain"));
    }

    #[test]
    fn tour_cost_matches_recomputation() {
        let inst = generate(GenKind::Euclidean, 8, 3, 11).unwrap();
        let cycle: Vec<usize> = (0..8).collect();
        let tour = Tour::new(cycle.clone(), &inst.costs).unwrap();
        assert_eq!(tour.cost(), &cycle_cost(&cycle, &inst.costs));
    }

    #[test]
    fn order_check_detects_direction_and_rotation() {
        let cycle = vec![4, 0, 1, 2, 3];
        let fwd = OrderConstraint::new(vec![0, 1, 3], 5).unwrap();
        let swapped = OrderConstraint::new(vec![0, 3, 1], 5).unwrap();
        assert!(cycle_respects_order(&cycle, fwd.vertices()));
        // Reverse direction makes (0, 3, 1) feasible as well.
        assert!(cycle_respects_order(&cycle, swapped.vertices()));
        let infeasible = OrderConstraint::new(vec![0, 2, 1, 3], 5).unwrap();
        assert!(!cycle_respects_order(&cycle, infeasible.vertices()));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn closure_is_idempotent_and_metric(seed in 0u64..5000, n in 3usize..9) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut cost = vec![BigInt::zero(); n * n];
            for u in 0..n {
                for v in 0..u {
                    let d = rng.random_range(0..1000i64);
                    cost[u * n + v] = BigInt::from(d);
                    cost[v * n + u] = BigInt::from(d);
                }
            }
            let m = CostMatrix { n, scale: 0, cost };
            let closed = m.metric_closure();
            prop_assert!(closed.validate_metric().ok());
            prop_assert_eq!(closed.metric_closure(), closed.clone());
            for u in 0..n {
                for v in 0..n {
                    prop_assert!(closed.at(u, v) <= m.at(u, v));
                }
            }
        }
    }
}
