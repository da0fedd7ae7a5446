//! Decomposition of a fractional stroll into a convex combination of trees
//! that all contain both endpoints, with exact edge and coverage
//! identities.
//!
//! The construction closes the stroll by adding one unit on the endpoint
//! edge, scales everything to an integral multigraph, orients it so that
//! every in-degree equals the scaled coverage requirement (with the root's
//! in-arcs pinned to the closing edge, which realizes the reserved edge
//! mass), and then peels weighted arborescences off the digraph. Each
//! peeled tree consumes one in-arc per covered vertex, so the edge identity
//! holds by arc counting; every arc addition and every peel weight is
//! validated by exact max-flow checks against the remaining root
//! connectivity requirements, and a small backtracking search covers the
//! rare dead ends. The output family is re-verified exactly before being
//! returned.

use crate::error::{Error, Result};
use crate::lp::{separate_stroll, StrollPoint};
use crate::maxflow::FlowNetwork;
use crate::rat::{denominator_lcm, rat_int, Rat};
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::BTreeMap;

/// A stroll point closed into a rooted structure: one unit added on the
/// endpoint edge, endpoint coverages raised to one.
#[derive(Clone, Debug)]
pub struct ClosedStrollPoint {
    pub x: BTreeMap<(usize, usize), Rat>,
    pub y: BTreeMap<usize, Rat>,
    pub root: usize,
    pub anchor: usize,
}

/// Trees with positive rational weights summing to one, all containing the
/// stroll endpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedTreeFamily {
    pub s: usize,
    pub t: usize,
    pub trees: Vec<(Vec<(usize, usize)>, Rat)>,
}

impl WeightedTreeFamily {
    /// Vertices of one tree.
    pub fn tree_vertices(edges: &[(usize, usize)]) -> Vec<usize> {
        let mut vs: Vec<usize> = edges.iter().flat_map(|&(u, v)| [u, v]).collect();
        vs.sort_unstable();
        vs.dedup();
        vs
    }

    /// Exact coverage of a vertex: total weight of trees containing it.
    pub fn coverage(&self, v: usize) -> Rat {
        let mut acc = Rat::zero();
        for (edges, mu) in &self.trees {
            if edges.iter().any(|&(a, b)| a == v || b == v) {
                acc += mu;
            }
        }
        acc
    }

    /// Expected edge cost under the family weights.
    pub fn expected_cost(&self, costs: &crate::instance::CostMatrix) -> Rat {
        let mut acc = Rat::zero();
        for (edges, mu) in &self.trees {
            acc += Rat::from_integer(costs.edge_set_cost(edges.iter())) * mu;
        }
        acc
    }
}

fn edge_key(u: usize, v: usize) -> (usize, usize) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Closes a stroll: x gains one unit on the endpoint edge, both endpoint
/// coverages become one. The input must lie in the stroll polytope; the
/// closed point is checked against the rooted cut system by exact min-cuts.
pub fn close_stroll(point: &StrollPoint) -> Result<ClosedStrollPoint> {
    if !separate_stroll(point).is_empty() {
        return Err(Error::Parameter(format!(
            "stroll {} is not feasible for its polytope",
            point.index
        )));
    }
    let mut x = point.x.clone();
    *x.entry(edge_key(point.s, point.t)).or_insert_with(Rat::zero) += rat_int(1);
    let mut y = point.y.clone();
    y.insert(point.s, rat_int(1));
    y.insert(point.t, rat_int(1));
    let closed = ClosedStrollPoint { x, y, root: point.s, anchor: point.t };
    verify_closed_point(&closed)?;
    Ok(closed)
}

/// Exact validation of the rooted system: degree identities, unit coverage
/// at root and anchor, closing edge at least one, and all root-side cut
/// requirements via min-cut.
fn verify_closed_point(closed: &ClosedStrollPoint) -> Result<()> {
    let mut degree: BTreeMap<usize, Rat> = BTreeMap::new();
    for (&(u, v), val) in &closed.x {
        if val.is_negative() {
            return Err(Error::Internal("negative edge value in closed stroll".into()));
        }
        *degree.entry(u).or_insert_with(Rat::zero) += val;
        *degree.entry(v).or_insert_with(Rat::zero) += val;
    }
    for (&v, yv) in &closed.y {
        let deg = degree.get(&v).cloned().unwrap_or_else(Rat::zero);
        if deg != yv * rat_int(2) {
            return Err(Error::Internal(format!(
                "degree identity fails at vertex {} in closed stroll",
                v
            )));
        }
    }
    if closed.y.get(&closed.root) != Some(&rat_int(1))
        || closed.y.get(&closed.anchor) != Some(&rat_int(1))
    {
        return Err(Error::Internal("closed stroll endpoints not fully covered".into()));
    }
    let e0 = edge_key(closed.root, closed.anchor);
    if closed.x.get(&e0).map_or(true, |v| v < &rat_int(1)) {
        return Err(Error::Internal("closing edge below one".into()));
    }
    // Root connectivity requirements, one exact min-cut per covered vertex.
    let ids: BTreeMap<usize, usize> =
        closed.y.keys().enumerate().map(|(i, &v)| (v, i)).collect();
    let arcs: Vec<(usize, usize, Rat)> = closed
        .x
        .iter()
        .filter(|(_, val)| !val.is_zero())
        .map(|(&(u, v), val)| (ids[&u], ids[&v], val.clone()))
        .collect();
    for (&v, yv) in &closed.y {
        if v == closed.root || yv.is_zero() {
            continue;
        }
        let (cut, _) =
            crate::maxflow::undirected_min_cut(ids.len(), &arcs, ids[&closed.root], ids[&v]);
        if cut < yv * rat_int(2) {
            return Err(Error::Internal(format!(
                "root connectivity below requirement at vertex {}",
                v
            )));
        }
    }
    Ok(())
}

/// Integral multigraph model: arc multiplicities between compact vertex
/// ids, in-degree-tight for the scaled coverage requirements.
struct Packing {
    n: usize,
    root: usize,
    /// Multiplicity per directed arc.
    arcs: BTreeMap<(usize, usize), u128>,
    /// Remaining coverage requirement per vertex (root entry unused).
    need: Vec<u128>,
    remaining: u128,
}

impl Packing {
    fn lambda_to(&self, target: usize, minus: &[((usize, usize), u128)]) -> u128 {
        let mut net = FlowNetwork::<u128>::new(self.n);
        for (&(a, b), &m) in &self.arcs {
            let mut m = m;
            for &((da, db), dm) in minus {
                if (da, db) == (a, b) {
                    m -= dm;
                }
            }
            if m > 0 {
                net.add_arc(a, b, m);
            }
        }
        net.max_flow(self.root, target)
    }

    /// All requirements still satisfiable after removing `minus` and
    /// lowering the requirement by one on `covered` vertices.
    fn feasible_after(
        &self,
        minus: &[((usize, usize), u128)],
        covered: &[bool],
        peel: u128,
    ) -> bool {
        for v in 0..self.n {
            if v == self.root {
                continue;
            }
            let need = if covered[v] { self.need[v].saturating_sub(peel) } else { self.need[v] };
            if need == 0 {
                continue;
            }
            if self.lambda_to(v, minus) < need {
                return false;
            }
        }
        true
    }
}

/// Greedy arborescence peeling with backtracking. Returns integer-weighted
/// trees as arc lists.
fn peel_trees(p: &mut Packing) -> Result<Vec<(Vec<(usize, usize)>, u128)>> {
    let mut out: Vec<(Vec<(usize, usize)>, u128)> = Vec::new();
    let tree_cap = 8 * (p.arcs.len() + p.n) + 64;
    let mut backtracks_left = 20_000usize;
    while p.remaining > 0 {
        if out.len() > tree_cap {
            return Err(Error::Resource {
                what: "decomposition family size",
                cap: tree_cap.to_string(),
                detail: "tree peeling did not make progress".into(),
            });
        }
        // Grow one arborescence from the root.
        let mut in_tree = vec![false; p.n];
        in_tree[p.root] = true;
        let mut tree_arcs: Vec<(usize, usize)> = Vec::new();
        let mut forbidden: Vec<Vec<(usize, usize)>> = vec![Vec::new()];
        loop {
            let all_required_covered =
                (0..p.n).all(|v| v == p.root || p.need[v] < p.remaining || in_tree[v]);
            if all_required_covered && !tree_arcs.is_empty() {
                break;
            }
            // Candidate arcs out of the tree toward vertices that still
            // need coverage; urgent vertices (must be in every remaining
            // tree) first.
            let minus: Vec<((usize, usize), u128)> =
                tree_arcs.iter().map(|&a| (a, 1)).collect();
            let mut candidates: Vec<(bool, usize, usize)> = Vec::new();
            for (&(a, b), &m) in &p.arcs {
                let used = minus.iter().any(|&(arc, _)| arc == (a, b));
                let avail = if used { m - 1 } else { m };
                if avail == 0 || !in_tree[a] || in_tree[b] || p.need[b] == 0 {
                    continue;
                }
                if forbidden.last().unwrap().contains(&(a, b)) {
                    continue;
                }
                let urgent = p.need[b] == p.remaining;
                candidates.push((!urgent, b, a));
            }
            candidates.sort_unstable();
            let mut advanced = false;
            for &(_, b, a) in &candidates {
                let mut test_minus = minus.clone();
                test_minus.push(((a, b), 1));
                let mut covered = in_tree.clone();
                covered[b] = true;
                if p.feasible_after(&test_minus, &covered, 1) {
                    tree_arcs.push((a, b));
                    in_tree[b] = true;
                    forbidden.push(Vec::new());
                    advanced = true;
                    break;
                }
            }
            if advanced {
                continue;
            }
            // Dead end: undo the last arc and forbid it at that level.
            backtracks_left = backtracks_left.saturating_sub(1);
            if backtracks_left == 0 {
                return Err(Error::Internal(
                    "arborescence peeling exhausted its backtracking budget".into(),
                ));
            }
            let Some(last) = tree_arcs.pop() else {
                return Err(Error::Internal(
                    "no feasible arborescence extension from the root".into(),
                ));
            };
            in_tree[last.1] = false;
            forbidden.pop();
            forbidden.last_mut().unwrap().push(last);
        }
        // Largest peel weight that keeps the remainder feasible.
        let mut hi = p.remaining;
        for &(a, b) in &tree_arcs {
            hi = hi.min(p.arcs[&(a, b)]);
            hi = hi.min(p.need[b]);
        }
        for v in 0..p.n {
            if v != p.root && !in_tree[v] {
                hi = hi.min(p.remaining - p.need[v]);
            }
        }
        debug_assert!(hi >= 1);
        let minus_template: Vec<((usize, usize), u128)> =
            tree_arcs.iter().map(|&a| (a, 0)).collect();
        let mut w = hi;
        loop {
            let minus: Vec<((usize, usize), u128)> =
                minus_template.iter().map(|&(a, _)| (a, w)).collect();
            if p.feasible_after(&minus, &in_tree, w) {
                break;
            }
            w = if w > 2 { w / 2 } else { 1 };
            if w == 1 {
                break; // guaranteed by the per-arc checks during growth
            }
        }
        for &(a, b) in &tree_arcs {
            let m = p.arcs.get_mut(&(a, b)).expect("tree arc exists");
            *m -= w;
            if *m == 0 {
                p.arcs.remove(&(a, b));
            }
            p.need[b] -= w;
        }
        p.remaining -= w;
        out.push((tree_arcs, w));
    }
    Ok(out)
}

/// Finds an orientation of the scaled multigraph in which every vertex's
/// in-degree equals its requirement, subject to the root prescription
/// (`prescribed_in[v]` arcs into `v` are already fixed). Solved as an
/// exact transportation max-flow; infeasibility indicates a solver bug.
fn orient_balanced(
    n: usize,
    edges: &[(usize, usize, u128)],
    target_in: &[u128],
    prescribed_in: &[u128],
) -> Result<BTreeMap<(usize, usize), u128>> {
    // Nodes: source, one per edge, one per vertex, sink.
    let source = 0;
    let edge_base = 1;
    let vertex_base = edge_base + edges.len();
    let sink = vertex_base + n;
    let mut net = FlowNetwork::<u128>::new(sink + 1);
    let mut total = 0u128;
    for (i, &(a, b, m)) in edges.iter().enumerate() {
        net.add_arc(source, edge_base + i, m);
        net.add_arc(edge_base + i, vertex_base + a, m);
        net.add_arc(edge_base + i, vertex_base + b, m);
        total += m;
    }
    for v in 0..n {
        let cap = target_in[v]
            .checked_sub(prescribed_in[v])
            .ok_or_else(|| Error::Internal("orientation prescription exceeds requirement".into()))?;
        net.add_arc(vertex_base + v, sink, cap);
    }
    let flow = net.max_flow(source, sink);
    if flow != total {
        return Err(Error::Internal("balanced orientation does not exist".into()));
    }
    // Read off the orientation: flow pushed from edge node i toward vertex
    // a means "m copies point at a".
    let mut arcs: BTreeMap<(usize, usize), u128> = BTreeMap::new();
    for (i, &(a, b, m)) in edges.iter().enumerate() {
        let fa = net.flow_on(edge_base + i, vertex_base + a);
        let fb = net.flow_on(edge_base + i, vertex_base + b);
        debug_assert_eq!(fa + fb, m);
        if fa > 0 {
            *arcs.entry((b, a)).or_insert(0) += fa;
        }
        if fb > 0 {
            *arcs.entry((a, b)).or_insert(0) += fb;
        }
    }
    Ok(arcs)
}

fn default_scale_cap() -> BigInt {
    BigInt::from(u64::MAX)
}

/// Decomposes a feasible stroll point into a weighted tree family whose
/// edge sums and coverages reproduce the point exactly.
pub fn decompose(point: &StrollPoint) -> Result<WeightedTreeFamily> {
    decompose_with_cap(point, &default_scale_cap())
}

/// Same as [`decompose`] with an explicit cap on the integral scale factor.
pub fn decompose_with_cap(point: &StrollPoint, cap: &BigInt) -> Result<WeightedTreeFamily> {
    let closed = close_stroll(point)?;
    // Vertices with zero coverage never appear in any tree.
    let vertices: Vec<usize> = closed
        .y
        .iter()
        .filter(|(_, yv)| !yv.is_zero())
        .map(|(&v, _)| v)
        .collect();
    let ids: BTreeMap<usize, usize> = vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let n = vertices.len();
    let root = ids[&closed.root];
    let anchor = ids[&closed.anchor];

    let scale = denominator_lcm(closed.x.values()) * BigInt::from(2);
    if scale > *cap {
        return Err(Error::Resource {
            what: "decomposition scale factor",
            cap: cap.to_string(),
            detail: format!("needed scale {}", scale),
        });
    }
    let scale_u = scale.to_u128().ok_or_else(|| Error::Resource {
        what: "decomposition scale factor",
        cap: cap.to_string(),
        detail: "scale exceeds the machine range".into(),
    })?;
    let mult = |val: &Rat| -> u128 {
        let scaled = val * Rat::from_integer(scale.clone());
        debug_assert!(scaled.is_integer());
        scaled.to_integer().to_u128().expect("scaled multiplicity fits")
    };

    // Scaled requirements; every multiplicity is even by choice of scale.
    let mut need = vec![0u128; n];
    for (&v, yv) in &closed.y {
        if let Some(&id) = ids.get(&v) {
            need[id] = mult(yv);
        }
    }
    let total = need[root];
    debug_assert_eq!(total, scale_u);

    // Orientation: the root's in-arcs are exactly the reserved closing-edge
    // copies from the anchor; all other root-incident mass points outward.
    let e0 = edge_key(closed.root, closed.anchor);
    let mut free_edges: Vec<(usize, usize, u128)> = Vec::new();
    let mut arcs: BTreeMap<(usize, usize), u128> = BTreeMap::new();
    let mut prescribed_in = vec![0u128; n];
    for (&(u, v), val) in &closed.x {
        if val.is_zero() {
            continue;
        }
        let m = mult(val);
        let (cu, cv) = (ids[&u], ids[&v]);
        if (u, v) == e0 || (v, u) == e0 {
            // `total` copies point into the root; the rest point at the
            // anchor.
            *arcs.entry((anchor, root)).or_insert(0) += total;
            if m > total {
                *arcs.entry((root, anchor)).or_insert(0) += m - total;
                prescribed_in[anchor] += m - total;
            }
            prescribed_in[root] += total;
        } else if cu == root || cv == root {
            let other = if cu == root { cv } else { cu };
            *arcs.entry((root, other)).or_insert(0) += m;
            prescribed_in[other] += m;
        } else {
            free_edges.push((cu, cv, m));
        }
    }
    let target_in: Vec<u128> = (0..n).map(|v| if v == root { total } else { need[v] }).collect();
    let oriented = orient_balanced(n, &free_edges, &target_in, &prescribed_in)?;
    for ((a, b), m) in oriented {
        *arcs.entry((a, b)).or_insert(0) += m;
    }

    let mut packing = Packing { n, root, arcs, need, remaining: total };
    // The root's reserved in-arcs never participate; drop them so the
    // connectivity checks see only usable arcs.
    packing.arcs.remove(&(anchor, root));

    let raw_trees = peel_trees(&mut packing)?;
    let mut merged: BTreeMap<Vec<(usize, usize)>, u128> = BTreeMap::new();
    for (arcs, w) in raw_trees {
        let mut edges: Vec<(usize, usize)> = arcs
            .into_iter()
            .map(|(a, b)| edge_key(vertices[a], vertices[b]))
            .collect();
        edges.sort_unstable();
        *merged.entry(edges).or_insert(0) += w;
    }
    let family = WeightedTreeFamily {
        s: point.s,
        t: point.t,
        trees: merged
            .into_iter()
            .map(|(edges, w)| {
                (edges, Rat::new(BigInt::from(w), BigInt::from(total)))
            })
            .collect(),
    };
    let report = verify_decomposition(point, &family);
    if !report.ok() {
        return Err(Error::Internal(format!(
            "decomposition failed verification: {}",
            report.problems.join("; ")
        )));
    }
    Ok(family)
}

/// Violations found when checking a family against a stroll point.
#[derive(Clone, Debug, Default)]
pub struct VerificationReport {
    pub problems: Vec<String>,
}

impl VerificationReport {
    pub fn ok(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Exact check of the decomposition identities: every member is a tree
/// containing both endpoints, weights are positive and sum to one, the
/// weighted edge indicators reproduce `x`, and the coverage of every
/// non-endpoint vertex equals its `y` value.
pub fn verify_decomposition(point: &StrollPoint, family: &WeightedTreeFamily) -> VerificationReport {
    let mut report = VerificationReport::default();
    if family.s != point.s || family.t != point.t {
        report.problems.push("family endpoints do not match the stroll".into());
    }
    let mut weight_sum = Rat::zero();
    for (idx, (edges, mu)) in family.trees.iter().enumerate() {
        if !mu.is_positive() {
            report.problems.push(format!("tree {} has nonpositive weight", idx));
        }
        weight_sum += mu;
        let vs = WeightedTreeFamily::tree_vertices(edges);
        if !vs.contains(&point.s) || !vs.contains(&point.t) {
            report.problems.push(format!("tree {} misses an endpoint", idx));
        }
        if !is_tree(edges, &vs) {
            report.problems.push(format!("tree {} is not a tree", idx));
        }
    }
    if weight_sum != rat_int(1) {
        report.problems.push(format!("weights sum to {}, not one", weight_sum));
    }
    // Edge identity.
    let mut edge_mass: BTreeMap<(usize, usize), Rat> = BTreeMap::new();
    for (edges, mu) in &family.trees {
        for &e in edges {
            *edge_mass.entry(e).or_insert_with(Rat::zero) += mu;
        }
    }
    let mut all_edges: Vec<(usize, usize)> = point.x.keys().copied().collect();
    all_edges.extend(edge_mass.keys().copied());
    all_edges.sort_unstable();
    all_edges.dedup();
    for e in all_edges {
        let want = point.x.get(&e).cloned().unwrap_or_else(Rat::zero);
        let have = edge_mass.get(&e).cloned().unwrap_or_else(Rat::zero);
        if want != have {
            report
                .problems
                .push(format!("edge ({}, {}) has mass {} but x is {}", e.0, e.1, have, want));
        }
    }
    // Coverage identity away from the endpoints.
    let mut vertices: Vec<usize> = point.y.keys().copied().collect();
    for (edges, _) in &family.trees {
        vertices.extend(WeightedTreeFamily::tree_vertices(edges));
    }
    vertices.sort_unstable();
    vertices.dedup();
    for v in vertices {
        if v == point.s || v == point.t {
            continue;
        }
        let want = point.y_at(v);
        let have = family.coverage(v);
        if want != have {
            report
                .problems
                .push(format!("vertex {} is covered {} but y is {}", v, have, want));
        }
    }
    report
}

fn is_tree(edges: &[(usize, usize)], vertices: &[usize]) -> bool {
    if edges.len() + 1 != vertices.len() {
        return false;
    }
    // Union-find over the vertex list.
    let idx: BTreeMap<usize, usize> = vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut parent: Vec<usize> = (0..vertices.len()).collect();
    fn find(parent: &mut Vec<usize>, mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    for &(u, v) in edges {
        let (ru, rv) = (find(&mut parent, idx[&u]), find(&mut parent, idx[&v]));
        if ru == rv {
            return false;
        }
        parent[ru] = rv;
    }
    true
}

/// Independent oracle: enumerates all subtrees of the support containing
/// both endpoints and solves the exact feasibility program for the weights.
/// Only usable on small supports.
pub fn decompose_bruteforce(point: &StrollPoint) -> Result<WeightedTreeFamily> {
    let support: Vec<(usize, usize)> = point
        .x
        .iter()
        .filter(|(_, v)| !v.is_zero())
        .map(|(&e, _)| e)
        .collect();
    if support.len() > 16 {
        return Err(Error::Resource {
            what: "brute-force decomposition support",
            cap: "16".into(),
            detail: format!("support has {} edges", support.len()),
        });
    }
    let mut trees: Vec<Vec<(usize, usize)>> = Vec::new();
    for mask in 1u32..(1 << support.len()) {
        let edges: Vec<(usize, usize)> =
            (0..support.len()).filter(|i| mask >> i & 1 == 1).map(|i| support[i]).collect();
        let vs = WeightedTreeFamily::tree_vertices(&edges);
        if vs.contains(&point.s) && vs.contains(&point.t) && is_tree(&edges, &vs) {
            trees.push(edges);
        }
    }
    if trees.is_empty() {
        return Err(Error::Internal("no candidate trees in the support".into()));
    }
    // Feasibility program: edge identities, coverage identities, total
    // weight one.
    use crate::lp::simplex::{solve, LpProblem, LpRow, RowKind};
    let mut rows = Vec::new();
    for (ei, &e) in support.iter().enumerate() {
        let coeffs: Vec<(usize, Rat)> = trees
            .iter()
            .enumerate()
            .filter(|(_, t)| t.contains(&support[ei]))
            .map(|(ti, _)| (ti, rat_int(1)))
            .collect();
        rows.push(LpRow { coeffs, kind: RowKind::Eq, rhs: point.x[&e].clone() });
    }
    for (&v, yv) in &point.y {
        if v == point.s || v == point.t || yv.is_zero() {
            continue;
        }
        let coeffs: Vec<(usize, Rat)> = trees
            .iter()
            .enumerate()
            .filter(|(_, t)| t.iter().any(|&(a, b)| a == v || b == v))
            .map(|(ti, _)| (ti, rat_int(1)))
            .collect();
        rows.push(LpRow { coeffs, kind: RowKind::Eq, rhs: yv.clone() });
    }
    rows.push(LpRow {
        coeffs: (0..trees.len()).map(|ti| (ti, rat_int(1))).collect(),
        kind: RowKind::Eq,
        rhs: rat_int(1),
    });
    let problem = LpProblem {
        num_cols: trees.len(),
        objective: vec![Rat::zero(); trees.len()],
        rows,
    };
    let sol = solve(&problem).map_err(|e| match e {
        Error::Internal(msg) if msg.contains("infeasible") => Error::Internal(
            "no feasible tree weights exist for this stroll, which contradicts the \
             decomposition guarantee"
                .into(),
        ),
        other => other,
    })?;
    let family = WeightedTreeFamily {
        s: point.s,
        t: point.t,
        trees: trees
            .into_iter()
            .zip(sol.x)
            .filter(|(_, mu)| !mu.is_zero())
            .map(|(mut edges, mu)| {
                edges.sort_unstable();
                (edges, mu)
            })
            .collect(),
    };
    let report = verify_decomposition(point, &family);
    if !report.ok() {
        return Err(Error::Internal(format!(
            "brute-force decomposition failed verification: {}",
            report.problems.join("; ")
        )));
    }
    Ok(family)
}

/// Spanning-tree decomposition of a degree-two cut-at-least-two point
/// rooted at `root`: every tree spans the support and contains the root,
/// weights sum to one, and the weighted edge mass is `x` minus one unit of
/// root in-flow (reported back as the leftover map). Used by the chain
/// pipeline when a chain degenerates to the root alone.
pub fn decompose_rooted(
    x: &BTreeMap<(usize, usize), Rat>,
    root: usize,
) -> Result<(Vec<(Vec<(usize, usize)>, Rat)>, BTreeMap<(usize, usize), Rat>)> {
    let vertices: Vec<usize> = {
        let mut vs: Vec<usize> = x.keys().flat_map(|&(u, v)| [u, v]).collect();
        vs.push(root);
        vs.sort_unstable();
        vs.dedup();
        vs
    };
    let ids: BTreeMap<usize, usize> = vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let n = vertices.len();
    let rid = ids[&root];
    let scale = denominator_lcm(x.values()) * BigInt::from(2);
    let scale_u = scale.to_u128().ok_or_else(|| Error::Resource {
        what: "decomposition scale factor",
        cap: u64::MAX.to_string(),
        detail: "scale exceeds the machine range".into(),
    })?;
    let total = scale_u;
    let mult = |val: &Rat| -> u128 {
        let scaled = val * Rat::from_integer(scale.clone());
        debug_assert!(scaled.is_integer());
        scaled.to_integer().to_u128().expect("scaled multiplicity fits")
    };
    let free_edges: Vec<(usize, usize, u128)> = x
        .iter()
        .filter(|(_, v)| !v.is_zero())
        .map(|(&(u, v), val)| (ids[&u], ids[&v], mult(val)))
        .collect();
    let target_in = vec![total; n];
    let arcs = orient_balanced(n, &free_edges, &target_in, &vec![0; n])?;
    let mut packing = Packing {
        n,
        root: rid,
        arcs,
        need: vec![total; n],
        remaining: total,
    };
    packing.need[rid] = total;
    // The root's in-arcs are the unused reserve here.
    let reserve: Vec<((usize, usize), u128)> = packing
        .arcs
        .iter()
        .filter(|(&(_, b), _)| b == rid)
        .map(|(&a, &m)| (a, m))
        .collect();
    for (a, _) in &reserve {
        packing.arcs.remove(a);
    }
    let raw = peel_trees(&mut packing)?;
    let trees: Vec<(Vec<(usize, usize)>, Rat)> = raw
        .into_iter()
        .map(|(arcs, w)| {
            let mut edges: Vec<(usize, usize)> = arcs
                .into_iter()
                .map(|(a, b)| edge_key(vertices[a], vertices[b]))
                .collect();
            edges.sort_unstable();
            (edges, Rat::new(BigInt::from(w), BigInt::from(total)))
        })
        .collect();
    let leftover: BTreeMap<(usize, usize), Rat> = reserve
        .into_iter()
        .map(|((a, b), m)| {
            (edge_key(vertices[a], vertices[b]), Rat::new(BigInt::from(m), BigInt::from(total)))
        })
        .collect();
    // Verification: weights one, spanning, edge identity x minus leftover.
    let mut weight = Rat::zero();
    let mut mass: BTreeMap<(usize, usize), Rat> = BTreeMap::new();
    for (edges, mu) in &trees {
        weight += mu;
        let vs = WeightedTreeFamily::tree_vertices(edges);
        if vs.len() != n || !is_tree(edges, &vs) {
            return Err(Error::Internal("rooted decomposition produced a non-spanning tree".into()));
        }
        for &e in edges {
            *mass.entry(e).or_insert_with(Rat::zero) += mu;
        }
    }
    if weight != rat_int(1) {
        return Err(Error::Internal("rooted decomposition weights do not sum to one".into()));
    }
    for (&e, val) in x {
        let have = mass.get(&e).cloned().unwrap_or_else(Rat::zero)
            + leftover.get(&e).cloned().unwrap_or_else(Rat::zero);
        if &have != val {
            return Err(Error::Internal(format!(
                "rooted decomposition misses mass on edge ({}, {})",
                e.0, e.1
            )));
        }
    }
    Ok((trees, leftover))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate, GenKind};
    use crate::lp::solve_relaxation;
    use crate::rat::rat_frac;

    fn stroll_from_edges(s: usize, t: usize, edges: &[(usize, usize, Rat)]) -> StrollPoint {
        let mut x = BTreeMap::new();
        for &(u, v, ref val) in edges {
            x.insert(edge_key(u, v), val.clone());
        }
        StrollPoint { index: 0, s, t, x, y: BTreeMap::new() }.with_y_from_degrees()
    }

    /// Twelve-vertex quarter-integral stroll used across the test suite:
    /// an upper block on six inner vertices and a lower quarter path.
    pub(crate) fn quarter_integral_stroll() -> StrollPoint {
        let q = || rat_frac(1, 4);
        let h = || rat_frac(1, 2);
        let tq = || rat_frac(3, 4);
        // Vertices: s=0, t=11, upper v1..v6 = 1..6, lower v7..v10 = 7..10.
        stroll_from_edges(
            0,
            11,
            &[
                (0, 1, tq()),
                (1, 2, h()),
                (1, 3, q()),
                (2, 3, q()),
                (2, 4, tq()),
                (3, 5, h()),
                (4, 5, q()),
                (4, 6, h()),
                (5, 6, q()),
                (6, 11, tq()),
                (0, 7, q()),
                (7, 8, q()),
                (8, 9, q()),
                (9, 10, q()),
                (10, 11, q()),
            ],
        )
    }

    /// The published four-tree certificate for the fixture, uniform weight.
    pub(crate) fn quarter_integral_family() -> WeightedTreeFamily {
        let mu = || rat_frac(1, 4);
        let tree = |edges: &[(usize, usize)]| {
            let mut e = edges.to_vec();
            e.sort_unstable();
            e
        };
        WeightedTreeFamily {
            s: 0,
            t: 11,
            trees: vec![
                (tree(&[(0, 7), (7, 8), (8, 9), (9, 10), (10, 11)]), mu()),
                (tree(&[(0, 1), (1, 3), (3, 5), (5, 6), (6, 11), (4, 5), (2, 4)]), mu()),
                (tree(&[(0, 1), (1, 2), (2, 4), (4, 6), (6, 11), (2, 3), (3, 5)]), mu()),
                (tree(&[(0, 1), (1, 2), (2, 4), (4, 6), (6, 11)]), mu()),
            ],
        }
    }

    #[test]
    fn direct_edge_stroll_closes_and_decomposes_to_single_tree() {
        let point = stroll_from_edges(0, 1, &[(0, 1, rat_int(1))]);
        let closed = close_stroll(&point).unwrap();
        assert_eq!(closed.x[&(0, 1)], rat_int(2));
        assert_eq!(closed.y[&0], rat_int(1));
        let family = decompose(&point).unwrap();
        assert_eq!(family.trees.len(), 1);
        assert_eq!(family.trees[0], (vec![(0, 1)], rat_int(1)));
    }

    #[test]
    fn quarter_integral_point_is_feasible_and_closes() {
        let point = quarter_integral_stroll();
        assert!(separate_stroll(&point).is_empty());
        let closed = close_stroll(&point).unwrap();
        assert_eq!(closed.x[&(0, 11)], rat_int(1));
        assert_eq!(closed.y[&0], rat_int(1));
        assert_eq!(closed.y[&11], rat_int(1));
        // All other entries unchanged.
        assert_eq!(closed.x[&(0, 1)], rat_frac(3, 4));
    }

    #[test]
    fn published_family_verifies_and_perturbed_weight_fails() {
        let point = quarter_integral_stroll();
        let family = quarter_integral_family();
        assert!(verify_decomposition(&point, &family).ok());
        let mut broken = family.clone();
        broken.trees[0].1 = rat_frac(1, 4) + rat_frac(1, 8);
        let report = verify_decomposition(&point, &broken);
        assert!(!report.ok());
        assert!(report.problems.iter().any(|p| p.contains("sum")));
        assert!(report.problems.iter().any(|p| p.contains("mass") || p.contains("covered")));
    }

    #[test]
    fn quarter_integral_point_decomposes() {
        let point = quarter_integral_stroll();
        let family = decompose(&point).unwrap();
        assert!(verify_decomposition(&point, &family).ok());
    }

    #[test]
    fn quarter_integral_support_admits_bruteforce_family() {
        let point = quarter_integral_stroll();
        let family = decompose_bruteforce(&point).unwrap();
        assert!(verify_decomposition(&point, &family).ok());
    }

    #[test]
    fn infeasible_stroll_is_rejected() {
        // A split blob that violates the coverage cuts.
        let point = stroll_from_edges(0, 1, &[(0, 1, rat_int(1)), (2, 3, rat_int(1))]);
        assert!(matches!(close_stroll(&point), Err(Error::Parameter(_))));
    }

    #[test]
    fn lp_strolls_decompose_and_match_bruteforce_feasibility() {
        for seed in [3u64, 5, 9] {
            let inst = generate(GenKind::Euclidean, 8, 3, seed).unwrap();
            let sol = solve_relaxation(&inst).unwrap();
            for stroll in &sol.strolls {
                let family = decompose(stroll).unwrap();
                assert!(verify_decomposition(stroll, &family).ok());
                if stroll.x.len() <= 16 {
                    let brute = decompose_bruteforce(stroll).unwrap();
                    assert!(verify_decomposition(stroll, &brute).ok());
                }
            }
        }
    }

    #[test]
    fn expected_family_cost_equals_stroll_cost() {
        let inst = generate(GenKind::Euclidean, 9, 4, 12).unwrap();
        let sol = solve_relaxation(&inst).unwrap();
        for stroll in &sol.strolls {
            let family = decompose(stroll).unwrap();
            assert_eq!(family.expected_cost(&inst.costs), stroll.cost(&inst.costs));
        }
    }

    #[test]
    fn rooted_cycle_decomposes_into_spanning_trees() {
        // Unit cycle on five vertices: a degree-two point with cuts two.
        let mut x = BTreeMap::new();
        for v in 0..5usize {
            x.insert(edge_key(v, (v + 1) % 5), rat_int(1));
        }
        let (trees, leftover) = decompose_rooted(&x, 0).unwrap();
        let weight: Rat = trees.iter().map(|(_, mu)| mu.clone()).sum();
        assert_eq!(weight, rat_int(1));
        for (edges, _) in &trees {
            assert_eq!(WeightedTreeFamily::tree_vertices(edges).len(), 5);
        }
        // Exactly one unit of leftover mass flows back into the root.
        let back: Rat = leftover.values().sum();
        assert_eq!(back, rat_int(1));
    }
}
