//! The ordered-TSP LP relaxation, solved exactly by cutting planes.
//!
//! One stroll (leg) per consecutive pair of ordered vertices. The master LP
//! carries one variable per stroll per edge of the complete graph; vertex
//! coverage values are the halved stroll degrees, so the degree identities
//! hold by construction and the coverage fixing/linking constraints become
//! linear constraints on the edge variables. The two cut families of the
//! stroll polytope are separated lazily by minimum-cut computations:
//!
//! * connectivity cuts `x(delta(S)) >= 1` for sets separating the stroll
//!   endpoints, via a minimum s-t cut;
//! * coverage cuts `x(delta(S)) >= 2 y_v` for sets avoiding both endpoints,
//!   via a minimum cut between `v` and the contracted endpoint pair.
//!
//! Each round adds at most one most-violated cut per family per stroll; the
//! loop ends when no cut is violated, so the returned point lies in every
//! stroll polytope exactly.

pub mod simplex;

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::maxflow::undirected_min_cut;
use crate::rat::{denominator_lcm, format_rat, parse_rat, rat_frac, rat_int, Rat};
use num_traits::{ToPrimitive, Zero};
use serde_json::{json, Map, Value};
use simplex::{LpProblem, LpRow, RowKind};
use std::collections::{BTreeMap, BTreeSet};

/// One fractional stroll: support-sparse edge values `x` and coverage
/// values `y` for the leg from `s` to `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct StrollPoint {
    pub index: usize,
    pub s: usize,
    pub t: usize,
    pub x: BTreeMap<(usize, usize), Rat>,
    pub y: BTreeMap<usize, Rat>,
}

impl StrollPoint {
    pub fn x_at(&self, u: usize, v: usize) -> Rat {
        let key = if u < v { (u, v) } else { (v, u) };
        self.x.get(&key).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn y_at(&self, v: usize) -> Rat {
        self.y.get(&v).cloned().unwrap_or_else(Rat::zero)
    }

    /// Sum of incident edge values.
    pub fn degree(&self, v: usize) -> Rat {
        let mut acc = Rat::zero();
        for (&(a, b), val) in &self.x {
            if a == v || b == v {
                acc += val;
            }
        }
        acc
    }

    /// Rebuilds the coverage map from the edge support (`y_v` equals half
    /// the degree of `v`).
    pub fn with_y_from_degrees(mut self) -> StrollPoint {
        let mut deg: BTreeMap<usize, Rat> = BTreeMap::new();
        for (&(a, b), val) in &self.x {
            *deg.entry(a).or_insert_with(Rat::zero) += val;
            *deg.entry(b).or_insert_with(Rat::zero) += val;
        }
        let mut y = BTreeMap::new();
        for (v, d) in deg {
            if !d.is_zero() {
                y.insert(v, d / rat_int(2));
            }
        }
        self.y = y;
        self
    }

    pub fn cost(&self, costs: &crate::instance::CostMatrix) -> Rat {
        let mut acc = Rat::zero();
        for (&(u, v), val) in &self.x {
            acc += Rat::from_integer(costs.at(u, v).clone()) * val;
        }
        acc
    }
}

/// Statistics from the cutting-plane loop.
#[derive(Clone, Debug, Default)]
pub struct SolveStats {
    pub rounds: usize,
    pub cuts_added: usize,
    pub simplex_pivots: usize,
}

/// Optimal fractional solution of the relaxation.
#[derive(Clone, Debug)]
pub struct RelaxationSolution {
    pub strolls: Vec<StrollPoint>,
    pub objective: Rat,
    pub stats: SolveStats,
}

/// A violated constraint found by the separation routine.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ViolatedCut {
    /// `x(delta(side)) >= 1` with `s` inside and `t` outside.
    EndpointSeparation { stroll: usize, side: BTreeSet<usize> },
    /// `x(delta(side)) >= 2 y_v` with `v` inside and both endpoints outside.
    Coverage { stroll: usize, side: BTreeSet<usize>, v: usize },
}

fn edge_key(u: usize, v: usize) -> (usize, usize) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Column layout: stroll-major, edges in lexicographic order.
struct EdgeIndex {
    n: usize,
    pairs: Vec<(usize, usize)>,
    id: BTreeMap<(usize, usize), usize>,
}

impl EdgeIndex {
    fn new(n: usize) -> EdgeIndex {
        let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
        let mut id = BTreeMap::new();
        for u in 0..n {
            for v in (u + 1)..n {
                id.insert((u, v), pairs.len());
                pairs.push((u, v));
            }
        }
        EdgeIndex { n, pairs, id }
    }

    fn count(&self) -> usize {
        self.pairs.len()
    }

    fn col(&self, stroll: usize, u: usize, v: usize) -> usize {
        stroll * self.count() + self.id[&edge_key(u, v)]
    }
}

fn build_problem(inst: &Instance, edges: &EdgeIndex, cuts: &[ViolatedCut]) -> LpProblem {
    let n = inst.n();
    let k = inst.k();
    let d = inst.order.vertices();
    let num_cols = k * edges.count();
    let mut objective = vec![Rat::zero(); num_cols];
    for i in 0..k {
        for (eid, &(u, v)) in edges.pairs.iter().enumerate() {
            objective[i * edges.count() + eid] = Rat::from_integer(inst.costs.at(u, v).clone());
        }
    }
    let mut rows = Vec::new();
    // Endpoint coverage: both stroll ends have degree one.
    for i in 0..k {
        for &end in &[d[i], inst.order.successor(i)] {
            let coeffs = (0..n)
                .filter(|&w| w != end)
                .map(|w| (edges.col(i, end, w), rat_int(1)))
                .collect();
            rows.push(LpRow { coeffs, kind: RowKind::Eq, rhs: rat_int(1) });
        }
    }
    // Full joint coverage of every vertex.
    for v in 0..n {
        let mut coeffs = Vec::with_capacity(k * (n - 1));
        for i in 0..k {
            for w in 0..n {
                if w != v {
                    coeffs.push((edges.col(i, v, w), rat_int(1)));
                }
            }
        }
        coeffs.sort_unstable_by_key(|&(c, _)| c);
        rows.push(LpRow { coeffs, kind: RowKind::Eq, rhs: rat_int(2) });
    }
    for cut in cuts {
        rows.push(cut_row(cut, edges));
    }
    LpProblem { num_cols, objective, rows }
}

fn cut_row(cut: &ViolatedCut, edges: &EdgeIndex) -> LpRow {
    let n = edges.n;
    match cut {
        ViolatedCut::EndpointSeparation { stroll, side } => {
            let mut coeffs = Vec::new();
            for &u in side {
                for w in 0..n {
                    if !side.contains(&w) {
                        coeffs.push((edges.col(*stroll, u, w), rat_int(1)));
                    }
                }
            }
            coeffs.sort_unstable_by_key(|&(c, _)| c);
            LpRow { coeffs, kind: RowKind::Ge, rhs: rat_int(1) }
        }
        ViolatedCut::Coverage { stroll, side, v } => {
            // x(delta(side)) - x(delta(v)) >= 0; incident edges that also
            // cross the cut cancel.
            let mut acc: BTreeMap<usize, i64> = BTreeMap::new();
            for &u in side {
                for w in 0..n {
                    if !side.contains(&w) {
                        *acc.entry(edges.col(*stroll, u, w)).or_insert(0) += 1;
                    }
                }
            }
            for w in 0..n {
                if w != *v {
                    *acc.entry(edges.col(*stroll, *v, w)).or_insert(0) -= 1;
                }
            }
            let coeffs = acc
                .into_iter()
                .filter(|&(_, c)| c != 0)
                .map(|(col, c)| (col, rat_int(c)))
                .collect();
            LpRow { coeffs, kind: RowKind::Ge, rhs: rat_int(0) }
        }
    }
}

/// Finds violated stroll-polytope constraints for a candidate point.
/// Returns at most one most-violated cut per family.
///
/// Capacities are rescaled to integers by the common denominator of the
/// support, so the minimum cuts run over machine integers; the rational
/// path is kept as a fallback for extreme denominators.
pub fn separate_stroll(point: &StrollPoint) -> Vec<ViolatedCut> {
    let mut found = Vec::new();
    let support: Vec<(usize, usize, Rat)> = point
        .x
        .iter()
        .filter(|(_, val)| !val.is_zero())
        .map(|(&(u, v), val)| (u, v, val.clone()))
        .collect();
    // Compact vertex ids over the edge and coverage supports plus both
    // endpoints; a vertex with positive coverage but no incident edge mass
    // still needs a coverage cut.
    let mut vertices: BTreeSet<usize> = support.iter().flat_map(|&(u, v, _)| [u, v]).collect();
    vertices.extend(point.y.iter().filter(|(_, yv)| !yv.is_zero()).map(|(&v, _)| v));
    vertices.insert(point.s);
    vertices.insert(point.t);
    let ids: BTreeMap<usize, usize> = vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let back: Vec<usize> = vertices.iter().copied().collect();

    let scale = denominator_lcm(support.iter().map(|(_, _, c)| c));
    let int_caps: Option<Vec<u128>> = if scale.bits() <= 56 {
        support
            .iter()
            .map(|(_, _, c)| ((c * Rat::from_integer(scale.clone())).to_integer()).to_u128())
            .collect()
    } else {
        None
    };

    // Minimum cut helper over either capacity domain.
    let min_cut = |edges_of: &dyn Fn(usize) -> Option<(usize, usize)>, s: usize, t: usize, nodes: usize, threshold: &Rat| -> (bool, Vec<bool>) {
        match &int_caps {
            Some(caps) => {
                let arcs: Vec<(usize, usize, u128)> = support
                    .iter()
                    .enumerate()
                    .filter_map(|(i, _)| edges_of(i).map(|(a, b)| (a, b, caps[i])))
                    .collect();
                let (value, side) = undirected_min_cut(nodes, &arcs, s, t);
                let scaled = threshold * Rat::from_integer(scale.clone());
                debug_assert!(scaled.is_integer());
                let violated = Rat::from_integer(scaled.to_integer())
                    > Rat::from_integer(num_bigint::BigInt::from(value));
                (violated, side)
            }
            None => {
                let arcs: Vec<(usize, usize, Rat)> = support
                    .iter()
                    .enumerate()
                    .filter_map(|(i, (_, _, c))| edges_of(i).map(|(a, b)| (a, b, c.clone())))
                    .collect();
                let (value, side) = undirected_min_cut(nodes, &arcs, s, t);
                (&value < threshold, side)
            }
        }
    };

    // Endpoint separation family via a minimum s-t cut.
    let plain = |i: usize| -> Option<(usize, usize)> {
        let (u, v, _) = &support[i];
        Some((ids[u], ids[v]))
    };
    let (violated, side) = min_cut(&plain, ids[&point.s], ids[&point.t], back.len(), &rat_int(1));
    if violated {
        let cut_side: BTreeSet<usize> =
            side.iter().enumerate().filter(|&(_, in_s)| *in_s).map(|(i, _)| back[i]).collect();
        debug_assert!(cut_side.contains(&point.s) && !cut_side.contains(&point.t));
        found.push(ViolatedCut::EndpointSeparation { stroll: point.index, side: cut_side });
    }

    // Coverage family: contract both endpoints and cut each covered vertex
    // against the contraction; keep the most violated one. Cut values are
    // compared exactly, so "most violated" ranks by 2 y_v minus the cut.
    let sigma = back.len(); // contracted endpoint node
    let contracted = |i: usize| -> Option<(usize, usize)> {
        let (u, v, _) = &support[i];
        let cu = if *u == point.s || *u == point.t { sigma } else { ids[u] };
        let cv = if *v == point.s || *v == point.t { sigma } else { ids[v] };
        (cu != cv).then_some((cu, cv))
    };
    let mut best: Option<(Rat, usize, Vec<bool>)> = None;
    for (&v, yv) in &point.y {
        if v == point.s || v == point.t || yv.is_zero() {
            continue;
        }
        let threshold = yv * rat_int(2);
        let arcs: Vec<(usize, usize, Rat)> = support
            .iter()
            .enumerate()
            .filter_map(|(i, (_, _, c))| contracted(i).map(|(a, b)| (a, b, c.clone())))
            .collect();
        // Reuse the integer path when available.
        let (value, side) = match &int_caps {
            Some(caps) => {
                let int_arcs: Vec<(usize, usize, u128)> = support
                    .iter()
                    .enumerate()
                    .filter_map(|(i, _)| contracted(i).map(|(a, b)| (a, b, caps[i])))
                    .collect();
                let (value, side) = undirected_min_cut(back.len() + 1, &int_arcs, ids[&v], sigma);
                (
                    Rat::new(num_bigint::BigInt::from(value), scale.clone()),
                    side,
                )
            }
            None => undirected_min_cut(back.len() + 1, &arcs, ids[&v], sigma),
        };
        let violation = &threshold - &value;
        if violation > Rat::zero() {
            let better = match &best {
                None => true,
                Some((bv, _, _)) => violation > *bv,
            };
            if better {
                best = Some((violation, v, side));
            }
        }
    }
    if let Some((_, v, side)) = best {
        let cut_side: BTreeSet<usize> = side
            .iter()
            .enumerate()
            .filter(|&(i, in_s)| *in_s && i < back.len())
            .map(|(i, _)| back[i])
            .collect();
        debug_assert!(cut_side.contains(&v));
        debug_assert!(!cut_side.contains(&point.s) && !cut_side.contains(&point.t));
        found.push(ViolatedCut::Coverage { stroll: point.index, side: cut_side, v });
    }
    found
}

fn extract_strolls(inst: &Instance, edges: &EdgeIndex, x: &[Rat]) -> Vec<StrollPoint> {
    let k = inst.k();
    let d = inst.order.vertices();
    (0..k)
        .map(|i| {
            let mut sup = BTreeMap::new();
            for (eid, &(u, v)) in edges.pairs.iter().enumerate() {
                let val = &x[i * edges.count() + eid];
                if !val.is_zero() {
                    sup.insert((u, v), val.clone());
                }
            }
            StrollPoint {
                index: i,
                s: d[i],
                t: inst.order.successor(i),
                x: sup,
                y: BTreeMap::new(),
            }
            .with_y_from_degrees()
        })
        .collect()
}

/// Solves the relaxation exactly. The returned strolls satisfy every
/// constraint of both cut families (certified by a final empty separation
/// round), the coverage linking holds with equality, and the objective is
/// optimal.
pub fn solve_relaxation(inst: &Instance) -> Result<RelaxationSolution> {
    if inst.k() < 2 {
        return Err(Error::Parameter("relaxation needs at least two ordered vertices".into()));
    }
    let edges = EdgeIndex::new(inst.n());
    let base_rows = 2 * inst.k() + inst.n();
    let mut stats = SolveStats::default();
    let round_cap = 10 * inst.n() * inst.k();

    // Initial master: base rows only, solved from scratch; afterwards each
    // round appends its violated cuts and repairs with the dual simplex.
    let base_problem = build_problem(inst, &edges, &[]);
    let (mut master, mut lp) = simplex::IncrementalLp::new(&base_problem)?;
    // Cut currently at master row `base_rows + i`.
    let mut row_cuts: Vec<ViolatedCut> = Vec::new();
    let mut active: BTreeSet<ViolatedCut> = BTreeSet::new();

    loop {
        stats.rounds += 1;
        stats.simplex_pivots = master.pivots();
        let strolls = extract_strolls(inst, &edges, &lp.x);
        let mut new_cuts = Vec::new();
        for stroll in &strolls {
            for cut in separate_stroll(stroll) {
                if active.contains(&cut) {
                    // The LP carries this row, so it cannot be violated.
                    return Err(Error::Internal(format!(
                        "separation returned a cut that is already active: {:?}",
                        cut
                    )));
                }
                new_cuts.push(cut);
            }
        }
        if new_cuts.is_empty() {
            let sol = RelaxationSolution { strolls, objective: lp.objective, stats };
            validate_solution(inst, &sol)?;
            return Ok(sol);
        }
        // Retire cuts that have gone slack; their rows carry a basic
        // surplus, so they can be dropped without disturbing the basis.
        // They can always be re-separated later.
        let mut drop_rows = Vec::new();
        let mut kept = Vec::with_capacity(row_cuts.len());
        for (i, cut) in row_cuts.iter().enumerate() {
            let row = base_rows + i;
            if !cut_slack(cut, &strolls).is_zero() && master.droppable(row) {
                drop_rows.push(row);
                active.remove(cut);
            } else {
                kept.push(cut.clone());
            }
        }
        if !drop_rows.is_empty() {
            master.drop_rows(&drop_rows)?;
            row_cuts = kept;
        }
        stats.cuts_added += new_cuts.len();
        let rows: Vec<LpRow> = new_cuts.iter().map(|c| cut_row(c, &edges)).collect();
        for cut in new_cuts {
            active.insert(cut.clone());
            row_cuts.push(cut);
        }
        lp = match master.add_cut_rows(&rows) {
            Ok(lp) => lp,
            Err(Error::Resource { .. }) => {
                // Dual reoptimization stalled; rebuild the master from
                // scratch with the full active cut set.
                let fresh = build_problem(inst, &edges, &row_cuts);
                let (m2, lp2) = simplex::IncrementalLp::new(&fresh)?;
                master = m2;
                lp2
            }
            Err(e) => return Err(e),
        };
        if stats.rounds >= round_cap {
            return Err(Error::Resource {
                what: "separation rounds",
                cap: round_cap.to_string(),
                detail: format!(
                    "cut loop did not converge ({} cuts, {} pivots)",
                    stats.cuts_added, stats.simplex_pivots
                ),
            });
        }
    }
}

/// Slack of a cut row at the given strolls (nonnegative when satisfied).
fn cut_slack(cut: &ViolatedCut, strolls: &[StrollPoint]) -> Rat {
    match cut {
        ViolatedCut::EndpointSeparation { stroll, side } => {
            crossing_value(&strolls[*stroll], side) - rat_int(1)
        }
        ViolatedCut::Coverage { stroll, side, v } => {
            let sp = &strolls[*stroll];
            crossing_value(sp, side) - sp.y_at(*v) * rat_int(2)
        }
    }
}

fn crossing_value(sp: &StrollPoint, side: &BTreeSet<usize>) -> Rat {
    let mut acc = Rat::zero();
    for (&(u, v), val) in &sp.x {
        if side.contains(&u) != side.contains(&v) {
            acc += val;
        }
    }
    acc
}

/// Internal consistency checks on a finished solution.
fn validate_solution(inst: &Instance, sol: &RelaxationSolution) -> Result<()> {
    let n = inst.n();
    let half = rat_frac(1, 2);
    for stroll in &sol.strolls {
        if stroll.y_at(stroll.s) != half || stroll.y_at(stroll.t) != half {
            return Err(Error::Internal(format!(
                "stroll {} endpoint coverage is not one half",
                stroll.index
            )));
        }
        for (v, yv) in &stroll.y {
            if yv > &rat_int(1) {
                return Err(Error::Internal(format!(
                    "stroll {} coverage above one at vertex {}",
                    stroll.index, v
                )));
            }
        }
    }
    for v in 0..n {
        let total: Rat = sol.strolls.iter().map(|sp| sp.y_at(v)).sum();
        if total != rat_int(1) {
            return Err(Error::Internal(format!("joint coverage at vertex {} is {}", v, total)));
        }
    }
    let recomputed: Rat = sol.strolls.iter().map(|sp| sp.cost(&inst.costs)).sum();
    if recomputed != sol.objective {
        return Err(Error::Internal("objective does not match stroll costs".into()));
    }
    Ok(())
}

/// Aggregation certificate: the stroll sum has degree two everywhere and no
/// cut below two.
#[derive(Clone, Debug)]
pub struct HeldKarpCertificate {
    pub aggregated: BTreeMap<(usize, usize), Rat>,
    pub min_cut: Rat,
}

/// Sums the strolls and certifies membership in the degree-two cut
/// relaxation via an iterated max-flow sweep. Failure indicates a solver
/// bug, not bad input.
pub fn aggregate_held_karp(n: usize, strolls: &[StrollPoint]) -> Result<HeldKarpCertificate> {
    let mut aggregated: BTreeMap<(usize, usize), Rat> = BTreeMap::new();
    for stroll in strolls {
        for (&e, val) in &stroll.x {
            *aggregated.entry(e).or_insert_with(Rat::zero) += val;
        }
    }
    let mut degree = vec![Rat::zero(); n];
    for (&(u, v), val) in &aggregated {
        degree[u] += val;
        degree[v] += val;
    }
    for (v, d) in degree.iter().enumerate() {
        if *d != rat_int(2) {
            return Err(Error::Internal(format!("aggregated degree at vertex {} is {}", v, d)));
        }
    }
    let arcs: Vec<(usize, usize, Rat)> =
        aggregated.iter().map(|(&(u, v), c)| (u, v, c.clone())).collect();
    let mut min_cut: Option<Rat> = None;
    for v in 1..n {
        let (value, _) = undirected_min_cut(n, &arcs, 0, v);
        if min_cut.as_ref().map_or(true, |m| value < *m) {
            min_cut = Some(value);
        }
    }
    let min_cut = min_cut.unwrap_or_else(|| rat_int(2));
    if min_cut < rat_int(2) {
        return Err(Error::Internal(format!("aggregated cut below two: {}", min_cut)));
    }
    Ok(HeldKarpCertificate { aggregated, min_cut })
}

/// Serializes a solution as the exact-rational dump format.
pub fn solution_to_json(sol: &RelaxationSolution) -> String {
    let strolls: Vec<Value> = sol
        .strolls
        .iter()
        .map(|sp| {
            let x: Vec<Value> = sp
                .x
                .iter()
                .map(|(&(u, v), val)| json!([u, v, format_rat(val)]))
                .collect();
            let y: Vec<Value> =
                sp.y.iter().map(|(&v, val)| json!([v, format_rat(val)])).collect();
            let mut obj = Map::new();
            obj.insert("i".into(), json!(sp.index));
            obj.insert("s".into(), json!(sp.s));
            obj.insert("t".into(), json!(sp.t));
            obj.insert("x".into(), Value::Array(x));
            obj.insert("y".into(), Value::Array(y));
            Value::Object(obj)
        })
        .collect();
    let mut obj = Map::new();
    obj.insert("objective".into(), json!(format_rat(&sol.objective)));
    obj.insert("strolls".into(), Value::Array(strolls));
    serde_json::to_string_pretty(&Value::Object(obj)).expect("serialization cannot fail") + "\n"
}

/// Parses a solution dump against its instance.
pub fn solution_from_json(text: &str, inst: &Instance) -> Result<RelaxationSolution> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| Error::parse(format!("line {}", e.line()), e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::parse("document", "expected a JSON object"))?;
    let objective = obj
        .get("objective")
        .and_then(Value::as_str)
        .and_then(parse_rat)
        .ok_or_else(|| Error::parse("objective", "expected a rational string"))?;
    let strolls_val = obj
        .get("strolls")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::parse("strolls", "expected an array"))?;
    if strolls_val.len() != inst.k() {
        return Err(Error::parse(
            "strolls",
            format!("expected {} strolls, found {}", inst.k(), strolls_val.len()),
        ));
    }
    let mut strolls = Vec::with_capacity(strolls_val.len());
    for (pos, sv) in strolls_val.iter().enumerate() {
        let so = sv
            .as_object()
            .ok_or_else(|| Error::parse(format!("strolls[{}]", pos), "expected an object"))?;
        let index = so
            .get("i")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::parse(format!("strolls[{}].i", pos), "expected an index"))?
            as usize;
        if index >= inst.k() {
            return Err(Error::parse(format!("strolls[{}].i", pos), "stroll index out of range"));
        }
        let mut x = BTreeMap::new();
        for (j, entry) in so
            .get("x")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::parse(format!("strolls[{}].x", pos), "expected an array"))?
            .iter()
            .enumerate()
        {
            let loc = format!("strolls[{}].x[{}]", pos, j);
            let triple = entry.as_array().filter(|a| a.len() == 3);
            let triple = triple.ok_or_else(|| Error::parse(&loc, "expected [u, v, value]"))?;
            let u = triple[0].as_u64().ok_or_else(|| Error::parse(&loc, "bad endpoint"))? as usize;
            let v = triple[1].as_u64().ok_or_else(|| Error::parse(&loc, "bad endpoint"))? as usize;
            let val = triple[2]
                .as_str()
                .and_then(parse_rat)
                .ok_or_else(|| Error::parse(&loc, "expected a rational string"))?;
            if u >= inst.n() || v >= inst.n() || u == v {
                return Err(Error::parse(&loc, "invalid edge"));
            }
            x.insert(edge_key(u, v), val);
        }
        let d = inst.order.vertices();
        strolls.push(
            StrollPoint { index, s: d[index], t: inst.order.successor(index), x, y: BTreeMap::new() }
                .with_y_from_degrees(),
        );
    }
    Ok(RelaxationSolution { strolls, objective, stats: SolveStats::default() })
}

/// Re-checks a parsed solution: feasibility of every stroll (by running the
/// separation oracle), exact linking, endpoint coverage and the objective.
/// Returns human-readable violation descriptions; empty means feasible.
pub fn verify_solution(inst: &Instance, sol: &RelaxationSolution) -> Vec<String> {
    let mut problems = Vec::new();
    if let Err(e) = validate_solution(inst, sol) {
        problems.push(e.to_string());
    }
    for stroll in &sol.strolls {
        for cut in separate_stroll(stroll) {
            problems.push(format!("violated stroll constraint: {:?}", cut));
        }
    }
    if let Err(e) = aggregate_held_karp(inst.n(), &sol.strolls) {
        problems.push(e.to_string());
    }
    problems
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate, GenKind, Instance};

    #[test]
    fn full_order_gives_direct_edge_strolls() {
        let inst = generate(GenKind::Euclidean, 7, 7, 3).unwrap();
        let sol = solve_relaxation(&inst).unwrap();
        assert_eq!(sol.objective, Rat::from_integer(inst.ordered_cycle_cost()));
        for stroll in &sol.strolls {
            assert_eq!(stroll.x.len(), 1);
            assert_eq!(stroll.x_at(stroll.s, stroll.t), rat_int(1));
        }
    }

    #[test]
    fn aggregated_solution_passes_held_karp_certificate() {
        let inst = generate(GenKind::Euclidean, 8, 3, 5).unwrap();
        let sol = solve_relaxation(&inst).unwrap();
        assert!(sol.stats.rounds >= 1);
        let hk = aggregate_held_karp(inst.n(), &sol.strolls).unwrap();
        assert!(hk.min_cut >= rat_int(2));
    }

    #[test]
    fn integral_path_stroll_separates_cleanly() {
        // s - v - t path with full coverage of v.
        let mut x = BTreeMap::new();
        x.insert((0, 1), rat_int(1));
        x.insert((1, 2), rat_int(1));
        let point =
            StrollPoint { index: 0, s: 0, t: 2, x, y: BTreeMap::new() }.with_y_from_degrees();
        assert_eq!(point.y_at(1), rat_int(1));
        assert!(separate_stroll(&point).is_empty());
    }

    #[test]
    fn zero_point_yields_endpoint_separation_cut() {
        let mut y = BTreeMap::new();
        y.insert(3usize, rat_frac(1, 2));
        let point = StrollPoint { index: 0, s: 0, t: 2, x: BTreeMap::new(), y };
        let cuts = separate_stroll(&point);
        assert!(cuts.iter().any(|c| matches!(
            c,
            ViolatedCut::EndpointSeparation { side, .. } if side.contains(&0) && !side.contains(&2)
        )));
    }

    #[test]
    fn disconnected_coverage_yields_coverage_cut() {
        // Stroll edge s-t plus a separate blob at {3, 4}: the blob needs a
        // coverage cut since it cannot be reached from the contraction.
        let mut x = BTreeMap::new();
        x.insert((0, 2), rat_int(1));
        x.insert((3, 4), rat_int(1));
        let point =
            StrollPoint { index: 0, s: 0, t: 2, x, y: BTreeMap::new() }.with_y_from_degrees();
        let cuts = separate_stroll(&point);
        assert!(cuts.iter().any(|c| matches!(
            c,
            ViolatedCut::Coverage { side, v, .. } if side.contains(v) && (*v == 3 || *v == 4)
        )));
    }

    #[test]
    fn hand_built_missing_stroll_fails_aggregation() {
        let inst = generate(GenKind::Euclidean, 6, 6, 1).unwrap();
        let sol = solve_relaxation(&inst).unwrap();
        // Dropping one stroll breaks the degree-two identity.
        let partial = &sol.strolls[1..];
        assert!(aggregate_held_karp(inst.n(), partial).is_err());
    }

    #[test]
    fn dump_round_trip_verifies() {
        let inst = generate(GenKind::Euclidean, 8, 3, 11).unwrap();
        let sol = solve_relaxation(&inst).unwrap();
        let text = solution_to_json(&sol);
        let parsed = solution_from_json(&text, &inst).unwrap();
        assert_eq!(parsed.objective, sol.objective);
        assert!(verify_solution(&inst, &parsed).is_empty());
    }

    #[test]
    fn objective_is_bounded_by_any_order_respecting_tour() {
        let inst = generate(GenKind::Euclidean, 7, 3, 9).unwrap();
        let sol = solve_relaxation(&inst).unwrap();
        let d = inst.order.vertices();
        let mut cycle: Vec<usize> = d.to_vec();
        for v in 0..inst.n() {
            if !d.contains(&v) {
                cycle.push(v);
            }
        }
        let total = Rat::from_integer(crate::instance::cycle_cost(&cycle, &inst.costs));
        assert!(sol.objective <= total);
    }

    #[test]
    fn lower_cost_entry_cannot_raise_the_objective() {
        let inst = generate(GenKind::Euclidean, 7, 3, 2).unwrap();
        let base = solve_relaxation(&inst).unwrap();
        // Shrink one largest off-diagonal entry; closure keeps it metric.
        let mut best = (0, 1);
        for u in 0..7 {
            for v in (u + 1)..7 {
                if inst.costs.at(u, v) > inst.costs.at(best.0, best.1) {
                    best = (u, v);
                }
            }
        }
        let mut rows: Vec<Vec<num_bigint::BigInt>> =
            (0..7).map(|u| (0..7).map(|v| inst.costs.at(u, v).clone()).collect()).collect();
        let reduced = &rows[best.0][best.1] - num_bigint::BigInt::from(1);
        rows[best.0][best.1] = reduced.clone();
        rows[best.1][best.0] = reduced;
        let costs = crate::instance::CostMatrix::new(rows, 0).unwrap().metric_closure();
        let cheaper = Instance::new(costs, inst.order.clone()).unwrap();
        let sol = solve_relaxation(&cheaper).unwrap();
        assert!(sol.objective <= base.objective);
    }
}
