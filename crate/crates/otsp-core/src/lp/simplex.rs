//! Exact two-phase revised simplex.
//!
//! The basis inverse is kept in product form: a sequence of eta columns
//! applied by FTRAN/BTRAN, rebuilt from scratch every few dozen pivots to
//! cap fill-in. Reduced costs are maintained incrementally from the pivot
//! row, and entering columns are chosen by devex-weighted pricing (the
//! weights are float heuristics; every accept/reject decision is made in
//! exact arithmetic). The solver first runs over the machine-word rational
//! `Q64`; any overflow aborts that attempt and the solve is redone over
//! arbitrary-precision rationals, so results are always exact. Degeneracy
//! is handled by switching to Bland's rule after a run of degenerate
//! pivots.

use crate::error::{Error, Result};
use crate::rat::{QAda, Q64, Rat};
use num_traits::Zero;
use std::cmp::Ordering;

/// Scalar domain for one simplex run. Arithmetic returns `None` on
/// overflow, which triggers the fallback to `Rat`.
pub trait Scalar: Clone + std::fmt::Debug {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn signum(&self) -> i32;
    fn neg(&self) -> Self;
    fn add(&self, o: &Self) -> Option<Self>;
    fn sub(&self, o: &Self) -> Option<Self>;
    fn mul(&self, o: &Self) -> Option<Self>;
    fn div(&self, o: &Self) -> Option<Self>;
    fn cmp_exact(&self, o: &Self) -> Ordering;
    fn from_rat(r: &Rat) -> Option<Self>;
    fn to_rat(&self) -> Rat;
    /// Lossy float view, used only by selection heuristics.
    fn to_f64(&self) -> f64;
}

impl Scalar for Rat {
    fn zero() -> Self {
        <Rat as Zero>::zero()
    }
    fn one() -> Self {
        num_traits::One::one()
    }
    fn is_zero(&self) -> bool {
        <Rat as Zero>::is_zero(self)
    }
    fn signum(&self) -> i32 {
        match self.numer().sign() {
            num_bigint::Sign::Minus => -1,
            num_bigint::Sign::NoSign => 0,
            num_bigint::Sign::Plus => 1,
        }
    }
    fn neg(&self) -> Self {
        -self
    }
    fn add(&self, o: &Self) -> Option<Self> {
        Some(self + o)
    }
    fn sub(&self, o: &Self) -> Option<Self> {
        Some(self - o)
    }
    fn mul(&self, o: &Self) -> Option<Self> {
        Some(self * o)
    }
    fn div(&self, o: &Self) -> Option<Self> {
        Some(self / o)
    }
    fn cmp_exact(&self, o: &Self) -> Ordering {
        self.cmp(o)
    }
    fn from_rat(r: &Rat) -> Option<Self> {
        Some(r.clone())
    }
    fn to_rat(&self) -> Rat {
        self.clone()
    }
    fn to_f64(&self) -> f64 {
        use num_traits::ToPrimitive;
        self.numer().to_f64().unwrap_or(f64::MAX) / self.denom().to_f64().unwrap_or(1.0)
    }
}

impl Scalar for Q64 {
    fn zero() -> Self {
        Q64::ZERO
    }
    fn one() -> Self {
        Q64::ONE
    }
    fn is_zero(&self) -> bool {
        Q64::is_zero(self)
    }
    fn signum(&self) -> i32 {
        Q64::signum(self)
    }
    fn neg(&self) -> Self {
        Q64::neg(self)
    }
    fn add(&self, o: &Self) -> Option<Self> {
        self.checked_add(o)
    }
    fn sub(&self, o: &Self) -> Option<Self> {
        self.checked_sub(o)
    }
    fn mul(&self, o: &Self) -> Option<Self> {
        self.checked_mul(o)
    }
    fn div(&self, o: &Self) -> Option<Self> {
        self.checked_div(o)
    }
    fn cmp_exact(&self, o: &Self) -> Ordering {
        self.cmp(o)
    }
    fn from_rat(r: &Rat) -> Option<Self> {
        Q64::from_rat(r)
    }
    fn to_rat(&self) -> Rat {
        (*self).to_rat()
    }
    fn to_f64(&self) -> f64 {
        Q64::to_f64(self)
    }
}

impl Scalar for QAda {
    fn zero() -> Self {
        QAda::ZERO
    }
    fn one() -> Self {
        QAda::Small(Q64::ONE)
    }
    fn is_zero(&self) -> bool {
        QAda::is_zero(self)
    }
    fn signum(&self) -> i32 {
        QAda::signum(self)
    }
    fn neg(&self) -> Self {
        QAda::neg(self)
    }
    fn add(&self, o: &Self) -> Option<Self> {
        Some(QAda::add(self, o))
    }
    fn sub(&self, o: &Self) -> Option<Self> {
        Some(QAda::sub(self, o))
    }
    fn mul(&self, o: &Self) -> Option<Self> {
        Some(QAda::mul(self, o))
    }
    fn div(&self, o: &Self) -> Option<Self> {
        Some(QAda::div(self, o))
    }
    fn cmp_exact(&self, o: &Self) -> Ordering {
        QAda::cmp_exact(self, o)
    }
    fn from_rat(r: &Rat) -> Option<Self> {
        Some(QAda::from_rat(r))
    }
    fn to_rat(&self) -> Rat {
        QAda::to_rat(self)
    }
    fn to_f64(&self) -> f64 {
        QAda::to_f64(self)
    }
}

/// Float twin used only to discover candidate bases quickly; every basis
/// it proposes is re-verified in exact arithmetic before use. Comparisons
/// carry a small tolerance so degenerate ties break by noise instead of
/// cycling.
#[derive(Clone, Copy, Debug)]
struct F64(f64);

const F64_EPS: f64 = 1e-9;

impl Scalar for F64 {
    fn zero() -> Self {
        F64(0.0)
    }
    fn one() -> Self {
        F64(1.0)
    }
    fn is_zero(&self) -> bool {
        self.0.abs() <= F64_EPS
    }
    fn signum(&self) -> i32 {
        if self.0 > F64_EPS {
            1
        } else if self.0 < -F64_EPS {
            -1
        } else {
            0
        }
    }
    fn neg(&self) -> Self {
        F64(-self.0)
    }
    fn add(&self, o: &Self) -> Option<Self> {
        Some(F64(self.0 + o.0))
    }
    fn sub(&self, o: &Self) -> Option<Self> {
        Some(F64(self.0 - o.0))
    }
    fn mul(&self, o: &Self) -> Option<Self> {
        Some(F64(self.0 * o.0))
    }
    fn div(&self, o: &Self) -> Option<Self> {
        if o.0.abs() <= f64::MIN_POSITIVE {
            None
        } else {
            Some(F64(self.0 / o.0))
        }
    }
    fn cmp_exact(&self, o: &Self) -> Ordering {
        if (self.0 - o.0).abs() <= F64_EPS {
            Ordering::Equal
        } else {
            self.0.partial_cmp(&o.0).unwrap_or(Ordering::Equal)
        }
    }
    fn from_rat(r: &Rat) -> Option<Self> {
        use num_traits::ToPrimitive;
        Some(F64(r.numer().to_f64()? / r.denom().to_f64()?))
    }
    fn to_rat(&self) -> Rat {
        // The float twin never reports values; only its basis is used.
        Rat::from_float(self.0).unwrap_or_else(<Rat as Zero>::zero)
    }
    fn to_f64(&self) -> f64 {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Eq,
    Ge,
}

#[derive(Clone, Debug)]
pub struct LpRow {
    /// Sparse coefficients, sorted by column, at most one entry per column.
    pub coeffs: Vec<(usize, Rat)>,
    pub kind: RowKind,
    pub rhs: Rat,
}

/// Minimization problem `min c x` subject to the rows and `x >= 0`.
#[derive(Clone, Debug)]
pub struct LpProblem {
    pub num_cols: usize,
    pub objective: Vec<Rat>,
    pub rows: Vec<LpRow>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<Rat>,
    pub objective: Rat,
    pub pivots: usize,
}

struct Overflow;

/// Artificial variables live in their own id space so that appending real
/// columns later cannot shift them.
const ART_BASE: usize = usize::MAX / 2;

/// Solves the problem exactly, preferring the fast scalar.
pub fn solve(problem: &LpProblem) -> Result<LpSolution> {
    match SimplexRun::<QAda>::new(problem).and_then(|mut run| run.solve()) {
        Ok(sol) => Ok(sol),
        Err(RunError::Overflow) => { if std::env::var_os("LP_TIMING").is_some() { eprintln!("OVERFLOW fallback m={}", problem.rows.len()); } match SimplexRun::<Rat>::new(problem) {
            Ok(mut run) => run.solve().map_err(|e| match e {
                RunError::Overflow => Error::Internal("rational simplex cannot overflow".into()),
                RunError::Error(err) => err,
            }),
            Err(RunError::Overflow) => Err(Error::Internal("rational conversion failed".into())),
            Err(RunError::Error(err)) => Err(err),
        } },
        Err(RunError::Error(err)) => Err(err),
    }
}

/// Exactly solved master problem that accepts new `>=` rows between
/// solves and reoptimizes with the dual simplex, as a cutting-plane loop
/// needs. Falls back to arbitrary precision per value, so results are
/// exact throughout.
pub struct IncrementalLp {
    exact: SimplexRun<crate::rat::QAda>,
}

impl IncrementalLp {
    /// Builds and solves the initial master problem.
    pub fn new(problem: &LpProblem) -> Result<(IncrementalLp, LpSolution)> {
        let exact = SimplexRun::<crate::rat::QAda>::new(problem).map_err(IncrementalLp::err)?;
        let mut lp = IncrementalLp { exact };
        let solution = lp.reoptimize()?;
        Ok((lp, solution))
    }

    /// Appends violated `>=` rows and reoptimizes.
    pub fn add_cut_rows(&mut self, rows: &[LpRow]) -> Result<LpSolution> {
        self.exact.append_ge_rows(rows).map_err(|_| overflow_internal())?;
        self.reoptimize()
    }

    /// Lets a float twin run the pivot search from the current state, then
    /// verifies the proposed basis exactly and finishes with exact pivots.
    /// Any trouble in or with the proposal falls back to the fully exact
    /// solve path, so the twin can only cost time, never correctness.
    fn reoptimize(&mut self) -> Result<LpSolution> {
        let proposal = self.float_proposal();
        let warmed = match proposal {
            Some(basis) => matches!(self.exact.install_basis(basis), Ok(true)),
            None => false,
        };
        if warmed {
            self.exact.drive_out_artificials().map_err(IncrementalLp::err)?;
            self.exact
                .optimize(&SimplexRun::phase2_cost, &|run: &SimplexRun<crate::rat::QAda>, col| {
                    !run.is_artificial(col)
                })
                .map_err(IncrementalLp::err)?;
        } else {
            self.exact.primal_solve().map_err(IncrementalLp::err)?;
        }
        self.exact.extract().map_err(IncrementalLp::err)
    }

    fn float_proposal(&self) -> Option<Vec<usize>> {
        let mut twin = self.exact.convert::<F64>()?;
        twin.refactor().ok()?;
        twin.primal_solve().ok()?;
        Some(twin.basis)
    }

    /// True when the row's basic variable is its own slack, so the row can
    /// be dropped without disturbing the rest of the basis.
    pub fn droppable(&self, row: usize) -> bool {
        self.exact.row_is_droppable(row)
    }

    /// Drops the given rows (each must satisfy `droppable`).
    pub fn drop_rows(&mut self, rows: &[usize]) -> Result<()> {
        if rows.is_empty() {
            return Ok(());
        }
        self.exact.drop_rows(rows).map_err(|_| overflow_internal())
    }

    pub fn pivots(&self) -> usize {
        self.exact.pivots
    }

    fn err(e: RunError) -> Error {
        match e {
            RunError::Overflow => overflow_internal(),
            RunError::Error(err) => err,
        }
    }
}

fn overflow_internal() -> Error {
    Error::Internal("adaptive-precision run reported overflow".into())
}

enum RunError {
    Overflow,
    Error(Error),
}

impl From<Overflow> for RunError {
    fn from(_: Overflow) -> Self {
        RunError::Overflow
    }
}

/// One elementary transformation of the basis inverse: identity except for
/// column `row`, whose entries (including the diagonal) are stored sparse.
struct Eta<S> {
    row: usize,
    entries: Vec<(usize, S)>,
}

struct SimplexRun<S> {
    m: usize,
    /// Structural + slack/surplus columns as sparse (row, coeff) lists.
    cols: Vec<Vec<(usize, S)>>,
    /// Same data indexed by row, for sparse pricing updates.
    rows_to_cols: Vec<Vec<(usize, S)>>,
    rows_to_cols_f: Vec<Vec<(usize, f64)>>,
    /// Objective per column (phase 2).
    obj: Vec<S>,
    num_struct: usize,
    rhs: Vec<S>,
    /// Basis member per row: column id, or `cols.len() + row` for the
    /// artificial of that row.
    basis: Vec<usize>,
    etas: Vec<Eta<S>>,
    eta_nnz: usize,
    etas_since_refactor: usize,
    base_eta_nnz: usize,
    xb: Vec<S>,
    any_artificial: bool,
    pivots: usize,
}

impl<S: Scalar> SimplexRun<S> {
    fn new(problem: &LpProblem) -> std::result::Result<Self, RunError> {
        let m = problem.rows.len();
        let num_struct = problem.num_cols;
        let mut cols: Vec<Vec<(usize, S)>> = vec![Vec::new(); num_struct];
        let mut rhs: Vec<S> = Vec::with_capacity(m);
        let mut slack_cols: Vec<Vec<(usize, S)>> = Vec::new();
        let mut needs_artificial = vec![false; m];
        let mut initial_slack_basis: Vec<Option<usize>> = vec![None; m];
        for (i, row) in problem.rows.iter().enumerate() {
            // Normalize to rhs >= 0. A >= row with rhs <= 0 flips into a <=
            // row whose slack can start basic, avoiding an artificial.
            let r = S::from_rat(&row.rhs).ok_or(RunError::Overflow)?;
            let negate = Scalar::signum(&r) < 0 || (row.kind == RowKind::Ge && r.is_zero());
            rhs.push(if negate { r.neg() } else { r });
            for (col, coeff) in &row.coeffs {
                let c = S::from_rat(coeff).ok_or(RunError::Overflow)?;
                cols[*col].push((i, if negate { c.neg() } else { c }));
            }
            match (row.kind, negate) {
                (RowKind::Eq, _) => {
                    needs_artificial[i] = true;
                }
                (RowKind::Ge, false) => {
                    // a x - s = b, s >= 0; the surplus cannot start basic.
                    slack_cols.push(vec![(i, S::one().neg())]);
                    needs_artificial[i] = true;
                }
                (RowKind::Ge, true) => {
                    // Negated to <=: -a x + s = -b with -b >= 0, slack basic.
                    slack_cols.push(vec![(i, S::one())]);
                    initial_slack_basis[i] = Some(num_struct + slack_cols.len() - 1);
                }
            }
        }
        cols.extend(slack_cols);
        let total_cols = cols.len();
        let mut rows_to_cols: Vec<Vec<(usize, S)>> = vec![Vec::new(); m];
        for (j, col) in cols.iter().enumerate() {
            for (i, a) in col {
                rows_to_cols[*i].push((j, a.clone()));
            }
        }
        let rows_to_cols_f: Vec<Vec<(usize, f64)>> = rows_to_cols
            .iter()
            .map(|row| row.iter().map(|(j, a)| (*j, a.to_f64())).collect())
            .collect();
        let mut obj: Vec<S> = Vec::with_capacity(total_cols);
        for c in &problem.objective {
            obj.push(S::from_rat(c).ok_or(RunError::Overflow)?);
        }
        obj.resize(total_cols, S::zero());

        let mut basis = Vec::with_capacity(m);
        let mut any_artificial = false;
        for i in 0..m {
            if let Some(slack) = initial_slack_basis[i] {
                basis.push(slack);
            } else {
                debug_assert!(needs_artificial[i]);
                basis.push(ART_BASE + i);
                any_artificial = true;
            }
        }
        let xb = rhs.clone();
        Ok(SimplexRun {
            m,
            cols,
            rows_to_cols,
            rows_to_cols_f,
            obj,
            num_struct,
            rhs,
            basis,
            etas: Vec::new(),
            eta_nnz: 0,
            etas_since_refactor: 0,
            base_eta_nnz: 0,
            xb,
            any_artificial,
            pivots: 0,
        })
    }

    /// Structural copy of the run in another scalar domain, carrying the
    /// current basis along.
    fn convert<T: Scalar>(&self) -> Option<SimplexRun<T>> {
        let conv = |v: &S| T::from_rat(&v.to_rat());
        let mut cols = Vec::with_capacity(self.cols.len());
        for col in &self.cols {
            let mut out = Vec::with_capacity(col.len());
            for (r, a) in col {
                out.push((*r, conv(a)?));
            }
            cols.push(out);
        }
        let mut rows_to_cols: Vec<Vec<(usize, T)>> = vec![Vec::new(); self.m];
        for (j, col) in cols.iter().enumerate() {
            for (i, a) in col {
                rows_to_cols[*i].push((j, a.clone()));
            }
        }
        let rows_to_cols_f = self.rows_to_cols_f.clone();
        let mut obj = Vec::with_capacity(self.obj.len());
        for c in &self.obj {
            obj.push(conv(c)?);
        }
        let mut rhs = Vec::with_capacity(self.rhs.len());
        for b in &self.rhs {
            rhs.push(conv(b)?);
        }
        let xb = rhs.clone(); // refreshed by the first refactor
        Some(SimplexRun {
            m: self.m,
            cols,
            rows_to_cols,
            rows_to_cols_f,
            obj,
            num_struct: self.num_struct,
            rhs,
            basis: self.basis.clone(),
            etas: Vec::new(),
            eta_nnz: 0,
            etas_since_refactor: 0,
            base_eta_nnz: 0,
            xb,
            any_artificial: self.any_artificial,
            pivots: 0,
        })
    }

    fn is_artificial(&self, col: usize) -> bool {
        col >= ART_BASE
    }

    /// v := B^-1 v.
    fn ftran(&self, v: &mut [S]) -> std::result::Result<(), Overflow> {
        for eta in &self.etas {
            let vr = v[eta.row].clone();
            if vr.is_zero() {
                continue;
            }
            for (i, e) in &eta.entries {
                let term = e.mul(&vr).ok_or(Overflow)?;
                if *i == eta.row {
                    v[*i] = term;
                } else {
                    v[*i] = v[*i].add(&term).ok_or(Overflow)?;
                }
            }
        }
        Ok(())
    }

    /// w := w B^-1 (row vector).
    fn btran(&self, w: &mut [S]) -> std::result::Result<(), Overflow> {
        for eta in self.etas.iter().rev() {
            let mut acc = S::zero();
            for (i, e) in &eta.entries {
                if w[*i].is_zero() {
                    continue;
                }
                let term = e.mul(&w[*i]).ok_or(Overflow)?;
                acc = acc.add(&term).ok_or(Overflow)?;
            }
            w[eta.row] = acc;
        }
        Ok(())
    }

    /// Unit row `e_r` of the current basis inverse.
    fn binv_row(&self, r: usize) -> std::result::Result<Vec<S>, Overflow> {
        let mut w = vec![S::zero(); self.m];
        w[r] = S::one();
        self.btran(&mut w)?;
        Ok(w)
    }

    fn column_in_basis_coords(&self, col: usize) -> std::result::Result<Vec<S>, Overflow> {
        let mut d = vec![S::zero(); self.m];
        if self.is_artificial(col) {
            d[col - ART_BASE] = S::one();
        } else {
            for (r, a) in &self.cols[col] {
                d[*r] = a.clone();
            }
        }
        self.ftran(&mut d)?;
        Ok(d)
    }

    /// Records the eta for a pivot on `(leave_row, d)` and updates the basic
    /// values; refactorizes when the eta file has grown too fat.
    fn pivot(
        &mut self,
        entering: usize,
        leave_row: usize,
        d: &[S],
    ) -> std::result::Result<(), Overflow> {
        let pivot_val = d[leave_row].clone();
        let theta = self.xb[leave_row].div(&pivot_val).ok_or(Overflow)?;
        let mut entries = Vec::new();
        for (i, di) in d.iter().enumerate() {
            if di.is_zero() {
                continue;
            }
            if i == leave_row {
                entries.push((i, S::one().div(&pivot_val).ok_or(Overflow)?));
            } else {
                entries.push((i, di.div(&pivot_val).ok_or(Overflow)?.neg()));
                if !theta.is_zero() {
                    let step = di.mul(&theta).ok_or(Overflow)?;
                    self.xb[i] = self.xb[i].sub(&step).ok_or(Overflow)?;
                }
            }
        }
        self.xb[leave_row] = theta;
        self.eta_nnz += entries.len();
        self.etas.push(Eta { row: leave_row, entries });
        self.basis[leave_row] = entering;
        self.pivots += 1;
        self.etas_since_refactor += 1;
        if self.etas_since_refactor >= 24
            || self.eta_nnz > self.base_eta_nnz + 12 * self.m + 384
        {
            self.refactor()?;
        }
        Ok(())
    }

    /// Rebuilds the eta file from the current basis.
    ///
    /// A symbolic pass first simulates the elimination on bit patterns and
    /// greedily picks a column/row order that keeps fill down (fewest
    /// active entries first). The numeric pass then eliminates in that
    /// order. The row-to-variable pairing may change; basic values are
    /// re-derived from the right-hand side afterwards.
    fn refactor(&mut self) -> std::result::Result<(), Overflow> {
        let m = self.m;
        let words = m.div_ceil(64);
        let old_basis: Vec<usize> = self.basis.clone();
        // Bit patterns of the basis columns.
        let mut pattern: Vec<Vec<u64>> = Vec::with_capacity(m);
        for &col in &old_basis {
            let mut bits = vec![0u64; words];
            if self.is_artificial(col) {
                let r = col - ART_BASE;
                bits[r / 64] |= 1 << (r % 64);
            } else {
                for (r, _) in &self.cols[col] {
                    bits[r / 64] |= 1 << (r % 64);
                }
            }
            pattern.push(bits);
        }
        let mut active_rows = vec![u64::MAX; words];
        if m % 64 != 0 {
            active_rows[words - 1] = (1u64 << (m % 64)) - 1;
        }
        let mut col_done = vec![false; m];
        let mut order: Vec<(usize, usize)> = Vec::with_capacity(m); // (slot, pivot row)
        for _ in 0..m {
            // Pick the active column with the fewest active entries.
            let mut best: Option<(usize, u32)> = None;
            for slot in 0..m {
                if col_done[slot] {
                    continue;
                }
                let mut cnt = 0u32;
                for w in 0..words {
                    cnt += (pattern[slot][w] & active_rows[w]).count_ones();
                }
                if cnt > 0 {
                    let better = match best {
                        None => true,
                        Some((_, b)) => cnt < b,
                    };
                    if better {
                        best = Some((slot, cnt));
                        if cnt == 1 {
                            break;
                        }
                    }
                }
            }
            let Some((slot, _)) = best else {
                return Err(Overflow); // singular in this scalar: escalate
            };
            // Pivot on its first active row (patterns are supersets, so any
            // active bit may turn out zero numerically; the numeric pass
            // rechecks and falls back to scanning).
            let mut pivot_row = usize::MAX;
            for w in 0..words {
                let bits = pattern[slot][w] & active_rows[w];
                if bits != 0 {
                    pivot_row = w * 64 + bits.trailing_zeros() as usize;
                    break;
                }
            }
            col_done[slot] = true;
            active_rows[pivot_row / 64] &= !(1 << (pivot_row % 64));
            order.push((slot, pivot_row));
            // Propagate the symbolic fill to remaining columns hitting the
            // pivot row.
            let src_pattern = pattern[slot].clone();
            for other in 0..m {
                if col_done[other] {
                    continue;
                }
                if pattern[other][pivot_row / 64] & (1 << (pivot_row % 64)) != 0 {
                    for w in 0..words {
                        pattern[other][w] |= src_pattern[w] & active_rows[w];
                    }
                }
            }
        }
        // Numeric elimination in the symbolic order.
        self.etas.clear();
        self.eta_nnz = 0;
        let mut row_taken = vec![false; m];
        let mut new_basis = vec![usize::MAX; m];
        for &(slot, want_row) in &order {
            let col = old_basis[slot];
            let mut v = vec![S::zero(); m];
            if self.is_artificial(col) {
                v[col - ART_BASE] = S::one();
            } else {
                for (r, a) in &self.cols[col] {
                    v[*r] = a.clone();
                }
            }
            self.ftran(&mut v)?;
            let row = if !row_taken[want_row] && !v[want_row].is_zero() {
                want_row
            } else {
                // Numeric cancellation voided the symbolic choice; take the
                // sparsest-row fallback.
                let mut pick: Option<usize> = None;
                for (i, vi) in v.iter().enumerate() {
                    if row_taken[i] || vi.is_zero() {
                        continue;
                    }
                    let better = match pick {
                        None => true,
                        Some(p) => self.rows_to_cols[i].len() < self.rows_to_cols[p].len(),
                    };
                    if better {
                        pick = Some(i);
                    }
                }
                match pick {
                    Some(r) => r,
                    None => return Err(Overflow),
                }
            };
            row_taken[row] = true;
            new_basis[row] = col;
            let pivot_val = v[row].clone();
            let mut entries = Vec::new();
            for (i, vi) in v.iter().enumerate() {
                if vi.is_zero() {
                    continue;
                }
                if i == row {
                    entries.push((i, S::one().div(&pivot_val).ok_or(Overflow)?));
                } else {
                    entries.push((i, vi.div(&pivot_val).ok_or(Overflow)?.neg()));
                }
            }
            self.eta_nnz += entries.len();
            self.etas.push(Eta { row, entries });
        }
        self.basis = new_basis;
        self.etas_since_refactor = 0;
        self.base_eta_nnz = self.eta_nnz;
        let mut xb = self.rhs.clone();
        self.ftran(&mut xb)?;
        self.xb = xb;
        Ok(())
    }

    /// Exact reduced cost of one column against a dual row vector.
    fn exact_reduced(
        &self,
        col: usize,
        y: &[S],
        cost_of: &dyn Fn(&Self, usize) -> S,
    ) -> std::result::Result<S, Overflow> {
        let mut acc = S::zero();
        for (r, a) in &self.cols[col] {
            if y[*r].is_zero() {
                continue;
            }
            let term = y[*r].mul(a).ok_or(Overflow)?;
            acc = acc.add(&term).ok_or(Overflow)?;
        }
        cost_of(self, col).sub(&acc).ok_or(Overflow)
    }

    /// Dual row y = c_B B^-1 for the current basis.
    fn dual_row(
        &self,
        cost_of: &dyn Fn(&Self, usize) -> S,
    ) -> std::result::Result<Vec<S>, Overflow> {
        let mut y = vec![S::zero(); self.m];
        for i in 0..self.m {
            y[i] = cost_of(self, self.basis[i]);
        }
        self.btran(&mut y)?;
        Ok(y)
    }

    /// Runs one phase with a given per-column cost closure; `allow` filters
    /// the entering candidates.
    ///
    /// Pricing works on a float shadow of the reduced costs, updated from
    /// the pivot row each iteration; it only ranks candidates. Every
    /// candidate's reduced cost is re-derived exactly before entering, and
    /// optimality is declared only after an exact pass over all columns, so
    /// float error can cost time but never correctness.
    fn optimize(
        &mut self,
        cost_of: &dyn Fn(&Self, usize) -> S,
        allow: &dyn Fn(&Self, usize) -> bool,
    ) -> std::result::Result<(), RunError> {
        let iter_cap = 2000 + 400 * (self.m + 64) + 4 * self.cols.len();
        let mut bland = false;
        let mut degenerate_streak = 0usize;
        let mut basic_flag = vec![false; self.cols.len()];
        for &b in &self.basis {
            if b < self.cols.len() {
                basic_flag[b] = true;
            }
        }
        let mut y = self.dual_row(cost_of).map_err(|_| RunError::Overflow)?;
        let mut shadow: Vec<f64> = Vec::with_capacity(self.cols.len());
        for col in 0..self.cols.len() {
            let r = self
                .exact_reduced(col, &y, cost_of)
                .map_err(|_| RunError::Overflow)?;
            shadow.push(r.to_f64());
        }
        // Devex reference weights; like the shadow prices these only rank
        // candidates.
        let mut weight = vec![1.0f64; self.cols.len()];
        let mut pivots_since_reset = 0usize;
        loop {
            if self.pivots > iter_cap {
                return Err(RunError::Error(Error::Resource {
                    what: "simplex pivots",
                    cap: iter_cap.to_string(),
                    detail: "pivot cap exceeded; likely a degeneracy cycle".into(),
                }));
            }
            // Candidate selection. Bland's rule scans exactly in index
            // order; the normal path ranks by devex score and verifies
            // exactly, demoting any column the shadow got wrong.
            let mut entering: Option<(usize, S)> = None;
            if bland {
                for col in 0..self.cols.len() {
                    if basic_flag[col] || !allow(self, col) {
                        continue;
                    }
                    let r = self
                        .exact_reduced(col, &y, cost_of)
                        .map_err(|_| RunError::Overflow)?;
                    if Scalar::signum(&r) < 0 {
                        entering = Some((col, r));
                        break;
                    }
                }
            } else {
                loop {
                    let mut best: Option<(usize, f64)> = None;
                    for (col, rf) in shadow.iter().enumerate() {
                        if *rf >= -1e-9 || basic_flag[col] || !allow(self, col) {
                            continue;
                        }
                        let score = rf * rf / weight[col];
                        if best.map_or(true, |(_, b)| score > b) {
                            best = Some((col, score));
                        }
                    }
                    let Some((col, _)) = best else {
                        break;
                    };
                    let r = self
                        .exact_reduced(col, &y, cost_of)
                        .map_err(|_| RunError::Overflow)?;
                    if Scalar::signum(&r) < 0 {
                        entering = Some((col, r));
                        break;
                    }
                    // The shadow lied; correct it and try the next one.
                    shadow[col] = r.to_f64().max(0.0);
                }
                if entering.is_none() {
                    // Exact certification sweep before declaring optimality.
                    let mut best: Option<(usize, S)> = None;
                    for col in 0..self.cols.len() {
                        if basic_flag[col] || !allow(self, col) {
                            continue;
                        }
                        let r = self
                            .exact_reduced(col, &y, cost_of)
                            .map_err(|_| RunError::Overflow)?;
                        shadow[col] = r.to_f64();
                        if Scalar::signum(&r) < 0 {
                            let better = match &best {
                                None => true,
                                Some((_, b)) => r.cmp_exact(b) == Ordering::Less,
                            };
                            if better {
                                best = Some((col, r));
                            }
                        }
                    }
                    entering = best;
                }
            }
            let Some((entering, exact_r)) = entering else {
                return Ok(());
            };
            let d = self
                .column_in_basis_coords(entering)
                .map_err(|_| RunError::Overflow)?;
            let mut leave: Option<(usize, S)> = None;
            for i in 0..self.m {
                if Scalar::signum(&d[i]) <= 0 {
                    continue;
                }
                let ratio = self.xb[i].div(&d[i]).ok_or(RunError::Overflow)?;
                let better = match &leave {
                    None => true,
                    Some((best_row, best)) => match ratio.cmp_exact(best) {
                        Ordering::Less => true,
                        Ordering::Greater => false,
                        Ordering::Equal => {
                            if bland {
                                self.basis[i] < self.basis[*best_row]
                            } else {
                                // Favor the largest pivot element on ties to
                                // keep transformed entries small.
                                match d[i]
                                    .to_f64()
                                    .abs()
                                    .partial_cmp(&d[*best_row].to_f64().abs())
                                {
                                    Some(Ordering::Greater) => true,
                                    Some(Ordering::Less) => false,
                                    _ => i < *best_row,
                                }
                            }
                        }
                    },
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let Some((leave_row, ratio)) = leave else {
                return Err(RunError::Error(Error::Internal(
                    "unbounded linear program".into(),
                )));
            };
            if ratio.is_zero() {
                degenerate_streak += 1;
                if degenerate_streak > 4 * (self.m + 16) {
                    bland = true;
                }
            } else {
                degenerate_streak = 0;
            }
            // Float shadow update from the pivot row of the pre-pivot
            // inverse; the devex recurrence rides along.
            let pivot_binv_row = self.binv_row(leave_row).map_err(|_| RunError::Overflow)?;
            let d_leave = d[leave_row].clone();
            let factor_f = exact_r.to_f64() / d[leave_row].to_f64();
            let leaving_col = self.basis[leave_row];
            let alpha_q = d[leave_row].to_f64();
            let gamma_q = weight[entering].max(1.0);
            pivots_since_reset += 1;
            if pivots_since_reset > self.m + 64 {
                for g in weight.iter_mut() {
                    *g = 1.0;
                }
                pivots_since_reset = 0;
            }
            self.pivot(entering, leave_row, &d).map_err(|_| RunError::Overflow)?;
            let prow_f: Vec<f64> = pivot_binv_row.iter().map(|v| v.to_f64()).collect();
            for (i, pf) in prow_f.iter().enumerate() {
                if *pf == 0.0 {
                    continue;
                }
                for (col, af) in &self.rows_to_cols_f[i] {
                    let w = pf * af;
                    let a = w / alpha_q;
                    let cand = a * a * gamma_q;
                    if cand > weight[*col] {
                        weight[*col] = cand;
                    }
                    shadow[*col] -= factor_f * w;
                }
            }
            shadow[entering] = 0.0;
            basic_flag[entering] = true;
            if leaving_col < self.cols.len() {
                basic_flag[leaving_col] = false;
                weight[leaving_col] = (gamma_q / (alpha_q * alpha_q)).max(1.0);
            }
            // Dual update: y' = y + (r_q / alpha_q) * (pre-pivot row p of
            // the inverse); row reordering at refactorization does not
            // disturb y since it is indexed by constraint, not basis slot.
            let dual_step = exact_r.div(&d_leave).ok_or(RunError::Overflow)?;
            for (j, pr) in pivot_binv_row.iter().enumerate() {
                if pr.is_zero() {
                    continue;
                }
                let term = dual_step.mul(pr).ok_or(RunError::Overflow)?;
                y[j] = y[j].add(&term).ok_or(RunError::Overflow)?;
            }
        }
    }

    fn solve(&mut self) -> std::result::Result<LpSolution, RunError> {
        self.primal_solve()?;
        self.extract()
    }

    fn primal_solve(&mut self) -> std::result::Result<(), RunError> {
        // Phase 1: drive artificials to zero.
        if self.any_artificial {
            let cost = |run: &Self, col: usize| {
                if run.is_artificial(col) {
                    S::one()
                } else {
                    S::zero()
                }
            };
            let allow = |run: &Self, col: usize| !run.is_artificial(col);
            self.optimize(&cost, &allow)?;
            let mut infeasibility = S::zero();
            for i in 0..self.m {
                if self.is_artificial(self.basis[i]) {
                    infeasibility = infeasibility.add(&self.xb[i]).ok_or(RunError::Overflow)?;
                }
            }
            if !infeasibility.is_zero() {
                return Err(RunError::Error(Error::Internal(format!(
                    "linear program infeasible (phase-1 value {:?})",
                    infeasibility.to_rat()
                ))));
            }
            self.drive_out_artificials()?;
        }
        // Phase 2.
        self.optimize(&Self::phase2_cost, &|run: &Self, col: usize| !run.is_artificial(col))
    }

    fn phase2_cost(&self, col: usize) -> S {
        if col < self.obj.len() {
            self.obj[col].clone()
        } else {
            S::zero()
        }
    }

    fn extract(&self) -> std::result::Result<LpSolution, RunError> {
        let mut x = vec![<Rat as Zero>::zero(); self.num_struct];
        for i in 0..self.m {
            let b = self.basis[i];
            if b < self.num_struct {
                if Scalar::signum(&self.xb[i]) < 0 {
                    return Err(RunError::Error(Error::Internal(
                        "negative basic value at optimum".into(),
                    )));
                }
                x[b] = self.xb[i].to_rat();
            }
        }
        let mut objective = <Rat as Zero>::zero();
        for (j, val) in x.iter().enumerate() {
            if !<Rat as Zero>::is_zero(val) {
                objective += self.obj[j].to_rat() * val;
            }
        }
        Ok(LpSolution { x, objective, pivots: self.pivots })
    }

    /// Appends violated `>=` rows. Each gets a fresh surplus column
    /// (nonbasic) and a basic artificial carrying the infeasibility, which
    /// the next primal phase-1 run drives back to zero from the warm basis.
    fn append_ge_rows(&mut self, rows: &[LpRow]) -> std::result::Result<(), Overflow> {
        let base_m = self.m;
        for (off, row) in rows.iter().enumerate() {
            debug_assert_eq!(row.kind, RowKind::Ge);
            let i = base_m + off;
            let r = S::from_rat(&row.rhs).ok_or(Overflow)?;
            self.rhs.push(r);
            self.rows_to_cols.push(Vec::new());
            self.rows_to_cols_f.push(Vec::new());
            for (col, coeff) in &row.coeffs {
                let c = S::from_rat(coeff).ok_or(Overflow)?;
                self.cols[*col].push((i, c.clone()));
                self.rows_to_cols[i].push((*col, c.clone()));
                self.rows_to_cols_f[i].push((*col, c.to_f64()));
            }
            let slack = self.cols.len();
            self.cols.push(vec![(i, S::one().neg())]);
            self.rows_to_cols[i].push((slack, S::one().neg()));
            self.rows_to_cols_f[i].push((slack, -1.0));
            self.obj.push(S::zero());
            self.basis.push(ART_BASE + i);
            self.xb.push(S::zero());
            self.m += 1;
            self.any_artificial = true;
        }
        self.refactor()
    }

    /// Drops rows whose basic variable is their own single-entry slack;
    /// the remaining columns still form a basis for the remaining rows.
    fn drop_rows(&mut self, drop: &[usize]) -> std::result::Result<(), Overflow> {
        let mut is_dropped = vec![false; self.m];
        for &r in drop {
            debug_assert!(self.row_is_droppable(r));
            is_dropped[r] = true;
        }
        let mut new_index = vec![usize::MAX; self.m];
        let mut next = 0;
        for r in 0..self.m {
            if !is_dropped[r] {
                new_index[r] = next;
                next += 1;
            }
        }
        // Slack columns of dropped rows become dead; remap artificials.
        let mut dead_col = vec![false; self.cols.len()];
        for r in drop {
            if let Some(&b) = self.basis.get(*r) {
                if b < self.cols.len() {
                    dead_col[b] = true;
                }
            }
        }
        for col in self.cols.iter_mut() {
            col.retain(|(r, _)| !is_dropped[*r]);
            for (r, _) in col.iter_mut() {
                *r = new_index[*r];
            }
        }
        let keep =
            |v: &mut Vec<S>| {
                let mut i = 0;
                v.retain(|_| {
                    let k = !is_dropped[i];
                    i += 1;
                    k
                });
            };
        keep(&mut self.rhs);
        keep(&mut self.xb);
        let mut i = 0;
        self.basis.retain(|_| {
            let k = !is_dropped[i];
            i += 1;
            k
        });
        for b in self.basis.iter_mut() {
            if *b >= ART_BASE {
                let old_row = *b - ART_BASE;
                debug_assert!(!is_dropped[old_row]);
                *b = ART_BASE + new_index[old_row];
            }
        }
        self.m -= drop.len();
        self.rows_to_cols = vec![Vec::new(); self.m];
        self.rows_to_cols_f = vec![Vec::new(); self.m];
        for (j, col) in self.cols.iter().enumerate() {
            if dead_col[j] {
                debug_assert!(col.is_empty());
                continue;
            }
            for (r, a) in col {
                self.rows_to_cols[*r].push((j, a.clone()));
                self.rows_to_cols_f[*r].push((j, a.to_f64()));
            }
        }
        let _ = dead_col;
        self.refactor()
    }

    /// Installs an externally proposed basis (for example from the float
    /// twin), refactorizes, and reports exact primal feasibility. Fails if
    /// the proposal is singular in exact arithmetic.
    fn install_basis(&mut self, basis: Vec<usize>) -> std::result::Result<bool, Overflow> {
        debug_assert_eq!(basis.len(), self.m);
        self.basis = basis;
        self.refactor()?;
        Ok(self.xb.iter().all(|v| Scalar::signum(v) >= 0))
    }

    fn row_is_droppable(&self, row: usize) -> bool {
        let b = self.basis[row];
        b < self.cols.len() && self.cols[b].len() == 1 && self.cols[b][0].0 == row
    }


    /// Pivots basic zero-level artificials out wherever a structural or
    /// slack column has a nonzero entry in their row; rows where none does
    /// are redundant and keep their artificial pinned at zero.
    fn drive_out_artificials(&mut self) -> std::result::Result<(), RunError> {
        for row in 0..self.m {
            if !self.is_artificial(self.basis[row]) {
                continue;
            }
            debug_assert!(self.xb[row].is_zero());
            let binv_row = self.binv_row(row).map_err(|_| RunError::Overflow)?;
            let mut replacement = None;
            for col in 0..self.cols.len() {
                let mut acc = S::zero();
                for (r, a) in &self.cols[col] {
                    if binv_row[*r].is_zero() {
                        continue;
                    }
                    let term = binv_row[*r].mul(a).ok_or(RunError::Overflow)?;
                    acc = acc.add(&term).ok_or(RunError::Overflow)?;
                }
                if !acc.is_zero() {
                    replacement = Some(col);
                    break;
                }
            }
            if let Some(col) = replacement {
                let d = self
                    .column_in_basis_coords(col)
                    .map_err(|_| RunError::Overflow)?;
                self.pivot(col, row, &d).map_err(|_| RunError::Overflow)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{rat_frac, rat_int};

    fn row(coeffs: &[(usize, i64)], kind: RowKind, rhs: i64) -> LpRow {
        LpRow {
            coeffs: coeffs.iter().map(|&(c, v)| (c, rat_int(v))).collect(),
            kind,
            rhs: rat_int(rhs),
        }
    }

    #[test]
    fn solves_small_equality_system() {
        // min x0 + 2 x1 s.t. x0 + x1 = 3, x0 - x1 = 1
        let p = LpProblem {
            num_cols: 2,
            objective: vec![rat_int(1), rat_int(2)],
            rows: vec![
                row(&[(0, 1), (1, 1)], RowKind::Eq, 3),
                row(&[(0, 1), (1, -1)], RowKind::Eq, 1),
            ],
        };
        let sol = solve(&p).unwrap();
        assert_eq!(sol.x, vec![rat_int(2), rat_int(1)]);
        assert_eq!(sol.objective, rat_int(4));
    }

    #[test]
    fn respects_inequalities_and_ties() {
        // min x0 + x1 s.t. x0 + 2 x1 >= 4, 2 x0 + x1 >= 4
        let p = LpProblem {
            num_cols: 2,
            objective: vec![rat_int(1), rat_int(1)],
            rows: vec![
                row(&[(0, 1), (1, 2)], RowKind::Ge, 4),
                row(&[(0, 2), (1, 1)], RowKind::Ge, 4),
            ],
        };
        let sol = solve(&p).unwrap();
        assert_eq!(sol.objective, rat_frac(8, 3));
        assert_eq!(sol.x, vec![rat_frac(4, 3), rat_frac(4, 3)]);
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        // Second equality is a copy of the first.
        let p = LpProblem {
            num_cols: 2,
            objective: vec![rat_int(3), rat_int(1)],
            rows: vec![
                row(&[(0, 1), (1, 1)], RowKind::Eq, 2),
                row(&[(0, 1), (1, 1)], RowKind::Eq, 2),
                row(&[(0, 1), (1, -1)], RowKind::Ge, 0),
            ],
        };
        let sol = solve(&p).unwrap();
        assert_eq!(sol.x, vec![rat_int(1), rat_int(1)]);
        assert_eq!(sol.objective, rat_int(4));
    }

    #[test]
    fn infeasible_system_is_reported() {
        let p = LpProblem {
            num_cols: 1,
            objective: vec![rat_int(1)],
            rows: vec![row(&[(0, 1)], RowKind::Eq, 1), row(&[(0, 1)], RowKind::Eq, 2)],
        };
        assert!(matches!(solve(&p), Err(Error::Internal(_))));
    }

    #[test]
    fn fractional_data_stays_exact() {
        // min x0 s.t. (2/3) x0 >= 5/7  ->  x0 = 15/14
        let p = LpProblem {
            num_cols: 1,
            objective: vec![rat_int(1)],
            rows: vec![LpRow {
                coeffs: vec![(0, rat_frac(2, 3))],
                kind: RowKind::Ge,
                rhs: rat_frac(5, 7),
            }],
        };
        let sol = solve(&p).unwrap();
        assert_eq!(sol.x[0], rat_frac(15, 14));
    }

    #[test]
    fn zero_rhs_ge_rows_avoid_artificials_and_solve() {
        // min 2 x0 + x1 s.t. x0 - x1 >= 0, x0 + x1 = 2
        let p = LpProblem {
            num_cols: 2,
            objective: vec![rat_int(2), rat_int(1)],
            rows: vec![
                row(&[(0, 1), (1, -1)], RowKind::Ge, 0),
                row(&[(0, 1), (1, 1)], RowKind::Eq, 2),
            ],
        };
        let sol = solve(&p).unwrap();
        assert_eq!(sol.x, vec![rat_int(1), rat_int(1)]);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Classic degeneracy: many tight constraints at the optimum.
        let p = LpProblem {
            num_cols: 3,
            objective: vec![rat_int(-1), rat_int(-1), rat_int(-1)],
            rows: vec![
                row(&[(0, 1), (1, 1)], RowKind::Ge, 0),
                row(&[(1, 1), (2, 1)], RowKind::Ge, 0),
                row(&[(0, 1), (2, 1)], RowKind::Ge, 0),
                row(&[(0, 1), (1, 1), (2, 1)], RowKind::Eq, 3),
                row(&[(0, 1), (1, -1)], RowKind::Ge, 0),
                row(&[(1, 1), (2, -1)], RowKind::Ge, 0),
            ],
        };
        let sol = solve(&p).unwrap();
        assert_eq!(sol.objective, rat_int(-3));
    }

    #[test]
    fn many_pivots_survive_refactorization() {
        // A chain of inequalities that forces a long pivot sequence
        // crossing several refactorizations.
        let n = 70usize;
        let mut rows = Vec::new();
        for i in 0..n {
            let mut coeffs = vec![(i, rat_int(2))];
            if i > 0 {
                coeffs.push((i - 1, rat_int(1)));
            }
            rows.push(LpRow { coeffs, kind: RowKind::Ge, rhs: rat_int(3) });
        }
        let p = LpProblem { num_cols: n, objective: vec![rat_int(1); n], rows };
        let sol = solve(&p).unwrap();
        for i in 0..n {
            let mut lhs = sol.x[i].clone() * rat_int(2);
            if i > 0 {
                lhs += sol.x[i - 1].clone();
            }
            assert!(lhs >= rat_int(3));
        }
        assert!(sol.pivots >= n / 2);
    }
}
