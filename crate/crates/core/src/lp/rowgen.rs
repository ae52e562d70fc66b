//! Bounded dual simplex with lazy row generation.
//!
//! The capacity rows of the ordering LP are numerous (`4NM` under OCS) but
//! only a few per coflow bind at the optimum. The solver starts with no rows
//! (every completion variable at its release, every ordering variable at a
//! bound, which is dual feasible because all costs are non-negative), adds
//! the most violated rows of each coflow, re-optimises with dual simplex
//! pivots and repeats until no row is violated. Rows that became slack are
//! dropped between rounds and may come back later.
//!
//! Pivoting uses dual steepest-edge pricing and a bound-flipping ratio test
//! over a sparse LU factorisation with product-form updates.

use std::collections::BTreeMap;

use super::lu::BasisFactor;
use super::{LpError, LpSolution, LpSolver, OrderingLp, ReducedLp};

#[derive(Debug, Clone)]
pub struct RowGenSimplex {
    pub max_iterations: usize,
    /// Product-form updates allowed before refactorising.
    pub refactor_every: usize,
    /// Relative violation above which a row is added.
    pub generation_tol: f64,
    /// Relative slack above which an active row is dropped between rounds.
    pub drop_margin: f64,
    /// Most violated rows added per coflow and round.
    pub rows_per_round: usize,
}

impl Default for RowGenSimplex {
    fn default() -> Self {
        Self {
            max_iterations: 5_000_000,
            refactor_every: 100,
            rows_per_round: 4,
            generation_tol: 1e-10,
            drop_margin: 1e-4,
        }
    }
}

impl LpSolver for RowGenSimplex {
    fn solve(&self, lp: &OrderingLp) -> Result<LpSolution, LpError> {
        if lp.num_coflows == 0 {
            return Ok(LpSolution::empty());
        }
        let red = ReducedLp::from_lp(lp)?;
        let mut ds = DualSimplex::new(&red);
        let mut is_active = vec![false; red.rows.len()];
        loop {
            ds.optimize(self)?;
            let z = ds.structural_values();
            let per_owner = self.rows_per_round;
            let mut by_owner: BTreeMap<usize, Vec<(f64, usize)>> = BTreeMap::new();
            for (ri, row) in red.rows.iter().enumerate() {
                if is_active[ri] {
                    continue;
                }
                let act: f64 = row.cols.iter().zip(&row.vals).map(|(&j, &v)| v * z[j]).sum();
                let viol = row.rhs - act;
                if viol > self.generation_tol * (1.0 + row.rhs.abs()) {
                    let key = row.owner.unwrap_or(usize::MAX - ri);
                    by_owner.entry(key).or_default().push((viol, ri));
                }
            }
            if by_owner.is_empty() {
                break;
            }
            let mut batch: Vec<usize> = Vec::new();
            for (_, mut v) in by_owner {
                v.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                batch.extend(v.iter().take(per_owner).map(|&(_, ri)| ri));
            }
            for ri in ds.drop_slack_rows(self.drop_margin)? {
                is_active[ri] = false;
            }
            batch.sort_unstable();
            for &ri in &batch {
                is_active[ri] = true;
            }
            ds.add_rows(&batch)?;
        }
        ds.refactor()?;
        let z = ds.structural_values();
        let mut duals = vec![0.0; red.rows.len()];
        for (k, u) in ds.row_duals().into_iter().enumerate() {
            duals[ds.active[k]] = u;
        }
        Ok(red.finish(lp, &z, &duals, ds.iterations))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Status {
    Basic,
    Lower,
    Upper,
}

struct DualSimplex<'a> {
    red: &'a ReducedLp,
    nstruct: usize,
    /// Active rows as indices into `red.rows`; position = row number.
    active: Vec<usize>,
    /// Per structural column: `(row number, coefficient)`.
    col_entries: Vec<Vec<(usize, f64)>>,
    basis: Vec<usize>,
    status: Vec<Status>,
    x: Vec<f64>,
    d: Vec<f64>,
    factor: BasisFactor,
    /// Dual steepest-edge weights, one per basis position.
    weights: Vec<f64>,
    iterations: usize,
    alpha: Vec<f64>,
    /// Indices where `alpha` may be nonzero, without repeats.
    alpha_nz: Vec<usize>,
    alpha_mark: Vec<bool>,
}

const PIVOT_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PRIMAL_TOL: f64 = 1e-9;

impl<'a> DualSimplex<'a> {
    fn new(red: &'a ReducedLp) -> Self {
        let n = red.num_vars();
        Self {
            red,
            nstruct: n,
            active: Vec::new(),
            col_entries: vec![Vec::new(); n],
            basis: Vec::new(),
            status: vec![Status::Lower; n],
            x: red.lower.clone(),
            d: red.costs.clone(),
            factor: BasisFactor::default(),
            weights: Vec::new(),
            iterations: 0,
            alpha: vec![0.0; n],
            alpha_nz: Vec::new(),
            alpha_mark: vec![false; n],
        }
    }

    fn r(&self) -> usize {
        self.active.len()
    }

    fn lower(&self, v: usize) -> f64 {
        if v < self.nstruct {
            self.red.lower[v]
        } else {
            0.0
        }
    }

    fn upper(&self, v: usize) -> f64 {
        if v < self.nstruct {
            self.red.upper[v]
        } else {
            f64::INFINITY
        }
    }

    fn cost(&self, v: usize) -> f64 {
        if v < self.nstruct {
            self.red.costs[v]
        } else {
            0.0
        }
    }

    fn structural_values(&self) -> Vec<f64> {
        self.x[..self.nstruct].to_vec()
    }

    /// Row-indexed column of variable `v`.
    fn scatter_column(&self, v: usize, out: &mut [f64]) {
        if v < self.nstruct {
            for &(k, a) in &self.col_entries[v] {
                out[k] += a;
            }
        } else {
            out[v - self.nstruct] -= 1.0;
        }
    }

    /// Appends rows with their slacks basic. Each new row's steepest-edge
    /// weight is the squared norm of `[a_B^T B^-1, -1]`.
    fn add_rows(&mut self, batch: &[usize]) -> Result<(), LpError> {
        self.clear_alpha();
        let r = self.r();
        let mut pos_of = vec![usize::MAX; self.nstruct];
        for (p, &v) in self.basis.iter().enumerate() {
            if v < self.nstruct {
                pos_of[v] = p;
            }
        }
        let mut new_weights = Vec::with_capacity(batch.len());
        for &ri in batch {
            let row = &self.red.rows[ri];
            let mut c = vec![0.0; r];
            for (&j, &v) in row.cols.iter().zip(&row.vals) {
                if pos_of[j] != usize::MAX {
                    c[pos_of[j]] = v;
                }
            }
            if r > 0 && c.iter().any(|&v| v != 0.0) {
                self.factor.btran(&mut c);
            }
            new_weights.push(1.0 + c.iter().map(|v| v * v).sum::<f64>());
        }
        for (t, &ri) in batch.iter().enumerate() {
            let k = r + t;
            let row = &self.red.rows[ri];
            for (&j, &v) in row.cols.iter().zip(&row.vals) {
                self.col_entries[j].push((k, v));
            }
            let act: f64 = row.cols.iter().zip(&row.vals).map(|(&j, &v)| v * self.x[j]).sum();
            self.active.push(ri);
            self.basis.push(self.nstruct + k);
            self.status.push(Status::Basic);
            self.x.push(act - row.rhs);
            self.d.push(0.0);
            self.alpha.push(0.0);
        }
        self.weights.extend(new_weights);
        self.refactor()
    }

    /// Removes rows whose slack is basic and strictly positive. Their
    /// multipliers are zero, so the current basis stays optimal. Returns
    /// the removed rows as indices into `red.rows`.
    fn drop_slack_rows(&mut self, margin: f64) -> Result<Vec<usize>, LpError> {
        self.clear_alpha();
        let r = self.r();
        let mut drop_row = vec![false; r];
        let mut drop_pos = vec![false; r];
        for (p, &v) in self.basis.iter().enumerate() {
            if v >= self.nstruct {
                let k = v - self.nstruct;
                let rhs = self.red.rows[self.active[k]].rhs;
                if self.x[v] > margin * (1.0 + rhs.abs()) {
                    drop_row[k] = true;
                    drop_pos[p] = true;
                }
            }
        }
        if !drop_row.iter().any(|&b| b) {
            return Ok(Vec::new());
        }
        let keep_k: Vec<usize> = (0..r).filter(|&k| !drop_row[k]).collect();
        let mut new_index = vec![usize::MAX; r];
        for (nk, &k) in keep_k.iter().enumerate() {
            new_index[k] = nk;
        }
        let ns = self.nstruct;
        let remap = |v: usize| if v < ns { v } else { ns + new_index[v - ns] };
        let keep_p: Vec<usize> = (0..r).filter(|&p| !drop_pos[p]).collect();
        self.basis = keep_p.iter().map(|&p| remap(self.basis[p])).collect();
        // Weights lose the dropped columns of B^-1; kept as approximations.
        self.weights = keep_p.iter().map(|&p| self.weights[p]).collect();
        let removed: Vec<usize> = (0..r).filter(|&k| drop_row[k]).map(|k| self.active[k]).collect();
        self.active = keep_k.iter().map(|&k| self.active[k]).collect();
        for v in [&mut self.x, &mut self.d] {
            let tail: Vec<f64> = keep_k.iter().map(|&k| v[ns + k]).collect();
            v.truncate(ns);
            v.extend(tail);
        }
        let tail: Vec<Status> = keep_k.iter().map(|&k| self.status[ns + k]).collect();
        self.status.truncate(ns);
        self.status.extend(tail);
        self.alpha.truncate(ns + keep_k.len());
        for e in self.col_entries.iter_mut() {
            e.clear();
        }
        for (k, &ri) in self.active.iter().enumerate() {
            let row = &self.red.rows[ri];
            for (&j, &v) in row.cols.iter().zip(&row.vals) {
                self.col_entries[j].push((k, v));
            }
        }
        self.refactor()?;
        Ok(removed)
    }

    /// Row `pos` of `B^-1` (row-indexed).
    fn btran_unit(&self, pos: usize) -> Vec<f64> {
        let mut rho = vec![0.0; self.r()];
        rho[pos] = 1.0;
        self.factor.btran(&mut rho);
        rho
    }

    fn clear_alpha(&mut self) {
        for &j in &self.alpha_nz {
            self.alpha[j] = 0.0;
            if j < self.nstruct {
                self.alpha_mark[j] = false;
            }
        }
        self.alpha_nz.clear();
    }

    /// Fills `self.alpha` with `rho^T A` for all variables.
    fn pivot_row(&mut self, rho: &[f64]) {
        self.clear_alpha();
        for (k, &rk) in rho.iter().enumerate() {
            if rk == 0.0 {
                continue;
            }
            let row = &self.red.rows[self.active[k]];
            for (&j, &v) in row.cols.iter().zip(&row.vals) {
                if !self.alpha_mark[j] {
                    self.alpha_mark[j] = true;
                    self.alpha_nz.push(j);
                }
                self.alpha[j] += rk * v;
            }
            self.alpha[self.nstruct + k] = -rk;
            self.alpha_nz.push(self.nstruct + k);
        }
    }

    fn infeasibility(&self, v: usize) -> f64 {
        let lo = self.lower(v);
        let hi = self.upper(v);
        let xv = self.x[v];
        if xv < lo - PRIMAL_TOL * (1.0 + lo.abs()) {
            xv - lo
        } else if xv > hi + PRIMAL_TOL * (1.0 + hi.abs()) {
            xv - hi
        } else {
            0.0
        }
    }

    fn optimize(&mut self, cfg: &RowGenSimplex) -> Result<(), LpError> {
        let mut confirmed = false;
        loop {
            if self.iterations >= cfg.max_iterations {
                return Err(LpError::NumericalFailure(format!(
                    "iteration limit {} reached",
                    cfg.max_iterations
                )));
            }
            let mut leave = None;
            let mut best = 0.0;
            for (p, &v) in self.basis.iter().enumerate() {
                let inf = self.infeasibility(v);
                if inf != 0.0 {
                    let score = inf * inf / self.weights[p].max(1e-12);
                    if score > best {
                        best = score;
                        leave = Some((p, inf));
                    }
                }
            }
            let Some((pos, delta)) = leave else {
                if confirmed || self.factor.num_etas() == 0 {
                    return Ok(());
                }
                // Confirm optimality on fresh values before leaving.
                self.refactor()?;
                confirmed = true;
                continue;
            };
            confirmed = false;
            let rho = self.btran_unit(pos);
            self.pivot_row(&rho);
            let increase = delta < 0.0;
            let Some((q, flips)) = self.ratio_test(increase, delta.abs()) else {
                return Err(LpError::Infeasible);
            };
            let r = self.r();
            let mut w = vec![0.0; r];
            self.scatter_column(q, &mut w);
            self.factor.ftran(&mut w);
            let alpha_q = w[pos];
            if (alpha_q - self.alpha[q]).abs() > 1e-7 * (1.0 + alpha_q.abs()) {
                if self.factor.num_etas() == 0 {
                    return Err(LpError::NumericalFailure("inconsistent pivot element".into()));
                }
                self.refactor()?;
                continue;
            }
            if !flips.is_empty() {
                self.apply_flips(&flips);
            }
            let v = self.basis[pos];
            let bound = if increase { self.lower(v) } else { self.upper(v) };
            let step = (self.x[v] - bound) / alpha_q;
            for (p, &wp) in w.iter().enumerate() {
                if wp != 0.0 {
                    let b = self.basis[p];
                    self.x[b] -= wp * step;
                }
            }
            self.x[q] += step;
            self.x[v] = bound;

            let theta = self.d[q] / alpha_q;
            if theta != 0.0 {
                for &j in &self.alpha_nz {
                    if self.status[j] != Status::Basic {
                        self.d[j] -= theta * self.alpha[j];
                    }
                }
            }
            self.d[v] = -theta;
            self.d[q] = 0.0;

            // Steepest-edge update needs tau = B^-1 rho.
            let rho_norm: f64 = rho.iter().map(|v| v * v).sum();
            let mut tau = rho;
            self.factor.ftran(&mut tau);
            for (p, &wp) in w.iter().enumerate() {
                if p == pos || wp == 0.0 {
                    continue;
                }
                let ratio = wp / alpha_q;
                let nw = self.weights[p] - 2.0 * ratio * tau[p] + ratio * ratio * rho_norm;
                self.weights[p] = nw.max(1e-10);
            }
            self.weights[pos] = (rho_norm / (alpha_q * alpha_q)).max(1e-12);

            self.factor.update(pos, &w);
            self.basis[pos] = q;
            self.status[q] = Status::Basic;
            self.status[v] = if increase { Status::Lower } else { Status::Upper };
            self.iterations += 1;
            if self.factor.num_etas() >= cfg.refactor_every {
                self.refactor()?;
            }
        }
    }

    /// Moves boxed nonbasic variables to their opposite bound and updates
    /// the basic values accordingly.
    fn apply_flips(&mut self, flips: &[usize]) {
        let r = self.r();
        let mut shift = vec![0.0; r];
        for &j in flips {
            let (lo, hi) = (self.lower(j), self.upper(j));
            let (to, status) = match self.status[j] {
                Status::Lower => (hi, Status::Upper),
                _ => (lo, Status::Lower),
            };
            let dx = to - self.x[j];
            self.x[j] = to;
            self.status[j] = status;
            if j < self.nstruct {
                for &(k, a) in &self.col_entries[j] {
                    shift[k] += a * dx;
                }
            } else {
                shift[j - self.nstruct] -= dx;
            }
        }
        self.factor.ftran(&mut shift);
        for (p, &s) in shift.iter().enumerate() {
            if s != 0.0 {
                let b = self.basis[p];
                self.x[b] -= s;
            }
        }
    }

    /// Bound-flipping ratio test with a Harris pass on the final segment.
    ///
    /// `increase` is true when the leaving basic variable sits below its
    /// lower bound; `slope` is its bound violation. Boxed candidates whose
    /// breakpoint can be passed while the dual objective still improves are
    /// returned as flips. `None` means the dual is unbounded.
    fn ratio_test(&self, increase: bool, slope: f64) -> Option<(usize, Vec<usize>)> {
        // (ratio, index, |alpha|, sign-corrected reduced cost)
        let mut cands: Vec<(f64, usize, f64, f64)> = Vec::new();
        // No step can pass the Harris bound of an unflippable candidate.
        let mut hard_bound = f64::INFINITY;
        for &j in &self.alpha_nz {
            let a = self.alpha[j];
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let dj = match self.status[j] {
                Status::Basic => continue,
                Status::Lower => {
                    let ok = self.upper(j) > self.lower(j) && if increase { a < 0.0 } else { a > 0.0 };
                    if !ok {
                        continue;
                    }
                    self.d[j].max(0.0)
                }
                Status::Upper => {
                    let ok = if increase { a > 0.0 } else { a < 0.0 };
                    if !ok {
                        continue;
                    }
                    (-self.d[j]).max(0.0)
                }
            };
            if !(self.upper(j) - self.lower(j)).is_finite() {
                hard_bound = hard_bound.min((dj + DUAL_TOL) / a.abs());
            }
            cands.push((dj / a.abs(), j, a.abs(), dj));
        }
        cands.retain(|c| c.0 <= hard_bound);
        cands.sort_unstable_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let mut slope = slope;
        let mut start = 0;
        while start < cands.len() {
            let (_, j, a, _) = cands[start];
            let range = self.upper(j) - self.lower(j);
            if range.is_finite() && slope - a * range > 0.0 {
                slope -= a * range;
                start += 1;
            } else {
                break;
            }
        }
        if start == cands.len() {
            return None;
        }
        let rest = &cands[start..];
        let bound = rest
            .iter()
            .map(|&(_, _, a, dj)| (dj + DUAL_TOL) / a)
            .fold(f64::INFINITY, f64::min);
        let mut pick = rest[0];
        for &c in rest {
            if c.0 > bound {
                break;
            }
            if c.2 > pick.2 {
                pick = c;
            }
        }
        let flips = cands[..start].iter().map(|c| c.1).collect();
        Some((pick.1, flips))
    }

    /// Refactorises the basis and recomputes primal values and reduced
    /// costs from scratch.
    fn refactor(&mut self) -> Result<(), LpError> {
        let r = self.r();
        if r == 0 {
            self.factor = BasisFactor::default();
            self.d = self.red.costs.clone();
            return Ok(());
        }
        let cols: Vec<Vec<(usize, f64)>> = self
            .basis
            .iter()
            .map(|&v| {
                if v < self.nstruct {
                    self.col_entries[v].clone()
                } else {
                    vec![(v - self.nstruct, -1.0)]
                }
            })
            .collect();
        self.factor = BasisFactor::factor(r, &cols)
            .map_err(|_| LpError::NumericalFailure("singular basis".into()))?;

        // Primal values: B x_B = rhs - N x_N.
        let mut resid = vec![0.0; r];
        for (k, &ri) in self.active.iter().enumerate() {
            let row = &self.red.rows[ri];
            let mut s = row.rhs;
            for (&j, &v) in row.cols.iter().zip(&row.vals) {
                if self.status[j] != Status::Basic {
                    s -= v * self.x[j];
                }
            }
            let slack = self.nstruct + k;
            if self.status[slack] != Status::Basic {
                s += self.x[slack];
            }
            resid[k] = s;
        }
        self.factor.ftran(&mut resid);
        for (p, &v) in self.basis.iter().enumerate() {
            self.x[v] = resid[p];
        }

        let pi = self.row_duals();
        for j in 0..self.d.len() {
            if self.status[j] == Status::Basic {
                self.d[j] = 0.0;
            } else if j < self.nstruct {
                let s: f64 = self.col_entries[j].iter().map(|&(k, a)| pi[k] * a).sum();
                self.d[j] = self.cost(j) - s;
            } else {
                self.d[j] = pi[j - self.nstruct];
            }
        }
        Ok(())
    }

    /// Simplex multipliers `c_B^T B^-1`, one per active row.
    fn row_duals(&self) -> Vec<f64> {
        let mut c: Vec<f64> = self.basis.iter().map(|&v| self.cost(v)).collect();
        if !c.is_empty() {
            self.factor.btran(&mut c);
        }
        c
    }
}
