//! Ordering LP relaxation of the multi-coflow problem.
//!
//! Variables are one relaxed completion time `T_m` per coflow and one ordering
//! variable `x[m][m']` per ordered pair (`x[m][m'] = 1` reads "m completes
//! before m'"). Per coflow and port the LP requires the coflow's own load plus
//! the load of everything ordered before it to fit into `R * T_m`, and (OCS
//! only) the analogous circuit count to fit into `(K / delta) * T_m`.
//!
//! The optimum lower-bounds the total weighted completion time of every
//! feasible schedule, and its `T_m` values drive the LP-guided order.

mod dense;
mod export;
mod lu;
mod rowgen;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bounds::port_stats;
use crate::model::{Instance, InvalidInstance, SwitchMode};

pub use dense::DenseTableauSimplex;
pub use export::write_lp_format;
pub use rowgen::RowGenSimplex;

/// Absolute feasibility tolerance every optimal solution satisfies.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Relative duality gap accepted as optimal.
pub const OPTIMALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LpVar {
    /// Relaxed completion time of coflow `m` (input index).
    Completion(usize),
    /// `x[before][after]`.
    Order { before: usize, after: usize },
}

impl fmt::Display for LpVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LpVar::Completion(m) => write!(f, "T_{m}"),
            LpVar::Order { before, after } => write!(f, "x_{before}_{after}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintKind {
    Pairing,
    Transmission,
    Reconfiguration,
    Release,
    Box,
}

/// `lower <= sum(coef * var) <= upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpConstraint {
    pub kind: ConstraintKind,
    /// Coflow whose completion time the row bounds, if any.
    pub coflow: Option<usize>,
    /// Port index (`0..2N`) for capacity rows.
    pub port: Option<usize>,
    pub terms: Vec<(LpVar, f64)>,
    pub lower: f64,
    pub upper: f64,
}

impl LpConstraint {
    pub fn activity(&self, values: &LpPoint<'_>) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values.get(v)).sum()
    }

    /// Amount by which the point violates the row (0 when satisfied).
    pub fn violation(&self, values: &LpPoint<'_>) -> f64 {
        let a = self.activity(values);
        (self.lower - a).max(a - self.upper).max(0.0)
    }
}

/// Read-only view of a candidate point.
pub struct LpPoint<'a> {
    pub completion: &'a [f64],
    pub ordering: &'a [Vec<f64>],
}

impl LpPoint<'_> {
    pub fn get(&self, v: LpVar) -> f64 {
        match v {
            LpVar::Completion(m) => self.completion[m],
            LpVar::Order { before, after } => self.ordering[before][after],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingLp {
    pub num_coflows: usize,
    pub weights: Vec<f64>,
    pub constraints: Vec<LpConstraint>,
}

impl OrderingLp {
    pub fn count(&self, kind: ConstraintKind) -> usize {
        self.constraints.iter().filter(|c| c.kind == kind).count()
    }

    /// Number of completion plus ordering variables.
    pub fn num_vars(&self) -> usize {
        let m = self.num_coflows;
        m + m * m.saturating_sub(1)
    }

    pub fn objective_at(&self, completion: &[f64]) -> f64 {
        self.weights.iter().zip(completion).map(|(w, t)| w * t).sum()
    }
}

/// Builds the full LP (no redundancy removal) for a valid instance.
pub fn build_lp(instance: &Instance) -> Result<OrderingLp, InvalidInstance> {
    instance.ensure_valid()?;
    let m = instance.num_coflows();
    let config = &instance.config;
    let n = config.num_ports;
    let r_total = config.aggregate_rate();
    let k = config.num_cores() as f64;
    let delay = config.reconfig_delay;
    let stats: Vec<_> = instance.coflows.iter().map(|c| port_stats(&c.demand)).collect();

    let mut constraints = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            constraints.push(LpConstraint {
                kind: ConstraintKind::Pairing,
                coflow: None,
                port: None,
                terms: vec![
                    (LpVar::Order { before: a, after: b }, 1.0),
                    (LpVar::Order { before: b, after: a }, 1.0),
                ],
                lower: 1.0,
                upper: 1.0,
            });
        }
    }
    for a in 0..m {
        for b in 0..m {
            if a != b {
                constraints.push(LpConstraint {
                    kind: ConstraintKind::Box,
                    coflow: None,
                    port: None,
                    terms: vec![(LpVar::Order { before: a, after: b }, 1.0)],
                    lower: 0.0,
                    upper: 1.0,
                });
            }
        }
    }
    let with_reconfig = config.mode == SwitchMode::Ocs;
    for me in 0..m {
        for p in 0..2 * n {
            let mut terms = vec![(LpVar::Completion(me), 1.0)];
            for other in 0..m {
                let load = stats[other].load_per_port[p];
                if other != me && load > 0.0 {
                    terms.push((LpVar::Order { before: other, after: me }, -load / r_total));
                }
            }
            constraints.push(LpConstraint {
                kind: ConstraintKind::Transmission,
                coflow: Some(me),
                port: Some(p),
                terms,
                lower: stats[me].load_per_port[p] / r_total,
                upper: f64::INFINITY,
            });
        }
        if with_reconfig {
            let scale = delay / k;
            for p in 0..2 * n {
                let mut terms = vec![(LpVar::Completion(me), 1.0)];
                for other in 0..m {
                    let count = stats[other].count_per_port[p] as f64;
                    if other != me && count > 0.0 && scale > 0.0 {
                        terms.push((LpVar::Order { before: other, after: me }, -count * scale));
                    }
                }
                constraints.push(LpConstraint {
                    kind: ConstraintKind::Reconfiguration,
                    coflow: Some(me),
                    port: Some(p),
                    terms,
                    lower: stats[me].count_per_port[p] as f64 * scale,
                    upper: f64::INFINITY,
                });
            }
        }
        constraints.push(LpConstraint {
            kind: ConstraintKind::Release,
            coflow: Some(me),
            port: None,
            terms: vec![(LpVar::Completion(me), 1.0)],
            lower: instance.coflows[me].release,
            upper: f64::INFINITY,
        });
    }
    Ok(OrderingLp {
        num_coflows: m,
        weights: instance.weights(),
        constraints,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub completion_values: Vec<f64>,
    /// `ordering_values[m][m']`; the diagonal is unused and left at 0.
    pub ordering_values: Vec<Vec<f64>>,
    pub objective: f64,
    /// Lagrangian bound certified by the solver's duals (<= `objective`).
    pub dual_bound: f64,
    pub status: LpStatus,
    pub iterations: usize,
}

impl LpSolution {
    pub fn empty() -> Self {
        Self {
            completion_values: vec![],
            ordering_values: vec![],
            objective: 0.0,
            dual_bound: 0.0,
            status: LpStatus::Optimal,
            iterations: 0,
        }
    }

    pub fn point(&self) -> LpPoint<'_> {
        LpPoint {
            completion: &self.completion_values,
            ordering: &self.ordering_values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("LP is infeasible")]
    Infeasible,
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("unsupported LP structure: {0}")]
    Unsupported(String),
    #[error("solution status is {0:?}, not optimal")]
    NotOptimal(LpStatus),
    #[error(transparent)]
    Invalid(#[from] InvalidInstance),
}

/// Any backend able to solve an [`OrderingLp`] to the crate's tolerances.
pub trait LpSolver {
    fn solve(&self, lp: &OrderingLp) -> Result<LpSolution, LpError>;
}

/// Selects an LP backend by name.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    /// Row-generation bounded dual simplex; scales to desk-size instances.
    #[default]
    RowGen,
    /// Two-phase dense tableau over the explicit LP; small instances only.
    DenseTableau,
}

impl SolverKind {
    pub fn solve(self, lp: &OrderingLp) -> Result<LpSolution, LpError> {
        match self {
            SolverKind::RowGen => RowGenSimplex::default().solve(lp),
            SolverKind::DenseTableau => DenseTableauSimplex::default().solve(lp),
        }
    }
}

/// Solves with the default backend.
pub fn solve_lp(lp: &OrderingLp) -> Result<LpSolution, LpError> {
    SolverKind::default().solve(lp)
}

/// Convenience: build and solve in one step.
pub fn solve_instance(instance: &Instance) -> Result<LpSolution, LpError> {
    let lp = build_lp(instance)?;
    solve_lp(&lp)
}

/// Lower bound on the optimal total weighted completion time.
pub fn certified_lower_bound(solution: &LpSolution) -> Result<f64, LpError> {
    match solution.status {
        LpStatus::Optimal => Ok(solution.objective),
        s => Err(LpError::NotOptimal(s)),
    }
}

/// One row of an audit: which constraint and by how much it is violated.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditEntry {
    pub index: usize,
    pub kind: ConstraintKind,
    pub violation: f64,
}

/// Substitutes a solution into every constraint and reports rows violated by
/// more than `tol`.
pub fn audit_solution(lp: &OrderingLp, solution: &LpSolution, tol: f64) -> Vec<AuditEntry> {
    let point = solution.point();
    lp.constraints
        .iter()
        .enumerate()
        .filter_map(|(index, c)| {
            let violation = c.violation(&point);
            (violation > tol).then_some(AuditEntry {
                index,
                kind: c.kind,
                violation,
            })
        })
        .collect()
}

/// Compact view of an [`OrderingLp`] used by the solvers: pairing rows are
/// eliminated through `x[b][a] = 1 - x[a][b]` (`a < b`), box rows become
/// bounds and single-variable completion rows become lower bounds.
pub(crate) struct ReducedLp {
    pub m: usize,
    pub costs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `sum(coef * var) >= rhs` rows over reduced variables.
    pub rows: Vec<ReducedRow>,
}

pub(crate) struct ReducedRow {
    pub owner: Option<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
    pub rhs: f64,
}

impl ReducedLp {
    pub fn num_vars(&self) -> usize {
        self.costs.len()
    }

    /// Reduced index of pair variable `x[a][b]` for `a < b`.
    pub fn pair_index(&self, a: usize, b: usize) -> usize {
        debug_assert!(a < b);
        let m = self.m;
        m + a * (2 * m - a - 1) / 2 + (b - a - 1)
    }

    pub fn from_lp(lp: &OrderingLp) -> Result<Self, LpError> {
        let m = lp.num_coflows;
        let pairs = m * m.saturating_sub(1) / 2;
        let mut red = ReducedLp {
            m,
            costs: lp.weights.clone(),
            lower: vec![f64::NEG_INFINITY; m],
            upper: vec![f64::INFINITY; m],
            rows: Vec::new(),
        };
        red.costs.extend(std::iter::repeat(0.0).take(pairs));
        red.lower.extend(std::iter::repeat(0.0).take(pairs));
        red.upper.extend(std::iter::repeat(1.0).take(pairs));
        for c in &lp.constraints {
            match c.kind {
                ConstraintKind::Pairing => {
                    let ok = c.terms.len() == 2
                        && c.lower == 1.0
                        && c.upper == 1.0
                        && c.terms.iter().all(|&(_, v)| v == 1.0)
                        && matches!(
                            (c.terms[0].0, c.terms[1].0),
                            (LpVar::Order { before: a, after: b }, LpVar::Order { before: c2, after: d })
                                if a == d && b == c2
                        );
                    if !ok {
                        return Err(LpError::Unsupported("malformed pairing row".into()));
                    }
                }
                ConstraintKind::Box => {
                    if !(c.lower <= 0.0 && c.upper >= 1.0) {
                        return Err(LpError::Unsupported("box tighter than [0,1]".into()));
                    }
                }
                _ => {
                    if c.upper != f64::INFINITY {
                        return Err(LpError::Unsupported("only >= capacity rows supported".into()));
                    }
                    let mut rhs = c.lower;
                    let mut dense: Vec<(usize, f64)> = Vec::with_capacity(c.terms.len());
                    for &(v, coef) in &c.terms {
                        match v {
                            LpVar::Completion(t) => dense.push((t, coef)),
                            LpVar::Order { before, after } if before < after => {
                                dense.push((red.pair_index(before, after), coef))
                            }
                            LpVar::Order { before, after } => {
                                // coef * (1 - y)
                                rhs -= coef;
                                dense.push((red.pair_index(after, before), -coef));
                            }
                        }
                    }
                    dense.sort_by_key(|&(j, _)| j);
                    let mut cols: Vec<usize> = Vec::with_capacity(dense.len());
                    let mut vals: Vec<f64> = Vec::with_capacity(dense.len());
                    for (j, v) in dense {
                        if cols.last() == Some(&j) {
                            *vals.last_mut().unwrap() += v;
                        } else {
                            cols.push(j);
                            vals.push(v);
                        }
                    }
                    if cols.len() == 1 && cols[0] < m && vals[0] > 0.0 {
                        let t = cols[0];
                        red.lower[t] = red.lower[t].max(rhs / vals[0]);
                        continue;
                    }
                    red.rows.push(ReducedRow {
                        owner: c.coflow,
                        cols,
                        vals,
                        rhs,
                    });
                }
            }
        }
        for t in 0..m {
            if red.lower[t] == f64::NEG_INFINITY {
                red.lower[t] = 0.0;
            }
        }
        Ok(red)
    }

    /// Expands a reduced point into completion and ordering values.
    pub fn expand(&self, z: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let m = self.m;
        let completion = z[..m].to_vec();
        let mut ordering = vec![vec![0.0; m]; m];
        for a in 0..m {
            for b in a + 1..m {
                let y = z[self.pair_index(a, b)].clamp(0.0, 1.0);
                ordering[a][b] = y;
                ordering[b][a] = 1.0 - y;
            }
        }
        (completion, ordering)
    }

    /// Raises completion values to the smallest ones feasible for the current
    /// ordering values (rows whose only completion term has a positive
    /// coefficient). Returns the repaired point.
    pub fn polish(&self, z: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut out = z.to_vec();
        for j in m..out.len() {
            out[j] = out[j].clamp(self.lower[j], self.upper[j]);
        }
        for t in 0..m {
            out[t] = out[t].max(self.lower[t]);
        }
        for row in &self.rows {
            let mut t_col = None;
            let mut rest = 0.0;
            for (&j, &v) in row.cols.iter().zip(&row.vals) {
                if j < m {
                    if t_col.is_some() || v <= 0.0 {
                        t_col = None;
                        rest = f64::NAN;
                        break;
                    }
                    t_col = Some((j, v));
                } else {
                    rest += v * out[j];
                }
            }
            if let Some((t, v)) = t_col {
                if rest.is_finite() {
                    out[t] = out[t].max((row.rhs - rest) / v);
                }
            }
        }
        out
    }

    /// Lagrangian bound `min_z c.z - u.(A z - b)` over the variable bounds for
    /// multipliers `u >= 0` on `rows`. Multipliers of each completion column
    /// are scaled down when their reduced cost would go negative.
    pub fn lagrangian_bound(&self, duals: &[f64]) -> f64 {
        let n = self.num_vars();
        let mut u: Vec<f64> = duals.iter().map(|&d| d.max(0.0)).collect();
        // Columns with an infinite upper bound need c_j - u.A_j >= 0.
        let mut load = vec![0.0; n];
        for (row, &ur) in self.rows.iter().zip(&u) {
            for (&j, &v) in row.cols.iter().zip(&row.vals) {
                load[j] += ur * v;
            }
        }
        let mut row_scale = vec![1.0f64; self.rows.len()];
        for (ri, row) in self.rows.iter().enumerate() {
            for (&j, &v) in row.cols.iter().zip(&row.vals) {
                if self.upper[j] == f64::INFINITY && v > 0.0 && load[j] > self.costs[j] {
                    let s = if load[j] > 0.0 { self.costs[j] / load[j] } else { 1.0 };
                    row_scale[ri] = row_scale[ri].min(s.max(0.0));
                }
            }
        }
        for (ur, s) in u.iter_mut().zip(&row_scale) {
            *ur *= s;
        }
        let mut reduced = self.costs.clone();
        let mut bound = 0.0;
        for (row, &ur) in self.rows.iter().zip(&u) {
            bound += ur * row.rhs;
            for (&j, &v) in row.cols.iter().zip(&row.vals) {
                reduced[j] -= ur * v;
            }
        }
        for j in 0..n {
            let rc = reduced[j];
            let v = if rc >= 0.0 {
                if self.lower[j] == f64::NEG_INFINITY {
                    if rc > 0.0 {
                        return f64::NEG_INFINITY;
                    }
                    0.0
                } else {
                    rc * self.lower[j]
                }
            } else if self.upper[j] == f64::INFINITY {
                // Residual negativity after scaling is round-off.
                rc * self.lower[j].max(0.0)
            } else {
                rc * self.upper[j]
            };
            bound += v;
        }
        bound
    }

    /// Builds the public solution object from a primal point and multipliers.
    pub fn finish(&self, lp: &OrderingLp, z: &[f64], duals: &[f64], iterations: usize) -> LpSolution {
        let z = self.polish(z);
        let (completion_values, ordering_values) = self.expand(&z);
        let objective = lp.objective_at(&completion_values);
        let dual_bound = self.lagrangian_bound(duals);
        let scale = objective.abs().max(1.0);
        let status = if objective - dual_bound <= OPTIMALITY_TOL * scale {
            LpStatus::Optimal
        } else {
            LpStatus::NumericalFailure
        };
        LpSolution {
            completion_values,
            ordering_values,
            objective,
            dual_bound,
            status,
            iterations,
        }
    }
}
