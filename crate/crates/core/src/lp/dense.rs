//! Two-phase dense tableau simplex with Bland's rule.
//!
//! Works on the explicit LP exactly as built (every pairing and box row
//! included), so it shares no reduction code with the row-generation solver
//! and serves as an independent cross-check on small instances.

use std::collections::HashMap;

use super::{LpError, LpSolution, LpSolver, LpStatus, LpVar, OrderingLp, OPTIMALITY_TOL};

#[derive(Debug, Clone)]
pub struct DenseTableauSimplex {
    pub max_iterations: usize,
    /// Refuses LPs whose tableau would exceed this many cells.
    pub max_cells: usize,
}

impl Default for DenseTableauSimplex {
    fn default() -> Self {
        Self {
            max_iterations: 200_000,
            max_cells: 50_000_000,
        }
    }
}

const EPS: f64 = 1e-10;

struct Tableau {
    /// `rows x (cols + 1)`, last column is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let prow = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, &pv) in row.iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    fn reduced_costs(&self, costs: &[f64]) -> Vec<f64> {
        let mut d = costs.to_vec();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = costs[b];
            if cb != 0.0 {
                for (dj, &a) in d.iter_mut().zip(&self.t[i][..self.cols]) {
                    *dj -= cb * a;
                }
            }
        }
        d
    }

    /// Bland's rule restricted to columns `< allowed`.
    fn run(&mut self, costs: &[f64], allowed: usize, budget: &mut usize) -> Result<(), LpError> {
        loop {
            if *budget == 0 {
                return Err(LpError::NumericalFailure("iteration limit reached".into()));
            }
            let d = self.reduced_costs(costs);
            let Some(q) = (0..allowed).find(|&j| d[j] < -EPS && !self.basis.contains(&j)) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.t.iter().enumerate() {
                let a = row[q];
                if a > EPS {
                    let ratio = row[self.cols] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - EPS || (ratio <= br + EPS && self.basis[i] < self.basis[bi]) {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(LpError::NumericalFailure("unbounded direction".into()));
            };
            self.pivot(r, q);
            *budget -= 1;
        }
    }
}

impl LpSolver for DenseTableauSimplex {
    fn solve(&self, lp: &OrderingLp) -> Result<LpSolution, LpError> {
        let m = lp.num_coflows;
        if m == 0 {
            return Ok(LpSolution::empty());
        }
        // Structural columns: completion values, then every ordered pair.
        let mut col_of: HashMap<LpVar, usize> = HashMap::new();
        for t in 0..m {
            col_of.insert(LpVar::Completion(t), t);
        }
        for a in 0..m {
            for b in 0..m {
                if a != b {
                    let next = col_of.len();
                    col_of.insert(LpVar::Order { before: a, after: b }, next);
                }
            }
        }
        let nstruct = col_of.len();

        // (coefficients, slack sign, rhs) with slack sign 0 for equalities.
        let mut rows: Vec<(Vec<(usize, f64)>, f64, f64)> = Vec::new();
        for c in &lp.constraints {
            let coefs: Vec<(usize, f64)> = c
                .terms
                .iter()
                .map(|&(v, a)| {
                    col_of
                        .get(&v)
                        .map(|&j| (j, a))
                        .ok_or_else(|| LpError::Unsupported(format!("unknown variable {v}")))
                })
                .collect::<Result<_, _>>()?;
            if c.lower == c.upper {
                rows.push((coefs, 0.0, c.lower));
                continue;
            }
            if c.lower.is_finite() {
                rows.push((coefs.clone(), -1.0, c.lower));
            }
            if c.upper.is_finite() {
                rows.push((coefs, 1.0, c.upper));
            }
        }
        let nrows = rows.len();
        let nslack = rows.iter().filter(|r| r.1 != 0.0).count();
        let art0 = nstruct + nslack;
        let cols = art0 + nrows;
        if nrows.saturating_mul(cols + 1) > self.max_cells {
            return Err(LpError::Unsupported(format!(
                "{nrows}x{cols} tableau exceeds the dense solver limit"
            )));
        }
        let mut t = vec![vec![0.0; cols + 1]; nrows];
        let mut flip = vec![1.0; nrows];
        let mut slack = nstruct;
        for (i, (coefs, sign, rhs)) in rows.iter().enumerate() {
            for &(j, a) in coefs {
                t[i][j] += a;
            }
            if *sign != 0.0 {
                t[i][slack] = *sign;
                slack += 1;
            }
            t[i][cols] = *rhs;
            if *rhs < 0.0 {
                flip[i] = -1.0;
                for v in t[i].iter_mut() {
                    *v = -*v;
                }
            }
            t[i][art0 + i] = 1.0;
        }
        let mut tab = Tableau {
            t,
            basis: (art0..art0 + nrows).collect(),
            cols,
        };
        let mut budget = self.max_iterations;

        let mut phase1 = vec![0.0; cols];
        for c in phase1.iter_mut().skip(art0) {
            *c = 1.0;
        }
        tab.run(&phase1, art0, &mut budget)?;
        let infeas: f64 = tab
            .basis
            .iter()
            .enumerate()
            .filter(|&(_, &b)| b >= art0)
            .map(|(i, _)| tab.t[i][cols])
            .sum();
        let scale = 1.0 + rows.iter().map(|r| r.2.abs()).fold(0.0, f64::max);
        if infeas > 1e-9 * scale {
            return Err(LpError::Infeasible);
        }
        // Drive zero-level artificials out of the basis where possible.
        for i in 0..nrows {
            if tab.basis[i] >= art0 {
                if let Some(j) = (0..art0).find(|&j| tab.t[i][j].abs() > 1e-9) {
                    tab.pivot(i, j);
                }
            }
        }

        let mut costs = vec![0.0; cols];
        costs[..m].copy_from_slice(&lp.weights);
        tab.run(&costs, art0, &mut budget)?;

        let mut z = vec![0.0; cols];
        for (i, &b) in tab.basis.iter().enumerate() {
            z[b] = tab.t[i][cols];
        }
        let completion_values = z[..m].to_vec();
        let mut ordering_values = vec![vec![0.0; m]; m];
        for a in 0..m {
            for b in 0..m {
                if a != b {
                    ordering_values[a][b] = z[col_of[&LpVar::Order { before: a, after: b }]];
                }
            }
        }
        let objective = lp.objective_at(&completion_values);

        // Row multipliers y = c_B B^-1 are read off the artificial columns.
        let mut dual_bound = 0.0;
        for (k, row) in rows.iter().enumerate() {
            let mut y = 0.0;
            for (i, &b) in tab.basis.iter().enumerate() {
                y += costs[b] * tab.t[i][art0 + k];
            }
            dual_bound += y * row.2 * flip[k];
        }
        let d = tab.reduced_costs(&costs);
        let dual_feasible = d[..art0].iter().all(|&v| v >= -1e-8);
        let gap_ok = (objective - dual_bound).abs() <= OPTIMALITY_TOL * objective.abs().max(1.0);
        let status = if dual_feasible && gap_ok {
            LpStatus::Optimal
        } else {
            LpStatus::NumericalFailure
        };
        Ok(LpSolution {
            completion_values,
            ordering_values,
            objective,
            dual_bound,
            status,
            iterations: self.max_iterations - budget,
        })
    }
}
