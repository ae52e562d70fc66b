//! Matrix stuffing and Birkhoff-von Neumann decomposition.

use serde::{Deserialize, Serialize};

use crate::model::DemandMatrix;

/// Relative flush threshold for residual entries.
const FLUSH: f64 = 1e-12;
/// Relative tolerance on the equal row/column sum precondition.
const SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BvnError {
    #[error("matrix is all zero")]
    ZeroMatrix,
    #[error("row and column sums are not all equal to {target} (line {line} sums to {sum})")]
    UnequalSums { target: f64, line: usize, sum: f64 },
    #[error("no perfect matching on the support after {terms} terms")]
    NoPerfectMatching { terms: usize },
}

/// One configuration: ingress `i` connects to egress `perm[i]` for `weight`
/// volume units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BvnTerm {
    pub perm: Vec<usize>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BvnDecomposition {
    pub terms: Vec<BvnTerm>,
    pub stuffing: DemandMatrix,
}

impl BvnDecomposition {
    /// `sum weight * P` as a dense matrix.
    pub fn reconstruct(&self, n: usize) -> DemandMatrix {
        let mut m = DemandMatrix::zeros(n);
        for t in &self.terms {
            for (i, &j) in t.perm.iter().enumerate() {
                m.add(i, j, t.weight);
            }
        }
        m
    }
}

/// Largest row or column sum.
pub fn max_line_sum(d: &DemandMatrix) -> f64 {
    (0..d.n())
        .flat_map(|p| [d.row_sum(p), d.col_sum(p)])
        .fold(0.0, f64::max)
}

/// Pads `d` so every row and column sums to its largest line sum. Returns
/// the stuffed matrix and the stuffing added.
pub fn stuff_matrix(d: &DemandMatrix) -> Result<(DemandMatrix, DemandMatrix), BvnError> {
    if d.is_zero() {
        return Err(BvnError::ZeroMatrix);
    }
    let n = d.n();
    let rho = max_line_sum(d);
    let mut row_def: Vec<f64> = (0..n).map(|i| rho - d.row_sum(i)).collect();
    let mut col_def: Vec<f64> = (0..n).map(|j| rho - d.col_sum(j)).collect();
    let eps = SUM_TOL * rho * 1e-3;
    let mut stuffing = DemandMatrix::zeros(n);
    let (mut i, mut j) = (0, 0);
    loop {
        while i < n && row_def[i] <= eps {
            i += 1;
        }
        while j < n && col_def[j] <= eps {
            j += 1;
        }
        if i == n || j == n {
            break;
        }
        let add = row_def[i].min(col_def[j]);
        stuffing.add(i, j, add);
        row_def[i] -= add;
        col_def[j] -= add;
    }
    Ok((d.plus(&stuffing), stuffing))
}

/// Augmenting-path matching over the positive support, rows and columns
/// visited in ascending order.
struct Matcher<'a> {
    n: usize,
    residual: &'a [f64],
    row_to_col: Vec<usize>,
    col_to_row: Vec<usize>,
    visited: Vec<bool>,
}

impl Matcher<'_> {
    fn augment(&mut self, r: usize) -> bool {
        for c in 0..self.n {
            if self.residual[r * self.n + c] <= 0.0 || self.visited[c] {
                continue;
            }
            self.visited[c] = true;
            let other = self.col_to_row[c];
            if other == usize::MAX || self.augment(other) {
                self.row_to_col[r] = c;
                self.col_to_row[c] = r;
                return true;
            }
        }
        false
    }

    fn complete(&mut self) -> bool {
        for r in 0..self.n {
            if self.row_to_col[r] == usize::MAX {
                self.visited.iter_mut().for_each(|v| *v = false);
                if !self.augment(r) {
                    return false;
                }
            }
        }
        true
    }
}

/// Decomposes a matrix with equal row and column sums into weighted
/// permutations.
pub fn birkhoff_decompose(b: &DemandMatrix) -> Result<Vec<BvnTerm>, BvnError> {
    let n = b.n();
    let rho = max_line_sum(b);
    if rho <= 0.0 {
        return Err(BvnError::ZeroMatrix);
    }
    for p in 0..n {
        for (line, sum) in [(p, b.row_sum(p)), (n + p, b.col_sum(p))] {
            if (sum - rho).abs() > SUM_TOL * rho {
                return Err(BvnError::UnequalSums { target: rho, line, sum });
            }
        }
    }
    let flush = FLUSH * rho;
    let mut residual: Vec<f64> = b.entries().iter().map(|&v| if v > flush { v } else { 0.0 }).collect();
    let mut row_to_col = vec![usize::MAX; n];
    let mut col_to_row = vec![usize::MAX; n];
    let mut terms = Vec::new();
    while residual.iter().any(|&v| v > 0.0) {
        let mut m = Matcher {
            n,
            residual: &residual,
            row_to_col: std::mem::take(&mut row_to_col),
            col_to_row: std::mem::take(&mut col_to_row),
            visited: vec![false; n],
        };
        if !m.complete() {
            return Err(BvnError::NoPerfectMatching { terms: terms.len() });
        }
        row_to_col = m.row_to_col;
        col_to_row = m.col_to_row;
        let perm = row_to_col.clone();
        let weight = (0..n).map(|i| residual[i * n + perm[i]]).fold(f64::INFINITY, f64::min);
        for (i, &c) in perm.iter().enumerate() {
            let v = &mut residual[i * n + c];
            *v -= weight;
            if *v <= flush {
                *v = 0.0;
                row_to_col[i] = usize::MAX;
                col_to_row[c] = usize::MAX;
            }
        }
        terms.push(BvnTerm { perm, weight });
    }
    Ok(terms)
}

/// Stuffs and decomposes `d`.
pub fn decompose(d: &DemandMatrix) -> Result<BvnDecomposition, BvnError> {
    let (stuffed, stuffing) = stuff_matrix(d)?;
    let terms = birkhoff_decompose(&stuffed)?;
    Ok(BvnDecomposition { terms, stuffing })
}
