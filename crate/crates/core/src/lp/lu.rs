//! Sparse LU factorisation of a simplex basis with product-form updates.
//!
//! Rows of the basis matrix are constraint rows; columns are basis
//! positions. `ftran` maps a row-indexed vector `a` to the position-indexed
//! `B^-1 a`; `btran` maps a position-indexed `c` to the row-indexed
//! `B^-T c`.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Singular;

/// Relative pivot threshold within a column.
const THRESHOLD: f64 = 0.1;
/// Absolute magnitude below which a pivot is treated as zero.
const TINY: f64 = 1e-11;
/// Number of low-count columns examined per Markowitz search.
const SEARCH_COLS: usize = 4;

#[derive(Debug, Clone, Default)]
pub(crate) struct BasisFactor {
    n: usize,
    // Elimination etas: step k subtracts `l * x[piv_row]` from each listed row.
    l_row: Vec<usize>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    // Upper factor, one row per step in pivot order.
    u_row: Vec<usize>,
    u_col: Vec<usize>,
    u_diag: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    // Product-form etas from basis changes since the last factorisation.
    e_pos: Vec<usize>,
    e_piv: Vec<f64>,
    e_start: Vec<usize>,
    e_idx: Vec<usize>,
    e_val: Vec<f64>,
}

impl BasisFactor {
    /// Factors the `n x n` matrix whose column `p` is `cols[p]` (row, value).
    pub fn factor(n: usize, cols: &[Vec<(usize, f64)>]) -> Result<Self, Singular> {
        debug_assert_eq!(cols.len(), n);
        let mut f = BasisFactor {
            n,
            l_start: vec![0],
            u_start: vec![0],
            e_start: vec![0],
            ..Default::default()
        };
        let mut col_list: Vec<Vec<(usize, f64)>> = cols
            .iter()
            .map(|c| c.iter().copied().filter(|&(_, v)| v != 0.0).collect())
            .collect();
        let mut row_pat: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (j, c) in col_list.iter().enumerate() {
            for &(i, _) in c {
                row_pat[i].push(j);
            }
        }
        let mut col_done = vec![false; n];
        let mut row_done = vec![false; n];
        let mut slot = vec![usize::MAX; n];

        for _step in 0..n {
            let (p, j) = f.choose_pivot(&col_list, &row_pat, &col_done, &row_done)?;
            let pivot_col = std::mem::take(&mut col_list[j]);
            let a_pj = pivot_col.iter().find(|&&(i, _)| i == p).map(|&(_, v)| v).ok_or(Singular)?;
            // Multipliers for the other rows of the pivot column.
            let mults: Vec<(usize, f64)> = pivot_col
                .iter()
                .filter(|&&(i, _)| i != p)
                .map(|&(i, v)| (i, v / a_pj))
                .collect();
            for &(i, _) in &mults {
                row_pat[i].retain(|&c| c != j);
            }
            f.l_row.push(p);
            for &(i, l) in &mults {
                f.l_idx.push(i);
                f.l_val.push(l);
            }
            f.l_start.push(f.l_idx.len());

            f.u_row.push(p);
            f.u_col.push(j);
            f.u_diag.push(a_pj);
            let prow = std::mem::take(&mut row_pat[p]);
            for &c in &prow {
                if c == j {
                    continue;
                }
                let col = &mut col_list[c];
                let Some(at) = col.iter().position(|&(i, _)| i == p) else {
                    continue;
                };
                let a_pc = col.swap_remove(at).1;
                f.u_idx.push(c);
                f.u_val.push(a_pc);
                if mults.is_empty() {
                    continue;
                }
                for (k, &(i, _)) in col.iter().enumerate() {
                    slot[i] = k;
                }
                for &(i, l) in &mults {
                    let delta = -l * a_pc;
                    if slot[i] != usize::MAX {
                        col[slot[i]].1 += delta;
                    } else {
                        col.push((i, delta));
                        row_pat[i].push(c);
                    }
                }
                for &(i, _) in col.iter() {
                    slot[i] = usize::MAX;
                }
            }
            f.u_start.push(f.u_idx.len());
            col_done[j] = true;
            row_done[p] = true;
        }
        Ok(f)
    }

    fn choose_pivot(
        &self,
        cols: &[Vec<(usize, f64)>],
        row_pat: &[Vec<usize>],
        col_done: &[bool],
        row_done: &[bool],
    ) -> Result<(usize, usize), Singular> {
        // A few active columns with the fewest entries.
        let mut cand: Vec<(usize, usize)> = Vec::with_capacity(SEARCH_COLS + 1);
        for j in 0..self.n {
            if col_done[j] {
                continue;
            }
            let c = cols[j].len();
            if c == 0 {
                return Err(Singular);
            }
            if cand.len() < SEARCH_COLS || c < cand[cand.len() - 1].0 {
                let at = cand.partition_point(|&(cc, _)| cc <= c);
                cand.insert(at, (c, j));
                cand.truncate(SEARCH_COLS);
            }
        }
        let mut best: Option<(usize, usize, usize, f64)> = None;
        for &(cc, j) in &cand {
            let col = &cols[j];
            let cmax = col.iter().map(|&(_, v)| v.abs()).fold(0.0, f64::max);
            if cmax <= TINY {
                continue;
            }
            for &(i, v) in col {
                debug_assert!(!row_done[i]);
                if v.abs() < THRESHOLD * cmax {
                    continue;
                }
                let score = (row_pat[i].len() - 1) * (cc - 1);
                let better = match best {
                    None => true,
                    Some((s, _, _, bv)) => score < s || (score == s && v.abs() > bv),
                };
                if better {
                    best = Some((score, i, j, v.abs()));
                }
            }
        }
        best.map(|(_, i, j, _)| (i, j)).ok_or(Singular)
    }

    pub fn num_etas(&self) -> usize {
        self.e_pos.len()
    }

    /// Solves `B x = a` in place; `a` is row-indexed on entry and
    /// position-indexed on return.
    pub fn ftran(&self, a: &mut [f64]) {
        for k in 0..self.l_row.len() {
            let xp = a[self.l_row[k]];
            if xp != 0.0 {
                for t in self.l_start[k]..self.l_start[k + 1] {
                    a[self.l_idx[t]] -= self.l_val[t] * xp;
                }
            }
        }
        let mut x = vec![0.0; self.n];
        for k in (0..self.u_row.len()).rev() {
            let mut s = a[self.u_row[k]];
            for t in self.u_start[k]..self.u_start[k + 1] {
                s -= self.u_val[t] * x[self.u_idx[t]];
            }
            x[self.u_col[k]] = s / self.u_diag[k];
        }
        for e in 0..self.e_pos.len() {
            let p = self.e_pos[e];
            let xp = x[p] / self.e_piv[e];
            x[p] = xp;
            if xp != 0.0 {
                for t in self.e_start[e]..self.e_start[e + 1] {
                    x[self.e_idx[t]] -= self.e_val[t] * xp;
                }
            }
        }
        a.copy_from_slice(&x);
    }

    /// Solves `B^T y = c` in place; `c` is position-indexed on entry and
    /// row-indexed on return.
    pub fn btran(&self, c: &mut [f64]) {
        for e in (0..self.e_pos.len()).rev() {
            let p = self.e_pos[e];
            let mut s = c[p];
            for t in self.e_start[e]..self.e_start[e + 1] {
                s -= self.e_val[t] * c[self.e_idx[t]];
            }
            c[p] = s / self.e_piv[e];
        }
        let mut z = vec![0.0; self.n];
        for k in 0..self.u_row.len() {
            let zk = c[self.u_col[k]] / self.u_diag[k];
            z[self.u_row[k]] = zk;
            if zk != 0.0 {
                for t in self.u_start[k]..self.u_start[k + 1] {
                    c[self.u_idx[t]] -= self.u_val[t] * zk;
                }
            }
        }
        for k in (0..self.l_row.len()).rev() {
            let mut s = 0.0;
            for t in self.l_start[k]..self.l_start[k + 1] {
                s += self.l_val[t] * z[self.l_idx[t]];
            }
            z[self.l_row[k]] -= s;
        }
        c.copy_from_slice(&z);
    }

    /// Records that position `p` now holds a column with `B^-1 a = w`.
    pub fn update(&mut self, p: usize, w: &[f64]) {
        self.e_pos.push(p);
        self.e_piv.push(w[p]);
        for (i, &v) in w.iter().enumerate() {
            if i != p && v != 0.0 {
                self.e_idx.push(i);
                self.e_val.push(v);
            }
        }
        self.e_start.push(self.e_idx.len());
    }

    #[allow(dead_code)]
    pub fn factor_nnz(&self) -> usize {
        self.l_idx.len() + self.u_idx.len() + self.u_diag.len()
    }
}
