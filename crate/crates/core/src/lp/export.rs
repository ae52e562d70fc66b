//! CPLEX LP file export, readable by most external solvers.

use std::fmt::Write as _;
use std::io;

use super::{ConstraintKind, LpVar, OrderingLp};

fn term_list(terms: &[(LpVar, f64)]) -> String {
    let mut s = String::new();
    for (idx, &(v, c)) in terms.iter().enumerate() {
        let sign = if c < 0.0 { "-" } else if idx > 0 { "+" } else { "" };
        let sep = if idx > 0 { " " } else { "" };
        let _ = write!(s, "{sep}{sign} {} {v}", c.abs());
    }
    if s.is_empty() {
        s.push('0');
    }
    s.trim_start().to_string()
}

fn kind_tag(kind: ConstraintKind) -> &'static str {
    match kind {
        ConstraintKind::Pairing => "pair",
        ConstraintKind::Transmission => "tx",
        ConstraintKind::Reconfiguration => "rc",
        ConstraintKind::Release => "rel",
        ConstraintKind::Box => "box",
    }
}

/// Writes `lp` in CPLEX LP format. Box rows are emitted as variable bounds.
pub fn write_lp_format<W: io::Write>(lp: &OrderingLp, mut out: W) -> io::Result<()> {
    let m = lp.num_coflows;
    writeln!(out, "\\ coflow ordering LP, {m} coflows")?;
    writeln!(out, "Minimize")?;
    let obj: Vec<(LpVar, f64)> = (0..m).map(|t| (LpVar::Completion(t), lp.weights[t])).collect();
    writeln!(out, " obj: {}", term_list(&obj))?;
    writeln!(out, "Subject To")?;
    let mut bounds: Vec<(LpVar, f64, f64)> = Vec::new();
    for (idx, c) in lp.constraints.iter().enumerate() {
        if c.kind == ConstraintKind::Box && c.terms.len() == 1 && c.terms[0].1 == 1.0 {
            bounds.push((c.terms[0].0, c.lower, c.upper));
            continue;
        }
        let name = format!("{}{idx}", kind_tag(c.kind));
        let lhs = term_list(&c.terms);
        if c.lower == c.upper {
            writeln!(out, " {name}: {lhs} = {}", c.lower)?;
        } else {
            if c.lower.is_finite() {
                writeln!(out, " {name}_lo: {lhs} >= {}", c.lower)?;
            }
            if c.upper.is_finite() {
                writeln!(out, " {name}_hi: {lhs} <= {}", c.upper)?;
            }
        }
    }
    writeln!(out, "Bounds")?;
    for (v, lo, hi) in bounds {
        writeln!(out, " {lo} <= {v} <= {hi}")?;
    }
    writeln!(out, "End")?;
    Ok(())
}
