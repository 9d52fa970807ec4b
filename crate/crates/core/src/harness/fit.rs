//! Fitting the stability constant and log-log slopes of sweep results.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

use super::plot::PlotKind;
use super::sweep::SweepRow;

/// Errors below this count as zero when the bound vanishes.
pub const ZERO_BOUND_TOL: f64 = 1e-8;

/// Least-squares slope of `log y` against `log x` over positive pairs.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// Slope of the error along one axis for one fixed setting of the others.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisSlope {
    pub axis: PlotKind,
    /// The fixed parameters.
    pub series: String,
    pub slope: f64,
    /// Whether the error moves in one direction along the axis.
    pub monotone: bool,
}

/// Fit for one `(solver, problem)` family.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyFit {
    pub solver: String,
    pub problem: String,
    /// `max(error / bound)` over usable rows.
    pub c: f64,
    pub rows_used: usize,
    pub flagged: usize,
    /// Rows with a vanishing bound but a visible error.
    pub violations: Vec<String>,
    pub slopes: Vec<AxisSlope>,
}

/// Result of [`fit_and_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct Conformance {
    pub families: Vec<FamilyFit>,
}

impl Conformance {
    pub fn passed(&self) -> bool {
        self.families.iter().all(|f| f.violations.is_empty())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for f in &self.families {
            let _ = writeln!(
                s,
                "{} / {}: C = {:.6e} over {} rows ({} flagged, excluded), {} violations",
                f.solver,
                f.problem,
                f.c,
                f.rows_used,
                f.flagged,
                f.violations.len()
            );
            for v in &f.violations {
                let _ = writeln!(s, "  violation: {v}");
            }
            for a in &f.slopes {
                let _ = writeln!(
                    s,
                    "  slope vs {:<8} {:>8.3}{}  [{}]",
                    a.axis.as_str(),
                    a.slope,
                    if a.monotone { "" } else { "  non-monotone" },
                    a.series
                );
            }
        }
        let _ = writeln!(
            s,
            "verdict: {}",
            if self.passed() { "PASS" } else { "FAIL" }
        );
        s
    }
}

const AXES: [PlotKind; 4] = [PlotKind::N, PlotKind::Dt, PlotKind::Eps, PlotKind::SigmaT];

fn rest_key(axis: PlotKind, r: &SweepRow) -> String {
    AXES.iter()
        .filter(|a| **a != axis)
        .map(|a| format!("{}={}", a.as_str(), a.x(r)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn axis_slopes(rows: &[&SweepRow]) -> Vec<AxisSlope> {
    let mut out = Vec::new();
    for axis in AXES {
        let mut groups: BTreeMap<String, Vec<&SweepRow>> = BTreeMap::new();
        for r in rows {
            groups.entry(rest_key(axis, r)).or_default().push(r);
        }
        for (series, mut g) in groups {
            g.sort_by(|a, b| axis.x(a).total_cmp(&axis.x(b)));
            let xs: Vec<f64> = g.iter().map(|r| axis.x(r)).collect();
            let ys: Vec<f64> = g.iter().map(|r| r.error).collect();
            let Some(slope) = loglog_slope(&xs, &ys) else {
                continue;
            };
            let up = ys.windows(2).all(|w| w[1] >= w[0]);
            let down = ys.windows(2).all(|w| w[1] <= w[0]);
            out.push(AxisSlope {
                axis,
                series,
                slope,
                monotone: up || down,
            });
        }
    }
    out
}

/// Fit one constant per `(solver, problem)` family over rows that carry a
/// bound and an unflagged oracle; rows with a zero bound must show an error
/// below [`ZERO_BOUND_TOL`].
pub fn fit_and_check(rows: &[SweepRow]) -> Result<Conformance> {
    if rows.len() < 3 {
        return Err(Error::Format(format!(
            "need at least 3 rows to fit, got {}",
            rows.len()
        )));
    }
    let mut fams: BTreeMap<(String, String), Vec<&SweepRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.has_bound()) {
        fams.entry((r.solver.to_string(), r.problem.clone()))
            .or_default()
            .push(r);
    }
    let families = fams
        .into_iter()
        .map(|((solver, problem), v)| {
            let flagged = v.iter().filter(|r| r.flagged()).count();
            let usable: Vec<&SweepRow> = v.iter().copied().filter(|r| !r.flagged()).collect();
            let c = usable
                .iter()
                .filter(|r| r.bound > 0.0)
                .map(|r| r.error / r.bound)
                .fold(0.0, f64::max);
            let violations = v
                .iter()
                .filter(|r| r.bound == 0.0 && r.error > ZERO_BOUND_TOL)
                .map(|r| {
                    format!(
                        "N={} dt={} eps={} sigma_t={}: error {:.3e} with zero bound",
                        r.n, r.dt, r.eps, r.sigma_t, r.error
                    )
                })
                .collect();
            FamilyFit {
                solver,
                problem,
                c,
                rows_used: usable.len(),
                flagged,
                violations,
                slopes: axis_slopes(&usable),
            }
        })
        .collect();
    Ok(Conformance { families })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::SolverKind;

    fn row(n: usize, error: f64, bound: f64) -> SweepRow {
        SweepRow {
            problem: "sobolev-s".into(),
            solver: SolverKind::Pn,
            n,
            dt: 1.0,
            eps: 1.0,
            sigma_t: 1.0,
            sigma_a: 0.0,
            t_final: 1.0,
            error,
            oracle_uncertainty: 0.0,
            bound,
            branch: "diffusive".into(),
            walltime_s: 0.0,
        }
    }

    #[test]
    fn synthetic_slope_is_recovered() {
        let rows: Vec<_> = [1, 3, 5, 7, 9]
            .iter()
            .map(|&n| {
                row(
                    n,
                    3.0 * ((n + 1) as f64).powi(-2),
                    ((n + 1) as f64).powi(-2),
                )
            })
            .collect();
        let c = fit_and_check(&rows).unwrap();
        assert!(c.passed());
        let f = &c.families[0];
        assert!((f.c - 3.0).abs() < 1e-12);
        let s = f.slopes.iter().find(|a| a.axis == PlotKind::N).unwrap();
        assert!((s.slope + 2.0).abs() < 0.01 && s.monotone);
    }

    #[test]
    fn zero_bound_rows() {
        let ok: Vec<_> = (0..3).map(|n| row(n, 0.0, 0.0)).collect();
        assert!(fit_and_check(&ok).unwrap().passed());
        let mut bad = ok.clone();
        bad[1].error = 1e-3;
        let c = fit_and_check(&bad).unwrap();
        assert!(!c.passed());
        assert!(c.to_text().contains("FAIL"));
        assert!(fit_and_check(&ok[..2]).is_err());
    }

    #[test]
    fn flagged_rows_are_excluded() {
        let mut rows: Vec<_> = (1..4).map(|n| row(n, 1.0 / n as f64, 1.0)).collect();
        rows[0].oracle_uncertainty = 1.0;
        let f = &fit_and_check(&rows).unwrap().families[0];
        assert_eq!((f.flagged, f.rows_used), (1, 2));
        assert!((f.c - 0.5).abs() < 1e-15);
    }
}
