//! Verification harness: run configuration, manufactured problems, error
//! measurement against oracles, parameter sweeps, bound conformance and plots.

pub mod config;
pub mod fit;
pub mod manufactured;
pub mod measure;
pub mod plot;
pub mod sweep;

use std::fmt;
use std::str::FromStr;

use crate::bounds::{audit_a_operator, audit_inequalities, audit_kernels, AuditCheck, AuditReport};
use crate::error::Error;
use crate::harmonics::{
    assemble_coupling, coupling_oracle, quadrature_for_exactness, spectral_norm, IDENTITY_TOL,
};

/// Operator-norm ceiling of every coupling block.
pub const COUPLING_NORM_CAP: f64 = 4.0;

/// Which discretization a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SolverKind {
    /// Monolithic P_N.
    Pn,
    /// Collided/uncollided splitting with P_N collided part.
    Hybrid,
    /// Exact uncollided flux alone, with no scattering source.
    Uncollided,
    /// Scalar-flux gap between P_N and the diffusion limit.
    Diffusion,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Pn => "pn",
            SolverKind::Hybrid => "hybrid",
            SolverKind::Uncollided => "uncollided",
            SolverKind::Diffusion => "diffusion",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "pn" => Ok(SolverKind::Pn),
            "hybrid" => Ok(SolverKind::Hybrid),
            "uncollided" => Ok(SolverKind::Uncollided),
            "diffusion" => Ok(SolverKind::Diffusion),
            other => Err(Error::config(None, format!("unknown solver '{other}'"))),
        }
    }
}

/// Ladder-built coupling blocks against the quadrature oracle for `N <= n_max`,
/// with the operator-norm ceiling.
pub fn coupling_audit(n_max: usize) -> AuditCheck {
    let mut check = AuditCheck {
        name: "coupling blocks".into(),
        evaluated: 0,
        violations: Vec::new(),
    };
    for n in 1..=n_max {
        let quad = quadrature_for_exactness(2 * n + 1);
        let pair = assemble_coupling(n).and_then(|a| coupling_oracle(n, &quad).map(|o| (a, o)));
        let (a, o) = match pair {
            Ok(p) => p,
            Err(e) => {
                check.violations.push(format!("N={n}: {e}"));
                continue;
            }
        };
        check.evaluated += 1;
        let diff = a.max_abs_diff(&o);
        if diff >= IDENTITY_TOL {
            check
                .violations
                .push(format!("N={n}: entrywise difference {diff:.3e}"));
        }
        for axis in 0..3 {
            for l in 1..=n {
                check.evaluated += 1;
                let norm = spectral_norm(a.block(axis, l));
                if norm > COUPLING_NORM_CAP {
                    check
                        .violations
                        .push(format!("N={n} axis={axis} l={l}: norm {norm:.6}"));
                }
            }
        }
    }
    check
}

/// Every audit run by the `audit` command.
pub fn full_audit(seed: u64) -> AuditReport {
    let mut report = audit_inequalities(5, 64, 1000, seed);
    report.checks.push(audit_a_operator(3));
    report.checks.push(audit_kernels());
    report.checks.push(coupling_audit(9));
    report
}
