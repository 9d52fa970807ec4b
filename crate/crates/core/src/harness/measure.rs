//! Error measurement against exact solutions or a high-degree P_N reference.

use std::f64::consts::E;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{l2_norm, MomentField, NodalAngularField};
use crate::harmonics::{build_sphere_quadrature, SphereQuadrature};
use crate::hybrid::run_hybrid;
use crate::transport::{absorption_wrap, diffusion_gap, solve_pn, solve_uncollided};

use super::manufactured::Manufactured;
use super::SolverKind;

/// Largest polar order chosen automatically.
pub const MAX_AUTO_POLAR: usize = 96;

/// Oracle uncertainty above this fraction of the error flags a row.
pub const FLAG_FRACTION: f64 = 0.1;

/// How the reference solution is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OraclePolicy {
    /// Reference degree; automatic when `None`.
    pub n_ref: Option<usize>,
    /// Degree increment of the second reference used for the uncertainty.
    pub richardson: usize,
    /// Polar order of the nodal rule; automatic when `None`.
    pub polar_order: Option<usize>,
}

impl Default for OraclePolicy {
    fn default() -> Self {
        Self {
            n_ref: None,
            richardson: 4,
            polar_order: None,
        }
    }
}

impl OraclePolicy {
    /// Reference degree for a run at degree `n`.
    pub fn reference_degree(&self, n: usize, data_degree: usize) -> usize {
        self.n_ref.unwrap_or((2 * n + 6).max(data_degree + 8))
    }

    /// Polar order resolving the reference degree, the data and the angular
    /// oscillation `e^{-ik·Ω t/ε}` built up by streaming.
    pub fn polar_order(&self, problem: &Manufactured, n_ref: usize) -> usize {
        if let Some(p) = self.polar_order {
            return p;
        }
        let spec = &problem.spec;
        let stream = E * spec.grid().max_wavenumber_norm() * spec.t_final / spec.eps;
        let want = ((n_ref + problem.data_degree) as f64 + stream) / 2.0;
        (n_ref + 6)
            .max(want.ceil() as usize + 10)
            .min(MAX_AUTO_POLAR)
    }
}

/// P_N reference at `T` with a refined companion.
#[derive(Debug, Clone)]
pub struct Reference {
    pub n_ref: usize,
    pub state: MomentField,
    /// `‖ψ^{N_ref} - ψ^{N_ref + richardson}‖`.
    pub uncertainty: f64,
}

/// Reference solution of `problem` at degree `n_ref`.
pub fn reference(problem: &Manufactured, n_ref: usize, richardson: usize) -> Result<Reference> {
    let t = problem.spec.t_final;
    let base = solve_pn(&problem.spec, n_ref, &[t])?.final_state().clone();
    let fine_n = n_ref + richardson.max(1);
    let fine = solve_pn(&problem.spec, fine_n, &[t])?.final_state().clone();
    let uncertainty = l2_norm(&fine.difference(&base.resized(fine_n))?);
    Ok(Reference {
        n_ref,
        state: base,
        uncertainty,
    })
}

/// Measured error with the oracle's own uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub error: f64,
    pub uncertainty: f64,
}

impl Measurement {
    /// Whether the oracle is too coarse to trust this error.
    pub fn flagged(&self) -> bool {
        self.uncertainty > FLAG_FRACTION * self.error
    }
}

fn quad(order: usize) -> Result<Arc<SphereQuadrature>> {
    Ok(Arc::new(build_sphere_quadrature(order)?))
}

/// Nodal approximation at `T` produced by a nodal solver on `quad`.
fn nodal_solution(
    problem: &Manufactured,
    solver: SolverKind,
    n: usize,
    order: usize,
) -> Result<NodalAngularField> {
    let spec = &problem.spec;
    match solver {
        SolverKind::Hybrid => Ok(run_hybrid(spec, n, order, None)?.total),
        SolverKind::Uncollided => {
            let wrap = absorption_wrap(spec)?;
            let s = &wrap.scattering;
            let u0 = s.g.to_nodal(quad(order)?);
            let u = solve_uncollided(&u0, 0.0, s.t_final, s.eps, s.sigma_t, &s.q)?;
            Ok(u.scaled(wrap.post_scale(s.t_final)))
        }
        SolverKind::Pn => {
            let st = solve_pn(spec, n, &[spec.t_final])?;
            Ok(st.final_state().to_nodal(quad(order)?))
        }
        SolverKind::Diffusion => Err(Error::Precondition(
            "diffusion rows carry no nodal solution".into(),
        )),
    }
}

/// Error of `solver` at degree `n` on `problem` at its final time.
///
/// `reference` must be supplied for problems without an exact solution and
/// is ignored otherwise.
pub fn measure(
    problem: &Manufactured,
    solver: SolverKind,
    n: usize,
    policy: &OraclePolicy,
    reference: Option<&Reference>,
) -> Result<Measurement> {
    let spec = &problem.spec;
    let t = spec.t_final;
    if solver == SolverKind::Diffusion {
        let st = solve_pn(spec, n, &[t])?;
        return Ok(Measurement {
            error: diffusion_gap(st.final_state(), spec, t)?,
            uncertainty: 0.0,
        });
    }
    if problem.exact.is_some() {
        if let (SolverKind::Pn, Some(exact)) =
            (solver, problem.exact_moments(t, n.max(problem.data_degree)))
        {
            let st = solve_pn(spec, n, &[t])?;
            let width = exact.max_degree().max(n);
            let diff = st
                .final_state()
                .resized(width)
                .difference(&exact.resized(width))?;
            return Ok(Measurement {
                error: l2_norm(&diff),
                uncertainty: 0.0,
            });
        }
        let n_ref = policy.reference_degree(n, problem.data_degree);
        let order = policy.polar_order(problem, n_ref);
        let err_at = |p: usize| -> Result<f64> {
            let q = quad(p)?;
            let approx = nodal_solution(problem, solver, n, p)?;
            let exact = problem.exact_nodal(t, q)?.expect("exact solution exists");
            Ok(approx.difference(&exact)?.l2_norm())
        };
        let coarse = err_at(order)?;
        let fine = err_at(order + 8)?;
        return Ok(Measurement {
            error: coarse,
            uncertainty: (coarse - fine).abs(),
        });
    }
    let r = reference.ok_or_else(|| Error::Precondition("reference solution required".into()))?;
    match solver {
        SolverKind::Pn => {
            let st = solve_pn(spec, n, &[t])?;
            let width = r.n_ref.max(n);
            let diff = st
                .final_state()
                .resized(width)
                .difference(&r.state.resized(width))?;
            Ok(Measurement {
                error: l2_norm(&diff),
                uncertainty: r.uncertainty,
            })
        }
        _ => {
            let order = policy.polar_order(problem, r.n_ref);
            let approx = nodal_solution(problem, solver, n, order)?;
            let refn = r.state.to_nodal(approx.quad().clone());
            Ok(Measurement {
                error: approx.difference(&refn)?.l2_norm(),
                uncertainty: r.uncertainty,
            })
        }
    }
}
