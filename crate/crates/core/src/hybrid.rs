//! Collided/uncollided splitting with relabeling at every `t_m = mΔt`.
//!
//! On each interval the uncollided part is advanced exactly at the quadrature
//! nodes; its angular average drives a P_N solve for the collided part started
//! from zero; at the interval end the collided expansion is evaluated at the
//! nodes and folded into the uncollided part.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{
    l2_norm, MomentField, NodalAngularField, ScalarField, SpatialGrid, SpectralField,
};
use crate::harmonics::{assemble_coupling, build_sphere_quadrature, SphereQuadrature};
use crate::quadrature::composite_gauss;
use crate::transport::{absorption_wrap, PnPropagator, ProblemSpec, Source, UncollidedEvolution};

/// State at an interval start (collided part zero) or at a left limit.
#[derive(Debug, Clone)]
pub struct HybridState {
    pub uncollided: NodalAngularField,
    pub collided: MomentField,
    pub interval: usize,
    pub time: f64,
}

impl HybridState {
    /// `ψ_u = g` at the nodes, `ψ_c = 0`.
    pub fn initial(g: &MomentField, quad: Arc<SphereQuadrature>, n: usize) -> Self {
        Self {
            uncollided: g.to_nodal(quad),
            collided: MomentField::zeros(*g.grid(), n),
            interval: 0,
            time: 0.0,
        }
    }

    /// `ψ_u + ψ_c` at the nodes.
    pub fn total(&self) -> Result<NodalAngularField> {
        remap(&self.uncollided, &self.collided)
    }
}

/// Diagnostics of one interval `[t_{m-1}, t_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalDiagnostics {
    pub m: usize,
    pub t_m: f64,
    pub uncollided_norm_start: f64,
    pub uncollided_norm_end: f64,
    pub collided_norm_end: f64,
    pub remap_residual: f64,
    pub source_residual: f64,
    pub cumulative_error: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HybridDiagnostics {
    pub intervals: Vec<IntervalDiagnostics>,
}

impl HybridDiagnostics {
    /// CSV rows `m,t_m,unc_norm,col_norm,remap_residual,source_residual,cumulative_error`.
    pub fn to_csv_rows(&self) -> Vec<String> {
        let mut rows = vec![
            "m,t_m,unc_norm,col_norm,remap_residual,source_residual,cumulative_error".to_string(),
        ];
        for d in &self.intervals {
            let err = d
                .cumulative_error
                .map(|e| format!("{e:.17e}"))
                .unwrap_or_default();
            rows.push(format!(
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}",
                d.m,
                d.t_m,
                d.uncollided_norm_end,
                d.collided_norm_end,
                d.remap_residual,
                d.source_residual,
                err
            ));
        }
        rows
    }

    pub fn max_remap_residual(&self) -> f64 {
        self.intervals
            .iter()
            .map(|d| d.remap_residual)
            .fold(0.0, f64::max)
    }

    pub fn max_source_residual(&self) -> f64 {
        self.intervals
            .iter()
            .map(|d| d.source_residual)
            .fold(0.0, f64::max)
    }
}

/// `ψ_u + Σ_a c_a m_a(Ω_j)`.
pub fn remap(u: &NodalAngularField, c: &MomentField) -> Result<NodalAngularField> {
    if u.grid() != c.grid() {
        return Err(Error::Domain(
            "remap operands live on different grids".into(),
        ));
    }
    if u.quad().exactness() < 2 * c.max_degree() {
        return Err(Error::Precondition(format!(
            "quadrature exactness {} < 2N = {}",
            u.quad().exactness(),
            2 * c.max_degree()
        )));
    }
    if c.is_zero() {
        return Ok(u.clone());
    }
    let mut out = u.clone();
    out.add_assign(&c.to_nodal(u.quad().clone()))?;
    Ok(out)
}

/// Angular averages `(1/4π) Σ_j w_j u_j(τ)` of the uncollided part at the
/// sample times, starting from `u` at `t_start`.
pub fn uncollided_average_source(
    u: &NodalAngularField,
    t_start: f64,
    times: &[f64],
    eps: f64,
    sigma: f64,
    q: &Source,
) -> Result<Vec<ScalarField>> {
    if times.iter().any(|&t| t < t_start) {
        return Err(Error::Precondition(
            "sample time precedes the interval start".into(),
        ));
    }
    Ok(UncollidedEvolution::new(u, t_start, eps, sigma, q).average_at(times))
}

/// Hybrid integrator for fixed `(N, ε, σ)` and node set.
#[derive(Debug)]
pub struct HybridSolver {
    grid: SpatialGrid,
    n: usize,
    eps: f64,
    sigma: f64,
    quad: Arc<SphereQuadrature>,
    prop: PnPropagator,
}

impl HybridSolver {
    pub fn new(
        grid: SpatialGrid,
        n: usize,
        eps: f64,
        sigma: f64,
        quad: Arc<SphereQuadrature>,
        active: &[bool],
    ) -> Result<Self> {
        if quad.exactness() < 2 * n {
            return Err(Error::Precondition(format!(
                "quadrature exactness {} < 2N = {}; remap would alias",
                quad.exactness(),
                2 * n
            )));
        }
        let coupling = assemble_coupling(n.max(1))?;
        let prop = PnPropagator::scattering(grid, n, eps, sigma, &coupling, active)?;
        Ok(Self {
            grid,
            n,
            eps,
            sigma,
            quad,
            prop,
        })
    }

    pub fn quad(&self) -> &Arc<SphereQuadrature> {
        &self.quad
    }

    /// Advance one relabel interval of length `dt`. Returns the state after the
    /// remap plus the left-limit diagnostics.
    pub fn step(
        &self,
        state: &HybridState,
        dt: f64,
        q: &Source,
    ) -> Result<(HybridState, IntervalDiagnostics, NodalAngularField)> {
        if !state.collided.is_zero() {
            return Err(Error::Precondition(
                "collided part must vanish at an interval start".into(),
            ));
        }
        let a = state.time;
        let b = a + dt;
        let evo = UncollidedEvolution::new(&state.uncollided, a, self.eps, self.sigma, q);
        let u_end = evo.at(b);

        let mut collided = MomentField::zeros(self.grid, self.n);
        if self.sigma > 0.0 {
            let amp = self.sigma / (self.eps * self.eps) * (4.0 * PI).sqrt();
            let grid = self.grid;
            let n = self.n;
            let sampler = |tau: f64| {
                let flux = evo.at(tau).scalar_flux();
                let mut f = MomentField::zeros(grid, n);
                let w = f.width();
                for (idx, c) in flux.coeffs().iter().enumerate() {
                    f.data_mut()[idx * w] = c * amp;
                }
                f
            };
            collided = self.prop.step(&collided, a, dt, Some(&sampler));
        }

        // Zero-mode mass balance: Δ(uncollided mass) + collided mass = ∫ q mass.
        let source_residual = match self.grid.index_of([0, 0, 0]) {
            Some(i0) => {
                let m_u = |f: &NodalAngularField| f.scalar_flux().coeffs()[i0] * (4.0 * PI).sqrt();
                let rule = composite_gauss(20, 4, a, b);
                let q_in: Complex64 = rule
                    .iter()
                    .map(|&(t, w)| q.moments_at(self.grid, t, 0).mode(i0)[0] * w)
                    .sum();
                let c00 = collided.mode(i0)[0];
                (m_u(&u_end) - m_u(&state.uncollided) + c00 - q_in).norm()
            }
            None => 0.0,
        };

        let total = remap(&u_end, &collided)?;
        let before = u_end.project(self.n)?;
        let after = total.project(self.n)?;
        let remap_residual = after
            .data()
            .iter()
            .zip(before.data())
            .zip(collided.data())
            .map(|((x, y), c)| (x - y - c).norm())
            .fold(0.0, f64::max);

        let diag = IntervalDiagnostics {
            m: state.interval + 1,
            t_m: b,
            uncollided_norm_start: state.uncollided.l2_norm(),
            uncollided_norm_end: u_end.l2_norm(),
            collided_norm_end: l2_norm(&collided),
            remap_residual,
            source_residual,
            cumulative_error: None,
        };
        let next = HybridState {
            uncollided: total.clone(),
            collided: MomentField::zeros(self.grid, self.n),
            interval: state.interval + 1,
            time: b,
        };
        Ok((next, diag, total))
    }
}

/// One interval with a freshly built solver.
pub fn hybrid_step(
    state: &HybridState,
    dt: f64,
    eps: f64,
    sigma: f64,
    q: &Source,
    n: usize,
) -> Result<HybridState> {
    let grid = *state.uncollided.grid();
    let active = vec![true; grid.num_modes()];
    let solver = HybridSolver::new(
        grid,
        n,
        eps,
        sigma,
        state.uncollided.quad().clone(),
        &active,
    )?;
    Ok(solver.step(state, dt, q)?.0)
}

/// Result of a full hybrid run.
#[derive(Debug, Clone)]
pub struct HybridRun {
    /// `ψ_u + ψ_c` at `T⁻`, nodal, for the original (possibly absorbing) problem.
    pub total: NodalAngularField,
    pub diagnostics: HybridDiagnostics,
}

/// Error oracle called with `(t_m, total at t_m⁻)`.
pub type ErrorOracle<'a> = &'a (dyn Fn(f64, &NodalAngularField) -> Result<f64> + Sync);

/// Run `M = T/Δt` intervals of the hybrid at degree `N` with a product rule of
/// the given polar order. Absorbing problems are solved through the
/// pure-scattering transform and scaled back.
pub fn run_hybrid(
    spec: &ProblemSpec,
    n: usize,
    polar_order: usize,
    oracle: Option<ErrorOracle<'_>>,
) -> Result<HybridRun> {
    spec.validate()?;
    let m = spec.steps()?;
    let wrap = absorption_wrap(spec)?;
    let s = &wrap.scattering;
    let quad = Arc::new(build_sphere_quadrature(polar_order)?);
    let solver = HybridSolver::new(
        s.grid(),
        n,
        s.eps,
        s.sigma_t,
        quad.clone(),
        &s.active_modes(),
    )?;
    let mut state = HybridState::initial(&s.g, quad, n);
    let mut diagnostics = HybridDiagnostics::default();
    let mut total = state.uncollided.clone();
    for j in 0..m {
        let (next, mut d, left) = solver.step(&state, spec.dt, &s.q)?;
        // Keep the schedule exact: t_m = m Δt.
        state = HybridState {
            time: (j + 1) as f64 * spec.dt,
            ..next
        };
        total = left.scaled(wrap.post_scale(d.t_m));
        if let Some(f) = oracle {
            d.cumulative_error = Some(f(d.t_m, &total)?);
        }
        diagnostics.intervals.push(d);
    }
    Ok(HybridRun { total, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::{project, MomentVector};
    use crate::transport::characteristics;

    fn grid() -> SpatialGrid {
        SpatialGrid::new(1, 5).unwrap()
    }

    fn spec(g: MomentField, eps: f64, sigma: f64, dt: f64) -> ProblemSpec {
        ProblemSpec {
            eps,
            sigma_t: sigma,
            sigma_a: 0.0,
            g,
            q: Source::zero(),
            t_final: 1.0,
            dt,
        }
    }

    #[test]
    fn average_source_examples() {
        let quad = Arc::new(build_sphere_quadrature(6).unwrap());
        let one = ScalarField::constant(grid(), 1.0);
        let u = NodalAngularField::separable(&one, quad.clone(), &vec![2.5; quad.len()]).unwrap();
        let avg =
            uncollided_average_source(&u, 0.0, &[0.0, 0.3], 1.0, 0.0, &Source::zero()).unwrap();
        assert!(avg.iter().all(|f| (f.mean() - 2.5).abs() < 1e-14));

        let m10 = MomentField::separable(&one, &MomentVector::unit(1, 1, 0)).to_nodal(quad.clone());
        let avg = uncollided_average_source(&m10, 0.0, &[0.2], 1.0, 0.5, &Source::zero()).unwrap();
        assert!(avg[0].l2_norm() < 1e-14);

        let (eps, sigma) = (0.5, 0.8);
        let avg =
            uncollided_average_source(&u, 1.0, &[1.1, 1.4], eps, sigma, &Source::zero()).unwrap();
        for (f, t) in avg.iter().zip([0.1, 0.4]) {
            assert!((f.mean() - 2.5 * (-sigma * t / (eps * eps)).exp()).abs() < 1e-14);
        }
        assert!(uncollided_average_source(&u, 1.0, &[0.5], eps, sigma, &Source::zero()).is_err());
    }

    #[test]
    fn remap_examples() {
        let quad = Arc::new(build_sphere_quadrature(6).unwrap());
        let one = ScalarField::constant(grid(), 1.0);
        let u = NodalAngularField::separable(&one, quad.clone(), &vec![0.7; quad.len()]).unwrap();
        assert_eq!(remap(&u, &MomentField::zeros(grid(), 3)).unwrap(), u);

        let zero = NodalAngularField::zeros(grid(), quad.clone());
        let c = MomentField::separable(&one, &MomentVector::unit(3, 0, 0));
        let r = remap(&zero, &c).unwrap();
        let i0 = grid().index_of([0, 0, 0]).unwrap();
        for v in r.mode(i0) {
            assert!((v.re - 1.0 / (4.0 * PI).sqrt()).abs() < 1e-15);
        }

        let cx = ScalarField::cosine(grid(), [1, 0, 0], 1.0).unwrap();
        let mut cv = MomentVector::zeros(3);
        cv.set(0, 0, 0.4);
        cv.set(2, -1, 1.0);
        let c = MomentField::separable(&cx, &cv);
        let r = remap(&u, &c).unwrap();
        let lhs = r.project(3).unwrap().scalar_flux();
        let rhs = u.project(3).unwrap().scalar_flux();
        let d = lhs.sub(&rhs).unwrap().sub(&c.scalar_flux()).unwrap();
        assert!(d.l2_norm() < 1e-12);

        let coarse = Arc::new(build_sphere_quadrature(2).unwrap());
        let uc = NodalAngularField::zeros(grid(), coarse);
        assert!(matches!(remap(&uc, &c), Err(Error::Precondition(_))));
        let other = NodalAngularField::zeros(SpatialGrid::new(1, 7).unwrap(), quad);
        assert!(remap(&other, &c).is_err());
    }

    #[test]
    fn streaming_hybrid_is_exact() {
        let cx = ScalarField::cosine(grid(), [1, 0, 0], 1.0).unwrap();
        let mut v = MomentVector::zeros(2);
        v.set(0, 0, 1.0);
        v.set(2, 1, 0.4);
        let s = spec(MomentField::separable(&cx, &v), 1.0, 0.0, 0.25);
        let run = run_hybrid(&s, 3, 12, None).unwrap();
        let quad = run.total.quad().clone();
        let exact = characteristics(&s, quad, 1.0).unwrap();
        assert!(run.total.difference(&exact).unwrap().l2_norm() < 1e-12);
        assert!(run
            .diagnostics
            .intervals
            .iter()
            .all(|d| d.collided_norm_end == 0.0));
    }

    #[test]
    fn zero_data_stays_zero() {
        let s = spec(MomentField::zeros(grid(), 1), 0.5, 1.0, 0.5);
        let run = run_hybrid(&s, 2, 6, None).unwrap();
        assert_eq!(run.total.l2_norm(), 0.0);
    }

    #[test]
    fn single_interval_equals_one_step() {
        let cx = ScalarField::cosine(grid(), [1, 0, 0], 1.0).unwrap();
        let g = MomentField::separable(&cx, &MomentVector::unit(1, 1, 0));
        let s = spec(g.clone(), 0.7, 1.0, 1.0);
        let run = run_hybrid(&s, 2, 8, None).unwrap();
        let quad = run.total.quad().clone();
        let st = HybridState::initial(&g, quad, 2);
        let one = hybrid_step(&st, 1.0, 0.7, 1.0, &Source::zero(), 2).unwrap();
        assert!(one.uncollided.difference(&run.total).unwrap().l2_norm() < 1e-14);
        assert!(one.collided.is_zero());
    }

    #[test]
    fn interval_invariants() {
        let cx = ScalarField::cosine(grid(), [1, 0, 0], 1.0).unwrap();
        let mut v = MomentVector::zeros(2);
        v.set(0, 0, 1.0);
        v.set(1, 0, 0.5);
        let (eps, sigma, dt) = (0.8, 0.6, 0.25);
        let s = spec(MomentField::separable(&cx, &v), eps, sigma, dt);
        let run = run_hybrid(&s, 3, 10, None).unwrap();
        for d in &run.diagnostics.intervals {
            let f = (-sigma * dt / (eps * eps)).exp();
            assert!((d.uncollided_norm_end - f * d.uncollided_norm_start).abs() < 1e-12);
            assert!(d.remap_residual < 1e-12);
            assert!(d.source_residual < 1e-10, "{}", d.source_residual);
        }
        assert_eq!(run.diagnostics.to_csv_rows().len(), 5);
    }

    #[test]
    fn quadrature_refinement_is_stable() {
        let cx = ScalarField::cosine(grid(), [1, 0, 0], 1.0).unwrap();
        let g = MomentField::separable(&cx, &MomentVector::unit(0, 0, 0));
        let s = spec(g, 1.0, 0.5, 0.5);
        let a = run_hybrid(&s, 3, 10, None)
            .unwrap()
            .total
            .project(6)
            .unwrap();
        let b = run_hybrid(&s, 3, 20, None)
            .unwrap()
            .total
            .project(6)
            .unwrap();
        assert!(l2_norm(&a.difference(&b).unwrap()) < 1e-9);
    }

    #[test]
    fn weak_quadrature_is_rejected() {
        let s = spec(MomentField::zeros(grid(), 1), 0.5, 1.0, 0.5);
        assert!(matches!(
            run_hybrid(&s, 6, 3, None),
            Err(Error::Precondition(_))
        ));
        let mut bad = s.clone();
        bad.dt = 0.3;
        assert!(matches!(
            run_hybrid(&bad, 2, 6, None),
            Err(Error::Config { .. })
        ));
        let _ = project(&[0.0; 2], 0, &build_sphere_quadrature(1).unwrap()).unwrap();
    }
}
