//! Reference dynamics: monolithic P_N evolution by per-mode matrix
//! exponentials, exact uncollided transport at quadrature nodes, the diffusion
//! limit, and the absorption transformation.
//!
//! Moment equations are written as `∂_t c = L_k c + q̂` with
//! `L_k = -(i/ε) Σ k_i A^{(i)} - D`, where `D` is diagonal: rate `d0` on the
//! `(0,0)` moment and `d1` on every `l >= 1` moment. Pure scattering uses
//! `d0 = 0, d1 = σ/ε²`; the absorbing equation uses `d0 = σ_a, d1 = σ_t/ε²`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{MomentField, NodalAngularField, ScalarField, SpatialGrid, SpectralField};
use crate::harmonics::{num_moments, CouplingSet, SphereQuadrature};
use crate::quadrature::gauss_legendre_on;

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Gauss points per Duhamel sub-step.
pub const DUHAMEL_ORDER: usize = 8;

/// Sub-steps are sized so that `h · (decay + |k|/ε) <= STEP_STIFFNESS`.
pub const STEP_STIFFNESS: f64 = 1.0;

/// `e^{rate·t} · Σ_n poly[n] t^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeProfile {
    pub rate: f64,
    pub poly: Vec<f64>,
}

impl TimeProfile {
    pub fn constant(c: f64) -> Self {
        Self {
            rate: 0.0,
            poly: vec![c],
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let p = self.poly.iter().rev().fold(0.0, |acc, c| acc * t + c);
        (self.rate * t).exp() * p
    }

    /// Multiply by `e^{dr·t}`.
    pub fn with_extra_rate(&self, dr: f64) -> Self {
        Self {
            rate: self.rate + dr,
            poly: self.poly.clone(),
        }
    }
}

/// One separable source term `f(t) · F(x, Ω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceTerm {
    pub field: MomentField,
    pub time: TimeProfile,
}

/// Source `q = Σ_j f_j(t) F_j(x, Ω)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Source {
    pub terms: Vec<SourceTerm>,
}

impl Source {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn single(field: MomentField, time: TimeProfile) -> Self {
        Self {
            terms: vec![SourceTerm { field, time }],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.field.is_zero() || t.time.poly.iter().all(|c| *c == 0.0))
    }

    /// Moments of `q(t)` truncated or padded to degree `n`.
    pub fn moments_at(&self, grid: SpatialGrid, t: f64, n: usize) -> MomentField {
        let mut out = MomentField::zeros(grid, n);
        for term in &self.terms {
            let f = term.time.eval(t);
            if f != 0.0 {
                out.axpy(f, &term.field.resized(n))
                    .expect("source on problem grid");
            }
        }
        out
    }

    /// Whether any term is nonzero on spatial mode `idx`.
    pub fn touches_mode(&self, idx: usize) -> bool {
        self.terms.iter().any(|t| !t.field.mode_is_zero(idx))
    }
}

/// Physical and discretization data of one transport problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub eps: f64,
    pub sigma_t: f64,
    pub sigma_a: f64,
    pub g: MomentField,
    pub q: Source,
    pub t_final: f64,
    pub dt: f64,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::Domain(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if !(self.sigma_a >= 0.0 && self.sigma_t >= self.sigma_a) {
            return Err(Error::Domain(format!(
                "need 0 <= sigma_a <= sigma_t, got sigma_a={}, sigma_t={}",
                self.sigma_a, self.sigma_t
            )));
        }
        if !(self.t_final > 0.0 && self.dt > 0.0) {
            return Err(Error::Domain("T and dt must be positive".into()));
        }
        for term in &self.q.terms {
            if term.field.grid() != self.g.grid() {
                return Err(Error::Domain(
                    "source and initial data on different grids".into(),
                ));
            }
        }
        self.steps().map(|_| ())
    }

    pub fn grid(&self) -> SpatialGrid {
        *self.g.grid()
    }

    /// Number of relabel intervals `M = T/Δt`.
    pub fn steps(&self) -> Result<usize> {
        schedule_steps(self.t_final, self.dt)
    }

    /// Effective scattering coefficient of the transformed problem,
    /// `σ_t - ε² σ_a`.
    pub fn sigma(&self) -> f64 {
        self.sigma_t - self.eps * self.eps * self.sigma_a
    }

    /// Spatial modes on which the solution can be nonzero.
    pub fn active_modes(&self) -> Vec<bool> {
        let grid = self.grid();
        (0..grid.num_modes())
            .map(|idx| !self.g.mode_is_zero(idx) || self.q.touches_mode(idx))
            .collect()
    }

    /// Largest angular degree carried by the data.
    pub fn data_degree(&self) -> usize {
        self.q
            .terms
            .iter()
            .map(|t| t.field.max_degree())
            .fold(self.g.max_degree(), usize::max)
    }
}

/// `M` with `M·dt = T` to relative precision `1e-12`, else a config error.
pub fn schedule_steps(t_final: f64, dt: f64) -> Result<usize> {
    let m = (t_final / dt).round();
    if m < 1.0 || (m * dt - t_final).abs() > 1e-12 * t_final.max(1.0) {
        return Err(Error::config(
            None,
            format!("M*dt != T (T={t_final}, dt={dt})"),
        ));
    }
    Ok(m as usize)
}

/// Dense complex generator for one spatial mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeOperator {
    pub k: [i64; 3],
    pub matrix: DMatrix<Complex64>,
}

/// `-(i/ε) Σ k_i A^{(i)} - (σ/ε²)(I - Π₀)`.
pub fn assemble_mode_operator(
    k: [i64; 3],
    n: usize,
    eps: f64,
    sigma: f64,
    coupling: &CouplingSet,
) -> Result<ModeOperator> {
    mode_operator_with_rates(k, n, eps, 0.0, sigma / (eps * eps), coupling)
}

/// Same operator with explicit decay rates on the `(0,0)` and `l >= 1` moments.
pub fn mode_operator_with_rates(
    k: [i64; 3],
    n: usize,
    eps: f64,
    d0: f64,
    d1: f64,
    coupling: &CouplingSet,
) -> Result<ModeOperator> {
    if coupling.max_degree() < n {
        return Err(Error::Domain(format!(
            "coupling degree {} below N = {n}",
            coupling.max_degree()
        )));
    }
    let dim = num_moments(n);
    let mut m = DMatrix::from_element(dim, dim, C0);
    if n > 0 {
        for (axis, &ki) in k.iter().enumerate() {
            if ki != 0 {
                let a = coupling.full_matrix(axis, n);
                m += a.map(|x| Complex64::new(0.0, -(ki as f64) * x / eps));
            }
        }
    }
    for i in 0..dim {
        m[(i, i)] -= if i == 0 { d0 } else { d1 };
    }
    Ok(ModeOperator { k, matrix: m })
}

/// Spectral abscissa bound used for sub-step sizing.
fn stiffness(eps: f64, d0: f64, d1: f64, kmax: f64) -> f64 {
    d0.max(d1) + kmax / eps
}

/// Real similarity form of one mode: `L = J M J⁻¹` with `J = diag(i^l)`,
/// split into independent components of the coupling graph.
#[derive(Debug, Clone)]
struct ModeBlocks {
    comps: Vec<(Vec<usize>, DMatrix<f64>)>,
}

/// Per-mode exponentials for one step size.
#[derive(Debug)]
pub struct ExpSet {
    modes: Vec<Option<Vec<DMatrix<f64>>>>,
}

/// Exact per-mode propagator of the P_N moment system with Gauss–Duhamel
/// source quadrature.
#[derive(Debug)]
pub struct PnPropagator {
    grid: SpatialGrid,
    n: usize,
    eps: f64,
    d0: f64,
    d1: f64,
    rho: f64,
    phase: Vec<Complex64>,
    blocks: Vec<Option<ModeBlocks>>,
    cache: Mutex<HashMap<u64, Arc<ExpSet>>>,
}

impl PnPropagator {
    /// Pure-scattering propagator with `σ` on the degree `>= 1` moments.
    pub fn scattering(
        grid: SpatialGrid,
        n: usize,
        eps: f64,
        sigma: f64,
        coupling: &CouplingSet,
        active: &[bool],
    ) -> Result<Self> {
        Self::with_rates(grid, n, eps, 0.0, sigma / (eps * eps), coupling, active)
    }

    pub fn with_rates(
        grid: SpatialGrid,
        n: usize,
        eps: f64,
        d0: f64,
        d1: f64,
        coupling: &CouplingSet,
        active: &[bool],
    ) -> Result<Self> {
        if n > 0 && coupling.max_degree() < n {
            return Err(Error::Domain(format!(
                "coupling degree {} below N = {n}",
                coupling.max_degree()
            )));
        }
        if active.len() != grid.num_modes() {
            return Err(Error::Domain("active-mode mask length mismatch".into()));
        }
        let dim = num_moments(n);
        let full: Vec<DMatrix<f64>> = if n > 0 {
            (0..grid.dim())
                .map(|ax| coupling.full_matrix(ax, n))
                .collect()
        } else {
            Vec::new()
        };
        let degree: Vec<usize> = (0..dim).map(|a| (a as f64).sqrt() as usize).collect();
        let degree: Vec<usize> = degree
            .iter()
            .enumerate()
            .map(|(a, &l)| if (l + 1) * (l + 1) <= a { l + 1 } else { l })
            .collect();
        let phase: Vec<Complex64> = degree
            .iter()
            .map(|&l| match l % 4 {
                0 => Complex64::new(1.0, 0.0),
                1 => Complex64::new(0.0, 1.0),
                2 => Complex64::new(-1.0, 0.0),
                _ => Complex64::new(0.0, -1.0),
            })
            .collect();
        let mut kmax: f64 = 0.0;
        let blocks = (0..grid.num_modes())
            .map(|idx| {
                if !active[idx] {
                    return None;
                }
                let k = grid.wavenumber(idx);
                kmax = kmax.max(((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt());
                let mut kmat = DMatrix::<f64>::zeros(dim, dim);
                for (ax, a) in full.iter().enumerate() {
                    if k[ax] != 0 {
                        kmat += a * (k[ax] as f64);
                    }
                }
                let mut m = DMatrix::<f64>::zeros(dim, dim);
                for r in 0..dim {
                    for c in 0..dim {
                        let v = kmat[(r, c)];
                        if v != 0.0 {
                            let sgn = if degree[c] > degree[r] { 1.0 } else { -1.0 };
                            m[(r, c)] = sgn * v / eps;
                        }
                    }
                    m[(r, r)] = -(if r == 0 { d0 } else { d1 });
                }
                Some(ModeBlocks {
                    comps: split_components(&m),
                })
            })
            .collect();
        Ok(Self {
            grid,
            n,
            eps,
            d0,
            d1,
            rho: stiffness(eps, d0, d1, kmax),
            phase,
            blocks,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `(d0, d1)` decay rates.
    pub fn rates(&self) -> (f64, f64) {
        (self.d0, self.d1)
    }

    /// Stiffness `max(d0, d1) + |k|_max / ε` over active modes.
    pub fn stiffness(&self) -> f64 {
        self.rho
    }

    /// Sub-steps needed on an interval of length `h` when a source is present.
    pub fn substeps(&self, h: f64) -> usize {
        ((h * self.rho / STEP_STIFFNESS).ceil() as usize).max(1)
    }

    fn exp_set(&self, h: f64) -> Arc<ExpSet> {
        let key = h.to_bits();
        if let Some(e) = self.cache.lock().expect("cache lock").get(&key) {
            return e.clone();
        }
        let modes = self
            .blocks
            .par_iter()
            .map(|b| {
                b.as_ref().map(|mb| {
                    mb.comps
                        .iter()
                        .map(|(_, m)| (m * h).exp())
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        let e = Arc::new(ExpSet { modes });
        self.cache
            .lock()
            .expect("cache lock")
            .insert(key, e.clone());
        e
    }

    /// `out += scale · exp(h L_k) v` on mode `idx`.
    fn apply_mode(
        &self,
        e: &ExpSet,
        idx: usize,
        v: &[Complex64],
        out: &mut [Complex64],
        scale: f64,
    ) {
        let (Some(blocks), Some(exps)) = (&self.blocks[idx], &e.modes[idx]) else {
            return;
        };
        for ((ids, _), ex) in blocks.comps.iter().zip(exps) {
            let w: Vec<Complex64> = ids.iter().map(|&a| v[a] * self.phase[a].conj()).collect();
            if w.iter().all(|c| *c == C0) {
                continue;
            }
            let re = DVector::from_iterator(w.len(), w.iter().map(|c| c.re));
            let im = DVector::from_iterator(w.len(), w.iter().map(|c| c.im));
            let yr = ex * re;
            let yi = ex * im;
            for (p, &a) in ids.iter().enumerate() {
                out[a] += self.phase[a] * Complex64::new(yr[p], yi[p]) * scale;
            }
        }
    }

    /// `exp(h L) c` on every mode.
    pub fn propagate(&self, c: &MomentField, h: f64) -> MomentField {
        if h == 0.0 {
            return c.clone();
        }
        let e = self.exp_set(h);
        let mut out = MomentField::zeros(self.grid, self.n);
        let w = num_moments(self.n);
        out.data_mut()
            .par_chunks_mut(w)
            .enumerate()
            .for_each(|(idx, dst)| {
                self.apply_mode(&e, idx, c.mode(idx), dst, 1.0);
            });
        out
    }

    /// One step of length `h` from time `t0` with source sampler `src`,
    /// sub-stepped so that `h_sub · ρ <= 1` when a source is present.
    pub fn step(
        &self,
        c: &MomentField,
        t0: f64,
        h: f64,
        src: Option<&(dyn Fn(f64) -> MomentField + Sync)>,
    ) -> MomentField {
        let Some(src) = src else {
            return self.propagate(c, h);
        };
        let nsub = self.substeps(h);
        let hs = h / nsub as f64;
        let rule = gauss_legendre_on(DUHAMEL_ORDER, 0.0, hs);
        let mut state = c.clone();
        for j in 0..nsub {
            let ts = t0 + j as f64 * hs;
            state = self.substep(&state, ts, hs, &rule, src);
        }
        state
    }

    fn substep(
        &self,
        c: &MomentField,
        t0: f64,
        h: f64,
        rule: &[(f64, f64)],
        src: &(dyn Fn(f64) -> MomentField + Sync),
    ) -> MomentField {
        let mut out = self.propagate(c, h);
        let samples: Vec<(f64, MomentField, Arc<ExpSet>)> = rule
            .iter()
            .map(|&(tau, w)| (w, src(t0 + tau).resized(self.n), self.exp_set(h - tau)))
            .collect();
        let w = num_moments(self.n);
        out.data_mut()
            .par_chunks_mut(w)
            .enumerate()
            .for_each(|(idx, dst)| {
                for (wt, q, e) in &samples {
                    self.apply_mode(e, idx, q.mode(idx), dst, *wt);
                }
            });
        out
    }
}

/// Connected components of the off-diagonal sparsity graph, with the
/// corresponding principal submatrices.
fn split_components(m: &DMatrix<f64>) -> Vec<(Vec<usize>, DMatrix<f64>)> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let nx = p[y];
            p[y] = r;
            y = nx;
        }
        r
    }
    for r in 0..n {
        for c in (r + 1)..n {
            if m[(r, c)] != 0.0 || m[(c, r)] != 0.0 {
                let (a, b) = (find(&mut parent, r), find(&mut parent, c));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_slot: HashMap<usize, usize> = HashMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        let slot = *root_slot.entry(r).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[slot].push(i);
    }
    groups
        .into_iter()
        .map(|ids| {
            let k = ids.len();
            let sub = DMatrix::from_fn(k, k, |r, c| m[(ids[r], ids[c])]);
            (ids, sub)
        })
        .collect()
}

/// Snapshots of a P_N run.
#[derive(Debug, Clone)]
pub struct PnTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<MomentField>,
    pub norms: Vec<f64>,
}

impl PnTrajectory {
    pub fn final_state(&self) -> &MomentField {
        self.states
            .last()
            .expect("trajectory has the initial state")
    }

    /// CSV rows `time,norm,flux_min,flux_max`.
    pub fn diagnostics_csv(&self) -> Vec<String> {
        let mut rows = vec!["time,norm,flux_min,flux_max".to_string()];
        for ((t, s), n) in self.times.iter().zip(&self.states).zip(&self.norms) {
            let (lo, hi) = s.scalar_flux().extrema();
            rows.push(format!("{t:.17e},{n:.17e},{lo:.17e},{hi:.17e}"));
        }
        rows
    }
}

/// Monolithic P_N solve of the (possibly absorbing) problem with initial
/// data `P_N g`, recording the state at `times` (ascending, within `(0, T]`).
pub fn solve_pn(spec: &ProblemSpec, n: usize, times: &[f64]) -> Result<PnTrajectory> {
    spec.validate()?;
    let coupling = if n > 0 {
        Some(crate::harmonics::assemble_coupling(n)?)
    } else {
        None
    };
    let eps2 = spec.eps * spec.eps;
    let (d0, d1) = (spec.sigma_a, spec.sigma_t / eps2);
    let prop = match &coupling {
        Some(c) => {
            PnPropagator::with_rates(spec.grid(), n, spec.eps, d0, d1, c, &spec.active_modes())?
        }
        None => PnPropagator::with_rates(
            spec.grid(),
            0,
            spec.eps,
            d0,
            d1,
            &crate::harmonics::assemble_coupling(1)?,
            &spec.active_modes(),
        )?,
    };
    solve_pn_with(&prop, spec, times)
}

/// P_N solve with a prebuilt propagator whose rates match `spec`.
pub fn solve_pn_with(
    prop: &PnPropagator,
    spec: &ProblemSpec,
    times: &[f64],
) -> Result<PnTrajectory> {
    let n = prop.degree();
    let mut t = 0.0;
    let mut state = spec.g.resized(n);
    let mut out = PnTrajectory {
        times: vec![0.0],
        norms: vec![crate::grid::l2_norm(&state)],
        states: vec![state.clone()],
    };
    let grid = spec.grid();
    let q = spec.q.clone();
    let sampler = move |tau: f64| q.moments_at(grid, tau, n);
    let src: Option<&(dyn Fn(f64) -> MomentField + Sync)> = if spec.q.is_zero() {
        None
    } else {
        Some(&sampler)
    };
    for &te in times {
        if te < t || te > spec.t_final * (1.0 + 1e-12) {
            return Err(Error::Precondition(format!(
                "output time {te} outside [{t}, T={}]",
                spec.t_final
            )));
        }
        state = prop.step(&state, t, te - t, src);
        t = te;
        out.times.push(t);
        out.norms.push(crate::grid::l2_norm(&state));
        out.states.push(state.clone());
    }
    Ok(out)
}

/// One P_N step of the pure-scattering system (see [`PnPropagator::step`]).
pub fn step_pn(
    state: &MomentField,
    h: f64,
    source: Option<&(dyn Fn(f64) -> MomentField + Sync)>,
    eps: f64,
    sigma: f64,
) -> Result<MomentField> {
    if !(h > 0.0) {
        return Err(Error::Precondition("step length must be positive".into()));
    }
    let n = state.max_degree();
    let coupling = crate::harmonics::assemble_coupling(n.max(1))?;
    let grid = *state.grid();
    let active: Vec<bool> = (0..grid.num_modes())
        .map(|i| !state.mode_is_zero(i) || source.is_some())
        .collect();
    let prop = PnPropagator::scattering(grid, n, eps, sigma, &coupling, &active)?;
    Ok(prop.step(state, 0.0, h, source))
}

/// `φ_0..φ_kmax` at `z`, with `φ_k(z) = Σ_j z^j/(j+k)!`.
pub fn phi_functions(z: Complex64, kmax: usize) -> Vec<Complex64> {
    let mut out = vec![C0; kmax + 1];
    if z.norm() <= 4.0 {
        for (k, o) in out.iter_mut().enumerate() {
            let mut term = Complex64::new(1.0 / factorial(k), 0.0);
            let mut sum = term;
            for j in 1..80 {
                term *= z / (j + k) as f64;
                sum += term;
                if term.norm() < 1e-18 * sum.norm() {
                    break;
                }
            }
            *o = sum;
        }
    } else {
        out[0] = z.exp();
        for k in 1..=kmax {
            out[k] = (out[k - 1] - 1.0 / factorial(k - 1)) / z;
        }
    }
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|x| x as f64).product()
}

fn binom(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// `∫_0^h e^{λ(h-u)} f(a+u) du` for the profile `f`.
fn duhamel_profile(lambda: Complex64, a: f64, h: f64, prof: &TimeProfile) -> Complex64 {
    if h == 0.0 {
        return C0;
    }
    let deg = prof.poly.len().saturating_sub(1);
    let phis = phi_functions((lambda - prof.rate) * h, deg + 1);
    let pre = (prof.rate * (a + h)).exp();
    let mut total = C0;
    for (n, &pn) in prof.poly.iter().enumerate() {
        if pn == 0.0 {
            continue;
        }
        for m in 0..=n {
            let c = binom(n, m) * a.powi((n - m) as i32) * factorial(m) * h.powi(m as i32 + 1);
            total += phis[m + 1] * (pn * c);
        }
    }
    total * pre
}

/// Closed-form uncollided evolution from a fixed start state: at node `j`
/// and mode `k` the field obeys `∂_t u = λ u + q` with
/// `λ = -(i k·Ω_j/ε + σ/ε²)`.
#[derive(Debug, Clone)]
pub struct UncollidedEvolution {
    start: NodalAngularField,
    t0: f64,
    lambda: Vec<Vec<Complex64>>,
    source: Vec<(NodalAngularField, TimeProfile)>,
    active: Vec<usize>,
}

impl UncollidedEvolution {
    pub fn new(u0: &NodalAngularField, t0: f64, eps: f64, sigma: f64, q: &Source) -> Self {
        let grid = *u0.grid();
        let quad = u0.quad().clone();
        let source: Vec<(NodalAngularField, TimeProfile)> = q
            .terms
            .iter()
            .filter(|t| !t.field.is_zero())
            .map(|t| (t.field.to_nodal(quad.clone()), t.time.clone()))
            .collect();
        let active: Vec<usize> = (0..grid.num_modes())
            .filter(|&i| !u0.mode_is_zero(i) || source.iter().any(|(f, _)| !f.mode_is_zero(i)))
            .collect();
        let lambda = (0..grid.num_modes())
            .map(|idx| {
                let k = grid.wavenumber(idx);
                quad.nodes()
                    .iter()
                    .map(|om| {
                        let kd = k[0] as f64 * om[0] + k[1] as f64 * om[1] + k[2] as f64 * om[2];
                        Complex64::new(-sigma / (eps * eps), -kd / eps)
                    })
                    .collect()
            })
            .collect();
        Self {
            start: u0.clone(),
            t0,
            lambda,
            source,
            active,
        }
    }

    /// State at absolute time `t >= t0`.
    pub fn at(&self, t: f64) -> NodalAngularField {
        let h = t - self.t0;
        let mut out = NodalAngularField::zeros(*self.start.grid(), self.start.quad().clone());
        let nn = out.width();
        let updates: Vec<(usize, Vec<Complex64>)> = self
            .active
            .par_iter()
            .map(|&idx| {
                let lam = &self.lambda[idx];
                let u0 = self.start.mode(idx);
                let mut v: Vec<Complex64> = u0
                    .iter()
                    .zip(lam)
                    .map(|(u, l)| if *u == C0 { C0 } else { u * (l * h).exp() })
                    .collect();
                for (f, prof) in &self.source {
                    let fm = f.mode(idx);
                    if fm.iter().all(|c| *c == C0) {
                        continue;
                    }
                    for ((o, l), fj) in v.iter_mut().zip(lam).zip(fm) {
                        if *fj != C0 {
                            *o += fj * duhamel_profile(*l, self.t0, h, prof);
                        }
                    }
                }
                (idx, v)
            })
            .collect();
        for (idx, v) in updates {
            out.data_mut()[idx * nn..(idx + 1) * nn].copy_from_slice(&v);
        }
        out
    }

    /// Scalar flux `(1/4π) Σ_j w_j u_j(t)` at each time, without building
    /// the full nodal state.
    pub fn average_at(&self, times: &[f64]) -> Vec<ScalarField> {
        times.iter().map(|&t| self.at(t).scalar_flux()).collect()
    }
}

/// Exact uncollided solve on `[a, b]`.
pub fn solve_uncollided(
    u0: &NodalAngularField,
    a: f64,
    b: f64,
    eps: f64,
    sigma: f64,
    q: &Source,
) -> Result<NodalAngularField> {
    if !(b > a) {
        return Err(Error::Precondition(format!("empty interval [{a}, {b}]")));
    }
    Ok(UncollidedEvolution::new(u0, a, eps, sigma, q).at(b))
}

/// Exact free-streaming solution (`σ = 0`) of the problem at time `t`, at the
/// nodes of `quad`.
pub fn characteristics(
    spec: &ProblemSpec,
    quad: Arc<SphereQuadrature>,
    t: f64,
) -> Result<NodalAngularField> {
    let g = spec.g.to_nodal(quad);
    if t == 0.0 {
        return Ok(g);
    }
    solve_uncollided(&g, 0.0, t, spec.eps, 0.0, &spec.q)
}

/// Spectral solve of `∂_t Ψ = ∇·(∇Ψ/(3σ_t)) - σ_a Ψ` from the angular
/// average of `g`.
pub fn solve_diffusion(spec: &ProblemSpec, t_end: f64) -> Result<ScalarField> {
    if spec.sigma_t <= 0.0 {
        return Err(Error::Domain(
            "diffusion coefficient needs sigma_t > 0".into(),
        ));
    }
    let grid = spec.grid();
    let flux = spec.g.scalar_flux();
    let coeffs = (0..grid.num_modes())
        .map(|idx| {
            let k = grid.wavenumber(idx);
            let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
            flux.coeffs()[idx] * (-t_end * (k2 / (3.0 * spec.sigma_t) + spec.sigma_a)).exp()
        })
        .collect();
    ScalarField::from_coeffs(grid, coeffs)
}

/// Pure-scattering counterpart of an absorbing problem.
#[derive(Debug, Clone)]
pub struct AbsorptionWrap {
    pub scattering: ProblemSpec,
    pub sigma_a: f64,
}

impl AbsorptionWrap {
    /// Factor mapping the transformed solution back: `e^{-σ_a t}`.
    pub fn post_scale(&self, t: f64) -> f64 {
        (-self.sigma_a * t).exp()
    }
}

/// `ψ = e^{σ_a t} Ψ` turns the absorbing problem into pure scattering with
/// `σ = σ_t - ε² σ_a` and source `e^{σ_a t} Q`.
pub fn absorption_wrap(spec: &ProblemSpec) -> Result<AbsorptionWrap> {
    if spec.sigma_a > spec.sigma_t {
        return Err(Error::Domain(format!(
            "sigma_a = {} exceeds sigma_t = {}",
            spec.sigma_a, spec.sigma_t
        )));
    }
    let sigma = spec.sigma();
    if sigma < 0.0 {
        return Err(Error::Domain(format!(
            "scaled scattering sigma_t - eps^2 sigma_a = {sigma} is negative"
        )));
    }
    let mut s = spec.clone();
    s.sigma_t = sigma;
    s.sigma_a = 0.0;
    for term in &mut s.q.terms {
        term.time = term.time.with_extra_rate(spec.sigma_a);
    }
    Ok(AbsorptionWrap {
        scattering: s,
        sigma_a: spec.sigma_a,
    })
}

/// Scalar-flux distance to the diffusion limit at `t`.
pub fn diffusion_gap(pn_state: &MomentField, spec: &ProblemSpec, t: f64) -> Result<f64> {
    let d = solve_diffusion(spec, t)?;
    Ok(pn_state.scalar_flux().sub(&d)?.l2_norm())
}

/// Unit isotropic moment amplitude: `c · m_{0,0}` has scalar flux `c/√(4π)`.
pub fn isotropic_amplitude(scalar_value: f64) -> f64 {
    scalar_value * (4.0 * PI).sqrt()
}
