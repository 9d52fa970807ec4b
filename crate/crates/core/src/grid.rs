//! Truncated Fourier representation on the periodic box `[0, 2π)^d` and the
//! mixed space-angle norms.
//!
//! A field is stored by spatial wavenumber; each wavenumber carries a block of
//! complex coefficients (angular moments or nodal values). Physical fields are
//! real, so coefficients at `-k` are conjugates of those at `k`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::harmonics::{
    eval_all, num_moments, project, sobolev_weight, MomentVector, SphereQuadrature,
};
use crate::quadrature::composite_gauss;
use crate::transport::ProblemSpec;

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Periodic grid with `modes` (odd) retained wavenumbers on each of `dim` axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpatialGrid {
    dim: usize,
    modes: usize,
    points: usize,
}

impl SpatialGrid {
    pub fn new(dim: usize, modes: usize) -> Result<Self> {
        Self::with_points(dim, modes, (3 * modes).div_ceil(2).max(modes))
    }

    pub fn with_points(dim: usize, modes: usize, points: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Domain(format!("dimension {dim} not in 1..=3")));
        }
        if modes.is_multiple_of(2) {
            return Err(Error::Domain(format!(
                "modes per axis must be odd, got {modes}"
            )));
        }
        if points < modes {
            return Err(Error::Domain(format!(
                "{points} points cannot hold {modes} modes"
            )));
        }
        Ok(Self { dim, modes, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modes_per_axis(&self) -> usize {
        self.modes
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    /// Largest retained wavenumber per axis.
    pub fn kmax(&self) -> i64 {
        (self.modes as i64 - 1) / 2
    }

    pub fn num_modes(&self) -> usize {
        self.modes.pow(self.dim as u32)
    }

    /// Wavenumber triple of mode `idx`; inactive axes carry zero.
    pub fn wavenumber(&self, idx: usize) -> [i64; 3] {
        let mut k = [0i64; 3];
        let mut rest = idx;
        for slot in k.iter_mut().take(self.dim) {
            *slot = (rest % self.modes) as i64 - self.kmax();
            rest /= self.modes;
        }
        k
    }

    pub fn index_of(&self, k: [i64; 3]) -> Option<usize> {
        let mut idx = 0;
        let mut stride = 1;
        for (axis, &ki) in k.iter().enumerate() {
            if axis >= self.dim {
                if ki != 0 {
                    return None;
                }
                continue;
            }
            if ki.abs() > self.kmax() {
                return None;
            }
            idx += (ki + self.kmax()) as usize * stride;
            stride *= self.modes;
        }
        Some(idx)
    }

    /// Index of the mode at `-k`.
    pub fn mirror(&self, idx: usize) -> usize {
        self.num_modes() - 1 - idx
    }

    /// Volume of the box, `(2π)^d`.
    pub fn volume(&self) -> f64 {
        (2.0 * PI).powi(self.dim as i32)
    }

    /// Largest Euclidean wavenumber norm on the grid.
    pub fn max_wavenumber_norm(&self) -> f64 {
        self.kmax() as f64 * (self.dim as f64).sqrt()
    }

    /// True if any active component sits at the grid edge.
    fn on_outer_shell(&self, idx: usize) -> bool {
        let k = self.wavenumber(idx);
        k.iter().take(self.dim).any(|ki| ki.abs() == self.kmax())
    }

    fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.dim {
            return Err(Error::Domain(format!(
                "axis {axis} inactive on a {}-d grid",
                self.dim
            )));
        }
        Ok(())
    }
}

/// Common access to mode-blocked spectral storage.
pub trait SpectralField: Clone {
    fn grid(&self) -> &SpatialGrid;
    /// Coefficients per spatial mode.
    fn width(&self) -> usize;
    fn data(&self) -> &[Complex64];
    fn data_mut(&mut self) -> &mut [Complex64];

    fn mode(&self, idx: usize) -> &[Complex64] {
        let w = self.width();
        &self.data()[idx * w..(idx + 1) * w]
    }

    fn mode_mut(&mut self, idx: usize) -> &mut [Complex64] {
        let w = self.width();
        &mut self.data_mut()[idx * w..(idx + 1) * w]
    }
}

/// Multiply mode `k` by `i k_axis`.
pub fn spatial_derivative<F: SpectralField>(f: &F, axis: usize) -> Result<F> {
    f.grid().check_axis(axis)?;
    let mut out = f.clone();
    let grid = *f.grid();
    for idx in 0..grid.num_modes() {
        let factor = Complex64::new(0.0, grid.wavenumber(idx)[axis] as f64);
        out.mode_mut(idx).iter_mut().for_each(|c| *c *= factor);
    }
    Ok(out)
}

/// Real scalar field on the box, stored by Fourier coefficient
/// `f(x) = Σ_k f_k e^{i k·x}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: SpatialGrid,
    coeffs: Vec<Complex64>,
}

impl SpectralField for ScalarField {
    fn grid(&self) -> &SpatialGrid {
        &self.grid
    }
    fn width(&self) -> usize {
        1
    }
    fn data(&self) -> &[Complex64] {
        &self.coeffs
    }
    fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }
}

impl ScalarField {
    pub fn zeros(grid: SpatialGrid) -> Self {
        Self {
            grid,
            coeffs: vec![C0; grid.num_modes()],
        }
    }

    pub fn constant(grid: SpatialGrid, c: f64) -> Self {
        let mut f = Self::zeros(grid);
        let i0 = grid.index_of([0, 0, 0]).expect("zero mode exists");
        f.coeffs[i0] = Complex64::new(c, 0.0);
        f
    }

    /// `amp · cos(k·x)`.
    pub fn cosine(grid: SpatialGrid, k: [i64; 3], amp: f64) -> Result<Self> {
        Self::plane_wave(grid, k, Complex64::new(0.5 * amp, 0.0))
    }

    /// `amp · sin(k·x)`.
    pub fn sine(grid: SpatialGrid, k: [i64; 3], amp: f64) -> Result<Self> {
        Self::plane_wave(grid, k, Complex64::new(0.0, -0.5 * amp))
    }

    fn plane_wave(grid: SpatialGrid, k: [i64; 3], c: Complex64) -> Result<Self> {
        let mut f = Self::zeros(grid);
        let ip = grid.index_of(k).ok_or_else(|| Error::Resolution {
            r: 0,
            s: 0,
            msg: format!("wavenumber {k:?} exceeds the grid band"),
        })?;
        let im = grid.mirror(ip);
        if ip == im {
            f.coeffs[ip] = Complex64::new(2.0 * c.re, 0.0);
        } else {
            f.coeffs[ip] += c;
            f.coeffs[im] += c.conj();
        }
        Ok(f)
    }

    pub fn from_coeffs(grid: SpatialGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.num_modes() {
            return Err(Error::Domain(
                "coefficient count does not match grid".into(),
            ));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: [i64; 3]) -> Complex64 {
        self.grid.index_of(k).map(|i| self.coeffs[i]).unwrap_or(C0)
    }

    /// Sample `f` on the physical grid and keep the retained band. Content
    /// outside the band above `1e-10` (relative) is rejected.
    pub fn from_fn(grid: SpatialGrid, f: impl Fn([f64; 3]) -> f64) -> Result<Self> {
        let p = grid.points;
        let h = 2.0 * PI / p as f64;
        let total = p.pow(grid.dim as u32);
        let mut vals = vec![C0; total];
        for (lin, v) in vals.iter_mut().enumerate() {
            let mut x = [0.0; 3];
            let mut rest = lin;
            for xi in x.iter_mut().take(grid.dim) {
                *xi = (rest % p) as f64 * h;
                rest /= p;
            }
            *v = Complex64::new(f(x), 0.0);
        }
        fft_nd(&mut vals, grid.dim, p, false);
        let scale = 1.0 / total as f64;
        let mut out = Self::zeros(grid);
        let mut kept = 0.0;
        let mut all = 0.0;
        for (lin, v) in vals.iter().enumerate() {
            let c = v * scale;
            all += c.norm_sqr();
            if let Some(idx) = grid.index_of(bin_to_k(lin, grid.dim, p)) {
                out.coeffs[idx] = c;
                kept += c.norm_sqr();
            }
        }
        if all - kept > 1e-10 * all.max(f64::MIN_POSITIVE) {
            return Err(Error::Resolution {
                r: 0,
                s: 0,
                msg: format!(
                    "sampled function has {:.3e} energy outside the band",
                    all - kept
                ),
            });
        }
        Ok(out)
    }

    /// Values on the physical grid, row-major with axis 0 fastest.
    pub fn to_physical(&self) -> Vec<f64> {
        let p = self.grid.points;
        let total = p.pow(self.grid.dim as u32);
        let mut vals = vec![C0; total];
        for (idx, c) in self.coeffs.iter().enumerate() {
            let k = self.grid.wavenumber(idx);
            vals[k_to_bin(k, self.grid.dim, p)] = *c;
        }
        fft_nd(&mut vals, self.grid.dim, p, true);
        vals.iter().map(|v| v.re).collect()
    }

    /// Evaluate at one point.
    pub fn eval(&self, x: [f64; 3]) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(idx, c)| {
                let k = self.grid.wavenumber(idx);
                let ph = k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2];
                (c * Complex64::from_polar(1.0, ph)).re
            })
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.grid.volume() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= a);
        out
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        let mut out = self.clone();
        out.coeffs
            .iter_mut()
            .zip(&other.coeffs)
            .for_each(|(a, b)| *a -= b);
        Ok(out)
    }

    /// Mean over the box.
    pub fn mean(&self) -> f64 {
        self.coeff([0, 0, 0]).re
    }

    /// `(min, max)` of the physical samples.
    pub fn extrema(&self) -> (f64, f64) {
        self.to_physical()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

fn bin_to_k(lin: usize, dim: usize, p: usize) -> [i64; 3] {
    let mut k = [0i64; 3];
    let mut rest = lin;
    for slot in k.iter_mut().take(dim) {
        let b = (rest % p) as i64;
        *slot = if b > p as i64 / 2 { b - p as i64 } else { b };
        rest /= p;
    }
    k
}

fn k_to_bin(k: [i64; 3], dim: usize, p: usize) -> usize {
    let mut lin = 0;
    let mut stride = 1;
    for &ki in k.iter().take(dim) {
        lin += ki.rem_euclid(p as i64) as usize * stride;
        stride *= p;
    }
    lin
}

/// In-place multidimensional FFT over a `p^dim` cube, axis 0 fastest.
/// `inverse` uses `e^{+i}` without normalization.
fn fft_nd(vals: &mut [Complex64], dim: usize, p: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(p)
    } else {
        planner.plan_fft_forward(p)
    };
    let mut line = vec![C0; p];
    let total = vals.len();
    for axis in 0..dim {
        let stride = p.pow(axis as u32);
        for start in 0..total {
            if !(start / stride).is_multiple_of(p) {
                continue;
            }
            for (j, l) in line.iter_mut().enumerate() {
                *l = vals[start + j * stride];
            }
            fft.process(&mut line);
            for (j, l) in line.iter().enumerate() {
                vals[start + j * stride] = *l;
            }
        }
    }
}

fn same_grid(a: &SpatialGrid, b: &SpatialGrid) -> Result<()> {
    if a != b {
        return Err(Error::Domain("fields live on different grids".into()));
    }
    Ok(())
}

/// Angular moments (degree `<= N`) per spatial mode.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentField {
    grid: SpatialGrid,
    max_degree: usize,
    data: Vec<Complex64>,
}

impl SpectralField for MomentField {
    fn grid(&self) -> &SpatialGrid {
        &self.grid
    }
    fn width(&self) -> usize {
        num_moments(self.max_degree)
    }
    fn data(&self) -> &[Complex64] {
        &self.data
    }
    fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }
}

impl MomentField {
    pub fn zeros(grid: SpatialGrid, max_degree: usize) -> Self {
        Self {
            grid,
            max_degree,
            data: vec![C0; grid.num_modes() * num_moments(max_degree)],
        }
    }

    /// `f(x) · u(Ω)` for a scalar field `f` and angular expansion `u`.
    pub fn separable(spatial: &ScalarField, angular: &MomentVector) -> Self {
        let mut out = Self::zeros(spatial.grid, angular.max_degree());
        let w = out.width();
        for (idx, c) in spatial.coeffs.iter().enumerate() {
            if *c == C0 {
                continue;
            }
            for (o, a) in out.data[idx * w..(idx + 1) * w]
                .iter_mut()
                .zip(angular.coeffs())
            {
                *o = c * a;
            }
        }
        out
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Truncate or zero-pad to another degree.
    pub fn resized(&self, max_degree: usize) -> Self {
        let mut out = Self::zeros(self.grid, max_degree);
        let (wi, wo) = (self.width(), out.width());
        let w = wi.min(wo);
        for idx in 0..self.grid.num_modes() {
            out.data[idx * wo..idx * wo + w].copy_from_slice(&self.data[idx * wi..idx * wi + w]);
        }
        out
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        same_grid(&self.grid, &other.grid)?;
        if other.max_degree != self.max_degree {
            return Err(Error::Domain("degree mismatch".into()));
        }
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn axpy(&mut self, a: f64, other: &Self) -> Result<()> {
        same_grid(&self.grid, &other.grid)?;
        if other.max_degree != self.max_degree {
            return Err(Error::Domain("degree mismatch".into()));
        }
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(x, y)| *x += a * y);
        Ok(())
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|c| *c *= a);
        out
    }

    /// `self - other`, padding the lower-degree operand.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        let n = self.max_degree.max(other.max_degree);
        let mut a = self.resized(n);
        let b = other.resized(n);
        a.data.iter_mut().zip(&b.data).for_each(|(x, y)| *x -= y);
        Ok(a)
    }

    /// Degree-`l` coefficient block at mode `idx`.
    pub fn block(&self, idx: usize, l: usize) -> &[Complex64] {
        &self.mode(idx)[l * l..(l + 1) * (l + 1)]
    }

    /// Coefficient at wavenumber `k` and harmonic `(l, kk)`.
    pub fn coeff(&self, k: [i64; 3], l: usize, kk: i64) -> Complex64 {
        match self.grid.index_of(k) {
            Some(idx) if l <= self.max_degree && kk.unsigned_abs() as usize <= l => {
                self.mode(idx)[((l * l + l) as i64 + kk) as usize]
            }
            _ => C0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|c| *c == C0)
    }

    /// Whether mode `idx` carries any nonzero coefficient.
    pub fn mode_is_zero(&self, idx: usize) -> bool {
        self.mode(idx).iter().all(|c| *c == C0)
    }

    /// Scalar flux `u_{0,0}(x) / √(4π)`.
    pub fn scalar_flux(&self) -> ScalarField {
        let w = self.width();
        let f = 1.0 / (4.0 * PI).sqrt();
        ScalarField {
            grid: self.grid,
            coeffs: (0..self.grid.num_modes())
                .map(|i| self.data[i * w] * f)
                .collect(),
        }
    }

    /// Same coefficients at degrees `> n`, zero below.
    pub fn tail(&self, n: usize) -> Self {
        let mut out = self.clone();
        let w = self.width();
        let cut = num_moments(n).min(w);
        for idx in 0..self.grid.num_modes() {
            out.data[idx * w..idx * w + cut]
                .iter_mut()
                .for_each(|c| *c = C0);
        }
        out
    }

    /// Nodal values at the quadrature nodes.
    pub fn to_nodal(&self, quad: Arc<SphereQuadrature>) -> NodalAngularField {
        let table = quad.basis_table(self.max_degree);
        let mut out = NodalAngularField::zeros(self.grid, quad);
        let w = self.width();
        let nn = out.width();
        for idx in 0..self.grid.num_modes() {
            let m = &self.data[idx * w..(idx + 1) * w];
            if m.iter().all(|c| *c == C0) {
                continue;
            }
            for (j, row) in table.iter().enumerate() {
                out.data[idx * nn + j] = row.iter().zip(m).map(|(b, c)| c * b).sum();
            }
        }
        out
    }

    /// Debug CSV rows `k1,k2,k3,l,k,re,im` for nonzero entries.
    pub fn to_csv_rows(&self) -> Vec<String> {
        let mut rows = vec!["k1,k2,k3,l,k,re,im".to_string()];
        let w = self.width();
        for idx in 0..self.grid.num_modes() {
            let k = self.grid.wavenumber(idx);
            for a in 0..w {
                let c = self.data[idx * w + a];
                if c != C0 {
                    let s = crate::harmonics::SphericalIndex::from_ordinal(a);
                    rows.push(format!(
                        "{},{},{},{},{},{:.17e},{:.17e}",
                        k[0], k[1], k[2], s.degree, s.order, c.re, c.im
                    ));
                }
            }
        }
        rows
    }
}

/// Values at sphere-quadrature nodes per spatial mode.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalAngularField {
    grid: SpatialGrid,
    quad: Arc<SphereQuadrature>,
    data: Vec<Complex64>,
}

impl SpectralField for NodalAngularField {
    fn grid(&self) -> &SpatialGrid {
        &self.grid
    }
    fn width(&self) -> usize {
        self.quad.len()
    }
    fn data(&self) -> &[Complex64] {
        &self.data
    }
    fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }
}

impl NodalAngularField {
    pub fn zeros(grid: SpatialGrid, quad: Arc<SphereQuadrature>) -> Self {
        let n = quad.len();
        Self {
            grid,
            quad,
            data: vec![C0; grid.num_modes() * n],
        }
    }

    /// `f(x) · v(Ω)` with angular values given at the nodes.
    pub fn separable(
        spatial: &ScalarField,
        quad: Arc<SphereQuadrature>,
        nodal: &[f64],
    ) -> Result<Self> {
        if nodal.len() != quad.len() {
            return Err(Error::Domain(
                "nodal length does not match quadrature".into(),
            ));
        }
        let mut out = Self::zeros(spatial.grid, quad);
        let w = out.width();
        for (idx, c) in spatial.coeffs.iter().enumerate() {
            if *c == C0 {
                continue;
            }
            for (o, v) in out.data[idx * w..(idx + 1) * w].iter_mut().zip(nodal) {
                *o = c * v;
            }
        }
        Ok(out)
    }

    pub fn quad(&self) -> &Arc<SphereQuadrature> {
        &self.quad
    }

    pub fn mode_is_zero(&self, idx: usize) -> bool {
        self.mode(idx).iter().all(|c| *c == C0)
    }

    /// Moments up to degree `n` by quadrature, per spatial mode.
    pub fn project(&self, n: usize) -> Result<MomentField> {
        // Validate exactness through the scalar routine once.
        project(&vec![0.0; self.quad.len()], n, &self.quad)?;
        let table = self.quad.basis_table(n);
        let weights = self.quad.weights();
        let mut out = MomentField::zeros(self.grid, n);
        let w = out.width();
        let nn = self.width();
        for idx in 0..self.grid.num_modes() {
            let vals = &self.data[idx * nn..(idx + 1) * nn];
            if vals.iter().all(|c| *c == C0) {
                continue;
            }
            let dst = &mut out.data[idx * w..(idx + 1) * w];
            for ((row, wt), v) in table.iter().zip(weights).zip(vals) {
                let wv = v * *wt;
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += wv * b;
                }
            }
        }
        Ok(out)
    }

    /// Scalar flux `(1/4π) Σ_j w_j v_j`.
    pub fn scalar_flux(&self) -> ScalarField {
        let nn = self.width();
        let coeffs = (0..self.grid.num_modes())
            .map(|idx| {
                self.data[idx * nn..(idx + 1) * nn]
                    .iter()
                    .zip(self.quad.weights())
                    .map(|(v, w)| v * *w)
                    .sum::<Complex64>()
                    / (4.0 * PI)
            })
            .collect();
        ScalarField {
            grid: self.grid,
            coeffs,
        }
    }

    /// Discrete `L²(X × S²)` norm with the quadrature weights.
    pub fn l2_norm(&self) -> f64 {
        let nn = self.width();
        let s: f64 = self
            .data
            .chunks(nn)
            .map(|row| {
                row.iter()
                    .zip(self.quad.weights())
                    .map(|(v, w)| w * v.norm_sqr())
                    .sum::<f64>()
            })
            .sum();
        (self.grid.volume() * s).sqrt()
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        same_grid(&self.grid, &other.grid)?;
        if self.quad != other.quad {
            return Err(Error::Domain("fields use different quadratures".into()));
        }
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn difference(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        let neg = other.scaled(-1.0);
        out.add_assign(&neg)?;
        Ok(out)
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|c| *c *= a);
        out
    }
}

/// `‖f‖_{L²(X×S²)}` by Parseval in space and angle.
pub fn l2_norm(f: &MomentField) -> f64 {
    (f.grid.volume() * f.data.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
}

/// Weighted sum `Σ_k |k^α|² ‖u_l(k)‖²`, returned per degree.
fn weighted_block_energy(f: &MomentField, exps: &[u32]) -> Vec<f64> {
    let mut out = vec![0.0; f.max_degree + 1];
    for idx in 0..f.grid.num_modes() {
        let k = f.grid.wavenumber(idx);
        let mut factor = 1.0;
        for (axis, &e) in exps.iter().enumerate() {
            factor *= (k[axis] as f64).powi(2 * e as i32);
        }
        if factor == 0.0 {
            continue;
        }
        for (l, o) in out.iter_mut().enumerate() {
            *o += factor * f.block(idx, l).iter().map(|c| c.norm_sqr()).sum::<f64>();
        }
    }
    out
}

/// Compositions of `r` into `d` non-negative parts with multinomial counts.
fn compositions(r: u32, d: usize) -> Vec<(Vec<u32>, f64)> {
    fn rec(r: u32, d: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if d == 1 {
            cur.push(r);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for a in 0..=r {
            cur.push(a);
            rec(r - a, d - 1, cur, out);
            cur.pop();
        }
    }
    let mut parts = Vec::new();
    rec(r, d, &mut Vec::new(), &mut parts);
    let fact = |n: u32| (1..=n).map(|x| x as f64).product::<f64>();
    parts
        .into_iter()
        .map(|p| {
            let mult = fact(r) / p.iter().map(|&a| fact(a)).product::<f64>();
            (p, mult)
        })
        .collect()
}

/// `|f|_{H^{r,s}}`: the `H^{0,s}` semi-norm of every ordered `r`-fold spatial
/// derivative, summed (first powers) over the `d^r` derivative multi-indices.
pub fn hrs_seminorm(f: &MomentField, r: u32, s: u32) -> f64 {
    compositions(r, f.grid.dim)
        .into_iter()
        .map(|(exps, mult)| {
            let e = weighted_block_energy(f, &exps);
            let v: f64 = e
                .iter()
                .enumerate()
                .skip(s as usize)
                .map(|(l, x)| sobolev_weight(l, s) * x)
                .sum();
            mult * (f.grid.volume() * v).sqrt()
        })
        .sum()
}

/// Relative energy on the outermost spatial shell, an aliasing indicator.
pub fn outer_shell_fraction(f: &MomentField) -> f64 {
    let mut shell = 0.0;
    let mut all = 0.0;
    for idx in 0..f.grid.num_modes() {
        let e: f64 = f.mode(idx).iter().map(|c| c.norm_sqr()).sum();
        all += e;
        if f.grid.on_outer_shell(idx) {
            shell += e;
        }
    }
    if all == 0.0 {
        0.0
    } else {
        shell / all
    }
}

/// Relative outer-shell energy above which data counts as unresolved.
pub const RESOLUTION_TOL: f64 = 1e-10;

/// Chebyshev–Lobatto samples used for the time supremum of a source norm.
const SUP_SAMPLES: usize = 33;

/// Data semi-norms for one `(r, s)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DataNorms {
    /// `|g|_{H^{r,s}}`.
    pub g: f64,
    /// `sup_t |q(t)|_{H^{r,s}}` over `[0, T]`.
    pub q_sup: f64,
    /// `∫_0^T |q(t)|_{H^{r,s}} dt`.
    pub q_l1: f64,
}

/// Data norms keyed by `(r, s)`.
pub type NormMap = BTreeMap<(u32, u32), DataNorms>;

/// Semi-norms of the initial data and source of `spec` for each requested pair.
pub fn data_norms(spec: &ProblemSpec, pairs: &[(u32, u32)]) -> Result<NormMap> {
    let fields = std::iter::once(&spec.g).chain(spec.q.terms.iter().map(|t| &t.field));
    let shell = fields.map(outer_shell_fraction).fold(0.0, f64::max);
    if shell > RESOLUTION_TOL {
        let (r, s) = pairs.first().copied().unwrap_or((0, 0));
        return Err(Error::Resolution {
            r,
            s,
            msg: format!("outer spatial shell carries relative energy {shell:.3e}"),
        });
    }
    let grid = spec.grid();
    let n = spec.data_degree();
    let t_final = spec.t_final;
    let sup_times: Vec<f64> = (0..SUP_SAMPLES)
        .map(|j| 0.5 * t_final * (1.0 - (PI * j as f64 / (SUP_SAMPLES - 1) as f64).cos()))
        .collect();
    let l1_rule = composite_gauss(16, 4, 0.0, t_final);
    let q_sup_fields: Vec<MomentField> = sup_times
        .iter()
        .map(|&t| spec.q.moments_at(grid, t, n))
        .collect();
    let q_l1_fields: Vec<(f64, MomentField)> = l1_rule
        .iter()
        .map(|&(t, w)| (w, spec.q.moments_at(grid, t, n)))
        .collect();
    let mut out = NormMap::new();
    for &(r, s) in pairs {
        let g = hrs_seminorm(&spec.g, r, s);
        let (q_sup, q_l1) = if spec.q.is_zero() {
            (0.0, 0.0)
        } else {
            let sup = q_sup_fields
                .iter()
                .map(|f| hrs_seminorm(f, r, s))
                .fold(0.0, f64::max);
            let l1 = q_l1_fields
                .iter()
                .map(|(w, f)| w * hrs_seminorm(f, r, s))
                .sum();
            (sup, l1)
        };
        out.insert((r, s), DataNorms { g, q_sup, q_l1 });
    }
    Ok(out)
}

/// Nodal values of every harmonic up to `n`, convenience for tests.
pub fn nodal_basis(quad: &SphereQuadrature, n: usize) -> Vec<Vec<f64>> {
    quad.nodes().iter().map(|d| eval_all(n, *d)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::build_sphere_quadrature;

    fn g1() -> SpatialGrid {
        SpatialGrid::new(1, 5).unwrap()
    }

    #[test]
    fn wavenumber_indexing() {
        let g = SpatialGrid::new(3, 5).unwrap();
        for idx in 0..g.num_modes() {
            let k = g.wavenumber(idx);
            assert_eq!(g.index_of(k), Some(idx));
            let m = g.wavenumber(g.mirror(idx));
            assert_eq!(m, [-k[0], -k[1], -k[2]]);
        }
        assert!(SpatialGrid::new(1, 4).is_err());
        assert!(SpatialGrid::new(4, 5).is_err());
    }

    #[test]
    fn transform_round_trip() {
        let g = SpatialGrid::new(2, 5).unwrap();
        let f = ScalarField::from_fn(g, |x| {
            1.0 + x[0].cos() * (2.0 * x[1]).sin() - 0.3 * x[1].cos()
        })
        .unwrap();
        let phys = f.to_physical();
        let p = g.points_per_axis();
        let h = 2.0 * PI / p as f64;
        for (lin, v) in phys.iter().enumerate() {
            let x = [(lin % p) as f64 * h, (lin / p) as f64 * h, 0.0];
            let e = 1.0 + x[0].cos() * (2.0 * x[1]).sin() - 0.3 * x[1].cos();
            assert!((v - e).abs() < 1e-12);
            assert!((f.eval(x) - e).abs() < 1e-12);
        }
        assert!(ScalarField::from_fn(g1(), |x| (4.0 * x[0]).cos()).is_err());
    }

    #[test]
    fn derivative_examples() {
        let f = ScalarField::cosine(g1(), [1, 0, 0], 1.0).unwrap();
        let d = spatial_derivative(&f, 0).unwrap();
        let s = ScalarField::sine(g1(), [1, 0, 0], -1.0).unwrap();
        assert!(d.sub(&s).unwrap().l2_norm() < 1e-12);
        let dd = spatial_derivative(&d, 0).unwrap();
        assert!(dd.sub(&f.scaled(-1.0)).unwrap().l2_norm() < 1e-12);
        let c = ScalarField::constant(g1(), 2.0);
        assert_eq!(spatial_derivative(&c, 0).unwrap().l2_norm(), 0.0);
        assert!(spatial_derivative(&c, 1).is_err());
    }

    #[test]
    fn derivatives_commute() {
        let g = SpatialGrid::new(2, 5).unwrap();
        let f = ScalarField::from_fn(g, |x| (x[0] + 2.0 * x[1]).sin() + x[1].cos()).unwrap();
        let m = MomentField::separable(&f, &MomentVector::unit(1, 1, -1));
        let ab = spatial_derivative(&spatial_derivative(&m, 0).unwrap(), 1).unwrap();
        let ba = spatial_derivative(&spatial_derivative(&m, 1).unwrap(), 0).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn norm_examples() {
        let one = ScalarField::constant(g1(), 1.0);
        let f = MomentField::separable(&one, &MomentVector::unit(0, 0, 0));
        assert!((l2_norm(&f) - (2.0 * PI).sqrt()).abs() < 1e-12);
        let c = ScalarField::cosine(g1(), [1, 0, 0], 1.0).unwrap();
        let f = MomentField::separable(&c, &MomentVector::unit(1, 1, 0));
        assert!((l2_norm(&f) - PI.sqrt()).abs() < 1e-12);
        assert_eq!(l2_norm(&MomentField::zeros(g1(), 2)), 0.0);

        assert!((hrs_seminorm(&f, 0, 1) - 1.5 * PI.sqrt()).abs() < 1e-12);
        assert!((hrs_seminorm(&f, 1, 1) - 1.5 * PI.sqrt()).abs() < 1e-12);
        let iso = MomentField::separable(&c, &MomentVector::unit(0, 0, 0));
        assert_eq!(hrs_seminorm(&iso, 3, 1), 0.0);
        assert!((hrs_seminorm(&f, 0, 0) - l2_norm(&f)).abs() < 1e-12);
    }

    #[test]
    fn seminorm_sums_first_powers_over_multi_indices() {
        // f = cos(x1 + x2) m_{0,0} in 2-d: each of the 4 second derivatives
        // has the same norm as f, so the sum is 4 ‖f‖.
        let g = SpatialGrid::new(2, 5).unwrap();
        let c = ScalarField::cosine(g, [1, 1, 0], 1.0).unwrap();
        let f = MomentField::separable(&c, &MomentVector::unit(0, 0, 0));
        assert!((hrs_seminorm(&f, 2, 0) - 4.0 * l2_norm(&f)).abs() < 1e-12);
    }

    #[test]
    fn scalar_flux_examples() {
        let c = ScalarField::constant(g1(), 1.0);
        let f = MomentField::separable(&c, &MomentVector::unit(0, 0, 0).scaled_by(3.0));
        assert!((f.scalar_flux().mean() - 3.0 / (4.0 * PI).sqrt()).abs() < 1e-15);
        let f = MomentField::separable(&c, &MomentVector::unit(2, 2, 1));
        assert_eq!(f.scalar_flux().l2_norm(), 0.0);
        let q = Arc::new(build_sphere_quadrature(6).unwrap());
        let nod = NodalAngularField::separable(&c, q.clone(), &vec![1.7; q.len()]).unwrap();
        let m = nod.project(4).unwrap();
        assert!((m.scalar_flux().mean() - 1.7).abs() < 1e-12);
        assert!((nod.scalar_flux().mean() - 1.7).abs() < 1e-12);
    }

    #[test]
    fn tail_identity() {
        let c = ScalarField::cosine(g1(), [2, 0, 0], 0.7).unwrap();
        let mut u = MomentVector::zeros(6);
        for (i, x) in u.coeffs_mut().iter_mut().enumerate() {
            *x = ((i * 7 % 11) as f64 - 5.0) / 3.0;
        }
        let f = MomentField::separable(&c, &u);
        for s in 0..4 {
            for n in 0..6 {
                let full = hrs_seminorm(&f, 0, s).powi(2);
                let t = hrs_seminorm(&f.tail(n), 0, s).powi(2);
                let h = hrs_seminorm(&f.resized(n), 0, s).powi(2);
                assert!((full - t - h).abs() < 1e-10 * full.max(1.0));
                assert!(hrs_seminorm(&f.resized(n), 1, s) <= hrs_seminorm(&f, 1, s) + 1e-12);
            }
        }
    }

    #[test]
    fn nodal_round_trip() {
        let c = ScalarField::cosine(g1(), [1, 0, 0], 1.0).unwrap();
        let mut u = MomentVector::zeros(3);
        u.set(3, -2, 0.5);
        u.set(1, 0, -1.0);
        let f = MomentField::separable(&c, &u);
        let q = Arc::new(build_sphere_quadrature(5).unwrap());
        let back = f.to_nodal(q).project(3).unwrap();
        assert!(l2_norm(&back.difference(&f).unwrap()) < 1e-12);
        assert!(f.to_csv_rows().len() > 1);
        assert_eq!(f.coeff([1, 0, 0], 1, 0), Complex64::new(-0.5, 0.0));
    }

    #[test]
    fn data_norms_match_seminorms() {
        use crate::transport::{ProblemSpec, Source, TimeProfile};
        let c = ScalarField::cosine(g1(), [1, 0, 0], 1.0).unwrap();
        let g = MomentField::separable(&c, &MomentVector::unit(1, 1, 0));
        let qf = MomentField::separable(&c, &MomentVector::unit(0, 0, 0));
        let ramp = TimeProfile {
            rate: 0.0,
            poly: vec![0.0, 1.0],
        };
        let spec = ProblemSpec {
            eps: 1.0,
            sigma_t: 1.0,
            sigma_a: 0.0,
            g,
            q: Source::single(qf, ramp),
            t_final: 2.0,
            dt: 1.0,
        };
        let m = data_norms(&spec, &[(0, 1), (1, 0)]).unwrap();
        assert!((m[&(0, 1)].g - 1.5 * PI.sqrt()).abs() < 1e-12);
        assert_eq!(m[&(0, 1)].q_sup, 0.0);
        let base = PI.sqrt();
        assert!((m[&(1, 0)].q_sup - 2.0 * base).abs() < 1e-12);
        assert!((m[&(1, 0)].q_l1 - 2.0 * base).abs() < 1e-12);

        let wide = SpatialGrid::new(1, 3).unwrap();
        let c3 = ScalarField::cosine(wide, [1, 0, 0], 1.0).unwrap();
        let bad = ProblemSpec {
            g: MomentField::separable(&c3, &MomentVector::unit(0, 0, 0)),
            q: Source::zero(),
            ..spec
        };
        assert!(matches!(
            data_norms(&bad, &[(2, 0)]),
            Err(Error::Resolution { r: 2, .. })
        ));
    }
}
