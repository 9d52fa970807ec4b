//! Real orthonormal spherical harmonics, product sphere quadrature, streaming
//! coupling matrices and angular Sobolev norms.
//!
//! Convention: polar axis is `x3`, no Condon–Shortley phase,
//! `m_{l,0} = N_l P_l(cos θ)`, `m_{l,k} = √2 N P_l^k cos kφ` for `k > 0` and
//! `√2 N P_l^{|k|} sin |k|φ` for `k < 0`. Coefficients are stored flat at
//! position `l² + l + k`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// Absolute tolerance for algebraic identities audited in this crate.
pub const IDENTITY_TOL: f64 = 1e-12;

const UNIT_TOL: f64 = 1e-12;

/// Degree/order pair `(l, k)` with `|k| <= l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SphericalIndex {
    pub degree: usize,
    pub order: i64,
}

impl SphericalIndex {
    pub fn new(degree: usize, order: i64) -> Result<Self> {
        if order.unsigned_abs() as usize > degree {
            return Err(Error::Domain(format!(
                "order {order} exceeds degree {degree}"
            )));
        }
        Ok(Self { degree, order })
    }

    pub fn ordinal(self) -> usize {
        offset(self.degree, self.order)
    }

    pub fn from_ordinal(p: usize) -> Self {
        let degree = (p as f64).sqrt() as usize;
        let degree = if (degree + 1) * (degree + 1) <= p {
            degree + 1
        } else if degree * degree > p {
            degree - 1
        } else {
            degree
        };
        let order = p as i64 - (degree * degree + degree) as i64;
        Self { degree, order }
    }
}

fn offset(l: usize, k: i64) -> usize {
    ((l * l + l) as i64 + k) as usize
}

/// Number of coefficients up to degree `n`.
pub fn num_moments(n: usize) -> usize {
    (n + 1) * (n + 1)
}

/// Real coefficients of an expansion truncated at degree `max_degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    max_degree: usize,
    coeffs: Vec<f64>,
}

impl MomentVector {
    pub fn zeros(max_degree: usize) -> Self {
        Self {
            max_degree,
            coeffs: vec![0.0; num_moments(max_degree)],
        }
    }

    pub fn from_coeffs(max_degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != num_moments(max_degree) {
            return Err(Error::Domain(format!(
                "expected {} coefficients for degree {max_degree}, got {}",
                num_moments(max_degree),
                coeffs.len()
            )));
        }
        Ok(Self { max_degree, coeffs })
    }

    /// Single unit coefficient at `(l, k)`.
    pub fn unit(max_degree: usize, l: usize, k: i64) -> Self {
        let mut v = Self::zeros(max_degree);
        v.coeffs[offset(l, k)] = 1.0;
        v
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn get(&self, l: usize, k: i64) -> f64 {
        if l > self.max_degree || k.unsigned_abs() as usize > l {
            return 0.0;
        }
        self.coeffs[offset(l, k)]
    }

    pub fn set(&mut self, l: usize, k: i64, v: f64) {
        self.coeffs[offset(l, k)] = v;
    }

    /// Degree-`l` block `u_l` (2l+1 entries).
    pub fn block(&self, l: usize) -> &[f64] {
        &self.coeffs[l * l..(l + 1) * (l + 1)]
    }

    /// Squared Euclidean norm of block `l`.
    pub fn block_norm_sq(&self, l: usize) -> f64 {
        self.block(l).iter().map(|x| x * x).sum()
    }

    /// L² norm over the sphere (Parseval).
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Projection onto degrees `<= n`, kept at the original length.
    pub fn truncated(&self, n: usize) -> Self {
        let mut out = self.clone();
        let cut = num_moments(n).min(out.coeffs.len());
        out.coeffs[cut..].iter_mut().for_each(|x| *x = 0.0);
        out
    }

    /// Complementary projection onto degrees `> n`.
    pub fn tail(&self, n: usize) -> Self {
        let mut out = self.clone();
        let cut = num_moments(n).min(out.coeffs.len());
        out.coeffs[..cut].iter_mut().for_each(|x| *x = 0.0);
        out
    }

    pub fn scaled_by(mut self, a: f64) -> Self {
        self.coeffs.iter_mut().for_each(|x| *x *= a);
        self
    }

    /// Copy into a vector of a different max degree (truncating or padding).
    pub fn resized(&self, max_degree: usize) -> Self {
        let mut out = Self::zeros(max_degree);
        let n = out.coeffs.len().min(self.coeffs.len());
        out.coeffs[..n].copy_from_slice(&self.coeffs[..n]);
        out
    }
}

fn check_unit(direction: [f64; 3]) -> Result<()> {
    let r = (direction[0].powi(2) + direction[1].powi(2) + direction[2].powi(2)).sqrt();
    if (r - 1.0).abs() > UNIT_TOL {
        return Err(Error::Domain(format!(
            "direction has length {r}, expected 1"
        )));
    }
    Ok(())
}

/// Normalized associated Legendre values `N_l^m P_l^m(x)` (no Condon–Shortley
/// phase, `N` including `1/√(4π)`), stored as `out[l][m]` for `m <= l <= n`.
fn normalized_legendre(n: usize, x: f64) -> Vec<Vec<f64>> {
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut p: Vec<Vec<f64>> = (0..=n).map(|l| vec![0.0; l + 1]).collect();
    p[0][0] = 1.0 / (4.0 * PI).sqrt();
    for m in 0..=n {
        if m > 0 {
            let mf = m as f64;
            p[m][m] = ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s * p[m - 1][m - 1];
        }
        if m < n {
            p[m + 1][m] = (2.0 * m as f64 + 3.0).sqrt() * x * p[m][m];
        }
        for l in (m + 2)..=n {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            p[l][m] = a * (x * p[l - 1][m] - b * p[l - 2][m]);
        }
    }
    p
}

/// All real harmonics up to degree `n` at a unit direction, in flat order.
/// The caller guarantees unit length.
pub fn eval_all(n: usize, direction: [f64; 3]) -> Vec<f64> {
    let x = direction[2].clamp(-1.0, 1.0);
    let phi = direction[1].atan2(direction[0]);
    let p = normalized_legendre(n, x);
    let mut out = vec![0.0; num_moments(n)];
    let r2 = std::f64::consts::SQRT_2;
    for l in 0..=n {
        out[offset(l, 0)] = p[l][0];
        for m in 1..=l {
            let (sn, cs) = (m as f64 * phi).sin_cos();
            out[offset(l, m as i64)] = r2 * p[l][m] * cs;
            out[offset(l, -(m as i64))] = r2 * p[l][m] * sn;
        }
    }
    out
}

/// Evaluate `m_{l,k}(Ω)`.
pub fn basis_eval(index: SphericalIndex, direction: [f64; 3]) -> Result<f64> {
    check_unit(direction)?;
    let all = eval_all(index.degree, direction);
    Ok(all[index.ordinal()])
}

/// Product Gauss–Legendre × uniform-azimuth rule on the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereQuadrature {
    nodes: Vec<[f64; 3]>,
    weights: Vec<f64>,
    exactness: usize,
    polar_order: usize,
}

impl SphereQuadrature {
    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Total polynomial degree integrated exactly.
    pub fn exactness(&self) -> usize {
        self.exactness
    }

    pub fn polar_order(&self) -> usize {
        self.polar_order
    }

    /// Basis table `B[j][a] = m_a(Ω_j)` for degrees `<= n`.
    pub fn basis_table(&self, n: usize) -> Vec<Vec<f64>> {
        self.nodes.iter().map(|&d| eval_all(n, d)).collect()
    }

    /// `∫ f dΩ` approximated by the rule.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// Build the product rule with `polar_order` Gauss points in `cos θ` and
/// `2 * polar_order` equispaced azimuths.
pub fn build_sphere_quadrature(polar_order: usize) -> Result<SphereQuadrature> {
    if polar_order == 0 {
        return Err(Error::Precondition("polar_order must be >= 1".into()));
    }
    let (mu, w) = gauss_legendre(polar_order);
    let naz = 2 * polar_order;
    let dphi = 2.0 * PI / naz as f64;
    let mut nodes = Vec::with_capacity(polar_order * naz);
    let mut weights = Vec::with_capacity(polar_order * naz);
    for (&m, &wm) in mu.iter().zip(&w) {
        let st = (1.0 - m * m).max(0.0).sqrt();
        for j in 0..naz {
            let phi = (j as f64 + 0.5) * dphi;
            let (sp, cp) = phi.sin_cos();
            nodes.push([st * cp, st * sp, m]);
            weights.push(wm * dphi);
        }
    }
    Ok(SphereQuadrature {
        nodes,
        weights,
        exactness: 2 * polar_order - 1,
        polar_order,
    })
}

/// Smallest product rule whose exactness is at least `degree`.
pub fn quadrature_for_exactness(degree: usize) -> SphereQuadrature {
    build_sphere_quadrature(degree / 2 + 1).expect("polar order is positive")
}

/// Streaming coupling blocks `a_l^{(i)}` for `l = 1..=N` and axes `i = 0,1,2`.
///
/// `a_l^{(i)}[r][c] = ∫ Ω_i m_{l-1, r-(l-1)} m_{l, c-l} dΩ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSet {
    max_degree: usize,
    blocks: [Vec<DMatrix<f64>>; 3],
}

impl CouplingSet {
    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Block `a_l^{(axis)}`, `1 <= l <= N`.
    pub fn block(&self, axis: usize, l: usize) -> &DMatrix<f64> {
        &self.blocks[axis][l - 1]
    }

    /// Full symmetric streaming matrix `A^{(axis)}` of size `(n+1)²`, `n <= N`.
    pub fn full_matrix(&self, axis: usize, n: usize) -> DMatrix<f64> {
        assert!(n <= self.max_degree);
        let dim = num_moments(n);
        let mut a = DMatrix::zeros(dim, dim);
        for l in 1..=n {
            let b = self.block(axis, l);
            let r0 = (l - 1) * (l - 1);
            let c0 = l * l;
            for r in 0..b.nrows() {
                for c in 0..b.ncols() {
                    a[(r0 + r, c0 + c)] = b[(r, c)];
                    a[(c0 + c, r0 + r)] = b[(r, c)];
                }
            }
        }
        a
    }

    /// Largest entrywise difference against another set of the same degree.
    pub fn max_abs_diff(&self, other: &CouplingSet) -> f64 {
        let mut m: f64 = 0.0;
        for axis in 0..3 {
            for (a, b) in self.blocks[axis].iter().zip(&other.blocks[axis]) {
                m = m.max((a - b).abs().max());
            }
        }
        m
    }

    /// Largest spectral norm over all blocks.
    pub fn max_spectral_norm(&self) -> f64 {
        self.blocks
            .iter()
            .flatten()
            .map(spectral_norm)
            .fold(0.0, f64::max)
    }

    /// Rows `axis,l,row,col,value` for nonzero entries.
    pub fn to_csv_rows(&self) -> Vec<String> {
        let mut rows = vec!["axis,l,row,col,value".to_string()];
        for axis in 0..3 {
            for (li, b) in self.blocks[axis].iter().enumerate() {
                for r in 0..b.nrows() {
                    for c in 0..b.ncols() {
                        if b[(r, c)] != 0.0 {
                            rows.push(format!(
                                "{},{},{},{},{:.17e}",
                                axis + 1,
                                li + 1,
                                r,
                                c,
                                b[(r, c)]
                            ));
                        }
                    }
                }
            }
        }
        rows
    }
}

/// Largest singular value of a dense matrix.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    a.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

// Complex ladder elements in the Condon–Shortley complex basis:
// <l+1,m|cos θ|l,m> etc. Indices are (l', m') for the row.
fn cos_elem(l: usize, m: i64) -> f64 {
    let lf = l as f64;
    let mf = m as f64;
    (((lf + 1.0).powi(2) - mf * mf) / ((2.0 * lf + 1.0) * (2.0 * lf + 3.0))).sqrt()
}

/// Complex matrix element `<l-1, m'| f |l, m>` for `f` in {x, y, z},
/// where the row degree is `l-1` and the column degree `l`.
fn complex_down_element(axis: usize, l: usize, mp: i64, m: i64) -> Complex64 {
    let lf = l as f64;
    let mf = m as f64;
    // sinθ e^{+iφ} Y_l^m has a (l-1, m+1) component with coefficient cp;
    // sinθ e^{-iφ} Y_l^m has a (l-1, m-1) component with coefficient cm.
    let cp = if mp == m + 1 {
        ((lf - mf) * (lf - mf - 1.0) / ((2.0 * lf - 1.0) * (2.0 * lf + 1.0)))
            .max(0.0)
            .sqrt()
    } else {
        0.0
    };
    let cm = if mp == m - 1 {
        -((lf + mf) * (lf + mf - 1.0) / ((2.0 * lf - 1.0) * (2.0 * lf + 1.0)))
            .max(0.0)
            .sqrt()
    } else {
        0.0
    };
    match axis {
        0 => Complex64::new(0.5 * (cp + cm), 0.0),
        1 => Complex64::new(0.0, -0.5) * (cp - cm),
        _ => {
            if mp == m && l >= 1 {
                Complex64::new(cos_elem(l - 1, m), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }
    }
}

/// Rows of the unitary map from complex to real harmonics at degree `l`:
/// `R_{l,k} = Σ_m U[k][m] Y_l^m`.
fn real_from_complex(l: usize) -> DMatrix<Complex64> {
    let n = 2 * l + 1;
    let mut u = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    let li = l as i64;
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    u[(l, l)] = Complex64::new(1.0, 0.0);
    for m in 1..=li {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let kp = (li + m) as usize;
        let km = (li - m) as usize;
        // k > 0
        u[(kp, kp)] = Complex64::new(sign * r2, 0.0);
        u[(kp, km)] = Complex64::new(r2, 0.0);
        // k < 0: ((-1)^m Y^m - Y^{-m}) / (i√2)
        u[(km, kp)] = Complex64::new(0.0, -sign * r2);
        u[(km, km)] = Complex64::new(0.0, r2);
    }
    u
}

/// Streaming coupling blocks from closed-form ladder elements.
pub fn assemble_coupling(n: usize) -> Result<CouplingSet> {
    if n == 0 {
        return Err(Error::Precondition("coupling needs N >= 1".into()));
    }
    let mut blocks: [Vec<DMatrix<f64>>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut u_prev = real_from_complex(0);
    for l in 1..=n {
        let u_cur = real_from_complex(l);
        for (axis, slot) in blocks.iter_mut().enumerate() {
            let mut f = DMatrix::from_element(2 * l - 1, 2 * l + 1, Complex64::new(0.0, 0.0));
            for (r, mp) in (-(l as i64 - 1)..=(l as i64 - 1)).enumerate() {
                for (c, m) in (-(l as i64)..=(l as i64)).enumerate() {
                    f[(r, c)] = complex_down_element(axis, l, mp, m);
                }
            }
            // ∫ R_a f R_b = Σ conj(U_ap) U_bq <p|f|q>
            let real = u_prev.map(|z| z.conj()) * f * u_cur.transpose();
            let block = real.map(|z| if z.re.abs() < 1e-15 { 0.0 } else { z.re });
            slot.push(block);
        }
        u_prev = u_cur;
    }
    Ok(CouplingSet {
        max_degree: n,
        blocks,
    })
}

/// Brute-force coupling blocks by sphere quadrature.
pub fn coupling_oracle(n: usize, quad: &SphereQuadrature) -> Result<CouplingSet> {
    if n == 0 {
        return Err(Error::Precondition("coupling needs N >= 1".into()));
    }
    if quad.exactness() < 2 * n + 1 {
        return Err(Error::Precondition(format!(
            "quadrature exactness {} < 2N+1 = {}",
            quad.exactness(),
            2 * n + 1
        )));
    }
    let table = quad.basis_table(n);
    let mut blocks: [Vec<DMatrix<f64>>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (axis, slot) in blocks.iter_mut().enumerate() {
        for l in 1..=n {
            let mut b = DMatrix::zeros(2 * l - 1, 2 * l + 1);
            for r in 0..(2 * l - 1) {
                for c in 0..(2 * l + 1) {
                    let a = (l - 1) * (l - 1) + r;
                    let bb = l * l + c;
                    b[(r, c)] = quad
                        .nodes()
                        .iter()
                        .zip(quad.weights())
                        .zip(&table)
                        .map(|((om, w), m)| w * om[axis] * m[a] * m[bb])
                        .sum();
                }
            }
            slot.push(b);
        }
    }
    Ok(CouplingSet {
        max_degree: n,
        blocks,
    })
}

/// Moments `u_a = Σ_j w_j m_a(Ω_j) f_j` up to degree `n`.
pub fn project(nodal: &[f64], n: usize, quad: &SphereQuadrature) -> Result<MomentVector> {
    if quad.exactness() < 2 * n {
        return Err(Error::Precondition(format!(
            "quadrature exactness {} < 2N = {}",
            quad.exactness(),
            2 * n
        )));
    }
    if nodal.len() != quad.len() {
        return Err(Error::Domain(format!(
            "{} nodal values for {} nodes",
            nodal.len(),
            quad.len()
        )));
    }
    let mut out = MomentVector::zeros(n);
    for ((d, w), v) in quad.nodes().iter().zip(quad.weights()).zip(nodal) {
        let m = eval_all(n, *d);
        for (o, mi) in out.coeffs.iter_mut().zip(&m) {
            *o += w * v * mi;
        }
    }
    Ok(out)
}

/// Nodal values `Σ_a u_a m_a(Ω_j)`.
pub fn evaluate_expansion(u: &MomentVector, quad: &SphereQuadrature) -> Vec<f64> {
    quad.nodes()
        .iter()
        .map(|d| {
            eval_all(u.max_degree, *d)
                .iter()
                .zip(&u.coeffs)
                .map(|(m, c)| m * c)
                .sum()
        })
        .collect()
}

/// Angular weight `(l + 1/2)^{2s}`.
pub fn sobolev_weight(l: usize, s: u32) -> f64 {
    (l as f64 + 0.5).powi(2 * s as i32)
}

/// `|u|_{H^s}`: weighted tail sum starting at degree `s`.
pub fn angular_seminorm(u: &MomentVector, s: u32) -> f64 {
    (s as usize..=u.max_degree)
        .map(|l| sobolev_weight(l, s) * u.block_norm_sq(l))
        .sum::<f64>()
        .sqrt()
}

/// `‖u‖_{H^s} = (s‖u‖² + |u|²_{H^s})^{1/2}`.
pub fn angular_norm(u: &MomentVector, s: u32) -> f64 {
    (s as f64 * u.norm().powi(2) + angular_seminorm(u, s).powi(2)).sqrt()
}

/// Laplace–Beltrami norm with weights `(l+1/2)^{2s}` over all degrees.
pub fn angular_norm_circ(u: &MomentVector, s: u32) -> f64 {
    (0..=u.max_degree)
        .map(|l| sobolev_weight(l, s) * u.block_norm_sq(l))
        .sum::<f64>()
        .sqrt()
}

/// Constants `(c1, c2)` with `c1‖u‖_{H^s} <= ‖u‖_{H^s_∘} <= c2‖u‖_{H^s}`.
pub fn equivalence_constants(s: u32) -> (f64, f64) {
    if s == 0 {
        return (1.0, 1.0);
    }
    let sf = s as f64;
    (
        1.0 / (3.0 * sf).sqrt(),
        (5.0 / sf).sqrt() * (sf - 0.5).powi(s as i32),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ordinal_round_trip() {
        for p in 0..400 {
            let idx = SphericalIndex::from_ordinal(p);
            assert!(idx.order.unsigned_abs() as usize <= idx.degree);
            assert_eq!(idx.ordinal(), p);
        }
        assert!(SphericalIndex::new(1, 2).is_err());
    }

    #[test]
    fn basis_examples() {
        let c = basis_eval(SphericalIndex::new(0, 0).unwrap(), [0.6, 0.0, 0.8]).unwrap();
        assert!((c - 0.28209479177387814).abs() < 1e-15);
        let z = basis_eval(SphericalIndex::new(1, 0).unwrap(), [0.0, 0.0, 1.0]).unwrap();
        assert!((z - (3.0 / (4.0 * PI)).sqrt()).abs() < 1e-15);
        assert!(basis_eval(SphericalIndex::new(1, 0).unwrap(), [1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn degree_one_matches_cartesian() {
        // m_{1,1} ∝ x, m_{1,-1} ∝ y, m_{1,0} ∝ z with the same factor.
        let d = [0.48, -0.6, 0.64];
        let m = eval_all(1, d);
        let f = (3.0 / (4.0 * PI)).sqrt();
        assert!((m[offset(1, 1)] - f * d[0]).abs() < 1e-15);
        assert!((m[offset(1, -1)] - f * d[1]).abs() < 1e-15);
        assert!((m[offset(1, 0)] - f * d[2]).abs() < 1e-15);
    }

    #[test]
    fn quadrature_examples() {
        let q1 = build_sphere_quadrature(1).unwrap();
        assert_eq!(q1.len(), 2);
        assert!((q1.weights().iter().sum::<f64>() - 4.0 * PI).abs() < 1e-12);

        let q = build_sphere_quadrature(8).unwrap();
        let t = q.basis_table(7);
        let a = offset(7, 5);
        let v: Vec<f64> = t.iter().map(|m| m[a] * m[a]).collect();
        assert!((q.integrate(&v) - 1.0).abs() < 1e-12);
        let z2: Vec<f64> = q.nodes().iter().map(|d| d[2] * d[2]).collect();
        assert!((q.integrate(&z2) - 4.0 * PI / 3.0).abs() < 1e-12);
        let m = offset(1, 0);
        let n = offset(1, 1);
        let v: Vec<f64> = t.iter().map(|b| b[m] * b[n]).collect();
        assert!(q.integrate(&v).abs() < 1e-12);
        for d in q.nodes() {
            let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            assert!((r - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn gram_matrix_is_identity() {
        let p = 13;
        let q = build_sphere_quadrature(p).unwrap();
        let lmax = q.exactness() / 2;
        let t = q.basis_table(lmax);
        let dim = num_moments(lmax);
        for a in 0..dim {
            for b in a..dim {
                let v: Vec<f64> = t.iter().map(|m| m[a] * m[b]).collect();
                let g = q.integrate(&v);
                let e = if a == b { 1.0 } else { 0.0 };
                assert!((g - e).abs() < 1e-12, "gram({a},{b}) = {g}");
            }
        }
    }

    #[test]
    fn high_degree_evaluation_is_finite() {
        let m = eval_all(64, [0.0, 0.6, 0.8]);
        assert!(m.iter().all(|x| x.is_finite()));
        let q = build_sphere_quadrature(66).unwrap();
        let a = offset(64, -37);
        let v: Vec<f64> = q
            .nodes()
            .iter()
            .map(|d| eval_all(64, *d)[a].powi(2))
            .collect();
        assert!((q.integrate(&v) - 1.0).abs() < 1e-11);
    }

    #[test]
    fn coupling_examples() {
        let c = assemble_coupling(1).unwrap();
        let b = c.block(2, 1);
        assert!((b[(0, 1)] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(b[(0, 2)], 0.0);
        assert_eq!(b[(0, 0)], 0.0);
        let c9 = assemble_coupling(9).unwrap();
        assert!(c9.max_spectral_norm() <= 4.0);
    }

    #[test]
    fn coupling_matches_oracle() {
        for n in 1..=9 {
            let q = quadrature_for_exactness(2 * n + 1);
            let oracle = coupling_oracle(n, &q).unwrap();
            let exact = assemble_coupling(n).unwrap();
            let d = exact.max_abs_diff(&oracle);
            assert!(d < 1e-12, "N={n}: diff {d}");
        }
    }

    #[test]
    fn oracle_rejects_weak_quadrature() {
        let q = build_sphere_quadrature(1).unwrap();
        assert!(matches!(
            coupling_oracle(5, &q),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn projection_examples() {
        let q = build_sphere_quadrature(8).unwrap();
        let m53 = evaluate_expansion(&MomentVector::unit(5, 5, 3), &q);
        let p = project(&m53, 2, &q).unwrap();
        assert!(p.coeffs().iter().all(|x| x.abs() < 1e-12));

        let mut u = MomentVector::unit(2, 0, 0);
        u.set(2, 1, 1.0);
        let p = project(&evaluate_expansion(&u, &q), 2, &q).unwrap();
        assert!(p
            .coeffs()
            .iter()
            .zip(u.coeffs())
            .all(|(a, b)| (a - b).abs() < 1e-12));

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let coeffs: Vec<f64> = (0..num_moments(6))
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let u = MomentVector::from_coeffs(6, coeffs).unwrap();
        let q = quadrature_for_exactness(12);
        let back = project(&evaluate_expansion(&u, &q), 6, &q).unwrap();
        let d = back
            .coeffs()
            .iter()
            .zip(u.coeffs())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(d < 1e-12);

        assert!(project(&[0.0; 2], 2, &build_sphere_quadrature(1).unwrap()).is_err());
    }

    #[test]
    fn seminorm_examples() {
        assert!((angular_seminorm(&MomentVector::unit(3, 2, 0), 1) - 2.5).abs() < 1e-15);
        assert_eq!(angular_seminorm(&MomentVector::unit(3, 1, 0), 2), 0.0);
        let (c1, c2) = equivalence_constants(1);
        assert!((c1 - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((c2 - 5f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn parseval_split() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let coeffs: Vec<f64> = (0..num_moments(8))
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let u = MomentVector::from_coeffs(8, coeffs).unwrap();
        for n in 0..8 {
            let lhs = u.truncated(n).norm().powi(2) + u.tail(n).norm().powi(2);
            assert!((lhs - u.norm().powi(2)).abs() < 1e-12);
        }
    }
}
