//! Registry of manufactured problems with known structure or exact solutions.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{MomentField, NodalAngularField, ScalarField, SpatialGrid};
use crate::harmonics::{MomentVector, SphereQuadrature};
use crate::transport::{characteristics, isotropic_amplitude, ProblemSpec, Source};

/// Names accepted by [`manufactured`].
pub const REGISTRY: &[&str] = &[
    "iso-smooth",
    "aniso-decay",
    "streaming",
    "sobolev-s",
    "diffusion-check",
];

/// Band limit of the "sobolev-s" angular profile.
pub const SOBOLEV_BAND: usize = 16;

/// Physical parameters shared by every manufactured problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams {
    pub eps: f64,
    pub sigma_t: f64,
    pub sigma_a: f64,
    pub t_final: f64,
    pub dt: f64,
    pub dim: usize,
    pub modes: usize,
    /// Angular regularity index of "sobolev-s".
    pub s: u32,
}

impl Default for ProblemParams {
    fn default() -> Self {
        Self {
            eps: 1.0,
            sigma_t: 1.0,
            sigma_a: 0.0,
            t_final: 1.0,
            dt: 1.0,
            dim: 1,
            modes: 5,
            s: 2,
        }
    }
}

/// Closed-form solutions available for some problems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exact {
    /// Spatially constant `m_{1,0}` decaying at rate `σ_t/ε²`.
    AnisoDecay,
    /// Free streaming along characteristics.
    Streaming,
}

/// A manufactured problem instance.
#[derive(Debug, Clone)]
pub struct Manufactured {
    pub name: &'static str,
    pub spec: ProblemSpec,
    pub exact: Option<Exact>,
    /// Largest angular degree present in the data.
    pub data_degree: usize,
}

impl Manufactured {
    /// Exact moments at `t` up to degree `n`, when available in moment form.
    pub fn exact_moments(&self, t: f64, n: usize) -> Option<MomentField> {
        match self.exact? {
            Exact::AnisoDecay => {
                let rate = self.spec.sigma_t / (self.spec.eps * self.spec.eps);
                Some(self.spec.g.resized(n).scaled((-rate * t).exp()))
            }
            Exact::Streaming => None,
        }
    }

    /// Exact nodal solution at `t` on `quad`.
    pub fn exact_nodal(
        &self,
        t: f64,
        quad: Arc<SphereQuadrature>,
    ) -> Result<Option<NodalAngularField>> {
        match self.exact {
            Some(Exact::AnisoDecay) => {
                let m = self
                    .exact_moments(t, self.data_degree)
                    .expect("moment form exists");
                Ok(Some(m.to_nodal(quad)))
            }
            Some(Exact::Streaming) => characteristics(&self.spec, quad, t).map(Some),
            None => Ok(None),
        }
    }
}

fn cos_x1(grid: SpatialGrid) -> Result<ScalarField> {
    ScalarField::cosine(grid, [1, 0, 0], 1.0)
}

/// Build the named problem.
pub fn manufactured(name: &str, p: &ProblemParams) -> Result<Manufactured> {
    let grid = SpatialGrid::new(p.dim, p.modes)?;
    let spec = |g: MomentField, sigma_t: f64, sigma_a: f64| ProblemSpec {
        eps: p.eps,
        sigma_t,
        sigma_a,
        g,
        q: Source::zero(),
        t_final: p.t_final,
        dt: p.dt,
    };
    let iso = MomentVector::unit(0, 0, 0).scaled_by(isotropic_amplitude(1.0));
    let (name, spec, exact, degree) = match name {
        "iso-smooth" => (
            "iso-smooth",
            spec(
                MomentField::separable(&cos_x1(grid)?, &iso),
                p.sigma_t,
                p.sigma_a,
            ),
            None,
            0,
        ),
        "aniso-decay" => (
            "aniso-decay",
            spec(
                MomentField::separable(
                    &ScalarField::constant(grid, 1.0),
                    &MomentVector::unit(1, 1, 0),
                ),
                p.sigma_t,
                p.sigma_a,
            ),
            Some(Exact::AnisoDecay),
            1,
        ),
        "streaming" => {
            let mut v = MomentVector::zeros(2);
            v.set(0, 0, 1.0);
            v.set(1, 1, 0.5);
            v.set(1, 0, 0.3);
            v.set(2, -1, 0.25);
            (
                "streaming",
                spec(MomentField::separable(&cos_x1(grid)?, &v), 0.0, 0.0),
                Some(Exact::Streaming),
                2,
            )
        }
        "sobolev-s" => {
            let mut v = MomentVector::zeros(SOBOLEV_BAND);
            for l in 0..=SOBOLEV_BAND {
                v.set(l, 0, (l as f64 + 0.5).powf(-(p.s as f64) - 1.0));
            }
            (
                "sobolev-s",
                spec(
                    MomentField::separable(&cos_x1(grid)?, &v),
                    p.sigma_t,
                    p.sigma_a,
                ),
                None,
                SOBOLEV_BAND,
            )
        }
        "diffusion-check" => {
            let flux = ScalarField::from_fn(grid, |x| 1.0 + 0.5 * x[0].cos())?;
            (
                "diffusion-check",
                spec(MomentField::separable(&flux, &iso), p.sigma_t, p.sigma_a),
                None,
                0,
            )
        }
        other => {
            return Err(Error::config(
                None,
                format!("unknown problem '{other}'; known: {}", REGISTRY.join(", ")),
            ))
        }
    };
    spec.validate()?;
    Ok(Manufactured {
        name,
        spec,
        exact,
        data_degree: degree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{hrs_seminorm, l2_norm};
    use crate::transport::solve_pn;

    #[test]
    fn registry_builds() {
        for name in REGISTRY {
            let m = manufactured(name, &ProblemParams::default()).unwrap();
            assert_eq!(&m.name, name);
            assert!(m.spec.g.max_degree() >= m.data_degree);
        }
        assert!(manufactured("nope", &ProblemParams::default()).is_err());
    }

    #[test]
    fn aniso_decay_is_exact_for_pn() {
        let p = ProblemParams {
            eps: 0.5,
            sigma_t: 2.0,
            ..Default::default()
        };
        let m = manufactured("aniso-decay", &p).unwrap();
        let traj = solve_pn(&m.spec, 3, &[1.0]).unwrap();
        let exact = m.exact_moments(1.0, 3).unwrap();
        let diff = l2_norm(&traj.final_state().difference(&exact).unwrap());
        assert!(diff < 1e-12 * l2_norm(&exact));
    }

    #[test]
    fn sobolev_profile_regularity() {
        let p = ProblemParams::default();
        let m = manufactured("sobolev-s", &p).unwrap();
        let g = &m.spec.g;
        let half = g.resized(SOBOLEV_BAND / 2);
        let s2 = (hrs_seminorm(g, 0, 2), hrs_seminorm(&half, 0, 2));
        let s3 = (hrs_seminorm(g, 0, 3), hrs_seminorm(&half, 0, 3));
        // The s = 2 semi-norm converges in the band limit, s = 3 keeps growing.
        assert!(s2.0 / s2.1 < 1.2);
        assert!(s3.0 / s3.1 > 1.4);
    }
}
