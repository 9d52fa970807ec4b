//! Exact uncollided flux: free streaming against characteristics, then with attenuation.

use std::sync::Arc;

use pnhybrid::harmonics::build_sphere_quadrature;
use pnhybrid::harness::manufactured::{manufactured, ProblemParams};
use pnhybrid::transport::{characteristics, solve_uncollided};

fn main() -> pnhybrid::Result<()> {
    let m = manufactured("streaming", &ProblemParams::default())?;
    let quad = Arc::new(build_sphere_quadrature(20)?);
    let u0 = m.spec.g.to_nodal(quad.clone());
    let exact = characteristics(&m.spec, quad, 1.0)?;
    for sigma in [0.0, 0.5, 2.0] {
        let u = solve_uncollided(&u0, 0.0, 1.0, m.spec.eps, sigma, &m.spec.q)?;
        let gap = u.difference(&exact)?.l2_norm();
        println!(
            "sigma = {sigma}: norm {:.6}, distance to free streaming {gap:.3e}",
            u.l2_norm()
        );
    }
    Ok(())
}
