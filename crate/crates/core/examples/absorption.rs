//! Absorbing problems through the pure-scattering transform.

use pnhybrid::grid::l2_norm;
use pnhybrid::harness::manufactured::{manufactured, ProblemParams};
use pnhybrid::transport::{absorption_wrap, solve_pn};

fn main() -> pnhybrid::Result<()> {
    let p = ProblemParams {
        eps: 0.5,
        sigma_t: 1.0,
        sigma_a: 0.5,
        ..Default::default()
    };
    let m = manufactured("sobolev-s", &p)?;
    let wrap = absorption_wrap(&m.spec)?;
    println!(
        "scattering sigma after transform: {}",
        wrap.scattering.sigma_t
    );
    let direct = solve_pn(&m.spec, 6, &[1.0])?;
    let tr = solve_pn(&wrap.scattering, 6, &[1.0])?;
    let back = tr.final_state().scaled(wrap.post_scale(1.0));
    println!(
        "direct vs transformed at T = 1: {:.2e}",
        l2_norm(&back.difference(direct.final_state())?)
    );
    Ok(())
}
