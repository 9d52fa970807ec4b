//! Regularity estimates without the eps scaling, per relabel interval.

use pnhybrid::bounds::{unscaled_bounds, UnscaledNorms};

fn main() -> pnhybrid::Result<()> {
    let nm = UnscaledNorms {
        theta_g: 1.0,
        grad_g: 1.0,
        grad_theta_g: 1.0,
        d2_g: 1.0,
        d2_q: 0.5,
        ..Default::default()
    };
    for sigma in [0.1, 1.0, 10.0] {
        let b = unscaled_bounds(sigma, 1.0, 0.25, &nm)?;
        println!(
            "sigma = {sigma:<5} E1 = {:.4} E2 = {:.4} hybrid = {:.4} pn = {:.4} last interval end = {:.4}",
            b.e1,
            b.e2,
            b.hybrid,
            b.pn_isotropic,
            b.interval_end.last().copied().unwrap_or(0.0)
        );
    }
    Ok(())
}
