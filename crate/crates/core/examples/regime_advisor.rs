//! Which relabel step the hybrid bound asks for in each regime.

use pnhybrid::bounds::regime_advisor;

fn main() -> pnhybrid::Result<()> {
    for (eps, sigma) in [(0.05, 1.0), (1.0, 0.1), (1.0, 0.0)] {
        let a = regime_advisor(eps, sigma, 1.0, 2, 3, 0.25)?;
        println!(
            "eps = {eps}, sigma = {sigma}: {} (recommended dt {:.4})",
            a.label, a.recommended_dt
        );
    }
    Ok(())
}
