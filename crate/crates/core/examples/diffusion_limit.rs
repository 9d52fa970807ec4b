//! Scalar flux of P_3 approaching the diffusion solution as eps shrinks.

use pnhybrid::harness::manufactured::{manufactured, ProblemParams};
use pnhybrid::transport::{diffusion_gap, solve_pn};

fn main() -> pnhybrid::Result<()> {
    for eps in [0.5, 0.25, 0.125, 0.0625, 0.03125] {
        let p = ProblemParams {
            eps,
            ..Default::default()
        };
        let m = manufactured("diffusion-check", &p)?;
        let st = solve_pn(&m.spec, 3, &[1.0])?;
        println!(
            "eps = {eps:<8} gap = {:.4e}",
            diffusion_gap(st.final_state(), &m.spec, 1.0)?
        );
    }
    Ok(())
}
