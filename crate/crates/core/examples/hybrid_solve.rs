//! Collided/uncollided hybrid with per-interval diagnostics and an oracle.

use pnhybrid::grid::NodalAngularField;
use pnhybrid::harness::manufactured::{manufactured, ProblemParams};
use pnhybrid::hybrid::run_hybrid;
use pnhybrid::transport::solve_pn;

fn main() -> pnhybrid::Result<()> {
    let p = ProblemParams {
        eps: 1.0,
        sigma_t: 0.1,
        dt: 0.25,
        ..Default::default()
    };
    let m = manufactured("sobolev-s", &p)?;
    let spec = m.spec.clone();
    let oracle = move |t: f64, total: &NodalAngularField| {
        let r = solve_pn(&spec, 24, &[t])?;
        Ok(total
            .difference(&r.final_state().to_nodal(total.quad().clone()))?
            .l2_norm())
    };
    let run = run_hybrid(&m.spec, 3, 40, Some(&oracle))?;
    for row in run.diagnostics.to_csv_rows() {
        println!("{row}");
    }
    Ok(())
}
