//! Monolithic P_N solve with trajectory diagnostics.

use pnhybrid::harness::manufactured::{manufactured, ProblemParams};
use pnhybrid::transport::solve_pn;

fn main() -> pnhybrid::Result<()> {
    let p = ProblemParams {
        eps: 0.5,
        ..Default::default()
    };
    let m = manufactured("sobolev-s", &p)?;
    let times: Vec<f64> = (1..=4).map(|i| 0.25 * i as f64).collect();
    let traj = solve_pn(&m.spec, 7, &times)?;
    for row in traj.diagnostics_csv() {
        println!("{row}");
    }
    Ok(())
}
