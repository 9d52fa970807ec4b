//! Mixed space-angle semi-norms and the data norms fed to the bounds.

use pnhybrid::bounds::BoundInputs;
use pnhybrid::grid::{data_norms, hrs_seminorm};
use pnhybrid::harness::manufactured::{manufactured, ProblemParams};

fn main() -> pnhybrid::Result<()> {
    let m = manufactured("sobolev-s", &ProblemParams::default())?;
    for (r, s) in [(0, 1), (0, 2), (0, 3), (1, 2), (3, 0)] {
        println!("|g|_(r={r}, s={s}) = {:.6}", hrs_seminorm(&m.spec.g, r, s));
    }
    for ((r, s), n) in data_norms(&m.spec, &BoundInputs::required_pairs(2))? {
        println!(
            "pair ({r},{s}): g {:.6}, q sup {:.3}, q L1 {:.3}",
            n.g, n.q_sup, n.q_l1
        );
    }
    Ok(())
}
