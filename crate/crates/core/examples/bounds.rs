//! P_N and hybrid error bounds with their per-term breakdown.

use pnhybrid::bounds::{absorbing_bounds, hybrid_error_bound, pn_error_bound, BoundInputs, Scheme};
use pnhybrid::harness::manufactured::{manufactured, ProblemParams};

fn main() -> pnhybrid::Result<()> {
    let m = manufactured("sobolev-s", &ProblemParams::default())?;
    let inp = BoundInputs::from_spec(&m.spec, 2, 5)?;
    print!("{}", pn_error_bound(&inp)?.to_text());
    for dt in [1.0, 0.25] {
        let inp = BoundInputs {
            dt,
            eps: 0.2,
            ..inp.clone()
        };
        print!("dt = {dt}: {}", hybrid_error_bound(&inp)?.to_text());
    }
    let absorbing = BoundInputs {
        sigma_a: 0.5,
        ..inp
    };
    for row in absorbing_bounds(&absorbing, Scheme::Pn)?.to_csv_rows() {
        println!("{row}");
    }
    Ok(())
}
