//! Attenuation kernels across the series/closed-form switch.

use pnhybrid::bounds::{big_gamma, kernel_functions};

fn main() -> pnhybrid::Result<()> {
    println!(
        "{:>8} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "tau", "kappa", "gamma", "beta1", "beta2", "beta3"
    );
    for tau in [1e-6, 1e-2, 0.5, 2.0, 10.0, 100.0] {
        let k = kernel_functions(tau)?;
        println!(
            "{tau:>8} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e}",
            k.kappa, k.gamma, k.beta1, k.beta2, k.beta3
        );
    }
    println!("Gamma(sigma = 2, t = 1) = {:.6}", big_gamma(2.0, 1.0));
    Ok(())
}
