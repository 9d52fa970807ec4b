//! Coupling blocks from the ladder recursion, checked against quadrature.

use pnhybrid::harmonics::{
    assemble_coupling, coupling_oracle, quadrature_for_exactness, spectral_norm,
};

fn main() -> pnhybrid::Result<()> {
    let n = 6;
    let a = assemble_coupling(n)?;
    let oracle = coupling_oracle(n, &quadrature_for_exactness(2 * n + 1))?;
    println!(
        "N = {n}: max entrywise difference to quadrature {:.2e}",
        a.max_abs_diff(&oracle)
    );
    for l in 1..=n {
        let norms: Vec<String> = (0..3)
            .map(|axis| format!("{:.4}", spectral_norm(a.block(axis, l))))
            .collect();
        println!(
            "l = {l}: operator norms (x1, x2, x3) = {}",
            norms.join(", ")
        );
    }
    Ok(())
}
