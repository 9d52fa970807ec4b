//! Product sphere rule: exactness and moment round trips.

use pnhybrid::harmonics::{build_sphere_quadrature, evaluate_expansion, project, MomentVector};

fn main() -> pnhybrid::Result<()> {
    let quad = build_sphere_quadrature(8)?;
    println!("{} nodes, exact to degree {}", quad.len(), quad.exactness());
    let area = quad.integrate(&vec![1.0; quad.len()]);
    println!(
        "surface area {area:.15} (4π = {:.15})",
        4.0 * std::f64::consts::PI
    );
    let mut u = MomentVector::zeros(5);
    u.set(3, -2, 0.7);
    u.set(5, 4, -1.1);
    let back = project(&evaluate_expansion(&u, &quad), 5, &quad)?;
    let diff: f64 = u
        .coeffs()
        .iter()
        .zip(back.coeffs())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("evaluate then project at degree 5: max difference {diff:.2e}");
    Ok(())
}
