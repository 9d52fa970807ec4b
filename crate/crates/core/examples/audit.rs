//! Every inequality and oracle audit, with witnesses of any violation.

fn main() {
    let report = pnhybrid::harness::full_audit(0);
    print!("{}", report.to_text());
    println!("all passed: {}", report.passed());
}
