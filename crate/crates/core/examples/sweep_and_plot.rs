//! Sweep N on a bundled config, fit the bound constant and render the plot.

use pnhybrid::harness::config::parse_str;
use pnhybrid::harness::fit::fit_and_check;
use pnhybrid::harness::plot::{emit_plot, PlotKind};
use pnhybrid::harness::sweep::{run_sweep, to_csv_string};

fn main() -> pnhybrid::Result<()> {
    let spec = parse_str(include_str!("../configs/spectral_rate.cfg"))?;
    let rows = run_sweep(&spec)?;
    print!("{}", to_csv_string(&rows)?);
    print!("{}", fit_and_check(&rows)?.to_text());
    let plot = emit_plot(&rows, PlotKind::N)?;
    let path = std::env::temp_dir().join("pnhybrid_spectral_rate.svg");
    std::fs::write(&path, &plot.svg)?;
    println!("svg written to {}", path.display());
    Ok(())
}
