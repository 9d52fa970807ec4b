//! Deterministic log-log SVG and text-table rendering of sweep results.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

use super::sweep::SweepRow;

/// Which swept parameter goes on the horizontal axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Error against `N + 1`.
    N,
    Dt,
    Eps,
    SigmaT,
}

impl PlotKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlotKind::N => "n",
            PlotKind::Dt => "dt",
            PlotKind::Eps => "eps",
            PlotKind::SigmaT => "sigma_t",
        }
    }

    fn label(self) -> &'static str {
        match self {
            PlotKind::N => "N + 1",
            PlotKind::Dt => "dt",
            PlotKind::Eps => "eps",
            PlotKind::SigmaT => "sigma_t",
        }
    }

    /// Horizontal coordinate of `row`.
    pub fn x(self, row: &SweepRow) -> f64 {
        match self {
            PlotKind::N => row.n as f64 + 1.0,
            PlotKind::Dt => row.dt,
            PlotKind::Eps => row.eps,
            PlotKind::SigmaT => row.sigma_t,
        }
    }

    /// Key of the remaining parameters; rows sharing it form one series.
    fn series_key(self, r: &SweepRow) -> String {
        let mut parts = vec![r.problem.clone(), r.solver.to_string()];
        let mut push = |k: PlotKind, v: String| {
            if k != self {
                parts.push(v);
            }
        };
        push(PlotKind::N, format!("N={}", r.n));
        push(PlotKind::Dt, format!("dt={}", r.dt));
        push(PlotKind::Eps, format!("eps={}", r.eps));
        push(PlotKind::SigmaT, format!("sigma_t={}", r.sigma_t));
        parts.join(" ")
    }
}

impl FromStr for PlotKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" | "N" => Ok(PlotKind::N),
            "dt" => Ok(PlotKind::Dt),
            "eps" => Ok(PlotKind::Eps),
            "sigma_t" => Ok(PlotKind::SigmaT),
            other => Err(Error::Format(format!(
                "unknown plot kind '{other}' (n, dt, eps, sigma_t)"
            ))),
        }
    }
}

/// Rendered plot artifacts.
#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub svg: String,
    pub table: String,
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

fn decade_range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals
        .filter(|v| *v > 0.0 && v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v.log10()), b.max(v.log10()))
        });
    if !lo.is_finite() {
        return (-16.0, 0.0);
    }
    let (lo, hi) = (lo.floor(), hi.ceil());
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

/// Render rows along `kind`. Each series is drawn with markers at the
/// measured errors and a dashed line at `C·bound`, where `C` is the
/// series' fitted constant.
pub fn emit_plot(rows: &[SweepRow], kind: PlotKind) -> Result<Plot> {
    if rows.is_empty() {
        return Err(Error::Format("no rows to plot".into()));
    }
    let mut series: BTreeMap<String, Vec<&SweepRow>> = BTreeMap::new();
    for r in rows {
        series.entry(kind.series_key(r)).or_default().push(r);
    }
    for v in series.values_mut() {
        v.sort_by(|a, b| kind.x(a).total_cmp(&kind.x(b)));
    }
    let fits: BTreeMap<&String, f64> = series
        .iter()
        .map(|(k, v)| {
            let c = v
                .iter()
                .filter(|r| r.bound > 0.0)
                .map(|r| r.error / r.bound)
                .fold(0.0, f64::max);
            (k, c)
        })
        .collect();
    let (x0, x1) = decade_range(rows.iter().map(|r| kind.x(r)));
    let fits_ref = &fits;
    let ys = rows.iter().map(|r| r.error).chain(
        series
            .iter()
            .flat_map(|(k, v)| v.iter().map(move |r| r.bound * fits_ref[k])),
    );
    let (y0, y1) = decade_range(ys);
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x.log10() - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + (y1 - y.log10()) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for d in x0 as i32..=x1 as i32 {
        let x = px(10f64.powi(d));
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#ccc"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{d}</text>"##,
            TOP,
            TOP + ph,
            TOP + ph + 16.0
        );
    }
    for d in y0 as i32..=y1 as i32 {
        let y = py(10f64.powi(d));
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ccc"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 20.0,
        kind.label()
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">error</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );
    for (i, (key, v)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let c = fits[key];
        let pts: Vec<String> = v
            .iter()
            .filter(|r| r.error > 0.0)
            .map(|r| format!("{:.2},{:.2}", px(kind.x(r)), py(r.error)))
            .collect();
        if pts.len() > 1 {
            let _ = writeln!(
                s,
                r#"<polyline class="error" points="{}" fill="none" stroke="{color}"/>"#,
                pts.join(" ")
            );
        }
        for r in v.iter().filter(|r| r.error > 0.0) {
            let _ = writeln!(
                s,
                r#"<circle class="marker" cx="{:.2}" cy="{:.2}" r="3.5" fill="{color}"/>"#,
                px(kind.x(r)),
                py(r.error)
            );
        }
        let bpts: Vec<String> = v
            .iter()
            .filter(|r| r.bound * c > 0.0)
            .map(|r| format!("{:.2},{:.2}", px(kind.x(r)), py(r.bound * c)))
            .collect();
        if !bpts.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline class="bound" points="{}" fill="none" stroke="{color}" stroke-dasharray="5,4"/>"#,
                bpts.join(" ")
            );
        }
        let ly = TOP + 14.0 + 28.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{ly:.2}" fill="{color}">{}</text><text x="{:.2}" y="{:.2}" fill="{color}">C = {c:.3e}</text>"#,
            LEFT + pw + 10.0,
            xml_escape(key),
            LEFT + pw + 10.0,
            ly + 12.0
        );
    }
    s.push_str("</svg>\n");

    let mut t = String::new();
    let _ = writeln!(
        t,
        "{:<40} {:>12} {:>24} {:>24} {:>24} {:>8}",
        "series",
        kind.as_str(),
        "error",
        "bound",
        "C*bound",
        "flagged"
    );
    for (key, v) in &series {
        for r in v {
            let _ = writeln!(
                t,
                "{:<40} {:>12} {:>24.16e} {:>24.16e} {:>24.16e} {:>8}",
                key,
                kind.x(r),
                r.error,
                r.bound,
                r.bound * fits[key],
                r.flagged()
            );
        }
    }
    Ok(Plot { svg: s, table: t })
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
