//! Line-based run configuration: `[section]` headers, `key = value` pairs,
//! `#` comments and comma-separated lists.
//!
//! ```text
//! [problem]
//! name = sobolev-s
//! eps = 1
//! [solver]
//! kind = pn
//! N = 3
//! [sweep]
//! N = 1, 3, 5
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::transport::schedule_steps;

use super::manufactured::{ProblemParams, REGISTRY};
use super::measure::OraclePolicy;
use super::plot::PlotKind;
use super::SolverKind;

/// Lists swept by the `sweep` command; empty axes keep the base value.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepAxes {
    pub n: Vec<usize>,
    pub dt: Vec<f64>,
    pub eps: Vec<f64>,
    pub sigma_t: Vec<f64>,
    pub solver: Vec<SolverKind>,
}

impl SweepAxes {
    pub fn is_empty(&self) -> bool {
        self.n.is_empty()
            && self.dt.is_empty()
            && self.eps.is_empty()
            && self.sigma_t.is_empty()
            && self.solver.is_empty()
    }
}

/// A fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub problem: String,
    pub params: ProblemParams,
    pub solver: SolverKind,
    pub n: usize,
    pub oracle: OraclePolicy,
    pub sweep: SweepAxes,
    pub out_dir: Option<PathBuf>,
    pub plot: Option<PlotKind>,
    pub seed: u64,
    pub jobs: Option<usize>,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            problem: "iso-smooth".into(),
            params: ProblemParams::default(),
            solver: SolverKind::Pn,
            n: 3,
            oracle: OraclePolicy::default(),
            sweep: SweepAxes::default(),
            out_dir: None,
            plot: None,
            seed: 0,
            jobs: None,
        }
    }
}

/// One point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub solver: SolverKind,
    pub n: usize,
    pub dt: f64,
    pub eps: f64,
    pub sigma_t: f64,
}

impl RunSpec {
    /// Cartesian product of the sweep axes, ordered by
    /// `(solver, eps, sigma_t, dt, N)`.
    pub fn sweep_points(&self) -> Result<Vec<SweepPoint>> {
        if self.sweep.is_empty() {
            return Err(Error::config(
                None,
                "sweep needs at least one non-empty axis in [sweep]",
            ));
        }
        let or = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
        let solvers = if self.sweep.solver.is_empty() {
            vec![self.solver]
        } else {
            self.sweep.solver.clone()
        };
        let ns = if self.sweep.n.is_empty() {
            vec![self.n]
        } else {
            self.sweep.n.clone()
        };
        let mut out = Vec::new();
        for &solver in &solvers {
            for &eps in &or(&self.sweep.eps, self.params.eps) {
                for &sigma_t in &or(&self.sweep.sigma_t, self.params.sigma_t) {
                    for &dt in &or(&self.sweep.dt, self.params.dt) {
                        for &n in &ns {
                            out.push(SweepPoint {
                                solver,
                                n,
                                dt,
                                eps,
                                sigma_t,
                            });
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

fn parse_number(v: &str, line: usize, key: &str) -> Result<f64> {
    let ok = !v.is_empty()
        && v.chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E'));
    match v.parse::<f64>() {
        Ok(x) if ok && x.is_finite() => Ok(x),
        _ => Err(Error::config(
            line,
            format!("'{key}' expects a decimal number, got '{v}'"),
        )),
    }
}

fn parse_uint(v: &str, line: usize, key: &str) -> Result<usize> {
    v.parse::<usize>().map_err(|_| {
        Error::config(
            line,
            format!("'{key}' expects a non-negative integer, got '{v}'"),
        )
    })
}

fn parse_auto(v: &str, line: usize, key: &str) -> Result<Option<usize>> {
    if v == "auto" {
        Ok(None)
    } else {
        parse_uint(v, line, key).map(Some)
    }
}

fn list<T>(v: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    v.split(',').map(|x| f(x.trim())).collect()
}

/// Parse configuration text.
pub fn parse_str(text: &str) -> Result<RunSpec> {
    let mut spec = RunSpec::default();
    let mut section = String::new();
    let mut seen: HashMap<(String, String), usize> = HashMap::new();
    let mut dt_lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| {
                    Error::config(line, format!("malformed section header '{content}'"))
                })?
                .trim();
            if !["problem", "solver", "oracle", "sweep", "output", "run"].contains(&name) {
                return Err(Error::config(line, format!("unknown section '[{name}]'")));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| {
            Error::config(line, format!("expected 'key = value', got '{content}'"))
        })?;
        let (key, value) = (key.trim(), value.trim());
        if section.is_empty() {
            return Err(Error::config(
                line,
                format!("key '{key}' appears before any section header"),
            ));
        }
        if value.is_empty() {
            return Err(Error::config(line, format!("key '{key}' has no value")));
        }
        if let Some(prev) = seen.insert((section.clone(), key.to_string()), line) {
            return Err(Error::config(
                line,
                format!("duplicate key '{key}' (first on line {prev})"),
            ));
        }
        let p = &mut spec.params;
        match (section.as_str(), key) {
            ("problem", "name") => {
                if !REGISTRY.contains(&value) {
                    return Err(Error::config(
                        line,
                        format!("unknown problem '{value}'; known: {}", REGISTRY.join(", ")),
                    ));
                }
                spec.problem = value.to_string();
            }
            ("problem", "s") => p.s = parse_uint(value, line, key)? as u32,
            ("problem", "eps") => p.eps = parse_number(value, line, key)?,
            ("problem", "sigma_t") => p.sigma_t = parse_number(value, line, key)?,
            ("problem", "sigma_a") => p.sigma_a = parse_number(value, line, key)?,
            ("problem", "T") => p.t_final = parse_number(value, line, key)?,
            ("problem", "dt") => {
                p.dt = parse_number(value, line, key)?;
                dt_lines.push((line, vec![p.dt]));
            }
            ("problem", "dim") => p.dim = parse_uint(value, line, key)?,
            ("problem", "modes") => p.modes = parse_uint(value, line, key)?,
            ("solver", "kind") => {
                spec.solver = value
                    .parse()
                    .map_err(|_| Error::config(line, format!("unknown solver '{value}'")))?
            }
            ("solver", "N") => spec.n = parse_uint(value, line, key)?,
            ("solver", "polar_order") => spec.oracle.polar_order = parse_auto(value, line, key)?,
            ("oracle", "n_ref") => spec.oracle.n_ref = parse_auto(value, line, key)?,
            ("oracle", "richardson") => spec.oracle.richardson = parse_uint(value, line, key)?,
            ("sweep", "N") => spec.sweep.n = list(value, |x| parse_uint(x, line, key))?,
            ("sweep", "dt") => {
                spec.sweep.dt = list(value, |x| parse_number(x, line, key))?;
                dt_lines.push((line, spec.sweep.dt.clone()));
            }
            ("sweep", "eps") => spec.sweep.eps = list(value, |x| parse_number(x, line, key))?,
            ("sweep", "sigma_t") => {
                spec.sweep.sigma_t = list(value, |x| parse_number(x, line, key))?
            }
            ("sweep", "solver") => {
                spec.sweep.solver = list(value, |x| {
                    x.parse()
                        .map_err(|_| Error::config(line, format!("unknown solver '{x}'")))
                })?
            }
            ("output", "dir") => spec.out_dir = Some(PathBuf::from(value)),
            ("output", "plot") => {
                spec.plot = Some(
                    value
                        .parse()
                        .map_err(|_| Error::config(line, format!("unknown plot kind '{value}'")))?,
                )
            }
            ("run", "seed") => {
                spec.seed = value.parse().map_err(|_| {
                    Error::config(line, format!("'seed' expects an integer, got '{value}'"))
                })?
            }
            ("run", "jobs") => spec.jobs = Some(parse_uint(value, line, key)?),
            _ => {
                return Err(Error::config(
                    line,
                    format!("unknown key '{key}' in [{section}]"),
                ))
            }
        }
    }
    let p = &spec.params;
    if !(p.eps > 0.0 && p.t_final > 0.0 && p.dt > 0.0) {
        return Err(Error::config(None, "eps, T and dt must be positive"));
    }
    if !(p.sigma_a >= 0.0 && p.sigma_t >= p.sigma_a) {
        return Err(Error::config(None, "need 0 <= sigma_a <= sigma_t"));
    }
    if !(1..=3).contains(&p.dim) || p.modes % 2 == 0 {
        return Err(Error::config(None, "dim must be 1..3 and modes odd"));
    }
    if spec
        .sweep
        .eps
        .iter()
        .chain(&spec.sweep.sigma_t)
        .any(|x| !(*x >= 0.0))
        || spec.sweep.eps.contains(&0.0)
    {
        return Err(Error::config(
            None,
            "sweep eps must be positive and sigma_t non-negative",
        ));
    }
    for (line, dts) in dt_lines {
        for dt in dts {
            if schedule_steps(p.t_final, dt).is_err() {
                return Err(Error::config(
                    line,
                    format!("M*dt != T for dt = {dt}, T = {}", p.t_final),
                ));
            }
        }
    }
    if schedule_steps(p.t_final, p.dt).is_err() {
        return Err(Error::config(
            None,
            format!("M*dt != T for dt = {}, T = {}", p.dt, p.t_final),
        ));
    }
    Ok(spec)
}

/// Parse a configuration file.
pub fn parse_config(path: &Path) -> Result<RunSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(None, format!("cannot read {}: {e}", path.display())))?;
    parse_str(&text)
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

/// Canonical text form; `parse_str(&emit(x)) == x`.
pub fn emit(spec: &RunSpec) -> String {
    let p = &spec.params;
    let mut s = String::new();
    let _ = writeln!(s, "[problem]");
    let _ = writeln!(s, "name = {}", spec.problem);
    let _ = writeln!(s, "s = {}", p.s);
    let _ = writeln!(s, "eps = {}", p.eps);
    let _ = writeln!(s, "sigma_t = {}", p.sigma_t);
    let _ = writeln!(s, "sigma_a = {}", p.sigma_a);
    let _ = writeln!(s, "T = {}", p.t_final);
    let _ = writeln!(s, "dt = {}", p.dt);
    let _ = writeln!(s, "dim = {}", p.dim);
    let _ = writeln!(s, "modes = {}", p.modes);
    let _ = writeln!(s, "\n[solver]");
    let _ = writeln!(s, "kind = {}", spec.solver);
    let _ = writeln!(s, "N = {}", spec.n);
    if let Some(o) = spec.oracle.polar_order {
        let _ = writeln!(s, "polar_order = {o}");
    }
    let _ = writeln!(s, "\n[oracle]");
    if let Some(n) = spec.oracle.n_ref {
        let _ = writeln!(s, "n_ref = {n}");
    }
    let _ = writeln!(s, "richardson = {}", spec.oracle.richardson);
    if !spec.sweep.is_empty() {
        let _ = writeln!(s, "\n[sweep]");
        let w = &spec.sweep;
        if !w.solver.is_empty() {
            let _ = writeln!(s, "solver = {}", join(&w.solver));
        }
        if !w.n.is_empty() {
            let _ = writeln!(s, "N = {}", join(&w.n));
        }
        if !w.dt.is_empty() {
            let _ = writeln!(s, "dt = {}", join(&w.dt));
        }
        if !w.eps.is_empty() {
            let _ = writeln!(s, "eps = {}", join(&w.eps));
        }
        if !w.sigma_t.is_empty() {
            let _ = writeln!(s, "sigma_t = {}", join(&w.sigma_t));
        }
    }
    if spec.out_dir.is_some() || spec.plot.is_some() {
        let _ = writeln!(s, "\n[output]");
        if let Some(d) = &spec.out_dir {
            let _ = writeln!(s, "dir = {}", d.display());
        }
        if let Some(k) = spec.plot {
            let _ = writeln!(s, "plot = {}", k.as_str());
        }
    }
    let _ = writeln!(s, "\n[run]");
    let _ = writeln!(s, "seed = {}", spec.seed);
    if let Some(j) = spec.jobs {
        let _ = writeln!(s, "jobs = {j}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let s = parse_str("[problem]\nname = sobolev-s\n[solver]\nkind = hybrid\nN = 5 # degree\n")
            .unwrap();
        assert_eq!(s.problem, "sobolev-s");
        assert_eq!(s.solver, SolverKind::Hybrid);
        assert_eq!(s.n, 5);
        assert_eq!(s.params, ProblemParams::default());
        assert!(s.sweep_points().is_err());
    }

    #[test]
    fn schedule_mismatch_is_reported() {
        let e = parse_str("[problem]\nT = 1.0\ndt = 0.3\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("M*dt != T") && msg.contains("line 3"), "{msg}");
        let e = parse_str("[problem]\nT = 1.0\n[sweep]\ndt = 0.5, 0.3\n").unwrap_err();
        assert!(e.to_string().contains("line 4"));
    }

    #[test]
    fn errors_name_key_and_line() {
        let e = parse_str("[problem]\nname = iso-smooth\nbogus = 1\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: Some(3), .. }));
        assert!(e.to_string().contains("bogus"));
        assert!(parse_str("eps = 1\n").is_err());
        assert!(parse_str("[problem]\neps = inf\n").is_err());
        assert!(parse_str("[problem]\neps = 0x10\n").is_err());
        assert!(parse_str("[nope]\n").is_err());
        assert!(parse_str("[problem]\neps 1\n").is_err());
        assert!(parse_str("[problem]\neps = 1\neps = 2\n").is_err());
    }

    #[test]
    fn round_trip() {
        let text = "[problem]\nname = streaming\neps = 5e-1\nT = 2\ndt = 0.5\n[solver]\nkind = pn\nN = 4\npolar_order = 20\n\
                    [sweep]\nN = 1, 3\ndt = 1, 0.5\nsolver = pn, hybrid\n[output]\ndir = out\nplot = n\n[run]\nseed = 9\njobs = 2\n";
        let a = parse_str(text).unwrap();
        let emitted = emit(&a);
        let b = parse_str(&emitted).unwrap();
        assert_eq!(a, b);
        assert_eq!(emit(&b), emitted);
        let pts = a.sweep_points().unwrap();
        assert_eq!(pts.len(), 8);
        assert_eq!(pts[0].solver, SolverKind::Pn);
        assert_eq!((pts[1].n, pts[1].dt), (3, 1.0));
    }
}
