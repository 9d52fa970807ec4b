//! Parameter sweeps: solve, measure against the oracle, evaluate the bound.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::time::Instant;

use rayon::prelude::*;

use crate::bounds::{
    absorbing_bounds, hybrid_error_bound, pn_error_bound, BoundInputs, BoundReport, Scheme,
};
use crate::error::{Error, Result};

use super::config::{RunSpec, SweepPoint};
use super::manufactured::{manufactured, Manufactured, ProblemParams};
use super::measure::{measure, reference, Reference, FLAG_FRACTION};
use super::SolverKind;

/// Version written in the `schema` column.
pub const SCHEMA: &str = "1";

/// Column order of the sweep CSV.
pub const COLUMNS: [&str; 14] = [
    "schema",
    "problem",
    "solver",
    "N",
    "dt",
    "eps",
    "sigma_t",
    "sigma_a",
    "T",
    "error",
    "oracle_uncertainty",
    "bound",
    "branch",
    "walltime_s",
];

/// Branch label of rows without an applicable bound.
pub const NO_BOUND: &str = "none";

/// One measured sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub problem: String,
    pub solver: SolverKind,
    pub n: usize,
    pub dt: f64,
    pub eps: f64,
    pub sigma_t: f64,
    pub sigma_a: f64,
    pub t_final: f64,
    pub error: f64,
    pub oracle_uncertainty: f64,
    /// Bound with unit stability constant.
    pub bound: f64,
    pub branch: String,
    pub walltime_s: f64,
}

impl SweepRow {
    /// Whether the oracle uncertainty is too large to trust the error.
    pub fn flagged(&self) -> bool {
        self.oracle_uncertainty > FLAG_FRACTION * self.error
    }

    /// Whether a bound applies to this row.
    pub fn has_bound(&self) -> bool {
        self.branch != NO_BOUND
    }
}

fn params_at(base: &ProblemParams, p: &SweepPoint) -> ProblemParams {
    ProblemParams {
        eps: p.eps,
        sigma_t: p.sigma_t,
        dt: p.dt,
        ..*base
    }
}

fn branch_label(r: &BoundReport) -> String {
    match r
        .terms
        .iter()
        .find(|t| t.name == "streaming_factor")
        .and_then(|t| t.branch)
    {
        Some(inner) if r.regime == "streaming" => format!("streaming-{inner}"),
        _ => r.regime.to_string(),
    }
}

/// Bound `(value, branch)` matching `solver` on `problem`.
pub fn row_bound(
    problem: &Manufactured,
    solver: SolverKind,
    n: usize,
    s: u32,
) -> Result<(f64, String)> {
    let scheme = match solver {
        SolverKind::Pn => Scheme::Pn,
        SolverKind::Hybrid => Scheme::Hybrid,
        SolverKind::Uncollided | SolverKind::Diffusion => return Ok((0.0, NO_BOUND.into())),
    };
    let inp = BoundInputs::from_spec(&problem.spec, s, n)?;
    let rep = match (scheme, inp.sigma_a == 0.0) {
        (Scheme::Pn, true) => pn_error_bound(&inp)?,
        (Scheme::Hybrid, true) => hybrid_error_bound(&inp)?,
        (scheme, false) => absorbing_bounds(&inp, scheme)?,
    };
    Ok((rep.total, branch_label(&rep)))
}

type RefKey = (u64, u64, u64, usize);

fn needs_reference(problem: &Manufactured, solver: SolverKind) -> bool {
    problem.exact.is_none() && solver != SolverKind::Diffusion
}

fn ref_key(problem: &Manufactured, n_ref: usize) -> RefKey {
    let s = &problem.spec;
    // P_N references integrate exactly in time unless a source is sampled.
    let dt = if s.q.is_zero() { 0 } else { s.dt.to_bits() };
    (s.eps.to_bits(), s.sigma_t.to_bits(), dt, n_ref)
}

/// Run every point of the sweep on a pool of `spec.jobs` workers.
///
/// Rows come back in the order of [`RunSpec::sweep_points`].
pub fn run_sweep(spec: &RunSpec) -> Result<Vec<SweepRow>> {
    let points = spec.sweep_points()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = spec.jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Precondition(format!("cannot start worker pool: {e}")))?;
    pool.install(|| sweep_in_pool(spec, &points))
}

fn sweep_in_pool(spec: &RunSpec, points: &[SweepPoint]) -> Result<Vec<SweepRow>> {
    let problems = points
        .iter()
        .map(|p| manufactured(&spec.problem, &params_at(&spec.params, p)))
        .collect::<Result<Vec<_>>>()?;
    let mut wanted: BTreeMap<RefKey, &Manufactured> = BTreeMap::new();
    for (p, m) in points.iter().zip(&problems) {
        if needs_reference(m, p.solver) {
            let n_ref = spec.oracle.reference_degree(p.n, m.data_degree);
            wanted.entry(ref_key(m, n_ref)).or_insert(m);
        }
    }
    let refs: BTreeMap<RefKey, Reference> = wanted
        .into_par_iter()
        .map(|(k, m)| reference(m, k.3, spec.oracle.richardson).map(|r| (k, r)))
        .collect::<Result<_>>()?;
    points
        .par_iter()
        .zip(problems.par_iter())
        .map(|(p, m)| {
            let start = Instant::now();
            let r = if needs_reference(m, p.solver) {
                let n_ref = spec.oracle.reference_degree(p.n, m.data_degree);
                refs.get(&ref_key(m, n_ref))
            } else {
                None
            };
            let meas = measure(m, p.solver, p.n, &spec.oracle, r)?;
            let (bound, branch) = row_bound(m, p.solver, p.n, spec.params.s)?;
            Ok(SweepRow {
                problem: m.name.to_string(),
                solver: p.solver,
                n: p.n,
                dt: p.dt,
                eps: p.eps,
                sigma_t: p.sigma_t,
                sigma_a: m.spec.sigma_a,
                t_final: m.spec.t_final,
                error: meas.error,
                oracle_uncertainty: meas.uncertainty,
                bound,
                branch,
                walltime_s: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write rows as CSV with floats at 17 significant digits.
pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for r in rows {
        w.write_record([
            SCHEMA.to_string(),
            r.problem.clone(),
            r.solver.to_string(),
            r.n.to_string(),
            fmt_f(r.dt),
            fmt_f(r.eps),
            fmt_f(r.sigma_t),
            fmt_f(r.sigma_a),
            fmt_f(r.t_final),
            fmt_f(r.error),
            fmt_f(r.oracle_uncertainty),
            fmt_f(r.bound),
            r.branch.clone(),
            fmt_f(r.walltime_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// CSV text of `rows`.
pub fn to_csv_string(rows: &[SweepRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}

/// Read rows written by [`write_csv`].
pub fn read_csv<R: Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().ne(COLUMNS.iter().copied()) {
        return Err(Error::Format(format!(
            "column mismatch: expected {}, got {}",
            COLUMNS.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let f = |j: usize| -> Result<f64> {
            rec[j].parse().map_err(|_| {
                Error::Format(format!(
                    "line {line}: column {} is not a number",
                    COLUMNS[j]
                ))
            })
        };
        if &rec[0] != SCHEMA {
            return Err(Error::Format(format!(
                "line {line}: unsupported schema '{}'",
                &rec[0]
            )));
        }
        rows.push(SweepRow {
            problem: rec[1].to_string(),
            solver: rec[2]
                .parse()
                .map_err(|_| Error::Format(format!("line {line}: unknown solver")))?,
            n: rec[3]
                .parse()
                .map_err(|_| Error::Format(format!("line {line}: N is not an integer")))?,
            dt: f(4)?,
            eps: f(5)?,
            sigma_t: f(6)?,
            sigma_a: f(7)?,
            t_final: f(8)?,
            error: f(9)?,
            oracle_uncertainty: f(10)?,
            bound: f(11)?,
            branch: rec[12].to_string(),
            walltime_s: f(13)?,
        });
    }
    if rows.is_empty() {
        return Err(Error::Format("csv has no rows".into()));
    }
    Ok(rows)
}
