//! Command-line front end. `main.rs` only forwards `argv` here.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::ensemble::{EnsembleSpec, Rational, Summary};
use crate::error::{Error, Result};
use crate::exit::{self, ExitModel, ThresholdOptions};
use crate::inffunc::TableCache;
use crate::peel::{self, SweepOptions, SweepPoint};
use crate::report::{num, CsvTable, RunReport};
use crate::stability::{self, StabilityBound, StabilityMatrices, StabilityVerdict};

#[derive(Debug, Parser)]
#[command(
    name = "met-dgldpc",
    version,
    about = "MET D-GLDPC ensemble analysis on the erasure channel"
)]
pub struct Cli {
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format; each subcommand has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for parallel work (default: available cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a spec and print its derived quantities.
    Validate(SpecArg),
    /// Dump the information-function table of one node type.
    Inffunc {
        #[command(flatten)]
        spec: SpecArg,
        /// Name of a VN or CN type.
        #[arg(long = "type")]
        type_name: String,
    },
    /// Density-evolution trajectory at one erasure probability.
    ExitChart {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = exit::DEFAULT_MAX_ITERS)]
        max_iters: usize,
        #[arg(long, default_value_t = exit::DEFAULT_TOL)]
        tol: f64,
    },
    /// Decoding threshold by bisection.
    Threshold {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value_t = exit::DEFAULT_TOL_EPS)]
        tol_eps: f64,
        #[arg(long, default_value_t = exit::DEFAULT_MAX_ITERS)]
        max_iters: usize,
        #[arg(long, default_value_t = exit::DEFAULT_TOL)]
        tol: f64,
    },
    /// Stability matrices, σ(P(ε)C) at one ε or the stability bound.
    Stability {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, conflicts_with = "bound")]
        epsilon: Option<f64>,
        /// Compute the bound (the default when no ε is given).
        #[arg(long)]
        bound: bool,
        #[arg(long, default_value_t = stability::DEFAULT_BOUND_TOL)]
        tol_eps: f64,
    },
    /// Finite-length peeling-decoder simulation.
    Simulate {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long)]
        scale: u64,
        /// Grid `start:stop:step`, both ends included.
        #[arg(long)]
        eps: String,
        #[arg(long)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = peel::DEFAULT_MAX_ITERS)]
        max_iters: usize,
        /// Iterations of per-type message-known fractions to report (JSON only).
        #[arg(long, default_value_t = 0)]
        trajectory_iters: usize,
    },
}

#[derive(Debug, Args)]
pub struct SpecArg {
    /// Ensemble spec (JSON).
    pub spec: PathBuf,
}

/// What a subcommand produced, before rendering.
pub struct Output {
    pub text: String,
}

pub fn load_spec(path: &Path) -> Result<EnsembleSpec> {
    let text = std::fs::read_to_string(path)?;
    crate::ensemble::parse_spec(&text)
}

/// Parses `start:stop:step` into an inclusive grid.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::validation(format!("grid `{s}` is not start:stop:step"));
    let vals = match parts.as_slice() {
        [a] => return Ok(vec![a.trim().parse().map_err(|_| bad())?]),
        [a, b, c] => [a, b, c]
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?,
        _ => return Err(bad()),
    };
    let (a, b, step) = (vals[0], vals[1], vals[2]);
    if !(a.is_finite() && b.is_finite() && step.is_finite()) || step <= 0.0 || b < a {
        return Err(bad());
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    if n > 1_000_000 {
        return Err(Error::capacity("grid points", n + 1, 1_000_001));
    }
    Ok((0..=n).map(|i| a + i as f64 * step).collect())
}

fn exact(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

#[derive(Serialize)]
struct ExitChartResult {
    converged: bool,
    iterations: usize,
    trajectory: Vec<TrajectoryRow>,
}

#[derive(Serialize)]
struct TrajectoryRow {
    iter: usize,
    i_ev: Vec<f64>,
}

#[derive(Serialize)]
struct ThresholdReport {
    threshold: f64,
    tol: f64,
    iterations: usize,
    probes: usize,
}

#[derive(Serialize)]
struct StabilityReport {
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "C_exact")]
    c_exact: Vec<Vec<String>>,
    /// `[l][m][u]`: coefficient of `ε^u` in `P^{l,m}(ε)`.
    #[serde(rename = "P_coeffs")]
    p_coeffs: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "P_coeffs_exact")]
    p_exact: Vec<Vec<Vec<String>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<StabilityVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bound: Option<BoundReport>,
    weight2_disjoint: bool,
}

#[derive(Serialize)]
struct BoundReport {
    /// `null` when the fixed point is stable on the whole interval.
    value: Option<f64>,
    unbounded: bool,
    tol: f64,
}

#[derive(Serialize)]
struct SimulateReport {
    prediction: &'static str,
    points: Vec<SweepPoint>,
}

fn stability_report(
    m: &StabilityMatrices,
    sigma: Option<StabilityVerdict>,
    bound: Option<(StabilityBound, f64)>,
    weight2_disjoint: bool,
) -> StabilityReport {
    let to_f = |r: &Rational| crate::ensemble::to_f64(*r);
    StabilityReport {
        c: m.c_exact()
            .iter()
            .map(|row| row.iter().map(to_f).collect())
            .collect(),
        c_exact: m
            .c_exact()
            .iter()
            .map(|row| row.iter().map(exact).collect())
            .collect(),
        p_coeffs: m
            .p_exact()
            .iter()
            .map(|row| row.iter().map(|p| p.iter().map(to_f).collect()).collect())
            .collect(),
        p_exact: m
            .p_exact()
            .iter()
            .map(|row| row.iter().map(|p| p.iter().map(exact).collect()).collect())
            .collect(),
        sigma,
        bound: bound.map(|(b, tol)| BoundReport {
            value: b.value(),
            unbounded: b == StabilityBound::Unbounded,
            tol,
        }),
        weight2_disjoint,
    }
}

enum Rendered {
    Json(Box<dyn FnOnce(f64) -> String + Send>),
    Csv(String),
}

fn json_report<T: Serialize + Send + 'static>(
    spec: &EnsembleSpec,
    sub: &str,
    params: Value,
    results: T,
) -> Rendered {
    let report = RunReport::new(&spec.digest(), sub, params, results);
    Rendered::Json(Box::new(move |secs| {
        let mut r = report;
        r.duration_seconds = secs;
        r.to_json()
    }))
}

fn csv_report(spec: &EnsembleSpec, sub: &str, params: &Value, table: CsvTable) -> Rendered {
    Rendered::Csv(table.with_preamble(&spec.digest(), sub, params).render())
}

fn no_csv(sub: &str) -> Error {
    Error::validation(format!("`{sub}` has no CSV output; use --format json"))
}

fn execute(command: &Command, format: Option<Format>) -> Result<Rendered> {
    match command {
        Command::Validate(arg) => {
            let spec = load_spec(&arg.spec)?;
            if format == Some(Format::Csv) {
                return Err(no_csv("validate"));
            }
            let summary: Summary = spec.summary();
            Ok(json_report(&spec, "validate", json!({}), summary))
        }
        Command::Inffunc { spec, type_name } => {
            let spec = load_spec(&spec.spec)?;
            let n_e = spec.num_edge_types();
            let cache = TableCache::global();
            let (table, kind) = if let Some(g) = spec.find_vn(type_name) {
                (cache.vn(&spec.vn_types()[g], n_e)?, "vn")
            } else if let Some(d) = spec.find_cn(type_name) {
                (cache.cn(&spec.cn_types()[d], n_e)?, "cn")
            } else {
                return Err(Error::validation(format!(
                    "no VN or CN type named `{type_name}`"
                )));
            };
            let params = json!({ "type": type_name });
            if format == Some(Format::Csv) {
                let mut header: Vec<String> = (1..=n_e).map(|l| format!("g_{l}")).collect();
                header.extend(["u".to_string(), "value".to_string()]);
                let refs: Vec<&str> = header.iter().map(String::as_str).collect();
                let mut t = CsvTable::new(&refs);
                t.comment("kind", kind);
                for (g, u, v) in table.entries() {
                    let mut row: Vec<String> = g.iter().map(|x| x.to_string()).collect();
                    row.push(u.to_string());
                    row.push(v.to_string());
                    t.push(row);
                }
                return Ok(csv_report(&spec, "inffunc", &params, t));
            }
            Ok(json_report(
                &spec,
                "inffunc",
                params,
                table.dump(type_name, kind),
            ))
        }
        Command::ExitChart {
            spec,
            epsilon,
            max_iters,
            tol,
        } => {
            let spec = load_spec(&spec.spec)?;
            let model = ExitModel::new(&spec)?;
            let run = model.run_to_fixed_point(*epsilon, *max_iters, *tol, true)?;
            let params = json!({ "epsilon": epsilon, "max_iters": max_iters, "tol": tol });
            if format == Some(Format::Json) {
                let result = ExitChartResult {
                    converged: run.converged,
                    iterations: run.iterations,
                    trajectory: run
                        .trajectory
                        .into_iter()
                        .map(|s| TrajectoryRow {
                            iter: s.iteration,
                            i_ev: s.i_ev,
                        })
                        .collect(),
                };
                return Ok(json_report(&spec, "exit-chart", params, result));
            }
            let mut header = vec!["iter".to_string()];
            header.extend((1..=spec.num_edge_types()).map(|l| format!("I_EV_{l}")));
            let refs: Vec<&str> = header.iter().map(String::as_str).collect();
            let mut t = CsvTable::new(&refs);
            t.comment("converged", run.converged);
            for s in &run.trajectory {
                let mut row = vec![s.iteration.to_string()];
                row.extend(s.i_ev.iter().map(|&x| num(x)));
                t.push(row);
            }
            Ok(csv_report(&spec, "exit-chart", &params, t))
        }
        Command::Threshold {
            spec,
            tol_eps,
            max_iters,
            tol,
        } => {
            let spec = load_spec(&spec.spec)?;
            let opts = ThresholdOptions {
                tol_eps: *tol_eps,
                max_iters: *max_iters,
                tol_fp: *tol,
            };
            let r = exit::threshold(&spec, &opts)?;
            let params = json!({ "tol_eps": tol_eps, "max_iters": max_iters, "tol": tol });
            if format == Some(Format::Csv) {
                let mut t = CsvTable::new(&["threshold", "tol", "iterations", "probes"]);
                t.push(vec![
                    num(r.threshold),
                    num(r.half_width),
                    r.de_iterations.to_string(),
                    r.probes.to_string(),
                ]);
                return Ok(csv_report(&spec, "threshold", &params, t));
            }
            let result = ThresholdReport {
                threshold: r.threshold,
                tol: r.half_width,
                iterations: r.de_iterations,
                probes: r.probes,
            };
            Ok(json_report(&spec, "threshold", params, result))
        }
        Command::Stability {
            spec,
            epsilon,
            bound: _,
            tol_eps,
        } => {
            let spec = load_spec(&spec.spec)?;
            let m = stability::build_matrices(&spec)?;
            let weight2_disjoint = stability::weight2_supports_disjoint(&spec)?;
            let (verdict, bound, params) = match epsilon {
                Some(eps) => {
                    if !(0.0..=1.0).contains(eps) {
                        return Err(Error::validation(format!("epsilon {eps} outside [0, 1]")));
                    }
                    (Some(m.verdict(*eps)?), None, json!({ "epsilon": eps }))
                }
                None => (
                    None,
                    Some((m.bound(*tol_eps)?, *tol_eps)),
                    json!({ "bound": true, "tol_eps": tol_eps }),
                ),
            };
            if format == Some(Format::Csv) {
                let mut t;
                if let Some(v) = verdict {
                    t = CsvTable::new(&["epsilon", "sigma", "status", "weight2_disjoint"]);
                    t.push(vec![
                        num(v.epsilon),
                        num(v.sigma),
                        serde_json::to_value(v.status)
                            .unwrap()
                            .as_str()
                            .unwrap()
                            .to_string(),
                        weight2_disjoint.to_string(),
                    ]);
                } else {
                    let (b, _) = bound.unwrap();
                    t = CsvTable::new(&["bound", "unbounded", "weight2_disjoint"]);
                    t.push(vec![
                        b.value().map_or("".into(), num),
                        (b == StabilityBound::Unbounded).to_string(),
                        weight2_disjoint.to_string(),
                    ]);
                }
                return Ok(csv_report(&spec, "stability", &params, t));
            }
            let result = stability_report(&m, verdict, bound, weight2_disjoint);
            Ok(json_report(&spec, "stability", params, result))
        }
        Command::Simulate {
            spec,
            scale,
            eps,
            trials,
            seed,
            max_iters,
            trajectory_iters,
        } => {
            let spec = load_spec(&spec.spec)?;
            let grid = parse_grid(eps)?;
            let opts = SweepOptions {
                scale: *scale,
                trials: *trials,
                seed: *seed,
                max_iters: *max_iters,
                trajectory_iters: *trajectory_iters,
            };
            let points = peel::sweep(&spec, &grid, &opts)?;
            let params = json!({
                "scale": scale, "eps": eps, "trials": trials, "seed": seed,
                "max_iters": max_iters, "rng": "ChaCha8",
            });
            let prediction = peel::prediction_label(&spec);
            if format == Some(Format::Json) {
                let result = SimulateReport { prediction, points };
                return Ok(json_report(&spec, "simulate", params, result));
            }
            let mut t = CsvTable::new(&["eps", "ber", "bler", "ci_lo", "ci_hi", "trials"]);
            t.comment("prediction", prediction);
            for p in &points {
                t.push(vec![
                    num(p.epsilon),
                    num(p.ber),
                    num(p.bler),
                    num(p.ci_lo),
                    num(p.ci_hi),
                    p.trials.to_string(),
                ]);
            }
            Ok(csv_report(&spec, "simulate", &params, t))
        }
    }
}

/// Runs a parsed command and returns the rendered text.
pub fn run(cli: &Cli) -> Result<Output> {
    let start = Instant::now();
    let rendered = match cli.jobs {
        Some(0) => return Err(Error::validation("--jobs must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Internal(e.to_string()))?
            .install(|| execute(&cli.command, cli.format))?,
        None => execute(&cli.command, cli.format)?,
    };
    let text = match rendered {
        Rendered::Json(finish) => finish(start.elapsed().as_secs_f64()),
        Rendered::Csv(text) => text,
    };
    Ok(Output { text })
}

/// Full entry point: parse, run, write, and map errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = run(&cli).and_then(|out| match &cli.out {
        Some(path) => std::fs::write(path, out.text).map_err(Error::from),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(out.text.as_bytes())?;
            stdout.flush().map_err(Error::from)
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0.1:0.3:0.1").unwrap().len(), 3);
        assert_eq!(parse_grid("0.4").unwrap(), vec![0.4]);
        assert_eq!(
            parse_grid("0:1:0.25").unwrap(),
            vec![0.0, 0.25, 0.5, 0.75, 1.0]
        );
        assert!(parse_grid("0.3:0.1:0.1").is_err());
        assert!(parse_grid("a:b:c").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }

    #[test]
    fn parses_global_flags_after_subcommand() {
        let cli = Cli::try_parse_from([
            "met-dgldpc",
            "threshold",
            "x.json",
            "--format",
            "csv",
            "--jobs",
            "2",
        ])
        .unwrap();
        assert_eq!(cli.format, Some(Format::Csv));
        assert_eq!(cli.jobs, Some(2));
    }
}
