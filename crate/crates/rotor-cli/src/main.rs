//! Command-line front end: reproducible experiment runs with CSV data
//! files and JSON summaries that embed the exact run configuration.

mod output;

use clap::{Args, Parser, Subcommand};
use output::{write_csv, write_summary, Csv};
use rotor_core::analytic::{green, predict_correlations, predict_dimer_probability};
use rotor_core::lattice::{Lattice, RoutingOrder, Topology};
use rotor_core::sampler::{sample_unicycle, SeededRng};
use rotor_core::tour::{
    conjecture_check, default_msd_window, delta_distribution, msd_mc, pair_correlation_mc,
    planar_reversal_mc, run_euler_tour,
};
use rotor_core::CycleKind;
use serde::Serialize;
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "rotor",
    version,
    about = "Rotor-router walks on square lattices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct LatticeArgs {
    /// Periodic MxN lattice, e.g. --torus 50x50
    #[arg(long, value_name = "MxN", conflicts_with = "planar")]
    torus: Option<String>,
    /// Open LXxLY grid, e.g. --planar 12x12
    #[arg(long, value_name = "LXxLY")]
    planar: Option<String>,
}

impl LatticeArgs {
    fn build(&self) -> Result<Lattice, String> {
        let parse = |s: &str| -> Result<(usize, usize), String> {
            let (a, b) = s
                .split_once('x')
                .ok_or_else(|| format!("expected SIZExSIZE, got {s:?}"))?;
            let a = a.parse().map_err(|_| format!("bad size {a:?}"))?;
            let b = b.parse().map_err(|_| format!("bad size {b:?}"))?;
            Ok((a, b))
        };
        let lat = match (&self.torus, &self.planar) {
            (Some(s), None) => {
                let (m, n) = parse(s)?;
                Lattice::torus(m, n).map_err(|e| e.to_string())?
            }
            (None, Some(s)) => {
                let (lx, ly) = parse(s)?;
                Lattice::planar(lx, ly).map_err(|e| e.to_string())?
            }
            _ => return Err("exactly one of --torus or --planar is required".into()),
        };
        Ok(lat)
    }
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Base seed; every sample derives an independent stream from it
    #[arg(long, env = "ROTOR_SEED", default_value_t = 0)]
    seed: u64,
    /// Routing order: clockwise (N,E,S,W) or cross (N,S,E,W)
    #[arg(long, default_value = "clockwise", value_parser = parse_order)]
    order: RoutingOrder,
    /// Chip vertex id for sampled unicycles
    #[arg(long, default_value_t = 0)]
    chip: usize,
    /// Worker threads (default: all cores); results do not depend on this
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory for the CSV/JSON artifacts
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// csv writes <command>.csv plus the JSON summary; json writes the
    /// summary only, with the data inlined
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,
}

fn parse_order(s: &str) -> Result<RoutingOrder, String> {
    match s {
        "clockwise" => Ok(RoutingOrder::Clockwise),
        "cross" => Ok(RoutingOrder::Cross),
        _ => Err(format!("unknown routing order {s:?} (clockwise|cross)")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample one uniform unicycle and write its snapshot
    Sample {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run one full Euler tour from a sampled unicycle
    Tour {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Monte Carlo dimer/contour pair correlations vs the predictions
    Correlations {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Number of full tours
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Histogram and moments of the full-tour Delta
    DeltaDist {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Mean-square displacement of the walker over early tour steps
    Msd {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Largest tour time recorded (default: fit-window end)
        #[arg(long)]
        t_max: Option<usize>,
    },
    /// Contour-reversal invariants on a planar grid (clockwise routing)
    PlanarCheck {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Conditioned samples to accept
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Second-segment Delta balance evidence on the torus
    Conjecture {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Lattice Green function g_{p,q}
    Green {
        p: i64,
        q: i64,
        /// Absolute quadrature tolerance
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
        format: String,
    },
    /// Closed-form pair correlations and dimer probability
    Predict {
        #[arg(long, default_value = "clockwise", value_parser = parse_order)]
        order: RoutingOrder,
        /// Optional MxN torus for the finite-size dimer probability
        #[arg(long, value_name = "MxN")]
        torus: Option<String>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
        format: String,
    },
}

/// The exact configuration of a run, embedded in every JSON summary.
#[derive(Serialize)]
struct RunConfig {
    command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    topology: Option<Topology>,
    #[serde(skip_serializing_if = "Option::is_none")]
    order: Option<RoutingOrder>,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    chip: Option<usize>,
    format: String,
    out: String,
}

impl RunConfig {
    fn new(command: &str, lat: Option<&Lattice>, common: &CommonArgs) -> RunConfig {
        RunConfig {
            command: command.into(),
            topology: lat.map(Lattice::topology),
            order: Some(common.order),
            seed: common.seed,
            samples: None,
            chip: Some(common.chip),
            format: common.format.clone(),
            out: common.out.display().to_string(),
        }
    }

    fn with_samples(mut self, samples: usize) -> RunConfig {
        self.samples = Some(samples);
        self
    }
}

/// Per-observable agreement between a measured frequency and a prediction:
/// z = (empirical - predicted) / SE with the binomial standard error
/// sqrt(p (1-p) / n). |z| > 4 is flagged as a failure.
#[derive(Serialize)]
struct ZScore {
    observable: String,
    empirical: f64,
    predicted: f64,
    std_error: f64,
    z: f64,
    flagged: bool,
}

fn compare(observables: &[(&str, f64, f64)], n_events: u64) -> Vec<ZScore> {
    observables
        .iter()
        .map(|&(name, empirical, predicted)| {
            let se = (predicted * (1.0 - predicted) / n_events as f64).sqrt();
            let z = (empirical - predicted) / se;
            ZScore {
                observable: name.into(),
                empirical,
                predicted,
                std_error: se,
                z,
                flagged: z.abs() > 4.0,
            }
        })
        .collect()
}

fn kind_char(k: CycleKind) -> char {
    match k {
        CycleKind::Dimer => 'd',
        CycleKind::Contour => 'c',
    }
}

fn init_threads(n: Option<usize>) {
    if let Some(n) = n {
        // Ignore the error from a pool that is already initialized.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Sample { lattice, common } => {
            let lat = lattice.build()?;
            init_threads(common.threads);
            let mut rng = SeededRng::new(common.seed, 0);
            let st = sample_unicycle(&lat, common.chip, &mut rng).map_err(|e| e.to_string())?;
            let snap = st.snapshot(&lat);
            let mut csv = Csv::new("vertex,x,y,arrow");
            for (v, c) in snap.arrows.chars().enumerate() {
                let (x, y) = lat.coords(v);
                csv.row(format!("{v},{x},{y},{c}"));
            }
            let config = RunConfig::new("sample", Some(&lat), &common);
            let results = json!({ "snapshot": snap });
            finish(&common.out, &common.format, config, results, csv)?;
            println!(
                "sampled unicycle: chip {} arrows {}",
                snap.chip, snap.arrows
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Tour { lattice, common } => {
            let lat = lattice.build()?;
            init_threads(common.threads);
            let mut rng = SeededRng::new(common.seed, 0);
            let mut st = sample_unicycle(&lat, common.chip, &mut rng).map_err(|e| e.to_string())?;
            let log = run_euler_tour(&mut st, &lat, common.order).map_err(|e| {
                let snap = serde_json::to_string(&st.snapshot(&lat)).unwrap();
                format!("{e}; offending state: {snap}")
            })?;
            let mut csv = Csv::new("t,kind,r2");
            for t in 0..log.steps() {
                csv.row(format!("{t},{},{}", kind_char(log.kinds[t]), log.r2[t]));
            }
            let config = RunConfig::new("tour", Some(&lat), &common);
            let results = json!({
                "steps": log.steps(),
                "dimers": log.dimers(),
                "contours": log.contours(),
                "delta": log.delta(),
            });
            finish(&common.out, &common.format, config, results, csv)?;
            println!(
                "tour closed after {} steps: {} dimers, {} contours, delta {}",
                log.steps(),
                log.dimers(),
                log.contours(),
                log.delta()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Correlations {
            lattice,
            common,
            samples,
        } => {
            let lat = lattice.build()?;
            init_threads(common.threads);
            let counts = pair_correlation_mc(&lat, common.order, common.chip, samples, common.seed)
                .map_err(|e| e.to_string())?;
            let f = counts.frequencies();
            let p = predict_correlations(common.order).map_err(|e| e.to_string())?;
            let scores = compare(
                &[
                    ("pdd", f[0], p.pdd),
                    ("pdc", f[1], p.pdc),
                    ("pcd", f[2], p.pcd),
                    ("pcc", f[3], p.pcc),
                ],
                counts.total(),
            );
            let mut csv = Csv::new("observable,empirical,predicted,std_error,z,flagged");
            for s in &scores {
                csv.row(format!(
                    "{},{},{},{},{},{}",
                    s.observable, s.empirical, s.predicted, s.std_error, s.z, s.flagged
                ));
            }
            let flagged = scores.iter().any(|s| s.flagged);
            let config = RunConfig::new("correlations", Some(&lat), &common).with_samples(samples);
            let results = json!({
                "pair_events": counts.total(),
                "counts": { "dd": counts.dd, "dc": counts.dc, "cd": counts.cd, "cc": counts.cc },
                "scores": scores,
                "flagged": flagged,
            });
            finish(&common.out, &common.format, config, results, csv)?;
            for s in &scores {
                println!(
                    "{}: empirical {:.6} predicted {:.6} z {:+.2}{}",
                    s.observable,
                    s.empirical,
                    s.predicted,
                    s.z,
                    if s.flagged { " FLAGGED" } else { "" }
                );
            }
            Ok(if flagged {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::DeltaDist {
            lattice,
            common,
            samples,
        } => {
            let lat = lattice.build()?;
            init_threads(common.threads);
            let dist = delta_distribution(&lat, common.order, common.chip, samples, common.seed)
                .map_err(|e| e.to_string())?;
            let mut csv = Csv::new("delta,count");
            for (d, c) in &dist.histogram {
                csv.row(format!("{d},{c}"));
            }
            let config = RunConfig::new("delta-dist", Some(&lat), &common).with_samples(samples);
            let results = json!({
                "n": dist.n,
                "mean": dist.mean,
                "variance": dist.m2,
                "skewness": dist.skewness,
                "excess_kurtosis": dist.excess_kurtosis,
                "min": dist.min,
                "max": dist.max,
                "histogram": dist.histogram,
            });
            finish(&common.out, &common.format, config, results, csv)?;
            println!(
                "delta over {} tours: mean {:.4}, variance {:.4}, min {}, max {}",
                dist.n, dist.mean, dist.m2, dist.min, dist.max
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Msd {
            lattice,
            common,
            samples,
            t_max,
        } => {
            let lat = lattice.build()?;
            init_threads(common.threads);
            let side = match lat.topology() {
                Topology::Torus { m, n } => m.min(n),
                Topology::Planar { lx, ly } => lx.min(ly),
            };
            let (t1, t2) = default_msd_window(side);
            let t_max = t_max.unwrap_or(t2);
            let curve = msd_mc(&lat, common.order, common.chip, samples, t_max, common.seed)
                .map_err(|e| e.to_string())?;
            let (slope, intercept) = curve
                .fit_slope(t1, t2.min(t_max))
                .map_err(|e| e.to_string())?;
            let mut csv = Csv::new("t,mean_r2");
            for (t, v) in curve.mean_r2.iter().enumerate() {
                csv.row(format!("{t},{v}"));
            }
            let config = RunConfig::new("msd", Some(&lat), &common).with_samples(samples);
            let results = json!({
                "t_max": t_max,
                "fit_window": [t1, t2.min(t_max)],
                "slope": slope,
                "intercept": intercept,
                "mean_r2": curve.mean_r2,
            });
            finish(&common.out, &common.format, config, results, csv)?;
            println!("msd slope {slope:.4} over t in [{t1}, {}]", t2.min(t_max));
            Ok(ExitCode::SUCCESS)
        }
        Command::PlanarCheck {
            lattice,
            common,
            samples,
        } => {
            let lat = lattice.build()?;
            init_threads(common.threads);
            if common.order != RoutingOrder::Clockwise {
                return Err("planar-check requires --order clockwise".into());
            }
            let summary =
                planar_reversal_mc(&lat, common.chip, samples, samples * 100, common.seed)
                    .map_err(|e| e.to_string())?;
            let rows = [
                ("attempted", summary.n_attempted),
                ("accepted", summary.n_accepted),
                ("skipped", summary.n_skipped),
                ("delta_violations", summary.delta_violations),
                ("external_violations", summary.external_violations),
                ("internal_violations", summary.internal_violations),
                ("reversal_failures", summary.reversal_failures),
                ("stage_sum_violations", summary.stage_sum_violations),
            ];
            let mut csv = Csv::new("metric,value");
            for (k, v) in rows {
                csv.row(format!("{k},{v}"));
            }
            let passed = summary.all_passed() && summary.n_accepted >= samples;
            let config = RunConfig::new("planar-check", Some(&lat), &common).with_samples(samples);
            let results = json!({
                "attempted": summary.n_attempted,
                "accepted": summary.n_accepted,
                "skipped": summary.n_skipped,
                "delta_violations": summary.delta_violations,
                "external_violations": summary.external_violations,
                "internal_violations": summary.internal_violations,
                "reversal_failures": summary.reversal_failures,
                "stage_sum_violations": summary.stage_sum_violations,
                "passed": passed,
            });
            finish(&common.out, &common.format, config, results, csv)?;
            println!(
                "planar check: {} accepted, {}",
                summary.n_accepted,
                if passed {
                    "all invariants hold"
                } else {
                    "VIOLATIONS"
                }
            );
            Ok(if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Conjecture {
            lattice,
            common,
            samples,
        } => {
            let lat = lattice.build()?;
            init_threads(common.threads);
            let rep = conjecture_check(
                &lat,
                common.order,
                common.chip,
                samples,
                samples * 100,
                common.seed,
            )
            .map_err(|e| e.to_string())?;
            let mut csv = Csv::new("second_delta,count");
            for (d, c) in &rep.histogram {
                csv.row(format!("{d},{c}"));
            }
            let ok = rep.additivity_violations == 0 && rep.first_delta_violations == 0;
            let config = RunConfig::new("conjecture", Some(&lat), &common).with_samples(samples);
            let results = json!({
                "attempted": rep.n_attempted,
                "accepted": rep.n_accepted,
                "skipped": rep.n_skipped,
                "reversal_not_found": rep.reversal_not_found,
                "min_second_delta": rep.min_second_delta,
                "additivity_violations": rep.additivity_violations,
                "first_delta_violations": rep.first_delta_violations,
                "histogram": rep.histogram,
            });
            finish(&common.out, &common.format, config, results, csv)?;
            println!(
                "conjecture evidence: {} samples, min second-segment delta {:?}",
                rep.n_accepted, rep.min_second_delta
            );
            Ok(if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Green {
            p,
            q,
            tol,
            out,
            format,
        } => {
            let v = green(p, q, tol).map_err(|e| e.to_string())?;
            let mut csv = Csv::new("p,q,value");
            csv.row(format!("{p},{q},{v}"));
            let config = RunConfig {
                command: "green".into(),
                topology: None,
                order: None,
                seed: 0,
                samples: None,
                chip: None,
                format: format.clone(),
                out: out.display().to_string(),
            };
            finish(
                &out,
                &format,
                config,
                json!({ "p": p, "q": q, "value": v }),
                csv,
            )?;
            println!("g_{{{p},{q}}} = {v:.10}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Predict {
            order,
            torus,
            out,
            format,
        } => {
            let p = predict_correlations(order).map_err(|e| e.to_string())?;
            let mut rows = vec![
                ("pdd".to_string(), p.pdd),
                ("pdc".to_string(), p.pdc),
                ("pcd".to_string(), p.pcd),
                ("pcc".to_string(), p.pcc),
            ];
            let mut topology = None;
            if let Some(s) = &torus {
                let (m, n) = s
                    .split_once('x')
                    .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
                    .ok_or_else(|| format!("expected MxN, got {s:?}"))?;
                topology = Some(Topology::Torus { m, n });
                rows.push(("p_dimer".to_string(), predict_dimer_probability(m, n)));
            }
            let mut csv = Csv::new("observable,value");
            for (k, v) in &rows {
                csv.row(format!("{k},{v}"));
            }
            let config = RunConfig {
                command: "predict".into(),
                topology,
                order: Some(order),
                seed: 0,
                samples: None,
                chip: None,
                format: format.clone(),
                out: out.display().to_string(),
            };
            let results: serde_json::Map<String, serde_json::Value> =
                rows.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
            finish(&out, &format, config, json!(results), csv)?;
            for (k, v) in &rows {
                println!("{k} = {v:.6}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn finish(
    out: &std::path::Path,
    format: &str,
    config: RunConfig,
    results: serde_json::Value,
    csv: Csv,
) -> Result<(), String> {
    let command = config.command.clone();
    if format == "csv" {
        write_csv(out, &command, csv)?;
    }
    write_summary(out, &command, config, results)
}
