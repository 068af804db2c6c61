use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qaction::harness::convergence::{convergence_study, epsilon_run, evaluate, Check, Control, MetricSelection};
use qaction::harness::export::{export_operator_fields, export_report, Provenance};
use qaction::harness::model::{resolve_model, GaugeTag, ModelSpec};
use qaction::harness::pipeline::{analyze, run_pipeline, PipelineOptions};
use qaction::spectral_action::BandConfig;
use qaction::harness::verify::{invariant_checks, refinement_study};
use qaction::Result;

#[derive(Parser)]
#[command(name = "qaction", version, about = "Spectral action pipeline and full-quantization checks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// Preset name (M1, M2, M3) or path to a model JSON file.
    #[arg(long, default_value = "M2")]
    model: String,
    /// Output directory for CSV and JSON files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// θ gauge (centered or shifted-x1x2); defaults to the model's gauge list.
    #[arg(long)]
    gauge: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Symbol-level fields per band.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Also write W, R and Q operator fields (needs --out).
        #[arg(long)]
        dump: bool,
    },
    /// Invariant suite and grid-refinement consistency.
    Verify {
        #[command(flatten)]
        common: Common,
    },
    /// Band spectra of the full and effective operators at one ε.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        /// Switch off one correction (no-mu is the one affecting spectra).
        #[arg(long)]
        control: Vec<String>,
    },
    /// Residual slopes over the model's ε list.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Add a control run (no-W, no-Y, no-R, no-mu); repeatable.
        #[arg(long)]
        control: Vec<String>,
        /// Restrict to metric families: periodicity, commutators, conjugation, bands, composition.
        #[arg(long, value_delimiter = ',')]
        metrics: Vec<String>,
        /// Override the ε list (comma separated).
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
    },
}

fn gauges(spec: &ModelSpec, g: &Option<String>) -> Result<Vec<GaugeTag>> {
    match g {
        Some(s) => Ok(vec![GaugeTag::parse(s)?]),
        None => Ok(spec.gauges.clone()),
    }
}

fn parse_controls(v: &[String]) -> Result<Vec<Control>> {
    v.iter().map(|s| Control::parse(s)).collect()
}

fn report(checks: &[Check]) -> bool {
    for c in checks {
        println!("{}", c.line());
    }
    checks.iter().all(|c| c.passed)
}

fn write_out(dir: &std::path::Path, name: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| qaction::Error::Io { path: dir.display().to_string(), source: e })?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| qaction::Error::Io { path: path.display().to_string(), source: e })?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Analyze { common, dump } => {
            let mut spec = resolve_model(&common.model)?;
            spec.gauges = gauges(&spec, &common.gauge)?;
            let rep = run_pipeline(&spec)?;
            for (g, d) in &rep.diagnostics {
                println!("gauge {}: {}", g.as_str(), serde_json::to_string(d)?);
            }
            if let Some(dir) = &common.out {
                for p in export_report(&rep, dir)? {
                    println!("wrote {}", p.display());
                }
                if dump {
                    let symbol = spec.symbol()?;
                    for &g in &spec.gauges {
                        let opts = PipelineOptions { gauge: g, bands: BandConfig { n_guard: spec.n_guard, ..Default::default() }, ..Default::default() };
                        let a = analyze(&symbol, spec.slow_grid()?, &opts)?;
                        for p in export_operator_fields(&a, &dir.join(g.as_str()))? {
                            println!("wrote {}", p.display());
                        }
                    }
                }
            }
            Ok(true)
        }
        Cmd::Verify { common } => {
            let spec = resolve_model(&common.model)?;
            let mut checks = Vec::new();
            for g in gauges(&spec, &common.gauge)? {
                let r = refinement_study(&spec, g)?;
                checks.extend(invariant_checks(&spec.name, &r.coarse));
                checks.extend(r.checks(&spec.bands));
                if let Some(dir) = &common.out {
                    write_out(dir, &format!("refinement_{}.json", g.as_str()), &(serde_json::to_string_pretty(&r)? + "\n"))?;
                }
            }
            Ok(report(&checks))
        }
        Cmd::Spectrum { common, epsilon, control } => {
            let spec = resolve_model(&common.model)?;
            let controls = parse_controls(&control)?;
            let mut sel = MetricSelection::none();
            sel.bands = spec.bands.clone();
            sel.controls = controls;
            let mut csv = String::from("model,gauge,epsilon,k,index,exact,effective,deformed,residual\n");
            for g in gauges(&spec, &common.gauge)? {
                let run = epsilon_run(&spec, epsilon, g, &sel)?;
                for b in &run.bands {
                    println!("band {} ({}): max residual {:.3e}", b.k, g.as_str(), b.max_residual());
                    for i in 0..b.residuals.len() {
                        let d = b.deformed.as_ref().map(|d| format!("{:.12e}", d[i])).unwrap_or_default();
                        let _ = writeln!(
                            csv,
                            "{},{},{:.12e},{},{},{:.12e},{:.12e},{},{:.12e}",
                            spec.name,
                            g.as_str(),
                            epsilon,
                            b.k,
                            i,
                            b.exact[i],
                            b.effective[i],
                            d,
                            b.residuals[i]
                        );
                    }
                }
                for (n, v) in run.values.iter().filter(|(n, _)| n.contains('[')) {
                    println!("{n}: {v:.3e}");
                }
            }
            if let Some(dir) = &common.out {
                write_out(dir, "spectrum.csv", &csv)?;
            }
            Ok(true)
        }
        Cmd::Converge { common, control, metrics, eps } => {
            let mut spec = resolve_model(&common.model)?;
            if !eps.is_empty() {
                spec.epsilon_list = eps;
            }
            let mut sel = MetricSelection::all(&spec);
            sel.controls = parse_controls(&control)?;
            if !metrics.is_empty() {
                let has = |m: &str| metrics.iter().any(|x| x == m);
                sel.periodicity = has("periodicity");
                sel.commutators = has("commutators");
                sel.conjugation = has("conjugation");
                sel.composition = has("composition");
                if !has("bands") {
                    sel.bands.clear();
                }
            }
            let mut ok = true;
            for g in gauges(&spec, &common.gauge)? {
                let conv = convergence_study(&spec, g, &sel)?;
                for f in &conv.fits {
                    println!("{} {}", g.as_str(), f.describe());
                }
                ok &= report(&evaluate(&conv));
                if let Some(dir) = &common.out {
                    let dir = dir.join(g.as_str());
                    let rep = qaction::harness::pipeline::RunReport {
                        model: spec.name.clone(),
                        tables: vec![],
                        diagnostics: vec![],
                        convergence: Some(conv),
                        provenance: Provenance::for_spec(&spec),
                    };
                    for p in export_report(&rep, &dir)? {
                        println!("wrote {}", p.display());
                    }
                }
            }
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
