use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use imtsim::channel::ProfileLibrary;
use imtsim::engine::Simulator;
use imtsim::geometry::build_layout;
use imtsim::report::{check_compliance, emit, ingest_table, ComplianceReport, SimulatedKpis, SinrDump, Status};
use imtsim::scenario::{
    apply_overrides, load_config, preset, EvaluationConfig, RequirementSet, TestEnvironment, Variant, PRESET_SOURCES,
};

#[derive(Parser)]
#[command(name = "simulate", version, about = "IMT-2020 system-level simulation and compliance checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset, optionally modified by a config file and overrides.
    Run {
        #[arg(long)]
        scenario: TestEnvironment,
        #[arg(long, default_value = "A")]
        variant: Variant,
        /// TOML file applied on top of the preset.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        drops: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for the result bundle.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// `section.key=value`, repeatable.
        #[arg(long = "set", value_parser = parse_key_value)]
        set: Vec<(String, String)>,
        /// Write every SINR sample to this CSV file.
        #[arg(long)]
        dump_sinr: Option<PathBuf>,
    },
    /// List the environments, their variants and KPIs.
    ListScenarios,
    /// Check a result table (CSV) or a run's kpi.json against requirements.
    Check {
        #[arg(long)]
        results: PathBuf,
        /// `builtin` or a requirements CSV.
        #[arg(long, default_value = "builtin")]
        requirements: String,
    },
    /// Print a channel profile as TOML.
    DumpProfile { name: String },
}

fn parse_key_value(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected key=value, got `{s}`"))
}

type CliResult<T> = Result<T, Box<dyn std::error::Error>>;

fn build_config(
    scenario: TestEnvironment,
    variant: Variant,
    config: Option<&Path>,
    drops: Option<u32>,
    seed: Option<u64>,
    set: &[(String, String)],
) -> CliResult<EvaluationConfig> {
    let base = match config {
        Some(path) => load_config(path, Some((scenario, variant)))?,
        None => preset(scenario, variant)?,
    };
    let mut overrides = Vec::new();
    if let Some(d) = drops {
        overrides.push(("run.drops".to_string(), d.to_string()));
    }
    if let Some(s) = seed {
        overrides.push(("run.master_seed".to_string(), s.to_string()));
    }
    overrides.extend_from_slice(set);
    let config = apply_overrides(&base, &overrides)?;
    config.validate()?;
    Ok(config)
}

fn print_report(report: &ComplianceReport) {
    for r in &report.rows {
        let num = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.6}"));
        println!(
            "{:<13} {:<20} {:<9} {:<26} {:>18} {:>18}  {}{}",
            r.status.as_str(),
            r.environment,
            r.direction,
            r.metric,
            num(r.measured),
            num(r.requirement),
            r.evaluator,
            if r.footnotes.is_empty() { String::new() } else { format!(" ({})", r.footnotes.join("; ")) },
        );
    }
    println!(
        "{} pass, {} fail, {} not evaluated",
        report.count(Status::Pass),
        report.count(Status::Fail),
        report.count(Status::NotEvaluated)
    );
}

fn exit_for(report: &ComplianceReport) -> ExitCode {
    if report.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: Cli) -> CliResult<ExitCode> {
    match cli.command {
        Command::Run {
            scenario,
            variant,
            config,
            drops,
            seed,
            out,
            set,
            dump_sinr,
        } => {
            let config = build_config(scenario, variant, config.as_deref(), drops, seed, &set)?;
            let layout = build_layout(&config);
            let sim = Simulator::new(&config, &layout)?;
            let result = match &dump_sinr {
                Some(path) => {
                    let file = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
                    let mut dump = SinrDump::new(BufWriter::new(file))?;
                    let result = sim.run_observed(|d| dump.push(d))?;
                    dump.finish()?;
                    result
                }
                None => sim.run()?,
            };
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            let report = check_compliance(&result, &RequirementSet::builtin());
            let files = emit(&result, &report, &out)?;
            println!(
                "{} {} | {} drops ({:?}) | config {}",
                result.environment,
                result.variant,
                result.drops_run,
                result.convergence.state,
                &result.config_hash[..12]
            );
            for k in &result.kpis {
                println!("{:<9} {:<22} {:>16.6} {}  {}", k.direction, k.metric, k.value, k.unit, k.detail);
            }
            print_report(&report);
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(exit_for(&report))
        }
        Command::ListScenarios => {
            for (env, source) in PRESET_SOURCES {
                let kpis: Vec<String> = env.kpis().iter().map(|k| format!("{} {}", k.direction, k.metric)).collect();
                println!("{env}\n  variants: A, B\n  {source}\n  KPIs: {}", kpis.join(", "));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { results, requirements } => {
            let reqs = if requirements == "builtin" {
                RequirementSet::builtin()
            } else {
                let path = Path::new(&requirements);
                let file = std::fs::File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
                RequirementSet::read_csv(file)?
            };
            let report = if results.extension().is_some_and(|e| e == "json") {
                check_compliance(&SimulatedKpis::load(&results)?, &reqs)
            } else {
                check_compliance(&ingest_table(&results)?, &reqs)
            };
            print_report(&report);
            Ok(exit_for(&report))
        }
        Command::DumpProfile { name } => {
            let lib = ProfileLibrary::builtin();
            match lib.dump(&name) {
                Some(text) => {
                    print!("{text}");
                    Ok(ExitCode::SUCCESS)
                }
                None => {
                    let names: Vec<&str> = lib.names().collect();
                    Err(format!("unknown profile `{name}`; available: {}", names.join(", ")).into())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
