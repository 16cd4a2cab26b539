use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;
use strongfm::oracle::{oracle_strong_relations, validate_model, ValidationConfig};
use strongfm::report::{analyze_model, load_formula, CorpusManifest, CorpusOptions, ModelFormat};
use strongfm::{
    analyze_corpus, export_graph, extract_strong_relations, graphs_from_json, CnfFormula,
    ExtractOptions, GraphFormat, HubThreshold, ReportError, Var,
};

#[derive(Parser)]
#[command(
    name = "strongfm",
    version,
    about = "Strong dependency and conflict graphs for variability models"
)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    Dimacs,
    Fm,
}

impl From<InputFormat> for ModelFormat {
    fn from(f: InputFormat) -> Self {
        match f {
            InputFormat::Dimacs => ModelFormat::Dimacs,
            InputFormat::Fm => ModelFormat::Fm,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Dot,
    Graphml,
    Json,
}

impl From<OutputFormat> for GraphFormat {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Dot => GraphFormat::Dot,
            OutputFormat::Graphml => GraphFormat::GraphMl,
            OutputFormat::Json => GraphFormat::Json,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Analyze one model and print its summary as JSON.
    Analyze {
        file: PathBuf,
        /// Input format; inferred from the extension when omitted.
        #[arg(long, value_enum)]
        format: Option<InputFormat>,
        /// High-degree threshold in percent of the other features.
        #[arg(long, default_value_t = 10.0)]
        threshold: f64,
        /// Write graphs, node tables and histograms to this directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Condition on features in parallel.
        #[arg(long)]
        parallel: bool,
    },
    /// Analyze every model of an `id,path,format,domain` manifest.
    Corpus {
        manifest: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value_t = 10.0)]
        threshold: f64,
        #[arg(long, default_value = "corpus-out")]
        out: PathBuf,
    },
    /// Re-render the graphs of an analyzed model directory.
    Export {
        model_dir: PathBuf,
        #[arg(long, value_enum)]
        format: OutputFormat,
    },
    /// Check an analysis against independent SAT calls.
    Validate {
        file: PathBuf,
        #[arg(long, value_enum)]
        format: Option<InputFormat>,
        /// Number of nodes whose neighborhoods are re-checked.
        #[arg(long, default_value_t = 1000)]
        sample: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Non-neighbors checked per sampled node, or `all`.
        #[arg(long, default_value = "100")]
        absence: String,
    },
    /// Compute relations by model enumeration (at most 25 variables).
    Oracle {
        file: PathBuf,
        #[arg(long, value_enum)]
        format: Option<InputFormat>,
    },
}

fn model_format(file: &Path, format: Option<InputFormat>) -> ModelFormat {
    format.map_or_else(|| ModelFormat::from_path(file), ModelFormat::from)
}

fn model_id(file: &Path) -> String {
    file.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".to_string())
}

fn threshold(pct: f64) -> anyhow::Result<HubThreshold> {
    Ok(HubThreshold::new(pct)?)
}

fn print_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn names(formula: &CnfFormula, vars: impl IntoIterator<Item = Var>) -> Vec<String> {
    vars.into_iter()
        .map(|v| formula.display_name(v).into_owned())
        .collect()
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Analyze {
            file,
            format,
            threshold: pct,
            out,
            parallel,
        } => {
            let analysis = analyze_model(
                &model_id(&file),
                &file,
                model_format(&file, format),
                threshold(pct)?,
                ExtractOptions { parallel },
            )?;
            if let Some(dir) = out {
                analysis.write_to(&dir)?;
                info!("wrote {}", dir.display());
            }
            print_json(&analysis.summary())
        }
        Command::Corpus {
            manifest,
            jobs,
            threshold: pct,
            out,
        } => {
            let manifest = CorpusManifest::load(&manifest)?;
            let options = CorpusOptions {
                threshold: threshold(pct)?,
                jobs,
                ..CorpusOptions::default()
            };
            let summary = analyze_corpus(&manifest, options, &out)?;
            print_json(&json!({
                "entries": manifest.entries.len(),
                "analyzed": summary.records.len(),
                "failed": summary.failures.len(),
                "out": out,
            }))
        }
        Command::Export { model_dir, format } => {
            let path = model_dir.join("graphs.json");
            let text = fs::read_to_string(&path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            let graphs = graphs_from_json(&text)?;
            print!("{}", export_graph(&graphs, format.into()));
            Ok(())
        }
        Command::Validate {
            file,
            format,
            sample,
            seed,
            absence,
        } => {
            let absence_sample = match absence.as_str() {
                "all" => None,
                n => Some(n.parse().context("--absence expects a count or `all`")?),
            };
            let formula = load_formula(&file, model_format(&file, format))?;
            let graphs = strongfm::analyze_formula(&formula, ExtractOptions::default()).map_err(
                |e| match e {
                    strongfm::AnalysisError::VoidModel => {
                        anyhow::Error::new(ReportError::VoidModel { path: file.clone() })
                    }
                    e => e.into(),
                },
            )?;
            let config = ValidationConfig {
                sample_size: sample,
                absence_sample,
                seed,
            };
            let report = validate_model(&model_id(&file), &formula, &graphs, config)?;
            print_json(&report)?;
            if !report.passed() {
                bail!(
                    "validation failed: {} discrepancies",
                    report.discrepancies.len()
                );
            }
            Ok(())
        }
        Command::Oracle { file, format } => {
            let formula = load_formula(&file, model_format(&file, format))?;
            let (class, map) = oracle_strong_relations(&formula)?;
            let agrees = extract_strong_relations(&formula)
                .map(|r| r == (class.clone(), map.clone()))
                .unwrap_or(false);
            let relations: BTreeMap<String, serde_json::Value> = map
                .iter()
                .map(|(&v, r)| {
                    let entry = json!({
                        "requires": names(&formula, r.depends_on.iter().copied()),
                        "excludes": names(&formula, r.conflicts_with.iter().copied()),
                    });
                    (formula.display_name(v).into_owned(), entry)
                })
                .collect();
            print_json(&json!({
                "core": names(&formula, class.core.iter().copied()),
                "dead": names(&formula, class.dead.iter().copied()),
                "relations": relations,
                "matches_extraction": agrees,
            }))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err
                .downcast_ref::<ReportError>()
                .map_or(1, ReportError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
