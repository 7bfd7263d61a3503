use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tracing::{info, warn};

use salesim::backend::BackendFactory;
use salesim::domain::Persona;
use salesim::metrics::{MetricOptions, RatioAveraging};
use salesim::orchestrator::{self, BatchError, PipelineMode, RunConfig, Simulator};
use salesim::persona::{generate_personas, plan_specs, PersonaGenOptions};
use salesim::report::{self, files, AnalysisOptions, ChartScale, JsonlWriter, RunManifest};
use salesim::stats::TVariant;

#[derive(Parser, Debug)]
#[command(name = "salesim", version, about = "Persona-driven sales-dialogue simulation")]
struct Cli {
    /// Debug logging (RUST_LOG overrides).
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate personas.jsonl from the sampling plan.
    Personas(RunArgs),
    /// Run conversations for every persona and write transcripts.jsonl.
    Simulate(SimulateArgs),
    /// Compute metrics, tests, charts and report.md for one run, or compare two.
    Analyze(AnalyzeArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Run config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to output_dir in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Concurrent requests / conversations.
    #[arg(long = "parallel")]
    parallel: Option<usize>,
    /// Answer only from the replay cache; a miss is an error.
    #[arg(long)]
    strict_replay: bool,
    /// Override the endpoint of every HTTP backend.
    #[arg(long)]
    endpoint: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Pipeline {
    Monolithic,
    PlannerResponder,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Personas file; defaults to <out>/personas.jsonl.
    #[arg(long)]
    personas: Option<PathBuf>,
    /// Inject occupation strategy cards into the responder prompt.
    #[arg(long)]
    strategy: Option<OnOff>,
    #[arg(long)]
    pipeline: Option<Pipeline>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TTest {
    Welch,
    Pooled,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Averaging {
    Pooled,
    PerConversation,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Scale {
    Count,
    Share,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// One run directory, or two (without strategy, then with).
    #[arg(required = true, num_args = 1..=2)]
    runs: Vec<PathBuf>,
    /// Output directory. One run: defaults to the run directory. Two runs:
    /// defaults to ./comparison, with per-run artifacts under without/ and with/.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "welch")]
    t_test: TTest,
    #[arg(long, value_enum, default_value = "pooled")]
    ratio: Averaging,
    /// Let chit-chat end an intent run when compressing intent counts.
    #[arg(long)]
    chit_chat_breaks_runs: bool,
    #[arg(long, value_enum, default_value = "count")]
    chart_scale: Scale,
}

fn init_logging(verbose: bool) {
    let default = if verbose { "debug" } else { "info" };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).with_target(false).init();
}

/// Loads the config and applies command-line overrides.
fn resolve(args: &RunArgs) -> Result<(RunConfig, PathBuf)> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(out) = &args.out {
        config.output_dir = Some(out.clone());
    }
    let out = config
        .output_dir
        .clone()
        .context("no output directory: pass --out or set output_dir in the config")?;
    if let Some(seed) = args.seed {
        config.seed = seed;
        config.sampling.seed = seed;
    }
    if let Some(n) = args.parallel {
        config.parallelism = n;
    }
    if let Some(url) = &args.endpoint {
        config.set_endpoint(url);
    }
    if args.strict_replay {
        config.make_strict(&out.join(files::REPLAY_CACHE));
    }
    config.validate()?;
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    Ok((config, out))
}

async fn cmd_personas(args: RunArgs) -> Result<()> {
    let (config, out) = resolve(&args)?;
    let planned = plan_specs(&config.sampling)?;
    let role = config.roles.persona_role();
    let backend = BackendFactory::new().build(&role.backend)?;
    let opts = PersonaGenOptions { retries: config.persona_retries, parallelism: config.parallelism };
    info!(personas = planned.len(), backend = %role.backend, "generating personas");
    let batch = generate_personas(&planned, backend.as_ref(), &config.roles.persona_params(), config.seed, &opts).await;

    let path = out.join(files::PERSONAS);
    report::write_jsonl(&path, &batch.personas)?;
    let mut counts: BTreeMap<_, usize> = BTreeMap::new();
    for p in &batch.personas {
        *counts.entry(p.spec.condition()).or_default() += 1;
    }
    for (condition, n) in &counts {
        println!("{}\t{}", condition.label(), n);
    }
    println!("wrote {} personas to {}", batch.personas.len(), path.display());
    if let Some((id, err)) = batch.error {
        bail!("persona {id} failed: {err} ({} personas kept in {})", batch.personas.len(), path.display());
    }
    Ok(())
}

async fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let (mut config, out) = resolve(&args.run)?;
    let strategy = args.strategy.map(|s| matches!(s, OnOff::On));
    config.pipeline = match (args.pipeline, strategy) {
        (Some(Pipeline::Monolithic), Some(true)) => bail!("--strategy on requires --pipeline planner-responder"),
        (Some(Pipeline::Monolithic), _) => PipelineMode::Monolithic,
        (Some(Pipeline::PlannerResponder), s) => PipelineMode::PlannerResponder {
            strategy_enabled: s.unwrap_or(matches!(config.pipeline, PipelineMode::PlannerResponder { strategy_enabled: true })),
        },
        (None, Some(s)) => match config.pipeline {
            PipelineMode::Monolithic if s => bail!("--strategy on requires the planner_responder pipeline"),
            PipelineMode::Monolithic => PipelineMode::Monolithic,
            PipelineMode::PlannerResponder { .. } => PipelineMode::PlannerResponder { strategy_enabled: s },
        },
        (None, None) => config.pipeline,
    };
    config.validate()?;

    let personas_path = args.personas.clone().unwrap_or_else(|| out.join(files::PERSONAS));
    let personas: Vec<Persona> = report::read_jsonl(&personas_path)?.into_strict(&personas_path)?;
    if personas.is_empty() {
        bail!("{}: no personas", personas_path.display());
    }

    let sim = Simulator::from_config(&config, &mut BackendFactory::new())?;
    let started_at = orchestrator::now();
    // Written under a temporary name so a failed batch never clobbers an
    // earlier transcripts file.
    let partial = out.join(format!("{}.partial", files::TRANSCRIPTS));
    let mut writer = JsonlWriter::create(&partial)?;
    info!(
        personas = personas.len(),
        conversations = personas.len() * config.conversations_per_persona as usize,
        pipeline = ?config.pipeline,
        "simulating"
    );
    let result = sim
        .run_batch_with(&personas, |t| writer.write(t).map_err(|e| std::io::Error::other(e.to_string())))
        .await;
    writer.finish()?;
    let batch = match result {
        Ok(b) => b,
        Err(BatchError::ReplayMiss { persona_id, conversation_index, key }) => {
            bail!("strict replay: cache miss for key {key} (persona {persona_id}, conversation {conversation_index})")
        }
        Err(e) => return Err(e.into()),
    };
    let transcripts_path = out.join(files::TRANSCRIPTS);
    std::fs::rename(&partial, &transcripts_path)
        .with_context(|| format!("moving {} into place", partial.display()))?;
    report::write_jsonl(&out.join(files::ABORTED), &batch.aborted)?;

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        personas_file: personas_path,
        personas: personas.len(),
        transcripts: batch.transcripts.len(),
        aborted: batch.aborted.len(),
        strict_replay: args.run.strict_replay,
        started_at: Some(started_at),
        finished_at: Some(orchestrator::now()),
        extra: Default::default(),
        config: config.clone(),
    };
    let manifest_path = out.join(files::RUN_MANIFEST);
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("writing {}", manifest_path.display()))?;

    println!(
        "wrote {} transcripts ({} aborted) to {}",
        batch.transcripts.len(),
        batch.aborted.len(),
        out.display()
    );
    let fraction = batch.abort_fraction();
    if fraction > config.abort_threshold {
        bail!(
            "{:.1}% of conversations aborted, above the {:.1}% threshold",
            fraction * 100.0,
            config.abort_threshold * 100.0
        );
    }
    if !batch.aborted.is_empty() {
        warn!(aborted = batch.aborted.len(), "some conversations aborted; see {}", files::ABORTED);
    }
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let options = AnalysisOptions {
        metrics: MetricOptions {
            chit_chat_breaks_runs: args.chit_chat_breaks_runs,
            ratio_averaging: match args.ratio {
                Averaging::Pooled => RatioAveraging::Pooled,
                Averaging::PerConversation => RatioAveraging::PerConversation,
            },
        },
        t_variant: match args.t_test {
            TTest::Welch => TVariant::Welch,
            TTest::Pooled => TVariant::Pooled,
        },
        chart_scale: match args.chart_scale {
            Scale::Count => ChartScale::Count,
            Scale::Share => ChartScale::Share,
        },
    };
    match args.runs.as_slice() {
        [dir] => {
            let out = args.out.clone().unwrap_or_else(|| dir.clone());
            let (manifest, transcripts) = report::load_run(dir)?;
            let analysis = report::analyze_transcripts(manifest, &transcripts, options);
            print_written(&report::write_run_artifacts(&analysis, &out)?);
        }
        [without, with] => {
            let out = args.out.clone().unwrap_or_else(|| PathBuf::from("comparison"));
            let (ma, ta) = report::load_run(without)?;
            let (mb, tb) = report::load_run(with)?;
            let a = report::analyze_transcripts(ma, &ta, options);
            let b = report::analyze_transcripts(mb, &tb, options);
            print_written(&report::write_run_artifacts(&a, &out.join("without"))?);
            print_written(&report::write_run_artifacts(&b, &out.join("with"))?);
            let comparison = report::compare_runs(&a, &b, &ta, &tb);
            print_written(&report::write_comparison(&comparison, &out)?);
        }
        _ => bail!("analyze takes one or two run directories"),
    }
    Ok(())
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn run(cli: Cli) -> Result<()> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    match cli.command {
        Command::Personas(args) => runtime.block_on(cmd_personas(args)),
        Command::Simulate(args) => runtime.block_on(cmd_simulate(args)),
        Command::Analyze(args) => cmd_analyze(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
