use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gaitgvf::checkpoint;
use gaitgvf::experiment::{self, Sources};
use gaitgvf::report::{self, Comparison, SeedRun};
use gaitgvf::session_io::{self, LoadedSession};
use gaitgvf::{Config, Error, Result};
use gaitgvf_core::gvf::normalize_prediction;
use gaitgvf_core::pipeline::discounted_targets;
use gaitgvf_core::{generate_session, preprocess, run_online_resume, NetVariant, TerrainLabel};

/// Continual-learning terrain classification from synthetic gait streams:
/// Kanerva-coded GVF predictions feeding online policy nets.
#[derive(Parser)]
#[command(name = "gaitgvf", version)]
struct Cli {
    /// TOML experiment configuration; unknown keys are rejected.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Progress messages on stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic raw session (raw_<seed>.csv + .meta).
    Gen(GenArgs),
    /// Filter, decimate and normalize a raw session (session_<seed>.csv + .meta).
    Prep(PrepArgs),
    /// Run the online pipeline on one session and write its metrics and a checkpoint.
    Train(TrainArgs),
    /// Run all three variants over several seeded sessions and test the differences.
    Compare(CompareArgs),
    /// Recompute the statistics from a per_terrain.csv.
    Stats(StatsArgs),
    /// Dump one GVF's predictions next to the brute-force discounted return.
    GvfProbe(ProbeArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Session seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Session length in target-rate steps (overrides the config).
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args)]
struct PrepArgs {
    /// Raw session CSV.
    input: PathBuf,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Control,
    InputGvf,
    LatentGvf,
}

impl From<VariantArg> for NetVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Control => NetVariant::Control,
            VariantArg::InputGvf => NetVariant::InputGvf,
            VariantArg::LatentGvf => NetVariant::LatentGvf,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Session CSV, raw or processed.
    session: PathBuf,
    /// Seed for prototypes, net initialization and replay sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Train a single variant; all three when omitted.
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Continue from a checkpoint instead of fresh learners.
    #[arg(long, value_name = "PATH")]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Session files to compare; generated from seeds when omitted.
    sessions: Vec<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Number of generated sessions (default from the config).
    #[arg(long)]
    seeds: Option<usize>,
    /// First seed (default from the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default from the config).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct StatsArgs {
    /// A per_terrain.csv written by train or compare.
    input: PathBuf,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct ProbeArgs {
    /// Session CSV, raw or processed.
    session: PathBuf,
    /// Cumulant channel to trace.
    #[arg(long, default_value_t = 0)]
    channel: usize,
    /// Seed for the prototypes.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

struct Ctx {
    config: Config,
    verbose: bool,
}

impl Ctx {
    fn note(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_config_echo(ctx: &Ctx, dir: &Path) -> Result<()> {
    report::write_atomic(&dir.join("config.toml"), ctx.config.to_toml().as_bytes())
}

fn gen(ctx: &Ctx, a: &GenArgs) -> Result<()> {
    let mut cfg = ctx.config.session_config(a.seed)?;
    if let Some(steps) = a.steps {
        cfg.total_target_steps = steps;
    }
    let raw = generate_session(&cfg)?;
    out_dir(&a.out)?;
    let path = a.out.join(format!("raw_{}.csv", a.seed));
    session_io::write_raw(&path, &raw)?;
    // segment lengths are in raw samples
    let k = cfg.decimation_factor();
    let mut counts = [0usize; 7];
    for (label, samples) in raw.segments() {
        counts[label.index()] += samples / k;
    }
    let terrains: Vec<String> = TerrainLabel::ALL.iter().zip(counts).map(|(t, n)| format!("{}={n}", t.key())).collect();
    println!(
        "{}: {} samples, {} target steps, {} gait cycles, {}",
        path.display(),
        raw.len(),
        cfg.total_target_steps,
        raw.gait_cycles(),
        terrains.join(" ")
    );
    Ok(())
}

fn prep(ctx: &Ctx, a: &PrepArgs) -> Result<()> {
    let raw = session_io::read_raw(&a.input)?;
    let processed = preprocess(&raw, &ctx.config.prep_config())?;
    out_dir(&a.out)?;
    let path = a.out.join(format!("session_{}.csv", raw.config.seed));
    session_io::write_processed(&path, &processed)?;
    println!("{}: {} frames, {} channels", path.display(), processed.len(), processed.n_channels);
    Ok(())
}

fn train(ctx: &Ctx, a: &TrainArgs) -> Result<()> {
    let session = experiment::load_processed(&ctx.config, &a.session)?;
    let mut settings = ctx.config.run_settings(a.seed);
    if let Some(v) = a.variant {
        settings.variants = vec![v.into()];
    }
    let out = match &a.resume {
        Some(path) => {
            let mut learners = checkpoint::load(path)?;
            if let Some(v) = a.variant {
                learners.nets.retain(|n| n.variant() == NetVariant::from(v));
                if learners.nets.is_empty() {
                    return Err(Error::invalid(format!("{} has no {} net", path.display(), NetVariant::from(v).key())));
                }
            }
            run_online_resume(&session, &settings, learners)?
        }
        None => experiment::run(&session, &settings)?,
    };
    out_dir(&a.out)?;
    let runs = [SeedRun { seed: a.seed, metrics: out.metrics }];
    report::write_run_artifacts(&a.out, &runs)?;
    let learners = gaitgvf_core::Learners { prototypes: out.prototypes, bank: out.bank, nets: out.nets };
    checkpoint::save(&a.out.join("checkpoint.bin"), &learners)?;
    write_config_echo(ctx, &a.out)?;
    for m in &runs[0].metrics.variants {
        println!(
            "{}: final {:.4}, overall {:.4}, post-delay {:.4}",
            m.variant.key(),
            m.final_accuracy,
            m.overall_accuracy,
            m.post_delay_accuracy
        );
    }
    Ok(())
}

fn compare(ctx: &Ctx, a: &CompareArgs) -> Result<()> {
    let cc = &ctx.config.compare;
    let base_seed = a.seed.unwrap_or(cc.base_seed);
    let jobs = a.jobs.unwrap_or(cc.jobs);
    let sources = if a.sessions.is_empty() {
        let n = a.seeds.unwrap_or(cc.seeds);
        Sources::Seeds((0..n as u64).map(|i| base_seed + i).collect())
    } else {
        if a.seeds.is_some() {
            return Err(Error::invalid("--seeds cannot be combined with session files"));
        }
        Sources::Files { paths: a.sessions.clone(), base_seed }
    };
    out_dir(&a.out)?;
    let runs = experiment::compare(&ctx.config, &sources, jobs, |seed| ctx.note(format!("seed {seed} done")))?;
    let records = report::write_run_artifacts(&a.out, &runs)?;
    let comparison = Comparison::from_records(&records, cc.alpha)?;
    comparison.write(&a.out)?;
    write_config_echo(ctx, &a.out)?;
    print!("{}", comparison.summary_text());
    Ok(())
}

fn stats(ctx: &Ctx, a: &StatsArgs) -> Result<()> {
    let records = report::read_per_terrain(&a.input)?;
    let comparison = Comparison::from_records(&records, ctx.config.compare.alpha)?;
    out_dir(&a.out)?;
    comparison.write(&a.out)?;
    print!("{}", comparison.summary_text());
    Ok(())
}

fn gvf_probe(ctx: &Ctx, a: &ProbeArgs) -> Result<()> {
    let session = match session_io::read_session(&a.session)? {
        LoadedSession::Processed(p) => p,
        LoadedSession::Raw(r) => preprocess(&r, &ctx.config.prep_config())?,
    };
    if a.channel >= session.n_channels {
        return Err(Error::invalid(format!("channel {} out of range (session has {})", a.channel, session.n_channels)));
    }
    let mut settings = ctx.config.run_settings(a.seed);
    settings.variants.clear();
    settings.keep_gvf_trace = true;
    let out = experiment::run(&session, &settings)?;
    let trace = out.metrics.gvf_trace.as_deref().unwrap_or_default();
    let n = session.n_channels;
    let gamma = out.bank.gamma();
    let signal: Vec<f64> = session.channel(a.channel).collect();
    let targets = discounted_targets(&signal, gamma, settings.return_window);

    let mut csv = String::from("step,cumulant,prediction,normalized_prediction,discounted_return\n");
    for (t, z) in signal.iter().enumerate() {
        let v = trace[t * n + a.channel];
        let target = targets.get(t).map(|x| x.to_string()).unwrap_or_default();
        csv.push_str(&format!("{t},{z},{v},{},{target}\n", normalize_prediction(v, gamma)));
    }
    out_dir(&a.out)?;
    let path = a.out.join(format!("gvf_probe_ch{:02}.csv", a.channel));
    report::write_atomic(&path, csv.as_bytes())?;
    println!("{}: {} steps, return mse {:.6}", path.display(), session.len(), out.metrics.gvf_error[a.channel]);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let ctx = Ctx { config, verbose: cli.verbose };
    match &cli.command {
        Command::Gen(a) => gen(&ctx, a),
        Command::Prep(a) => prep(&ctx, a),
        Command::Train(a) => train(&ctx, a),
        Command::Compare(a) => compare(&ctx, a),
        Command::Stats(a) => stats(&ctx, a),
        Command::GvfProbe(a) => gvf_probe(&ctx, a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
