use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use lbee::ingest::{read_ids, read_relevance_csv, IMAGES_IDS, SENTENCES_IDS};
use lbee::pipeline::{execute, run_sweep_on, sweep_csv};
use lbee::{
    combine_relevance, generate_benchmark, relevance_confusion, sentence_hardness, write_merge_log, Bundle,
    CombineMode, Confusion, LbeeError, RunConfig, SweepParam, SynthParams,
};

const EXIT_VALIDATION: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "lbee", version, about = "Describe failure modes of a vision model with catalog sentences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline once and write a JSON report.
    Run(RunArgs),
    /// Run the pipeline once per value of one parameter.
    Sweep(SweepArgs),
    /// Write a seeded synthetic bundle with planted failure modes.
    Synth(SynthArgs),
    /// Compare (optionally combined) relevance annotations against a reference.
    EvalRelevance(EvalRelevanceArgs),
    /// Write per-sentence hardness as CSV.
    DumpHardness(DumpHardnessArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// JSON config; absent keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Hard-side merge log; the easy side goes to `<stem>_easy.csv` next to it.
    #[arg(long)]
    dump_merges: Option<PathBuf>,
    /// Per-cluster HR/CR table.
    #[arg(long)]
    metrics_csv: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// One of k, c, o, tau, a, method.
    #[arg(long)]
    param: String,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
    /// JSON array of reports (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary table, one row per value.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    groups: Option<usize>,
    #[arg(long)]
    images_per_group: Option<usize>,
    #[arg(long)]
    sentences_per_group: Option<usize>,
    /// Comma-separated group indices.
    #[arg(long, value_delimiter = ',')]
    hard_groups: Option<Vec<usize>>,
    /// Minimum angle between group directions (radians).
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    performance_gap: Option<f64>,
    #[arg(long)]
    noise_scale: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    And,
    Or,
}

#[derive(Args)]
struct EvalRelevanceArgs {
    /// Bundle whose image and sentence ids define the universe.
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, requires = "mode")]
    pred2: Option<PathBuf>,
    #[arg(long, value_enum, requires = "pred2")]
    mode: Option<ModeArg>,
    #[arg(long)]
    gt: PathBuf,
    /// CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DumpHardnessArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn load_config(path: Option<&Path>) -> anyhow::Result<RunConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(RunConfig::from_json(&text)?)
        }
        None => Ok(RunConfig::default()),
    }
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn easy_sibling(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_easy.{}", ext.to_string_lossy()),
        None => format!("{stem}_easy"),
    };
    path.with_file_name(name)
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let config = load_config(args.config.as_deref())?;
    config.validate()?;
    let bundle = Bundle::load(&args.bundle)?;
    let run = execute(&bundle, &config)?;
    for w in &run.report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(path) = &args.dump_merges {
        let hard = run.hard_model.as_ref().map_or(&[][..], |m| &m.merge_log[..]);
        write_merge_log(path, hard)?;
        let easy = run.easy_model.as_ref().map_or(&[][..], |m| &m.merge_log[..]);
        write_merge_log(&easy_sibling(path), easy)?;
    }
    if let Some(path) = &args.metrics_csv {
        emit(Some(path), &run.report.metrics_csv())?;
    }
    emit(args.out.as_deref(), &run.report.to_json()?)
}

fn cmd_sweep(args: SweepArgs) -> anyhow::Result<()> {
    let base = load_config(args.config.as_deref())?;
    let param: SweepParam = args.param.parse()?;
    for v in &args.values {
        param.apply(&base, v)?;
    }
    let bundle = Bundle::load(&args.bundle)?;
    let reports = run_sweep_on(&bundle, &base, param, &args.values)?;
    if let Some(path) = &args.csv {
        emit(Some(path), &sweep_csv(param, &args.values, &reports))?;
    }
    let mut text = serde_json::to_string_pretty(&reports)?;
    text.push('\n');
    emit(args.out.as_deref(), &text)
}

fn cmd_synth(args: SynthArgs) -> anyhow::Result<()> {
    let d = SynthParams::default();
    let params = SynthParams {
        seed: args.seed,
        dim: args.dim.unwrap_or(d.dim),
        groups: args.groups.unwrap_or(d.groups),
        images_per_group: args.images_per_group.unwrap_or(d.images_per_group),
        sentences_per_group: args.sentences_per_group.unwrap_or(d.sentences_per_group),
        hard_groups: args.hard_groups.unwrap_or(d.hard_groups),
        separation: args.separation.unwrap_or(d.separation),
        performance_gap: args.performance_gap.unwrap_or(d.performance_gap),
        noise_scale: args.noise_scale.unwrap_or(d.noise_scale),
    };
    let synth = generate_benchmark(&params)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    synth.write(&args.out)?;
    Ok(())
}

fn confusion_row(name: &str, c: &Confusion) -> String {
    let f = |x: Option<f64>| x.map(|v| format!("{:?}", lbee::pipeline::round_sig(v))).unwrap_or_default();
    format!(
        "{name},{},{},{},{},{},{},{},{},{}\n",
        f(c.accuracy),
        f(c.tp_rate),
        f(c.tn_rate),
        f(c.fp_rate),
        f(c.fn_rate),
        c.tp,
        c.tn,
        c.fp,
        c.fn_
    )
}

fn cmd_eval_relevance(args: EvalRelevanceArgs) -> anyhow::Result<()> {
    let images = read_ids(&args.bundle.join(IMAGES_IDS))?;
    let sentences = read_ids(&args.bundle.join(SENTENCES_IDS))?;
    let load = |p: &Path| read_relevance_csv(p, &images, &sentences);
    let gt = load(&args.gt)?;
    let pred = load(&args.pred)?;

    let mut out = String::from("annotation,Accuracy,TP,TN,FP,FN,tp_count,tn_count,fp_count,fn_count\n");
    out += &confusion_row("pred", &relevance_confusion(&pred, &gt)?);
    match (&args.pred2, args.mode) {
        (Some(p2), Some(mode)) => {
            let pred2 = load(p2)?;
            out += &confusion_row("pred2", &relevance_confusion(&pred2, &gt)?);
            let (mode, name) = match mode {
                ModeArg::And => (CombineMode::And, "and"),
                ModeArg::Or => (CombineMode::Or, "or"),
            };
            let combined = combine_relevance(&pred, &pred2, mode)?;
            out += &confusion_row(name, &relevance_confusion(&combined, &gt)?);
        }
        (None, None) => {}
        _ => bail!("--pred2 and --mode must be given together"),
    }
    emit(args.out.as_deref(), &out)
}

fn cmd_dump_hardness(args: DumpHardnessArgs) -> anyhow::Result<()> {
    let bundle = Bundle::load(&args.bundle)?;
    let (Some(perf), Some(rel)) = (bundle.performance(), bundle.relevance()) else {
        return Err(LbeeError::InvalidConfig("bundle needs both a performance score and relevance.csv".into()).into());
    };
    sentence_hardness(perf, rel)?.write_csv(&args.out)?;
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<LbeeError>() {
        Some(e) if e.is_validation() => EXIT_VALIDATION,
        Some(_) => EXIT_RUNTIME,
        None if err.downcast_ref::<std::io::Error>().is_some() => EXIT_RUNTIME,
        None => EXIT_VALIDATION,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Synth(a) => cmd_synth(a),
        Command::EvalRelevance(a) => cmd_eval_relevance(a),
        Command::DumpHardness(a) => cmd_dump_hardness(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
