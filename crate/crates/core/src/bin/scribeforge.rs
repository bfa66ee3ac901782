use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use scribeforge::blot::{apply_blot_traced, BlotParams, BlotStatus};
use scribeforge::corpus::{filter_corpus, FilterMode, DEFAULT_MAX_LINE_LEN};
use scribeforge::ctc_align::{align_dataset, read_annotations, write_annotations, Alphabet};
use scribeforge::manifest::read_manifest;
use scribeforge::metrics::{evaluate, EvalOptions};
use scribeforge::segbank::{build_bank, image_paths, BankConfig, SegmentBank};
use scribeforge::seed::{derive_seed, rng_from_seed};
use scribeforge::stackmix::{generate_corpus, TokenizerMixture};
use scribeforge::LineImage;

#[derive(Parser)]
#[command(name = "scribeforge", version, about = "Handwriting line augmentation and synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct RunOpts {
    /// Base random seed; falls back to SCRIBEFORGE_SEED, then to entropy.
    #[arg(long, env = "SCRIBEFORGE_SEED")]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Exit 0 even if some items failed.
    #[arg(long)]
    keep_going: bool,
}

impl RunOpts {
    fn seed(&self) -> u64 {
        let seed = self.seed.unwrap_or_else(rand::random);
        eprintln!("seed: {seed}");
        seed
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw strikethrough blots on every PNG of a directory.
    Blot(BlotCmd),
    /// Force-align transcripts through CTC probability matrices.
    Align(AlignCmd),
    /// Segment bank operations.
    Bank {
        #[command(subcommand)]
        command: BankCommand,
    },
    /// Generate synthetic lines from a text corpus and a segment bank.
    Stackmix(StackmixCmd),
    /// Filter a text corpus to an alphabet.
    Filter(FilterCmd),
    /// Score predictions against references, one line per sample.
    Eval(EvalCmd),
}

#[derive(Args)]
struct BlotCmd {
    #[arg(long = "input")]
    in_dir: PathBuf,
    #[arg(long = "output")]
    out_dir: PathBuf,
    /// JSON file with BlotParams fields; flags below override it.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    min_h: Option<usize>,
    #[arg(long)]
    max_h: Option<usize>,
    #[arg(long)]
    min_w: Option<usize>,
    #[arg(long)]
    max_w: Option<usize>,
    #[arg(long)]
    incline: Option<f64>,
    #[arg(long)]
    intensity: Option<f64>,
    #[arg(long)]
    transparency: Option<f64>,
    #[arg(long)]
    count_min: Option<usize>,
    #[arg(long)]
    count_max: Option<usize>,
    #[arg(long)]
    proba: Option<f64>,
    #[arg(long)]
    thickness: Option<u32>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    band_width: Option<f64>,
    #[arg(long)]
    dup_proba: Option<f64>,
    #[command(flatten)]
    run: RunOpts,
}

#[derive(Args)]
struct AlphabetArgs {
    /// JSON alphabet file: {"symbols": "...", "blank_index": 0}.
    #[arg(long, conflicts_with = "symbols")]
    alphabet: Option<PathBuf>,
    /// Alphabet given inline, in class order.
    #[arg(long)]
    symbols: Option<String>,
    #[arg(long, default_value_t = 0)]
    blank_index: usize,
}

impl AlphabetArgs {
    fn load(&self) -> anyhow::Result<Alphabet> {
        match (&self.alphabet, &self.symbols) {
            (Some(path), _) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                Ok(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?)
            }
            (None, Some(s)) => Ok(Alphabet::new(s.chars().collect(), self.blank_index)?),
            (None, None) => bail!("one of --alphabet or --symbols is required"),
        }
    }
}

#[derive(Args)]
struct AlignCmd {
    #[arg(long)]
    manifest: PathBuf,
    /// Directory holding `<line_id>.ctcp` matrices.
    #[arg(long)]
    probs: PathBuf,
    #[command(flatten)]
    alphabet: AlphabetArgs,
    /// Output annotation file (JSON lines).
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    run: RunOpts,
}

#[derive(Subcommand)]
enum BankCommand {
    /// Cut token segments from aligned lines.
    Build(BankBuildCmd),
}

#[derive(Args)]
struct BankBuildCmd {
    #[arg(long)]
    annotations: PathBuf,
    /// Dataset manifest locating the line images.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 8)]
    max_token_len: usize,
    #[arg(long, default_value_t = 128)]
    norm_height: usize,
    #[arg(long, default_value_t = 500)]
    max_per_token: usize,
    /// Also use lines whose split column is not "train".
    #[arg(long)]
    all_splits: bool,
    #[command(flatten)]
    run: RunOpts,
}

#[derive(Args)]
struct StackmixCmd {
    #[arg(long)]
    bank: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Number of lines to generate.
    #[arg(long)]
    n: usize,
    /// JSON TokenizerMixture: {"max_lens": [...], "probs": [...]}.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FilterMode::SkipLine)]
    mode: FilterMode,
    #[command(flatten)]
    run: RunOpts,
}

#[derive(Args)]
struct FilterCmd {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    alphabet: AlphabetArgs,
    #[arg(long, value_enum, default_value_t = FilterMode::DropChars)]
    mode: FilterMode,
    /// Split lines longer than this at a space (0 disables).
    #[arg(long, default_value_t = DEFAULT_MAX_LINE_LEN)]
    max_len: usize,
}

#[derive(Args)]
struct EvalCmd {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    lowercase: bool,
}

fn pool(jobs: usize) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?)
}

fn emit(summary: serde_json::Value) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

fn exit_for(failures: usize, run: &RunOpts) -> ExitCode {
    if failures == 0 || run.keep_going {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn blot_params(cmd: &BlotCmd) -> anyhow::Result<BlotParams> {
    let mut p = match &cmd.params {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)
            .with_context(|| format!("parsing {}", path.display()))?,
        None => BlotParams::default(),
    };
    macro_rules! over {
        ($($f:ident),*) => { $( if let Some(v) = cmd.$f { p.$f = v; } )* };
    }
    over!(min_h, max_h, min_w, max_w, incline, intensity, transparency, count_min, count_max, proba, thickness, band_width, dup_proba);
    if cmd.samples.is_some() {
        p.samples = cmd.samples;
    }
    p.validate()?;
    Ok(p)
}

fn list_pngs(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    files.retain(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")));
    files.sort();
    Ok(files)
}

fn run_blot(cmd: BlotCmd) -> anyhow::Result<ExitCode> {
    let params = blot_params(&cmd)?;
    let seed = cmd.run.seed();
    let files = list_pngs(&cmd.in_dir)?;
    fs::create_dir_all(&cmd.out_dir)?;
    let results: Vec<Result<BlotStatus, String>> = pool(cmd.run.jobs)?.install(|| {
        files
            .par_iter()
            .enumerate()
            .map(|(i, path)| {
                let go = || -> scribeforge::Result<BlotStatus> {
                    let img = LineImage::load_png(path)?;
                    let mut rng = rng_from_seed(derive_seed(seed, i));
                    let out = apply_blot_traced(&img, &params, &mut rng)?;
                    out.image.save_png(cmd.out_dir.join(path.file_name().unwrap()))?;
                    Ok(out.status)
                };
                go().map_err(|e| format!("{}: {e}", path.display()))
            })
            .collect()
    });
    let mut failures = Vec::new();
    let mut applied = 0;
    for r in &results {
        match r {
            Ok(BlotStatus::Applied) => applied += 1,
            Ok(_) => {}
            Err(msg) => {
                eprintln!("error: {msg}");
                failures.push(msg.clone());
            }
        }
    }
    emit(json!({
        "command": "blot",
        "seed": seed,
        "files": files.len(),
        "processed": files.len() - failures.len(),
        "applied": applied,
        "failures": failures,
    }))?;
    Ok(exit_for(failures.len(), &cmd.run))
}

fn run_align(cmd: AlignCmd) -> anyhow::Result<ExitCode> {
    let alphabet = cmd.alphabet.load()?;
    let entries = read_manifest(&cmd.manifest)?;
    let report = pool(cmd.run.jobs)?.install(|| align_dataset(&entries, &cmd.probs, &alphabet));
    write_annotations(&cmd.out, &report.records)?;
    for f in &report.failures {
        eprintln!("error: {}: {}", f.line_id, f.reason);
    }
    emit(json!({
        "command": "align",
        "lines": entries.len(),
        "aligned": report.records.len(),
        "failed": report.failures.len(),
        "failures": report.failures,
        "output": cmd.out,
    }))?;
    Ok(exit_for(report.failures.len(), &cmd.run))
}

fn run_bank_build(cmd: BankBuildCmd) -> anyhow::Result<ExitCode> {
    let seed = cmd.run.seed();
    let annotations = read_annotations(&cmd.annotations)?;
    let entries = read_manifest(&cmd.manifest)?;
    let paths = image_paths(&entries, cmd.all_splits);
    let excluded = annotations.iter().filter(|a| !paths.contains_key(&a.line_id)).count();
    let annotations: Vec<_> = annotations.into_iter().filter(|a| paths.contains_key(&a.line_id)).collect();
    let config = BankConfig {
        max_token_len: cmd.max_token_len,
        norm_height: cmd.norm_height,
        max_per_token: cmd.max_per_token,
        seed,
    };
    let (bank, summary) = build_bank(&annotations, |id| LineImage::load_png(&paths[id]), config)?;
    bank.save(&cmd.out)?;
    for (id, why) in &summary.skipped {
        eprintln!("warning: skipped {id}: {why}");
    }
    emit(json!({
        "command": "bank build",
        "seed": seed,
        "lines_used": summary.lines_used,
        "lines_skipped": summary.lines_skipped,
        "lines_excluded_by_split": excluded,
        "tokens": summary.tokens,
        "segments": summary.segments,
        "output": cmd.out,
    }))?;
    Ok(exit_for(summary.lines_skipped, &cmd.run))
}

fn run_stackmix(cmd: StackmixCmd) -> anyhow::Result<ExitCode> {
    let seed = cmd.run.seed();
    let mix: TokenizerMixture = match &cmd.config {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)
            .with_context(|| format!("parsing {}", path.display()))?,
        None => TokenizerMixture::default(),
    };
    mix.validate()?;
    let bank = SegmentBank::load(&cmd.bank).with_context(|| format!("loading bank {}", cmd.bank.display()))?;
    let corpus = fs::read_to_string(&cmd.corpus).with_context(|| format!("reading {}", cmd.corpus.display()))?;
    let summary = pool(cmd.run.jobs)?
        .install(|| generate_corpus(&corpus, &bank, &mix, cmd.n, seed, cmd.mode, &cmd.out))?;
    emit(json!({
        "command": "stackmix",
        "seed": seed,
        "generated": summary.generated,
        "corpus_lines": summary.corpus_lines,
        "usable_lines": summary.usable_lines,
        "skipped_lines": summary.skipped_lines,
        "manifest": summary.manifest,
    }))?;
    Ok(ExitCode::SUCCESS)
}

fn run_filter(cmd: FilterCmd) -> anyhow::Result<ExitCode> {
    let alphabet = cmd.alphabet.load()?;
    let input = BufReader::new(fs::File::open(&cmd.input).with_context(|| format!("opening {}", cmd.input.display()))?);
    let output = BufWriter::new(fs::File::create(&cmd.output)?);
    let max_len = (cmd.max_len > 0).then_some(cmd.max_len);
    let stats = filter_corpus(input, output, |c| alphabet.contains(c), cmd.mode, max_len)
        .with_context(|| format!("filtering {}", cmd.input.display()))?;
    let mut summary = serde_json::to_value(&stats)?;
    summary["command"] = json!("filter");
    emit(summary)?;
    Ok(ExitCode::SUCCESS)
}

fn run_eval(cmd: EvalCmd) -> anyhow::Result<ExitCode> {
    let pred = fs::read_to_string(&cmd.pred).with_context(|| format!("reading {}", cmd.pred.display()))?;
    let truth = fs::read_to_string(&cmd.truth).with_context(|| format!("reading {}", cmd.truth.display()))?;
    let (p, t): (Vec<&str>, Vec<&str>) = (pred.lines().collect(), truth.lines().collect());
    if p.len() != t.len() {
        bail!("{} predictions but {} references", p.len(), t.len());
    }
    let pairs: Vec<(&str, &str)> = p.into_iter().zip(t).collect();
    let report = evaluate(&pairs, EvalOptions { lowercase: cmd.lowercase })?;
    emit(serde_json::to_value(&report)?)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Blot(c) => run_blot(c),
        Command::Align(c) => run_align(c),
        Command::Bank { command: BankCommand::Build(c) } => run_bank_build(c),
        Command::Stackmix(c) => run_stackmix(c),
        Command::Filter(c) => run_filter(c),
        Command::Eval(c) => run_eval(c),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
