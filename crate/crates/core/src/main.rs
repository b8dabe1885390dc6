use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use trajpost::pipeline::{
    run_pipeline, stub_generate_with, write_records, RunSettings, StubOptions,
};
use trajpost::structured::{
    build_prompt, parse_response, PromptSpec, PromptTemplates, SpecialTokens,
};
use trajpost::{
    normalize_length, refine::refine_with_len, EgoHistory, KinematicSample, Trajectory, Waypoint,
};

#[derive(Parser)]
#[command(
    name = "trajpost",
    version,
    about = "Trajectory post-processing and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse token-delimited model output into JSON.
    Parse(IoArgs),
    /// Normalize and refine waypoint lists (JSONL in, JSONL out).
    Refine(RefineCmd),
    /// Run the full evaluation pipeline over a record file.
    Eval(EvalCmd),
    /// Generate a synthetic record corpus.
    Gen(GenCmd),
    /// Render a prompt from a JSON prompt description.
    Prompt(IoArgs),
}

#[derive(Args)]
struct IoArgs {
    /// Input file, or `-` for stdin.
    #[arg(long, default_value = "-")]
    input: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Default)]
struct RefineFlags {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    target_len: Option<usize>,
    #[arg(long)]
    z_threshold: Option<f64>,
    #[arg(long)]
    min_window: Option<usize>,
    #[arg(long)]
    max_window: Option<usize>,
    #[arg(long)]
    poly_order: Option<usize>,
    /// Key-point heading-change threshold in degrees.
    #[arg(long)]
    keypoint_angle: Option<f64>,
    #[arg(long)]
    keypoint_weight: Option<f64>,
}

impl RefineFlags {
    fn settings(&self) -> Result<RunSettings> {
        let file = match &self.config {
            Some(path) => RunSettings::load(path)?,
            None => RunSettings::default(),
        };
        Ok(file.overridden_by(RunSettings {
            target_len: self.target_len,
            z_threshold: self.z_threshold,
            min_window: self.min_window,
            max_window: self.max_window,
            poly_order: self.poly_order,
            keypoint_angle_deg: self.keypoint_angle,
            keypoint_weight: self.keypoint_weight,
            ..Default::default()
        }))
    }
}

#[derive(Args)]
struct RefineCmd {
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    flags: RefineFlags,
}

#[derive(Args)]
struct EvalCmd {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    emit_plots: bool,
    /// Score normalized predictions without refinement.
    #[arg(long)]
    no_refine: bool,
    #[command(flatten)]
    flags: RefineFlags,
}

#[derive(Args)]
struct GenCmd {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Emit predictions identical to ground truth.
    #[arg(long)]
    clean: bool,
    #[arg(long)]
    jitter_sigma: Option<f64>,
    #[arg(long)]
    malformed_rate: Option<f64>,
}

fn read_input(path: &Path) -> Result<String> {
    let mut text = String::new();
    if path == Path::new("-") {
        io::stdin().read_to_string(&mut text)?;
    } else {
        text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    }
    Ok(text)
}

fn output_writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::BufWriter::new(io::stdout())),
    })
}

#[derive(Serialize)]
struct ParsedJson {
    description: String,
    decision: String,
    trajectory: Vec<[f64; 2]>,
}

fn cmd_parse(args: &IoArgs) -> Result<ExitCode> {
    let text = read_input(&args.input)?;
    match parse_response(&text, &SpecialTokens::default()) {
        Ok(resp) => {
            let mut out = output_writer(args.output.as_deref())?;
            let json = ParsedJson {
                description: resp.description,
                decision: resp.decision,
                trajectory: resp.trajectory.to_pairs(),
            };
            serde_json::to_writer_pretty(&mut out, &json)?;
            writeln!(out)?;
            out.flush()?;
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            eprintln!("{}: {e}", e.kind());
            Ok(ExitCode::from(2))
        }
    }
}

/// A refine input line: either a bare `[[x,y],...]` list or an object.
#[derive(Deserialize)]
#[serde(untagged)]
enum RefineLine {
    Bare(Vec<[f64; 2]>),
    Tagged {
        #[serde(default)]
        id: Option<String>,
        points: Vec<[f64; 2]>,
    },
}

#[derive(Serialize)]
struct RefinedLine {
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    points: Vec<[f64; 2]>,
    outliers: Vec<usize>,
    keypoints: Vec<usize>,
    windows: Vec<usize>,
}

fn cmd_refine(cmd: &RefineCmd) -> Result<ExitCode> {
    let settings = cmd.flags.settings()?;
    let cfg = settings.refinement();
    cfg.validate()?;
    let target_len = settings.target_len.unwrap_or(trajpost::COMPLETE_LEN);

    let reader: Box<dyn BufRead> = if cmd.io.input == Path::new("-") {
        Box::new(BufReader::new(io::stdin()))
    } else {
        let f = fs::File::open(&cmd.io.input)
            .with_context(|| format!("opening {}", cmd.io.input.display()))?;
        Box::new(BufReader::new(f))
    };
    let mut out = output_writer(cmd.io.output.as_deref())?;
    let mut failures = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let result = serde_json::from_str::<RefineLine>(&line)
            .map_err(anyhow::Error::from)
            .and_then(|parsed| {
                let (id, pts) = match parsed {
                    RefineLine::Bare(p) => (None, p),
                    RefineLine::Tagged { id, points } => (id, points),
                };
                let traj = Trajectory::new(pts.into_iter().map(Waypoint::from).collect());
                let normalized = normalize_length(&traj, target_len)?;
                let (refined, report) = refine_with_len(&normalized, &cfg, target_len)?;
                Ok(RefinedLine {
                    id,
                    points: refined.to_pairs(),
                    outliers: report.outlier_indices,
                    keypoints: report.keypoint_indices,
                    windows: report.window_used,
                })
            });
        match result {
            Ok(refined) => {
                serde_json::to_writer(&mut out, &refined)?;
                writeln!(out)?;
            }
            Err(e) => {
                failures += 1;
                eprintln!("line {}: {e}", i + 1);
            }
        }
    }
    out.flush()?;
    Ok(if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_eval(cmd: &EvalCmd) -> Result<ExitCode> {
    let mut settings = cmd.flags.settings()?.overridden_by(RunSettings {
        input: cmd.input.clone(),
        output: cmd.output.clone(),
        workers: cmd.workers,
        seed: cmd.seed,
        ..Default::default()
    });
    if cmd.emit_plots {
        settings.emit_plots = Some(true);
    }
    if cmd.no_refine {
        settings.refine = Some(false);
    }
    let cfg = settings.into_run_config()?;
    let out = run_pipeline(&cfg)?;
    for d in &out.load_diagnostics {
        eprintln!("skipped {d}");
    }
    print!("{}", out.summary.to_report_text());
    if cfg.emit_plots {
        eprintln!("wrote {} plots", out.plots_written);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen(cmd: &GenCmd) -> Result<ExitCode> {
    let mut opts = if cmd.clean {
        StubOptions::clean()
    } else {
        StubOptions::default()
    };
    if let Some(s) = cmd.jitter_sigma {
        opts.jitter_sigma = s;
    }
    if let Some(r) = cmd.malformed_rate {
        if !(0.0..=1.0).contains(&r) {
            bail!("malformed rate must be in [0, 1]");
        }
        opts.malformed_rate = r;
    }
    let records = stub_generate_with(cmd.n, cmd.seed, &opts);
    let mut out = output_writer(cmd.output.as_deref())?;
    write_records(&mut out, &records)?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PromptJson {
    #[serde(default)]
    ego_history: Vec<[f64; 3]>,
    #[serde(default)]
    span: Option<f64>,
    #[serde(default)]
    nav: Option<String>,
    #[serde(default)]
    view_slot: Option<String>,
    #[serde(default)]
    history_header: Option<String>,
    #[serde(default)]
    navigation: Option<String>,
}

fn cmd_prompt(args: &IoArgs) -> Result<ExitCode> {
    let spec: PromptJson = serde_json::from_str(&read_input(&args.input)?)?;
    let samples = spec
        .ego_history
        .iter()
        .map(|&[t, v, a]| KinematicSample::new(t, v, a))
        .collect();
    let history = match spec.span {
        Some(span) => EgoHistory::with_span(samples, span)?,
        None => EgoHistory::new(samples)?,
    };
    let defaults = PromptTemplates::default();
    let prompt = PromptSpec {
        ego_history: history,
        nav_instruction: spec.nav,
        templates: PromptTemplates {
            view_slot: spec.view_slot.unwrap_or(defaults.view_slot),
            history_header: spec.history_header.unwrap_or(defaults.history_header),
            navigation: spec.navigation.unwrap_or(defaults.navigation),
        },
    };
    let mut out = output_writer(args.output.as_deref())?;
    out.write_all(build_prompt(&prompt).as_bytes())?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Parse(a) => cmd_parse(a),
        Command::Refine(c) => cmd_refine(c),
        Command::Eval(c) => cmd_eval(c),
        Command::Gen(c) => cmd_gen(c),
        Command::Prompt(a) => cmd_prompt(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
