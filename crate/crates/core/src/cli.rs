//! Command-line front end: `sample`, `build`, `verify` and `render`.
//!
//! Every command is a pure function of its flags and input files. Each output
//! is written atomically (temporary sibling, then rename) together with a
//! [`RunManifest`] whose `content_hash` covers everything except wall time.
//!
//! Exit codes: 0 when every check passes, 1 on a check or verification
//! failure, 2 on usage, configuration, parse or I/O errors.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::forest::{build, verify_noncrossing, verify_structure, CrossingReport, Forest, ParentEntry, StructureReport};
use crate::ppp::{sample, PointCloud, SampleWindow};
use crate::stats::{run_suite, with_threads, CheckOptions, CheckSummary, ExperimentConfig, Suite};

/// Environment fallback for `--threads`.
pub const THREADS_ENV: &str = "HYPERDSF_THREADS";

#[derive(Debug, Parser)]
#[command(name = "hyperdsf", version, about = "Directed spanning forest in hyperbolic half-space")]
pub struct Cli {
    /// Worker threads for replicate execution (default: all cores).
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a Poisson cloud in a window and write it as JSON.
    Sample(SampleArgs),
    /// Build the forest of a cloud, verify it and write it as JSON.
    Build(BuildArgs),
    /// Run a check suite and write the summary JSON and per-replicate CSV.
    Verify(VerifyArgs),
    /// Draw a one-dimensional forest as SVG.
    Render(RenderArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub dim: usize,
    #[arg(long)]
    pub lambda: f64,
    /// Window half-width.
    #[arg(long = "r")]
    #[serde(rename = "r")]
    pub half_width: f64,
    #[arg(long)]
    pub ylo: f64,
    #[arg(long)]
    pub yhi: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BuildArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    /// Experiment config (TOML). Defaults to the built-in desk configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// One of geometry, structure, identities, fluctuations, coalescence, all.
    #[arg(long, value_parser = parse_suite)]
    pub suite: Suite,
    /// Directory receiving `summary.json`, `rows.csv` and `manifest.json`.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Negative control: shift the dimension in the identity exponents by one.
    #[arg(long, hide = true)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub inject_exponent_error: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct RenderArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Ordinate clip; defaults to the top of the window.
    #[arg(long)]
    pub ymax: Option<f64>,
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Library(#[from] Error),
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |source| CliError::Io { path: path.to_path_buf(), source }
    }

    fn parse(path: &Path, message: impl ToString) -> Self {
        CliError::Parse { path: path.to_path_buf(), message: message.to_string() }
    }
}

/// Whether the command's checks passed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

/// Content hash of an output file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// Flags as parsed.
    pub flags: serde_json::Value,
    /// Full effective configuration.
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub outputs: Vec<OutputRecord>,
    pub pass: bool,
    /// SHA-256 of this manifest serialised without `content_hash` and `wall_time_s`.
    pub content_hash: String,
    pub wall_time_s: f64,
}

impl RunManifest {
    fn new(command: &str, flags: &impl Serialize, config: &impl Serialize, seed: Option<u64>) -> Self {
        Self {
            command: command.into(),
            flags: serde_json::to_value(flags).expect("flags serialise"),
            config: serde_json::to_value(config).expect("configs serialise"),
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
            outputs: Vec::new(),
            pass: true,
            content_hash: String::new(),
            wall_time_s: 0.0,
        }
    }

    fn record(&mut self, path: &Path, bytes: &[u8]) {
        self.outputs.push(OutputRecord { path: path.display().to_string(), sha256: hex::encode(Sha256::digest(bytes)) });
    }

    /// Stamp the hash and wall time and write the manifest to `path`.
    fn finish(mut self, path: &Path, started: Instant) -> Result<(), CliError> {
        self.content_hash = String::new();
        self.wall_time_s = 0.0;
        let canonical = crate::json::to_string(&self).expect("manifests serialise");
        self.content_hash = hex::encode(Sha256::digest(canonical.as_bytes()));
        self.wall_time_s = started.elapsed().as_secs_f64();
        write_atomic(path, crate::json::to_string(&self).expect("manifests serialise").as_bytes())
    }
}

/// Write through a temporary sibling and rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(CliError::io(&tmp))?;
    fs::rename(&tmp, path).map_err(CliError::io(path))
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut p = out.as_os_str().to_owned();
    p.push(".manifest.json");
    PathBuf::from(p)
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(CliError::io(path))
}

fn emit(manifest: &mut RunManifest, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes)?;
    manifest.record(path, bytes);
    Ok(())
}

pub fn cmd_sample(args: &SampleArgs) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let window = SampleWindow::new(args.half_width, args.ylo, args.yhi)?;
    let cloud = sample::<f64>(args.dim, &window, args.lambda, args.seed)?;
    log::info!("sampled {} points", cloud.len());
    let mut manifest = RunManifest::new("sample", args, &window, Some(args.seed));
    emit(&mut manifest, &args.out, cloud.to_json().as_bytes())?;
    manifest.finish(&manifest_path(&args.out), started)?;
    Ok(Outcome::Pass)
}

/// Verification embedded in a built forest file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuildVerification {
    pub pass: bool,
    pub structure: StructureReport,
    /// Present for `d = 1` only.
    pub noncrossing: Option<CrossingReport>,
}

pub fn cmd_build(args: &BuildArgs) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let text = read(&args.input)?;
    let cloud = PointCloud::<f64>::from_json(&text).map_err(|e| CliError::parse(&args.input, e))?;
    let seed = cloud.seed();
    let forest = build(cloud);
    let structure = verify_structure(&forest);
    let noncrossing = if forest.dim() == 1 { Some(verify_noncrossing(&forest)?) } else { None };
    let pass = structure.passed() && noncrossing.as_ref().is_none_or(|r| r.passed());
    let report = BuildVerification { pass, structure, noncrossing };
    if !pass {
        eprintln!("forest verification failed:\n{}", crate::json::to_string(&report).expect("reports serialise"));
    }
    let input = OutputRecord { path: args.input.display().to_string(), sha256: hex::encode(Sha256::digest(text.as_bytes())) };
    let mut manifest = RunManifest::new("build", args, &input, Some(seed));
    manifest.pass = pass;
    emit(&mut manifest, &args.out, forest.to_json_with(&report).as_bytes())?;
    manifest.finish(&manifest_path(&args.out), started)?;
    Ok(if pass { Outcome::Pass } else { Outcome::Fail })
}

#[derive(Debug, Serialize)]
struct VerifySummary<'a> {
    suite: Suite,
    seed: u64,
    pass: bool,
    checks: &'a [CheckSummary],
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let config = match &args.config {
        Some(path) => ExperimentConfig::from_toml(&read(path)?).map_err(|e| CliError::parse(path, e))?,
        None => ExperimentConfig::desk(),
    };
    let options = CheckOptions { exponent_shift: if args.inject_exponent_error { 1.0 } else { 0.0 } };
    let report = run_suite(&config, args.suite, options)?;
    let pass = report.passed();
    for s in report.summaries.iter().filter(|s| !s.pass) {
        eprintln!("FAIL {} estimate={} bound={} params={:?}", s.check, s.estimate, s.bound, s.params);
    }

    let summary = VerifySummary { suite: args.suite, seed: config.seed, pass, checks: &report.summaries };
    let mut csv = csv::Writer::from_writer(Vec::new());
    for row in &report.rows {
        csv.serialize(row).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let csv = csv.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;

    let mut manifest = RunManifest::new("verify", args, &config, Some(config.seed));
    manifest.pass = pass;
    emit(&mut manifest, &args.out_dir.join("summary.json"), crate::json::to_string(&summary).expect("summaries serialise").as_bytes())?;
    emit(&mut manifest, &args.out_dir.join("rows.csv"), &csv)?;
    manifest.finish(&args.out_dir.join("manifest.json"), started)?;
    Ok(if pass { Outcome::Pass } else { Outcome::Fail })
}

pub fn cmd_render(args: &RenderArgs) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let text = read(&args.input)?;
    let forest = Forest::<f64>::from_json(&text).map_err(|e| CliError::parse(&args.input, e))?;
    let svg = render_svg(&forest, args.ymax)?;
    let mut manifest = RunManifest::new("render", args, &serde_json::Value::Null, Some(forest.cloud().seed()));
    emit(&mut manifest, &args.out, svg.as_bytes())?;
    manifest.finish(&manifest_path(&args.out), started)?;
    Ok(Outcome::Pass)
}

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 20.0;

/// Half-space picture of a `d = 1` forest: one `<line>` per drawn edge and one
/// `<circle>` per drawn vertex. Uncertified edges are dashed, censored
/// vertices hollow. The ordinate axis is linear from 0 to `ymax`; vertices
/// above it are dropped and edges clipped at it.
pub fn render_svg(forest: &Forest<f64>, ymax: Option<f64>) -> Result<String, CliError> {
    if forest.dim() != 1 {
        return Err(Error::UnsupportedDimension(forest.dim()).into());
    }
    let window = forest.cloud().window();
    let ymax = ymax.unwrap_or(window.y_hi);
    if !(ymax > 0.0) || !ymax.is_finite() {
        return Err(CliError::Usage(format!("--ymax must be positive and finite, got {ymax}")));
    }
    let (x_lo, x_hi) = (window.center_at(0) - window.half_width, window.center_at(0) + window.half_width);
    let sx = |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - y / ymax * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    svg.push_str(
        "<style>.edge{stroke:#1f3b73;stroke-width:0.8}.edge.open{stroke:#9a9a9a;stroke-dasharray:3 2}\
         .vertex{fill:#1f3b73}.vertex.uncertified{fill:#9a9a9a}.vertex.censored{fill:none;stroke:#c0392b;stroke-width:1}</style>\n",
    );
    let _ = writeln!(
        svg,
        r##"<rect class="frame" x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="#000" stroke-width="0.5"/>"##,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );

    let mut edges = String::new();
    let mut marks = String::new();
    for i in 0..forest.len() {
        let child = forest.point(i);
        let (cx, cy) = (child.abscissa()[0], child.ordinate());
        if cy > ymax {
            continue;
        }
        if let ParentEntry::Parent { index, .. } = forest.parent(i) {
            let parent = forest.point(index);
            let (mut px, mut py) = (parent.abscissa()[0], parent.ordinate());
            if py > ymax {
                px = cx + (px - cx) * (ymax - cy) / (py - cy);
                py = ymax;
            }
            let class = if forest.is_certified(i) { "edge" } else { "edge open" };
            let _ = writeln!(
                edges,
                r#"<line class="{class}" x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"/>"#,
                sx(cx),
                sy(cy),
                sx(px),
                sy(py)
            );
        }
        let class = match (forest.parent(i), forest.is_certified(i)) {
            (ParentEntry::Censored, _) => "vertex censored",
            (_, true) => "vertex",
            (_, false) => "vertex uncertified",
        };
        let _ = writeln!(marks, r#"<circle class="{class}" cx="{:.3}" cy="{:.3}" r="2"/>"#, sx(cx), sy(cy));
    }
    svg.push_str(&edges);
    svg.push_str(&marks);
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Run a parsed command line and return its outcome.
pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let job = || match &cli.command {
        Command::Sample(a) => cmd_sample(a),
        Command::Build(a) => cmd_build(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Render(a) => cmd_render(a),
    };
    with_threads(cli.threads, job)?
}

/// Process entry point: parse `args`, run, map the result to an exit code.
pub fn main_with<I, S>(args: I) -> ExitCode
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
