//! `attnshift` subcommands.
//!
//! Everything here is a thin layer over `attnshift-toolkit`; the binary in
//! `main.rs` maps argument errors to exit code 1 and [`CliError`] to 2.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use attnshift_core::imaging::{EditRecipe, Mode};
use attnshift_core::metrics::evaluate;
use attnshift_core::optimizer::{multi_style, optimize, ObjectiveConfig, OptimizerConfig};
use attnshift_service::ServiceConfig;
use attnshift_toolkit::io::{fit_mask, load_image, load_mask, save_image, MaskFit};
use attnshift_toolkit::provider::ProviderSpec;
use attnshift_toolkit::recipe::{parse_recipes, recipe_to_json, recipes_to_json};
use attnshift_toolkit::report::{to_csv, to_json, ReportRow};
use attnshift_toolkit::video::{video_apply, FrameSequence};
use attnshift_toolkit::{apply_recipe, render_preview, ToolError};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "attnshift", version, about = "Redirect visual attention with subtle global edits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search edit parameters for an image and mask.
    Optimize(OptimizeArgs),
    /// Apply a parameter file at strength alpha.
    Apply(ApplyArgs),
    /// Score an edit against its original.
    Metrics(MetricsArgs),
    /// Apply one parameter file to a directory of frames.
    Video(VideoArgs),
    /// Run the HTTP session service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    /// Edited image at full resolution (best style).
    #[arg(long)]
    pub out: PathBuf,
    /// Recipe JSON; an array when `--styles` is above 1.
    #[arg(long)]
    pub params_out: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Increase)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..=100_000))]
    pub iters: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..=64))]
    pub styles: u64,
    /// `builtin`, `exec:<command>` or `http:<url>`.
    #[arg(long, default_value = "builtin")]
    pub saliency_provider: ProviderSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Increase,
    Decrease,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Increase => Mode::Increase,
            ModeArg::Decrease => Mode::Decrease,
        }
    }
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long, default_value_t = 1.0, value_parser = parse_alpha)]
    pub alpha: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Shrink so the longer side is at most this before applying, as the
    /// service preview does.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_dim: Option<u64>,
    /// Which entry of a multi-style parameter file to use.
    #[arg(long, default_value_t = 0)]
    pub style: usize,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub original: PathBuf,
    #[arg(long)]
    pub edited: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long, default_value = "builtin")]
    pub saliency_provider: ProviderSpec,
    #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
    pub format: ReportFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct VideoArgs {
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long)]
    pub masks: PathBuf,
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let a: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.5).contains(&a) {
        Ok(a)
    } else {
        Err(format!("alpha must lie in [0, 1.5], got {a}"))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Tool(#[from] ToolError),
    #[error(transparent)]
    Core(#[from] attnshift_core::Error),
    #[error("{0}")]
    Other(String),
}

pub type CliResult<T> = Result<T, CliError>;

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Optimize(a) => run_optimize(a),
        Command::Apply(a) => run_apply(a),
        Command::Metrics(a) => {
            print!("{}", run_metrics(&a)?);
            Ok(())
        }
        Command::Video(a) => run_video(a),
        Command::Serve(a) => run_serve(a),
    }
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| ToolError::io(path, e).into())
}

fn load_pair(image: &Path, mask: &Path) -> CliResult<(attnshift_core::imaging::RasterImage, attnshift_core::imaging::MaskLayer)> {
    let image = load_image(image)?;
    let mask = fit_mask(load_mask(mask)?, image.width(), image.height(), MaskFit::Exact)?;
    Ok((image, mask))
}

pub fn run_optimize(a: OptimizeArgs) -> CliResult<()> {
    let (image, mask) = load_pair(&a.image, &a.mask)?;
    let source = a.saliency_provider.into_source();
    let objective = ObjectiveConfig {
        mode: a.mode.into(),
        ..ObjectiveConfig::default()
    };
    let config = OptimizerConfig {
        iterations: a.iters as usize,
        seed: a.seed,
        ..OptimizerConfig::default()
    };
    let recipes: Vec<EditRecipe> = if a.styles == 1 {
        let r = optimize(&image, &mask, source.as_ref(), &objective, &config)?;
        log::info!(
            "objective {:.6} -> {:.6}",
            r.initial.total,
            r.best.total
        );
        vec![r.recipe]
    } else {
        multi_style(&image, &mask, a.styles as usize, a.seed, source.as_ref(), &objective, &config)?
            .into_iter()
            .map(|r| r.recipe)
            .collect()
    };
    let edited = apply_recipe(&image, &mask, &recipes[0], 1.0)?;
    save_image(&edited, &a.out)?;
    let json = if a.styles == 1 {
        recipe_to_json(&recipes[0])
    } else {
        recipes_to_json(&recipes)
    };
    write_text(&a.params_out, &json)
}

pub fn load_params(path: &Path, style: usize) -> CliResult<EditRecipe> {
    let text = fs::read_to_string(path).map_err(|e| ToolError::io(path, e))?;
    let mut recipes = parse_recipes(&text)?;
    let n = recipes.len();
    if style >= n {
        return Err(CliError::Other(format!(
            "{} holds {n} style(s); --style {style} is out of range",
            path.display()
        )));
    }
    Ok(recipes.swap_remove(style))
}

pub fn run_apply(a: ApplyArgs) -> CliResult<()> {
    let recipe = load_params(&a.params, a.style)?;
    let image = load_image(&a.image)?;
    let mask = fit_mask(load_mask(&a.mask)?, image.width(), image.height(), MaskFit::Resize)?;
    let edited = match a.max_dim {
        Some(d) => render_preview(&image, &mask, &recipe, a.alpha, d as usize)?,
        None => apply_recipe(&image, &mask, &recipe, a.alpha)?,
    };
    save_image(&edited, &a.out)?;
    Ok(())
}

/// Report text for `metrics`.
pub fn run_metrics(a: &MetricsArgs) -> CliResult<String> {
    let original = load_image(&a.original)?;
    let edited = load_image(&a.edited)?;
    if edited.dims() != original.dims() {
        return Err(CliError::Other(format!(
            "edited image is {}x{} but the original is {}x{}",
            edited.width(),
            edited.height(),
            original.width(),
            original.height()
        )));
    }
    let mask = fit_mask(load_mask(&a.mask)?, original.width(), original.height(), MaskFit::Resize)?.binarized();
    let source = a.saliency_provider.clone().into_source();
    let report = evaluate(&original, &edited, &mask, source.as_ref())?;
    let rows = [ReportRow {
        name: a.edited.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        report,
    }];
    Ok(match a.format {
        ReportFormat::Csv => to_csv(&rows),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&to_json(&rows)).expect("report serializes");
            s.push('\n');
            s
        }
    })
}

pub fn run_video(a: VideoArgs) -> CliResult<()> {
    let recipe = load_params(&a.params, 0)?;
    let frames = FrameSequence::from_dirs(&a.frames, &a.masks)?;
    let report = video_apply(&frames, &recipe, &a.out)?;
    log::info!("wrote {} frames with recipe {}", report.count(), report.recipe_hash);
    Ok(())
}

pub fn run_serve(a: ServeArgs) -> CliResult<()> {
    let mut config = ServiceConfig::from_env();
    if a.static_dir.is_some() {
        config.static_dir = a.static_dir;
    }
    let addr = SocketAddr::new(a.host, a.port);
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Other(e.to_string()))?;
    rt.block_on(attnshift_service::serve(config, addr))
        .map_err(|e| CliError::Other(format!("serving on {addr}: {e}")))
}
