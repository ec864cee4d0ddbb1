use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use saliency_eval::cli::{self, EvalConfig};
use saliency_eval::ingest;
use saliency_eval::preprocess::{Method, PreprocessParams};
use saliency_eval::MaskSource;

#[derive(Parser)]
#[command(name = "saliency-eval", version, about = "Score saliency-map localization against box and mask ground truth")]
struct Opts {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score every manifest image and write records.csv, summary.json and histograms.
    Eval(EvalArgs),
    /// Write one mask PNG per image from its infected-cell boxes.
    Rasterize {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an enhancement pipeline over a directory of images.
    Preprocess(PreprocessArgs),
    /// Convert the public malaria dataset's JSON export to the annotation schema.
    ConvertAnnotations {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    AnnotationBox,
    ExternalMask,
}

impl From<SourceArg> for MaskSource {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::AnnotationBox => MaskSource::AnnotationBox,
            SourceArg::ExternalMask => MaskSource::ExternalMask,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    RangeMorph,
    Clahe,
    ClaheBlend,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::RangeMorph => Method::RangeMorph,
            MethodArg::Clahe => Method::Clahe,
            MethodArg::ClaheBlend => Method::ClaheBlend,
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Mask sources to score; defaults to both.
    #[arg(long, value_enum, value_delimiter = ',')]
    sources: Vec<SourceArg>,
    #[arg(long, default_value_t = cli::DEFAULT_BINS)]
    bins: usize,
    /// Worker threads (default: machine parallelism).
    #[arg(long)]
    workers: Option<usize>,
    /// Also write SVG bar charts of the score histograms.
    #[arg(long)]
    svg: bool,
    /// Dump per-image ROC and PR curves as CSV.
    #[arg(long)]
    curves: bool,
}

fn parse_rgb(s: &str) -> Result<[u8; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected R,G,B, got {s:?}"));
    }
    let mut out = [0u8; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|e| format!("{p:?}: {e}"))?;
    }
    Ok(out)
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long, default_value_t = 8)]
    tiles_x: usize,
    #[arg(long, default_value_t = 8)]
    tiles_y: usize,
    #[arg(long, default_value_t = 2.0)]
    clip_limit: f64,
    /// Side of the square structuring element (odd).
    #[arg(long, default_value_t = 3)]
    kernel: usize,
    #[arg(long)]
    no_fill_holes: bool,
    /// Contrast gain.
    #[arg(long, default_value_t = 1.2, allow_hyphen_values = true)]
    alpha: f64,
    /// Brightness bias.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    beta: f64,
    /// Weight of the equalized image when blending with the original.
    #[arg(long, default_value_t = 0.5)]
    blend_weight: f64,
    #[arg(long, value_parser = parse_rgb, default_value = "0,0,0")]
    lower: [u8; 3],
    #[arg(long, value_parser = parse_rgb, default_value = "255,255,255")]
    upper: [u8; 3],
    #[arg(long)]
    workers: Option<usize>,
}

fn eval(args: EvalArgs) -> saliency_eval::Result<bool> {
    let mut config = EvalConfig::new(args.manifest, args.out);
    if !args.sources.is_empty() {
        config.sources = args.sources.into_iter().map(MaskSource::from).collect();
    }
    config.bins = args.bins;
    config.workers = args.workers;
    config.svg = args.svg;
    config.curves = args.curves;

    let outcome = cli::run_eval(&config)?;
    print!("{}", cli::format_table(&outcome.summary));
    let failures: Vec<_> = outcome.failures().collect();
    for f in &failures {
        eprintln!("failed: {} [{}]: {}", f.image_id, f.mask_source, f.reason);
    }
    Ok(failures.is_empty())
}

fn preprocess(args: PreprocessArgs) -> saliency_eval::Result<bool> {
    let params = PreprocessParams {
        tiles_x: args.tiles_x,
        tiles_y: args.tiles_y,
        clip_limit: args.clip_limit,
        kernel: args.kernel,
        fill_holes: !args.no_fill_holes,
        alpha: args.alpha,
        beta: args.beta,
        blend_weight: args.blend_weight,
        lower: args.lower,
        upper: args.upper,
    };
    let outcome = cli::run_preprocess(&args.input, &args.out, args.method.into(), &params, args.workers)?;
    println!("{} image(s) written", outcome.written.len());
    for (path, err) in &outcome.failures {
        eprintln!("failed: {}: {err}", path.display());
    }
    Ok(outcome.failures.is_empty())
}

fn run(opts: Opts) -> saliency_eval::Result<bool> {
    match opts.command {
        Command::Eval(args) => eval(args),
        Command::Rasterize { annotations, out } => {
            let outcome = cli::run_rasterize(&annotations, &out)?;
            println!(
                "{} mask(s) written, {} image(s) without infected cells",
                outcome.written.len(),
                outcome.skipped.len()
            );
            Ok(true)
        }
        Command::Preprocess(args) => preprocess(args),
        Command::ConvertAnnotations { input, out } => {
            let text = std::fs::read_to_string(&input)
                .map_err(|e| saliency_eval::Error::io(&input, e))?;
            let conv = ingest::convert_bbbc041(&text, &input)?;
            ingest::write_annotations(&out, &conv.images)?;
            let dropped: usize = conv.dropped.values().sum();
            println!("{} image(s) converted, {dropped} object(s) with other categories dropped", conv.images.len());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Opts::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
