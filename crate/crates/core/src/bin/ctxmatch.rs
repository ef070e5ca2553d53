use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ctxmatch::blob::blob_match;
use ctxmatch::dtm::Stage;
use ctxmatch::eval::Method;
use ctxmatch::geometry::BoundaryMode;
use ctxmatch::io;
use ctxmatch::model::ModelKind;
use ctxmatch::pipeline::{
    apply_filter, apply_model, evaluate, load_pairs, run_batch, warnings, write_outputs, write_synth, FilterConfig,
    ModelConfig, ModelFile, PairInput, PipelineConfig,
};
use ctxmatch::synth::{synth, Scene, SynthConfig};
use ctxmatch::Error;

#[derive(Parser)]
#[command(name = "ctxmatch", version, about = "Keypoint matching with descriptor and spatial context")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON config: pipeline settings, or generator settings for `synth`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed of the synthetic generator.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// DTM border: alpha, convex_hull or none.
    #[arg(long, global = true)]
    boundary_mode: Option<BoundaryMode>,
    /// DTM stages to run: dtm1 or full.
    #[arg(long, global = true)]
    stage: Option<Stage>,
    /// Pairs processed concurrently.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Blob matching on the descriptor distances of a pair.
    Match {
        /// Pair manifest (pair.json).
        #[arg(long)]
        pair: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Spatial filtering of a match file.
    Filter {
        #[arg(long)]
        pair: PathBuf,
        #[arg(long)]
        matches: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// 1SAC model fitting on a match file.
    Fit {
        #[arg(long)]
        pair: PathBuf,
        #[arg(long)]
        matches: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// homography or fundamental; overrides the config.
        #[arg(long)]
        kind: Option<ModelKind>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Scores a match file against the pair's ground truth.
    Eval {
        #[arg(long)]
        pair: PathBuf,
        #[arg(long)]
        matches: PathBuf,
        /// Recall universe; blob matching output when omitted.
        #[arg(long)]
        universe: Option<PathBuf>,
        #[arg(long)]
        method: Option<Method>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Every stage over the configured pairs.
    Pipeline {
        /// Pair manifests, replacing those of the config.
        #[arg(long)]
        pair: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write table.csv.
        #[arg(long)]
        table: bool,
    },
    /// Writes a synthetic pair with ground truth and planted labels.
    Synth {
        /// Directory receiving pair.json and its files.
        #[arg(long)]
        out: PathBuf,
        /// planar or two_view.
        #[arg(long)]
        scene: Option<Scene>,
        #[arg(long)]
        inliers: Option<usize>,
        #[arg(long)]
        outliers: Option<usize>,
        /// Gaussian keypoint noise in pixels.
        #[arg(long)]
        noise: Option<f64>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 3,
        Error::Parse { .. } => 4,
        Error::Degenerate(_) => 5,
        _ => 1,
    }
}

fn pipeline_config(g: &Global) -> ctxmatch::Result<PipelineConfig> {
    let mut cfg = match &g.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(m) = g.boundary_mode {
        cfg.dtm.boundary_mode = m;
    }
    if let Some(s) = g.stage {
        cfg.dtm.stage = s;
        cfg.filter = FilterConfig::Dtm;
    }
    if let Some(w) = g.workers {
        cfg.workers = w;
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_pair(path: &Path, cfg: &PipelineConfig) -> ctxmatch::Result<PairInput> {
    let input = PairInput::load(path)?;
    for w in warnings(&input, &cfg.eval) {
        eprintln!("warning: {w}");
    }
    Ok(input)
}

fn run(cli: Cli) -> ctxmatch::Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Synth {
            out,
            scene,
            inliers,
            outliers,
            noise,
        } => {
            let mut sc: SynthConfig = match &g.config {
                Some(p) => io::read_json(p)?,
                None => SynthConfig::default(),
            };
            sc.scene = scene.unwrap_or(sc.scene);
            sc.n_inliers = inliers.unwrap_or(sc.n_inliers);
            sc.n_outliers = outliers.unwrap_or(sc.n_outliers);
            sc.noise_px = noise.unwrap_or(sc.noise_px);
            sc.seed = g.seed.unwrap_or(sc.seed);
            let pair = synth(&sc)?;
            let path = write_synth(&pair, &out)?;
            println!("{}", path.display());
        }
        Command::Match { pair, out } => {
            let cfg = pipeline_config(g)?;
            let input = load_pair(&pair, &cfg)?;
            let m = blob_match(&input.distances, &input.ctx, &cfg.blob)?;
            io::write_matches(&out, &m)?;
            println!("{} matches", m.len());
        }
        Command::Filter { pair, matches, out } => {
            let cfg = pipeline_config(g)?;
            let input = load_pair(&pair, &cfg)?;
            let m = apply_filter(&io::read_matches(&matches)?, &input.ctx, &cfg)?;
            io::write_matches(&out, &m)?;
            println!("{} matches", m.len());
        }
        Command::Fit {
            pair,
            matches,
            out,
            kind,
            threshold,
            model_out,
        } => {
            let mut cfg = pipeline_config(g)?;
            let (cfg_kind, cfg_threshold) = match cfg.model {
                ModelConfig::OneSac { kind, threshold } => (Some(kind), threshold),
                ModelConfig::None => (None, ctxmatch::model::DEFAULT_INLIER_THRESHOLD),
            };
            let kind = kind
                .or(cfg_kind)
                .ok_or_else(|| Error::InvalidInput("no model kind given".into()))?;
            cfg.model = ModelConfig::OneSac {
                kind,
                threshold: threshold.unwrap_or(cfg_threshold),
            };
            cfg.validate()?;
            let input = load_pair(&pair, &cfg)?;
            let (kept, model, failed) = apply_model(&io::read_matches(&matches)?, &input.ctx, &cfg)?;
            io::write_matches(&out, &kept)?;
            if let (Some(path), Some(m)) = (model_out, &model) {
                io::write_json(&path, &ModelFile::from(m))?;
            }
            if failed == Some(true) {
                eprintln!("warning: 1SAC failed, no model");
            }
            println!("{} matches", kept.len());
        }
        Command::Eval {
            pair,
            matches,
            universe,
            method,
            out,
        } => {
            let mut cfg = pipeline_config(g)?;
            if let Some(m) = method {
                cfg.eval.method = m;
            }
            let input = load_pair(&pair, &cfg)?;
            let gt = input
                .ground_truth
                .as_ref()
                .ok_or_else(|| Error::InvalidInput(format!("{} has no ground truth", pair.display())))?;
            let output = io::read_matches(&matches)?;
            let universe = match universe {
                Some(p) => io::read_matches(&p)?,
                None => blob_match(&input.distances, &input.ctx, &cfg.blob)?,
            };
            let report = evaluate(&output, &universe, gt, &input.ctx, &cfg.eval)?;
            io::write_json(&out, &report)?;
            println!(
                "precision {} recall {}",
                report.precision.map_or("n/a".into(), |v| format!("{v:.4}")),
                report.recall.map_or("n/a".into(), |v| format!("{v:.4}"))
            );
        }
        Command::Pipeline { pair, out, table } => {
            let mut cfg = pipeline_config(g)?;
            if !pair.is_empty() {
                cfg.pairs = pair;
            }
            cfg.table |= table;
            let out = out
                .or_else(|| cfg.output.clone())
                .ok_or_else(|| Error::InvalidInput("no output directory given".into()))?;
            let inputs = load_pairs(&cfg)?;
            for input in &inputs {
                for w in warnings(input, &cfg.eval) {
                    eprintln!("warning: {w}");
                }
            }
            let results = run_batch(&inputs, &cfg)?;
            let summary = write_outputs(&out, &results, &cfg)?;
            let text = serde_json::to_string_pretty(&summary.aggregate)
                .map_err(|e| Error::InvalidInput(e.to_string()))?;
            println!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
