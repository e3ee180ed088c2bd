use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use openarms::arm::{open_arms_chain, parse_chain_config, KinematicChain, Profile};
use openarms::bench::{default_configs, format_csv, format_summary, generate_cases, run_benchmark};
use openarms::cornell::{load_dataset, write_augmented, AugmentSpec, SplitMode};
use openarms::detect::{detect_grasps, DetectConfig};
use openarms::eval::evaluate;
use openarms::grasp::format_rectangles;
use openarms::nn::{build_network, heuristic_predictor, read_weights, Network, NetworkSpec, Predictor};
use openarms_teleop::server::{router, serve};
use openarms_teleop::wire::{CameraConfig, IkRequest};
use openarms_teleop::{load_depth, Service};

#[derive(Parser)]
#[command(name = "openarms", version, about = "Open Arms kinematics, grasp detection and teleoperation tools")]
struct Cli {
    /// Chain config file; the built-in 7-DoF arm when absent.
    #[arg(long, global = true)]
    chain: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP/WebSocket service.
    Serve(ServeArgs),
    /// IK solve-rate benchmark.
    Bench {
        #[arg(long, default_value_t = 10_000)]
        cases: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// CSV report path; the summary always goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validated rectangle-metric evaluation on a Cornell-format dataset.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value_t = Split::Iw)]
        split: Split,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        /// `heuristic` or `weights:<file>`.
        #[arg(long, default_value = "heuristic")]
        predictor: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write augmented copies of a dataset under `<out>/aug/`.
    Augment(AugmentArgs),
    /// Detect grasps in one depth image and write them as Cornell rectangles.
    GraspDetect(DetectArgs),
    /// Solve IK for one pose and print the result as JSON.
    Ik {
        /// "x y z qw qx qy qz"
        #[arg(long, allow_hyphen_values = true)]
        pose: String,
        /// Seven space-separated joint values.
        #[arg(long, allow_hyphen_values = true)]
        seed: Option<String>,
    },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Camera JSON (fx, fy, cx, cy, position, quaternion) enabling
    /// robot-frame grasp output.
    #[arg(long)]
    camera: Option<PathBuf>,
    /// Network weights enabling the `network` grasp predictor.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Seconds before an idle tracking session is closed.
    #[arg(long, default_value_t = 60.0)]
    idle_timeout: f64,
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    per_record: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Maximum shift, pixels.
    #[arg(long, default_value_t = 20.0)]
    jitter: f64,
    /// Maximum rotation either way, degrees.
    #[arg(long, default_value_t = 30.0)]
    rotation: f64,
    #[arg(long, default_value_t = 0.9)]
    zoom_min: f64,
    #[arg(long, default_value_t = 1.1)]
    zoom_max: f64,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long, conflicts_with = "heuristic", required_unless_present = "heuristic")]
    weights: Option<PathBuf>,
    #[arg(long)]
    heuristic: bool,
    /// PGM depth image (or `.csv`).
    #[arg(long)]
    depth: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    top_k: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    Iw,
    Ow,
}

fn load_chain(path: Option<&Path>) -> Result<KinematicChain> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(parse_chain_config(&text)?)
        }
        None => Ok(open_arms_chain(&Profile::Default)?),
    }
}

fn load_network(path: &Path) -> Result<Network> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let weights = read_weights(&bytes).with_context(|| format!("parsing {}", path.display()))?;
    Ok(build_network(&NetworkSpec::default(), &weights)?)
}

fn parse_numbers(text: &str, n: usize, what: &str) -> Result<Vec<f64>> {
    let values = text
        .split_whitespace()
        .map(|v| v.parse::<f64>().with_context(|| format!("{what}: `{v}` is not a number")))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != n {
        bail!("{what}: expected {n} values, got {}", values.len());
    }
    Ok(values)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let chain = || load_chain(cli.chain.as_deref());
    match cli.command {
        Command::Serve(args) => run_serve(chain()?, args),
        Command::Bench { cases, seed, out } => {
            let chain = chain()?;
            let cases = generate_cases(&chain, cases, seed)?;
            let reports = run_benchmark(&chain, &cases, &default_configs())?;
            if let Some(out) = out {
                fs::write(&out, format_csv(&reports)).with_context(|| format!("writing {}", out.display()))?;
            }
            print!("{}", format_summary(&reports));
            Ok(())
        }
        Command::Eval { dataset, split, folds, predictor, seed } => {
            let ds = load_dataset(&dataset)?;
            let mode = match split {
                Split::Iw => SplitMode::ImageWise,
                Split::Ow => SplitMode::ObjectWise,
            };
            let heuristic = heuristic_predictor();
            let network;
            let (p, input_size): (&dyn Predictor, usize) = match predictor.as_str() {
                "heuristic" => (&heuristic, DetectConfig::default().input_size),
                other => match other.strip_prefix("weights:") {
                    Some(path) => {
                        network = load_network(Path::new(path))?;
                        (&network, network.spec().input.1)
                    }
                    None => bail!("--predictor must be `heuristic` or `weights:<file>`"),
                },
            };
            let cfg = DetectConfig { input_size, ..Default::default() };
            let report = evaluate(&ds.records, p, mode, folds, seed, &cfg)?;
            print!("{}", report.summary());
            Ok(())
        }
        Command::Augment(a) => {
            let ds = load_dataset(&a.dataset)?;
            let spec = AugmentSpec {
                crop_jitter: a.jitter,
                rotation_range: a.rotation.to_radians(),
                zoom_range: (a.zoom_min, a.zoom_max),
                count_per_record: a.per_record,
                rng_seed: a.seed,
            };
            let n = write_augmented(&ds.records, &spec, &a.out)?;
            println!("wrote {n} augmented records to {}", a.out.join("aug").display());
            Ok(())
        }
        Command::GraspDetect(a) => {
            let depth = load_depth(&a.depth).map_err(anyhow::Error::msg)?;
            let heuristic = heuristic_predictor();
            let network;
            let (p, input_size): (&dyn Predictor, usize) = match &a.weights {
                Some(path) => {
                    network = load_network(path)?;
                    (&network, network.spec().input.1)
                }
                None => (&heuristic, DetectConfig::default().input_size),
            };
            let cfg = DetectConfig { input_size, top_k: a.top_k, ..Default::default() };
            let dets = detect_grasps(&depth, p, &cfg)?;
            let rects: Vec<_> = dets.iter().map(|d| d.rect).collect();
            fs::write(&a.out, format_rectangles(&rects)).with_context(|| format!("writing {}", a.out.display()))?;
            for d in &dets {
                println!(
                    "q {:.3}  center ({:.1}, {:.1})  angle {:.3} rad  width {:.1} px",
                    d.pixel.quality, d.rect.center.0, d.rect.center.1, d.rect.angle, d.rect.width
                );
            }
            Ok(())
        }
        Command::Ik { pose, seed } => {
            let chain = chain()?;
            let v = parse_numbers(&pose, 7, "--pose")?;
            let seed = seed.map(|s| parse_numbers(&s, chain.dof(), "--seed")).transpose()?;
            let req = IkRequest { position: [v[0], v[1], v[2]], quaternion: [v[3], v[4], v[5], v[6]], seed };
            let resp = Service::new(chain).ik(&req)?;
            println!("{}", serde_json::to_string_pretty(&resp)?);
            Ok(())
        }
    }
}

fn run_serve(chain: KinematicChain, args: ServeArgs) -> Result<()> {
    let mut service = Service::new(chain);
    if let Some(path) = &args.camera {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cam: CameraConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        service = service.with_camera(cam.to_model()?);
    }
    if let Some(path) = &args.weights {
        service = service.with_network(load_network(path)?);
    }
    if !(args.idle_timeout > 0.0) {
        bail!("--idle-timeout must be positive");
    }
    let app = router(Arc::new(service), Duration::from_secs_f64(args.idle_timeout));
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port)).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        serve(listener, app).await?;
        Ok(())
    })
}
