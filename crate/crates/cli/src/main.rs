//! `mvtex`: texture a mesh with synchronized multi-view diffusion.

mod artifacts;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use mvtex_core::config::{MeshSource, RunConfig};
use mvtex_core::diffusion::Scene;
use mvtex_core::experiment::{build_scene, compare_modes, compare_sar, execute, load_source, ExperimentError, RunOutcome};
use mvtex_core::geometry::Mesh;

#[derive(Parser)]
#[command(name = "mvtex", version, about = "Mesh texturing by synchronized multi-view diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Texture one mesh and write the artifacts.
    Run(RunArgs),
    /// Run MVD and the per-view async baseline side by side.
    AblateMvd(AblateArgs),
    /// Run with attention reuse on and off.
    AblateSar(AblateArgs),
    /// Write a built-in mesh as OBJ.
    Fixture {
        /// cube, quad, back-to-back or icosphere.
        name: String,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print the effective configuration as key=value lines.
    Config(ConfigArgs),
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Number of consecutive seeds starting at --seed.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
}

/// Every flag maps onto a config key; flags win over --set, which wins over
/// --config.
#[derive(Args, Default)]
struct ConfigArgs {
    /// key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra key=value assignment, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// OBJ path or fixture:<name>.
    #[arg(long)]
    mesh: Option<String>,
    #[arg(long)]
    texture_resolution: Option<String>,
    #[arg(long)]
    view_resolution: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    alpha_start: Option<String>,
    #[arg(long)]
    alpha_end: Option<String>,
    #[arg(long)]
    final_alpha: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    /// Step where texture sync stops, or auto.
    #[arg(long)]
    t_switch: Option<String>,
    /// Attention reuse: on or off.
    #[arg(long)]
    sar: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    t_ref: Option<String>,
    #[arg(long)]
    reference_view: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// mvd or async-baseline.
    #[arg(long)]
    mode: Option<String>,
    /// deterministic or ancestral.
    #[arg(long)]
    sampler: Option<String>,
    /// toy-gaussian, toy-pattern, tiny-attention or bridge(<host:port>).
    #[arg(long)]
    predictor: Option<String>,
    #[arg(long)]
    channels: Option<String>,
    #[arg(long)]
    equatorial_views: Option<String>,
    #[arg(long)]
    elevated_views: Option<String>,
    #[arg(long)]
    elevation_deg: Option<String>,
    #[arg(long)]
    spread: Option<String>,
    #[arg(long)]
    perturbation: Option<String>,
    #[arg(long)]
    front_back_bias: Option<String>,
    #[arg(long)]
    weights_seed: Option<String>,
    #[arg(long)]
    prompt: Option<String>,
    /// depth or normal.
    #[arg(long)]
    conditioning: Option<String>,
    /// Dump w_{0|t} for every synced step.
    #[arg(long)]
    snapshots: bool,
    /// Fail (exit 3) when the final D is not below this.
    #[arg(long)]
    d0_threshold: Option<String>,
    #[arg(short, long)]
    output: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                RunConfig::parse(&text).with_context(|| format!("in {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        for kv in &self.set {
            let Some((k, v)) = kv.split_once('=') else {
                bail!("--set expects key=value, got {kv:?}");
            };
            cfg.set(k.trim(), v.trim())?;
        }
        let flags = [
            ("mesh", &self.mesh),
            ("texture_resolution", &self.texture_resolution),
            ("view_resolution", &self.view_resolution),
            ("steps", &self.steps),
            ("alpha_start", &self.alpha_start),
            ("alpha_end", &self.alpha_end),
            ("final_alpha", &self.final_alpha),
            ("gamma", &self.gamma),
            ("t_switch", &self.t_switch),
            ("sar", &self.sar),
            ("beta", &self.beta),
            ("t_ref", &self.t_ref),
            ("reference_view", &self.reference_view),
            ("seed", &self.seed),
            ("mode", &self.mode),
            ("sampler", &self.sampler),
            ("predictor", &self.predictor),
            ("channels", &self.channels),
            ("equatorial_views", &self.equatorial_views),
            ("elevated_views", &self.elevated_views),
            ("elevation_deg", &self.elevation_deg),
            ("spread", &self.spread),
            ("perturbation", &self.perturbation),
            ("front_back_bias", &self.front_back_bias),
            ("weights_seed", &self.weights_seed),
            ("prompt", &self.prompt),
            ("conditioning", &self.conditioning),
            ("d0_threshold", &self.d0_threshold),
            ("output", &self.output),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        if self.snapshots {
            cfg.snapshots = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Failure classes mapped to exit codes.
enum Failure {
    /// Bad config or mesh: exit 2.
    Input(String),
    /// The run itself failed: exit 1.
    Run(String),
    /// Finished, but the D threshold check failed: exit 3.
    Threshold(String),
}

impl Failure {
    // `{:#}` expands anyhow context chains; core errors already embed
    // their causes in the message
    fn input(e: impl std::fmt::Display) -> Self {
        Failure::Input(format!("{e:#}"))
    }

    fn run(e: impl std::fmt::Display) -> Self {
        Failure::Run(format!("{e:#}"))
    }
}

fn prepare(args: &ConfigArgs) -> Result<(RunConfig, Scene), Failure> {
    let cfg = args.resolve().map_err(Failure::input)?;
    let mesh: Mesh = load_source(&cfg.mesh).map_err(|e| Failure::input(format!("loading mesh {}: {e}", cfg.mesh)))?;
    let scene = build_scene(&cfg, mesh);
    Ok((cfg, scene))
}

fn timed(cfg: &RunConfig, scene: &Scene) -> Result<(RunOutcome, f64), Failure> {
    let start = Instant::now();
    let out = execute(cfg, scene).map_err(Failure::run)?;
    Ok((out, start.elapsed().as_secs_f64()))
}

fn threshold_check(cfg: &RunConfig, outcomes: &[&RunOutcome]) -> Result<(), Failure> {
    let Some(limit) = cfg.d0_threshold else { return Ok(()) };
    for o in outcomes {
        let d = o.report.final_disagreement;
        if d.is_nan() || d >= limit {
            return Err(Failure::Threshold(format!("final disagreement {d:.6} is not below {limit}")));
        }
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let (cfg, scene) = prepare(&args.config)?;
    let (out, secs) = timed(&cfg, &scene)?;
    artifacts::write_run(&cfg.output, &cfg, &scene, &out, secs).map_err(Failure::run)?;
    println!(
        "{}: D(0) = {:.6}, seam energy = {}, {:.2}s -> {}",
        cfg.mesh,
        out.report.final_disagreement,
        fmt_opt(out.report.seam_energy),
        secs,
        cfg.output.display()
    );
    threshold_check(&cfg, &[&out])
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |v| format!("{v:.4}"))
}

type PairRunner = fn(&RunConfig, &Scene) -> Result<(RunOutcome, RunOutcome), ExperimentError>;

/// Paired runs over several seeds; `pair` runs one config both ways.
fn cmd_ablate(
    args: &AblateArgs,
    labels: [&str; 2],
    metric: (&str, fn(&RunOutcome) -> Option<f64>),
    pair: PairRunner,
) -> Result<(), Failure> {
    let (base, scene) = prepare(&args.config)?;
    if args.seeds == 0 {
        return Err(Failure::input("--seeds must be at least 1"));
    }
    let mut rows = Vec::new();
    let mut finished = Vec::new();
    for seed in base.seed..base.seed + args.seeds {
        let cfg = RunConfig { seed, ..base.clone() };
        let start = Instant::now();
        let (a, b) = pair(&cfg, &scene).map_err(Failure::run)?;
        let secs = start.elapsed().as_secs_f64();
        let dir = base.output.join(format!("seed-{seed}"));
        artifacts::write_run(&dir.join(labels[0]), &cfg, &scene, &a, secs / 2.0).map_err(Failure::run)?;
        artifacts::write_run(&dir.join(labels[1]), &cfg, &scene, &b, secs / 2.0).map_err(Failure::run)?;
        let (ma, mb) = (metric.1(&a), metric.1(&b));
        println!(
            "seed {seed}: D(0) {} {:.6} / {} {:.6}; {} {} / {}",
            labels[0],
            a.report.final_disagreement,
            labels[1],
            b.report.final_disagreement,
            metric.0,
            fmt_opt(ma),
            fmt_opt(mb)
        );
        rows.push(json!({
            "seed": seed,
            labels[0]: {"final_disagreement": a.report.final_disagreement, metric.0: ma},
            labels[1]: {"final_disagreement": b.report.final_disagreement, metric.0: mb},
            "lower_for_first": matches!((ma, mb), (Some(x), Some(y)) if x < y),
        }));
        finished.push(a);
    }
    let wins = rows.iter().filter(|r| r["lower_for_first"] == true).count();
    println!("{} lower for {} on {wins}/{} seeds", metric.0, labels[0], rows.len());
    let summary = json!({ "metric": metric.0, "runs": rows, "wins": wins });
    artifacts::write_text(&base.output.join("comparison.json"), &serde_json::to_string_pretty(&summary).unwrap())
        .map_err(Failure::run)?;
    threshold_check(&base, &finished.iter().collect::<Vec<_>>())
}

fn cmd_fixture(name: &str, output: &Path) -> Result<(), Failure> {
    let src: MeshSource = format!("fixture:{name}").parse().map_err(Failure::input)?;
    let mesh = load_source(&src).map_err(Failure::input)?;
    artifacts::write_text(output, &mesh.to_obj()).map_err(Failure::run)?;
    println!("{} triangles -> {}", mesh.triangle_count(), output.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::AblateMvd(a) => cmd_ablate(a, ["mvd", "async-baseline"], ("seam_energy", |o| o.report.seam_energy), compare_modes),
        Command::AblateSar(a) => cmd_ablate(a, ["sar-on", "sar-off"], ("front_back_gap", |o| o.report.front_back_gap), compare_sar),
        Command::Fixture { name, output } => cmd_fixture(name, output),
        Command::Config(a) => a.resolve().map(|c| print!("{}", c.to_kv())).map_err(Failure::input),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Threshold(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(3)
        }
    }
}
