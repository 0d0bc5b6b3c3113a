use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use waypt3d::harness::{episodes_csv, evaluate, metrics_csv, trace_csv, Actor, Evaluation, RunConfig, Scene};
use waypt3d::learner::{
    dagger, init_policy, load_dataset, load_policy, save_dataset, save_policy, train, DaggerConfig, TrainConfig,
    LABEL_DIM,
};
use waypt3d::world::{gen_scene, load_scene, save_scene, SceneKind, ScenePreset};
use waypt3d::{Error, Result};

#[derive(Parser)]
#[command(name = "waypt3d", version, about = "Waypoint-based 3D point-goal navigation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ActorKind {
    Expert,
    Policy,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a procedural scene file.
    GenScene {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "mixed")]
        preset: SceneKind,
        #[arg(long, default_value_t = 0.5)]
        clutter: f64,
        #[arg(long, num_args = 3, default_values_t = [40, 40, 20])]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 0.25)]
        voxel: f64,
        #[arg(long, default_value = "scene.vox")]
        out: PathBuf,
    },
    /// Fly episodes with the expert or a policy and write metrics.
    Run(RunArgs),
    /// Aggregate expert-labeled data over mixed rollouts and train.
    Collect {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long, default_value_t = 4)]
        rounds: usize,
        #[arg(long, default_value_t = 2000)]
        per_round: usize,
        #[arg(long, default_value_t = 1.0)]
        alpha0: f64,
        #[arg(long, default_value_t = 0.8)]
        decay: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-4)]
        lr: f64,
        #[arg(long, default_value = "data.wpds")]
        out: PathBuf,
        #[arg(long, default_value = "policy.wpnn")]
        policy_out: PathBuf,
    },
    /// Train a policy on a dataset file.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-4)]
        lr: f64,
        #[arg(long, default_value_t = 1e-2)]
        wd: f64,
        #[arg(long, default_value_t = 64)]
        batch: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Warm-start from this policy instead of a fresh one.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long, default_value = "policy.wpnn")]
        out: PathBuf,
    },
    /// Same as `run`, defaulting to a policy actor and 200 episodes.
    Evaluate(EvalArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value = "expert")]
    actor: ActorKind,
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Scene files; episodes cycle through them.
    #[arg(long, required = true, num_args = 1..)]
    scene: Vec<PathBuf>,
    #[arg(long, default_value_t = 10)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "metrics.csv")]
    metrics: PathBuf,
    /// Per-episode CSV; defaults next to the metrics file.
    #[arg(long)]
    episodes_csv: Option<PathBuf>,
    #[arg(long)]
    trace_dir: Option<PathBuf>,
}

#[derive(clap::Args)]
struct EvalArgs {
    #[arg(long, value_enum, default_value = "policy")]
    actor: ActorKind,
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long, required = true, num_args = 1..)]
    scene: Vec<PathBuf>,
    #[arg(long, default_value_t = 200)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "metrics.csv")]
    metrics: PathBuf,
    #[arg(long)]
    episodes_csv: Option<PathBuf>,
    #[arg(long)]
    trace_dir: Option<PathBuf>,
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_scenes(paths: &[PathBuf]) -> Result<Vec<Scene>> {
    paths
        .iter()
        .map(|p| {
            let (g, meta) = load_scene(p)?;
            Ok(Scene::new(format!("{}-{}", meta.preset.kind, meta.seed), g))
        })
        .collect()
}

fn scene_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    let io = |source| Error::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let p = entry.map_err(io)?.path();
        if p.extension().is_some_and(|e| e == "vox") {
            out.push(p);
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::InvalidConfig(format!("no .vox files in {}", dir.display())));
    }
    Ok(out)
}

fn episodes_path(metrics: &Path) -> PathBuf {
    metrics.with_extension("episodes.csv")
}

fn run_cmd(args: RunArgs) -> Result<()> {
    let scenes = load_scenes(&args.scene)?;
    let policy = match (args.actor, &args.policy) {
        (ActorKind::Policy, Some(p)) => Some(load_policy(p)?),
        (ActorKind::Policy, None) => return Err(Error::InvalidConfig("--actor policy needs --policy".into())),
        (ActorKind::Expert, _) => None,
    };
    let actor = match &policy {
        Some(p) => Actor::Policy(p),
        None => Actor::Expert,
    };
    let ev = evaluate(&actor, &scenes, args.episodes, args.seed, &RunConfig::default())?;
    write_outputs(&ev, &args.metrics, args.episodes_csv.as_deref(), args.trace_dir.as_deref())?;
    let m = &ev.metrics;
    println!(
        "episodes {} success_rate {} collisions {} timeouts {} no_path {}",
        m.episodes, m.success_rate, m.collisions, m.timeouts, m.no_path
    );
    Ok(())
}

fn write_outputs(ev: &Evaluation, metrics: &Path, episodes: Option<&Path>, traces: Option<&Path>) -> Result<()> {
    write(metrics, &metrics_csv(&ev.metrics))?;
    let ep = episodes.map(Path::to_path_buf).unwrap_or_else(|| episodes_path(metrics));
    write(&ep, &episodes_csv(&ev.results))?;
    if let Some(dir) = traces {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        for (i, r) in ev.results.iter().enumerate() {
            write(&dir.join(format!("trace_{i:04}.csv")), &trace_csv(&r.trace))?;
        }
    }
    Ok(())
}

fn execute(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::GenScene {
            seed,
            preset,
            clutter,
            dims,
            voxel,
            out,
        } => {
            let (g, meta) = gen_scene(seed, ScenePreset::new(preset, clutter), [dims[0], dims[1], dims[2]], voxel)?;
            save_scene(&g, &meta, &out)
        }
        Cmd::Run(args) => run_cmd(args),
        Cmd::Evaluate(a) => run_cmd(RunArgs {
            actor: a.actor,
            policy: a.policy,
            scene: a.scene,
            episodes: a.episodes,
            seed: a.seed,
            metrics: a.metrics,
            episodes_csv: a.episodes_csv,
            trace_dir: a.trace_dir,
        }),
        Cmd::Collect {
            scenes,
            rounds,
            per_round,
            alpha0,
            decay,
            seed,
            epochs,
            lr,
            out,
            policy_out,
        } => {
            let scenes = load_scenes(&scene_dir(&scenes)?)?;
            let cfg = DaggerConfig {
                rounds,
                per_round,
                alpha0,
                decay,
                seed,
                train: TrainConfig {
                    epochs,
                    lr,
                    seed,
                    ..TrainConfig::default()
                },
                ..DaggerConfig::default()
            };
            let res = dagger(&scenes, &cfg, &RunConfig::default())?;
            save_dataset(&res.dataset, &out)?;
            save_policy(res.policies.last().expect("at least one round"), &policy_out)?;
            println!("records {} rounds {}", res.dataset.len(), res.policies.len());
            Ok(())
        }
        Cmd::Train {
            data,
            epochs,
            lr,
            wd,
            batch,
            seed,
            init,
            out,
        } => {
            let d = load_dataset(&data)?;
            let start = match init {
                Some(p) => load_policy(&p)?,
                None => {
                    let mut p = init_policy(seed, &[d.obs_dim, 256, 128, LABEL_DIM])?;
                    p.fit_normalization(&d)?;
                    p
                }
            };
            let cfg = TrainConfig {
                lr,
                weight_decay: wd,
                batch,
                epochs,
                seed,
                ..TrainConfig::default()
            };
            let (p, hist) = train(&start, &d, &cfg)?;
            save_policy(&p, &out)?;
            println!("final loss {}", hist.last().copied().unwrap_or(f64::NAN));
            Ok(())
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Format { .. } => 2,
        Error::NoValidEpisode { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    match execute(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
