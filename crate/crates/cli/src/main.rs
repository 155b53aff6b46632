use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use symnav_core::selftest::{run_selftest, selftest_table};
use symnav_core::{
    collect_probe_states, evaluate_coverage, held_out_maps, invariance_report, train_on, training_maps, CoverageReport,
    EpisodeSource, GoalPolicy, RotationProbe, RunConfig,
};
use symnav_env::{generate_map, MapGeneratorSpec, OccupancyGrid, Suite};
use symnav_nn::{load_checkpoint, load_checkpoint_as, GlobalPolicyNetwork, ModelVariant};

#[derive(Parser)]
#[command(name = "symnav", version, about = "Train and evaluate rotation-aware exploration policies")]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Named starting point: `default` or `reduced`.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// key=value config file applied on top of the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write procedurally generated map files.
    GenMaps {
        #[arg(long, default_value = "iid")]
        suite: Suite,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "maps")]
        out: PathBuf,
    },
    /// Train a global policy with A2C.
    Train {
        #[arg(long)]
        variant: Option<ModelVariant>,
        #[arg(long)]
        suite: Option<Suite>,
        #[arg(long)]
        updates: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to runs/<variant>.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Coverage of a trained policy on evaluation maps.
    Eval {
        /// Checkpoint to load; defaults to runs/<variant>/final.ckpt.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Expected variant; a checkpoint of another variant is an error.
        #[arg(long)]
        variant: Option<ModelVariant>,
        #[command(flatten)]
        maps: MapArgs,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rotation std and critic-feature similarity of a checkpoint.
    InvarianceReport {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 24)]
        k: usize,
        #[arg(long, default_value_t = 200)]
        q: usize,
        #[command(flatten)]
        maps: MapArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Frontier-based and random-goal baselines.
    Baselines {
        /// Actor for FBE-RL; FBE-RL is skipped without one.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        maps: MapArgs,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quick oracle and property checks.
    Selftest,
}

#[derive(Args)]
struct MapArgs {
    /// Held-out maps of this suite are generated when --maps-dir is absent.
    #[arg(long, default_value = "ood")]
    suite: Suite,
    #[arg(long = "maps", default_value_t = 10)]
    count: usize,
    /// Directory of map files written by gen-maps.
    #[arg(long)]
    maps_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Preset, then config file, then overrides. With none of them given, a
/// `config.txt` next to `beside` (a checkpoint) is used when present.
fn resolve_config(args: &ConfigArgs, beside: Option<&Path>) -> Result<RunConfig> {
    let mut cfg = match &args.preset {
        Some(name) => RunConfig::preset(name)?,
        None => RunConfig::default(),
    };
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.apply_text(&text).with_context(|| format!("in {}", path.display()))?;
    } else if args.preset.is_none() {
        if let Some(sibling) = beside.and_then(Path::parent).map(|d| d.join("config.txt")) {
            if sibling.exists() {
                let text = fs::read_to_string(&sibling)?;
                cfg.apply_text(&text).with_context(|| format!("in {}", sibling.display()))?;
            }
        }
    }
    for kv in &args.overrides {
        let (k, v) = kv.split_once('=').with_context(|| format!("--set {kv:?} is not key=value"))?;
        cfg.apply_pair(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_dir(variant: ModelVariant) -> PathBuf {
    Path::new("runs").join(variant.tag().to_ascii_lowercase())
}

fn load_net(path: &Path, expected: Option<ModelVariant>) -> Result<GlobalPolicyNetwork> {
    let mut r = BufReader::new(fs::File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let net = match expected {
        Some(v) => load_checkpoint_as(&mut r, v),
        None => load_checkpoint(&mut r),
    };
    net.with_context(|| format!("loading {}", path.display()))
}

fn read_maps_dir(dir: &Path) -> Result<Vec<Arc<OccupancyGrid>>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "map"));
    paths.sort();
    if paths.is_empty() {
        bail!("no .map files in {}", dir.display());
    }
    paths
        .iter()
        .map(|p| {
            let f = BufReader::new(fs::File::open(p)?);
            Ok(Arc::new(OccupancyGrid::read_from(f).with_context(|| format!("reading {}", p.display()))?))
        })
        .collect()
}

fn eval_maps(cfg: &RunConfig, m: &MapArgs) -> Result<Vec<Arc<OccupancyGrid>>> {
    match &m.maps_dir {
        Some(dir) => read_maps_dir(dir),
        None => Ok(held_out_maps(cfg, m.suite, m.count)?),
    }
}

fn write_report(out: Option<&Path>, prefix: &str, report: &CoverageReport) -> Result<()> {
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{prefix}_curves.csv")), report.curves_csv())?;
        fs::write(dir.join(format!("{prefix}_summary.csv")), report.summary_csv())?;
    }
    Ok(())
}

fn print_summary(report: &CoverageReport) {
    println!(
        "{}: {:.2} +- {:.2} m2 over {} runs x {} maps",
        report.policy,
        report.mean,
        report.std,
        report.run_means.len(),
        report.maps
    );
}

fn file_tag(policy: &str) -> String {
    policy
        .to_ascii_lowercase()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect::<String>()
        .trim_matches('_')
        .to_string()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenMaps { suite, count, seed, out } => {
            let cfg = resolve_config(&cli.config, None)?;
            fs::create_dir_all(&out)?;
            for i in 0..count as u64 {
                let s = seed + i;
                let grid = generate_map(&MapGeneratorSpec::for_suite(suite, cfg.env.side, cfg.env.cell_size, s))?;
                let path = out.join(format!("{suite}_{s:06}.map"));
                grid.write_to(BufWriter::new(fs::File::create(&path)?))?;
                println!("{} ({:.1} m2 free)", path.display(), grid.free_area());
            }
        }
        Command::Train { variant, suite, updates, seed, out } => {
            let mut cfg = resolve_config(&cli.config, None)?;
            if let Some(v) = variant {
                cfg.variant = v;
            }
            if let Some(s) = suite {
                cfg.train.suite = s;
            }
            if let Some(u) = updates {
                cfg.train.updates = u;
            }
            if let Some(s) = seed {
                cfg.train.seed = s;
            }
            cfg.validate()?;
            let out = out.unwrap_or_else(|| run_dir(cfg.variant));
            let source = EpisodeSource::new(training_maps(&cfg)?);
            eprintln!("training {} for {} updates into {}", cfg.variant.tag(), cfg.train.updates, out.display());
            train_on(&cfg, source, Some(&out), |row| {
                eprintln!(
                    "update {:>5}  coverage {:>7.2} m2  policy {:>9.4}  value {:>9.4}  entropy {:.3}",
                    row.update, row.mean_coverage_m2, row.policy_loss, row.value_loss, row.entropy
                );
            })?;
            println!("{}", out.join("final.ckpt").display());
        }
        Command::Eval { checkpoint, variant, maps, runs, out } => {
            let path = match (checkpoint, variant) {
                (Some(p), _) => p,
                (None, Some(v)) => run_dir(v).join("final.ckpt"),
                (None, None) => bail!("eval needs --checkpoint or --variant"),
            };
            let net = load_net(&path, variant)?;
            let cfg = resolve_config(&cli.config, Some(&path))?;
            let map_set = eval_maps(&cfg, &maps)?;
            let report = evaluate_coverage(&GoalPolicy::Network(&net), &map_set, &cfg.env, runs, maps.seed)?;
            write_report(out.as_deref(), &file_tag(&report.policy), &report)?;
            print!("{}", report.summary_csv());
        }
        Command::InvarianceReport { checkpoint, k, q, maps, out } => {
            let net = load_net(&checkpoint, None)?;
            let cfg = resolve_config(&cli.config, Some(&checkpoint))?;
            let map_set = eval_maps(&cfg, &maps)?;
            let states = collect_probe_states(&GoalPolicy::RandomGoal, &map_set, &cfg.env, q, maps.seed)?;
            let report = invariance_report(&net, &RotationProbe::new(states, k)?)?;
            match out {
                Some(dir) => {
                    fs::create_dir_all(&dir)?;
                    let tag = file_tag(&report.variant);
                    fs::write(dir.join(format!("{tag}_similarity_k{k}.csv")), report.similarity_csv())?;
                    fs::write(dir.join(format!("{tag}_std_k{k}.txt")), format!("{}\n", report.summary_line()))?;
                }
                None => print!("{}", report.similarity_csv()),
            }
            println!("{}", report.summary_line());
        }
        Command::Baselines { checkpoint, maps, runs, out } => {
            let net = checkpoint.as_deref().map(|p| load_net(p, None)).transpose()?;
            let cfg = resolve_config(&cli.config, checkpoint.as_deref())?;
            let map_set = eval_maps(&cfg, &maps)?;
            let mut policies = vec![GoalPolicy::RandomGoal, GoalPolicy::Fbe];
            if let Some(n) = &net {
                policies.push(GoalPolicy::FbeRl(n));
            }
            for p in &policies {
                let report = evaluate_coverage(p, &map_set, &cfg.env, runs, maps.seed)?;
                write_report(out.as_deref(), &file_tag(&report.policy), &report)?;
                print_summary(&report);
            }
        }
        Command::Selftest => {
            let results = run_selftest();
            print!("{}", selftest_table(&results));
            let failed = results.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                bail!("{failed} of {} checks failed", results.len());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
