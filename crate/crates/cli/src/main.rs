use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use gallery_core::bench::{
    aggregate, budget_for, load_world, rows_to_csv, rows_to_json, run_plan, step_budget,
    summary_to_csv, BenchPlan, ResultRow,
};
use gallery_core::dungeon::{file_name, generate, DungeonParams};
use gallery_core::quadtree::{decompose, rank};
use gallery_core::sim::{events_from_jsonl, events_to_jsonl, InvariantMode, RunStatus};
use gallery_core::trace::{frame_at, render_ascii, render_ppm};
use gallery_core::{run_algorithm, Algorithm, WorldContext};

#[derive(Parser)]
#[command(
    name = "gallery",
    version,
    about = "Deploy connected agent networks in unknown grid worlds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate benchmark dungeon worlds.
    Gen {
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = 1)]
        count: u64,
        /// Seed of the first world; the others use the following seeds.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Run one algorithm on one world and print its results row.
    Run {
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        algo: Algorithm,
        /// Picks the deployment cell and drives in-run randomness.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Start from the deployment cell in the world file instead.
        #[arg(long)]
        file_deployment: bool,
        /// Stop at the first coverage or connectivity violation (exit 1).
        #[arg(long)]
        assert_invariants: bool,
        /// Write the event trace as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        n_max: Option<usize>,
        /// Defaults to the budget of the smallest size class that fits.
        #[arg(long)]
        t_max: Option<u64>,
    },
    /// Run a benchmark plan.
    Bench {
        /// TOML plan file.
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Results CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per rank and algorithm means as CSV.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Results as a JSON array.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print a world's corner counts, budgets and complexity.
    Inspect {
        #[arg(long)]
        world: PathBuf,
    },
    /// Draw one step of a recorded trace.
    Render {
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        at: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Ascii)]
        format: Format,
        /// Pixels per cell side for PPM output.
        #[arg(long, default_value_t = 4)]
        scale: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Ascii,
    Ppm,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("GG_LOG", "warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Gen {
            size,
            count,
            seed,
            out_dir,
        } => gen(size, count, seed, &out_dir),
        Command::Run {
            world,
            algo,
            seed,
            file_deployment,
            assert_invariants,
            trace,
            n_max,
            t_max,
        } => {
            let opts = RunOpts {
                algo,
                seed,
                file_deployment,
                assert_invariants,
                n_max,
                t_max,
            };
            run(&world, opts, trace.as_deref())
        }
        Command::Bench {
            plan,
            jobs,
            out,
            summary,
            json,
        } => bench(
            &plan,
            jobs,
            out.as_deref(),
            summary.as_deref(),
            json.as_deref(),
        ),
        Command::Inspect { world } => inspect(&world),
        Command::Render {
            world,
            trace,
            at,
            out,
            format,
            scale,
        } => render(&world, &trace, at, out.as_deref(), format, scale),
    }
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => std::io::stdout().write_all(bytes).context("writing stdout"),
    }
}

fn gen(size: usize, count: u64, seed: u64, out_dir: &Path) -> Result<ExitCode> {
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    println!("file,quadtree_nodes,rank");
    for s in seed..seed + count {
        let world = generate(&DungeonParams::benchmark(size, s)?)?;
        let name = file_name(size, s);
        let path = out_dir.join(&name);
        fs::write(&path, world.to_text()).with_context(|| format!("writing {}", path.display()))?;
        let nodes = decompose(&world).node_count;
        println!("{name},{nodes},{}", rank(nodes));
    }
    Ok(ExitCode::SUCCESS)
}

struct RunOpts {
    algo: Algorithm,
    seed: u64,
    file_deployment: bool,
    assert_invariants: bool,
    n_max: Option<usize>,
    t_max: Option<u64>,
}

fn fallback_steps(side: usize) -> u64 {
    [50, 100, 250]
        .into_iter()
        .find(|&s| side <= s)
        .and_then(step_budget)
        .unwrap_or(30_000)
}

fn run(path: &Path, opts: RunOpts, trace: Option<&Path>) -> Result<ExitCode> {
    let world = load_world(path).map_err(|e| anyhow!(e))?;
    let side = world.width().max(world.height());
    let file_point = world.deployment_point();
    let ctx = WorldContext::new(world);
    let plan = BenchPlan {
        n_max: opts.n_max,
        t_max: opts.t_max.or_else(|| {
            budget_for(ctx.world(), ctx.analysis())
                .is_err()
                .then(|| fallback_steps(side))
        }),
        ..BenchPlan::default()
    };
    let mut config = plan.run_config(&ctx, opts.seed, opts.algo)?;
    if opts.file_deployment {
        config.deployment = file_point;
    }
    if opts.assert_invariants {
        config.invariant_mode = InvariantMode::Assert;
    }
    config.record_events = trace.is_some();
    let out = run_algorithm(&ctx, &config);
    if let Some(t) = trace {
        fs::write(t, events_to_jsonl(&out.events))
            .with_context(|| format!("writing {}", t.display()))?;
    }
    let name = path.file_name().map_or_else(
        || path.display().to_string(),
        |n| n.to_string_lossy().into_owned(),
    );
    let row = ResultRow::from_run(name, &ctx, &config, &out);
    print!("{}", rows_to_csv(&[row]));
    if let Some(e) = &out.error {
        log::warn!("run stopped early: {e}");
    }
    for v in &out.violations {
        log::info!("violation at step {}: {:?} {:?}", v.step, v.kind, v.cell);
    }
    Ok(if out.metrics.status == RunStatus::Violation {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn bench(
    plan_path: &Path,
    jobs: usize,
    out: Option<&Path>,
    summary: Option<&Path>,
    json: Option<&Path>,
) -> Result<ExitCode> {
    let text = fs::read_to_string(plan_path)
        .with_context(|| format!("reading {}", plan_path.display()))?;
    let mut plan = BenchPlan::from_toml(&text)?;
    if plan.worlds_dir.is_relative() {
        if let Some(dir) = plan_path.parent() {
            plan.worlds_dir = dir.join(&plan.worlds_dir);
        }
    }
    let rows = run_plan(&plan, jobs)?;
    write_out(out, rows_to_csv(&rows).as_bytes())?;
    if let Some(p) = summary {
        fs::write(p, summary_to_csv(&aggregate(&rows)))
            .with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = json {
        fs::write(p, rows_to_json(&rows)).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn inspect(path: &Path) -> Result<ExitCode> {
    let world = load_world(path).map_err(|e| anyhow!(e))?;
    let ctx = WorldContext::new(world);
    let (w, a) = (ctx.world(), ctx.analysis());
    let tree = decompose(w);
    let budget = budget_for(w, a).map_or_else(|_| "none".to_string(), |(n, t)| format!("{n},{t}"));
    println!("size={}x{}", w.width(), w.height());
    println!("free_cells={}", w.free_count());
    println!("deployment={}", w.deployment_point());
    println!("n={}", a.n);
    println!("h={}", a.h);
    println!("reflex_corners={}", a.reflex_corners().count());
    println!("valid_corners={}", a.valid_corners().count());
    println!("m_refl={}", a.m_refl);
    println!("m_valid={}", a.m_valid);
    println!("agent_bound={}", a.m_cgagp);
    println!("quadtree_nodes={}", tree.node_count);
    println!("rank={}", rank(tree.node_count));
    println!("budget={budget}");
    Ok(ExitCode::SUCCESS)
}

fn render(
    world: &Path,
    trace: &Path,
    at: u64,
    out: Option<&Path>,
    format: Format,
    scale: usize,
) -> Result<ExitCode> {
    let world = load_world(world).map_err(|e| anyhow!(e))?;
    let ctx = WorldContext::new(world);
    let text = fs::read_to_string(trace).with_context(|| format!("reading {}", trace.display()))?;
    let events =
        events_from_jsonl(&text).with_context(|| format!("parsing {}", trace.display()))?;
    let frame = frame_at(&ctx, &events, at)?;
    let bytes = match format {
        Format::Ascii => render_ascii(ctx.world(), &frame).into_bytes(),
        Format::Ppm => render_ppm(ctx.world(), &frame, scale),
    };
    write_out(out, &bytes)?;
    Ok(ExitCode::SUCCESS)
}
