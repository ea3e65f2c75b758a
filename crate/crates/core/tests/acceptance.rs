//! End-to-end acceptance run over a generated desk corpus: 60 worlds of
//! 50x50, 30 of 100x100 and 10 of 250x250, five seeds each. Prints one
//! PASS/FAIL line per criterion and exits nonzero on any failure.

mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gallery_core::bench::{rows_to_csv, run_plan, BenchPlan, ResultRow};
use gallery_core::dealloc::greedy_deallocate;
use gallery_core::dungeon::{file_name, generate, DungeonParams};
use gallery_core::quadtree::{decompose, decompose_grid, rank};
use gallery_core::sim::{events_to_jsonl, EventKind, RunMetrics};
use gallery_core::trace::frame_at;
use gallery_core::visibility::{sees_sampled, FovCache};
use gallery_core::{run_algorithm, Algorithm, Cell, GridWorld, WorldContext};

const CORPUS: [(usize, u64); 3] = [(50, 60), (100, 30), (250, 10)];
const SEEDS: u64 = 5;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

#[derive(Default)]
struct Mean {
    sum: f64,
    n: usize,
}

impl Mean {
    fn add(&mut self, v: f64) {
        self.sum += v;
        self.n += 1;
    }

    fn get(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.sum / self.n as f64
        }
    }
}

#[derive(Default)]
struct Tally {
    worlds: usize,
    bound_breaks: Vec<String>,
    cadence_runs: usize,
    corner_breaks: Vec<String>,
    incomplete: Vec<String>,
    complete_runs: usize,
    violated: Vec<String>,
    monitored_runs: usize,
    steps: [Mean; 2],
    max_agents: [Mean; 2],
    final_agents: [Mean; 2],
    square_50: (usize, usize),
    square_250_failed: Option<String>,
    square_250_runs: usize,
    triangle_failed: Option<String>,
    apf_failed: Option<String>,
    apf_lost: usize,
    apf_loss_breaks: Vec<String>,
}

/// Corner and hole counts read straight off the grid: corner points from
/// 2x2 windows, holes as blocked 4-components not touching the edge.
fn count_corners_and_holes(world: &GridWorld) -> (i64, i64, i64) {
    let (w, h) = (world.width() as i32, world.height() as i32);
    let (mut corners, mut reflex) = (0, 0);
    for py in 0..=h {
        for px in 0..=w {
            let free = [(px - 1, py - 1), (px, py - 1), (px - 1, py), (px, py)]
                .iter()
                .filter(|&&(x, y)| world.is_free(Cell::new(x, y)))
                .count();
            match free {
                1 => corners += 1,
                3 => {
                    corners += 1;
                    reflex += 1;
                }
                _ => {}
            }
        }
    }
    let mut seen = vec![false; world.cell_count()];
    let mut holes = 0;
    for start in 0..world.cell_count() {
        if world.is_free_index(start) || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut touches_edge = false;
        while let Some(i) = stack.pop() {
            let c = world.cell(i);
            for n in c.neighbors4() {
                if !world.in_bounds(n) {
                    touches_edge = true;
                    continue;
                }
                let j = world.index(n);
                if !world.is_free_index(j) && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        holes += i64::from(!touches_edge);
    }
    (corners, reflex, holes)
}

fn check_world(ctx: &WorldContext, name: &str, tally: &mut Tally) {
    let a = ctx.analysis();
    let (n, reflex, h) = count_corners_and_holes(ctx.world());
    let listed_reflex = a.reflex_corners().count() as i64;
    let listed_valid = a.valid_corners().count() as i64;
    let ok = a.n == n
        && a.h == h
        && listed_reflex == reflex
        && listed_reflex == (n + 4 * h - 4) / 2
        && listed_valid == (n + 2 * h - 4) / 2
        && (n + 2 * h - 4) % 2 == 0;
    if !ok {
        tally.corner_breaks.push(format!(
            "{name}: n={n} (analysis {}) h={h} (analysis {}) reflex={listed_reflex} valid={listed_valid}",
            a.n, a.h
        ));
    }
    tally.worlds += 1;
}

struct Task {
    seed: u64,
    algorithm: Algorithm,
}

/// APF losses must be flagged as violations and left out of coverage.
fn check_apf_losses(ctx: &WorldContext, out: &gallery_core::RunOutput) -> Result<usize, String> {
    let last = out.events.last().map_or(0, |e| e.step);
    let frame = frame_at(ctx, &out.events, last).map_err(|e| e.to_string())?;
    let cache = ctx.fov();
    let x_d = frame.deployment;
    let members: Vec<(usize, Cell)> = frame.agents.iter().map(|(id, (c, _))| (*id, *c)).collect();
    let mut reached = vec![false; members.len()];
    let mut stack = vec![x_d];
    while let Some(c) = stack.pop() {
        for (k, &(_, m)) in members.iter().enumerate() {
            if !reached[k] && cache.sees(c, m) {
                reached[k] = true;
                stack.push(m);
            }
        }
    }
    let lost: Vec<usize> = (0..members.len())
        .filter(|&k| !reached[k])
        .map(|k| members[k].0)
        .collect();
    if lost.len() != out.metrics.lost_agents {
        return Err(format!(
            "{} cut off in the trace, {} reported",
            lost.len(),
            out.metrics.lost_agents
        ));
    }
    let flagged: BTreeSet<usize> = out
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Violation)
        .filter_map(|e| e.agent)
        .collect();
    if let Some(id) = lost.iter().find(|id| !flagged.contains(id)) {
        return Err(format!("lost agent {id} never flagged"));
    }
    let mut sources: Vec<Cell> = (0..members.len())
        .filter(|&k| reached[k])
        .map(|k| members[k].1)
        .collect();
    sources.push(x_d);
    let covered = cache.fov(&sources).len();
    if covered != out.metrics.covered_cells {
        return Err(format!(
            "coverage {} counted, {covered} seen by connected agents",
            out.metrics.covered_cells
        ));
    }
    Ok(lost.len())
}

type TaskResult = (RunMetrics, Result<usize, String>);

fn run_tasks(ctx: &WorldContext, tasks: &[Task]) -> Vec<TaskResult> {
    let plan = BenchPlan::default();
    let results: Mutex<Vec<Option<TaskResult>>> = Mutex::new(tasks.iter().map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let jobs = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(tasks.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(task) = tasks.get(k) else { break };
                let mut config = plan
                    .run_config(ctx, task.seed, task.algorithm)
                    .expect("benchmark size");
                config.record_events = task.algorithm == Algorithm::Apf;
                let out = run_algorithm(ctx, &config);
                let losses = if task.algorithm == Algorithm::Apf {
                    check_apf_losses(ctx, &out)
                } else {
                    Ok(0)
                };
                results.lock().unwrap()[k] = Some((out.metrics, losses));
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every task ran"))
        .collect()
}

fn run_corpus(tally: &mut Tally) {
    for (size, count) in CORPUS {
        let started = Instant::now();
        for wseed in 0..count {
            let name = file_name(size, wseed);
            let world = generate(&DungeonParams::benchmark(size, wseed).expect("benchmark size"))
                .expect("generates");
            let ctx = WorldContext::new(world);
            check_world(&ctx, &name, tally);

            let mut tasks = Vec::new();
            for seed in 0..SEEDS {
                for algorithm in [Algorithm::Cadence, Algorithm::Dadence, Algorithm::Isda] {
                    tasks.push(Task { seed, algorithm });
                }
                if size == 50 || (size == 250 && tally.square_250_failed.is_none()) {
                    tasks.push(Task {
                        seed,
                        algorithm: Algorithm::Square,
                    });
                }
                if tally.triangle_failed.is_none() {
                    tasks.push(Task {
                        seed,
                        algorithm: Algorithm::Triangle,
                    });
                }
                if tally.apf_failed.is_none() || tally.apf_lost == 0 {
                    tasks.push(Task {
                        seed,
                        algorithm: Algorithm::Apf,
                    });
                }
            }
            let bound = ctx.analysis().m_cgagp;
            for (task, (m, losses)) in tasks.iter().zip(run_tasks(&ctx, &tasks)) {
                let tag = format!("{name} seed {} {}", task.seed, task.algorithm);
                let full = m.coverage_pct >= 100.0;
                match task.algorithm {
                    Algorithm::Cadence | Algorithm::Dadence | Algorithm::Isda => {
                        tally.complete_runs += 1;
                        if !full {
                            tally.incomplete.push(format!(
                                "{tag}: {:.3}% after {} steps",
                                m.coverage_pct, m.steps
                            ));
                        }
                    }
                    _ => {}
                }
                match task.algorithm {
                    Algorithm::Cadence | Algorithm::Dadence => {
                        let k = (task.algorithm == Algorithm::Dadence) as usize;
                        tally.monitored_runs += 1;
                        if m.violations > 0 {
                            tally
                                .violated
                                .push(format!("{tag}: {} violations", m.violations));
                        }
                        tally.steps[k].add(m.steps as f64);
                        tally.max_agents[k].add(m.max_agents as f64);
                        tally.final_agents[k].add(m.final_agents as f64);
                        if k == 0 {
                            tally.cadence_runs += 1;
                            if m.max_agents as i64 - 1 > bound {
                                tally.bound_breaks.push(format!(
                                    "{tag}: {} agents, bound {bound}",
                                    m.max_agents - 1
                                ));
                            }
                        }
                    }
                    Algorithm::Square if size == 50 => {
                        tally.square_50.1 += 1;
                        tally.square_50.0 += full as usize;
                    }
                    Algorithm::Square => {
                        tally.square_250_runs += 1;
                        if !full && tally.square_250_failed.is_none() {
                            tally.square_250_failed =
                                Some(format!("{tag}: {:.1}%", m.coverage_pct));
                        }
                    }
                    Algorithm::Triangle => {
                        if !full && tally.triangle_failed.is_none() {
                            tally.triangle_failed = Some(format!("{tag}: {:.1}%", m.coverage_pct));
                        }
                    }
                    Algorithm::Apf => {
                        if !full && tally.apf_failed.is_none() {
                            tally.apf_failed = Some(format!("{tag}: {:.1}%", m.coverage_pct));
                        }
                        match losses {
                            Ok(n) => tally.apf_lost += n,
                            Err(e) => tally.apf_loss_breaks.push(format!("{tag}: {e}")),
                        }
                    }
                    Algorithm::Isda => {}
                }
            }
        }
        eprintln!("corpus {size}: {count} worlds in {:.0?}", started.elapsed());
    }
}

fn small_world(rng: &mut ChaCha8Rng, max_side: usize) -> GridWorld {
    let w = rng.gen_range(2..=max_side);
    let h = rng.gen_range(2..=max_side);
    let density = rng.gen_range(0.0..0.35);
    common::random_world(rng, w, h, density)
}

fn connected(cache: &FovCache, x_d: Cell, members: &[Cell]) -> bool {
    let mut reached = vec![false; members.len()];
    let mut stack = vec![x_d];
    while let Some(c) = stack.pop() {
        for (k, &m) in members.iter().enumerate() {
            if !reached[k] && cache.sees(c, m) {
                reached[k] = true;
                stack.push(m);
            }
        }
    }
    reached.iter().all(|r| *r)
}

fn criterion_5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = Vec::new();
    let mut removed_total = 0;
    for case in 0..1000 {
        let world = small_world(&mut rng, 20);
        let x_d = world.deployment_point();
        let cache = FovCache::new(world);
        let k = rng.gen_range(1..=12);
        let agents = common::connected_agents(&cache, &mut rng, k);
        let mut before: Vec<Cell> = agents.clone();
        before.push(x_d);
        let report = greedy_deallocate(&cache, &agents, x_d);
        let kept: Vec<Cell> = report.kept.iter().map(|&k| agents[k]).collect();
        let mut after = kept.clone();
        after.push(x_d);
        let same_view = cache.fov(&before).as_slice() == cache.fov(&after).as_slice();
        let still_connected = connected(&cache, x_d, &kept);
        let second = greedy_deallocate(&cache, &kept, x_d);
        removed_total += report.removed.len();
        if !(same_view && still_connected && second.removed.is_empty()) {
            failures.push(format!(
                "case {case}: view {same_view} connected {still_connected} second {:?}",
                second.removed
            ));
        }
    }
    verdict(
        failures.is_empty(),
        format!(
            "1000 configurations, {removed_total} agents removed, {} failures {:?}",
            failures.len(),
            failures.first()
        ),
    )
}

fn criterion_6() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut pairs, mut agree, mut unsafe_pairs) = (0u64, 0u64, 0u64);
    let mut worlds = 0;
    let mut asymmetric = 0;
    let mut irreflexive = 0;
    let mut sampled_pairs = 0;
    for _ in 0..300 {
        let world = small_world(&mut rng, 12);
        let cache = FovCache::new(world.clone());
        let free: Vec<Cell> = world.free_cells().collect();
        for (i, &x) in free.iter().enumerate() {
            for &y in &free[i..] {
                let fast = cache.sees(x, y);
                let oracle = sees_sampled(&world, x, y);
                pairs += 1;
                agree += (fast == oracle) as u64;
                unsafe_pairs += (fast && !oracle) as u64;
            }
        }
        for _ in 0..34 {
            let x = free[rng.gen_range(0..free.len())];
            let y = free[rng.gen_range(0..free.len())];
            sampled_pairs += 1;
            asymmetric += (cache.sees(x, y) != cache.sees(y, x)) as u32;
            irreflexive += (!cache.sees(x, x)) as u32;
        }
        worlds += 1;
    }
    let rate = agree as f64 / pairs as f64;
    verdict(
        rate >= 0.99 && unsafe_pairs == 0 && asymmetric == 0 && irreflexive == 0 && sampled_pairs >= 10_000,
        format!(
            "{worlds} worlds, {pairs} pairs, agreement {:.4}%, {unsafe_pairs} non-conservative; {sampled_pairs} random pairs: {asymmetric} asymmetric, {irreflexive} not reflexive",
            rate * 100.0
        ),
    )
}

fn criterion_9(worlds_checked: usize) -> Verdict {
    let boundaries = rank(999) == 0 && rank(1000) == 1;
    // padding is blocked, so open grids are uniform only at power-of-two sides
    let open_squares = [1, 2, 16, 64]
        .iter()
        .all(|&s| decompose_grid(s, s, |_, _| true).node_count == 1);
    let all_blocked = [(50, 50), (37, 5)]
        .iter()
        .all(|&(w, h)| decompose_grid(w, h, |_, _| false).node_count == 1);
    let open_text = format!("64 64 0 0\n{}", format!("{}\n", ".".repeat(64)).repeat(64));
    let open_world = GridWorld::parse(&open_text).is_ok_and(|w| decompose(&w).node_count == 1);
    let uniform = open_squares && all_blocked && open_world;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut bad = 0;
    for _ in 0..500 {
        let (w, h) = (rng.gen_range(1..=64), rng.gen_range(1..=64));
        let bits: Vec<bool> = (0..w * h).map(|_| rng.gen_bool(0.7)).collect();
        bad += (decompose_grid(w, h, |x, y| bits[y * w + x]).node_count % 4 != 1) as u32;
    }
    let mut corpus_bad = 0;
    for (size, count) in CORPUS {
        for s in 0..count.min(3) {
            let world = generate(&DungeonParams::benchmark(size, s).unwrap()).unwrap();
            corpus_bad += (decompose(&world).node_count % 4 != 1) as u32;
        }
    }
    verdict(
        boundaries && uniform && bad == 0 && corpus_bad == 0,
        format!(
            "rank boundaries {boundaries}, uniform grids {uniform}, {bad} of 500 random grids and {corpus_bad} corpus worlds off 1 mod 4 ({worlds_checked} corpus worlds generated)"
        ),
    )
}

fn criterion_10() -> Verdict {
    let mut problems = Vec::new();
    let plan = BenchPlan::default();
    for (size, wseed) in [(50, 0), (50, 1), (100, 0)] {
        let world = generate(&DungeonParams::benchmark(size, wseed).unwrap()).unwrap();
        let ctx = WorldContext::new(world);
        for algorithm in Algorithm::ALL {
            for seed in 0..2 {
                let go = || {
                    let mut config = plan.run_config(&ctx, seed, algorithm).unwrap();
                    config.record_events = true;
                    let out = run_algorithm(&ctx, &config);
                    let row = rows_to_csv(&[ResultRow::from_run(
                        file_name(size, wseed),
                        &ctx,
                        &config,
                        &out,
                    )]);
                    (row, events_to_jsonl(&out.events))
                };
                if go() != go() {
                    problems.push(format!(
                        "{} seed {seed} {algorithm}",
                        file_name(size, wseed)
                    ));
                }
            }
        }
    }
    let dir = tempfile::tempdir().expect("temp dir");
    for s in 0..4 {
        let world = generate(&DungeonParams::benchmark(50, s).unwrap()).unwrap();
        std::fs::write(dir.path().join(file_name(50, s)), world.to_text()).unwrap();
    }
    let plan = BenchPlan {
        worlds_dir: dir.path().into(),
        seeds: vec![0, 1, 2],
        ..BenchPlan::default()
    };
    let one = rows_to_csv(&run_plan(&plan, 1).expect("plan runs"));
    let four = rows_to_csv(&run_plan(&plan, 4).expect("plan runs"));
    if one != four {
        problems.push("bench rows differ between 1 and 4 jobs".into());
    }
    verdict(
        problems.is_empty(),
        format!("3 worlds x 6 algorithms x 2 seeds repeated, plan of {} rows at 1 and 4 jobs; {problems:?}", one.lines().count() - 1),
    )
}

fn first<T: std::fmt::Debug>(v: &[T]) -> String {
    v.first()
        .map_or_else(String::new, |x| format!(", first: {x:?}"))
}

fn main() -> ExitCode {
    let started = Instant::now();
    let failed = AtomicBool::new(false);
    let report = |n: u32, v: Verdict| {
        println!(
            "criterion {n}: {} {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        if !v.pass {
            failed.store(true, Ordering::Relaxed);
        }
    };

    let t = Instant::now();
    let c5 = criterion_5();
    eprintln!("deallocation configurations in {:.1?}", t.elapsed());
    let t = Instant::now();
    let c6 = criterion_6();
    eprintln!("visibility pairs in {:.1?}", t.elapsed());

    let mut tally = Tally::default();
    run_corpus(&mut tally);

    report(
        1,
        verdict(
            tally.bound_breaks.is_empty() && tally.cadence_runs > 0,
            format!(
                "{} CADENCE runs, {} over the bound{}",
                tally.cadence_runs,
                tally.bound_breaks.len(),
                first(&tally.bound_breaks)
            ),
        ),
    );
    report(
        2,
        verdict(
            tally.corner_breaks.is_empty() && tally.worlds > 0,
            format!(
                "{} worlds, {} mismatches{}",
                tally.worlds,
                tally.corner_breaks.len(),
                first(&tally.corner_breaks)
            ),
        ),
    );
    report(
        3,
        verdict(
            tally.incomplete.is_empty(),
            format!(
                "{} CADENCE/DADENCE/ISDA runs, {} short of full coverage{}",
                tally.complete_runs,
                tally.incomplete.len(),
                first(&tally.incomplete)
            ),
        ),
    );
    report(
        4,
        verdict(
            tally.violated.is_empty(),
            format!(
                "{} monitored runs, {} with violations{}",
                tally.monitored_runs,
                tally.violated.len(),
                first(&tally.violated)
            ),
        ),
    );
    report(5, c5);
    report(6, c6);
    let (sc, sd) = (tally.steps[0].get(), tally.steps[1].get());
    let (mc, md) = (tally.max_agents[0].get(), tally.max_agents[1].get());
    let (fc, fd) = (tally.final_agents[0].get(), tally.final_agents[1].get());
    report(
        7,
        verdict(
            sc < sd && md < mc && fd <= fc,
            format!("steps {sc:.1} vs {sd:.1}, max agents {mc:.2} vs {md:.2}, final agents {fc:.2} vs {fd:.2} (CADENCE vs DADENCE)"),
        ),
    );
    let (s_full, s_runs) = tally.square_50;
    report(
        8,
        verdict(
            s_runs > 0
                && s_full * 10 >= s_runs * 9
                && tally.square_250_failed.is_some()
                && tally.triangle_failed.is_some()
                && tally.apf_failed.is_some()
                && tally.apf_loss_breaks.is_empty(),
            format!(
                "square {s_full}/{s_runs} full on 50x50; square at 250 after {} runs: {:?}; triangle: {:?}; APF: {:?}; APF lost agents {} all flagged and excluded: {}{}",
                tally.square_250_runs,
                tally.square_250_failed,
                tally.triangle_failed,
                tally.apf_failed,
                tally.apf_lost,
                tally.apf_loss_breaks.is_empty(),
                first(&tally.apf_loss_breaks)
            ),
        ),
    );
    report(9, criterion_9(tally.worlds));
    report(10, criterion_10());
    eprintln!("acceptance finished in {:.0?}", started.elapsed());
    if failed.load(Ordering::Relaxed) {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
