//! Batch runs over a corpus of world files: budgets, seeded deployment
//! points, parallel execution and CSV output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::ApfConfig;
use crate::quadtree::{decompose, rank};
use crate::sim::{run_algorithm, Algorithm, RunConfig, RunOutput, WorldContext};
use crate::world::{Cell, GridWorld, WorldAnalysis};

pub const RESULT_HEADER: &str =
    "world,seed,algorithm,size,quadtree_nodes,rank,n,h,n_max,t_max,coverage_pct,steps,final_agents,max_agents,lost_agents,status,wall_ms";

pub const SUMMARY_HEADER: &str = "rank,algorithm,runs,coverage_pct,steps,final_agents,max_agents";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{0}x{1} is not a benchmark size class")]
    UnknownSizeClass(usize, usize),
    #[error("plan: {0}")]
    Plan(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Step budget per benchmark size.
pub fn step_budget(size: usize) -> Option<u64> {
    match size {
        50 => Some(5_000),
        100 => Some(10_000),
        250 => Some(30_000),
        _ => None,
    }
}

/// Agent and step budgets for a square benchmark world.
pub fn budget_for(world: &GridWorld, analysis: &WorldAnalysis) -> Result<(usize, u64), BenchError> {
    let (w, h) = (world.width(), world.height());
    match step_budget(w) {
        Some(t) if w == h => Ok((analysis.agent_budget(), t)),
        _ => Err(BenchError::UnknownSizeClass(w, h)),
    }
}

/// Deployment cell for a seed: uniform over the free cells.
pub fn deployment_for(world: &GridWorld, seed: u64) -> Cell {
    let free: Vec<Cell> = world.free_cells().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    free[rng.gen_range(0..free.len())]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchPlan {
    pub worlds_dir: PathBuf,
    /// File names inside `worlds_dir`; every `*.world` file when empty.
    pub worlds: Vec<PathBuf>,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<Algorithm>,
    pub n_max: Option<usize>,
    pub t_max: Option<u64>,
    pub apf: ApfConfig,
    pub triangle_spacing: Option<usize>,
    /// Overrides how many lattice or ISDA agents may travel at once.
    pub max_in_flight: Option<usize>,
    pub measure_time: bool,
}

impl Default for BenchPlan {
    fn default() -> Self {
        BenchPlan {
            worlds_dir: PathBuf::from("."),
            worlds: Vec::new(),
            seeds: vec![0, 1, 2, 3, 4],
            algorithms: Algorithm::ALL.to_vec(),
            n_max: None,
            t_max: None,
            apf: ApfConfig::default(),
            triangle_spacing: None,
            max_in_flight: None,
            measure_time: false,
        }
    }
}

impl BenchPlan {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        toml::from_str(text).map_err(|e| BenchError::Plan(e.to_string()))
    }

    /// World files in run order.
    pub fn world_files(&self) -> Result<Vec<PathBuf>, BenchError> {
        if !self.worlds.is_empty() {
            return Ok(self
                .worlds
                .iter()
                .map(|w| self.worlds_dir.join(w))
                .collect());
        }
        let io = |source| BenchError::Io {
            path: self.worlds_dir.clone(),
            source,
        };
        let mut files = Vec::new();
        for entry in std::fs::read_dir(&self.worlds_dir).map_err(io)? {
            let path = entry.map_err(io)?.path();
            if path.extension().is_some_and(|e| e == "world") {
                files.push(path);
            }
        }
        files.sort();
        Ok(files)
    }

    /// Run configuration for one seed of one algorithm on a world.
    pub fn run_config(
        &self,
        ctx: &WorldContext,
        seed: u64,
        algorithm: Algorithm,
    ) -> Result<RunConfig, BenchError> {
        let world = ctx.world();
        let (n_max, t_max) = match (self.n_max, self.t_max, budget_for(world, ctx.analysis())) {
            (n, t, Ok((bn, bt))) => (n.unwrap_or(bn), t.unwrap_or(bt)),
            (n, Some(t), Err(_)) => (n.unwrap_or(ctx.analysis().agent_budget()), t),
            (_, None, Err(e)) => return Err(e),
        };
        let mut config = RunConfig::new(algorithm, deployment_for(world, seed), n_max, t_max);
        config.seed = seed;
        config.apf = self.apf;
        if let Some(k) = self.max_in_flight {
            config.lattice.max_in_flight = k;
            config.isda.max_in_flight = k;
        }
        if let (Algorithm::Triangle, Some(r)) = (algorithm, self.triangle_spacing) {
            config.lattice.spacing = r;
        }
        config.measure_time = self.measure_time;
        Ok(config)
    }
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub world: String,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub size: usize,
    pub quadtree_nodes: u64,
    pub rank: u64,
    pub n: i64,
    pub h: i64,
    pub n_max: usize,
    pub t_max: u64,
    pub coverage_pct: f64,
    pub steps: u64,
    pub final_agents: usize,
    pub max_agents: usize,
    pub lost_agents: usize,
    pub status: String,
    pub wall_ms: u64,
}

impl ResultRow {
    fn failed(world: String, seed: u64, algorithm: Algorithm) -> Self {
        ResultRow {
            world,
            seed,
            algorithm,
            size: 0,
            quadtree_nodes: 0,
            rank: 0,
            n: 0,
            h: 0,
            n_max: 0,
            t_max: 0,
            coverage_pct: 0.0,
            steps: 0,
            final_agents: 0,
            max_agents: 0,
            lost_agents: 0,
            status: "error".into(),
            wall_ms: 0,
        }
    }

    pub fn from_run(
        world: String,
        ctx: &WorldContext,
        config: &RunConfig,
        out: &RunOutput,
    ) -> Self {
        let nodes = decompose(ctx.world()).node_count;
        let m = &out.metrics;
        ResultRow {
            world,
            seed: config.seed,
            algorithm: config.algorithm,
            size: ctx.world().width().max(ctx.world().height()),
            quadtree_nodes: nodes,
            rank: rank(nodes),
            n: ctx.analysis().n,
            h: ctx.analysis().h,
            n_max: config.n_max,
            t_max: config.t_max,
            coverage_pct: m.coverage_pct,
            steps: m.steps,
            final_agents: m.final_agents,
            max_agents: m.max_agents,
            lost_agents: m.lost_agents,
            status: m.status.name().into(),
            wall_ms: m.wall_ms,
        }
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{:.3},{},{},{},{},{},{}",
            self.world,
            self.seed,
            self.algorithm,
            self.size,
            self.quadtree_nodes,
            self.rank,
            self.n,
            self.h,
            self.n_max,
            self.t_max,
            self.coverage_pct,
            self.steps,
            self.final_agents,
            self.max_agents,
            self.lost_agents,
            self.status,
            self.wall_ms
        )
    }
}

pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(RESULT_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

/// Rows as a pretty-printed JSON array.
pub fn rows_to_json(rows: &[ResultRow]) -> String {
    serde_json::to_string_pretty(rows).expect("rows serialise")
}

fn world_name(path: &Path) -> String {
    path.file_name().map_or_else(
        || path.display().to_string(),
        |n| n.to_string_lossy().into_owned(),
    )
}

pub fn load_world(path: &Path) -> Result<GridWorld, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    GridWorld::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Runs every (world, seed, algorithm) triple on `jobs` threads. Rows come
/// back in plan order whatever the scheduling; a world that cannot be
/// loaded or budgeted yields error rows.
pub fn run_plan(plan: &BenchPlan, jobs: usize) -> Result<Vec<ResultRow>, BenchError> {
    let files = plan.world_files()?;
    let per_world = plan.seeds.len() * plan.algorithms.len();
    let total = files.len() * per_world;
    let contexts: Vec<OnceLock<Result<WorldContext, String>>> =
        files.iter().map(|_| OnceLock::new()).collect();
    let rows: Mutex<Vec<Option<ResultRow>>> = Mutex::new(vec![None; total]);
    let next = AtomicUsize::new(0);

    let work = || loop {
        let k = next.fetch_add(1, Ordering::Relaxed);
        if k >= total {
            break;
        }
        let (w, rest) = (k / per_world, k % per_world);
        let seed = plan.seeds[rest / plan.algorithms.len()];
        let algorithm = plan.algorithms[rest % plan.algorithms.len()];
        let name = world_name(&files[w]);
        let ctx = contexts[w].get_or_init(|| load_world(&files[w]).map(WorldContext::new));
        let row = match ctx {
            Ok(ctx) => match plan.run_config(ctx, seed, algorithm) {
                Ok(config) => {
                    let out = run_algorithm(ctx, &config);
                    ResultRow::from_run(name, ctx, &config, &out)
                }
                Err(e) => {
                    log::warn!("{name}: {e}");
                    ResultRow::failed(name, seed, algorithm)
                }
            },
            Err(e) => {
                log::warn!("{e}");
                ResultRow::failed(name, seed, algorithm)
            }
        };
        log::debug!("{}", row.to_csv());
        rows.lock().unwrap()[k] = Some(row);
    };
    std::thread::scope(|s| {
        for _ in 0..jobs.max(1) {
            s.spawn(work);
        }
    });
    Ok(rows
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every row is filled"))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub rank: u64,
    pub algorithm: Algorithm,
    pub runs: usize,
    pub coverage_pct: f64,
    pub steps: f64,
    pub final_agents: f64,
    pub max_agents: f64,
}

/// Means per (rank, algorithm) over rows that did not error.
pub fn aggregate(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(u64, Algorithm), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.status != "error") {
        groups.entry((r.rank, r.algorithm)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((rank, algorithm), rs)| {
            let mean =
                |f: fn(&ResultRow) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / rs.len() as f64;
            SummaryRow {
                rank,
                algorithm,
                runs: rs.len(),
                coverage_pct: mean(|r| r.coverage_pct),
                steps: mean(|r| r.steps as f64),
                final_agents: mean(|r| r.final_agents as f64),
                max_agents: mean(|r| r.max_agents as f64),
            }
        })
        .collect()
}

pub fn summary_to_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.3},{:.3},{:.3},{:.3}\n",
            r.rank, r.algorithm, r.runs, r.coverage_pct, r.steps, r.final_agents, r.max_agents
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{validate_world, OccupancyGrid};

    fn world(rows: &[&str]) -> GridWorld {
        validate_world(OccupancyGrid::from_rows(rows).unwrap(), Cell::new(0, 0)).unwrap()
    }

    fn row(rank: u64, algorithm: Algorithm, steps: u64) -> ResultRow {
        ResultRow {
            rank,
            algorithm,
            steps,
            status: "ok".into(),
            coverage_pct: 100.0,
            ..ResultRow::failed("w".into(), 0, algorithm)
        }
    }

    #[test]
    fn step_budgets() {
        assert_eq!(
            [50, 100, 250, 64].map(step_budget),
            [Some(5_000), Some(10_000), Some(30_000), None]
        );
        let open = world(
            &["."; 50]
                .map(|_| ".".repeat(50))
                .iter()
                .map(|s| s.as_str())
                .collect::<Vec<_>>(),
        );
        let a = crate::world::analyze(&open);
        assert_eq!(budget_for(&open, &a).unwrap(), (0, 5_000));
        let small = world(&["...."; 4]);
        assert!(matches!(
            budget_for(&small, &crate::world::analyze(&small)),
            Err(BenchError::UnknownSizeClass(4, 4))
        ));
    }

    #[test]
    fn one_hole_budget() {
        // rectangle plus one square hole: eight vertices, (8 + 2 - 4) / 2
        let w = world(&["....", ".#..", "....", "...."]);
        let a = crate::world::analyze(&w);
        assert_eq!((a.n, a.h, a.agent_budget()), (8, 1, 3));
    }

    #[test]
    fn deployment_is_free_and_seeded() {
        let w = world(&["..#..", "..#..", "....."]);
        for seed in 0..20 {
            let d = deployment_for(&w, seed);
            assert!(w.is_free(d));
            assert_eq!(d, deployment_for(&w, seed));
        }
        let spread: std::collections::BTreeSet<_> =
            (0..50).map(|s| deployment_for(&w, s)).collect();
        assert!(spread.len() > 5);
    }

    #[test]
    fn aggregate_means_per_rank_and_algorithm() {
        let rows = [
            row(0, Algorithm::Cadence, 10),
            row(0, Algorithm::Cadence, 20),
            row(0, Algorithm::Dadence, 7),
            row(2, Algorithm::Cadence, 4),
            ResultRow::failed("x".into(), 0, Algorithm::Cadence),
        ];
        let s = aggregate(&rows);
        let keys: Vec<_> = s
            .iter()
            .map(|r| (r.rank, r.algorithm, r.runs, r.steps))
            .collect();
        assert_eq!(
            keys,
            vec![
                (0, Algorithm::Cadence, 2, 15.0),
                (0, Algorithm::Dadence, 1, 7.0),
                (2, Algorithm::Cadence, 1, 4.0)
            ]
        );
        assert_eq!(aggregate(&rows[3..4])[0].steps, 4.0);
    }

    #[test]
    fn plan_from_toml() {
        let p = BenchPlan::from_toml("worlds_dir = \"w\"\nseeds = [1, 2]\nalgorithms = [\"cadence\", \"apf\"]\nt_max = 99\n[apf]\nk_o = 2.0\n")
            .unwrap();
        assert_eq!(p.seeds, vec![1, 2]);
        assert_eq!(p.algorithms, vec![Algorithm::Cadence, Algorithm::Apf]);
        assert_eq!(
            (p.t_max, p.apf.k_o, p.apf.sense_radius),
            (Some(99), 2.0, ApfConfig::default().sense_radius)
        );
        assert!(BenchPlan::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn plan_rows_in_order_with_error_rows() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("a.world"),
            world(&["...#", "....", "#...", "...."]).to_text(),
        )
        .unwrap();
        std::fs::write(dir.path().join("b.world"), "not a world").unwrap();
        let plan = BenchPlan {
            worlds_dir: dir.path().into(),
            seeds: vec![3, 1],
            algorithms: vec![Algorithm::Cadence, Algorithm::Dadence],
            t_max: Some(500),
            ..BenchPlan::default()
        };
        let one = run_plan(&plan, 1).unwrap();
        assert_eq!(one.len(), 8);
        let keys: Vec<_> = one
            .iter()
            .map(|r| (r.world.as_str(), r.seed, r.algorithm))
            .collect();
        assert_eq!(
            keys[..4],
            [
                ("a.world", 3, Algorithm::Cadence),
                ("a.world", 3, Algorithm::Dadence),
                ("a.world", 1, Algorithm::Cadence),
                ("a.world", 1, Algorithm::Dadence)
            ]
        );
        assert!(one[..4].iter().all(|r| r.status == "ok"));
        assert!(one[4..]
            .iter()
            .all(|r| r.status == "error" && r.world == "b.world"));
        assert_eq!(rows_to_csv(&one), rows_to_csv(&run_plan(&plan, 3).unwrap()));
    }

    #[test]
    fn json_rows_round_trip() {
        let row = ResultRow::failed("w.world".into(), 4, Algorithm::Isda);
        let back: Vec<ResultRow> =
            serde_json::from_str(&rows_to_json(std::slice::from_ref(&row))).unwrap();
        assert_eq!(back, vec![row]);
    }
}
