use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::incremental_run;
use crate::nav::KnownField;
use crate::sim::{RunConfig, RunOutput, SimError, SimState, WorldContext};
use crate::world::border;

/// Sends agents to uniformly random border cells of the known region until
/// there is no border left.
pub fn isda_run(ctx: &WorldContext, config: &RunConfig) -> RunOutput {
    RunOutput::execute(ctx, config, |state| isda_body(state, config))
}

fn isda_body(state: &mut SimState, config: &RunConfig) -> Result<(), SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut home = KnownField::new(state, state.deployment());
    let no_border = |s: &SimState| border(s.world(), s.known()).is_empty();
    incremental_run(state, config.isda.max_in_flight, no_border, |s, nav| {
        home.refresh(s);
        let taken: Vec<_> = nav.travellers().map(|(_, g)| g).collect();
        // a border cell can be in sight yet only reachable through unknown cells
        let options: Vec<_> = border(s.world(), s.known())
            .into_iter()
            .filter(|c| *c != s.deployment() && s.occupant(*c).is_none() && !taken.contains(c))
            .filter(|c| home.at(s.world().index(*c)).is_some())
            .collect();
        if options.is_empty() {
            return None;
        }
        Some(options[rng.gen_range(0..options.len())])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Algorithm;
    use crate::world::{validate_world, Cell, OccupancyGrid};

    fn ctx(rows: &[&str], d: Cell) -> WorldContext {
        WorldContext::new(validate_world(OccupancyGrid::from_rows(rows).unwrap(), d).unwrap())
    }

    #[test]
    fn convex_world_has_no_border() {
        let c = ctx(&["...."; 4], Cell::new(0, 0));
        let out = isda_run(
            &c,
            &RunConfig::new(Algorithm::Isda, Cell::new(0, 0), 3, 100),
        );
        assert_eq!(
            (out.metrics.coverage_pct, out.metrics.spawned_total),
            (100.0, 0)
        );
    }

    #[test]
    fn l_shape_covered_for_every_seed() {
        // deploying at the far end of the foot hides the top of the L
        let d = Cell::new(5, 0);
        let c = ctx(
            &["...###", "...###", "...###", "......", "......", "......"],
            d,
        );
        for seed in 0..5 {
            let mut cfg = RunConfig::new(Algorithm::Isda, d, 3, 5000);
            cfg.seed = seed;
            let out = isda_run(&c, &cfg);
            assert_eq!(out.metrics.coverage_pct, 100.0, "seed {seed}");
            let again = isda_run(&c, &cfg);
            assert_eq!(out.metrics, again.metrics);
        }
    }
}
