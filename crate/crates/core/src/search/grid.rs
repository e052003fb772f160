use std::time::Instant;

use log::debug;
use rayon::prelude::*;

use super::{
    enumerate_placements, score, use_parallel, worker_pool, Best, Placement, SearchConfig, SearchError,
    SearchOutcome, TraceEntry,
};
use crate::oracle::Oracle;
use crate::raster::ImageRaster;
use crate::spot::SpotModel;

enum Step {
    Ok(Best, Vec<TraceEntry>),
    Failed(u64, SearchError),
}

impl Step {
    fn merge(self, other: Step) -> Step {
        match (self, other) {
            (Step::Failed(i, e), Step::Failed(j, f)) => {
                if i <= j {
                    Step::Failed(i, e)
                } else {
                    Step::Failed(j, f)
                }
            }
            (f @ Step::Failed(..), _) | (_, f @ Step::Failed(..)) => f,
            (Step::Ok(a, mut ta), Step::Ok(b, tb)) => {
                ta.extend(tb);
                Step::Ok(Best::min(a, b), ta)
            }
        }
    }
}

/// Scores every placement from [`enumerate_placements`] and keeps the lowest.
pub fn grid_search<O: Oracle + ?Sized>(
    crop: &ImageRaster,
    spot: &SpotModel,
    oracle: &O,
    config: &SearchConfig,
) -> Result<SearchOutcome, SearchError> {
    let started = Instant::now();
    let set = enumerate_placements(crop.dims(), spot.dims(), config)?;
    let total = set.len();
    debug!(
        "grid search: {} positions, k = {}, {} candidates",
        set.grid().len(),
        set.spot_count(),
        total
    );
    let spot = spot.raster();
    let keep = config.keep_trace;

    let eval = |(index, placement): (usize, Placement)| -> Step {
        let index = index as u64;
        match score(crop, spot, oracle, &placement, index) {
            Ok(confidence) => {
                let trace = if keep {
                    vec![TraceEntry {
                        index,
                        placement: placement.clone(),
                        confidence,
                    }]
                } else {
                    Vec::new()
                };
                Step::Ok(
                    Best {
                        confidence,
                        index,
                        placement,
                    },
                    trace,
                )
            }
            Err(e) => Step::Failed(index, e),
        }
    };

    let result = if use_parallel(oracle, config) {
        let pool = worker_pool(config.workers)?;
        pool.install(|| {
            set.iter()
                .enumerate()
                .par_bridge()
                .map(eval)
                .reduce_with(Step::merge)
        })
    } else {
        let mut acc: Option<Step> = None;
        for item in set.iter().enumerate() {
            let step = eval(item);
            if let Step::Failed(..) = step {
                acc = Some(step);
                break;
            }
            acc = Some(match acc {
                Some(a) => a.merge(step),
                None => step,
            });
        }
        acc
    };

    match result.expect("placement set is never empty") {
        Step::Failed(_, e) => Err(e),
        Step::Ok(best, mut trace) => {
            trace.sort_by_key(|t| t.index);
            Ok(SearchOutcome {
                best_placement: best.placement,
                best_confidence: best.confidence,
                iterations: total,
                lowest_confidence_index: best.index,
                elapsed: started.elapsed(),
                trace: keep.then_some(trace),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{make_synthetic, OracleError, SyntheticSpec};
    use crate::raster::Rect;
    use crate::search::eye_exclusion_preset;
    use crate::spot::{render_spot, SpotParams, SpotShape};

    fn spot(w: u32, h: u32) -> SpotModel {
        render_spot(
            &SpotParams {
                colour: [0, 255, 0],
                opacity: 1.0,
                shape: SpotShape::Ellipse,
                size: [w, h],
                falloff: 0.0,
            },
            100,
        )
        .unwrap()
    }

    fn cfg(inc: u32, k: usize) -> SearchConfig {
        SearchConfig {
            pixel_increment: inc,
            spot_count: k,
            keep_trace: true,
            ..SearchConfig::default()
        }
    }

    #[test]
    fn constant_oracle_picks_index_zero() {
        let crop = ImageRaster::filled(100, 100, [90, 80, 70, 255]);
        let oracle = make_synthetic(SyntheticSpec::Constant(0.8)).unwrap();
        let out = grid_search(&crop, &spot(20, 20), &oracle, &cfg(40, 1)).unwrap();
        assert_eq!(out.lowest_confidence_index, 0);
        assert_eq!(out.best_placement, Placement::single(10, 10));
        assert_eq!(out.best_confidence, 0.8);
        assert_eq!(out.iterations, 9);
        assert_eq!(out.trace.as_ref().unwrap().len(), 9);
    }

    #[test]
    fn planted_minimum_on_lattice() {
        let crop = ImageRaster::filled(100, 100, [90, 80, 70, 255]);
        let oracle = make_synthetic("planted=50,90;floor=0.2;baseline=0.99".parse().unwrap()).unwrap();
        let out = grid_search(&crop, &spot(20, 20), &oracle, &cfg(40, 1)).unwrap();
        assert_eq!(out.best_confidence, 0.2);
        assert_eq!(out.best_placement, Placement::single(50, 90));
        assert_eq!(out.lowest_confidence_index, 7);
        let trace = out.trace.unwrap();
        let min = trace.iter().map(|t| t.confidence).fold(f64::INFINITY, f64::min);
        assert_eq!(min, out.best_confidence);
    }

    #[test]
    fn exclusion_keeps_best_outside_band() {
        let crop = ImageRaster::filled(100, 100, [90, 80, 70, 255]);
        // minimum at the band centre, gentle slope elsewhere
        let landscape: SyntheticSpec = "gauss=50,32,30,0.9;baseline=0.99".parse().unwrap();
        let oracle = make_synthetic(landscape.clone()).unwrap();
        let mut c = cfg(5, 1);
        c.exclusions = eye_exclusion_preset([100, 100]);
        let spot = spot(10, 10);
        let out = grid_search(&crop, &spot, &oracle, &c).unwrap();
        let band = c.exclusions[0];
        assert!(out.best_placement.footprints(spot.dims()).all(|f| !f.intersects(&band)));

        // brute force over the admissible set
        let set = enumerate_placements([100, 100], spot.dims(), &c).unwrap();
        let brute = set
            .iter()
            .map(|p| landscape.confidence(&p.centers))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(out.best_confidence, brute);
    }

    struct FailsAt(u64, std::sync::atomic::AtomicU64);

    impl Oracle for FailsAt {
        fn parallel_safe(&self) -> bool {
            false
        }
        fn query(&self, _: &ImageRaster, _: &[[i32; 2]]) -> Result<Vec<crate::oracle::Detection>, OracleError> {
            let n = self.1.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            if n == self.0 {
                Err(OracleError::Remote {
                    id: n + 1,
                    message: "boom".into(),
                })
            } else {
                Ok(vec![])
            }
        }
    }

    #[test]
    fn oracle_failure_reports_candidate_index() {
        let crop = ImageRaster::filled(100, 100, [0, 0, 0, 255]);
        let oracle = FailsAt(4, Default::default());
        match grid_search(&crop, &spot(20, 20), &oracle, &cfg(40, 1)) {
            Err(SearchError::Oracle { index, .. }) => assert_eq!(index, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parallel_matches_serial() {
        let crop = ImageRaster::filled(64, 64, [0, 0, 0, 255]);
        let oracle = make_synthetic("gauss=30,20,9,0.7;gauss=10,50,4,0.75;baseline=0.9".parse().unwrap()).unwrap();
        let mut c = cfg(4, 2);
        c.exclusions.push(Rect::new(20, 20, 30, 30));
        let serial = grid_search(&crop, &spot(8, 6), &oracle, &c).unwrap();
        c.workers = 4;
        let parallel = grid_search(&crop, &spot(8, 6), &oracle, &c).unwrap();
        assert!(serial.same_result(&parallel));
    }
}
