//! rand/1/bin differential evolution over spot centres.
//!
//! ```text
//! for each target x_i:
//!   pick distinct r1, r2, r3 != i
//!   v = x_r1 + F (x_r2 - x_r3)
//!   u_j = v_j if rand() < CR or j == j_rand, else x_ij
//!   x_i <- u  iff  conf(u) < conf(x_i)
//! ```
//!
//! Individuals are `k` centres flattened to `2k` coordinates. Trial vectors
//! are clamped to the rectangle where the spot fits inside the crop, rounded
//! to whole pixels, and any spot landing on an exclusion is moved to the
//! nearest admissible centre. Trials are generated from the seeded RNG before
//! evaluation, so parallel evaluation cannot change the outcome.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{score, use_parallel, worker_pool, Best, Placement, SearchConfig, SearchError, SearchOutcome, TraceEntry};
use crate::oracle::Oracle;
use crate::raster::{self, ImageRaster, Rect};
use crate::spot::SpotModel;

/// Admissible centres for one spot.
struct Domain {
    lo: [i32; 2],
    hi: [i32; 2],
    spot: [u32; 2],
    exclusions: Vec<Rect>,
}

impl Domain {
    fn new(crop: [u32; 2], spot: [u32; 2], exclusions: &[Rect]) -> Result<Self, SearchError> {
        if spot[0] == 0 || spot[1] == 0 || spot[0] > crop[0] || spot[1] > crop[1] {
            return Err(SearchError::SpotLargerThanCrop { spot, crop });
        }
        let lo = [(spot[0] / 2) as i32, (spot[1] / 2) as i32];
        let hi = [
            (crop[0] - spot[0] + spot[0] / 2) as i32,
            (crop[1] - spot[1] + spot[1] / 2) as i32,
        ];
        let d = Domain {
            lo,
            hi,
            spot,
            exclusions: exclusions.to_vec(),
        };
        if d.nearest_by_scan(lo).is_none() {
            return Err(SearchError::NoAdmissiblePlacements);
        }
        Ok(d)
    }

    fn admissible(&self, c: [i32; 2]) -> bool {
        if c[0] < self.lo[0] || c[0] > self.hi[0] || c[1] < self.lo[1] || c[1] > self.hi[1] {
            return false;
        }
        let fp = raster::footprint(c, self.spot[0], self.spot[1]);
        !self.exclusions.iter().any(|e| e.intersects(&fp))
    }

    fn clamp(&self, c: [i32; 2]) -> [i32; 2] {
        [c[0].clamp(self.lo[0], self.hi[0]), c[1].clamp(self.lo[1], self.hi[1])]
    }

    /// Nearest admissible centre to `c`, ties broken row-major.
    fn repair(&self, c: [i32; 2]) -> [i32; 2] {
        let c = self.clamp(c);
        if self.admissible(c) {
            return c;
        }
        // Push the footprint just past each side of every exclusion it hits.
        let fp = raster::footprint(c, self.spot[0], self.spot[1]);
        let (hw, hh) = ((self.spot[0] / 2) as i32, (self.spot[1] / 2) as i32);
        let (w, h) = (self.spot[0] as i32, self.spot[1] as i32);
        let mut best: Option<([i32; 2], i64)> = None;
        for e in self.exclusions.iter().filter(|e| e.intersects(&fp)) {
            for cand in [
                [e.x1 - w + hw, c[1]],
                [e.x2 + hw, c[1]],
                [c[0], e.y1 - h + hh],
                [c[0], e.y2 + hh],
            ] {
                if !self.admissible(cand) {
                    continue;
                }
                let d = dist2(c, cand);
                if best.is_none_or(|(b, bd)| d < bd || (d == bd && (cand[1], cand[0]) < (b[1], b[0]))) {
                    best = Some((cand, d));
                }
            }
        }
        match best {
            Some((p, _)) => p,
            None => self.nearest_by_scan(c).expect("domain has an admissible centre"),
        }
    }

    fn nearest_by_scan(&self, c: [i32; 2]) -> Option<[i32; 2]> {
        let mut best: Option<([i32; 2], i64)> = None;
        for y in self.lo[1]..=self.hi[1] {
            for x in self.lo[0]..=self.hi[0] {
                let p = [x, y];
                if !self.admissible(p) {
                    continue;
                }
                let d = dist2(c, p);
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((p, d));
                }
            }
        }
        best.map(|(p, _)| p)
    }
}

fn dist2(a: [i32; 2], b: [i32; 2]) -> i64 {
    let dx = (a[0] - b[0]) as i64;
    let dy = (a[1] - b[1]) as i64;
    dx * dx + dy * dy
}

fn to_placement(domain: &Domain, v: &[f64]) -> Placement {
    Placement {
        centers: v
            .chunks_exact(2)
            .map(|c| domain.repair([c[0].round() as i32, c[1].round() as i32]))
            .collect(),
    }
}

fn to_vector(p: &Placement) -> Vec<f64> {
    p.centers.iter().flat_map(|c| [c[0] as f64, c[1] as f64]).collect()
}

/// Differential evolution search; `iterations == NP * (G + 1)`.
pub fn de_search<O: Oracle + ?Sized>(
    crop: &ImageRaster,
    spot: &SpotModel,
    oracle: &O,
    config: &SearchConfig,
) -> Result<SearchOutcome, SearchError> {
    let started = Instant::now();
    config.validate()?;
    let params = &config.de;
    let domain = Domain::new(crop.dims(), spot.dims(), &config.exclusions)?;
    let np = params.population;
    let dims = 2 * config.spot_count;
    let lo: Vec<f64> = (0..dims).map(|j| domain.lo[j % 2] as f64).collect();
    let hi: Vec<f64> = (0..dims).map(|j| domain.hi[j % 2] as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let initial: Vec<Placement> = match &params.initial_population {
        Some(init) => init.iter().map(|p| to_placement(&domain, &to_vector(p))).collect(),
        None => (0..np)
            .map(|_| {
                let v: Vec<f64> = (0..dims).map(|j| rng.gen_range(lo[j]..=hi[j])).collect();
                to_placement(&domain, &v)
            })
            .collect(),
    };

    let parallel = use_parallel(oracle, config);
    let pool = if parallel { Some(worker_pool(config.workers)?) } else { None };
    let spot_raster = spot.raster();
    let evaluate = |batch: &[Placement], base: u64| -> Result<Vec<f64>, SearchError> {
        let one = |(i, p): (usize, &Placement)| score(crop, spot_raster, oracle, p, base + i as u64);
        match &pool {
            Some(pool) => pool.install(|| batch.par_iter().enumerate().map(one).collect()),
            None => batch.iter().enumerate().map(one).collect(),
        }
    };

    let mut trace = Vec::new();
    let mut record = |batch: &[Placement], scores: &[f64], base: u64| {
        if config.keep_trace {
            trace.extend(batch.iter().zip(scores).enumerate().map(|(i, (p, &c))| TraceEntry {
                index: base + i as u64,
                placement: p.clone(),
                confidence: c,
            }));
        }
    };

    let mut population = initial;
    let mut fitness = evaluate(&population, 0)?;
    record(&population, &fitness, 0);
    let mut best = population
        .iter()
        .zip(&fitness)
        .enumerate()
        .map(|(i, (p, &c))| Best {
            confidence: c,
            index: i as u64,
            placement: p.clone(),
        })
        .reduce(Best::min)
        .expect("population is non-empty");

    for generation in 1..=params.generations {
        let vectors: Vec<Vec<f64>> = population.iter().map(to_vector).collect();
        let trials: Vec<Placement> = (0..np)
            .map(|i| {
                let [r1, r2, r3] = pick_three(&mut rng, np, i);
                let j_rand = rng.gen_range(0..dims);
                let v: Vec<f64> = (0..dims)
                    .map(|j| {
                        let cross = rng.gen::<f64>() < params.crossover || j == j_rand;
                        let x = if cross {
                            vectors[r1][j] + params.weight * (vectors[r2][j] - vectors[r3][j])
                        } else {
                            vectors[i][j]
                        };
                        x.clamp(lo[j], hi[j])
                    })
                    .collect();
                to_placement(&domain, &v)
            })
            .collect();

        let base = (generation * np) as u64;
        let scores = evaluate(&trials, base)?;
        record(&trials, &scores, base);
        for (i, (trial, score)) in trials.into_iter().zip(scores).enumerate() {
            let candidate = Best {
                confidence: score,
                index: base + i as u64,
                placement: trial,
            };
            if score < fitness[i] {
                fitness[i] = score;
                population[i] = candidate.placement.clone();
            }
            best = Best::min(best, candidate);
        }
    }

    Ok(SearchOutcome {
        best_placement: best.placement,
        best_confidence: best.confidence,
        iterations: (np * (params.generations + 1)) as u64,
        lowest_confidence_index: best.index,
        elapsed: started.elapsed(),
        trace: config.keep_trace.then_some(trace),
    })
}

/// Three distinct indices in `0..n`, none equal to `exclude`.
fn pick_three(rng: &mut impl Rng, n: usize, exclude: usize) -> [usize; 3] {
    let mut out = [usize::MAX; 3];
    let mut filled = 0;
    while filled < 3 {
        let r = rng.gen_range(0..n);
        if r != exclude && !out[..filled].contains(&r) {
            out[filled] = r;
            filled += 1;
        }
    }
    out
}
