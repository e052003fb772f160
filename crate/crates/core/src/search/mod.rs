//! Spot placement search.
//!
//! Both strategies minimize the oracle's confidence over spot centres on a
//! face crop. [`grid_search`] is exhaustive over a lattice with spacing
//! `pixel_increment`; [`de_search`] runs rand/1/bin differential evolution
//! over continuous centres.
//!
//! Evaluation may fan out across workers when the oracle is parallel-safe.
//! Results never depend on it: the winner is the lowest confidence, ties
//! going to the lowest evaluation index.

mod de;
mod grid;
mod lattice;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::{confidence_of, Oracle, OracleError};
use crate::raster::{self, ImageRaster, Rect};
use crate::spot::SpotModel;

pub use de::de_search;
pub use grid::grid_search;
pub use lattice::{binomial, enumerate_placements, eye_exclusion_preset, PlacementSet, PositionGrid};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("spot {}x{} does not fit in crop {}x{}", spot[0], spot[1], crop[0], crop[1])]
    SpotLargerThanCrop { spot: [u32; 2], crop: [u32; 2] },
    #[error("no admissible placements")]
    NoAdmissiblePlacements,
    #[error("exclusion box {0} has no area")]
    DegenerateExclusion(Rect),
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("candidate {index} could not be scored: {source}")]
    Oracle {
        index: u64,
        #[source]
        source: OracleError,
    },
}

/// Spot centres in crop-local pixels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Placement {
    pub centers: Vec<[i32; 2]>,
}

impl Placement {
    pub fn new(centers: Vec<[i32; 2]>) -> Self {
        assert!(!centers.is_empty(), "a placement needs at least one spot");
        Placement { centers }
    }

    pub fn single(x: i32, y: i32) -> Self {
        Placement { centers: vec![[x, y]] }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Spot footprints for a `spot` sized `[w, h]`.
    pub fn footprints(&self, spot: [u32; 2]) -> impl Iterator<Item = Rect> + '_ {
        self.centers.iter().map(move |c| raster::footprint(*c, spot[0], spot[1]))
    }

    pub fn translated(&self, dx: i32, dy: i32) -> Placement {
        Placement {
            centers: self.centers.iter().map(|c| [c[0] + dx, c[1] + dy]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Grid,
    DifferentialEvolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeParams {
    /// NP
    pub population: usize,
    /// F, differential weight
    pub weight: f64,
    /// CR, crossover probability
    pub crossover: f64,
    /// G
    pub generations: usize,
    pub seed: u64,
    /// Starting population; random when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_population: Option<Vec<Placement>>,
}

impl Default for DeParams {
    fn default() -> Self {
        DeParams {
            population: 20,
            weight: 0.5,
            crossover: 0.9,
            generations: 50,
            seed: 0,
            initial_population: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub pixel_increment: u32,
    pub spot_count: usize,
    pub strategy: Strategy,
    /// Forbidden regions in crop-local pixels.
    #[serde(default)]
    pub exclusions: Vec<Rect>,
    #[serde(default)]
    pub de: DeParams,
    /// Worker threads for candidate evaluation; 0 picks the machine default.
    /// Only used when the oracle is parallel-safe.
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub keep_trace: bool,
}

fn default_workers() -> usize {
    1
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            pixel_increment: 20,
            spot_count: 1,
            strategy: Strategy::Grid,
            exclusions: Vec::new(),
            de: DeParams::default(),
            workers: 1,
            keep_trace: false,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: String| Err(SearchError::InvalidConfig(m));
        if self.pixel_increment == 0 {
            return bad("pixel increment must be at least 1".into());
        }
        if self.spot_count == 0 {
            return bad("spot count must be at least 1".into());
        }
        if let Some(r) = self.exclusions.iter().find(|r| r.is_empty()) {
            return Err(SearchError::DegenerateExclusion(*r));
        }
        if self.strategy == Strategy::DifferentialEvolution {
            let de = &self.de;
            if de.population < 4 {
                return bad(format!("DE population {} must be at least 4", de.population));
            }
            if !(de.weight > 0.0 && de.weight <= 2.0) {
                return bad(format!("DE weight {} outside (0, 2]", de.weight));
            }
            if !(0.0..=1.0).contains(&de.crossover) {
                return bad(format!("DE crossover {} outside [0, 1]", de.crossover));
            }
            if de.generations == 0 {
                return bad("DE needs at least one generation".into());
            }
            if let Some(init) = &de.initial_population {
                if init.len() != de.population {
                    return bad(format!(
                        "initial population has {} members, expected {}",
                        init.len(),
                        de.population
                    ));
                }
                if init.iter().any(|p| p.len() != self.spot_count) {
                    return bad(format!("initial placements must have {} spots", self.spot_count));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub index: u64,
    pub placement: Placement,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best_placement: Placement,
    pub best_confidence: f64,
    /// Oracle evaluations performed.
    pub iterations: u64,
    /// Evaluation index at which the best confidence was first seen.
    pub lowest_confidence_index: u64,
    #[serde(skip)]
    pub elapsed: Duration,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceEntry>>,
}

impl SearchOutcome {
    /// Equality on everything except wall-clock time.
    pub fn same_result(&self, other: &SearchOutcome) -> bool {
        self.best_placement == other.best_placement
            && self.best_confidence.to_bits() == other.best_confidence.to_bits()
            && self.iterations == other.iterations
            && self.lowest_confidence_index == other.lowest_confidence_index
            && self.trace == other.trace
    }
}

/// Runs the strategy named in `config`.
pub fn search<O: Oracle + ?Sized>(
    crop: &ImageRaster,
    spot: &SpotModel,
    oracle: &O,
    config: &SearchConfig,
) -> Result<SearchOutcome, SearchError> {
    match config.strategy {
        Strategy::Grid => grid_search(crop, spot, oracle, config),
        Strategy::DifferentialEvolution => de_search(crop, spot, oracle, config),
    }
}

/// Composites every spot of `placement` onto a copy of `crop`.
pub fn apply_placement(crop: &ImageRaster, spot: &ImageRaster, placement: &Placement) -> ImageRaster {
    let mut out = crop.clone();
    for c in &placement.centers {
        raster::composite_in_place(&mut out, spot, *c);
    }
    out
}

/// Oracle confidence of one candidate.
pub fn score<O: Oracle + ?Sized>(
    crop: &ImageRaster,
    spot: &ImageRaster,
    oracle: &O,
    placement: &Placement,
    index: u64,
) -> Result<f64, SearchError> {
    let image = apply_placement(crop, spot, placement);
    oracle
        .query(&image, &placement.centers)
        .map(|d| confidence_of(&d))
        .map_err(|source| SearchError::Oracle { index, source })
}

/// Running minimum keyed by `(confidence, index)`.
#[derive(Debug, Clone)]
struct Best {
    confidence: f64,
    index: u64,
    placement: Placement,
}

impl Best {
    fn better_than(&self, other: &Best) -> bool {
        self.confidence
            .total_cmp(&other.confidence)
            .then(self.index.cmp(&other.index))
            .is_lt()
    }

    fn min(a: Best, b: Best) -> Best {
        if b.better_than(&a) {
            b
        } else {
            a
        }
    }
}

fn worker_pool(workers: usize) -> Result<rayon::ThreadPool, SearchError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SearchError::InvalidConfig(format!("cannot start worker pool: {e}")))
}

fn use_parallel<O: Oracle + ?Sized>(oracle: &O, config: &SearchConfig) -> bool {
    config.workers != 1 && oracle.parallel_safe()
}
