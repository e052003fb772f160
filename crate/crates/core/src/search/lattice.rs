use super::{Placement, SearchConfig, SearchError};
use crate::raster::{self, Rect};

/// Single-spot positions: the spot's top-left corner steps by the pixel
/// increment from the crop origin while the whole spot stays inside the crop.
/// Positions are numbered row-major, `row * cols + col`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositionGrid {
    pub cols: u32,
    pub rows: u32,
    pub increment: u32,
    pub spot: [u32; 2],
    /// Linear indices not blocked by an exclusion, ascending.
    pub admissible: Vec<u32>,
}

impl PositionGrid {
    pub fn center(&self, linear: u32) -> [i32; 2] {
        let col = linear % self.cols;
        let row = linear / self.cols;
        [
            (col * self.increment + self.spot[0] / 2) as i32,
            (row * self.increment + self.spot[1] / 2) as i32,
        ]
    }

    pub fn len(&self) -> usize {
        self.admissible.len()
    }

    pub fn is_empty(&self) -> bool {
        self.admissible.is_empty()
    }
}

/// Every non-decreasing `k`-multiset of admissible positions, in
/// lexicographic order of linear indices.
#[derive(Debug, Clone)]
pub struct PlacementSet {
    grid: PositionGrid,
    k: usize,
}

impl PlacementSet {
    pub fn grid(&self) -> &PositionGrid {
        &self.grid
    }

    pub fn spot_count(&self) -> usize {
        self.k
    }

    /// `C(P + k - 1, k)`.
    pub fn len(&self) -> u64 {
        let n = binomial(self.grid.len() as u64 + self.k as u64 - 1, self.k as u64);
        u64::try_from(n).unwrap_or(u64::MAX)
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn iter(&self) -> PlacementIter<'_> {
        PlacementIter {
            set: self,
            state: Some(vec![0; self.k]),
        }
    }
}

impl<'a> IntoIterator for &'a PlacementSet {
    type Item = Placement;
    type IntoIter = PlacementIter<'a>;

    fn into_iter(self) -> Self::IntoIter {
        self.iter()
    }
}

pub struct PlacementIter<'a> {
    set: &'a PlacementSet,
    /// Positions into `admissible`, non-decreasing.
    state: Option<Vec<usize>>,
}

impl Iterator for PlacementIter<'_> {
    type Item = Placement;

    fn next(&mut self) -> Option<Placement> {
        let grid = &self.set.grid;
        let state = self.state.as_mut()?;
        let placement = Placement {
            centers: state.iter().map(|&i| grid.center(grid.admissible[i])).collect(),
        };
        let p = grid.admissible.len();
        match state.iter().rposition(|&i| i + 1 < p) {
            Some(pos) => {
                let v = state[pos] + 1;
                state[pos..].iter_mut().for_each(|s| *s = v);
            }
            None => self.state = None,
        }
        Some(placement)
    }
}

/// Exact binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Lays out the candidate lattice for a `crop` and a spot of size `spot`.
pub fn enumerate_placements(crop: [u32; 2], spot: [u32; 2], config: &SearchConfig) -> Result<PlacementSet, SearchError> {
    config.validate()?;
    let [cw, ch] = crop;
    let [sw, sh] = spot;
    if sw == 0 || sh == 0 || sw > cw || sh > ch {
        return Err(SearchError::SpotLargerThanCrop { spot, crop });
    }
    let inc = config.pixel_increment;
    let cols = (cw - sw) / inc + 1;
    let rows = (ch - sh) / inc + 1;
    let mut grid = PositionGrid {
        cols,
        rows,
        increment: inc,
        spot,
        admissible: Vec::new(),
    };
    grid.admissible = (0..cols * rows)
        .filter(|&i| {
            let fp = raster::footprint(grid.center(i), sw, sh);
            !config.exclusions.iter().any(|e| e.intersects(&fp))
        })
        .collect();
    if grid.admissible.is_empty() {
        return Err(SearchError::NoAdmissiblePlacements);
    }
    Ok(PlacementSet {
        grid,
        k: config.spot_count,
    })
}

/// Eye band of a face crop: `0.10 W .. 0.90 W` by `0.20 H .. 0.45 H`.
pub fn eye_exclusion_preset(crop: [u32; 2]) -> Vec<Rect> {
    let [w, h] = crop.map(f64::from);
    let at = |v: f64| v.round() as i32;
    vec![Rect::new(at(0.10 * w), at(0.20 * h), at(0.90 * w), at(0.45 * h))]
}
