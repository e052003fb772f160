//! Deterministic in-process oracles for tests and demos.
//!
//! Synthetic oracles read the spot centres handed to them by the search
//! instead of analysing pixels, so their optimum is known exactly.
//!
//! Spec strings (after the `synthetic:` prefix):
//!
//! ```text
//! constant=0.8
//! planted=60,40;radius=0;floor=0.2;baseline=0.99
//! gauss=100,100,30,0.8;gauss=20,20,5,0.5;baseline=0.99
//! ```
//!
//! A gaussian well `x,y,sigma,depth` multiplies the baseline by
//! `1 - depth * exp(-d^2 / (2 sigma^2))` for every spot, `d` being the
//! spot's distance to the well centre.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Detection, Oracle, OracleError};
use crate::raster::ImageRaster;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianWell {
    pub center: [f64; 2],
    pub sigma: f64,
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticSpec {
    Constant(f64),
    PlantedMinimum {
        center: [f64; 2],
        radius: f64,
        floor: f64,
        baseline: f64,
    },
    Gaussians {
        baseline: f64,
        wells: Vec<GaussianWell>,
    },
}

fn unit(name: &str, v: f64) -> Result<(), String> {
    if v.is_finite() && (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(format!("{name} {v} outside [0, 1]"))
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            SyntheticSpec::Constant(c) => unit("constant", *c),
            SyntheticSpec::PlantedMinimum {
                radius, floor, baseline, ..
            } => {
                unit("floor", *floor)?;
                unit("baseline", *baseline)?;
                if !(radius.is_finite() && *radius >= 0.0) {
                    return Err(format!("radius {radius} must be non-negative"));
                }
                Ok(())
            }
            SyntheticSpec::Gaussians { baseline, wells } => {
                unit("baseline", *baseline)?;
                if wells.is_empty() {
                    return Err("gaussian spec needs at least one well".into());
                }
                for w in wells {
                    unit("depth", w.depth)?;
                    if !(w.sigma.is_finite() && w.sigma > 0.0) {
                        return Err(format!("sigma {} must be positive", w.sigma));
                    }
                }
                Ok(())
            }
        }
    }

    /// Confidence for a composite carrying spots at `spots`.
    pub fn confidence(&self, spots: &[[i32; 2]]) -> f64 {
        match self {
            SyntheticSpec::Constant(c) => *c,
            SyntheticSpec::PlantedMinimum {
                center,
                radius,
                floor,
                baseline,
            } => {
                let hit = spots.iter().any(|s| distance(*s, *center) <= *radius);
                if hit {
                    *floor
                } else {
                    *baseline
                }
            }
            SyntheticSpec::Gaussians { baseline, wells } => {
                let mut c = *baseline;
                for s in spots {
                    for w in wells {
                        let d = distance(*s, w.center);
                        c *= 1.0 - w.depth * (-d * d / (2.0 * w.sigma * w.sigma)).exp();
                    }
                }
                c.clamp(0.0, 1.0)
            }
        }
    }
}

fn distance(p: [i32; 2], q: [f64; 2]) -> f64 {
    let dx = p[0] as f64 - q[0];
    let dy = p[1] as f64 - q[1];
    (dx * dx + dy * dy).sqrt()
}

fn parse_f64(key: &str, s: &str) -> Result<f64, String> {
    s.trim().parse().map_err(|_| format!("{key}: {s:?} is not a number"))
}

fn parse_list(key: &str, s: &str, n: usize) -> Result<Vec<f64>, String> {
    let v = s
        .split(',')
        .map(|p| parse_f64(key, p))
        .collect::<Result<Vec<_>, _>>()?;
    if v.len() != n {
        return Err(format!("{key} expects {n} comma-separated numbers, got {}", v.len()));
    }
    Ok(v)
}

impl FromStr for SyntheticSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut pairs = Vec::new();
        for seg in s.split(';').map(str::trim).filter(|seg| !seg.is_empty()) {
            let (k, v) = seg
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got {seg:?}"))?;
            pairs.push((k.trim(), v.trim()));
        }
        let (head, _) = *pairs.first().ok_or("empty synthetic spec")?;
        let lookup = |key: &str| pairs.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);
        let spec = match head {
            "constant" => {
                if pairs.len() != 1 {
                    return Err("constant takes no other keys".into());
                }
                SyntheticSpec::Constant(parse_f64("constant", pairs[0].1)?)
            }
            "planted" => {
                for (k, _) in &pairs {
                    if !matches!(*k, "planted" | "radius" | "floor" | "baseline") {
                        return Err(format!("unknown key {k:?} for planted"));
                    }
                }
                let c = parse_list("planted", pairs[0].1, 2)?;
                SyntheticSpec::PlantedMinimum {
                    center: [c[0], c[1]],
                    radius: lookup("radius").map(|v| parse_f64("radius", v)).transpose()?.unwrap_or(0.0),
                    floor: parse_f64("floor", lookup("floor").ok_or("planted needs floor=")?)?,
                    baseline: parse_f64("baseline", lookup("baseline").ok_or("planted needs baseline=")?)?,
                }
            }
            "gauss" => {
                let mut wells = Vec::new();
                let mut baseline = None;
                for (k, v) in &pairs {
                    match *k {
                        "gauss" => {
                            let p = parse_list("gauss", v, 4)?;
                            wells.push(GaussianWell {
                                center: [p[0], p[1]],
                                sigma: p[2],
                                depth: p[3],
                            });
                        }
                        "baseline" => baseline = Some(parse_f64("baseline", v)?),
                        other => return Err(format!("unknown key {other:?} for gauss")),
                    }
                }
                SyntheticSpec::Gaussians {
                    baseline: baseline.ok_or("gauss needs baseline=")?,
                    wells,
                }
            }
            other => return Err(format!("unknown synthetic oracle {other:?}")),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for SyntheticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SyntheticSpec::Constant(c) => write!(f, "constant={c}"),
            SyntheticSpec::PlantedMinimum {
                center,
                radius,
                floor,
                baseline,
            } => write!(
                f,
                "planted={},{};radius={radius};floor={floor};baseline={baseline}",
                center[0], center[1]
            ),
            SyntheticSpec::Gaussians { baseline, wells } => {
                for w in wells {
                    write!(f, "gauss={},{},{},{};", w.center[0], w.center[1], w.sigma, w.depth)?;
                }
                write!(f, "baseline={baseline}")
            }
        }
    }
}

/// Oracle answering from a [`SyntheticSpec`]: one full-frame detection.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticOracle {
    spec: SyntheticSpec,
}

impl SyntheticOracle {
    pub fn new(spec: SyntheticSpec) -> Result<Self, OracleError> {
        spec.validate().map_err(OracleError::Config)?;
        Ok(SyntheticOracle { spec })
    }

    pub fn spec(&self) -> &SyntheticSpec {
        &self.spec
    }
}

impl Oracle for SyntheticOracle {
    fn parallel_safe(&self) -> bool {
        true
    }

    fn query(&self, image: &ImageRaster, spots: &[[i32; 2]]) -> Result<Vec<Detection>, OracleError> {
        Ok(vec![Detection {
            rect: image.full_rect(),
            confidence: self.spec.confidence(spots),
            label: None,
        }])
    }
}
