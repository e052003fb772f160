//! Confidence oracles.
//!
//! The optimizer treats detectors and recognizers as black boxes: an image
//! goes in, a list of scored boxes comes out. External models are reached
//! over the line protocol in [`protocol`], either through a child process's
//! stdio or an HTTP endpoint. [`synthetic`] oracles run in-process.

pub mod http;
pub mod protocol;
pub mod replay;
pub mod subprocess;
pub mod synthetic;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{FaceBox, ImageRaster, Rect};

pub use http::HttpClient;
pub use subprocess::SubprocessClient;
pub use synthetic::{GaussianWell, SyntheticOracle, SyntheticSpec};

pub const TIMEOUT_ENV: &str = "LPO_ORACLE_TIMEOUT_MS";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle transport failed: {message}")]
    Transport { message: String, transient: bool },
    #[error("oracle protocol violation: {0}")]
    Protocol(String),
    #[error("oracle did not answer within {0:?}")]
    Timeout(Duration),
    #[error("oracle reported an error for request {id}: {message}")]
    Remote { id: u64, message: String },
    #[error("no face detected in {view} view")]
    NoFace { view: String },
    #[error("bad oracle configuration: {0}")]
    Config(String),
}

impl OracleError {
    /// Transient errors may succeed on retry; everything else is fatal for
    /// the connection.
    pub fn is_transient(&self) -> bool {
        match self {
            OracleError::Transport { transient, .. } => *transient,
            OracleError::Timeout(_) | OracleError::Remote { .. } => true,
            OracleError::Protocol(_) | OracleError::NoFace { .. } | OracleError::Config(_) => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleRole {
    /// Face detection
    Fd,
    /// Face recognition
    Fr,
}

impl fmt::Display for OracleRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OracleRole::Fd => "fd",
            OracleRole::Fr => "fr",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "box")]
    pub rect: Rect,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl Detection {
    /// Clamps the box to a `width` x `height` image.
    pub fn face_box(&self, width: u32, height: u32) -> Option<FaceBox> {
        let r = self.rect.clamp_to(width, height);
        FaceBox::new(r, self.confidence).ok()
    }
}

/// An opaque scorer.
///
/// `spots` lists the spot centres composited into `image`, in the image's own
/// coordinates. Only synthetic oracles look at it; external backends receive
/// pixels alone.
pub trait Oracle: Send + Sync {
    /// Whether concurrent `query` calls are allowed.
    fn parallel_safe(&self) -> bool;

    fn query(&self, image: &ImageRaster, spots: &[[i32; 2]]) -> Result<Vec<Detection>, OracleError>;
}

impl<O: Oracle + ?Sized> Oracle for &O {
    fn parallel_safe(&self) -> bool {
        (**self).parallel_safe()
    }

    fn query(&self, image: &ImageRaster, spots: &[[i32; 2]]) -> Result<Vec<Detection>, OracleError> {
        (**self).query(image, spots)
    }
}

/// Confidence the search minimizes: the strongest detection, or 0 when the
/// oracle finds no face at all.
pub fn confidence_of(detections: &[Detection]) -> f64 {
    detections.iter().map(|d| d.confidence).fold(0.0, f64::max)
}

/// Highest-confidence detection; ties go to the smallest `(y1, x1)`.
pub fn best_face<'a>(detections: &'a [Detection], view: &str) -> Result<&'a Detection, OracleError> {
    detections
        .iter()
        .min_by(|a, b| {
            b.confidence
                .total_cmp(&a.confidence)
                .then(a.rect.y1.cmp(&b.rect.y1))
                .then(a.rect.x1.cmp(&b.rect.x1))
        })
        .ok_or_else(|| OracleError::NoFace { view: view.to_string() })
}

/// Timeout from `LPO_ORACLE_TIMEOUT_MS`, else 30 s.
pub fn configured_timeout() -> Result<Duration, OracleError> {
    match std::env::var(TIMEOUT_ENV) {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .map(Duration::from_millis)
            .map_err(|_| OracleError::Config(format!("{TIMEOUT_ENV}={v:?} is not a whole number of milliseconds"))),
        Err(_) => Ok(DEFAULT_TIMEOUT),
    }
}

/// `cmd:<command line>` | `http:<url>` | `synthetic:<spec>`
#[derive(Debug, Clone, PartialEq)]
pub enum OracleSpec {
    Command(String),
    Http(String),
    Synthetic(SyntheticSpec),
}

impl FromStr for OracleSpec {
    type Err = OracleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (scheme, rest) = s
            .split_once(':')
            .ok_or_else(|| OracleError::Config(format!("oracle spec {s:?} lacks a cmd:/http:/synthetic: prefix")))?;
        let rest = rest.trim();
        if rest.is_empty() {
            return Err(OracleError::Config(format!("oracle spec {s:?} has an empty endpoint")));
        }
        match scheme {
            "cmd" => Ok(OracleSpec::Command(rest.to_string())),
            "http" => Ok(OracleSpec::Http(rest.to_string())),
            "synthetic" => rest.parse().map(OracleSpec::Synthetic).map_err(OracleError::Config),
            other => Err(OracleError::Config(format!("unknown oracle scheme {other:?}"))),
        }
    }
}

impl fmt::Display for OracleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleSpec::Command(c) => write!(f, "cmd:{c}"),
            OracleSpec::Http(u) => write!(f, "http:{u}"),
            OracleSpec::Synthetic(s) => write!(f, "synthetic:{s}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HandleKind {
    Subprocess,
    Http,
    Synthetic,
}

enum Backend {
    Synthetic(SyntheticOracle),
    Subprocess(SubprocessClient),
    Http(HttpClient),
}

/// A connected oracle of any kind.
pub struct OracleHandle {
    kind: HandleKind,
    endpoint: String,
    parallel_safe: bool,
    backend: Backend,
}

impl fmt::Debug for OracleHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OracleHandle")
            .field("kind", &self.kind)
            .field("endpoint", &self.endpoint)
            .field("parallel_safe", &self.parallel_safe)
            .finish()
    }
}

/// Wraps a synthetic spec in a handle. Synthetic oracles are always parallel-safe.
pub fn make_synthetic(spec: SyntheticSpec) -> Result<OracleHandle, OracleError> {
    let endpoint = spec.to_string();
    Ok(OracleHandle {
        kind: HandleKind::Synthetic,
        endpoint,
        parallel_safe: true,
        backend: Backend::Synthetic(SyntheticOracle::new(spec)?),
    })
}

impl OracleHandle {
    /// Connects and performs the handshake. `role` is checked against the
    /// kind the server declares.
    pub fn connect(spec: &OracleSpec, role: OracleRole) -> Result<Self, OracleError> {
        let timeout = configured_timeout()?;
        match spec {
            OracleSpec::Synthetic(s) => make_synthetic(s.clone()),
            OracleSpec::Command(cmd) => Ok(OracleHandle {
                kind: HandleKind::Subprocess,
                endpoint: cmd.clone(),
                parallel_safe: false,
                backend: Backend::Subprocess(SubprocessClient::spawn(cmd, Some(role), timeout)?),
            }),
            OracleSpec::Http(url) => Ok(OracleHandle {
                kind: HandleKind::Http,
                endpoint: url.clone(),
                parallel_safe: false,
                backend: Backend::Http(HttpClient::connect(url, Some(role), timeout)?),
            }),
        }
    }

    /// Declares an HTTP backend safe for concurrent queries. Subprocess
    /// backends are strictly serial and ignore this.
    pub fn with_parallel_safe(mut self, parallel_safe: bool) -> Self {
        if self.kind == HandleKind::Http {
            self.parallel_safe = parallel_safe;
        }
        self
    }

    pub fn kind(&self) -> HandleKind {
        self.kind
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl Oracle for OracleHandle {
    fn parallel_safe(&self) -> bool {
        self.parallel_safe
    }

    fn query(&self, image: &ImageRaster, spots: &[[i32; 2]]) -> Result<Vec<Detection>, OracleError> {
        match &self.backend {
            Backend::Synthetic(o) => o.query(image, spots),
            Backend::Subprocess(c) => c.query(image),
            Backend::Http(c) => c.query(image),
        }
    }
}
