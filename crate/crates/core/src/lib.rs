//! Light perturbation optimizer.
//!
//! Finds where to put small bright light spots on a face so that a black-box
//! face detector becomes less confident. The detector and recognizer are
//! reached only through [`oracle::Oracle`]: a child process or HTTP service
//! speaking a line-delimited JSON protocol, or a synthetic scoring function.
//!
//! The crate is organised bottom-up:
//!
//! * [`raster`]: RGBA images, cropping, resizing and alpha compositing
//! * [`spot`]: the light-spot model and its rescaling to a face
//! * [`oracle`]: the scoring boundary and its wire protocol
//! * [`search`]: exhaustive grid and differential-evolution placement search
//! * [`pipeline`]: the two-phase front/left/right campaign
//! * [`report`]: diff tables, summary statistics and the statistics dump

pub mod annotate;
pub mod oracle;
pub mod pipeline;
pub mod raster;
pub mod report;
pub mod search;
pub mod spot;

pub use oracle::{Detection, Oracle, OracleError, OracleHandle, OracleRole, OracleSpec};
pub use raster::{FaceBox, ImageRaster, Rect};
pub use search::{search, Placement, SearchConfig, SearchOutcome, Strategy};
pub use spot::{SpotModel, SpotParams};
