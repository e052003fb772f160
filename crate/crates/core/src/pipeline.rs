//! Two-phase attack campaign over front, left and right views.
//!
//! Phase 1 scores the original photos on both oracles, searches the FD
//! oracle for the lowest-confidence spot placement on each face, and writes
//! annotated images plus `campaign.json`. The operator then reproduces the
//! recommended spots physically and photographs the result. Phase 2 scores
//! those adjusted photos and completes the record.
//!
//! Output names are fixed per view:
//!
//! ```text
//! front_Initial_FD.png  front_Initial_FR.png  front_LPO.png
//! front_Final_FD.png    front_Final_FR.png    campaign.json
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use log::info;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate;
use crate::oracle::{best_face, confidence_of, Detection, Oracle, OracleError};
use crate::raster::{self, ImageRaster, RasterError, Rect};
use crate::search::{self, apply_placement, eye_exclusion_preset, Placement, SearchConfig, SearchError, SearchOutcome};
use crate::spot::{rescale_spot, SpotError, SpotModel, SpotParams};

pub const RECORD_FILE: &str = "campaign.json";
pub const RECORD_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no face detected in {view} view")]
    NoFace { view: View },
    #[error("{view} view: {source}")]
    Oracle {
        view: View,
        #[source]
        source: OracleError,
    },
    #[error("{view} view: {source}")]
    Search {
        view: View,
        #[source]
        source: SearchError,
    },
    #[error("bad campaign configuration: {0}")]
    Config(String),
    #[error("phase 1 incomplete: {0}")]
    Phase1Incomplete(String),
    #[error("manifest {path} line {line}: {message}")]
    Manifest { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Spot(#[from] SpotError),
}

impl PipelineError {
    /// 2 no face, 3 oracle failure, 4 bad configuration, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::NoFace { .. } => 2,
            PipelineError::Oracle { source, .. } => match source {
                OracleError::NoFace { .. } => 2,
                OracleError::Config(_) => 4,
                _ => 3,
            },
            PipelineError::Search { source, .. } => match source {
                SearchError::Oracle { .. } => 3,
                _ => 4,
            },
            PipelineError::Config(_) | PipelineError::Spot(_) => 4,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Front,
    Left,
    Right,
}

impl View {
    pub const ALL: [View; 3] = [View::Front, View::Left, View::Right];

    /// `front`, `left`, `right`; used in file names.
    pub fn key(self) -> &'static str {
        match self {
            View::Front => "front",
            View::Left => "left",
            View::Right => "right",
        }
    }

    /// `Front`, `Left`, `Right`
    pub fn title(self) -> &'static str {
        match self {
            View::Front => "Front",
            View::Left => "Left",
            View::Right => "Right",
        }
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Artifact {
    InitialFd,
    InitialFr,
    Lpo,
    FinalFd,
    FinalFr,
}

impl Artifact {
    pub const PHASE1: [Artifact; 3] = [Artifact::InitialFd, Artifact::InitialFr, Artifact::Lpo];
    pub const PHASE2: [Artifact; 2] = [Artifact::FinalFd, Artifact::FinalFr];

    fn suffix(self) -> &'static str {
        match self {
            Artifact::InitialFd => "_Initial_FD",
            Artifact::InitialFr => "_Initial_FR",
            Artifact::Lpo => "_LPO",
            Artifact::FinalFd => "_Final_FD",
            Artifact::FinalFr => "_Final_FR",
        }
    }
}

/// File name for one view's artifact, e.g. `left_Final_FR.png`.
pub fn output_name(view: View, artifact: Artifact) -> String {
    format!("{}{}.png", view.key(), artifact.suffix())
}

/// Every file a finished campaign leaves in its output directory.
pub fn expected_outputs(include_phase2: bool) -> Vec<String> {
    let mut names: Vec<String> = View::ALL
        .iter()
        .flat_map(|&v| {
            let phase2: &[Artifact] = if include_phase2 { &Artifact::PHASE2 } else { &[] };
            Artifact::PHASE1.iter().chain(phase2).map(move |&a| output_name(v, a))
        })
        .collect();
    names.push(RECORD_FILE.to_string());
    names.sort();
    names
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewInput {
    pub path: PathBuf,
    pub image: ImageRaster,
    pub spot_count: usize,
}

/// Spot counts per view: one everywhere for a single laser dot, three on the
/// front for the three-LED hat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpotMode {
    Laser,
    Hat,
}

impl SpotMode {
    pub fn counts(self) -> [usize; 3] {
        match self {
            SpotMode::Laser => [1, 1, 1],
            SpotMode::Hat => [3, 1, 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewSet {
    pub front: ViewInput,
    pub left: ViewInput,
    pub right: ViewInput,
}

impl ViewSet {
    pub fn load(paths: [&Path; 3], mode: SpotMode) -> Result<Self, PipelineError> {
        let counts = mode.counts();
        let load = |i: usize| -> Result<ViewInput, PipelineError> {
            Ok(ViewInput {
                path: paths[i].to_path_buf(),
                image: raster::load_image(paths[i])?,
                spot_count: counts[i],
            })
        };
        Ok(ViewSet {
            front: load(0)?,
            left: load(1)?,
            right: load(2)?,
        })
    }

    pub fn get(&self, view: View) -> &ViewInput {
        match view {
            View::Front => &self.front,
            View::Left => &self.left,
            View::Right => &self.right,
        }
    }

    pub fn get_mut(&mut self, view: View) -> &mut ViewInput {
        match view {
            View::Front => &mut self.front,
            View::Left => &mut self.left,
            View::Right => &mut self.right,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpotSummary {
    /// `rendered` or the PNG path.
    pub source: String,
    pub reference_face_width: u32,
    pub size: [u32; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<SpotParams>,
}

impl SpotSummary {
    pub fn of(spot: &SpotModel, source: impl Into<String>) -> Self {
        SpotSummary {
            source: source.into(),
            reference_face_width: spot.reference_face_width(),
            size: spot.dims(),
            params: spot.params().cloned(),
        }
    }
}

/// Snapshot of everything that shaped a campaign, stored in the record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub search: SearchConfig,
    pub exclude_eyes: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub downscale: Option<[u32; 2]>,
    pub fd_oracle: String,
    pub fr_oracle: String,
    pub spot: SpotSummary,
    /// Environment tags such as `DH`, carried into reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewOutputs {
    pub initial_fd: String,
    pub initial_fr: String,
    pub lpo: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_fd: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_fr: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewResult {
    pub view: View,
    pub input: String,
    /// Frame size as loaded.
    pub original_size: [u32; 2],
    /// Frame size after optional downscaling; the oracles see this.
    pub image_size: [u32; 2],
    pub spot_count: usize,
    pub initial_fd: Detection,
    /// `None` when the recognizer returned no match.
    pub initial_fr: Option<Detection>,
    /// FD box clamped to the image; the search crop.
    pub face: Rect,
    /// Spot size after rescaling to this face.
    pub spot_size: [u32; 2],
    pub exclusions: Vec<Rect>,
    pub search: SearchOutcome,
    /// Best placement in full-image coordinates.
    pub recommendation: Placement,
    pub outputs: ViewOutputs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjusted_input: Option<String>,
    /// Phase 2; `None` until scored, and also when the detector finds no face.
    #[serde(default)]
    pub final_fd: Option<Detection>,
    #[serde(default)]
    pub final_fr: Option<Detection>,
    #[serde(default)]
    pub scored: bool,
}

/// Wall-clock data; excluded when comparing records.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix_ms: u64,
    pub phase1_finished_unix_ms: u64,
    #[serde(default)]
    pub phase2_finished_unix_ms: Option<u64>,
    pub search_seconds: BTreeMap<View, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub version: u32,
    pub config: CampaignConfig,
    pub views: Vec<ViewResult>,
    pub timing: Timing,
}

impl CampaignResult {
    pub fn view(&self, view: View) -> Option<&ViewResult> {
        self.views.iter().find(|v| v.view == view)
    }

    pub fn is_complete(&self) -> bool {
        self.views.len() == 3 && self.views.iter().all(|v| v.scored)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("campaign records serialize");
        s.push('\n');
        s
    }

    /// The record as JSON with `timing` removed, for reproducibility checks.
    pub fn comparable_json(&self) -> String {
        comparable(&self.to_json())
    }

    pub fn save(&self, out_dir: &Path) -> Result<PathBuf, PipelineError> {
        let path = out_dir.join(RECORD_FILE);
        std::fs::write(&path, self.to_json()).map_err(io_err(&path))?;
        Ok(path)
    }

    pub fn load(out_dir: &Path) -> Result<Self, PipelineError> {
        let path = out_dir.join(RECORD_FILE);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(PipelineError::Phase1Incomplete(format!("{} not found", path.display())))
            }
            Err(e) => return Err(io_err(&path)(e)),
        };
        serde_json::from_str(&text)
            .map_err(|e| PipelineError::Phase1Incomplete(format!("{} is not a campaign record: {e}", path.display())))
    }
}

/// Strips the `timing` member from a serialized record.
pub fn comparable(record_json: &str) -> String {
    let mut v: serde_json::Value = serde_json::from_str(record_json).expect("record is JSON");
    if let Some(obj) = v.as_object_mut() {
        obj.remove("timing");
    }
    serde_json::to_string_pretty(&v).expect("JSON value serializes")
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Files written during one phase; removed again if the phase aborts.
struct Written {
    files: Vec<PathBuf>,
    committed: bool,
}

impl Written {
    fn new() -> Self {
        Written {
            files: Vec::new(),
            committed: false,
        }
    }

    fn save(&mut self, image: &ImageRaster, dir: &Path, name: &str) -> Result<(), PipelineError> {
        let path = dir.join(name);
        image.save_png(&path)?;
        info!("saved {}", path.display());
        self.files.push(path);
        Ok(())
    }
}

impl Drop for Written {
    fn drop(&mut self) {
        if !self.committed {
            for f in &self.files {
                let _ = std::fs::remove_file(f);
            }
        }
    }
}

fn prepare_image(image: &ImageRaster, downscale: Option<[u32; 2]>) -> Result<ImageRaster, PipelineError> {
    match downscale {
        Some([w, h]) => Ok(raster::downscale(image, w, h)?),
        None => Ok(image.clone()),
    }
}

fn fd_image(image: &ImageRaster, det: &Detection) -> ImageRaster {
    let mut out = image.clone();
    annotate::annotate_detection(&mut out, &det.rect, &annotate::confidence_caption(det.confidence));
    out
}

fn fr_image(image: &ImageRaster, det: Option<&Detection>) -> ImageRaster {
    let mut out = image.clone();
    match det {
        Some(d) => {
            let caption = match &d.label {
                Some(label) => format!("{label} ({:.2}%)", d.confidence * 100.0),
                None => annotate::confidence_caption(d.confidence),
            };
            annotate::annotate_detection(&mut out, &d.rect, &caption);
        }
        None => annotate::draw_text(&mut out, [4, 4], "No match", 2, annotate::BOX_COLOUR),
    }
    out
}

fn query(oracle: &dyn Oracle, image: &ImageRaster, view: View) -> Result<Vec<Detection>, PipelineError> {
    oracle
        .query(image, &[])
        .map_err(|source| PipelineError::Oracle { view, source })
}

fn best_of(dets: &[Detection], view: View) -> Option<Detection> {
    best_face(dets, view.key()).ok().cloned()
}

/// Phase 1: score, search and write the recommendation images and record.
pub fn phase1_recommend(
    views: &ViewSet,
    fd: &dyn Oracle,
    fr: &dyn Oracle,
    spot: &SpotModel,
    config: &CampaignConfig,
    out_dir: &Path,
) -> Result<CampaignResult, PipelineError> {
    config.search.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let started = now_ms();
    let mut written = Written::new();
    let mut results = Vec::with_capacity(3);
    let mut search_seconds = BTreeMap::new();

    for view in View::ALL {
        let input = views.get(view);
        if input.spot_count == 0 {
            return Err(PipelineError::Config(format!("{view} view needs at least one spot")));
        }
        let image = prepare_image(&input.image, config.downscale)?;

        let fr_initial = best_of(&query(fr, &image, view)?, view);
        let fd_dets = query(fd, &image, view)?;
        let fd_initial = best_face(&fd_dets, view.key())
            .map_err(|_| PipelineError::NoFace { view })?
            .clone();
        let face = fd_initial
            .face_box(image.width(), image.height())
            .ok_or(PipelineError::NoFace { view })?;

        let crop = raster::crop(&image, &face.rect)?;
        let scaled = rescale_spot(spot, &face);
        let mut search_config = config.search.clone();
        search_config.spot_count = input.spot_count;
        if config.exclude_eyes {
            search_config.exclusions.extend(eye_exclusion_preset(crop.dims()));
        }
        info!("{view}: face {} crop {}x{}, spot {:?}", face.rect, crop.width(), crop.height(), scaled.dims());
        let outcome = search::search(&crop, &scaled, fd, &search_config)
            .map_err(|source| PipelineError::Search { view, source })?;
        search_seconds.insert(view, outcome.elapsed.as_secs_f64());

        let recommendation = outcome.best_placement.translated(face.rect.x1, face.rect.y1);
        let mut lpo = apply_placement(&image, scaled.raster(), &recommendation);
        annotate::annotate_detection(
            &mut lpo,
            &face.rect,
            &format!("LPO {}", annotate::confidence_caption(outcome.best_confidence)),
        );

        let outputs = ViewOutputs {
            initial_fd: output_name(view, Artifact::InitialFd),
            initial_fr: output_name(view, Artifact::InitialFr),
            lpo: output_name(view, Artifact::Lpo),
            final_fd: None,
            final_fr: None,
        };
        written.save(&fd_image(&image, &fd_initial), out_dir, &outputs.initial_fd)?;
        written.save(&fr_image(&image, fr_initial.as_ref()), out_dir, &outputs.initial_fr)?;
        written.save(&lpo, out_dir, &outputs.lpo)?;

        results.push(ViewResult {
            view,
            input: input.path.display().to_string(),
            original_size: input.image.dims(),
            image_size: image.dims(),
            spot_count: input.spot_count,
            initial_fd: fd_initial,
            initial_fr: fr_initial,
            face: face.rect,
            spot_size: scaled.dims(),
            exclusions: search_config.exclusions,
            search: outcome,
            recommendation,
            outputs,
            adjusted_input: None,
            final_fd: None,
            final_fr: None,
            scored: false,
        });
    }

    let result = CampaignResult {
        version: RECORD_VERSION,
        config: config.clone(),
        views: results,
        timing: Timing {
            started_unix_ms: started,
            phase1_finished_unix_ms: now_ms(),
            phase2_finished_unix_ms: None,
            search_seconds,
        },
    };
    result.save(out_dir)?;
    written.committed = true;
    Ok(result)
}

/// Reads three adjusted-photo paths, one per line, front/left/right.
/// Relative paths resolve against the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<[PathBuf; 3], PipelineError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut found = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let line_no = i + 1;
        if found.len() == 3 {
            return Err(PipelineError::Manifest {
                path: path.to_path_buf(),
                line: line_no,
                message: "more than three image paths".into(),
            });
        }
        let p = base.join(line);
        if let Err(e) = std::fs::File::open(&p) {
            return Err(PipelineError::Manifest {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("cannot read {}: {e}", p.display()),
            });
        }
        found.push(p);
    }
    let n = found.len();
    found.try_into().map_err(|_| PipelineError::Manifest {
        path: path.to_path_buf(),
        line: text.lines().count(),
        message: format!("expected three image paths, found {n}"),
    })
}

pub fn prompt_for(view: View) -> String {
    format!("Type path to Adjusted {} Image here: ", view.key().to_uppercase())
}

/// Asks for the three adjusted photos, re-prompting until each is readable.
pub fn prompt_adjusted(input: &mut dyn BufRead, output: &mut dyn Write) -> Result<[PathBuf; 3], PipelineError> {
    let console = Path::new("<stdin>");
    writeln!(output, "Images have been saved to the output folder").map_err(io_err(console))?;
    writeln!(output, "-----").map_err(io_err(console))?;
    writeln!(output, "Please reproduce the recommended spots. Take a photo of each view and save it.")
        .map_err(io_err(console))?;
    writeln!(output, "-----").map_err(io_err(console))?;
    let mut paths = Vec::with_capacity(3);
    for view in View::ALL {
        loop {
            write!(output, "{}", prompt_for(view)).map_err(io_err(console))?;
            output.flush().map_err(io_err(console))?;
            let mut line = String::new();
            if input.read_line(&mut line).map_err(io_err(console))? == 0 {
                return Err(PipelineError::Io {
                    path: console.to_path_buf(),
                    source: std::io::ErrorKind::UnexpectedEof.into(),
                });
            }
            let p = PathBuf::from(line.trim());
            match std::fs::File::open(&p) {
                Ok(_) if !line.trim().is_empty() => {
                    paths.push(p);
                    break;
                }
                Ok(_) => writeln!(output, "Please enter a path.").map_err(io_err(console))?,
                Err(e) => writeln!(output, "Cannot read {}: {e}", p.display()).map_err(io_err(console))?,
            }
        }
    }
    Ok(paths.try_into().expect("three views"))
}

pub enum AdjustedSource<'a> {
    Manifest(&'a Path),
    Interactive {
        input: &'a mut dyn BufRead,
        output: &'a mut dyn Write,
    },
}

pub fn await_adjusted_images(source: AdjustedSource<'_>) -> Result<[PathBuf; 3], PipelineError> {
    match source {
        AdjustedSource::Manifest(p) => read_manifest(p),
        AdjustedSource::Interactive { input, output } => prompt_adjusted(input, output),
    }
}

/// Phase 2: score the adjusted photos and complete the record.
pub fn phase2_score(
    partial: &CampaignResult,
    adjusted: &[PathBuf; 3],
    fd: &dyn Oracle,
    fr: &dyn Oracle,
    out_dir: &Path,
) -> Result<CampaignResult, PipelineError> {
    if partial.views.len() != 3 {
        return Err(PipelineError::Phase1Incomplete(format!(
            "record has {} views, expected 3",
            partial.views.len()
        )));
    }
    for v in &partial.views {
        for name in [&v.outputs.initial_fd, &v.outputs.initial_fr, &v.outputs.lpo] {
            if !out_dir.join(name).is_file() {
                return Err(PipelineError::Phase1Incomplete(format!("{name} is missing")));
            }
        }
    }

    let mut result = partial.clone();
    let mut written = Written::new();
    for (view_result, path) in result.views.iter_mut().zip(adjusted) {
        let view = view_result.view;
        let image = prepare_image(&raster::load_image(path)?, partial.config.downscale)?;

        let fd_dets = query(fd, &image, view)?;
        let fr_dets = query(fr, &image, view)?;
        let final_fd = best_of(&fd_dets, view);
        let final_fr = best_of(&fr_dets, view);

        let fd_name = output_name(view, Artifact::FinalFd);
        let fr_name = output_name(view, Artifact::FinalFr);
        let fd_out = match &final_fd {
            Some(d) => fd_image(&image, d),
            None => {
                let mut img = image.clone();
                annotate::draw_text(&mut img, [4, 4], "No face", 2, annotate::BOX_COLOUR);
                img
            }
        };
        written.save(&fd_out, out_dir, &fd_name)?;
        written.save(&fr_image(&image, final_fr.as_ref()), out_dir, &fr_name)?;

        info!(
            "{view}: final FD {:.4}, final FR {:.4}",
            confidence_of(&fd_dets),
            confidence_of(&fr_dets)
        );
        view_result.adjusted_input = Some(path.display().to_string());
        view_result.final_fd = final_fd;
        view_result.final_fr = final_fr;
        view_result.outputs.final_fd = Some(fd_name);
        view_result.outputs.final_fr = Some(fr_name);
        view_result.scored = true;
    }
    result.timing.phase2_finished_unix_ms = Some(now_ms());
    result.save(out_dir)?;
    written.committed = true;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_names() {
        assert_eq!(output_name(View::Front, Artifact::InitialFd), "front_Initial_FD.png");
        assert_eq!(output_name(View::Left, Artifact::Lpo), "left_LPO.png");
        assert_eq!(output_name(View::Right, Artifact::FinalFr), "right_Final_FR.png");
        assert_eq!(expected_outputs(false).len(), 10);
        assert_eq!(expected_outputs(true).len(), 16);
    }

    #[test]
    fn prompts_follow_view_order() {
        let dir = tempfile::tempdir().unwrap();
        let mut lines = String::new();
        for v in View::ALL {
            let p = dir.path().join(format!("{v}.png"));
            std::fs::write(&p, b"x").unwrap();
            lines.push_str(&format!("{}\n", p.display()));
        }
        let mut out = Vec::new();
        let got = prompt_adjusted(&mut lines.as_bytes(), &mut out).unwrap();
        assert!(got[2].ends_with("right.png"));
        let text = String::from_utf8(out).unwrap();
        let f = text.find("Adjusted FRONT").unwrap();
        let l = text.find("Adjusted LEFT").unwrap();
        let r = text.find("Adjusted RIGHT").unwrap();
        assert!(f < l && l < r);
    }

    #[test]
    fn unreadable_path_reprompts() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("ok.png");
        std::fs::write(&good, b"x").unwrap();
        let input = format!("/nonexistent/a.png\n{0}\n{0}\n{0}\n", good.display());
        let mut out = Vec::new();
        prompt_adjusted(&mut input.as_bytes(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.matches("Adjusted FRONT").count(), 2);
        assert!(text.contains("Cannot read /nonexistent/a.png"));

        let mut out = Vec::new();
        assert!(prompt_adjusted(&mut "".as_bytes(), &mut out).is_err());
    }

    #[test]
    fn manifest_paths_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        for n in ["f.png", "l.png", "r.png"] {
            std::fs::write(dir.path().join(n), b"x").unwrap();
        }
        let m = dir.path().join("manifest.txt");
        std::fs::write(&m, "f.png\nl.png\nr.png\n").unwrap();
        let got = read_manifest(&m).unwrap();
        assert_eq!(got, [dir.path().join("f.png"), dir.path().join("l.png"), dir.path().join("r.png")]);

        std::fs::write(&m, "f.png\nmissing.png\nr.png\n").unwrap();
        match read_manifest(&m) {
            Err(PipelineError::Manifest { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        std::fs::write(&m, "f.png\nl.png\n").unwrap();
        assert!(matches!(read_manifest(&m), Err(PipelineError::Manifest { .. })));
    }

    #[test]
    fn missing_record_is_phase1_incomplete() {
        let dir = tempfile::tempdir().unwrap();
        let err = CampaignResult::load(dir.path()).unwrap_err();
        assert!(err.to_string().starts_with("phase 1 incomplete"), "{err}");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(PipelineError::NoFace { view: View::Left }.exit_code(), 2);
        let oracle = PipelineError::Search {
            view: View::Front,
            source: SearchError::Oracle {
                index: 3,
                source: OracleError::Timeout(std::time::Duration::from_secs(1)),
            },
        };
        assert_eq!(oracle.exit_code(), 3);
        assert_eq!(PipelineError::Config("x".into()).exit_code(), 4);
    }
}
