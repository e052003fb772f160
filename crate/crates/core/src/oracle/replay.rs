//! Rule-table oracle server for fixtures and golden runs.
//!
//! A [`ReplayTable`] maps coarse image features (dimensions, probe pixels) to
//! canned detections. [`serve`] answers protocol requests from the table, so
//! recorded detector behaviour can be replayed through the real subprocess
//! client.
//!
//! ```json
//! {"kind":"fd",
//!  "rules":[{"width":1088,"height":720,
//!            "probes":[{"x":4,"y":4,"rgb":[40,60,90]}],
//!            "detections":[{"box":[428,189,652,584],"confidence":0.9993}]}],
//!  "default":[]}
//! ```

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::protocol::{self, DetectionsResponse, ErrorResponse, Hello, Response, ScoreRequest, WireDetection};
use super::OracleRole;
use crate::raster::ImageRaster;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("protocol-fatal: {0}")]
    Fatal(String),
    #[error("invalid replay table: {0}")]
    Table(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub x: u32,
    pub y: u32,
    pub rgb: [u8; 3],
    #[serde(default)]
    pub tolerance: u8,
}

impl Probe {
    fn matches(&self, image: &ImageRaster) -> bool {
        if self.x >= image.width() || self.y >= image.height() {
            return false;
        }
        let p = image.pixel(self.x, self.y);
        (0..3).all(|c| p[c].abs_diff(self.rgb[c]) <= self.tolerance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<Probe>,
    pub detections: Vec<WireDetection>,
}

impl ReplayRule {
    pub fn matches(&self, image: &ImageRaster) -> bool {
        self.width.is_none_or(|w| w == image.width())
            && self.height.is_none_or(|h| h == image.height())
            && self.probes.iter().all(|p| p.matches(image))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayTable {
    pub kind: OracleRole,
    pub rules: Vec<ReplayRule>,
    /// Answer when no rule matches; absent means an error response.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<Vec<WireDetection>>,
}

impl ReplayTable {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ServeError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let table: ReplayTable =
            serde_json::from_str(&text).map_err(|e| ServeError::Table(format!("{}: {e}", path.display())))?;
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<(), ServeError> {
        let all = self
            .rules
            .iter()
            .flat_map(|r| r.detections.iter())
            .chain(self.default.iter().flatten());
        for d in all {
            d.validate().map_err(ServeError::Table)?;
        }
        Ok(())
    }

    /// First matching rule's detections.
    pub fn answer(&self, image: &ImageRaster) -> Option<&[WireDetection]> {
        self.rules
            .iter()
            .find(|r| r.matches(image))
            .map(|r| r.detections.as_slice())
            .or(self.default.as_deref())
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct ServeStats {
    pub answered: u64,
    pub errors: u64,
}

fn write_line(out: &mut impl Write, line: &str) -> std::io::Result<()> {
    out.write_all(line.as_bytes())?;
    out.write_all(b"\n")?;
    out.flush()
}

/// Serves the protocol until end of input.
///
/// Malformed requests get an error response when their id can be recovered;
/// otherwise the server writes a fatal error line and returns `Err`.
pub fn serve(table: &ReplayTable, input: impl BufRead, mut output: impl Write) -> Result<ServeStats, ServeError> {
    let mut lines = input.lines();
    let mut stats = ServeStats::default();

    let first = match lines.next() {
        Some(line) => line?,
        None => return Ok(stats),
    };
    match serde_json::from_str::<Hello>(first.trim_end()) {
        Ok(h) if h.hello.protocol == protocol::PROTOCOL_VERSION => {
            write_line(&mut output, &protocol::encode_line(&Hello::server(table.kind)))?;
        }
        _ => {
            let msg = format!("expected handshake, got {:?}", first.trim_end());
            write_line(&mut output, &serde_json::json!({ "error": msg }).to_string())?;
            return Err(ServeError::Fatal(msg));
        }
    }

    let mut last_id = 0u64;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = match serde_json::from_str(line.trim_end()) {
            Ok(v) => v,
            Err(e) => {
                let msg = format!("malformed request: {e}");
                write_line(&mut output, &serde_json::json!({ "error": msg }).to_string())?;
                return Err(ServeError::Fatal(msg));
            }
        };
        let Some(id) = value.get("id").and_then(Value::as_u64) else {
            let msg = "request without a numeric id".to_string();
            write_line(&mut output, &serde_json::json!({ "error": msg }).to_string())?;
            return Err(ServeError::Fatal(msg));
        };
        let response = respond(table, id, last_id, value);
        last_id = last_id.max(id);
        match &response {
            Response::Detections(_) => stats.answered += 1,
            Response::Error(_) => stats.errors += 1,
        }
        write_line(&mut output, &response.encode())?;
    }
    Ok(stats)
}

fn respond(table: &ReplayTable, id: u64, last_id: u64, value: Value) -> Response {
    let error = |error: String| Response::Error(ErrorResponse { id, error });
    if id <= last_id {
        return error(format!("id {id} does not increase past {last_id}"));
    }
    let request: ScoreRequest = match serde_json::from_value(value) {
        Ok(r) => r,
        Err(e) => return error(format!("malformed request: {e}")),
    };
    let image = match request.decode_image() {
        Ok(i) => i,
        Err(e) => return error(e),
    };
    match table.answer(&image) {
        Some(dets) => Response::Detections(DetectionsResponse {
            id,
            detections: dets.to_vec(),
        }),
        None => error(format!(
            "no replay rule matches a {}x{} image",
            image.width(),
            image.height()
        )),
    }
}

/// First line at which a transcript and the replayed server disagree.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("transcript line {line}: {message}")]
pub struct TranscriptMismatch {
    /// 1-based line number within the transcript.
    pub line: usize,
    pub message: String,
}

/// Checks a recorded exchange against `table`.
///
/// Transcript lines alternate client, server, client, server, starting with
/// the handshake; blank lines are ignored. Every request must be well formed,
/// every server line a valid response to the preceding request, and replaying the client
/// lines through [`serve`] must reproduce the server lines byte for byte.
/// Returns the number of exchanges after the handshake.
pub fn check_transcript(table: &ReplayTable, transcript: &str) -> Result<usize, TranscriptMismatch> {
    let lines: Vec<(usize, &str)> = transcript
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
        .collect();
    let mismatch = |line: usize, message: String| TranscriptMismatch { line, message };
    if lines.len() < 2 || !lines.len().is_multiple_of(2) {
        let at = lines.last().map_or(1, |l| l.0);
        return Err(mismatch(at, "transcript must alternate request and response lines".into()));
    }
    let pairs: Vec<_> = lines.chunks(2).map(|c| (c[0], c[1])).collect();

    let (_, (hello_line, hello)) = pairs[0];
    protocol::check_server_hello(hello, Some(table.kind)).map_err(|e| mismatch(hello_line, e.to_string()))?;
    for ((req_line, req), (resp_line, resp)) in &pairs[1..] {
        let request: ScoreRequest =
            serde_json::from_str(req).map_err(|e| mismatch(*req_line, format!("malformed request: {e}")))?;
        request.decode_image().map_err(|e| mismatch(*req_line, e))?;
        let id = request.id;
        match Response::decode(resp) {
            Ok(r) => match r.into_detections(id) {
                Ok(_) | Err(super::OracleError::Remote { .. }) => {}
                Err(e) => return Err(mismatch(*resp_line, e.to_string())),
            },
            Err(e) => return Err(mismatch(*resp_line, e.to_string())),
        }
    }

    let input: String = pairs.iter().map(|((_, req), _)| format!("{req}\n")).collect();
    let mut out = Vec::new();
    // a fatal stop shows up below as a missing or different line
    let _ = serve(table, input.as_bytes(), &mut out);
    let produced = String::from_utf8_lossy(&out);
    let mut produced = produced.lines();
    for (_, (resp_line, resp)) in &pairs {
        match produced.next() {
            Some(got) if got == *resp => {}
            Some(got) => return Err(mismatch(*resp_line, format!("server answered {got}"))),
            None => return Err(mismatch(*resp_line, "server stopped answering".into())),
        }
    }
    Ok(pairs.len() - 1)
}
