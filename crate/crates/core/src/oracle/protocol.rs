//! Oracle wire protocol: newline-delimited JSON.
//!
//! ```text
//! -> {"hello":{"protocol":1}}
//! <- {"hello":{"protocol":1,"kind":"fd"}}
//! -> {"id":1,"image_png_b64":"iVBORw0..."}
//! <- {"id":1,"detections":[{"box":[428,189,652,584],"confidence":0.9993}]}
//! <- {"id":2,"error":"inference failed"}
//! ```
//!
//! Confidences outside `[0, 1]` and inverted boxes are rejected here, so
//! nothing past the boundary ever sees them.

use base64::Engine;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use super::{Detection, OracleError, OracleRole};
use crate::raster::{ImageRaster, Rect};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hello {
    pub hello: HelloBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HelloBody {
    pub protocol: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<OracleRole>,
}

impl Hello {
    pub fn client() -> Self {
        Hello {
            hello: HelloBody {
                protocol: PROTOCOL_VERSION,
                kind: None,
            },
        }
    }

    pub fn server(kind: OracleRole) -> Self {
        Hello {
            hello: HelloBody {
                protocol: PROTOCOL_VERSION,
                kind: Some(kind),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub id: u64,
    pub image_png_b64: String,
}

impl ScoreRequest {
    pub fn from_image(id: u64, image: &ImageRaster) -> Self {
        ScoreRequest {
            id,
            image_png_b64: base64::engine::general_purpose::STANDARD.encode(image.encode_png()),
        }
    }

    pub fn decode_image(&self) -> Result<ImageRaster, String> {
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(self.image_png_b64.as_bytes())
            .map_err(|e| format!("bad base64: {e}"))?;
        match image::guess_format(&bytes) {
            Ok(image::ImageFormat::Png) => ImageRaster::decode(&bytes),
            _ => Err("payload is not a PNG".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireDetection {
    #[serde(rename = "box", deserialize_with = "integral_box")]
    pub bbox: [i64; 4],
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// Detectors often emit float coordinates; they are rounded to whole pixels.
fn integral_box<'de, D: Deserializer<'de>>(d: D) -> Result<[i64; 4], D::Error> {
    let raw: [serde_json::Number; 4] = Deserialize::deserialize(d)?;
    let mut out = [0i64; 4];
    for (slot, n) in out.iter_mut().zip(raw.iter()) {
        *slot = match n.as_i64() {
            Some(v) => v,
            None => {
                let f = n
                    .as_f64()
                    .filter(|f| f.is_finite())
                    .ok_or_else(|| serde::de::Error::custom(format!("box coordinate {n} is not finite")))?;
                f.round() as i64
            }
        };
    }
    Ok(out)
}

impl WireDetection {
    pub fn from_detection(d: &Detection) -> Self {
        WireDetection {
            bbox: d.rect.as_array().map(i64::from),
            confidence: d.confidence,
            label: d.label.clone(),
        }
    }

    /// Validates and converts to a [`Detection`].
    pub fn validate(&self) -> Result<Detection, String> {
        if !self.confidence.is_finite() || !(0.0..=1.0).contains(&self.confidence) {
            return Err(format!("confidence {} outside [0, 1]", self.confidence));
        }
        let mut coords = [0i32; 4];
        for (slot, v) in coords.iter_mut().zip(self.bbox) {
            *slot = i32::try_from(v).map_err(|_| format!("box coordinate {v} out of range"))?;
        }
        let rect = Rect::new(coords[0], coords[1], coords[2], coords[3]);
        if rect.is_empty() {
            return Err(format!("box {rect} has no area"));
        }
        Ok(Detection {
            rect,
            confidence: self.confidence,
            label: self.label.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionsResponse {
    pub id: u64,
    pub detections: Vec<WireDetection>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub id: u64,
    pub error: String,
}

/// Any single server line after the handshake.
#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    Detections(DetectionsResponse),
    Error(ErrorResponse),
}

impl Response {
    pub fn id(&self) -> u64 {
        match self {
            Response::Detections(r) => r.id,
            Response::Error(r) => r.id,
        }
    }

    pub fn encode(&self) -> String {
        match self {
            Response::Detections(r) => encode_line(r),
            Response::Error(r) => encode_line(r),
        }
    }

    /// Parses a response line. Structural problems are protocol violations;
    /// range checks happen in [`Response::into_detections`].
    pub fn decode(line: &str) -> Result<Self, OracleError> {
        let value: Value = serde_json::from_str(line.trim_end())
            .map_err(|e| OracleError::Protocol(format!("response is not JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| OracleError::Protocol("response is not a JSON object".into()))?;
        if obj.contains_key("detections") {
            serde_json::from_value(value)
                .map(Response::Detections)
                .map_err(|e| OracleError::Protocol(format!("malformed detections response: {e}")))
        } else if obj.contains_key("error") {
            serde_json::from_value(value)
                .map(Response::Error)
                .map_err(|e| OracleError::Protocol(format!("malformed error response: {e}")))
        } else {
            Err(OracleError::Protocol(
                "response has neither \"detections\" nor \"error\"".into(),
            ))
        }
    }

    /// Checks the id and converts to validated detections.
    pub fn into_detections(self, expected_id: u64) -> Result<Vec<Detection>, OracleError> {
        if self.id() != expected_id {
            return Err(OracleError::Protocol(format!(
                "response id {} does not match request id {expected_id}",
                self.id()
            )));
        }
        match self {
            Response::Error(e) => Err(OracleError::Remote {
                id: e.id,
                message: e.error,
            }),
            Response::Detections(r) => r
                .detections
                .iter()
                .map(|d| d.validate().map_err(OracleError::Protocol))
                .collect(),
        }
    }
}

pub fn encode_line<T: Serialize>(msg: &T) -> String {
    serde_json::to_string(msg).expect("protocol messages always serialize")
}

/// Validates a server handshake reply.
pub fn check_server_hello(line: &str, expected: Option<OracleRole>) -> Result<OracleRole, OracleError> {
    let hello: Hello = serde_json::from_str(line.trim_end())
        .map_err(|e| OracleError::Protocol(format!("bad handshake reply {:?}: {e}", line.trim_end())))?;
    if hello.hello.protocol != PROTOCOL_VERSION {
        return Err(OracleError::Protocol(format!(
            "server speaks protocol {}, expected {PROTOCOL_VERSION}",
            hello.hello.protocol
        )));
    }
    let kind = hello
        .hello
        .kind
        .ok_or_else(|| OracleError::Protocol("handshake reply lacks \"kind\"".into()))?;
    if let Some(want) = expected {
        if want != kind {
            return Err(OracleError::Protocol(format!(
                "oracle declares kind {kind}, expected {want}"
            )));
        }
    }
    Ok(kind)
}
