//! Oracle client posting protocol lines to an HTTP endpoint.
//!
//! Each message is one POST whose body is a single protocol line; the
//! response body is the server's line.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use super::protocol::{self, Hello, Response, ScoreRequest};
use super::{Detection, OracleError, OracleRole};
use crate::raster::ImageRaster;

pub struct HttpClient {
    url: String,
    agent: ureq::Agent,
    timeout: Duration,
    role: OracleRole,
    next_id: AtomicU64,
}

impl HttpClient {
    pub fn connect(url: &str, role: Option<OracleRole>, timeout: Duration) -> Result<Self, OracleError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let reply = post(&agent, url, &protocol::encode_line(&Hello::client()), timeout)?;
        let declared = protocol::check_server_hello(&reply, role)?;
        Ok(HttpClient {
            url: url.to_string(),
            agent,
            timeout,
            role: declared,
            next_id: AtomicU64::new(1),
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn role(&self) -> OracleRole {
        self.role
    }

    pub fn query(&self, image: &ImageRaster) -> Result<Vec<Detection>, OracleError> {
        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        let body = protocol::encode_line(&ScoreRequest::from_image(id, image));
        let reply = post(&self.agent, &self.url, &body, self.timeout)?;
        Response::decode(&reply)?.into_detections(id)
    }
}

fn post(agent: &ureq::Agent, url: &str, body: &str, timeout: Duration) -> Result<String, OracleError> {
    let mut response = agent
        .post(url)
        .header("Content-Type", "application/json")
        .send(body.as_bytes())
        .map_err(|e| classify(e, timeout))?;
    let status = response.status().as_u16();
    let text = response
        .body_mut()
        .read_to_string()
        .map_err(|e| classify(e, timeout))?;
    match status {
        200..=299 => Ok(text),
        500..=599 => Err(OracleError::Transport {
            message: format!("HTTP {status} from {url}: {}", text.trim()),
            transient: true,
        }),
        _ => Err(OracleError::Transport {
            message: format!("HTTP {status} from {url}: {}", text.trim()),
            transient: false,
        }),
    }
}

fn classify(e: ureq::Error, timeout: Duration) -> OracleError {
    match e {
        ureq::Error::Timeout(_) => OracleError::Timeout(timeout),
        ureq::Error::Io(_) | ureq::Error::ConnectionFailed | ureq::Error::HostNotFound => OracleError::Transport {
            message: e.to_string(),
            transient: true,
        },
        ureq::Error::BadUri(_) => OracleError::Config(e.to_string()),
        other => OracleError::Transport {
            message: other.to_string(),
            transient: false,
        },
    }
}
