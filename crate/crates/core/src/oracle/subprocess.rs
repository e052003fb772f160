//! Oracle client speaking the line protocol over a child process's stdio.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use log::debug;

use super::protocol::{self, Hello, Response, ScoreRequest};
use super::{Detection, OracleError, OracleRole};
use crate::raster::ImageRaster;

struct Connection {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
}

/// Strictly serial: one request in flight at a time.
pub struct SubprocessClient {
    command: String,
    timeout: Duration,
    role: OracleRole,
    conn: Mutex<Connection>,
}

fn fatal(message: String) -> OracleError {
    OracleError::Transport {
        message,
        transient: false,
    }
}

impl SubprocessClient {
    /// Spawns `command_line` (split shell-style, no shell involved) and
    /// performs the handshake.
    pub fn spawn(command_line: &str, role: Option<OracleRole>, timeout: Duration) -> Result<Self, OracleError> {
        let argv = shlex::split(command_line)
            .filter(|v| !v.is_empty())
            .ok_or_else(|| OracleError::Config(format!("cannot parse command line {command_line:?}")))?;
        let mut child = Command::new(&argv[0])
            .args(&argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| OracleError::Config(format!("cannot start {:?}: {e}", argv[0])))?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout was piped");

        let (tx, rx) = mpsc::channel();
        thread::Builder::new()
            .name("oracle-stdout".into())
            .spawn(move || {
                let mut reader = BufReader::new(stdout);
                loop {
                    let mut line = String::new();
                    match reader.read_line(&mut line) {
                        Ok(0) => {
                            let _ = tx.send(Err(std::io::ErrorKind::UnexpectedEof.into()));
                            break;
                        }
                        Ok(_) => {
                            if tx.send(Ok(line)).is_err() {
                                break;
                            }
                        }
                        Err(e) => {
                            let _ = tx.send(Err(e));
                            break;
                        }
                    }
                }
            })
            .map_err(|e| fatal(format!("cannot start reader thread: {e}")))?;

        let mut conn = Connection {
            child,
            stdin,
            lines: rx,
            next_id: 1,
        };
        conn.send(&protocol::encode_line(&Hello::client()))?;
        let reply = conn.recv(timeout)?;
        let declared = protocol::check_server_hello(&reply, role)?;
        debug!("oracle {command_line:?} connected as {declared}");
        Ok(SubprocessClient {
            command: command_line.to_string(),
            timeout,
            role: declared,
            conn: Mutex::new(conn),
        })
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    pub fn role(&self) -> OracleRole {
        self.role
    }

    pub fn query(&self, image: &ImageRaster) -> Result<Vec<Detection>, OracleError> {
        let mut conn = self.conn.lock().unwrap_or_else(|p| p.into_inner());
        let id = conn.next_id;
        conn.next_id += 1;
        conn.send(&protocol::encode_line(&ScoreRequest::from_image(id, image)))?;

        let deadline = Instant::now() + self.timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            let line = conn.recv(left).map_err(|e| match e {
                OracleError::Timeout(_) => OracleError::Timeout(self.timeout),
                other => other,
            })?;
            let response = Response::decode(&line)?;
            // a reply to an earlier request that timed out
            if response.id() < id {
                debug!("discarding late response {}", response.id());
                continue;
            }
            return response.into_detections(id);
        }
    }
}

impl Connection {
    fn send(&mut self, line: &str) -> Result<(), OracleError> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| fatal("oracle stdin already closed".into()))?;
        stdin
            .write_all(line.as_bytes())
            .and_then(|_| stdin.write_all(b"\n"))
            .and_then(|_| stdin.flush())
            .map_err(|e| fatal(format!("write to oracle failed: {e}")))
    }

    fn recv(&mut self, timeout: Duration) -> Result<String, OracleError> {
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => {
                let status = self.child.try_wait().ok().flatten();
                Err(fatal(match status {
                    Some(s) => format!("oracle exited ({s}): {e}"),
                    None => format!("oracle stdout closed: {e}"),
                }))
            }
            Err(RecvTimeoutError::Timeout) => Err(OracleError::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(fatal("oracle stdout reader stopped".into())),
        }
    }
}

impl Drop for SubprocessClient {
    fn drop(&mut self) {
        let conn = self.conn.get_mut().unwrap_or_else(|p| p.into_inner());
        // closing stdin is the polite shutdown signal
        conn.stdin.take();
        let deadline = Instant::now() + Duration::from_millis(500);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = conn.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(10));
        }
        let _ = conn.child.kill();
        let _ = conn.child.wait();
    }
}
