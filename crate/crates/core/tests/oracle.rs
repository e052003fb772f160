mod common;

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use common::lpo_bin;
use lpo::oracle::protocol::{encode_line, Hello, Response, ScoreRequest, DetectionsResponse};
use lpo::oracle::replay::{check_transcript, ReplayTable};
use lpo::oracle::{best_face, confidence_of, HttpClient, Oracle, OracleError, OracleHandle, OracleRole, OracleSpec, SubprocessClient};
use lpo::raster::{ImageRaster, Rect};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/transcripts").join(name)
}

fn table() -> ReplayTable {
    ReplayTable::load(fixture("replay_table.json")).unwrap()
}

fn transcript(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

fn replay_cmd() -> String {
    format!("{} replay-oracle --table {}", lpo_bin(), fixture("replay_table.json").display())
}

const SECOND: Duration = Duration::from_secs(10);

#[test]
fn golden_transcripts_replay_byte_exactly() {
    assert_eq!(check_transcript(&table(), &transcript("canned.ndjson")), Ok(3));
    assert_eq!(check_transcript(&table(), &transcript("front_fd.ndjson")), Ok(1));
}

#[test]
fn bad_transcripts_fail_at_the_offending_line() {
    let err = check_transcript(&table(), &transcript("malformed_request.ndjson")).unwrap_err();
    assert_eq!(err.line, 5, "{err}");
    let err = check_transcript(&table(), &transcript("confidence_out_of_range.ndjson")).unwrap_err();
    assert_eq!(err.line, 6, "{err}");
    assert!(err.message.contains("1.2"), "{err}");

    // a changed expectation is caught at its response line
    let edited = transcript("canned.ndjson").replace("\"confidence\":0.25", "\"confidence\":0.26");
    assert_eq!(check_transcript(&table(), &edited).unwrap_err().line, 4);
}

#[test]
fn front_transcript_response_decodes_to_the_recorded_face() {
    let text = transcript("front_fd.ndjson");
    let response = Response::decode(text.lines().nth(3).unwrap()).unwrap();
    let dets = response.into_detections(1).unwrap();
    let face = best_face(&dets, "front").unwrap();
    assert_eq!(face.rect, Rect::new(428, 189, 652, 584));
    assert_eq!(face.confidence, 0.9993);
}

#[test]
fn subprocess_client_talks_to_the_replay_server() {
    let client = SubprocessClient::spawn(&replay_cmd(), Some(OracleRole::Fd), SECOND).unwrap();
    assert_eq!(client.role(), OracleRole::Fd);
    let red = ImageRaster::filled(8, 8, [253, 1, 2, 255]);
    assert_eq!(confidence_of(&client.query(&red).unwrap()), 0.25);
    let blue = ImageRaster::filled(8, 8, [0, 0, 255, 255]);
    let dets = client.query(&blue).unwrap();
    assert_eq!(dets.len(), 2);
    assert_eq!(dets[0].label.as_deref(), Some("attacker"));
    assert_eq!(confidence_of(&dets), 0.75);
    let front = ImageRaster::filled(1088, 720, [40, 60, 90, 255]);
    assert_eq!(client.query(&front).unwrap()[0].confidence, 0.9993);
    // falls through to the empty default
    assert!(client.query(&ImageRaster::filled(3, 3, [0, 0, 0, 255])).unwrap().is_empty());
}

#[test]
fn handles_are_serial_for_subprocesses() {
    let spec: OracleSpec = format!("cmd:{}", replay_cmd()).parse().unwrap();
    let handle = OracleHandle::connect(&spec, OracleRole::Fd).unwrap();
    assert!(!handle.parallel_safe());
    let handle = handle.with_parallel_safe(true);
    assert!(!handle.parallel_safe());
}

#[test]
fn role_mismatch_is_a_protocol_error() {
    match SubprocessClient::spawn(&replay_cmd(), Some(OracleRole::Fr), SECOND) {
        Err(OracleError::Protocol(m)) => assert!(m.contains("kind fd, expected fr"), "{m}"),
        other => panic!("{:?}", other.err()),
    }
}

#[test]
fn silent_subprocess_times_out() {
    let cmd = r#"sh -c 'read line; echo "{\"hello\":{\"protocol\":1,\"kind\":\"fd\"}}"; sleep 5'"#;
    let client = SubprocessClient::spawn(cmd, Some(OracleRole::Fd), Duration::from_millis(200)).unwrap();
    let err = client.query(&ImageRaster::filled(2, 2, [0, 0, 0, 255])).unwrap_err();
    assert!(matches!(err, OracleError::Timeout(_)), "{err}");
    assert!(err.is_transient());
}

#[test]
fn subprocess_error_response_is_remote() {
    let cmd = r#"sh -c 'read l; echo "{\"hello\":{\"protocol\":1,\"kind\":\"fd\"}}"; read l; echo "{\"id\":1,\"error\":\"model crashed\"}"; sleep 1'"#;
    let client = SubprocessClient::spawn(cmd, Some(OracleRole::Fd), SECOND).unwrap();
    match client.query(&ImageRaster::filled(2, 2, [0, 0, 0, 255])) {
        Err(e @ OracleError::Remote { .. }) => {
            assert!(e.is_transient());
            assert!(e.to_string().contains("model crashed"));
        }
        other => panic!("{other:?}"),
    }
}

/// How the test HTTP server answers score requests.
#[derive(Clone, Copy)]
enum Mode {
    Table,
    Status(u16),
    Slow,
}

fn http_server(mode: Mode) -> (String, Arc<AtomicUsize>) {
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let url = format!("http://{}/score", server.server_addr().to_ip().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    let table = table();
    thread::spawn(move || {
        for mut request in server.incoming_requests() {
            counter.fetch_add(1, Ordering::SeqCst);
            let mut body = String::new();
            request.as_reader().read_to_string(&mut body).unwrap();
            let (status, reply) = if body.contains("\"hello\"") {
                (200, encode_line(&Hello::server(OracleRole::Fd)))
            } else {
                match mode {
                    Mode::Status(code) => (code, "unavailable".to_string()),
                    Mode::Slow => {
                        thread::sleep(Duration::from_millis(800));
                        (200, String::new())
                    }
                    Mode::Table => {
                        let req: ScoreRequest = serde_json::from_str(&body).unwrap();
                        let image = req.decode_image().unwrap();
                        let detections = table.answer(&image).unwrap().to_vec();
                        (200, Response::Detections(DetectionsResponse { id: req.id, detections }).encode())
                    }
                }
            };
            let _ = request.respond(tiny_http::Response::from_string(reply).with_status_code(status));
        }
    });
    (url, hits)
}

#[test]
fn http_client_round_trip() {
    let (url, hits) = http_server(Mode::Table);
    let client = HttpClient::connect(&url, Some(OracleRole::Fd), SECOND).unwrap();
    let red = ImageRaster::filled(8, 8, [255, 0, 0, 255]);
    assert_eq!(confidence_of(&client.query(&red).unwrap()), 0.25);
    assert_eq!(hits.load(Ordering::SeqCst), 2);

    let spec: OracleSpec = format!("http:{url}").parse().unwrap();
    let handle = OracleHandle::connect(&spec, OracleRole::Fd).unwrap().with_parallel_safe(true);
    assert!(handle.parallel_safe());
    assert_eq!(confidence_of(&handle.query(&red, &[]).unwrap()), 0.25);
}

#[test]
fn http_status_classes() {
    let (url, _) = http_server(Mode::Status(503));
    let client = HttpClient::connect(&url, Some(OracleRole::Fd), SECOND).unwrap();
    let err = client.query(&ImageRaster::filled(8, 8, [0, 0, 0, 255])).unwrap_err();
    assert!(matches!(err, OracleError::Transport { transient: true, .. }), "{err}");

    let (url, _) = http_server(Mode::Status(400));
    let client = HttpClient::connect(&url, Some(OracleRole::Fd), SECOND).unwrap();
    let err = client.query(&ImageRaster::filled(8, 8, [0, 0, 0, 255])).unwrap_err();
    assert!(matches!(err, OracleError::Transport { transient: false, .. }), "{err}");
    assert!(!err.is_transient());
}

#[test]
fn http_timeout() {
    let (url, _) = http_server(Mode::Slow);
    let client = HttpClient::connect(&url, Some(OracleRole::Fd), Duration::from_millis(200)).unwrap();
    let err = client.query(&ImageRaster::filled(8, 8, [0, 0, 0, 255])).unwrap_err();
    assert!(matches!(err, OracleError::Timeout(_)), "{err}");
}

#[test]
fn unreachable_http_endpoint_is_transient() {
    // bind then drop to find a closed port
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    match HttpClient::connect(&format!("http://127.0.0.1:{port}/"), None, SECOND) {
        Err(err) => assert!(err.is_transient(), "{err}"),
        Ok(_) => panic!("connected to a closed port"),
    }
}
