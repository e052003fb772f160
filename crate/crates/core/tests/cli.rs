mod common;

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use common::{golden_run_args, lpo_bin, write_golden_inputs};
use lpo::raster::ImageRaster;

fn lpo(args: &[&str]) -> Output {
    Command::new(lpo_bin()).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_views(dir: &Path) -> [String; 3] {
    ["front", "left", "right"].map(|v| {
        let p = dir.join(format!("{v}.png"));
        ImageRaster::from_fn(64, 48, |x, y| [x as u8 * 3, y as u8 * 4, 120, 255])
            .save_png(&p)
            .unwrap();
        p.display().to_string()
    })
}

fn synthetic_run<'a>(views: &'a [String; 3], out: &'a str, manifest: &'a str) -> Vec<&'a str> {
    vec![
        "run",
        "--front",
        &views[0],
        "--left",
        &views[1],
        "--right",
        &views[2],
        "--pix-incr",
        "8",
        "--fd-oracle",
        "synthetic:gauss=30,20,6,0.4;baseline=0.95",
        "--fr-oracle",
        "synthetic:constant=0.5",
        "--out",
        out,
        "--spot-size",
        "8x8",
        "--spot-ref-width",
        "64",
        "--manifest",
        manifest,
    ]
}

#[test]
fn verify_tables_reports_rows_and_aggregates() {
    let o = lpo(&["verify-tables"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("PASS front test 1\n"));
    assert!(text.contains("KNOWN right test 1: FD direction printed ↓ recomputed ↑"));
    assert!(text.contains("diff_pct cells within 0.01: 57/60"));
    assert!(text.contains("PASS FR mean drop over successful trials: computed 28.53, claimed 28.53"));
    assert!(text.contains("KNOWN FD Right success rate: computed 50.00, claimed 40.00"));

    let fixture = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/tables.json");
    let o = lpo(&["verify-tables", "--fixtures", fixture]);
    assert!(o.status.success());

    let tmp = tempfile::tempdir().unwrap();
    let broken = tmp.path().join("t.json");
    let text = std::fs::read_to_string(fixture).unwrap().replacen("17.74", "17.94", 1);
    std::fs::write(&broken, text).unwrap();
    let o = lpo(&["verify-tables", "--fixtures", broken.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL front test 1"));
}

#[test]
fn run_then_report() {
    let tmp = tempfile::tempdir().unwrap();
    let views = small_views(tmp.path());
    let manifest = tmp.path().join("manifest.txt");
    std::fs::write(&manifest, views.join("\n")).unwrap();
    let records = tmp.path().join("records");
    for trial in ["t1", "t2"] {
        let out = records.join(trial);
        let mut args = synthetic_run(&views, out.to_str().unwrap(), manifest.to_str().unwrap());
        args.extend(["--env", "DH"]);
        let o = lpo(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("Pixel Increment Size: 8"));
    }
    let csv = tmp.path().join("table.csv");
    let o = lpo(&["report", "--records", records.to_str().unwrap(), "--format", "csv", "--out", csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 7);
    assert!(lines[0].starts_with("trial,fd_initial"));
    assert!(lines[1].starts_with("front-1,95.00,95.00,↓ 0.00,0.00,50.00,50.00"), "{}", lines[1]);
    assert!(lines[6].starts_with("right-2,"));
    assert!(lines[6].ends_with(",DH"));

    let md = tmp.path().join("table.md");
    let o = lpo(&["report", "--records", records.to_str().unwrap(), "--format", "md", "--out", md.to_str().unwrap()]);
    assert!(o.status.success());
    let parsed = lpo::report::parse_markdown(&std::fs::read_to_string(md).unwrap()).unwrap();
    assert_eq!(parsed.len(), 6);
}

#[test]
fn interactive_prompts_in_view_order() {
    let tmp = tempfile::tempdir().unwrap();
    let views = small_views(tmp.path());
    let out = tmp.path().join("out");
    let mut args = synthetic_run(&views, out.to_str().unwrap(), "unused");
    args.truncate(args.len() - 2);
    let mut child = Command::new(lpo_bin())
        .args(&args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let input = format!("/no/such/file.png\n{}\n", views.join("\n"));
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let prompts: Vec<usize> = ["FRONT", "LEFT", "RIGHT"]
        .iter()
        .map(|v| text.find(&format!("Type path to Adjusted {v} Image here: ")).unwrap())
        .collect();
    assert!(prompts[0] < prompts[1] && prompts[1] < prompts[2]);
    assert_eq!(text.matches("Type path to Adjusted FRONT Image here: ").count(), 2);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let views = small_views(tmp.path());
    let manifest = tmp.path().join("manifest.txt");
    std::fs::write(&manifest, views.join("\n")).unwrap();
    let out = tmp.path().join("out");
    let base = synthetic_run(&views, out.to_str().unwrap(), manifest.to_str().unwrap());

    // bad configuration
    let o = lpo(&["run", "--front", "x"]);
    assert_eq!(o.status.code(), Some(4));
    let mut args = base.clone();
    args[10] = "ftp:somewhere";
    assert_eq!(lpo(&args).status.code(), Some(4));
    let mut args = base.clone();
    args[8] = "0";
    assert_eq!(lpo(&args).status.code(), Some(4));

    // a command that cannot be started is misconfiguration
    let mut args = base.clone();
    args[10] = "cmd:/nonexistent/oracle-server --kind fd";
    assert_eq!(lpo(&args).status.code(), Some(4));

    // oracle failure: the server starts but never answers the handshake
    let mut args = base.clone();
    args[10] = "cmd:/bin/false";
    let o = lpo(&args);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    // no face: a replay detector with no rules and an empty default
    let table = tmp.path().join("empty.json");
    std::fs::write(&table, r#"{"kind":"fd","rules":[],"default":[]}"#).unwrap();
    let spec = format!("cmd:{} replay-oracle --table {}", lpo_bin(), table.display());
    let mut args = base.clone();
    args[10] = &spec;
    let o = lpo(&args);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("no face detected in front view"));

    // manifest naming a missing file
    let bad = tmp.path().join("bad.txt");
    std::fs::write(&bad, format!("{}\nmissing.png\n{}\n", views[0], views[2])).unwrap();
    let mut args = base.clone();
    let last = args.len() - 1;
    let bad_s = bad.display().to_string();
    args[last] = &bad_s;
    let o = lpo(&args);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    // phase 2 alone needs a phase 1 record
    let o = lpo(&["score", "--out", tmp.path().join("nothing").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("phase 1 incomplete"));
}

#[test]
fn golden_run_through_the_binary() {
    let tmp = tempfile::tempdir().unwrap();
    let inputs = write_golden_inputs(&tmp.path().join("in"));
    let out = tmp.path().join("out");
    let args = golden_run_args(&inputs, &out);
    let o = Command::new(lpo_bin()).args(&args).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("- Face Location: [428 189 652 584]"));
    assert!(text.contains("- Lightspot rescaled to: [182,86]"));
    assert!(text.contains("- Lowest Confidence Value LPO Front: [99.81]"));
    assert!(text.contains("Front: FD 99.93% -> 99.64%, FR 42.99% -> 47.89%"));

    // phase 2 again on its own, from the saved record
    let o = lpo(&["score", "--out", out.to_str().unwrap(), "--manifest", inputs.manifest.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("Left: FD 99.95% -> 99.75%, FR 24.28% -> 55.56%"));
}
