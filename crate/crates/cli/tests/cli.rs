//! End-to-end CLI checks: project lifecycle on disk, simulation outputs,
//! evaluation, replay verification and the webhook host.

use std::fs;
use std::io::{Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_crowdnorm"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_ok(output: &Output) -> String {
    assert!(
        output.status.success(),
        "command failed: {}\n{}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8_lossy(&output.stdout).into_owned()
}

const SIM_CONFIG: &str = r#"
seed = 77
steps = 400

[[agents]]
name = "careful"
vote_accuracy = 0.95
candidate_noise = 0.2

[[agents]]
name = "average"
vote_accuracy = 0.8
candidate_noise = 0.6

[[agents]]
name = "sloppy"
vote_accuracy = 0.6
candidate_noise = 1.0

[[agents]]
name = "fourth"
vote_accuracy = 0.85
candidate_noise = 0.4

[ground_truth]
"slm chetori" = "salam chetori ?"
"frd miam" = "farda miayam ."
"mrsi az lotfet" = "mersi az lotfet ."
"chera nayoomadi" = "chera nayamadi ?"
"bbin mano" = "bebin man ra ."
"khyli khoobe" = "kheyli khoob ast ."
"#;

fn write_refs(dir: &Path, sim_dir: &Path) -> std::path::PathBuf {
    // References = the ground truth, keyed by informal text.
    let export = fs::read_to_string(sim_dir.join("export_rank1.tsv")).unwrap();
    let mut refs = String::new();
    for pair in [
        ("slm chetori", "salam chetori ?"),
        ("frd miam", "farda miayam ."),
        ("mrsi az lotfet", "mersi az lotfet ."),
        ("chera nayoomadi", "chera nayamadi ?"),
        ("bbin mano", "bebin man ra ."),
        ("khyli khoobe", "kheyli khoob ast ."),
    ] {
        refs.push_str(&format!("{}\t{}\n", pair.0, pair.1));
    }
    let _ = export;
    let path = dir.join("refs.tsv");
    fs::write(&path, refs).unwrap();
    path
}

#[test]
fn project_lifecycle_on_disk() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("proj");
    let dir_s = dir.to_str().unwrap();

    assert_ok(&run(&["init", "--dir", dir_s]));
    assert!(dir.join("config.toml").exists());
    assert!(dir.join("events.log").exists());

    // Re-init refuses to clobber.
    assert!(!run(&["init", "--dir", dir_s]).status.success());

    let sentences = tmp.path().join("sentences.txt");
    fs::write(&sentences, "slm chetori\nfrd miam\n\nslm  chetori\n").unwrap();
    let out = assert_ok(&run(&["import", "--dir", dir_s, sentences.to_str().unwrap()]));
    assert!(out.contains("imported 2 tasks"), "{out}");
    assert!(out.contains("1 duplicates skipped"), "{out}");

    let out = assert_ok(&run(&["replay-check", "--dir", dir_s]));
    assert!(out.contains("ok: "), "{out}");
    assert!(out.contains("2 tasks"), "{out}");

    let out = assert_ok(&run(&["stats", "--dir", dir_s, "--json"]));
    let stats: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(stats["task_count"], 2);

    // A corrupted log is rejected with the offending seq.
    let log_path = dir.join("events.log");
    let content = fs::read_to_string(&log_path).unwrap();
    let mut lines: Vec<&str> = content.lines().collect();
    lines.remove(1);
    fs::write(&log_path, lines.join("\n")).unwrap();
    let failed = run(&["replay-check", "--dir", dir_s]);
    assert!(!failed.status.success());
    let err = String::from_utf8_lossy(&failed.stderr);
    assert!(err.contains("corrupt log at seq 3"), "{err}");
}

#[test]
fn simulate_then_inspect_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("sim.toml");
    fs::write(&config, SIM_CONFIG).unwrap();
    let out_dir = tmp.path().join("run");
    let out_s = out_dir.to_str().unwrap();

    let stdout = assert_ok(&run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_s,
    ]));
    assert!(stdout.contains("simulation done"), "{stdout}");

    for file in [
        "report.json",
        "events.log",
        "config.toml",
        "export_rank1.tsv",
        "series/candidates_per_task.tsv",
        "series/vote_shares.tsv",
        "series/latencies.tsv",
        "series/bleu_by_rank.tsv",
        "series/quality_by_labels.tsv",
    ] {
        assert!(out_dir.join(file).exists(), "missing {file}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 77);
    assert!(report["stats"]["total_candidates"].as_u64().unwrap() > 0);

    // Simulating again into a second directory gives byte-identical files.
    let out2 = tmp.path().join("run2");
    assert_ok(&run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out2.to_str().unwrap(),
    ]));
    for file in ["report.json", "events.log", "export_rank1.tsv"] {
        assert_eq!(
            fs::read(out_dir.join(file)).unwrap(),
            fs::read(out2.join(file)).unwrap(),
            "{file} differs between identical runs"
        );
    }

    // The sim output directory is a valid project for the other commands.
    assert_ok(&run(&["replay-check", "--dir", out_s]));
    let board = assert_ok(&run(&["leaderboard", "--dir", out_s, "--top", "3"]));
    assert!(board.contains("pts"), "{board}");

    let export = tmp.path().join("corpus.tsv");
    let stdout = assert_ok(&run(&[
        "export",
        "--dir",
        out_s,
        "--rank",
        "1",
        "--out",
        export.to_str().unwrap(),
    ]));
    assert!(stdout.contains("rows"), "{stdout}");
    let rows = fs::read_to_string(&export).unwrap();
    assert!(rows.lines().all(|l| l.split('\t').count() == 4));

    let refs = write_refs(tmp.path(), &out_dir);
    let stdout = assert_ok(&run(&[
        "eval",
        "--dir",
        out_s,
        "--refs",
        refs.to_str().unwrap(),
        "--weekly",
        "--weeks",
        "2",
    ]));
    assert!(stdout.contains("corpus BLEU"), "{stdout}");
    assert!(stdout.contains("week 1"), "{stdout}");
    assert!(stdout.contains("week 2"), "{stdout}");
}

#[test]
fn webhook_serve_replies_with_method_calls() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("proj");
    let dir_s = dir.to_str().unwrap();
    assert_ok(&run(&["init", "--dir", dir_s]));
    let sentences = tmp.path().join("sentences.txt");
    fs::write(&sentences, "slm chetori\nfrd miam\n").unwrap();
    assert_ok(&run(&["import", "--dir", dir_s, sentences.to_str().unwrap()]));

    let addr = "127.0.0.1:18099";
    let mut child = bin()
        .args([
            "serve",
            "--dir",
            dir_s,
            "--addr",
            addr,
            "--secret",
            "testsecret",
            "--max-requests",
            "2",
        ])
        .spawn()
        .expect("serve starts");

    // Wait for the listener to come up.
    let mut stream = None;
    for _ in 0..50 {
        match TcpStream::connect(addr) {
            Ok(s) => {
                stream = Some(s);
                break;
            }
            Err(_) => std::thread::sleep(std::time::Duration::from_millis(100)),
        }
    }
    let mut stream = stream.expect("server came up");

    let body = r#"{"update_id":1,"message":{"message_id":1,"from":{"id":5,"first_name":"Eve"},"chat":{"id":900},"text":"/start"}}"#;
    let request = format!(
        "POST /webhook/testsecret HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(request.as_bytes()).unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    assert!(response.contains("sendMessage"), "{response}");

    // Wrong secret gets a 404 (and does not count against max requests).
    let mut stream = TcpStream::connect(addr).unwrap();
    let request = format!(
        "POST /webhook/wrong HTTP/1.1\r\nHost: {addr}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(request.as_bytes()).unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    assert!(response.starts_with("HTTP/1.1 404"), "{response}");

    // Second valid update: a vote callback on a not-yet-existing candidate
    // still produces a single answer-callback reply.
    let body2 = r#"{"update_id":2,"callback_query":{"id":"cb1","from":{"id":5,"first_name":"Eve"},"message":{"message_id":2,"chat":{"id":900}},"data":"v+|1"}}"#;
    let mut stream = TcpStream::connect(addr).unwrap();
    let request = format!(
        "POST /webhook/testsecret HTTP/1.1\r\nHost: {addr}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body2}",
        body2.len()
    );
    stream.write_all(request.as_bytes()).unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    assert!(response.contains("answerCallbackQuery"), "{response}");

    // The remaining outbound actions landed in the outbox, and the accepted
    // update was persisted to the event log.
    child.wait().expect("serve exits after max requests");
    let outbox = fs::read_to_string(dir.join("outbox.jsonl")).unwrap_or_default();
    assert!(outbox.contains("sendMessage"), "outbox: {outbox}");
    let check = assert_ok(&run(&["replay-check", "--dir", dir_s]));
    assert!(check.contains("1 participants"), "{check}");
}
