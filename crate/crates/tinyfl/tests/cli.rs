use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tinyfl::params_file::{read_params, write_params};
use tinyfl_core::codec::pb_decode;
use tinyfl_core::messages::{decode_local_model, MessageKind};

const ZERO_UUID: &str = "00000000000000000000000000000000";

fn tinyfl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tinyfl"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn ones(dir: &Path, n: usize) -> String {
    let path = dir.join(format!("ones{n}.txt"));
    fs::write(&path, "1.0\n".repeat(n)).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn encode_prints_size_and_frames() {
    let dir = tempfile::tempdir().unwrap();
    let o = tinyfl(&[
        "encode",
        "--kind",
        "dataset",
        "--codec",
        "cbor",
        "--profile",
        "compact",
        "--size",
        "1",
        "--train-loss",
        "1.0",
        "--val-loss",
        "1.0",
    ]);
    assert_eq!((o.status.code(), stdout(&o).as_str()), (Some(0), "8 1\n"));

    let four = ones(dir.path(), 4);
    let o = tinyfl(&[
        "encode",
        "--kind",
        "global",
        "--codec",
        "json",
        "--params",
        &four,
        "--round",
        "1",
        "--uuid",
        ZERO_UUID,
        "--continue",
    ]);
    assert_eq!((o.status.code(), stdout(&o).as_str()), (Some(0), "65 1\n"));

    let thousand = ones(dir.path(), 1000);
    let cases = [
        ("cbor", "compact", "2027 32\n"),
        ("cbor", "verbose", "9033 142\n"),
        ("pb", "compact", "4025 63\n"),
        ("json", "compact", "4049 64\n"),
    ];
    for (codec, profile, expected) in cases {
        let o = tinyfl(&[
            "encode",
            "--kind",
            "global",
            "--codec",
            codec,
            "--profile",
            profile,
            "--params",
            &thousand,
            "--round",
            "1",
            "--uuid",
            ZERO_UUID,
            "--continue",
        ]);
        assert_eq!(stdout(&o), expected, "{codec} {profile}");
    }
}

#[test]
fn encode_argument_errors() {
    let dir = tempfile::tempdir().unwrap();
    let four = ones(dir.path(), 4);
    let missing_uuid = tinyfl(&[
        "encode", "--kind", "global", "--params", &four, "--round", "1",
    ]);
    assert_eq!(missing_uuid.status.code(), Some(2));
    assert!(stderr(&missing_uuid).contains("--uuid"));
    let bad_uuid = tinyfl(&[
        "encode", "--kind", "global", "--params", &four, "--round", "1", "--uuid", "xyz",
    ]);
    assert_eq!(bad_uuid.status.code(), Some(2));
    let one_loss = tinyfl(&[
        "encode",
        "--kind",
        "dataset",
        "--size",
        "3",
        "--train-loss",
        "1",
    ]);
    assert_eq!(one_loss.status.code(), Some(2));
    let bad_codec = tinyfl(&[
        "encode", "--kind", "dataset", "--size", "3", "--codec", "xml",
    ]);
    assert_eq!(bad_codec.status.code(), Some(2));
    let missing = tinyfl(&[
        "encode",
        "--kind",
        "global",
        "--params",
        "/nonexistent/p.txt",
        "--round",
        "1",
        "--uuid",
        ZERO_UUID,
    ]);
    assert_eq!(missing.status.code(), Some(3));
    let garbage = dir.path().join("bad.txt");
    fs::write(&garbage, "1.0\nnope\n").unwrap();
    let o = tinyfl(&[
        "encode",
        "--kind",
        "global",
        "--params",
        garbage.to_str().unwrap(),
        "--round",
        "1",
        "--uuid",
        ZERO_UUID,
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains(":2:"));
}

#[test]
fn encoded_file_decodes_to_the_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("p.f32");
    write_params(&params, &[0.5, -0.25, 0.1]).unwrap();
    let out = dir.path().join("m.cbor");
    let o = tinyfl(&[
        "encode",
        "--kind",
        "local",
        "--params",
        params.to_str().unwrap(),
        "--round",
        "7",
        "--uuid",
        "01234567-89ab-cdef-0123-456789abcdef",
        "--train-loss",
        "0.5",
        "--val-loss",
        "0.75",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let bytes = fs::read(&out).unwrap();
    assert_eq!(stdout(&o), format!("{} 1\n", bytes.len()));
    let m = decode_local_model(&bytes).unwrap();
    assert_eq!(m.model_round, 7);
    assert_eq!(m.model_params.values, vec![0.5, -0.25, 0.1f32 as f64]);

    let d = tinyfl(&["decode", out.to_str().unwrap()]);
    assert_eq!(d.status.code(), Some(0));
    let text = stdout(&d);
    assert!(text.starts_with("message: FL_Local_Model_Update\n"));
    assert!(text.contains("fl-model-identifier: 01234567-89ab-cdef-0123-456789abcdef\n"));
    assert!(text.contains("fl-model-round: 7\n"));
    assert!(text.contains("fl-model-params: ta-float32le (3 values)"));
    assert!(text.contains("fl-local-model-val-loss: 0.75\n"));

    let diag = tinyfl(&["decode", "--diag", out.to_str().unwrap()]);
    assert!(stdout(&diag).starts_with("[37(h'0123456789abcdef0123456789abcdef'), 7, 85(h'"));
}

#[test]
fn protobuf_and_json_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let four = ones(dir.path(), 4);
    for (codec, ext) in [("pb", "pb"), ("json", "json")] {
        let out = dir.path().join(format!("g.{ext}"));
        let o = tinyfl(&[
            "encode",
            "--kind",
            "global",
            "--codec",
            codec,
            "--params",
            &four,
            "--round",
            "300",
            "--uuid",
            ZERO_UUID,
            "--output",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        let d = tinyfl(&[
            "decode",
            "--codec",
            codec,
            "--kind",
            "global",
            out.to_str().unwrap(),
        ]);
        assert_eq!(d.status.code(), Some(0), "{}", stderr(&d));
        assert!(stdout(&d).contains("fl-model-round: 300\n"));
        assert!(stdout(&d).contains("fl-continue-training: false\n"));
        if codec == "pb" {
            assert!(pb_decode(MessageKind::Global, &fs::read(&out).unwrap()).is_ok());
            let no_kind = tinyfl(&["decode", "--codec", "pb", out.to_str().unwrap()]);
            assert_eq!(no_kind.status.code(), Some(2));
        }
    }
}

#[test]
fn decode_errors_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.cbor");
    let four = ones(dir.path(), 4);
    tinyfl(&[
        "encode",
        "--kind",
        "global",
        "--params",
        &four,
        "--round",
        "1",
        "--uuid",
        ZERO_UUID,
        "--output",
        out.to_str().unwrap(),
    ]);
    let bytes = fs::read(&out).unwrap();

    let truncated = dir.path().join("t.cbor");
    fs::write(&truncated, &bytes[..bytes.len() - 3]).unwrap();
    let o = tinyfl(&["decode", truncated.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("truncated-input"));

    // binary32 typed array of 6 octets, not a whole number of elements
    let mut wrong = bytes.clone();
    let tag_at = 1 + 19 + 1;
    assert_eq!(&wrong[tag_at..tag_at + 3], &[0xD8, 0x54, 0x48]);
    wrong[tag_at + 1] = 0x55;
    wrong[tag_at + 2] = 0x46;
    wrong.remove(tag_at + 3);
    wrong.remove(tag_at + 3);
    let bad = dir.path().join("w.cbor");
    fs::write(&bad, &wrong).unwrap();
    let o = tinyfl(&["decode", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("fl-model-params"), "{}", stderr(&o));

    let o = tinyfl(&["decode", "/nonexistent/x.cbor"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn bench_tables_and_exit_codes() {
    let o = tinyfl(&["bench", "--table", "1", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    assert_eq!(
        csv.lines().next(),
        Some("message,model_size,codec,profile,bytes,frames")
    );
    assert_eq!(csv.lines().count(), 29);

    let o = tinyfl(&["bench", "--table", "2", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("177733") && text.contains("177748"));
    assert!(text.contains("CBOR/JSON = 177733/"));

    assert_eq!(tinyfl(&["bench", "--table", "3"]).status.code(), Some(2));
    assert_eq!(
        tinyfl(&["bench", "--table", "1", "--format", "xml"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn simulate_is_deterministic_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let args = [
        "simulate",
        "--clients",
        "4",
        "--rounds",
        "2",
        "--min-fraction",
        "0.5",
        "--params",
        "4",
        "--seed",
        "42",
    ];
    let run = |out: &Path| {
        let mut v: Vec<&str> = args.to_vec();
        v.extend(["--output", out.to_str().unwrap()]);
        tinyfl(&v)
    };
    let oa = run(&a);
    let ob = run(&b);
    assert_eq!(oa.status.code(), Some(0));
    assert_eq!(stdout(&oa), stdout(&ob));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let lines: Vec<String> = stdout(&oa).lines().map(String::from).collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("round 1: down ") && lines[0].contains(" selected 2 halted "));

    // replaying the report's config block reproduces it
    let c = dir.path().join("c.json");
    let oc = tinyfl(&[
        "simulate",
        "--config",
        a.to_str().unwrap(),
        "--output",
        c.to_str().unwrap(),
    ]);
    assert_eq!(oc.status.code(), Some(0));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&c).unwrap());

    let report: serde_json::Value = serde_json::from_slice(&fs::read(&a).unwrap()).unwrap();
    assert_eq!(report["format"], "tinyfl-simulation-report");
    assert_eq!(report["rounds"].as_array().unwrap().len(), 2);
    assert_eq!(report["config"]["num_clients"], 4);
}

#[test]
fn simulate_downlink_matches_table_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = tinyfl(&[
        "simulate",
        "--clients",
        "3",
        "--rounds",
        "1",
        "--params",
        "1000",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    let round = &report["rounds"][0];
    let halts = round["halt_messages"].as_u64().unwrap();
    assert_eq!(round["global_message_bytes"], 2027);
    assert_eq!(
        round["traffic"]["bytes_down"].as_u64().unwrap(),
        (3 + halts) * 2027
    );
}

#[test]
fn simulate_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let out = out.to_str().unwrap();
    let o = tinyfl(&[
        "simulate",
        "--clients",
        "2",
        "--min-fraction",
        "1.0",
        "--min-dataset-size",
        "10^9",
        "--output",
        out,
    ]);
    assert_eq!(o.status.code(), Some(6));
    assert!(stdout(&o).contains("insufficient-clients"));
    assert!(Path::new(out).exists());

    assert_eq!(
        tinyfl(&["simulate", "--clients", "0", "--output", out])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        tinyfl(&["simulate", "--min-fraction", "1.5", "--output", out])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        tinyfl(&["simulate", "--faulty", "9", "--output", out])
            .status
            .code(),
        Some(2)
    );
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"num_clients": "many"}"#).unwrap();
    assert_eq!(
        tinyfl(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--output",
            out
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        tinyfl(&["simulate", "--config", "/nonexistent.json", "--output", out])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn simulate_trace_lists_messages() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let trace = dir.path().join("t.txt");
    let o = tinyfl(&[
        "simulate",
        "--clients",
        "2",
        "--rounds",
        "1",
        "--output",
        out.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&trace).unwrap();
    let first = text.lines().next().unwrap();
    assert!(first.starts_with("1 down 0 global delivered "));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    let t = &report["totals"];
    let messages = t["messages_down"].as_u64().unwrap() + t["messages_up"].as_u64().unwrap();
    assert_eq!(text.lines().count() as u64, messages);
}

#[test]
fn text_and_raw_params_agree() {
    let dir = tempfile::tempdir().unwrap();
    let values = vec![1.0, -0.5, 0.1f32 as f64, 65504.0, 3.0e-8f32 as f64];
    let text = dir.path().join("p.txt");
    let raw = dir.path().join("p.bin");
    write_params(&text, &values).unwrap();
    write_params(&raw, &values).unwrap();
    assert_eq!(read_params(&text).unwrap(), values);
    assert_eq!(read_params(&raw).unwrap(), values);
    assert_eq!(fs::metadata(&raw).unwrap().len(), 20);
}
