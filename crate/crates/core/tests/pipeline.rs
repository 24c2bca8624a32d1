use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use lifectx::context::validate_context;
use lifectx::ingest::CoverageReport;
use lifectx::manifest::RunManifest;
use lifectx::pipeline::{run, PipelineError, RunOptions};
use lifectx::sequence::build_sequence;
use lifectx::store::ContextStore;
use lifectx::su;
use lifectx::synth::{write_su_fixture, SuConfig};

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn short_fixture(dir: &Path, days: u32) -> RunManifest {
    write_su_fixture(
        dir,
        &SuConfig {
            days,
            ..SuConfig::default()
        },
    )
    .unwrap();
    RunManifest::load(&dir.join("manifest.toml")).unwrap()
}

#[test]
fn su_fixture_runs_clean_and_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let m = short_fixture(tmp.path(), 3);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let sa = run(
        &m,
        &RunOptions {
            jobs: 1,
            output: Some(a.clone()),
            horizon: None,
        },
    )
    .unwrap();
    let sb = run(
        &m,
        &RunOptions {
            jobs: 4,
            output: Some(b.clone()),
            horizon: None,
        },
    )
    .unwrap();
    assert_eq!(sa, sb);
    assert_eq!(tree(&a), tree(&b));
    assert_eq!(sa.subjects, 2);
    assert_eq!(sa.contexts, 2 * 3 * 48);
    assert_eq!(sa.findings, 0);
    assert_eq!(sa.bad_rows, 0);
    assert_eq!(sa.quarantined, 0);

    let store = ContextStore::load(&a).unwrap();
    let schema = su::schema();
    for subject in ["acc01", "acc02"] {
        let ctxs = store.contexts(subject);
        assert_eq!(ctxs.len(), 144);
        assert!(build_sequence(ctxs, subject).unwrap().contiguous());
        for c in ctxs {
            assert!(validate_context(c, &schema).is_clean(), "{}", c.id());
        }
    }
    let cov: CoverageReport = serde_json::from_slice(&fs::read(a.join("coverage.json")).unwrap()).unwrap();
    assert_eq!(cov.totals().empty_windows, 0);
}

#[test]
fn rerun_replaces_stale_contexts() {
    let tmp = tempfile::tempdir().unwrap();
    let m = short_fixture(tmp.path(), 1);
    let out = tmp.path().join("out");
    fs::create_dir_all(out.join("contexts")).unwrap();
    fs::write(out.join("contexts/ghost.jsonl"), "").unwrap();
    run(
        &m,
        &RunOptions {
            jobs: 1,
            output: Some(out.clone()),
            horizon: None,
        },
    )
    .unwrap();
    assert!(!out.join("contexts/ghost.jsonl").exists());
}

#[test]
fn bad_rows_are_logged_and_skipped() {
    let tmp = tempfile::tempdir().unwrap();
    let m = short_fixture(tmp.path(), 1);
    let gps = tmp.path().join("gps.csv");
    let mut text = fs::read_to_string(&gps).unwrap();
    text.push_str("acc01,not-a-time,1,2,3\n");
    fs::write(&gps, text).unwrap();
    let out = tmp.path().join("out");
    let s = run(
        &m,
        &RunOptions {
            jobs: 1,
            output: Some(out.clone()),
            horizon: None,
        },
    )
    .unwrap();
    assert_eq!(s.bad_rows, 1);
    assert_eq!(s.contexts, 96);
    let log = fs::read_to_string(out.join("log.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert_eq!(first["event"], "bad_row");
    assert_eq!(first["file"], "gps.csv");
}

#[test]
fn undecodable_input_is_fatal_with_location() {
    let tmp = tempfile::tempdir().unwrap();
    let m = short_fixture(tmp.path(), 1);
    let mood = tmp.path().join("mood.jsonl");
    let mut bytes = fs::read(&mood).unwrap();
    bytes.extend_from_slice(b"\xff\xfe\n");
    fs::write(&mood, bytes).unwrap();
    let err = run(
        &m,
        &RunOptions {
            jobs: 1,
            output: Some(tmp.path().join("out")),
            horizon: None,
        },
    )
    .unwrap_err();
    match err {
        PipelineError::Fatal { path, line, .. } => {
            assert!(path.ends_with("mood.jsonl"));
            assert_eq!(line, 97);
        }
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn empty_inputs_give_empty_run() {
    let tmp = tempfile::tempdir().unwrap();
    let m = short_fixture(tmp.path(), 1);
    for input in &m.inputs {
        fs::write(
            &input.path,
            if input.header {
                "subject_id,timestamp,lat,lon,accuracy\n"
            } else {
                ""
            },
        )
        .unwrap();
    }
    let out = tmp.path().join("out");
    let s = run(
        &m,
        &RunOptions {
            jobs: 0,
            output: Some(out.clone()),
            horizon: None,
        },
    )
    .unwrap();
    assert_eq!(s.contexts, 0);
    assert!(ContextStore::load(&out).unwrap().is_empty());
}
