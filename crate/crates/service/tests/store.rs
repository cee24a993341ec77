mod common;

use std::io::Write;

use common::*;
use serde_json::json;
use skyplan_core::mission::parse_mission;
use skyplan_core::sim::{EventKind, SimEvent};
use skyplan_service::error::ServiceError;
use skyplan_service::store::{write_atomic, SessionRecord, Store};

fn store() -> (tempfile::TempDir, Store) {
    let dir = tempfile::tempdir().unwrap();
    let s = Store::open(dir.path()).unwrap();
    (dir, s)
}

#[test]
fn mission_roundtrip() {
    let (_d, s) = store();
    let m = parse_mission(&fixture_text("usecase1.json")).unwrap();
    s.put_mission("uc1", &m).unwrap();
    assert_eq!(s.get_mission("uc1").unwrap(), m);
    assert_eq!(s.list_missions().unwrap(), vec!["uc1"]);
    assert!(s.get_elevation("uc1").unwrap().is_none());
    s.put_elevation("uc1", "grid").unwrap();
    assert_eq!(s.get_elevation("uc1").unwrap().as_deref(), Some("grid"));
}

#[test]
fn runs_get_their_own_directories() {
    let (d, s) = store();
    let m = parse_mission(&fixture_text("usecase1.json")).unwrap();
    s.put_mission("uc1", &m).unwrap();
    let a = s.new_run("uc1", &json!({ "seed": 1 })).unwrap();
    let b = s.new_run("uc1", &json!({ "seed": 2 })).unwrap();
    assert_ne!(a, b);
    assert!(d.path().join("missions/uc1/runs").join(&a).join("config.json").is_file());
    let runs = s.list_runs("uc1").unwrap();
    assert_eq!(runs.iter().map(|r| r.run_id.as_str()).collect::<Vec<_>>(), vec![a.as_str(), b.as_str()]);
    assert_eq!(runs[1].config["seed"], 2);
    assert!(runs.iter().all(|r| !r.finished));
    assert!(matches!(s.get_result("uc1", &a), Err(ServiceError::NotFound(_))));
}

#[test]
fn interrupted_write_leaves_previous_version() {
    let (d, s) = store();
    let m = parse_mission(&fixture_text("usecase1.json")).unwrap();
    s.put_mission("uc1", &m).unwrap();
    // a writer that died before the rename leaves only its temp file behind
    let dir = d.path().join("missions/uc1");
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).unwrap();
    tmp.write_all(b"{\"missionSchema\": 1, \"na").unwrap();
    tmp.into_temp_path().keep().unwrap();
    assert_eq!(s.get_mission("uc1").unwrap(), m);
    assert_eq!(s.list_missions().unwrap(), vec!["uc1"]);

    let m2 = parse_mission(&fixture_text("usecase2.json")).unwrap();
    s.put_mission("uc1", &m2).unwrap();
    assert_eq!(s.get_mission("uc1").unwrap(), m2);
}

#[test]
fn io_errors_name_the_path() {
    let d = tempfile::tempdir().unwrap();
    let blocker = d.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let target = blocker.join("sub/out.json");
    match write_atomic(&target, b"{}") {
        Err(e @ ServiceError::Io { .. }) => assert!(e.to_string().contains("file/sub/out.json"), "{e}"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(Store::open(&blocker), Err(ServiceError::Io { .. })));
}

#[test]
fn ids_cannot_escape_the_store() {
    let (_d, s) = store();
    let m = parse_mission(&fixture_text("usecase1.json")).unwrap();
    for bad in ["../x", "", "a/b", "."] {
        assert!(matches!(s.put_mission(bad, &m), Err(ServiceError::BadRequest(_))), "{bad}");
    }
    assert!(matches!(s.get_mission("nope"), Err(ServiceError::NotFound(_))));
}

#[test]
fn event_log_appends() {
    let (_d, s) = store();
    let m = parse_mission(&fixture_text("usecase1.json")).unwrap();
    s.put_mission("uc1", &m).unwrap();
    let rec = SessionRecord {
        session_id: "s1".into(),
        mission_id: "uc1".into(),
        run_id: "run-0001".into(),
        solution_index: 0,
        replans: vec![],
        applied: vec![],
    };
    s.put_session(&rec).unwrap();
    assert_eq!(s.get_session("uc1", "s1").unwrap(), rec);
    let ev = |t: f64| SimEvent { t, kind: EventKind::TaskStarted, subject: "a/b".into(), detail: json!({}) };
    s.append_events("uc1", "s1", &[ev(1.0), ev(2.0)]).unwrap();
    s.append_events("uc1", "s1", &[ev(3.0)]).unwrap();
    let text = s.read_events("uc1", "s1").unwrap();
    let ts: Vec<f64> = text.lines().map(|l| serde_json::from_str::<SimEvent>(l).unwrap().t).collect();
    assert_eq!(ts, vec![1.0, 2.0, 3.0]);
}
