use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn maps_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../maps")
}

fn fixture(name: &str) -> PathBuf {
    maps_dir().join(name)
}

fn snav(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snav"))
        .args(args)
        .output()
        .expect("run snav")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn edited_fixture(dir: &Path, name: &str, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let text = std::fs::read_to_string(fixture(name)).unwrap();
    let mut v: Value = serde_json::from_str(&text).unwrap();
    edit(&mut v);
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path
}

fn printed_length(out: &str) -> f64 {
    out.lines()
        .find_map(|l| l.strip_prefix("length_m: "))
        .expect("length line")
        .trim()
        .parse()
        .unwrap()
}

#[test]
fn validate_accepts_every_fixture() {
    for name in ["threeroom.map", "ring4.map", "detour5.map", "paper8.map"] {
        let path = fixture(name);
        let o = snav(&["validate", path.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{name}: {}", stderr(&o));
        assert!(stdout(&o).contains("ok"));
    }
}

#[test]
fn validate_missing_file_exits_two() {
    let o = snav(&["validate", "/definitely/not/here.map"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("no such file"), "{}", stderr(&o));
}

#[test]
fn validate_dangling_room_ref_names_the_doorway() {
    let dir = tempfile::tempdir().unwrap();
    let path = edited_fixture(dir.path(), "threeroom.map", |v| {
        v["doorways"][1]["rooms"][1] = Value::from("r9");
    });
    let o = snav(&["validate", path.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("d2"), "{err}");
    assert!(!err.contains("panicked"));
}

#[test]
fn validate_malformed_json_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.map");
    std::fs::write(&path, "{ \"rooms\": [").unwrap();
    let o = snav(&["validate", path.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("parse error"));
}

#[test]
fn plan_same_room_is_near_straight() {
    let map = fixture("threeroom.map");
    let o = snav(&[
        "plan", "--map", map.to_str().unwrap(), "--start", "1,1", "--goal", "3,3", "--clock", "work", "--seed", "3",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let len = printed_length(&stdout(&o));
    let straight = 8f64.sqrt();
    assert!(len >= straight - 1e-9 && len < straight * 1.05, "length {len}");
    assert!(stdout(&o).contains("samples: "));
}

#[test]
fn plan_writes_path_json_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("path.json");
    let svg = dir.path().join("path.svg");
    let map = fixture("threeroom.map");
    let o = snav(&[
        "plan",
        "--map",
        map.to_str().unwrap(),
        "--start",
        "1,2",
        "--goal",
        "11,2",
        "--clock",
        "work",
        "--out",
        out.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let json: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let segments = json["segments"].as_array().unwrap();
    assert_eq!(segments.len(), 3);
    let total = json["total_length_m"].as_f64().unwrap();
    assert!((total - printed_length(&stdout(&o))).abs() < 1e-3);
    let first = &segments[0]["waypoints"][0];
    assert_eq!((first[0].as_f64().unwrap(), first[1].as_f64().unwrap()), (1.0, 2.0));
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn goal_room_matches_coordinate_goal() {
    let map = fixture("threeroom.map");
    let map = map.to_str().unwrap();
    let by_name = snav(&["plan", "--map", map, "--start", "1,1", "--goal-room", "kitchen", "--clock", "work"]);
    let by_point = snav(&["plan", "--map", map, "--start", "1,1", "--goal", "10,2", "--clock", "work"]);
    assert_eq!(code(&by_name), 0, "{}", stderr(&by_name));
    assert_eq!(stdout(&by_name), stdout(&by_point));
}

#[test]
fn unknown_goal_room_is_a_domain_failure() {
    let map = fixture("threeroom.map");
    let o = snav(&["plan", "--map", map.to_str().unwrap(), "--start", "1,1", "--goal-room", "attic"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("attic"));
}

#[test]
fn blocked_doorways_report_no_route() {
    let dir = tempfile::tempdir().unwrap();
    let path = edited_fixture(dir.path(), "threeroom.map", |v| {
        for d in v["doorways"].as_array_mut().unwrap() {
            d["blocked"] = Value::Bool(true);
        }
    });
    let o = snav(&["plan", "--map", path.to_str().unwrap(), "--start", "1,1", "--goal", "11,2"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("NoRoute"), "{}", stderr(&o));
}

#[test]
fn plan_usage_errors_exit_two() {
    let map = fixture("threeroom.map");
    let map = map.to_str().unwrap();
    assert_eq!(code(&snav(&["plan", "--map", map, "--start", "1,1"])), 2);
    assert_eq!(code(&snav(&["plan", "--map", map, "--start", "1;1", "--goal", "2,2"])), 2);
    assert_eq!(code(&snav(&["plan", "--map", map, "--start", "1,1", "--goal", "2,2", "--mode", "rrt"])), 2);
    assert_eq!(code(&snav(&["plan", "--map", map, "--start", "1,1", "--goal", "2,2", "--timeout", "0"])), 2);
    assert_eq!(code(&snav(&[])), 2);
}

#[test]
fn goal_inside_wall_is_a_domain_failure() {
    let map = fixture("threeroom.map");
    let o = snav(&["plan", "--map", map.to_str().unwrap(), "--start", "1,1", "--goal", "3.95,0.5", "--mode", "irrt"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

#[test]
fn bench_writes_one_row_per_query() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let map = fixture("threeroom.map");
    let o = snav(&[
        "bench",
        "--map",
        map.to_str().unwrap(),
        "--queries",
        "10",
        "--timeout",
        "0.05",
        "--modes",
        "irrt",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 11);
    assert_eq!(lines[0], "query_id,mode,seed,solved,samples,path_length_m,time_s");
    assert!(lines[1..].iter().all(|l| l.split(',').nth(1) == Some("irrt")));
    assert!(stdout(&o).contains("irrt"));
}

#[test]
fn bench_with_same_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let map = fixture("threeroom.map");
    let run = |name: &str, jobs: &str| {
        let csv = dir.path().join(name);
        let o = snav(&[
            "--jobs",
            jobs,
            "bench",
            "--map",
            map.to_str().unwrap(),
            "--queries",
            "4",
            "--timeout",
            "0.02",
            "--clock",
            "work",
            "--seed",
            "11",
            "--csv",
            csv.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        std::fs::read(csv).unwrap()
    };
    let a = run("a.csv", "1");
    let b = run("b.csv", "1");
    let c = run("c.csv", "3");
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn bench_summary_and_boxplot_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("box.svg");
    let summary = dir.path().join("summary.json");
    let map = fixture("threeroom.map");
    let o = snav(&[
        "bench",
        "--map",
        map.to_str().unwrap(),
        "--queries",
        "3",
        "--timeout",
        "0.02",
        "--clock",
        "work",
        "--svg",
        svg.to_str().unwrap(),
        "--summary",
        summary.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let json: Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    for mode in ["irrt", "irrt_sg", "irrt_sg_sps"] {
        assert!(json[mode]["samples"]["median"].is_number(), "{mode}");
        assert!(json[mode]["solve_rate"].is_number());
    }
    let svg = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(svg.matches("class=\"box\"").count(), 6);
}

#[test]
fn bench_rejects_unknown_mode() {
    let map = fixture("threeroom.map");
    let o = snav(&["bench", "--map", map.to_str().unwrap(), "--modes", "irrt,warp"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn render_draws_map_sdf_and_path() {
    let dir = tempfile::tempdir().unwrap();
    let map = fixture("threeroom.map");
    let map = map.to_str().unwrap();
    let path = dir.path().join("p.json");
    let o = snav(&[
        "plan", "--map", map, "--start", "1,2", "--goal", "5,2", "--mode", "irrt", "--clock", "work", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let plain = dir.path().join("plain.svg");
    let full = dir.path().join("full.svg");
    assert_eq!(code(&snav(&["render", "--map", map, "--out", plain.to_str().unwrap()])), 0);
    let o = snav(&[
        "render",
        "--map",
        map,
        "--sdf",
        "--path",
        path.to_str().unwrap(),
        "--out",
        full.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let plain = std::fs::read_to_string(plain).unwrap();
    let full = std::fs::read_to_string(full).unwrap();
    assert!(plain.starts_with("<svg") && full.starts_with("<svg"));
    assert!(full.len() > plain.len());
    assert!(full.contains("<polyline"));
}

#[test]
fn render_missing_path_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let map = fixture("threeroom.map");
    let out = dir.path().join("x.svg");
    let o = snav(&[
        "render", "--map", map.to_str().unwrap(), "--path", "/nope/p.json", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}
