use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use daa_cli::config::{preset_names, CameraSpec, ScenarioSpec};
use daa_cli::ScenarioFile;
use daa_core::sensorsim::{HorizonSide, IntruderProfile};
use daa_core::simkit::{EncounterGeometry, Scenario, SensingMode, LOG_HEADER};
use proptest::prelude::*;
use tempfile::tempdir;

fn daa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_daa")).args(args).env_remove("DAA_OUT_DIR").output().expect("spawn daa")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn count_csv(dir: &Path) -> usize {
    fs::read_dir(dir)
        .map_or(0, |rd| rd.filter_map(|e| e.ok()).filter(|e| e.path().extension().is_some_and(|x| x == "csv")).count())
}

#[test]
fn e1_ten_episodes_both_modes_writes_twenty_logs_and_a_report() {
    let tmp = tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = daa(&["run", "--scenario", "e1", "--episodes", "10", "--modes", "nominal,safe", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(count_csv(&out.join("E1/nominal")), 10);
    assert_eq!(count_csv(&out.join("E1/safe")), 10);
    for name in ["report.json", "report.txt", "hroc_by_scenario.csv", "hroc_by_environment.csv"] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let log = fs::read_to_string(out.join("E1/safe/episode_3.csv")).unwrap();
    assert_eq!(log.lines().next().unwrap(), LOG_HEADER.join(","));

    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["episodes"].as_array().unwrap().len(), 20);
    assert_eq!(report["metrics"]["rows"].as_array().unwrap().len(), 2);
    assert_eq!(report["metrics"]["rows"][1]["mode"], "safe");
}

#[test]
fn invalid_output_directory_fails() {
    let tmp = tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let out = blocker.join("out");
    let o = daa(&["run", "--scenario", "e1", "--episodes", "1", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("cannot create output directory"), "{}", stderr(&o));
}

#[test]
fn same_seed_gives_identical_bytes() {
    let tmp = tempdir().unwrap();
    let run = |name: &str, jobs: &str| {
        let out = tmp.path().join(name);
        let o =
            daa(&["run", "--scenario", "e3", "--episodes", "4", "--seed", "42", "--jobs", jobs, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let a = run("a", "1");
    let b = run("b", "4");
    for f in ["report.json", "report.txt", "hroc_by_scenario.csv", "E3/safe/episode_44.csv", "E3/nominal/episode_45.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn output_dir_defaults_from_environment() {
    let tmp = tempdir().unwrap();
    let out = tmp.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_daa"))
        .args(["run", "--scenario", "e1", "--episodes", "1", "--modes", "safe"])
        .env("DAA_OUT_DIR", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(count_csv(&out.join("E1/safe")), 1);
}

#[test]
fn environment_sweep_fills_the_environment_table() {
    let tmp = tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = daa(&[
        "run",
        "--scenario",
        "e3",
        "--episodes",
        "2",
        "--modes",
        "safe",
        "--environments",
        "1.0,0.5",
        "--horizon",
        "below",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(count_csv(&out.join("E3/env_1.000/safe")), 2);
    assert_eq!(count_csv(&out.join("E3/env_0.500/safe")), 2);
    let table = fs::read_to_string(out.join("hroc_by_environment.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("E3,below,0.5,safe,2,"), "{}", rows[1]);
    assert!(rows[2].starts_with("E3,below,1,safe,2,"), "{}", rows[2]);
}

#[test]
fn run_rejects_bad_arguments() {
    let tmp = tempdir().unwrap();
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();
    for args in [
        vec!["run", "--scenario", "e1", "--episodes", "0", "--out", out],
        vec!["run", "--scenario", "e9", "--out", out],
        vec!["run", "--scenario", "e1", "--modes", "aggressive", "--out", out],
        vec!["run", "--scenario", "e1", "--sensor-hz", "7", "--out", out],
        vec!["run", "--scenario", "e1", "--modes", "safe,cbf", "--out", out],
    ] {
        let o = daa(&args);
        assert!(!o.status.success(), "{args:?} should fail");
        assert!(!stderr(&o).is_empty());
    }
}

#[test]
fn malformed_file_reports_its_location() {
    let tmp = tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    fs::write(&path, "[[scenario]]\nlabel = \"X\"\ngeometry = \"head-on\"\nownship_speed = 10.0\nintruder_speed = [1\n").unwrap();
    let o = daa(&["run", "--scenario", path.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert!(!o.status.success());
    let msg = stderr(&o);
    assert!(msg.contains("bad.toml") && msg.contains("line 5"), "{msg}");

    fs::write(
        &path,
        "[[scenario]]\nlabel = \"X\"\ngeometry = \"diagonal\"\nownship_speed = 10.0\nintruder_speed = 1.0\nintruder = \"vtol\"\n",
    )
    .unwrap();
    let msg = stderr(&daa(&["normalize", path.to_str().unwrap()]));
    assert!(msg.contains("unknown geometry") && msg.contains("line 3"), "{msg}");
}

#[test]
fn reaction_time_command() {
    let o = daa(&["reaction-time", "--intruder", "hexarotor", "--closure", "20"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let line = text.lines().nth(1).unwrap();
    let cols: Vec<&str> = line.split_whitespace().collect();
    assert_eq!(cols[0], "hexarotor");
    assert_eq!(cols[3], "287.0");
    assert_eq!(cols[4], "14.35");

    let o = daa(&["reaction-time", "--intruder", "vtol", "--closure", "40"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let cols: Vec<String> = text.lines().nth(1).unwrap().split_whitespace().map(String::from).collect();
    assert_eq!(cols[3], "525.0");
    let t: f64 = cols[4].parse().unwrap();
    assert!((t - 13.12).abs() <= 0.005 + 1e-12, "{t}");

    let o = daa(&["reaction-time", "--length", "1", "--closure", "10"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("163.2") && text.contains("16.32"), "{text}");

    assert!(!daa(&["reaction-time", "--intruder", "vtol", "--closure", "0"]).status.success());
    assert!(!daa(&["reaction-time", "--intruder", "vtol", "--closure", "-3"]).status.success());
}

#[test]
fn bundled_presets_match_library_presets() {
    let names: Vec<&str> = preset_names().collect();
    assert_eq!(names, ["E1", "E2", "E3", "E4", "E5"]);
    for name in names {
        let file = ScenarioFile::resolve(name).unwrap();
        let parsed = file.scenarios().unwrap();
        assert_eq!(parsed, vec![Scenario::preset(name).unwrap()], "{name}");
        parsed[0].validate().unwrap();
    }
    let e1 = &ScenarioFile::resolve("e1").unwrap().scenarios().unwrap()[0];
    assert_eq!((e1.geometry, e1.ownship_speed, e1.intruder_speed), (EncounterGeometry::HeadOn, 10.0, 10.0));
    assert_eq!(e1.profile, IntruderProfile::hexarotor());
    let e4 = &ScenarioFile::resolve("E4").unwrap().scenarios().unwrap()[0];
    assert_eq!((e4.geometry, e4.ownship_speed, e4.intruder_speed), (EncounterGeometry::HeadOn, 10.0, 30.0));
    assert_eq!(e4.profile, IntruderProfile::vtol());
}

#[test]
fn canonical_form_is_a_fixed_point() {
    for name in preset_names() {
        let canon = ScenarioFile::resolve(name).unwrap().to_canonical_string().unwrap();
        let again = ScenarioFile::parse_str(&canon, "canonical").unwrap().to_canonical_string().unwrap();
        assert_eq!(canon, again);
    }
    let all = ScenarioFile::from_scenarios(&Scenario::presets());
    let back = ScenarioFile::parse_str(&all.to_canonical_string().unwrap(), "all").unwrap();
    assert_eq!(back.scenarios().unwrap(), Scenario::presets());
    assert_eq!(back.sim_config().unwrap(), all.sim_config().unwrap());
}

fn arb_spec() -> impl Strategy<Value = ScenarioSpec> {
    (
        prop_oneof![Just(EncounterGeometry::HeadOn), Just(EncounterGeometry::Overtake), Just(EncounterGeometry::Crossing)],
        1.0f64..40.0,
        0.5f64..1.0,
        prop_oneof![Just("hexarotor"), Just("vtol"), Just("bell407"), Just("kite")],
        proptest::option::of(0.2f64..10.0),
        any::<bool>(),
        (10.0f64..300.0, 0.0f64..=1.0, proptest::option::of(50.0f64..2000.0)),
        (0.0f64..50.0, 0.0f64..20.0, 0.0f64..40.0, 1.0f64..100.0, 0.0f64..500.0),
        any::<bool>(),
    )
        .prop_map(|(geometry, vo, frac, intruder, len, below, (duration, env, r0), (corr, lat, dz, dth, goal), perfect)| {
            let mut spec =
                ScenarioSpec::from_scenario(&Scenario::new("S", geometry, vo, vo * frac, IntruderProfile::hexarotor()));
            spec.intruder = intruder.to_string();
            spec.intruder_length = if intruder == "kite" { Some(len.unwrap_or(1.0)) } else { len };
            spec.horizon = if below { HorizonSide::Below } else { HorizonSide::Above };
            spec.duration = duration;
            spec.environment_factor = env;
            spec.initial_range = r0;
            spec.corridor_extent = corr;
            spec.lateral_extent = lat;
            spec.altitude_offset = dz;
            spec.d_thresh = dth;
            spec.goal_margin = goal;
            spec.sensing = if perfect { SensingMode::Perfect } else { SensingMode::Vision };
            spec
        })
}

proptest! {
    #[test]
    fn serialize_parse_round_trips(specs in proptest::collection::vec(arb_spec(), 1..4), yaw in -90.0f64..90.0, noise in 0.0f64..2.0) {
        let mut file = ScenarioFile::from_scenarios(&[]);
        file.scenarios = specs.into_iter().enumerate().map(|(i, s)| ScenarioSpec { label: format!("S{i}"), ..s }).collect();
        file.detection.angle_noise_deg = noise;
        file.rig = Some(vec![CameraSpec { mount_yaw_deg: yaw, mount_pitch_deg: 0.0, hfov_deg: 60.0, vfov_deg: 45.0, width_px: 640, height_px: 480 }]);
        file.validate().unwrap();
        let text = file.to_canonical_string().unwrap();
        let parsed = ScenarioFile::parse_str(&text, "generated").unwrap();
        prop_assert_eq!(&parsed, &file);
        prop_assert_eq!(parsed.to_canonical_string().unwrap(), text);
    }
}
