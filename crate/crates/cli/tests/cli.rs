use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn zakharov(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zakharov"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Every file in `a` exists in `b` with the same bytes, and vice versa.
fn assert_same_tree(a: &Path, b: &Path) {
    let names = |d: &Path| {
        let mut v: Vec<String> = fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        v.sort();
        v
    };
    let na = names(a);
    assert_eq!(na, names(b));
    assert!(!na.is_empty());
    for n in na {
        assert_eq!(
            fs::read(a.join(&n)).unwrap(),
            fs::read(b.join(&n)).unwrap(),
            "{n} differs"
        );
    }
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn energy_space_point_is_admissible() {
    let tmp = tempfile::tempdir().unwrap();
    let o = zakharov(&["region", "--d", "4", "--s", "1", "--l", "0"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "admissible\n");
}

#[test]
fn inadmissible_point_names_the_condition() {
    let tmp = tempfile::tempdir().unwrap();
    let o = zakharov(
        &["region", "--d", "4", "--s", "0.4", "--l", "0"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("inadmissible\n"), "{out}");
    assert!(out.contains("violated: 2s >= l + (d-2)/2"), "{out}");
}

#[test]
fn region_reads_ini_config_and_rejects_unknown_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.ini");
    fs::write(&cfg, "d = 4\n[region]\ns = 2\nl = 0\n").unwrap();
    let o = zakharov(&["region", "--config", "run.ini"], tmp.path());
    assert_eq!(stdout(&o), "excluded_corner\n");
    let o = zakharov(&["region", "--config", "run.ini", "--s", "1"], tmp.path());
    assert_eq!(stdout(&o), "admissible\n");
    fs::write(&cfg, "[region]\nsigma = 2\n").unwrap();
    let o = zakharov(&["region", "--config", "run.ini"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validation_failures_exit_with_2_and_are_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let o = zakharov(&["solve", "--n", "24", "--out", "bad"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let m = manifest(&tmp.path().join("bad"));
    assert_eq!(m["exit_code"], 2);
    assert!(m["error"].as_str().unwrap().contains("n = 24"));

    let o = zakharov(
        &[
            "stress",
            "--inequality",
            "bilinear_schrodinger",
            "--s",
            "5",
            "--out",
            "st",
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    let m = manifest(&tmp.path().join("st"));
    assert!(m["error"].as_str().unwrap().contains("s - l <= a + 1 - b"));
}

#[test]
fn divergence_exits_with_3() {
    let tmp = tempfile::tempdir().unwrap();
    let o = zakharov(
        &[
            "picard",
            "--amplitude",
            "50",
            "--gate-mode",
            "warn",
            "--max-iter",
            "20",
            "--out",
            "p",
        ],
        tmp.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(manifest(&tmp.path().join("p"))["exit_code"], 3);
}

#[test]
fn picard_with_zero_data_files_converges_in_one_iteration() {
    let tmp = tempfile::tempdir().unwrap();
    let o = zakharov(
        &[
            "solve",
            "--n",
            "32",
            "--steps",
            "1",
            "--amplitude",
            "0",
            "--wave-amplitude",
            "0",
            "--out",
            "zero",
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let o = zakharov(
        &[
            "picard",
            "--input-f",
            "zero/u_final.zkf",
            "--input-g",
            "zero/v_final.zkf",
            "--out",
            "p",
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let m = manifest(&tmp.path().join("p"));
    assert_eq!(m["summary"]["iterations"], 1);
    assert_eq!(m["inputs"].as_array().unwrap().len(), 2);
}

#[test]
fn every_output_is_listed_and_carries_the_config_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let o = zakharov(&["solve", "--steps", "20", "--out", "s"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let dir = tmp.path().join("s");
    let m = manifest(&dir);
    let hash = m["config_hash"].as_str().unwrap().to_string();
    let listed: Vec<&str> = m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["path"].as_str().unwrap())
        .collect();
    for e in fs::read_dir(&dir).unwrap() {
        let name = e.unwrap().file_name().into_string().unwrap();
        if name == "manifest.json" {
            continue;
        }
        assert!(listed.contains(&name.as_str()), "{name} not in manifest");
        let bytes = fs::read(dir.join(&name)).unwrap();
        if name.ends_with(".zkf") {
            let side: serde_json::Value =
                serde_json::from_slice(&fs::read(dir.join(format!("{name}.json"))).unwrap())
                    .unwrap();
            assert_eq!(side["config_hash"], hash.as_str());
        } else {
            assert!(String::from_utf8_lossy(&bytes).contains(&hash), "{name}");
        }
    }
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let runs: &[&[&str]] = &[
        &["solve", "--steps", "50", "--seed", "7"],
        &["picard", "--seed", "3"],
        &[
            "norms",
            "--family",
            "W",
            "--l",
            "0.5",
            "--data",
            "free-wave",
            "--interval",
            "0.5,2.5",
        ],
        &[
            "illposed-sweep",
            "--d",
            "2",
            "--s",
            "0.2",
            "--l",
            "-0.8",
            "--lambda",
            "16..512",
        ],
        &["region", "--map", "--steps", "8"],
        &[
            "stress",
            "--inequality",
            "product",
            "--samples",
            "3",
            "--scales",
            "2,4",
        ],
    ];
    for args in runs {
        let mut outs = Vec::new();
        for (k, threads) in ["1", "2"].iter().enumerate() {
            let dir = format!("run{k}");
            let mut a: Vec<&str> = args.to_vec();
            a.extend(["--out", &dir, "--threads", threads]);
            let o = zakharov(&a, tmp.path());
            assert_eq!(
                o.status.code(),
                Some(0),
                "{args:?}: {}",
                String::from_utf8_lossy(&o.stderr)
            );
            outs.push(o.stdout);
        }
        assert_eq!(outs[0], outs[1], "{args:?} stdout");
        assert_same_tree(&tmp.path().join("run0"), &tmp.path().join("run1"));
        fs::remove_dir_all(tmp.path().join("run0")).unwrap();
        fs::remove_dir_all(tmp.path().join("run1")).unwrap();
    }
}

#[test]
fn sweep_csv_has_a_slope_column() {
    let tmp = tempfile::tempdir().unwrap();
    let o = zakharov(
        &["illposed-sweep", "--lambda", "16..128", "--out", "sw"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(tmp.path().join("sw/sweep.csv")).unwrap();
    let header = csv.lines().nth(1).unwrap();
    assert!(header.split(',').any(|c| c == "slope_so_far"));
    assert_eq!(csv.lines().count(), 2 + 4);
}

#[test]
fn selftest_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = zakharov(&["selftest"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
}
