//! End-to-end exit-code tests against the built binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_facelock"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn facelock")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

const CFG: &[&str] = &["--l", "32", "--l-r", "16", "--n", "64", "--rho", "1"];

fn gen_data(dir: &Path) -> PathBuf {
    let data = dir.join("data.csv");
    let out = run(
        dir,
        &[
            "gen-data", "--k", "3", "--r", "4", "--len", "32", "--seed", "77", "--out",
            data.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&out), 0, "{out:?}");
    data
}

// first CSV row for the given label, written to its own probe file;
// `negate` flips every coordinate to build a guaranteed non-match
fn probe_for(dir: &Path, data: &Path, label: &str, negate: bool) -> PathBuf {
    let text = std::fs::read_to_string(data).unwrap();
    let row = text.lines().find(|l| l.starts_with(&format!("{label},"))).unwrap();
    let row = if negate {
        let mut fields = row.split(',');
        let label = fields.next().unwrap().to_string();
        fields.fold(label, |acc, f| format!("{acc},{}", -f.parse::<f64>().unwrap()))
    } else {
        row.to_string()
    };
    let path = dir.join(format!("probe-{label}-{negate}.csv"));
    std::fs::write(&path, row).unwrap();
    path
}

fn enroll(dir: &Path, data: &Path, user: &str, seed: &str) -> Output {
    let mut args = vec!["enroll", "--user", user, "--data", data.to_str().unwrap(), "--seed", seed];
    args.extend_from_slice(CFG);
    run(dir, &args)
}

#[test]
fn accept_reject_not_found_and_revoke_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_data(dir.path());
    assert_eq!(code(&enroll(dir.path(), &data, "c000", "100")), 0);

    let genuine = probe_for(dir.path(), &data, "c000", false);
    let impostor = probe_for(dir.path(), &data, "c000", true);

    let out = run(dir.path(), &["verify", "--user", "c000", "--probe", genuine.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{out:?}");
    assert!(String::from_utf8_lossy(&out.stdout).contains("ACCEPT c000"));

    let out = run(dir.path(), &["verify", "--user", "c000", "--probe", impostor.to_str().unwrap()]);
    assert_eq!(code(&out), 1, "{out:?}");
    assert!(String::from_utf8_lossy(&out.stdout).contains("REJECT c000"));

    let out = run(dir.path(), &["verify", "--user", "nobody", "--probe", genuine.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{out:?}");

    // second active enrollment is refused as policy
    assert_eq!(code(&enroll(dir.path(), &data, "c000", "101")), 5);

    assert_eq!(code(&run(dir.path(), &["revoke", "--user", "c000"])), 0);
    let out = run(dir.path(), &["verify", "--user", "c000", "--probe", genuine.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "revoked record must read as not found: {out:?}");

    // re-enrollment after revocation succeeds and verifies again
    assert_eq!(code(&enroll(dir.path(), &data, "c000", "102")), 0);
    let out = run(dir.path(), &["verify", "--user", "c000", "--probe", genuine.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{out:?}");
}

#[test]
fn dimension_mismatch_is_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_data(dir.path());
    assert_eq!(code(&enroll(dir.path(), &data, "c000", "100")), 0);
    let short = dir.path().join("short.csv");
    std::fs::write(&short, "c000,0.1,0.2,0.3\n").unwrap();
    let out = run(dir.path(), &["verify", "--user", "c000", "--probe", short.to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{out:?}");
}

#[test]
fn malformed_input_is_exit_6() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "c000,1.0,not-a-number\n").unwrap();
    let mut args = vec!["enroll", "--user", "c000", "--data", bad.to_str().unwrap(), "--seed", "1"];
    args.extend_from_slice(CFG);
    let out = run(dir.path(), &args);
    assert_eq!(code(&out), 6, "{out:?}");
}

#[test]
fn same_seed_yields_identical_record_files_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_data(dir.path());
    let mut records = Vec::new();
    for store in ["store-a", "store-b"] {
        let mut args = vec![
            "--store", store, "enroll", "--user", "c000", "--data", data.to_str().unwrap(),
            "--seed", "100",
        ];
        args.extend_from_slice(CFG);
        assert_eq!(code(&run(dir.path(), &args)), 0);
        let store_dir = dir.path().join(store);
        let rec = std::fs::read_dir(&store_dir)
            .unwrap()
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .find(|p| p.extension().is_some_and(|x| x == "rec"))
            .expect("record file");
        records.push(std::fs::read(rec).unwrap());
    }
    assert_eq!(records[0], records[1]);
}

#[test]
fn reports_are_written_to_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("reports");
    let out = run(
        dir.path(),
        &[
            "--output",
            out_dir.to_str().unwrap(),
            "--seed",
            "9",
            "--l",
            "32",
            "--l-r",
            "16",
            "--n",
            "16",
            "--rho",
            "1",
            "eval",
            "--k",
            "3",
            "--r",
            "3",
        ],
    );
    assert_eq!(code(&out), 0, "{out:?}");
    for f in ["eval_stages.csv", "eval_comparison.csv", "eval.txt"] {
        assert!(out_dir.join(f).exists(), "missing {f}");
    }

    let out = run(
        dir.path(),
        &[
            "--output",
            out_dir.to_str().unwrap(),
            "security",
            "--paper-kc",
            "rp=3772",
            "--paper-kc",
            "fc=11340",
        ],
    );
    assert_eq!(code(&out), 0, "{out:?}");
    let csv = std::fs::read_to_string(out_dir.join("security.csv")).unwrap();
    assert!(csv.contains("random_projection,3772,3771"));
    assert!(csv.contains("fuzzy_commitment,11340,11339"));
}
