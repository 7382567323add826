//! Every fixture either reproduces its stored summary or fails with its stored
//! error. Set `STGAMES_UPDATE_GOLDEN=1` to rewrite the stored files.

use std::fs;
use std::path::{Path, PathBuf};

use stgames::export::to_jsonl;
use stgames::{parse_scenario, run_scenario, CliError};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn tomls(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    v.sort();
    v
}

fn check(expected: &Path, actual: &str) {
    if std::env::var_os("STGAMES_UPDATE_GOLDEN").is_some() {
        fs::write(expected, actual).unwrap();
        return;
    }
    let want = fs::read_to_string(expected).unwrap_or_else(|_| panic!("missing golden file {}", expected.display()));
    assert_eq!(actual, want, "golden mismatch for {}", expected.display());
}

fn outcome(path: &Path) -> Result<String, CliError> {
    let text = fs::read_to_string(path).unwrap();
    let record = run_scenario(&parse_scenario(&text)?)?;
    Ok(to_jsonl(&record.summary.to_table()))
}

#[test]
fn scenario_fixtures_match_golden_summaries() {
    let dir = fixtures();
    let files = tomls(&dir);
    assert!(files.len() >= 10);
    for path in files {
        let summary = outcome(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        check(&dir.join("golden").join(path.with_extension("summary.jsonl").file_name().unwrap()), &summary);
    }
}

#[test]
fn error_fixtures_fail_with_stable_messages() {
    let dir = fixtures().join("errors");
    let files = tomls(&dir);
    assert!(files.len() >= 8);
    for path in files {
        let e = outcome(&path).expect_err(&format!("{} should fail", path.display()));
        check(&path.with_extension("err"), &format!("exit {}\n{e}\n", e.exit_code()));
    }
}
