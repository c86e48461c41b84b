use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/sample_1k")
}

fn tubewire(args: &[&str]) -> Output {
    tubewire_env(args, &[])
}

fn tubewire_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tubewire"));
    cmd.args(args).env_remove("TUBEWIRE_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every regular file under `dir`, keyed by its path relative to `dir`.
fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

#[test]
fn stage_by_stage_matches_run() {
    let work = tempfile::tempdir().unwrap();
    let (store, staged, whole) = (
        work.path().join("store"),
        work.path().join("staged"),
        work.path().join("run"),
    );
    let acc = staged.join("accounts.tsv");
    let feat = staged.join("features.jsonl");
    let input = fixture();

    ok(&tubewire(&["ingest", "--input", s(&input), "--out", s(&store)]));
    ok(&tubewire(&["classify", "--store", s(&store), "--out", s(&acc)]));
    ok(&tubewire(&["features", "--store", s(&store), "--out", s(&feat)]));
    ok(&tubewire(&[
        "lags",
        "--store",
        s(&store),
        "--by",
        "category,group,decile",
        "--accounts",
        s(&acc),
        "--features",
        s(&feat),
        "--out",
        s(&staged),
    ]));
    ok(&tubewire(&[
        "stats",
        "--store",
        s(&store),
        "--features",
        s(&feat),
        "--accounts",
        s(&acc),
        "--permutations",
        "200",
        "--seed",
        "3",
        "--out",
        s(&staged),
    ]));
    ok(&tubewire(&[
        "predict",
        "--store",
        s(&store),
        "--accounts",
        s(&acc),
        "--seed",
        "3",
        "--out",
        s(&staged),
    ]));
    ok(&tubewire(&[
        "cluster",
        "--store",
        s(&store),
        "--features",
        s(&feat),
        "--permutations",
        "200",
        "--seed",
        "3",
        "--out",
        s(&staged),
    ]));
    let out = tubewire(&[
        "run",
        "--input",
        s(&input),
        "--seed",
        "3",
        "--permutations",
        "200",
        "--out",
        s(&whole),
    ]);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("manifest sha256 "));

    let mut pieces = tree(&staged);
    pieces.extend(tree(&store));
    let run = tree(&whole);
    for (name, bytes) in &run {
        if name == "manifest.json" {
            continue;
        }
        let staged = pieces
            .get(name)
            .unwrap_or_else(|| panic!("{name} not produced by the stage commands"));
        assert!(staged == bytes, "{name} differs between stage commands and run");
    }
}

#[test]
fn thread_count_does_not_change_outputs() {
    let work = tempfile::tempdir().unwrap();
    let input = fixture();
    let mut trees = Vec::new();
    for (i, env) in [[("TUBEWIRE_THREADS", "1")], [("TUBEWIRE_THREADS", "3")]]
        .iter()
        .enumerate()
    {
        let dir = work.path().join(i.to_string());
        ok(&tubewire_env(
            &["run", "--input", s(&input), "--permutations", "200", "--out", s(&dir)],
            env,
        ));
        trees.push(tree(&dir));
    }
    assert_eq!(trees[0], trees[1]);
}

#[test]
fn environment_mirrors_threads_flag() {
    let work = tempfile::tempdir().unwrap();
    let out = tubewire_env(
        &["synth", "--users", "10", "--out", s(work.path())],
        &[("TUBEWIRE_THREADS", "0")],
    );
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(stderr(&out).contains("at least 1"));
    let out = tubewire(&["--threads", "0", "synth", "--users", "10", "--out", s(work.path())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn synth_reproduces_the_fixture() {
    let work = tempfile::tempdir().unwrap();
    let input = fixture();
    ok(&tubewire(&[
        "synth",
        "--synth-config",
        s(&input.join("synth.toml")),
        "--out",
        s(work.path()),
    ]));
    let fresh = tree(work.path());
    let committed = tree(&input);
    for (name, bytes) in &fresh {
        assert!(
            committed.get(name) == Some(bytes),
            "{name} differs from the committed fixture"
        );
    }
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(tubewire(&["--help"]).status.code(), Some(0));
    assert_eq!(tubewire(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_mistakes_exit_one() {
    assert_eq!(tubewire(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(tubewire(&["ingest"]).status.code(), Some(1));
    let out = tubewire(&["cluster", "--store", "x", "--linkage", "ward"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn predict_without_accounts_points_at_classify() {
    let work = tempfile::tempdir().unwrap();
    let store = work.path().join("store");
    ok(&tubewire(&["ingest", "--input", s(&fixture()), "--out", s(&store)]));
    let out = tubewire(&[
        "predict",
        "--store",
        s(&store),
        "--accounts",
        s(&work.path().join("accounts.tsv")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("tubewire classify"), "{}", stderr(&out));
}

#[test]
fn stage_on_missing_store_points_at_ingest() {
    let work = tempfile::tempdir().unwrap();
    let out = tubewire(&["classify", "--store", s(&work.path().join("nowhere"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("tubewire ingest"), "{}", stderr(&out));
}

#[test]
fn malformed_input_is_a_validation_error() {
    let work = tempfile::tempdir().unwrap();
    for name in ["users.jsonl", "videos.jsonl", "events.jsonl", "neighbors.jsonl"] {
        fs::copy(fixture().join(name), work.path().join(name)).unwrap();
    }
    let events = work.path().join("events.jsonl");
    let mut text = fs::read_to_string(&events).unwrap();
    text.push_str("{\"tweet_id\": \n");
    fs::write(&events, text).unwrap();
    let out = tubewire(&[
        "ingest",
        "--input",
        s(work.path()),
        "--out",
        s(&work.path().join("store")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("events.jsonl"), "{}", stderr(&out));

    let out = tubewire(&[
        "ingest",
        "--input",
        s(&work.path().join("absent")),
        "--out",
        s(&work.path().join("store")),
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn unwritable_output_is_an_internal_error() {
    let work = tempfile::tempdir().unwrap();
    let blocker = work.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let out = tubewire(&["synth", "--users", "20", "--out", s(&blocker.join("sub"))]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn missing_or_invalid_config_exits_one() {
    let work = tempfile::tempdir().unwrap();
    let out = tubewire(&[
        "--config",
        s(&work.path().join("none.toml")),
        "synth",
        "--users",
        "10",
        "--out",
        s(work.path()),
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    let bad = work.path().join("bad.toml");
    fs::write(&bad, "permutations = 5\n").unwrap();
    let out = tubewire(&[
        "--config",
        s(&bad),
        "run",
        "--input",
        s(&fixture()),
        "--out",
        s(&work.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(stderr(&out).contains("permutations"), "{}", stderr(&out));
}
