//! The `occplan` binary end to end: exit codes, help, determinism and a full
//! pipeline run.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use occplan::geom::Vec2;
use occplan::grid::{GridGeometry, OccupancyGrid};
use occplan::io::grid_file::save_occupancy;

fn occplan(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_occplan"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn status(dir: &Path, args: &[&str]) -> i32 {
    occplan(dir, args).status.code().expect("exit code")
}

/// Every file under `root` with its bytes, sorted by relative path.
fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_path_buf();
                out.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn pgm_pixels(path: &Path) -> Vec<u8> {
    let bytes = fs::read(path).unwrap();
    let mut newlines = 0;
    let start = bytes
        .iter()
        .position(|&b| {
            newlines += (b == b'\n') as usize;
            newlines == 3
        })
        .unwrap();
    bytes[start + 1..].to_vec()
}

#[test]
fn help_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(status(d, &["--help"]), 0);
    for sub in [
        "sim",
        "fit-occupancy",
        "render",
        "plan",
        "eval",
        "train-residual",
    ] {
        let out = occplan(d, &[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub}");
        assert!(
            String::from_utf8_lossy(&out.stdout).contains("--out"),
            "{sub}"
        );
    }
    assert_eq!(status(d, &[]), 1);
    assert_eq!(status(d, &["teleport"]), 1);
    assert_eq!(status(d, &["sim", "--kind", "room", "--bogus"]), 1);
    assert_eq!(status(d, &["sim", "--kind", "volcano"]), 1);
    assert_eq!(status(d, &["sim", "--kind", "room", "--threads", "x"]), 1);
    assert_eq!(
        status(
            d,
            &["render", "--occ", "g.rswg", "--out", "r", "--pose", "1"]
        ),
        1
    );
    assert_eq!(
        status(d, &["fit-occupancy", "--sweeps", "s", "--out", "o.rswg"]),
        1,
        "no geometry source"
    );
}

#[test]
fn data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(
        status(d, &["render", "--occ", "missing.rswg", "--out", "r"]),
        2
    );
    fs::write(d.join("junk.rswg"), b"RSWG\x01").unwrap();
    assert_eq!(
        status(d, &["render", "--occ", "junk.rswg", "--out", "r"]),
        2
    );
    fs::write(d.join("bad.json"), b"{\"kind\": 3}").unwrap();
    assert_eq!(
        status(
            d,
            &[
                "eval",
                "--pred",
                "junk.rswg",
                "--scenario",
                "bad.json",
                "--out",
                "m.csv"
            ]
        ),
        2
    );
}

#[test]
fn sim_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for out in ["a", "b"] {
        let args = [
            "sim",
            "--kind",
            "stationary",
            "--count",
            "1",
            "--seed",
            "7",
            "--out",
            out,
        ];
        assert_eq!(status(d, &args), 0);
    }
    let a = tree(&d.join("a"));
    assert!(a.len() > 5);
    assert_eq!(a, tree(&d.join("b")));
}

#[test]
fn all_free_grid_renders_black() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let geom = GridGeometry::new(Vec2::new(-2.0, -1.0), 0.2, 20, 10, 3, 0.5).unwrap();
    let free = OccupancyGrid::from_hard(geom, &vec![false; geom.voxel_count()]).unwrap();
    save_occupancy(&d.join("free.rswg"), &free).unwrap();
    let args = [
        "render",
        "--occ",
        "free.rswg",
        "--out",
        "img",
        "--pose",
        "0.1,-0.3",
    ];
    assert_eq!(status(d, &args), 0);
    for t in 1..=3 {
        for stem in ["occupancy", "cost"] {
            let px = pgm_pixels(&d.join(format!("img/{stem}_t{t:02}.pgm")));
            assert_eq!(px.len(), 200);
            assert!(px.iter().all(|&p| p == 0), "{stem} t{t}");
        }
        let fs_px = pgm_pixels(&d.join(format!("img/freespace_t{t:02}.pgm")));
        assert_eq!(fs_px.len(), 200);
        // Nothing blocks the view, so every visited voxel is fully free.
        assert!(fs_px.iter().all(|&p| p == 0 || p == 255));
        assert!(fs_px.iter().filter(|&&p| p == 255).count() > 150);
    }
}

#[test]
fn crossing_pipeline_plans_without_collision() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let steps: [&[&str]; 4] = [
        &[
            "sim", "--kind", "crossing", "--count", "1", "--seed", "7", "--out", "s",
        ],
        &[
            "fit-occupancy",
            "--scenario",
            "s/scenario_000/scenario.json",
            "--sweeps",
            "s/scenario_000/sweeps",
            "--out",
            "occ.rswg",
        ],
        &[
            "plan",
            "--occ",
            "occ.rswg",
            "--past",
            "s/scenario_000/past.csv",
            "--bank",
            "s/bank.bin",
            "--out",
            "plan.csv",
        ],
        &[
            "eval",
            "--pred",
            "occ.rswg",
            "--scenario",
            "s/scenario_000/scenario.json",
            "--plan",
            "plan.csv",
            "--out",
            "metrics.csv",
        ],
    ];
    for args in steps {
        let out = occplan(d, args);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let text = fs::read_to_string(d.join("metrics.csv")).unwrap();
    let horizons: Vec<Vec<&str>> = text
        .lines()
        .filter(|l| l.starts_with("horizon,"))
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(horizons.len(), 3);
    for h in horizons {
        assert_eq!(h[8], "0", "box collision at {} s", h[1]);
    }
    let trace = fs::read_to_string(d.join("occ.loss.csv")).unwrap();
    assert!(trace.starts_with("iter,loss\n"));
}
