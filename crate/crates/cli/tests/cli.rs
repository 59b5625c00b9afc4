use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tlcr::image::{bicubic_upscale, degrade};
use tlcr::io::{encode_pgm, load_image, save_gray};
use tlcr::metrics::QualityReport;
use tlcr::synth::synth_faces;

fn tlcr(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tlcr"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn tlcr")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn degrade_and_upscale_match_library_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let face = &synth_faces(1, 4, 100, 120)[0];
    save_gray(dir.path().join("face.pgm"), face).unwrap();

    ok(&tlcr(
        &["degrade", "face.pgm", "lr.pgm", "--scale", "4"],
        dir.path(),
    ));
    ok(&tlcr(
        &["upscale", "lr.pgm", "up.pgm", "--scale", "4"],
        dir.path(),
    ));

    // the library sees exactly what the binary reads from disk
    let input = load_image(dir.path().join("face.pgm"))
        .unwrap()
        .into_luminance();
    let lr = degrade(&input, 4).unwrap();
    let lr_disk = load_image(dir.path().join("lr.pgm"))
        .unwrap()
        .into_luminance();
    let up = bicubic_upscale(&lr_disk, 4).unwrap();
    assert_eq!(
        fs::read(dir.path().join("lr.pgm")).unwrap(),
        encode_pgm(&lr)
    );
    assert_eq!(
        fs::read(dir.path().join("up.pgm")).unwrap(),
        encode_pgm(&up)
    );
    assert_eq!(
        load_image(dir.path().join("lr.pgm")).unwrap().dims(),
        (25, 30)
    );
    assert_eq!(
        load_image(dir.path().join("up.pgm")).unwrap().dims(),
        (100, 120)
    );
}

#[test]
fn io_errors_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = tlcr(&["degrade", "missing.pgm", "lr.pgm"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.pgm"));

    save_gray(dir.path().join("odd.pgm"), &synth_faces(1, 0, 30, 30)[0]).unwrap();
    let out = tlcr(
        &["degrade", "odd.pgm", "lr.pgm", "--scale", "4"],
        dir.path(),
    );
    assert!(!out.status.success());
}

#[test]
fn run_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    ok(&tlcr(
        &[
            "synth", "--count", "4", "--width", "32", "--height", "32", "--out", "faces",
        ],
        dir.path(),
    ));
    let out = tlcr(&["run", "faces", "--window", "13"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("step"));

    fs::write(dir.path().join("bad.json"), r#"{"config": {"tau": -1}}"#).unwrap();
    let out = tlcr(&["run", "faces", "--config", "bad.json"], dir.path());
    assert!(!out.status.success());
}

#[test]
fn summary_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    ok(&tlcr(
        &[
            "synth", "--count", "8", "--width", "32", "--height", "40", "--seed", "2", "--out",
            "faces",
        ],
        dir.path(),
    ));
    ok(&tlcr(
        &[
            "run",
            "faces",
            "--test-count",
            "2",
            "--k",
            "20",
            "--rl-iters",
            "1",
            "--seed",
            "3",
            "--out",
            "a",
        ],
        dir.path(),
    ));
    // re-feed the recorded spec, only redirecting the output
    ok(&tlcr(
        &["run", "--config", "a/summary.json", "--out", "b"],
        dir.path(),
    ));
    for f in ["metrics.csv", "metrics_iter0.csv", "rl_trend.csv"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }

    let out = tlcr(&["metrics", "a/images", "faces"], dir.path());
    ok(&out);
    // scored from 8-bit files, so close to but not equal to the in-memory report
    let from_files = QualityReport::read_csv(out.stdout.as_slice()).unwrap();
    let in_memory =
        QualityReport::read_csv(fs::File::open(dir.path().join("a/metrics.csv")).unwrap()).unwrap();
    assert_eq!(from_files.per_image.len(), in_memory.per_image.len());
    for (a, b) in from_files.per_image.iter().zip(&in_memory.per_image) {
        assert_eq!(a.id, b.id);
        assert!((a.psnr_db - b.psnr_db).abs() < 0.1, "{a:?} vs {b:?}");
    }
}

#[test]
fn sweep_reuses_finished_sub_runs() {
    let dir = tempfile::tempdir().unwrap();
    ok(&tlcr(
        &[
            "synth", "--count", "6", "--width", "32", "--height", "32", "--out", "faces",
        ],
        dir.path(),
    ));
    let args = [
        "sweep",
        "faces",
        "--test-count",
        "1",
        "--k",
        "10",
        "--rl-iters",
        "0",
        "--axis",
        "shift",
        "--values",
        "0,1",
        "--out",
        "sw",
    ];
    ok(&tlcr(&args, dir.path()));
    for sub in [
        "shift_0/position",
        "shift_0/context",
        "shift_1/position",
        "shift_1/context",
    ] {
        assert!(
            dir.path()
                .join("sw")
                .join(sub)
                .join("summary.json")
                .is_file(),
            "{sub}"
        );
    }
    let table = fs::read_to_string(dir.path().join("sw/sweep_shift.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);

    let kept = dir.path().join("sw/shift_0/context/metrics.csv");
    fs::remove_dir_all(dir.path().join("sw/shift_1/context")).unwrap();
    fs::remove_file(&kept).unwrap();
    ok(&tlcr(&args, dir.path()));
    // untouched sub-run is reused, the deleted one regenerated
    assert!(!kept.exists());
    assert!(dir.path().join("sw/shift_1/context/metrics.csv").is_file());
    assert_eq!(
        fs::read_to_string(dir.path().join("sw/sweep_shift.csv")).unwrap(),
        table
    );
}
