use std::fs;
use std::path::Path;

use chansim::cli::run_from;
use chansim::ChannelDataset;

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn gen_tdl(out: &str, count: &str, seed: &str) -> i32 {
    run_from([
        "chansim", "gen-tdl", "--profile", "tdl-a", "--subcarriers", "12", "--symbols", "4", "--scs-khz", "60",
        "--duration-ms", "0.25", "--doppler-hz", "800", "--delay-spread-ns", "30", "--count", count, "--seed", seed,
        "--out", out,
    ])
}

#[test]
fn single_sample_is_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(gen_tdl(&p(dir.path(), "a.chds"), "1", "77"), 0);
    assert_eq!(gen_tdl(&p(dir.path(), "b.chds"), "1", "77"), 0);
    assert_eq!(fs::read(dir.path().join("a.chds")).unwrap(), fs::read(dir.path().join("b.chds")).unwrap());
    let ds = ChannelDataset::read_chds(dir.path().join("a.chds")).unwrap();
    assert_eq!((ds.count(), ds.dim()), (1, 48));
    // Normalized by default.
    assert!((ds.mean_square_norm() - 48.0).abs() < 1e-9);
}

#[test]
fn raw_import_then_export_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let raw: Vec<u8> = (0..3 * 4 * 2)
        .flat_map(|i| (i as f64 * 0.37 - 2.0).to_le_bytes())
        .collect();
    fs::write(dir.path().join("in.bin"), &raw).unwrap();
    let code = run_from([
        "chansim", "import", "--input", &p(dir.path(), "in.bin"), "--format", "raw-interleaved-f64", "--dim", "4",
        "--out", &p(dir.path(), "x.chds"),
    ]);
    assert_eq!(code, 0);
    let code = run_from([
        "chansim", "export", "--input", &p(dir.path(), "x.chds"), "--format", "raw-interleaved-f64", "--out",
        &p(dir.path(), "out.bin"),
    ]);
    assert_eq!(code, 0);
    assert_eq!(fs::read(dir.path().join("out.bin")).unwrap(), raw);
}

#[test]
fn csv_import_reads_one_complex_sample() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("h.csv"), "1,0,0,0\n").unwrap();
    let code = run_from([
        "chansim", "import", "--input", &p(dir.path(), "h.csv"), "--format", "csv-complex", "--dim", "2", "--out",
        &p(dir.path(), "h.chds"),
    ]);
    assert_eq!(code, 0);
    let ds = ChannelDataset::read_chds(dir.path().join("h.chds")).unwrap();
    assert_eq!(ds.sample(0), &[num_complex::Complex64::new(1.0, 0.0), num_complex::Complex64::new(0.0, 0.0)]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_from(["chansim", "gen-tdl", "--bogus"]), 2);
    assert_eq!(gen_tdl(&p(dir.path(), "z.chds"), "0", "1"), 2);
    assert_eq!(
        run_from(["chansim", "report", "--input", &p(dir.path(), "missing.chds")]),
        3
    );
    assert_eq!(run_from(["chansim", "list-profiles"]), 0);
    assert_eq!(run_from(["chansim", "list-profiles", "--show", "no-such-profile"]), 2);
    fs::write(dir.path().join("bad.csv"), "1,0,0\n").unwrap();
    let code = run_from([
        "chansim", "import", "--input", &p(dir.path(), "bad.csv"), "--format", "csv-complex", "--dim", "2", "--out",
        &p(dir.path(), "bad.chds"),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn small_experiments_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    for (kind, extra, expect) in [
        ("compression", r#""latent_sizes":[4,8]"#, "compression.csv"),
        ("estimation", r#""snr_db":[0,10]"#, "estimation.csv"),
        ("generation", r#""snr_db":[20]"#, "gaussianity_report_"),
    ] {
        let out = dir.path().join(kind);
        let cfg = format!(
            r#"{{"experiment":"{kind}","profile":"tdl-a",
                "grid":{{"subcarriers":12,"symbols":4,"scs_khz":60,"duration_ms":0.25,"doppler_hz":800,"delay_spread_ns":30}},
                "train_count":3000,"validation_count":2500,"seed":5,"output_dir":"{}",{extra}}}"#,
            out.display()
        );
        let cfg_path = dir.path().join(format!("{kind}.json"));
        fs::write(&cfg_path, cfg).unwrap();
        assert_eq!(run_from(["chansim", "experiment", "--config", cfg_path.to_str().unwrap()]), 0, "{kind}");
        let names: Vec<String> = fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        assert!(names.iter().any(|n| n.starts_with(expect)), "{kind}: {names:?}");
    }
    let table = fs::read_to_string(dir.path().join("compression/compression.csv")).unwrap();
    assert_eq!(table.lines().next(), Some("n_latent,pca_nmse,analytic_nmse"));
    assert_eq!(table.lines().count(), 3);
}

#[test]
fn imported_two_point_mixture_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let n = 8;
    let a: Vec<(f64, f64)> = (0..n).map(|k| ((k as f64 * 1.3).cos(), (k as f64 * 0.7).sin())).collect();
    let b: Vec<(f64, f64)> = (0..n).map(|k| ((k as f64 * 2.9 + 0.4).sin(), (k as f64 * 0.3).cos())).collect();
    let mut csv = String::new();
    for i in 0..4000 {
        let phase = i as f64 * 0.618_034 * std::f64::consts::TAU;
        let (c, s) = (phase.cos(), phase.sin());
        let v = if (i * 7919) % 13 < 6 { &a } else { &b };
        let row: Vec<String> = v
            .iter()
            .flat_map(|&(re, im)| [format!("{}", re * c - im * s), format!("{}", re * s + im * c)])
            .collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    fs::write(dir.path().join("mix.csv"), csv).unwrap();
    let code = run_from([
        "chansim", "import", "--input", &p(dir.path(), "mix.csv"), "--format", "csv-complex", "--dim", "8",
        "--normalize", "--out", &p(dir.path(), "mix.chds"),
    ]);
    assert_eq!(code, 0);
    let code = run_from([
        "chansim", "report", "--input", &p(dir.path(), "mix.chds"), "--seed", "3", "--out", &p(dir.path(), "r.json"),
        "--cdf-out", &p(dir.path(), "cdf.csv"),
    ]);
    assert_eq!(code, 0);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "non-gaussian");
    let cdf = fs::read_to_string(dir.path().join("cdf.csv")).unwrap();
    assert!(cdf.starts_with("value,cumulative_probability\n"));
}
