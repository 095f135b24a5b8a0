use std::path::{Path, PathBuf};
use std::process::Command;

use ramanpair::io::RunManifest;
use ramanpair::schmidt::SchmidtReport;
use ramanpair_cli::{main_with, EXIT_INPUT, EXIT_OK};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn run(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["ramanpair"];
    argv.extend_from_slice(args);
    let code = main_with(argv, &mut out, &mut err);
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const FORWARD: &str = r#"
[medium]
dispersion = "sapphire-ordinary"
length = "8 mm"
raman_shift = "746.6 cm^-1"
linewidth = "11.0 cm^-1"

[pump]
wavelength = "775 nm"
fwhm = "7 nm"
"#;

#[test]
fn baseline_purity_converges_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("sapphire_fig3_baseline.toml");
    let r = run(&["purity", "--config", s(&cfg), "--output", s(dir.path())]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let report: SchmidtReport = serde_json::from_slice(
        &std::fs::read(dir.path().join("sapphire_fig3_baseline.json")).unwrap(),
    )
    .unwrap();
    assert!(report.converged);
    assert!((report.purity - 0.8347).abs() < 1e-3, "{}", report.purity);
    let m = RunManifest::load(&dir.path().join("sapphire_fig3_baseline.manifest.json")).unwrap();
    assert_eq!(m.command, "purity");
    assert!(m.verify_input().unwrap());
    assert_eq!(m.outputs.len(), 2);
    assert!(r.out.contains("converged"));
}

#[test]
fn missing_waist_is_a_config_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(
        &cfg,
        format!("{FORWARD}\n[geometry]\nmode = \"collinear-3d\"\n"),
    )
    .unwrap();
    let r = run(&["purity", "--config", s(&cfg), "--output", s(dir.path())]);
    assert_eq!(r.code, EXIT_INPUT);
    assert!(r.err.contains("geometry.pump_waist"), "{}", r.err);
    assert!(!dir.path().join("bad.json").exists());
}

#[test]
fn untagged_number_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, FORWARD.replace("\"8 mm\"", "8")).unwrap();
    let r = run(&["purity", "--config", s(&cfg)]);
    assert_eq!(r.code, EXIT_INPUT);
    assert!(r.err.contains("medium.length"), "{}", r.err);
}

#[test]
fn geometry_override_is_recorded_in_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.toml");
    // a short crystal keeps the backward grid small
    std::fs::write(&cfg, FORWARD.replace("\"8 mm\"", "\"0.5 mm\"")).unwrap();
    let r = run(&[
        "purity",
        "--config",
        s(&cfg),
        "--output",
        s(dir.path()),
        "--geometry",
        "backward",
        "-q",
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let m = RunManifest::load(&dir.path().join("short.manifest.json")).unwrap();
    assert_eq!(m.config.scenario.mode, ramanpair::GeometryMode::Backward);
    let report: SchmidtReport =
        serde_json::from_slice(&std::fs::read(dir.path().join("short.json")).unwrap()).unwrap();
    assert_eq!(report.geometry, ramanpair::GeometryMode::Backward);
    assert!(r.out.is_empty());
}

#[test]
fn empty_sweep_axis_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.toml");
    std::fs::write(
        &cfg,
        format!("{FORWARD}\n[sweep]\nkind = \"bandwidth\"\nvalues = []\n"),
    )
    .unwrap();
    let r = run(&["sweep", "--config", s(&cfg), "--output", s(dir.path())]);
    assert_eq!(r.code, EXIT_INPUT);
    assert!(r.err.contains("sweep"), "{}", r.err);
}

#[test]
fn sweep_csv_and_json_agree_row_for_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("fig7b_apodization.toml");
    let r = run(&[
        "sweep",
        "--config",
        s(&cfg),
        "--output",
        s(dir.path()),
        "-q",
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let csv = std::fs::read_to_string(dir.path().join("fig7b_apodization.csv")).unwrap();
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("fig7b_apodization.json")).unwrap())
            .unwrap();
    let rows = json["rows"].as_array().unwrap();
    let lines: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(lines.len(), rows.len());
    assert_eq!(rows.len(), 37);
    for (line, row) in lines.iter().zip(rows) {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols[1].to_bits(), row["angle"].as_f64().unwrap().to_bits());
        assert_eq!(cols[2].to_bits(), row["fwhm"].as_f64().unwrap().to_bits());
    }
}

#[test]
fn manifest_reproduces_outputs_and_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let cfg = configs().join("fig5b_fresnel.toml");
    let r = run(&["sweep", "--config", s(&cfg), "--output", s(&first), "-q"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let manifest = first.join("fig5b_fresnel.manifest.json");
    let r = run(&[
        "sweep",
        "--manifest-from",
        s(&manifest),
        "--output",
        s(&second),
        "--threads",
        "1",
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    assert!(r.out.contains("bit-identically"), "{}", r.out);
    for f in ["fig5b_fresnel.csv", "fig5b_fresnel.json"] {
        assert_eq!(
            std::fs::read(first.join(f)).unwrap(),
            std::fs::read(second.join(f)).unwrap(),
            "{f}"
        );
    }

    // wrong subcommand
    let r = run(&[
        "purity",
        "--manifest-from",
        s(&manifest),
        "--output",
        s(&second),
    ]);
    assert_eq!(r.code, EXIT_INPUT);

    // edited config no longer matches its hash
    let text = std::fs::read_to_string(&manifest).unwrap().replacen(
        "\"length\": 0.008",
        "\"length\": 0.004",
        1,
    );
    let edited = dir.path().join("edited.json");
    std::fs::write(&edited, text).unwrap();
    let r = run(&[
        "sweep",
        "--manifest-from",
        s(&edited),
        "--output",
        s(&second),
    ]);
    assert_eq!(r.code, EXIT_INPUT);
    assert!(r.err.contains("hash"), "{}", r.err);

    // overrides make it a different run
    let r = run(&[
        "sweep",
        "--manifest-from",
        s(&manifest),
        "--set",
        "pump.fwhm=3 nm",
    ]);
    assert_eq!(r.code, EXIT_INPUT);
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("fig3_bandwidth_2mm.toml");
    let mut files = Vec::new();
    for (t, exec) in [("1", "sequential"), ("3", "parallel")] {
        let out = dir.path().join(t);
        let set = format!("run.execution={exec}");
        let r = run(&[
            "sweep",
            "--config",
            s(&cfg),
            "--output",
            s(&out),
            "--threads",
            t,
            "--set",
            &set,
            "--set",
            "sweep.range={ from = \"2 nm\", to = \"20 nm\", points = 3 }",
            "-q",
        ]);
        assert_eq!(r.code, EXIT_OK, "{}", r.err);
        files.push(std::fs::read(out.join("fig3_bandwidth_2mm.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn tolerance_flag_reaches_the_refinement() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("sapphire_fig3_baseline.toml");
    let r = run(&[
        "purity",
        "--config",
        s(&cfg),
        "--output",
        s(dir.path()),
        "--tolerance",
        "1e-5",
        "-q",
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let m = RunManifest::load(&dir.path().join("sapphire_fig3_baseline.manifest.json")).unwrap();
    assert_eq!(m.config.refine.tolerance, 1e-5);
    let r = run(&["purity", "--config", s(&cfg), "--tolerance", "-1"]);
    assert_eq!(r.code, EXIT_INPUT);
}

#[test]
fn g2_from_flags_and_counts_file() {
    let r = run(&[
        "g2", "--n1", "1000", "--n2", "1000", "--n12", "100", "--pulses", "10000",
    ]);
    assert_eq!(r.code, EXIT_OK);
    assert!(r.out.contains("g2 = 1.000000"), "{}", r.out);

    let r = run(&[
        "g2", "--n1", "37", "--n2", "52", "--n12", "0", "--pulses", "1000",
    ]);
    assert_eq!(r.code, EXIT_OK);
    assert!(
        r.out.contains("g2 = 0.000000") && r.out.contains("no coincidences"),
        "{}",
        r.out
    );

    let r = run(&[
        "g2", "--n1", "0", "--n2", "52", "--n12", "0", "--pulses", "1000",
    ]);
    assert_eq!(r.code, EXIT_INPUT);

    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("counts.csv");
    std::fs::write(
        &counts,
        "N1,N2,N12,R\n1000,1000,100,10000\n2000,2000,400,10000\n",
    )
    .unwrap();
    let r = run(&[
        "g2",
        "--counts",
        s(&counts),
        "--output",
        s(dir.path()),
        "--stem",
        "hbt",
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("hbt.json")).unwrap()).unwrap();
    assert_eq!(json[1]["g2"], 1.0);
    assert_eq!(json[0]["purity"]["purity"], 0.0);
}

#[test]
fn g2_thermal_source_is_near_two() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(&[
        "g2",
        "--thermal",
        "11",
        "--output",
        s(dir.path()),
        "--stem",
        "th",
        "-q",
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("th.json")).unwrap()).unwrap();
    let (g2, se) = (
        json[0]["g2"].as_f64().unwrap(),
        json[0]["stderr"].as_f64().unwrap(),
    );
    assert!((g2 - 2.0).abs() < 3.0 * se, "{g2} ± {se}");
    assert_eq!(json[0]["pulses"], 1_000_000);
}

#[test]
fn fit_recovers_a_synthetic_line() {
    let dir = tempfile::tempdir().unwrap();
    let spectrum = dir.path().join("gain.txt");
    let mut text = String::from("# shift [cm^-1]  intensity\n");
    for i in 0..161 {
        let x = 700.0 + 0.6 * i as f64;
        let h = 5.5;
        text.push_str(&format!(
            "{x} {}\n",
            3.0 * h * h / ((x - 746.6f64).powi(2) + h * h) + 0.1
        ));
    }
    std::fs::write(&spectrum, text).unwrap();
    let r = run(&["fit", s(&spectrum), "--output", s(dir.path())]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    assert!(r.out.contains("shift     746.6"), "{}", r.out);
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("gain_fit.json")).unwrap()).unwrap();
    assert!((json["params"]["fwhm"].as_f64().unwrap() - 11.0).abs() < 1e-5);

    std::fs::write(&spectrum, "1 1\n2 1\n").unwrap();
    assert_eq!(run(&["fit", s(&spectrum)]).code, EXIT_INPUT);
}

#[test]
fn binary_reports_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_ramanpair");
    let ok = Command::new(exe)
        .args([
            "g2", "--n1", "4", "--n2", "4", "--n12", "1", "--pulses", "16",
        ])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let bad = Command::new(exe).args(["purity"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("--config"));
    let help = Command::new(exe).arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("ji-grid"));
}

#[test]
fn unconverged_run_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("sapphire_fig3_baseline.toml");
    // no refinement budget and an impossible tolerance
    let r = run(&[
        "purity",
        "--config",
        s(&cfg),
        "--output",
        s(dir.path()),
        "--tolerance",
        "1e-300",
        "--set",
        "refine.max_steps=1",
        "-q",
    ]);
    assert_eq!(r.code, ramanpair_cli::EXIT_UNCONVERGED, "{}", r.err);
    assert!(dir.path().join("sapphire_fig3_baseline.json").exists());
}

#[test]
fn ji_grid_writes_binary_maps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("sapphire_fig3_baseline.toml");
    let r = run(&[
        "ji-grid",
        "--config",
        s(&cfg),
        "--output",
        s(dir.path()),
        "--stem",
        "ji",
        "-q",
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let bytes = std::fs::read(dir.path().join("ji_momentum.rpgrid")).unwrap();
    let g = ramanpair::io::BinaryGrid::from_bytes(&bytes).unwrap();
    assert_eq!(g.header.axes[0].len, 121);
    assert_eq!(g.header.axes[1].unit, "1/m");
    assert_eq!(g.data.iter().cloned().fold(0.0, f64::max), 1.0);
}
