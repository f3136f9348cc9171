use qlink_core::config::{echo_architecture, RunConfig};
use qlink_core::experiments::output::{write_outputs, Format, RunContext};
use qlink_core::experiments::{run_matrix_experiment, run_loss_sweep, LossSweepSpec};

const LINK: &str = "\
link.scheme = fmf_lantern
link.dimension = 2
link.visibility = 1
source.mean_photon_number = 0.4
lanterns.insertion_loss_db = 0
lantern_mux.extinction_db = -inf, -inf
lantern_mux.crosstalk_phase = 0
lantern_demux.extinction_db = -inf, -inf
lantern_demux.crosstalk_phase = 0
detector.dark_count_prob = 0
";

#[test]
fn config_to_matrix_files() {
    let cfg = RunConfig::parse(LINK).unwrap().resolve().unwrap();
    let exp = run_matrix_experiment(&cfg, 20_000, 9).unwrap();
    // Noiseless, lossless link: every sent state lands on its own detector.
    assert!((exp.mean_diagonal - 1.0).abs() < 1e-12);
    assert!((exp.implied_visibility - 1.0).abs() < 1e-12);

    let tmp = tempfile::tempdir().unwrap();
    let ctx = RunContext {
        seed: 9,
        timestamp: 42,
        dir: tmp.path().join("nested"),
        format: Format::Csv,
        config_echo: echo_architecture(&cfg),
    };
    let files = write_outputs(&exp, &ctx).unwrap();
    let names: Vec<String> = files
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, ["matrix_42_9.csv", "matrix_42_9.plot.csv", "matrix_42_9.manifest.txt"]);

    // The echoed configuration parses back to the same link.
    let manifest = std::fs::read_to_string(&files[2]).unwrap();
    let echoed: String = manifest
        .split("# configuration\n")
        .nth(1)
        .unwrap()
        .lines()
        .take_while(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    assert_eq!(RunConfig::parse(&echoed).unwrap().resolve().unwrap(), cfg);
}

#[test]
fn noiseless_link_never_crosses_threshold() {
    let cfg = RunConfig::parse(LINK).unwrap().resolve().unwrap();
    let sweep = run_loss_sweep(&cfg, &LossSweepSpec::default()).unwrap();
    assert!(sweep.threshold_db.is_none());
    assert!(sweep.rows.iter().all(|r| r.qber < 1e-12));
}
