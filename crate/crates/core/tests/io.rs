use std::fs;

use cascade_core::config::{parse_config, ExperimentConfig, Mode};
use cascade_core::experiment::{run_experiment, RunReport};
use cascade_core::grid::Grid2D;
use cascade_core::output::write_trajectory;
use cascade_core::par::Execution;
use cascade_core::presets::{preset_vorticity, Preset, PresetParams};
use proptest::prelude::*;
use tempfile::TempDir;

#[test]
fn field_mode_run_matches_preset_mode() {
    let dir = TempDir::new().unwrap();
    let omega = preset_vorticity(Preset::Quadrupole, &PresetParams::default(), 128, 4, 0).unwrap();
    let field_path = dir.path().join("omega.grid");
    omega.write(&field_path).unwrap();

    let mut from_preset = ExperimentConfig::preset(Preset::Quadrupole, 512.0, 4);
    from_preset.grid_n = 128;
    let mut from_field = from_preset.clone();
    from_field.mode = Mode::Field;
    from_field.preset = None;
    from_field.field_path = Some(field_path);

    let a = run_experiment(&from_preset, Execution::default()).unwrap();
    let b = run_experiment(&from_field, Execution::default()).unwrap();
    for (sa, sb) in a.trajectory.samples.iter().zip(&b.trajectory.samples) {
        assert_eq!(sa.state.h, sb.state.h);
    }
}

#[test]
fn written_artifacts_are_consistent() {
    let dir = TempDir::new().unwrap();
    let mut config = ExperimentConfig::preset(Preset::RandomBands, 1024.0, 5);
    config.grid_n = 128;
    config.sample_interval = 3;
    let out = run_experiment(&config, Execution::default()).unwrap();
    write_trajectory(&out.trajectory, &out.report, dir.path()).unwrap();

    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count() - 1, out.trajectory.samples.len() * 5);
    for row in csv.lines().skip(1) {
        let f: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
        let det = f[2] * f[5] - f[3] * f[4];
        assert!((det - f[6]).abs() < 1e-12);
        assert!(f[7] >= 1.0 - 1e-12);
    }

    let json = fs::read_to_string(dir.path().join("report.json")).unwrap();
    let report: RunReport = serde_json::from_str(&json).unwrap();
    assert_eq!(report, out.report);
    let reparsed = parse_config(&serde_json::to_string(&report.config).unwrap()).unwrap();
    assert_eq!(reparsed, config);

    let bands = fs::read_to_string(dir.path().join("bands.csv")).unwrap();
    assert!(bands.lines().last().unwrap().starts_with("total,"));
}

#[test]
fn truncated_grid_file_is_rejected() {
    let dir = TempDir::new().unwrap();
    let g = Grid2D::from_fn(8, 1.0, |x, y| x * y).unwrap();
    let path = dir.path().join("g.grid");
    let mut bytes = g.to_bytes();
    bytes.truncate(bytes.len() - 8);
    fs::write(&path, bytes).unwrap();
    assert!(Grid2D::read(&path).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn grid_files_round_trip(k in 1u32..5, l in 0.1f64..10.0, seed in any::<u64>()) {
        let g = Grid2D::from_fn(1 << k, l, |x, y| ((seed as f64) * 1e-3 + 3.0 * x - y).sin()).unwrap();
        let back = Grid2D::from_bytes(&g.to_bytes()).unwrap();
        prop_assert_eq!(back, g);
    }
}
