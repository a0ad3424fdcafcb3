//! Output-directory behaviour of the runner.

use std::fs;

use loschmidt::ensembles::PerturbationForm;
use loschmidt::experiment::runner::{read_rows_csv, RESULTS_CSV, RESULTS_JSON};
use loschmidt::experiment::{run_in_directory, validate_config, ExperimentResult};

#[test]
fn completed_rows_are_flushed_when_a_cell_fails() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = validate_config(
        "ensemble = \"CUE\"\ndim = 16\ndeltas = [0.0, 0.3]\nseeds = [1]\nwindow_start = 10\nwindow_count = 10\n",
    )
    .unwrap();
    cfg.output_dir = dir.path().join("out");
    // generator of the wrong dimension: only the unperturbed cell succeeds
    cfg.system.perturbation = PerturbationForm::QubitCollectiveZ { n_qubits: 3 };
    let err = run_in_directory(&cfg, false).unwrap_err();
    assert_eq!(err.kind(), "dimension_mismatch");
    assert!(err.to_string().contains("delta 0.3"), "{err}");
    let rows = read_rows_csv(&fs::read_to_string(cfg.output_dir.join(RESULTS_CSV)).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.delta == 0.0 && (r.f_inf_mean - 1.0).abs() < 1e-12));
    assert!(!cfg.output_dir.join(RESULTS_JSON).exists());
}

#[test]
fn sidecar_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = validate_config(
        "ensemble = \"COE\"\ndim = 16\ndeltas = [0.3, 0.6]\nseeds = [1]\nwindow_start = 10\nwindow_count = 10\ncompare_ensemble = \"CUE\"\n",
    )
    .unwrap();
    cfg.output_dir = dir.path().to_path_buf();
    let res = run_in_directory(&cfg, false).unwrap();
    let back = ExperimentResult::load(dir.path()).unwrap();
    assert_eq!(back, res);
    assert_eq!(res.provenance.config_hash, cfg.hash());
    assert_eq!(res.systems.len(), 2);
    assert_eq!(res.rows.len(), 2 * 2 * 2);
}
