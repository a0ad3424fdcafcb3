//! Experiment configuration files.
//!
//! The format is flat TOML: one `key = value` per line, lists in brackets.
//!
//! ```toml
//! ensemble = "CUE"        # CUE | COE | QKT | QKT-oe
//! dim = 256               # QKT: dim = 2j + 1, or give j directly
//! deltas = [0.1, 0.2, 0.3]
//! seeds = [1, 2, 3]
//! ```
//!
//! Optional keys and their defaults:
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `j` | from `dim` | spin for QKT; for QKT-oe the subspace dimension |
//! | `k` | 12 | kick strength |
//! | `perturbation` | `qubit` for CUE/COE, `spin` otherwise | collective z-rotation form |
//! | `eigenstates` | `"all"` | or an integer sample size |
//! | `eigenstate_seed` | 0 | seed for sampled eigenstates |
//! | `window_start`, `window_count` | 2000, 2000 | time-average window |
//! | `estimator` | `both` | `ipr`, `time-average` or `both` |
//! | `bins` | 101 | LDOS histogram bins |
//! | `fit_delta_min`, `fit_delta_max` | automatic | power-law window |
//! | `compare_ensemble` | none | second ensemble run on the same grid, for the ratio |
//! | `inset_deltas` | `[]` | deltas for which averaged decay series and LDOS are kept |
//! | `inset_steps` | 200 | length of those series |
//! | `output_dir` | `results` | where `run` writes |
//! | `workers` | 1 | worker threads |
//! | `cache_dir` | none | directory where generated maps are stored and reused |

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ensembles::{Ensemble, PerturbationForm, Spin, DEFAULT_KICK};
use crate::error::{Error, Result};
use crate::fidelity::{Estimator, DEFAULT_LDOS_BINS, DEFAULT_WINDOW};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    ensemble: String,
    dim: Option<usize>,
    j: Option<f64>,
    k: Option<f64>,
    perturbation: Option<String>,
    deltas: Vec<f64>,
    seeds: Vec<u64>,
    eigenstates: Option<toml::Value>,
    eigenstate_seed: Option<u64>,
    window_start: Option<usize>,
    window_count: Option<usize>,
    estimator: Option<String>,
    bins: Option<usize>,
    fit_delta_min: Option<f64>,
    fit_delta_max: Option<f64>,
    compare_ensemble: Option<String>,
    inset_deltas: Option<Vec<f64>>,
    inset_steps: Option<usize>,
    output_dir: Option<PathBuf>,
    workers: Option<usize>,
    cache_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum EigenstateSelection {
    All,
    Sample { count: usize, seed: u64 },
}

/// System definition shared by every realization in a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub ensemble: Ensemble,
    /// Dimension of the space the map acts on (the subspace for QKT-oe).
    pub dim: usize,
    /// `2j` for kicked-top systems.
    pub twice_j: Option<u32>,
    pub k: f64,
    pub perturbation: PerturbationForm,
}

impl SystemSpec {
    pub fn spin(&self) -> Option<Spin> {
        self.twice_j.map(|t| Spin::new(t as f64 / 2.0).expect("validated spin"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: SystemSpec,
    pub deltas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub eigenstates: EigenstateSelection,
    pub window: (usize, usize),
    pub estimators: Vec<Estimator>,
    pub bins: usize,
    pub fit_window: Option<(f64, f64)>,
    pub compare: Option<SystemSpec>,
    pub inset_deltas: Vec<f64>,
    pub inset_steps: usize,
    #[serde(skip)]
    pub output_dir: PathBuf,
    #[serde(skip)]
    pub workers: usize,
    #[serde(skip)]
    pub cache_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// SHA-256 of the canonical JSON form, excluding where and how the run
    /// executes.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The systems this run sweeps, primary first.
    pub fn systems(&self) -> Vec<SystemSpec> {
        std::iter::once(self.system).chain(self.compare).collect()
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn parse_error(text: &str, err: toml::de::Error) -> Error {
    let location = match err.span() {
        Some(span) => format!("line {}", line_of(text, span.start)),
        None => "config".to_string(),
    };
    Error::Parse {
        location,
        message: err.message().trim().to_string(),
    }
}

fn semantic(msg: impl Into<String>) -> Error {
    Error::Semantic(msg.into())
}

fn parse_ensemble(field: &str, s: &str) -> Result<Ensemble> {
    Ensemble::parse(s).ok_or_else(|| Error::Parse {
        location: format!("field `{field}`"),
        message: format!("unknown ensemble {s:?}; expected CUE, COE, QKT or QKT-oe"),
    })
}

fn resolve_system(
    ensemble: Ensemble,
    dim: Option<usize>,
    j: Option<f64>,
    k: Option<f64>,
    perturbation: Option<&str>,
) -> Result<SystemSpec> {
    let k = k.unwrap_or(DEFAULT_KICK);
    if !k.is_finite() {
        return Err(semantic("kick strength must be finite"));
    }
    let (dim, spin) = match ensemble {
        Ensemble::Cue | Ensemble::Coe => {
            if j.is_some() {
                return Err(semantic(format!("`j` does not apply to {ensemble}")));
            }
            let dim = dim.ok_or_else(|| semantic(format!("{ensemble} needs `dim`")))?;
            if dim < 2 {
                return Err(semantic(format!("dimension must be at least 2, got {dim}")));
            }
            (dim, None)
        }
        Ensemble::Qkt => {
            let spin = match (dim, j) {
                (Some(d), None) => Spin::from_dim(d)?,
                (None, Some(j)) => Spin::new(j)?,
                (Some(d), Some(j)) => {
                    let s = Spin::new(j)?;
                    if s.dim() != d {
                        return Err(semantic(format!("dim {d} contradicts j = {j} (2j+1 = {})", s.dim())));
                    }
                    s
                }
                (None, None) => return Err(semantic("QKT needs `dim` or `j`")),
            };
            (spin.dim(), Some(spin))
        }
        Ensemble::QktOe => {
            // the odd subspace of an even-j top has dimension j
            let j = match (dim, j) {
                (Some(d), None) => d as f64,
                (None, Some(j)) => j,
                (Some(d), Some(j)) if d as f64 == j => j,
                (Some(d), Some(j)) => {
                    return Err(semantic(format!("QKT-oe subspace dimension {d} contradicts j = {j}")))
                }
                (None, None) => return Err(semantic("QKT-oe needs `dim` or `j`")),
            };
            let spin = Spin::new(j)?;
            if !(spin.is_integer() && spin.twice_j() % 4 == 0) {
                return Err(semantic(format!(
                    "QKT-oe needs an even integer j so the odd subspace has dimension j, got {j}"
                )));
            }
            (spin.twice_j() as usize / 2, Some(spin))
        }
    };
    let form = match (perturbation.unwrap_or(match ensemble {
        Ensemble::Cue | Ensemble::Coe => "qubit",
        _ => "spin",
    }), ensemble)
    {
        ("qubit", Ensemble::QktOe) => {
            return Err(semantic("QKT-oe only supports the spin perturbation folded onto the subspace"))
        }
        ("qubit", _) => PerturbationForm::qubits_for_dim(dim).map_err(|_| {
            semantic(format!(
                "qubit perturbation needs a power-of-two dimension, got {dim}"
            ))
        })?,
        ("spin", Ensemble::Cue | Ensemble::Coe) => {
            PerturbationForm::spin(Spin::from_dim(dim)?)
        }
        ("spin", Ensemble::Qkt) => PerturbationForm::spin(spin.expect("kicked top has a spin")),
        ("spin", Ensemble::QktOe) => PerturbationForm::OddSubspaceJz {
            twice_j: spin.expect("kicked top has a spin").twice_j(),
        },
        (other, _) => {
            return Err(Error::Parse {
                location: "field `perturbation`".into(),
                message: format!("unknown perturbation {other:?}; expected qubit or spin"),
            })
        }
    };
    Ok(SystemSpec {
        ensemble,
        dim,
        twice_j: spin.map(Spin::twice_j),
        k,
        perturbation: form,
    })
}

fn check_grid(name: &str, deltas: &[f64], allow_empty: bool) -> Result<()> {
    if deltas.is_empty() && !allow_empty {
        return Err(semantic(format!("`{name}` must not be empty")));
    }
    if let Some(bad) = deltas.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Err(semantic(format!("`{name}` entries must be finite and >= 0, got {bad}")));
    }
    if deltas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(semantic(format!("`{name}` must be strictly increasing")));
    }
    Ok(())
}

/// Parses config text, fills defaults and rejects contradictions.
pub fn validate_config(raw: &str) -> Result<ExperimentConfig> {
    let cfg: RawConfig = toml::from_str(raw).map_err(|e| parse_error(raw, e))?;
    let ensemble = parse_ensemble("ensemble", &cfg.ensemble)?;
    let system = resolve_system(ensemble, cfg.dim, cfg.j, cfg.k, cfg.perturbation.as_deref())?;

    check_grid("deltas", &cfg.deltas, false)?;
    if cfg.seeds.is_empty() {
        return Err(semantic("at least one seed is required"));
    }
    let mut sorted = cfg.seeds.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(semantic("seeds must be distinct"));
    }
    if matches!(ensemble, Ensemble::Qkt | Ensemble::QktOe) && cfg.seeds.len() > 1 {
        return Err(semantic("the kicked top has no random realizations; give a single seed"));
    }

    let eigenstates = match &cfg.eigenstates {
        None => EigenstateSelection::All,
        Some(toml::Value::String(s)) if s == "all" => EigenstateSelection::All,
        Some(toml::Value::Integer(n)) if *n > 0 => {
            let count = *n as usize;
            if count > system.dim {
                return Err(semantic(format!(
                    "cannot sample {count} eigenstates from dimension {}",
                    system.dim
                )));
            }
            EigenstateSelection::Sample {
                count,
                seed: cfg.eigenstate_seed.unwrap_or(0),
            }
        }
        Some(other) => {
            return Err(Error::Parse {
                location: "field `eigenstates`".into(),
                message: format!("expected \"all\" or a positive integer, got {other}"),
            })
        }
    };
    if cfg.eigenstate_seed.is_some() && eigenstates == EigenstateSelection::All {
        return Err(semantic("`eigenstate_seed` given but all eigenstates are used"));
    }

    let window = (
        cfg.window_start.unwrap_or(DEFAULT_WINDOW.0),
        cfg.window_count.unwrap_or(DEFAULT_WINDOW.1),
    );
    if window.1 == 0 {
        return Err(semantic("`window_count` must be positive"));
    }
    let estimators = match cfg.estimator.as_deref().unwrap_or("both") {
        "ipr" => vec![Estimator::Ipr],
        "time-average" => vec![Estimator::TimeAverage],
        "both" => vec![Estimator::Ipr, Estimator::TimeAverage],
        other => {
            return Err(Error::Parse {
                location: "field `estimator`".into(),
                message: format!("unknown estimator {other:?}; expected ipr, time-average or both"),
            })
        }
    };
    let bins = cfg.bins.unwrap_or(DEFAULT_LDOS_BINS);
    if bins < 8 {
        return Err(semantic(format!("`bins` must be at least 8, got {bins}")));
    }
    let fit_window = match (cfg.fit_delta_min, cfg.fit_delta_max) {
        (None, None) => None,
        (Some(a), Some(b)) if a.is_finite() && b.is_finite() && 0.0 <= a && a < b => Some((a, b)),
        (Some(_), Some(_)) => return Err(semantic("fit window needs 0 <= fit_delta_min < fit_delta_max")),
        _ => return Err(semantic("give both `fit_delta_min` and `fit_delta_max` or neither")),
    };
    let compare = match cfg.compare_ensemble.as_deref() {
        None => None,
        Some(name) => {
            let other = parse_ensemble("compare_ensemble", name)?;
            let pair = [ensemble, other];
            if !(pair.contains(&Ensemble::Cue) && pair.contains(&Ensemble::Coe)) {
                return Err(semantic("`compare_ensemble` pairs CUE with COE"));
            }
            let perturbation = match system.perturbation {
                PerturbationForm::QubitCollectiveZ { .. } => "qubit",
                _ => "spin",
            };
            Some(resolve_system(other, Some(system.dim), None, cfg.k, Some(perturbation))?)
        }
    };
    let inset_deltas = cfg.inset_deltas.unwrap_or_default();
    check_grid("inset_deltas", &inset_deltas, true)?;
    let inset_steps = cfg.inset_steps.unwrap_or(200);
    if inset_steps < 2 {
        return Err(semantic("`inset_steps` must be at least 2"));
    }
    let workers = cfg.workers.unwrap_or(1);
    if workers == 0 {
        return Err(semantic("`workers` must be positive"));
    }
    Ok(ExperimentConfig {
        system,
        deltas: cfg.deltas,
        seeds: cfg.seeds,
        eigenstates,
        window,
        estimators,
        bins,
        fit_window,
        compare,
        inset_deltas,
        inset_steps,
        output_dir: cfg.output_dir.unwrap_or_else(|| PathBuf::from("results")),
        workers,
        cache_dir: cfg.cache_dir,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "ensemble = \"CUE\"\ndim = 64\ndeltas = [0.1]\nseeds = [1]\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = validate_config(MINIMAL).unwrap();
        assert_eq!(cfg.system.ensemble, Ensemble::Cue);
        assert_eq!(cfg.system.dim, 64);
        assert_eq!(cfg.window, (2000, 2000));
        assert_eq!(cfg.estimators, vec![Estimator::Ipr, Estimator::TimeAverage]);
        assert_eq!(cfg.bins, 101);
        assert_eq!(cfg.eigenstates, EigenstateSelection::All);
        assert_eq!(
            cfg.system.perturbation,
            PerturbationForm::QubitCollectiveZ { n_qubits: 6 }
        );
        assert_eq!(cfg.workers, 1);
    }

    #[test]
    fn qubit_form_needs_power_of_two() {
        let err = validate_config("ensemble = \"CUE\"\ndim = 100\ndeltas = [0.1]\nseeds = [1]\n").unwrap_err();
        assert!(matches!(err, Error::Semantic(ref m) if m.contains("power-of-two")), "{err}");
        // the spin form has no such restriction
        let cfg = validate_config(
            "ensemble = \"CUE\"\ndim = 100\nperturbation = \"spin\"\ndeltas = [0.1]\nseeds = [1]\n",
        )
        .unwrap();
        assert_eq!(cfg.system.perturbation, PerturbationForm::SpinJz { twice_j: 99 });
    }

    #[test]
    fn kicked_top_dim_resolves_to_half_integer_spin() {
        let cfg = validate_config("ensemble = \"QKT\"\ndim = 256\ndeltas = [0.01]\nseeds = [1]\n").unwrap();
        assert_eq!(cfg.system.spin().unwrap().value(), 127.5);
        assert_eq!(cfg.system.k, 12.0);
        assert_eq!(cfg.system.perturbation, PerturbationForm::SpinJz { twice_j: 255 });
    }

    #[test]
    fn odd_subspace_config() {
        let cfg = validate_config("ensemble = \"QKT-oe\"\nj = 128\ndeltas = [0.01]\nseeds = [1]\n").unwrap();
        assert_eq!(cfg.system.dim, 128);
        assert!(validate_config("ensemble = \"QKT-oe\"\nj = 127\ndeltas = [0.01]\nseeds = [1]\n").is_err());
        assert!(validate_config(
            "ensemble = \"QKT-oe\"\nj = 128\nperturbation = \"qubit\"\ndeltas = [0.01]\nseeds = [1]\n"
        )
        .is_err());
    }

    #[test]
    fn parse_errors_carry_line() {
        let err = validate_config("ensemble = \"CUE\"\ndim = 64\ndeltas = [0.1,\nseeds = [1]\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
        let err = validate_config("ensemble = \"CUE\"\ndim = 64\ndeltas = [0.1]\nseeds = [1]\ncolour = 3\n")
            .unwrap_err();
        match err {
            Error::Parse { location, message } => {
                assert_eq!(location, "line 5");
                assert!(message.contains("colour"), "{message}");
            }
            other => panic!("{other}"),
        }
        assert!(matches!(
            validate_config("ensemble = \"GUE\"\ndim = 64\ndeltas = [0.1]\nseeds = [1]\n"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn grid_and_seed_rules() {
        for bad in [
            "ensemble = \"CUE\"\ndim = 64\ndeltas = []\nseeds = [1]\n",
            "ensemble = \"CUE\"\ndim = 64\ndeltas = [0.2, 0.1]\nseeds = [1]\n",
            "ensemble = \"CUE\"\ndim = 64\ndeltas = [-0.1]\nseeds = [1]\n",
            "ensemble = \"CUE\"\ndim = 64\ndeltas = [0.1]\nseeds = []\n",
            "ensemble = \"CUE\"\ndim = 64\ndeltas = [0.1]\nseeds = [3, 3]\n",
            "ensemble = \"CUE\"\ndim = 64\ndeltas = [0.1]\nseeds = [1]\neigenstates = 65\n",
            "ensemble = \"CUE\"\ndim = 64\ndeltas = [0.1]\nseeds = [1]\nfit_delta_min = 0.3\n",
            "ensemble = \"CUE\"\ndim = 64\ndeltas = [0.1]\nseeds = [1]\ncompare_ensemble = \"QKT\"\n",
            "ensemble = \"QKT\"\ndim = 65\ndeltas = [0.1]\nseeds = [1, 2]\n",
        ] {
            assert!(validate_config(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn paired_run_and_sampling() {
        let cfg = validate_config(
            "ensemble = \"CUE\"\ndim = 64\ndeltas = [0.1]\nseeds = [1]\ncompare_ensemble = \"COE\"\neigenstates = 16\neigenstate_seed = 4\n",
        )
        .unwrap();
        assert_eq!(cfg.compare.unwrap().ensemble, Ensemble::Coe);
        assert_eq!(cfg.systems().len(), 2);
        assert_eq!(cfg.eigenstates, EigenstateSelection::Sample { count: 16, seed: 4 });
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = validate_config(MINIMAL).unwrap();
        let b = validate_config(&format!("{MINIMAL}output_dir = \"elsewhere\"\nworkers = 3\n")).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = validate_config(&MINIMAL.replace("0.1", "0.2")).unwrap();
        assert_ne!(a.hash(), c.hash());
    }
}
