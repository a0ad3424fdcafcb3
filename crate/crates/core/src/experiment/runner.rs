//! Sweeps over realizations and perturbation strengths, collecting
//! eigenstate-averaged saturation levels and the fits built on them.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{EigenstateSelection, ExperimentConfig, SystemSpec};
use crate::analysis::{
    default_decay_floor, ensemble_ratio, fgr_window, fit_exponential_decay, fit_lorentzian,
    fit_power_law, strong_perturbation_floor, FitResult, SaturationCurve,
};
use crate::ensembles::{
    kicked_top, make_coe, perturbation_generator_variance, perturbed_map, restricted_kicked_top,
    sample_cue, seeded_rng, Ensemble, KickedTopParams, OperatorCache, PerturbationSpec,
};
use crate::error::{Error, Result};
use crate::fidelity::{
    averaged_spectral_series, gamma_theory, ldos, saturation_ipr, time_averages, Estimator,
    FidelityMethod, FidelitySeries, InitialState, LdosHistogram, LdosSource,
};
use crate::linalg::{
    overlap_matrix, spectral_decompose, Provenance, SpectralDecomposition, UnitaryOperator,
};

pub const RESULTS_CSV: &str = "results.csv";
pub const RESULTS_JSON: &str = "results.json";
pub const MANIFEST_JSON: &str = "manifest.json";
pub const CSV_HEADER: &str = "ensemble,N,seed,delta,estimator,f_inf_mean,f_inf_stderr,n_eigenstates";

/// Eigenstate-averaged saturation level for one realization and strength.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub ensemble: Ensemble,
    #[serde(rename = "N")]
    pub dim: usize,
    pub seed: u64,
    pub delta: f64,
    pub estimator: Estimator,
    pub f_inf_mean: f64,
    pub f_inf_stderr: f64,
    pub n_eigenstates: usize,
}

impl ResultRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.ensemble,
            self.dim,
            self.seed,
            self.delta,
            self.estimator,
            self.f_inf_mean,
            self.f_inf_stderr,
            self.n_eigenstates
        )
    }

    pub fn parse_csv_line(line: &str, line_no: usize) -> Result<Self> {
        let bad = |what: &str| Error::Parse {
            location: format!("{RESULTS_CSV} line {line_no}"),
            message: format!("bad {what} in {line:?}"),
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(bad("column count"));
        }
        let estimator = match f[4] {
            "ipr" => Estimator::Ipr,
            "time-average" => Estimator::TimeAverage,
            "random-state-sum" => Estimator::RandomStateSum,
            _ => return Err(bad("estimator")),
        };
        Ok(Self {
            ensemble: Ensemble::parse(f[0]).ok_or_else(|| bad("ensemble"))?,
            dim: f[1].parse().map_err(|_| bad("N"))?,
            seed: f[2].parse().map_err(|_| bad("seed"))?,
            delta: f[3].parse().map_err(|_| bad("delta"))?,
            estimator,
            f_inf_mean: f[5].parse().map_err(|_| bad("f_inf_mean"))?,
            f_inf_stderr: f[6].parse().map_err(|_| bad("f_inf_stderr"))?,
            n_eigenstates: f[7].parse().map_err(|_| bad("n_eigenstates"))?,
        })
    }
}

pub fn write_rows_csv<W: Write>(rows: &[ResultRow], mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.to_csv_line())?;
    }
    Ok(())
}

pub fn read_rows_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                location: format!("{RESULTS_CSV} line 1"),
                message: format!("expected header {CSV_HEADER:?}"),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| ResultRow::parse_csv_line(l.trim_end(), i + 1))
        .collect()
}

/// Per-system constants needed to interpret the rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSummary {
    pub ensemble: Ensemble,
    pub dim: usize,
    pub lambda_sq: f64,
    pub spec: SystemSpec,
}

/// Averaged decay series and LDOS kept for the inset figures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InsetData {
    pub ensemble: Ensemble,
    pub dim: usize,
    pub seed: u64,
    pub delta: f64,
    pub n_eigenstates: usize,
    pub gamma_theory: f64,
    pub series: Vec<f64>,
    pub ldos_edges: Vec<f64>,
    pub ldos_weights: Vec<f64>,
    pub decay_fit: Option<FitResult>,
    pub lorentzian_fit: Option<FitResult>,
}

impl InsetData {
    pub fn series(&self) -> FidelitySeries {
        FidelitySeries {
            values: self.series.clone(),
            method: FidelityMethod::Spectral,
            initial_state: InitialState::Averaged,
        }
    }

    pub fn ldos(&self) -> LdosHistogram {
        LdosHistogram {
            bin_edges: self.ldos_edges.clone(),
            weights: self.ldos_weights.clone(),
            source: LdosSource::Averaged,
            fitted_width: self.lorentzian_fit.as_ref().map(|f| f.param("width")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioCheck {
    pub numerator: Ensemble,
    pub denominator: Ensemble,
    pub value: f64,
    pub delta_min: f64,
    pub delta_max: f64,
}

/// Seed-averaged level at the largest strength compared with `(4 - beta)/N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloorCheck {
    pub ensemble: Ensemble,
    pub delta: f64,
    pub f_inf: f64,
    pub floor: f64,
    pub relative_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunProvenance {
    pub config_hash: String,
    pub tool_version: String,
    /// Seconds since the Unix epoch at completion.
    pub timestamp: u64,
    pub eigenstates: EigenstateSelection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
    pub systems: Vec<SystemSummary>,
    pub fits: Vec<FitResult>,
    pub ratio: Option<RatioCheck>,
    pub floor_checks: Vec<FloorCheck>,
    pub insets: Vec<InsetData>,
    /// Fits that were configured but could not be made, with the reason.
    pub notes: Vec<String>,
    pub provenance: RunProvenance,
}

impl ExperimentResult {
    pub fn system(&self, ensemble: Ensemble) -> Option<&SystemSummary> {
        self.systems.iter().find(|s| s.ensemble == ensemble)
    }

    /// Saturation curve for one ensemble and estimator, for a single seed or
    /// averaged over all seeds.
    pub fn curve(&self, ensemble: Ensemble, estimator: Estimator, seed: Option<u64>) -> Result<SaturationCurve> {
        let sys = self
            .system(ensemble)
            .ok_or_else(|| Error::InvalidArgument(format!("no {ensemble} system in result")))?;
        let mut by_delta: Vec<(f64, f64, usize)> = Vec::new();
        for r in self.rows.iter().filter(|r| {
            r.ensemble == ensemble && r.estimator == estimator && seed.map_or(true, |s| r.seed == s)
        }) {
            match by_delta.iter_mut().find(|(d, _, _)| *d == r.delta) {
                Some(entry) => {
                    entry.1 += r.f_inf_mean;
                    entry.2 += 1;
                }
                None => by_delta.push((r.delta, r.f_inf_mean, 1)),
            }
        }
        if by_delta.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "no {estimator} rows for {ensemble}"
            )));
        }
        by_delta.sort_by(|a, b| a.0.total_cmp(&b.0));
        SaturationCurve::new(
            by_delta.iter().map(|e| e.0).collect(),
            by_delta.iter().map(|e| e.1 / e.2 as f64).collect(),
            ensemble,
            sys.dim,
            sys.lambda_sq,
        )
    }

    /// Estimator used for fits: the IPR level when present.
    pub fn primary_estimator(&self) -> Estimator {
        if self.rows.iter().any(|r| r.estimator == Estimator::Ipr) {
            Estimator::Ipr
        } else {
            Estimator::TimeAverage
        }
    }

    pub fn seeds(&self, ensemble: Ensemble) -> Vec<u64> {
        let mut seen = Vec::new();
        for r in self.rows.iter().filter(|r| r.ensemble == ensemble) {
            if !seen.contains(&r.seed) {
                seen.push(r.seed);
            }
        }
        seen
    }

    /// Reads a result from its JSON sidecar. Accepts the sidecar itself, the
    /// CSV next to it, or the directory holding both.
    pub fn load(path: &Path) -> Result<Self> {
        let json = if path.is_dir() {
            path.join(RESULTS_JSON)
        } else if path.extension().is_some_and(|e| e == "csv") {
            path.with_file_name(RESULTS_JSON)
        } else {
            path.to_path_buf()
        };
        let text = fs::read_to_string(&json)?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn system_summary(spec: &SystemSpec) -> SystemSummary {
    SystemSummary {
        ensemble: spec.ensemble,
        dim: spec.dim,
        lambda_sq: perturbation_generator_variance(&spec.perturbation),
        spec: *spec,
    }
}

struct Realization {
    op: UnitaryOperator,
    dec: SpectralDecomposition,
}

fn generate(spec: &SystemSpec, seed: u64) -> Result<UnitaryOperator> {
    Ok(match spec.ensemble {
        Ensemble::Cue => sample_cue(spec.dim, seed)?,
        Ensemble::Coe => make_coe(&sample_cue(spec.dim, seed)?)?,
        Ensemble::Qkt | Ensemble::QktOe => {
            let spin = spec.spin().expect("kicked top has a spin");
            let params = KickedTopParams::new(spin.value(), spec.k)?;
            if spec.ensemble == Ensemble::Qkt {
                kicked_top(&params)?
            } else {
                restricted_kicked_top(&params)?.1
            }
        }
    })
}

fn build_realization(spec: &SystemSpec, seed: u64, cache: Option<&OperatorCache>) -> Result<Realization> {
    let op = match cache {
        None => generate(spec, seed)?,
        Some(cache) => {
            let (provenance, params, key_seed) = match spec.ensemble {
                Ensemble::Cue => (Provenance::Cue, format!("N{}", spec.dim), Some(seed)),
                Ensemble::Coe => (Provenance::Coe, format!("N{}", spec.dim), Some(seed)),
                Ensemble::Qkt => (Provenance::Qkt, format!("N{}-k{}", spec.dim, spec.k), None),
                Ensemble::QktOe => (Provenance::QktOe, format!("N{}-k{}", spec.dim, spec.k), None),
            };
            cache.get_or_build(provenance, &params, key_seed, || generate(spec, seed))?
        }
    };
    let dec = spectral_decompose(&op)?;
    Ok(Realization { op, dec })
}

fn selected_states(selection: EigenstateSelection, dim: usize) -> Vec<usize> {
    match selection {
        EigenstateSelection::All => (0..dim).collect(),
        EigenstateSelection::Sample { count, seed } => {
            let mut v = index::sample(&mut seeded_rng(seed), dim, count).into_vec();
            v.sort_unstable();
            v
        }
    }
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

#[derive(Clone, Copy, Debug)]
struct CellTask {
    system: usize,
    seed: u64,
    delta: f64,
    rows: bool,
    inset: bool,
}

struct CellOutput {
    rows: Vec<ResultRow>,
    inset: Option<InsetData>,
}

fn evaluate_cell(
    config: &ExperimentConfig,
    spec: &SystemSpec,
    base: &Realization,
    task: CellTask,
) -> Result<CellOutput> {
    let states = selected_states(config.eigenstates, spec.dim);
    let perturbed;
    let pert_dec = if task.delta == 0.0 {
        &base.dec
    } else {
        let map = perturbed_map(
            &base.op,
            &PerturbationSpec {
                form: spec.perturbation,
                delta: task.delta,
            },
        )?;
        perturbed = spectral_decompose(&map)?;
        &perturbed
    };
    let overlaps = overlap_matrix(&base.dec, pert_dec)?;
    let iprs = states
        .iter()
        .map(|&m| saturation_ipr(&overlaps, m).map(|e| e.value))
        .collect::<Result<Vec<f64>>>()?;

    let mut rows = Vec::new();
    if task.rows {
        for &estimator in &config.estimators {
            let values = match estimator {
                Estimator::Ipr => iprs.clone(),
                Estimator::TimeAverage => {
                    time_averages(&overlaps, &states, config.window.0, config.window.1)?
                        .into_iter()
                        .map(|e| e.value)
                        .collect()
                }
                Estimator::RandomStateSum => unreachable!("not a configurable estimator"),
            };
            let (mean, stderr) = mean_and_stderr(&values);
            rows.push(ResultRow {
                ensemble: spec.ensemble,
                dim: spec.dim,
                seed: task.seed,
                delta: task.delta,
                estimator,
                f_inf_mean: mean,
                f_inf_stderr: stderr,
                n_eigenstates: states.len(),
            });
        }
    }

    let inset = if task.inset {
        let series = averaged_spectral_series(&overlaps, &states, config.inset_steps)?;
        let mut weights = vec![0.0; config.bins];
        let mut edges = Vec::new();
        for &m in &states {
            let h = ldos(&overlaps, Some(m), config.bins)?;
            for (acc, w) in weights.iter_mut().zip(&h.weights) {
                *acc += w / states.len() as f64;
            }
            edges = h.bin_edges;
        }
        let hist = LdosHistogram {
            bin_edges: edges,
            weights,
            source: LdosSource::Averaged,
            fitted_width: None,
        };
        let (ipr_mean, _) = mean_and_stderr(&iprs);
        let tag = |f: FitResult| {
            f.with_tag("ensemble", spec.ensemble.name())
                .with_tag("delta", task.delta.to_string())
                .with_tag("seed", task.seed.to_string())
        };
        let lambda_sq = perturbation_generator_variance(&spec.perturbation);
        Some(InsetData {
            ensemble: spec.ensemble,
            dim: spec.dim,
            seed: task.seed,
            delta: task.delta,
            n_eigenstates: states.len(),
            gamma_theory: gamma_theory(task.delta, lambda_sq),
            decay_fit: fit_exponential_decay(&series, default_decay_floor(ipr_mean)).ok().map(tag),
            lorentzian_fit: fit_lorentzian(&hist).ok().map(tag),
            series: series.values,
            ldos_edges: hist.bin_edges,
            ldos_weights: hist.weights,
        })
    } else {
        None
    };
    Ok(CellOutput { rows, inset })
}

/// Identifies a `(system, seed, delta)` cell across runs.
type CellKey = (Ensemble, u64, u64);

fn cell_key(ensemble: Ensemble, seed: u64, delta: f64) -> CellKey {
    (ensemble, seed, delta.to_bits())
}

/// Cells whose rows are already complete for every configured estimator.
fn completed_cells(config: &ExperimentConfig, rows: &[ResultRow]) -> BTreeSet<CellKey> {
    let mut counts: HashMap<CellKey, usize> = HashMap::new();
    for r in rows {
        *counts.entry(cell_key(r.ensemble, r.seed, r.delta)).or_default() += 1;
    }
    counts
        .into_iter()
        .filter(|(_, c)| *c == config.estimators.len())
        .map(|(k, _)| k)
        .collect()
}

fn plan(config: &ExperimentConfig, done: &BTreeSet<CellKey>) -> Vec<CellTask> {
    let mut tasks = Vec::new();
    for (s, spec) in config.systems().iter().enumerate() {
        for (i, &seed) in config.seeds.iter().enumerate() {
            let mut deltas: Vec<(f64, bool)> = config
                .deltas
                .iter()
                .map(|&d| (d, !done.contains(&cell_key(spec.ensemble, seed, d))))
                .collect();
            if s == 0 && i == 0 {
                for &d in &config.inset_deltas {
                    if !config.deltas.contains(&d) {
                        deltas.push((d, false));
                    }
                }
            }
            for (delta, rows) in deltas {
                let inset = s == 0 && i == 0 && config.inset_deltas.contains(&delta);
                if rows || inset {
                    tasks.push(CellTask {
                        system: s,
                        seed,
                        delta,
                        rows,
                        inset,
                    });
                }
            }
        }
    }
    tasks
}

/// Runs the planned cells on `config.workers` threads. Returns every
/// successful output together with the first failure, if any.
fn execute(config: &ExperimentConfig, tasks: &[CellTask]) -> (Vec<CellOutput>, Option<Error>) {
    let systems = config.systems();
    let cache = config.cache_dir.as_ref().map(OperatorCache::new);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(config.workers).build() {
        Ok(p) => p,
        Err(e) => return (Vec::new(), Some(Error::InvalidArgument(e.to_string()))),
    };
    pool.install(|| {
        let mut needed: Vec<(usize, u64)> = tasks.iter().map(|t| (t.system, t.seed)).collect();
        needed.sort_unstable();
        needed.dedup();
        let bases: Vec<((usize, u64), Result<Realization>)> = needed
            .par_iter()
            .map(|&(s, seed)| ((s, seed), build_realization(&systems[s], seed, cache.as_ref())))
            .collect();
        let bases: HashMap<(usize, u64), Result<Realization>> = bases.into_iter().collect();
        let results: Vec<Result<CellOutput>> = tasks
            .par_iter()
            .map(|t| {
                let wrap = |e: Error| Error::Cell {
                    seed: t.seed,
                    delta: t.delta,
                    source: Box::new(e),
                };
                match &bases[&(t.system, t.seed)] {
                    Ok(base) => evaluate_cell(config, &systems[t.system], base, *t).map_err(wrap),
                    Err(e) => Err(wrap(Error::DecompositionFailed(format!(
                        "{} realization: {e}",
                        systems[t.system].ensemble
                    )))),
                }
            })
            .collect();
        let mut outputs = Vec::new();
        let mut first_err = None;
        for r in results {
            match r {
                Ok(o) => outputs.push(o),
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        (outputs, first_err)
    })
}

/// Orders rows by system, seed and delta as listed in the config, then by
/// estimator.
fn sort_rows(config: &ExperimentConfig, rows: &mut [ResultRow]) {
    let systems: Vec<Ensemble> = config.systems().iter().map(|s| s.ensemble).collect();
    let pos = |xs: &[u64], x: u64| xs.iter().position(|&y| y == x).unwrap_or(usize::MAX);
    rows.sort_by(|a, b| {
        let sa = systems.iter().position(|&e| e == a.ensemble);
        let sb = systems.iter().position(|&e| e == b.ensemble);
        sa.cmp(&sb)
            .then(pos(&config.seeds, a.seed).cmp(&pos(&config.seeds, b.seed)))
            .then(a.delta.total_cmp(&b.delta))
            .then(a.estimator.cmp(&b.estimator))
    });
}

fn now_seconds() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn assemble(config: &ExperimentConfig, rows: Vec<ResultRow>, mut insets: Vec<InsetData>) -> ExperimentResult {
    insets.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    let mut result = ExperimentResult {
        rows,
        systems: config.systems().iter().map(system_summary).collect(),
        fits: Vec::new(),
        ratio: None,
        floor_checks: Vec::new(),
        insets,
        notes: Vec::new(),
        provenance: RunProvenance {
            config_hash: config.hash(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: now_seconds(),
            eigenstates: config.eigenstates,
        },
    };
    let estimator = result.primary_estimator();
    let mut windows = Vec::new();
    for sys in result.systems.clone() {
        let curve = match result.curve(sys.ensemble, estimator, None) {
            Ok(c) => c,
            Err(e) => {
                result.notes.push(format!("{}: no curve: {e}", sys.ensemble));
                continue;
            }
        };
        let window = config.fit_window.or_else(|| fgr_window(&curve));
        windows.push(window);
        match window {
            Some((lo, hi)) => match fit_power_law(&curve, lo, hi) {
                Ok(fit) => result.fits.push(
                    fit.with_tag("estimator", estimator.name())
                        .with_tag("seeds", config.seeds.len().to_string()),
                ),
                Err(e) => result.notes.push(format!("{}: power law not fitted: {e}", sys.ensemble)),
            },
            None => result
                .notes
                .push(format!("{}: no points inside the golden-rule window", sys.ensemble)),
        }
        if let (Some(&delta), Some(&f_inf)) = (curve.deltas.last(), curve.f_inf.last()) {
            if delta > 0.0 {
                if let Ok(floor) = strong_perturbation_floor(sys.ensemble.beta(), sys.dim) {
                    result.floor_checks.push(FloorCheck {
                        ensemble: sys.ensemble,
                        delta,
                        f_inf,
                        floor,
                        relative_deviation: (f_inf - floor) / floor,
                    });
                }
            }
        }
    }
    if result.systems.len() == 2 {
        let coe = if result.systems[0].ensemble == Ensemble::Coe { 0 } else { 1 };
        let cue = 1 - coe;
        let shared = match (windows.get(coe).copied().flatten(), windows.get(cue).copied().flatten()) {
            (Some(a), Some(b)) if a.0.max(b.0) <= a.1.min(b.1) => Some((a.0.max(b.0), a.1.min(b.1))),
            _ => None,
        };
        let curves = (
            result.curve(Ensemble::Coe, estimator, None),
            result.curve(Ensemble::Cue, estimator, None),
        );
        match (shared, curves) {
            (Some((lo, hi)), (Ok(c1), Ok(c2))) => match ensemble_ratio(&c1, &c2, lo, hi) {
                Ok(value) => {
                    result.ratio = Some(RatioCheck {
                        numerator: Ensemble::Coe,
                        denominator: Ensemble::Cue,
                        value,
                        delta_min: lo,
                        delta_max: hi,
                    })
                }
                Err(e) => result.notes.push(format!("ratio not computed: {e}")),
            },
            _ => result.notes.push("ratio not computed: no shared golden-rule window".into()),
        }
    }
    for inset in &result.insets {
        result.fits.extend(inset.decay_fit.clone());
        result.fits.extend(inset.lorentzian_fit.clone());
    }
    result
}

/// Runs the whole sweep in memory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let tasks = plan(config, &BTreeSet::new());
    let (outputs, err) = execute(config, &tasks);
    if let Some(e) = err {
        return Err(e);
    }
    Ok(collect(config, Vec::new(), outputs))
}

fn collect(config: &ExperimentConfig, mut rows: Vec<ResultRow>, outputs: Vec<CellOutput>) -> ExperimentResult {
    let mut insets = Vec::new();
    for o in outputs {
        rows.extend(o.rows);
        insets.extend(o.inset);
    }
    sort_rows(config, &mut rows);
    assemble(config, rows, insets)
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    config_hash: String,
    tool_version: String,
    config: ExperimentConfig,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn rows_csv(rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_rows_csv(rows, &mut buf)?;
    Ok(buf)
}

/// Runs the sweep into `config.output_dir`, writing `results.csv`,
/// `results.json` and `manifest.json`.
///
/// An existing output directory is refused unless `resume` is set. When
/// resuming, the stored config hash must match and cells already present in
/// the CSV are skipped. If a cell fails, the rows that did complete are
/// written before the error is returned.
pub fn run_in_directory(config: &ExperimentConfig, resume: bool) -> Result<ExperimentResult> {
    let dir = config.output_dir.as_path();
    let manifest_path = dir.join(MANIFEST_JSON);
    let csv_path = dir.join(RESULTS_CSV);
    let occupied = manifest_path.exists() || csv_path.exists();
    let hash = config.hash();
    let mut previous = Vec::new();
    if occupied {
        if !resume {
            return Err(Error::OutputExists(dir.to_path_buf()));
        }
        let manifest: Manifest = match fs::read_to_string(&manifest_path) {
            Ok(text) => serde_json::from_str(&text)?,
            Err(_) => {
                return Err(Error::Semantic(format!(
                    "{} has results but no {MANIFEST_JSON}; cannot check they belong to this config",
                    dir.display()
                )))
            }
        };
        if manifest.config_hash != hash {
            return Err(Error::Semantic(format!(
                "{} holds results for config {}, not {hash}",
                dir.display(),
                manifest.config_hash
            )));
        }
        if csv_path.exists() {
            previous = read_rows_csv(&fs::read_to_string(&csv_path)?)?;
        }
    }
    fs::create_dir_all(dir)?;
    let manifest = Manifest {
        config_hash: hash,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
    };
    write_atomic(&manifest_path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;

    let done = completed_cells(config, &previous);
    previous.retain(|r| done.contains(&cell_key(r.ensemble, r.seed, r.delta)));
    let tasks = plan(config, &done);
    let (outputs, err) = execute(config, &tasks);
    let result = collect(config, previous, outputs);
    write_atomic(&csv_path, &rows_csv(&result.rows)?)?;
    if let Some(e) = err {
        return Err(e);
    }
    write_atomic(
        &dir.join(RESULTS_JSON),
        serde_json::to_string_pretty(&result)?.as_bytes(),
    )?;
    Ok(result)
}

/// Paths `run_in_directory` writes for `config`.
pub fn output_paths(config: &ExperimentConfig) -> [PathBuf; 3] {
    let d = &config.output_dir;
    [d.join(RESULTS_CSV), d.join(RESULTS_JSON), d.join(MANIFEST_JSON)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::validate_config;

    fn small(extra: &str) -> ExperimentConfig {
        validate_config(&format!(
            "ensemble = \"CUE\"\ndim = 16\ndeltas = [0.0, 0.3]\nseeds = [1, 2]\nwindow_start = 50\nwindow_count = 50\n{extra}"
        ))
        .unwrap()
    }

    #[test]
    fn zero_delta_gives_unit_levels() {
        let cfg = validate_config(
            "ensemble = \"CUE\"\ndim = 8\ndeltas = [0.0]\nseeds = [1]\nwindow_start = 10\nwindow_count = 10\n",
        )
        .unwrap();
        let res = run_experiment(&cfg).unwrap();
        assert_eq!(res.rows.len(), 2);
        for r in &res.rows {
            assert!((r.f_inf_mean - 1.0).abs() < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn row_count_and_order() {
        let cfg = small("");
        let res = run_experiment(&cfg).unwrap();
        assert_eq!(res.rows.len(), 2 * 2 * 2);
        let keys: Vec<(u64, f64, Estimator)> = res.rows.iter().map(|r| (r.seed, r.delta, r.estimator)).collect();
        assert_eq!(keys[0], (1, 0.0, Estimator::Ipr));
        assert_eq!(keys[1], (1, 0.0, Estimator::TimeAverage));
        assert_eq!(keys[7], (2, 0.3, Estimator::TimeAverage));
        assert!(res.rows.iter().all(|r| r.f_inf_mean > 0.0 && r.f_inf_mean <= 1.0 + 1e-12));
        assert!(res.rows.iter().all(|r| r.n_eigenstates == 16));
    }

    #[test]
    fn csv_round_trip() {
        let res = run_experiment(&small("")).unwrap();
        let bytes = rows_csv(&res.rows).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        let back = read_rows_csv(&text).unwrap();
        assert_eq!(back, res.rows);
        assert_eq!(rows_csv(&back).unwrap(), bytes);
    }

    #[test]
    fn sampled_states_are_reported() {
        let res = run_experiment(&small("eigenstates = 5\neigenstate_seed = 9\n")).unwrap();
        assert!(res.rows.iter().all(|r| r.n_eigenstates == 5));
        assert_eq!(res.provenance.eigenstates, EigenstateSelection::Sample { count: 5, seed: 9 });
    }

    #[test]
    fn worker_count_does_not_change_rows() {
        let a = run_experiment(&small("workers = 1\n")).unwrap();
        let b = run_experiment(&small("workers = 3\n")).unwrap();
        assert_eq!(rows_csv(&a.rows).unwrap(), rows_csv(&b.rows).unwrap());
    }

    #[test]
    fn insets_are_kept_for_first_seed() {
        let res = run_experiment(&small("inset_deltas = [0.3, 0.5]\ninset_steps = 40\nbins = 16\n")).unwrap();
        assert_eq!(res.insets.len(), 2);
        assert!(res.insets.iter().all(|i| i.seed == 1 && i.series.len() == 41));
        let total: f64 = res.insets[0].ldos_weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-10);
        // the extra inset delta adds no rows
        assert_eq!(res.rows.len(), 8);
    }

    #[test]
    fn curve_averages_seeds() {
        let res = run_experiment(&small("estimator = \"ipr\"\n")).unwrap();
        let c = res.curve(Ensemble::Cue, Estimator::Ipr, None).unwrap();
        let c1 = res.curve(Ensemble::Cue, Estimator::Ipr, Some(1)).unwrap();
        let c2 = res.curve(Ensemble::Cue, Estimator::Ipr, Some(2)).unwrap();
        assert!((c.f_inf[1] - 0.5 * (c1.f_inf[1] + c2.f_inf[1])).abs() < 1e-15);
        assert_eq!(res.floor_checks.len(), 1);
    }

    #[test]
    fn failing_cell_reports_context() {
        let mut cfg = small("");
        cfg.window = (0, 0);
        match run_experiment(&cfg) {
            Err(Error::Cell { seed, source, .. }) => {
                assert!(seed == 1 || seed == 2);
                assert_eq!(source.kind(), "window_out_of_range");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cached_operators_reproduce_the_run() {
        let dir = tempfile::tempdir().unwrap();
        let plain = run_experiment(&small("")).unwrap();
        let mut cfg = small("compare_ensemble = \"COE\"\n");
        cfg.cache_dir = Some(dir.path().to_path_buf());
        let first = run_experiment(&cfg).unwrap();
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 4);
        let second = run_experiment(&cfg).unwrap();
        assert_eq!(first.rows, second.rows);
        let cue: Vec<_> = first.rows.iter().filter(|r| r.ensemble == Ensemble::Cue).cloned().collect();
        assert_eq!(cue, plain.rows);
        assert_eq!(cfg.hash(), small("compare_ensemble = \"COE\"\n").hash());
    }
}
