//! Fidelity-decay series, saturation estimators and the local density of
//! states.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{wrap_phase, CMatrix, CVector, OverlapMatrix, SpectralDecomposition, UnitaryOperator, C64};

const NORM_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FidelityMethod {
    DirectPower,
    Spectral,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    Eigenstate(usize),
    RandomSeed(u64),
    /// Mean over several eigenstates.
    Averaged,
    Custom,
}

impl fmt::Display for InitialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialState::Eigenstate(m) => write!(f, "eigenstate-{m}"),
            InitialState::RandomSeed(s) => write!(f, "random-{s}"),
            InitialState::Averaged => f.write_str("eigenstate-average"),
            InitialState::Custom => f.write_str("custom"),
        }
    }
}

/// `F(n)` for `n = 0..=n_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct FidelitySeries {
    pub values: Vec<f64>,
    pub method: FidelityMethod,
    pub initial_state: InitialState,
}

impl FidelitySeries {
    pub fn n_max(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    /// Writes `n,F` rows preceded by `# key=value` provenance lines.
    pub fn write_csv<W: Write>(&self, mut w: W, provenance: &[(&str, String)]) -> Result<()> {
        for (k, v) in provenance {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "# method={}", method_name(self.method))?;
        writeln!(w, "# initial_state={}", self.initial_state)?;
        writeln!(w, "n,F")?;
        for (n, f) in self.values.iter().enumerate() {
            writeln!(w, "{n},{f:.12e}")?;
        }
        Ok(())
    }
}

fn method_name(m: FidelityMethod) -> &'static str {
    match m {
        FidelityMethod::DirectPower => "direct-power",
        FidelityMethod::Spectral => "spectral",
    }
}

/// Reference path: evolves `U^n psi` and `(U_p U)^n psi` by repeated
/// matrix-vector products.
pub fn fidelity_direct(
    u: &UnitaryOperator,
    perturbed: &UnitaryOperator,
    psi0: &CVector,
    n_max: usize,
) -> Result<FidelitySeries> {
    let n = u.dim();
    for d in [perturbed.dim(), psi0.len()] {
        if d != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: d,
            });
        }
    }
    let norm = psi0.norm();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized(norm));
    }
    let mut a = psi0.clone();
    let mut b = psi0.clone();
    let mut values = Vec::with_capacity(n_max + 1);
    values.push(a.dotc(&b).norm_sqr());
    for _ in 0..n_max {
        a = u.matrix() * &a;
        b = perturbed.matrix() * &b;
        values.push(a.dotc(&b).norm_sqr());
    }
    Ok(FidelitySeries {
        values,
        method: FidelityMethod::DirectPower,
        initial_state: InitialState::Custom,
    })
}

/// `F(n) = |sum_l |a_lm|^2 exp(-i n phi'_l)|^2` for the unperturbed
/// eigenstate `m`.
pub fn fidelity_spectral(overlaps: &OverlapMatrix, m: usize, n_max: usize) -> Result<FidelitySeries> {
    overlaps.check_index(m)?;
    let weights: Vec<f64> = overlaps
        .amplitudes()
        .column(m)
        .iter()
        .map(|z| z.norm_sqr())
        .collect();
    let phases = overlaps.phases_perturbed();
    let values = (0..=n_max)
        .map(|n| {
            let t = n as f64;
            let (mut re, mut im) = (0.0, 0.0);
            for (w, phi) in weights.iter().zip(phases) {
                let (s, c) = (-t * phi).sin_cos();
                re += w * c;
                im += w * s;
            }
            re * re + im * im
        })
        .collect();
    Ok(FidelitySeries {
        values,
        method: FidelityMethod::Spectral,
        initial_state: InitialState::Eigenstate(m),
    })
}

/// Spectral evaluation for an arbitrary initial state, using both
/// eigenbases: `sum_m conj(c_m) e^{i n phi_m} sum_l conj(a_lm) d_l e^{-i n phi'_l}`.
pub fn fidelity_spectral_state(
    unperturbed: &SpectralDecomposition,
    perturbed: &SpectralDecomposition,
    psi0: &CVector,
    n_max: usize,
) -> Result<FidelitySeries> {
    let n = unperturbed.dim();
    for d in [perturbed.dim(), psi0.len()] {
        if d != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: d,
            });
        }
    }
    let norm = psi0.norm();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized(norm));
    }
    let c = unperturbed.vectors().adjoint() * psi0;
    let d = perturbed.vectors().adjoint() * psi0;
    // <v_m|v'_l>, indexed (m, l)
    let cross = unperturbed.vectors().adjoint() * perturbed.vectors();
    let mut values = Vec::with_capacity(n_max + 1);
    let mut y = CVector::zeros(n);
    for step in 0..=n_max {
        let t = step as f64;
        for (l, phi) in perturbed.phases().iter().enumerate() {
            y[l] = d[l] * C64::from_polar(1.0, -t * phi);
        }
        let z = &cross * &y;
        let amp: C64 = unperturbed
            .phases()
            .iter()
            .enumerate()
            .map(|(m, phi)| c[m].conj() * C64::from_polar(1.0, t * phi) * z[m])
            .sum();
        values.push(amp.norm_sqr());
    }
    Ok(FidelitySeries {
        values,
        method: FidelityMethod::Spectral,
        initial_state: InitialState::Custom,
    })
}

/// Evaluates all selected eigenstate series at once. `visit(n, f)` receives
/// each time step's fidelities, one per entry of `states`.
fn for_each_step<F: FnMut(usize, &[f64])>(
    overlaps: &OverlapMatrix,
    states: &[usize],
    steps: impl Iterator<Item = usize>,
    mut visit: F,
) -> Result<()> {
    for &m in states {
        overlaps.check_index(m)?;
    }
    let w_full = overlaps.weights();
    let n = overlaps.dim();
    // rows = selected states, cols = l
    let w = DMatrix::from_fn(states.len(), n, |r, l| w_full[(l, states[r])]);
    let phases = overlaps.phases_perturbed();
    let mut cos = DVector::zeros(n);
    let mut sin = DVector::zeros(n);
    let mut re = DVector::zeros(states.len());
    let mut im = DVector::zeros(states.len());
    let mut f = vec![0.0; states.len()];
    for step in steps {
        let t = step as f64;
        for (l, phi) in phases.iter().enumerate() {
            let (s, c) = (-t * phi).sin_cos();
            cos[l] = c;
            sin[l] = s;
        }
        re.gemv(1.0, &w, &cos, 0.0);
        im.gemv(1.0, &w, &sin, 0.0);
        for k in 0..states.len() {
            f[k] = re[k] * re[k] + im[k] * im[k];
        }
        visit(step, &f);
    }
    Ok(())
}

/// Mean over `states` of their spectral fidelity series.
pub fn averaged_spectral_series(
    overlaps: &OverlapMatrix,
    states: &[usize],
    n_max: usize,
) -> Result<FidelitySeries> {
    if states.is_empty() {
        return Err(Error::InvalidArgument("no eigenstates selected".into()));
    }
    let mut values = Vec::with_capacity(n_max + 1);
    let k = states.len() as f64;
    for_each_step(overlaps, states, 0..=n_max, |_, f| {
        values.push(f.iter().sum::<f64>() / k);
    })?;
    Ok(FidelitySeries {
        values,
        method: FidelityMethod::Spectral,
        initial_state: InitialState::Averaged,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Ipr,
    TimeAverage,
    RandomStateSum,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Ipr => "ipr",
            Estimator::TimeAverage => "time-average",
            Estimator::RandomStateSum => "random-state-sum",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An estimate of the long-time fidelity level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaturationEstimate {
    pub value: f64,
    pub estimator: Estimator,
    /// `(start, count)` for time averages.
    pub window: Option<(usize, usize)>,
    pub statistical_error: f64,
}

/// Default averaging window: start and length, in map iterations.
pub const DEFAULT_WINDOW: (usize, usize) = (2000, 2000);

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Mean of `F(n)` over `count` steps starting at `start`; the error is the
/// sample standard deviation over `sqrt(count)`.
pub fn saturation_time_average(
    series: &FidelitySeries,
    start: usize,
    count: usize,
) -> Result<SaturationEstimate> {
    let len = series.values.len();
    if count == 0 || start.checked_add(count).map_or(true, |end| end > len) {
        return Err(Error::WindowOutOfRange { start, count, len });
    }
    let (value, err) = mean_and_stderr(&series.values[start..start + count]);
    Ok(SaturationEstimate {
        value,
        estimator: Estimator::TimeAverage,
        window: Some((start, count)),
        statistical_error: err,
    })
}

/// Time averages for many eigenstates, without materialising the series.
pub fn time_averages(
    overlaps: &OverlapMatrix,
    states: &[usize],
    start: usize,
    count: usize,
) -> Result<Vec<SaturationEstimate>> {
    if count == 0 {
        return Err(Error::WindowOutOfRange {
            start,
            count,
            len: start,
        });
    }
    let k = states.len();
    let mut sum = vec![0.0; k];
    let mut sum_sq = vec![0.0; k];
    for_each_step(overlaps, states, start..start + count, |_, f| {
        for i in 0..k {
            sum[i] += f[i];
            sum_sq[i] += f[i] * f[i];
        }
    })?;
    let c = count as f64;
    Ok((0..k)
        .map(|i| {
            let mean = sum[i] / c;
            let var = if count > 1 {
                ((sum_sq[i] - c * mean * mean) / (c - 1.0)).max(0.0)
            } else {
                0.0
            };
            SaturationEstimate {
                value: mean,
                estimator: Estimator::TimeAverage,
                window: Some((start, count)),
                statistical_error: (var / c).sqrt(),
            }
        })
        .collect())
}

/// `sum_l |a_lm|^4`, the long-time level for eigenstate `m`.
pub fn saturation_ipr(overlaps: &OverlapMatrix, m: usize) -> Result<SaturationEstimate> {
    overlaps.check_index(m)?;
    let value = overlaps
        .amplitudes()
        .column(m)
        .iter()
        .map(|z| z.norm_sqr().powi(2))
        .sum();
    Ok(SaturationEstimate {
        value,
        estimator: Estimator::Ipr,
        window: None,
        statistical_error: 0.0,
    })
}

/// `(1/N^2) sum_{m,l,j} |a_lj|^2 |a_lm|^2`, the random-state level, as an
/// explicit double sum.
pub fn saturation_random_state(overlaps: &OverlapMatrix) -> SaturationEstimate {
    let w = overlaps.weights();
    let n = overlaps.dim() as f64;
    let value = w
        .row_iter()
        .map(|row| {
            let s: f64 = row.sum();
            s * s
        })
        .sum::<f64>()
        / (n * n);
    SaturationEstimate {
        value,
        estimator: Estimator::RandomStateSum,
        window: None,
        statistical_error: 0.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LdosSource {
    Eigenstate(usize),
    Averaged,
}

/// Weight of an unperturbed eigenstate against perturbed-minus-unperturbed
/// phase difference.
#[derive(Clone, Debug, PartialEq)]
pub struct LdosHistogram {
    /// `bins + 1` edges spanning `[-pi, pi]`.
    pub bin_edges: Vec<f64>,
    pub weights: Vec<f64>,
    pub source: LdosSource,
    pub fitted_width: Option<f64>,
}

/// Default number of LDOS bins.
pub const DEFAULT_LDOS_BINS: usize = 101;

impl LdosHistogram {
    pub fn bins(&self) -> usize {
        self.weights.len()
    }

    pub fn bin_width(&self) -> f64 {
        2.0 * PI / self.bins() as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn write_csv<W: Write>(&self, mut w: W, provenance: &[(&str, String)]) -> Result<()> {
        for (k, v) in provenance {
            writeln!(w, "# {k}={v}")?;
        }
        if let Some(g) = self.fitted_width {
            writeln!(w, "# fitted_width={g:.12e}")?;
        }
        writeln!(w, "bin_center,weight")?;
        for (c, x) in self.centers().iter().zip(&self.weights) {
            writeln!(w, "{c:.12e},{x:.12e}")?;
        }
        Ok(())
    }
}

fn bin_index(x: f64, bins: usize) -> usize {
    let idx = ((x + PI) / (2.0 * PI) * bins as f64).floor();
    (idx.max(0.0) as usize).min(bins - 1)
}

/// Histogram of `|a_lm|^2` against `wrap(phi'_l - phi_m)`; `None` averages
/// the per-eigenstate histograms of every `m`.
pub fn ldos(overlaps: &OverlapMatrix, m: Option<usize>, bins: usize) -> Result<LdosHistogram> {
    if bins < 8 {
        return Err(Error::InvalidArgument(format!("need at least 8 bins, got {bins}")));
    }
    let states: Vec<usize> = match m {
        Some(m) => {
            overlaps.check_index(m)?;
            vec![m]
        }
        None => (0..overlaps.dim()).collect(),
    };
    let a = overlaps.amplitudes();
    let mut weights = vec![0.0; bins];
    let scale = 1.0 / states.len() as f64;
    for &m in &states {
        let phi_m = overlaps.phases_unperturbed()[m];
        for (l, phi_l) in overlaps.phases_perturbed().iter().enumerate() {
            weights[bin_index(wrap_phase(phi_l - phi_m), bins)] += a[(l, m)].norm_sqr() * scale;
        }
    }
    let width = 2.0 * PI / bins as f64;
    let bin_edges = (0..=bins).map(|k| -PI + k as f64 * width).collect();
    Ok(LdosHistogram {
        bin_edges,
        weights,
        source: m.map_or(LdosSource::Averaged, LdosSource::Eigenstate),
        fitted_width: None,
    })
}

/// Golden-rule decay rate `delta^2 * lambda_sq`, in radians per iteration.
pub fn gamma_theory(delta: f64, lambda_sq: f64) -> f64 {
    delta * delta * lambda_sq
}

/// Typical squared off-diagonal coupling `delta^2 lambda_sq / N` for random
/// eigenvectors.
pub fn coupling_variance(delta: f64, lambda_sq: f64, dim: usize) -> f64 {
    delta * delta * lambda_sq / dim as f64
}

/// Mean eigenphase spacing `2 pi / N`.
pub fn mean_level_spacing(dim: usize) -> f64 {
    2.0 * PI / dim as f64
}

/// `2 pi sigma^2 / Delta`.
pub fn golden_rule_width(sigma_sq: f64, spacing: f64) -> f64 {
    2.0 * PI * sigma_sq / spacing
}

/// Mean `|delta V_lm|^2` over `l != m` with `V` diagonal (`generator`) in the
/// computational basis, expressed in the eigenbasis `vectors`.
pub fn measured_coupling_variance(vectors: &CMatrix, generator: &[f64], delta: f64) -> Result<f64> {
    let n = vectors.nrows();
    if generator.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: generator.len(),
        });
    }
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two states".into()));
    }
    let mut scaled = vectors.clone();
    for (r, &g) in generator.iter().enumerate() {
        for v in scaled.row_mut(r).iter_mut() {
            *v *= g;
        }
    }
    let v_eig = vectors.adjoint() * scaled;
    let mut total = 0.0;
    for l in 0..n {
        for m in 0..n {
            if l != m {
                total += v_eig[(l, m)].norm_sqr();
            }
        }
    }
    Ok(delta * delta * total / (n * (n - 1)) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ComplexMatrix, Provenance};

    fn diag_unitary(phases: &[f64]) -> UnitaryOperator {
        let d: Vec<C64> = phases.iter().map(|&p| C64::from_polar(1.0, -p)).collect();
        UnitaryOperator::certify(ComplexMatrix::from_diagonal(&d), Provenance::Composed, None).unwrap()
    }

    fn identity_overlaps(phases: Vec<f64>) -> OverlapMatrix {
        let n = phases.len();
        OverlapMatrix::from_parts(CMatrix::identity(n, n), phases.clone(), phases).unwrap()
    }

    #[test]
    fn unperturbed_direct_is_one() {
        let u = diag_unitary(&[0.3, -1.2, 2.0]);
        let psi = CVector::from_element(3, C64::new(1.0 / 3f64.sqrt(), 0.0));
        let s = fidelity_direct(&u, &u, &psi, 20).unwrap();
        assert!(s.values.iter().all(|f| (f - 1.0).abs() < 1e-12));
    }

    #[test]
    fn common_eigenstate_has_unit_fidelity() {
        let u = diag_unitary(&[0.7, 1.9]);
        let up = diag_unitary(&[0.1, -0.1]);
        let perturbed = up.compose(&u).unwrap();
        let psi = CVector::from_column_slice(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let s = fidelity_direct(&u, &perturbed, &psi, 30).unwrap();
        assert!(s.values.iter().all(|f| (f - 1.0).abs() < 1e-12));
    }

    #[test]
    fn direct_rejects_bad_input() {
        let u = diag_unitary(&[0.1, 0.2]);
        let psi = CVector::from_column_slice(&[C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        assert!(matches!(
            fidelity_direct(&u, &u, &psi, 3),
            Err(Error::NotNormalized(_))
        ));
        let psi3 = CVector::from_element(3, C64::new(1.0 / 3f64.sqrt(), 0.0));
        assert!(matches!(
            fidelity_direct(&u, &u, &psi3, 3),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn spectral_identity_is_one() {
        let o = identity_overlaps(vec![0.1, 0.5, -2.0]);
        for m in 0..3 {
            let s = fidelity_spectral(&o, m, 50).unwrap();
            assert!(s.values.iter().all(|f| (f - 1.0).abs() < 1e-12));
        }
        assert!(matches!(
            fidelity_spectral(&o, 3, 5),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn two_level_beat() {
        let h = C64::new(0.5f64.sqrt(), 0.0);
        let a = CMatrix::from_row_slice(2, 2, &[h, h, h, -h]);
        let o = OverlapMatrix::from_parts(a, vec![0.0, 0.0], vec![0.0, PI]).unwrap();
        let s = fidelity_spectral(&o, 0, 5).unwrap();
        let expected = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        for (f, e) in s.values.iter().zip(expected) {
            assert!((f - e).abs() < 1e-12);
        }
    }

    #[test]
    fn batched_steps_match_single_series() {
        let h = C64::new(0.5f64.sqrt(), 0.0);
        let a = CMatrix::from_row_slice(2, 2, &[h, h, h, -h]);
        let o = OverlapMatrix::from_parts(a, vec![0.0, 0.3], vec![0.2, 1.1]).unwrap();
        let avg = averaged_spectral_series(&o, &[0, 1], 40).unwrap();
        let s0 = fidelity_spectral(&o, 0, 40).unwrap();
        let s1 = fidelity_spectral(&o, 1, 40).unwrap();
        for n in 0..=40 {
            assert!((avg.values[n] - 0.5 * (s0.values[n] + s1.values[n])).abs() < 1e-14);
        }
        let ta = time_averages(&o, &[1], 10, 25).unwrap()[0];
        let direct = saturation_time_average(&s1, 10, 25).unwrap();
        assert!((ta.value - direct.value).abs() < 1e-14);
        assert!((ta.statistical_error - direct.statistical_error).abs() < 1e-12);
    }

    #[test]
    fn time_average_of_constant() {
        let s = FidelitySeries {
            values: vec![0.25; 10],
            method: FidelityMethod::Spectral,
            initial_state: InitialState::Custom,
        };
        let e = saturation_time_average(&s, 2, 8).unwrap();
        assert_eq!(e.value, 0.25);
        assert_eq!(e.statistical_error, 0.0);
        assert_eq!(e.window, Some((2, 8)));
        assert!(matches!(
            saturation_time_average(&s, 5, 6),
            Err(Error::WindowOutOfRange { .. })
        ));
        assert!(saturation_time_average(&s, 0, 0).is_err());
    }

    #[test]
    fn unperturbed_time_average_is_one() {
        let o = identity_overlaps(vec![0.4, -0.9]);
        let s = fidelity_spectral(&o, 1, 100).unwrap();
        assert!((saturation_time_average(&s, 50, 50).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ipr_limits() {
        let o = identity_overlaps(vec![0.0, 1.0, 2.0, 3.0]);
        assert!((saturation_ipr(&o, 2).unwrap().value - 1.0).abs() < 1e-15);
        // maximally spread column: a 4x4 Fourier matrix
        let n = 4;
        let f = CMatrix::from_fn(n, n, |l, m| {
            C64::from_polar(0.5, 2.0 * PI * (l * m) as f64 / n as f64)
        });
        let o = OverlapMatrix::from_parts(f, vec![0.0; 4], vec![0.0; 4]).unwrap();
        for m in 0..n {
            assert!((saturation_ipr(&o, m).unwrap().value - 0.25).abs() < 1e-12);
        }
        assert!((saturation_random_state(&o).value - 0.25).abs() < 1e-12);
    }

    #[test]
    fn ldos_of_identity_sits_at_zero() {
        let o = identity_overlaps(vec![0.2, -1.0, 2.5]);
        for m in [Some(1), None] {
            let h = ldos(&o, m, 101).unwrap();
            assert_eq!(h.bin_edges.len(), 102);
            let zero_bin = bin_index(0.0, 101);
            assert_eq!(zero_bin, 50);
            assert!((h.weights[zero_bin] - 1.0).abs() < 1e-12);
            assert!((h.total_weight() - 1.0).abs() < 1e-12);
        }
        assert!(ldos(&o, None, 4).is_err());
        assert!(ldos(&o, Some(3), 16).is_err());
    }

    #[test]
    fn bin_index_edges() {
        assert_eq!(bin_index(PI, 10), 9);
        assert_eq!(bin_index(-PI + 1e-12, 10), 0);
        assert_eq!(bin_index(-1e-12, 10), 4);
    }

    #[test]
    fn gamma_identities() {
        assert_eq!(gamma_theory(0.0, 3.0), 0.0);
        assert!((gamma_theory(0.1, 2.5) - 0.025).abs() < 1e-15);
        let n = 256;
        let via_fgr = golden_rule_width(coupling_variance(0.3, 2.0, n), mean_level_spacing(n));
        assert!((via_fgr - gamma_theory(0.3, 2.0)).abs() < 1e-14);
    }

    #[test]
    fn series_csv_has_provenance_header() {
        let s = FidelitySeries {
            values: vec![1.0, 0.5],
            method: FidelityMethod::Spectral,
            initial_state: InitialState::Eigenstate(3),
        };
        let mut out = Vec::new();
        s.write_csv(&mut out, &[("ensemble", "CUE".into()), ("N", "8".into())])
            .unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("# ensemble=CUE\n# N=8\n# method=spectral\n# initial_state=eigenstate-3\nn,F\n0,"));
    }
}
