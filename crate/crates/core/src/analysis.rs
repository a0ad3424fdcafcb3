//! Curve fits and checks on saturation levels: exponential decay rate,
//! Lorentzian LDOS width, power law in the perturbation strength, ensemble
//! ratios and strong-perturbation floors.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::ensembles::Ensemble;
use crate::error::{Error, Result};
use crate::fidelity::{gamma_theory, mean_level_spacing, FidelitySeries, LdosHistogram};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitModel {
    ExponentialDecay,
    Lorentzian,
    PowerLaw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    pub params: BTreeMap<String, f64>,
    /// Root-mean-square residual in the space the fit was done in.
    pub residual: f64,
    /// Human-readable description of the data range used.
    pub window: String,
    #[serde(default)]
    pub degenerate: bool,
    /// Free-form labels, e.g. the ensemble a curve fit belongs to.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tags: BTreeMap<String, String>,
}

impl FitResult {
    fn new(model: FitModel, params: &[(&str, f64)], residual: f64, window: String) -> Self {
        Self {
            model,
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            residual,
            window,
            degenerate: false,
            tags: BTreeMap::new(),
        }
    }

    /// Named parameter; panics if the fit does not carry it.
    pub fn param(&self, name: &str) -> f64 {
        self.params[name]
    }

    pub fn with_tag(mut self, key: &str, value: impl Into<String>) -> Self {
        self.tags.insert(key.to_string(), value.into());
        self
    }
}

/// Ordinary least-squares line; returns `(slope, intercept, rms residual)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    (slope, intercept, (rss / n).sqrt())
}

/// Lower fit floor used when none is given: three times the saturation
/// level, capped halfway between it and one so weak decays keep points.
pub fn default_decay_floor(f_inf: f64) -> f64 {
    (3.0 * f_inf).min(0.5 * (1.0 + f_inf))
}

/// Leading run of `n` with `F(n) > fit_floor`.
pub fn decay_window(series: &FidelitySeries, fit_floor: f64) -> usize {
    series
        .values
        .iter()
        .take_while(|&&f| f > fit_floor && f > 0.0)
        .count()
}

/// Line fit of `ln F(n)` against `n` over the leading run of points above
/// `fit_floor`; the rate is minus the slope.
pub fn fit_exponential_decay(series: &FidelitySeries, fit_floor: f64) -> Result<FitResult> {
    if !(fit_floor > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "fit floor must be positive, got {fit_floor}"
        )));
    }
    let k = decay_window(series, fit_floor);
    if k < 5 {
        return Err(Error::InsufficientDecay(k));
    }
    let x: Vec<f64> = (0..k).map(|n| n as f64).collect();
    let y: Vec<f64> = series.values[..k].iter().map(|f| f.ln()).collect();
    let (slope, intercept, rms) = fit_line(&x, &y);
    Ok(FitResult::new(
        FitModel::ExponentialDecay,
        &[("rate", -slope), ("intercept", intercept), ("fit_floor", fit_floor)],
        rms,
        format!("n in [0, {}) where F > {fit_floor:.6e}", k),
    ))
}

/// Mass of a unit-normalised Lorentzian of full width `gamma` centred at 0
/// on `[lo, hi]`, summed over a few periodic images so wrapped tails count.
pub fn lorentzian_mass(lo: f64, hi: f64, gamma: f64) -> f64 {
    let half = 0.5 * gamma;
    (-3..=3)
        .map(|k| {
            let shift = 2.0 * PI * k as f64;
            ((hi + shift) / half).atan() - ((lo + shift) / half).atan()
        })
        .sum::<f64>()
        / PI
}

/// Density of the same Lorentzian, `Gamma / (2 pi) / (x^2 + (Gamma/2)^2)`.
pub fn lorentzian_density(x: f64, gamma: f64) -> f64 {
    gamma / (2.0 * PI) / (x * x + 0.25 * gamma * gamma)
}

fn lorentzian_sse(h: &LdosHistogram, gamma: f64) -> f64 {
    h.bin_edges
        .windows(2)
        .zip(&h.weights)
        .map(|(e, w)| (w - lorentzian_mass(e[0], e[1], gamma)).powi(2))
        .sum()
}

/// Least-squares fit of a bin-integrated Lorentzian with the centre fixed
/// at zero and only the width free. Widths below half a bin are flagged
/// degenerate.
pub fn fit_lorentzian(h: &LdosHistogram) -> Result<FitResult> {
    let total = h.total_weight();
    if !(total.is_finite() && total > 0.0) || h.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::FitDiverged("histogram has no valid weight".into()));
    }
    let bin = h.bin_width();
    let (lo, hi) = ((bin * 1e-3).ln(), (8.0 * PI).ln());
    let grid = 400;
    let mut best = (f64::INFINITY, lo);
    for k in 0..=grid {
        let lg = lo + (hi - lo) * k as f64 / grid as f64;
        let sse = lorentzian_sse(h, lg.exp());
        if sse < best.0 {
            best = (sse, lg);
        }
    }
    // golden-section refinement around the best grid point
    let step = (hi - lo) / grid as f64;
    let (mut a, mut b) = ((best.1 - step).max(lo), (best.1 + step).min(hi));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (lorentzian_sse(h, c.exp()), lorentzian_sse(h, d.exp()));
    for _ in 0..100 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = lorentzian_sse(h, c.exp());
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = lorentzian_sse(h, d.exp());
        }
    }
    let gamma = (0.5 * (a + b)).exp();
    if !gamma.is_finite() {
        return Err(Error::FitDiverged("width is not finite".into()));
    }
    let sse = lorentzian_sse(h, gamma);
    let mut fit = FitResult::new(
        FitModel::Lorentzian,
        &[("width", gamma)],
        (sse / h.bins() as f64).sqrt(),
        format!("{} bins over (-pi, pi]", h.bins()),
    );
    fit.degenerate = gamma < 0.5 * bin;
    Ok(fit)
}

/// Eigenstate-averaged saturation level against perturbation strength.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaturationCurve {
    pub deltas: Vec<f64>,
    pub f_inf: Vec<f64>,
    pub ensemble: Ensemble,
    pub dim: usize,
    /// Second moment of the perturbation generator's eigenvalues.
    pub lambda_sq: f64,
    pub eigenstate_averaged: bool,
}

impl SaturationCurve {
    pub fn new(
        deltas: Vec<f64>,
        f_inf: Vec<f64>,
        ensemble: Ensemble,
        dim: usize,
        lambda_sq: f64,
    ) -> Result<Self> {
        if deltas.len() != f_inf.len() {
            return Err(Error::DimensionMismatch {
                expected: deltas.len(),
                actual: f_inf.len(),
            });
        }
        if deltas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("deltas must be strictly increasing".into()));
        }
        if let Some(bad) = f_inf.iter().find(|f| !(**f > 0.0 && **f <= 1.0 + 1e-9)) {
            return Err(Error::InvalidArgument(format!("saturation level {bad} outside (0, 1]")));
        }
        Ok(Self {
            deltas,
            f_inf,
            ensemble,
            dim,
            lambda_sq,
            eigenstate_averaged: true,
        })
    }

    /// `F_inf * delta^2 * lambda_sq * N` at each point.
    pub fn constants(&self) -> Vec<f64> {
        self.deltas
            .iter()
            .zip(&self.f_inf)
            .map(|(d, f)| f * d * d * self.lambda_sq * self.dim as f64)
            .collect()
    }

    fn window_indices(&self, delta_min: f64, delta_max: f64) -> Vec<usize> {
        (0..self.deltas.len())
            .filter(|&i| {
                let d = self.deltas[i];
                d > 0.0 && d >= delta_min && d <= delta_max
            })
            .collect()
    }
}

/// `(4 - beta) / N`, the level reached by eigenstates under very strong
/// perturbation.
pub fn strong_perturbation_floor(beta: u8, dim: usize) -> Result<f64> {
    if !(beta == 1 || beta == 2) {
        return Err(Error::InvalidArgument(format!("beta must be 1 or 2, got {beta}")));
    }
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    Ok((4.0 - beta as f64) / dim as f64)
}

/// Golden-rule window: points where the theoretical width exceeds two
/// level spacings and the level is still above three times the floor.
/// Returns the smallest and largest qualifying delta.
pub fn fgr_window(curve: &SaturationCurve) -> Option<(f64, f64)> {
    let floor = strong_perturbation_floor(curve.ensemble.beta(), curve.dim).ok()?;
    let spacing = mean_level_spacing(curve.dim);
    let inside: Vec<f64> = curve
        .deltas
        .iter()
        .zip(&curve.f_inf)
        .filter(|(d, f)| gamma_theory(**d, curve.lambda_sq) > 2.0 * spacing && **f > 3.0 * floor)
        .map(|(d, _)| *d)
        .collect();
    Some((*inside.first()?, *inside.last()?))
}

/// Line fit of `ln F_inf` against `ln delta` inside `[delta_min, delta_max]`.
/// Also reports the constant with the exponent pinned to -2, both as the
/// log-space least-squares amplitude (`c_pinned`) and the arithmetic mean of
/// `F_inf delta^2 lambda_sq N` (`c_mean`).
pub fn fit_power_law(curve: &SaturationCurve, delta_min: f64, delta_max: f64) -> Result<FitResult> {
    let idx = curve.window_indices(delta_min, delta_max);
    if idx.len() < 4 {
        return Err(Error::InsufficientPoints {
            found: idx.len(),
            needed: 4,
        });
    }
    let x: Vec<f64> = idx.iter().map(|&i| curve.deltas[i].ln()).collect();
    let y: Vec<f64> = idx.iter().map(|&i| curve.f_inf[i].ln()).collect();
    let (slope, intercept, rms) = fit_line(&x, &y);
    let consts = curve.constants();
    let cs: Vec<f64> = idx.iter().map(|&i| consts[i]).collect();
    let k = cs.len() as f64;
    let c_mean = cs.iter().sum::<f64>() / k;
    let c_pinned = (cs.iter().map(|c| c.ln()).sum::<f64>() / k).exp();
    Ok(FitResult::new(
        FitModel::PowerLaw,
        &[
            ("exponent", slope),
            ("amplitude", intercept.exp()),
            ("c_pinned", c_pinned),
            ("c_mean", c_mean),
            ("points", k),
        ],
        rms,
        format!("delta in [{delta_min}, {delta_max}]"),
    )
    .with_tag("ensemble", curve.ensemble.name()))
}

/// Mean over the window of `F_inf(COE) / F_inf(CUE)` on a shared grid.
pub fn ensemble_ratio(
    curve_coe: &SaturationCurve,
    curve_cue: &SaturationCurve,
    delta_min: f64,
    delta_max: f64,
) -> Result<f64> {
    if curve_coe.deltas != curve_cue.deltas || curve_coe.dim != curve_cue.dim {
        return Err(Error::GridMismatch);
    }
    let idx = curve_coe.window_indices(delta_min, delta_max);
    if idx.is_empty() {
        return Err(Error::InsufficientPoints { found: 0, needed: 1 });
    }
    Ok(idx
        .iter()
        .map(|&i| curve_coe.f_inf[i] / curve_cue.f_inf[i])
        .sum::<f64>()
        / idx.len() as f64)
}

/// Root-mean-square distance between pairs of `ln F` curves after rescaling
/// time to `delta^2 n`, evaluated on the overlap of their fit windows.
pub fn collapse_distance(curves: &[(f64, &FidelitySeries, usize)], samples: usize) -> Option<f64> {
    // each entry: (delta, series, number of leading points in its window)
    let x_max = curves
        .iter()
        .map(|(d, _, k)| d * d * (k.saturating_sub(1)) as f64)
        .fold(f64::INFINITY, f64::min);
    if !(x_max > 0.0) || samples < 2 {
        return None;
    }
    let interp = |delta: f64, s: &FidelitySeries, x: f64| -> f64 {
        let t = x / (delta * delta);
        let i = (t.floor() as usize).min(s.values.len() - 2);
        let frac = t - i as f64;
        (1.0 - frac) * s.values[i].ln() + frac * s.values[i + 1].ln()
    };
    let mut worst: f64 = 0.0;
    for a in 0..curves.len() {
        for b in a + 1..curves.len() {
            let mut sq = 0.0;
            for k in 0..samples {
                let x = x_max * k as f64 / (samples - 1) as f64;
                let diff = interp(curves[a].0, curves[a].1, x) - interp(curves[b].0, curves[b].1, x);
                sq += diff * diff;
            }
            worst = worst.max((sq / samples as f64).sqrt());
        }
    }
    Some(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fidelity::{FidelityMethod, InitialState, LdosSource};

    fn series(values: Vec<f64>) -> FidelitySeries {
        FidelitySeries {
            values,
            method: FidelityMethod::Spectral,
            initial_state: InitialState::Averaged,
        }
    }

    #[test]
    fn exact_exponential() {
        let s = series((0..200).map(|n| (-0.05 * n as f64).exp()).collect());
        let fit = fit_exponential_decay(&s, 0.01).unwrap();
        assert!((fit.param("rate") - 0.05).abs() < 1e-6);
    }

    #[test]
    fn exponential_with_floor() {
        let s = series((0..400).map(|n| (-0.05 * n as f64).exp() + 0.01).collect());
        let fit = fit_exponential_decay(&s, 0.1).unwrap();
        assert!((fit.param("rate") - 0.05).abs() < 0.005, "{}", fit.param("rate"));
    }

    #[test]
    fn too_fast_decay_is_rejected() {
        let s = series((0..50).map(|n| (-2.0 * n as f64).exp()).collect());
        assert!(matches!(
            fit_exponential_decay(&s, 0.01),
            Err(Error::InsufficientDecay(3))
        ));
    }

    #[test]
    fn default_floor_caps_weak_decays() {
        assert!((default_decay_floor(0.05) - 0.15).abs() < 1e-15);
        assert!((default_decay_floor(0.6) - 0.8).abs() < 1e-15);
    }

    fn histogram_from(f: impl Fn(f64, f64) -> f64, bins: usize) -> LdosHistogram {
        let w = 2.0 * PI / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|k| -PI + k as f64 * w).collect();
        let weights = edges.windows(2).map(|e| f(e[0], e[1])).collect();
        LdosHistogram {
            bin_edges: edges,
            weights,
            source: LdosSource::Averaged,
            fitted_width: None,
        }
    }

    #[test]
    fn lorentzian_mass_is_normalized() {
        let m = lorentzian_mass(-PI, PI, 0.3);
        assert!((m - 1.0).abs() < 0.01);
        // matches quadrature of the density
        let wrapped = |x: f64| (-3..=3).map(|k| lorentzian_density(x + 2.0 * PI * k as f64, 0.3)).sum::<f64>();
        let q = crate::spacing::simpson(wrapped, -0.5, 0.2, 4000);
        assert!((lorentzian_mass(-0.5, 0.2, 0.3) - q).abs() < 1e-4);
    }

    #[test]
    fn lorentzian_width_recovered() {
        let h = histogram_from(|a, b| lorentzian_mass(a, b, 0.04), 401);
        let fit = fit_lorentzian(&h).unwrap();
        assert!((fit.param("width") / 0.04 - 1.0).abs() < 0.05);
        assert!(!fit.degenerate);
    }

    #[test]
    fn spike_is_degenerate() {
        let h = histogram_from(|a, b| if a <= 0.0 && 0.0 < b { 1.0 } else { 0.0 }, 101);
        let fit = fit_lorentzian(&h).unwrap();
        assert!(fit.degenerate);
        assert!(fit.param("width") < h.bin_width());
    }

    #[test]
    fn empty_histogram_diverges() {
        let h = histogram_from(|_, _| 0.0, 16);
        assert!(matches!(fit_lorentzian(&h), Err(Error::FitDiverged(_))));
    }

    fn synthetic_curve(c: f64, lambda_sq: f64, n: usize) -> SaturationCurve {
        let deltas: Vec<f64> = (1..=8).map(|k| 0.1 * k as f64).collect();
        let f = deltas.iter().map(|d| c / (d * d * lambda_sq * n as f64)).collect();
        SaturationCurve::new(deltas, f, Ensemble::Cue, n, lambda_sq).unwrap()
    }

    #[test]
    fn exact_power_law() {
        let curve = synthetic_curve(3.6, 2.0, 256);
        let fit = fit_power_law(&curve, 0.1, 0.4).unwrap();
        assert!((fit.param("exponent") + 2.0).abs() < 1e-6);
        assert!((fit.param("c_pinned") - 3.6).abs() < 1e-9);
        assert!((fit.param("c_mean") - 3.6).abs() < 1e-9);
        assert!(matches!(
            fit_power_law(&curve, 0.1, 0.35),
            Err(Error::InsufficientPoints { found: 3, .. })
        ));
    }

    #[test]
    fn curve_validation() {
        assert!(SaturationCurve::new(vec![0.2, 0.1], vec![0.5, 0.5], Ensemble::Cue, 4, 1.0).is_err());
        assert!(SaturationCurve::new(vec![0.1], vec![1.5], Ensemble::Cue, 4, 1.0).is_err());
        assert!(SaturationCurve::new(vec![0.1], vec![0.0], Ensemble::Cue, 4, 1.0).is_err());
    }

    #[test]
    fn floors() {
        assert_eq!(strong_perturbation_floor(2, 1024).unwrap(), 2.0 / 1024.0);
        assert_eq!(strong_perturbation_floor(1, 512).unwrap(), 3.0 / 512.0);
        assert_eq!(strong_perturbation_floor(2, 2).unwrap(), 1.0);
        assert!(strong_perturbation_floor(4, 2).is_err());
    }

    #[test]
    fn ratio_of_identical_curves() {
        let a = synthetic_curve(3.6, 2.0, 256);
        assert!((ensemble_ratio(&a, &a, 0.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let mut b = a.clone();
        b.deltas[0] = 0.01;
        assert!(matches!(ensemble_ratio(&a, &b, 0.0, 1.0), Err(Error::GridMismatch)));
    }

    #[test]
    fn fgr_window_on_synthetic_curve() {
        let curve = synthetic_curve(3.6, 2.0, 256);
        // Gamma > 2 * 2pi/256 needs delta > 0.157; F > 6/256 needs delta < 0.55
        assert_eq!(fgr_window(&curve), Some((0.2, 0.5)));
    }

    #[test]
    fn collapse_of_exact_exponentials_is_zero() {
        let lam = 2.0;
        let made: Vec<(f64, FidelitySeries)> = [0.1, 0.2, 0.3]
            .iter()
            .map(|&d| (d, series((0..100).map(|n| (-d * d * lam * n as f64).exp()).collect())))
            .collect();
        let refs: Vec<(f64, &FidelitySeries, usize)> = made.iter().map(|(d, s)| (*d, s, 60)).collect();
        assert!(collapse_distance(&refs, 50).unwrap() < 1e-12);
    }

    #[test]
    fn fit_result_serializes() {
        let fit = FitResult::new(FitModel::PowerLaw, &[("exponent", -2.0)], 0.0, "w".into())
            .with_tag("ensemble", "CUE");
        let text = serde_json::to_string(&fit).unwrap();
        assert_eq!(
            text,
            r#"{"model":"power-law","params":{"exponent":-2.0},"residual":0.0,"window":"w","degenerate":false,"tags":{"ensemble":"CUE"}}"#
        );
    }
}
