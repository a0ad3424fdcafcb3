//! Statistical checks of the sampled ensembles against analytic laws.

use std::f64::consts::PI;

use loschmidt::ensembles::{make_coe, sample_cue};
use loschmidt::linalg::spectral_decompose;
use loschmidt::spacing::{
    ks_distance, l1_distance, nearest_neighbor_spacings, surmise_coe, surmise_cue,
};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Two-sample KS critical distance at significance `alpha`.
fn ks_critical(alpha: f64, n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    (-(alpha / 2.0).ln() / 2.0).sqrt() * ((n + m) / (n * m)).sqrt()
}

#[test]
fn cue_eigenphases_are_uniform() {
    let bins = 16;
    let mut counts = vec![0usize; bins];
    let mut total = 0usize;
    for seed in 0..20 {
        let d = spectral_decompose(&sample_cue(64, seed).unwrap()).unwrap();
        for &phi in d.phases() {
            let k = (((phi + PI) / (2.0 * PI)) * bins as f64) as usize;
            counts[k.min(bins - 1)] += 1;
            total += 1;
        }
    }
    let expected = total as f64 / bins as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let critical = ChiSquared::new((bins - 1) as f64).unwrap().inverse_cdf(0.999);
    assert!(chi2 < critical, "chi2 {chi2} >= {critical}");
}

#[test]
fn cue_matrix_element_follows_beta_law() {
    // |U_00|^2 has CDF 1 - (1 - x)^(N - 1) under the Haar measure
    let n = 8;
    let samples: Vec<f64> = (0..3000)
        .map(|s| sample_cue(n, 10_000 + s).unwrap().matrix()[(0, 0)].norm_sqr())
        .collect();
    let mut sorted = samples.clone();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = 1.0 - (1.0 - x).powi(n as i32 - 1);
            (cdf - i as f64 / k).abs().max(((i + 1) as f64 / k - cdf).abs())
        })
        .fold(0.0, f64::max);
    // one-sample critical value at alpha = 0.001
    let critical = 1.949 / k.sqrt();
    assert!(d < critical, "KS {d} >= {critical}");
}

#[test]
fn cue_is_invariant_under_fixed_rotation() {
    let n = 6;
    let w = sample_cue(n, 999).unwrap();
    let count = 2000;
    let plain: Vec<f64> = (0..count)
        .map(|s| sample_cue(n, s).unwrap().matrix()[(0, 0)].re)
        .collect();
    let rotated: Vec<f64> = (0..count)
        .map(|s| (w.matrix() * sample_cue(n, 50_000 + s).unwrap().matrix())[(0, 0)].re)
        .collect();
    let d = ks_distance(&plain, &rotated);
    assert!(d < ks_critical(0.001, count as usize, count as usize), "KS {d}");
}

#[test]
fn coe_is_symmetric() {
    let u = make_coe(&sample_cue(10, 4).unwrap()).unwrap();
    let m = u.matrix();
    assert!((m - m.transpose()).iter().all(|z| z.norm() < 1e-12));
}

#[test]
fn spacing_statistics_match_their_class() {
    let mut cue = Vec::new();
    let mut coe = Vec::new();
    for seed in 0..4 {
        let u = sample_cue(256, seed).unwrap();
        cue.extend(nearest_neighbor_spacings(spectral_decompose(&u).unwrap().phases()));
        let o = make_coe(&u).unwrap();
        coe.extend(nearest_neighbor_spacings(spectral_decompose(&o).unwrap().phases()));
    }
    let (cue_own, cue_other) = (l1_distance(&cue, surmise_cue), l1_distance(&cue, surmise_coe));
    let (coe_own, coe_other) = (l1_distance(&coe, surmise_coe), l1_distance(&coe, surmise_cue));
    // with about 1000 spacings in 40 bins the sampling noise alone gives an
    // L1 distance near 0.16
    assert!(cue_own < 0.25 && cue_own < cue_other, "CUE {cue_own} vs {cue_other}");
    assert!(coe_own < 0.25 && coe_own < coe_other, "COE {coe_own} vs {coe_other}");
}
