//! Nearest-neighbour eigenphase spacing statistics and the Wigner-type
//! surmises they are compared against.

use std::f64::consts::PI;

/// Unfolded nearest-neighbour spacings of phases on the circle, including
/// the gap that wraps from the largest phase back to the smallest. The mean
/// spacing is one.
pub fn nearest_neighbor_spacings(phases: &[f64]) -> Vec<f64> {
    let n = phases.len();
    if n < 2 {
        return Vec::new();
    }
    let mut sorted = phases.to_vec();
    sorted.sort_by(f64::total_cmp);
    let unit = 2.0 * PI / n as f64;
    let mut out: Vec<f64> = sorted.windows(2).map(|w| (w[1] - w[0]) / unit).collect();
    out.push((sorted[0] + 2.0 * PI - sorted[n - 1]) / unit);
    out
}

/// Unitary-class surmise `(32/pi^2) s^2 exp(-4 s^2/pi)`.
pub fn surmise_cue(s: f64) -> f64 {
    32.0 / (PI * PI) * s * s * (-4.0 * s * s / PI).exp()
}

/// Orthogonal-class surmise `(pi/2) s exp(-pi s^2/4)`.
pub fn surmise_coe(s: f64) -> f64 {
    PI / 2.0 * s * (-PI * s * s / 4.0).exp()
}

pub fn poisson(s: f64) -> f64 {
    (-s).exp()
}

/// Composite Simpson rule on `[a, b]` with `panels` (even) intervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels.max(2) + panels % 2;
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for k in 1..panels {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// Spacings are histogrammed on `[0, SPACING_RANGE)`; mass beyond it is
/// compared as a single tail cell.
pub const SPACING_RANGE: f64 = 4.0;
pub const SPACING_BINS: usize = 40;

/// L1 distance between the empirical spacing distribution and a density,
/// with the density integrated numerically over each histogram bin.
pub fn l1_distance<F: Fn(f64) -> f64>(spacings: &[f64], density: F) -> f64 {
    if spacings.is_empty() {
        return f64::NAN;
    }
    let width = SPACING_RANGE / SPACING_BINS as f64;
    let mut counts = vec![0usize; SPACING_BINS];
    let mut tail = 0usize;
    for &s in spacings {
        if s >= SPACING_RANGE {
            tail += 1;
        } else if s >= 0.0 {
            counts[(s / width) as usize] += 1;
        }
    }
    let total = spacings.len() as f64;
    let mut dist = 0.0;
    let mut inside = 0.0;
    for (b, &c) in counts.iter().enumerate() {
        let lo = b as f64 * width;
        let mass = simpson(&density, lo, lo + width, 16);
        inside += mass;
        dist += (c as f64 / total - mass).abs();
    }
    dist + (tail as f64 / total - (1.0 - inside)).abs()
}

/// Kolmogorov-Smirnov distance between two empirical samples.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surmises_are_normalized_with_unit_mean() {
        for f in [surmise_cue as fn(f64) -> f64, surmise_coe, poisson] {
            let mass = simpson(f, 0.0, 30.0, 6000);
            let mean = simpson(|s| s * f(s), 0.0, 30.0, 6000);
            assert!((mass - 1.0).abs() < 1e-9, "mass {mass}");
            assert!((mean - 1.0).abs() < 1e-9, "mean {mean}");
        }
    }

    #[test]
    fn equally_spaced_phases() {
        let phases: Vec<f64> = (0..8).map(|k| -PI + 0.5 + k as f64 * PI / 4.0).collect();
        let s = nearest_neighbor_spacings(&phases);
        assert_eq!(s.len(), 8);
        assert!(s.iter().all(|x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn l1_of_identical_sample_is_small() {
        // deterministic quantiles of the COE surmise: inverse CDF
        // s = sqrt(-4 ln(1-u)/pi)
        let n = 20000;
        let sample: Vec<f64> = (0..n)
            .map(|k| {
                let u = (k as f64 + 0.5) / n as f64;
                (-4.0 * (1.0 - u).ln() / PI).sqrt()
            })
            .collect();
        let to_coe = l1_distance(&sample, surmise_coe);
        let to_cue = l1_distance(&sample, surmise_cue);
        assert!(to_coe < 0.01, "{to_coe}");
        assert!(to_cue > 0.1, "{to_cue}");
    }

    #[test]
    fn ks_basics() {
        assert_eq!(ks_distance(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(ks_distance(&[0.0, 0.1], &[5.0, 6.0]), 1.0);
    }
}
