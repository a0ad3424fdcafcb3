//! Static SVG renderings of a finished run: saturation level against
//! strength, decay against rescaled time, and the averaged LDOS.
//!
//! Output depends only on the result passed in, so identical results give
//! identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::runner::ExperimentResult;
use crate::analysis::{lorentzian_density, strong_perturbation_floor, FitModel};
use crate::error::{Error, Result};

pub const SATURATION_SVG: &str = "saturation.svg";
pub const DECAY_SVG: &str = "decay.svg";
pub const LDOS_SVG: &str = "ldos.svg";

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

#[derive(Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Option<Axis> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return None;
        }
        if log {
            let (a, b) = (lo.log10().floor(), hi.log10().ceil());
            let b = if b <= a { a + 1.0 } else { b };
            Some(Axis {
                lo: 10f64.powf(a),
                hi: 10f64.powf(b),
                log,
            })
        } else {
            let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 * lo.abs().max(1.0) };
            Some(Axis {
                lo: lo - pad,
                hi: hi + pad,
                log,
            })
        }
    }

    fn unit(&self, v: f64) -> f64 {
        if self.log {
            (v.log10() - self.lo.log10()) / (self.hi.log10() - self.lo.log10())
        } else {
            (v - self.lo) / (self.hi - self.lo)
        }
    }

    fn contains(&self, v: f64) -> bool {
        v.is_finite() && (!self.log || v > 0.0) && v >= self.lo && v <= self.hi
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let (a, b) = (self.lo.log10().round() as i32, self.hi.log10().round() as i32);
            let stride = ((b - a) / 6).max(1);
            (a..=b).step_by(stride as usize).map(|e| 10f64.powi(e)).collect()
        } else {
            let raw = (self.hi - self.lo) / 5.0;
            let mag = 10f64.powf(raw.log10().floor());
            let step = [1.0, 2.0, 5.0, 10.0]
                .iter()
                .map(|m| m * mag)
                .find(|s| *s >= raw)
                .unwrap_or(10.0 * mag);
            let first = (self.lo / step).ceil() as i64;
            let last = (self.hi / step).floor() as i64;
            (first..=last).map(|k| k as f64 * step).collect()
        }
    }
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        format!("1e{}", v.log10().round() as i32)
    } else if v == 0.0 {
        "0".into()
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Plot {
    x: Axis,
    y: Axis,
    body: String,
    legend: Vec<(String, &'static str, bool)>,
}

impl Plot {
    fn new(x: Axis, y: Axis) -> Self {
        Plot {
            x,
            y,
            body: String::new(),
            legend: Vec::new(),
        }
    }

    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        (
            LEFT + self.x.unit(x) * (WIDTH - LEFT - RIGHT),
            HEIGHT - BOTTOM - self.y.unit(y) * (HEIGHT - TOP - BOTTOM),
        )
    }

    fn line(&mut self, pts: &[(f64, f64)], color: &str, dashed: bool) {
        let coords: Vec<String> = pts
            .iter()
            .filter(|(x, y)| self.x.contains(*x) && self.y.contains(*y))
            .map(|&(x, y)| {
                let (a, b) = self.px(x, y);
                format!("{a:.2},{b:.2}")
            })
            .collect();
        if coords.len() < 2 {
            return;
        }
        let dash = if dashed { " stroke-dasharray=\"6,4\"" } else { "" };
        let _ = writeln!(
            self.body,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash} points=\"{}\"/>",
            coords.join(" ")
        );
    }

    fn markers(&mut self, pts: &[(f64, f64)], color: &str) {
        for &(x, y) in pts {
            if self.x.contains(x) && self.y.contains(y) {
                let (a, b) = self.px(x, y);
                let _ = writeln!(self.body, "<circle cx=\"{a:.2}\" cy=\"{b:.2}\" r=\"3.5\" fill=\"{color}\"/>");
            }
        }
    }

    fn steps(&mut self, edges: &[f64], heights: &[f64], color: &str) {
        let mut pts = Vec::new();
        for (k, &h) in heights.iter().enumerate() {
            if self.y.contains(h) {
                pts.push((edges[k], h));
                pts.push((edges[k + 1], h));
            } else {
                self.line(&pts, color, false);
                pts.clear();
            }
        }
        self.line(&pts, color, false);
    }

    fn render(&self, title: &str, xlabel: &str, ylabel: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
        );
        let _ = writeln!(s, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
        let (x0, y0) = (LEFT, HEIGHT - BOTTOM);
        let (x1, y1) = (WIDTH - RIGHT, TOP);
        let _ = writeln!(
            s,
            "<rect x=\"{x0}\" y=\"{y1}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
            x1 - x0,
            y0 - y1
        );
        for t in self.x.ticks() {
            let (a, _) = self.px(t, self.y.lo);
            let _ = writeln!(s, "<line x1=\"{a:.2}\" y1=\"{y0}\" x2=\"{a:.2}\" y2=\"{}\" stroke=\"black\"/>", y0 - 5.0);
            let _ = writeln!(
                s,
                "<text x=\"{a:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
                y0 + 18.0,
                tick_label(t, self.x.log)
            );
        }
        for t in self.y.ticks() {
            let (_, b) = self.px(self.x.lo, t);
            let _ = writeln!(s, "<line x1=\"{x0}\" y1=\"{b:.2}\" x2=\"{}\" y2=\"{b:.2}\" stroke=\"black\"/>", x0 + 5.0);
            let _ = writeln!(
                s,
                "<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
                x0 - 6.0,
                b + 4.0,
                tick_label(t, self.y.log)
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
            WIDTH / 2.0,
            escape(title)
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            (x0 + x1) / 2.0,
            HEIGHT - 18.0,
            escape(xlabel)
        );
        let _ = writeln!(
            s,
            "<text x=\"20\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 20 {:.2})\">{}</text>",
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(ylabel)
        );
        s.push_str(&self.body);
        for (i, (label, color, dashed)) in self.legend.iter().enumerate() {
            let y = TOP + 16.0 + 16.0 * i as f64;
            let x = WIDTH - RIGHT - 190.0;
            let dash = if *dashed { " stroke-dasharray=\"6,4\"" } else { "" };
            let _ = writeln!(
                s,
                "<line x1=\"{x}\" y1=\"{:.2}\" x2=\"{}\" y2=\"{:.2}\" stroke=\"{color}\" stroke-width=\"2\"{dash}/>",
                y - 4.0,
                x + 20.0,
                y - 4.0
            );
            let _ = writeln!(s, "<text x=\"{}\" y=\"{y:.2}\">{}</text>", x + 26.0, escape(label));
        }
        s.push_str("</svg>\n");
        s
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
}

/// Saturation level against strength on log-log axes, with the fitted
/// inverse-square law and the strong-perturbation floor per ensemble.
pub fn saturation_figure(result: &ExperimentResult) -> Result<String> {
    let estimator = result.primary_estimator();
    let mut curves = Vec::new();
    for sys in &result.systems {
        if let Ok(c) = result.curve(sys.ensemble, estimator, None) {
            let pts: Vec<(f64, f64)> = c
                .deltas
                .iter()
                .zip(&c.f_inf)
                .filter(|(d, f)| **d > 0.0 && **f > 0.0)
                .map(|(d, f)| (*d, *f))
                .collect();
            if !pts.is_empty() {
                curves.push((sys, pts));
            }
        }
    }
    if curves.is_empty() {
        return Err(Error::InvalidArgument("result holds no curve with a positive delta".into()));
    }
    let floors: Vec<f64> = curves
        .iter()
        .filter_map(|(s, _)| strong_perturbation_floor(s.ensemble.beta(), s.dim).ok())
        .collect();
    let x = Axis::fit(curves.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)), true).expect("points exist");
    let y = Axis::fit(
        curves.iter().flat_map(|(_, p)| p.iter().map(|q| q.1)).chain(floors.iter().copied()),
        true,
    )
    .expect("points exist");
    let mut plot = Plot::new(x, y);
    for (i, (sys, pts)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        plot.markers(pts, color);
        plot.legend.push((format!("{} N={}", sys.ensemble, sys.dim), color, false));
        let fit = result.fits.iter().find(|f| {
            f.model == FitModel::PowerLaw && f.tags.get("ensemble").map(String::as_str) == Some(sys.ensemble.name())
        });
        if let Some(fit) = fit {
            let c = fit.param("c_pinned");
            let line: Vec<(f64, f64)> = log_grid(x.lo, x.hi, 64)
                .into_iter()
                .map(|d| (d, c / (d * d * sys.lambda_sq * sys.dim as f64)))
                .collect();
            plot.line(&line, color, false);
            plot.legend.push((format!("C = {c:.2}"), color, false));
        }
        if let Ok(floor) = strong_perturbation_floor(sys.ensemble.beta(), sys.dim) {
            plot.line(&[(x.lo, floor), (x.hi, floor)], color, true);
            plot.legend.push((format!("{}/N", 4 - sys.ensemble.beta()), color, true));
        }
    }
    Ok(plot.render("Saturation level", "delta", "F_inf"))
}

/// Averaged fidelity against `delta^2 n` on a log scale, one curve per
/// inset strength.
pub fn decay_figure(result: &ExperimentResult) -> Result<Option<String>> {
    let curves: Vec<(f64, Vec<(f64, f64)>)> = result
        .insets
        .iter()
        .filter(|i| i.delta > 0.0)
        .map(|i| {
            let d2 = i.delta * i.delta;
            (
                i.delta,
                i.series
                    .iter()
                    .enumerate()
                    .filter(|(_, f)| **f > 0.0)
                    .map(|(n, f)| (d2 * n as f64, *f))
                    .collect(),
            )
        })
        .collect();
    if curves.is_empty() {
        return Ok(None);
    }
    let x = Axis::fit(curves.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)), false).expect("series exist");
    let x = Axis { lo: 0.0, ..x };
    let y = Axis::fit(curves.iter().flat_map(|(_, p)| p.iter().map(|q| q.1)), true).expect("series exist");
    let mut plot = Plot::new(x, y);
    for (i, (delta, pts)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        plot.line(pts, color, false);
        plot.legend.push((format!("delta = {delta}"), color, false));
    }
    Ok(Some(plot.render("Fidelity decay", "delta^2 n", "F(n)")))
}

/// Averaged LDOS density on a log scale with the fitted Lorentzian.
pub fn ldos_figure(result: &ExperimentResult) -> Result<Option<String>> {
    let insets: Vec<_> = result.insets.iter().filter(|i| i.delta > 0.0).collect();
    if insets.is_empty() {
        return Ok(None);
    }
    let densities: Vec<Vec<f64>> = insets
        .iter()
        .map(|i| {
            let width = i.ldos_edges[1] - i.ldos_edges[0];
            i.ldos_weights.iter().map(|w| w / width).collect()
        })
        .collect();
    let x = Axis {
        lo: insets[0].ldos_edges[0],
        hi: *insets[0].ldos_edges.last().expect("edges"),
        log: false,
    };
    let y = Axis::fit(densities.iter().flatten().copied(), true)
        .ok_or_else(|| Error::InvalidArgument("LDOS has no positive weight".into()))?;
    let mut plot = Plot::new(x, y);
    for (i, (inset, dens)) in insets.iter().zip(&densities).enumerate() {
        let color = COLORS[i % COLORS.len()];
        plot.steps(&inset.ldos_edges, dens, color);
        plot.legend.push((format!("delta = {}", inset.delta), color, false));
        if let Some(fit) = &inset.lorentzian_fit {
            let gamma = fit.param("width");
            let pts: Vec<(f64, f64)> = (0..=400)
                .map(|k| {
                    let t = x.lo + (x.hi - x.lo) * k as f64 / 400.0;
                    (t, lorentzian_density(t, gamma))
                })
                .collect();
            plot.line(&pts, color, true);
            plot.legend.push((format!("Lorentzian width {gamma:.3}"), color, true));
        }
    }
    Ok(Some(plot.render("Local density of states", "phase difference", "density")))
}

/// Writes the figures available for `result` into `dir` and returns their
/// paths. Fails before writing anything if the result holds no curve.
pub fn emit_figures(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = vec![(SATURATION_SVG, saturation_figure(result)?)];
    if let Some(svg) = decay_figure(result)? {
        files.push((DECAY_SVG, svg));
    }
    if let Some(svg) = ldos_figure(result)? {
        files.push((LDOS_SVG, svg));
    }
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for (name, svg) in files {
        let path = dir.join(name);
        fs::write(&path, svg)?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::validate_config;
    use crate::experiment::runner::run_experiment;

    fn result(extra: &str) -> ExperimentResult {
        let cfg = validate_config(&format!(
            "ensemble = \"CUE\"\ndim = 16\nseeds = [1]\nwindow_start = 20\nwindow_count = 20\nestimator = \"ipr\"\n{extra}"
        ))
        .unwrap();
        run_experiment(&cfg).unwrap()
    }

    #[test]
    fn empty_curve_is_an_error() {
        let mut r = result("deltas = [0.3]\n");
        r.rows.clear();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("figs");
        assert!(emit_figures(&r, &out).is_err());
        assert!(!out.exists());
    }

    #[test]
    fn single_point_has_one_marker_and_no_fit_line() {
        let r = result("deltas = [0.3]\n");
        let svg = saturation_figure(&r).unwrap();
        assert_eq!(svg.matches("<circle").count(), 1);
        // only the dashed floor line is drawn
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("stroke-dasharray"));
    }

    #[test]
    fn figures_are_deterministic() {
        let r = result("deltas = [0.2, 0.4, 0.6]\ninset_deltas = [0.2, 0.4]\ninset_steps = 30\nbins = 16\n");
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let p1 = emit_figures(&r, d1.path()).unwrap();
        let p2 = emit_figures(&r, d2.path()).unwrap();
        assert_eq!(p1.len(), 3);
        for (a, b) in p1.iter().zip(&p2) {
            assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
        }
    }

    #[test]
    fn tick_positions() {
        let a = Axis { lo: 1e-3, hi: 1.0, log: true };
        assert_eq!(a.ticks().len(), 4);
        let b = Axis { lo: 0.0, hi: 1.0, log: false };
        assert_eq!(b.ticks(), vec![0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]);
        assert_eq!(tick_label(0.6000000000000001, false), "0.6");
    }
}
