//! Smoothed wave trace of the Dirichlet Laplacian on a rectangle.
//!
//! The sum `Σ cos(√μₖ t)` diverges for most `t`; weighting each term by
//! `exp(−μₖ σ²/2)` turns its singularities into bumps of width about `σ`,
//! located at the lengths of closed billiard orbits.

use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;

use crate::billiard::LengthSpectrum;
use crate::error::{Error, Result};

/// Dirichlet eigenvalues of `−Δ` on `[0, a] × [0, b]`, ascending with
/// multiplicity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaplaceSpectrum {
    a: f64,
    b: f64,
    eigenvalues: Vec<f64>,
    /// Every eigenvalue up to this value is present.
    complete_to: f64,
}

/// `π²(n²/a² + m²/b²)`.
pub fn rectangle_eigenvalue(a: f64, b: f64, n: u32, m: u32) -> f64 {
    let (n, m) = (n as f64, m as f64);
    PI * PI * (n * n / (a * a) + m * m / (b * b))
}

fn check_sides(a: f64, b: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite() && b > 0.0 && b.is_finite()) {
        return Err(Error::invalid(format!("rectangle sides must be positive, got a = {a}, b = {b}")));
    }
    Ok(())
}

impl LaplaceSpectrum {
    pub fn sides(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn complete_to(&self) -> f64 {
        self.complete_to
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Number of eigenvalues `≤ mu`.
    pub fn count_below(&self, mu: f64) -> usize {
        self.eigenvalues.partition_point(|&v| v <= mu)
    }

    fn from_values(a: f64, b: f64, mut eigenvalues: Vec<f64>, complete_to: f64) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        LaplaceSpectrum { a, b, eigenvalues, complete_to }
    }
}

/// All eigenvalues `≤ mu_max`.
pub fn rectangle_spectrum(a: f64, b: f64, mu_max: f64) -> Result<LaplaceSpectrum> {
    check_sides(a, b)?;
    if !(mu_max > 0.0 && mu_max.is_finite()) {
        return Err(Error::invalid(format!("mu_max must be positive, got {mu_max}")));
    }
    // n²/a² ≤ μ/π² bounds each index on its own.
    let n_max = (a * mu_max.sqrt() / PI).floor() as u32;
    let m_max = (b * mu_max.sqrt() / PI).floor() as u32;
    let mut values = Vec::new();
    for n in 1..=n_max {
        for m in 1..=m_max {
            let mu = rectangle_eigenvalue(a, b, n, m);
            if mu <= mu_max {
                values.push(mu);
            }
        }
    }
    Ok(LaplaceSpectrum::from_values(a, b, values, mu_max))
}

/// All eigenvalues with mode indices `n ≤ n_max`, `m ≤ m_max`.
pub fn from_mode_box(a: f64, b: f64, n_max: u32, m_max: u32) -> Result<LaplaceSpectrum> {
    check_sides(a, b)?;
    if n_max < 1 || m_max < 1 {
        return Err(Error::invalid("mode box needs n_max, m_max >= 1"));
    }
    let values = (1..=n_max)
        .flat_map(|n| (1..=m_max).map(move |m| rectangle_eigenvalue(a, b, n, m)))
        .collect();
    let complete_to = rectangle_eigenvalue(a, b, n_max + 1, 1)
        .min(rectangle_eigenvalue(a, b, 1, m_max + 1))
        .next_down();
    Ok(LaplaceSpectrum::from_values(a, b, values, complete_to))
}

/// Weyl's leading term for the eigenvalue count up to `mu`.
pub fn weyl_count(a: f64, b: f64, mu: f64) -> f64 {
    a * b * mu / (4.0 * PI)
}

/// Relative sup residual of `−Δₕu = μu` for `u = 2 sin(πnx/a) sin(πmy/b)`
/// under the five-point Laplacian on a `lattice × lattice` grid.
pub fn eigenfunction_residual(a: f64, b: f64, n: u32, m: u32, lattice: usize) -> Result<f64> {
    check_sides(a, b)?;
    if lattice < 3 {
        return Err(Error::invalid("eigenfunction check needs a lattice of at least 3 points"));
    }
    let (hx, hy) = (a / (lattice - 1) as f64, b / (lattice - 1) as f64);
    let mu = rectangle_eigenvalue(a, b, n, m);
    let u = |i: usize, j: usize| {
        2.0 * (PI * n as f64 * i as f64 * hx / a).sin() * (PI * m as f64 * j as f64 * hy / b).sin()
    };
    let (mut worst, mut scale): (f64, f64) = (0.0, 0.0);
    for i in 1..lattice - 1 {
        for j in 1..lattice - 1 {
            let c = u(i, j);
            let lap = (u(i - 1, j) - 2.0 * c + u(i + 1, j)) / (hx * hx)
                + (u(i, j - 1) - 2.0 * c + u(i, j + 1)) / (hy * hy);
            worst = worst.max((-lap - mu * c).abs());
            scale = scale.max((mu * c).abs());
        }
    }
    Ok(worst / scale)
}

/// `Σ_{μ > mu_max} exp(−μσ²/2)` over the whole rectangle spectrum, summed
/// until the remaining terms fall below `1e-300`.
pub fn gaussian_tail(a: f64, b: f64, mu_max: f64, sigma: f64) -> Result<f64> {
    check_sides(a, b)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    let cutoff = mu_max.max(0.0) + 2.0 * 300.0 * 10f64.ln() / (sigma * sigma);
    let n_max = (a * cutoff.sqrt() / PI).ceil() as u32;
    let m_max = (b * cutoff.sqrt() / PI).ceil() as u32;
    let mut tail = 0.0;
    for n in 1..=n_max {
        for m in 1..=m_max {
            let mu = rectangle_eigenvalue(a, b, n, m);
            if mu > mu_max && mu <= cutoff {
                tail += (-mu * sigma * sigma / 2.0).exp();
            }
        }
    }
    Ok(tail)
}

/// `t0, t0 + step, …` up to and including `t1` (to rounding).
pub fn time_grid(t0: f64, t1: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && t0.is_finite() && t1.is_finite() && t1 >= t0) {
        return Err(Error::invalid(format!("bad time range [{t0}, {t1}] with step {step}")));
    }
    let count = ((t1 - t0) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| t0 + i as f64 * step).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSignal {
    pub t_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub sigma: f64,
    pub mu_max: f64,
}

impl TraceSignal {
    /// Writes `t,value`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "value"])?;
        for (t, v) in self.t_grid.iter().zip(&self.values) {
            w.write_record([t.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `Σₖ cos(√μₖ t) exp(−μₖσ²/2)` at each time, summed in ascending `μ`.
pub fn smoothed_wave_trace(s: &LaplaceSpectrum, t_grid: &[f64], sigma: f64) -> Result<TraceSignal> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    if s.is_empty() {
        return Err(Error::invalid("wave trace needs a nonempty spectrum"));
    }
    if let Some(t) = t_grid.iter().find(|t| !t.is_finite()) {
        return Err(Error::invalid(format!("time {t} is not finite")));
    }
    let freqs: Vec<f64> = s.eigenvalues.iter().map(|mu| mu.sqrt()).collect();
    let weights: Vec<f64> = s.eigenvalues.iter().map(|mu| (-mu * sigma * sigma / 2.0).exp()).collect();
    let values = t_grid
        .iter()
        .map(|t| {
            let t = t.abs();
            freqs.iter().zip(&weights).map(|(f, w)| (f * t).cos() * w).sum()
        })
        .collect();
    Ok(TraceSignal {
        t_grid: t_grid.to_vec(),
        values,
        sigma,
        mu_max: s.eigenvalues.last().copied().unwrap_or(0.0),
    })
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// `median + 3·MAD` of the signal values.
pub fn peak_threshold(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::INFINITY;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let med = median(&v);
    let mut dev: Vec<f64> = v.iter().map(|x| (x - med).abs()).collect();
    dev.sort_by(f64::total_cmp);
    med + 3.0 * median(&dev)
}

/// Times where the signal is a strict maximum over `±window` samples and
/// exceeds [`peak_threshold`]. Samples closer than `window` to either end
/// and `t = 0` are never reported.
pub fn detect_peaks(sig: &TraceSignal, window: usize) -> Result<Vec<f64>> {
    if window < 1 {
        return Err(Error::invalid("peak window must be at least 1"));
    }
    let v = &sig.values;
    if v.len() < 2 * window + 1 {
        return Err(Error::invalid(format!(
            "signal has {} samples, fewer than 2 * window + 1 = {}",
            v.len(),
            2 * window + 1
        )));
    }
    let threshold = peak_threshold(v);
    let mut peaks = Vec::new();
    for i in window..v.len() - window {
        if v[i] <= threshold || sig.t_grid[i] == 0.0 {
            continue;
        }
        let strict = (i - window..=i + window).all(|j| j == i || v[j] < v[i]);
        if strict {
            peaks.push(sig.t_grid[i]);
        }
    }
    Ok(peaks)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakMatch {
    pub peak: f64,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthComparison {
    pub tol: f64,
    pub matched: Vec<PeakMatch>,
    pub missed: Vec<f64>,
    pub spurious: Vec<f64>,
}

impl LengthComparison {
    pub fn is_exact(&self) -> bool {
        self.missed.is_empty() && self.spurious.is_empty()
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }
}

/// Greedy nearest matching of peaks to orbit lengths within `tol`.
pub fn compare_lengths(peaks: &[f64], ls: &LengthSpectrum, tol: f64) -> Result<LengthComparison> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::invalid(format!("match tolerance must be positive, got {tol}")));
    }
    let lengths = ls.lengths();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in peaks.iter().enumerate() {
        for (j, l) in lengths.iter().enumerate() {
            let d = (p - l).abs();
            if d <= tol {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut peak_used = vec![false; peaks.len()];
    let mut length_used = vec![false; lengths.len()];
    let mut matched = Vec::new();
    for (_, i, j) in pairs {
        if !peak_used[i] && !length_used[j] {
            peak_used[i] = true;
            length_used[j] = true;
            matched.push(PeakMatch { peak: peaks[i], length: lengths[j] });
        }
    }
    matched.sort_by(|x, y| x.length.total_cmp(&y.length));
    let missed = lengths.iter().zip(&length_used).filter(|(_, u)| !**u).map(|(l, _)| *l).collect();
    let spurious = peaks.iter().zip(&peak_used).filter(|(_, u)| !**u).map(|(p, _)| *p).collect();
    Ok(LengthComparison { tol, matched, missed, spurious })
}
