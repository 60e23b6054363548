//! The heat semigroup on the circle `ℝ/ℤ` and the theta transformation.
//!
//! `u(t) = P_t f` is computed either by damping each trigonometric mode by
//! `e^{−4π²k²t}` or by integrating against the periodized heat kernel. The
//! trace of `P_t` computed both ways gives
//! `Σ_k e^{−4π²k²t} = (4πt)^{−1/2} Σ_ℓ e^{−ℓ²/4t}`, that is
//! `θ(s) = s^{−1/2} θ(1/s)` with `s = 4πt`.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{apply_kernel, diagonal_trace, KernelSpec};
use crate::quadrature::{Grid, GridKind};
use crate::sturm::SpectralBasis;
use crate::sum::CompensatedSum;

/// Terms of the theta series below this size end the summation.
pub const THETA_TERM_CUTOFF: f64 = 1e-18;

/// Largest truncation index `theta` accepts before asking for the
/// transformed side instead.
pub const THETA_MAX_TERMS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaEvaluation {
    pub s: f64,
    pub value: f64,
    /// Last index `k` included in `1 + 2 Σ_{k ≥ 1} e^{−sπk²}`.
    pub k_used: u64,
    /// Upper bound on the omitted terms.
    pub tail_estimate: f64,
}

/// `Σ_{k ∈ ℤ} e^{−a k²}` truncated at the first term below
/// [`THETA_TERM_CUTOFF`].
fn gaussian_lattice_sum(a: f64) -> Result<(f64, u64, f64)> {
    let cutoff = -THETA_TERM_CUTOFF.ln();
    let mut k = ((cutoff / a).sqrt().floor() as u64).max(1);
    // k_used is the smallest k with e^{−ak²} < cutoff; the estimate above
    // can be off by one in either direction.
    while k > 1 && a * ((k - 1) as f64).powi(2) > cutoff {
        k -= 1;
    }
    while a * (k as f64).powi(2) <= cutoff {
        k += 1;
    }
    if k > THETA_MAX_TERMS {
        return Err(Error::invalid(format!(
            "theta series would need {k} terms; evaluate the transformed side s^(-1/2) θ(1/s) instead"
        )));
    }
    let tail: f64 = (1..=k)
        .rev()
        .map(|j| (-a * (j as f64).powi(2)).exp())
        .collect::<CompensatedSum>()
        .value();
    let next = (k + 1) as f64;
    let tail_estimate = 2.0 * (-a * next * next).exp() / (1.0 - (-a * (2.0 * next + 1.0)).exp());
    Ok((1.0 + 2.0 * tail, k, tail_estimate))
}

/// `θ(s) = Σ_{k ∈ ℤ} e^{−sπk²}`.
pub fn theta(s: f64) -> Result<ThetaEvaluation> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::invalid(format!("theta needs s > 0, got {s}")));
    }
    let (value, k_used, tail_estimate) = gaussian_lattice_sum(s * PI)?;
    Ok(ThetaEvaluation { s, value, k_used, tail_estimate })
}

/// `|θ(s) − s^{−1/2} θ(1/s)|`.
pub fn theta_transform_residual(s: f64) -> Result<f64> {
    let direct = theta(s)?;
    let dual = theta(1.0 / s)?;
    Ok((direct.value - dual.value / s.sqrt()).abs())
}

/// The theta identity written in the heat-kernel time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaIdentity {
    pub t: f64,
    /// `Σ_k e^{−4π²k²t}`.
    pub lhs: f64,
    /// `(4πt)^{−1/2} Σ_ℓ e^{−ℓ²/4t}`.
    pub rhs: f64,
    pub residual: f64,
}

pub fn theta_identity(t: f64) -> Result<ThetaIdentity> {
    check_time(t)?;
    let (lhs, _, _) = gaussian_lattice_sum(4.0 * PI * PI * t)?;
    let (images, _, _) = gaussian_lattice_sum(1.0 / (4.0 * t))?;
    let rhs = images / (4.0 * PI * t).sqrt();
    Ok(ThetaIdentity { t, lhs, rhs, residual: (lhs - rhs).abs() })
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("heat evolution needs t > 0, got {t}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeatMethod {
    /// Damp trigonometric modes `|k| ≤ k_max`.
    Spectral { k_max: usize },
    /// Quadrature against the periodized kernel with `l_max` images.
    Kernel { l_max: usize },
}

impl HeatMethod {
    /// Spectral method using every mode the grid resolves.
    pub fn full_spectral(g: &Grid) -> Self {
        HeatMethod::Spectral { k_max: (g.len() - 1) / 2 }
    }
}

/// `u(t) = P_t f` on a midpoint grid.
pub fn heat_evolve(f: &[f64], g: &Grid, t: f64, method: HeatMethod) -> Result<Vec<f64>> {
    check_time(t)?;
    if g.kind() != GridKind::UniformMidpoint {
        return Err(Error::invalid("heat evolution on the circle needs a midpoint grid"));
    }
    g.check_len(f, "initial data")?;
    match method {
        HeatMethod::Spectral { k_max } => {
            if 2 * k_max >= g.len() {
                return Err(Error::invalid(format!(
                    "k_max = {k_max} exceeds the {} modes resolved by {} nodes",
                    (g.len() - 1) / 2,
                    g.len()
                )));
            }
            let basis = SpectralBasis::Periodic;
            let mut u = vec![0.0; g.len()];
            let k_max = k_max as i64;
            for k in (-k_max..=k_max).rev() {
                let mode = basis.sample(k, g);
                let c = g.inner_product(f, &mode)? * (-basis.mu(k) * t).exp();
                for (ui, m) in u.iter_mut().zip(&mode) {
                    *ui += c * m;
                }
            }
            Ok(u)
        }
        HeatMethod::Kernel { l_max } => {
            let kernel = KernelSpec::heat_circle_with(t, l_max)?;
            apply_kernel(&kernel, f, g)
        }
    }
}

/// Seeded random trigonometric polynomial `Σ_{|k| ≤ modes} cₖ eₖ(x)` in the
/// periodic basis, coefficients uniform in `[−1, 1)`.
pub fn random_trig_samples(g: &Grid, seed: u64, modes: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = SpectralBasis::Periodic;
    let modes = modes as i64;
    let coeffs: Vec<(i64, f64)> = (-modes..=modes).map(|k| (k, rng.gen_range(-1.0..1.0))).collect();
    g.sample(|x| coeffs.iter().map(|(k, c)| c * basis.mode(*k, x)).sum())
}

/// Both sides of the heat trace identity at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatTraceCheck {
    pub t: f64,
    /// `Σ_k e^{−4π²k²t}`.
    pub spectral_side: f64,
    /// `∫₀¹ K^per_t(x, x) dx` by quadrature on the grid.
    pub kernel_side: f64,
    pub residual: f64,
}

pub fn heat_trace_check(t: f64, g: &Grid) -> Result<HeatTraceCheck> {
    check_time(t)?;
    let (spectral_side, _, _) = gaussian_lattice_sum(4.0 * PI * PI * t)?;
    let kernel_side = diagonal_trace(&KernelSpec::heat_circle(t)?, g)?;
    Ok(HeatTraceCheck { t, spectral_side, kernel_side, residual: (spectral_side - kernel_side).abs() })
}

/// Writes `t,lhs,rhs,residual` with the spectral side on the left.
pub fn write_heat_trace_csv<W: Write>(writer: W, rows: &[HeatTraceCheck]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "lhs", "rhs", "residual"])?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            r.spectral_side.to_string(),
            r.kernel_side.to_string(),
            r.residual.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
