//! Mercer expansion of the Dirichlet Green's function and the Basel sum.
//!
//! With the analytic eigenpairs `λₖ = 1/(π²k²)`, `fₖ = √2 sin kπx`, the
//! truncated expansion `Σ_{k ≤ K} λₖ fₖ(x) fₖ(y)` converges uniformly to
//! `G(x, y)`, and integrating its diagonal gives `Σ λₖ = ∫₀¹ G(x,x) dx = 1/6`,
//! which is the Basel identity `Σ 1/k² = π²/6` in disguise.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::Grid;
use crate::sturm::SpectralBasis;
use crate::sum::CompensatedSum;

/// Outcome of comparing a truncated expansion with the Green's function on
/// a square lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MercerReport {
    pub k_max: usize,
    /// `max |G(x, y) − Σ_{k ≤ k_max} λₖ fₖ(x) fₖ(y)|` over the lattice.
    pub sup_error: f64,
    /// `2/(π² k_max)`, which dominates the pointwise truncation error.
    pub tail_bound: f64,
    /// `Σ_{k ≤ k_max} 1/k²`.
    pub partial_basel: f64,
    /// `π²/6`.
    pub basel_target: f64,
}

fn basel_target() -> f64 {
    PI * PI / 6.0
}

/// Evaluates the truncated expansion on the `lattice_n × lattice_n` lattice
/// of points `(i, j)/(lattice_n − 1)`.
pub fn mercer_reconstruct(k_max: usize, lattice_n: usize) -> Result<MercerReport> {
    if k_max < 1 {
        return Err(Error::invalid("Mercer reconstruction needs k_max >= 1"));
    }
    if lattice_n < 2 {
        return Err(Error::invalid("Mercer reconstruction needs lattice_n >= 2"));
    }
    let basis = SpectralBasis::Dirichlet;
    let lattice = Grid::trapezoid(lattice_n)?;
    let x = lattice.nodes();
    // modes[k - 1][i] = fₖ(xᵢ)
    let modes: Vec<Vec<f64>> = (1..=k_max as i64).map(|k| basis.sample(k, &lattice)).collect();
    let lambdas: Vec<f64> = (1..=k_max as i64).map(|k| basis.lambda(k)).collect();
    let mut sup_error: f64 = 0.0;
    for i in 0..lattice_n {
        for j in i..lattice_n {
            let mut s = 0.0;
            for k in (0..k_max).rev() {
                s += lambdas[k] * modes[k][i] * modes[k][j];
            }
            let g = x[i].min(x[j]) * (1.0 - x[i].max(x[j]));
            sup_error = sup_error.max((g - s).abs());
        }
    }
    Ok(MercerReport {
        k_max,
        sup_error,
        tail_bound: 2.0 / (PI * PI * k_max as f64),
        partial_basel: partial_basel(k_max),
        basel_target: basel_target(),
    })
}

/// `Σ_{k ≤ k_max} 1/k²`, summed from the small end.
pub fn partial_basel(k_max: usize) -> f64 {
    (1..=k_max).rev().map(|k| 1.0 / (k as f64 * k as f64)).collect::<CompensatedSum>().value()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaselCheck {
    pub k_max: usize,
    /// `π² Σ_{k ≤ k_max} λₖ`.
    pub lhs: f64,
    /// `π²/6`.
    pub rhs: f64,
    /// `rhs − lhs`, which lies in `(1/(k_max + 1), 1/k_max)`.
    pub gap: f64,
}

/// The Basel sum obtained from the eigenvalues of the Green's operator.
pub fn basel_via_trace(k_max: usize) -> Result<BaselCheck> {
    if k_max < 1 {
        return Err(Error::invalid("Basel sum needs k_max >= 1"));
    }
    let basis = SpectralBasis::Dirichlet;
    let spectral_sum = (1..=k_max as i64)
        .rev()
        .map(|k| basis.lambda(k))
        .collect::<CompensatedSum>()
        .value();
    let lhs = PI * PI * spectral_sum;
    let rhs = basel_target();
    Ok(BaselCheck { k_max, lhs, rhs, gap: rhs - lhs })
}

/// Integrating the truncated diagonal expansion versus summing the
/// integrals of its terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceChain {
    /// `∫₀¹ Σ_{k ≤ K} λₖ fₖ(x)² dx`.
    pub integral_of_sum: f64,
    /// `Σ_{k ≤ K} λₖ ∫₀¹ fₖ(x)² dx`.
    pub sum_of_integrals: f64,
    pub diff: f64,
}

pub fn trace_chain_check(k_max: usize, g: &Grid) -> Result<TraceChain> {
    let basis = SpectralBasis::Dirichlet;
    let mut diagonal = vec![0.0; g.len()];
    let mut sum_of_integrals = CompensatedSum::new();
    for k in (1..=k_max as i64).rev() {
        let fk = basis.sample(k, g);
        let lambda = basis.lambda(k);
        for (d, v) in diagonal.iter_mut().zip(&fk) {
            *d += lambda * v * v;
        }
        sum_of_integrals.add(lambda * g.inner_product(&fk, &fk)?);
    }
    let integral_of_sum = g.integrate(&diagonal)?;
    let sum_of_integrals = sum_of_integrals.value();
    Ok(TraceChain {
        integral_of_sum,
        sum_of_integrals,
        diff: (integral_of_sum - sum_of_integrals).abs(),
    })
}
