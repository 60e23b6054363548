//! The two-point problem `−u″ = f`, `u(0) = u(1) = 0`.
//!
//! Two solvers are offered and should agree: [`solve_direct`] integrates
//! against the Green's function in its split form, and [`solve_spectral`]
//! expands `f` in the Dirichlet sine basis and divides each coefficient by
//! the corresponding eigenvalue of `−d²/dx²`.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::quadrature::{Grid, GridKind};

/// Analytic eigenpairs of `−d²/dx²` on `[0, 1]`.
///
/// `Dirichlet` is indexed by `k ≥ 1`: `μₖ = π²k²`, `fₖ(x) = √2 sin kπx`,
/// and `λₖ = 1/μₖ` are the eigenvalues of the Green's operator.
///
/// `Periodic` is indexed by all integers: `k = 0` is the constant mode,
/// `k > 0` is `√2 cos 2πkx` and `k < 0` is `√2 sin 2π|k|x`, all with
/// `μₖ = 4π²k²`. Each nonzero frequency therefore appears twice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralBasis {
    Dirichlet,
    Periodic,
}

impl SpectralBasis {
    /// Eigenvalue `μₖ` of `−d²/dx²`.
    pub fn mu(self, k: i64) -> f64 {
        let k = k as f64;
        match self {
            SpectralBasis::Dirichlet => PI * PI * k * k,
            SpectralBasis::Periodic => 4.0 * PI * PI * k * k,
        }
    }

    /// `1/μₖ`, the matching eigenvalue of the inverse operator. Infinite for
    /// the periodic constant mode.
    pub fn lambda(self, k: i64) -> f64 {
        1.0 / self.mu(k)
    }

    pub fn mode(self, k: i64, x: f64) -> f64 {
        let r2 = std::f64::consts::SQRT_2;
        match self {
            SpectralBasis::Dirichlet => r2 * (k as f64 * PI * x).sin(),
            SpectralBasis::Periodic if k == 0 => 1.0,
            SpectralBasis::Periodic if k > 0 => r2 * (2.0 * PI * k as f64 * x).cos(),
            SpectralBasis::Periodic => r2 * (2.0 * PI * (-k) as f64 * x).sin(),
        }
    }

    pub fn sample(self, k: i64, g: &Grid) -> Vec<f64> {
        g.sample(|x| self.mode(k, x))
    }
}

/// Solves `−u″ = f` through
/// `u(x) = (1 − x) ∫₀ˣ y f(y) dy + x ∫ₓ¹ (1 − y) f(y) dy`.
///
/// Both integrals are cumulative trapezoid sums over the nodes, extended to
/// `0` and `1` where the respective integrands vanish. Cost is linear in
/// the number of nodes and the boundary values come out exactly zero when
/// the grid contains the endpoints.
pub fn solve_direct(f: &[f64], g: &Grid) -> Result<Vec<f64>> {
    g.check_len(f, "right-hand side")?;
    let x = g.nodes();
    let n = x.len();

    let mut left = vec![0.0; n];
    let (mut acc, mut prev_x, mut prev_v) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let v = x[i] * f[i];
        acc += 0.5 * (x[i] - prev_x) * (prev_v + v);
        left[i] = acc;
        (prev_x, prev_v) = (x[i], v);
    }

    let mut right = vec![0.0; n];
    let (mut acc, mut prev_x, mut prev_v) = (0.0, 1.0, 0.0);
    for i in (0..n).rev() {
        let v = (1.0 - x[i]) * f[i];
        acc += 0.5 * (prev_x - x[i]) * (prev_v + v);
        right[i] = acc;
        (prev_x, prev_v) = (x[i], v);
    }

    Ok((0..n).map(|i| (1.0 - x[i]) * left[i] + x[i] * right[i]).collect())
}

/// Truncated eigenfunction expansion `u = Σ_{k ≤ k_max} λₖ (f, fₖ) fₖ`.
pub fn solve_spectral(f: &[f64], g: &Grid, k_max: usize) -> Result<Vec<f64>> {
    g.check_len(f, "right-hand side")?;
    if k_max < 1 {
        return Err(Error::invalid("spectral solve needs k_max >= 1"));
    }
    let basis = SpectralBasis::Dirichlet;
    let mut u = vec![0.0; g.len()];
    for k in 1..=k_max as i64 {
        let fk = basis.sample(k, g);
        let c = basis.lambda(k) * g.inner_product(f, &fk)?;
        for (ui, v) in u.iter_mut().zip(&fk) {
            *ui += c * v;
        }
    }
    Ok(u)
}

/// Finite-difference defect of a candidate solution:
/// `max |−(uᵢ₋₁ − 2uᵢ + uᵢ₊₁)/h² − fᵢ|` over interior nodes plus
/// `|u(0)| + |u(1)|`.
pub fn residual_check(u: &[f64], f: &[f64], g: &Grid) -> Result<f64> {
    if g.kind() != GridKind::UniformTrapezoid {
        return Err(Error::invalid(
            "residual check needs a uniform grid whose nodes include 0 and 1",
        ));
    }
    if g.len() < 5 {
        return Err(Error::invalid("residual check needs at least 5 nodes"));
    }
    g.check_len(u, "solution")?;
    g.check_len(f, "right-hand side")?;
    let n = g.len();
    let h = g.spacing();
    let interior = (1..n - 1)
        .map(|i| (-(u[i - 1] - 2.0 * u[i] + u[i + 1]) / (h * h) - f[i]).abs())
        .fold(0.0, f64::max);
    Ok(interior + u[0].abs() + u[n - 1].abs())
}

/// Seeded random smooth function `Σⱼ (aⱼ sin jπx + bⱼ cos jπx) / j²` with
/// coefficients uniform in `[−1, 1]`, sampled on `g`.
pub fn random_smooth_samples(g: &Grid, seed: u64, modes: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<(f64, f64)> = (0..modes)
        .map(|_| (rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)))
        .collect();
    g.sample(|x| {
        coeffs
            .iter()
            .enumerate()
            .map(|(j, (a, b))| {
                let j = (j + 1) as f64;
                (a * (j * PI * x).sin() + b * (j * PI * x).cos()) / (j * j)
            })
            .sum()
    })
}

/// Writes `node,u,f`.
pub fn write_solution_csv<W: Write>(writer: W, g: &Grid, u: &[f64], f: &[f64]) -> Result<()> {
    g.check_len(u, "solution")?;
    g.check_len(f, "right-hand side")?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["node", "u", "f"])?;
    for ((x, ui), fi) in g.nodes().iter().zip(u).zip(f) {
        w.write_record([x.to_string(), ui.to_string(), fi.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
