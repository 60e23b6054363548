//! Nyström discretization of integral operators.
//!
//! The operator `f ↦ ∫₀¹ k(·, y) f(y) dy` is replaced by its quadrature sum
//! on a [`Grid`] and conjugated by `W^{1/2}`, yielding the symmetric matrix
//! `Bᵢⱼ = √wᵢ k(xᵢ, xⱼ) √wⱼ`. Eigenvalues of `B` approximate those of the
//! operator; eigenfunction samples are recovered as `vᵢ / √wᵢ`.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{diagonal_trace, KernelSpec};
use crate::linalg::{eigen_decompose, SymMatrix, DEFAULT_TOL};
use crate::quadrature::Grid;

/// Leading eigenpairs of a discretized operator, ordered by decreasing
/// magnitude. Eigenfunctions have unit norm under the grid's inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpectrum {
    eigenvalues: Vec<f64>,
    eigenfunctions: Vec<Vec<f64>>,
    grid: Grid,
    /// Smallest eigenvalue of the full discretization.
    min_eigenvalue: f64,
}

impl OperatorSpectrum {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenfunctions(&self) -> &[Vec<f64>] {
        &self.eigenfunctions
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Smallest eigenvalue over the whole discretization, kept or not.
    /// A clearly negative value means the kernel is not positive.
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    /// Writes `k,lambda[,analytic_lambda]`.
    pub fn write_values_csv<W: Write>(&self, writer: W, analytic: Option<&dyn Fn(usize) -> f64>) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        match analytic {
            Some(_) => w.write_record(["k", "lambda", "analytic_lambda"])?,
            None => w.write_record(["k", "lambda"])?,
        }
        for (i, lambda) in self.eigenvalues.iter().enumerate() {
            let k = i + 1;
            let mut row = vec![k.to_string(), lambda.to_string()];
            if let Some(f) = analytic {
                row.push(f(k).to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `node,f1,f2,…` with one row per grid node.
    pub fn write_eigenfunctions_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let header: Vec<String> = std::iter::once("node".to_string())
            .chain((1..=self.eigenfunctions.len()).map(|k| format!("f{k}")))
            .collect();
        w.write_record(&header)?;
        for (i, x) in self.grid.nodes().iter().enumerate() {
            let row: Vec<String> = std::iter::once(x.to_string())
                .chain(self.eigenfunctions.iter().map(|f| f[i].to_string()))
                .collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The symmetrized Nyström matrix `√wᵢ k(xᵢ, xⱼ) √wⱼ`.
pub fn discretize(k: &KernelSpec, g: &Grid) -> Result<SymMatrix> {
    k.validate()?;
    let nodes = g.nodes();
    let root: Vec<f64> = g.weights().iter().map(|w| w.sqrt()).collect();
    let n = g.len();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = k.value(nodes[i], nodes[j]);
            if !v.is_finite() {
                return Err(Error::invalid(format!(
                    "kernel is not finite at nodes ({i}, {j}) = ({}, {})",
                    nodes[i], nodes[j]
                )));
            }
            let b = (root[i] * root[j]) * v;
            entries[i * n + j] = b;
            entries[j * n + i] = b;
        }
    }
    SymMatrix::new(n, entries)
}

/// Leading `count` eigenpairs of the operator discretized on `g`.
pub fn operator_spectrum(k: &KernelSpec, g: &Grid, count: usize) -> Result<OperatorSpectrum> {
    if count > g.len() {
        return Err(Error::invalid(format!(
            "asked for {count} eigenpairs of a {}-node discretization",
            g.len()
        )));
    }
    let b = discretize(k, g)?;
    let d = eigen_decompose(&b, DEFAULT_TOL)?;
    let min_eigenvalue = d.values().last().copied().unwrap_or(0.0);
    let mut order: Vec<usize> = (0..d.n()).collect();
    order.sort_by(|&i, &j| d.values()[j].abs().total_cmp(&d.values()[i].abs()));
    order.truncate(count);
    let root: Vec<f64> = g.weights().iter().map(|w| w.sqrt()).collect();
    let mut eigenvalues = Vec::with_capacity(count);
    let mut eigenfunctions = Vec::with_capacity(count);
    for &idx in &order {
        let mut f: Vec<f64> = d.vectors()[idx].iter().zip(&root).map(|(v, r)| v / r).collect();
        let mut big = 0.0f64;
        for &x in &f {
            if x.abs() > big.abs() {
                big = x;
            }
        }
        if big < 0.0 {
            f.iter_mut().for_each(|x| *x = -*x);
        }
        eigenvalues.push(d.values()[idx]);
        eigenfunctions.push(f);
    }
    Ok(OperatorSpectrum { eigenvalues, eigenfunctions, grid: g.clone(), min_eigenvalue })
}

/// Both sides of `Σ λₖ = ∫₀¹ k(x, x) dx` for a discretized kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceFormulaCheck {
    pub eig_sum: f64,
    pub diag_integral: f64,
    pub residual: f64,
}

/// Sums every eigenvalue of the Nyström matrix and compares with the
/// quadrature of the kernel's diagonal.
pub fn trace_formula_check(k: &KernelSpec, g: &Grid) -> Result<TraceFormulaCheck> {
    let b = discretize(k, g)?;
    let d = eigen_decompose(&b, DEFAULT_TOL)?;
    let eig_sum = d.value_sum();
    let diag_integral = diagonal_trace(k, g)?;
    Ok(TraceFormulaCheck { eig_sum, diag_integral, residual: (eig_sum - diag_integral).abs() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::TabulatedKernel;
    use crate::linalg::jacobi_eigen;
    use std::f64::consts::PI;

    /// Trapezoid Nyström of the Green kernel is the inverse of the
    /// three-point Laplacian on the interior nodes, so its eigenvalues are
    /// known in closed form.
    fn discrete_green_eigenvalue(k: usize, n: usize) -> f64 {
        let h = 1.0 / (n - 1) as f64;
        let s = (k as f64 * PI * h / 2.0).sin();
        h * h / (4.0 * s * s)
    }

    fn constant(g: &Grid, c: f64) -> KernelSpec {
        let n = g.len();
        KernelSpec::Tabulated(TabulatedKernel::new(g.clone(), vec![c; n * n]).unwrap())
    }

    #[test]
    fn constant_kernel_is_rank_one() {
        let g = Grid::midpoint(12).unwrap();
        let b = discretize(&constant(&g, 2.5), &g).unwrap();
        let d = jacobi_eigen(&b, DEFAULT_TOL).unwrap();
        assert!((d.values()[0] - 2.5).abs() < 1e-13);
        assert!(d.values()[1..].iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn zero_kernel_gives_zero_matrix() {
        let g = Grid::trapezoid(7).unwrap();
        let b = discretize(&constant(&g, 0.0), &g).unwrap();
        assert!(b.entries().iter().all(|&v| v == 0.0));
        let t = trace_formula_check(&constant(&g, 0.0), &g).unwrap();
        assert_eq!((t.eig_sum, t.diag_integral, t.residual), (0.0, 0.0, 0.0));
    }

    #[test]
    fn matrix_is_exactly_symmetric() {
        let g = Grid::trapezoid(31).unwrap();
        let b = discretize(&KernelSpec::heat_circle(0.05).unwrap(), &g).unwrap();
        for i in 0..31 {
            for j in 0..31 {
                assert_eq!(b.get(i, j), b.get(j, i));
            }
        }
        assert_eq!(b.asymmetry(), 0.0);
    }

    #[test]
    fn leading_green_eigenvalue() {
        let g = Grid::trapezoid(201).unwrap();
        let s = operator_spectrum(&KernelSpec::GreenDirichlet, &g, 1).unwrap();
        assert!((s.eigenvalues()[0] - 1.0 / (PI * PI)).abs() < 1e-4);
        assert!((s.eigenvalues()[0] - 0.1013211836).abs() < 1e-4);
    }

    #[test]
    fn green_spectrum_matches_discrete_closed_form() {
        let n = 161;
        let g = Grid::trapezoid(n).unwrap();
        let s = operator_spectrum(&KernelSpec::GreenDirichlet, &g, 20).unwrap();
        for (i, lambda) in s.eigenvalues().iter().enumerate() {
            let exact = discrete_green_eigenvalue(i + 1, n);
            assert!((lambda - exact).abs() < 1e-14, "k={}: {lambda} vs {exact}", i + 1);
        }
        assert!(s.min_eigenvalue() >= -1e-12);
    }

    #[test]
    fn first_five_green_eigenvalues() {
        let g = Grid::trapezoid(401).unwrap();
        let s = operator_spectrum(&KernelSpec::GreenDirichlet, &g, 5).unwrap();
        for (i, lambda) in s.eigenvalues().iter().enumerate() {
            let k = (i + 1) as f64;
            let exact = 1.0 / (PI * PI * k * k);
            assert!(((lambda - exact) / exact).abs() < 1e-3);
        }
        let f1 = &s.eigenfunctions()[0];
        let err = g
            .nodes()
            .iter()
            .zip(f1)
            .map(|(x, f)| (f - 2f64.sqrt() * (PI * x).sin()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-2, "{err}");
    }

    #[test]
    fn eigenfunctions_are_orthonormal_and_solve_the_eigenproblem() {
        let g = Grid::trapezoid(201).unwrap();
        let k = KernelSpec::GreenDirichlet;
        let s = operator_spectrum(&k, &g, 10).unwrap();
        for (i, fi) in s.eigenfunctions().iter().enumerate() {
            for (j, fj) in s.eigenfunctions().iter().enumerate() {
                let ip = g.inner_product(fi, fj).unwrap();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((ip - e).abs() < 1e-8);
            }
            let kf = crate::kernels::apply_kernel(&k, fi, &g).unwrap();
            let lambda = s.eigenvalues()[i];
            let r = kf.iter().zip(fi).map(|(a, b)| (a - lambda * b).abs()).fold(0.0, f64::max);
            assert!(r < 1e-6 * (1.0 + lambda.abs()));
        }
    }

    #[test]
    fn constant_kernel_spectrum() {
        let g = Grid::trapezoid(9).unwrap();
        let s = operator_spectrum(&constant(&g, 1.0), &g, 2).unwrap();
        assert!((s.eigenvalues()[0] - 1.0).abs() < 1e-14);
        assert!(s.eigenvalues()[1].abs() < 1e-14);
        assert!(s.eigenfunctions()[0].iter().all(|f| (f - 1.0).abs() < 1e-12));
    }

    #[test]
    fn count_is_bounded_by_grid() {
        let g = Grid::trapezoid(5).unwrap();
        assert!(operator_spectrum(&KernelSpec::GreenDirichlet, &g, 6).is_err());
    }

    #[test]
    fn green_trace_formula() {
        let g = Grid::trapezoid(201).unwrap();
        let t = trace_formula_check(&KernelSpec::GreenDirichlet, &g).unwrap();
        assert!(t.residual < 1e-10);
        let h = 1.0 / 200.0;
        // Trapezoid error for x(1 − x) is exactly h²/6.
        assert!((t.diag_integral - (1.0 / 6.0 - h * h / 6.0)).abs() < 1e-14);
    }

    #[test]
    fn heat_circle_trace_formula() {
        let g = Grid::trapezoid(201).unwrap();
        let t = trace_formula_check(&KernelSpec::heat_circle(0.5).unwrap(), &g).unwrap();
        let theta: f64 = 1.0 + 2.0 * (1..10).map(|k| (-2.0 * PI * PI * (k * k) as f64).exp()).sum::<f64>();
        assert!((t.eig_sum - theta).abs() < 1e-6);
        assert!((t.diag_integral - theta).abs() < 1e-6);
        assert!(t.residual < 1e-10);
    }

    #[test]
    fn eigenvalue_errors_shrink_quadratically() {
        let errs: Vec<Vec<f64>> = [201, 401, 801]
            .iter()
            .map(|&n| {
                let g = Grid::trapezoid(n).unwrap();
                let s = operator_spectrum(&KernelSpec::GreenDirichlet, &g, 10).unwrap();
                s.eigenvalues()
                    .iter()
                    .enumerate()
                    .map(|(i, l)| (l - 1.0 / (PI * PI * ((i + 1) * (i + 1)) as f64)).abs())
                    .collect()
            })
            .collect();
        for w in errs.windows(2) {
            for (coarse, fine) in w[0].iter().zip(&w[1]) {
                assert!(fine / coarse <= 0.35, "{fine} / {coarse}");
            }
        }
    }

    #[test]
    fn values_csv_layout() {
        let g = Grid::trapezoid(11).unwrap();
        let s = operator_spectrum(&KernelSpec::GreenDirichlet, &g, 3).unwrap();
        let mut buf = Vec::new();
        let analytic = |k: usize| 1.0 / (PI * PI * (k * k) as f64);
        s.write_values_csv(&mut buf, Some(&analytic)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,lambda,analytic_lambda\n1,"));
        assert_eq!(text.lines().count(), 4);
        let mut buf = Vec::new();
        s.write_eigenfunctions_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("node,f1,f2,f3\n"));
        assert_eq!(text.lines().count(), 12);
    }
}
