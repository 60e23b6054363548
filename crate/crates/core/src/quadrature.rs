//! Quadrature grids on `[0, 1]` and the weighted inner product
//! `(f, g) = ∫₀¹ f g dx`.
//!
//! A [`Grid`] is the bridge between sums and integrals: every integral in
//! the crate is a weighted sum over grid nodes. Two equally spaced rules are
//! offered. The composite trapezoid rule includes the endpoints `0` and `1`
//! (where Dirichlet eigenfunctions vanish); the midpoint rule avoids them
//! and is the natural choice for periodic integrands.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    UniformTrapezoid,
    UniformMidpoint,
}

/// Nodes and positive weights of a quadrature rule on `[0, 1]`.
///
/// Weights always sum to one, so the constant function integrates exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    kind: GridKind,
}

impl Grid {
    pub fn new(kind: GridKind, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("grid needs at least 2 nodes, got {n}")));
        }
        let (nodes, weights) = match kind {
            GridKind::UniformTrapezoid => {
                let h = 1.0 / (n - 1) as f64;
                let nodes = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
                let mut weights = vec![h; n];
                weights[0] = 0.5 * h;
                weights[n - 1] = 0.5 * h;
                (nodes, weights)
            }
            GridKind::UniformMidpoint => {
                let nodes = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
                (nodes, vec![1.0 / n as f64; n])
            }
        };
        Ok(Grid { nodes, weights, kind })
    }

    pub fn trapezoid(n: usize) -> Result<Self> {
        Self::new(GridKind::UniformTrapezoid, n)
    }

    pub fn midpoint(n: usize) -> Result<Self> {
        Self::new(GridKind::UniformMidpoint, n)
    }

    /// Rebuilds a grid from its node list, recognising which of the two
    /// rules produced it.
    pub fn from_nodes(nodes: &[f64]) -> Result<Self> {
        let n = nodes.len();
        for kind in [GridKind::UniformTrapezoid, GridKind::UniformMidpoint] {
            let candidate = Grid::new(kind, n)?;
            let matches = candidate
                .nodes
                .iter()
                .zip(nodes)
                .all(|(a, b)| (a - b).abs() <= 1e-12);
            if matches {
                return Ok(candidate);
            }
        }
        Err(Error::invalid(
            "nodes do not form a uniform trapezoid or midpoint grid on [0, 1]",
        ))
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Distance between consecutive nodes.
    pub fn spacing(&self) -> f64 {
        match self.kind {
            GridKind::UniformTrapezoid => 1.0 / (self.len() - 1) as f64,
            GridKind::UniformMidpoint => 1.0 / self.len() as f64,
        }
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }

    pub(crate) fn check_len(&self, f: &[f64], what: &str) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::invalid(format!(
                "{what} has {} samples but the grid has {} nodes",
                f.len(),
                self.len()
            )));
        }
        Ok(())
    }

    /// `Σᵢ wᵢ fᵢ`, accumulated with compensation.
    pub fn integrate(&self, f: &[f64]) -> Result<f64> {
        self.check_len(f, "integrand")?;
        Ok(self
            .weights
            .iter()
            .zip(f)
            .map(|(w, v)| w * v)
            .collect::<CompensatedSum>()
            .value())
    }

    /// `Σᵢ wᵢ fᵢ gᵢ`.
    pub fn inner_product(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        self.check_len(f, "first factor")?;
        self.check_len(g, "second factor")?;
        Ok(self
            .weights
            .iter()
            .zip(f.iter().zip(g))
            .map(|(w, (a, b))| w * a * b)
            .collect::<CompensatedSum>()
            .value())
    }

    /// Writes `index,node,weight` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["index", "node", "weight"])?;
        for (i, (x, wt)) in self.nodes.iter().zip(&self.weights).enumerate() {
            w.write_record([i.to_string(), x.to_string(), wt.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a grid written by [`Grid::write_csv`]. The weights in the file
    /// must agree with the recognised rule.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for record in r.records() {
            let record = record?;
            if record.len() != 3 {
                return Err(Error::invalid("grid CSV rows must have 3 fields"));
            }
            nodes.push(parse_f64(&record[1])?);
            weights.push(parse_f64(&record[2])?);
        }
        let grid = Grid::from_nodes(&nodes)?;
        let consistent = grid
            .weights
            .iter()
            .zip(&weights)
            .all(|(a, b)| (a - b).abs() <= 1e-12);
        if !consistent {
            return Err(Error::invalid("grid CSV weights do not match its nodes"));
        }
        Ok(grid)
    }
}

pub(crate) fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::invalid(format!("cannot parse '{s}' as a number: {e}")))
}

pub fn make_grid(kind: GridKind, n: usize) -> Result<Grid> {
    Grid::new(kind, n)
}

pub fn integrate(f: &[f64], grid: &Grid) -> Result<f64> {
    grid.integrate(f)
}

pub fn inner_product(f: &[f64], g: &[f64], grid: &Grid) -> Result<f64> {
    grid.inner_product(f, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn trapezoid_three_nodes() {
        let g = make_grid(GridKind::UniformTrapezoid, 3).unwrap();
        assert_eq!(g.nodes(), &[0.0, 0.5, 1.0]);
        assert_eq!(g.weights(), &[0.25, 0.5, 0.25]);
    }

    #[test]
    fn midpoint_four_nodes() {
        let g = make_grid(GridKind::UniformMidpoint, 4).unwrap();
        assert_eq!(g.nodes(), &[0.125, 0.375, 0.625, 0.875]);
        assert!(g.weights().iter().all(|&w| w == 0.25));
    }

    #[test]
    fn single_node_is_rejected() {
        assert!(matches!(
            make_grid(GridKind::UniformTrapezoid, 1),
            Err(Error::InvalidArgument(_))
        ));
        assert!(make_grid(GridKind::UniformMidpoint, 0).is_err());
    }

    #[test]
    fn weights_sum_to_one() {
        for n in [2, 3, 10, 101, 1000, 4097] {
            for kind in [GridKind::UniformTrapezoid, GridKind::UniformMidpoint] {
                let g = make_grid(kind, n).unwrap();
                let s = g.integrate(&vec![1.0; n]).unwrap();
                assert!((s - 1.0).abs() < 1e-14, "{kind:?} n={n}: {s}");
                assert!(g.weights().iter().all(|&w| w > 0.0));
            }
        }
    }

    #[test]
    fn parabola_integrates_to_one_sixth() {
        let g = Grid::trapezoid(1001).unwrap();
        let f = g.sample(|x| x * (1.0 - x));
        assert!((integrate(&f, &g).unwrap() - 1.0 / 6.0).abs() < 1e-6);
    }

    #[test]
    fn constant_integrates_exactly() {
        for g in [Grid::trapezoid(17).unwrap(), Grid::midpoint(33).unwrap()] {
            let f = vec![1.0; g.len()];
            assert!((g.integrate(&f).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn affine_is_exact_under_trapezoid() {
        let g = Grid::trapezoid(7).unwrap();
        let f = g.sample(|x| 3.0 * x - 1.25);
        assert!((g.integrate(&f).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn normalized_sine_has_unit_mass() {
        let g = Grid::trapezoid(1001).unwrap();
        let f = g.sample(|x| 2.0 * (PI * x).sin().powi(2));
        assert!((g.integrate(&f).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sine_modes_are_orthonormal() {
        let g = Grid::trapezoid(2001).unwrap();
        let f1 = g.sample(|x| 2f64.sqrt() * (PI * x).sin());
        let f2 = g.sample(|x| 2f64.sqrt() * (2.0 * PI * x).sin());
        let f3 = g.sample(|x| 2f64.sqrt() * (3.0 * PI * x).sin());
        assert!(inner_product(&f1, &f2, &g).unwrap().abs() < 1e-8);
        assert!((inner_product(&f3, &f3, &g).unwrap() - 1.0).abs() < 1e-6);
        let zero = vec![0.0; g.len()];
        assert_eq!(inner_product(&zero, &zero, &g).unwrap(), 0.0);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let g = Grid::trapezoid(5).unwrap();
        assert!(g.integrate(&[1.0; 4]).is_err());
        assert!(g.inner_product(&[1.0; 5], &[1.0; 6]).is_err());
    }

    #[test]
    fn trapezoid_error_is_second_order() {
        let exact = 1.0 / 6.0;
        let mut n = 11;
        while n < 3000 {
            let err = |n: usize| {
                let g = Grid::trapezoid(n).unwrap();
                (g.integrate(&g.sample(|x| x * (1.0 - x))).unwrap() - exact).abs()
            };
            let ratio = err(n) / err(2 * n - 1);
            assert!((3.8..=4.2).contains(&ratio), "n={n} ratio={ratio}");
            n = 2 * n - 1;
        }
    }

    #[test]
    fn csv_round_trip() {
        for g in [Grid::trapezoid(9).unwrap(), Grid::midpoint(6).unwrap()] {
            let mut buf = Vec::new();
            g.write_csv(&mut buf).unwrap();
            let text = String::from_utf8(buf.clone()).unwrap();
            assert!(text.starts_with("index,node,weight\n"));
            assert_eq!(Grid::read_csv(buf.as_slice()).unwrap(), g);
        }
    }

    #[test]
    fn from_nodes_rejects_irregular_nodes() {
        assert!(Grid::from_nodes(&[0.0, 0.3, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn integrate_is_linear(
            a in -10.0f64..10.0,
            b in -10.0f64..10.0,
            f in proptest::collection::vec(-1.0f64..1.0, 33),
            g in proptest::collection::vec(-1.0f64..1.0, 33),
        ) {
            let grid = Grid::trapezoid(33).unwrap();
            let combo: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
            let lhs = grid.integrate(&combo).unwrap();
            let rhs = a * grid.integrate(&f).unwrap() + b * grid.integrate(&g).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-13);
        }

        #[test]
        fn inner_product_is_positive_definite(
            f in proptest::collection::vec(-1.0f64..1.0, 20),
        ) {
            let grid = Grid::midpoint(20).unwrap();
            let q = grid.inner_product(&f, &f).unwrap();
            prop_assert!(q >= 0.0);
            if f.iter().any(|&v| v != 0.0) {
                prop_assert!(q > 0.0);
            }
        }
    }
}
