//! Radial grids on `[0, xi_max]` and five-point finite-difference stencils.
//!
//! Interior nodes use centered five-point Lagrange stencils on the actual
//! (possibly graded) node positions. Near an end the stencil either reaches
//! into two ghost nodes placed at mirrored positions, or falls back to a
//! one-sided stencil built from the five nodes closest to that end.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest admissible number of intervals.
pub const MIN_INTERVALS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Grading {
    Uniform,
    /// Interval `j` has length `h0 * ratio^j`; a ratio above one refines toward the tip.
    Geometric { ratio: f64 },
    /// Nodes placed by a solution-adapted density; only constructible from nodes.
    Adapted,
}

impl Grading {
    /// Grading to use after doubling the number of intervals, so that the node
    /// map stays the same smooth function of the index coordinate.
    pub fn refined(self) -> Grading {
        match self {
            Grading::Uniform => Grading::Uniform,
            Grading::Geometric { ratio } => Grading::Geometric { ratio: ratio.sqrt() },
            Grading::Adapted => Grading::Adapted,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least {MIN_INTERVALS} intervals, got {0}")]
    TooFewIntervals(usize),
    #[error("outer radius must be positive and finite, got {0}")]
    BadExtent(f64),
    #[error("grading ratio {0} outside [1/2, 2]")]
    BadRatio(f64),
    #[error("nodes must start at 0 and increase strictly (failed at node {0})")]
    NotIncreasing(usize),
    #[error("spacing ratio {ratio} between intervals {index} and {} outside [1/2, 2]", index + 1)]
    RoughSpacing { index: usize, ratio: f64 },
    #[error("adapted grids are defined by their nodes and cannot be rebuilt")]
    Adapted,
}

/// Treatment of the inner end (node 0) when differentiating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerEnd {
    /// Field extends to an odd function across 0.
    Odd,
    /// Field extends to an even function across 0.
    Even,
    /// Mirror ghosts carrying a prescribed slope: `f(-d) = f(d) - 2 d g`.
    Slope(f64),
    OneSided,
}

/// Treatment of the outer end (node n).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OuterEnd {
    /// Mirror ghosts carrying a prescribed slope: `f(xn + d) = f(xn - d) + 2 d g`.
    Slope(f64),
    OneSided,
}

type Row = [f64; 5];

#[derive(Debug, Clone, PartialEq)]
struct Weights {
    d1: Vec<Row>,
    d2: Vec<Row>,
    inner_one_sided: [(Row, Row); 2],
    outer_one_sided: [(Row, Row); 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    grading: Grading,
    weights: Weights,
}

impl RadialGrid {
    /// Grid of `n` intervals on `[0, xi_max]`.
    pub fn build(xi_max: f64, n: usize, grading: Grading) -> Result<Self, GridError> {
        if n < MIN_INTERVALS {
            return Err(GridError::TooFewIntervals(n));
        }
        if !(xi_max.is_finite() && xi_max > 0.0) {
            return Err(GridError::BadExtent(xi_max));
        }
        let nodes = match grading {
            Grading::Adapted => return Err(GridError::Adapted),
            Grading::Uniform => (0..=n).map(|j| xi_max * j as f64 / n as f64).collect(),
            Grading::Geometric { ratio } => {
                if !(0.5..=2.0).contains(&ratio) {
                    return Err(GridError::BadRatio(ratio));
                }
                if ratio == 1.0 {
                    (0..=n).map(|j| xi_max * j as f64 / n as f64).collect()
                } else {
                    let total = (ratio.powi(n as i32) - 1.0) / (ratio - 1.0);
                    let mut nodes: Vec<f64> = (0..=n)
                        .map(|j| xi_max * (ratio.powi(j as i32) - 1.0) / (ratio - 1.0) / total)
                        .collect();
                    nodes[n] = xi_max;
                    nodes
                }
            }
        };
        Self::from_nodes(nodes, grading)
    }

    /// Grid from explicit nodes; the grading descriptor is kept for refinement.
    pub fn from_nodes(nodes: Vec<f64>, grading: Grading) -> Result<Self, GridError> {
        let n = nodes.len().saturating_sub(1);
        if n < MIN_INTERVALS {
            return Err(GridError::TooFewIntervals(n));
        }
        if nodes[0] != 0.0 {
            return Err(GridError::NotIncreasing(0));
        }
        for j in 1..=n {
            if !(nodes[j] > nodes[j - 1]) || !nodes[j].is_finite() {
                return Err(GridError::NotIncreasing(j));
            }
        }
        for j in 1..n {
            let ratio = (nodes[j + 1] - nodes[j]) / (nodes[j] - nodes[j - 1]);
            if !(0.5 - 1e-12..=2.0 + 1e-12).contains(&ratio) {
                return Err(GridError::RoughSpacing { index: j - 1, ratio });
            }
        }
        let weights = Weights::new(&nodes);
        Ok(RadialGrid { nodes, grading, weights })
    }

    /// Same extent with twice as many intervals and the matching grading.
    pub fn refined(&self) -> Result<Self, GridError> {
        Self::build(self.xi_max(), 2 * self.intervals(), self.grading.refined())
    }

    /// Same node pattern stretched by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Result<Self, GridError> {
        Self::from_nodes(self.nodes.iter().map(|x| x * lambda).collect(), self.grading)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn xi_max(&self) -> f64 {
        *self.nodes.last().expect("grid has nodes")
    }

    pub fn grading(&self) -> Grading {
        self.grading
    }

    /// Length of interval `j`, i.e. `xi[j+1] - xi[j]`.
    pub fn spacing(&self, j: usize) -> f64 {
        self.nodes[j + 1] - self.nodes[j]
    }

    pub fn min_spacing(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    /// First and second `xi`-derivatives of `f`.
    pub fn diff(&self, f: &[f64], inner: InnerEnd, outer: OuterEnd) -> (Vec<f64>, Vec<f64>) {
        let mut d1 = vec![0.0; f.len()];
        let mut d2 = vec![0.0; f.len()];
        self.diff_into(f, inner, outer, &mut d1, &mut d2);
        (d1, d2)
    }

    /// First `xi`-derivative only.
    pub fn d1(&self, f: &[f64], inner: InnerEnd, outer: OuterEnd) -> Vec<f64> {
        self.diff(f, inner, outer).0
    }

    pub fn diff_into(
        &self,
        f: &[f64],
        inner: InnerEnd,
        outer: OuterEnd,
        d1: &mut [f64],
        d2: &mut [f64],
    ) {
        let n = self.intervals();
        assert_eq!(f.len(), n + 1, "field length does not match grid");
        let x = &self.nodes;
        let w = &self.weights;
        // Values at positions -x2, -x1, x0..xn, 2xn - x(n-1), 2xn - x(n-2).
        let ghost_lo = |i: usize| -> f64 {
            match inner {
                InnerEnd::Odd => -f[i],
                InnerEnd::Even => f[i],
                InnerEnd::Slope(g) => f[i] - 2.0 * x[i] * g,
                InnerEnd::OneSided => 0.0,
            }
        };
        let ghost_hi = |i: usize| -> f64 {
            match outer {
                OuterEnd::Slope(g) => f[n - i] + 2.0 * (x[n] - x[n - i]) * g,
                OuterEnd::OneSided => 0.0,
            }
        };
        let value = |e: usize| -> f64 {
            match e {
                0 => ghost_lo(2),
                1 => ghost_lo(1),
                e if e <= n + 2 => f[e - 2],
                e if e == n + 3 => ghost_hi(1),
                _ => ghost_hi(2),
            }
        };
        for j in 0..=n {
            let near_lo = j < 2 && inner == InnerEnd::OneSided;
            let near_hi = j + 2 > n && outer == OuterEnd::OneSided;
            if near_lo {
                let (r1, r2) = &w.inner_one_sided[j];
                d1[j] = dot(r1, &f[0..5]);
                d2[j] = dot(r2, &f[0..5]);
            } else if near_hi {
                let (r1, r2) = &w.outer_one_sided[j + 1 - n];
                d1[j] = dot(r1, &f[n - 4..=n]);
                d2[j] = dot(r2, &f[n - 4..=n]);
            } else if j >= 2 && j + 2 <= n {
                d1[j] = dot(&w.d1[j], &f[j - 2..=j + 2]);
                d2[j] = dot(&w.d2[j], &f[j - 2..=j + 2]);
            } else {
                let vals = [value(j), value(j + 1), value(j + 2), value(j + 3), value(j + 4)];
                d1[j] = dot(&w.d1[j], &vals);
                d2[j] = dot(&w.d2[j], &vals);
            }
        }
    }

    /// Odd-extension slope at the tip, `f'(0)` for an odd field.
    pub fn tip_slope_odd(&self, f: &[f64]) -> f64 {
        let w = &self.weights.d1[0];
        w[0] * -f[2] + w[1] * -f[1] + w[2] * f[0] + w[3] * f[1] + w[4] * f[2]
    }
}

fn dot(w: &Row, v: &[f64]) -> f64 {
    w[0] * v[0] + w[1] * v[1] + w[2] * v[2] + w[3] * v[3] + w[4] * v[4]
}

impl Weights {
    fn new(x: &[f64]) -> Self {
        let n = x.len() - 1;
        let mut ext = Vec::with_capacity(n + 5);
        ext.push(-x[2]);
        ext.push(-x[1]);
        ext.extend_from_slice(x);
        ext.push(2.0 * x[n] - x[n - 1]);
        ext.push(2.0 * x[n] - x[n - 2]);
        let (mut d1, mut d2) = (Vec::with_capacity(n + 1), Vec::with_capacity(n + 1));
        for j in 0..=n {
            let pts = [ext[j], ext[j + 1], ext[j + 2], ext[j + 3], ext[j + 4]];
            let (r1, r2) = fornberg(x[j], &pts);
            d1.push(r1);
            d2.push(r2);
        }
        let lo = [x[0], x[1], x[2], x[3], x[4]];
        let hi = [x[n - 4], x[n - 3], x[n - 2], x[n - 1], x[n]];
        Weights {
            d1,
            d2,
            inner_one_sided: [fornberg(x[0], &lo), fornberg(x[1], &lo)],
            outer_one_sided: [fornberg(x[n - 1], &hi), fornberg(x[n], &hi)],
        }
    }
}

/// Weights of the first and second derivative at `z` of the quartic
/// interpolating the five points `pts` (Fornberg's recursion).
pub fn fornberg(z: f64, pts: &[f64; 5]) -> (Row, Row) {
    const M: usize = 2;
    let np = pts.len();
    let mut c = [[[0.0f64; 5]; 5]; M + 1];
    c[0][0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = pts[0] - z;
    for i in 1..np {
        let mn = i.min(M);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = pts[i] - z;
        for j in 0..i {
            let c3 = pts[i] - pts[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i][i] = c1 * (k as f64 * c[k - 1][i - 1][i - 1] - c5 * c[k][i - 1][i - 1]) / c2;
                }
                c[0][i][i] = -c1 * c5 * c[0][i - 1][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][i][j] = (c4 * c[k][i - 1][j] - k as f64 * c[k - 1][i - 1][j]) / c3;
            }
            c[0][i][j] = c4 * c[0][i - 1][j] / c3;
        }
        c1 = c2;
    }
    let mut r1 = [0.0; 5];
    let mut r2 = [0.0; 5];
    r1[..np].copy_from_slice(&c[1][np - 1][..np]);
    r2[..np].copy_from_slice(&c[2][np - 1][..np]);
    (r1, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_nodes() {
        let g = RadialGrid::build(10.0, 100, Grading::Uniform).unwrap();
        assert_eq!(g.len(), 101);
        for (j, x) in g.nodes().iter().enumerate() {
            assert!((x - 0.1 * j as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn geometric_spacing_grows_by_ratio() {
        let g = RadialGrid::build(10.0, 100, Grading::Geometric { ratio: 1.05 }).unwrap();
        for j in 0..99 {
            assert!((g.spacing(j + 1) / g.spacing(j) - 1.05).abs() < 1e-9);
        }
        assert_eq!(g.xi_max(), 10.0);
    }

    #[test]
    fn rejects_small_and_rough_grids() {
        assert_eq!(
            RadialGrid::build(10.0, 8, Grading::Uniform),
            Err(GridError::TooFewIntervals(8))
        );
        assert!(matches!(
            RadialGrid::build(10.0, 100, Grading::Geometric { ratio: 2.5 }),
            Err(GridError::BadRatio(_))
        ));
        let mut nodes: Vec<f64> = (0..=20).map(f64::from).collect();
        nodes[10] = 9.05;
        assert!(matches!(
            RadialGrid::from_nodes(nodes, Grading::Uniform),
            Err(GridError::RoughSpacing { .. })
        ));
    }

    #[test]
    fn stencils_exact_on_quartics() {
        let g = RadialGrid::build(3.0, 40, Grading::Geometric { ratio: 1.04 }).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|x| 1.0 + x - 2.0 * x * x + 0.5 * x.powi(4)).collect();
        let exact1 = |x: f64| 1.0 - 4.0 * x + 2.0 * x.powi(3);
        let exact2 = |x: f64| -4.0 + 6.0 * x * x;
        let (d1, d2) = g.diff(&f, InnerEnd::OneSided, OuterEnd::OneSided);
        for (j, &x) in g.nodes().iter().enumerate() {
            assert!((d1[j] - exact1(x)).abs() < 1e-8, "d1 at {j}");
            assert!((d2[j] - exact2(x)).abs() < 1e-6, "d2 at {j}");
        }
    }

    #[test]
    fn parity_ghosts() {
        let g = RadialGrid::build(2.0, 32, Grading::Geometric { ratio: 1.03 }).unwrap();
        let odd: Vec<f64> = g.nodes().iter().map(|x| 2.0 * x - x.powi(3)).collect();
        let even: Vec<f64> = g.nodes().iter().map(|x| 1.0 + x * x).collect();
        let (o1, o2) = g.diff(&odd, InnerEnd::Odd, OuterEnd::OneSided);
        let (e1, e2) = g.diff(&even, InnerEnd::Even, OuterEnd::OneSided);
        assert!((o1[0] - 2.0).abs() < 1e-10 && o2[0].abs() < 1e-10);
        assert!(e1[0].abs() < 1e-12 && (e2[0] - 2.0).abs() < 1e-9);
        assert!((g.tip_slope_odd(&odd) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn slope_ghosts_reproduce_linear_fields() {
        let g = RadialGrid::build(5.0, 20, Grading::Uniform).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|x| 3.0 + 0.5 * x).collect();
        let (d1, d2) = g.diff(&f, InnerEnd::Slope(0.5), OuterEnd::Slope(0.5));
        assert!(d1.iter().all(|v| (v - 0.5).abs() < 1e-12));
        assert!(d2.iter().all(|v| v.abs() < 1e-10));
    }
}
