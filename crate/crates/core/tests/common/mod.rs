//! State generators shared by the integration tests.

#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng;
use u2flow::grid::{Grading, RadialGrid};
use u2flow::run::class_report;
use u2flow::state::{InnerBoundary, MetricState};

/// Random tip state in the preserved class: `b = b0 + c tanh^2(xi/w)` and
/// `a = b tanh(k xi / b0)`, redrawn until the class check passes.
pub fn random_class_state<R: Rng>(rng: &mut R, n: usize) -> MetricState {
    let grid = Arc::new(RadialGrid::build(20.0, n, Grading::Uniform).unwrap());
    loop {
        let k: u32 = rng.gen_range(1..=3);
        let kf = f64::from(k);
        let b0: f64 = rng.gen_range(0.5..1.5);
        let w: f64 = rng.gen_range(0.5..2.0);
        // y <= 0 near the tip needs c <= k w^2 / (2 b0).
        let c = rng.gen_range(0.0..0.9) * kf * w * w / (2.0 * b0);
        let xs = grid.nodes();
        let b: Vec<f64> = xs.iter().map(|x| b0 + c * (x / w).tanh().powi(2)).collect();
        let a: Vec<f64> = xs.iter().zip(&b).map(|(x, b)| b * (kf * x / b0).tanh()).collect();
        let st = MetricState::new(grid.clone(), vec![1.0; n + 1], a, b, 0.0, k, InnerBoundary::Tip).unwrap();
        if class_report(&st).member {
            return st;
        }
    }
}

/// Kaehler state with `y = 0` identically: `b^2 = b0^2 + k xi^2`, `a = b b_s = k xi`.
pub fn kahler_state(k: u32, b0: f64, n: usize) -> MetricState {
    let grid = Arc::new(RadialGrid::build(10.0, n, Grading::Uniform).unwrap());
    let kf = f64::from(k);
    let b = grid.nodes().iter().map(|x| (b0 * b0 + kf * x * x).sqrt()).collect();
    let a = grid.nodes().iter().map(|x| kf * x).collect();
    MetricState::new(grid, vec![1.0; n + 1], a, b, 0.0, k, InnerBoundary::Tip).unwrap()
}
