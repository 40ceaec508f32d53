//! Gaussian kernel density estimates of 2D marginals on a grid.

use polyflow_core::Matrix;

/// One grid cell of a marginal density estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub x: f64,
    pub y: f64,
    pub density: f64,
}

/// Scott's rule for a 2D product kernel: `sigma_d * n^(-1/6)`.
pub fn scott_bandwidth(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    var.sqrt().max(1e-12) * n.powf(-1.0 / 6.0)
}

/// Density of the `(dx, dy)` marginal of `samples` (rows) on an
/// `n x n` grid spanning `[lo, hi]` in each axis.
pub fn marginal_grid(samples: &Matrix, dx: usize, dy: usize, lo: [f64; 2], hi: [f64; 2], n: usize) -> Vec<GridPoint> {
    let xs: Vec<f64> = samples.column(dx).iter().copied().collect();
    let ys: Vec<f64> = samples.column(dy).iter().copied().collect();
    let (bx, by) = (scott_bandwidth(&xs), scott_bandwidth(&ys));
    let norm = 1.0 / (2.0 * std::f64::consts::PI * bx * by * xs.len() as f64);
    let step = |a: usize, d: usize| if n > 1 { lo[d] + (hi[d] - lo[d]) * a as f64 / (n - 1) as f64 } else { 0.5 * (lo[d] + hi[d]) };
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let gx = step(i, 0);
        let kx: Vec<f64> = xs.iter().map(|x| (-0.5 * ((gx - x) / bx).powi(2)).exp()).collect();
        for j in 0..n {
            let gy = step(j, 1);
            let s: f64 = ys.iter().zip(&kx).map(|(y, k)| k * (-0.5 * ((gy - y) / by).powi(2)).exp()).sum();
            out.push(GridPoint { x: gx, y: gy, density: s * norm });
        }
    }
    out
}
