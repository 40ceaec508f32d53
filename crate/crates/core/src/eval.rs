//! Targets and flow evaluation: Gaussian mixtures, Monte-Carlo volumes and
//! normalizing constants, importance-weight metrics.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::Cholesky;
use rand::Rng;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{bail, Result};
use crate::linalg::{ln_ball_volume, log_sum_exp, Matrix, Vector};
use crate::polytope::HPolytope;
use crate::rng::sample_ball;

const LN_2PI: f64 = 1.8378770664093453;

/// `sum_i w_i N(v; mu_i, Sigma_i)`, not normalized over any support.
#[derive(Debug, Clone)]
pub struct MixtureOfGaussians {
    weights: Vec<f64>,
    means: Vec<Vector>,
    covs: Vec<Matrix>,
    chols: Vec<Matrix>,
    log_consts: Vec<f64>,
}

impl MixtureOfGaussians {
    pub fn new(weights: Vec<f64>, means: Vec<Vector>, covs: Vec<Matrix>) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() || weights.len() != covs.len() {
            bail!(Dimension, "mixture needs matching weights, means and covariances");
        }
        if weights.iter().any(|w| !(*w > 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            bail!(InvalidInput, "mixture weights must be positive and sum to one");
        }
        let k = means[0].len();
        let mut chols = Vec::with_capacity(covs.len());
        let mut log_consts = Vec::with_capacity(covs.len());
        for (i, (m, c)) in means.iter().zip(&covs).enumerate() {
            if m.len() != k || c.nrows() != k || c.ncols() != k {
                bail!(Dimension, "component {i} does not have dimension {k}");
            }
            let Some(ch) = Cholesky::new(c.clone()) else {
                bail!(Numerical, "covariance of component {i} is not positive definite");
            };
            let l = ch.unpack();
            let logdet: f64 = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
            log_consts.push(weights[i].ln() - 0.5 * (k as f64 * LN_2PI + logdet));
            chols.push(l);
        }
        Ok(MixtureOfGaussians { weights, means, covs, chols, log_consts })
    }

    /// Equal weights, isotropic covariance `scale * I`.
    pub fn isotropic(means: Vec<Vector>, scale: f64) -> Result<Self> {
        let k = means.first().map_or(0, |m| m.len());
        let n = means.len();
        Self::new(vec![1.0 / n as f64; n], means, vec![Matrix::identity(k, k) * scale; n])
    }

    /// Means `mu^i = +-1.015 e_{d_i}` for `(dimension, sign)` pairs.
    pub fn axis_means(k: usize, axes: &[(usize, f64)]) -> Vec<Vector> {
        axes.iter()
            .map(|&(d, s)| {
                let mut m = Vector::zeros(k);
                m[d] = s * 1.015;
                m
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vector] {
        &self.means
    }

    pub fn covariances(&self) -> &[Matrix] {
        &self.covs
    }

    pub fn log_pdf(&self, v: &Vector) -> f64 {
        let terms: Vec<f64> = (0..self.means.len())
            .map(|i| {
                let z = self.chols[i].solve_lower_triangular(&(v - &self.means[i])).expect("Cholesky factor is invertible");
                self.log_consts[i] - 0.5 * z.norm_squared()
            })
            .collect();
        log_sum_exp(&terms)
    }
}

pub fn mog_logpdf(v: &Vector, mog: &MixtureOfGaussians) -> f64 {
    mog.log_pdf(v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeEstimate {
    pub volume: f64,
    pub stderr: f64,
    pub accepted: usize,
    pub n: usize,
}

/// Volume by rejection from the ball `B(phi)` that must contain `h`.
pub fn estimate_volume<R: Rng + ?Sized>(h: &HPolytope, phi: f64, n: usize, rng: &mut R) -> Result<VolumeEstimate> {
    if !(phi > 0.0) || n == 0 {
        bail!(InvalidInput, "need a positive radius and sample count");
    }
    let k = h.dim();
    let accepted = (0..n).filter(|_| h.contains(&sample_ball(k, phi, rng), 0.0)).count();
    if accepted == 0 {
        bail!(Numerical, "no ball draw landed in the polytope");
    }
    let ball = ln_ball_volume(k, phi).exp();
    let p = accepted as f64 / n as f64;
    Ok(VolumeEstimate { volume: ball * p, stderr: ball * (p * (1.0 - p) / n as f64).sqrt(), accepted, n })
}

/// `Z ~ vol / N * sum_i exp(log_p(v_i))` over uniform draws (rows).
pub fn estimate_z<F: Fn(&Vector) -> f64>(log_p: F, volume: f64, uniform: &Matrix) -> Result<f64> {
    if uniform.nrows() == 0 {
        bail!(InvalidInput, "no uniform samples");
    }
    let logs: Vec<f64> = uniform.row_iter().map(|r| log_p(&r.transpose())).collect();
    Ok(volume * (log_sum_exp(&logs) - (logs.len() as f64).ln()).exp())
}

/// Midpoint-rule `log int exp(log_p)` over a 2D box on an `n x n` grid.
pub fn box_log_normalizer<F: Fn(&Vector) -> f64>(log_p: F, lo: [f64; 2], hi: [f64; 2], n: usize) -> f64 {
    let dx = (hi[0] - lo[0]) / n as f64;
    let dy = (hi[1] - lo[1]) / n as f64;
    let mut logs = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let v = Vector::from_vec(vec![lo[0] + (i as f64 + 0.5) * dx, lo[1] + (j as f64 + 0.5) * dy]);
            logs.push(log_p(&v));
        }
    }
    log_sum_exp(&logs) + (dx * dy).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Self-normalized `KL(q || p) = mean(ln q - ln p) + ln Z_KL`.
    pub kl_nats: f64,
    /// `mean(ln q - ln p) + ln Z` with an externally estimated `Z`.
    pub kl_given_z: Option<f64>,
    /// Importance ESS as a percentage of the evaluated samples.
    pub ess_pct: f64,
    pub outside_pct: Option<f64>,
    pub z_kl: f64,
    pub z_estimate: Option<f64>,
    pub n_samples: usize,
    pub n_evaluated: usize,
    pub seed: u64,
}

/// Importance-weight metrics of flow samples against an unnormalized target.
///
/// Samples outside `h` (when given) or with `log_q = -inf` are counted in
/// `outside_pct` and left out of the weights, matching rejection of points
/// that left the polytope.
pub fn flow_metrics(samples: &Matrix, log_q: &[f64], log_p: &[f64], z: Option<f64>, h: Option<&HPolytope>, seed: u64) -> Result<MetricsReport> {
    let n = samples.nrows();
    if log_q.len() != n || log_p.len() != n {
        bail!(Dimension, "samples, log q and log p must have matching lengths");
    }
    if n == 0 {
        bail!(InvalidInput, "no samples to evaluate");
    }
    let mut outside = 0usize;
    let mut log_w = Vec::with_capacity(n);
    let mut diff = 0.0;
    for (i, r) in samples.row_iter().enumerate() {
        let out = h.is_some_and(|h| !h.contains(&r.transpose(), 0.0));
        if out {
            outside += 1;
            continue;
        }
        if !log_q[i].is_finite() || log_q[i].is_nan() || log_p[i].is_nan() {
            if h.is_none() {
                outside += 1;
            }
            continue;
        }
        log_w.push(log_p[i] - log_q[i]);
        diff += log_q[i] - log_p[i];
    }
    let m = log_w.len();
    if m == 0 {
        bail!(Numerical, "all importance weights are zero");
    }
    let lse = log_sum_exp(&log_w);
    if lse == f64::NEG_INFINITY {
        bail!(Numerical, "all importance weights are zero");
    }
    let ln_zkl = lse - (m as f64).ln();
    let lse2 = log_sum_exp(&log_w.iter().map(|w| 2.0 * w).collect::<Vec<_>>());
    let ess = (2.0 * lse - lse2).exp() / m as f64 * 100.0;
    let mean_diff = diff / m as f64;
    let outside_pct = (h.is_some() || outside > 0).then(|| 100.0 * outside as f64 / n as f64);
    Ok(MetricsReport {
        kl_nats: mean_diff + ln_zkl,
        kl_given_z: z.map(|z| mean_diff + z.ln()),
        ess_pct: ess.min(100.0),
        outside_pct,
        z_kl: ln_zkl.exp(),
        z_estimate: z,
        n_samples: n,
        n_evaluated: m,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn single_component_peak() {
        let cov = Matrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.3]);
        let mu = Vector::from_vec(vec![0.2, -0.4]);
        let mog = MixtureOfGaussians::new(vec![1.0], vec![mu.clone()], vec![cov.clone()]).unwrap();
        let want = -LN_2PI - 0.5 * cov.determinant().ln();
        assert!((mog_logpdf(&mu, &mog) - want).abs() < 1e-14);
    }

    #[test]
    fn symmetric_pair_doubles_at_the_midpoint() {
        let means = vec![Vector::from_vec(vec![-1.0, 0.0]), Vector::from_vec(vec![1.0, 0.0])];
        let mog = MixtureOfGaussians::isotropic(means.clone(), 0.4).unwrap();
        let one = MixtureOfGaussians::isotropic(vec![means[0].clone()], 0.4).unwrap();
        let mid = Vector::zeros(2);
        // each weighted term is 0.5 * N(mid), so the sum is twice one term
        assert!((mog.log_pdf(&mid) - (2.0f64.ln() + 0.5f64.ln() + one.log_pdf(&mid))).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_mixtures() {
        let m = vec![Vector::zeros(2)];
        assert!(MixtureOfGaussians::new(vec![0.5], m.clone(), vec![Matrix::identity(2, 2)]).is_err());
        assert!(MixtureOfGaussians::new(vec![1.0], m.clone(), vec![-Matrix::identity(2, 2)]).is_err());
        assert!(MixtureOfGaussians::new(vec![1.0], m, vec![Matrix::identity(3, 3)]).is_err());
    }

    #[test]
    fn grid_and_monte_carlo_integrals_agree() {
        let means = vec![Vector::from_vec(vec![-0.5, 0.2]), Vector::from_vec(vec![0.6, -0.3])];
        let mog = MixtureOfGaussians::new(
            vec![0.3, 0.7],
            means,
            vec![Matrix::from_row_slice(2, 2, &[0.2, 0.05, 0.05, 0.1]), Matrix::identity(2, 2) * 0.3],
        )
        .unwrap();
        let grid = box_log_normalizer(|v| mog.log_pdf(v), [-1.0, -1.0], [1.0, 1.0], 400).exp();
        let mut rng = stream_rng(51, 0);
        let n = 200_000;
        let mc = 4.0 * (0..n).map(|_| mog.log_pdf(&Vector::from_vec(vec![2.0 * rng.random::<f64>() - 1.0, 2.0 * rng.random::<f64>() - 1.0])).exp()).sum::<f64>() / n as f64;
        assert!((grid - mc).abs() / grid < 0.01, "{grid} {mc}");
    }

    #[test]
    fn square_area_by_rejection() {
        let mut rng = stream_rng(52, 0);
        let est = estimate_volume(&HPolytope::cube(2), 2f64.sqrt(), 100_000, &mut rng).unwrap();
        assert!((est.volume - 4.0).abs() < 3.0 * est.stderr, "{est:?}");
    }

    #[test]
    fn cross_polytope_volume_by_rejection() {
        // |v|_1 <= 2 in 4D has the unit ball inscribed and vertices at radius 2
        let k = 4;
        let rows: Vec<f64> = (0..16).flat_map(|m| (0..k).map(move |j| if m & (1 << j) != 0 { -0.5 } else { 0.5 })).collect();
        let h = HPolytope::new(Matrix::from_row_slice(16, k, &rows), Vector::from_element(16, 1.0)).unwrap();
        let mut rng = stream_rng(53, 0);
        let est = estimate_volume(&h, 2.0, 100_000, &mut rng).unwrap();
        let want = 2f64.powi(4) * 2f64.powi(4) / 24.0;
        assert!((est.volume - want).abs() < 3.0 * est.stderr, "{est:?} vs {want}");
    }

    #[test]
    fn ball_of_radius_one_accepts_everything() {
        let mut rng = stream_rng(54, 0);
        let est = estimate_volume(&HPolytope::cube(3), 1.0, 1000, &mut rng).unwrap();
        assert_eq!(est.accepted, 1000);
    }

    #[test]
    fn uniform_target_has_unit_normalizer() {
        let mut rng = stream_rng(55, 0);
        let pts = Matrix::from_fn(1000, 2, |_, _| 2.0 * rng.random::<f64>() - 1.0);
        let z = estimate_z(|_| -(4.0f64).ln(), 4.0, &pts).unwrap();
        assert!((z - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_flow_has_zero_kl_and_full_ess() {
        let s = Matrix::from_fn(100, 1, |i, _| i as f64 / 100.0);
        let lq = vec![-0.3; 100];
        let lp = vec![-0.3; 100];
        let m = flow_metrics(&s, &lq, &lp, Some(1.0), None, 7).unwrap();
        assert!(m.kl_nats.abs() < 1e-14 && m.kl_given_z.unwrap().abs() < 1e-14);
        assert!((m.ess_pct - 100.0).abs() < 1e-10);
        assert_eq!(m.outside_pct, None);
        assert_eq!(m.seed, 7);
    }

    #[test]
    fn half_support_flow_has_ln2_kl() {
        // p uniform on [0, 2], q uniform on [0, 1]
        let s = Matrix::from_fn(500, 1, |i, _| (i as f64 + 0.5) / 500.0);
        let lq = vec![0.0; 500];
        let lp = vec![-(2.0f64).ln(); 500];
        let m = flow_metrics(&s, &lq, &lp, Some(1.0), None, 0).unwrap();
        assert!((m.kl_given_z.unwrap() - 2f64.ln()).abs() < 1e-14);
        assert!((m.ess_pct - 100.0).abs() < 1e-10);
        // the self-normalized estimate cannot see the missing half
        assert!(m.kl_nats.abs() < 1e-14);
    }

    #[test]
    fn outside_samples_are_counted_and_skipped() {
        let h = HPolytope::cube(1);
        let s = Matrix::from_column_slice(4, 1, &[0.0, 0.5, 2.0, -3.0]);
        let m = flow_metrics(&s, &[0.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 0.0], None, Some(&h), 0).unwrap();
        assert_eq!(m.outside_pct, Some(50.0));
        assert_eq!(m.n_evaluated, 2);
        assert!(flow_metrics(&s, &[0.0; 4], &[f64::NEG_INFINITY; 4], None, None, 0).is_err());
    }
}
