//! Split-R̂ and autocorrelation ESS over several chains.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{bail, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainDiagnostics {
    /// Split-R̂ per dimension.
    pub rhat: Vec<f64>,
    /// Effective sample size per dimension, in percent of retained draws.
    pub ess_pct: Vec<f64>,
}

impl ChainDiagnostics {
    /// `chains[c]` is an `n x K` matrix of retained draws.
    pub fn compute(chains: &[Matrix]) -> Result<Self> {
        let k = check_chains(chains)?;
        let mut rhat = Vec::with_capacity(k);
        let mut ess = Vec::with_capacity(k);
        for j in 0..k {
            let cols: Vec<Vec<f64>> = chains.iter().map(|c| c.column(j).iter().copied().collect()).collect();
            rhat.push(split_rhat(&cols)?);
            ess.push(ess_percent(&cols)?);
        }
        Ok(ChainDiagnostics { rhat, ess_pct: ess })
    }
}

fn check_chains(chains: &[Matrix]) -> Result<usize> {
    if chains.len() < 2 {
        bail!(InvalidInput, "diagnostics need at least two chains");
    }
    let (n, k) = chains[0].shape();
    if n < 100 {
        bail!(InvalidInput, "diagnostics need at least 100 draws per chain");
    }
    if chains.iter().any(|c| c.shape() != (n, k)) {
        bail!(Dimension, "chains must have equal shapes");
    }
    Ok(k)
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Potential scale reduction with every chain split in half.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<f64> {
    let half = chains[0].len() / 2;
    let mut parts: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        parts.push(&c[..half]);
        parts.push(&c[c.len() - half..]);
    }
    let n = half as f64;
    let stats: Vec<(f64, f64)> = parts.iter().map(|p| mean_var(p)).collect();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / stats.len() as f64;
    if !(w > 0.0) {
        bail!(Numerical, "R-hat is undefined for constant chains");
    }
    let means: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let (_, var_means) = mean_var(&means);
    let b = n * var_means;
    let var_plus = (n - 1.0) / n * w + b / n;
    Ok((var_plus / w).sqrt())
}

/// Multi-chain ESS with Geyer's initial positive (monotone) sequence,
/// in percent of all draws, capped at 100.
pub fn ess_percent(chains: &[Vec<f64>]) -> Result<f64> {
    let m = chains.len();
    let n = chains[0].len();
    let stats: Vec<(f64, f64)> = chains.iter().map(|c| mean_var(c)).collect();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / m as f64;
    if !(w > 0.0) {
        bail!(Numerical, "ESS is undefined for constant chains");
    }
    let means: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let b_over_n = if m > 1 { mean_var(&means).1 } else { 0.0 };
    let nf = n as f64;
    let var_plus = (nf - 1.0) / nf * w + b_over_n;
    let centered: Vec<Vec<f64>> = chains.iter().zip(&stats).map(|(c, s)| c.iter().map(|x| x - s.0).collect()).collect();
    let acov = |lag: usize| -> f64 {
        let mut total = 0.0;
        for c in &centered {
            let mut acc = 0.0;
            for t in 0..n - lag {
                acc += c[t] * c[t + lag];
            }
            total += acc / nf;
        }
        total / m as f64
    };
    let rho = |lag: usize| 1.0 - (w - acov(lag)) / var_plus;
    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let p0 = if lag == 0 { 1.0 } else { rho(lag) };
        let p1 = rho(lag + 1);
        let mut pair = p0 + p1;
        if pair < 0.0 {
            break;
        }
        if pair > prev_pair {
            pair = prev_pair;
        }
        tau += 2.0 * pair;
        prev_pair = pair;
        lag += 2;
    }
    let ess = (m as f64 * nf) / tau.max(1e-12);
    Ok((100.0 * ess / (m as f64 * nf)).min(100.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normal_chain(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = stream_rng(seed, 0);
        (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    }

    #[test]
    fn iid_chains() {
        let chains: Vec<Vec<f64>> = (0..4).map(|i| normal_chain(i, 2000)).collect();
        let r = split_rhat(&chains).unwrap();
        assert!((0.999..=1.005).contains(&r), "{r}");
        assert!(ess_percent(&chains).unwrap() >= 80.0);
    }

    #[test]
    fn separated_chains_have_large_rhat() {
        let a: Vec<f64> = normal_chain(1, 500).iter().map(|x| 0.1 * x).collect();
        let b: Vec<f64> = normal_chain(2, 500).iter().map(|x| 5.0 + 0.1 * x).collect();
        assert!(split_rhat(&[a, b]).unwrap() > 1.1);
    }

    #[test]
    fn ar1_ess() {
        let rho = 0.5;
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|i| {
                let e = normal_chain(10 + i, 20_000);
                let mut x = 0.0;
                e.iter()
                    .map(|z| {
                        x = rho * x + (1.0 - rho * rho as f64).sqrt() * z;
                        x
                    })
                    .collect()
            })
            .collect();
        let pct = ess_percent(&chains).unwrap();
        assert!((pct - 100.0 / 3.0).abs() < 5.0, "{pct}");
    }

    #[test]
    fn constant_chain_is_an_error() {
        let c = alloc::vec![alloc::vec![1.0; 200], alloc::vec![1.0; 200]];
        assert!(split_rhat(&c).is_err());
        assert!(ess_percent(&c).is_err());
    }

    #[test]
    fn diagnostics_shape_checks() {
        let m = Matrix::zeros(50, 2);
        assert!(ChainDiagnostics::compute(&[m.clone(), m]).is_err());
        let mut rng = stream_rng(3, 0);
        let a = Matrix::from_fn(200, 2, |_, _| rng.random::<f64>());
        let b = Matrix::from_fn(200, 2, |_, _| rng.random::<f64>());
        let d = ChainDiagnostics::compute(&[a, b]).unwrap();
        assert_eq!(d.rhat.len(), 2);
    }
}
