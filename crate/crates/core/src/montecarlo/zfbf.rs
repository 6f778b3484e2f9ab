//! Zero-forcing beamformer check: a BS with `n` antennas serves one user and
//! nulls toward `u` others.

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{stream_rng, Purpose};
use crate::error::{ConfigError, Result};
use crate::specfun::gamma_lower_cdf;
use crate::stats::{ks_p_value, ks_statistic};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZfbfReport {
    pub antennas: usize,
    pub nulled: usize,
    pub samples: usize,
    /// Largest `|g_i^H f|` over all draws and nulled users.
    pub max_residual: f64,
    /// KS test of `|h^H f|²` against Gamma(n − u, 1).
    pub gain_ks: f64,
    pub gain_p_value: f64,
    /// KS test of the leakage `|g^H f|²` to an unrelated user against Exp(1).
    pub leakage_ks: f64,
    pub leakage_p_value: f64,
    /// Draws repeated because the channel stack was numerically singular.
    pub singular_resamples: usize,
}

fn cn_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Complex<f64>> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex::new(s * re, s * im)
        })
        .collect()
}

fn inner(a: &[Complex<f64>], b: &[Complex<f64>]) -> Complex<f64> {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Unit-norm ZF precoder for the first row of `channels`, orthogonal to all
/// others: the first column of `H^H (H H^H)^{-1}`.
pub fn zf_precoder(channels: &[Vec<Complex<f64>>]) -> Option<Vec<Complex<f64>>> {
    let rows = channels.len();
    let n = channels[0].len();
    let h = DMatrix::from_fn(rows, n, |i, k| channels[i][k].conj());
    let hh = h.adjoint();
    let gram_inv = (&h * &hh).try_inverse()?;
    let w = hh * gram_inv;
    let col: Vec<Complex<f64>> = w.column(0).iter().copied().collect();
    let norm = col.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    (norm.is_finite() && norm > 0.0).then(|| col.iter().map(|c| c / norm).collect())
}

pub fn zfbf_oracle(antennas: usize, nulled: usize, samples: usize, seed: u64) -> Result<ZfbfReport> {
    if nulled >= antennas {
        return Err(ConfigError::invalid(format!("cannot null {nulled} users with {antennas} antennas")).into());
    }
    if samples == 0 {
        return Err(ConfigError::invalid("samples must be at least 1").into());
    }
    let mut rng = stream_rng(seed, Purpose::Zfbf, (antennas * 1000 + nulled) as u64);
    let mut gains = Vec::with_capacity(samples);
    let mut leakage = Vec::with_capacity(samples);
    let (mut max_residual, mut singular) = (0.0f64, 0);
    while gains.len() < samples {
        let channels: Vec<_> = (0..=nulled).map(|_| cn_vector(antennas, &mut rng)).collect();
        let Some(f) = zf_precoder(&channels) else {
            singular += 1;
            continue;
        };
        for g in &channels[1..] {
            max_residual = max_residual.max(inner(g, &f).norm());
        }
        gains.push(inner(&channels[0], &f).norm_sqr());
        leakage.push(inner(&cn_vector(antennas, &mut rng), &f).norm_sqr());
    }
    let shape = antennas - nulled;
    let gain_ks = ks_statistic(&mut gains, |x| gamma_lower_cdf(shape, x));
    let leakage_ks = ks_statistic(&mut leakage, |x| 1.0 - (-x).exp());
    Ok(ZfbfReport {
        antennas,
        nulled,
        samples,
        max_residual,
        gain_ks,
        gain_p_value: ks_p_value(gain_ks, samples),
        leakage_ks,
        leakage_p_value: ks_p_value(leakage_ks, samples),
        singular_resamples: singular,
    })
}
