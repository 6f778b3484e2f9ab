//! Single-cell check of the request-load model: one macro BS at the origin,
//! tier-`j` scheduled users around it with serving distances drawn from the
//! tier's association law, each requesting IN when its SIIR from the origin
//! falls below `T_j`.

use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;

use super::{stream_rng, Purpose};
use crate::error::{ConfigError, Result};
use crate::geometry::{choose_tier, sample_ppp};
use crate::in_scheme::{macro_exclusion_radius, request_radius};
use crate::netconfig::{InParams, NetworkConfig, Tier};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    /// `k0_counts[k]`: trials with `k` requests at the origin BS; the last
    /// entry collects everything beyond.
    pub k0_counts: Vec<u64>,
    pub mean_k0: f64,
    /// Share of trials in which a tagged extra requester was served.
    pub honored_fraction: f64,
    pub trials: u64,
}

// Mean count of Poisson points in the capture disc beyond which serving
// distances are ignored: e^{-30} of the mass.
const CAPTURE_MASS: f64 = 30.0;

fn rayleigh<R: Rng + ?Sized>(density: f64, rng: &mut R) -> f64 {
    let e: f64 = rng.sample(Exp1);
    (e / (std::f64::consts::PI * density)).sqrt()
}

/// Serving distance of a tier-`tier` user, by rejection on the nearest-BS
/// distances of both tiers.
fn serving_distance<R: Rng + ?Sized>(tier: Tier, cfg: &NetworkConfig, rng: &mut R) -> f64 {
    loop {
        let z1 = rayleigh(cfg.lambda1, rng);
        let z2 = rayleigh(cfg.lambda2, rng);
        if choose_tier(cfg, z1, z2) == tier {
            return if tier == Tier::Macro { z1 } else { z2 };
        }
    }
}

/// Requests received by a macro BS at the origin in one draw.
pub fn sample_k0<R: Rng + ?Sized>(cfg: &NetworkConfig, params: &InParams, rng: &mut R) -> usize {
    let mut k = 0;
    for tier in Tier::BOTH {
        if params.threshold(tier) <= 1.0 {
            continue;
        }
        let density = cfg.density(tier);
        let y_cap = (CAPTURE_MASS / (std::f64::consts::PI * density)).sqrt();
        let disc = request_radius(tier, y_cap, cfg, params);
        for user in sample_ppp(density, disc, rng).points {
            let d = user.norm();
            let y = serving_distance(tier, cfg, rng);
            if macro_exclusion_radius(tier, y, cfg) < d && d < request_radius(tier, y, cfg, params) {
                k += 1;
            }
        }
    }
    k
}

/// Histogram of `K₀` up to `k_max` and the rate at which a tagged requester
/// is kept when the BS honors a uniform `min(U, K₀+1)`-subset.
pub fn lemma_oracle(
    cfg: &NetworkConfig,
    params: &InParams,
    trials: u64,
    k_max: usize,
    seed: u64,
) -> Result<LemmaReport> {
    params.validate(cfg)?;
    if trials == 0 {
        return Err(ConfigError::invalid("trials must be at least 1").into());
    }
    let mut counts = vec![0u64; k_max + 1];
    let (mut sum, mut honored) = (0u64, 0u64);
    for t in 0..trials {
        let mut rng = stream_rng(seed, Purpose::Lemma, t);
        let k = sample_k0(cfg, params, &mut rng);
        counts[k.min(k_max)] += 1;
        sum += k as u64;
        if params.u_max > 0 && rng.random_range(0..=k) < params.u_max {
            honored += 1;
        }
    }
    Ok(LemmaReport {
        k0_counts: counts,
        mean_k0: sum as f64 / trials as f64,
        honored_fraction: honored as f64 / trials as f64,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TierStats;
    use crate::in_scheme::{in_load, in_probability_from_load};
    use crate::specfun::QuadratureSettings;

    #[test]
    fn serving_distance_matches_tier_moment() {
        let cfg = NetworkConfig::fig2();
        let stats = TierStats::new(&cfg, &QuadratureSettings::default()).unwrap();
        let mut rng = stream_rng(1, Purpose::Lemma, 0);
        for tier in Tier::BOTH {
            let n = 40_000;
            let mean = (0..n).map(|_| serving_distance(tier, &cfg, &mut rng)).sum::<f64>() / n as f64;
            let exact = stats.moment(tier, 1.0).unwrap();
            assert!((mean / exact - 1.0).abs() < 0.02, "{tier:?}: {mean} vs {exact}");
        }
    }

    #[test]
    fn small_load_mean_and_pc() {
        let cfg = NetworkConfig::fig2();
        let stats = TierStats::new(&cfg, &QuadratureSettings::default()).unwrap();
        let p = InParams::new(2, 2.0, 2.0, &cfg).unwrap();
        let r = lemma_oracle(&cfg, &p, 3000, 20, 4).unwrap();
        let l = in_load(&cfg, &p, &stats).unwrap().l_bar;
        assert!((r.mean_k0 / l - 1.0).abs() < 0.06, "{} vs {l}", r.mean_k0);
        let pc = in_probability_from_load(2, l);
        assert!((r.honored_fraction - pc).abs() < 0.03);
        assert_eq!(r.k0_counts.iter().sum::<u64>(), 3000);
    }

    #[test]
    fn non_in_has_no_requests() {
        let cfg = NetworkConfig::fig2();
        let r = lemma_oracle(&cfg, &InParams::NON_IN, 50, 3, 0).unwrap();
        assert_eq!(r.k0_counts[0], 50);
        assert_eq!(r.honored_fraction, 0.0);
    }
}
