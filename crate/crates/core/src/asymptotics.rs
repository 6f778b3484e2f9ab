//! Small-β outage: order gains, the coefficients `b_j`, and the choice of the
//! maximum IN DoF `U` that is optimal in the high-reliability regime.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Mutex;

use serde::Serialize;

use crate::combinatorics::{compositions3, ln_factorial, weighted_partitions, WeightedPartition};
use crate::error::{Error, Result};
use crate::geometry::TierStats;
use crate::in_scheme::InSummary;
use crate::netconfig::{InParams, NetworkConfig, Tier};
use crate::specfun::QuadratureSettings;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticResult {
    /// Order gain `min(N₁ − U, N₂)`.
    pub d: usize,
    pub b1: f64,
    pub b2: f64,
    /// Coefficient of `β^d` in `1 − S`.
    pub b: f64,
    pub u_star_d: Vec<usize>,
    /// Asymptotically optimal `U` at these thresholds (needs `T₁, T₂ > 1`).
    pub u_star: Option<usize>,
}

/// Order gain `min(N₁ − u, N₂)`.
pub fn order_gain(u: usize, cfg: &NetworkConfig) -> Result<usize> {
    if u >= cfg.n1 {
        return Err(Error::Invariant(format!("u = {u} must be below n1 = {}", cfg.n1)));
    }
    Ok((cfg.n1 - u).min(cfg.n2))
}

/// Every `U` achieving the maximal order gain `N₂`: `{0, …, N₁ − N₂}`.
pub fn optimal_u_order(cfg: &NetworkConfig) -> Vec<usize> {
    (0..=cfg.n1 - cfg.n2).collect()
}

/// Outcome of the comparison that picks the asymptotically optimal `U`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalU {
    pub u_star: usize,
    /// `A₂ b₂(N₁−N₂−1)`.
    pub below: f64,
    /// `A₁ b₁(N₁−N₂) + A₂ b₂(N₁−N₂)`.
    pub at_boundary: f64,
}

/// Small-β coefficients for one network, with the moment integrals
/// `E[Y_j^e]` cached per exponent.
#[derive(Debug)]
pub struct AsymptoticModel {
    cfg: NetworkConfig,
    stats: TierStats,
    moments: Mutex<HashMap<(u8, u64), f64>>,
}

impl AsymptoticModel {
    pub fn new(cfg: &NetworkConfig, settings: &QuadratureSettings) -> Result<Self> {
        cfg.validate()?;
        settings.validate()?;
        Ok(Self::with_stats(cfg, &TierStats::new(cfg, settings)?))
    }

    pub fn with_stats(cfg: &NetworkConfig, stats: &TierStats) -> Self {
        AsymptoticModel {
            cfg: *cfg,
            stats: stats.clone(),
            moments: Mutex::new(HashMap::new()),
        }
    }

    pub fn stats(&self) -> &TierStats {
        &self.stats
    }

    fn moment(&self, tier: Tier, e: f64) -> Result<f64> {
        let key = (tier.number(), e.to_bits());
        if let Some(&v) = self.moments.lock().expect("moment cache").get(&key) {
            return Ok(v);
        }
        let v = self.stats.moment(tier, e)?;
        self.moments.lock().expect("moment cache").insert(key, v);
        Ok(v)
    }

    /// `b_j` for the given parameters.
    pub fn coefficient_b(&self, tier: Tier, params: &InParams) -> Result<f64> {
        params.validate(&self.cfg)?;
        self.coefficient_unchecked(tier, params)
    }

    // Also accepts U = 0 with thresholds above 1, which behaves as the
    // non-IN network (p_c = 0); the optimal-U comparison needs that point.
    fn coefficient_unchecked(&self, tier: Tier, params: &InParams) -> Result<f64> {
        let cfg = &self.cfg;
        let summary = InSummary::new(cfg, params, &self.stats)?;
        let (u_j, mass) = match tier {
            Tier::Macro => (params.u_max, summary.u_pmf[params.u_max]),
            Tier::Pico => (0, 1.0),
        };
        let order = cfg.antennas(tier) - u_j;
        let (a1, a2, aj) = (cfg.alpha1, cfg.alpha2, cfg.alpha(tier));
        let (d1, d2) = (2.0 / a1, 2.0 / a2);
        let t = params.threshold(tier);
        let kappa1 = |a: usize| d1 * PI * cfg.lambda1 / (a as f64 - d1) * (cfg.p1 / cfg.power(tier)).powf(d1);
        let kappa2 = |a: usize| d2 * PI * cfg.lambda2 / (a as f64 - d2) * (cfg.p2 / cfg.power(tier)).powf(d2);
        let p_not_c = summary.p_not_c();
        let annulus = |a: usize| kappa1(a) * p_not_c * (1.0 - t.powf(-(a as f64 - d1)));
        let beyond = |a: usize| kappa1(a) * t.powf(-(a as f64 - d1));

        // Σ over M_n of Π c_a^{m_a}/m_a!, grouped by the number of parts.
        let grouped = |n: usize, c: &dyn Fn(usize) -> f64| -> Vec<f64> {
            let mut by_parts = vec![0.0; n + 1];
            for p in weighted_partitions(n).iter() {
                by_parts[p.parts()] += partition_product(p, c);
            }
            by_parts
        };
        let mut total = 0.0;
        for comp in compositions3(order).iter() {
            let g1 = grouped(comp.n1, &annulus);
            let g2 = grouped(comp.n2, &beyond);
            let g3 = grouped(comp.n3, &kappa2);
            for (k1, &v1) in g1.iter().enumerate().filter(|(_, v)| **v != 0.0) {
                for (k2, &v2) in g2.iter().enumerate().filter(|(_, v)| **v != 0.0) {
                    for (k3, &v3) in g3.iter().enumerate().filter(|(_, v)| **v != 0.0) {
                        let e = 2.0 * aj / a1 * (k1 + k2) as f64 + 2.0 * aj / a2 * k3 as f64;
                        total += v1 * v2 * v3 * self.moment(tier, e)?;
                    }
                }
            }
        }
        Ok(total * mass)
    }

    /// Order, tier coefficients and their tier-weighted composition:
    /// `A₂b₂` if `U < N₁−N₂`, `A₁b₁ + A₂b₂` if equal, `A₁b₁` otherwise.
    pub fn asymptotic(&self, params: &InParams) -> Result<AsymptoticResult> {
        params.validate(&self.cfg)?;
        let cfg = &self.cfg;
        let b1 = self.coefficient_unchecked(Tier::Macro, params)?;
        let b2 = self.coefficient_unchecked(Tier::Pico, params)?;
        let boundary = cfg.n1 - cfg.n2;
        let (a1, a2) = (self.stats.a1, self.stats.a2);
        let b = match params.u_max.cmp(&boundary) {
            std::cmp::Ordering::Less => a2 * b2,
            std::cmp::Ordering::Equal => a1 * b1 + a2 * b2,
            std::cmp::Ordering::Greater => a1 * b1,
        };
        let u_star = if params.t1 > 1.0 && params.t2 > 1.0 {
            Some(self.optimal_u(params.t1, params.t2)?.u_star)
        } else {
            None
        };
        Ok(AsymptoticResult {
            d: order_gain(params.u_max, cfg)?,
            b1,
            b2,
            b,
            u_star_d: optimal_u_order(cfg),
            u_star,
        })
    }

    /// `b β^d`.
    pub fn asymptotic_outage(&self, beta: f64, params: &InParams) -> Result<(AsymptoticResult, f64)> {
        let r = self.asymptotic(params)?;
        let v = r.b * beta.powi(r.d as i32);
        Ok((r, v))
    }

    /// `U* = N₁−N₂−1` when `A₂b₂(N₁−N₂−1) < A₁b₁(N₁−N₂) + A₂b₂(N₁−N₂)`,
    /// otherwise `N₁−N₂` (every smaller U has a larger `b₂`).
    pub fn optimal_u(&self, t1: f64, t2: f64) -> Result<OptimalU> {
        if !(t1 > 1.0 && t2 > 1.0) {
            return Err(Error::Config(crate::error::ConfigError::invalid(
                "the optimal U comparison needs t1 and t2 above 1",
            )));
        }
        let boundary = self.cfg.n1 - self.cfg.n2;
        let (a1, a2) = (self.stats.a1, self.stats.a2);
        let at = |u: usize| InParams { u_max: u, t1, t2 };
        let below = a2 * self.coefficient_unchecked(Tier::Pico, &at(boundary - 1))?;
        let at_boundary = a1 * self.coefficient_unchecked(Tier::Macro, &at(boundary))?
            + a2 * self.coefficient_unchecked(Tier::Pico, &at(boundary))?;
        Ok(OptimalU {
            u_star: if below < at_boundary { boundary - 1 } else { boundary },
            below,
            at_boundary,
        })
    }

    /// `b₂(U)` at fixed thresholds for U = 0..=u_max; U = 0 is the non-IN value.
    pub fn pico_coefficients(&self, u_max: usize, t1: f64, t2: f64) -> Result<Vec<f64>> {
        (0..=u_max)
            .map(|u| self.coefficient_unchecked(Tier::Pico, &InParams { u_max: u, t1, t2 }))
            .collect()
    }
}

fn partition_product(p: &WeightedPartition, c: &dyn Fn(usize) -> f64) -> f64 {
    p.nonzero()
        .map(|(a, m)| (m as f64 * c(a).ln() - ln_factorial(m)).exp())
        .product()
}

pub fn coefficient_b(tier: Tier, cfg: &NetworkConfig, params: &InParams) -> Result<f64> {
    AsymptoticModel::new(cfg, &QuadratureSettings::default())?.coefficient_b(tier, params)
}

pub fn asymptotic_outage(
    beta: f64,
    cfg: &NetworkConfig,
    params: &InParams,
) -> Result<(AsymptoticResult, f64)> {
    AsymptoticModel::new(cfg, &QuadratureSettings::default())?.asymptotic_outage(beta, params)
}

pub fn optimal_u_asymptotic(cfg: &NetworkConfig, t1: f64, t2: f64) -> Result<OptimalU> {
    AsymptoticModel::new(cfg, &QuadratureSettings::default())?.optimal_u(t1, t2)
}
