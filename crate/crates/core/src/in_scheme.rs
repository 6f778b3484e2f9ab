//! Interference-nulling protocol: request rule, request load, the laws of
//! `K₀` and `u_IN,0`, the IN probability and the thinned interferer density.

use std::f64::consts::PI;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{Association, Point, SpatialGrid, TierStats};
use crate::netconfig::{InParams, NetworkConfig, Tier};
use crate::specfun::{poisson_pmf, poisson_upper_tail};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InLoad {
    pub l_bar: f64,
    pub l1: f64,
    pub l2: f64,
}

/// Whether a user served as `user` requests nulling from a non-serving macro
/// BS at `macro_distance`, i.e. whether its SIIR falls below `T_j`.
pub fn is_potential_in(
    user: &Association,
    macro_distance: f64,
    cfg: &NetworkConfig,
    params: &InParams,
) -> bool {
    let j = user.tier;
    let log_siir = cfg.power(j).ln() - cfg.alpha(j) * user.serving_distance.ln() - cfg.p1.ln()
        + cfg.alpha1 * macro_distance.ln();
    log_siir < params.threshold(j).ln()
}

/// Distance below which a tier-`j` user at serving distance `y` requests IN:
/// `(P₁T_j/P_j)^{1/α₁} y^{α_j/α₁}`.
pub fn request_radius(tier: Tier, y: f64, cfg: &NetworkConfig, params: &InParams) -> f64 {
    (cfg.p1 * params.threshold(tier) / cfg.power(tier)).powf(1.0 / cfg.alpha1)
        * y.powf(cfg.alpha(tier) / cfg.alpha1)
}

/// Distance below which no macro BS can lie for a tier-`j` user at serving
/// distance `y` (the request radius at `T_j = 1`).
pub fn macro_exclusion_radius(tier: Tier, y: f64, cfg: &NetworkConfig) -> f64 {
    request_radius(tier, y, cfg, &InParams::NON_IN)
}

/// Mean number of IN requests per macro BS from tier-`j` scheduled users.
/// The area between the exclusion and request radii integrates to
/// `πλ_j (T_j^{2/α₁} − 1)(P₁/P_j)^{2/α₁} E[Y_j^{2α_j/α₁}]`.
pub fn tier_load(tier: Tier, cfg: &NetworkConfig, params: &InParams, stats: &TierStats) -> Result<f64> {
    let t = params.threshold(tier);
    if t <= 1.0 {
        return Ok(0.0);
    }
    let a1 = cfg.alpha1;
    let moment = stats.moment(tier, 2.0 * cfg.alpha(tier) / a1)?;
    Ok(PI
        * cfg.density(tier)
        * (t.powf(2.0 / a1) - 1.0)
        * (cfg.p1 / cfg.power(tier)).powf(2.0 / a1)
        * moment)
}

pub fn in_load(cfg: &NetworkConfig, params: &InParams, stats: &TierStats) -> Result<InLoad> {
    let l1 = tier_load(Tier::Macro, cfg, params, stats)?;
    let l2 = tier_load(Tier::Pico, cfg, params, stats)?;
    Ok(InLoad {
        l_bar: l1 + l2,
        l1,
        l2,
    })
}

/// `Pr(K₀ = k)`: Poisson with mean `L̄`.
pub fn k0_pmf(k: usize, load: &InLoad) -> f64 {
    poisson_pmf(k, load.l_bar)
}

/// `Pr(u_IN,0 = u)` for `u ≤ U`; the atom at `U` collects `K₀ ≥ U`.
pub fn u_in0_pmf(u: usize, u_max: usize, l_bar: f64) -> Result<f64> {
    if u > u_max {
        return Err(Error::Invariant(format!("u = {u} exceeds U = {u_max}")));
    }
    if u < u_max {
        Ok(poisson_pmf(u, l_bar))
    } else {
        Ok(poisson_upper_tail(u_max, l_bar))
    }
}

/// The whole `u_IN,0` law, indexed by `u = 0..=U`.
pub fn u_in0_distribution(u_max: usize, l_bar: f64) -> Vec<f64> {
    (0..=u_max)
        .map(|u| u_in0_pmf(u, u_max, l_bar).expect("u within range"))
        .collect()
}

/// `p_c = E[min(U/(K₀+1), 1)]` for `K₀ ~ Poisson(L̄)`, with the infinite tail
/// summed in closed form: `Pr(K₀ < U) + (U/L̄) Pr(K₀ ≥ U+1)`.
pub fn in_probability_from_load(u_max: usize, l_bar: f64) -> f64 {
    if u_max == 0 {
        return 0.0;
    }
    if l_bar < 1e-8 {
        return 1.0;
    }
    let head = 1.0 - poisson_upper_tail(u_max, l_bar);
    let tail = u_max as f64 / l_bar * poisson_upper_tail(u_max + 1, l_bar);
    (head + tail).clamp(0.0, 1.0)
}

pub fn in_probability(cfg: &NetworkConfig, params: &InParams, stats: &TierStats) -> Result<f64> {
    if params.u_max == 0 {
        return Ok(0.0);
    }
    Ok(in_probability_from_load(params.u_max, in_load(cfg, params, stats)?.l_bar))
}

/// Density `(1 − p_c) λ₁` of requested macro BSs that do not null.
pub fn thinned_macro_density(cfg: &NetworkConfig, params: &InParams, stats: &TierStats) -> Result<f64> {
    Ok((1.0 - in_probability(cfg, params, stats)?) * cfg.lambda1)
}

/// Everything the analytical engines need from the IN scheme at one
/// parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct InSummary {
    pub load: InLoad,
    pub p_c: f64,
    /// `Pr(u_IN,0 = u)`, u = 0..=U.
    pub u_pmf: Vec<f64>,
}

impl InSummary {
    pub fn new(cfg: &NetworkConfig, params: &InParams, stats: &TierStats) -> Result<Self> {
        let load = in_load(cfg, params, stats)?;
        Ok(InSummary {
            load,
            p_c: in_probability_from_load(params.u_max, load.l_bar),
            u_pmf: u_in0_distribution(params.u_max, load.l_bar),
        })
    }

    pub fn p_not_c(&self) -> f64 {
        1.0 - self.p_c
    }
}

/// A scheduled user of the Monte Carlo network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduledUser {
    pub location: Point,
    pub association: Association,
}

/// Outcome of the request/selection round at every macro BS.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InRequestState {
    /// Indices (into the user slice) of the users requesting each macro BS.
    pub requesting: Vec<Vec<usize>>,
    /// The subset each macro BS nulls toward.
    pub selected: Vec<Vec<usize>>,
}

impl InRequestState {
    /// `u_IN,ℓ` for every macro BS.
    pub fn u_in(&self) -> Vec<usize> {
        self.selected.iter().map(Vec::len).collect()
    }
}

/// Runs one request round: every scheduled user requests IN from every
/// non-serving macro BS whose SIIR is below its threshold, and every macro BS
/// then picks `min(U, K_ℓ)` of its requesters uniformly without replacement.
pub fn run_in_protocol<R: Rng + ?Sized>(
    macro_grid: &SpatialGrid,
    macro_count: usize,
    users: &[ScheduledUser],
    cfg: &NetworkConfig,
    params: &InParams,
    rng: &mut R,
) -> InRequestState {
    let mut requesting = vec![Vec::new(); macro_count];
    if params.u_max > 0 {
        for (i, user) in users.iter().enumerate() {
            let a = &user.association;
            let radius = request_radius(a.tier, a.serving_distance, cfg, params);
            macro_grid.within(&user.location, radius, |l, d| {
                let serving = a.tier == Tier::Macro && a.serving_index == l;
                if !serving && is_potential_in(a, d, cfg, params) {
                    requesting[l].push(i);
                }
            });
        }
    }
    let selected = requesting
        .iter_mut()
        .map(|req| {
            req.sort_unstable();
            let take = params.u_max.min(req.len());
            let mut picked: Vec<usize> = index::sample(rng, req.len(), take)
                .into_iter()
                .map(|k| req[k])
                .collect();
            picked.sort_unstable();
            picked
        })
        .collect();
    InRequestState {
        requesting,
        selected,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PointSet;
    use crate::specfun::{integrate, QuadratureSettings};
    use crate::stats::chi_square_test;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fig2() -> (NetworkConfig, TierStats) {
        let cfg = NetworkConfig::fig2();
        let stats = TierStats::new(&cfg, &QuadratureSettings::default()).unwrap();
        (cfg, stats)
    }

    fn params(u: usize, t: f64) -> InParams {
        InParams::new(u, t, t, &NetworkConfig::fig2()).unwrap()
    }

    fn macro_user(y: f64) -> Association {
        Association {
            tier: Tier::Macro,
            serving_index: 0,
            serving_distance: y,
        }
    }

    #[test]
    fn request_rule_boundaries() {
        let cfg = NetworkConfig::fig2();
        let non_in = InParams::NON_IN;
        for d in [100.0, 100.0 + 1e-9, 150.0, 1e4] {
            assert!(!is_potential_in(&macro_user(100.0), d, &cfg, &non_in));
        }
        let p = params(9, 10.0);
        let edge = 100.0 * 10f64.powf(1.0 / 4.5);
        assert!((edge - 166.810_053_720_005_87).abs() < 1e-9);
        assert!(is_potential_in(&macro_user(100.0), edge * (1.0 - 1e-9), &cfg, &p));
        assert!(!is_potential_in(&macro_user(100.0), edge * (1.0 + 1e-9), &cfg, &p));

        let pico = Association {
            tier: Tier::Pico,
            serving_index: 0,
            serving_distance: 50.0,
        };
        let edge = (cfg.p1 * 10.0 / cfg.p2).powf(1.0 / 4.5) * 50f64.powf(4.7 / 4.5);
        assert!((request_radius(Tier::Pico, 50.0, &cfg, &p) - edge).abs() < 1e-9);
        assert!(is_potential_in(&pico, edge * (1.0 - 1e-9), &cfg, &p));
        assert!(!is_potential_in(&pico, edge * (1.0 + 1e-9), &cfg, &p));
    }

    // Literal nested form: 2πλ_j ∫ r Pr(ρ_lo(Y) < r < ρ(Y)) dr, with the
    // inner probability a difference of serving-distance CDF values.
    fn nested_load(tier: Tier, cfg: &NetworkConfig, p: &InParams, stats: &TierStats) -> f64 {
        let s = QuadratureSettings {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_subdivisions: 400,
        };
        let cdf = |y: f64| integrate(|v| stats.pdf(tier, v), 0.0, y, &s).unwrap();
        let (a1, aj) = (cfg.alpha1, cfg.alpha(tier));
        // Invert r = c y^{α_j/α₁} for y.
        let inverse = |c: f64, r: f64| (r / c).powf(a1 / aj);
        let c_lo = (cfg.p1 / cfg.power(tier)).powf(1.0 / a1);
        let c_hi = c_lo * p.threshold(tier).powf(1.0 / a1);
        let cutoff = 8.0 * stats.y_max(tier);
        2.0 * PI
            * cfg.density(tier)
            * integrate(
                |r| r * (cdf(inverse(c_lo, r)) - cdf(inverse(c_hi, r))),
                0.0,
                cutoff,
                &s,
            )
            .unwrap()
    }

    #[test]
    fn load_matches_nested_integral() {
        let (cfg, stats) = fig2();
        for t in [2.0, 10.0, 50.0] {
            let p = params(9, t);
            for tier in Tier::BOTH {
                let fast = tier_load(tier, &cfg, &p, &stats).unwrap();
                let nested = nested_load(tier, &cfg, &p, &stats);
                assert!((fast / nested - 1.0).abs() < 1e-6, "{tier:?} T={t}: {fast} vs {nested}");
            }
        }
    }

    #[test]
    fn load_properties() {
        let (cfg, stats) = fig2();
        let zero = in_load(&cfg, &InParams::NON_IN, &stats).unwrap();
        assert_eq!(zero.l_bar, 0.0);
        let mut last = 0.0;
        for t in [1.5, 2.0, 5.0, 10.0, 20.0, 50.0] {
            let l = in_load(&cfg, &params(9, t), &stats).unwrap();
            assert!((l.l_bar - (l.l1 + l.l2)).abs() < 1e-15);
            assert!(l.l_bar > last);
            last = l.l_bar;
        }
        // Separately monotone in each threshold.
        let base = in_load(&cfg, &InParams::new(9, 5.0, 5.0, &cfg).unwrap(), &stats).unwrap();
        let more_t1 = in_load(&cfg, &InParams::new(9, 6.0, 5.0, &cfg).unwrap(), &stats).unwrap();
        let more_t2 = in_load(&cfg, &InParams::new(9, 5.0, 6.0, &cfg).unwrap(), &stats).unwrap();
        assert!(more_t1.l_bar > base.l_bar && more_t2.l_bar > base.l_bar);
        assert_eq!(more_t1.l2, base.l2);
    }

    #[test]
    fn k0_pmf_normalized() {
        let load = InLoad {
            l_bar: 2.7,
            l1: 1.0,
            l2: 1.7,
        };
        let total: f64 = (0..60).map(|k| k0_pmf(k, &load)).sum();
        assert!((total - 1.0).abs() < 1e-14);
        let empty = InLoad {
            l_bar: 0.0,
            l1: 0.0,
            l2: 0.0,
        };
        assert_eq!(k0_pmf(0, &empty), 1.0);
        assert_eq!(k0_pmf(3, &empty), 0.0);
    }

    #[test]
    fn u_in0_examples() {
        assert_eq!(u_in0_distribution(0, 3.0), vec![1.0]);
        let e = (-1.0f64).exp();
        let pmf = u_in0_distribution(2, 1.0);
        let expected = [e, e, 1.0 - 2.0 * e];
        for (p, q) in pmf.iter().zip(expected) {
            assert!((p - q).abs() < 1e-15);
        }
        assert!(u_in0_pmf(3, 2, 1.0).is_err());
        for (u_max, l) in [(1, 0.1), (5, 2.0), (9, 12.0)] {
            let pmf = u_in0_distribution(u_max, l);
            assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let mean: f64 = pmf.iter().enumerate().map(|(u, p)| u as f64 * p).sum();
            assert!(mean <= (u_max as f64).min(l) + 1e-12);
        }
    }

    #[test]
    fn in_probability_closed_form() {
        assert_eq!(in_probability_from_load(0, 3.0), 0.0);
        assert_eq!(in_probability_from_load(3, 0.0), 1.0);
        assert_eq!(in_probability_from_load(3, 1e-9), 1.0);
        for u in 1..10 {
            for l in [1e-6, 0.01, 0.5, 2.0, 7.0, 30.0] {
                let direct: f64 = (0..400)
                    .map(|k| poisson_pmf(k, l) * (u as f64 / (k + 1) as f64).min(1.0))
                    .sum();
                let p = in_probability_from_load(u, l);
                assert!((p - direct).abs() < 1e-12, "U={u} L={l}: {p} vs {direct}");
                assert!((0.0..=1.0).contains(&p));
                assert!(in_probability_from_load(u + 1, l) >= p);
            }
        }
    }

    #[test]
    fn thinning() {
        let (cfg, stats) = fig2();
        assert_eq!(thinned_macro_density(&cfg, &InParams::NON_IN, &stats).unwrap(), cfg.lambda1);
        let p = params(9, 10.0);
        let pc = in_probability(&cfg, &p, &stats).unwrap();
        let v = thinned_macro_density(&cfg, &p, &stats).unwrap();
        assert!((v - (1.0 - pc) * 0.0005).abs() < 1e-18);
        assert!(pc > 0.0 && pc < 1.0);
    }

    #[test]
    fn load_moment_uses_normalized_density() {
        // Rayleigh case: E[Y²] = 1/(π(λ1+λ2)) when the tiers are identical.
        let cfg = NetworkConfig {
            p1: 1.0,
            p2: 1.0,
            alpha1: 4.0,
            alpha2: 4.0,
            ..NetworkConfig::fig2()
        };
        let s = QuadratureSettings::default();
        let stats = TierStats::new(&cfg, &s).unwrap();
        let p = InParams::new(3, 16.0, 16.0, &cfg).unwrap();
        let l1 = tier_load(Tier::Macro, &cfg, &p, &stats).unwrap();
        let expected = PI * cfg.lambda1 * (16f64.sqrt() - 1.0) / (PI * (cfg.lambda1 + cfg.lambda2));
        assert!((l1 / expected - 1.0).abs() < 1e-8);
    }

    fn grid_world(rng: &mut ChaCha8Rng) -> (PointSet, SpatialGrid, Vec<ScheduledUser>) {
        let cfg = NetworkConfig::fig2();
        let macro_bs = crate::geometry::sample_ppp(cfg.lambda1, 400.0, rng);
        let pico_bs = crate::geometry::sample_ppp(cfg.lambda2, 400.0, rng);
        let grid = SpatialGrid::new(&macro_bs, 50.0);
        let users = crate::geometry::sample_ppp(cfg.lambda1 + cfg.lambda2, 400.0, rng)
            .points
            .into_iter()
            .map(|location| ScheduledUser {
                location,
                association: crate::geometry::associate(&location, &macro_bs, &pico_bs, &cfg)
                    .unwrap(),
            })
            .collect();
        (macro_bs, grid, users)
    }

    #[test]
    fn protocol_invariants() {
        let cfg = NetworkConfig::fig2();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (macro_bs, grid, users) = grid_world(&mut rng);
        let none = run_in_protocol(&grid, macro_bs.len(), &users, &cfg, &InParams::NON_IN, &mut rng);
        assert!(none.selected.iter().all(Vec::is_empty));
        for u in [1, 3, 9] {
            let p = params(u, 10.0);
            let state = run_in_protocol(&grid, macro_bs.len(), &users, &cfg, &p, &mut rng);
            for (l, (req, sel)) in state.requesting.iter().zip(&state.selected).enumerate() {
                assert_eq!(sel.len(), u.min(req.len()));
                assert!(sel.iter().all(|i| req.contains(i)));
                if req.len() <= u {
                    assert_eq!(sel, req);
                }
                for &i in req {
                    let user = &users[i];
                    let d = user.location.dist(&macro_bs.points[l]);
                    assert!(is_potential_in(&user.association, d, &cfg, &p));
                    assert!(!(user.association.tier == Tier::Macro && user.association.serving_index == l));
                }
            }
            assert_eq!(state.u_in(), state.selected.iter().map(Vec::len).collect::<Vec<_>>());
            // Every qualifying (user, BS) pair was found.
            let total: usize = state.requesting.iter().map(Vec::len).sum();
            let brute: usize = users
                .iter()
                .map(|user| {
                    macro_bs
                        .points
                        .iter()
                        .enumerate()
                        .filter(|(l, b)| {
                            let serving = user.association.tier == Tier::Macro
                                && user.association.serving_index == *l;
                            !serving && is_potential_in(&user.association, user.location.dist(b), &cfg, &p)
                        })
                        .count()
                })
                .sum();
            assert_eq!(total, brute);
        }
    }

    #[test]
    fn selection_is_uniform() {
        let cfg = NetworkConfig::fig2();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (macro_bs, grid, users) = grid_world(&mut rng);
        let p = params(2, 50.0);
        let state = run_in_protocol(&grid, macro_bs.len(), &users, &cfg, &p, &mut rng);
        let (l, req) = state
            .requesting
            .iter()
            .enumerate()
            .max_by_key(|(_, r)| r.len())
            .unwrap();
        assert!(req.len() >= 4, "need a crowded BS");
        let mut counts = vec![0u64; req.len()];
        for _ in 0..10_000 {
            let s = run_in_protocol(&grid, macro_bs.len(), &users, &cfg, &p, &mut rng);
            for i in &s.selected[l] {
                counts[req.iter().position(|r| r == i).unwrap()] += 1;
            }
        }
        let probs = vec![1.0 / req.len() as f64; req.len()];
        assert!(chi_square_test(&counts, &probs).p_value > 0.01);
    }
}
