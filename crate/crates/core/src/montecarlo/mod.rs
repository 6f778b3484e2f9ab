//! Network-level Monte Carlo of the SIR at a typical user at the origin.
//!
//! Every trial draws one network snapshot, which is shared by all parameter
//! points and SIR thresholds of a sweep (common random numbers). Trial `i`
//! draws from a ChaCha stream keyed by `(master_seed, i)`, so results do not
//! depend on thread count.

pub mod lemma;
pub mod zfbf;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    associate, choose_tier, sample_ppp, window_radius, Association, Point, PointSet, SpatialGrid,
    TierStats,
};
use crate::in_scheme::{is_potential_in, request_radius, ScheduledUser};
use crate::netconfig::{InParams, NetworkConfig, SimMode, Tier};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub ci_halfwidth_95: f64,
    pub trials: u64,
    pub seed: u64,
}

impl McEstimate {
    pub fn from_counts(successes: u64, trials: u64, seed: u64) -> Self {
        let mean = successes as f64 / trials as f64;
        McEstimate {
            mean,
            ci_halfwidth_95: 1.96 * (mean * (1.0 - mean) / trials as f64).sqrt(),
            trials,
            seed,
        }
    }
}

// Independent streams of one master seed.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub(crate) enum Purpose {
    Network = 0x6e65_7477,
    Selection = 0x7365_6c65,
    Lemma = 0x6c65_6d6d,
    Zfbf = 0x7a66_6266,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG for `(master_seed, purpose, index)`.
pub(crate) fn stream_rng(master_seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(master_seed ^ splitmix64(purpose as u64)));
    rng.set_stream(index);
    rng
}

/// RNG for trial `trial` of the network simulation; use with
/// [`Simulator::simulate_trial`].
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    stream_rng(master_seed, Purpose::Network, trial)
}

/// One network snapshot seen from the typical user.
#[derive(Debug, Clone)]
pub struct Realization {
    pub macro_bs: PointSet,
    pub pico_bs: PointSet,
    pub users: Vec<ScheduledUser>,
    pub typical: Association,
    macro_grid: SpatialGrid,
    user_grid: SpatialGrid,
    // Largest serving distance among scheduled users of each tier.
    max_y: [f64; 2],
    // P_k g d^{-α_k} received at the origin from every BS.
    macro_rx: Vec<f64>,
    // Total interference with nobody nulling (serving BS excluded).
    interference: f64,
    signal_path: f64,
    // Partial sums of N Exp(1) draws: Gamma(M, 1) = desired_cum[M - 1].
    desired_cum: Vec<f64>,
}

/// What the typical user sees under one parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TypicalOutcome {
    pub sir: f64,
    pub tier: Tier,
    /// `u_IN,0` of the serving macro BS (macro users only).
    pub u_in0: Option<usize>,
    /// Requests made to the serving macro BS (macro users only).
    pub k0: Option<usize>,
    /// Macro BSs that null toward the typical user.
    pub nulled: usize,
}

impl Realization {
    fn requesters(&self, l: usize, cfg: &NetworkConfig, params: &InParams) -> usize {
        let reach = Tier::BOTH
            .iter()
            .map(|&t| request_radius(t, self.max_y[t.number() as usize - 1], cfg, params))
            .fold(0.0, f64::max);
        let mut count = 0;
        self.user_grid.within(&self.macro_bs.points[l], reach, |i, d| {
            let a = &self.users[i].association;
            let serving = a.tier == Tier::Macro && a.serving_index == l;
            if !serving && is_potential_in(a, d, cfg, params) {
                count += 1;
            }
        });
        count
    }

    /// Runs the IN protocol where it affects the typical user and returns its
    /// SIR. A macro BS with `K` requesters (the typical one included) keeps
    /// the typical user in a uniform `min(U, K)`-subset with probability
    /// `min(U, K)/K`; this is drawn as a uniform rank below `U`.
    pub fn typical_outcome<R: Rng + ?Sized>(
        &self,
        cfg: &NetworkConfig,
        params: &InParams,
        selection: &mut R,
    ) -> TypicalOutcome {
        let t = &self.typical;
        let mut interference = self.interference;
        let mut nulled = 0;
        let (mut u_in0, mut k0) = (None, None);
        if t.tier == Tier::Macro {
            let k = if params.u_max > 0 { self.requesters(t.serving_index, cfg, params) } else { 0 };
            k0 = Some(k);
            u_in0 = Some(params.u_max.min(k));
        }
        if params.u_max > 0 {
            let radius = request_radius(t.tier, t.serving_distance, cfg, params);
            let mut requested = Vec::new();
            self.macro_grid.within(&Point::ORIGIN, radius, |l, d| {
                let serving = t.tier == Tier::Macro && t.serving_index == l;
                if !serving && is_potential_in(t, d, cfg, params) {
                    requested.push(l);
                }
            });
            requested.sort_unstable();
            for l in requested {
                let k = self.requesters(l, cfg, params) + 1;
                if selection.random_range(0..k) < params.u_max {
                    interference -= self.macro_rx[l];
                    nulled += 1;
                }
            }
        }
        let m = match t.tier {
            Tier::Macro => cfg.n1 - u_in0.unwrap_or(0),
            Tier::Pico => cfg.n2,
        };
        let signal = self.signal_path * self.desired_cum[m - 1];
        TypicalOutcome {
            sir: signal / interference.max(0.0),
            tier: t.tier,
            u_in0,
            k0,
            nulled,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: NetworkConfig,
    stats: TierStats,
    mode: SimMode,
    window: f64,
}

/// Per-parameter and per-threshold coverage estimates of one sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    /// `estimates[p][b]` for parameter point `p` and threshold `b`.
    pub estimates: Vec<Vec<McEstimate>>,
    /// Histogram of `u_IN,0` over trials with a macro typical user, per
    /// parameter point.
    pub u_in0_counts: Vec<Vec<u64>>,
    pub macro_trials: u64,
    /// Snapshots redrawn because a tier was empty.
    pub resampled: u64,
}

#[derive(Debug, Clone)]
struct Tally {
    covered: Vec<Vec<u64>>,
    u_in0: Vec<Vec<u64>>,
    macro_trials: u64,
    resampled: u64,
}

impl Tally {
    fn new(params: &[InParams], betas: usize) -> Self {
        Tally {
            covered: vec![vec![0; betas]; params.len()],
            u_in0: params.iter().map(|p| vec![0; p.u_max + 1]).collect(),
            macro_trials: 0,
            resampled: 0,
        }
    }

    fn merge(&mut self, other: &Tally) {
        for (a, b) in self.covered.iter_mut().zip(&other.covered) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.u_in0.iter_mut().zip(&other.u_in0) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.macro_trials += other.macro_trials;
        self.resampled += other.resampled;
    }
}

const CHUNK: u64 = 256;

impl Simulator {
    pub fn new(cfg: &NetworkConfig, stats: &TierStats, mode: SimMode, window_factor: f64) -> Self {
        Simulator {
            cfg: *cfg,
            stats: stats.clone(),
            mode,
            window: window_radius(cfg, window_factor),
        }
    }

    pub fn window_radius(&self) -> f64 {
        self.window
    }

    pub fn mode(&self) -> SimMode {
        self.mode
    }

    fn associated_users<R: Rng + ?Sized>(
        &self,
        density: f64,
        keep: Option<Tier>,
        grids: (&SpatialGrid, &SpatialGrid),
        rng: &mut R,
    ) -> Vec<ScheduledUser> {
        sample_ppp(density, self.window, rng)
            .points
            .into_iter()
            .filter_map(|location| {
                let (i1, z1) = grids.0.nearest(&location)?;
                let (i2, z2) = grids.1.nearest(&location)?;
                let association = match choose_tier(&self.cfg, z1, z2) {
                    Tier::Macro => Association {
                        tier: Tier::Macro,
                        serving_index: i1,
                        serving_distance: z1,
                    },
                    Tier::Pico => Association {
                        tier: Tier::Pico,
                        serving_index: i2,
                        serving_distance: z2,
                    },
                };
                match keep {
                    Some(t) if t != association.tier => None,
                    _ => Some(ScheduledUser {
                        location,
                        association,
                    }),
                }
            })
            .collect()
    }

    /// Scheduled users other than the typical one.
    fn scheduled_users<R: Rng + ?Sized>(
        &self,
        macro_bs: &PointSet,
        pico_bs: &PointSet,
        grids: (&SpatialGrid, &SpatialGrid),
        typical: &Association,
        rng: &mut R,
    ) -> Vec<ScheduledUser> {
        let cfg = &self.cfg;
        match self.mode {
            // Independent homogeneous scheduled-user processes of densities
            // λ₁ and λ₂: candidates of density λ_j/A_j kept when they
            // associate with tier j.
            SimMode::Approx => {
                let mut users = Vec::new();
                for tier in Tier::BOTH {
                    let density = cfg.density(tier) / self.stats.tier_probability(tier);
                    users.extend(self.associated_users(density, Some(tier), grids, rng));
                }
                users
            }
            // All users, then one uniformly chosen user per BS; the typical
            // user takes its serving BS's slot.
            SimMode::Full => {
                let all = self.associated_users(cfg.lambda_u, None, grids, rng);
                let mut seen = [vec![0u32; macro_bs.len()], vec![0u32; pico_bs.len()]];
                let mut chosen = [vec![usize::MAX; macro_bs.len()], vec![usize::MAX; pico_bs.len()]];
                for (i, u) in all.iter().enumerate() {
                    let t = u.association.tier.number() as usize - 1;
                    let b = u.association.serving_index;
                    seen[t][b] += 1;
                    if rng.random_range(0..seen[t][b]) == 0 {
                        chosen[t][b] = i;
                    }
                }
                let own = (typical.tier.number() as usize - 1, typical.serving_index);
                let mut picked: Vec<usize> = chosen
                    .iter()
                    .enumerate()
                    .flat_map(|(t, c)| {
                        c.iter()
                            .enumerate()
                            .filter(move |&(b, &i)| i != usize::MAX && (t, b) != own)
                            .map(|(_, &i)| i)
                    })
                    .collect();
                picked.sort_unstable();
                picked.into_iter().map(|i| all[i]).collect()
            }
        }
    }

    /// Draws a snapshot; tiers that come out empty are redrawn and counted.
    pub fn realize<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Realization, u64)> {
        let cfg = &self.cfg;
        let mut resampled = 0;
        let (macro_bs, pico_bs) = loop {
            let m = sample_ppp(cfg.lambda1, self.window, rng);
            let p = sample_ppp(cfg.lambda2, self.window, rng);
            if !m.is_empty() && !p.is_empty() {
                break (m, p);
            }
            resampled += 1;
            if resampled > 1000 {
                return Err(Error::Invariant("window too small: tiers keep coming out empty".into()));
            }
        };
        let macro_grid = SpatialGrid::new(&macro_bs, 1.0 / cfg.lambda1.sqrt());
        let pico_grid = SpatialGrid::new(&pico_bs, 1.0 / cfg.lambda2.sqrt());
        let typical = associate(&Point::ORIGIN, &macro_bs, &pico_bs, cfg)?;
        let users = self.scheduled_users(&macro_bs, &pico_bs, (&macro_grid, &pico_grid), &typical, rng);
        let user_set = PointSet {
            points: users.iter().map(|u| u.location).collect(),
            window_radius: self.window,
        };
        let user_grid = SpatialGrid::new(&user_set, 1.0 / (cfg.lambda1 + cfg.lambda2).sqrt());
        let mut max_y = [0.0f64; 2];
        for u in &users {
            let t = u.association.tier.number() as usize - 1;
            max_y[t] = max_y[t].max(u.association.serving_distance);
        }

        let rx = |set: &PointSet, tier: Tier, rng: &mut R| -> Vec<f64> {
            set.points
                .iter()
                .map(|b| {
                    let g: f64 = rng.sample(Exp1);
                    cfg.power(tier) * g * b.norm().powf(-cfg.alpha(tier))
                })
                .collect()
        };
        let macro_rx = rx(&macro_bs, Tier::Macro, rng);
        let pico_rx = rx(&pico_bs, Tier::Pico, rng);
        let serving_rx = match typical.tier {
            Tier::Macro => macro_rx[typical.serving_index],
            Tier::Pico => pico_rx[typical.serving_index],
        };
        let interference = macro_rx.iter().sum::<f64>() + pico_rx.iter().sum::<f64>() - serving_rx;
        let mut desired_cum = Vec::with_capacity(cfg.n1.max(cfg.n2));
        let mut acc = 0.0;
        for _ in 0..cfg.n1.max(cfg.n2) {
            let g: f64 = rng.sample(Exp1);
            acc += g;
            desired_cum.push(acc);
        }
        let signal_path = cfg.power(typical.tier) * typical.serving_distance.powf(-cfg.alpha(typical.tier));
        Ok((
            Realization {
                macro_bs,
                pico_bs,
                users,
                typical,
                macro_grid,
                user_grid,
                max_y,
                macro_rx,
                interference,
                signal_path,
                desired_cum,
            },
            resampled,
        ))
    }

    /// One trial: `SIR > β` at the typical user.
    pub fn simulate_trial<R: Rng + ?Sized>(&self, params: &InParams, beta: f64, rng: &mut R) -> Result<bool> {
        let (r, _) = self.realize(rng)?;
        Ok(r.typical_outcome(&self.cfg, params, rng).sir > beta)
    }

    fn run_chunk(&self, params: &[InParams], betas: &[f64], trials: std::ops::Range<u64>, seed: u64) -> Result<Tally> {
        let mut tally = Tally::new(params, betas.len());
        for trial in trials {
            let mut rng = trial_rng(seed, trial);
            let (r, resampled) = self.realize(&mut rng)?;
            tally.resampled += resampled;
            if r.typical.tier == Tier::Macro {
                tally.macro_trials += 1;
            }
            for (p, param) in params.iter().enumerate() {
                let mut sel = stream_rng(seed, Purpose::Selection, trial);
                let out = r.typical_outcome(&self.cfg, param, &mut sel);
                for (b, &beta) in betas.iter().enumerate() {
                    if out.sir > beta {
                        tally.covered[p][b] += 1;
                    }
                }
                if let Some(u) = out.u_in0 {
                    tally.u_in0[p][u] += 1;
                }
            }
        }
        Ok(tally)
    }

    /// Coverage estimates for every parameter point and threshold, on shared
    /// snapshots.
    pub fn sweep(&self, params: &[InParams], betas: &[f64], trials: u64, seed: u64) -> Result<SweepResult> {
        if trials == 0 {
            return Err(Error::Config(crate::error::ConfigError::invalid("trials must be at least 1")));
        }
        for p in params {
            p.validate(&self.cfg)?;
        }
        let chunks: Vec<std::ops::Range<u64>> = (0..trials.div_ceil(CHUNK))
            .map(|c| c * CHUNK..((c + 1) * CHUNK).min(trials))
            .collect();
        #[cfg(feature = "parallel")]
        let parts: Vec<Result<Tally>> = {
            use rayon::prelude::*;
            chunks
                .into_par_iter()
                .map(|c| self.run_chunk(params, betas, c, seed))
                .collect()
        };
        #[cfg(not(feature = "parallel"))]
        let parts: Vec<Result<Tally>> = chunks
            .into_iter()
            .map(|c| self.run_chunk(params, betas, c, seed))
            .collect();
        let mut total = Tally::new(params, betas.len());
        for part in parts {
            total.merge(&part?);
        }
        Ok(SweepResult {
            estimates: total
                .covered
                .iter()
                .map(|row| row.iter().map(|&c| McEstimate::from_counts(c, trials, seed)).collect())
                .collect(),
            u_in0_counts: total.u_in0,
            macro_trials: total.macro_trials,
            resampled: total.resampled,
        })
    }
}

/// Coverage estimates over `beta_grid` for one parameter point.
pub fn estimate_coverage(
    cfg: &NetworkConfig,
    params: &InParams,
    beta_grid: &[f64],
    trials: u64,
    master_seed: u64,
    mode: SimMode,
    stats: &TierStats,
) -> Result<Vec<McEstimate>> {
    let sim = Simulator::new(cfg, stats, mode, crate::netconfig::EngineSettings::default().window_factor);
    Ok(sim
        .sweep(std::slice::from_ref(params), beta_grid, trials, master_seed)?
        .estimates
        .remove(0))
}
