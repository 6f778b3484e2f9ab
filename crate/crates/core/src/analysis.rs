//! Analytical coverage engine: Laplace transforms of the three interference
//! components, their sign-absorbed derivatives, and the coverage and outage
//! probabilities of both tiers.

use std::f64::consts::PI;

use serde::Serialize;

use crate::combinatorics::{compositions3, ln_factorial, multinomial, weighted_partitions};
use crate::error::{Error, NumericError, Result};
use crate::geometry::TierStats;
use crate::in_scheme::InSummary;
use crate::netconfig::{InParams, NetworkConfig, Tier};
use crate::specfun::{beta_upper_tail, QuadratureSettings};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExclusionRadii {
    pub r_1c: f64,
    pub r_1o: f64,
    pub r_2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageResult {
    pub a1: f64,
    pub a2: f64,
    pub s1: f64,
    pub s2: f64,
    pub s: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutageResult {
    pub a1: f64,
    pub a2: f64,
    pub o1: f64,
    pub o2: f64,
    pub o: f64,
    pub beta: f64,
}

/// Exclusion radii of a tier-`j` user at serving distance `y`: the annulus of
/// potential-IN macro BSs `[r_1c, r_1o)`, the remaining macro BSs beyond
/// `r_1o`, and the pico BSs beyond `r_2`.
pub fn exclusion_radii(tier: Tier, y: f64, cfg: &NetworkConfig, params: &InParams) -> ExclusionRadii {
    let (a1, a2) = (cfg.alpha1, cfg.alpha2);
    match tier {
        Tier::Macro => ExclusionRadii {
            r_1c: y,
            r_1o: params.t1.powf(1.0 / a1) * y,
            r_2: (cfg.p2 / cfg.p1).powf(1.0 / a2) * y.powf(a1 / a2),
        },
        Tier::Pico => {
            let r_1c = (cfg.p1 / cfg.p2).powf(1.0 / a1) * y.powf(a2 / a1);
            ExclusionRadii {
                r_1c,
                r_1o: params.t2.powf(1.0 / a1) * r_1c,
                r_2: y,
            }
        }
    }
}

/// Laplace arguments `(s, s₃)` for the macro and pico interference of a
/// tier-`j` user: `β (P_k/P_j) y^{α_j}`.
pub fn laplace_arguments(tier: Tier, beta: f64, y: f64, cfg: &NetworkConfig) -> (f64, f64) {
    let base = beta * y.powf(cfg.alpha(tier)) / cfg.power(tier);
    (base * cfg.p1, base * cfg.p2)
}

/// Shot-noise exponent and the Faà di Bruno kernels of one PPP component of
/// density `density` on `r_in ≤ r < r_out` (`r_out` may be infinite):
/// `L = exp(-exponent)` and `L̃⁽ⁿ⁾ = L Σ_{(m_a)} n!/Π m_a! Π x_a^{m_a}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotNoiseTerms {
    pub exponent: f64,
    /// `x[a-1]` for a = 1..
    pub x: Vec<f64>,
}

// s r^{-α}/(1 + s r^{-α}), i.e. 1 − w in the beta-function limits.
fn beta_limit(s: f64, r: f64, alpha: f64) -> f64 {
    if r.is_infinite() {
        return 0.0;
    }
    let q = s * r.powf(-alpha);
    if q.is_infinite() {
        1.0
    } else {
        q / (1.0 + q)
    }
}

fn beta_difference(a: f64, b: f64, x_in: f64, x_out: f64) -> Result<f64, NumericError> {
    let inner = beta_upper_tail(a, b, x_in)?;
    let outer = if x_out == 0.0 { 0.0 } else { beta_upper_tail(a, b, x_out)? };
    Ok((inner - outer).max(0.0))
}

impl ShotNoiseTerms {
    /// Kernels `x_1..x_n`.
    pub fn new(
        s: f64,
        r_in: f64,
        r_out: f64,
        density: f64,
        alpha: f64,
        n: usize,
    ) -> Result<Self, NumericError> {
        Self::build(s, r_in, r_out, density, alpha, |a, _| a <= n)
    }

    /// Kernels until they fall below `1e-18 · x_1` (they decay geometrically
    /// with ratio at most `x_in`), at least `n_min` of them and at most `cap`.
    fn until_negligible(
        s: f64,
        r_in: f64,
        r_out: f64,
        density: f64,
        alpha: f64,
        n_min: usize,
        cap: usize,
    ) -> Result<Self, NumericError> {
        Self::build(s, r_in, r_out, density, alpha, |a, x: &[f64]| {
            a <= n_min || (a <= cap && x.last().is_some_and(|&v| v > 1e-18 * x[0]))
        })
    }

    fn build(
        s: f64,
        r_in: f64,
        r_out: f64,
        density: f64,
        alpha: f64,
        mut more: impl FnMut(usize, &[f64]) -> bool,
    ) -> Result<Self, NumericError> {
        if !(s >= 0.0) {
            return Err(NumericError::Domain {
                what: "Laplace argument",
                value: s,
            });
        }
        // Missing kernels read as zero.
        let mut x = Vec::new();
        if s == 0.0 || density == 0.0 || r_in >= r_out {
            return Ok(ShotNoiseTerms { exponent: 0.0, x });
        }
        let delta = 2.0 / alpha;
        let pref = 2.0 * PI * density / alpha * s.powf(delta);
        let (x_in, x_out) = (beta_limit(s, r_in, alpha), beta_limit(s, r_out, alpha));
        let exponent = pref * beta_difference(delta, 1.0 - delta, x_in, x_out)?;
        let mut a = 1;
        while more(a, &x) {
            x.push(pref * beta_difference(1.0 + delta, a as f64 - delta, x_in, x_out)?);
            a += 1;
        }
        Ok(ShotNoiseTerms { exponent, x })
    }

    pub fn laplace(&self) -> f64 {
        (-self.exponent).exp()
    }

    fn kernel(&self, a: usize) -> f64 {
        self.x.get(a - 1).copied().unwrap_or(0.0)
    }

    /// `L̃⁽ⁿ⁾ / L = Σ_{(m_a) ∈ M_n} n!/Π m_a! Π x_a^{m_a}`.
    pub fn normalized_derivative(&self, n: usize) -> f64 {
        partition_sum(n, |a| self.kernel(a))
    }

    /// `L̃⁽ⁿ⁾ = (-s)ⁿ dⁿL/dsⁿ`.
    pub fn derivative(&self, n: usize) -> f64 {
        self.laplace() * self.normalized_derivative(n)
    }
}

// Σ over weighted partitions of n of n!/Π m_a! Π x_a^{m_a}, each term formed
// in log space.
fn partition_sum(n: usize, x: impl Fn(usize) -> f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let ln_n = ln_factorial(n);
    let mut total = 0.0;
    'terms: for p in weighted_partitions(n).iter() {
        let mut ln_term = ln_n;
        for (a, m) in p.nonzero() {
            let xa = x(a);
            if xa <= 0.0 {
                continue 'terms;
            }
            ln_term += m as f64 * xa.ln() - ln_factorial(m);
        }
        total += ln_term.exp();
    }
    total
}

/// Laplace transform of the interference from the thinned potential-IN macro
/// BSs (density `thinned_density`) on the annulus `[r_1c, r_1o)`.
pub fn laplace_1c(s: f64, r_1c: f64, r_1o: f64, thinned_density: f64, alpha1: f64) -> Result<f64> {
    Ok(ShotNoiseTerms::new(s, r_1c, r_1o, thinned_density, alpha1, 0)?.laplace())
}

/// Laplace transform of the interference from a PPP of `density` beyond `r`.
pub fn laplace_tail(s: f64, r: f64, density: f64, alpha: f64) -> Result<f64> {
    Ok(ShotNoiseTerms::new(s, r, f64::INFINITY, density, alpha, 0)?.laplace())
}

/// Sign-absorbed n-th derivative `(-s)ⁿ dⁿ/dsⁿ` of [`laplace_1c`].
pub fn laplace_1c_deriv(
    n: usize,
    s: f64,
    r_1c: f64,
    r_1o: f64,
    thinned_density: f64,
    alpha1: f64,
) -> Result<f64> {
    Ok(ShotNoiseTerms::new(s, r_1c, r_1o, thinned_density, alpha1, n)?.derivative(n))
}

/// Sign-absorbed n-th derivative of [`laplace_tail`].
pub fn laplace_tail_deriv(n: usize, s: f64, r: f64, density: f64, alpha: f64) -> Result<f64> {
    Ok(ShotNoiseTerms::new(s, r, f64::INFINITY, density, alpha, n)?.derivative(n))
}

// The three components of a tier-j user evaluated at y = 1. Every beta-function
// limit s r^{-α} is independent of y, so the terms at y are the y = 1 terms
// times y^{scale[c]}.
#[derive(Debug, Clone)]
struct TierKernels {
    terms: [ShotNoiseTerms; 3],
    scale: [f64; 3],
    // Whether the kernels were extended far enough for the tail series.
    series: bool,
}

// The tail series converges like (β/(1+β))ⁿ; beyond β = 1 it is not used.
const SERIES_MAX_BETA: f64 = 1.0;

impl TierKernels {
    fn new(
        tier: Tier,
        beta: f64,
        cfg: &NetworkConfig,
        params: &InParams,
        thinned_density: f64,
        n_head: usize,
    ) -> Result<Self> {
        let r = exclusion_radii(tier, 1.0, cfg, params);
        let (s, s3) = laplace_arguments(tier, beta, 1.0, cfg);
        let (a1, a2) = (cfg.alpha1, cfg.alpha2);
        let series = beta <= SERIES_MAX_BETA;
        let cap = if series { 400 } else { n_head };
        let terms = [
            ShotNoiseTerms::until_negligible(s, r.r_1c, r.r_1o, thinned_density, a1, n_head, cap)?,
            ShotNoiseTerms::until_negligible(s, r.r_1o, f64::INFINITY, cfg.lambda1, a1, n_head, cap)?,
            ShotNoiseTerms::until_negligible(s3, r.r_2, f64::INFINITY, cfg.lambda2, a2, n_head, cap)?,
        ];
        let aj = cfg.alpha(tier);
        Ok(TierKernels {
            terms,
            scale: [2.0 * aj / a1, 2.0 * aj / a1, 2.0 * aj / a2],
            series,
        })
    }

    fn at(&self, y: f64) -> KernelsAt {
        let f = self.scale.map(|e| y.powf(e));
        let mut exponent = 0.0;
        let mut x: [Vec<f64>; 3] = Default::default();
        for c in 0..3 {
            exponent += self.terms[c].exponent * f[c];
            x[c] = self.terms[c].x.iter().map(|v| v * f[c]).collect();
        }
        KernelsAt { exponent, x }
    }
}

struct KernelsAt {
    exponent: f64,
    x: [Vec<f64>; 3],
}

impl KernelsAt {
    /// `t_n = (1/n!) Σ_{(n₁,n₂,n₃)} multinomial · Π_c L̃_c^{(n_c)}`, n < m:
    /// the Erlang-mixture masses `Pr(signal count = n)`.
    fn head_terms(&self, m: usize) -> Result<Vec<f64>> {
        let norm: Vec<Vec<f64>> = self
            .x
            .iter()
            .map(|xc| (0..m).map(|k| partition_sum(k, |a| xc.get(a - 1).copied().unwrap_or(0.0))).collect())
            .collect();
        let laplace = (-self.exponent).exp();
        (0..m)
            .map(|n| {
                let ln_n = ln_factorial(n);
                let mut sum = 0.0;
                for c in compositions3(n).iter() {
                    let coeff = multinomial(n, c.n1, c.n2, c.n3)? as f64;
                    sum += coeff * norm[0][c.n1] * norm[1][c.n2] * norm[2][c.n3];
                }
                Ok(laplace * sum * (-ln_n).exp())
            })
            .collect()
    }

    /// `Σ_{n ≥ M} t_n` for every `M ≤ m_max`, from the series of the summed
    /// kernels (`n c_n = Σ_a a x_a c_{n-a}`, `t_n = e^{-g} c_n`).
    fn tail_sums(&self, m_max: usize) -> Result<Vec<f64>> {
        let len = self.x.iter().map(Vec::len).max().unwrap_or(0);
        let xt: Vec<f64> = (0..len)
            .map(|i| self.x.iter().map(|xc| xc.get(i).copied().unwrap_or(0.0)).sum())
            .collect();
        let mut c = vec![1.0];
        let mut tail = 0.0;
        let limit = 20_000;
        for n in 1..limit {
            let v: f64 = (1..=n.min(len))
                .map(|a| a as f64 * xt[a - 1] * c[n - a])
                .sum::<f64>()
                / n as f64;
            c.push(v);
            if n >= m_max {
                tail += v;
                if n > len && n > m_max + 2 && v <= 1e-17 * tail && v <= c[n - 1] {
                    break;
                }
            }
            if n == limit - 1 {
                return Err(Error::Numeric(NumericError::NonConvergence {
                    what: "outage tail series",
                    detail: format!("exponent {}", self.exponent),
                }));
            }
        }
        let laplace = (-self.exponent).exp();
        let mut out = vec![0.0; m_max + 1];
        let mut acc = 0.0;
        for n in (0..c.len()).rev() {
            acc += c[n];
            if n <= m_max {
                out[n] = laplace * acc;
            }
        }
        Ok(out)
    }
}

/// Analytical model at one parameter point.
#[derive(Debug, Clone)]
pub struct Analyzer {
    cfg: NetworkConfig,
    params: InParams,
    stats: TierStats,
    summary: InSummary,
    settings: QuadratureSettings,
}

// Switch from 1 − head to the tail series once the head is this close to 1.
const TAIL_SWITCH: f64 = 1e-3;

impl Analyzer {
    pub fn new(cfg: &NetworkConfig, params: &InParams, settings: &QuadratureSettings) -> Result<Self> {
        cfg.validate()?;
        params.validate(cfg)?;
        settings.validate()?;
        let stats = TierStats::new(cfg, settings)?;
        Self::with_stats(cfg, params, &stats)
    }

    /// Reuses tier statistics across parameter points of one network.
    pub fn with_stats(cfg: &NetworkConfig, params: &InParams, stats: &TierStats) -> Result<Self> {
        params.validate(cfg)?;
        Ok(Analyzer {
            cfg: *cfg,
            params: *params,
            stats: stats.clone(),
            summary: InSummary::new(cfg, params, stats)?,
            settings: *stats.settings(),
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn params(&self) -> &InParams {
        &self.params
    }

    pub fn stats(&self) -> &TierStats {
        &self.stats
    }

    pub fn summary(&self) -> &InSummary {
        &self.summary
    }

    pub fn thinned_density(&self) -> f64 {
        self.summary.p_not_c() * self.cfg.lambda1
    }

    pub fn exclusion_radii(&self, tier: Tier, y: f64) -> ExclusionRadii {
        exclusion_radii(tier, y, &self.cfg, &self.params)
    }

    pub fn laplace_1c(&self, s: f64, r_1c: f64, r_1o: f64) -> Result<f64> {
        laplace_1c(s, r_1c, r_1o, self.thinned_density(), self.cfg.alpha1)
    }

    pub fn laplace_1c_deriv(&self, n: usize, s: f64, r_1c: f64, r_1o: f64) -> Result<f64> {
        laplace_1c_deriv(n, s, r_1c, r_1o, self.thinned_density(), self.cfg.alpha1)
    }

    fn kernels(&self, tier: Tier, beta: f64) -> Result<TierKernels> {
        if !(beta > 0.0) || beta.is_infinite() {
            return Err(Error::Numeric(NumericError::Domain {
                what: "SIR threshold",
                value: beta,
            }));
        }
        TierKernels::new(
            tier,
            beta,
            &self.cfg,
            &self.params,
            self.thinned_density(),
            self.cfg.antennas(tier),
        )
    }

    // (signal DoF, probability) pairs of the serving BS.
    fn dof_mixture(&self, tier: Tier) -> Vec<(usize, f64)> {
        match tier {
            Tier::Macro => self
                .summary
                .u_pmf
                .iter()
                .enumerate()
                .map(|(u, &p)| (self.cfg.n1 - u, p))
                .filter(|&(_, p)| p > 0.0)
                .collect(),
            Tier::Pico => vec![(self.cfg.n2, 1.0)],
        }
    }

    /// `Pr(SIR > β | Y_j = y)` with `m` signal DoF.
    pub fn conditional_coverage(&self, tier: Tier, beta: f64, y: f64, m: usize) -> Result<f64> {
        let k = self.kernels(tier, beta)?;
        Ok(k.at(y).head_terms(m)?.iter().sum())
    }

    fn integrate_tier(
        &self,
        tier: Tier,
        beta: f64,
        mixture: &[(usize, f64)],
        outage: bool,
    ) -> Result<f64> {
        let kernels = self.kernels(tier, beta)?;
        let m_max = mixture.iter().map(|&(m, _)| m).max().unwrap_or(1);
        let m_min = mixture.iter().map(|&(m, _)| m).min().unwrap_or(1);
        let mut failure = None;
        let integrand = |y: f64| -> f64 {
            let at = kernels.at(y);
            let value = (|| -> Result<f64> {
                let head = at.head_terms(m_max)?;
                let mut cum = vec![0.0; m_max + 1];
                for n in 0..m_max {
                    cum[n + 1] = cum[n] + head[n];
                }
                if !outage {
                    return Ok(mixture.iter().map(|&(m, p)| p * cum[m]).sum());
                }
                if !kernels.series || 1.0 - cum[m_min] > TAIL_SWITCH {
                    return Ok(mixture.iter().map(|&(m, p)| p * (1.0 - cum[m]).max(0.0)).sum());
                }
                let tails = at.tail_sums(m_max)?;
                Ok(mixture.iter().map(|&(m, p)| p * tails[m]).sum())
            })();
            match value {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        };
        let settings = if outage {
            self.settings.relative_only()
        } else {
            self.settings
        };
        let v = self.stats.expect(tier, &settings, integrand);
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(v?.clamp(0.0, 1.0))
    }

    /// `S₁(β)`: coverage of a macro user, mixed over `u_IN,0`.
    pub fn coverage_macro(&self, beta: f64) -> Result<f64> {
        self.integrate_tier(Tier::Macro, beta, &self.dof_mixture(Tier::Macro), false)
    }

    /// `S₂(β)`: coverage of a pico user (MRT with N₂ DoF).
    pub fn coverage_pico(&self, beta: f64) -> Result<f64> {
        self.integrate_tier(Tier::Pico, beta, &self.dof_mixture(Tier::Pico), false)
    }

    /// Macro-user coverage with `u_IN,0` forced to `u`.
    pub fn coverage_macro_given_u(&self, beta: f64, u: usize) -> Result<f64> {
        if u >= self.cfg.n1 {
            return Err(Error::Invariant(format!("u = {u} leaves no signal DoF")));
        }
        self.integrate_tier(Tier::Macro, beta, &[(self.cfg.n1 - u, 1.0)], false)
    }

    pub fn coverage_overall(&self, beta: f64) -> Result<CoverageResult> {
        let s1 = self.coverage_macro(beta)?;
        let s2 = self.coverage_pico(beta)?;
        let (a1, a2) = (self.stats.a1, self.stats.a2);
        Ok(CoverageResult {
            a1,
            a2,
            s1,
            s2,
            s: a1 * s1 + a2 * s2,
            beta,
        })
    }

    pub fn outage_macro(&self, beta: f64) -> Result<f64> {
        self.integrate_tier(Tier::Macro, beta, &self.dof_mixture(Tier::Macro), true)
    }

    pub fn outage_pico(&self, beta: f64) -> Result<f64> {
        self.integrate_tier(Tier::Pico, beta, &self.dof_mixture(Tier::Pico), true)
    }

    /// `1 − S`, accurate to relative precision even when it is far below
    /// machine epsilon.
    pub fn outage_overall(&self, beta: f64) -> Result<OutageResult> {
        let o1 = self.outage_macro(beta)?;
        let o2 = self.outage_pico(beta)?;
        let (a1, a2) = (self.stats.a1, self.stats.a2);
        Ok(OutageResult {
            a1,
            a2,
            o1,
            o2,
            o: a1 * o1 + a2 * o2,
            beta,
        })
    }
}

pub fn coverage_macro(beta: f64, cfg: &NetworkConfig, params: &InParams) -> Result<f64> {
    Analyzer::new(cfg, params, &QuadratureSettings::default())?.coverage_macro(beta)
}

pub fn coverage_pico(beta: f64, cfg: &NetworkConfig, params: &InParams) -> Result<f64> {
    Analyzer::new(cfg, params, &QuadratureSettings::default())?.coverage_pico(beta)
}

pub fn coverage_overall(beta: f64, cfg: &NetworkConfig, params: &InParams) -> Result<CoverageResult> {
    Analyzer::new(cfg, params, &QuadratureSettings::default())?.coverage_overall(beta)
}
