//! Point processes, max-received-power association, tier probabilities and
//! serving-distance densities.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::netconfig::{NetworkConfig, Tier};
use crate::specfun::{envelope_cutoff, semi_infinite_integral, QuadratureSettings};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn dist2(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Points inside the disc of `window_radius` centred at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub points: Vec<Point>,
    pub window_radius: f64,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and distance of the point nearest to `at`, by linear scan.
    pub fn nearest(&self, at: &Point) -> Option<(usize, f64)> {
        self.points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, p.dist2(at)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, d2)| (i, d2.sqrt()))
    }
}

/// Homogeneous PPP of `density` on the disc of radius `window_radius`.
pub fn sample_ppp<R: Rng + ?Sized>(density: f64, window_radius: f64, rng: &mut R) -> PointSet {
    let mean = density * PI * window_radius * window_radius;
    let count = if mean > 0.0 {
        Poisson::new(mean).expect("finite positive mean").sample(rng) as usize
    } else {
        0
    };
    let points = (0..count)
        .map(|_| uniform_in_disc(window_radius, rng))
        .collect();
    PointSet {
        points,
        window_radius,
    }
}

pub fn uniform_in_disc<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = 2.0 * PI * rng.random::<f64>();
    Point::new(r * theta.cos(), r * theta.sin())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Association {
    pub tier: Tier,
    /// Index of the serving BS within its tier's point set.
    pub serving_index: usize,
    pub serving_distance: f64,
}

/// Long-term received power `P_j d^{-α_j}`, in log form.
pub fn log_received_power(cfg: &NetworkConfig, tier: Tier, distance: f64) -> f64 {
    cfg.power(tier).ln() - cfg.alpha(tier) * distance.ln()
}

/// Tier selection given the nearest distances of each tier. Equal received
/// powers go to the macro tier.
pub fn choose_tier(cfg: &NetworkConfig, z1: f64, z2: f64) -> Tier {
    if log_received_power(cfg, Tier::Macro, z1) >= log_received_power(cfg, Tier::Pico, z2) {
        Tier::Macro
    } else {
        Tier::Pico
    }
}

/// Associates the user at `user` with the BS of maximum long-term received power.
pub fn associate(
    user: &Point,
    macro_bs: &PointSet,
    pico_bs: &PointSet,
    cfg: &NetworkConfig,
) -> Result<Association> {
    let (i1, z1) = macro_bs
        .nearest(user)
        .ok_or_else(|| Error::Invariant("association with an empty macro tier".into()))?;
    let (i2, z2) = pico_bs
        .nearest(user)
        .ok_or_else(|| Error::Invariant("association with an empty pico tier".into()))?;
    Ok(match choose_tier(cfg, z1, z2) {
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
    })
}

/// Uniform bucket grid over the window for nearest-neighbour and range queries.
#[derive(Debug, Clone)]
pub struct SpatialGrid {
    origin: f64,
    cell: f64,
    side: usize,
    starts: Vec<u32>,
    items: Vec<u32>,
    points: Vec<Point>,
}

impl SpatialGrid {
    pub fn new(set: &PointSet, cell: f64) -> Self {
        let origin = -set.window_radius;
        let side = ((2.0 * set.window_radius / cell).ceil() as usize).max(1);
        let clamp = |v: f64| (((v - origin) / cell).floor().max(0.0) as usize).min(side - 1);
        let mut counts = vec![0u32; side * side + 1];
        let keys: Vec<usize> = set
            .points
            .iter()
            .map(|p| clamp(p.y) * side + clamp(p.x))
            .collect();
        for &k in &keys {
            counts[k + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut fill = counts.clone();
        let mut items = vec![0u32; keys.len()];
        for (i, &k) in keys.iter().enumerate() {
            items[fill[k] as usize] = i as u32;
            fill[k] += 1;
        }
        SpatialGrid {
            origin,
            cell,
            side,
            starts: counts,
            items,
            points: set.points.clone(),
        }
    }

    fn coord(&self, v: f64) -> isize {
        ((v - self.origin) / self.cell).floor() as isize
    }

    fn bucket(&self, cx: isize, cy: isize) -> &[u32] {
        if cx < 0 || cy < 0 || cx >= self.side as isize || cy >= self.side as isize {
            return &[];
        }
        let k = cy as usize * self.side + cx as usize;
        &self.items[self.starts[k] as usize..self.starts[k + 1] as usize]
    }

    pub fn nearest(&self, at: &Point) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let (cx, cy) = (self.coord(at.x), self.coord(at.y));
        let mut best: Option<(usize, f64)> = None;
        let max_ring = self.side as isize + cx.abs().max(cy.abs()) + 1;
        for ring in 0..=max_ring {
            for dy in -ring..=ring {
                let edge = dy == -ring || dy == ring;
                let step = if edge { 1 } else { 2 * ring.max(1) };
                let mut dx = -ring;
                while dx <= ring {
                    for &i in self.bucket(cx + dx, cy + dy) {
                        let d2 = self.points[i as usize].dist2(at);
                        if best.is_none_or(|(_, b)| d2 < b) {
                            best = Some((i as usize, d2));
                        }
                    }
                    dx += step;
                }
            }
            // Every cell outside this ring is at least `ring * cell` away.
            if let Some((_, b)) = best {
                let reach = ring as f64 * self.cell;
                if b <= reach * reach {
                    break;
                }
            }
        }
        best.map(|(i, d2)| (i, d2.sqrt()))
    }

    /// Calls `visit(index, distance)` for every point within `radius` of `at`.
    pub fn within(&self, at: &Point, radius: f64, mut visit: impl FnMut(usize, f64)) {
        let r2 = radius * radius;
        let (x0, x1) = (self.coord(at.x - radius), self.coord(at.x + radius));
        let (y0, y1) = (self.coord(at.y - radius), self.coord(at.y + radius));
        for cy in y0.max(0)..=y1.min(self.side as isize - 1) {
            for cx in x0.max(0)..=x1.min(self.side as isize - 1) {
                for &i in self.bucket(cx, cy) {
                    let d2 = self.points[i as usize].dist2(at);
                    if d2 < r2 {
                        visit(i as usize, d2.sqrt());
                    }
                }
            }
        }
    }
}

/// Simulation window radius: `factor / sqrt(π λ1)`, enlarged until the
/// expected interference beyond the window is below 1e-3 of the in-window
/// share for both tiers (reference inner radius `1/sqrt(π(λ1+λ2))`).
pub fn window_radius(cfg: &NetworkConfig, factor: f64) -> f64 {
    let mut r = factor / (PI * cfg.lambda1).sqrt();
    let r_ref = 1.0 / (PI * (cfg.lambda1 + cfg.lambda2)).sqrt();
    let truncated_share = |r: f64, alpha: f64| {
        let ratio = (r / r_ref).powf(2.0 - alpha);
        ratio / (1.0 - ratio)
    };
    while Tier::BOTH
        .iter()
        .any(|&t| truncated_share(r, cfg.alpha(t)) >= 1e-3)
    {
        r *= 1.1;
    }
    r
}

/// Exponent pieces of the serving-distance law of tier `j`: the other tier
/// `k` contributes `λ_k (P_k/P_j)^{2/α_k} y^{2α_j/α_k}`.
#[derive(Debug, Clone, Copy)]
struct CompetingTier {
    own_density: f64,
    other_coeff: f64,
    other_exponent: f64,
}

impl CompetingTier {
    fn new(cfg: &NetworkConfig, tier: Tier) -> Self {
        let other = match tier {
            Tier::Macro => Tier::Pico,
            Tier::Pico => Tier::Macro,
        };
        let ak = cfg.alpha(other);
        CompetingTier {
            own_density: cfg.density(tier),
            other_coeff: cfg.density(other) * (cfg.power(other) / cfg.power(tier)).powf(2.0 / ak),
            other_exponent: 2.0 * cfg.alpha(tier) / ak,
        }
    }

    // 2πλ_j y exp(-π(λ_j y² + c y^e)), i.e. A_j f_{Y_j}(y).
    fn unnormalized(&self, y: f64) -> f64 {
        2.0 * PI
            * self.own_density
            * y
            * (-PI * (self.own_density * y * y + self.other_coeff * y.powf(self.other_exponent)))
                .exp()
    }
}

/// Tier probability `A_j = Pr(typical user associates with tier j)`.
pub fn tier_probability(tier: Tier, cfg: &NetworkConfig, settings: &QuadratureSettings) -> Result<f64> {
    let ct = CompetingTier::new(cfg, tier);
    let y_max = envelope_cutoff(cfg.density(tier));
    Ok(semi_infinite_integral(|y| ct.unnormalized(y), y_max, settings)?)
}

/// Serving-distance density `f_{Y_j}(y)` of a tier-j user. Recomputes `A_j`;
/// use [`TierStats`] when evaluating many points.
pub fn serving_distance_pdf(
    tier: Tier,
    y: f64,
    cfg: &NetworkConfig,
    settings: &QuadratureSettings,
) -> Result<f64> {
    Ok(TierStats::new(cfg, settings)?.pdf(tier, y))
}

/// Tier probabilities and serving-distance densities of one configuration.
#[derive(Debug, Clone)]
pub struct TierStats {
    pub a1: f64,
    pub a2: f64,
    macro_law: CompetingTier,
    pico_law: CompetingTier,
    y_max: [f64; 2],
    settings: QuadratureSettings,
}

impl TierStats {
    pub fn new(cfg: &NetworkConfig, settings: &QuadratureSettings) -> Result<Self> {
        Ok(TierStats {
            a1: tier_probability(Tier::Macro, cfg, settings)?,
            a2: tier_probability(Tier::Pico, cfg, settings)?,
            macro_law: CompetingTier::new(cfg, Tier::Macro),
            pico_law: CompetingTier::new(cfg, Tier::Pico),
            y_max: [
                envelope_cutoff(cfg.lambda1),
                envelope_cutoff(cfg.lambda2),
            ],
            settings: *settings,
        })
    }

    pub fn tier_probability(&self, tier: Tier) -> f64 {
        match tier {
            Tier::Macro => self.a1,
            Tier::Pico => self.a2,
        }
    }

    pub fn pdf(&self, tier: Tier, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        match tier {
            Tier::Macro => self.macro_law.unnormalized(y) / self.a1,
            Tier::Pico => self.pico_law.unnormalized(y) / self.a2,
        }
    }

    /// Integration cutoff hint for integrands weighted by `f_{Y_j}`.
    pub fn y_max(&self, tier: Tier) -> f64 {
        self.y_max[tier.number() as usize - 1]
    }

    pub fn settings(&self) -> &QuadratureSettings {
        &self.settings
    }

    /// `∫ g(y) f_{Y_j}(y) dy`.
    pub fn expect(
        &self,
        tier: Tier,
        settings: &QuadratureSettings,
        mut g: impl FnMut(f64) -> f64,
    ) -> Result<f64> {
        Ok(semi_infinite_integral(
            |y| {
                let p = self.pdf(tier, y);
                if p == 0.0 {
                    0.0
                } else {
                    g(y) * p
                }
            },
            self.y_max(tier),
            settings,
        )?)
    }

    /// `E[Y_j^k]`.
    pub fn moment(&self, tier: Tier, k: f64) -> Result<f64> {
        let settings = self.settings.relative_only();
        self.expect(tier, &settings, |y| y.powf(k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn symmetric() -> NetworkConfig {
        NetworkConfig {
            p1: 1.0,
            p2: 1.0,
            alpha1: 4.0,
            alpha2: 4.0,
            ..NetworkConfig::fig2()
        }
    }

    #[test]
    fn ppp_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(sample_ppp(1e-12, 500.0, &mut rng).is_empty());
        let draws = 10_000;
        let mean_expected = 1e-3 * PI * 500.0 * 500.0;
        let total: usize = (0..draws)
            .map(|_| sample_ppp(1e-3, 500.0, &mut rng).len())
            .sum();
        let mean = total as f64 / draws as f64;
        let sigma = (mean_expected / draws as f64).sqrt();
        assert!((mean - mean_expected).abs() < 3.0 * sigma, "{mean}");
        let set = sample_ppp(1e-3, 500.0, &mut rng);
        assert!(set.points.iter().all(|p| p.norm() <= 500.0));
    }

    #[test]
    fn ripley_k_is_consistent_with_csr() {
        // K(r) estimated on the inner disc (minus-sampling edge correction).
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (density, radius, r) = (1e-3, 300.0, 30.0);
        let mut estimates = Vec::new();
        for _ in 0..1000 {
            let set = sample_ppp(density, radius, &mut rng);
            let inner: Vec<&Point> = set.points.iter().filter(|p| p.norm() < radius - r).collect();
            if inner.is_empty() {
                continue;
            }
            let pairs: usize = inner
                .iter()
                .map(|p| set.points.iter().filter(|q| *q != *p && p.dist(q) < r).count())
                .sum();
            estimates.push(pairs as f64 / (inner.len() as f64 * density));
        }
        let k = estimates.iter().sum::<f64>() / estimates.len() as f64;
        let csr = PI * r * r;
        assert!((k / csr - 1.0).abs() < 0.01, "K={k} vs {csr}");
    }

    #[test]
    fn association_examples() {
        let cfg = symmetric();
        let m = PointSet {
            points: vec![Point::new(10.0, 0.0)],
            window_radius: 100.0,
        };
        let p = PointSet {
            points: vec![Point::new(0.0, 20.0)],
            window_radius: 100.0,
        };
        let a = associate(&Point::ORIGIN, &m, &p, &cfg).unwrap();
        assert_eq!(a.tier, Tier::Macro);
        assert_eq!(a.serving_distance, 10.0);

        let fig2 = NetworkConfig::fig2();
        let rp1 = 31.622_776_601_683_793 * 100f64.powf(-4.5);
        let rp2 = 30f64.powf(-4.7);
        assert!(rp2 > rp1);
        let m = PointSet {
            points: vec![Point::new(100.0, 0.0)],
            window_radius: 200.0,
        };
        let p = PointSet {
            points: vec![Point::new(0.0, -30.0)],
            window_radius: 200.0,
        };
        assert_eq!(associate(&Point::ORIGIN, &m, &p, &fig2).unwrap().tier, Tier::Pico);
        let empty = PointSet {
            points: vec![],
            window_radius: 1.0,
        };
        assert!(associate(&Point::ORIGIN, &empty, &p, &fig2).is_err());
    }

    #[test]
    fn association_scale_invariant_in_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = NetworkConfig::fig2();
        for _ in 0..200 {
            let m = sample_ppp(cfg.lambda1, 300.0, &mut rng);
            let p = sample_ppp(cfg.lambda2, 300.0, &mut rng);
            let a = associate(&Point::ORIGIN, &m, &p, &cfg).unwrap();
            for c in [1e-3, 7.0, 1e4] {
                let scaled = NetworkConfig {
                    p1: cfg.p1 * c,
                    p2: cfg.p2 * c,
                    ..cfg
                };
                assert_eq!(associate(&Point::ORIGIN, &m, &p, &scaled).unwrap(), a);
            }
        }
    }

    #[test]
    fn grid_queries_match_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let set = sample_ppp(5e-4, 400.0, &mut rng);
        let grid = SpatialGrid::new(&set, 45.0);
        for _ in 0..500 {
            let at = uniform_in_disc(450.0, &mut rng);
            assert_eq!(grid.nearest(&at), set.nearest(&at));
            let mut found = Vec::new();
            grid.within(&at, 120.0, |i, _| found.push(i));
            found.sort();
            let brute: Vec<usize> = (0..set.len())
                .filter(|&i| set.points[i].dist(&at) < 120.0)
                .collect();
            assert_eq!(found, brute);
        }
    }

    #[test]
    fn tier_probabilities() {
        let s = QuadratureSettings::default();
        let cfg = symmetric();
        let a1 = tier_probability(Tier::Macro, &cfg, &s).unwrap();
        assert!((a1 - cfg.lambda1 / (cfg.lambda1 + cfg.lambda2)).abs() < 1e-9);

        let fig2 = NetworkConfig::fig2();
        let stats = TierStats::new(&fig2, &s).unwrap();
        assert!((stats.a1 + stats.a2 - 1.0).abs() < 1e-8);

        let sparse = NetworkConfig {
            lambda2: 1e-12,
            ..fig2
        };
        assert!(tier_probability(Tier::Macro, &sparse, &s).unwrap() > 1.0 - 1e-6);
    }

    #[test]
    fn tier_probability_monotone() {
        let s = QuadratureSettings::default();
        let base = NetworkConfig::fig2();
        let a = |c: NetworkConfig| tier_probability(Tier::Macro, &c, &s).unwrap();
        let a0 = a(base);
        assert!(a(NetworkConfig { lambda1: 6e-4, ..base }) > a0);
        assert!(a(NetworkConfig { p1: base.p1 * 1.5, ..base }) > a0);
    }

    #[test]
    fn serving_distance_densities() {
        let s = QuadratureSettings::default();
        let fig2 = NetworkConfig::fig2();
        let stats = TierStats::new(&fig2, &s).unwrap();
        for tier in Tier::BOTH {
            let total = stats.moment(tier, 0.0).unwrap();
            assert!((total - 1.0).abs() < 1e-8, "{tier:?}: {total}");
            assert!((1..400).all(|i| stats.pdf(tier, i as f64 * 0.5) >= 0.0));
        }
        let cfg = symmetric();
        let stats = TierStats::new(&cfg, &s).unwrap();
        let l = cfg.lambda1 + cfg.lambda2;
        for y in [1.0, 10.0, 25.0, 60.0] {
            let rayleigh = 2.0 * PI * l * y * (-PI * l * y * y).exp();
            assert!((stats.pdf(Tier::Macro, y) - rayleigh).abs() < 1e-10 * rayleigh.max(1e-12));
            let direct = serving_distance_pdf(Tier::Macro, y, &cfg, &s).unwrap();
            assert!((direct - rayleigh).abs() < 1e-10 * rayleigh.max(1e-12));
        }
    }

    #[test]
    fn window_radius_default() {
        let cfg = NetworkConfig::fig2();
        let r = window_radius(&cfg, 25.0);
        assert!((r - 25.0 / (PI * cfg.lambda1).sqrt()).abs() < 1e-9);
        // A small factor is enlarged by the truncation rule.
        assert!(window_radius(&cfg, 2.0) > 2.0 / (PI * cfg.lambda1).sqrt());
    }
}
