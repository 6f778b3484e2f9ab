//! Special functions and quadrature used by the analytical engine.

use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::combinatorics::ln_factorial;
use crate::error::{ConfigError, NumericError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_subdivisions: 200,
        }
    }
}

impl QuadratureSettings {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(ConfigError::invalid("quadrature tolerances must be positive"));
        }
        if self.max_subdivisions == 0 {
            return Err(ConfigError::invalid("max_subdivisions must be at least 1"));
        }
        Ok(())
    }

    /// Same relative tolerance, absolute floor removed. For integrals whose
    /// magnitude is far below the default `abs_tol` (small-β outage).
    pub fn relative_only(self) -> Self {
        QuadratureSettings {
            abs_tol: f64::MIN_POSITIVE,
            ..self
        }
    }
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let dx = half * XGK[i];
        let pair = f(center - dx) + f(center + dx);
        kron += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive Gauss–Kronrod (7/15) quadrature on a finite interval.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    settings: &QuadratureSettings,
) -> Result<f64, NumericError> {
    if a == b {
        return Ok(0.0);
    }
    let (value, error) = kronrod15(&mut f, a, b);
    let mut total = value;
    let mut total_err = error;
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    let mut splits = 0;
    loop {
        if !total.is_finite() {
            return Err(NumericError::NonConvergence {
                what: "adaptive quadrature",
                detail: format!("non-finite integrand on [{a}, {b}]"),
            });
        }
        if total_err <= settings.abs_tol.max(settings.rel_tol * total.abs()) {
            return Ok(total);
        }
        if splits >= settings.max_subdivisions {
            return Err(NumericError::NonConvergence {
                what: "adaptive quadrature",
                detail: format!(
                    "error {total_err:e} on [{a}, {b}] after {splits} subdivisions"
                ),
            });
        }
        let worst = heap.pop().expect("at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        let (lv, le) = kronrod15(&mut f, worst.a, mid);
        let (rv, re) = kronrod15(&mut f, mid, worst.b);
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: lv,
            error: le,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: rv,
            error: re,
        });
        splits += 1;
        // Running sums drift; refresh them now and then.
        if splits % 64 == 0 {
            total = heap.iter().map(|p| p.value).sum();
            total_err = heap.iter().map(|p| p.error).sum();
        }
    }
}

/// Radius beyond which `exp(-π λ y²)` is below 1e-16 of its peak.
pub fn envelope_cutoff(lambda_min: f64) -> f64 {
    (16.0 * std::f64::consts::LN_10 / (std::f64::consts::PI * lambda_min)).sqrt()
}

/// ∫₀^∞ f. The first panel is `[0, y_max]`; doubling panels follow until
/// one contributes less than the tolerance.
pub fn semi_infinite_integral<F: FnMut(f64) -> f64>(
    mut f: F,
    y_max: f64,
    settings: &QuadratureSettings,
) -> Result<f64, NumericError> {
    let mut total = integrate(&mut f, 0.0, y_max, settings)?;
    let mut lo = y_max;
    for _ in 0..64 {
        let hi = 2.0 * lo;
        let panel = integrate(&mut f, lo, hi, settings)?;
        total += panel;
        if panel.abs() <= settings.abs_tol.max(0.01 * settings.rel_tol * total.abs()) {
            return Ok(total);
        }
        lo = hi;
    }
    Err(NumericError::NonConvergence {
        what: "semi-infinite quadrature",
        detail: format!("tail still significant beyond {lo}"),
    })
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

// Continued fraction of the incomplete beta (modified Lentz). Converges
// quickly for x < (a+1)/(a+b+2).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> Result<f64, NumericError> {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=1000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(NumericError::NonConvergence {
        what: "incomplete beta continued fraction",
        detail: format!("a={a} b={b} x={x}"),
    })
}

// ∫₀ˣ t^{p-1}(1-t)^{q-1} dt, valid on the side x < (p+1)/(p+q+2).
fn beta_lower_small_side(p: f64, q: f64, x: f64) -> Result<f64, NumericError> {
    let log_front = p * x.ln() + q * (-x).ln_1p() - p.ln();
    Ok(log_front.exp() * beta_continued_fraction(p, q, x)?)
}

/// `B'(a, b, z) = ∫_z^1 u^{a-1}(1-u)^{b-1} du`, parameterized by the
/// complement `x = 1 - z` so callers near `z → 1` keep relative precision.
pub fn beta_upper_tail(a: f64, b: f64, x: f64) -> Result<f64, NumericError> {
    if !(a > 0.0) {
        return Err(NumericError::Domain {
            what: "beta_upper parameter a",
            value: a,
        });
    }
    if !(b > 0.0) {
        return Err(NumericError::Domain {
            what: "beta_upper parameter b",
            value: b,
        });
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(NumericError::Domain {
            what: "beta_upper complement 1-z",
            value: x,
        });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    // Substituting v = 1 - u gives ∫₀ˣ v^{b-1}(1-v)^{a-1} dv.
    if x < (b + 1.0) / (a + b + 2.0) {
        beta_lower_small_side(b, a, x)
    } else {
        let z = (1.0 - x).max(1e-300);
        Ok(ln_beta(a, b).exp() - beta_lower_small_side(a, b, z)?)
    }
}

/// `B'(a, b, z)` for `z ∈ (0, 1)`. Inputs rounded onto the endpoints are
/// clamped to `[1e-300, 1 - 1e-16]`.
pub fn beta_upper(a: f64, b: f64, z: f64) -> Result<f64, NumericError> {
    if !(z > -1e-12 && z < 1.0 + 1e-12) {
        return Err(NumericError::Domain {
            what: "beta_upper z",
            value: z,
        });
    }
    let z = z.clamp(1e-300, 1.0 - 1e-16);
    beta_upper_tail(a, b, 1.0 - z)
}

/// `Pr(G > x)` for `G ~ Gamma(shape, 1)` with integer shape (Erlang tail).
pub fn gamma_upper_tail(shape: usize, x: f64) -> f64 {
    assert!(shape >= 1, "gamma shape must be positive");
    if x <= 0.0 {
        return 1.0;
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..shape {
        term *= x / n as f64;
        sum += term;
    }
    (-x).exp() * sum
}

/// `Pr(G ≤ x)` for integer shape, summed from the lower side when that is
/// the small one.
pub fn gamma_lower_cdf(shape: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x > shape as f64 {
        return 1.0 - gamma_upper_tail(shape, x);
    }
    // e^{-x} Σ_{n ≥ shape} x^n / n!
    let mut term = (shape as f64 * x.ln() - x - ln_factorial(shape)).exp();
    let mut sum = 0.0;
    let mut n = shape;
    while term > 1e-18 * sum || sum == 0.0 {
        sum += term;
        n += 1;
        term *= x / n as f64;
        if term == 0.0 {
            break;
        }
    }
    sum
}

pub fn poisson_pmf(k: usize, mean: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (k as f64 * mean.ln() - mean - ln_factorial(k)).exp()
}

/// `Pr(K ≥ k)` for `K ~ Poisson(mean)`.
pub fn poisson_upper_tail(k: usize, mean: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if mean == 0.0 {
        return 0.0;
    }
    if mean > k as f64 {
        let head: f64 = (0..k).map(|i| poisson_pmf(i, mean)).sum();
        return (1.0 - head).max(0.0);
    }
    let mut term = poisson_pmf(k, mean);
    let mut sum = 0.0;
    let mut m = k;
    while term > 1e-18 * sum || sum == 0.0 {
        sum += term;
        m += 1;
        term *= mean / m as f64;
        if term == 0.0 {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    const GL5: [(f64, f64); 5] = [
        (-0.906_179_845_938_664, 0.236_926_885_056_189),
        (-0.538_469_310_105_683, 0.478_628_670_499_366),
        (0.0, 0.568_888_888_888_889),
        (0.538_469_310_105_683, 0.478_628_670_499_366),
        (0.906_179_845_938_664, 0.236_926_885_056_189),
    ];

    // Composite Gauss-Legendre oracle; the integrand is smooth on [z1, z2] ⊂ (0, 1).
    fn beta_upper_oracle(a: f64, b: f64, z1: f64, z2: f64) -> f64 {
        let g = |u: f64| u.powf(a - 1.0) * (1.0 - u).powf(b - 1.0);
        let (w_lo, w_hi) = (z1, z2);
        let panels = 4000;
        let h = (w_hi - w_lo) / panels as f64;
        let mut s = 0.0;
        for i in 0..panels {
            let c = w_lo + (i as f64 + 0.5) * h;
            for (x, wt) in GL5 {
                s += wt * g(c + 0.5 * h * x);
            }
        }
        s * 0.5 * h
    }

    #[test]
    fn quadrature_on_polynomials_and_densities() {
        let s = QuadratureSettings::default();
        let v = integrate(|x| x * x, 0.0, 3.0, &s).unwrap();
        assert!((v - 9.0).abs() < 1e-12);
        let lambda = 5e-4;
        let pi = std::f64::consts::PI;
        let v = semi_infinite_integral(
            |y| 2.0 * pi * lambda * y * (-pi * lambda * y * y).exp(),
            envelope_cutoff(lambda),
            &s,
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-10);
        assert_eq!(semi_infinite_integral(|_| 0.0, 10.0, &s).unwrap(), 0.0);
    }

    #[test]
    fn semi_infinite_tail_panels_capture_high_moments() {
        // E[Y^17] of a Rayleigh variable, Γ(1 + 17/2) / (πλ)^{17/2}.
        let lambda = 5e-4;
        let pi = std::f64::consts::PI;
        let s = QuadratureSettings::default().relative_only();
        let v = semi_infinite_integral(
            |y| y.powi(17) * 2.0 * pi * lambda * y * (-pi * lambda * y * y).exp(),
            envelope_cutoff(lambda),
            &s,
        )
        .unwrap();
        let exact = (ln_gamma(9.5) - 8.5 * (pi * lambda).ln()).exp();
        assert!((v / exact - 1.0).abs() < 1e-8, "{v} vs {exact}");
    }

    #[test]
    fn beta_upper_trivial_cases() {
        for z in [0.25, 0.5, 0.9] {
            assert!((beta_upper(1.0, 1.0, z).unwrap() - (1.0 - z)).abs() < 1e-14);
        }
        assert!(beta_upper(2.0, 0.5, 1.0 - 1e-15).unwrap() < 1e-7);
        assert_eq!(beta_upper_tail(2.0, 0.5, 0.0).unwrap(), 0.0);
        assert!(beta_upper(1.0, 1.0, 1.5).is_err());
        assert!(beta_upper(0.0, 1.0, 0.5).is_err());
    }

    // Oracle up to z = 1 after u = 1 - w^{1/b}, which removes the (1-u)^{b-1}
    // singularity; adequate for b ≤ 1.
    fn beta_upper_endpoint_oracle(a: f64, b: f64, z: f64) -> f64 {
        let w_hi = (1.0 - z).powf(b);
        let panels = 4000;
        let h = w_hi / panels as f64;
        let mut s = 0.0;
        for i in 0..panels {
            let c = (i as f64 + 0.5) * h;
            for (x, wt) in GL5 {
                let u = 1.0 - (c + 0.5 * h * x).powf(1.0 / b);
                s += wt * u.powf(a - 1.0) / b;
            }
        }
        s * 0.5 * h
    }

    #[test]
    fn beta_upper_matches_panel_oracle() {
        let a = 1.0 + 2.0 / 4.5;
        let b = 1.0 - 2.0 / 4.5;
        let v = beta_upper(a, b, 0.3).unwrap();
        let oracle = beta_upper_endpoint_oracle(a, b, 0.3);
        assert!((v - oracle).abs() < 1e-10, "{v} vs {oracle}");
    }

    #[test]
    fn beta_upper_near_one_follows_leading_power() {
        // B'(a,b,z) = (1-z)^b / b (1 + O(1-z)).
        let (a, b) = (1.0 + 2.0 / 4.7, 3.0 - 2.0 / 4.7);
        for x in [1e-6, 1e-9, 1e-12] {
            let v = beta_upper_tail(a, b, x).unwrap();
            let lead = x.powf(b) / b;
            assert!((v / lead - 1.0).abs() < 10.0 * x, "x={x}");
        }
    }

    #[test]
    fn beta_upper_additivity_against_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let a = rng.random_range(0.2..3.0);
            let b = rng.random_range(0.2..6.0);
            let z1 = rng.random_range(0.01..0.98);
            let z2 = rng.random_range(z1..0.99);
            let lhs = beta_upper(a, b, z1).unwrap() - beta_upper(a, b, z2).unwrap();
            let rhs = beta_upper_oracle(a, b, z1, z2);
            assert!(
                (lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1e-3),
                "a={a} b={b} z1={z1} z2={z2}: {lhs} vs {rhs}"
            );
        }
    }

    proptest! {
        #[test]
        fn beta_upper_decreasing_in_z(a in 0.1..5.0f64, b in 0.1..8.0f64, z in 0.001..0.99f64, dz in 1e-4..0.009f64) {
            let lo = beta_upper(a, b, z).unwrap();
            let hi = beta_upper(a, b, z + dz).unwrap();
            prop_assert!(hi < lo);
        }
    }

    #[test]
    fn erlang_tail() {
        for x in [0.0, 0.3, 2.0, 9.0] {
            assert!((gamma_upper_tail(1, x) - (-x).exp()).abs() < 1e-15);
        }
        assert_eq!(gamma_upper_tail(5, 0.0), 1.0);
        let v = gamma_upper_tail(3, 2.0);
        assert!((v - 5.0 * (-2.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.676_676_416_183_063_9).abs() < 1e-12);
        for x in [0.01, 0.5, 3.0, 12.0] {
            assert!((gamma_lower_cdf(4, x) + gamma_upper_tail(4, x) - 1.0).abs() < 1e-14);
        }
        // x^M / M! leading behaviour on the small side.
        let tiny = gamma_lower_cdf(8, 1e-3);
        assert!((tiny / (1e-24 / 40320.0) - 1.0).abs() < 2e-3);
    }

    #[test]
    fn poisson_helpers() {
        let total: f64 = (0..60).map(|k| poisson_pmf(k, 3.7)).sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert_eq!(poisson_pmf(0, 0.0), 1.0);
        assert_eq!(poisson_pmf(2, 0.0), 0.0);
        for k in 0..12 {
            for mean in [1e-6, 0.4, 3.0, 20.0] {
                let direct: f64 = (k..200).map(|i| poisson_pmf(i, mean)).sum();
                let v = poisson_upper_tail(k, mean);
                assert!((v - direct).abs() <= 1e-13 * direct.max(1e-300) + 1e-300, "k={k} mean={mean}");
            }
        }
    }
}
