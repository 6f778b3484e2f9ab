//! WebAssembly bindings for the static page in `www/`. Every entry point
//! takes plain numbers and returns a JSON string; the page parses it.

use hetnet_in::analysis::Analyzer;
use hetnet_in::asymptotics::AsymptoticModel;
use hetnet_in::geometry::TierStats;
use hetnet_in::in_scheme::{is_potential_in, request_radius};
use hetnet_in::montecarlo::{trial_rng, Simulator};
use hetnet_in::netconfig::db_to_linear;
use hetnet_in::{InParams, NetworkConfig, QuadratureSettings, SimMode, Tier};
use serde::Serialize;
use wasm_bindgen::prelude::*;

type Out = Result<String, String>;

fn network(n1: usize, n2: usize, power_ratio_db: f64) -> Result<NetworkConfig, String> {
    let cfg = NetworkConfig {
        n1,
        n2,
        p1: db_to_linear(power_ratio_db),
        p2: 1.0,
        ..NetworkConfig::fig2()
    };
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn params(u: usize, t1: f64, t2: f64, cfg: &NetworkConfig) -> Result<InParams, String> {
    if u == 0 {
        return Ok(InParams::NON_IN);
    }
    InParams::new(u, t1, t2, cfg).map_err(|e| e.to_string())
}

fn stats(cfg: &NetworkConfig) -> Result<TierStats, String> {
    TierStats::new(cfg, &QuadratureSettings::default()).map_err(|e| e.to_string())
}

fn to_json<T: Serialize>(v: &T) -> Out {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct ThresholdPoint {
    t_db: f64,
    s: f64,
    s1: f64,
    s2: f64,
    p_c: f64,
}

#[derive(Serialize)]
struct ThresholdCurve {
    non_in: f64,
    points: Vec<ThresholdPoint>,
}

/// Coverage at SIR threshold `beta_db` against T₁ = T₂ swept over
/// `[0, t_max_db]` dB in `points` steps.
pub fn threshold_curve(n1: usize, n2: usize, power_ratio_db: f64, u: usize, beta_db: f64, t_max_db: f64, points: usize) -> Out {
    let cfg = network(n1, n2, power_ratio_db)?;
    let st = stats(&cfg)?;
    let beta = db_to_linear(beta_db);
    let s_at = |p: &InParams| -> Result<(f64, f64, f64, f64), String> {
        let a = Analyzer::with_stats(&cfg, p, &st).map_err(|e| e.to_string())?;
        let r = a.coverage_overall(beta).map_err(|e| e.to_string())?;
        Ok((r.s, r.s1, r.s2, a.summary().p_c))
    };
    let non_in = s_at(&InParams::NON_IN)?.0;
    let points = points.clamp(2, 200);
    let mut out = Vec::with_capacity(points);
    for i in 0..points {
        let t_db = t_max_db * i as f64 / (points - 1) as f64;
        let t = db_to_linear(t_db);
        let p = if t_db == 0.0 { InParams::NON_IN } else { params(u, t, t, &cfg)? };
        let (s, s1, s2, p_c) = s_at(&p)?;
        out.push(ThresholdPoint { t_db, s, s1, s2, p_c });
    }
    to_json(&ThresholdCurve { non_in, points: out })
}

#[derive(Serialize)]
struct OutagePoint {
    beta: f64,
    outage: f64,
    asymptote: f64,
}

#[derive(Serialize)]
struct OutageCurve {
    d: usize,
    b: f64,
    u_star: Option<usize>,
    points: Vec<OutagePoint>,
}

/// Outage and its `b β^d` asymptote on a log grid of `points` thresholds.
#[allow(clippy::too_many_arguments)]
pub fn outage_curve(
    n1: usize,
    n2: usize,
    power_ratio_db: f64,
    u: usize,
    t1: f64,
    t2: f64,
    beta_db_min: f64,
    beta_db_max: f64,
    points: usize,
) -> Out {
    let cfg = network(n1, n2, power_ratio_db)?;
    let p = params(u, t1, t2, &cfg)?;
    let st = stats(&cfg)?;
    let analyzer = Analyzer::with_stats(&cfg, &p, &st).map_err(|e| e.to_string())?;
    let model = AsymptoticModel::with_stats(&cfg, &st);
    let asym = model.asymptotic(&p).map_err(|e| e.to_string())?;
    let u_star = if t1 > 1.0 && t2 > 1.0 {
        Some(model.optimal_u(t1, t2).map_err(|e| e.to_string())?.u_star)
    } else {
        None
    };
    let points = points.clamp(2, 200);
    let mut out = Vec::with_capacity(points);
    for i in 0..points {
        let b_db = beta_db_min + (beta_db_max - beta_db_min) * i as f64 / (points - 1) as f64;
        let beta = db_to_linear(b_db);
        let outage = analyzer.outage_overall(beta).map_err(|e| e.to_string())?.o;
        out.push(OutagePoint {
            beta,
            outage,
            asymptote: asym.b * beta.powi(asym.d as i32),
        });
    }
    to_json(&OutageCurve { d: asym.d, b: asym.b, u_star, points: out })
}

#[derive(Serialize)]
struct Snapshot {
    radius: f64,
    macro_bs: Vec<[f64; 2]>,
    pico_bs: Vec<[f64; 2]>,
    users: Vec<[f64; 3]>,
    serving: [f64; 2],
    serving_tier: u8,
    requested: Vec<usize>,
    nulled: usize,
    sir_db: f64,
}

/// One network draw within `radius` metres of the typical user, with the
/// macro BSs it asks to null and the resulting SIR.
#[allow(clippy::too_many_arguments)]
pub fn network_snapshot(n1: usize, n2: usize, power_ratio_db: f64, u: usize, t1: f64, t2: f64, seed: u64, radius: f64) -> Out {
    let cfg = network(n1, n2, power_ratio_db)?;
    let p = params(u, t1, t2, &cfg)?;
    let st = stats(&cfg)?;
    let sim = Simulator::new(&cfg, &st, SimMode::Approx, 25.0);
    let mut rng = trial_rng(seed, 0);
    let (r, _) = sim.realize(&mut rng).map_err(|e| e.to_string())?;
    let out = r.typical_outcome(&cfg, &p, &mut rng);
    let inside = |q: &hetnet_in::geometry::Point| q.norm() <= radius;
    let xy = |q: &hetnet_in::geometry::Point| [q.x, q.y];

    let t = &r.typical;
    let reach = request_radius(t.tier, t.serving_distance, &cfg, &p);
    let requested = (0..r.macro_bs.len())
        .filter(|&l| {
            let d = r.macro_bs.points[l].norm();
            let serving = t.tier == Tier::Macro && t.serving_index == l;
            u > 0 && !serving && d < reach && is_potential_in(t, d, &cfg, &p)
        })
        .collect();
    let serving = match t.tier {
        Tier::Macro => r.macro_bs.points[t.serving_index],
        Tier::Pico => r.pico_bs.points[t.serving_index],
    };
    // Indices refer to the unfiltered macro list, so it is sent whole.
    to_json(&Snapshot {
        radius,
        macro_bs: r.macro_bs.points.iter().map(xy).collect(),
        pico_bs: r.pico_bs.points.iter().filter(|q| inside(q)).map(xy).collect(),
        users: r
            .users
            .iter()
            .filter(|s| inside(&s.location))
            .map(|s| [s.location.x, s.location.y, s.association.tier.number() as f64])
            .collect(),
        serving: xy(&serving),
        serving_tier: t.tier.number(),
        requested,
        nulled: out.nulled,
        sir_db: 10.0 * out.sir.log10(),
    })
}

#[wasm_bindgen(js_name = thresholdCurve)]
pub fn threshold_curve_js(n1: usize, n2: usize, power_ratio_db: f64, u: usize, beta_db: f64, t_max_db: f64, points: usize) -> Result<String, JsError> {
    threshold_curve(n1, n2, power_ratio_db, u, beta_db, t_max_db, points).map_err(|e| JsError::new(&e))
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen(js_name = outageCurve)]
pub fn outage_curve_js(
    n1: usize,
    n2: usize,
    power_ratio_db: f64,
    u: usize,
    t1: f64,
    t2: f64,
    beta_db_min: f64,
    beta_db_max: f64,
    points: usize,
) -> Result<String, JsError> {
    outage_curve(n1, n2, power_ratio_db, u, t1, t2, beta_db_min, beta_db_max, points).map_err(|e| JsError::new(&e))
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen(js_name = networkSnapshot)]
pub fn network_snapshot_js(n1: usize, n2: usize, power_ratio_db: f64, u: usize, t1: f64, t2: f64, seed: u64, radius: f64) -> Result<String, JsError> {
    network_snapshot(n1, n2, power_ratio_db, u, t1, t2, seed, radius).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn threshold_curve_starts_at_non_in() {
        let v: Value = serde_json::from_str(&threshold_curve(10, 8, 15.0, 9, 10.0, 20.0, 5).unwrap()).unwrap();
        let pts = v["points"].as_array().unwrap();
        assert_eq!(pts.len(), 5);
        assert!((pts[0]["s"].as_f64().unwrap() - v["non_in"].as_f64().unwrap()).abs() < 1e-12);
        assert!(pts.iter().all(|p| (0.0..=1.0).contains(&p["s"].as_f64().unwrap())));
    }

    #[test]
    fn outage_curve_tracks_asymptote() {
        let v: Value = serde_json::from_str(&outage_curve(10, 8, 15.0, 2, 10.0, 10.0, -50.0, -30.0, 3).unwrap()).unwrap();
        assert_eq!(v["d"], 8);
        let first = &v["points"][0];
        let ratio = first["outage"].as_f64().unwrap() / first["asymptote"].as_f64().unwrap();
        assert!((ratio - 1.0).abs() < 0.1, "{ratio}");
        assert!(matches!(v["u_star"].as_u64(), Some(1 | 2)));
    }

    #[test]
    fn snapshot_is_reproducible() {
        let a = network_snapshot(10, 8, 15.0, 9, 10.0, 10.0, 3, 250.0).unwrap();
        assert_eq!(a, network_snapshot(10, 8, 15.0, 9, 10.0, 10.0, 3, 250.0).unwrap());
        let v: Value = serde_json::from_str(&a).unwrap();
        assert!(v["nulled"].as_u64().unwrap() <= v["requested"].as_array().unwrap().len() as u64);
        assert!(v["sir_db"].as_f64().unwrap().is_finite());
    }

    #[test]
    fn invalid_inputs_are_errors() {
        assert!(threshold_curve(8, 8, 15.0, 1, 10.0, 20.0, 5).is_err());
        assert!(outage_curve(10, 8, 15.0, 10, 10.0, 10.0, -50.0, -30.0, 3).is_err());
        assert!(outage_curve(10, 8, 15.0, 3, 1.0, 1.0, -50.0, -30.0, 3).is_err());
    }
}
