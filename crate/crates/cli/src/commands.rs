use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use hetnet_in::analysis::Analyzer;
use hetnet_in::asymptotics::{optimal_u_order, AsymptoticModel};
use hetnet_in::geometry::TierStats;
use hetnet_in::montecarlo::Simulator;
use hetnet_in::netconfig::{db_to_linear, parse_config};
use hetnet_in::{ConfigBundle, ConfigError, EngineSettings, Error, InParams, NetworkConfig, SimMode};
use serde_json::json;

use crate::grid::{parse_grid, parse_int_grid, GridError};
use crate::plot;
use crate::{Base, Beta, Figure, MonteCarlo};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Invariant(m) => write!(f, "internal invariant: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(c) => CliError::Config(c.to_string()),
            Error::Numeric(n) => CliError::Numeric(n.to_string()),
            Error::Invariant(m) => CliError::Invariant(m),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        CliError::Config(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn sci(x: f64) -> String {
    format!("{x:.8e}")
}

fn load_bundle(base: &Base) -> Result<ConfigBundle> {
    match &base.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            Ok(parse_config(&text)?)
        }
        None => Ok(ConfigBundle {
            network: NetworkConfig::fig2(),
            params: InParams::NON_IN,
            engine: EngineSettings::default(),
        }),
    }
}

fn single_u(base: &Base, default: usize) -> Result<usize> {
    match &base.u_max {
        None => Ok(default),
        Some(text) => match parse_int_grid(text)?[..] {
            [u] => Ok(u),
            _ => Err(CliError::Config("--u-max takes a single value here".into())),
        },
    }
}

fn thresholds(base: &Base, bundle: &ConfigBundle) -> Result<(f64, f64)> {
    let (mut t1, mut t2) = (bundle.params.t1, bundle.params.t2);
    if let Some(text) = &base.t_joint {
        match parse_grid(text)?[..] {
            [t] => (t1, t2) = (t, t),
            _ => return Err(CliError::Config("--t-joint takes a single value here".into())),
        }
    }
    if let Some(t) = base.t1 {
        t1 = t;
    }
    if let Some(t) = base.t2 {
        t2 = t;
    }
    Ok((t1, t2))
}

/// The single parameter point described by the config and the flags.
fn params(base: &Base, bundle: &ConfigBundle) -> Result<InParams> {
    let u_max = single_u(base, bundle.params.u_max)?;
    let (t1, t2) = thresholds(base, bundle)?;
    Ok(InParams::new(u_max, t1, t2, &bundle.network)?)
}

/// Parameter points of a T₁ = T₂ sweep; T = 1 is the non-IN network.
fn t_sweep(base: &Base, bundle: &ConfigBundle, default_u: usize, default_t: &str) -> Result<Vec<InParams>> {
    if base.t1.is_some() || base.t2.is_some() {
        return Err(CliError::Config("use --t-joint for threshold sweeps".into()));
    }
    let u_max = single_u(base, default_u)?;
    parse_grid(base.t_joint.as_deref().unwrap_or(default_t))?
        .into_iter()
        .map(|t| {
            if t == 1.0 {
                Ok(InParams::NON_IN)
            } else {
                Ok(InParams::new(u_max, t, t, &bundle.network)?)
            }
        })
        .collect()
}

fn betas_db(beta: &Beta, default: &str) -> Result<Vec<f64>> {
    Ok(parse_grid(beta.beta_db.as_deref().unwrap_or(default))?)
}

fn engine(bundle: &ConfigBundle, mc: &MonteCarlo) -> Result<EngineSettings> {
    let mut e = bundle.engine;
    if let Some(t) = mc.trials {
        if t == 0 {
            return Err(CliError::Config("--trials must be at least 1".into()));
        }
        e.trials = t;
    }
    if let Some(s) = mc.seed {
        e.seed = s;
    }
    if let Some(m) = &mc.mode {
        e.mode = m.parse::<SimMode>()?;
    }
    Ok(e)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn stats(bundle: &ConfigBundle) -> Result<TierStats> {
    Ok(TierStats::new(&bundle.network, &bundle.engine.quadrature)?)
}

fn check_probability(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && (-1e-9..=1.0 + 1e-9).contains(&v) {
        Ok(v)
    } else {
        Err(CliError::Invariant(format!("{name} = {v} is not a probability")))
    }
}

pub fn coverage(base: &Base, beta: &Beta) -> Result<()> {
    let bundle = load_bundle(base)?;
    let p = params(base, &bundle)?;
    let analyzer = Analyzer::with_stats(&bundle.network, &p, &stats(&bundle)?)?;
    let mut text = String::new();
    for b_db in betas_db(beta, "10")? {
        let r = analyzer.coverage_overall(db_to_linear(b_db))?;
        for (name, v) in [("s1", r.s1), ("s2", r.s2), ("s", r.s)] {
            check_probability(name, v)?;
        }
        let row = json!({
            "beta_db": b_db,
            "a1": r.a1,
            "a2": r.a2,
            "s1": r.s1,
            "s2": r.s2,
            "s": r.s,
            "mode": if p.is_non_in() { "non-IN" } else { "IN" },
            "u_max": p.u_max,
            "t1": p.t1,
            "t2": p.t2,
        });
        writeln!(text, "{row}").expect("string write");
    }
    emit(base.out.as_deref(), &text)
}

fn simulator(bundle: &ConfigBundle, engine: &EngineSettings, stats: &TierStats) -> Simulator {
    Simulator::new(&bundle.network, stats, engine.mode, engine.window_factor)
}

pub fn simulate(base: &Base, beta: &Beta, mc: &MonteCarlo) -> Result<()> {
    let bundle = load_bundle(base)?;
    let p = params(base, &bundle)?;
    let e = engine(&bundle, mc)?;
    let grid = betas_db(beta, "10")?;
    let linear: Vec<f64> = grid.iter().map(|&b| db_to_linear(b)).collect();
    let sweep = simulator(&bundle, &e, &stats(&bundle)?).sweep(&[p], &linear, e.trials, e.seed)?;
    let mut text = String::from("beta_db,s_mc,ci95\n");
    for (b_db, est) in grid.iter().zip(&sweep.estimates[0]) {
        writeln!(text, "{},{},{}", sci(*b_db), sci(est.mean), sci(est.ci_halfwidth_95)).expect("string write");
    }
    emit(base.out.as_deref(), &text)
}

pub fn compare(base: &Base, beta: &Beta, mc: &MonteCarlo) -> Result<()> {
    let bundle = load_bundle(base)?;
    let swept = base.t_joint.as_deref().is_some_and(|t| parse_grid(t).map(|g| g.len() > 1).unwrap_or(true));
    let points = if swept {
        t_sweep(base, &bundle, bundle.params.u_max, "1")?
    } else {
        vec![params(base, &bundle)?]
    };
    let e = engine(&bundle, mc)?;
    let st = stats(&bundle)?;
    let grid = betas_db(beta, "10")?;
    let linear: Vec<f64> = grid.iter().map(|&b| db_to_linear(b)).collect();
    let sweep = simulator(&bundle, &e, &st).sweep(&points, &linear, e.trials, e.seed)?;
    let mut text = String::from(if swept { "t_joint," } else { "" });
    text.push_str("beta_db,s_analytical,s1,s2,s_mc,ci95,rel_gap\n");
    for (p, row) in points.iter().zip(&sweep.estimates) {
        let analyzer = Analyzer::with_stats(&bundle.network, p, &st)?;
        for ((b_db, &b), est) in grid.iter().zip(&linear).zip(row) {
            let r = analyzer.coverage_overall(b)?;
            let gap = (r.s - est.mean).abs() / r.s;
            if swept {
                write!(text, "{},", sci(p.t1)).expect("string write");
            }
            writeln!(
                text,
                "{},{},{},{},{},{},{}",
                sci(*b_db),
                sci(r.s),
                sci(r.s1),
                sci(r.s2),
                sci(est.mean),
                sci(est.ci_halfwidth_95),
                sci(gap)
            )
            .expect("string write");
        }
    }
    emit(base.out.as_deref(), &text)
}

fn join_set(set: &[usize]) -> String {
    set.iter().map(|u| u.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn asymptotic(base: &Base) -> Result<()> {
    let bundle = load_bundle(base)?;
    let cfg = bundle.network;
    let (t1, t2) = thresholds(base, &bundle)?;
    let us = match &base.u_max {
        Some(text) => parse_int_grid(text)?,
        None => (0..cfg.n1).collect(),
    };
    let model = AsymptoticModel::with_stats(&cfg, &stats(&bundle)?);
    let order_set = optimal_u_order(&cfg);
    let in_thresholds = t1 > 1.0 && t2 > 1.0;
    let u_star = if in_thresholds { Some(model.optimal_u(t1, t2)?.u_star) } else { None };
    let mut text = String::from("u,d,b1,b2,b,u_star_d,u_star\n");
    for u in us {
        let p = if u == 0 {
            InParams::NON_IN
        } else {
            InParams::new(u, t1, t2, &cfg)?
        };
        let r = model.asymptotic(&p)?;
        writeln!(
            text,
            "{u},{},{},{},{},{},{}",
            r.d,
            sci(r.b1),
            sci(r.b2),
            sci(r.b),
            join_set(&order_set),
            u_star.map(|v| v.to_string()).unwrap_or_default()
        )
        .expect("string write");
    }
    emit(base.out.as_deref(), &text)
}

pub fn optimal_u(base: &Base) -> Result<()> {
    let bundle = load_bundle(base)?;
    let cfg = bundle.network;
    let (t1, t2) = thresholds(base, &bundle)?;
    if !(t1 > 1.0 && t2 > 1.0) {
        return Err(CliError::Config("optimal-u needs T1, T2 > 1 (--t1/--t2 or --t-joint)".into()));
    }
    let r = AsymptoticModel::with_stats(&cfg, &stats(&bundle)?).optimal_u(t1, t2)?;
    let doc = json!({
        "t1": t1,
        "t2": t2,
        "u_star_d": optimal_u_order(&cfg),
        "u_star": r.u_star,
        "below": r.below,
        "at_boundary": r.at_boundary,
    });
    emit(base.out.as_deref(), &format!("{doc}\n"))
}

// (U, T1, T2) series of the outage figure.
const FIG2B_SERIES: [(usize, f64, f64); 5] = [(0, 1.0, 1.0), (2, 10.0, 10.0), (2, 5.0, 20.0), (9, 10.0, 10.0), (9, 5.0, 20.0)];

pub fn plotdata(figure: Figure, base: &Base, beta: &Beta, mc: &MonteCarlo) -> Result<()> {
    let bundle = load_bundle(base)?;
    let dir = base.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    let st = stats(&bundle)?;
    let (name, csv) = match figure {
        Figure::Fig2a => {
            let points = t_sweep(base, &bundle, 9, "1,1.5,2,3,5,7,10,15,20,30,50")?;
            let e = engine(&bundle, mc)?;
            let grid = betas_db(beta, "10")?;
            let linear: Vec<f64> = grid.iter().map(|&b| db_to_linear(b)).collect();
            let sweep = simulator(&bundle, &e, &st).sweep(&points, &linear, e.trials, e.seed)?;
            let base_an = Analyzer::with_stats(&bundle.network, &InParams::NON_IN, &st)?;
            let mut text = String::from("beta_db,t_joint,s_analytical,s_non_in,s_mc,ci95\n");
            for (p, row) in points.iter().zip(&sweep.estimates) {
                let analyzer = Analyzer::with_stats(&bundle.network, p, &st)?;
                for ((b_db, &b), est) in grid.iter().zip(&linear).zip(row) {
                    writeln!(
                        text,
                        "{},{},{},{},{},{}",
                        sci(*b_db),
                        sci(p.t1),
                        sci(analyzer.coverage_overall(b)?.s),
                        sci(base_an.coverage_overall(b)?.s),
                        sci(est.mean),
                        sci(est.ci_halfwidth_95)
                    )
                    .expect("string write");
                }
            }
            ("fig2a", text)
        }
        Figure::Fig2b => {
            let grid = betas_db(beta, "-50:-10:2.5")?;
            let model = AsymptoticModel::with_stats(&bundle.network, &st);
            let mut text = String::from("u_max,t1,t2,beta_db,outage,outage_asymptotic\n");
            for (u, t1, t2) in FIG2B_SERIES {
                if u >= bundle.network.n1 {
                    continue;
                }
                let p = if u == 0 { InParams::NON_IN } else { InParams::new(u, t1, t2, &bundle.network)? };
                let analyzer = Analyzer::with_stats(&bundle.network, &p, &st)?;
                for &b_db in &grid {
                    let b = db_to_linear(b_db);
                    let o = analyzer.outage_overall(b)?.o;
                    let (_, asym) = model.asymptotic_outage(b, &p)?;
                    writeln!(text, "{u},{},{},{},{},{}", sci(t1), sci(t2), sci(b_db), sci(o), sci(asym))
                        .expect("string write");
                }
            }
            ("fig2b", text)
        }
    };
    let csv_path = dir.join(format!("{name}.csv"));
    emit(Some(&csv_path), &csv)?;
    emit(Some(&dir.join(format!("{name}.py"))), &plot::script(figure, &format!("{name}.csv"), &format!("{name}.png")))?;
    println!("{}", csv_path.display());
    Ok(())
}
