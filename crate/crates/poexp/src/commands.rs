//! The four subcommands. Each reads a [`ScenarioConfig`], writes CSV files
//! into the output directory and returns a short report for stdout.

use std::path::PathBuf;

use poexp_core::kernel::SeriesControl;
use poexp_core::market::{
    construct_martingale_measure, detect_arbitrage, esscher_derive, martingale_residual,
    EsscherParams, SupportCase,
};
use poexp_core::poexp::{fallback_point, moment, Evaluator, Method, Moment};
use poexp_core::telegraph::{solve_mean_equations, EventKind, ProcessPath, State};
use poexp_core::Error;

use crate::config::{ConfigError, ScenarioConfig};
use crate::mc::{
    self, discounted_stock_mean, empirical_mean, run_paths, verify_measure_change, Estimate,
};
use crate::output::{fmt_e, write_text, Table};

/// Shock counts checked directly by the arbitrage and martingale tests.
pub const N_CHECK: usize = 50;
/// Agreement threshold for Monte Carlo checks, in standard errors.
pub const VERIFY_SE: f64 = 4.0;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("numeric failure: {0}")]
    Numeric(#[from] Error),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Verification(_) => 5,
        }
    }
}

/// Command-line overrides of the `[simulation]` section.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub horizon: Option<f64>,
    pub step: Option<f64>,
    pub threads: Option<usize>,
}

impl RunOptions {
    fn apply(&self, cfg: &mut ScenarioConfig) -> Result<(), CliError> {
        let sim = &mut cfg.simulation;
        if let Some(s) = self.seed {
            sim.seed = s;
        }
        if let Some(n) = self.paths {
            sim.n_paths = n;
        }
        if let Some(h) = self.horizon {
            sim.horizon = h;
        }
        if let Some(h) = self.step {
            sim.step = Some(h);
        }
        sim.validate()?;
        std::fs::create_dir_all(&self.out)?;
        Ok(())
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Series => "series",
        Method::Fallback => "fallback",
    }
}

/// Survivor, density and joint laws on a grid, plus a moments table.
pub fn cmd_dist(mut cfg: ScenarioConfig, opts: &RunOptions) -> Result<String, CliError> {
    opts.apply(&mut cfg)?;
    let spec = cfg
        .distribution
        .as_ref()
        .ok_or(ConfigError::Missing("distribution"))?;
    let params = spec.params()?;
    let times = spec.times()?;
    let control = SeriesControl::default();
    let eval = Evaluator::new(params.clone(), &control);
    let series = eval.series();

    let mut header = vec![
        "t".to_string(),
        "survivor_series".into(),
        "survivor_fallback".into(),
        "density".into(),
        "method".into(),
    ];
    header.extend((0..=spec.joint_n).map(|n| format!("joint_{n}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = Table::create(&opts.out, "dist.csv", &header)?;
    for &t in &times {
        let s_series = series.map_or(f64::NAN, |s| s.eval(t, 0).0);
        let fallback = fallback_point(&params, t)?;
        let method = if eval.from_series(t, 0).is_some() {
            Method::Series
        } else {
            Method::Fallback
        };
        let dens = if t == 0.0 {
            fallback.density
        } else {
            eval.from_series(t, 1).unwrap_or(fallback.density)
        };
        let mut row = vec![
            fmt_e(t),
            fmt_e(s_series),
            fmt_e(fallback.survivor),
            fmt_e(dens),
        ];
        row.push(method_name(method).into());
        row.extend(
            (0..=spec.joint_n).map(|n| fmt_e(fallback.joint.get(n).copied().unwrap_or(0.0))),
        );
        table.row(&row)?;
    }
    let dist = table.finish()?;

    let mut table = Table::create(&opts.out, "moments.csv", &["m", "value"])?;
    for m in 1..=spec.moments {
        let v = match moment(&params, m)? {
            Moment::Finite(v) => v,
            Moment::Infinite => f64::INFINITY,
        };
        table.row([m.to_string(), fmt_e(v)])?;
    }
    let moments = table.finish()?;
    Ok(format!(
        "wrote {} and {}\n",
        dist.display(),
        moments.display()
    ))
}

fn kind_name(k: EventKind) -> &'static str {
    match k {
        EventKind::Shock => "shock",
        EventKind::Switch => "switch",
    }
}

fn event_rows(index: usize, path: &ProcessPath) -> Vec<[String; 6]> {
    let first = &path.segments[0];
    let mut rows = vec![[
        index.to_string(),
        fmt_e(0.0),
        "start".into(),
        fmt_e(0.0),
        first.state.index().to_string(),
        fmt_e(first.slope),
    ]];
    for (k, e) in path.events.iter().enumerate() {
        let after = &path.segments[k + 1];
        rows.push([
            index.to_string(),
            fmt_e(e.time),
            kind_name(e.kind).into(),
            fmt_e(e.size),
            after.state.index().to_string(),
            fmt_e(after.slope),
        ]);
    }
    rows
}

/// Event log of the first few paths and mean/SE of `X` at the report times.
pub fn cmd_simulate(mut cfg: ScenarioConfig, opts: &RunOptions) -> Result<String, CliError> {
    opts.apply(&mut cfg)?;
    let patterns = cfg.patterns()?;
    let sim = &cfg.simulation;
    let times = sim.report_times();
    let record = sim.record_paths;
    let results = run_paths(sim.n_paths, sim.seed, opts.threads, |i, rng| {
        match poexp_core::telegraph::simulate_path(
            &patterns,
            sim.initial(),
            sim.horizon,
            mc::PATH_EVENT_CAP,
            rng,
        ) {
            Ok(p) => Ok((p.values_at(&times), (i < record).then(|| event_rows(i, &p)))),
            Err(e) => Err(e),
        }
    });

    let mut events = Table::create(
        &opts.out,
        "events.csv",
        &["path", "time", "kind", "size", "state", "slope"],
    )?;
    let mut values = Vec::with_capacity(results.len());
    let mut capped = 0usize;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok((v, rows)) => {
                for row in rows.into_iter().flatten() {
                    events.row(&row)?;
                }
                values.push(v);
            }
            Err(Error::ExplosionCap { .. }) => {
                capped += 1;
                events.row([
                    i.to_string(),
                    "nan".into(),
                    "explosion_cap".into(),
                    "nan".into(),
                    String::new(),
                    "nan".into(),
                ])?;
            }
            Err(e) => return Err(e.into()),
        }
    }
    let events = events.finish()?;

    let mut summary = Table::create(
        &opts.out,
        "summary.csv",
        &["t", "mean", "se", "n_paths", "capped"],
    )?;
    for (j, &t) in times.iter().enumerate() {
        let e = Estimate::from_samples(values.iter().map(|v| v[j]));
        summary.row([
            fmt_e(t),
            fmt_e(e.mean),
            fmt_e(e.se),
            e.n.to_string(),
            capped.to_string(),
        ])?;
    }
    let summary = summary.finish()?;
    Ok(format!(
        "wrote {} and {}\n",
        events.display(),
        summary.display()
    ))
}

/// Volterra solution against Monte Carlo means for both initial states.
pub fn cmd_mean(mut cfg: ScenarioConfig, opts: &RunOptions) -> Result<String, CliError> {
    opts.apply(&mut cfg)?;
    let patterns = cfg.patterns()?;
    let sim = &cfg.simulation;
    let times = sim.report_times();
    let grid = solve_mean_equations(
        &patterns,
        sim.horizon,
        sim.step_or_default(),
        &SeriesControl::default(),
    )?;
    let mc0 = empirical_mean(
        &patterns,
        State::Zero,
        &times,
        sim.n_paths,
        sim.seed,
        opts.threads,
    )?;
    let mc1 = empirical_mean(
        &patterns,
        State::One,
        &times,
        sim.n_paths,
        sim.seed.wrapping_add(1),
        opts.threads,
    )?;

    let mut table = Table::create(
        &opts.out,
        "mean.csv",
        &[
            "t",
            "M0_solver",
            "M1_solver",
            "M0_mc",
            "M1_mc",
            "SE0",
            "SE1",
        ],
    )?;
    for (j, &t) in times.iter().enumerate() {
        table.row([
            fmt_e(t),
            fmt_e(grid.at(State::Zero, t)),
            fmt_e(grid.at(State::One, t)),
            fmt_e(mc0[j].mean),
            fmt_e(mc1[j].mean),
            fmt_e(mc0[j].se),
            fmt_e(mc1[j].se),
        ])?;
    }
    let path = table.finish()?;
    Ok(format!("wrote {}\n", path.display()))
}

fn case_name(c: SupportCase) -> &'static str {
    match c {
        SupportCase::Falling => "falling",
        SupportCase::Rising => "rising",
    }
}

fn is_martingale_measure(cfg: &ScenarioConfig, esscher: &EsscherParams) -> Result<bool, CliError> {
    let scenario = cfg.scenario()?;
    Ok([State::Zero, State::One].into_iter().all(|s| {
        (0..=N_CHECK).all(|n| martingale_residual(&scenario, esscher, s, n).abs() < 1e-12)
    }))
}

/// Arbitrage report, then (when a measure is available) the three-way
/// measure-change check and the discounted-price martingale check.
pub fn cmd_market(mut cfg: ScenarioConfig, opts: &RunOptions) -> Result<String, CliError> {
    opts.apply(&mut cfg)?;
    let scenario = cfg.scenario()?;
    let sim = &cfg.simulation;
    let times = sim.report_times();
    let mut report = String::new();

    let arb = detect_arbitrage(&scenario, N_CHECK);
    let mut table = Table::create(&opts.out, "arbitrage.csv", &["state", "n", "case"])?;
    for v in &arb.violations {
        table.row([
            v.state.index().to_string(),
            v.n.to_string(),
            case_name(v.case).into(),
        ])?;
    }
    table.finish()?;

    let esscher = match cfg.big_r_star()? {
        Some(big_r) => Some(esscher_derive(&scenario, cfg.r_star()?, big_r)?),
        None if arb.arbitrage_free => Some(
            construct_martingale_measure(&scenario, cfg.r_star()?)
                .map_err(|e| CliError::Verification(format!("no martingale measure: {e}")))?,
        ),
        None => None,
    };
    let verdict = if arb.arbitrage_free {
        "arbitrage-free"
    } else {
        "arbitrage"
    };
    write_text(&opts.out, "verdict.txt", &format!("{verdict}\n"))?;
    report.push_str(&format!("verdict: {verdict}\n"));
    let Some(esscher) = esscher else {
        return Ok(report);
    };

    let n_max = cfg.esscher.as_ref().map_or(3, |e| e.n_max);
    let check = verify_measure_change(
        &scenario,
        &esscher,
        sim.initial(),
        &times,
        n_max,
        sim.n_paths,
        sim.seed,
        opts.threads,
    )?;
    let mut table = Table::create(
        &opts.out,
        "esscher.csv",
        &[
            "t",
            "n",
            "reweighted",
            "reweighted_se",
            "analytic",
            "direct",
            "direct_se",
            "discrepancy_se",
        ],
    )?;
    for r in &check.rows {
        table.row([
            fmt_e(r.t),
            r.n.to_string(),
            fmt_e(r.reweighted.mean),
            fmt_e(r.reweighted.se),
            fmt_e(r.analytic),
            fmt_e(r.direct.mean),
            fmt_e(r.direct.se),
            fmt_e(r.discrepancy),
        ])?;
    }
    table.finish()?;
    let mut table = Table::create(&opts.out, "density.csv", &["t", "z_mean", "z_se"])?;
    let mut worst_z: f64 = 0.0;
    for (t, e) in times.iter().zip(&check.density_mean) {
        worst_z = worst_z.max(e.z_score(1.0));
        table.row([fmt_e(*t), fmt_e(e.mean), fmt_e(e.se)])?;
    }
    table.finish()?;
    report.push_str(&format!(
        "measure change: max discrepancy {:.2} SE, E Z(t) within {:.2} SE of 1\n",
        check.max_discrepancy, worst_z
    ));
    let mut failures = Vec::new();
    if check.max_discrepancy > VERIFY_SE {
        failures.push(format!(
            "joint survivors differ by {:.2} SE",
            check.max_discrepancy
        ));
    }
    if worst_z > VERIFY_SE {
        failures.push(format!("E Z(t) is {worst_z:.2} SE from 1"));
    }

    if is_martingale_measure(&cfg, &esscher)? {
        let means = discounted_stock_mean(
            &scenario,
            &esscher,
            sim.initial(),
            &times,
            sim.n_paths,
            sim.seed.wrapping_add(2),
            opts.threads,
        )?;
        let mut table = Table::create(
            &opts.out,
            "martingale.csv",
            &["t", "discounted_mean", "se", "S0"],
        )?;
        let mut worst: f64 = 0.0;
        for (t, e) in times.iter().zip(&means) {
            worst = worst.max(e.z_score(scenario.s0()));
            table.row([fmt_e(*t), fmt_e(e.mean), fmt_e(e.se), fmt_e(scenario.s0())])?;
        }
        table.finish()?;
        report.push_str(&format!("discounted price within {worst:.2} SE of S0\n"));
        if worst > VERIFY_SE {
            failures.push(format!("discounted price is {worst:.2} SE from S0"));
        }
    }
    if failures.is_empty() {
        Ok(report)
    } else {
        Err(CliError::Verification(failures.join("; ")))
    }
}
