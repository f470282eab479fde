//! Path-parallel Monte Carlo.
//!
//! Path `i` always draws from `path_stream(seed, i)` and results are
//! collected in path order, so every estimate is the same for any number
//! of worker threads.

use poexp_core::market::{simulate_market_path, EsscherParams, MarketScenario};
use poexp_core::poexp::joint_survivor_vector;
use poexp_core::rng::{path_stream, PathRng};
use poexp_core::telegraph::{simulate_path, EventKind, PatternParams, ProcessPath, State};
use poexp_core::{CompensatedSum, Error, Result};
use rayon::prelude::*;

/// Events allowed per path before it is reported as exploding.
pub const PATH_EVENT_CAP: usize = 1_000_000;

/// Runs `f(i, stream_i)` for `i < n` and returns the results in order.
/// `threads = None` uses rayon's global pool.
pub fn run_paths<T, F>(n: usize, seed: u64, threads: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut PathRng) -> T + Sync + Send,
{
    let job = || {
        (0..n)
            .into_par_iter()
            .map(|i| f(i, &mut path_stream(seed, i as u64)))
            .collect()
    };
    match threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .expect("thread pool")
            .install(job),
        None => job(),
    }
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples<I: IntoIterator<Item = f64>>(xs: I) -> Self {
        let xs: Vec<f64> = xs.into_iter().collect();
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                se: f64::NAN,
                n,
            };
        }
        let mean = xs.iter().copied().collect::<CompensatedSum>().value() / n as f64;
        if n < 2 {
            return Self {
                mean,
                se: f64::NAN,
                n,
            };
        }
        let ss = xs
            .iter()
            .map(|x| (x - mean) * (x - mean))
            .collect::<CompensatedSum>()
            .value();
        let se = (ss / (n - 1) as f64 / n as f64).sqrt();
        Self { mean, se, n }
    }

    /// `|mean - target|` in standard errors; zero SE counts only exact hits.
    pub fn z_score(&self, target: f64) -> f64 {
        z(self.mean - target, self.se)
    }
}

fn z(diff: f64, se: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else if se > 0.0 {
        diff.abs() / se
    } else {
        f64::INFINITY
    }
}

fn simulate(
    patterns: &[PatternParams; 2],
    initial: State,
    horizon: f64,
    rng: &mut PathRng,
) -> Result<ProcessPath> {
    simulate_path(patterns, initial, horizon, PATH_EVENT_CAP, rng)
}

/// Mean and SE of `X(t)` for each `t` in `times`.
pub fn empirical_mean(
    patterns: &[PatternParams; 2],
    initial: State,
    times: &[f64],
    n_paths: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<Vec<Estimate>> {
    if n_paths < 2 {
        return Err(Error::InvalidParameter(
            "empirical mean needs at least two paths".into(),
        ));
    }
    let horizon = horizon_of(times)?;
    let values = run_paths(n_paths, seed, threads, |_, rng| {
        simulate(patterns, initial, horizon, rng).map(|p| p.values_at(times))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(columns(&values, times.len()))
}

fn horizon_of(times: &[f64]) -> Result<f64> {
    let h = times.iter().copied().fold(0.0, f64::max);
    if h > 0.0 && times.iter().all(|t| *t >= 0.0) {
        Ok(h)
    } else {
        Err(Error::InvalidParameter(
            "time grid needs a positive time and no negative times".into(),
        ))
    }
}

fn columns(rows: &[Vec<f64>], k: usize) -> Vec<Estimate> {
    (0..k)
        .map(|j| Estimate::from_samples(rows.iter().map(|r| r[j])))
        .collect()
}

/// `1{T_1 > t, N(t) = n}` on a path started at time 0.
pub fn first_epoch_indicator(path: &ProcessPath, t: f64, n: usize) -> bool {
    if path.first_switch().is_some_and(|s| s <= t) {
        return false;
    }
    path.events
        .iter()
        .take_while(|e| e.time <= t && e.kind == EventKind::Shock)
        .count()
        == n
}

/// One `(t, n)` cell of the measure-change check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureRow {
    pub t: f64,
    pub n: usize,
    /// `E_ℙ[Z(t) 1{T_1 > t, N(t) = n}]`.
    pub reweighted: Estimate,
    /// `Λ*_n a_n(t; λ* + μ*)`.
    pub analytic: f64,
    /// Same indicator simulated directly with `λ*`, `μ*`.
    pub direct: Estimate,
    /// Largest pairwise gap in standard errors.
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureReport {
    pub rows: Vec<MeasureRow>,
    /// `E_ℙ Z(t)` per time.
    pub density_mean: Vec<Estimate>,
    pub max_discrepancy: f64,
}

/// Compares reweighted, analytic and directly simulated joint survivors of
/// the first holding time for `n ≤ n_max`, and checks `E Z(t) = 1`.
#[allow(clippy::too_many_arguments)]
pub fn verify_measure_change(
    scenario: &MarketScenario,
    esscher: &EsscherParams,
    initial: State,
    times: &[f64],
    n_max: usize,
    n_paths: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<MeasureReport> {
    let horizon = horizon_of(times)?;
    let starred = esscher.transformed(scenario);
    let cells: Vec<(f64, usize)> = times
        .iter()
        .flat_map(|&t| (0..=n_max).map(move |n| (t, n)))
        .collect();

    let under_p = run_paths(
        n_paths,
        seed,
        threads,
        |_, rng| -> Result<(Vec<f64>, Vec<f64>)> {
            let path = simulate(scenario.patterns(), initial, horizon, rng)?;
            let z: Vec<f64> = times
                .iter()
                .map(|&t| esscher.log_density_at(&path, t).exp())
                .collect();
            let weighted = cells
                .iter()
                .map(|&(t, n)| {
                    let j = times
                        .iter()
                        .position(|&s| s == t)
                        .expect("cell time on grid");
                    if first_epoch_indicator(&path, t, n) {
                        z[j]
                    } else {
                        0.0
                    }
                })
                .collect();
            Ok((z, weighted))
        },
    )
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    // same streams as the reweighted run
    let under_star = run_paths(n_paths, seed, threads, |_, rng| -> Result<Vec<f64>> {
        let path = simulate(&starred, initial, horizon, rng)?;
        Ok(cells
            .iter()
            .map(|&(t, n)| f64::from(u8::from(first_epoch_indicator(&path, t, n))))
            .collect())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let z_rows: Vec<Vec<f64>> = under_p.iter().map(|r| r.0.clone()).collect();
    let w_rows: Vec<Vec<f64>> = under_p.into_iter().map(|r| r.1).collect();
    let reweighted = columns(&w_rows, cells.len());
    let direct = columns(&under_star, cells.len());
    let i = initial.index();
    let law = poexp_core::poexp::PoExpParams::new(
        esscher.lambda_star[i].clone(),
        esscher.mu_star[i].clone(),
    );

    let mut rows = Vec::with_capacity(cells.len());
    let mut max_discrepancy: f64 = 0.0;
    for (k, &(t, n)) in cells.iter().enumerate() {
        let analytic = joint_survivor_vector(&law, t)?
            .get(n)
            .copied()
            .unwrap_or(0.0);
        let (a, c) = (reweighted[k], direct[k]);
        let discrepancy = a
            .z_score(analytic)
            .max(c.z_score(analytic))
            .max(z(a.mean - c.mean, (a.se * a.se + c.se * c.se).sqrt()));
        max_discrepancy = max_discrepancy.max(discrepancy);
        rows.push(MeasureRow {
            t,
            n,
            reweighted: a,
            analytic,
            direct: c,
            discrepancy,
        });
    }
    Ok(MeasureReport {
        rows,
        density_mean: columns(&z_rows, times.len()),
        max_discrepancy,
    })
}

/// Mean and SE of the discounted stock `S(t)/B(t)` with the intensities
/// replaced by `λ*`, `μ*`.
pub fn discounted_stock_mean(
    scenario: &MarketScenario,
    esscher: &EsscherParams,
    initial: State,
    times: &[f64],
    n_paths: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<Vec<Estimate>> {
    let horizon = horizon_of(times)?;
    let starred = MarketScenario::new(
        esscher.transformed(scenario),
        scenario.rates(),
        scenario.s0(),
    )?;
    let rows = run_paths(n_paths, seed, threads, |_, rng| {
        simulate_market_path(&starred, initial, horizon, PATH_EVENT_CAP, rng).map(|mp| {
            times
                .iter()
                .map(|&t| mp.discounted_at(t))
                .collect::<Vec<f64>>()
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(columns(&rows, times.len()))
}
