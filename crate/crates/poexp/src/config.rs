//! Scenario files (TOML).
//!
//! Sequences are either a bare number (constant) or a table
//! `{ prefix = [..], tail = { kind = "...", .. } }` with tail kinds
//! `constant`, `affine`, `quadratic`, `harmonic`, `periodic` and `rational`.
//! Jump laws are a bare number (deterministic) or `{ values, probs }`;
//! jump schedules are a law or `{ prefix = [laws], tail = [laws] }`.

use std::path::Path;

use poexp_core::market::MarketScenario;
use poexp_core::poexp::PoExpParams;
use poexp_core::sequence::{IntensitySequence, Sequence, TailRule};
use poexp_core::telegraph::{JumpLaw, JumpSchedule, PatternParams, State};
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error("missing section [{0}]")]
    Missing(&'static str),
}

fn field_err(field: impl Into<String>, e: impl ToString) -> ConfigError {
    ConfigError::Field {
        field: field.into(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub pattern0: Option<PatternSpec>,
    pub pattern1: Option<PatternSpec>,
    pub market: Option<MarketSpec>,
    #[serde(default)]
    pub simulation: SimulationSpec,
    pub esscher: Option<EsscherSpec>,
    pub distribution: Option<DistributionSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SeqSpec {
    Constant(f64),
    Full {
        #[serde(default)]
        prefix: Vec<f64>,
        tail: TailSpec,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TailSpec {
    Constant { value: f64 },
    Affine { a: f64, b: f64 },
    Quadratic { a: f64 },
    Harmonic { a: f64 },
    Periodic { values: Vec<f64> },
    Rational { num: Vec<f64>, den: Vec<f64> },
}

impl SeqSpec {
    pub fn build(&self, field: &str) -> Result<Sequence, ConfigError> {
        match self {
            SeqSpec::Constant(v) => Ok(Sequence::constant(*v)),
            SeqSpec::Full { prefix, tail } => {
                let tail = match tail {
                    TailSpec::Constant { value } => TailRule::constant(*value),
                    TailSpec::Affine { a, b } => TailRule::affine(*a, *b),
                    TailSpec::Quadratic { a } => TailRule::quadratic(*a),
                    TailSpec::Harmonic { a } => TailRule::harmonic(*a),
                    TailSpec::Periodic { values } => {
                        TailRule::periodic(values).map_err(|e| field_err(field, e))?
                    }
                    TailSpec::Rational { num, den } => TailRule::rational(num.clone(), den.clone())
                        .map_err(|e| field_err(field, e))?,
                };
                Ok(Sequence::new(prefix.clone(), tail))
            }
        }
    }

    pub fn intensity(&self, field: &str) -> Result<IntensitySequence, ConfigError> {
        IntensitySequence::new(self.build(field)?).map_err(|e| field_err(field, e))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum LawSpec {
    Deterministic(f64),
    Discrete { values: Vec<f64>, probs: Vec<f64> },
}

impl LawSpec {
    fn build(&self, field: &str) -> Result<JumpLaw, ConfigError> {
        match self {
            LawSpec::Deterministic(v) => Ok(JumpLaw::deterministic(*v)),
            LawSpec::Discrete { values, probs } => {
                JumpLaw::discrete(values.clone(), probs.clone()).map_err(|e| field_err(field, e))
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ScheduleSpec {
    Law(LawSpec),
    Full {
        #[serde(default)]
        prefix: Vec<LawSpec>,
        tail: Vec<LawSpec>,
    },
}

impl ScheduleSpec {
    fn build(&self, field: &str) -> Result<JumpSchedule, ConfigError> {
        match self {
            ScheduleSpec::Law(l) => Ok(JumpSchedule::constant(l.build(field)?)),
            ScheduleSpec::Full { prefix, tail } => {
                let build = |v: &[LawSpec]| {
                    v.iter()
                        .map(|l| l.build(field))
                        .collect::<Result<Vec<_>, _>>()
                };
                JumpSchedule::new(build(prefix)?, build(tail)?).map_err(|e| field_err(field, e))
            }
        }
    }
}

fn zero_schedule() -> ScheduleSpec {
    ScheduleSpec::Law(LawSpec::Deterministic(0.0))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternSpec {
    pub c: SeqSpec,
    #[serde(default = "zero_schedule")]
    pub r: ScheduleSpec,
    #[serde(default = "zero_schedule", rename = "R")]
    pub big_r: ScheduleSpec,
    pub mu: SeqSpec,
    pub lambda: SeqSpec,
}

impl PatternSpec {
    pub fn build(&self, name: &str) -> Result<PatternParams, ConfigError> {
        Ok(PatternParams {
            c: self.c.build(&format!("{name}.c"))?,
            shock_jumps: self.r.build(&format!("{name}.r"))?,
            switch_jumps: self.big_r.build(&format!("{name}.R"))?,
            mu: self.mu.intensity(&format!("{name}.mu"))?,
            lambda: self.lambda.intensity(&format!("{name}.lambda"))?,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSpec {
    #[serde(default)]
    pub y0: f64,
    #[serde(default)]
    pub y1: f64,
    #[serde(rename = "S0", alias = "s0")]
    pub s0: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default)]
    pub seed: u64,
    pub step: Option<f64>,
    #[serde(default)]
    pub initial_state: u8,
    /// Times at which summaries are reported.
    pub times: Option<Vec<f64>>,
    /// Paths whose events go into the event CSV.
    #[serde(default = "default_record")]
    pub record_paths: usize,
}

fn default_horizon() -> f64 {
    2.0
}

fn default_paths() -> usize {
    10_000
}

fn default_record() -> usize {
    5
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            horizon: default_horizon(),
            n_paths: default_paths(),
            seed: 0,
            step: None,
            initial_state: 0,
            times: None,
            record_paths: default_record(),
        }
    }
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(field_err("simulation.horizon", "must be finite and > 0"));
        }
        if self.n_paths < 2 {
            return Err(field_err("simulation.n_paths", "must be at least 2"));
        }
        if self.step.is_some_and(|h| !(h > 0.0)) {
            return Err(field_err("simulation.step", "must be > 0"));
        }
        if self.initial_state > 1 {
            return Err(field_err("simulation.initial_state", "must be 0 or 1"));
        }
        if let Some(ts) = &self.times {
            if ts.iter().any(|t| !(*t > 0.0 && *t <= self.horizon)) {
                return Err(field_err(
                    "simulation.times",
                    "every time must lie in (0, horizon]",
                ));
            }
        }
        Ok(())
    }

    pub fn initial(&self) -> State {
        State::from_index(self.initial_state as usize)
    }

    /// Reporting times: configured, else the default grid clipped to the horizon.
    pub fn report_times(&self) -> Vec<f64> {
        match &self.times {
            Some(ts) => ts.clone(),
            None => {
                let mut ts: Vec<f64> = [0.5, 1.0, 2.0]
                    .into_iter()
                    .filter(|&t| t < self.horizon)
                    .collect();
                ts.push(self.horizon);
                ts
            }
        }
    }

    pub fn step_or_default(&self) -> f64 {
        self.step.unwrap_or(1e-2 * self.horizon)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EsscherSpec {
    pub r_star0: Option<SeqSpec>,
    pub r_star1: Option<SeqSpec>,
    #[serde(rename = "R_star0")]
    pub big_r_star0: Option<SeqSpec>,
    #[serde(rename = "R_star1")]
    pub big_r_star1: Option<SeqSpec>,
    /// Largest shock count checked in the measure-change tables.
    #[serde(default = "default_n_max")]
    pub n_max: usize,
}

fn default_n_max() -> usize {
    3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSpec {
    pub lambda: SeqSpec,
    pub mu: SeqSpec,
    #[serde(default)]
    pub t_start: f64,
    #[serde(default = "default_t_stop")]
    pub t_stop: f64,
    #[serde(default = "default_t_step")]
    pub t_step: f64,
    /// Joint columns `P{T > t, N(t) = n}` for `n ≤ joint_n`.
    #[serde(default = "default_n_max")]
    pub joint_n: usize,
    #[serde(default = "default_moments")]
    pub moments: u32,
}

fn default_t_stop() -> f64 {
    5.0
}

fn default_t_step() -> f64 {
    0.05
}

fn default_moments() -> u32 {
    2
}

impl DistributionSpec {
    pub fn params(&self) -> Result<PoExpParams, ConfigError> {
        Ok(PoExpParams::new(
            self.lambda.intensity("distribution.lambda")?,
            self.mu.intensity("distribution.mu")?,
        ))
    }

    pub fn times(&self) -> Result<Vec<f64>, ConfigError> {
        if !(self.t_step > 0.0 && self.t_start >= 0.0 && self.t_stop >= self.t_start) {
            return Err(field_err(
                "distribution",
                "need t_step > 0 and 0 <= t_start <= t_stop",
            ));
        }
        let count = ((self.t_stop - self.t_start) / self.t_step + 1e-9).floor() as usize;
        Ok((0..=count)
            .map(|k| self.t_start + k as f64 * self.t_step)
            .collect())
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.simulation.validate()?;
        // build everything once so errors surface at load time
        if cfg.pattern0.is_some() || cfg.pattern1.is_some() {
            cfg.patterns()?;
        }
        if cfg.market.is_some() {
            cfg.scenario()?;
        }
        if let Some(d) = &cfg.distribution {
            d.params()?;
            d.times()?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn patterns(&self) -> Result<[PatternParams; 2], ConfigError> {
        let p0 = self
            .pattern0
            .as_ref()
            .ok_or(ConfigError::Missing("pattern0"))?;
        let p1 = self
            .pattern1
            .as_ref()
            .ok_or(ConfigError::Missing("pattern1"))?;
        Ok([p0.build("pattern0")?, p1.build("pattern1")?])
    }

    pub fn scenario(&self) -> Result<MarketScenario, ConfigError> {
        let m = self.market.as_ref().ok_or(ConfigError::Missing("market"))?;
        MarketScenario::new(self.patterns()?, [m.y0, m.y1], m.s0)
            .map_err(|e| field_err("market", e))
    }

    /// `r*` per pattern (zero when not given).
    pub fn r_star(&self) -> Result<[Sequence; 2], ConfigError> {
        let e = self.esscher.as_ref();
        let get = |s: Option<&SeqSpec>, f: &str| s.map_or(Ok(Sequence::zero()), |s| s.build(f));
        Ok([
            get(e.and_then(|e| e.r_star0.as_ref()), "esscher.r_star0")?,
            get(e.and_then(|e| e.r_star1.as_ref()), "esscher.r_star1")?,
        ])
    }

    /// `R*` per pattern when both are given.
    pub fn big_r_star(&self) -> Result<Option<[Sequence; 2]>, ConfigError> {
        let Some(e) = &self.esscher else {
            return Ok(None);
        };
        match (&e.big_r_star0, &e.big_r_star1) {
            (Some(a), Some(b)) => Ok(Some([
                a.build("esscher.R_star0")?,
                b.build("esscher.R_star1")?,
            ])),
            (None, None) => Ok(None),
            _ => Err(field_err(
                "esscher",
                "give both R_star0 and R_star1 or neither",
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG1: &str = r#"
[pattern0]
c = { tail = { kind = "periodic", values = [0.5, 2.0] } }
lambda = 1.5
mu = { tail = { kind = "affine", a = 1.0, b = 1.0 } }

[pattern1]
c = { tail = { kind = "periodic", values = [-1.0, -3.0] } }
r = { values = [-0.1, 0.1], probs = [0.5, 0.5] }
R = { prefix = [0.2], tail = [0.0] }
lambda = 1.5
mu = { tail = { kind = "affine", a = 1.0, b = 1.0 } }

[simulation]
horizon = 2.0
seed = 7
"#;

    #[test]
    fn parses_patterns() {
        let cfg = ScenarioConfig::parse(FIG1).unwrap();
        let [p0, p1] = cfg.patterns().unwrap();
        assert_eq!(p0.c.term(1), 2.0);
        assert_eq!(p0.mu.term(3), 4.0);
        assert_eq!(p1.shock_jumps.law(5).support(), vec![-0.1, 0.1]);
        assert_eq!(p1.switch_jumps.law(0).mean(), 0.2);
        assert_eq!(p1.switch_jumps.law(1).mean(), 0.0);
        assert_eq!(cfg.simulation.report_times(), vec![0.5, 1.0, 2.0]);
    }

    #[test]
    fn reports_field_of_bad_intensity() {
        let bad = FIG1.replace(
            "lambda = 1.5\nmu = { tail = { kind = \"affine\", a = 1.0, b = 1.0 } }\n\n[simulation]",
            "lambda = -1.0\nmu = 1.0\n\n[simulation]",
        );
        let err = ScenarioConfig::parse(&bad).unwrap_err().to_string();
        assert!(err.starts_with("pattern1.lambda"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let err = ScenarioConfig::parse("[pattern0]\nc = [1.0,\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line"), "{err}");
        let err = ScenarioConfig::parse("[simulation]\nhorizn = 1.0\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("horizn"), "{err}");
    }
}
