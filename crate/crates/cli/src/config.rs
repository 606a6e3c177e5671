//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are ignored.
//! Keys mirror the field names of the scenario and tracker configurations,
//! prefixed with `scenario.`, `tracker.` or `model.`. Run-level keys are
//! `mode`, `runs`, `base_seed` and `out_dir`. Missing keys keep their
//! defaults; unknown or repeated keys are errors.
//!
//! Value syntax: numbers as usual, a position as `x,y`, a position list as
//! `x,y; x,y; ...`, a range as `lo,hi`.

use std::fmt::{self, Write as _};
use std::path::PathBuf;

use ptrack_core::factors::ModelParams;
use ptrack_core::scenario::{paper_scenario, ScenarioConfig};
use ptrack_core::tracker::{TrackerConfig, TrackerMode};
use ptrack_core::Position;

use crate::error::CliError;

/// Everything one batch needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub tracker: TrackerConfig,
    pub mode: TrackerMode,
    pub runs: usize,
    pub base_seed: u64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: paper_scenario(),
            tracker: TrackerConfig::default(),
            mode: TrackerMode::Full,
            runs: 1000,
            base_seed: 1,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.runs == 0 {
            return Err(CliError::Config("runs must be >= 1".into()));
        }
        self.scenario.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.tracker.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    /// Parses a config file body on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| CliError::Config(format!("line {}: {msg}", lineno + 1));
            let (key, value) =
                line.split_once('=').ok_or_else(|| err(format!("expected 'key = value', got '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key '{key}'")));
            }
            cfg.set(key, value).map_err(err)?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        let sc = &mut self.scenario;
        let tr = &mut self.tracker;
        match key {
            "mode" => self.mode = v.parse().map_err(|e: ptrack_core::Error| e.to_string())?,
            "runs" => self.runs = num(v)?,
            "base_seed" => self.base_seed = num(v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),

            "scenario.tx_position" => sc.tx_position = position(v)?,
            "scenario.static_scatterers" => sc.static_scatterers = positions(v)?,
            "scenario.target_waypoints" => sc.target_waypoints = positions(v)?,
            "scenario.target_speed" => sc.target_speed = num(v)?,
            "scenario.rx_waypoints" => sc.rx_waypoints = positions(v)?,
            "scenario.rx_speed" => sc.rx_speed = num(v)?,
            "scenario.n_steps" => sc.n_steps = num(v)?,
            "scenario.sigma_d_gen" => sc.sigma_d_gen = num(v)?,
            "scenario.sigma_theta_gen" => sc.sigma_theta_gen = num(v)?,
            "scenario.p_detect" => sc.p_detect = num(v)?,
            "scenario.mu_fa" => sc.mu_fa = num(v)?,
            "scenario.fa_d_range" => sc.fa_d_range = range(v)?,
            "scenario.fa_theta_range" => sc.fa_theta_range = range(v)?,

            "tracker.num_particles" => tr.num_particles = num(v)?,
            "tracker.p_exist_threshold" => tr.p_exist_threshold = num(v)?,
            "tracker.p_prune_threshold" => tr.p_prune_threshold = num(v)?,
            "tracker.assoc_tol" => tr.assoc_tol = num(v)?,
            "tracker.assoc_max_iter" => tr.assoc_max_iter = num(v)?,
            "tracker.lambda_undetected_init" => tr.lambda_undetected_init = num(v)?,
            "tracker.lambda_birth" => tr.lambda_birth = num(v)?,
            "tracker.tx_range_max" => tr.tx_range_max = num(v)?,
            "tracker.bootstrap_std_threshold" => tr.bootstrap_std_threshold = num(v)?,

            "model.p_survival" => tr.model.p_survival = num(v)?,
            "model.p_detect" => tr.model.p_detect = num(v)?,
            "model.mu_fa" => tr.model.mu_fa = num(v)?,
            "model.sigma_d_lik" => tr.model.sigma_d_lik = num(v)?,
            "model.sigma_theta_lik" => tr.model.sigma_theta_lik = num(v)?,
            "model.sigma_tx_walk" => tr.model.sigma_tx_walk = num(v)?,
            "model.sigma_ps_walk" => tr.model.sigma_ps_walk = num(v)?,
            "model.fa_d_range" => tr.model.fa_d_range = range(v)?,
            "model.fa_theta_range" => tr.model.fa_theta_range = range(v)?,

            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }
}

fn num<T: std::str::FromStr>(v: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse().map_err(|e| format!("invalid number '{v}': {e}"))
}

fn pair(v: &str) -> Result<[f64; 2], String> {
    let (a, b) = v.split_once(',').ok_or_else(|| format!("expected 'a,b', got '{v}'"))?;
    Ok([num(a.trim())?, num(b.trim())?])
}

fn position(v: &str) -> Result<Position, String> {
    pair(v).map(Position::from)
}

fn range(v: &str) -> Result<[f64; 2], String> {
    pair(v)
}

fn positions(v: &str) -> Result<Vec<Position>, String> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(';').map(|p| position(p.trim())).collect()
}

fn fmt_position(p: Position) -> String {
    format!("{},{}", p.x, p.y)
}

fn fmt_positions(ps: &[Position]) -> String {
    ps.iter().map(|p| fmt_position(*p)).collect::<Vec<_>>().join("; ")
}

fn fmt_range(r: [f64; 2]) -> String {
    format!("{},{}", r[0], r[1])
}

impl fmt::Display for RunConfig {
    /// Renders every key; [`RunConfig::parse`] reads it back unchanged.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sc = &self.scenario;
        let tr = &self.tracker;
        let m: &ModelParams = &tr.model;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}");

        kv("mode", self.mode.to_string())?;
        kv("runs", self.runs.to_string())?;
        kv("base_seed", self.base_seed.to_string())?;
        kv("out_dir", self.out_dir.display().to_string())?;

        kv("scenario.tx_position", fmt_position(sc.tx_position))?;
        kv("scenario.static_scatterers", fmt_positions(&sc.static_scatterers))?;
        kv("scenario.target_waypoints", fmt_positions(&sc.target_waypoints))?;
        kv("scenario.target_speed", sc.target_speed.to_string())?;
        kv("scenario.rx_waypoints", fmt_positions(&sc.rx_waypoints))?;
        kv("scenario.rx_speed", sc.rx_speed.to_string())?;
        kv("scenario.n_steps", sc.n_steps.to_string())?;
        kv("scenario.sigma_d_gen", sc.sigma_d_gen.to_string())?;
        kv("scenario.sigma_theta_gen", sc.sigma_theta_gen.to_string())?;
        kv("scenario.p_detect", sc.p_detect.to_string())?;
        kv("scenario.mu_fa", sc.mu_fa.to_string())?;
        kv("scenario.fa_d_range", fmt_range(sc.fa_d_range))?;
        kv("scenario.fa_theta_range", fmt_range(sc.fa_theta_range))?;

        kv("tracker.num_particles", tr.num_particles.to_string())?;
        kv("tracker.p_exist_threshold", tr.p_exist_threshold.to_string())?;
        kv("tracker.p_prune_threshold", tr.p_prune_threshold.to_string())?;
        kv("tracker.assoc_tol", tr.assoc_tol.to_string())?;
        kv("tracker.assoc_max_iter", tr.assoc_max_iter.to_string())?;
        kv("tracker.lambda_undetected_init", tr.lambda_undetected_init.to_string())?;
        kv("tracker.lambda_birth", tr.lambda_birth.to_string())?;
        kv("tracker.tx_range_max", tr.tx_range_max.to_string())?;
        kv("tracker.bootstrap_std_threshold", tr.bootstrap_std_threshold.to_string())?;

        kv("model.p_survival", m.p_survival.to_string())?;
        kv("model.p_detect", m.p_detect.to_string())?;
        kv("model.mu_fa", m.mu_fa.to_string())?;
        kv("model.sigma_d_lik", m.sigma_d_lik.to_string())?;
        kv("model.sigma_theta_lik", m.sigma_theta_lik.to_string())?;
        kv("model.sigma_tx_walk", m.sigma_tx_walk.to_string())?;
        kv("model.sigma_ps_walk", m.sigma_ps_walk.to_string())?;
        kv("model.fa_d_range", fmt_range(m.fa_d_range))?;
        kv("model.fa_theta_range", fmt_range(m.fa_theta_range))?;
        f.write_str(&s)
    }
}
