//! Run-parameter resolution: built-in defaults, overridden by a `key = value`
//! config file, overridden by command-line flags. Config keys are the long
//! flag names with '-' replaced by '_'.

use gdkf_core::experiment::{ExperimentConfig, PiXMode, Scenario};
use gdkf_core::gradient::InferenceConfig;
use gdkf_core::model::CMode;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug)]
pub struct ParamError(pub String);

impl std::fmt::Display for ParamError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ParamError {}

type Result<T> = std::result::Result<T, ParamError>;

fn err(msg: impl Into<String>) -> ParamError {
    ParamError(msg.into())
}

/// All tunables a run can carry, before command-specific interpretation.
#[derive(Clone, Debug)]
pub struct Params {
    pub horizon: usize,
    pub dt: f64,
    pub q_std: f64,
    pub r_std: f64,
    pub c_mode: String,
    pub u0: f64,
    pub decay: f64,
    pub seed: u64,
    pub n_steps: Vec<usize>,
    pub eta_mu: Option<f64>,
    pub lr: Option<f64>,
    pub scenario: Option<String>,
    pub pi_x_mode: Option<String>,
    pub jobs: usize,
    /// Which keys were set explicitly (by file or flag) rather than left at
    /// their defaults; used for usage checks like compare's "either --traj
    /// or simulation flags".
    pub explicit: Vec<&'static str>,
}

impl Default for Params {
    fn default() -> Self {
        let exp = ExperimentConfig::default();
        Params {
            horizon: exp.horizon,
            dt: exp.dt,
            q_std: exp.q_std,
            r_std: exp.r_std,
            c_mode: "identity".into(),
            u0: exp.u0,
            decay: exp.decay,
            seed: exp.seed,
            n_steps: vec![exp.inference.n_steps],
            eta_mu: None,
            lr: None,
            scenario: None,
            pi_x_mode: None,
            jobs: 1,
            explicit: Vec::new(),
        }
    }
}

/// Parse a `key = value` file with `#` comments and blank lines.
pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| err(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("{}:{}: expected key = value", path.display(), lineno + 1)))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Keys that configure a run; anything else in a config file is tolerated
/// (run manifests carry informational keys and must be re-ingestable).
const KNOWN_KEYS: &[&str] = &[
    "horizon", "dt", "q_std", "r_std", "c_mode", "u0", "decay", "seed",
    "n_steps", "eta_mu", "lr", "scenario", "pi_x_mode", "jobs",
];
const MANIFEST_ONLY_KEYS: &[&str] = &[
    "tool_version", "command", "duration_ms", "out", "traj",
];

impl Params {
    fn mark(&mut self, key: &'static str) {
        if !self.explicit.contains(&key) {
            self.explicit.push(key);
        }
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let parse_f64 = |v: &str| -> Result<f64> {
            v.parse().map_err(|_| err(format!("{key}: bad number {v:?}")))
        };
        match key {
            "horizon" => {
                self.horizon = value
                    .parse()
                    .map_err(|_| err(format!("horizon: bad count {value:?}")))?;
                self.mark("horizon");
            }
            "dt" => {
                self.dt = parse_f64(value)?;
                self.mark("dt");
            }
            "q_std" => {
                self.q_std = parse_f64(value)?;
                self.mark("q_std");
            }
            "r_std" => {
                self.r_std = parse_f64(value)?;
                self.mark("r_std");
            }
            "c_mode" => {
                self.c_mode = value.to_string();
                self.mark("c_mode");
            }
            "u0" => {
                self.u0 = parse_f64(value)?;
                self.mark("u0");
            }
            "decay" => {
                self.decay = parse_f64(value)?;
                self.mark("decay");
            }
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| err(format!("seed: bad integer {value:?}")))?;
                self.mark("seed");
            }
            "n_steps" => {
                let mut steps = Vec::new();
                for part in value.split(',') {
                    steps.push(
                        part.trim()
                            .parse()
                            .map_err(|_| err(format!("n_steps: bad count {part:?}")))?,
                    );
                }
                if steps.is_empty() {
                    return Err(err("n_steps: empty list"));
                }
                self.n_steps = steps;
                self.mark("n_steps");
            }
            "eta_mu" => {
                if value == "auto" {
                    self.eta_mu = None;
                } else {
                    self.eta_mu = Some(parse_f64(value)?);
                }
                self.mark("eta_mu");
            }
            "lr" => {
                self.lr = Some(parse_f64(value)?);
                self.mark("lr");
            }
            "scenario" => {
                self.scenario = Some(value.to_string());
                self.mark("scenario");
            }
            "pi_x_mode" => {
                self.pi_x_mode = Some(value.to_string());
                self.mark("pi_x_mode");
            }
            "jobs" => {
                self.jobs = value
                    .parse()
                    .map_err(|_| err(format!("jobs: bad count {value:?}")))?;
                self.mark("jobs");
            }
            _ => unreachable!("apply called with unknown key {key}"),
        }
        Ok(())
    }

    /// Layer a config file over the defaults (flags are layered afterwards
    /// by the caller).
    pub fn apply_file(&mut self, map: &BTreeMap<String, String>) -> Result<()> {
        for (key, value) in map {
            if KNOWN_KEYS.contains(&key.as_str()) {
                self.apply(key, value)?;
            } else if !MANIFEST_ONLY_KEYS.contains(&key.as_str()) {
                eprintln!("warning: ignoring unknown config key {key:?}");
            }
        }
        Ok(())
    }

    pub fn set(&mut self, key: &'static str, value: &str) -> Result<()> {
        self.apply(key, value)
    }

    pub fn c_mode(&self) -> Result<CMode> {
        match self.c_mode.as_str() {
            "identity" => Ok(CMode::Identity),
            "random" => Ok(CMode::Random(self.seed)),
            other => Err(err(format!(
                "c_mode must be 'identity' or 'random', got {other:?}"
            ))),
        }
    }

    pub fn scenario(&self) -> Result<Scenario> {
        match self.scenario.as_deref() {
            None | Some("none") => Ok(Scenario::None),
            Some("a") => Ok(Scenario::LearnA),
            Some("b") => Ok(Scenario::LearnB),
            Some("ab") => Ok(Scenario::LearnAB),
            Some("c") => Ok(Scenario::LearnC),
            Some(other) => Err(err(format!(
                "scenario must be one of a, b, ab, c, got {other:?}"
            ))),
        }
    }

    pub fn pi_x_mode(&self) -> Result<Option<PiXMode>> {
        match self.pi_x_mode.as_deref() {
            None => Ok(None),
            Some("analytic") => Ok(Some(PiXMode::Analytic)),
            Some("fixed") => Ok(Some(PiXMode::Fixed)),
            Some(other) => Err(err(format!(
                "pi_x_mode must be 'analytic' or 'fixed', got {other:?}"
            ))),
        }
    }

    /// Build the experiment configuration for one n_steps value.
    pub fn experiment_config(&self, n_steps: usize) -> Result<ExperimentConfig> {
        let scenario = self.scenario()?;
        let mut inference = InferenceConfig {
            n_steps,
            eta_mu: self.eta_mu,
            ..Default::default()
        };
        if let Some(lr) = self.lr {
            match scenario {
                Scenario::LearnA => inference.lr_a = lr,
                Scenario::LearnB => inference.lr_b = lr,
                Scenario::LearnAB => {
                    inference.lr_a = lr;
                    inference.lr_b = lr;
                }
                Scenario::LearnC => inference.lr_c = lr,
                Scenario::None => {}
            }
        }
        Ok(ExperimentConfig {
            horizon: self.horizon,
            dt: self.dt,
            q_std: self.q_std,
            r_std: self.r_std,
            c_mode: self.c_mode()?,
            u0: self.u0,
            decay: self.decay,
            inference,
            scenario,
            pi_x_mode: self.pi_x_mode()?,
            seed: self.seed,
        })
    }

    /// `key = value` lines describing the resolved run; parseable as a
    /// config file, so a manifest reproduces its run.
    pub fn manifest_pairs(&self) -> Vec<(String, String)> {
        let mut pairs = vec![
            ("horizon".to_string(), self.horizon.to_string()),
            ("dt".to_string(), format!("{}", self.dt)),
            ("q_std".to_string(), format!("{}", self.q_std)),
            ("r_std".to_string(), format!("{}", self.r_std)),
            ("c_mode".to_string(), self.c_mode.clone()),
            ("u0".to_string(), format!("{}", self.u0)),
            ("decay".to_string(), format!("{}", self.decay)),
            ("seed".to_string(), self.seed.to_string()),
            (
                "n_steps".to_string(),
                self.n_steps
                    .iter()
                    .map(|n| n.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            (
                "eta_mu".to_string(),
                self.eta_mu.map_or("auto".to_string(), |v| format!("{v}")),
            ),
        ];
        if let Some(lr) = self.lr {
            pairs.push(("lr".to_string(), format!("{lr}")));
        }
        if let Some(s) = &self.scenario {
            pairs.push(("scenario".to_string(), s.clone()));
        }
        if let Some(p) = &self.pi_x_mode {
            pairs.push(("pi_x_mode".to_string(), p.clone()));
        }
        if self.jobs != 1 {
            pairs.push(("jobs".to_string(), self.jobs.to_string()));
        }
        pairs
    }

    pub fn any_simulation_key_explicit(&self) -> bool {
        const SIM_KEYS: &[&str] = &[
            "horizon", "dt", "q_std", "r_std", "c_mode", "u0", "decay", "seed",
        ];
        self.explicit.iter().any(|k| SIM_KEYS.contains(k))
    }
}
