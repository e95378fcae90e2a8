//! Run configuration: a line-based `key = value` file with `[section]`
//! headers.
//!
//! Sections are `sim`, `env`, `train`, `ppo`, `apf`, `pid` and `eval`. Every
//! key has a default, unknown keys are errors, and `#` starts a comment. Any
//! key can be overridden from the environment as `MARL_<SECTION>_<KEY>`,
//! for example `MARL_PPO_TOTAL_TIMESTEPS=200000`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};
use sha2::{Digest, Sha256};

use crate::baseline::{ApfParams, BaselineParams, PidGains};
use crate::env::{EnvConfig, PlatformSpec};
use crate::error::{Error, Result};
use crate::eval::{EvalSetup, Scenario};
use crate::ppo::{PpoConfig, TrainSetup};
use crate::sim::SimParams;

pub const ENV_PREFIX: &str = "MARL_";

/// Training platform distribution, flattened for the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainPlatform {
    /// `randomized`, `static-floor`, `static-elevated`, `moving` or `linear`.
    pub platform: String,
    pub moving_fraction: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    /// Used by `static-elevated`.
    pub height: f64,
    /// Used by `moving` and `linear`.
    pub speed: f64,
}

impl Default for TrainPlatform {
    fn default() -> Self {
        Self {
            platform: "randomized".into(),
            moving_fraction: 0.3,
            speed_min: 0.2,
            speed_max: 0.5,
            height: 0.5,
            speed: 0.3,
        }
    }
}

impl TrainPlatform {
    pub fn spec(&self) -> Result<PlatformSpec> {
        Ok(match self.platform.as_str() {
            "randomized" => {
                if !(0.0..=1.0).contains(&self.moving_fraction) || self.speed_min > self.speed_max {
                    return Err(Error::Config(
                        "moving_fraction must lie in [0, 1] and speed_min <= speed_max".into(),
                    ));
                }
                PlatformSpec::Randomized {
                    moving_fraction: self.moving_fraction,
                    speed_min: self.speed_min,
                    speed_max: self.speed_max,
                }
            }
            "static-floor" => PlatformSpec::StaticFloor,
            "static-elevated" => PlatformSpec::StaticElevated { height: self.height },
            "moving" => PlatformSpec::ArcSweep { speed: self.speed },
            "linear" => PlatformSpec::Linear { speed: self.speed },
            other => return Err(Error::Config(format!("unknown training platform `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PidSection {
    pub k_p: f64,
    pub k_i: f64,
    pub k_d: f64,
    pub integral_limit: f64,
    pub hover_height: f64,
}

impl Default for PidSection {
    fn default() -> Self {
        let g = PidGains::default();
        Self {
            k_p: g.k_p,
            k_i: g.k_i,
            k_d: g.k_d,
            integral_limit: g.integral_limit,
            hover_height: BaselineParams::default().hover_height,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSection {
    pub scenario: String,
    /// 0 selects the scenario's default count.
    pub episodes: usize,
    pub seed: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            scenario: "static-floor".into(),
            episodes: 0,
            seed: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub sim: SimParams,
    pub env: EnvConfig,
    pub train: TrainPlatform,
    pub ppo: PpoConfig,
    pub apf: ApfParams,
    pub pid: PidSection,
    pub eval: EvalSection,
}

/// Distance-shaping gain of the desk preset.
pub const DESK_ALPHA: f64 = 30.0;

impl Default for RunConfig {
    /// Desk-scale preset: 2 x 2 x 2 m world, one million steps, 8 envs,
    /// distance shaping gain 30.
    fn default() -> Self {
        Self {
            sim: SimParams {
                world_half_extent: 1.0,
                ..Default::default()
            },
            env: EnvConfig {
                alpha: DESK_ALPHA,
                ..Default::default()
            },
            train: TrainPlatform::default(),
            ppo: PpoConfig::default(),
            apf: ApfParams::default(),
            pid: PidSection::default(),
            eval: EvalSection::default(),
        }
    }
}

const SECTIONS: [&str; 7] = ["sim", "env", "train", "ppo", "apf", "pid", "eval"];

fn section_name(s: &str) -> Option<&'static str> {
    SECTIONS.iter().copied().find(|&n| n == s)
}

fn parse_like(template: &Value, raw: &str) -> Option<Value> {
    match template {
        Value::Bool(_) => raw.parse::<bool>().ok().map(Value::Bool),
        Value::String(_) => {
            let s = raw
                .strip_prefix('"')
                .and_then(|r| r.strip_suffix('"'))
                .unwrap_or(raw);
            Some(Value::String(s.to_string()))
        }
        Value::Number(n) if n.is_u64() => raw.parse::<u64>().ok().or_else(|| {
            let f = raw.parse::<f64>().ok()?;
            (f >= 0.0 && f.fract() == 0.0 && f <= u64::MAX as f64).then_some(f as u64)
        })
        .map(|v| Value::Number(v.into())),
        Value::Number(_) => raw
            .parse::<f64>()
            .ok()
            .and_then(Number::from_f64)
            .map(Value::Number),
        _ => None,
    }
}

fn render(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) if n.is_f64() => format!("{:?}", n.as_f64().unwrap_or(0.0)),
        other => other.to_string(),
    }
}

impl RunConfig {
    /// Full-length schedule.
    pub fn full_scale() -> Self {
        Self {
            ppo: PpoConfig::full_scale(),
            ..Default::default()
        }
    }

    fn tree(&self) -> Map<String, Value> {
        match serde_json::to_value(self) {
            Ok(Value::Object(m)) => m,
            _ => unreachable!("config serializes to an object"),
        }
    }

    fn set(tree: &mut Map<String, Value>, section: &str, key: &str, raw: &str, line: usize) -> Result<()> {
        let full = format!("{section}.{key}");
        let slot = tree
            .get_mut(section)
            .and_then(|s| s.as_object_mut())
            .and_then(|s| s.get_mut(key))
            .ok_or_else(|| Error::UnknownKey(full.clone()))?;
        *slot = parse_like(slot, raw).ok_or_else(|| Error::Parse {
            line,
            msg: format!("cannot parse `{raw}` for `{full}`"),
        })?;
        Ok(())
    }

    fn from_tree(tree: Map<String, Value>) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_value(Value::Object(tree))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses config text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tree = Self::default().tree();
        let mut section: Option<&str> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.split('#').next().unwrap_or("").trim();
            if s.is_empty() {
                continue;
            }
            if let Some(name) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                let name = name.trim();
                section = Some(section_name(name).ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("unknown section `[{name}]`"),
                })?);
                continue;
            }
            let (k, v) = s.split_once('=').ok_or_else(|| Error::Parse {
                line,
                msg: format!("expected `key = value`, found `{s}`"),
            })?;
            let sec = section.ok_or_else(|| Error::Parse {
                line,
                msg: "key outside of any section".into(),
            })?;
            Self::set(&mut tree, sec, k.trim(), v.trim(), line)?;
        }
        Self::from_tree(tree)
    }

    /// Applies `MARL_<SECTION>_<KEY>` overrides from `vars`. Variables with
    /// the prefix that name no key are errors.
    pub fn with_overrides<I, K, V>(&self, vars: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut tree = self.tree();
        for (k, v) in vars {
            let Some(rest) = k.as_ref().strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let rest = rest.to_ascii_lowercase();
            let (sec, key) = rest
                .split_once('_')
                .and_then(|(s, k)| section_name(s).map(|s| (s, k)))
                .ok_or_else(|| Error::UnknownKey(k.as_ref().to_string()))?;
            Self::set(&mut tree, sec, key, v.as_ref().trim(), 0)?;
        }
        Self::from_tree(tree)
    }

    /// Reads a config file and applies process environment overrides.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)?.with_overrides(std::env::vars())
    }

    pub fn to_text(&self) -> String {
        let tree = self.tree();
        let mut out = String::new();
        for name in SECTIONS {
            out.push_str(&format!("[{name}]\n"));
            if let Some(Value::Object(m)) = tree.get(name) {
                for (k, v) in m {
                    out.push_str(&format!("{k} = {}\n", render(v)));
                }
            }
            out.push('\n');
        }
        out
    }

    /// First 16 hex digits of the SHA-256 of [`RunConfig::to_text`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.env.validate()?;
        self.ppo.validate()?;
        self.apf.validate(self.env.d_collision, self.sim.v_max)?;
        self.train.spec()?;
        if !(self.pid.integral_limit >= 0.0 && self.pid.hover_height >= 0.0) {
            return Err(Error::Config("pid integral_limit and hover_height must be >= 0".into()));
        }
        Ok(())
    }

    pub fn train_setup(&self) -> Result<TrainSetup> {
        Ok(TrainSetup {
            sim: self.sim,
            env: self.env.clone(),
            ppo: self.ppo.clone(),
            platform: self.train.spec()?,
        })
    }

    pub fn eval_setup(&self) -> EvalSetup {
        EvalSetup {
            sim: self.sim,
            env: self.env.clone(),
        }
    }

    pub fn baseline(&self) -> BaselineParams {
        BaselineParams {
            apf: self.apf,
            pid: PidGains {
                k_p: self.pid.k_p,
                k_i: self.pid.k_i,
                k_d: self.pid.k_d,
                integral_limit: self.pid.integral_limit,
            },
            hover_height: self.pid.hover_height,
        }
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let n = (self.eval.episodes > 0).then_some(self.eval.episodes);
        Scenario::by_name(&self.eval.scenario, n, self.eval.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
        assert_eq!(RunConfig::full_scale().ppo.total_timesteps, 20_000_000);
    }

    #[test]
    fn parse_sections_and_comments() {
        let cfg = RunConfig::parse(
            "# desk run\n[ppo]\ntotal_timesteps = 1e5\nlr = 0.001 # faster\n\n[env]\nterminate_out_of_bounds = true\n[train]\nplatform = static-floor\n",
        )
        .unwrap();
        assert_eq!(cfg.ppo.total_timesteps, 100_000);
        assert_eq!(cfg.ppo.lr, 0.001);
        assert!(cfg.env.terminate_out_of_bounds);
        assert_eq!(cfg.train.spec().unwrap(), PlatformSpec::StaticFloor);
    }

    #[test]
    fn unknown_key_rejected() {
        let err = RunConfig::parse("[ppo]\nlearning_rate = 0.1\n").unwrap_err();
        assert!(matches!(err, Error::UnknownKey(k) if k == "ppo.learning_rate"));
        assert!(matches!(RunConfig::parse("[nope]\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(RunConfig::parse("lr = 1\n"), Err(Error::Parse { .. })));
        assert!(matches!(RunConfig::parse("[ppo]\nlr = fast\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn cross_field_checks_run_at_load() {
        assert!(RunConfig::parse("[ppo]\nminibatch_size = 1000\n").is_err());
        assert!(RunConfig::parse("[apf]\nd0 = 0.1\n").is_err());
        assert!(RunConfig::parse("[train]\nplatform = teleport\n").is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.ppo.lr = 1.0 / 3.0;
        cfg.sim.tau_track = 0.1 + 0.2;
        cfg.eval.scenario = "moving-0.3".into();
        cfg.ppo.seed = u64::MAX;
        let back = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());
        assert_ne!(cfg.hash(), RunConfig::default().hash());
    }

    #[test]
    fn environment_overrides() {
        let cfg = RunConfig::default()
            .with_overrides([
                ("MARL_PPO_TOTAL_TIMESTEPS", "4096"),
                ("MARL_SIM_WORLD_HALF_EXTENT", "1.5"),
                ("PATH", "/bin"),
            ])
            .unwrap();
        assert_eq!(cfg.ppo.total_timesteps, 4096);
        assert_eq!(cfg.sim.world_half_extent, 1.5);
        assert!(RunConfig::default().with_overrides([("MARL_PPO_NOPE", "1")]).is_err());
    }
}
