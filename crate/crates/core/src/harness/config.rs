use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::baselines::BaselineSpec;
use crate::error::{Error, Result};
use crate::mixer::MixerConfig;
use crate::problems::ProblemSpec;

/// A parsed and validated experiment file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Standard deviation of the random initial point; `0` starts at the origin.
    pub init_scale: f64,
    pub problem: ProblemSpec,
    pub optimizer: OptimizerSpec,
    pub budget: Budget,
    pub trace: TraceConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerSpec {
    Baseline(BaselineSpec),
    /// SAM / AdaSAM with an optional fallback for rejected or off-period steps.
    AdaSam {
        mixer: MixerConfig,
        fallback: Option<BaselineSpec>,
    },
    /// Mixing step replaced by an optimizer update at the projected point.
    PAdaSam {
        mixer: MixerConfig,
        precond: BaselineSpec,
    },
    SamVr {
        mixer: MixerConfig,
        fallback: Option<BaselineSpec>,
        vr: VrSection,
    },
}

impl OptimizerSpec {
    pub fn label(&self) -> &'static str {
        match self {
            OptimizerSpec::Baseline(b) => b.label(),
            OptimizerSpec::AdaSam { .. } => "adasam",
            OptimizerSpec::PAdaSam { .. } => "padasam",
            OptimizerSpec::SamVr { .. } => "sam_vr",
        }
    }
}

/// SAM-VR settings that are not part of the budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VrSection {
    /// Inner steps per snapshot.
    pub inner: usize,
    #[serde(default)]
    pub reset_history: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    pub max_iters: Option<usize>,
    pub epochs: Option<usize>,
    /// Mini-batch size; defaults to the full sample count.
    pub batch_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    /// Record every `every`-th iteration (the first and last are always kept).
    pub every: usize,
    pub output: Option<PathBuf>,
    /// Fill `wall_ms`; traces are then no longer reproducible byte for byte.
    pub wall_clock: bool,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            every: 1,
            output: None,
            wall_clock: false,
        }
    }
}

/// Parses `key.path=value`. The value is read as a TOML literal when
/// possible and as a bare string otherwise.
pub fn parse_override(s: &str) -> Result<(String, Value)> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| Error::config(s, "override must look like key=value"))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::config(s, "empty key segment"));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => Value::String(raw.to_string()),
    };
    Ok((key.to_string(), value))
}

/// Sets `path` (dotted) inside `table`, creating intermediate tables.
pub fn apply_override(table: &mut Table, path: &str, value: Value) -> Result<()> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().expect("split yields at least one part");
    let mut cur = table;
    let mut walked = String::new();
    for p in parts {
        if !walked.is_empty() {
            walked.push('.');
        }
        walked.push_str(p);
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => return Err(Error::config(walked, "is not a table")),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn section<T: DeserializeOwned>(value: Value, path: &str) -> Result<T> {
    value
        .try_into()
        .map_err(|e: toml::de::Error| Error::config(path, e.message().to_string()))
}

fn take_table(root: &mut Table, key: &str) -> Result<Option<Table>> {
    match root.remove(key) {
        None => Ok(None),
        Some(Value::Table(t)) => Ok(Some(t)),
        Some(_) => Err(Error::config(key, "must be a table")),
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), format!("cannot read: {e}")))?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut root: Table =
            toml::from_str(text).map_err(|e| Error::config("<file>", e.to_string()))?;
        for o in overrides {
            let (k, v) = parse_override(o)?;
            apply_override(&mut root, &k, v)?;
        }
        Self::from_table(root)
    }

    pub fn from_table(mut root: Table) -> Result<Self> {
        let seed = match root.remove("seed") {
            None => 0,
            Some(Value::Integer(s)) if s >= 0 => s as u64,
            Some(_) => return Err(Error::config("seed", "must be a non-negative integer")),
        };
        let init_scale = match root.remove("init_scale") {
            None => 0.0,
            Some(Value::Float(v)) => v,
            Some(Value::Integer(v)) => v as f64,
            Some(_) => return Err(Error::config("init_scale", "must be a number")),
        };
        let problem = take_table(&mut root, "problem")?
            .ok_or_else(|| Error::config("problem", "missing section"))?;
        let problem: ProblemSpec = section(Value::Table(problem), "problem")?;
        let optimizer = take_table(&mut root, "optimizer")?
            .ok_or_else(|| Error::config("optimizer", "missing section"))?;
        let optimizer = parse_optimizer(optimizer)?;
        let budget: Budget = match take_table(&mut root, "budget")? {
            Some(t) => section(Value::Table(t), "budget")?,
            None => Budget::default(),
        };
        let trace: TraceConfig = match take_table(&mut root, "trace")? {
            Some(t) => section(Value::Table(t), "trace")?,
            None => TraceConfig::default(),
        };
        if let Some(k) = root.keys().next() {
            return Err(Error::config(k.as_str(), "unknown top-level key"));
        }
        let cfg = ExperimentConfig {
            seed,
            init_scale,
            problem,
            optimizer,
            budget,
            trace,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything that does not require building the problem.
    pub fn validate(&self) -> Result<()> {
        self.problem.validate("problem")?;
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::config("init_scale", "must be non-negative"));
        }
        match &self.optimizer {
            OptimizerSpec::Baseline(b) => b.validate("optimizer")?,
            OptimizerSpec::AdaSam { mixer, fallback } => {
                mixer.validate("optimizer")?;
                check_fallback(mixer, fallback)?;
            }
            OptimizerSpec::PAdaSam { mixer, precond } => {
                mixer.validate("optimizer")?;
                if mixer.pd_mode == crate::mixer::PdMode::EigenDamp {
                    return Err(Error::config(
                        "optimizer.pd_mode",
                        "eigen_damp is not available with preconditioned mixing",
                    ));
                }
                precond.validate("optimizer.precond")?;
            }
            OptimizerSpec::SamVr {
                mixer,
                fallback,
                vr,
            } => {
                mixer.validate("optimizer")?;
                check_fallback(mixer, fallback)?;
                if vr.inner == 0 {
                    return Err(Error::config("optimizer.vr.inner", "must be at least 1"));
                }
                if self.budget.epochs.is_none() {
                    return Err(Error::config("budget.epochs", "required for sam_vr"));
                }
                if self.budget.max_iters.is_some() {
                    return Err(Error::config(
                        "budget.max_iters",
                        "sam_vr runs are budgeted in epochs",
                    ));
                }
            }
        }
        match (self.budget.max_iters, self.budget.epochs) {
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    "budget",
                    "give max_iters or epochs, not both",
                ))
            }
            (None, None) => return Err(Error::config("budget", "needs max_iters or epochs")),
            (Some(0), _) => return Err(Error::config("budget.max_iters", "must be positive")),
            (_, Some(0)) => return Err(Error::config("budget.epochs", "must be positive")),
            _ => {}
        }
        if self.budget.batch_size == Some(0) {
            return Err(Error::config("budget.batch_size", "must be positive"));
        }
        if let (Some(b), Some(t)) = (self.budget.batch_size, self.problem.num_samples()) {
            if b > t {
                return Err(Error::config(
                    "budget.batch_size",
                    format!("exceeds the number of samples ({t})"),
                ));
            }
        }
        if self.trace.every == 0 {
            return Err(Error::config("trace.every", "must be positive"));
        }
        Ok(())
    }
}

fn check_fallback(mixer: &MixerConfig, fallback: &Option<BaselineSpec>) -> Result<()> {
    match fallback {
        Some(f) => f.validate("optimizer.fallback"),
        None if mixer.needs_fallback() => Err(Error::config(
            "optimizer.fallback",
            "required when pd_mode = \"descent_check\" or period > 1",
        )),
        None => Ok(()),
    }
}

fn parse_optimizer(mut t: Table) -> Result<OptimizerSpec> {
    let kind = match t.get("kind") {
        Some(Value::String(k)) => k.clone(),
        Some(_) => return Err(Error::config("optimizer.kind", "must be a string")),
        None => return Err(Error::config("optimizer.kind", "missing")),
    };
    if matches!(kind.as_str(), "sgd" | "sgdm" | "adam") {
        return Ok(OptimizerSpec::Baseline(section(
            Value::Table(t),
            "optimizer",
        )?));
    }
    t.remove("kind");
    let sub = |t: &mut Table, key: &str| -> Result<Option<BaselineSpec>> {
        let path = format!("optimizer.{key}");
        match t.remove(key) {
            None => Ok(None),
            Some(v) => section(v, &path).map(Some),
        }
    };
    match kind.as_str() {
        "adasam" => {
            let fallback = sub(&mut t, "fallback")?;
            Ok(OptimizerSpec::AdaSam {
                mixer: section(Value::Table(t), "optimizer")?,
                fallback,
            })
        }
        "padasam" => {
            let precond = sub(&mut t, "precond")?
                .ok_or_else(|| Error::config("optimizer.precond", "missing section"))?;
            Ok(OptimizerSpec::PAdaSam {
                mixer: section(Value::Table(t), "optimizer")?,
                precond,
            })
        }
        "sam_vr" => {
            let fallback = sub(&mut t, "fallback")?;
            let vr = t
                .remove("vr")
                .ok_or_else(|| Error::config("optimizer.vr", "missing section"))?;
            let vr: VrSection = section(vr, "optimizer.vr")?;
            Ok(OptimizerSpec::SamVr {
                mixer: section(Value::Table(t), "optimizer")?,
                fallback,
                vr,
            })
        }
        other => Err(Error::config(
            "optimizer.kind",
            format!(
                "unknown optimizer `{other}` (expected sgd, sgdm, adam, adasam, padasam or sam_vr)"
            ),
        )),
    }
}
