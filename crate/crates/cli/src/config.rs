//! Experiment configuration files and their validation.

use std::path::{Path, PathBuf};

use orlicz_var::solver::{ProblemSpec, SingularProblem};
use orlicz_var::{NFunction, NFunctionSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("experiment {index}: {message}")]
    Invalid { index: usize, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    NfuncInspect,
    Psi,
    Solve,
    LimitStudy,
    Acceptance,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::NfuncInspect => "nfunc-inspect",
            Command::Psi => "psi",
            Command::Solve => "solve",
            Command::LimitStudy => "limit-study",
            Command::Acceptance => "acceptance",
        }
    }
}

/// One experiment as written in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default)]
    pub params: Value,
    /// Overrides the `--out` directory for this experiment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InspectParams {
    #[serde(flatten)]
    pub nfunction: NFunctionSpec,
    #[serde(default)]
    pub t_grid: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiParams {
    #[serde(flatten)]
    pub nfunction: NFunctionSpec,
    pub dim: usize,
    pub t_grid: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveParams {
    pub problem: ProblemSpec,
    /// Extra random starts for the uniqueness probe (0 disables it).
    pub uniqueness_starts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitParams {
    /// Problem template; its `s` is replaced by each entry of `s_values`.
    pub problem: ProblemSpec,
    pub s_values: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptanceParams {
    /// Reduced problem sizes; `ORLICZ_VAR_SMOKE=1` has the same effect.
    #[serde(default)]
    pub smoke: bool,
    /// Subset of criteria to run (default: all).
    #[serde(default)]
    pub criteria: Option<Vec<usize>>,
}

/// Command parameters after parsing and validation.
#[derive(Clone, Debug, PartialEq)]
pub enum Params {
    NfuncInspect(InspectParams),
    Psi(PsiParams),
    Solve(SolveParams),
    LimitStudy(LimitParams),
    Acceptance(AcceptanceParams),
}

/// A validated experiment ready to run.
#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub params: Params,
    pub out_dir: PathBuf,
    pub seed: u64,
}

pub const DEFAULT_SEED: u64 = 20_240_917;

fn take_key(v: &mut Value, key: &str) -> Option<Value> {
    v.as_object_mut().and_then(|m| m.remove(key))
}

fn check_grid(t: &[f64], what: &str) -> Result<(), String> {
    if t.is_empty() {
        return Err(format!("{what} is empty"));
    }
    if t.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(format!("{what} must contain finite non-negative values"));
    }
    Ok(())
}

fn build_nfunction(spec: &NFunctionSpec) -> Result<NFunction<f64>, String> {
    spec.build::<f64>().map_err(|e| e.to_string())
}

fn build_problem(spec: &ProblemSpec) -> Result<SingularProblem<f64>, String> {
    spec.build::<f64>().map_err(|e| e.to_string())
}

impl Params {
    /// Parses the `params` subtree for `command` and checks every value that
    /// can be checked without running the experiment.
    pub fn parse(command: Command, params: &Value) -> Result<Params, String> {
        let mut v = if params.is_null() {
            Value::Object(Default::default())
        } else {
            params.clone()
        };
        if !v.is_object() {
            return Err("params must be a JSON object".into());
        }
        let json = |e: serde_json::Error| e.to_string();
        Ok(match command {
            Command::NfuncInspect => {
                let p: InspectParams = serde_json::from_value(v).map_err(json)?;
                build_nfunction(&p.nfunction)?;
                if let Some(t) = &p.t_grid {
                    check_grid(t, "t_grid")?;
                }
                Params::NfuncInspect(p)
            }
            Command::Psi => {
                let p: PsiParams = serde_json::from_value(v).map_err(json)?;
                build_nfunction(&p.nfunction)?;
                if !(1..=3).contains(&p.dim) {
                    return Err(format!("dim = {} not in 1..=3", p.dim));
                }
                check_grid(&p.t_grid, "t_grid")?;
                Params::Psi(p)
            }
            Command::Solve => {
                let starts = match take_key(&mut v, "uniqueness_starts") {
                    None => 0,
                    Some(x) => x.as_u64().ok_or("uniqueness_starts must be a non-negative integer")? as usize,
                };
                let problem: ProblemSpec = serde_json::from_value(v).map_err(json)?;
                build_problem(&problem)?;
                Params::Solve(SolveParams {
                    problem,
                    uniqueness_starts: starts,
                })
            }
            Command::LimitStudy => {
                let s_values: Vec<f64> = match take_key(&mut v, "s_values") {
                    Some(x) => serde_json::from_value(x).map_err(json)?,
                    None => return Err("limit-study needs s_values".into()),
                };
                if s_values.is_empty()
                    || s_values.iter().any(|s| !(*s > 0.0 && *s < 1.0))
                    || s_values.windows(2).any(|w| w[1] <= w[0])
                {
                    return Err("s_values must increase strictly inside (0, 1)".into());
                }
                if let Some(m) = v.as_object_mut() {
                    m.entry("s").or_insert(Value::String("local".into()));
                }
                let problem: ProblemSpec = serde_json::from_value(v).map_err(json)?;
                build_problem(&problem)?;
                Params::LimitStudy(LimitParams { problem, s_values })
            }
            Command::Acceptance => {
                let p: AcceptanceParams = serde_json::from_value(v).map_err(json)?;
                if let Some(c) = &p.criteria {
                    if let Some(bad) = c.iter().find(|&&k| !(1..=10).contains(&k)) {
                        return Err(format!("no criterion {bad}"));
                    }
                }
                Params::Acceptance(p)
            }
        })
    }
}

/// Reads a config file holding one experiment object or an array of them.
pub fn load(path: &Path) -> Result<Vec<ExperimentConfig>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_configs(&text)
}

pub fn parse_configs(text: &str) -> Result<Vec<ExperimentConfig>, ConfigError> {
    let value: Value = serde_json::from_str(text)?;
    Ok(match value {
        Value::Array(items) => items
            .into_iter()
            .map(serde_json::from_value)
            .collect::<Result<Vec<ExperimentConfig>, _>>()?,
        other => vec![serde_json::from_value(other)?],
    })
}

/// Validates every experiment and assigns output directories: `out` itself
/// for a single experiment, `out/<index>-<command>` for a list.
pub fn prepare(
    configs: Vec<ExperimentConfig>,
    out: &Path,
    seed_override: Option<u64>,
) -> Result<Vec<Experiment>, ConfigError> {
    let single = configs.len() == 1;
    let mut out_dirs = std::collections::HashSet::new();
    configs
        .into_iter()
        .enumerate()
        .map(|(index, mut config)| {
            let params =
                Params::parse(config.command, &config.params).map_err(|message| ConfigError::Invalid { index, message })?;
            let out_dir = match &config.out_dir {
                Some(d) if d.is_absolute() => d.clone(),
                Some(d) => out.join(d),
                None if single => out.to_path_buf(),
                None => out.join(format!("{index:02}-{}", config.command.name())),
            };
            if !out_dirs.insert(out_dir.clone()) {
                return Err(ConfigError::Invalid {
                    index,
                    message: format!("output directory {} used twice", out_dir.display()),
                });
            }
            let seed = seed_override.or(config.seed).unwrap_or(DEFAULT_SEED);
            config.seed = Some(seed);
            Ok(Experiment {
                config,
                params,
                out_dir,
                seed,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_example_parses() {
        let c = parse_configs(r#"{"command":"psi","params":{"kind":"power","p":2,"dim":2,"t_grid":[0.5,1,2]}}"#).unwrap();
        let p = Params::parse(c[0].command, &c[0].params).unwrap();
        assert!(matches!(p, Params::Psi(PsiParams { dim: 2, .. })));
    }

    #[test]
    fn solve_accepts_uniqueness_starts() {
        let params = serde_json::json!({
            "nfunction": {"kind": "power", "p": 2}, "gamma": 0.5, "s": 0.5,
            "grid": {"dim": 1, "n": 31}, "uniqueness_starts": 4
        });
        match Params::parse(Command::Solve, &params).unwrap() {
            Params::Solve(s) => assert_eq!(s.uniqueness_starts, 4),
            _ => unreachable!(),
        }
    }

    #[test]
    fn limit_study_defaults_the_template_order() {
        let params = serde_json::json!({
            "nfunction": {"kind": "power", "p": 2}, "gamma": 0.5,
            "grid": {"dim": 1, "n": 31}, "s_values": [0.5, 0.9]
        });
        assert!(Params::parse(Command::LimitStudy, &params).is_ok());
        let bad = serde_json::json!({
            "nfunction": {"kind": "power", "p": 2}, "gamma": 0.5,
            "grid": {"dim": 1, "n": 31}, "s_values": [0.9, 0.5]
        });
        assert!(Params::parse(Command::LimitStudy, &bad).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        for (cmd, params) in [
            (Command::Psi, serde_json::json!({"kind": "power", "p": 0.5, "dim": 2, "t_grid": [1]})),
            (Command::Psi, serde_json::json!({"kind": "power", "p": 2, "dim": 4, "t_grid": [1]})),
            (Command::NfuncInspect, serde_json::json!({"kind": "cosh"})),
            (Command::Acceptance, serde_json::json!({"criteria": [11]})),
            (Command::Solve, serde_json::json!({"nfunction": {"kind": "power", "p": 2}})),
        ] {
            assert!(Params::parse(cmd, &params).is_err(), "{params}");
        }
    }

    #[test]
    fn list_configs_get_distinct_directories() {
        let c = parse_configs(
            r#"[{"command":"nfunc-inspect","params":{"kind":"expsquare"}},
                {"command":"nfunc-inspect","params":{"kind":"power","p":3},"seed":5}]"#,
        )
        .unwrap();
        let e = prepare(c, Path::new("/tmp/x"), None).unwrap();
        assert_eq!(e[0].out_dir, Path::new("/tmp/x/00-nfunc-inspect"));
        assert_eq!(e[1].seed, 5);
        assert_eq!(e[0].seed, DEFAULT_SEED);
    }

    #[test]
    fn unknown_top_level_keys_are_errors() {
        assert!(parse_configs(r#"{"command":"psi","parms":{}}"#).is_err());
        assert!(parse_configs(r#"{"command":"psi""#).is_err());
    }
}
