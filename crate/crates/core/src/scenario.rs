//! Scenario files: a query, an input, a network, a model, a policy, a
//! protocol and a run configuration in one JSON document.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datalog::{builtin, parse_program_with_edb, Query, QueryError};
use crate::netmodel::{
    DistributionPolicy, ModelTag, NetError, NetworkGraph, PolicySpec, PolicySpecError,
};
use crate::relcore::{FactParseError, Instance, RelSymbol, Schema, SchemaError};
use crate::simulator::{RunConfig, RunMode};
use crate::transducer::{make_t_adom, make_t_mono, make_t_repl, Protocol};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("input: {0}")]
    Facts(#[from] FactParseError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Policy(#[from] PolicySpecError),
    #[error("unknown protocol `{0}` (expected t_mono, t_adom or t_repl)")]
    UnknownProtocol(String),
    #[error("{0}")]
    Invalid(String),
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum QuerySpec {
    Builtin(String),
    /// Path of a program file, relative to the scenario file.
    Program(PathBuf),
    ProgramText(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputSpec {
    Facts(Vec<String>),
    File { file: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Line,
    Star,
    Complete,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub nodes: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<(u32, u32)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<Topology>,
}

impl NetworkSpec {
    pub fn build(&self) -> Result<NetworkGraph, ScenarioError> {
        match (&self.edges, self.topology) {
            (Some(_), Some(_)) => Err(ScenarioError::Invalid(
                "network: give either edges or topology, not both".into(),
            )),
            (Some(edges), None) => Ok(NetworkGraph::new(self.nodes, edges.iter().copied())?),
            (None, Some(Topology::Line)) | (None, None) => Ok(NetworkGraph::line(self.nodes)?),
            (None, Some(Topology::Star)) => Ok(NetworkGraph::star(self.nodes)?),
            (None, Some(Topology::Complete)) => Ok(NetworkGraph::complete(self.nodes)?),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub seed: u64,
    pub fairness_bound: u32,
    pub max_steps: u64,
    pub mode: RunMode,
    pub rounds: u32,
}

impl Default for RunSpec {
    fn default() -> Self {
        let d = RunConfig::default();
        RunSpec {
            seed: d.seed,
            fairness_bound: d.fairness_bound,
            max_steps: d.max_steps,
            mode: d.mode,
            rounds: d.rounds,
        }
    }
}

/// The document as written.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub query: QuerySpec,
    /// Declared input schema, `{"rel": arity}`; defaults to the query's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<BTreeMap<String, usize>>,
    pub input: InputSpec,
    pub network: NetworkSpec,
    pub model: ModelTag,
    pub policy: PolicySpec,
    pub protocol: String,
    #[serde(default)]
    pub run: RunSpec,
}

/// A validated scenario, ready to run.
#[derive(Debug)]
pub struct Scenario {
    pub query: Query,
    pub input: Instance,
    pub graph: NetworkGraph,
    pub model: ModelTag,
    pub policy: DistributionPolicy,
    pub protocol: Box<dyn Protocol>,
    pub config: RunConfig,
}

pub fn make_protocol(name: &str, query: Query) -> Result<Box<dyn Protocol>, ScenarioError> {
    Ok(match name {
        "t_mono" => Box::new(make_t_mono(query)),
        "t_adom" => Box::new(make_t_adom(query)),
        "t_repl" => Box::new(make_t_repl(query)),
        other => return Err(ScenarioError::UnknownProtocol(other.to_string())),
    })
}

/// Rejects protocol/model/policy combinations the protocols are not
/// designed for.
pub fn validate_pairing(
    protocol: &str,
    model: ModelTag,
    policy: &DistributionPolicy,
) -> Result<(), ScenarioError> {
    if !model.admits(policy) {
        return Err(ScenarioError::Invalid(format!(
            "model {model} requires a constant_map policy"
        )));
    }
    match (protocol, model) {
        ("t_adom", ModelTag::N0 | ModelTag::N2) => Err(ScenarioError::Invalid(format!(
            "t_adom needs the policy oracle of N1 or N3, not {model}"
        ))),
        ("t_repl", m) if m != ModelTag::N2 => Err(ScenarioError::Invalid(format!(
            "t_repl runs under N2 with a constant_map policy, not {m}"
        ))),
        _ => Ok(()),
    }
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Resolves file references against `base` and validates.
    pub fn resolve(&self, base: &Path) -> Result<Scenario, ScenarioError> {
        let declared = match &self.schema {
            Some(s) => Schema::from_symbols(s.iter().map(|(r, a)| RelSymbol::new(r, *a)))?,
            None => Schema::new(),
        };
        let query = match &self.query {
            QuerySpec::Builtin(name) => builtin(name)?,
            QuerySpec::Program(path) => {
                let path = base.join(path);
                let text = read(&path)?;
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "program".into());
                Query::from_program(
                    name,
                    parse_program_with_edb(&text, &declared).map_err(QueryError::from)?,
                )
            }
            QuerySpec::ProgramText(text) => Query::from_program(
                "program",
                parse_program_with_edb(text, &declared).map_err(QueryError::from)?,
            ),
        };
        let input = match &self.input {
            InputSpec::Facts(facts) => facts
                .iter()
                .map(|f| f.parse())
                .collect::<Result<Instance, _>>()?,
            InputSpec::File { file } => Instance::parse(&read(&base.join(file))?)?,
        };
        if self.schema.is_some() {
            declared.check_instance(&input)?;
        }
        query.input_schema().check_instance(&input)?;
        let graph = self.network.build()?;
        let policy = self.policy.build(&graph)?;
        validate_pairing(&self.protocol, self.model, &policy)?;
        let config = RunConfig {
            seed: self.run.seed,
            fairness_bound: self.run.fairness_bound,
            max_steps: self.run.max_steps,
            mode: self.run.mode,
            rounds: self.run.rounds,
            global_adom: self.model.grants_global_adom(),
        };
        config
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        let protocol = make_protocol(&self.protocol, query.clone())?;
        Ok(Scenario {
            query,
            input,
            graph,
            model: self.model,
            policy,
            protocol,
            config,
        })
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let spec = ScenarioSpec::from_json(&read(path)?)?;
        spec.resolve(path.parent().unwrap_or(Path::new(".")))
    }
}
