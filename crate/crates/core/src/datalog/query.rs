use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::{eval, parse_program, winmove, Program, ProgramError};
use crate::relcore::{Instance, Schema, SchemaError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("input does not match the query schema: {0}")]
    Schema(#[from] SchemaError),
    #[error("non-stratified programs cannot be evaluated")]
    NotStratified,
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error("unknown builtin query `{0}`")]
    UnknownBuiltin(String),
}

type Evaluator = Arc<dyn Fn(&Instance) -> Instance + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Program(Program),
    Opaque {
        input: Schema,
        output: Schema,
        eval: Evaluator,
    },
}

/// A deterministic mapping between finite instances.
#[derive(Clone)]
pub struct Query {
    name: String,
    kind: Kind,
}

impl Query {
    pub fn from_program(name: impl Into<String>, program: Program) -> Query {
        Query {
            name: name.into(),
            kind: Kind::Program(program),
        }
    }

    pub fn opaque<F>(name: impl Into<String>, input: Schema, output: Schema, eval: F) -> Query
    where
        F: Fn(&Instance) -> Instance + Send + Sync + 'static,
    {
        Query {
            name: name.into(),
            kind: Kind::Opaque {
                input,
                output,
                eval: Arc::new(eval),
            },
        }
    }

    pub fn parse(name: impl Into<String>, text: &str) -> Result<Query, QueryError> {
        Ok(Query::from_program(name, parse_program(text)?))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn program(&self) -> Option<&Program> {
        match &self.kind {
            Kind::Program(p) => Some(p),
            Kind::Opaque { .. } => None,
        }
    }

    pub fn input_schema(&self) -> &Schema {
        match &self.kind {
            Kind::Program(p) => p.edb(),
            Kind::Opaque { input, .. } => input,
        }
    }

    pub fn output_schema(&self) -> Schema {
        match &self.kind {
            Kind::Program(p) => p.output_schema(),
            Kind::Opaque { output, .. } => output.clone(),
        }
    }

    pub fn eval(&self, inst: &Instance) -> Result<Instance, QueryError> {
        eval_query(self, inst)
    }
}

impl fmt::Debug for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Program(p) => f
                .debug_struct("Query")
                .field("name", &self.name)
                .field("program", &p.to_text())
                .finish(),
            Kind::Opaque { input, output, .. } => f
                .debug_struct("Query")
                .field("name", &self.name)
                .field("input", input)
                .field("output", output)
                .finish_non_exhaustive(),
        }
    }
}

/// Evaluates `q` on `inst`, checking `inst` against the input schema first.
pub fn eval_query(q: &Query, inst: &Instance) -> Result<Instance, QueryError> {
    match &q.kind {
        Kind::Program(p) => eval(p, inst),
        Kind::Opaque { input, eval, .. } => {
            input.check_instance(inst)?;
            Ok(eval(inst))
        }
    }
}

pub(crate) const TC_TEXT: &str = include_str!("../../corpus/tc.dl");
pub(crate) const ASYM_TEXT: &str = include_str!("../../corpus/asym.dl");
pub(crate) const REMARK33_TEXT: &str = include_str!("../../corpus/remark33.dl");

pub fn builtin_names() -> &'static [&'static str] {
    &["tc", "asym", "remark33", "winmove"]
}

/// The bundled queries: `tc`, `asym`, `remark33`, `winmove`.
pub fn builtin(name: &str) -> Result<Query, QueryError> {
    let text = match name {
        "tc" => TC_TEXT,
        "asym" => ASYM_TEXT,
        "remark33" => REMARK33_TEXT,
        "winmove" => {
            return Ok(Query::opaque(
                "winmove",
                Schema::of(&[("move", 2)]),
                Schema::of(&[("won", 1)]),
                winmove,
            ))
        }
        other => return Err(QueryError::UnknownBuiltin(other.to_string())),
    };
    Query::parse(name, text)
}
