//! Relational transducers: the step contract shared by every protocol and
//! the three broadcast constructions.
//!
//! A transducer sees four kinds of relations: its read-only local input,
//! its memory, system relations (own id, all node ids, the policy oracle,
//! and under N3 the global active domain), and at most one delivered
//! message per step. A step yields new output facts, messages for all
//! neighbors, and memory deletions and insertions. Memory updates apply
//! deletions first, so an insertion of the same fact wins.
//!
//! All protocols share the same flood substrate: a message is forwarded to
//! every neighbor the first time a node sees it, recorded in a
//! `seen__<message relation>` memory relation.

mod adom;
mod mono;
mod repl;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::datalog::{Query, QueryError};
use crate::netmodel::{NetError, NodeId, PolicyOracle};
use crate::relcore::{Constant, Fact, Instance, RelSymbol, Schema, SchemaError};

pub use adom::make_t_adom;
pub use mono::make_t_mono;
pub use repl::make_t_repl;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransducerError {
    #[error("message `{fact}` does not fit the message schema: {source}")]
    MalformedMessage { fact: String, source: SchemaError },
    #[error("constructibility violation: {0}")]
    Oracle(#[from] NetError),
    #[error(transparent)]
    Query(#[from] QueryError),
}

impl TransducerError {
    pub fn is_constructibility_violation(&self) -> bool {
        matches!(
            self,
            TransducerError::Oracle(NetError::Unconstructible { .. })
        )
    }
}

/// System relations of one node.
#[derive(Clone, Debug)]
pub struct SystemInfo {
    pub id: NodeId,
    pub all: Vec<NodeId>,
    pub oracle: PolicyOracle,
    /// Populated only under model N3.
    pub global_adom: Option<BTreeSet<Constant>>,
}

#[derive(Clone, Debug)]
pub struct TransducerState {
    pub input: Instance,
    pub memory: Instance,
    pub system: SystemInfo,
    pub emitted: Instance,
}

impl TransducerState {
    pub fn new(protocol: &dyn Protocol, system: SystemInfo, input: Instance) -> Self {
        let memory = protocol.init(&input);
        TransducerState {
            input,
            memory,
            system,
            emitted: Instance::new(),
        }
    }

    pub fn node(&self) -> NodeId {
        self.system.id
    }

    /// Deletes, then inserts, then appends the new output.
    pub fn apply(&mut self, out: &StepOutput) {
        for f in &out.mem_delete {
            self.memory.remove(f);
        }
        self.memory.extend(out.mem_insert.iter().cloned());
        self.emitted.extend(out.new_output.iter().cloned());
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum StepInput {
    Heartbeat,
    Deliver(Fact),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StepOutput {
    pub new_output: Instance,
    /// Sent to every graph neighbor.
    pub messages: Instance,
    pub mem_insert: Instance,
    pub mem_delete: Instance,
}

impl StepOutput {
    pub fn is_noop(&self) -> bool {
        self.new_output.is_empty()
            && self.messages.is_empty()
            && self.mem_insert.is_empty()
            && self.mem_delete.is_empty()
    }
}

/// A deterministic transducer program deployed on every node.
pub trait Protocol: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    /// The query the protocol was constructed for.
    fn query(&self) -> &Query;

    fn memory_schema(&self) -> &Schema;

    fn message_schema(&self) -> &Schema;

    /// Initial memory for a node holding `input`.
    fn init(&self, _input: &Instance) -> Instance {
        Instance::new()
    }

    /// One transition. Must only read `state` and `input`.
    fn transition(
        &self,
        state: &TransducerState,
        input: &StepInput,
    ) -> Result<StepOutput, TransducerError>;
}

/// Validates a delivered message against the protocol's message schema and
/// performs one transition.
pub fn step(
    protocol: &dyn Protocol,
    state: &TransducerState,
    input: &StepInput,
) -> Result<StepOutput, TransducerError> {
    if let StepInput::Deliver(m) = input {
        protocol.message_schema().check_fact(m).map_err(|source| {
            TransducerError::MalformedMessage {
                fact: m.to_string(),
                source,
            }
        })?;
    }
    protocol.transition(state, input)
}

/// Equal input, memory and emitted output; node ids and oracle handles are
/// not compared.
pub fn state_equal(a: &TransducerState, b: &TransducerState) -> bool {
    a.input == b.input && a.memory == b.memory && a.emitted == b.emitted
}

/// `<tag>__<relation>(args)`.
pub(crate) fn tagged(tag: &str, f: &Fact) -> Fact {
    Fact::new(format!("{tag}__{}", f.relation()), f.args().to_vec())
}

/// `<tag>__<relation>(prefix..., args)`.
pub(crate) fn tagged_with(tag: &str, prefix: &[Constant], f: &Fact) -> Fact {
    let mut args = prefix.to_vec();
    args.extend_from_slice(f.args());
    Fact::new(format!("{tag}__{}", f.relation()), args)
}

/// Inverse of [`tagged`]: the payload fact if `f` carries `tag`.
pub(crate) fn untag(tag: &str, f: &Fact) -> Option<Fact> {
    let rest = f.relation().strip_prefix(tag)?.strip_prefix("__")?;
    Some(Fact::new(rest, f.args().to_vec()))
}

/// Payload facts stored under `tag`.
pub(crate) fn untag_all(tag: &str, memory: &Instance) -> Instance {
    let prefix = format!("{tag}__");
    let start = Fact::new(&prefix, Vec::new());
    memory
        .facts()
        .range(start..)
        .take_while(|f| f.relation().starts_with(&prefix))
        .filter_map(|f| untag(tag, f))
        .collect()
}

pub(crate) fn seen(m: &Fact) -> Fact {
    tagged("seen", m)
}

/// Schema with one `<tag>__R` relation per `R` of `base`, widened by `extra`
/// leading columns.
pub(crate) fn tagged_schema(tag: &str, base: &Schema, extra: usize) -> Vec<RelSymbol> {
    base.symbols()
        .map(|s| RelSymbol::new(format!("{tag}__{}", s.name), s.arity + extra))
        .collect()
}

pub(crate) fn seen_schema(messages: &Schema) -> Vec<RelSymbol> {
    messages
        .symbols()
        .map(|s| RelSymbol::new(format!("seen__{}", s.name), s.arity))
        .collect()
}

/// Scratch copy of a node's memory for one transition.
pub(crate) struct Work<'s> {
    state: &'s TransducerState,
    pub memory: Instance,
    outbox: Instance,
}

impl<'s> Work<'s> {
    pub fn new(state: &'s TransducerState) -> Self {
        Work {
            state,
            memory: state.memory.clone(),
            outbox: Instance::new(),
        }
    }

    pub fn has(&self, f: &Fact) -> bool {
        self.memory.contains(f)
    }

    pub fn add(&mut self, f: Fact) -> bool {
        self.memory.insert(f)
    }

    /// Sends `m` unless this node has already sent or forwarded it.
    pub fn broadcast(&mut self, m: Fact) -> bool {
        if self.memory.insert(seen(&m)) {
            self.outbox.insert(m);
            true
        } else {
            false
        }
    }

    /// Records a delivered message; true if it was new (and is forwarded).
    pub fn receive(&mut self, m: &Fact) -> bool {
        self.broadcast(m.clone())
    }

    /// Emits `Q(knowledge)` minus what was already emitted.
    pub fn finish(self, new_output: Instance) -> StepOutput {
        let old = &self.state.memory;
        StepOutput {
            new_output: new_output.difference(&self.state.emitted),
            messages: self.outbox,
            mem_insert: self.memory.difference(old),
            mem_delete: old.difference(&self.memory),
        }
    }
}
