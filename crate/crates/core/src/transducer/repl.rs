//! Owner-certified replication for weakly adom-monotone queries (model N2).
//!
//! Under a compatible policy the owners of a constant `c` hold every input
//! fact mentioning `c`. Nodes flood their facts and acknowledge every fact
//! they know. Once a node `m` has acknowledged all of an owner's facts that
//! mention `c`, the owner certifies `c` complete for `m`. A node evaluates
//! the query once each constant it knows is owned or certified and every
//! nullary input relation is settled by its home node.

use std::collections::BTreeSet;

use super::{
    seen_schema, tagged, tagged_schema, tagged_with, untag, untag_all, Protocol, StepInput,
    StepOutput, TransducerError, TransducerState, Work,
};
use crate::datalog::{eval_query, Query};
use crate::relcore::{adom, Constant, Fact, Instance, RelSymbol, Schema};

/// Memory: `known__R`, `ackd__R(m, ā)`, `cert/1`, `nullpos__R`/`nullneg__R`
/// for nullary `R`, plus `seen__*`.
/// Messages: `copy__R`, `ack__R(m, ā)`, `complete(m, c)`, and
/// `nullpos__R`/`nullneg__R` for nullary `R`.
#[derive(Debug)]
pub struct TRepl {
    query: Query,
    memory: Schema,
    messages: Schema,
    /// Relation used to ask the oracle whether this node owns a constant.
    probe: Option<RelSymbol>,
    nullary: Vec<RelSymbol>,
}

pub fn make_t_repl(query: Query) -> TRepl {
    let edb = query.input_schema().clone();
    let (nullary, facts): (Vec<RelSymbol>, Vec<RelSymbol>) =
        edb.symbols().partition(|s| s.arity == 0);
    let facts = Schema::from_symbols(facts).expect("subset of a schema");
    let nullary_schema = Schema::from_symbols(nullary.clone()).expect("subset of a schema");
    let status = || {
        tagged_schema("nullpos", &nullary_schema, 0)
            .into_iter()
            .chain(tagged_schema("nullneg", &nullary_schema, 0))
    };
    let messages = Schema::from_symbols(
        tagged_schema("copy", &facts, 0)
            .into_iter()
            .chain(tagged_schema("ack", &facts, 1))
            .chain([RelSymbol::new("complete", 2)])
            .chain(status()),
    )
    .expect("fresh names");
    let memory = Schema::from_symbols(
        tagged_schema("known", &facts, 0)
            .into_iter()
            .chain(tagged_schema("ackd", &facts, 1))
            .chain([RelSymbol::new("cert", 1)])
            .chain(status())
            .chain(seen_schema(&messages)),
    )
    .expect("fresh names");
    TRepl {
        probe: edb.first_non_nullary(),
        query,
        memory,
        messages,
        nullary,
    }
}

impl TRepl {
    fn owns(&self, state: &TransducerState, c: &Constant) -> Result<bool, TransducerError> {
        let Some(probe) = &self.probe else {
            return Ok(false);
        };
        let g = Fact::new(&probe.name, vec![c.clone(); probe.arity]);
        Ok(state
            .system
            .oracle
            .is_mine(&g, &BTreeSet::from([c.clone()]))?)
    }

    fn settled(&self, memory: &Instance) -> bool {
        self.nullary.iter().all(|s| {
            let f = Fact::new(&s.name, Vec::new());
            memory.contains(&tagged("nullpos", &f)) || memory.contains(&tagged("nullneg", &f))
        })
    }
}

/// `R(m, ā)` for `R(ā)`.
fn prefixed(m: &Constant, f: &Fact) -> Fact {
    let mut args = vec![m.clone()];
    args.extend_from_slice(f.args());
    Fact::new(f.relation(), args)
}

impl Protocol for TRepl {
    fn name(&self) -> &str {
        "t_repl"
    }

    fn query(&self) -> &Query {
        &self.query
    }

    fn memory_schema(&self) -> &Schema {
        &self.memory
    }

    fn message_schema(&self) -> &Schema {
        &self.messages
    }

    fn transition(
        &self,
        state: &TransducerState,
        input: &StepInput,
    ) -> Result<StepOutput, TransducerError> {
        let me = state.node();
        let my_id = me.as_constant();
        let mut w = Work::new(state);
        if let StepInput::Deliver(m) = input {
            if w.receive(m) {
                if let Some(f) = untag("copy", m) {
                    w.add(tagged("known", &f));
                } else if let Some(a) = untag("ack", m) {
                    let fact = Fact::new(a.relation(), a.args()[1..].to_vec());
                    let mut mine = false;
                    for c in fact.constants() {
                        if self.owns(state, c)? {
                            mine = true;
                            break;
                        }
                    }
                    if mine {
                        w.add(tagged("ackd", &a));
                    }
                } else if m.relation() == "complete" {
                    if m.args()[0] == my_id {
                        w.add(Fact::new("cert", vec![m.args()[1].clone()]));
                    }
                } else {
                    // nullary status
                    w.add(m.clone());
                }
            }
        }

        for s in &self.nullary {
            let f = Fact::new(&s.name, Vec::new());
            if state.system.oracle.is_mine(&f, &BTreeSet::new())? {
                let tag = if state.input.contains(&f) {
                    "nullpos"
                } else {
                    "nullneg"
                };
                w.add(tagged(tag, &f));
                w.broadcast(tagged(tag, &f));
            }
        }
        for f in state.input.iter().filter(|f| !f.is_nullary()) {
            w.add(tagged("known", f));
            w.broadcast(tagged("copy", f));
        }
        let known = untag_all("known", &w.memory);
        for f in &known {
            w.broadcast(tagged_with("ack", std::slice::from_ref(&my_id), f));
        }

        // certify owned constants for nodes that acked all of our facts on them
        let acked = untag_all("ackd", &w.memory);
        let known_consts = adom(&known);
        let mut owned = BTreeSet::new();
        for c in &known_consts {
            if self.owns(state, c)? {
                owned.insert(c.clone());
            }
        }
        let mut ackers: BTreeSet<(Constant, Constant)> = BTreeSet::new();
        for a in &acked {
            let m = &a.args()[0];
            if *m == my_id {
                continue;
            }
            for c in a.args()[1..].iter().filter(|c| owned.contains(*c)) {
                ackers.insert((m.clone(), c.clone()));
            }
        }
        for (m, c) in &ackers {
            let all = state
                .input
                .iter()
                .filter(|f| f.constants().any(|x| x == c))
                .all(|f| acked.contains(&prefixed(m, f)));
            if all {
                w.broadcast(Fact::new("complete", vec![m.clone(), c.clone()]));
            }
        }

        let ready = self.settled(&w.memory)
            && known_consts
                .iter()
                .all(|c| owned.contains(c) || w.has(&Fact::new("cert", vec![c.clone()])));
        let out = if ready {
            eval_query(&self.query, &known.union(&untag_all("nullpos", &w.memory)))?
        } else {
            Instance::new()
        };
        Ok(w.finish(out))
    }
}
