//! Adom-gated evaluation for adom-monotone queries (model N1).
//!
//! Each node keeps an underestimate of the global active domain, the facts
//! it knows to be present, and the facts certified absent. A node certifies
//! a fact absent when the policy oracle says the fact would be allocated to
//! it and its local input lacks the fact. Once every fact over the known
//! constants is classified, the node evaluates the query on the present
//! facts.

use std::collections::BTreeSet;

use super::{
    seen_schema, tagged, tagged_schema, untag, untag_all, Protocol, StepInput, StepOutput,
    TransducerError, TransducerState, Work,
};
use crate::datalog::{eval_query, Query};
use crate::relcore::{herbrand_slice, Constant, Fact, Instance, RelSymbol, Schema};

/// Memory: `adom/1`, `pos__R`, `neg__R`, plus `seen__*`.
/// Messages: `copy__R`, `adom/1`, `neg__R`.
#[derive(Debug)]
pub struct TAdom {
    query: Query,
    memory: Schema,
    messages: Schema,
}

pub fn make_t_adom(query: Query) -> TAdom {
    let edb = query.input_schema().clone();
    let messages = Schema::from_symbols(
        tagged_schema("copy", &edb, 0)
            .into_iter()
            .chain(tagged_schema("neg", &edb, 0))
            .chain([RelSymbol::new("adom", 1)]),
    )
    .expect("fresh names");
    let memory = Schema::from_symbols(
        tagged_schema("pos", &edb, 0)
            .into_iter()
            .chain(tagged_schema("neg", &edb, 0))
            .chain([RelSymbol::new("adom", 1)])
            .chain(seen_schema(&messages)),
    )
    .expect("fresh names");
    TAdom {
        query,
        memory,
        messages,
    }
}

fn adom_fact(c: &Constant) -> Fact {
    Fact::new("adom", vec![c.clone()])
}

fn known_constants(memory: &Instance) -> BTreeSet<Constant> {
    memory
        .relation("adom")
        .filter_map(|f| f.args().first().cloned())
        .collect()
}

impl TAdom {
    /// Whether every fact over the known constants is classified.
    pub fn is_ready(&self, memory: &Instance) -> bool {
        let known = known_constants(memory);
        herbrand_slice(self.query.input_schema(), &known, true)
            .iter()
            .all(|g| memory.contains(&tagged("pos", g)) || memory.contains(&tagged("neg", g)))
    }
}

impl Protocol for TAdom {
    fn name(&self) -> &str {
        "t_adom"
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

    fn init(&self, input: &Instance) -> Instance {
        crate::relcore::adom(input).iter().map(adom_fact).collect()
    }

    fn transition(
        &self,
        state: &TransducerState,
        input: &StepInput,
    ) -> Result<StepOutput, TransducerError> {
        let mut w = Work::new(state);
        if let StepInput::Deliver(m) = input {
            if w.receive(m) {
                if let Some(f) = untag("copy", m) {
                    w.add(tagged("pos", &f));
                } else if let Some(f) = untag("neg", m) {
                    w.add(tagged("neg", &f));
                } else if m.relation() == "adom" {
                    w.add(m.clone());
                }
            }
        }
        for f in &state.input {
            w.add(tagged("pos", f));
            w.broadcast(tagged("copy", f));
        }
        // per-column adom broadcast for every known fact
        let present = untag_all("pos", &w.memory);
        for c in present.iter().flat_map(|f| f.constants()) {
            w.add(adom_fact(c));
        }
        let known = known_constants(&w.memory);
        for c in &known {
            w.broadcast(adom_fact(c));
        }
        let slice = herbrand_slice(self.query.input_schema(), &known, true);
        let mut ready = true;
        for g in &slice {
            if w.has(&tagged("pos", g)) || w.has(&tagged("neg", g)) {
                continue;
            }
            if state.system.oracle.is_mine(g, &known)? && !state.input.contains(g) {
                w.add(tagged("neg", g));
                w.broadcast(tagged("neg", g));
            } else {
                ready = false;
            }
        }
        let out = if ready {
            eval_query(&self.query, &present)?
        } else {
            Instance::new()
        };
        Ok(w.finish(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datalog::builtin;
    use crate::netmodel::{isolation_policy, DistributionPolicy, NodeId};
    use crate::transducer::step;
    use crate::transducer::testing::{settle, system};

    fn inst(s: &str) -> Instance {
        s.parse().unwrap()
    }

    #[test]
    fn single_node_ready_after_first_heartbeat() {
        let p = make_t_adom(builtin("asym").unwrap());
        let mut s = TransducerState::new(
            &p,
            system(0, 1, DistributionPolicy::SingleNode(NodeId(0))),
            inst("e(a,b). e(b,c). e(c,b)."),
        );
        let out = step(&p, &s, &StepInput::Heartbeat).unwrap();
        s.apply(&out);
        assert!(p.is_ready(&s.memory));
        assert_eq!(s.emitted, inst("asym(a,b)."));
        assert_eq!(settle(&p, &mut s), 0);
    }

    #[test]
    fn adom_message_is_recorded() {
        let p = make_t_adom(builtin("asym").unwrap());
        let s = TransducerState::new(
            &p,
            system(1, 2, DistributionPolicy::SingleNode(NodeId(0))),
            Instance::new(),
        );
        let out = step(&p, &s, &StepInput::Deliver("adom(c)".parse().unwrap())).unwrap();
        assert!(out.mem_insert.contains(&"adom(c)".parse().unwrap()));
        assert!(out.messages.contains(&"adom(c)".parse().unwrap()));
        // n1 owns nothing, so e(c,c) stays unclassified
        assert!(out.new_output.is_empty());
    }

    #[test]
    fn node_without_the_fact_waits() {
        // n0 holds e(a,b); the policy puts e(b,a) on n1, so n0 cannot
        // certify it absent on its own
        let f: Fact = "e(b,a)".parse().unwrap();
        let policy = isolation_policy(&f, NodeId(0), NodeId(1)).unwrap();
        let p = make_t_adom(builtin("asym").unwrap());
        let mut s = TransducerState::new(&p, system(0, 2, policy), inst("e(a,b)."));
        settle(&p, &mut s);
        assert!(!p.is_ready(&s.memory));
        assert!(s.emitted.is_empty());
        let neg = step(&p, &s, &StepInput::Deliver("neg__e(b,a)".parse().unwrap())).unwrap();
        s.apply(&neg);
        assert!(p.is_ready(&s.memory));
        assert_eq!(s.emitted, inst("asym(a,b)."));
    }

    #[test]
    fn initial_memory_holds_local_adom() {
        let p = make_t_adom(builtin("asym").unwrap());
        assert_eq!(p.init(&inst("e(a,b).")), inst("adom(a). adom(b)."));
    }
}
