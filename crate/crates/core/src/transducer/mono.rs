//! Broadcast-and-evaluate for monotone queries (model N0).

use super::{
    seen_schema, tagged, tagged_schema, untag, untag_all, Protocol, StepInput, StepOutput,
    TransducerError, TransducerState, Work,
};
use crate::datalog::{eval_query, Query};
use crate::relcore::Schema;

/// Memory: `known__R` (facts known locally) and `seen__copy__R`.
/// Messages: `copy__R`.
#[derive(Debug)]
pub struct TMono {
    query: Query,
    memory: Schema,
    messages: Schema,
}

/// Floods every input fact and, on every step, emits `Q` over all facts
/// known so far. Correct only for monotone `Q`.
pub fn make_t_mono(query: Query) -> TMono {
    let edb = query.input_schema().clone();
    let messages = Schema::from_symbols(tagged_schema("copy", &edb, 0)).expect("fresh names");
    let memory = Schema::from_symbols(
        tagged_schema("known", &edb, 0)
            .into_iter()
            .chain(seen_schema(&messages)),
    )
    .expect("fresh names");
    TMono {
        query,
        memory,
        messages,
    }
}

impl Protocol for TMono {
    fn name(&self) -> &str {
        "t_mono"
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
        let mut w = Work::new(state);
        if let StepInput::Deliver(m) = input {
            if w.receive(m) {
                if let Some(f) = untag("copy", m) {
                    w.add(tagged("known", &f));
                }
            }
        }
        for f in &state.input {
            w.add(tagged("known", f));
            w.broadcast(tagged("copy", f));
        }
        let known = untag_all("known", &w.memory);
        let out = eval_query(&self.query, &known)?;
        Ok(w.finish(out))
    }
}
