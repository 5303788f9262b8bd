//! Datalog with negation: syntax, validation, classification, evaluation,
//! and the complement construction that turns semi-positive programs into
//! positive ones.

mod eval;
mod parse;
mod query;
mod winmove;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::relcore::{adom, Constant, Fact, Instance, RelSymbol, Schema, SchemaError, Tuples};

pub use eval::{eval, eval_with, EvalStrategy};
pub use parse::{parse_program, parse_program_with_edb};
pub use query::{builtin, builtin_names, eval_query, Query, QueryError};
pub use winmove::winmove;

/// Name suffix marking complement relations (`R` becomes `R__c`).
pub const COMPLEMENT_SUFFIX: &str = "__c";

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(Arc<str>),
    Const(Constant),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub relation: Arc<str>,
    pub terms: Vec<Term>,
}

impl Atom {
    pub fn symbol(&self) -> RelSymbol {
        RelSymbol {
            name: self.relation.clone(),
            arity: self.terms.len(),
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = &Arc<str>> {
        self.terms.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation)?;
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub atom: Atom,
    pub negated: bool,
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("not ")?;
        }
        write!(f, "{}", self.atom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    pub head: Atom,
    pub body: Vec<Literal>,
}

impl Rule {
    pub fn positive(&self) -> impl Iterator<Item = &Atom> {
        self.body.iter().filter(|l| !l.negated).map(|l| &l.atom)
    }

    pub fn negative(&self) -> impl Iterator<Item = &Atom> {
        self.body.iter().filter(|l| l.negated).map(|l| &l.atom)
    }

    /// First variable of the head or of a negated literal that no positive
    /// literal binds.
    fn unguarded_var(&self) -> Option<Arc<str>> {
        let bound: BTreeSet<&Arc<str>> = self.positive().flat_map(|a| a.vars()).collect();
        self.head
            .vars()
            .chain(self.negative().flat_map(|a| a.vars()))
            .find(|v| !bound.contains(v))
            .cloned()
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            f.write_str(" :- ")?;
            for (i, l) in self.body.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{l}")?;
            }
        }
        f.write_str(".")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgramError {
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Arity(#[from] SchemaError),
    #[error("rule `{rule}` is not range-restricted: variable `{var}` is not bound by a positive literal")]
    RangeRestriction { rule: String, var: String },
    #[error("rule `{rule}` derives into input relation `{relation}`")]
    HeadOnEdb { rule: String, relation: String },
    #[error("relation name `{0}` uses the reserved complement suffix `__c`")]
    ReservedName(String),
    #[error("output relation `{0}` is not derived by any rule")]
    UnknownOutput(String),
    #[error("program negates derived relation `{0}`; only input relations may be negated")]
    NotSemiPositive(String),
    #[error("program is not stratifiable (negation through recursion on `{0}`)")]
    NotStratified(String),
}

/// The strongest syntactic class a program belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProgramClass {
    Positive,
    SemiPositive,
    Stratified,
    NonStratified,
}

impl fmt::Display for ProgramClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProgramClass::Positive => "positive",
            ProgramClass::SemiPositive => "semi-positive",
            ProgramClass::Stratified => "stratified",
            ProgramClass::NonStratified => "non-stratified",
        })
    }
}

/// A validated Datalog⁻ program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    rules: Vec<Rule>,
    edb: Schema,
    idb: Schema,
    outputs: BTreeSet<Arc<str>>,
}

impl Program {
    /// Validates rules and infers the schemas.
    ///
    /// Relations that never occur in a rule head form the edb. `extra_edb`
    /// adds input relations the rules do not mention. An empty `outputs`
    /// list makes every derived relation an output.
    pub fn new(
        rules: Vec<Rule>,
        outputs: Vec<String>,
        extra_edb: &Schema,
    ) -> Result<Program, ProgramError> {
        let mut all = Schema::new();
        let mut heads = BTreeSet::new();
        for rule in &rules {
            all.insert(rule.head.symbol())?;
            heads.insert(rule.head.relation.clone());
            for lit in &rule.body {
                all.insert(lit.atom.symbol())?;
            }
        }
        for sym in extra_edb.symbols() {
            if heads.contains(&sym.name) {
                return Err(ProgramError::HeadOnEdb {
                    rule: rules
                        .iter()
                        .find(|r| r.head.relation == sym.name)
                        .map(|r| r.to_string())
                        .unwrap_or_default(),
                    relation: sym.name.to_string(),
                });
            }
            all.insert(sym)?;
        }
        for sym in all.symbols() {
            if sym.name.ends_with(COMPLEMENT_SUFFIX) {
                return Err(ProgramError::ReservedName(sym.name.to_string()));
            }
        }
        for rule in &rules {
            if let Some(var) = rule.unguarded_var() {
                return Err(ProgramError::RangeRestriction {
                    rule: rule.to_string(),
                    var: var.to_string(),
                });
            }
        }
        Self::assemble(rules, all, &heads, outputs)
    }

    fn assemble(
        rules: Vec<Rule>,
        all: Schema,
        heads: &BTreeSet<Arc<str>>,
        outputs: Vec<String>,
    ) -> Result<Program, ProgramError> {
        let mut edb = Schema::new();
        let mut idb = Schema::new();
        for sym in all.symbols() {
            if heads.contains(&sym.name) {
                idb.insert(sym)?;
            } else {
                edb.insert(sym)?;
            }
        }
        let outputs = if outputs.is_empty() {
            idb.symbols().map(|s| s.name).collect()
        } else {
            let mut set = BTreeSet::new();
            for o in outputs {
                if !idb.contains(&o) {
                    return Err(ProgramError::UnknownOutput(o));
                }
                set.insert(Arc::from(o.as_str()));
            }
            set
        };
        Ok(Program {
            rules,
            edb,
            idb,
            outputs,
        })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn edb(&self) -> &Schema {
        &self.edb
    }

    pub fn idb(&self) -> &Schema {
        &self.idb
    }

    pub fn outputs(&self) -> impl Iterator<Item = &str> {
        self.outputs.iter().map(|s| s.as_ref())
    }

    pub fn output_schema(&self) -> Schema {
        Schema::from_symbols(
            self.idb
                .symbols()
                .filter(|s| self.outputs.contains(&s.name)),
        )
        .expect("idb schema is consistent")
    }

    pub fn is_output(&self, relation: &str) -> bool {
        self.outputs.contains(relation)
    }

    /// Assigns each derived relation a stratum, or reports the relation on
    /// which negation recurses.
    pub fn strata(&self) -> Result<BTreeMap<Arc<str>, usize>, ProgramError> {
        let mut stratum: BTreeMap<Arc<str>, usize> =
            self.idb.symbols().map(|s| (s.name, 0)).collect();
        let limit = stratum.len();
        loop {
            let mut changed = false;
            for rule in &self.rules {
                let head = &rule.head.relation;
                let mut need = stratum[head];
                for lit in &rule.body {
                    if let Some(&s) = stratum.get(&lit.atom.relation) {
                        need = need.max(if lit.negated { s + 1 } else { s });
                    }
                }
                if need > stratum[head] {
                    if need > limit {
                        return Err(ProgramError::NotStratified(head.to_string()));
                    }
                    stratum.insert(head.clone(), need);
                    changed = true;
                }
            }
            if !changed {
                return Ok(stratum);
            }
        }
    }

    pub fn classify(&self) -> ProgramClass {
        classify_program(self)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for o in &self.outputs {
            s.push_str(&format!("@output {o}.\n"));
        }
        for r in &self.rules {
            s.push_str(&r.to_string());
            s.push('\n');
        }
        s
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

pub fn classify_program(p: &Program) -> ProgramClass {
    let negated: Vec<&Atom> = p.rules.iter().flat_map(|r| r.negative()).collect();
    if negated.is_empty() {
        ProgramClass::Positive
    } else if negated.iter().all(|a| p.edb.contains(&a.relation)) {
        ProgramClass::SemiPositive
    } else if p.strata().is_ok() {
        ProgramClass::Stratified
    } else {
        ProgramClass::NonStratified
    }
}

pub fn complement_name(relation: &str) -> String {
    format!("{relation}{COMPLEMENT_SUFFIX}")
}

/// The facts over `adom(inst)` absent from `inst`, renamed to `R__c`.
pub fn complement(inst: &Instance, schema: &Schema) -> Instance {
    let dom: Vec<Constant> = adom(inst).into_iter().collect();
    let mut out = Instance::new();
    for sym in schema.symbols() {
        let name = complement_name(&sym.name);
        for tuple in Tuples::new(dom.len(), sym.arity) {
            let args: Vec<Constant> = tuple.iter().map(|&i| dom[i].clone()).collect();
            if !inst.contains(&Fact::from_parts(sym.name.clone(), args.clone())) {
                out.insert(Fact::new(&name, args));
            }
        }
    }
    out
}

/// Replaces every negated input literal `not R(..)` by `R__c(..)`.
///
/// The resulting program's edb is the original edb plus one complement
/// relation per original input relation.
pub fn positivize(p: &Program) -> Result<Program, ProgramError> {
    if let Some(a) = p
        .rules
        .iter()
        .flat_map(|r| r.negative())
        .find(|a| !p.edb.contains(&a.relation))
    {
        return Err(ProgramError::NotSemiPositive(a.relation.to_string()));
    }
    let rules: Vec<Rule> = p
        .rules
        .iter()
        .map(|r| Rule {
            head: r.head.clone(),
            body: r
                .body
                .iter()
                .map(|l| {
                    if l.negated {
                        Literal {
                            atom: Atom {
                                relation: Arc::from(complement_name(&l.atom.relation).as_str()),
                                terms: l.atom.terms.clone(),
                            },
                            negated: false,
                        }
                    } else {
                        l.clone()
                    }
                })
                .collect(),
        })
        .collect();
    let mut all = Schema::new();
    for sym in p.edb.symbols() {
        all.insert(RelSymbol::new(complement_name(&sym.name), sym.arity))?;
        all.insert(sym)?;
    }
    for sym in p.idb.symbols() {
        all.insert(sym)?;
    }
    let heads = p.idb.symbols().map(|s| s.name).collect();
    let outputs = p.outputs.iter().map(|o| o.to_string()).collect();
    Program::assemble(rules, all, &heads, outputs)
}

/// Evaluates a semi-positive program as `positivize(P)` over `I ∪ I^c`.
pub fn eval_via_complement(p: &Program, inst: &Instance) -> Result<Instance, QueryError> {
    let positive = positivize(p)?;
    let augmented = inst.union(&complement(inst, p.edb()));
    eval(&positive, &augmented)
}
