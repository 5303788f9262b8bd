//! Bottom-up evaluation, stratum by stratum.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use super::{classify_program, Atom, Program, ProgramClass, QueryError, Rule, Term};
use crate::relcore::{Constant, Fact, Instance};

type Tuple = Vec<Constant>;
type Db = HashMap<Arc<str>, BTreeSet<Tuple>>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EvalStrategy {
    #[default]
    SemiNaive,
    Naive,
}

/// Least-fixpoint evaluation restricted to the output relations.
pub fn eval(p: &Program, inst: &Instance) -> Result<Instance, QueryError> {
    eval_with(p, inst, EvalStrategy::SemiNaive)
}

pub fn eval_with(
    p: &Program,
    inst: &Instance,
    strategy: EvalStrategy,
) -> Result<Instance, QueryError> {
    if classify_program(p) == ProgramClass::NonStratified {
        return Err(QueryError::NotStratified);
    }
    p.edb().check_instance(inst)?;
    let strata = p.strata()?;
    let mut by_stratum: BTreeMap<usize, Vec<&Rule>> = BTreeMap::new();
    for rule in p.rules() {
        by_stratum
            .entry(strata[&rule.head.relation])
            .or_default()
            .push(rule);
    }

    let mut db: Db = HashMap::new();
    for f in inst {
        db.entry(f.relation_arc().clone())
            .or_default()
            .insert(f.args().to_vec());
    }
    for rules in by_stratum.values() {
        match strategy {
            EvalStrategy::Naive => naive(rules, &mut db),
            EvalStrategy::SemiNaive => semi_naive(rules, &mut db),
        }
    }

    let mut out = Instance::new();
    for (rel, tuples) in &db {
        if p.is_output(rel) {
            out.extend(
                tuples
                    .iter()
                    .map(|t| Fact::from_parts(rel.clone(), t.clone())),
            );
        }
    }
    Ok(out)
}

fn naive(rules: &[&Rule], db: &mut Db) {
    loop {
        let mut derived = Vec::new();
        for rule in rules {
            fire(rule, db, None, &mut derived);
        }
        if !absorb(db, derived) {
            return;
        }
    }
}

fn semi_naive(rules: &[&Rule], db: &mut Db) {
    let heads: BTreeSet<&Arc<str>> = rules.iter().map(|r| &r.head.relation).collect();
    let mut derived = Vec::new();
    for rule in rules {
        fire(rule, db, None, &mut derived);
    }
    let mut delta = new_facts(db, derived);
    while !delta.is_empty() {
        merge(db, &delta);
        let mut derived = Vec::new();
        for rule in rules {
            let recursive = rule
                .body
                .iter()
                .enumerate()
                .filter(|(_, l)| !l.negated && heads.contains(&l.atom.relation));
            for (i, _) in recursive {
                fire(rule, db, Some((i, &delta)), &mut derived);
            }
        }
        delta = new_facts(db, derived);
    }
}

fn new_facts(db: &Db, derived: Vec<(Arc<str>, Tuple)>) -> Db {
    let mut delta: Db = HashMap::new();
    for (rel, t) in derived {
        if !db.get(&rel).is_some_and(|s| s.contains(&t)) {
            delta.entry(rel).or_default().insert(t);
        }
    }
    delta
}

fn merge(db: &mut Db, delta: &Db) {
    for (rel, ts) in delta {
        db.entry(rel.clone())
            .or_default()
            .extend(ts.iter().cloned());
    }
}

fn absorb(db: &mut Db, derived: Vec<(Arc<str>, Tuple)>) -> bool {
    let mut changed = false;
    for (rel, t) in derived {
        changed |= db.entry(rel).or_default().insert(t);
    }
    changed
}

type Binding = Vec<(Arc<str>, Constant)>;

fn lookup<'a>(b: &'a Binding, v: &Arc<str>) -> Option<&'a Constant> {
    b.iter().find(|(k, _)| k == v).map(|(_, c)| c)
}

fn unify(atom: &Atom, tuple: &[Constant], binding: &mut Binding) -> bool {
    let base = binding.len();
    for (term, value) in atom.terms.iter().zip(tuple) {
        let ok = match term {
            Term::Const(c) => c == value,
            Term::Var(v) => match lookup(binding, v) {
                Some(bound) => bound == value,
                None => {
                    binding.push((v.clone(), value.clone()));
                    true
                }
            },
        };
        if !ok {
            binding.truncate(base);
            return false;
        }
    }
    true
}

fn ground(atom: &Atom, binding: &Binding) -> Tuple {
    atom.terms
        .iter()
        .map(|t| match t {
            Term::Const(c) => c.clone(),
            Term::Var(v) => lookup(binding, v)
                .expect("range restriction binds every variable")
                .clone(),
        })
        .collect()
}

/// Derives all heads of `rule`; with `delta_at = (i, delta)`, body literal
/// `i` ranges over `delta` instead of the full database.
fn fire(rule: &Rule, db: &Db, delta_at: Option<(usize, &Db)>, out: &mut Vec<(Arc<str>, Tuple)>) {
    let mut binding = Vec::new();
    join(rule, 0, db, delta_at, &mut binding, out);
}

fn join(
    rule: &Rule,
    idx: usize,
    db: &Db,
    delta_at: Option<(usize, &Db)>,
    binding: &mut Binding,
    out: &mut Vec<(Arc<str>, Tuple)>,
) {
    if idx == rule.body.len() {
        let negations_hold = rule.negative().all(|a| {
            let t = ground(a, binding);
            !db.get(&a.relation).is_some_and(|s| s.contains(&t))
        });
        if negations_hold {
            out.push((rule.head.relation.clone(), ground(&rule.head, binding)));
        }
        return;
    }
    let lit = &rule.body[idx];
    if lit.negated {
        join(rule, idx + 1, db, delta_at, binding, out);
        return;
    }
    let source = match delta_at {
        Some((i, delta)) if i == idx => delta,
        _ => db,
    };
    let Some(tuples) = source.get(&lit.atom.relation) else {
        return;
    };
    for t in tuples {
        if t.len() != lit.atom.terms.len() {
            continue;
        }
        let base = binding.len();
        if unify(&lit.atom, t, binding) {
            join(rule, idx + 1, db, delta_at, binding, out);
            binding.truncate(base);
        }
    }
}
