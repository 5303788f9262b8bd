//! Bounded brute-force checks for monotonicity and its weakened forms.
//!
//! Each check enumerates base instances over canonical constants
//! `c1..c_d` (smallest first) and candidate additions, and reports the
//! first addition that makes some output fact disappear. Additions draw
//! their new constants from a reserved pool `f1, f2, ...` that never
//! overlaps the canonical constants. A `Holds` verdict is evidence within
//! the bounds only; a refutation is a replayable counterexample.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::datalog::{eval_query, Query, QueryError};
use crate::relcore::{
    adom, canonical_constants, enumerate_instances, fresh_constants, herbrand_slice, Constant,
    Fact, Instance, InstanceEnumerator,
};

/// Finite bounds for the universally quantified definitions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Bounds {
    pub domain_size: usize,
    pub max_facts: usize,
    /// Fresh constants available to additions.
    pub extra_fresh: usize,
}

impl Bounds {
    pub const fn new(domain_size: usize, max_facts: usize, extra_fresh: usize) -> Self {
        Bounds {
            domain_size,
            max_facts,
            extra_fresh,
        }
    }
}

impl fmt::Display for Bounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{}",
            self.domain_size, self.max_facts, self.extra_fresh
        )
    }
}

impl FromStr for Bounds {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(format!("bounds must be `d,f,x`, got `{s}`"));
        }
        let n = |p: &str| {
            p.parse::<usize>()
                .map_err(|e| format!("bad bound `{p}`: {e}"))
        };
        Ok(Bounds::new(n(parts[0])?, n(parts[1])?, n(parts[2])?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MonoClass {
    Monotone,
    AdomMonotone,
    /// Single added non-nullary fact over new constants only.
    WeakAdomMonotone,
    /// Added nullary-free instance with an active domain disjoint from the base.
    WeakAdomInstance,
}

impl MonoClass {
    pub const ALL: [MonoClass; 4] = [
        MonoClass::Monotone,
        MonoClass::AdomMonotone,
        MonoClass::WeakAdomMonotone,
        MonoClass::WeakAdomInstance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MonoClass::Monotone => "monotone",
            MonoClass::AdomMonotone => "adom-monotone",
            MonoClass::WeakAdomMonotone => "weak-adom-monotone",
            MonoClass::WeakAdomInstance => "weak-adom-monotone-instance",
        }
    }

    /// Whether `addition` is a legal extension of `base` for this class.
    pub fn admits(self, base: &Instance, addition: &Instance) -> bool {
        let base_dom = adom(base);
        let single = || addition.iter().next().filter(|_| addition.len() == 1);
        match self {
            MonoClass::Monotone => true,
            MonoClass::AdomMonotone => {
                single().is_some_and(|f| f.constants().any(|c| !base_dom.contains(c)))
            }
            MonoClass::WeakAdomMonotone => single()
                .is_some_and(|f| !f.is_nullary() && f.constants().all(|c| !base_dom.contains(c))),
            MonoClass::WeakAdomInstance => addition
                .iter()
                .all(|f| !f.is_nullary() && f.constants().all(|c| !base_dom.contains(c))),
        }
    }
}

impl fmt::Display for MonoClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MonoClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MonoClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown class `{s}`"))
    }
}

/// `lost_witness ∈ Q(base)` but `lost_witness ∉ Q(base ∪ addition)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    pub base: Instance,
    pub addition: Instance,
    pub lost_witness: Fact,
}

impl Counterexample {
    /// Re-evaluates both sides and checks the class side condition.
    pub fn validate(&self, class: MonoClass, q: &Query) -> Result<bool, QueryError> {
        if !class.admits(&self.base, &self.addition) {
            return Ok(false);
        }
        self.replays(q)
    }

    pub fn replays(&self, q: &Query) -> Result<bool, QueryError> {
        let before = eval_query(q, &self.base)?;
        let after = eval_query(q, &self.base.union(&self.addition))?;
        Ok(before.contains(&self.lost_witness) && !after.contains(&self.lost_witness))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Holds,
    Refuted(Counterexample),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassVerdict {
    pub class: MonoClass,
    pub outcome: Outcome,
    pub bounds: Bounds,
}

impl ClassVerdict {
    pub fn holds(&self) -> bool {
        matches!(self.outcome, Outcome::Holds)
    }

    pub fn counterexample(&self) -> Option<&Counterexample> {
        match &self.outcome {
            Outcome::Holds => None,
            Outcome::Refuted(c) => Some(c),
        }
    }

    /// `class=<name> result=holds|refuted bounds=d,f,x`, followed for
    /// refutations by `% base`, `% addition` and `% lost` fact blocks.
    pub fn to_text(&self) -> String {
        let result = if self.holds() { "holds" } else { "refuted" };
        let mut s = format!(
            "class={} result={} bounds={}\n",
            self.class, result, self.bounds
        );
        if let Some(c) = self.counterexample() {
            s.push_str("% base\n");
            s.push_str(&c.base.to_text());
            s.push_str("% addition\n");
            s.push_str(&c.addition.to_text());
            s.push_str("% lost\n");
            s.push_str(&format!("{}.\n", c.lost_witness));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ReportParseError {
    pub line: usize,
    pub message: String,
}

/// Parses a sequence of serialized verdicts.
pub fn parse_verdicts(text: &str) -> Result<Vec<ClassVerdict>, ReportParseError> {
    let err = |line: usize, message: String| ReportParseError { line, message };
    let mut out = Vec::new();
    let mut lines = text.lines().enumerate().peekable();
    while let Some((no, line)) = lines.next() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut class = None;
        let mut refuted = None;
        let mut bounds = None;
        for kv in line.split_whitespace() {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| err(no + 1, format!("expected key=value, got `{kv}`")))?;
            match k {
                "class" => class = Some(v.parse::<MonoClass>().map_err(|e| err(no + 1, e))?),
                "result" => {
                    refuted = Some(match v {
                        "holds" => false,
                        "refuted" => true,
                        _ => return Err(err(no + 1, format!("bad result `{v}`"))),
                    })
                }
                "bounds" => bounds = Some(v.parse::<Bounds>().map_err(|e| err(no + 1, e))?),
                _ => return Err(err(no + 1, format!("unknown key `{k}`"))),
            }
        }
        let (Some(class), Some(refuted), Some(bounds)) = (class, refuted, bounds) else {
            return Err(err(
                no + 1,
                "verdict line lacks class, result or bounds".into(),
            ));
        };
        let outcome = if refuted {
            let mut blocks: Vec<String> = Vec::new();
            while let Some((_, l)) = lines.peek() {
                if l.starts_with("class=") {
                    break;
                }
                let (_, l) = lines.next().expect("peeked");
                match l.trim() {
                    "% base" | "% addition" | "% lost" => blocks.push(String::new()),
                    other => match blocks.last_mut() {
                        Some(b) => {
                            b.push_str(other);
                            b.push('\n');
                        }
                        None if other.is_empty() => {}
                        None => return Err(err(no + 1, "fact outside a block".into())),
                    },
                }
            }
            if blocks.len() != 3 {
                return Err(err(
                    no + 1,
                    "expected base, addition and lost blocks".into(),
                ));
            }
            let parse = |s: &str| Instance::parse(s).map_err(|e| err(no + 1, e.to_string()));
            let base = parse(&blocks[0])?;
            let addition = parse(&blocks[1])?;
            let lost = parse(&blocks[2])?;
            let lost_witness = match lost.len() {
                1 => lost.into_iter().next().expect("one fact"),
                _ => return Err(err(no + 1, "lost block must hold one fact".into())),
            };
            Outcome::Refuted(Counterexample {
                base,
                addition,
                lost_witness,
            })
        } else {
            Outcome::Holds
        };
        out.push(ClassVerdict {
            class,
            outcome,
            bounds,
        });
    }
    Ok(out)
}

struct Evaluator<'q> {
    q: &'q Query,
    cache: HashMap<Instance, Instance>,
}

impl<'q> Evaluator<'q> {
    fn new(q: &'q Query) -> Self {
        Evaluator {
            q,
            cache: HashMap::new(),
        }
    }

    fn eval(&mut self, inst: &Instance) -> Result<Instance, QueryError> {
        if let Some(out) = self.cache.get(inst) {
            return Ok(out.clone());
        }
        let out = eval_query(self.q, inst)?;
        self.cache.insert(inst.clone(), out.clone());
        Ok(out)
    }

    /// The first fact of `Q(base)` missing from `Q(base ∪ addition)`.
    fn lost(&mut self, base: &Instance, addition: &Instance) -> Result<Option<Fact>, QueryError> {
        let before = self.eval(base)?;
        if before.is_empty() {
            return Ok(None);
        }
        let after = self.eval(&base.union(addition))?;
        let lost = before.iter().find(|w| !after.contains(w)).cloned();
        Ok(lost)
    }
}

fn reserved_fresh(b: &Bounds) -> Vec<Constant> {
    fresh_constants(&canonical_constants(b.domain_size), b.extra_fresh)
}

/// Candidate single-fact additions to `base` for `class`, in relation-name
/// then constant order.
fn single_additions(class: MonoClass, q: &Query, base: &Instance, fresh: &[Constant]) -> Vec<Fact> {
    let base_dom = adom(base);
    let pool: BTreeSet<Constant> = match class {
        MonoClass::WeakAdomMonotone => fresh.iter().cloned().collect(),
        _ => base_dom.iter().chain(fresh).cloned().collect(),
    };
    let include_nullary = class == MonoClass::Monotone;
    herbrand_slice(q.input_schema(), &pool, include_nullary)
        .into_iter()
        .filter(|f| !base.contains(f))
        .filter(|f| class.admits(base, &Instance::from_iter([f.clone()])))
        .collect()
}

fn check_single(class: MonoClass, q: &Query, b: Bounds) -> Result<ClassVerdict, QueryError> {
    let mut ev = Evaluator::new(q);
    let fresh = reserved_fresh(&b);
    for base in enumerate_instances(q.input_schema(), b.domain_size, b.max_facts) {
        if ev.eval(&base)?.is_empty() {
            continue;
        }
        for f in single_additions(class, q, &base, &fresh) {
            let addition = Instance::from_iter([f]);
            if ev.lost(&base, &addition)?.is_some() {
                let cex = shrink(&mut ev, class, base, addition, false)?;
                return Ok(ClassVerdict {
                    class,
                    outcome: Outcome::Refuted(cex),
                    bounds: b,
                });
            }
        }
    }
    Ok(ClassVerdict {
        class,
        outcome: Outcome::Holds,
        bounds: b,
    })
}

/// Greedily drops facts from the base (and, if allowed, from the addition)
/// while some output fact is still lost.
fn shrink(
    ev: &mut Evaluator,
    class: MonoClass,
    mut base: Instance,
    mut addition: Instance,
    shrink_addition: bool,
) -> Result<Counterexample, QueryError> {
    'outer: loop {
        let facts: Vec<Fact> = base.iter().cloned().collect();
        for f in &facts {
            let mut smaller = base.clone();
            smaller.remove(f);
            if class.admits(&smaller, &addition) && ev.lost(&smaller, &addition)?.is_some() {
                base = smaller;
                continue 'outer;
            }
        }
        if shrink_addition && addition.len() > 1 {
            let facts: Vec<Fact> = addition.iter().cloned().collect();
            for f in &facts {
                let mut smaller = addition.clone();
                smaller.remove(f);
                if ev.lost(&base, &smaller)?.is_some() {
                    addition = smaller;
                    continue 'outer;
                }
            }
        }
        break;
    }
    let lost_witness = ev
        .lost(&base, &addition)?
        .expect("shrinking preserves the violation");
    Ok(Counterexample {
        base,
        addition,
        lost_witness,
    })
}

pub fn check_monotone(q: &Query, b: Bounds) -> Result<ClassVerdict, QueryError> {
    check_single(MonoClass::Monotone, q, b)
}

pub fn check_adom_monotone(q: &Query, b: Bounds) -> Result<ClassVerdict, QueryError> {
    check_single(MonoClass::AdomMonotone, q, b)
}

pub fn check_weak_adom_monotone(q: &Query, b: Bounds) -> Result<ClassVerdict, QueryError> {
    check_single(MonoClass::WeakAdomMonotone, q, b)
}

/// Instance form: pairs `(I, I′)` with `I′` nullary-free, over fresh
/// constants only, with at most `max_facts` facts.
pub fn check_weak_adom_instance(q: &Query, b: Bounds) -> Result<ClassVerdict, QueryError> {
    let class = MonoClass::WeakAdomInstance;
    let mut ev = Evaluator::new(q);
    let fresh: BTreeSet<Constant> = reserved_fresh(&b).into_iter().collect();
    let universe: Vec<Fact> = herbrand_slice(q.input_schema(), &fresh, false)
        .into_iter()
        .collect();
    let additions: Vec<Instance> = InstanceEnumerator::new(universe, b.max_facts)
        .filter(|i| !i.is_empty())
        .collect();
    for base in enumerate_instances(q.input_schema(), b.domain_size, b.max_facts) {
        if ev.eval(&base)?.is_empty() {
            continue;
        }
        for addition in &additions {
            if ev.lost(&base, addition)?.is_some() {
                let cex = shrink(&mut ev, class, base, addition.clone(), true)?;
                return Ok(ClassVerdict {
                    class,
                    outcome: Outcome::Refuted(cex),
                    bounds: b,
                });
            }
        }
    }
    Ok(ClassVerdict {
        class,
        outcome: Outcome::Holds,
        bounds: b,
    })
}

pub fn check_class(class: MonoClass, q: &Query, b: Bounds) -> Result<ClassVerdict, QueryError> {
    match class {
        MonoClass::WeakAdomInstance => check_weak_adom_instance(q, b),
        single => check_single(single, q, b),
    }
}

/// All four verdicts plus cross-checks between them.
#[derive(Clone, Debug)]
pub struct ClassReport {
    pub verdicts: Vec<ClassVerdict>,
    /// Provable implications between the single-fact checks that failed to
    /// hold; non-empty only on a checker bug.
    pub inconsistencies: Vec<String>,
    /// Set when the single-fact and instance forms of weak-adom-monotonicity
    /// disagree within the bounds.
    pub weak_form_divergence: Option<String>,
}

impl ClassReport {
    pub fn verdict(&self, class: MonoClass) -> &ClassVerdict {
        self.verdicts
            .iter()
            .find(|v| v.class == class)
            .expect("report covers every class")
    }

    pub fn holds(&self, class: MonoClass) -> bool {
        self.verdict(class).holds()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for v in &self.verdicts {
            s.push_str(&v.to_text());
        }
        for i in &self.inconsistencies {
            s.push_str(&format!("% inconsistency: {i}\n"));
        }
        if let Some(d) = &self.weak_form_divergence {
            s.push_str(&format!("% divergence: {d}\n"));
        }
        s
    }
}

pub fn classify_query(q: &Query, b: Bounds) -> Result<ClassReport, QueryError> {
    let verdicts = MonoClass::ALL
        .into_iter()
        .map(|c| check_class(c, q, b))
        .collect::<Result<Vec<_>, _>>()?;
    let holds = |c: MonoClass| verdicts.iter().any(|v| v.class == c && v.holds());
    let mut inconsistencies = Vec::new();
    let chain = [
        MonoClass::Monotone,
        MonoClass::AdomMonotone,
        MonoClass::WeakAdomMonotone,
    ];
    for (i, &strong) in chain.iter().enumerate() {
        for &weak in &chain[i + 1..] {
            if holds(strong) && !holds(weak) {
                inconsistencies.push(format!("{strong} holds but {weak} is refuted"));
            }
        }
    }
    // Counterexamples to weaker classes must also refute the stronger ones.
    for (i, &weak) in chain.iter().enumerate().rev() {
        let Some(cex) = verdicts
            .iter()
            .find(|v| v.class == weak)
            .and_then(|v| v.counterexample())
        else {
            continue;
        };
        for &strong in &chain[..i] {
            if !cex.validate(strong, q)? {
                inconsistencies.push(format!(
                    "{weak} counterexample is not accepted as a {strong} counterexample"
                ));
            }
        }
    }
    let single = holds(MonoClass::WeakAdomMonotone);
    let instance = holds(MonoClass::WeakAdomInstance);
    let weak_form_divergence = (single != instance).then(|| {
        format!(
            "weak-adom-monotone {} but weak-adom-monotone-instance {} at bounds {b}",
            if single { "holds" } else { "is refuted" },
            if instance { "holds" } else { "is refuted" },
        )
    });
    Ok(ClassReport {
        verdicts,
        inconsistencies,
        weak_form_divergence,
    })
}
