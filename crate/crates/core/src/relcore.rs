//! Constants, schemas, ground facts and instances.
//!
//! Everything here is an immutable value type. Constants are interned as
//! shared strings and ordered lexicographically by name, which gives every
//! enumeration in the crate a deterministic order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

/// A domain constant. Equality and order are by symbol.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Constant(Arc<str>);

impl Constant {
    pub fn new(symbol: impl AsRef<str>) -> Self {
        Constant(Arc::from(symbol.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Constant {
    fn from(s: &str) -> Self {
        Constant::new(s)
    }
}

/// A relation name together with its arity.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelSymbol {
    pub name: Arc<str>,
    pub arity: usize,
}

impl RelSymbol {
    pub fn new(name: impl AsRef<str>, arity: usize) -> Self {
        RelSymbol {
            name: Arc::from(name.as_ref()),
            arity,
        }
    }
}

impl fmt::Display for RelSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("relation `{name}` declared with arity {first} and {second}")]
    ArityConflict {
        name: String,
        first: usize,
        second: usize,
    },
    #[error("relation `{0}` is not part of the schema")]
    UnknownRelation(String),
    #[error("fact `{fact}` has {got} arguments but `{name}` has arity {expected}")]
    WrongArity {
        fact: String,
        name: String,
        expected: usize,
        got: usize,
    },
}

/// A finite set of relation symbols with unique names.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Schema {
    relations: BTreeMap<Arc<str>, usize>,
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_symbols<I>(symbols: I) -> Result<Self, SchemaError>
    where
        I: IntoIterator<Item = RelSymbol>,
    {
        let mut schema = Schema::new();
        for sym in symbols {
            schema.insert(sym)?;
        }
        Ok(schema)
    }

    /// Builds a schema from `(name, arity)` pairs; panics on conflicting arities.
    pub fn of(pairs: &[(&str, usize)]) -> Self {
        Self::from_symbols(pairs.iter().map(|(n, a)| RelSymbol::new(n, *a)))
            .expect("conflicting arities in schema literal")
    }

    pub fn insert(&mut self, sym: RelSymbol) -> Result<(), SchemaError> {
        match self.relations.get(&sym.name) {
            Some(&arity) if arity != sym.arity => Err(SchemaError::ArityConflict {
                name: sym.name.to_string(),
                first: arity,
                second: sym.arity,
            }),
            Some(_) => Ok(()),
            None => {
                self.relations.insert(sym.name, sym.arity);
                Ok(())
            }
        }
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.relations.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.relations.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    /// Relations in name order.
    pub fn symbols(&self) -> impl Iterator<Item = RelSymbol> + '_ {
        self.relations.iter().map(|(name, &arity)| RelSymbol {
            name: name.clone(),
            arity,
        })
    }

    /// The name-wise first relation of arity at least one.
    pub fn first_non_nullary(&self) -> Option<RelSymbol> {
        self.symbols().find(|s| s.arity > 0)
    }

    pub fn union(&self, other: &Schema) -> Result<Schema, SchemaError> {
        let mut out = self.clone();
        for sym in other.symbols() {
            out.insert(sym)?;
        }
        Ok(out)
    }

    pub fn check_fact(&self, fact: &Fact) -> Result<(), SchemaError> {
        match self.arity(fact.relation()) {
            None => Err(SchemaError::UnknownRelation(fact.relation().to_string())),
            Some(a) if a != fact.arity() => Err(SchemaError::WrongArity {
                fact: fact.to_string(),
                name: fact.relation().to_string(),
                expected: a,
                got: fact.arity(),
            }),
            Some(_) => Ok(()),
        }
    }

    pub fn check_instance(&self, inst: &Instance) -> Result<(), SchemaError> {
        inst.iter().try_for_each(|f| self.check_fact(f))
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, s) in self.symbols().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{s}")?;
        }
        f.write_str("}")
    }
}

/// A ground atom `rel(c1,...,cn)`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fact {
    relation: Arc<str>,
    args: Vec<Constant>,
}

impl Fact {
    pub fn new(relation: impl AsRef<str>, args: Vec<Constant>) -> Self {
        Fact {
            relation: Arc::from(relation.as_ref()),
            args,
        }
    }

    pub(crate) fn from_parts(relation: Arc<str>, args: Vec<Constant>) -> Self {
        Fact { relation, args }
    }

    /// Convenience constructor from string slices.
    pub fn make(relation: &str, args: &[&str]) -> Self {
        Fact::new(relation, args.iter().map(Constant::new).collect())
    }

    pub fn relation(&self) -> &str {
        &self.relation
    }

    pub(crate) fn relation_arc(&self) -> &Arc<str> {
        &self.relation
    }

    pub fn args(&self) -> &[Constant] {
        &self.args
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_nullary(&self) -> bool {
        self.args.is_empty()
    }

    pub fn symbol(&self) -> RelSymbol {
        RelSymbol {
            name: self.relation.clone(),
            arity: self.args.len(),
        }
    }

    pub fn constants(&self) -> impl Iterator<Item = &Constant> {
        self.args.iter()
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(a.as_str())?;
        }
        f.write_str(")")
    }
}

impl fmt::Debug for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Fact {
    type Err = FactParseError;

    /// Parses a single fact; the trailing period is optional.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = FactParser::new(s);
        p.skip_ws();
        let fact = p.fact()?;
        p.skip_ws();
        if p.peek() == Some('.') {
            p.bump();
            p.skip_ws();
        }
        if let Some(c) = p.peek() {
            return Err(p.error(format!("unexpected `{c}` after fact")));
        }
        Ok(fact)
    }
}

/// A finite set of facts.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Instance {
    facts: BTreeSet<Fact>,
}

impl Instance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, fact: Fact) -> bool {
        self.facts.insert(fact)
    }

    pub fn remove(&mut self, fact: &Fact) -> bool {
        self.facts.remove(fact)
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.facts.contains(fact)
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    /// Facts in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = &Fact> + '_ {
        self.facts.iter()
    }

    pub fn facts(&self) -> &BTreeSet<Fact> {
        &self.facts
    }

    pub fn union(&self, other: &Instance) -> Instance {
        let mut out = self.clone();
        out.extend(other.iter().cloned());
        out
    }

    pub fn difference(&self, other: &Instance) -> Instance {
        self.facts.difference(&other.facts).cloned().collect()
    }

    pub fn is_subset(&self, other: &Instance) -> bool {
        self.facts.is_subset(&other.facts)
    }

    pub fn with(&self, fact: Fact) -> Instance {
        let mut out = self.clone();
        out.insert(fact);
        out
    }

    /// Facts of one relation, in canonical order.
    pub fn relation<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Fact> + 'a {
        let start = Fact::new(name, Vec::new());
        self.facts
            .range(start..)
            .take_while(move |f| f.relation() == name)
    }

    pub fn restrict_to(&self, schema: &Schema) -> Instance {
        self.iter()
            .filter(|f| schema.arity(f.relation()) == Some(f.arity()))
            .cloned()
            .collect()
    }

    /// Parses the line-oriented fact text format.
    pub fn parse(text: &str) -> Result<Instance, FactParseError> {
        let mut p = FactParser::new(text);
        let mut inst = Instance::new();
        loop {
            p.skip_ws();
            if p.peek().is_none() {
                break;
            }
            let fact = p.fact()?;
            p.skip_ws();
            if p.peek() != Some('.') {
                return Err(p.error("expected `.` after fact"));
            }
            p.bump();
            inst.insert(fact);
        }
        Ok(inst)
    }

    /// Renders one fact per line, `rel(a,b).`, in canonical order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for f in &self.facts {
            s.push_str(&f.to_string());
            s.push_str(".\n");
        }
        s
    }

    /// Compact single-line rendering used in traces: `a(x);b(y)` or `-`.
    pub fn to_inline(&self) -> String {
        if self.facts.is_empty() {
            return "-".to_string();
        }
        self.facts
            .iter()
            .map(|f| f.to_string())
            .collect::<Vec<_>>()
            .join(";")
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, fact) in self.facts.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{fact}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromIterator<Fact> for Instance {
    fn from_iter<T: IntoIterator<Item = Fact>>(iter: T) -> Self {
        Instance {
            facts: iter.into_iter().collect(),
        }
    }
}

impl Extend<Fact> for Instance {
    fn extend<T: IntoIterator<Item = Fact>>(&mut self, iter: T) {
        self.facts.extend(iter)
    }
}

impl IntoIterator for Instance {
    type Item = Fact;
    type IntoIter = std::collections::btree_set::IntoIter<Fact>;

    fn into_iter(self) -> Self::IntoIter {
        self.facts.into_iter()
    }
}

impl<'a> IntoIterator for &'a Instance {
    type Item = &'a Fact;
    type IntoIter = std::collections::btree_set::Iter<'a, Fact>;

    fn into_iter(self) -> Self::IntoIter {
        self.facts.iter()
    }
}

impl FromStr for Instance {
    type Err = FactParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Instance::parse(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct FactParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

struct FactParser<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl<'a> FactParser<'a> {
    fn new(text: &'a str) -> Self {
        FactParser {
            chars: text.chars().peekable(),
            line: 1,
            column: 1,
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn error(&self, message: impl Into<String>) -> FactParseError {
        FactParseError {
            line: self.line,
            column: self.column,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '%' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn ident(&mut self) -> Result<String, FactParseError> {
        match self.peek() {
            Some(c) if c.is_ascii_lowercase() => {}
            Some(c) => return Err(self.error(format!("expected identifier, found `{c}`"))),
            None => return Err(self.error("expected identifier, found end of input")),
        }
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        Ok(s)
    }

    fn fact(&mut self) -> Result<Fact, FactParseError> {
        let rel = self.ident()?;
        self.skip_ws();
        if self.peek() != Some('(') {
            return Err(self.error("expected `(`"));
        }
        self.bump();
        let mut args = Vec::new();
        self.skip_ws();
        if self.peek() == Some(')') {
            self.bump();
            return Ok(Fact::new(rel, args));
        }
        loop {
            self.skip_ws();
            args.push(Constant::new(self.ident()?));
            self.skip_ws();
            match self.bump() {
                Some(',') => continue,
                Some(')') => break,
                Some(c) => return Err(self.error(format!("expected `,` or `)`, found `{c}`"))),
                None => return Err(self.error("unterminated fact")),
            }
        }
        Ok(Fact::new(rel, args))
    }
}

/// The set of constants occurring in `inst`. Nullary facts contribute nothing.
pub fn adom(inst: &Instance) -> BTreeSet<Constant> {
    inst.iter().flat_map(|f| f.constants().cloned()).collect()
}

/// All facts over `schema` whose arguments are drawn from `constants`.
pub fn herbrand_slice(
    schema: &Schema,
    constants: &BTreeSet<Constant>,
    include_nullary: bool,
) -> BTreeSet<Fact> {
    let pool: Vec<&Constant> = constants.iter().collect();
    let mut out = BTreeSet::new();
    for sym in schema.symbols() {
        if sym.arity == 0 {
            if include_nullary {
                out.insert(Fact::from_parts(sym.name.clone(), Vec::new()));
            }
            continue;
        }
        for tuple in Tuples::new(pool.len(), sym.arity) {
            let args = tuple.iter().map(|&i| pool[i].clone()).collect();
            out.insert(Fact::from_parts(sym.name.clone(), args));
        }
    }
    out
}

/// Lexicographic enumeration of `{0..n}^k`.
pub(crate) struct Tuples {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Tuples {
    pub(crate) fn new(n: usize, k: usize) -> Self {
        let current = if n == 0 && k > 0 {
            None
        } else {
            Some(vec![0; k])
        };
        Tuples { n, current }
    }
}

impl Iterator for Tuples {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let cur = self.current.take()?;
        let mut next = cur.clone();
        let mut i = next.len();
        let mut advanced = false;
        while i > 0 {
            i -= 1;
            if next[i] + 1 < self.n {
                next[i] += 1;
                advanced = true;
                break;
            }
            next[i] = 0;
        }
        if advanced {
            self.current = Some(next);
        }
        Some(cur)
    }
}

/// The canonical constants `c1..cn` used by bounded enumeration.
pub fn canonical_constants(n: usize) -> BTreeSet<Constant> {
    (1..=n).map(|i| Constant::new(format!("c{i}"))).collect()
}

/// Every instance over the canonical constants `{c1..c_domain_size}` with at
/// most `max_facts` facts, smallest first, each exactly once.
///
/// Nullary relations are part of the enumerated Herbrand slice.
pub fn enumerate_instances(
    schema: &Schema,
    domain_size: usize,
    max_facts: usize,
) -> InstanceEnumerator {
    let universe: Vec<Fact> = herbrand_slice(schema, &canonical_constants(domain_size), true)
        .into_iter()
        .collect();
    InstanceEnumerator::new(universe, max_facts)
}

/// Iterator over the subsets of a fact universe, ordered by size and then
/// lexicographically by index.
pub struct InstanceEnumerator {
    universe: Vec<Fact>,
    max_facts: usize,
    size: usize,
    combo: Option<Vec<usize>>,
}

impl InstanceEnumerator {
    pub fn new(universe: Vec<Fact>, max_facts: usize) -> Self {
        InstanceEnumerator {
            universe,
            max_facts,
            size: 0,
            combo: Some(Vec::new()),
        }
    }

    fn advance(&mut self) {
        let n = self.universe.len();
        let Some(mut combo) = self.combo.take() else {
            return;
        };
        let k = combo.len();
        // next k-combination of 0..n
        let mut i = k;
        while i > 0 {
            i -= 1;
            if combo[i] < n - k + i {
                combo[i] += 1;
                for j in i + 1..k {
                    combo[j] = combo[j - 1] + 1;
                }
                self.combo = Some(combo);
                return;
            }
        }
        self.size += 1;
        if self.size <= self.max_facts && self.size <= n {
            self.combo = Some((0..self.size).collect());
        }
    }
}

impl Iterator for InstanceEnumerator {
    type Item = Instance;

    fn next(&mut self) -> Option<Instance> {
        let combo = self.combo.as_ref()?;
        let inst = combo.iter().map(|&i| self.universe[i].clone()).collect();
        self.advance();
        Some(inst)
    }
}

/// `count` distinct constants `f1, f2, ...` not contained in `avoid`.
pub fn fresh_constants(avoid: &BTreeSet<Constant>, count: usize) -> Vec<Constant> {
    fresh_with_prefix("f", avoid, count)
}

pub(crate) fn fresh_with_prefix(
    prefix: &str,
    avoid: &BTreeSet<Constant>,
    count: usize,
) -> Vec<Constant> {
    let mut out = Vec::with_capacity(count);
    let mut i = 1usize;
    while out.len() < count {
        let c = Constant::new(format!("{prefix}{i}"));
        if !avoid.contains(&c) {
            out.push(c);
        }
        i += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consts(names: &[&str]) -> BTreeSet<Constant> {
        names.iter().map(Constant::new).collect()
    }

    #[test]
    fn adom_examples() {
        assert!(adom(&Instance::new()).is_empty());
        let i: Instance = "e(a,b).".parse().unwrap();
        assert_eq!(adom(&i), consts(&["a", "b"]));
        let i: Instance = "e(a,b). e(b,c). p().".parse().unwrap();
        assert_eq!(adom(&i), consts(&["a", "b", "c"]));
    }

    #[test]
    fn herbrand_slice_examples() {
        let e = Schema::of(&[("e", 2)]);
        let s = herbrand_slice(&e, &consts(&["a"]), false);
        assert_eq!(s, [Fact::make("e", &["a", "a"])].into_iter().collect());

        let s = herbrand_slice(&e, &consts(&["a", "b"]), false);
        let expected: BTreeSet<Fact> = [["a", "a"], ["a", "b"], ["b", "a"], ["b", "b"]]
            .iter()
            .map(|t| Fact::make("e", t))
            .collect();
        assert_eq!(s, expected);

        let eq = Schema::of(&[("e", 2), ("q", 0)]);
        let s = herbrand_slice(&eq, &consts(&["a"]), true);
        let expected: BTreeSet<Fact> = [Fact::make("e", &["a", "a"]), Fact::make("q", &[])]
            .into_iter()
            .collect();
        assert_eq!(s, expected);
        assert_eq!(herbrand_slice(&eq, &consts(&["a"]), false).len(), 1);
    }

    #[test]
    fn herbrand_slice_empty_constants_keeps_nullary() {
        let eq = Schema::of(&[("e", 2), ("q", 0)]);
        let s = herbrand_slice(&eq, &BTreeSet::new(), true);
        assert_eq!(s.len(), 1);
        assert!(s.contains(&Fact::make("q", &[])));
    }

    #[test]
    fn enumerate_examples() {
        let e = Schema::of(&[("e", 2)]);
        let all: Vec<Instance> = enumerate_instances(&e, 1, 1).collect();
        assert_eq!(all.len(), 2);
        assert!(all[0].is_empty());
        assert_eq!(all[1], "e(c1,c1).".parse().unwrap());

        let all: Vec<Instance> = enumerate_instances(&e, 0, 3).collect();
        assert_eq!(all, vec![Instance::new()]);

        assert_eq!(enumerate_instances(&e, 2, 4).count(), 16);
    }

    #[test]
    fn enumerate_is_distinct_and_size_ordered() {
        let s = Schema::of(&[("e", 2), ("q", 0)]);
        let all: Vec<Instance> = enumerate_instances(&s, 2, 3).collect();
        let distinct: BTreeSet<&Instance> = all.iter().collect();
        assert_eq!(distinct.len(), all.len());
        // 5-fact universe, subsets of size <= 3
        assert_eq!(all.len(), 1 + 5 + 10 + 10);
        assert!(all.windows(2).all(|w| w[0].len() <= w[1].len()));
    }

    #[test]
    fn fresh_examples() {
        let f = fresh_constants(&consts(&["a", "b"]), 1);
        assert_eq!(f.len(), 1);
        assert!(!["a", "b"].contains(&f[0].as_str()));

        let f = fresh_constants(&BTreeSet::new(), 2);
        assert_ne!(f[0], f[1]);

        let first = fresh_constants(&BTreeSet::new(), 1);
        let again = fresh_constants(&first.iter().cloned().collect(), 1);
        assert_ne!(first[0], again[0]);
    }

    #[test]
    fn fact_text_roundtrip() {
        let text = "e(a,b).\ne(b,c).\np().\n";
        let inst = Instance::parse(text).unwrap();
        assert_eq!(inst.to_text(), text);
    }

    #[test]
    fn fact_text_whitespace_and_comments() {
        let inst = Instance::parse("% header\n  e ( a , b ) . % trailing\n q( ).").unwrap();
        assert_eq!(inst.to_text(), "e(a,b).\nq().\n");
    }

    #[test]
    fn fact_text_errors_have_positions() {
        let err = Instance::parse("e(a,b).\ne(A,b).").unwrap_err();
        assert_eq!(err.line, 2);
        assert_eq!(err.column, 3);
        assert!(Instance::parse("e(a,b)").is_err());
        assert!("e(a,b) x".parse::<Fact>().is_err());
    }

    #[test]
    fn schema_rejects_arity_conflict() {
        let mut s = Schema::of(&[("e", 2)]);
        assert!(s.insert(RelSymbol::new("e", 3)).is_err());
        assert!(s.insert(RelSymbol::new("e", 2)).is_ok());
        assert!(s.check_fact(&Fact::make("e", &["a"])).is_err());
        assert!(s.check_fact(&Fact::make("f", &["a"])).is_err());
    }
}
