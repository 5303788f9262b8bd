use std::sync::Arc;

use super::{Atom, Literal, Program, ProgramError, Rule, Term};
use crate::relcore::{Constant, Schema};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Lower(String),
    Upper(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Turnstile,
    At,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> ProgramError {
    ProgramError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Spanned>, ProgramError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);
    while let Some(&c) = chars.peek() {
        let (l, col) = (line, column);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
        };
        match c {
            c if c.is_whitespace() => bump(&mut chars),
            '%' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    bump(&mut chars);
                }
            }
            '(' | ')' | ',' | '.' | '@' => {
                bump(&mut chars);
                let tok = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    '.' => Tok::Dot,
                    _ => Tok::At,
                };
                out.push(Spanned {
                    tok,
                    line: l,
                    column: col,
                });
            }
            ':' => {
                bump(&mut chars);
                if chars.peek() != Some(&'-') {
                    return Err(syntax(l, col, "expected `:-`"));
                }
                bump(&mut chars);
                out.push(Spanned {
                    tok: Tok::Turnstile,
                    line: l,
                    column: col,
                });
            }
            c if c.is_ascii_alphabetic() => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(c);
                        bump(&mut chars);
                    } else {
                        break;
                    }
                }
                let tok = if c.is_ascii_uppercase() {
                    Tok::Upper(s)
                } else {
                    Tok::Lower(s)
                };
                out.push(Spanned {
                    tok,
                    line: l,
                    column: col,
                });
            }
            other => return Err(syntax(l, col, format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    eof: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map(|s| (s.line, s.column))
            .unwrap_or(self.eof)
    }

    fn err(&self, message: impl Into<String>) -> ProgramError {
        let (l, c) = self.here();
        syntax(l, c, message)
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ProgramError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn lower(&mut self) -> Result<String, ProgramError> {
        match self.peek() {
            Some(Tok::Lower(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.err("expected lowercase identifier")),
        }
    }

    fn atom(&mut self) -> Result<Atom, ProgramError> {
        let relation = self.lower()?;
        self.expect(Tok::LParen, "`(`")?;
        let mut terms = Vec::new();
        if self.peek() == Some(&Tok::RParen) {
            self.pos += 1;
        } else {
            loop {
                let term = match self.peek() {
                    Some(Tok::Lower(s)) => Term::Const(Constant::new(s)),
                    Some(Tok::Upper(s)) => Term::Var(Arc::from(s.as_str())),
                    _ => return Err(self.err("expected a term")),
                };
                self.pos += 1;
                terms.push(term);
                match self.peek() {
                    Some(Tok::Comma) => self.pos += 1,
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.err("expected `,` or `)`")),
                }
            }
        }
        Ok(Atom {
            relation: Arc::from(relation.as_str()),
            terms,
        })
    }

    fn literal(&mut self) -> Result<Literal, ProgramError> {
        let negated = matches!(self.peek(), Some(Tok::Lower(s)) if s == "not")
            && matches!(
                self.toks.get(self.pos + 1).map(|s| &s.tok),
                Some(Tok::Lower(_))
            );
        if negated {
            self.pos += 1;
        }
        Ok(Literal {
            atom: self.atom()?,
            negated,
        })
    }

    fn rule(&mut self) -> Result<Rule, ProgramError> {
        let head = self.atom()?;
        let mut body = Vec::new();
        if self.peek() == Some(&Tok::Turnstile) {
            self.pos += 1;
            loop {
                body.push(self.literal()?);
                if self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::Dot, "`.` at end of rule")?;
        Ok(Rule { head, body })
    }

    fn directive(&mut self, outputs: &mut Vec<String>) -> Result<(), ProgramError> {
        self.expect(Tok::At, "`@`")?;
        let name = self.lower()?;
        if name != "output" {
            return Err(self.err(format!("unknown directive `@{name}`")));
        }
        outputs.push(self.lower()?);
        self.expect(Tok::Dot, "`.` after directive")
    }
}

/// Parses and validates a program.
///
/// Input relations are those never occurring in a rule head; `@output rel.`
/// lines select the output relations (all derived relations when absent).
pub fn parse_program(text: &str) -> Result<Program, ProgramError> {
    parse_program_with_edb(text, &Schema::new())
}

/// Like [`parse_program`], adding input relations the rules do not mention.
pub fn parse_program_with_edb(text: &str, extra_edb: &Schema) -> Result<Program, ProgramError> {
    let toks = lex(text)?;
    let eof = {
        let lines = text.split('\n').count();
        let last = text.rsplit('\n').next().unwrap_or("");
        (lines, last.chars().count() + 1)
    };
    let mut p = Parser { toks, pos: 0, eof };
    let mut rules = Vec::new();
    let mut outputs = Vec::new();
    while p.peek().is_some() {
        if p.peek() == Some(&Tok::At) {
            p.directive(&mut outputs)?;
        } else {
            rules.push(p.rule()?);
        }
    }
    Program::new(rules, outputs, extra_edb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relcore::RelSymbol;

    #[test]
    fn nullary_head() {
        let p = parse_program("p1() :- e(X,Y).").unwrap();
        assert_eq!(p.rules().len(), 1);
        assert_eq!(p.edb(), &Schema::of(&[("e", 2)]));
        assert_eq!(p.idb(), &Schema::of(&[("p1", 0)]));
    }

    #[test]
    fn self_negation_parses() {
        assert!(parse_program("a(X) :- b(X), not a(X).").is_ok());
    }

    #[test]
    fn unguarded_negation_rejected() {
        let err = parse_program("p(X) :- not e(X,X).").unwrap_err();
        assert!(matches!(err, ProgramError::RangeRestriction { ref var, .. } if var == "X"));
    }

    #[test]
    fn unguarded_head_rejected() {
        assert!(matches!(
            parse_program("p(X,Y) :- e(X,X)."),
            Err(ProgramError::RangeRestriction { .. })
        ));
        assert!(matches!(
            parse_program("p(X)."),
            Err(ProgramError::RangeRestriction { .. })
        ));
    }

    #[test]
    fn arity_conflict_rejected() {
        assert!(matches!(
            parse_program("p(X) :- e(X,Y). q(X) :- e(X)."),
            Err(ProgramError::Arity(_))
        ));
    }

    #[test]
    fn head_on_edb_rejected() {
        let edb = Schema::from_symbols([RelSymbol::new("e", 2)]).unwrap();
        assert!(matches!(
            parse_program_with_edb("e(X,Y) :- f(X,Y).", &edb),
            Err(ProgramError::HeadOnEdb { .. })
        ));
    }

    #[test]
    fn syntax_error_position() {
        let err = parse_program("p(X) :- e(X,Y).\nq(X) :- e(X Y).").unwrap_err();
        match err {
            ProgramError::Syntax { line, column, .. } => assert_eq!((line, column), (2, 13)),
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_program("p(X) :- e(X,Y)").unwrap_err();
        assert!(matches!(err, ProgramError::Syntax { line: 1, .. }));
    }

    #[test]
    fn outputs_and_constants() {
        let p = parse_program("@output r.\nr(X) :- e(X,a). s(X) :- r(X).").unwrap();
        assert_eq!(p.outputs().collect::<Vec<_>>(), vec!["r"]);
        assert!(matches!(
            parse_program("@output zz.\nr(X) :- e(X,a)."),
            Err(ProgramError::UnknownOutput(_))
        ));
    }

    #[test]
    fn relation_named_not() {
        let p = parse_program("p(X) :- not(X).").unwrap();
        assert!(!p.rules()[0].body[0].negated);
    }

    #[test]
    fn text_roundtrip() {
        let src = "@output answer.\np1() :- e(X,Y).\np2() :- e(X,Y), e(Y,Z).\nanswer() :- p1(), not p2().\n";
        let p = parse_program(src).unwrap();
        assert_eq!(p.to_text(), src);
        assert_eq!(parse_program(&p.to_text()).unwrap(), p);
    }
}
