//! Attribute predicates with explicit logical structure.
//!
//! Used for simulated screening queries, for coach directive slices, and for
//! the dimension logic carried by precision verdicts. The textual form is the
//! wire format: `modality = "antibody" AND (stage = "clinical" OR region = "china")`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Modality,
    Target,
    Indication,
    Stage,
    Region,
    OriginLanguage,
}

impl Field {
    pub const ALL: [Field; 6] = [
        Field::Modality,
        Field::Target,
        Field::Indication,
        Field::Stage,
        Field::Region,
        Field::OriginLanguage,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Field::Modality => "modality",
            Field::Target => "target",
            Field::Indication => "indication",
            Field::Stage => "stage",
            Field::Region => "region",
            Field::OriginLanguage => "origin_language",
        }
    }
}

impl FromStr for Field {
    type Err = CriteriaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Field::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| CriteriaError::UnknownField(s.to_string()))
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Anything whose attributes a predicate can be decided against.
pub trait Attributes {
    fn attribute(&self, field: Field) -> &str;
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Criterion {
    pub field: Field,
    pub negated: bool,
    pub value: String,
}

impl Criterion {
    pub fn eq(field: Field, value: impl Into<String>) -> Self {
        Self { field, negated: false, value: value.into() }
    }

    pub fn holds(&self, attrs: &impl Attributes) -> bool {
        let equal = attrs.attribute(self.field).eq_ignore_ascii_case(&self.value);
        equal != self.negated
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = if self.negated { "!=" } else { "=" };
        write!(f, "{} {} {:?}", self.field, op, self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expr {
    True,
    False,
    Atom(Criterion),
    Not(Box<Expr>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CriteriaError {
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("unexpected end of predicate")]
    UnexpectedEnd,
    #[error("unexpected token `{0}`")]
    UnexpectedToken(String),
    #[error("unterminated string literal")]
    UnterminatedString,
}

/// Outcome of one atomic criterion while deciding a predicate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomOutcome {
    pub criterion: Criterion,
    pub observed: String,
    pub pass: bool,
}

impl Expr {
    /// Conjunction that drops `True` operands and flattens nested `And`s.
    pub fn and(parts: impl IntoIterator<Item = Expr>) -> Expr {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Expr::True => {}
                Expr::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Expr::True,
            1 => out.pop().unwrap(),
            _ => Expr::And(out),
        }
    }

    pub fn or(parts: impl IntoIterator<Item = Expr>) -> Expr {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Expr::False => {}
                Expr::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Expr::False,
            1 => out.pop().unwrap(),
            _ => Expr::Or(out),
        }
    }

    pub fn eval(&self, attrs: &impl Attributes) -> bool {
        self.eval_with(&mut |c| c.holds(attrs))
    }

    /// Evaluate with an arbitrary oracle for the atoms.
    pub fn eval_with(&self, atom: &mut impl FnMut(&Criterion) -> bool) -> bool {
        match self {
            Expr::True => true,
            Expr::False => false,
            Expr::Atom(c) => atom(c),
            Expr::Not(e) => !e.eval_with(atom),
            Expr::And(es) => es.iter().all(|e| e.eval_with(atom)),
            Expr::Or(es) => es.iter().any(|e| e.eval_with(atom)),
        }
    }

    /// Every atom in left-to-right order, duplicates included.
    pub fn atoms(&self) -> Vec<&Criterion> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Criterion>) {
        match self {
            Expr::True | Expr::False => {}
            Expr::Atom(c) => out.push(c),
            Expr::Not(e) => e.collect_atoms(out),
            Expr::And(es) | Expr::Or(es) => es.iter().for_each(|e| e.collect_atoms(out)),
        }
    }

    pub fn explain(&self, attrs: &impl Attributes) -> Vec<AtomOutcome> {
        self.atoms()
            .into_iter()
            .map(|c| AtomOutcome {
                criterion: c.clone(),
                observed: attrs.attribute(c.field).to_string(),
                pass: c.holds(attrs),
            })
            .collect()
    }

    /// Fields constrained anywhere in the expression.
    pub fn fields(&self) -> Vec<Field> {
        let mut fs: Vec<Field> = self.atoms().iter().map(|c| c.field).collect();
        fs.sort();
        fs.dedup();
        fs
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Expr::True)
    }

    /// Empty or whitespace-only text parses to `True`.
    pub fn parse(text: &str) -> Result<Expr, CriteriaError> {
        let tokens = tokenize(text)?;
        if tokens.is_empty() {
            return Ok(Expr::True);
        }
        let mut p = Parser { tokens, pos: 0 };
        let e = p.or_expr()?;
        match p.tokens.get(p.pos) {
            None => Ok(e),
            Some(t) => Err(CriteriaError::UnexpectedToken(t.to_string())),
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8) -> fmt::Result {
        // precedence: Or=1, And=2, Not/atom=3
        match self {
            Expr::True => f.write_str("TRUE"),
            Expr::False => f.write_str("FALSE"),
            Expr::Atom(c) => write!(f, "{c}"),
            Expr::Not(e) => {
                f.write_str("NOT ")?;
                e.fmt_prec(f, 3)
            }
            Expr::And(es) => join(f, es, " AND ", 2, parent),
            Expr::Or(es) => join(f, es, " OR ", 1, parent),
        }
    }
}

fn join(f: &mut fmt::Formatter<'_>, es: &[Expr], sep: &str, prec: u8, parent: u8) -> fmt::Result {
    let wrap = parent >= prec;
    if wrap {
        f.write_str("(")?;
    }
    for (i, e) in es.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        e.fmt_prec(f, prec)?;
    }
    if wrap {
        f.write_str(")")?;
    }
    Ok(())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl FromStr for Expr {
    type Err = CriteriaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expr::parse(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Word(String),
    Str(String),
    Eq,
    Ne,
    LParen,
    RParen,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Word(w) => f.write_str(w),
            Token::Str(s) => write!(f, "{s:?}"),
            Token::Eq => f.write_str("="),
            Token::Ne => f.write_str("!="),
            Token::LParen => f.write_str("("),
            Token::RParen => f.write_str(")"),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<Token>, CriteriaError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&ch) = chars.peek() {
        match ch {
            c if c.is_whitespace() => {
                chars.next();
            }
            '(' => {
                chars.next();
                out.push(Token::LParen);
            }
            ')' => {
                chars.next();
                out.push(Token::RParen);
            }
            '=' => {
                chars.next();
                out.push(Token::Eq);
            }
            '!' => {
                chars.next();
                match chars.next() {
                    Some('=') => out.push(Token::Ne),
                    Some(c) => return Err(CriteriaError::UnexpectedToken(format!("!{c}"))),
                    None => return Err(CriteriaError::UnexpectedEnd),
                }
            }
            '"' => {
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        None => return Err(CriteriaError::UnterminatedString),
                        Some('"') => break,
                        Some('\\') => match chars.next() {
                            Some(c) => s.push(c),
                            None => return Err(CriteriaError::UnterminatedString),
                        },
                        Some(c) => s.push(c),
                    }
                }
                out.push(Token::Str(s));
            }
            _ => {
                let mut w = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || matches!(c, '(' | ')' | '=' | '!' | '"') {
                        break;
                    }
                    w.push(c);
                    chars.next();
                }
                out.push(Token::Word(w));
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek_keyword(&self, kw: &str) -> bool {
        matches!(self.tokens.get(self.pos), Some(Token::Word(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn next(&mut self) -> Result<Token, CriteriaError> {
        let t = self.tokens.get(self.pos).cloned().ok_or(CriteriaError::UnexpectedEnd)?;
        self.pos += 1;
        Ok(t)
    }

    fn or_expr(&mut self) -> Result<Expr, CriteriaError> {
        let mut parts = vec![self.and_expr()?];
        while self.peek_keyword("OR") {
            self.pos += 1;
            parts.push(self.and_expr()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Expr::Or(parts) })
    }

    fn and_expr(&mut self) -> Result<Expr, CriteriaError> {
        let mut parts = vec![self.unary()?];
        while self.peek_keyword("AND") {
            self.pos += 1;
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Expr::And(parts) })
    }

    fn unary(&mut self) -> Result<Expr, CriteriaError> {
        if self.peek_keyword("NOT") {
            self.pos += 1;
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        match self.next()? {
            Token::LParen => {
                let e = self.or_expr()?;
                match self.next()? {
                    Token::RParen => Ok(e),
                    t => Err(CriteriaError::UnexpectedToken(t.to_string())),
                }
            }
            Token::Word(w) if w.eq_ignore_ascii_case("TRUE") => Ok(Expr::True),
            Token::Word(w) if w.eq_ignore_ascii_case("FALSE") => Ok(Expr::False),
            Token::Word(w) => {
                let field: Field = w.parse()?;
                let negated = match self.next()? {
                    Token::Eq => false,
                    Token::Ne => true,
                    t => return Err(CriteriaError::UnexpectedToken(t.to_string())),
                };
                let value = match self.next()? {
                    Token::Str(s) | Token::Word(s) => s,
                    t => return Err(CriteriaError::UnexpectedToken(t.to_string())),
                };
                Ok(Expr::Atom(Criterion { field, negated, value }))
            }
            t => Err(CriteriaError::UnexpectedToken(t.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(&'static str, &'static str);

    impl Attributes for Fixed {
        fn attribute(&self, field: Field) -> &str {
            match field {
                Field::Modality => self.0,
                Field::Stage => self.1,
                _ => "",
            }
        }
    }

    #[test]
    fn parses_precedence() {
        let e = Expr::parse(r#"modality = antibody AND stage = "clinical" OR stage = preclinical"#).unwrap();
        assert!(matches!(e, Expr::Or(ref v) if v.len() == 2));
        assert!(e.eval(&Fixed("small molecule", "preclinical")));
        assert!(e.eval(&Fixed("antibody", "clinical")));
        assert!(!e.eval(&Fixed("small molecule", "clinical")));
    }

    #[test]
    fn empty_text_is_true() {
        assert_eq!(Expr::parse("  ").unwrap(), Expr::True);
    }

    #[test]
    fn display_round_trips() {
        let text = r#"(modality = "ADC" OR modality = "antibody") AND NOT stage = "preclinical""#;
        let e = Expr::parse(text).unwrap();
        assert_eq!(e.to_string(), text);
        assert_eq!(Expr::parse(&e.to_string()).unwrap(), e);
    }

    #[test]
    fn or_truth_table() {
        let e = Expr::parse(r#"modality = "a" OR stage = "x""#).unwrap();
        for (m, s, want) in [("a", "x", true), ("a", "y", true), ("b", "x", true), ("b", "y", false)] {
            let attrs = Fixed(if m == "a" { "a" } else { "b" }, if s == "x" { "x" } else { "y" });
            assert_eq!(e.eval(&attrs), want, "{m} {s}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(Expr::parse("colour = red"), Err(CriteriaError::UnknownField("colour".into())));
        assert_eq!(Expr::parse("modality ="), Err(CriteriaError::UnexpectedEnd));
        assert!(Expr::parse("modality = \"x").is_err());
        assert!(Expr::parse("(modality = x").is_err());
    }

    #[test]
    fn and_flattens_and_drops_true() {
        let a = Expr::Atom(Criterion::eq(Field::Modality, "x"));
        let b = Expr::Atom(Criterion::eq(Field::Stage, "y"));
        assert_eq!(Expr::and([Expr::True, a.clone()]), a);
        let ab = Expr::and([a.clone(), b.clone()]);
        assert_eq!(Expr::and([ab, Expr::True]), Expr::And(vec![a, b]));
    }
}
