//! Modal formulas in negation normal form.
//!
//! There is no general negation node: `~` in the surface syntax is pushed to
//! the atoms by De Morgan's laws while parsing, and `->` is desugared to a
//! disjunction. Children are reference counted, so cloning a formula is cheap
//! and proof search can share subterms freely.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// A propositional atom name, `[a-z][a-zA-Z0-9_]*`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom(Arc<str>);

impl Atom {
    pub fn new(name: &str) -> Result<Self, ParseError> {
        if is_atom_name(name) {
            Ok(Atom(Arc::from(name)))
        } else {
            Err(ParseError {
                offset: 0,
                expected: vec!["atom name".to_string()],
                found: Some(name.to_string()),
            })
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn is_atom_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// An atom or a negated atom.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub atom: Atom,
    pub positive: bool,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Literal { atom, positive: true }
    }

    pub fn neg(atom: Atom) -> Self {
        Literal { atom, positive: false }
    }

    pub fn negate(&self) -> Self {
        Literal {
            atom: self.atom.clone(),
            positive: !self.positive,
        }
    }

    /// Parses `p` or `~p`.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let trimmed = text.trim();
        let (positive, name) = match trimmed.strip_prefix('~') {
            Some(rest) => (false, rest.trim_start()),
            None => (true, trimmed),
        };
        Ok(Literal {
            atom: Atom::new(name)?,
            positive,
        })
    }
}

impl fmt::Debug for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.positive {
            f.write_str("~")?;
        }
        f.write_str(self.atom.as_str())
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    Top,
    Bottom,
    Lit(Literal),
    And(Arc<Formula>, Arc<Formula>),
    Or(Arc<Formula>, Arc<Formula>),
    Box(Arc<Formula>),
    Dia(Arc<Formula>),
}

impl Formula {
    pub fn atom(name: &str) -> Self {
        Formula::Lit(Literal::pos(Atom::new(name).expect("invalid atom name")))
    }

    pub fn neg_atom(name: &str) -> Self {
        Formula::Lit(Literal::neg(Atom::new(name).expect("invalid atom name")))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Arc::new(a), Arc::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Arc::new(a), Arc::new(b))
    }

    pub fn boxed(a: Formula) -> Self {
        Formula::Box(Arc::new(a))
    }

    pub fn dia(a: Formula) -> Self {
        Formula::Dia(Arc::new(a))
    }

    /// `a -> b`, i.e. the negation of `a` or `b`.
    pub fn implies(a: &Formula, b: Formula) -> Self {
        Formula::or(a.negate(), b)
    }

    pub fn iff(a: &Formula, b: &Formula) -> Self {
        Formula::and(Formula::implies(a, b.clone()), Formula::implies(b, a.clone()))
    }

    /// Left-nested conjunction; `T` when empty.
    pub fn conj(items: impl IntoIterator<Item = Formula>) -> Self {
        items
            .into_iter()
            .reduce(Formula::and)
            .unwrap_or(Formula::Top)
    }

    /// Left-nested disjunction; `F` when empty.
    pub fn disj(items: impl IntoIterator<Item = Formula>) -> Self {
        items
            .into_iter()
            .reduce(Formula::or)
            .unwrap_or(Formula::Bottom)
    }

    /// De Morgan dual, staying in negation normal form.
    pub fn negate(&self) -> Formula {
        match self {
            Formula::Top => Formula::Bottom,
            Formula::Bottom => Formula::Top,
            Formula::Lit(l) => Formula::Lit(l.negate()),
            Formula::And(a, b) => Formula::or(a.negate(), b.negate()),
            Formula::Or(a, b) => Formula::and(a.negate(), b.negate()),
            Formula::Box(a) => Formula::dia(a.negate()),
            Formula::Dia(a) => Formula::boxed(a.negate()),
        }
    }

    pub fn as_literal(&self) -> Option<&Literal> {
        match self {
            Formula::Lit(l) => Some(l),
            _ => None,
        }
    }

    pub fn is_modal(&self) -> bool {
        matches!(self, Formula::Box(_) | Formula::Dia(_))
    }

    /// Polarity-sensitive literal set.
    pub fn literals(&self) -> BTreeSet<Literal> {
        let mut out = BTreeSet::new();
        self.collect_literals(&mut out);
        out
    }

    pub(crate) fn collect_literals(&self, out: &mut BTreeSet<Literal>) {
        match self {
            Formula::Top | Formula::Bottom => {}
            Formula::Lit(l) => {
                out.insert(l.clone());
            }
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.collect_literals(out);
                b.collect_literals(out);
            }
            Formula::Box(a) | Formula::Dia(a) => a.collect_literals(out),
        }
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        self.literals().into_iter().map(|l| l.atom).collect()
    }

    /// Distinct subformulas, including the formula itself.
    pub fn subformulas(&self) -> BTreeSet<Formula> {
        let mut out = BTreeSet::new();
        self.collect_subformulas(&mut out);
        out
    }

    pub(crate) fn collect_subformulas(&self, out: &mut BTreeSet<Formula>) {
        if !out.insert(self.clone()) {
            return;
        }
        match self {
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.collect_subformulas(out);
                b.collect_subformulas(out);
            }
            Formula::Box(a) | Formula::Dia(a) => a.collect_subformulas(out),
            _ => {}
        }
    }

    /// Node count.
    pub fn size(&self) -> usize {
        match self {
            Formula::Top | Formula::Bottom | Formula::Lit(_) => 1,
            Formula::And(a, b) | Formula::Or(a, b) => 1 + a.size() + b.size(),
            Formula::Box(a) | Formula::Dia(a) => 1 + a.size(),
        }
    }

    /// Number of binary and modal connectives.
    pub fn connectives(&self) -> usize {
        match self {
            Formula::Top | Formula::Bottom | Formula::Lit(_) => 0,
            Formula::And(a, b) | Formula::Or(a, b) => 1 + a.connectives() + b.connectives(),
            Formula::Box(a) | Formula::Dia(a) => 1 + a.connectives(),
        }
    }

    pub fn modal_depth(&self) -> usize {
        match self {
            Formula::Top | Formula::Bottom | Formula::Lit(_) => 0,
            Formula::And(a, b) | Formula::Or(a, b) => a.modal_depth().max(b.modal_depth()),
            Formula::Box(a) | Formula::Dia(a) => 1 + a.modal_depth(),
        }
    }

    pub fn parse(text: &str) -> Result<Formula, ParseError> {
        parse(text)
    }
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

// Binding strength used by the printer: `|` < `&` < unary.
const PREC_OR: u8 = 1;
const PREC_AND: u8 = 2;
const PREC_UNARY: u8 = 3;

fn precedence(phi: &Formula) -> u8 {
    match phi {
        Formula::Or(..) => PREC_OR,
        Formula::And(..) => PREC_AND,
        _ => PREC_UNARY,
    }
}

fn write_at(f: &mut fmt::Formatter<'_>, phi: &Formula, min: u8) -> fmt::Result {
    if precedence(phi) < min {
        f.write_str("(")?;
        write_formula(f, phi)?;
        f.write_str(")")
    } else {
        write_formula(f, phi)
    }
}

fn write_formula(f: &mut fmt::Formatter<'_>, phi: &Formula) -> fmt::Result {
    match phi {
        Formula::Top => f.write_str("T"),
        Formula::Bottom => f.write_str("F"),
        Formula::Lit(l) => write!(f, "{l}"),
        // Both binary operators associate to the left, so a right operand of
        // the same operator needs parentheses to round-trip.
        Formula::And(a, b) => {
            write_at(f, a, PREC_AND)?;
            f.write_str(" & ")?;
            write_at(f, b, PREC_UNARY)
        }
        Formula::Or(a, b) => {
            write_at(f, a, PREC_OR)?;
            f.write_str(" | ")?;
            write_at(f, b, PREC_AND)
        }
        Formula::Box(a) => {
            f.write_str("[]")?;
            write_at(f, a, PREC_UNARY)
        }
        Formula::Dia(a) => {
            f.write_str("<>")?;
            write_at(f, a, PREC_UNARY)
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(f, self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at byte {offset}: expected {}, found {}", .expected.join(" or "), .found.as_deref().unwrap_or("end of input"))]
pub struct ParseError {
    pub offset: usize,
    pub expected: Vec<String>,
    pub found: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Top,
    Bottom,
    Atom(String),
    Not,
    Box,
    Dia,
    And,
    Or,
    Implies,
    LParen,
    RParen,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Top => "'T'".into(),
            Token::Bottom => "'F'".into(),
            Token::Atom(a) => format!("atom '{a}'"),
            Token::Not => "'~'".into(),
            Token::Box => "'[]'".into(),
            Token::Dia => "'<>'".into(),
            Token::And => "'&'".into(),
            Token::Or => "'|'".into(),
            Token::Implies => "'->'".into(),
            Token::LParen => "'('".into(),
            Token::RParen => "')'".into(),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let token = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'T' => Token::Top,
            b'F' => Token::Bottom,
            b'~' => Token::Not,
            b'&' => Token::And,
            b'|' => Token::Or,
            b'(' => Token::LParen,
            b')' => Token::RParen,
            b'[' if bytes.get(i + 1) == Some(&b']') => {
                i += 1;
                Token::Box
            }
            b'<' if bytes.get(i + 1) == Some(&b'>') => {
                i += 1;
                Token::Dia
            }
            b'-' if bytes.get(i + 1) == Some(&b'>') => {
                i += 1;
                Token::Implies
            }
            b'a'..=b'z' => {
                while i + 1 < bytes.len()
                    && (bytes[i + 1].is_ascii_alphanumeric() || bytes[i + 1] == b'_')
                {
                    i += 1;
                }
                Token::Atom(text[start..=i].to_string())
            }
            _ => {
                let found = text[start..].chars().next().map(|ch| format!("'{ch}'"));
                return Err(ParseError {
                    offset: start,
                    expected: vec!["a token".into()],
                    found,
                });
            }
        };
        i += 1;
        out.push((start, token));
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        ParseError {
            offset: self.offset(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().map(Token::describe),
        }
    }

    fn implication(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.disjunction()?;
        if self.peek() == Some(&Token::Implies) {
            self.pos += 1;
            let rhs = self.implication()?;
            Ok(Formula::implies(&lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn disjunction(&mut self) -> Result<Formula, ParseError> {
        let mut acc = self.conjunction()?;
        while self.peek() == Some(&Token::Or) {
            self.pos += 1;
            acc = Formula::or(acc, self.conjunction()?);
        }
        Ok(acc)
    }

    fn conjunction(&mut self) -> Result<Formula, ParseError> {
        let mut acc = self.unary()?;
        while self.peek() == Some(&Token::And) {
            self.pos += 1;
            acc = Formula::and(acc, self.unary()?);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        const EXPECTED: [&str; 7] = ["atom", "'T'", "'F'", "'~'", "'[]'", "'<>'", "'('"];
        let Some(token) = self.peek().cloned() else {
            return Err(self.error(&EXPECTED));
        };
        self.pos += 1;
        match token {
            Token::Top => Ok(Formula::Top),
            Token::Bottom => Ok(Formula::Bottom),
            Token::Atom(name) => Ok(Formula::Lit(Literal::pos(Atom(Arc::from(name.as_str()))))),
            Token::Not => Ok(self.unary()?.negate()),
            Token::Box => Ok(Formula::boxed(self.unary()?)),
            Token::Dia => Ok(Formula::dia(self.unary()?)),
            Token::LParen => {
                let inner = self.implication()?;
                if self.peek() == Some(&Token::RParen) {
                    self.pos += 1;
                    Ok(inner)
                } else {
                    Err(self.error(&["')'", "'&'", "'|'", "'->'"]))
                }
            }
            _ => {
                self.pos -= 1;
                Err(self.error(&EXPECTED))
            }
        }
    }
}

/// Parses the ASCII surface syntax into negation normal form.
pub fn parse(text: &str) -> Result<Formula, ParseError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: text.len(),
    };
    let phi = parser.implication()?;
    if parser.pos < parser.tokens.len() {
        return Err(parser.error(&["'&'", "'|'", "'->'", "end of input"]));
    }
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> Formula {
        Formula::atom("p")
    }
    fn q() -> Formula {
        Formula::atom("q")
    }
    fn lit(s: &str) -> Literal {
        Literal::parse(s).unwrap()
    }

    #[test]
    fn parse_atomic_negation() {
        assert_eq!(parse("p & ~p").unwrap(), Formula::and(p(), Formula::neg_atom("p")));
    }

    #[test]
    fn parse_pushes_negation_inward() {
        assert_eq!(
            parse("~(p | []q)").unwrap(),
            Formula::and(Formula::neg_atom("p"), Formula::dia(Formula::neg_atom("q")))
        );
    }

    #[test]
    fn parse_desugars_axiom_five() {
        assert_eq!(
            parse("<>p -> []<>p").unwrap(),
            Formula::or(
                Formula::boxed(Formula::neg_atom("p")),
                Formula::boxed(Formula::dia(p()))
            )
        );
    }

    #[test]
    fn implication_is_right_associative() {
        let parsed = parse("p -> q -> r").unwrap();
        let expected = Formula::or(
            Formula::neg_atom("p"),
            Formula::or(Formula::neg_atom("q"), Formula::atom("r")),
        );
        assert_eq!(parsed, expected);
    }

    #[test]
    fn precedence_of_binary_operators() {
        assert_eq!(
            parse("p | q & r").unwrap(),
            Formula::or(p(), Formula::and(q(), Formula::atom("r")))
        );
        assert_eq!(
            parse("[]p & q").unwrap(),
            Formula::and(Formula::boxed(p()), q())
        );
    }

    #[test]
    fn parse_errors_report_offset_and_expectations() {
        let err = parse("p & ").unwrap_err();
        assert_eq!(err.offset, 4);
        assert!(err.expected.iter().any(|e| e == "atom"));
        let err = parse("(p | q").unwrap_err();
        assert_eq!(err.offset, 6);
        assert!(err.expected.contains(&"')'".to_string()));
        let err = parse("p $ q").unwrap_err();
        assert_eq!(err.offset, 2);
        let err = parse("p q").unwrap_err();
        assert_eq!(err.offset, 2);
        assert!(parse("").is_err());
        assert!(parse("P").is_err());
    }

    #[test]
    fn negate_examples() {
        assert_eq!(Formula::neg_atom("p").negate(), p());
        assert_eq!(
            Formula::boxed(p()).negate(),
            Formula::dia(Formula::neg_atom("p"))
        );
        assert_eq!(Formula::Top.negate(), Formula::Bottom);
    }

    #[test]
    fn literal_sets() {
        let phi = Formula::or(Formula::boxed(p()), Formula::dia(Formula::neg_atom("q")));
        assert_eq!(phi.literals(), [lit("p"), lit("~q")].into_iter().collect());
        assert!(Formula::Top.literals().is_empty());
        assert_eq!(
            Formula::and(p(), Formula::neg_atom("p")).literals(),
            [lit("p"), lit("~p")].into_iter().collect()
        );
    }

    #[test]
    fn printing() {
        assert_eq!(Formula::boxed(Formula::dia(p())).to_string(), "[]<>p");
        assert_eq!(
            Formula::and(p(), Formula::or(q(), Formula::atom("r"))).to_string(),
            "p & (q | r)"
        );
        assert_eq!(Formula::neg_atom("p").to_string(), "~p");
        assert_eq!(
            Formula::or(p(), Formula::or(q(), Formula::atom("r"))).to_string(),
            "p | (q | r)"
        );
        assert_eq!(
            Formula::or(Formula::or(p(), q()), Formula::atom("r")).to_string(),
            "p | q | r"
        );
        assert_eq!(Formula::boxed(Formula::and(p(), q())).to_string(), "[](p & q)");
    }

    #[test]
    fn literal_parsing() {
        assert_eq!(lit("~p"), Literal::neg(Atom::new("p").unwrap()));
        assert!(Literal::parse("~").is_err());
        assert!(Literal::parse("p&q").is_err());
    }

    #[test]
    fn counting() {
        let phi = parse("~p | <><>(p | q)").unwrap();
        assert_eq!(phi.connectives(), 4);
        assert_eq!(phi.size(), 7);
        assert_eq!(phi.modal_depth(), 2);
        assert_eq!(phi.subformulas().len(), 7);
    }
}
