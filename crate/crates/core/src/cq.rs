//! Conjunctive queries over ontology terms.
//!
//! ```text
//! query := "Ans" "(" varlist ")" (":-" | ":=") atom ("," atom)* ";"
//! atom  := Ident "(" term ("," term)* ")"
//! term  := Ident | "\"" chars "\""        (escapes: \" and \\)
//! ```

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::ontology::{Ontology, OntologyError, PredicateKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Position {
    pub offset: usize,
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CqError {
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: Position, message: String },
    #[error("empty query body at {pos}")]
    EmptyBody { pos: Position },
    #[error("answer variable `{0}` does not occur in the body")]
    AnswerVarNotInBody(String),
    #[error("query body is disconnected: {0}")]
    Disconnected(String),
    #[error(transparent)]
    Predicate(#[from] OntologyError),
    #[error("`{predicate}` is a {kind} and takes {expected} argument(s), found {found}")]
    ArityMismatch {
        predicate: String,
        kind: PredicateKind,
        expected: usize,
        found: usize,
    },
    #[error("class atom `{0}` cannot be applied to a constant")]
    ClassOnConstant(String),
    #[error("property atom `{0}` needs a variable as its first argument")]
    ConstantSubject(String),
    #[error("variable `{0}` is used both as an individual and as a literal value")]
    SortConflict(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum Term {
    Variable(String),
    Constant(String),
}

impl Term {
    pub fn var(&self) -> Option<&str> {
        match self {
            Term::Variable(v) => Some(v),
            Term::Constant(_) => None,
        }
    }

    pub fn constant(&self) -> Option<&str> {
        match self {
            Term::Constant(c) => Some(c),
            Term::Variable(_) => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Term::Constant(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Variable(v) => f.write_str(v),
            Term::Constant(c) => {
                f.write_str("\"")?;
                for ch in c.chars() {
                    match ch {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        _ => write!(f, "{ch}")?,
                    }
                }
                f.write_str("\"")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
    /// Set by [`validate`].
    pub kind: Option<PredicateKind>,
}

impl Atom {
    pub fn subject(&self) -> Option<&str> {
        self.args.first().and_then(Term::var)
    }

    pub fn object(&self) -> Option<&Term> {
        self.args.get(1)
    }

    /// A datatype atom whose value is a constant.
    pub fn is_instantiated(&self) -> bool {
        self.kind == Some(PredicateKind::DatatypeProperty)
            && self.object().is_some_and(Term::is_constant)
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(Term::var)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConjunctiveQuery {
    pub answer_vars: Vec<String>,
    pub body: Vec<Atom>,
    pub source_text: String,
    /// Non-fatal findings from validation (casing, duplicates, object constants).
    pub warnings: Vec<String>,
}

impl PartialEq for ConjunctiveQuery {
    fn eq(&self, other: &Self) -> bool {
        self.answer_vars == other.answer_vars && self.body == other.body
    }
}

impl Eq for ConjunctiveQuery {}

impl fmt::Display for ConjunctiveQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ans({}) :- ", self.answer_vars.join(","))?;
        for (i, a) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(";")
    }
}

impl ConjunctiveQuery {
    /// Variables in first-occurrence order.
    pub fn variables(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.body
            .iter()
            .flat_map(Atom::vars)
            .filter(|v| seen.insert(*v))
            .collect()
    }

    /// Variables that denote literal values (datatype atom objects).
    pub fn literal_vars(&self) -> BTreeSet<&str> {
        self.body
            .iter()
            .filter(|a| a.kind == Some(PredicateKind::DatatypeProperty))
            .filter_map(|a| a.object().and_then(Term::var))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    LParen,
    RParen,
    Comma,
    Neck,
    Semi,
}

struct Lexer<'a> {
    src: &'a str,
    offset: usize,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            offset: 0,
            line: 1,
            column: 1,
        }
    }

    fn pos(&self) -> Position {
        Position {
            offset: self.offset,
            line: self.line,
            column: self.column,
        }
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.offset..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek_char()?;
        self.offset += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn error(&self, pos: Position, message: impl Into<String>) -> CqError {
        CqError::Syntax {
            pos,
            message: message.into(),
        }
    }

    fn next(&mut self) -> Result<Option<(Position, Tok)>, CqError> {
        while self.peek_char().is_some_and(char::is_whitespace) {
            self.bump();
        }
        let pos = self.pos();
        let Some(c) = self.bump() else {
            return Ok(None);
        };
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            ';' => Tok::Semi,
            ':' => match self.bump() {
                Some('-') | Some('=') => Tok::Neck,
                _ => return Err(self.error(pos, "expected `:-` or `:=`")),
            },
            '"' => {
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None => return Err(self.error(pos, "unterminated string constant")),
                        Some('"') => break,
                        Some('\\') => match self.bump() {
                            Some(e @ ('"' | '\\')) => s.push(e),
                            _ => {
                                return Err(self.error(
                                    self.pos(),
                                    "invalid escape (only \\\" and \\\\ are allowed)",
                                ))
                            }
                        },
                        Some(ch) => s.push(ch),
                    }
                }
                Tok::Str(s)
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::from(c);
                while let Some(ch) = self.peek_char() {
                    if ch.is_ascii_alphanumeric() || ch == '_' {
                        s.push(ch);
                        self.bump();
                    } else {
                        break;
                    }
                }
                Tok::Ident(s)
            }
            other => return Err(self.error(pos, format!("unexpected character `{other}`"))),
        };
        Ok(Some((pos, tok)))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    peeked: Option<Option<(Position, Tok)>>,
}

impl<'a> Parser<'a> {
    fn peek(&mut self) -> Result<Option<&(Position, Tok)>, CqError> {
        if self.peeked.is_none() {
            self.peeked = Some(self.lexer.next()?);
        }
        Ok(self.peeked.as_ref().and_then(Option::as_ref))
    }

    fn next(&mut self) -> Result<Option<(Position, Tok)>, CqError> {
        match self.peeked.take() {
            Some(t) => Ok(t),
            None => self.lexer.next(),
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Position, CqError> {
        match self.next()? {
            Some((pos, t)) if t == want => Ok(pos),
            Some((pos, _)) => Err(self.lexer.error(pos, format!("expected {what}"))),
            None => Err(self
                .lexer
                .error(self.lexer.pos(), format!("expected {what}, found end of input"))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<(Position, String), CqError> {
        match self.next()? {
            Some((pos, Tok::Ident(s))) => Ok((pos, s)),
            Some((pos, _)) => Err(self.lexer.error(pos, format!("expected {what}"))),
            None => Err(self
                .lexer
                .error(self.lexer.pos(), format!("expected {what}, found end of input"))),
        }
    }

    fn term(&mut self) -> Result<Term, CqError> {
        match self.next()? {
            Some((_, Tok::Ident(s))) => Ok(Term::Variable(s)),
            Some((_, Tok::Str(s))) => Ok(Term::Constant(s)),
            Some((pos, _)) => Err(self.lexer.error(pos, "expected a variable or a string constant")),
            None => Err(self
                .lexer
                .error(self.lexer.pos(), "expected a term, found end of input")),
        }
    }
}

/// Parses query text. Checks syntax, answer-variable safety and connectivity.
pub fn parse_query(text: &str) -> Result<ConjunctiveQuery, CqError> {
    let mut p = Parser {
        lexer: Lexer::new(text),
        peeked: None,
    };
    let (head_pos, head) = p.ident("`Ans`")?;
    if head != "Ans" {
        return Err(p.lexer.error(head_pos, "query head must be `Ans`"));
    }
    p.expect(Tok::LParen, "`(`")?;
    let mut answer_vars = vec![p.ident("an answer variable")?.1];
    loop {
        match p.next()? {
            Some((_, Tok::Comma)) => answer_vars.push(p.ident("an answer variable")?.1),
            Some((_, Tok::RParen)) => break,
            Some((pos, _)) => return Err(p.lexer.error(pos, "expected `,` or `)`")),
            None => return Err(p.lexer.error(p.lexer.pos(), "unterminated answer variable list")),
        }
    }
    p.expect(Tok::Neck, "`:-` or `:=`")?;

    let mut body = Vec::new();
    if let Some((pos, Tok::Semi)) = p.peek()? {
        return Err(CqError::EmptyBody { pos: *pos });
    }
    loop {
        let (_, predicate) = p.ident("a predicate name")?;
        p.expect(Tok::LParen, "`(`")?;
        let mut args = vec![p.term()?];
        loop {
            match p.next()? {
                Some((_, Tok::Comma)) => args.push(p.term()?),
                Some((_, Tok::RParen)) => break,
                Some((pos, _)) => return Err(p.lexer.error(pos, "expected `,` or `)`")),
                None => return Err(p.lexer.error(p.lexer.pos(), "unterminated argument list")),
            }
        }
        body.push(Atom {
            predicate,
            args,
            kind: None,
        });
        match p.next()? {
            Some((_, Tok::Comma)) => continue,
            Some((_, Tok::Semi)) => break,
            Some((pos, _)) => return Err(p.lexer.error(pos, "expected `,` or `;`")),
            None => return Err(p.lexer.error(p.lexer.pos(), "missing terminating `;`")),
        }
    }
    if let Some((pos, _)) = p.next()? {
        return Err(p.lexer.error(pos, "unexpected input after `;`"));
    }

    let cq = ConjunctiveQuery {
        answer_vars,
        body,
        source_text: text.to_string(),
        warnings: Vec::new(),
    };
    check_shape(&cq)?;
    Ok(cq)
}

fn check_shape(cq: &ConjunctiveQuery) -> Result<(), CqError> {
    let body_vars: HashSet<&str> = cq.body.iter().flat_map(Atom::vars).collect();
    if let Some(v) = cq.answer_vars.iter().find(|v| !body_vars.contains(v.as_str())) {
        return Err(CqError::AnswerVarNotInBody(v.clone()));
    }
    // Union-find over atoms sharing a variable.
    let n = cq.body.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        parent[i] = r;
        r
    }
    let mut owner: HashMap<&str, usize> = HashMap::new();
    for (i, atom) in cq.body.iter().enumerate() {
        for v in atom.vars() {
            if let Some(&j) = owner.get(v) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            } else {
                owner.insert(v, i);
            }
        }
    }
    let root = find(&mut parent, 0);
    if let Some(i) = (1..n).find(|&i| find(&mut parent, i) != root) {
        return Err(CqError::Disconnected(format!(
            "`{}` shares no variable with `{}`",
            cq.body[i], cq.body[0]
        )));
    }
    Ok(())
}

/// Resolves every predicate against the ontology and annotates atom kinds.
pub fn validate(cq: &ConjunctiveQuery, ont: &Ontology) -> Result<ConjunctiveQuery, CqError> {
    let mut warnings = cq.warnings.clone();
    let mut body: Vec<Atom> = Vec::with_capacity(cq.body.len());
    for atom in &cq.body {
        let resolved = ont.resolve_predicate(&atom.predicate)?;
        if resolved.casing_warning {
            warnings.push(format!(
                "`{}` resolved to `{}` (case differs)",
                atom.predicate, resolved.canonical
            ));
        }
        let expected = resolved.kind.arity();
        if atom.args.len() != expected {
            return Err(CqError::ArityMismatch {
                predicate: resolved.canonical,
                kind: resolved.kind,
                expected,
                found: atom.args.len(),
            });
        }
        match resolved.kind {
            PredicateKind::Class => {
                if atom.args[0].is_constant() {
                    return Err(CqError::ClassOnConstant(resolved.canonical));
                }
            }
            PredicateKind::DatatypeProperty | PredicateKind::ObjectProperty => {
                if atom.args[0].is_constant() {
                    return Err(CqError::ConstantSubject(resolved.canonical));
                }
                if resolved.kind == PredicateKind::ObjectProperty && atom.args[1].is_constant() {
                    warnings.push(format!(
                        "object atom `{atom}` has a constant range; it filters on the range key"
                    ));
                }
            }
        }
        let validated = Atom {
            predicate: resolved.canonical,
            args: atom.args.clone(),
            kind: Some(resolved.kind),
        };
        if body.contains(&validated) {
            warnings.push(format!("duplicate atom `{validated}` removed"));
            continue;
        }
        body.push(validated);
    }

    let mut literal = HashSet::new();
    let mut individual = HashSet::new();
    for atom in &body {
        match atom.kind {
            Some(PredicateKind::DatatypeProperty) => {
                individual.extend(atom.args[0].var());
                literal.extend(atom.args[1].var());
            }
            _ => individual.extend(atom.vars()),
        }
    }
    if let Some(v) = cq.variables().into_iter().find(|v| literal.contains(v) && individual.contains(v)) {
        return Err(CqError::SortConflict(v.to_string()));
    }

    Ok(ConjunctiveQuery {
        answer_vars: cq.answer_vars.clone(),
        body,
        source_text: cq.source_text.clone(),
        warnings,
    })
}

/// Single-line normal form: `Ans(v1,v2) :- p1(a,b), p2(c);`.
pub fn canonicalize(cq: &ConjunctiveQuery) -> String {
    cq.to_string()
}
