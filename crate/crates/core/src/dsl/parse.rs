use num_bigint::BigInt;
use thiserror::Error;

use super::{Expr, Name};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at line {line}, column {column}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character {0:?}")]
    BadChar(char),
    #[error("expected {expected}, found {found}")]
    Unexpected { expected: String, found: String },
    #[error("unknown identifier {0:?}")]
    UnknownIdentifier(String),
    #[error("summation inside a bound or exponent")]
    SumInBound,
    #[error("index {0} shadows an enclosing index")]
    Shadowing(char),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Int(BigInt),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Eq,
    DotDot,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Int(v) => format!("integer {v}"),
            Tok::Ident(s) => format!("identifier {s:?}"),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Caret => "'^'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
            Tok::Eq => "'='".into(),
            Tok::DotDot => "'..'".into(),
            Tok::End => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut column) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, column);
        if c == '\n' {
            line += 1;
            column = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            column += 1;
            i += 1;
            continue;
        }
        let tok = if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let digits: String = chars[start..i].iter().collect();
            column += i - start;
            out.push(Spanned {
                tok: Tok::Int(digits.parse().expect("digits")),
                line: l0,
                column: c0,
            });
            continue;
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            column += i - start;
            out.push(Spanned {
                tok: Tok::Ident(word),
                line: l0,
                column: c0,
            });
            continue;
        } else {
            match c {
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '*' => Tok::Star,
                '/' => Tok::Slash,
                '^' => Tok::Caret,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                '=' => Tok::Eq,
                '.' if chars.get(i + 1) == Some(&'.') => {
                    i += 1;
                    column += 1;
                    Tok::DotDot
                }
                other => {
                    return Err(ParseError {
                        kind: ParseErrorKind::BadChar(other),
                        line: l0,
                        column: c0,
                    })
                }
            }
        };
        i += 1;
        column += 1;
        out.push(Spanned {
            tok,
            line: l0,
            column: c0,
        });
    }
    out.push(Spanned {
        tok: Tok::End,
        line,
        column,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    /// Indices bound by enclosing sums.
    scope: Vec<Name>,
}

/// Parse a formula. See the module docs for the grammar.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        scope: Vec::new(),
    };
    let e = p.expr()?;
    p.expect(Tok::End)?;
    Ok(e)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let idx = (self.pos + offset).min(self.toks.len() - 1);
        &self.toks[idx].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error(&self, kind: ParseErrorKind) -> ParseError {
        let s = &self.toks[self.pos];
        ParseError {
            kind,
            line: s.line,
            column: s.column,
        }
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        self.error(ParseErrorKind::Unexpected {
            expected: expected.to_string(),
            found: self.peek().describe(),
        })
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            if let Tok::Int(v) = self.peek().clone() {
                if *self.peek_at(1) != Tok::Caret {
                    self.bump();
                    return Ok(Expr::Int(-v));
                }
            }
            let inner = self.powered()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.powered()
    }

    fn powered(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let exponent = match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Expr::Int(v)
            }
            Tok::Minus | Tok::Plus => {
                let negative = self.bump() == Tok::Minus;
                match self.bump() {
                    Tok::Int(v) => Expr::Int(if negative { -v } else { v }),
                    _ => {
                        self.pos -= 1;
                        return Err(self.unexpected("integer exponent"));
                    }
                }
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                if e.contains_sum() {
                    return Err(self.error(ParseErrorKind::SumInBound));
                }
                e
            }
            _ => return Err(self.unexpected("exponent")),
        };
        Ok(Expr::Pow(Box::new(base), Box::new(exponent)))
    }

    fn name(&mut self) -> Result<Name, ParseError> {
        if let Tok::Ident(word) = self.peek().clone() {
            let mut cs = word.chars();
            if let (Some(c), None) = (cs.next(), cs.next()) {
                if let Some(name) = Name::new(c) {
                    self.bump();
                    return Ok(name);
                }
            }
        }
        Err(self.unexpected("index name"))
    }

    fn bound(&mut self) -> Result<Expr, ParseError> {
        let e = self.expr()?;
        if e.contains_sum() {
            return Err(self.error(ParseErrorKind::SumInBound));
        }
        Ok(e)
    }

    fn bind(&mut self, name: Name) -> Result<(), ParseError> {
        if self.scope.contains(&name) {
            return Err(self.error(ParseErrorKind::Shadowing(name.as_char())));
        }
        self.scope.push(name);
        Ok(())
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Int(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(word) => {
                let is_call = *self.peek_at(1) == Tok::LParen;
                match (word.as_str(), is_call) {
                    ("binom", true) | ("idiv", true) => {
                        self.bump();
                        self.bump();
                        let a = self.expr()?;
                        self.expect(Tok::Comma)?;
                        let b = self.expr()?;
                        self.expect(Tok::RParen)?;
                        Ok(if word == "binom" {
                            Expr::Binom(Box::new(a), Box::new(b))
                        } else {
                            Expr::IDiv(Box::new(a), Box::new(b))
                        })
                    }
                    ("fact", true) | ("H", true) => {
                        self.bump();
                        self.bump();
                        let a = self.expr()?;
                        self.expect(Tok::RParen)?;
                        Ok(if word == "fact" {
                            Expr::Fact(Box::new(a))
                        } else {
                            Expr::Harmonic(Box::new(a))
                        })
                    }
                    ("sum", true) => {
                        self.bump();
                        self.bump();
                        let index = self.name()?;
                        self.expect(Tok::Eq)?;
                        let lo = self.bound()?;
                        self.expect(Tok::DotDot)?;
                        let hi = self.bound()?;
                        self.expect(Tok::Comma)?;
                        self.bind(index)?;
                        let body = self.expr();
                        self.scope.pop();
                        let body = body?;
                        self.expect(Tok::RParen)?;
                        Ok(Expr::Sum {
                            index,
                            lo: Box::new(lo),
                            hi: Box::new(hi),
                            body: Box::new(body),
                        })
                    }
                    ("sumc", true) => {
                        self.bump();
                        self.bump();
                        let mut indices = vec![self.name()?];
                        while *self.peek() == Tok::Plus {
                            self.bump();
                            indices.push(self.name()?);
                        }
                        if indices.len() < 2 {
                            return Err(self.unexpected("'+'"));
                        }
                        self.expect(Tok::Eq)?;
                        let total = self.bound()?;
                        self.expect(Tok::Comma)?;
                        let depth = self.scope.len();
                        for &ix in &indices {
                            if let Err(e) = self.bind(ix) {
                                self.scope.truncate(depth);
                                return Err(e);
                            }
                        }
                        let body = self.expr();
                        self.scope.truncate(depth);
                        let body = body?;
                        self.expect(Tok::RParen)?;
                        Ok(Expr::SumC {
                            indices,
                            total: Box::new(total),
                            body: Box::new(body),
                        })
                    }
                    _ => {
                        let mut cs = word.chars();
                        match (cs.next(), cs.next()) {
                            (Some(c), None) if Name::new(c).is_some() => {
                                self.bump();
                                Ok(Expr::Var(Name::new(c).expect("checked")))
                            }
                            _ => Err(self.error(ParseErrorKind::UnknownIdentifier(word))),
                        }
                    }
                }
            }
            _ => Err(self.unexpected("expression")),
        }
    }
}
