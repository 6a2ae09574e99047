//! Recursive-descent parser.
//!
//! ```text
//! field := '[' expr (',' expr)* ']'
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?          right-associative, constant exponent
//! atom  := number | var | func '(' expr ')' | '(' expr ')'
//! var   := 'x' digits | 'xi' digits
//! func  := 'exp' | 'sin' | 'cos'
//! ```

use super::{Node, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(usize, Tok)>> {
        let mut lx = Lexer { src: src.as_bytes(), pos: 0 };
        let mut out = Vec::new();
        while let Some(t) = lx.next()? {
            out.push(t);
        }
        Ok(out)
    }

    fn next(&mut self) -> Result<Option<(usize, Tok)>> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let Some(&ch) = self.src.get(self.pos) else {
            return Ok(None);
        };
        let start = self.pos;
        if ch.is_ascii_digit() || ch == b'.' {
            return self.number(start).map(Some);
        }
        if ch.is_ascii_alphabetic() {
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                self.pos += 1;
            }
            let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
            return Ok(Some((start, Tok::Ident(s))));
        }
        if b"+-*/^(),[]".contains(&ch) {
            self.pos += 1;
            return Ok(Some((start, Tok::Sym(ch as char))));
        }
        Err(Error::Parse {
            pos: start,
            msg: format!("unexpected character '{}'", ch as char),
        })
    }

    fn number(&mut self, start: usize) -> Result<(usize, Tok)> {
        let digits = |lx: &mut Self| {
            let s = lx.pos;
            while lx.pos < lx.src.len() && lx.src[lx.pos].is_ascii_digit() {
                lx.pos += 1;
            }
            lx.pos - s
        };
        let mut n = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            return Err(Error::Parse { pos: start, msg: "malformed number".into() });
        }
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(|v| (start, Tok::Num(v)))
            .map_err(|e| Error::Parse { pos: start, msg: format!("bad number '{text}': {e}") })
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    i: usize,
    end: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self> {
        Ok(Parser { toks: Lexer::tokens(src)?, i: 0, end: src.len() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.i).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse { pos: self.pos(), msg: msg.into() })
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            match self.peek() {
                Some(t) => self.err(format!("expected '{c}', found {t:?}")),
                None => self.err(format!("expected '{c}', found end of input")),
            }
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            Ok(Node::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat('^') {
            let pos = self.pos();
            let ex = self.unary()?;
            let mut has_var = false;
            super::visit_vars(&ex, &mut |_| has_var = true);
            if has_var {
                return Err(Error::Parse { pos, msg: "exponent must be constant".into() });
            }
            let p = super::eval_node(&ex, &[], &[]);
            if !p.is_finite() {
                return Err(Error::Parse { pos, msg: "exponent is not finite".into() });
            }
            Ok(Node::Pow(Box::new(base), p))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.i += 1;
                Ok(Node::Const(v))
            }
            Some(Tok::Sym('(')) => {
                self.i += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                let pos = self.pos();
                self.i += 1;
                match name.as_str() {
                    "exp" | "sin" | "cos" => {
                        self.expect('(')?;
                        let a = Box::new(self.expr()?);
                        self.expect(')')?;
                        Ok(match name.as_str() {
                            "exp" => Node::Exp(a),
                            "sin" => Node::Sin(a),
                            _ => Node::Cos(a),
                        })
                    }
                    _ => variable(&name)
                        .map(Node::Var)
                        .ok_or(Error::Parse { pos, msg: format!("unknown identifier '{name}'") }),
                }
            }
            Some(t) => self.err(format!("unexpected token {t:?}")),
            None => self.err("unexpected end of input"),
        }
    }
}

fn variable(name: &str) -> Option<Var> {
    let (ctor, digits): (fn(usize) -> Var, &str) = if let Some(d) = name.strip_prefix("xi") {
        (Var::Xi, d)
    } else {
        let d = name.strip_prefix('x')?;
        (Var::X, d)
    };
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
        return None;
    }
    let k: usize = digits.parse().ok()?;
    Some(ctor(k - 1))
}

pub(crate) fn parse_scalar(src: &str) -> Result<Node> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    if p.i != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(e)
}

pub(crate) fn parse_list(src: &str) -> Result<Vec<Node>> {
    let mut p = Parser::new(src)?;
    p.expect('[')?;
    let mut items = vec![p.expr()?];
    while p.eat(',') {
        items.push(p.expr()?);
    }
    p.expect(']')?;
    if p.i != p.toks.len() {
        return p.err("trailing input after ']'");
    }
    Ok(items)
}
