//! Grammar: `expr := [sign] term (sign term)*`, `term := factor ('*' factor)*`,
//! `factor := number | ident ['^' uint]`.

use super::{Monomial, Polynomial};
use crate::error::{Error, Result};

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse { pos: self.pos, msg: msg.into() })
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        let s = self.src;
        while self.pos < s.len() && (s[self.pos].is_ascii_digit() || s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < s.len() && (s[self.pos] == b'+' || s[self.pos] == b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < s.len() && s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits == self.pos {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).unwrap();
        text.parse::<f64>().or_else(|_| {
            self.pos = start;
            self.err(format!("bad number `{text}`"))
        })
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        let s = self.src;
        while self.pos < s.len() && (s[self.pos].is_ascii_alphanumeric() || s[self.pos] == b'_') {
            self.pos += 1;
        }
        String::from_utf8(s[start..self.pos].to_vec()).unwrap()
    }

    fn uint(&mut self) -> Result<u32> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected exponent");
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .or_else(|_| self.err("exponent too large"))
    }

    fn term(&mut self) -> Result<(f64, Vec<(String, u32)>)> {
        let mut coef = 1.0;
        let mut vars = Vec::new();
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_digit() || c == b'.' => coef *= self.number()?,
                Some(c) if c.is_ascii_alphabetic() => {
                    let v = self.ident();
                    let mut e = 1;
                    if self.peek() == Some(b'^') {
                        self.pos += 1;
                        e = self.uint()?;
                    }
                    vars.push((v, e));
                }
                Some(c) => return self.err(format!("unexpected `{}`", c as char)),
                None => return self.err("unexpected end of input"),
            }
            if self.peek() == Some(b'*') {
                self.pos += 1;
            } else {
                return Ok((coef, vars));
            }
        }
    }
}

pub(super) fn parse_polynomial(s: &str) -> Result<Polynomial> {
    let mut lx = Lexer { src: s.as_bytes(), pos: 0 };
    let mut out = Polynomial::zero();
    let mut first = true;
    loop {
        let mut sign = 1.0;
        match lx.peek() {
            None if !first => return Ok(out),
            None => return lx.err("empty polynomial"),
            Some(b'+') => lx.pos += 1,
            Some(b'-') => {
                lx.pos += 1;
                sign = -1.0;
            }
            Some(_) if first => {}
            Some(c) => return lx.err(format!("expected `+` or `-`, found `{}`", c as char)),
        }
        first = false;
        let (c, vars) = lx.term()?;
        out.add_term(Monomial::from_pairs(vars), sign * c);
    }
}
