//! Boolean expressions over flow-record attributes.
//!
//! ```text
//! expr    := and ("||" and)*
//! and     := unary ("&&" unary)*
//! unary   := "!" unary | "(" expr ")" | call | operand ("==" | "!=") operand
//! call    := ("startsWith" | "endsWith" | "contains") "(" operand "," operand ")"
//! operand := identifier | 'text' | "text" | null
//! ```
//!
//! An attribute that is missing or holds the string `null` compares equal
//! to `null`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use super::record::FlowRecord;

#[derive(Debug, Clone, PartialEq)]
enum Operand {
    Attr(String),
    Text(String),
    Null,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum StrFn {
    StartsWith,
    EndsWith,
    Contains,
}

#[derive(Debug, Clone, PartialEq)]
enum Expr {
    Or(Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    Eq(Operand, Operand),
    Ne(Operand, Operand),
    Call(StrFn, Operand, Operand),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    source: String,
    expr: Expr,
}

impl Predicate {
    pub fn evaluate(&self, record: &FlowRecord) -> bool {
        eval(&self.expr, record)
    }

    /// Attribute names the expression reads.
    pub fn referenced_attributes(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        collect(&self.expr, &mut out);
        out
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl FromStr for Predicate {
    type Err = String;

    fn from_str(source: &str) -> Result<Self, Self::Err> {
        let tokens = tokenize(source)?;
        let mut parser = Parser { tokens, pos: 0 };
        let expr = parser.expr()?;
        if parser.pos != parser.tokens.len() {
            return Err(format!(
                "unexpected {:?} in predicate {source:?}",
                parser.tokens[parser.pos]
            ));
        }
        Ok(Self {
            source: source.to_string(),
            expr,
        })
    }
}

fn resolve<'a>(op: &'a Operand, record: &'a FlowRecord) -> Option<&'a str> {
    match op {
        Operand::Attr(name) => record.attribute(name),
        Operand::Text(t) => Some(t),
        Operand::Null => None,
    }
}

fn eval(expr: &Expr, r: &FlowRecord) -> bool {
    match expr {
        Expr::Or(a, b) => eval(a, r) || eval(b, r),
        Expr::And(a, b) => eval(a, r) && eval(b, r),
        Expr::Not(e) => !eval(e, r),
        Expr::Eq(a, b) => resolve(a, r) == resolve(b, r),
        Expr::Ne(a, b) => resolve(a, r) != resolve(b, r),
        Expr::Call(f, a, b) => match (resolve(a, r), resolve(b, r)) {
            (Some(x), Some(y)) => match f {
                StrFn::StartsWith => x.starts_with(y),
                StrFn::EndsWith => x.ends_with(y),
                StrFn::Contains => x.contains(y),
            },
            _ => false,
        },
    }
}

fn collect(expr: &Expr, out: &mut BTreeSet<String>) {
    let mut add = |op: &Operand| {
        if let Operand::Attr(n) = op {
            out.insert(n.clone());
        }
    };
    match expr {
        Expr::Or(a, b) | Expr::And(a, b) => {
            collect(a, out);
            collect(b, out);
        }
        Expr::Not(e) => collect(e, out),
        Expr::Eq(a, b) | Expr::Ne(a, b) | Expr::Call(_, a, b) => {
            add(a);
            add(b);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Text(String),
    OrOr,
    AndAnd,
    Bang,
    EqEq,
    NotEq,
    LParen,
    RParen,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<Token>, String> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        match c {
            ' ' | '\t' | '\n' => i += 1,
            '(' => {
                out.push(Token::LParen);
                i += 1;
            }
            ')' => {
                out.push(Token::RParen);
                i += 1;
            }
            ',' => {
                out.push(Token::Comma);
                i += 1;
            }
            '|' if next == Some('|') => {
                out.push(Token::OrOr);
                i += 2;
            }
            '&' if next == Some('&') => {
                out.push(Token::AndAnd);
                i += 2;
            }
            '=' if next == Some('=') => {
                out.push(Token::EqEq);
                i += 2;
            }
            '!' if next == Some('=') => {
                out.push(Token::NotEq);
                i += 2;
            }
            '!' => {
                out.push(Token::Bang);
                i += 1;
            }
            '\'' | '"' => {
                let end = chars[i + 1..]
                    .iter()
                    .position(|x| *x == c)
                    .ok_or_else(|| format!("unterminated string in predicate {src:?}"))?;
                out.push(Token::Text(chars[i + 1..i + 1 + end].iter().collect()));
                i += end + 2;
            }
            c if c.is_alphanumeric() || c == '_' || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || matches!(chars[i], '_' | '.' | '-')) {
                    i += 1;
                }
                out.push(Token::Ident(chars[start..i].iter().collect()));
            }
            other => return Err(format!("unexpected character {other:?} in predicate {src:?}")),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Token) -> Result<(), String> {
        match self.bump() {
            Some(t) if t == want => Ok(()),
            other => Err(format!("expected {want:?}, found {other:?}")),
        }
    }

    fn expr(&mut self) -> Result<Expr, String> {
        let mut lhs = self.and()?;
        while self.peek() == Some(&Token::OrOr) {
            self.bump();
            lhs = Expr::Or(Box::new(lhs), Box::new(self.and()?));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, String> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(&Token::AndAnd) {
            self.bump();
            lhs = Expr::And(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, String> {
        match self.peek() {
            Some(Token::Bang) => {
                self.bump();
                Ok(Expr::Not(Box::new(self.unary()?)))
            }
            Some(Token::LParen) => {
                self.bump();
                let e = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(e)
            }
            Some(Token::Ident(name))
                if matches!(name.as_str(), "startsWith" | "endsWith" | "contains")
                    && self.tokens.get(self.pos + 1) == Some(&Token::LParen) =>
            {
                let f = match name.as_str() {
                    "startsWith" => StrFn::StartsWith,
                    "endsWith" => StrFn::EndsWith,
                    _ => StrFn::Contains,
                };
                self.bump();
                self.bump();
                let a = self.operand()?;
                self.expect(Token::Comma)?;
                let b = self.operand()?;
                self.expect(Token::RParen)?;
                Ok(Expr::Call(f, a, b))
            }
            _ => {
                let lhs = self.operand()?;
                match self.bump() {
                    Some(Token::EqEq) => Ok(Expr::Eq(lhs, self.operand()?)),
                    Some(Token::NotEq) => Ok(Expr::Ne(lhs, self.operand()?)),
                    other => Err(format!("expected '==' or '!=', found {other:?}")),
                }
            }
        }
    }

    fn operand(&mut self) -> Result<Operand, String> {
        match self.bump() {
            Some(Token::Ident(n)) if n == "null" => Ok(Operand::Null),
            Some(Token::Ident(n)) => Ok(Operand::Attr(n)),
            Some(Token::Text(t)) => Ok(Operand::Text(t)),
            other => Err(format!("expected an attribute, string or null, found {other:?}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn rec(attrs: &[(&str, &str)]) -> FlowRecord {
        let mut r = FlowRecord::new("t", 1, json!({}));
        for (k, v) in attrs {
            r.attributes.insert(k.to_string(), v.to_string());
        }
        r
    }

    #[test]
    fn null_checks() {
        let p: Predicate = "sched != null".parse().unwrap();
        assert!(!p.evaluate(&rec(&[("sched", "null")])));
        assert!(!p.evaluate(&rec(&[])));
        assert!(p.evaluate(&rec(&[("sched", "2021-02-04T17:20:00+00:00")])));
    }

    #[test]
    fn route_endpoint_filter() {
        let p: Predicate = "(startsWith(route, 'ABZ-') || endsWith(route, '-ABZ')) && flightNumber != null"
            .parse()
            .unwrap();
        assert!(p.evaluate(&rec(&[("route", "SVG-ABZ"), ("flightNumber", "SK1234")])));
        assert!(!p.evaluate(&rec(&[("route", "SVG-AXZ"), ("flightNumber", "SK1")])));
        assert!(!p.evaluate(&rec(&[("route", "ABZ-SVG"), ("flightNumber", "null")])));
        assert_eq!(
            p.referenced_attributes().into_iter().collect::<Vec<_>>(),
            ["flightNumber", "route"]
        );
    }

    #[test]
    fn precedence_and_negation() {
        let p: Predicate = "a == 'x' || b == 'y' && !(c == 'z')".parse().unwrap();
        assert!(p.evaluate(&rec(&[("a", "x"), ("c", "z")])));
        assert!(p.evaluate(&rec(&[("b", "y"), ("c", "w")])));
        assert!(!p.evaluate(&rec(&[("b", "y"), ("c", "z")])));
    }

    #[test]
    fn malformed_predicates_fail_to_parse() {
        for bad in [
            "",
            "a ==",
            "a = 'b'",
            "(a == 'b'",
            "a == 'b' extra",
            "startsWith(a)",
            "'open",
        ] {
            assert!(bad.parse::<Predicate>().is_err(), "{bad}");
        }
    }
}
