//! Scalar expressions over chart coordinates.
//!
//! Fields are stored as small expression trees. Smart constructors keep every
//! tree in a canonical form: sums collect like terms, products merge powers
//! and exponentials, and children are ordered by their rendered key. Two
//! mathematically equal constructions that differ only by reordering or by
//! cancelling exponential factors therefore end up as the same tree and
//! evaluate bit-identically.
//!
//! The concrete syntax accepted by [`parse`] is a minimal arithmetic grammar:
//! `+ - * / ^`, parentheses, numbers, coordinate names, `pi`, and the
//! functions `sin cos exp log ln sqrt norm2`.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
        }
    }

    fn apply<S: Scalar>(self, v: &S) -> S {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Ln => v.ln(),
            Func::Sqrt => v.sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Sum(Vec<Expr>),
    Prod(Vec<Expr>),
    Pow(Box<Expr>, i32),
    Func(Func, Box<Expr>),
}

impl Default for Expr {
    fn default() -> Self {
        Expr::Const(0.0)
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Self {
        Expr::Const(c)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(i) => write!(f, "x{i}"),
            Expr::Sum(ts) => {
                write!(f, "(")?;
                for (k, t) in ts.iter().enumerate() {
                    if k > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, ")")
            }
            Expr::Prod(fs) => {
                write!(f, "(")?;
                for (k, t) in fs.iter().enumerate() {
                    if k > 0 {
                        write!(f, "*")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, ")")
            }
            Expr::Pow(b, k) => write!(f, "{b}^{k}"),
            Expr::Func(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

impl Expr {
    pub fn c(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    pub fn zero() -> Expr {
        Expr::Const(0.0)
    }

    pub fn one() -> Expr {
        Expr::Const(1.0)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    /// Canonical ordering key.
    pub fn key(&self) -> String {
        self.to_string()
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::sum([a, b])
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::sum([a, Expr::neg(b)])
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::mul(Expr::Const(-1.0), a)
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::product([a, b])
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::mul(a, Expr::powi(b, -1))
    }

    pub fn scale(c: f64, a: Expr) -> Expr {
        Expr::mul(Expr::Const(c), a)
    }

    pub fn sin(a: Expr) -> Expr {
        Expr::func(Func::Sin, a)
    }

    pub fn cos(a: Expr) -> Expr {
        Expr::func(Func::Cos, a)
    }

    pub fn exp(a: Expr) -> Expr {
        Expr::func(Func::Exp, a)
    }

    pub fn ln(a: Expr) -> Expr {
        Expr::func(Func::Ln, a)
    }

    pub fn sqrt(a: Expr) -> Expr {
        Expr::func(Func::Sqrt, a)
    }

    pub fn func(func: Func, a: Expr) -> Expr {
        if let Expr::Const(c) = a {
            return Expr::Const(func.apply(&c));
        }
        Expr::Func(func, Box::new(a))
    }

    pub fn powi(a: Expr, k: i32) -> Expr {
        if k == 0 {
            return Expr::one();
        }
        if k == 1 {
            return a;
        }
        match a {
            Expr::Const(c) => Expr::Const(c.powi(k)),
            Expr::Pow(b, m) => Expr::powi(*b, m * k),
            Expr::Func(Func::Exp, u) => Expr::exp(Expr::scale(k as f64, *u)),
            Expr::Prod(fs) => Expr::product(fs.into_iter().map(|f| Expr::powi(f, k))),
            other => Expr::Pow(Box::new(other), k),
        }
    }

    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        let mut constant = 0.0;
        // key of the non-constant part -> (coefficient, part)
        let mut collected: BTreeMap<String, (f64, Expr)> = BTreeMap::new();
        let mut stack: Vec<Expr> = terms.into_iter().collect();
        while let Some(t) = stack.pop() {
            match t {
                Expr::Const(c) => constant += c,
                Expr::Sum(ts) => stack.extend(ts),
                other => {
                    let (coef, rest) = split_coefficient(other);
                    let entry = collected.entry(rest.key()).or_insert((0.0, rest));
                    entry.0 += coef;
                }
            }
        }
        let mut out: Vec<Expr> = Vec::new();
        for (_, (coef, rest)) in collected {
            if coef == 0.0 {
                continue;
            }
            out.push(attach_coefficient(coef, rest));
        }
        if constant != 0.0 {
            out.insert(0, Expr::Const(constant));
        }
        match out.len() {
            0 => Expr::Const(constant),
            1 => out.pop().unwrap(),
            _ => Expr::Sum(out),
        }
    }

    pub fn product<I: IntoIterator<Item = Expr>>(factors: I) -> Expr {
        let mut constant = 1.0;
        let mut exp_args: Vec<Expr> = Vec::new();
        let mut powers: BTreeMap<String, (i32, Expr)> = BTreeMap::new();
        let mut stack: Vec<Expr> = factors.into_iter().collect();
        while let Some(f) = stack.pop() {
            match f {
                Expr::Const(c) => constant *= c,
                Expr::Prod(fs) => stack.extend(fs),
                Expr::Func(Func::Exp, u) => exp_args.push(*u),
                Expr::Pow(b, k) => {
                    let entry = powers.entry(b.key()).or_insert((0, *b));
                    entry.0 += k;
                }
                other => {
                    let entry = powers.entry(other.key()).or_insert((0, other));
                    entry.0 += 1;
                }
            }
        }
        if constant == 0.0 {
            return Expr::zero();
        }
        let mut out: Vec<Expr> = Vec::new();
        for (_, (k, base)) in powers {
            match k {
                0 => {}
                1 => out.push(base),
                _ => out.push(Expr::Pow(Box::new(base), k)),
            }
        }
        if !exp_args.is_empty() {
            match Expr::sum(exp_args) {
                Expr::Const(c) => constant *= c.exp(),
                arg => out.push(Expr::Func(Func::Exp, Box::new(arg))),
            }
        }
        out.sort_by_cached_key(Expr::key);
        if constant != 1.0 || out.is_empty() {
            if out.is_empty() {
                return Expr::Const(constant);
            }
            out.insert(0, Expr::Const(constant));
        }
        if out.len() == 1 {
            return out.pop().unwrap();
        }
        Expr::Prod(out)
    }

    /// Evaluate on any scalar type. Variables index into `x`.
    pub fn eval<S: Scalar>(&self, x: &[S]) -> S {
        match self {
            Expr::Const(c) => S::cst(*c),
            Expr::Var(i) => x[*i].clone(),
            Expr::Sum(ts) => {
                let mut it = ts.iter();
                let first = it.next().map(|t| t.eval(x)).unwrap_or_else(S::zero);
                it.fold(first, |acc, t| acc + t.eval(x))
            }
            Expr::Prod(fs) => {
                let mut it = fs.iter();
                let first = it.next().map(|t| t.eval(x)).unwrap_or_else(S::one);
                it.fold(first, |acc, t| acc * t.eval(x))
            }
            Expr::Pow(b, k) => b.eval(x).powi(*k),
            Expr::Func(func, a) => func.apply(&a.eval(x)),
        }
    }

    /// Symbolic partial derivative with respect to variable `i`.
    pub fn diff(&self, i: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::zero(),
            Expr::Var(j) => Expr::Const(if *j == i { 1.0 } else { 0.0 }),
            Expr::Sum(ts) => Expr::sum(ts.iter().map(|t| t.diff(i))),
            Expr::Prod(fs) => Expr::sum((0..fs.len()).map(|k| {
                let dk = fs[k].diff(i);
                if dk.is_zero() {
                    return Expr::zero();
                }
                let others = fs.iter().enumerate().filter(|(l, _)| *l != k).map(|(_, f)| f.clone());
                Expr::product(others.chain(std::iter::once(dk)))
            })),
            Expr::Pow(b, k) => {
                let db = b.diff(i);
                if db.is_zero() {
                    return Expr::zero();
                }
                Expr::product([Expr::Const(*k as f64), Expr::powi((**b).clone(), k - 1), db])
            }
            Expr::Func(func, a) => {
                let da = a.diff(i);
                if da.is_zero() {
                    return Expr::zero();
                }
                let a = (**a).clone();
                let outer = match func {
                    Func::Sin => Expr::cos(a),
                    Func::Cos => Expr::neg(Expr::sin(a)),
                    Func::Exp => Expr::exp(a),
                    Func::Ln => Expr::powi(a, -1),
                    Func::Sqrt => Expr::scale(0.5, Expr::powi(Expr::sqrt(a), -1)),
                };
                Expr::mul(outer, da)
            }
        }
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Sum(ts) | Expr::Prod(ts) => ts.iter().filter_map(Expr::max_var).max(),
            Expr::Pow(b, _) => b.max_var(),
            Expr::Func(_, a) => a.max_var(),
        }
    }

    pub fn depends_on(&self, i: usize) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(j) => *j == i,
            Expr::Sum(ts) | Expr::Prod(ts) => ts.iter().any(|t| t.depends_on(i)),
            Expr::Pow(b, _) => b.depends_on(i),
            Expr::Func(_, a) => a.depends_on(i),
        }
    }

    /// Rename variables and rebuild canonically.
    pub fn remap_vars(&self, map: &dyn Fn(usize) -> usize) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(i) => Expr::Var(map(*i)),
            Expr::Sum(ts) => Expr::sum(ts.iter().map(|t| t.remap_vars(map))),
            Expr::Prod(fs) => Expr::product(fs.iter().map(|t| t.remap_vars(map))),
            Expr::Pow(b, k) => Expr::powi(b.remap_vars(map), *k),
            Expr::Func(func, a) => Expr::func(*func, a.remap_vars(map)),
        }
    }

    pub fn shift_vars(&self, offset: usize) -> Expr {
        self.remap_vars(&|i| i + offset)
    }

    /// Sum of squares of the given variables.
    pub fn norm2(vars: impl IntoIterator<Item = usize>) -> Expr {
        Expr::sum(vars.into_iter().map(|i| Expr::powi(Expr::Var(i), 2)))
    }
}

fn split_coefficient(e: Expr) -> (f64, Expr) {
    match e {
        Expr::Prod(mut fs) => {
            if let Some(Expr::Const(c)) = fs.first() {
                let c = *c;
                fs.remove(0);
                let rest = if fs.len() == 1 { fs.pop().unwrap() } else { Expr::Prod(fs) };
                (c, rest)
            } else {
                (1.0, Expr::Prod(fs))
            }
        }
        other => (1.0, other),
    }
}

fn attach_coefficient(coef: f64, rest: Expr) -> Expr {
    if coef == 1.0 {
        return rest;
    }
    match rest {
        Expr::Prod(mut fs) => {
            fs.insert(0, Expr::Const(coef));
            Expr::Prod(fs)
        }
        other => Expr::Prod(vec![Expr::Const(coef), other]),
    }
}

// ---------------------------------------------------------------------------
// Parser

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text
                .parse()
                .map_err(|_| Error::Expr(format!("bad number literal '{text}'")))?;
            toks.push(Tok::Num(v));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            toks.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            toks.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::Expr(format!("unexpected character '{c}'")));
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    names: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, op: char) -> Result<()> {
        if self.eat(op) {
            Ok(())
        } else {
            Err(Error::Expr(format!("expected '{op}' at token {}", self.pos)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                acc = Expr::add(acc, self.term()?);
            } else if self.eat('-') {
                acc = Expr::sub(acc, self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.unary()?;
        loop {
            if self.eat('*') {
                acc = Expr::mul(acc, self.unary()?);
            } else if self.eat('/') {
                acc = Expr::div(acc, self.unary()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::neg(self.unary()?));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat('^') {
            let exponent = self.unary()?;
            return Ok(match exponent.as_const() {
                Some(k) if k.fract() == 0.0 && k.abs() <= i32::MAX as f64 => Expr::powi(base, k as i32),
                _ => Expr::exp(Expr::mul(exponent, Expr::ln(base))),
            });
        }
        Ok(base)
    }

    fn args(&mut self) -> Result<Vec<Expr>> {
        self.expect('(')?;
        let mut out = Vec::new();
        if self.eat(')') {
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            if self.eat(')') {
                return Ok(out);
            }
            self.expect(',')?;
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if let Some(i) = self.names.iter().position(|n| *n == name) {
                    return Ok(Expr::Var(i));
                }
                if name == "pi" {
                    return Ok(Expr::Const(std::f64::consts::PI));
                }
                let func = match name.as_str() {
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "exp" => Some(Func::Exp),
                    "log" | "ln" => Some(Func::Ln),
                    "sqrt" => Some(Func::Sqrt),
                    "norm2" => None,
                    _ => return Err(Error::Expr(format!("unknown identifier '{name}'"))),
                };
                let args = self.args()?;
                match func {
                    Some(f) => {
                        if args.len() != 1 {
                            return Err(Error::Expr(format!("{name} takes one argument")));
                        }
                        Ok(Expr::func(f, args.into_iter().next().unwrap()))
                    }
                    None if args.is_empty() => Ok(Expr::norm2(0..self.names.len())),
                    None => Ok(Expr::sum(args.into_iter().map(|a| Expr::powi(a, 2)))),
                }
            }
            other => Err(Error::Expr(format!("unexpected token {other:?}"))),
        }
    }
}

/// Parse an expression whose variables are the given coordinate names.
pub fn parse(src: &str, names: &[String]) -> Result<Expr> {
    let toks = tokenize(src)?;
    if toks.is_empty() {
        return Err(Error::Expr("empty expression".into()));
    }
    let mut p = Parser { toks, pos: 0, names };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(Error::Expr(format!("trailing input at token {}", p.pos)));
    }
    Ok(e)
}

/// Default coordinate names `x0, x1, ...`.
/// `x, y, z, w` up to four coordinates, `x0, x1, …` beyond.
pub fn default_names(n: usize) -> Vec<String> {
    if n <= 4 {
        ["x", "y", "z", "w"][..n].iter().map(|s| s.to_string()).collect()
    } else {
        (0..n).map(|i| format!("x{i}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_and_evaluates() {
        let e = parse("0.2*sin(x)*cos(y) + x^2 - 3/y", &names(&["x", "y"])).unwrap();
        let (x, y) = (0.4f64, 1.3f64);
        let want = 0.2 * x.sin() * y.cos() + x * x - 3.0 / y;
        assert!((e.eval(&[x, y]) - want).abs() < 1e-14);
    }

    #[test]
    fn unknown_identifier_is_rejected() {
        assert!(parse("sin(q)", &names(&["x"])).is_err());
        assert!(parse("x +", &names(&["x"])).is_err());
    }

    #[test]
    fn norm2_and_powers() {
        let e = parse("log(norm2() + 1)", &names(&["x", "y"])).unwrap();
        assert!((e.eval(&[1.0, 2.0]) - 6f64.ln()).abs() < 1e-15);
        let r = parse("x^0.5", &names(&["x"])).unwrap();
        assert!((r.eval(&[4.0]) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn exponentials_cancel_structurally() {
        let phi = parse("sin(t) + 0.5*t^2", &names(&["t"])).unwrap();
        let g3 = Expr::mul(Expr::exp(Expr::scale(-2.0, phi.clone())), Expr::c(1.7));
        let back = Expr::mul(Expr::exp(Expr::scale(2.0, phi.clone())), g3);
        assert_eq!(back, Expr::c(1.7));
        let neg = Expr::neg(phi.clone());
        assert_eq!(Expr::exp(Expr::scale(-2.0, neg)), Expr::exp(Expr::scale(2.0, phi)));
    }

    #[test]
    fn like_terms_collect() {
        let x = Expr::var(0);
        let e = Expr::sum([x.clone(), Expr::scale(2.0, x.clone()), Expr::neg(Expr::scale(3.0, x))]);
        assert_eq!(e, Expr::zero());
    }

    #[test]
    fn symbolic_derivative_matches_closed_form() {
        let e = parse("exp(x*y)*sin(x) + sqrt(1 + y^2)", &names(&["x", "y"])).unwrap();
        let dx = e.diff(0);
        let dy = e.diff(1);
        let (x, y) = (0.3f64, -0.7f64);
        let want_dx = y * (x * y).exp() * x.sin() + (x * y).exp() * x.cos();
        let want_dy = x * (x * y).exp() * x.sin() + y / (1.0 + y * y).sqrt();
        assert!((dx.eval(&[x, y]) - want_dx).abs() < 1e-14);
        assert!((dy.eval(&[x, y]) - want_dy).abs() < 1e-14);
    }

    #[test]
    fn remap_is_canonical() {
        let e = parse("x*y + sin(y)", &names(&["x", "y"])).unwrap();
        let swapped = e.remap_vars(&|i| 1 - i).remap_vars(&|i| 1 - i);
        assert_eq!(swapped, e);
    }
}
