//! Symbols: complex-valued multipliers with optional (0,1)-derivatives.
//!
//! Symbols come either from closures or from a small expression grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '·' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' integer)?
//! atom   := number ['i'] | 'i' | 'z' | 'w' | '(' expr ')' | '|' expr '|'
//!         | conj(expr) | abs(expr) | re(expr) | im(expr) | bump(center, radius)
//! ```
//!
//! `bump(c, r)` is the smooth radial bump `exp(1 - 1/(1 - |z-c|^2/r^2))`
//! supported in `|z - c| < r`. Parsed symbols carry exact Wirtinger
//! derivatives computed alongside the value.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::domain::{Domain, Point};
use crate::error::{Error, Result};

/// Regularity of the symbol up to the closure of its domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularity {
    ContinuousOnClosure,
    C1OnClosure,
}

type ValueFn = Arc<dyn Fn(&Point) -> Complex64 + Send + Sync>;
type DbarFn = Arc<dyn Fn(&Point) -> [Complex64; 2] + Send + Sync>;

#[derive(Clone)]
pub struct Symbol {
    label: String,
    value: ValueFn,
    dbar: Option<DbarFn>,
    pub regularity: Regularity,
    /// Domain of evaluation after a restriction.
    pub support: Option<Domain>,
    variables: usize,
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Symbol")
            .field("label", &self.label)
            .field("regularity", &self.regularity)
            .field("has_dbar", &self.dbar.is_some())
            .field("support", &self.support)
            .finish()
    }
}

impl Symbol {
    /// Symbol from closures. `dbar` returns `(dphi/dconj(z), dphi/dconj(w))`.
    pub fn from_fn<F>(label: impl Into<String>, value: F, regularity: Regularity) -> Self
    where
        F: Fn(&Point) -> Complex64 + Send + Sync + 'static,
    {
        Symbol {
            label: label.into(),
            value: Arc::new(value),
            dbar: None,
            regularity,
            support: None,
            variables: 2,
        }
    }

    pub fn with_dbar<G>(mut self, dbar: G) -> Self
    where
        G: Fn(&Point) -> [Complex64; 2] + Send + Sync + 'static,
    {
        self.dbar = Some(Arc::new(dbar));
        self
    }

    /// Parses an expression of the symbol grammar.
    pub fn parse(source: &str) -> Result<Self> {
        let expr = Parser::new(source).parse_all()?;
        let regularity = if expr.has_abs() {
            Regularity::ContinuousOnClosure
        } else {
            Regularity::C1OnClosure
        };
        let variables = if expr.uses_w() { 2 } else { 1 };
        let e1 = Arc::new(expr);
        let e2 = Arc::clone(&e1);
        Ok(Symbol {
            label: source.trim().to_string(),
            value: Arc::new(move |p| e1.eval(p).v),
            dbar: Some(Arc::new(move |p| {
                let d = e2.eval(p);
                [d.dzb, d.dwb]
            })),
            regularity,
            support: None,
            variables,
        })
    }

    pub fn constant(c: Complex64) -> Self {
        Symbol {
            label: crate::domain::fmt_complex(c),
            value: Arc::new(move |_| c),
            dbar: Some(Arc::new(|_| [Complex64::new(0.0, 0.0); 2])),
            regularity: Regularity::C1OnClosure,
            support: None,
            variables: 1,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// 1 if the symbol only depends on `z`, 2 if it may depend on `w`.
    pub fn variables(&self) -> usize {
        self.variables
    }

    pub fn eval(&self, p: &Point) -> Complex64 {
        (self.value)(p)
    }

    /// `(dphi/dconj(z), dphi/dconj(w))` when available.
    pub fn dbar(&self, p: &Point) -> Option<[Complex64; 2]> {
        self.dbar.as_ref().map(|d| d(p))
    }

    pub fn has_dbar(&self) -> bool {
        self.dbar.is_some()
    }

    /// `alpha * phi`.
    pub fn scaled(&self, alpha: Complex64) -> Symbol {
        let value = Arc::clone(&self.value);
        let dbar = self.dbar.clone();
        Symbol {
            label: format!("({})*({})", crate::domain::fmt_complex(alpha), self.label),
            value: Arc::new(move |p| alpha * value(p)),
            dbar: dbar.map(|d| -> DbarFn {
                Arc::new(move |p| {
                    let [a, b] = d(p);
                    [alpha * a, alpha * b]
                })
            }),
            regularity: self.regularity,
            support: self.support.clone(),
            variables: self.variables,
        }
    }

    /// Central-difference estimate of `dphi/dconj(z)` with step `delta`.
    pub fn fd_dbar_z(&self, p: &Point, delta: f64) -> Complex64 {
        let shift = |d: Complex64| match *p {
            Point::C1(z) => Point::C1(z + d),
            Point::C2(z, w) => Point::C2(z + d, w),
        };
        let dx = (self.eval(&shift(Complex64::new(delta, 0.0)))
            - self.eval(&shift(Complex64::new(-delta, 0.0))))
            / (2.0 * delta);
        let dy = (self.eval(&shift(Complex64::new(0.0, delta)))
            - self.eval(&shift(Complex64::new(0.0, -delta))))
            / (2.0 * delta);
        0.5 * (dx + Complex64::i() * dy)
    }

    /// Largest gap between the declared and finite-difference `dbar_z`
    /// over the given points; `None` without a declared derivative.
    pub fn dbar_discrepancy(&self, points: &[Point], delta: f64) -> Option<f64> {
        let d = self.dbar.as_ref()?;
        Some(
            points
                .iter()
                .map(|p| (d(p)[0] - self.fd_dbar_z(p, delta)).norm())
                .fold(0.0, f64::max),
        )
    }

    /// Max of `|phi|` over the given points.
    pub fn sup_norm(&self, points: &[Point]) -> f64 {
        points.iter().map(|p| self.eval(p).norm()).fold(0.0, f64::max)
    }
}

/// `R_U(phi)`: same evaluators, evaluated on the lens. The lens must be cut
/// out of the symbol's current domain when one is recorded.
pub fn restrict_symbol(symbol: &Symbol, lens: &Domain) -> Result<Symbol> {
    let Domain::Lens { base, .. } = lens else {
        return Err(Error::InvalidInput(format!("{} is not a lens", lens.label())));
    };
    if let Some(current) = &symbol.support {
        if current != base.as_ref() {
            return Err(Error::InvalidInput(format!(
                "lens is cut from {}, but the symbol lives on {}",
                base.label(),
                current.label()
            )));
        }
    }
    let mut out = symbol.clone();
    out.support = Some(lens.clone());
    Ok(out)
}

/// Value with its four Wirtinger derivatives.
#[derive(Debug, Clone, Copy)]
struct Dual {
    v: Complex64,
    dz: Complex64,
    dzb: Complex64,
    dw: Complex64,
    dwb: Complex64,
}

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

impl Dual {
    fn constant(v: Complex64) -> Self {
        Dual { v, dz: ZERO, dzb: ZERO, dw: ZERO, dwb: ZERO }
    }

    fn map_d(self, f: impl Fn(Complex64) -> Complex64) -> [Complex64; 4] {
        [f(self.dz), f(self.dzb), f(self.dw), f(self.dwb)]
    }

    fn from_parts(v: Complex64, d: [Complex64; 4]) -> Self {
        Dual { v, dz: d[0], dzb: d[1], dw: d[2], dwb: d[3] }
    }

    fn parts(self) -> [Complex64; 4] {
        [self.dz, self.dzb, self.dw, self.dwb]
    }

    fn add(self, o: Dual) -> Dual {
        let (a, b) = (self.parts(), o.parts());
        Dual::from_parts(self.v + o.v, [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]])
    }

    fn neg(self) -> Dual {
        Dual::from_parts(-self.v, self.map_d(|d| -d))
    }

    fn mul(self, o: Dual) -> Dual {
        let (a, b) = (self.parts(), o.parts());
        let d = [0, 1, 2, 3].map(|k| a[k] * o.v + self.v * b[k]);
        Dual::from_parts(self.v * o.v, d)
    }

    fn div(self, o: Dual) -> Dual {
        let (a, b) = (self.parts(), o.parts());
        let den = o.v * o.v;
        let d = [0, 1, 2, 3].map(|k| (a[k] * o.v - self.v * b[k]) / den);
        Dual::from_parts(self.v / o.v, d)
    }

    fn conj(self) -> Dual {
        Dual {
            v: self.v.conj(),
            dz: self.dzb.conj(),
            dzb: self.dz.conj(),
            dw: self.dwb.conj(),
            dwb: self.dw.conj(),
        }
    }

    fn abs(self) -> Dual {
        let m = self.v.norm();
        if m == 0.0 {
            return Dual::constant(ZERO);
        }
        let c = self.conj();
        let (a, b) = (self.parts(), c.parts());
        let d = [0, 1, 2, 3].map(|k| (self.v.conj() * a[k] + self.v * b[k]) / (2.0 * m));
        Dual::from_parts(Complex64::new(m, 0.0), d)
    }

    fn powi(self, n: i32) -> Dual {
        if n == 0 {
            return Dual::constant(Complex64::new(1.0, 0.0));
        }
        let factor = Complex64::new(n as f64, 0.0) * self.v.powi(n - 1);
        Dual::from_parts(self.v.powi(n), self.map_d(|d| factor * d))
    }
}

#[derive(Debug, Clone)]
enum Expr {
    Const(Complex64),
    Z,
    W,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, i32),
    Conj(Box<Expr>),
    Abs(Box<Expr>),
    Re(Box<Expr>),
    Im(Box<Expr>),
    Bump { center: Complex64, radius: f64 },
}

impl Expr {
    fn eval(&self, p: &Point) -> Dual {
        let one = Complex64::new(1.0, 0.0);
        match self {
            Expr::Const(c) => Dual::constant(*c),
            Expr::Z => Dual { v: p.z(), dz: one, dzb: ZERO, dw: ZERO, dwb: ZERO },
            Expr::W => Dual { v: p.w(), dz: ZERO, dzb: ZERO, dw: one, dwb: ZERO },
            Expr::Add(a, b) => a.eval(p).add(b.eval(p)),
            Expr::Sub(a, b) => a.eval(p).add(b.eval(p).neg()),
            Expr::Mul(a, b) => a.eval(p).mul(b.eval(p)),
            Expr::Div(a, b) => a.eval(p).div(b.eval(p)),
            Expr::Neg(a) => a.eval(p).neg(),
            Expr::Pow(a, n) => a.eval(p).powi(*n),
            Expr::Conj(a) => a.eval(p).conj(),
            Expr::Abs(a) => a.eval(p).abs(),
            Expr::Re(a) => {
                let d = a.eval(p);
                d.add(d.conj()).mul(Dual::constant(Complex64::new(0.5, 0.0)))
            }
            Expr::Im(a) => {
                let d = a.eval(p);
                d.add(d.conj().neg()).mul(Dual::constant(Complex64::new(0.0, -0.5)))
            }
            Expr::Bump { center, radius } => {
                let u = p.z() - center;
                let s = u.norm_sqr() / (radius * radius);
                if s >= 1.0 {
                    return Dual::constant(ZERO);
                }
                let b = (1.0 - 1.0 / (1.0 - s)).exp();
                let db = -b / ((1.0 - s) * (1.0 - s));
                Dual {
                    v: Complex64::new(b, 0.0),
                    dz: db * u.conj() / (radius * radius),
                    dzb: db * u / (radius * radius),
                    dw: ZERO,
                    dwb: ZERO,
                }
            }
        }
    }

    fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => vec![a, b],
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Conj(a) | Expr::Abs(a) | Expr::Re(a) | Expr::Im(a) => {
                vec![a]
            }
            _ => Vec::new(),
        }
    }

    fn any(&self, pred: &dyn Fn(&Expr) -> bool) -> bool {
        pred(self) || self.children().into_iter().any(|c| c.any(pred))
    }

    fn has_abs(&self) -> bool {
        self.any(&|e| matches!(e, Expr::Abs(_)))
    }

    fn uses_w(&self) -> bool {
        self.any(&|e| matches!(e, Expr::W))
    }

    fn is_constant(&self) -> bool {
        !self.any(&|e| matches!(e, Expr::Z | Expr::W | Expr::Bump { .. }))
    }
}

struct Parser<'a> {
    src: &'a str,
    chars: Vec<char>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser { src, chars: src.chars().collect(), pos: 0 }
    }

    fn error(&self, msg: &str) -> Error {
        Error::InvalidInput(format!("symbol {:?}: {msg} at position {}", self.src, self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected '{c}'")))
        }
    }

    fn parse_all(mut self) -> Result<Expr> {
        let e = self.expr()?;
        if self.peek().is_some() {
            return Err(self.error("unexpected trailing input"));
        }
        Ok(e)
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') || self.eat('·') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.eat('^') {
            let neg = self.eat('-');
            let start = self.pos;
            while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let digits: String = self.chars[start..self.pos].iter().collect();
            let n: i32 = digits.parse().map_err(|_| self.error("expected an integer exponent"))?;
            return Ok(Expr::Pow(Box::new(base), if neg { -n } else { n }));
        }
        Ok(base)
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn call_arg(&mut self) -> Result<Expr> {
        self.expect('(')?;
        let e = self.expr()?;
        self.expect(')')?;
        Ok(e)
    }

    fn constant_value(&self, e: &Expr, what: &str) -> Result<Complex64> {
        if !e.is_constant() {
            return Err(self.error(&format!("{what} must be a constant")));
        }
        Ok(e.eval(&Point::C1(ZERO)).v)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some('(') => self.call_arg(),
            Some('|') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect('|')?;
                Ok(Expr::Abs(Box::new(e)))
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let name = self.ident();
                match name.as_str() {
                    "z" => Ok(Expr::Z),
                    "w" => Ok(Expr::W),
                    "i" => Ok(Expr::Const(Complex64::i())),
                    "conj" => Ok(Expr::Conj(Box::new(self.call_arg()?))),
                    "abs" => Ok(Expr::Abs(Box::new(self.call_arg()?))),
                    "re" => Ok(Expr::Re(Box::new(self.call_arg()?))),
                    "im" => Ok(Expr::Im(Box::new(self.call_arg()?))),
                    "bump" => {
                        self.expect('(')?;
                        let c = self.expr()?;
                        self.expect(',')?;
                        let r = self.expr()?;
                        self.expect(')')?;
                        let center = self.constant_value(&c, "bump center")?;
                        let radius = self.constant_value(&r, "bump radius")?;
                        if radius.im != 0.0 || radius.re <= 0.0 {
                            return Err(self.error("bump radius must be a positive real"));
                        }
                        Ok(Expr::Bump { center, radius: radius.re })
                    }
                    other => Err(self.error(&format!("unknown name {other:?}"))),
                }
            }
            Some(c) => Err(self.error(&format!("unexpected character {c:?}"))),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.chars.len() {
            let c = self.chars[self.pos];
            let exp_sign = (c == '-' || c == '+')
                && self.pos > start
                && matches!(self.chars[self.pos - 1], 'e' | 'E');
            if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || exp_sign {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        let value: f64 = text.parse().map_err(|_| self.error(&format!("bad number {text:?}")))?;
        if self.pos < self.chars.len() && self.chars[self.pos] == 'i' {
            let next = self.chars.get(self.pos + 1);
            if !next.is_some_and(|c| c.is_ascii_alphabetic()) {
                self.pos += 1;
                return Ok(Expr::Const(Complex64::new(0.0, value)));
            }
        }
        Ok(Expr::Const(Complex64::new(value, 0.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(re: f64, im: f64) -> Point {
        Point::C1(Complex64::new(re, im))
    }

    #[test]
    fn parse_and_evaluate() {
        let s = Symbol::parse("conj(z)").unwrap();
        assert_eq!(s.eval(&p(0.3, 0.4)), Complex64::new(0.3, -0.4));
        assert_eq!(s.dbar(&p(0.3, 0.4)).unwrap()[0], Complex64::new(1.0, 0.0));
        assert_eq!(s.regularity, Regularity::C1OnClosure);

        let t = Symbol::parse("2*z^2 - 0.5i + |z|").unwrap();
        let v = t.eval(&p(0.0, 1.0));
        assert_relative_eq!(v.re, -2.0 + 1.0);
        assert_relative_eq!(v.im, -0.5);
        assert_eq!(t.regularity, Regularity::ContinuousOnClosure);

        let u = Symbol::parse("1/(1.1 - z)").unwrap();
        assert_relative_eq!(u.eval(&p(0.1, 0.0)).re, 1.0);
        assert!(u.dbar(&p(0.1, 0.0)).unwrap()[0].norm() < 1e-15);

        let two = Symbol::parse("conj(w)·z").unwrap();
        assert_eq!(two.variables(), 2);
        let q = Point::C2(Complex64::new(2.0, 0.0), Complex64::new(0.0, 1.0));
        assert_eq!(two.eval(&q), Complex64::new(0.0, -2.0));
        assert_eq!(two.dbar(&q).unwrap(), [Complex64::new(0.0, 0.0), Complex64::new(2.0, 0.0)]);
    }

    #[test]
    fn parse_errors() {
        for bad in ["", "z +", "foo(z)", "conj z", "bump(z, 1)", "bump(0, -1)", "z^x", "(z"] {
            assert!(Symbol::parse(bad).is_err(), "{bad} should fail");
        }
    }

    #[test]
    fn declared_derivatives_match_finite_differences() {
        let pts: Vec<Point> = [(0.1, 0.2), (-0.3, 0.5), (0.6, -0.1), (0.05, -0.7)]
            .iter()
            .map(|&(a, b)| p(a, b))
            .collect();
        for src in [
            "conj(z)*z^2",
            "|z|^2",
            "bump(0.2+0.1i, 0.8) * conj(z)",
            "re(z)*im(z) + conj(z)/(2 - z)",
            "abs(z - 0.5)",
        ] {
            let s = Symbol::parse(src).unwrap();
            let err = s.dbar_discrepancy(&pts, 1e-6).unwrap();
            assert!(err < 1e-7, "{src}: {err}");
        }
    }

    #[test]
    fn restriction_keeps_evaluators() {
        let s = Symbol::parse("conj(z)").unwrap();
        let lens = Domain::lens(Domain::unit_disc(), Complex64::new(1.0, 0.0), 0.5).unwrap();
        let r = restrict_symbol(&s, &lens).unwrap();
        assert_eq!(r.eval(&p(0.8, 0.1)), s.eval(&p(0.8, 0.1)));
        assert_eq!(r.regularity, s.regularity);
        assert!(restrict_symbol(&s, &Domain::unit_disc()).is_err());
        let other = Domain::lens(Domain::disc(2.0).unwrap(), Complex64::new(2.0, 0.0), 0.5).unwrap();
        assert!(restrict_symbol(&r, &other).is_err());
    }
}
