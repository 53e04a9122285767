//! Exact polynomials over the rationals: sparse multivariate [`Poly`] for
//! identities and substitutions, dense univariate [`UPoly`] for Sturm chains.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub type Rat = BigRational;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("cannot parse {text:?}: {reason}")]
    Parse { text: String, reason: String },
    #[error("polynomial still depends on variable {0}")]
    NotUnivariate(usize),
    #[error("zero polynomial")]
    Zero,
}

/// `n / d` as an exact rational.
pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Sparse polynomial in `nvars` variables; keys are exponent vectors.
#[derive(Clone, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, Rat>,
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.terms.iter().map(|(e, c)| format!("{c}*{e:?}")).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: Rat) -> Self {
        let mut p = Poly::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Poly::zero(nvars);
        p.add_term(e, Rat::one());
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_term(&mut self, e: Vec<u32>, c: Rat) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(e.clone()).or_insert_with(Rat::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&e);
        }
    }

    /// Parse a sum of monomials such as `3/2*F^3 - 9*F^2*r + 54*r - 36`
    /// over the named variables. Parentheses are not supported.
    pub fn parse(text: &str, vars: &[&str]) -> Result<Self, PolyError> {
        let err = |reason: &str| PolyError::Parse { text: text.to_string(), reason: reason.to_string() };
        let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() {
            return Err(err("empty"));
        }
        let mut p = Poly::zero(vars.len());
        let mut terms = Vec::new();
        let mut start = 0;
        for (i, ch) in s.char_indices() {
            if (ch == '+' || ch == '-') && i > 0 && !s[..i].ends_with('^') {
                terms.push(&s[start..i]);
                start = i;
            }
        }
        terms.push(&s[start..]);
        for t in terms {
            let (neg, body) = match t.as_bytes().first() {
                Some(b'-') => (true, &t[1..]),
                Some(b'+') => (false, &t[1..]),
                _ => (false, t),
            };
            if body.is_empty() {
                return Err(err("dangling sign"));
            }
            let mut c = Rat::one();
            let mut e = vec![0u32; vars.len()];
            for factor in body.split('*') {
                let (base, pow) = match factor.split_once('^') {
                    Some((b, p)) => (b, p.parse::<u32>().map_err(|_| err("bad exponent"))?),
                    None => (factor, 1),
                };
                if let Some(i) = vars.iter().position(|v| *v == base) {
                    e[i] += pow;
                } else {
                    let v = match base.split_once('/') {
                        Some((n, d)) => {
                            let n: BigInt = n.parse().map_err(|_| err("bad numerator"))?;
                            let d: BigInt = d.parse().map_err(|_| err("bad denominator"))?;
                            if d.is_zero() {
                                return Err(err("zero denominator"));
                            }
                            Rat::new(n, d)
                        }
                        None => Rat::from_integer(base.parse().map_err(|_| err("unknown symbol"))?),
                    };
                    c *= num_traits::pow(v, pow as usize);
                }
            }
            p.add_term(e, if neg { -c } else { c });
        }
        Ok(p)
    }

    pub fn scale(&self, c: &Rat) -> Poly {
        let mut p = Poly::zero(self.nvars);
        for (e, v) in &self.terms {
            p.add_term(e.clone(), v * c);
        }
        p
    }

    pub fn pow(&self, n: u32) -> Poly {
        (0..n).fold(Poly::constant(self.nvars, Rat::one()), |acc, _| &acc * self)
    }

    pub fn degree(&self, i: usize) -> u32 {
        self.terms.keys().map(|e| e[i]).max().unwrap_or(0)
    }

    pub fn derivative(&self, i: usize) -> Poly {
        let mut p = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut f = e.clone();
                f[i] -= 1;
                p.add_term(f, c * Rat::from_integer(BigInt::from(e[i])));
            }
        }
        p
    }

    pub fn eval(&self, x: &[Rat]) -> Rat {
        let mut sum = Rat::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (xi, k) in x.iter().zip(e) {
                if *k > 0 {
                    t *= num_traits::pow(xi.clone(), *k as usize);
                }
            }
            sum += t;
        }
        sum
    }

    /// Substitute variable `i` by the polynomial `q`.
    pub fn substitute(&self, i: usize, q: &Poly) -> Poly {
        self.substitute_fraction(i, q, &Poly::constant(self.nvars, Rat::one()))
    }

    /// `D^d p(.., N/D, ..)` where `d` is the degree of `p` in variable `i`:
    /// substitution of a rational function, cleared of denominators.
    pub fn substitute_fraction(&self, i: usize, num: &Poly, den: &Poly) -> Poly {
        let d = self.degree(i);
        let mut out = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            let mut rest = e.clone();
            rest[i] = 0;
            let mut mono = Poly::zero(self.nvars);
            mono.add_term(rest, c.clone());
            out = &out + &(&(&mono * &num.pow(e[i])) * &den.pow(d - e[i]));
        }
        out
    }

    /// Dense coefficients in variable `i`, which must be the only one present.
    pub fn univariate(&self, i: usize) -> Result<UPoly, PolyError> {
        let mut c = vec![Rat::zero(); self.degree(i) as usize + 1];
        for (e, v) in &self.terms {
            if let Some(j) = (0..self.nvars).find(|j| *j != i && e[*j] > 0) {
                return Err(PolyError::NotUnivariate(j));
            }
            c[e[i] as usize] += v;
        }
        Ok(UPoly::new(c))
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, o: &Poly) -> Poly {
        let mut p = self.clone();
        for (e, c) in &o.terms {
            p.add_term(e.clone(), c.clone());
        }
        p
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, o: &Poly) -> Poly {
        self + &(-o)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(&-Rat::one())
    }
}

impl Mul for &Poly {
    type Output = Poly;
    // Exponents add under multiplication.
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, o: &Poly) -> Poly {
        let mut p = Poly::zero(self.nvars);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &o.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                p.add_term(e, c1 * c2);
            }
        }
        p
    }
}

macro_rules! owned_ops {
    ($($tr:ident $f:ident),*) => {$(
        impl $tr for Poly {
            type Output = Poly;
            fn $f(self, o: Poly) -> Poly {
                (&self).$f(&o)
            }
        }
    )*};
}
owned_ops!(Add add, Sub sub, Mul mul);

/// Dense univariate polynomial, coefficients from the constant term up.
#[derive(Debug, Clone, PartialEq)]
pub struct UPoly(Vec<Rat>);

impl UPoly {
    pub fn new(mut c: Vec<Rat>) -> Self {
        while c.last().is_some_and(|v| v.is_zero()) {
            c.pop();
        }
        UPoly(c)
    }

    pub fn from_ints(c: &[i64]) -> Self {
        UPoly::new(c.iter().map(|v| rat(*v, 1)).collect())
    }

    pub fn coeffs(&self) -> &[Rat] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn eval(&self, x: &Rat) -> Rat {
        self.0.iter().rev().fold(Rat::zero(), |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> UPoly {
        UPoly::new(self.0.iter().enumerate().skip(1).map(|(i, c)| c * Rat::from_integer(BigInt::from(i))).collect())
    }

    /// Remainder of division by `d` (nonzero).
    pub fn rem(&self, d: &UPoly) -> UPoly {
        let mut r = self.0.clone();
        let dl = d.0.len();
        let lead = &d.0[dl - 1];
        while r.len() >= dl && !r.is_empty() {
            let shift = r.len() - dl;
            let q = &r[r.len() - 1] / lead;
            for (k, dc) in d.0.iter().enumerate() {
                r[shift + k] -= &q * dc;
            }
            r.pop();
            while r.last().is_some_and(|v| v.is_zero()) {
                r.pop();
            }
        }
        UPoly::new(r)
    }

    /// Divide out the factor `(x - root)`; `root` must be a root.
    pub fn deflate(&self, root: &Rat) -> UPoly {
        let n = self.0.len();
        let mut q = vec![Rat::zero(); n - 1];
        let mut carry = Rat::zero();
        for k in (1..n).rev() {
            carry = &self.0[k] + carry * root;
            q[k - 1] = carry.clone();
        }
        UPoly::new(q)
    }

    /// Sturm chain `p, p', -rem(p, p'), ...`.
    pub fn sturm_chain(&self) -> Vec<UPoly> {
        let mut chain = vec![self.clone()];
        let d = self.derivative();
        if d.is_zero() {
            return chain;
        }
        chain.push(d);
        loop {
            let n = chain.len();
            let r = chain[n - 2].rem(&chain[n - 1]);
            if r.is_zero() {
                return chain;
            }
            chain.push(UPoly::new(r.0.into_iter().map(|c| -c).collect()));
        }
    }

    /// Sign changes of the chain at `x`, ignoring zeros.
    pub fn sign_changes(chain: &[UPoly], x: &Rat) -> usize {
        let signs: Vec<i8> = chain
            .iter()
            .map(|p| {
                let v = p.eval(x);
                if v.is_positive() {
                    1
                } else if v.is_negative() {
                    -1
                } else {
                    0
                }
            })
            .filter(|s| *s != 0)
            .collect();
        signs.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_evaluate() {
        let p = Poly::parse("3/2*F^3 - 9*F^2*r + 54*r - 36", &["F", "r"]).unwrap();
        assert_eq!(p.eval(&[rat(1, 1), rat(1, 1)]), rat(3, 2) - rat(9, 1) + rat(54, 1) - rat(36, 1));
        assert!(Poly::parse("2*z", &["F"]).is_err());
    }

    #[test]
    fn rational_substitution_clears_denominators() {
        // p(f, r) = r f, r = 3/(3+f): (3 + f) p = 3 f.
        let p = Poly::parse("r*f", &["f", "r"]).unwrap();
        let num = Poly::parse("3", &["f", "r"]).unwrap();
        let den = Poly::parse("3 + f", &["f", "r"]).unwrap();
        assert_eq!(p.substitute_fraction(1, &num, &den), Poly::parse("3*f", &["f", "r"]).unwrap());
    }

    #[test]
    fn remainder_and_deflation() {
        let p = UPoly::from_ints(&[-1, 0, 1]);
        assert_eq!(p.deflate(&rat(1, 1)), UPoly::from_ints(&[1, 1]));
        assert!(p.rem(&UPoly::from_ints(&[-1, 1])).is_zero());
    }
}
