//! The x-dependence of symbols: a commutative algebra with derivations
//! `∂_{x_i}` and an integral that kills derivatives.
//!
//! Both backends share one monomial type `x^β e^{ik·x} e^{−w|x|²}`; the
//! TORUS backend only uses `k`, the GAUSSIAN backend only `β` and `w`.

use std::collections::BTreeMap;
use std::fmt;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exact_scalars::{
    bf_cos, bf_exp, bf_from_rational, bf_mul, bf_sin, factorial, gamma_quarter, precision_digits, rat, rat_int,
    BigFloatC, Gr, Period, Rational, Scalar,
};
use crate::json::{get, get_i64, gr_from_json, gr_to_json, int_array};

/// Largest supported dimension; fixed so that monomials are `Copy`.
pub const MAX_DIM: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Backend {
    Torus,
    Gaussian,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Torus => "torus",
            Backend::Gaussian => "gaussian",
        }
    }
}

/// `x^β · e^{i k·x} · e^{−w|x|²}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct XMono {
    pub k: [i32; MAX_DIM],
    pub beta: [u16; MAX_DIM],
    pub w: u16,
}

impl XMono {
    pub fn one() -> Self {
        Self::default()
    }
    pub fn fourier(k: &[i32]) -> Self {
        let mut m = Self::default();
        m.k[..k.len()].copy_from_slice(k);
        m
    }
    pub fn gaussian(beta: &[u16], w: u16) -> Self {
        let mut m = Self { w, ..Self::default() };
        m.beta[..beta.len()].copy_from_slice(beta);
        m
    }
    pub fn mul(&self, o: &Self) -> Self {
        let mut r = *self;
        for i in 0..MAX_DIM {
            r.k[i] += o.k[i];
            r.beta[i] += o.beta[i];
        }
        r.w += o.w;
        r
    }
    pub fn is_one(&self) -> bool {
        *self == Self::one()
    }
}

impl fmt::Debug for XMono {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{:?}e^i{:?}g{}", &self.beta, &self.k, self.w)
    }
}

/// Finite sum `Σ c_m · m` over [`XMono`]; no stored zero coefficients.
#[derive(Clone, PartialEq, Eq)]
pub struct CoeffFunction {
    pub backend: Backend,
    pub n: usize,
    pub terms: BTreeMap<XMono, Gr>,
}

impl fmt::Debug for CoeffFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.terms.iter()).finish()
    }
}

impl CoeffFunction {
    pub fn zero(backend: Backend, n: usize) -> Self {
        Self { backend, n, terms: BTreeMap::new() }
    }
    pub fn constant(backend: Backend, n: usize, c: Gr) -> Self {
        Self::monomial(backend, n, XMono::one(), c)
    }
    pub fn monomial(backend: Backend, n: usize, m: XMono, c: Gr) -> Self {
        let mut f = Self::zero(backend, n);
        f.add_term(m, c);
        f
    }
    /// `e^{i k·x}` on the torus.
    pub fn fourier(n: usize, k: &[i32], c: Gr) -> Self {
        Self::monomial(Backend::Torus, n, XMono::fourier(k), c)
    }
    /// `x^β e^{−w|x|²}`.
    pub fn gaussian(n: usize, beta: &[u16], w: u16, c: Gr) -> Self {
        Self::monomial(Backend::Gaussian, n, XMono::gaussian(beta, w), c)
    }
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    pub fn add_term(&mut self, m: XMono, c: Gr) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += &c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }
    pub fn add_scaled(&mut self, other: &Self, c: &Gr) {
        if c.is_zero() {
            return;
        }
        for (m, v) in &other.terms {
            self.add_term(*m, if c.is_one() { v.clone() } else { v * c });
        }
    }
    pub fn scale(&self, c: &Gr) -> Self {
        let mut r = Self::zero(self.backend, self.n);
        r.add_scaled(self, c);
        r
    }
    /// The constant coefficient, if the function is constant.
    pub fn as_constant(&self) -> Option<Gr> {
        match self.terms.len() {
            0 => Some(Gr::zero()),
            1 => self.terms.get(&XMono::one()).cloned(),
            _ => None,
        }
    }
    pub fn is_x_independent(&self) -> bool {
        self.as_constant().is_some()
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.backend != other.backend || self.n != other.n {
            return Err(Error::ContextMismatch(format!(
                "coefficient backends {}/{} vs {}/{}",
                self.backend.name(),
                self.n,
                other.backend.name(),
                other.n
            )));
        }
        Ok(())
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(self.mul(other))
    }

    /// Product; callers guarantee matching backends.
    pub fn mul(&self, other: &Self) -> Self {
        let mut r = Self::zero(self.backend, self.n);
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                r.add_term(m1.mul(m2), c1 * c2);
            }
        }
        r
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut r = self.clone();
        r.add_scaled(other, &Gr::one());
        r
    }

    /// `∂/∂x_i`, 0-based index.
    pub fn derivative(&self, i: usize) -> Self {
        let mut r = Self::zero(self.backend, self.n);
        for (m, c) in &self.terms {
            if m.k[i] != 0 {
                r.add_term(*m, c * &Gr::new(rat_int(0), rat_int(m.k[i] as i64)));
            }
            if m.beta[i] > 0 {
                let mut d = *m;
                d.beta[i] -= 1;
                r.add_term(d, c.scale(&rat_int(m.beta[i] as i64)));
            }
            if m.w > 0 {
                let mut d = *m;
                d.beta[i] += 1;
                r.add_term(d, c.scale(&rat_int(-2 * m.w as i64)));
            }
        }
        r
    }

    /// Multiplication by the coordinate `x_i`; not periodic, so TORUS refuses.
    pub fn mul_coordinate(&self, i: usize) -> Result<Self> {
        if self.backend == Backend::Torus {
            return Err(Error::Unsupported("multiplication by x_i on the TORUS backend".into()));
        }
        let mut r = Self::zero(self.backend, self.n);
        for (m, c) in &self.terms {
            let mut d = *m;
            d.beta[i] += 1;
            r.add_term(d, c.clone());
        }
        Ok(r)
    }

    /// Normalized integral `(2π)^{−n} ∫ f dx`. Exact (the mean) on TORUS.
    pub fn normalized_integral(&self) -> Result<Scalar> {
        match self.backend {
            Backend::Torus => Ok(Scalar::from_gr(self.terms.get(&XMono::one()).cloned().unwrap_or_else(Gr::zero))),
            Backend::Gaussian => {
                let v = self.gaussian_integral()?;
                let two_pi_n = Period::monomial((0, 2 * self.n as i32, 0), Gr::from_int(1 << self.n)).to_bigfloat();
                Ok(Scalar::Float(&v / &two_pi_n))
            }
        }
    }

    /// `∫ f dx`: `(2π)^n c_0` on TORUS, Gaussian moments otherwise.
    pub fn integrate(&self) -> Result<Scalar> {
        match self.backend {
            Backend::Torus => {
                let c0 = self.terms.get(&XMono::one()).cloned().unwrap_or_else(Gr::zero);
                Ok(Scalar::Exact(Period::monomial((0, 2 * self.n as i32, 0), c0.scale(&rat_int(1 << self.n)))))
            }
            Backend::Gaussian => Ok(Scalar::Float(self.gaussian_integral()?)),
        }
    }

    /// `Σ c Π_i Γ((β_i+1)/2) / w^{(β_i+1)/2}` over all-even `β`.
    fn gaussian_integral(&self) -> Result<BigFloatC> {
        let digits = precision_digits();
        let mut acc = BigFloatC::zero();
        for (m, c) in &self.terms {
            if m.k.iter().any(|&k| k != 0) {
                return Err(Error::Unsupported("Fourier factor in a GAUSSIAN coefficient".into()));
            }
            if m.w == 0 {
                return Err(Error::Divergent(format!("∫ of weight-0 term {m:?} over ℝ^{}", self.n)));
            }
            if m.beta[..self.n].iter().any(|b| b % 2 == 1) {
                continue;
            }
            let mut v = BigFloatC::from_i64(1);
            for i in 0..self.n {
                let half = rat(m.beta[i] as i64 + 1, 2);
                let g = gamma_quarter(&half, digits)?;
                v = &v * &g;
            }
            // w^{-(Σβ+n)/2}
            let e: i64 = m.beta[..self.n].iter().map(|&b| b as i64).sum::<i64>() + self.n as i64;
            let w = bf_from_rational(&rat_int(m.w as i64));
            let mut wp = BigFloatC::from_i64(1);
            for _ in 0..e / 2 {
                wp = wp.scale_real(&w);
            }
            if e % 2 == 1 {
                wp = wp.scale_real(&crate::exact_scalars::bf_sqrt(&w));
            }
            acc = &acc + &(&(&v * &c.to_bigfloat()) / &wp);
        }
        Ok(acc)
    }

    pub fn eval(&self, x: &[Rational]) -> BigFloatC {
        let xs: Vec<_> = x.iter().map(bf_from_rational).collect();
        let r2 = xs.iter().fold(BigFloatC::zero().re, |a, v| crate::exact_scalars::bf_add(&a, &bf_mul(v, v)));
        let mut acc = BigFloatC::zero();
        for (m, c) in &self.terms {
            let mut phase = BigFloatC::zero().re;
            let mut poly = BigFloatC::from_i64(1).re;
            for i in 0..self.n {
                let ki = bf_from_rational(&rat_int(m.k[i] as i64));
                phase = crate::exact_scalars::bf_add(&phase, &bf_mul(&ki, &xs[i]));
                for _ in 0..m.beta[i] {
                    poly = bf_mul(&poly, &xs[i]);
                }
            }
            let g = bf_exp(&bf_mul(&r2, &bf_from_rational(&rat_int(-(m.w as i64)))));
            let mag = bf_mul(&poly, &g);
            let e = BigFloatC { re: bf_mul(&mag, &bf_cos(&phase)), im: bf_mul(&mag, &bf_sin(&phase)) };
            acc = &acc + &(&e * &c.to_bigfloat());
        }
        acc
    }

    pub fn to_json(&self) -> Value {
        let terms: Vec<Value> = self
            .terms
            .iter()
            .map(|(m, c)| match self.backend {
                Backend::Torus => json!({"k": &m.k[..self.n], "c": gr_to_json(c)}),
                Backend::Gaussian => json!({"x": &m.beta[..self.n], "w": m.w, "c": gr_to_json(c)}),
            })
            .collect();
        json!({"backend": self.backend.name(), "n": self.n, "terms": terms})
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let backend = match get(v, "backend")?.as_str() {
            Some("torus") => Backend::Torus,
            Some("gaussian") => Backend::Gaussian,
            other => return Err(Error::Invalid(format!("unknown coefficient backend {other:?}"))),
        };
        let n = get_i64(v, "n")? as usize;
        Self::terms_from_json(backend, n, get(v, "terms")?)
    }

    /// Parses the bare term list of the coefficient format.
    pub fn terms_from_json(backend: Backend, n: usize, terms: &Value) -> Result<Self> {
        if n == 0 || n > MAX_DIM {
            return Err(Error::Invalid(format!("dimension {n} outside 1..={MAX_DIM}")));
        }
        let mut f = Self::zero(backend, n);
        let list = terms.as_array().ok_or_else(|| Error::Invalid("terms must be an array".into()))?;
        for t in list {
            let c = gr_from_json(get(t, "c")?)?;
            let m = match backend {
                Backend::Torus => {
                    let k = int_array(get(t, "k")?)?;
                    if k.len() != n {
                        return Err(Error::Invalid("frequency length must equal n".into()));
                    }
                    XMono::fourier(&k.iter().map(|&v| v as i32).collect::<Vec<_>>())
                }
                Backend::Gaussian => {
                    let b = int_array(get(t, "x")?)?;
                    if b.len() != n || b.iter().any(|&v| v < 0) {
                        return Err(Error::Invalid("monomial exponents must be n non-negative integers".into()));
                    }
                    let w = get_i64(t, "w")?;
                    if w < 0 {
                        return Err(Error::Invalid("weight must be non-negative".into()));
                    }
                    XMono::gaussian(&b.iter().map(|&v| v as u16).collect::<Vec<_>>(), w as u16)
                }
            };
            f.add_term(m, c);
        }
        Ok(f)
    }
}

/// `(β−1)!! / (2w)^{β/2} · √(π/w)`: the one-dimensional Gaussian moment by
/// the double-factorial route, used as an independent check.
pub fn gaussian_moment_double_factorial(beta: u32, w: u32) -> BigFloatC {
    if beta % 2 == 1 {
        return BigFloatC::zero();
    }
    let half = beta / 2;
    let df = factorial(beta) / (factorial(half) * rat_int(1 << half));
    let denom = rat_int(2 * w as i64).pow(half as i32);
    let r = df / denom;
    let pi = crate::exact_scalars::bf_pi();
    let root = crate::exact_scalars::bf_sqrt(&crate::exact_scalars::bf_div(&pi, &bf_from_rational(&rat_int(w as i64))));
    BigFloatC::from_rational(&r).scale_real(&root)
}
