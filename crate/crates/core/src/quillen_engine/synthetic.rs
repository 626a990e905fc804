//! A small graded algebra with a graded trace, independent of the symbol
//! calculus: `L = M₂(ℚ) ⊗ Λ[e₁, e₂]` with `τ(m ⊗ e₁e₂) = tr m` and `τ = 0` in
//! lower exterior degree. Bar cochains over an algebra `A` with basis
//! `{0, …, dim−1}` are tables of homogeneous values on basis tuples.

use num_traits::Zero;
use rand::Rng;

use super::bar::{beta, natural_sharp, partial, OmegaTensor};
use crate::rational::Rational;
use crate::rng::TestRng;

/// `Σ_I m_I ⊗ e_I`, indexed by exterior mask `I ⊂ {e₁, e₂}`; matrices row-major.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SynElt {
    pub c: [[Rational; 4]; 4],
}

/// `e_I e_J = sign · e_{I∪J}`, or `None` when `I ∩ J ≠ ∅`.
fn ext_sign(i: usize, j: usize) -> Option<i64> {
    if i & j != 0 {
        return None;
    }
    // Only e₂·e₁ = −e₁e₂ reorders.
    Some(if i == 2 && j == 1 { -1 } else { 1 })
}

impl SynElt {
    pub fn zero() -> Self {
        Self::default()
    }
    pub fn is_zero(&self) -> bool {
        self.c.iter().flatten().all(|x| x.is_zero())
    }
    pub fn add_scaled(&self, o: &Self, k: &Rational) -> Self {
        let mut r = self.clone();
        for (ri, oi) in r.c.iter_mut().zip(&o.c) {
            for (x, y) in ri.iter_mut().zip(oi) {
                *x += &(y * k);
            }
        }
        r
    }
    pub fn mul(&self, o: &Self) -> Self {
        let mut r = Self::zero();
        for (i, a) in self.c.iter().enumerate() {
            for (j, b) in o.c.iter().enumerate() {
                let Some(s) = ext_sign(i, j) else { continue };
                let s = Rational::from(s);
                for row in 0..2 {
                    for col in 0..2 {
                        let v = &(&a[2 * row] * &b[col]) + &(&a[2 * row + 1] * &b[2 + col]);
                        r.c[i | j][2 * row + col] += &(&v * &s);
                    }
                }
            }
        }
        r
    }
    fn scale_sign(self, k: usize) -> Self {
        if k % 2 == 0 {
            self
        } else {
            Self::zero().add_scaled(&self, &Rational::from(-1))
        }
    }
    /// The graded trace.
    pub fn tau(&self) -> Rational {
        &self.c[3][0] + &self.c[3][3]
    }
    pub fn random(degree: u32, r: &mut TestRng) -> Self {
        let mut e = Self::zero();
        for (m, row) in e.c.iter_mut().enumerate() {
            if (m as u32).count_ones() == degree {
                for x in row.iter_mut() {
                    *x = Rational::from(r.gen_range(-3i64..=3));
                }
            }
        }
        e
    }
}

/// A homogeneous bar cochain `A^{⊗arity} → L` of value degree `value_degree`.
#[derive(Clone, Debug)]
pub struct SynCochain {
    pub arity: usize,
    pub value_degree: u32,
    pub dim: usize,
    table: Vec<SynElt>,
}

impl SynCochain {
    pub fn random(arity: usize, value_degree: u32, dim: usize, r: &mut TestRng) -> Self {
        let table = (0..dim.pow(arity as u32)).map(|_| SynElt::random(value_degree, r)).collect();
        Self { arity, value_degree, dim, table }
    }
    pub fn zero(arity: usize, dim: usize) -> Self {
        Self { arity, value_degree: 0, dim, table: vec![SynElt::zero(); dim.pow(arity as u32)] }
    }
    /// Bar degree plus value degree.
    pub fn total_degree(&self) -> usize {
        self.arity + self.value_degree as usize
    }
    pub fn eval(&self, t: &[usize]) -> SynElt {
        assert_eq!(t.len(), self.arity, "bar cochain arity");
        let idx = t.iter().fold(0, |acc, &a| acc * self.dim + a);
        self.table[idx].clone()
    }
}

fn sign(k: usize) -> Rational {
    Rational::from(if k % 2 == 0 { 1 } else { -1 })
}

/// `(fg)(a₁…a_{p+q}) = (−1)^{p|g|} f(a₁…a_p) g(a_{p+1}…)`.
pub fn product_eval(f: &SynCochain, g: &SynCochain, t: &[usize]) -> SynElt {
    let p = f.arity;
    f.eval(&t[..p]).mul(&g.eval(&t[p..])).scale_sign(p * g.total_degree())
}

/// `[f, g] = fg − (−1)^{|f||g|} gf` in total degrees.
pub fn commutator_eval(f: &SynCochain, g: &SynCochain, t: &[usize]) -> SynElt {
    product_eval(f, g, t).add_scaled(&product_eval(g, f, t), &(-sign(f.total_degree() * g.total_degree())))
}

/// `(∂f·g)(x ⊗ a ⊗ y) = (fg)(x, a, y)` when `a` falls among the arguments of `f`.
pub fn partial_product_eval(f: &SynCochain, g: &SynCochain, w: &OmegaTensor<usize>) -> SynElt {
    if w.left.len() < f.arity {
        product_eval(f, g, &partial(w))
    } else {
        SynElt::zero()
    }
}

/// `τ^♮(∂f·g)(a₁ ⊗ (a₂…a_n)) = τ((∂f·g)♮(a₁ ⊗ (a₂…a_n)))`.
pub fn tau_sharp_eval(f: &SynCochain, g: &SynCochain, head: usize, tail: &[usize]) -> Rational {
    natural_sharp(&head, tail).iter().map(|(s, w)| &partial_product_eval(f, g, w).tau() * &Rational::from(*s)).sum()
}

/// Both sides of `β(τ^♮(∂f·g)) = −τ([f, g])` on the tensor `t` of length `arity f + arity g`.
pub fn trace_lemma_sides(f: &SynCochain, g: &SynCochain, t: &[usize]) -> (Rational, Rational) {
    let lhs = beta(t).iter().map(|(s, (h, tail))| &tau_sharp_eval(f, g, *h, tail) * &Rational::from(*s)).sum();
    (lhs, -commutator_eval(f, g, t).tau())
}
