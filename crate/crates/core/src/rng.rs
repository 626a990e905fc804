//! Seeded generators for random test inputs with bounded Fourier support,
//! bounded Gaussian weights, and small exact coefficients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coefficient_backends::{Backend, CoeffFunction, XMono, MAX_DIM};
use crate::exact_scalars::{rat, Gr};
use crate::symbol_algebra::{Component, FormalSymbol, HeisenbergContext, XiMono};

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Budgets for random symbols.
#[derive(Clone, Copy, Debug)]
pub struct Budget {
    /// Fourier frequencies lie in `[−max_freq, max_freq]ⁿ`.
    pub max_freq: i32,
    /// Gaussian polynomial exponents lie in `[0, max_poly]`.
    pub max_poly: u16,
    /// Gaussian weights lie in `[1, max_weight]`.
    pub max_weight: u16,
    /// Terms per coefficient function.
    pub coeff_terms: usize,
    /// ξ-monomials per component.
    pub xi_terms: usize,
    /// Largest `⟨α⟩` of a random ξ-monomial.
    pub max_alpha: i64,
}

impl Default for Budget {
    fn default() -> Self {
        Self { max_freq: 2, max_poly: 1, max_weight: 1, coeff_terms: 2, xi_terms: 2, max_alpha: 2 }
    }
}

impl Budget {
    pub fn small() -> Self {
        Self { max_freq: 1, max_poly: 1, max_weight: 1, coeff_terms: 1, xi_terms: 1, max_alpha: 2 }
    }
    /// Dense enough that top-degree integrals are generically nonzero.
    pub fn rich() -> Self {
        Self { max_freq: 1, max_poly: 2, max_weight: 2, coeff_terms: 3, xi_terms: 2, max_alpha: 2 }
    }
}

pub fn small_gr(r: &mut TestRng) -> Gr {
    let a = r.gen_range(-3..=3);
    let b = r.gen_range(-2..=2);
    let d = r.gen_range(1..=3);
    let g = Gr::new(rat(a, d), rat(b, d));
    if g.is_zero() {
        Gr::one()
    } else {
        g
    }
}

pub fn random_coeff(ctx: &HeisenbergContext, b: &Budget, r: &mut TestRng) -> CoeffFunction {
    let backend = ctx.coeff_backend();
    let mut f = CoeffFunction::zero(backend, ctx.n);
    while f.is_zero() {
        for _ in 0..r.gen_range(1..=b.coeff_terms) {
            let m = match backend {
                Backend::Torus => {
                    let mut k = [0i32; MAX_DIM];
                    for v in k.iter_mut().take(ctx.n) {
                        *v = r.gen_range(-b.max_freq..=b.max_freq);
                    }
                    XMono::fourier(&k[..ctx.n])
                }
                Backend::Gaussian => {
                    let mut beta = [0u16; MAX_DIM];
                    for v in beta.iter_mut().take(ctx.n) {
                        *v = r.gen_range(0..=b.max_poly);
                    }
                    XMono::gaussian(&beta[..ctx.n], r.gen_range(1..=b.max_weight))
                }
            };
            f.add_term(m, small_gr(r));
        }
    }
    f
}

/// A random ξ-monomial of Heisenberg degree `d`.
pub fn random_xi_mono(ctx: &HeisenbergContext, d: i64, b: &Budget, r: &mut TestRng) -> XiMono {
    if ctx.is_two_sheet() {
        return if r.gen_bool(0.5) { XiMono::plus(d as i32) } else { XiMono::minus(d as i32) };
    }
    let mut alpha = [0u16; MAX_DIM];
    let mut left = r.gen_range(0..=b.max_alpha);
    let mut used = 0;
    while left > 0 {
        let i = r.gen_range(0..ctx.n);
        let w = ctx.weight(i);
        if w > left {
            if ctx.p == 0 || i >= ctx.p {
                break;
            }
            continue;
        }
        alpha[i] += 1;
        left -= w;
        used += w;
    }
    XiMono::h(&alpha[..ctx.n], (d - used) as i32)
}

pub fn random_component(ctx: &HeisenbergContext, d: i64, b: &Budget, r: &mut TestRng) -> Component {
    let mut c = Component::default();
    for _ in 0..r.gen_range(1..=b.xi_terms) {
        let m = random_xi_mono(ctx, d, b, r);
        c.add_term(m, &random_coeff(ctx, b, r), &Gr::one());
    }
    c.normal_form(ctx)
}

/// Random symbol with components in `[cutoff, top]`, principal part nonzero.
pub fn random_symbol(ctx: &HeisenbergContext, top: i64, cutoff: i64, b: &Budget, r: &mut TestRng) -> FormalSymbol {
    let mut s = FormalSymbol::zero_with(*ctx, top, cutoff);
    for d in cutoff..=top {
        if d == top || r.gen_bool(0.6) {
            let c = random_component(ctx, d, b, r);
            if !c.is_zero() {
                s.comps.insert(d, c);
            }
        }
    }
    s
}

/// Random order-0 symbol with the default cutoff `−ν − 4`.
pub fn random_order0(ctx: &HeisenbergContext, b: &Budget, r: &mut TestRng) -> FormalSymbol {
    random_symbol(ctx, 0, -ctx.nu() - 4, b, r)
}
