//! Seeded sample data for the verification suites: tuples of order-0 symbols,
//! dense TWO_SHEET symbols, and derivation probes with nonvanishing residues.

use rand::Rng;

use crate::coefficient_backends::CoeffFunction;
use crate::cyclic_index::{Cochain, SymMat};
use crate::exact_scalars::{Gr, Scalar};
use crate::rng::{random_order0, random_symbol, rng, small_gr, Budget, TestRng};
use crate::symbol_algebra::{Component, FormalSymbol, HeisenbergContext, XiMono};
use crate::wodzicki_residue::residue;
use crate::zeta_laurent::LaurentGerm;

/// Random order-0 scalar symbols, truncated one degree above the default cutoff.
pub fn tuple(ctx: &HeisenbergContext, len: usize, b: &Budget, r: &mut TestRng) -> Vec<SymMat> {
    (0..len).map(|_| SymMat::scalar(random_order0(ctx, b, r).truncate(-ctx.nu() - 3))).collect()
}

pub fn tuples(ctx: &HeisenbergContext, count: usize, len: usize, b: &Budget, seed: u64) -> Vec<Vec<SymMat>> {
    let mut r = rng(seed);
    (0..count).map(|_| tuple(ctx, len, b, &mut r)).collect()
}

/// Low frequencies and several terms, so that residues are rarely zero.
pub fn dense() -> Budget {
    Budget { max_freq: 1, coeff_terms: 3, ..Budget::rich() }
}

/// Enough ξ-monomials and coefficient terms that GAUSSIAN θ-type residues are
/// generically nonzero.
pub fn dense_gaussian() -> Budget {
    Budget { xi_terms: 3, coeff_terms: 4, max_alpha: 3, ..Budget::rich() }
}

/// TWO_SHEET symbols whose principal part carries both sheets and every
/// frequency in `{−1, 0, 1}`, plus random lower-order parts; random symbols
/// alone give mostly vanishing residues.
pub fn dense_two_sheet(r: &mut TestRng) -> FormalSymbol {
    let ctx = HeisenbergContext::two_sheet();
    let mut c = Component::default();
    for m in [XiMono::plus(0), XiMono::minus(0)] {
        for k in -1..=1 {
            c.add_term(m, &CoeffFunction::fourier(1, &[k], small_gr(r)), &Gr::one());
        }
    }
    FormalSymbol::homogeneous(ctx, 0, c).add(&random_symbol(&ctx, -1, -ctx.nu() - 3, &dense(), r))
}

pub fn dense_tuple(len: usize, r: &mut TestRng) -> Vec<SymMat> {
    (0..len).map(|_| SymMat::scalar(dense_two_sheet(r))).collect()
}

/// A derivation of the symbol algebra.
#[derive(Clone)]
pub enum Der {
    Delta,
    Ad(FormalSymbol),
}

impl Der {
    fn apply(&self, a: &FormalSymbol, floor: i64) -> FormalSymbol {
        match self {
            Der::Delta => a.delta_floor(floor),
            Der::Ad(h) => h.star_floor(a, floor).sub(&a.star_floor(h, floor)),
        }
    }
}

/// `f(a₀, …, a_k) = ⨍ a₀ D₁(a₁) ⋯ D_k(a_k) g`: a normalized cochain, since
/// every `D_i` kills the unit.
pub fn probe(ders: Vec<Der>, g: FormalSymbol) -> Cochain<SymMat> {
    let k = ders.len();
    Cochain::custom(k, "probe", move |a: &[SymMat]| {
        let floor = -a[0].ctx.nu() - 4;
        let mut acc = a[0].e[0].clone();
        for (d, x) in ders.iter().zip(&a[1..]) {
            acc = acc.star_floor(&d.apply(&x.e[0], floor), floor);
        }
        residue(&acc.star_floor(&g, floor))
    })
}

/// Each derivation lowers the order by one and `b` of the probe ends in a
/// commutator with `g`, so `g` has order `k` to keep the residue degree in reach.
/// TWO_SHEET only.
pub fn random_probe(ctx: &HeisenbergContext, k: usize, r: &mut TestRng) -> Cochain<SymMat> {
    let b = dense();
    let ders = (0..k).map(|_| if r.gen_bool(0.5) { Der::Delta } else { Der::Ad(dense_two_sheet(r)) }).collect();
    let g = dense_two_sheet(r).star(&FormalSymbol::monomial(
        *ctx,
        XiMono::plus(k as i32),
        CoeffFunction::fourier(1, &[0], Gr::one()),
    ));
    probe(ders, g.add(&random_symbol(ctx, k as i64, -ctx.nu() - 4, &b, r)))
}

/// A TWO_SHEET symbol with an order-0 part and a degree `−ν = −1` part on both
/// sheets, so its residue is nonzero.
pub fn example_symbol() -> FormalSymbol {
    let ctx = HeisenbergContext::two_sheet();
    let mut low = Component::default();
    low.add_term(XiMono::plus(-1), &CoeffFunction::fourier(1, &[0], Gr::from_int(2)), &Gr::one());
    low.add_term(XiMono::minus(-1), &CoeffFunction::fourier(1, &[1], Gr::one()), &Gr::one());
    low.add_term(XiMono::minus(-1), &CoeffFunction::fourier(1, &[0], Gr::from_ratio(1, 2)), &Gr::one());
    let top = crate::cyclic_index::toeplitz_symbol(1);
    top.truncate(-4).add(&FormalSymbol::homogeneous(ctx, -1, low).truncate(-4))
}

/// A germ with a double pole: `3/z² + 5/z + 7 + O(z)`.
pub fn example_germ() -> LaurentGerm {
    LaurentGerm::new(2, [(-2, Scalar::from_int(3)), (-1, Scalar::from_int(5)), (0, Scalar::from_int(7))])
        .expect("exponents within the pole order")
}
