mod common;

use common::*;
use proptest::prelude::*;
use radul_core::cyclic_index::*;
use radul_core::exact_scalars::{Gr, Scalar};
use radul_core::rng::{rng, Budget};
use radul_core::symbol_algebra::HeisenbergContext;

fn exact(v: i64) -> Scalar {
    Scalar::from_int(v)
}

fn assert_exact_eq(a: &Scalar, b: &Scalar) {
    assert!((a - b).is_exact_zero(), "{a:?} != {b:?}");
}

#[test]
fn toeplitz_index_matches_winding_oracle() {
    for k in 1..=3 {
        let kc = toeplitz_kclass(k).unwrap();
        kc.check_inverse().unwrap();
        let oracle = two_sheet_index_oracle(&toeplitz_symbol(k));
        assert_eq!(oracle, -(k as i64));
        assert_exact_eq(&index_radul(&kc).unwrap(), &exact(oracle));
        assert_exact_eq(&index_top_degree(&kc).unwrap(), &exact(oracle));
    }
}

#[test]
fn reversed_argument_order_flips_the_index() {
    let kc = toeplitz_kclass(2).unwrap();
    let rev = radul_cocycle(&[kc.u_inv.clone(), kc.u.clone()]).unwrap();
    assert_exact_eq(&rev, &exact(2));
}

#[test]
fn constants_and_identity_have_index_zero() {
    let ctx = HeisenbergContext::two_sheet();
    for kc in [constant_kclass(ctx).unwrap(), identity_kclass(ctx, 2).unwrap()] {
        assert!(index_radul(&kc).unwrap().is_exact_zero());
        assert!(index_top_degree(&kc).unwrap().is_exact_zero());
        assert!(k_pairing(&[psi(1), phi(1)], &kc).unwrap().is_exact_zero());
    }
}

#[test]
fn index_is_additive_under_block_sums() {
    let s = toeplitz_kclass(1).unwrap().block_diag(&toeplitz_kclass(2).unwrap()).unwrap();
    assert_exact_eq(&index_radul(&s).unwrap(), &exact(-3));
    assert_exact_eq(&index_top_degree(&s).unwrap(), &exact(-3));
}

#[test]
fn cohomologous_cocycles_pair_equally_on_fixtures() {
    for kc in fixtures().unwrap() {
        let n = kc.ctx.n;
        let radul = k_pairing(&[radul()], &kc).unwrap();
        let pair = k_pairing(&[psi(n), phi(n)], &kc).unwrap();
        assert!((&radul - &pair).abs_f64() < 1e-6, "{}: {radul:?} vs {pair:?}", kc.name);
        for v in [index_radul(&kc).unwrap(), index_top_degree(&kc).unwrap()] {
            let (re, im, dist) = v.to_bigfloat().nearest_integer();
            assert!(dist < 1e-6 && im == 0, "{}: {v:?}", kc.name);
            let _ = re;
        }
    }
}

#[test]
fn phi_zero_is_the_radul_cocycle() {
    let mut r = rng(11);
    let mut nontrivial = 0;
    for _ in 0..6 {
        let t = dense_tuple(2, &mut r);
        let c = radul().eval(&t).unwrap();
        nontrivial += usize::from(!c.is_exact_zero());
        assert_exact_eq(&phi(0).eval(&t).unwrap(), &c);
    }
    assert!(nontrivial >= 3);
    let ctx = HeisenbergContext::gaussian(2, 1);
    for t in tuples(&ctx, 3, 2, &Budget::rich(), 12) {
        let d = &phi(0).eval(&t).unwrap() - &radul().eval(&t).unwrap();
        assert!(d.abs_f64() < 1e-30, "{d:?}");
    }
}

#[test]
fn top_prefactor_resolves_to_factorial() {
    for (ctx, seed) in [(HeisenbergContext::two_sheet(), 21), (HeisenbergContext::gaussian(1, 1), 22)] {
        let rep = resolve_top_prefactor(&top_degree_samples(ctx, 4, seed).unwrap()).unwrap();
        assert_eq!(rep.matched, vec![TopPrefactor::Factorial], "{}", rep.to_json());
    }
    // At n = 2 the two factorial variants coincide.
    let ctx = HeisenbergContext::gaussian(2, 1);
    let rep = resolve_top_prefactor(&top_degree_samples(ctx, 2, 23).unwrap()).unwrap();
    assert_eq!(rep.matched, vec![TopPrefactor::Factorial, TopPrefactor::SignedFactorial], "{}", rep.to_json());
    assert_eq!(resolved_top_prefactor(ctx).unwrap(), Some(TopPrefactor::Factorial));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]
    #[test]
    fn bicomplex_identities_are_exact(seed in any::<u64>(), k in 1usize..=2) {
        let ctx = HeisenbergContext::two_sheet();
        let mut r = rng(seed);
        let f = random_probe(&ctx, k, &mut r);
        let t = dense_tuple(k + 3, &mut r);
        prop_assert!(f.hochschild_b().hochschild_b().eval(&t).unwrap().is_exact_zero());
        let g = random_probe(&ctx, k + 1, &mut r);
        let bb = g.connes_b().unwrap().hochschild_b().add(&g.hochschild_b().connes_b().unwrap()).unwrap();
        prop_assert!(bb.eval(&t[..k + 2]).unwrap().is_exact_zero());
        let h = random_probe(&ctx, k + 1, &mut r);
        prop_assert!(h.connes_b().unwrap().connes_b().unwrap().eval(&t[..k]).unwrap().is_exact_zero());
    }
}

#[test]
fn hochschild_b_of_a_trace_vanishes_on_pairs() {
    let tr = Cochain::custom(0, "residue", |a: &[SymMat]| radul_core::wodzicki_residue::residue(&a[0].e[0]));
    let mut r = rng(32);
    for _ in 0..5 {
        let t = dense_tuple(2, &mut r);
        assert!(tr.hochschild_b().eval(&t).unwrap().is_exact_zero());
    }
}

#[test]
fn top_phi_vanishes() {
    let mut r = rng(41);
    for _ in 0..4 {
        assert!(phi(1).eval(&dense_tuple(4, &mut r)).unwrap().is_exact_zero());
    }
    let ctx = HeisenbergContext::gaussian(2, 1);
    for t in tuples(&ctx, 2, 6, &Budget::default(), 42) {
        assert!(phi(2).eval(&t).unwrap().abs_f64() < 1e-10);
    }
}

#[test]
fn psi_phi_pairs_are_closed() {
    let mut r = rng(51);
    let mut nontrivial = 0;
    for _ in 0..3 {
        let t = dense_tuple(4, &mut r);
        // At n = 1 the top φ vanishes, so bψ₁ = −Bφ₃ = 0 as well.
        nontrivial += usize::from(!psi(1).eval(&t[..2]).unwrap().is_exact_zero());
        let cross = phi(1).connes_b().unwrap().add(&psi(1).hochschild_b()).unwrap();
        assert!(cross.eval(&t[..3]).unwrap().is_exact_zero());
        assert!(psi(1).connes_b().unwrap().eval(&t[..1]).unwrap().is_exact_zero());
        assert!(phi(0).hochschild_b().eval(&t[..3]).unwrap().is_exact_zero());
    }
    assert!(nontrivial >= 1);
    let ctx = HeisenbergContext::gaussian(2, 1);
    let t = &tuples(&ctx, 1, 4, &Budget::rich(), 52)[0];
    let cross = phi(1).connes_b().unwrap().add(&psi(1).hochschild_b()).unwrap();
    let bpsi = psi(1).hochschild_b().eval(&t[..3]).unwrap();
    assert!(bpsi.abs_f64() > 1e-6, "degenerate sample");
    assert!(cross.eval(&t[..3]).unwrap().abs_f64() < 1e-30);
}

#[test]
fn transgression_holds_at_n1() {
    let ctx = HeisenbergContext::gaussian(1, 1);
    let rep = check_transgression(0, &tuples(&ctx, 3, 4, &Budget::rich(), 61)).unwrap();
    assert!(rep.max_deviation() < 1e-30, "{}", rep.to_json());
}

#[test]
fn transgression_middle_component_is_nondegenerate_at_n2() {
    let ctx = HeisenbergContext::gaussian(2, 1);
    let t = &tuples(&ctx, 1, 4, &Budget::rich(), 9)[0];
    let phi1 = phi(0).eval(&t[..2]).unwrap();
    let psi1 = psi(1).eval(&t[..2]).unwrap();
    assert!((&phi1 - &psi1).abs_f64() > 1e-6);
    let rep = check_transgression(0, &[t.clone()]).unwrap();
    assert!(rep.max_deviation() < 1e-30, "{}", rep.to_json());
}

#[test]
fn gamma_prime_without_its_first_term_fails_transgression() {
    let ctx = HeisenbergContext::gaussian(2, 1);
    let t = &tuples(&ctx, 1, 2, &Budget::rich(), 9)[0];
    let partial = Cochain::custom(2, "sum only", |a: &[SymMat]| {
        let (_, sum) = gamma_prime_parts(1, a)?;
        Ok(sum.scale(&(radul_core::form_calculus::conventions().c.inv().unwrap() * Gr::from_ratio(1, 6))))
    });
    let mid =
        phi(0).sub(&psi(1)).unwrap().sub(&gamma(0).hochschild_b()).unwrap().add(&partial.connes_b().unwrap()).unwrap();
    assert!(mid.eval(t).unwrap().abs_f64() > 1e-6);
}

#[test]
fn arity_is_checked() {
    let ctx = HeisenbergContext::two_sheet();
    let t = &tuples(&ctx, 1, 3, &Budget::small(), 71)[0];
    assert!(radul().eval(t).is_err());
    assert!(radul().connes_b().unwrap().eval(&t[..1]).is_ok());
    assert!(Cochain::<SymMat>::zero(0).connes_b().is_err());
    assert_eq!(psi(2).rule.to_string(), "psi_3");
}

#[test]
fn kclass_json_round_trip() {
    for kc in [toeplitz_kclass(2).unwrap(), su2_kclass(1).unwrap()] {
        let back = KClass::from_json(&kc.to_json()).unwrap();
        assert_eq!(back.u, kc.u);
        assert_eq!(back.u_inv, kc.u_inv);
        assert_exact_eq(&index_radul(&back).unwrap(), &index_radul(&kc).unwrap());
    }
}

#[test]
fn non_elliptic_kclass_is_rejected() {
    let ctx = HeisenbergContext::two_sheet();
    let c = |v: i64| radul_core::symbol_algebra::FormalSymbol::constant(ctx, Gr::from_int(v));
    let u = SymMat::from_rows(vec![vec![c(1), c(1)], vec![c(1), c(1)]]).unwrap();
    let v0 = SymMat::identity(ctx, 2);
    assert!(KClass::new("singular", u, Some(v0), 4).is_err());
}

#[test]
fn probe_cochains_are_nontrivial() {
    let ctx = HeisenbergContext::two_sheet();
    let nonzero = (0..10u64)
        .filter(|&seed| {
            let mut r = rng(seed);
            let f = random_probe(&ctx, 2, &mut r);
            let t = dense_tuple(4, &mut r);
            !f.eval(&t[..3]).unwrap().is_exact_zero() && !f.hochschild_b().eval(&t).unwrap().is_exact_zero()
        })
        .count();
    assert!(nonzero >= 3, "only {nonzero} nontrivial probes");
}
