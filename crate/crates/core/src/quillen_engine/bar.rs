//! The bar construction `B = ⊕ A^{⊗n}` and the maps of its period-2 complex
//! `B →β Ω^{B,♮} →∂̄ B`, generic over the algebra. Formal sums carry integer
//! coefficients.

use std::collections::BTreeMap;

/// A signed formal sum.
pub type Sum<T> = Vec<(i64, T)>;

fn sign(k: usize) -> i64 {
    if k % 2 == 0 {
        1
    } else {
        -1
    }
}

/// `x ⊗ a ⊗ y ∈ Ω^B = B ⊗ A ⊗ B`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct OmegaTensor<A> {
    pub left: Vec<A>,
    pub mid: A,
    pub right: Vec<A>,
}

/// `b′(a₁…a_{n+1}) = Σ_{i=1}^{n} (−1)^{i−1}(…, a_i a_{i+1}, …)`; zero on `B₀` and `B₁`.
pub fn bar_bprime<A: Clone>(t: &[A], mul: impl Fn(&A, &A) -> A) -> Sum<Vec<A>> {
    (1..t.len())
        .map(|i| {
            let mut v = t[..i - 1].to_vec();
            v.push(mul(&t[i - 1], &t[i]));
            v.extend_from_slice(&t[i + 1..]);
            (sign(i - 1), v)
        })
        .collect()
}

/// `♮(a₁ ⊗ (a₂…a_n)) = Σ_{i=1}^{n} (−1)^{i(n−1)} (a_{i+1}…a_n) ⊗ a₁ ⊗ (a₂…a_i)`.
pub fn natural_sharp<A: Clone>(a1: &A, rest: &[A]) -> Sum<OmegaTensor<A>> {
    let n = rest.len() + 1;
    (1..=n)
        .map(|i| {
            let w = OmegaTensor { left: rest[i - 1..].to_vec(), mid: a1.clone(), right: rest[..i - 1].to_vec() };
            (sign(i * (n - 1)), w)
        })
        .collect()
}

/// `∂(x ⊗ a ⊗ y) = (x, a, y)`.
pub fn partial<A: Clone>(w: &OmegaTensor<A>) -> Vec<A> {
    let mut v = w.left.clone();
    v.push(w.mid.clone());
    v.extend_from_slice(&w.right);
    v
}

/// `∂̄ = ∂♮ : Ω^{B,♮} → B`.
pub fn partial_bar<A: Clone>(a1: &A, rest: &[A]) -> Sum<Vec<A>> {
    natural_sharp(a1, rest).into_iter().map(|(s, w)| (s, partial(&w))).collect()
}

/// `β(a₁…a_n) = (−1)^{n−1} a_n ⊗ (a₁…a_{n−1}) − a₁ ⊗ (a₂…a_n)`, as `(head, tail)` pairs.
pub fn beta<A: Clone>(t: &[A]) -> Sum<(A, Vec<A>)> {
    let n = t.len();
    if n == 0 {
        return Vec::new();
    }
    vec![(sign(n - 1), (t[n - 1].clone(), t[..n - 1].to_vec())), (-1, (t[0].clone(), t[1..].to_vec()))]
}

/// Collects like terms and drops zeros.
pub fn normalize<T: Ord>(s: Sum<T>) -> BTreeMap<T, i64> {
    let mut m = BTreeMap::new();
    for (c, t) in s {
        *m.entry(t).or_insert(0) += c;
    }
    m.retain(|_, c| *c != 0);
    m
}

/// `b′` extended linearly.
pub fn bar_bprime_sum<A: Clone>(s: &Sum<Vec<A>>, mul: impl Fn(&A, &A) -> A + Copy) -> Sum<Vec<A>> {
    s.iter().flat_map(|(c, t)| bar_bprime(t, mul).into_iter().map(move |(d, u)| (c * d, u))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Words of the free algebra; the product is concatenation.
    type Word = Vec<u8>;

    fn cat(a: &Word, b: &Word) -> Word {
        let mut v = a.clone();
        v.extend_from_slice(b);
        v
    }

    fn letters(t: &[u8]) -> Vec<Word> {
        t.iter().map(|&c| vec![c]).collect()
    }

    #[test]
    fn bprime_small_cases() {
        assert!(bar_bprime(&letters(&[1]), cat).is_empty());
        assert!(bar_bprime::<Word>(&[], cat).is_empty());
        assert_eq!(bar_bprime(&letters(&[1, 2]), cat), vec![(1, vec![vec![1, 2]])]);
    }

    #[test]
    fn sharp_small_cases() {
        let s = natural_sharp(&1u8, &[]);
        assert_eq!(s, vec![(1, OmegaTensor { left: vec![], mid: 1, right: vec![] })]);
        let s = natural_sharp(&1u8, &[2]);
        assert_eq!(s[0], (-1, OmegaTensor { left: vec![2], mid: 1, right: vec![] }));
        assert_eq!(s[1], (1, OmegaTensor { left: vec![], mid: 1, right: vec![2] }));
    }

    proptest! {
        #[test]
        fn bprime_squares_to_zero(t in prop::collection::vec(0u8..5, 0..=5)) {
            let once = bar_bprime(&letters(&t), cat);
            prop_assert!(normalize(bar_bprime_sum(&once, cat)).is_empty());
        }

        #[test]
        fn period_two_relations(t in prop::collection::vec(0u8..5, 1..=5)) {
            // ∂̄β = 0 on B.
            let s: Sum<Vec<u8>> = beta(&t)
                .into_iter()
                .flat_map(|(c, (h, tail))| partial_bar(&h, &tail).into_iter().map(move |(d, u)| (c * d, u)))
                .collect();
            prop_assert!(normalize(s).is_empty());
            // β∂̄ = 0 on Ω^{B,♮}.
            let s: Sum<(u8, Vec<u8>)> = partial_bar(&t[0], &t[1..])
                .into_iter()
                .flat_map(|(c, u)| beta(&u).into_iter().map(move |(d, v)| (c * d, v)))
                .collect();
            prop_assert!(normalize(s).is_empty());
        }

        #[test]
        fn partial_of_sharp_is_the_signed_rotation_sum(t in prop::collection::vec(0u8..5, 1..=5)) {
            let n = t.len();
            let direct: Sum<Vec<u8>> = (1..=n)
                .map(|i| {
                    let mut v = t[i..].to_vec();
                    v.extend_from_slice(&t[..i]);
                    (sign(i * (n - 1)), v)
                })
                .collect();
            prop_assert_eq!(normalize(partial_bar(&t[0], &t[1..])), normalize(direct));
        }
    }
}
