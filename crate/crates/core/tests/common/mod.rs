#![allow(dead_code)]

use std::f64::consts::PI;

use radul_core::exact_scalars::rat;
pub use radul_core::samples::*;
use radul_core::symbol_algebra::FormalSymbol;

/// Winding number of a closed curve from `samples` values, by summing
/// principal-branch argument increments.
pub fn winding(f: impl Fn(f64) -> (f64, f64), samples: usize) -> i64 {
    let mut total = 0.0;
    let mut prev = f(0.0);
    for j in 1..=samples {
        let cur = f(2.0 * PI * j as f64 / samples as f64);
        let d = (cur.1 * prev.0 - cur.0 * prev.1).atan2(cur.0 * prev.0 + cur.1 * prev.1);
        total += d;
        prev = cur;
    }
    (total / (2.0 * PI)).round() as i64
}

/// Gohberg–Krein index of the Toeplitz-type symbol on TWO_SHEET: the sheet
/// values are sampled through the symbol's own real-locus evaluation and the
/// index is `w₋ − w₊`.
pub fn two_sheet_index_oracle(a: &FormalSymbol) -> i64 {
    let sheet = |xi: i64| {
        move |x: f64| {
            let xr = rat((x * 1_000_000.0).round() as i64, 1_000_000);
            let v = a.eval_real(&[xr], &[rat(xi, 1)]).expect("real-locus value");
            (v.re_f64(), v.im_f64())
        }
    };
    winding(sheet(-1), 720) - winding(sheet(1), 720)
}
