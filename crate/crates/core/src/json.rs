//! JSON encodings shared by every module: rationals are `[num, den]` string
//! pairs, complex rationals are `{"re": .., "im": ..}`.

use num_bigint::BigInt;
use num_traits::Zero;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exact_scalars::{BigFloatC, Gr, Rational, Scalar};

pub fn rational_to_json(r: &Rational) -> Value {
    json!([r.numer().to_string(), r.denom().to_string()])
}

pub fn rational_from_json(v: &Value) -> Result<Rational> {
    let bad = || Error::Invalid(format!("expected rational [num, den], got {v}"));
    match v {
        Value::Array(a) if a.len() == 2 => {
            let p = |x: &Value| -> Result<BigInt> {
                match x {
                    Value::String(s) => s.trim().parse().map_err(|_| bad()),
                    Value::Number(n) => n.as_i64().map(BigInt::from).ok_or_else(bad),
                    _ => Err(bad()),
                }
            };
            let (n, d) = (p(&a[0])?, p(&a[1])?);
            if d.is_zero() {
                return Err(Error::Invalid("zero denominator".into()));
            }
            Ok(Rational::new(n, d))
        }
        Value::Number(n) => n.as_i64().map(|i| Rational::from_integer(i.into())).ok_or_else(bad),
        Value::String(s) => s.trim().parse::<BigInt>().map(Rational::from_integer).map_err(|_| bad()),
        _ => Err(bad()),
    }
}

pub fn gr_to_json(c: &Gr) -> Value {
    json!({"re": rational_to_json(&c.re), "im": rational_to_json(&c.im)})
}

/// Accepts `{"re", "im"}` objects (either part optional) or a bare rational.
pub fn gr_from_json(v: &Value) -> Result<Gr> {
    match v {
        Value::Object(m) => {
            let part = |k: &str| m.get(k).map(rational_from_json).transpose();
            Ok(Gr::new(part("re")?.unwrap_or_else(Rational::zero), part("im")?.unwrap_or_else(Rational::zero)))
        }
        _ => Ok(Gr::from_rational(rational_from_json(v)?)),
    }
}

/// Fixed 30-digit rendering keeps reports byte-identical across runs.
pub fn bigfloat_to_json(x: &BigFloatC) -> Value {
    let (re, im) = x.to_decimal(30);
    json!({"re": re, "im": im})
}

pub fn scalar_to_json(s: &Scalar) -> Value {
    match s {
        Scalar::Exact(p) => {
            if let Some(r) = p.as_rational() {
                json!({"exact": gr_to_json(&r), "value": bigfloat_to_json(&s.to_bigfloat())})
            } else {
                json!({"exact_periods": format!("{p:?}"), "value": bigfloat_to_json(&s.to_bigfloat())})
            }
        }
        Scalar::Float(f) => json!({"value": bigfloat_to_json(f)}),
    }
}

pub fn get<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| Error::Invalid(format!("missing field '{key}'")))
}

pub fn get_i64(v: &Value, key: &str) -> Result<i64> {
    get(v, key)?.as_i64().ok_or_else(|| Error::Invalid(format!("field '{key}' must be an integer")))
}

pub fn int_array(v: &Value) -> Result<Vec<i64>> {
    v.as_array()
        .ok_or_else(|| Error::Invalid(format!("expected integer array, got {v}")))?
        .iter()
        .map(|x| x.as_i64().ok_or_else(|| Error::Invalid(format!("expected integer, got {x}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_scalars::rat;
    use num_traits::One;

    #[test]
    fn gr_roundtrip() {
        let c = Gr::new(rat(-3, 7), rat(5, 2));
        assert_eq!(gr_from_json(&gr_to_json(&c)).unwrap(), c);
        assert_eq!(gr_from_json(&json!(3)).unwrap(), Gr::from_int(3));
        assert!(rational_from_json(&json!(["1", "0"])).is_err());
        assert_eq!(rational_from_json(&json!(["4", "2"])).unwrap(), Rational::one() + Rational::one());
    }
}
