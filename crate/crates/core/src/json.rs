//! JSON helpers shared by the file formats and reports.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};

fn int_to_json(x: &BigInt) -> Value {
    match x.to_i64() {
        Some(v) => json!(v),
        None => json!(x.to_string()),
    }
}

fn int_from_json(v: &Value) -> Result<BigInt> {
    match v {
        Value::Number(n) => n
            .as_i64()
            .map(BigInt::from)
            .or_else(|| n.as_u64().map(BigInt::from))
            .ok_or_else(|| Error::Parse(format!("not an integer: {n}"))),
        Value::String(s) => s.parse().map_err(|_| Error::Parse(format!("not an integer: {s:?}"))),
        _ => Err(Error::Parse(format!("expected an integer, got {v}"))),
    }
}

/// `{num, den}`, components as numbers when they fit in `i64`, else strings.
pub fn rational_to_json(r: &BigRational) -> Value {
    json!({ "num": int_to_json(r.numer()), "den": int_to_json(r.denom()) })
}

/// `{num, den, float}`, the report form of an exact value.
pub fn rational_report(r: &BigRational) -> Value {
    json!({
        "num": int_to_json(r.numer()),
        "den": int_to_json(r.denom()),
        "float": r.to_f64().unwrap_or(f64::NAN),
    })
}

pub fn rational_from_json(v: &Value) -> Result<BigRational> {
    let num = int_from_json(v.get("num").ok_or_else(|| Error::Parse("rational without num".into()))?)?;
    let den = int_from_json(v.get("den").ok_or_else(|| Error::Parse("rational without den".into()))?)?;
    if den.is_zero() {
        return Err(Error::Parse("rational with zero denominator".into()));
    }
    Ok(BigRational::new(num, den))
}

/// `"num/den (float)"`.
pub fn rational_display(r: &BigRational) -> String {
    format!("{}/{} ({})", r.numer(), r.denom(), r.to_f64().unwrap_or(f64::NAN))
}
