//! Shared CSV number formatting: floats are written with 17 significant
//! digits, enough to round-trip any f64 bit-exactly.

use crate::scalar::Scalar;

/// Format a scalar with 17 significant digits.
pub fn fmt_scalar<T: Scalar>(v: T) -> String {
    let v = v.to_f64().unwrap_or(f64::NAN);
    format!("{:.16e}", v)
}

/// Parse a float field, mapping errors to a message naming the column.
pub fn parse_field<T: Scalar>(raw: &str, column: &str) -> Result<T, String> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| format!("column `{column}`: not a number: `{raw}`"))?;
    Ok(T::of(v))
}
