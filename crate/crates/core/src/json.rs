//! Fixed-format JSON numbers.
//!
//! Reports are compared byte-for-byte, so floats are always written with 17
//! significant digits in scientific notation instead of serde_json's shortest
//! round-trip form.

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        // JSON has no representation for these; they never reach a report
        // through validated paths.
        "null".to_string()
    }
}

pub fn serialize_f64<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    let raw = RawValue::from_string(format_f64(*x)).map_err(serde::ser::Error::custom)?;
    raw.serialize(s)
}

pub fn serialize_f64_slice<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        seq.serialize_element(&Fixed(*x))?;
    }
    seq.end()
}

/// Wrapper that serializes an `f64` in the fixed 17-digit format.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fixed(pub f64);

impl Serialize for Fixed {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        serialize_f64(&self.0, s)
    }
}

/// Pretty-prints with a trailing newline.
pub fn to_string<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let mut out = serde_json::to_string_pretty(value)?;
    out.push('\n');
    Ok(out)
}
