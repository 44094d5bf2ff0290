//! Fixed-decimal JSON number serialization for report files.

use serde::ser::Error as _;
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

/// Writes `value` as a JSON number with exactly `places` digits after the point.
pub(crate) fn write_fixed<S: Serializer>(value: f64, places: usize, s: S) -> Result<S::Ok, S::Error> {
    if !value.is_finite() {
        return Err(S::Error::custom(format!("non-finite value {value} in report")));
    }
    // -0.000000 is valid JSON but reads oddly in diffs
    let value = if value == 0.0 { 0.0 } else { value };
    let text = format!("{value:.places$}");
    let text = if text.starts_with('-') && text[1..].chars().all(|c| c == '0' || c == '.') {
        text[1..].to_string()
    } else {
        text
    };
    let raw = RawValue::from_string(text).map_err(S::Error::custom)?;
    raw.serialize(s)
}

pub(crate) fn six_places<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
    write_fixed(*value, 6, s)
}

/// A number that serializes either at full precision or at a fixed decimal count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Presented {
    pub value: f64,
    pub places: Option<usize>,
}

impl Serialize for Presented {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.places {
            Some(p) => write_fixed(self.value, p, s),
            None => self.value.serialize(s),
        }
    }
}
