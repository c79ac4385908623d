//! Deterministic JSON serialization per RFC 8785 (JSON Canonicalization
//! Scheme).
//!
//! Every signature in the protocol is computed over canonical bytes, so two
//! independent implementations serializing the same structured value must
//! produce identical octets. The scheme:
//!
//! - object members sorted by the UTF-16 code units of their names
//! - no insignificant whitespace
//! - strings escaped minimally (`\"`, `\\`, the short control escapes, and
//!   `\u00xx` for remaining control characters); everything else is literal
//!   UTF-8
//! - numbers printed in ECMAScript `Number::toString` form
//!
//! Protocol payloads restrict integers to the IEEE-754 safe range
//! (|n| <= 2^53 - 1); larger integers cannot survive a round trip through a
//! double and are rejected. Monetary amounts travel as decimal strings.

use std::fmt::Write as _;

use serde::de::{DeserializeSeed, MapAccess, SeqAccess, Visitor};
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

/// Largest integer magnitude exactly representable in an IEEE-754 double.
pub const MAX_SAFE_INTEGER: u64 = (1 << 53) - 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CanonicalizeError {
    #[error("duplicate member name: {0}")]
    DuplicateKey(String),
    #[error("integer outside the IEEE-754 safe range: {0}")]
    IntegerOutOfRange(String),
    #[error("non-finite number cannot be canonicalized")]
    NonFinite,
    #[error("value is not representable as JSON: {0}")]
    NotJson(String),
}

/// Canonical byte sequence of a JSON value.
pub fn canonicalize(value: &Value) -> Result<Vec<u8>, CanonicalizeError> {
    let mut out = String::new();
    write_value(&mut out, value)?;
    Ok(out.into_bytes())
}

/// Canonical bytes of any serializable value (via its JSON representation).
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CanonicalizeError> {
    let json =
        serde_json::to_value(value).map_err(|e| CanonicalizeError::NotJson(e.to_string()))?;
    canonicalize(&json)
}

/// Parse JSON text, rejecting duplicate member names.
///
/// `serde_json` silently keeps the last duplicate; signed payloads must not
/// admit that ambiguity, so external input goes through this parser.
pub fn parse_canonical_text(text: &str) -> Result<Value, CanonicalizeError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = StrictValue.deserialize(&mut de).map_err(map_parse_error)?;
    de.end().map_err(map_parse_error)?;
    Ok(value)
}

const DUPLICATE_MARKER: &str = "__dup_member__:";

fn map_parse_error(err: serde_json::Error) -> CanonicalizeError {
    let msg = err.to_string();
    if let Some(idx) = msg.find(DUPLICATE_MARKER) {
        let tail = &msg[idx + DUPLICATE_MARKER.len()..];
        let key = tail.split(" at ").next().unwrap_or(tail);
        CanonicalizeError::DuplicateKey(key.to_string())
    } else {
        CanonicalizeError::NotJson(msg)
    }
}

/// Builds a `serde_json::Value` while erroring on duplicate object keys.
struct StrictValue;

impl<'de> DeserializeSeed<'de> for StrictValue {
    type Value = Value;

    fn deserialize<D>(self, deserializer: D) -> Result<Value, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        deserializer.deserialize_any(StrictValueVisitor)
    }
}

struct StrictValueVisitor;

impl<'de> Visitor<'de> for StrictValueVisitor {
    type Value = Value;

    fn expecting(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("any JSON value")
    }

    fn visit_bool<E>(self, v: bool) -> Result<Value, E> {
        Ok(Value::Bool(v))
    }

    fn visit_i64<E>(self, v: i64) -> Result<Value, E> {
        Ok(Value::from(v))
    }

    fn visit_u64<E>(self, v: u64) -> Result<Value, E> {
        Ok(Value::from(v))
    }

    fn visit_f64<E>(self, v: f64) -> Result<Value, E> {
        Ok(serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number))
    }

    fn visit_str<E>(self, v: &str) -> Result<Value, E> {
        Ok(Value::String(v.to_owned()))
    }

    fn visit_string<E>(self, v: String) -> Result<Value, E> {
        Ok(Value::String(v))
    }

    fn visit_unit<E>(self) -> Result<Value, E> {
        Ok(Value::Null)
    }

    fn visit_seq<A>(self, mut seq: A) -> Result<Value, A::Error>
    where
        A: SeqAccess<'de>,
    {
        let mut items = Vec::new();
        while let Some(item) = seq.next_element_seed(StrictValue)? {
            items.push(item);
        }
        Ok(Value::Array(items))
    }

    fn visit_map<A>(self, mut map: A) -> Result<Value, A::Error>
    where
        A: MapAccess<'de>,
    {
        let mut object = serde_json::Map::new();
        while let Some(key) = map.next_key::<String>()? {
            if object.contains_key(&key) {
                return Err(serde::de::Error::custom(format!("{DUPLICATE_MARKER}{key}")));
            }
            let value = map.next_value_seed(StrictValue)?;
            object.insert(key, value);
        }
        Ok(Value::Object(object))
    }
}

fn write_value(out: &mut String, value: &Value) -> Result<(), CanonicalizeError> {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(true) => out.push_str("true"),
        Value::Bool(false) => out.push_str("false"),
        Value::Number(n) => write_number(out, n)?,
        Value::String(s) => write_string(out, s),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(out, item)?;
            }
            out.push(']');
        }
        Value::Object(members) => {
            // RFC 8785 orders members by UTF-16 code units, not Unicode code
            // points; the two differ once keys contain supplementary-plane
            // characters.
            let mut entries: Vec<(&String, &Value)> = members.iter().collect();
            entries.sort_by(|a, b| a.0.encode_utf16().cmp(b.0.encode_utf16()));
            out.push('{');
            for (i, (key, val)) in entries.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_string(out, key);
                out.push(':');
                write_value(out, val)?;
            }
            out.push('}');
        }
    }
    Ok(())
}

fn write_number(out: &mut String, n: &serde_json::Number) -> Result<(), CanonicalizeError> {
    if let Some(u) = n.as_u64() {
        if u > MAX_SAFE_INTEGER {
            return Err(CanonicalizeError::IntegerOutOfRange(u.to_string()));
        }
        write!(out, "{u}").expect("write to String");
    } else if let Some(i) = n.as_i64() {
        if i.unsigned_abs() > MAX_SAFE_INTEGER {
            return Err(CanonicalizeError::IntegerOutOfRange(i.to_string()));
        }
        write!(out, "{i}").expect("write to String");
    } else if let Some(f) = n.as_f64() {
        if !f.is_finite() {
            return Err(CanonicalizeError::NonFinite);
        }
        let mut buffer = ryu_js::Buffer::new();
        out.push_str(buffer.format_finite(f));
    } else {
        return Err(CanonicalizeError::NotJson("unsupported number".into()));
    }
    Ok(())
}

fn write_string(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\u{0008}' => out.push_str("\\b"),
            '\u{0009}' => out.push_str("\\t"),
            '\u{000A}' => out.push_str("\\n"),
            '\u{000C}' => out.push_str("\\f"),
            '\u{000D}' => out.push_str("\\r"),
            c if (c as u32) < 0x20 => {
                write!(out, "\\u{:04x}", c as u32).expect("write to String");
            }
            c => out.push(c),
        }
    }
    out.push('"');
}
