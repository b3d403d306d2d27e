//! JSON formats for event systems, moment sets and partitions.
//!
//! Numbers are read from their literal text, so `0.1` is exactly `1/10` in
//! rational mode. Strings such as `"1/3"` are accepted wherever a number is.

use serde_json::{Map, Value};

use crate::combinatorics::IndexTuple;
use crate::conditional::PartitionField;
use crate::error::{Error, Result};
use crate::moments::{MomentSet, MomentVector};
use crate::scalar::Scalar;
use crate::system::EventSystem;

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn document(text: &str, what: &str) -> Result<Map<String, Value>> {
    let value: Value = serde_json::from_str(text).map_err(|e| parse_err(format!("{what}: {e}")))?;
    match value {
        Value::Object(map) => Ok(map),
        _ => Err(parse_err(format!("{what}: top level must be an object"))),
    }
}

fn field<'a>(map: &'a Map<String, Value>, key: &str, what: &str) -> Result<&'a Value> {
    map.get(key).ok_or_else(|| parse_err(format!("{what}: missing field `{key}`")))
}

fn unsigned(value: &Value, path: &str) -> Result<usize> {
    value
        .as_u64()
        .map(|v| v as usize)
        .ok_or_else(|| parse_err(format!("{path}: expected a nonnegative integer, got {value}")))
}

fn scalar<T: Scalar>(value: &Value, path: &str) -> Result<T> {
    let literal = match value {
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        other => return Err(parse_err(format!("{path}: expected a number, got {other}"))),
    };
    T::parse_literal(&literal).map_err(|e| parse_err(format!("{path}: {e}")))
}

fn reject_unknown(map: &Map<String, Value>, known: &[&str], what: &str) -> Result<()> {
    match map.keys().find(|k| !known.contains(&k.as_str())) {
        Some(k) => Err(parse_err(format!("{what}: unknown field `{k}`"))),
        None => Ok(()),
    }
}

/// `{"n": int, "weights": {"<decimal mask>": number, ...}, "normalize": bool?}`.
///
/// Without `"normalize": true` the weights must already sum to one.
pub fn parse_system<T: Scalar>(text: &str) -> Result<EventSystem<T>> {
    let what = "system";
    let map = document(text, what)?;
    reject_unknown(&map, &["n", "weights", "normalize"], what)?;
    let n = unsigned(field(&map, "n", what)?, "n")?;
    let normalize = match map.get("normalize") {
        None => false,
        Some(Value::Bool(b)) => *b,
        Some(other) => return Err(parse_err(format!("normalize: expected true or false, got {other}"))),
    };
    let weights = field(&map, "weights", what)?
        .as_object()
        .ok_or_else(|| parse_err("weights: expected an object keyed by decimal masks"))?;
    let mut atoms = Vec::with_capacity(weights.len());
    for (key, value) in weights {
        if key.is_empty() || !key.bytes().all(|b| b.is_ascii_digit()) {
            return Err(parse_err(format!("weights[\"{key}\"]: key is not a decimal mask")));
        }
        let mask: u64 = key.parse().map_err(|_| parse_err(format!("weights[\"{key}\"]: mask out of range")))?;
        if n < 64 && mask >> n != 0 {
            return Err(parse_err(format!("weights[\"{key}\"]: mask has bits beyond n={n}")));
        }
        atoms.push((mask, scalar::<T>(value, &format!("weights[\"{key}\"]"))?));
    }
    if normalize {
        EventSystem::normalize(n, atoms)
    } else {
        EventSystem::from_probabilities(n, atoms)
    }
}

/// `{"n": int, "d": int, "ell": int, "s": [{"j": [ints], "values": [numbers]}, ...]}`.
pub fn parse_moments<T: Scalar>(text: &str) -> Result<MomentSet<T>> {
    let what = "moments";
    let map = document(text, what)?;
    reject_unknown(&map, &["n", "d", "ell", "s"], what)?;
    let n = unsigned(field(&map, "n", what)?, "n")?;
    let d = unsigned(field(&map, "d", what)?, "d")?;
    let ell = unsigned(field(&map, "ell", what)?, "ell")?;
    let entries = field(&map, "s", what)?.as_array().ok_or_else(|| parse_err("s: expected an array"))?;
    let mut vectors = Vec::with_capacity(entries.len());
    for (idx, entry) in entries.iter().enumerate() {
        let path = format!("s[{idx}]");
        let obj = entry.as_object().ok_or_else(|| parse_err(format!("{path}: expected an object")))?;
        reject_unknown(obj, &["j", "values"], &path)?;
        let j = field(obj, "j", &path)?
            .as_array()
            .ok_or_else(|| parse_err(format!("{path}.j: expected an array")))?
            .iter()
            .enumerate()
            .map(|(k, v)| unsigned(v, &format!("{path}.j[{k}]")))
            .collect::<Result<Vec<_>>>()?;
        let j = IndexTuple::new(j, n).map_err(|e| parse_err(format!("{path}.j: {e}")))?;
        let values = field(obj, "values", &path)?
            .as_array()
            .ok_or_else(|| parse_err(format!("{path}.values: expected an array")))?
            .iter()
            .enumerate()
            .map(|(k, v)| scalar::<T>(v, &format!("{path}.values[{k}]")))
            .collect::<Result<Vec<_>>>()?;
        vectors.push(MomentVector { j, values });
    }
    MomentSet::from_vectors(n, d, ell, vectors)
}

/// `{"blocks": [[atom masks], ...]}`, checked against `n`.
pub fn parse_partition(text: &str, n: usize) -> Result<PartitionField> {
    let what = "partition";
    let map = document(text, what)?;
    reject_unknown(&map, &["blocks"], what)?;
    let blocks = field(&map, "blocks", what)?
        .as_array()
        .ok_or_else(|| parse_err("blocks: expected an array of arrays"))?
        .iter()
        .enumerate()
        .map(|(b, block)| {
            block
                .as_array()
                .ok_or_else(|| parse_err(format!("blocks[{b}]: expected an array")))?
                .iter()
                .enumerate()
                .map(|(k, m)| m.as_u64().ok_or_else(|| parse_err(format!("blocks[{b}][{k}]: expected a mask, got {m}"))))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    PartitionField::new(n, blocks)
}

/// The system file for `sys`, listing nonzero atoms only.
pub fn system_to_json<T: Scalar>(sys: &EventSystem<T>) -> Value {
    let weights: Map<String, Value> = sys
        .support()
        .map(|(mask, w)| (mask.to_string(), serde_json::to_value(w).expect("scalars serialize")))
        .collect();
    serde_json::json!({ "n": sys.n(), "weights": weights })
}

/// The moment file for `set`.
pub fn moments_to_json<T: Scalar>(set: &MomentSet<T>) -> Value {
    serde_json::json!({
        "n": set.n(),
        "d": set.d(),
        "ell": set.ell(),
        "s": set.vectors(),
    })
}

pub fn partition_to_json(partition: &PartitionField) -> Value {
    serde_json::json!({ "blocks": partition.blocks() })
}
