//! Canonical JSON encoding: lexicographically sorted keys, two-space
//! indent, LF line endings, trailing newline. All committed artifacts go
//! through this writer so repeated runs are byte-identical.

use serde::Serialize;
use serde_json::Value;

pub fn to_canonical_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, serde_json::Error> {
    // Round-tripping through Value sorts object keys (BTreeMap-backed).
    let value: Value = serde_json::to_value(value)?;
    let mut buf = serde_json::to_vec_pretty(&value)?;
    buf.push(b'\n');
    Ok(buf)
}

pub fn to_canonical_string<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    let bytes = to_canonical_bytes(value)?;
    Ok(String::from_utf8(bytes).expect("serde_json emits UTF-8"))
}
