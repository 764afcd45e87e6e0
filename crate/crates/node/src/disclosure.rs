//! Minimal disclosure: outgoing structured payloads carry only the fields
//! the negotiated protocol schema names.

use serde_json::Value;

use anp_core::metaproto::FieldSpec;

/// Remove object fields absent from the schema. Returns the reduced value
/// and the names that were stripped; non-object payloads pass through.
pub fn strip_to_schema(payload: &Value, schema: &[FieldSpec]) -> (Value, Vec<String>) {
    let Value::Object(map) = payload else {
        return (payload.clone(), Vec::new());
    };
    let mut kept = serde_json::Map::new();
    let mut stripped = Vec::new();
    for (key, value) in map {
        if schema.iter().any(|f| &f.name == key) {
            kept.insert(key.clone(), value.clone());
        } else {
            stripped.push(key.clone());
        }
    }
    (Value::Object(kept), stripped)
}
