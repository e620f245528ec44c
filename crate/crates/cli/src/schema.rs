//! The shipped report schema and a checker for the subset of JSON Schema
//! it uses: `type`, `const`, `enum`, `required`, `properties`,
//! `additionalProperties: false`, `items`, `minimum`, `exclusiveMinimum`,
//! `minLength`, `minItems` and local `$ref`.

use serde_json::Value;

pub const REPORT_SCHEMA: &str = include_str!("../schema/run_report.schema.json");

pub fn report_schema() -> Value {
    serde_json::from_str(REPORT_SCHEMA).expect("shipped schema is valid JSON")
}

/// Every violation as `<json pointer>: <message>`; empty when valid.
pub fn validate(schema: &Value, doc: &Value) -> Vec<String> {
    let mut errs = Vec::new();
    check(schema, schema, doc, "", &mut errs);
    errs
}

pub fn validate_report(doc: &Value) -> Vec<String> {
    validate(&report_schema(), doc)
}

fn type_matches(t: &str, v: &Value) -> bool {
    match t {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => v.is_i64() || v.is_u64(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        _ => false,
    }
}

fn resolve<'a>(root: &'a Value, r: &str) -> Option<&'a Value> {
    root.pointer(r.strip_prefix('#')?)
}

fn check(root: &Value, s: &Value, v: &Value, at: &str, errs: &mut Vec<String>) {
    let Some(s) = s.as_object() else { return };
    if let Some(r) = s.get("$ref").and_then(Value::as_str) {
        match resolve(root, r) {
            Some(target) => check(root, target, v, at, errs),
            None => errs.push(format!("{at}: unresolved reference {r}")),
        }
    }
    if let Some(t) = s.get("type") {
        let ok = match t {
            Value::String(t) => type_matches(t, v),
            Value::Array(ts) => ts.iter().filter_map(Value::as_str).any(|t| type_matches(t, v)),
            _ => true,
        };
        if !ok {
            errs.push(format!("{at}: expected type {t}"));
            return;
        }
    }
    if let Some(c) = s.get("const") {
        if c != v {
            errs.push(format!("{at}: expected {c}"));
        }
    }
    if let Some(Value::Array(opts)) = s.get("enum") {
        if !opts.contains(v) {
            errs.push(format!("{at}: {v} not among {}", Value::Array(opts.clone())));
        }
    }
    if let Some(x) = v.as_f64() {
        if let Some(m) = s.get("minimum").and_then(Value::as_f64) {
            if x < m {
                errs.push(format!("{at}: {x} below minimum {m}"));
            }
        }
        if let Some(m) = s.get("exclusiveMinimum").and_then(Value::as_f64) {
            if x <= m {
                errs.push(format!("{at}: {x} not above {m}"));
            }
        }
    }
    if let (Some(txt), Some(m)) = (v.as_str(), s.get("minLength").and_then(Value::as_u64)) {
        if (txt.chars().count() as u64) < m {
            errs.push(format!("{at}: shorter than {m}"));
        }
    }
    if let Some(arr) = v.as_array() {
        if let Some(m) = s.get("minItems").and_then(Value::as_u64) {
            if (arr.len() as u64) < m {
                errs.push(format!("{at}: fewer than {m} items"));
            }
        }
        if let Some(item) = s.get("items") {
            for (i, x) in arr.iter().enumerate() {
                check(root, item, x, &format!("{at}/{i}"), errs);
            }
        }
    }
    if let Some(obj) = v.as_object() {
        if let Some(Value::Array(req)) = s.get("required") {
            for k in req.iter().filter_map(Value::as_str) {
                if !obj.contains_key(k) {
                    errs.push(format!("{at}: missing required `{k}`"));
                }
            }
        }
        let props = s.get("properties").and_then(Value::as_object);
        for (k, x) in obj {
            match props.and_then(|p| p.get(k)) {
                Some(ps) => check(root, ps, x, &format!("{at}/{k}"), errs),
                None => {
                    if s.get("additionalProperties") == Some(&Value::Bool(false)) {
                        errs.push(format!("{at}: unexpected property `{k}`"));
                    }
                }
            }
        }
    }
}
