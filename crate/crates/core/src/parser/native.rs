//! Native JSON network format.
//!
//! ```json
//! {"variables":[{"name":"A","cardinality":2}],
//!  "cpts":[{"child":"A","parents":[],"table":[0.3,0.7]}]}
//! ```

use std::collections::BTreeMap;
use std::fmt::Write;

use serde_json::Value;

use super::{numeric_labels, NetworkDocument, SourceFormat};
use crate::error::{Error, Result};
use crate::model::{make_cpt, BayesianNetwork, Variable};

fn violation(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::SchemaViolation { path: path.into(), message: message.into() }
}

fn field<'a>(obj: &'a Value, path: &str, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| violation(format!("{path}/{key}"), "missing field"))
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| violation(path, "expected an array"))
}

fn string<'a>(v: &'a Value, path: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| violation(path, "expected a string"))
}

pub fn parse_native(text: &str) -> Result<BayesianNetwork> {
    parse_native_document(text).map(|d| d.network)
}

pub fn parse_native_document(text: &str) -> Result<NetworkDocument> {
    let root: Value = serde_json::from_str(text).map_err(|e| Error::SyntaxError {
        line: e.line(),
        col: e.column(),
        message: e.to_string(),
    })?;
    if !root.is_object() {
        return Err(violation("", "expected an object"));
    }

    let mut variables = Vec::new();
    for (i, v) in array(field(&root, "", "variables")?, "/variables")?.iter().enumerate() {
        let path = format!("/variables/{i}");
        let name = string(field(v, &path, "name")?, &format!("{path}/name"))?.to_string();
        let cardinality = field(v, &path, "cardinality")?
            .as_u64()
            .ok_or_else(|| violation(format!("{path}/cardinality"), "expected a non-negative integer"))?;
        variables.push(Variable { id: i, name, cardinality: cardinality as usize });
    }
    let lookup = |name: &str, path: &str| -> Result<usize> {
        variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| violation(path, format!("unknown variable `{name}`")))
    };

    let mut cpts = Vec::new();
    for (i, c) in array(field(&root, "", "cpts")?, "/cpts")?.iter().enumerate() {
        let path = format!("/cpts/{i}");
        let child = lookup(string(field(c, &path, "child")?, &format!("{path}/child"))?, &format!("{path}/child"))?;
        let mut parents = Vec::new();
        for (k, p) in array(field(c, &path, "parents")?, &format!("{path}/parents"))?.iter().enumerate() {
            let ppath = format!("{path}/parents/{k}");
            parents.push(lookup(string(p, &ppath)?, &ppath)?);
        }
        let table = array(field(c, &path, "table")?, &format!("{path}/table"))?
            .iter()
            .enumerate()
            .map(|(k, x)| x.as_f64().ok_or_else(|| violation(format!("{path}/table/{k}"), "expected a number")))
            .collect::<Result<Vec<_>>>()?;
        let cpt = make_cpt(&variables, child, parents, table).map_err(|e| match e {
            Error::TableSizeMismatch { expected, got, .. } => {
                violation(format!("{path}/table"), format!("expected {expected} entries, found {got}"))
            }
            other => other,
        })?;
        cpts.push(cpt);
    }

    let network = BayesianNetwork::new(variables, cpts)?;
    let locations: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let state_labels = numeric_labels(&network);
    Ok(NetworkDocument { format: SourceFormat::NativeJson, network, locations, state_labels })
}

/// 17 significant digits; always reparses to the same `f64`.
pub(crate) fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Deterministic serialization: fixed key order, one variable or CPT per
/// line, floats with 17 significant digits.
pub fn serialize_native(net: &BayesianNetwork) -> String {
    let quote = |s: &str| serde_json::to_string(s).expect("strings always serialize");
    let mut out = String::from("{\n  \"variables\": [\n");
    for (i, v) in net.variables().iter().enumerate() {
        let sep = if i + 1 < net.len() { "," } else { "" };
        writeln!(out, "    {{\"name\": {}, \"cardinality\": {}}}{sep}", quote(&v.name), v.cardinality).unwrap();
    }
    out.push_str("  ],\n  \"cpts\": [\n");
    for (i, c) in net.cpts().iter().enumerate() {
        let parents: Vec<String> = c.parents.iter().map(|&p| quote(&net.variable(p).name)).collect();
        let table: Vec<String> = c.table.values().iter().map(|&x| format_f64(x)).collect();
        let sep = if i + 1 < net.len() { "," } else { "" };
        writeln!(
            out,
            "    {{\"child\": {}, \"parents\": [{}], \"table\": [{}]}}{sep}",
            quote(&net.variable(c.child).name),
            parents.join(", "),
            table.join(", ")
        )
        .unwrap();
    }
    out.push_str("  ]\n}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures;

    #[test]
    fn minimal_document() {
        let net = parse_native(
            r#"{"variables":[{"name":"A","cardinality":2}],"cpts":[{"child":"A","parents":[],"table":[0.3,0.7]}]}"#,
        )
        .unwrap();
        assert_eq!(net, fixtures::single([0.3, 0.7]));
    }

    #[test]
    fn missing_cardinality_reports_path() {
        let e = parse_native(r#"{"variables":[{"name":"A"}],"cpts":[]}"#).unwrap_err();
        assert!(matches!(e, Error::SchemaViolation { ref path, .. } if path == "/variables/0/cardinality"), "{e:?}");
    }

    #[test]
    fn malformed_json_is_a_syntax_error() {
        assert!(matches!(parse_native("{\"variables\": ["), Err(Error::SyntaxError { .. })));
    }

    #[test]
    fn diamond_round_trips() {
        let net = fixtures::diamond();
        let text = serialize_native(&net);
        assert_eq!(parse_native(&text).unwrap(), net);
        assert_eq!(serialize_native(&net), text);
    }

    #[test]
    fn one_third_survives() {
        let third = 1.0 / 3.0;
        let s = format_f64(third);
        assert_eq!(s.parse::<f64>().unwrap().to_bits(), third.to_bits());
        let net = fixtures::single([third, 1.0 - third]);
        let back = parse_native(&serialize_native(&net)).unwrap();
        assert_eq!(back.cpt(0).table.values()[0].to_bits(), third.to_bits());
    }

    #[test]
    fn single_variable_output_is_stable() {
        let net = fixtures::single([0.3, 0.7]);
        assert_eq!(
            serialize_native(&net),
            "{\n  \"variables\": [\n    {\"name\": \"A\", \"cardinality\": 2}\n  ],\n  \"cpts\": [\n    \
             {\"child\": \"A\", \"parents\": [], \"table\": [2.9999999999999999e-1, 6.9999999999999996e-1]}\n  ]\n}\n"
        );
    }
}
