//! JSON rule documents.
//!
//! Left-hand-side records hold predicate lists, right-hand-side records map
//! attribute names to tagged literals or expression strings:
//!
//! ```json
//! {"name": "IC activate",
//!  "lhs": {"nodes": [{"id": "w", "properties": [{"attr": "visited", "cmp": "=", "operand": {"kind": "bool", "v": true}}]}],
//!          "ports": [{"id": "w_in", "owner": "w", "properties": []}], "edges": []},
//!  "rhs": {"nodes": [{"id": "w'", "properties": {"active": {"kind": "bool", "v": true}}}],
//!          "ports": [{"id": "w'_in", "owner": "w'", "properties": {}}], "edges": []},
//!  "arrow": {"ports": [{"id": "b", "type": "bridge"}], "edges": [["b", "w_in"], ["b", "w'_in"]]}}
//! ```

use std::fmt;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::portgraph::PropertyValue;

use super::expr::Expr;
use super::predicate::PropertyPredicate;
use super::rule::{ArrowEdge, ArrowPort, ArrowPortKind, Assignment, RewriteRule, RhsValue, RuleError, RuleGraph, RuleParts};

#[derive(Debug, thiserror::Error)]
pub enum RuleFileError {
    #[error("malformed rule document at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("rule `{name}`: {source}")]
    Invalid {
        name: String,
        #[source]
        source: RuleError,
    },
}

impl From<serde_json::Error> for RuleFileError {
    fn from(e: serde_json::Error) -> Self {
        RuleFileError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc<L> {
    id: String,
    properties: L,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PortDoc<L> {
    id: String,
    owner: String,
    properties: L,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc<L> {
    id: String,
    ends: [String; 2],
    properties: L,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SideDoc<L> {
    #[serde(default = "Vec::new")]
    nodes: Vec<NodeDoc<L>>,
    #[serde(default = "Vec::new")]
    ports: Vec<PortDoc<L>>,
    #[serde(default = "Vec::new")]
    edges: Vec<EdgeDoc<L>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArrowPortDoc {
    id: String,
    #[serde(rename = "type")]
    kind: String,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ArrowDoc {
    #[serde(default)]
    ports: Vec<ArrowPortDoc>,
    #[serde(default)]
    edges: Vec<[String; 2]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleDoc {
    name: String,
    lhs: SideDoc<Vec<PropertyPredicate>>,
    rhs: SideDoc<RhsProps>,
    #[serde(default)]
    arrow: ArrowDoc,
    #[serde(rename = "J", default, skip_serializing_if = "Option::is_none")]
    j: Option<Vec<String>>,
    #[serde(rename = "K", default, skip_serializing_if = "Vec::is_empty")]
    k: Vec<String>,
}

/// Ordered attribute assignments of one rhs element.
struct RhsProps(Vec<Assignment>);

impl Serialize for RhsProps {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for a in &self.0 {
            match &a.value {
                RhsValue::Literal(v) => map.serialize_entry(&a.attr, v)?,
                RhsValue::Expr(e) => map.serialize_entry(&a.attr, &e.to_string())?,
            }
        }
        map.end()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RhsValueDoc {
    Expr(String),
    Literal(PropertyValue),
}

impl<'de> Deserialize<'de> for RhsProps {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = RhsProps;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from attribute names to literals or expression strings")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<RhsProps, A::Error> {
                let mut out: Vec<Assignment> = Vec::new();
                while let Some((attr, v)) = access.next_entry::<String, RhsValueDoc>()? {
                    if out.iter().any(|a| a.attr == attr) {
                        return Err(de::Error::custom(format!("duplicate attribute `{attr}`")));
                    }
                    let value = match v {
                        RhsValueDoc::Literal(v) => RhsValue::Literal(v),
                        RhsValueDoc::Expr(text) => {
                            RhsValue::Expr(Expr::parse(&text).map_err(|e| de::Error::custom(format!("`{attr}`: {e}")))?)
                        }
                    };
                    out.push(Assignment { attr, value });
                }
                Ok(RhsProps(out))
            }
        }
        d.deserialize_map(V)
    }
}

fn side_from_doc<L, M>(doc: SideDoc<L>, f: impl Fn(L) -> M) -> RuleGraph<M> {
    let mut g = RuleGraph::default();
    for n in doc.nodes {
        g.node(&n.id, f(n.properties));
    }
    for p in doc.ports {
        g.port(&p.id, &p.owner, f(p.properties));
    }
    for e in doc.edges {
        g.edge(&e.id, [&e.ends[0], &e.ends[1]], f(e.properties));
    }
    g
}

fn side_to_doc<L, M>(g: &RuleGraph<L>, f: impl Fn(&L) -> M) -> SideDoc<M> {
    SideDoc {
        nodes: g
            .nodes
            .iter()
            .map(|n| NodeDoc {
                id: n.name.clone(),
                properties: f(&n.label),
            })
            .collect(),
        ports: g
            .ports
            .iter()
            .map(|p| PortDoc {
                id: p.name.clone(),
                owner: p.owner.clone(),
                properties: f(&p.label),
            })
            .collect(),
        edges: g
            .edges
            .iter()
            .map(|e| EdgeDoc {
                id: e.name.clone(),
                ends: e.ends.clone(),
                properties: f(&e.label),
            })
            .collect(),
    }
}

fn rule_from_doc(doc: RuleDoc) -> Result<RewriteRule, RuleFileError> {
    let name = doc.name.clone();
    let invalid = |source| RuleFileError::Invalid {
        name: name.clone(),
        source,
    };
    let arrow_ports = doc
        .arrow
        .ports
        .iter()
        .map(|p| {
            Ok(ArrowPort {
                name: p.id.clone(),
                kind: ArrowPortKind::parse(&p.kind)?,
            })
        })
        .collect::<Result<Vec<_>, RuleError>>()
        .map_err(invalid)?;
    let parts = RuleParts {
        name: doc.name,
        lhs: side_from_doc(doc.lhs, |l| l),
        rhs: side_from_doc(doc.rhs, |r| r.0),
        arrow_ports,
        arrow_edges: doc
            .arrow
            .edges
            .into_iter()
            .map(|[arrow_port, target]| ArrowEdge { arrow_port, target })
            .collect(),
        position_update: doc.j,
        ban_update: doc.k,
    };
    RewriteRule::new(parts).map_err(invalid)
}

fn rule_to_doc(rule: &RewriteRule) -> RuleDoc {
    RuleDoc {
        name: rule.name.clone(),
        lhs: side_to_doc(&rule.lhs, |l| l.clone()),
        rhs: side_to_doc(&rule.rhs, |r| RhsProps(r.clone())),
        arrow: ArrowDoc {
            ports: rule
                .arrow_ports
                .iter()
                .map(|p| ArrowPortDoc {
                    id: p.name.clone(),
                    kind: p.kind.name().to_owned(),
                })
                .collect(),
            edges: rule
                .arrow_edges
                .iter()
                .map(|e| [e.arrow_port.clone(), e.target.clone()])
                .collect(),
        },
        j: rule.position_update.clone(),
        k: rule.ban_update.clone(),
    }
}

/// Reads a single rule or an array of rules.
pub fn parse_rules(bytes: &[u8]) -> Result<Vec<RewriteRule>, RuleFileError> {
    if bytes.trim_ascii_start().starts_with(b"[") {
        let docs: Vec<RuleDoc> = serde_json::from_slice(bytes)?;
        docs.into_iter().map(rule_from_doc).collect()
    } else {
        Ok(vec![rule_from_doc(serde_json::from_slice(bytes)?)?])
    }
}

/// Pretty JSON array of rules with a trailing newline.
pub fn serialize_rules(rules: &[RewriteRule]) -> Vec<u8> {
    let docs: Vec<RuleDoc> = rules.iter().map(rule_to_doc).collect();
    let mut out = serde_json::to_vec_pretty(&docs).expect("rule documents always encode");
    out.push(b'\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const ACTIVATE: &str = r#"{
      "name": "activate",
      "lhs": {"nodes": [{"id": "w", "properties": [{"attr": "visited", "cmp": "=", "operand": {"kind": "bool", "v": true}}]}],
              "ports": [{"id": "w_in", "owner": "w", "properties": []}]},
      "rhs": {"nodes": [{"id": "w'", "properties": {"active": {"kind": "bool", "v": true}, "sigma": "w.property(\"sigma\") * 2"}}],
              "ports": [{"id": "w'_in", "owner": "w'", "properties": {}}]},
      "arrow": {"ports": [{"id": "b", "type": "bridge"}], "edges": [["b", "w_in"], ["b", "w'_in"]]}
    }"#;

    #[test]
    fn parse_and_round_trip() {
        let rules = parse_rules(ACTIVATE.as_bytes()).unwrap();
        assert_eq!(rules.len(), 1);
        assert_eq!(rules[0].rhs.nodes[0].label.len(), 2);
        let bytes = serialize_rules(&rules);
        let again = parse_rules(&bytes).unwrap();
        assert_eq!(again, rules);
        assert_eq!(serialize_rules(&again), bytes);
    }

    #[test]
    fn unsupported_arrow_port() {
        let text = ACTIVATE.replace(r#""type": "bridge""#, r#""type": "merging""#);
        let err = parse_rules(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("merging"), "{err}");
    }

    #[test]
    fn bad_expression_reports_position() {
        let text = ACTIVATE.replace(r#" * 2""#, r#" * ""#);
        match parse_rules(text.as_bytes()).unwrap_err() {
            RuleFileError::Syntax { line, .. } => assert!(line >= 1),
            other => panic!("unexpected {other}"),
        }
    }
}
