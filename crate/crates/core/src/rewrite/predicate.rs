use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::portgraph::{PropertyValue, Record, ValueKind};
use crate::scalar::Tolerance;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "exists")]
    Exists,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Eq => "=",
            Comparator::Ne => "!=",
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
            Comparator::Exists => "exists",
        }
    }

    fn is_ordering(self) -> bool {
        matches!(self, Comparator::Lt | Comparator::Le | Comparator::Gt | Comparator::Ge)
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Comparator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "=" | "==" => Comparator::Eq,
            "!=" | "<>" => Comparator::Ne,
            "<" => Comparator::Lt,
            "<=" => Comparator::Le,
            ">" => Comparator::Gt,
            ">=" => Comparator::Ge,
            "exists" => Comparator::Exists,
            other => return Err(format!("unknown comparator `{other}`")),
        })
    }
}

/// Right-hand side of a predicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Operand {
    /// A pattern variable: binds on first use, must agree afterwards.
    Var { var: String },
    Value(PropertyValue),
}

/// A test on one attribute of a pattern element's record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyPredicate {
    pub attr: String,
    pub cmp: Comparator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operand: Option<Operand>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PredicateError {
    #[error("predicate on `{attr}`: comparator {cmp} needs an operand")]
    MissingOperand { attr: String, cmp: Comparator },
    #[error("predicate on `{attr}`: comparator {cmp} cannot order {kind} values")]
    NotOrderable { attr: String, cmp: Comparator, kind: ValueKind },
    #[error("predicate on `{attr}`: variable `{var}` only supports `=` and `exists`")]
    VariableComparator { attr: String, var: String },
}

/// Variable bindings accumulated while matching, in binding order.
pub type Bindings = Vec<(String, PropertyValue)>;

impl PropertyPredicate {
    pub fn new(attr: impl Into<String>, cmp: Comparator, operand: impl Into<PropertyValue>) -> Self {
        PropertyPredicate {
            attr: attr.into(),
            cmp,
            operand: Some(Operand::Value(operand.into())),
        }
    }

    pub fn exists(attr: impl Into<String>) -> Self {
        PropertyPredicate {
            attr: attr.into(),
            cmp: Comparator::Exists,
            operand: None,
        }
    }

    pub fn bind(attr: impl Into<String>, var: impl Into<String>) -> Self {
        PropertyPredicate {
            attr: attr.into(),
            cmp: Comparator::Eq,
            operand: Some(Operand::Var { var: var.into() }),
        }
    }

    /// Checks the comparator is compatible with the operand's kind.
    pub fn validate(&self) -> Result<(), PredicateError> {
        match (&self.operand, self.cmp) {
            (None, Comparator::Exists) => Ok(()),
            (None, cmp) => Err(PredicateError::MissingOperand {
                attr: self.attr.clone(),
                cmp,
            }),
            (Some(Operand::Var { var }), cmp) if !matches!(cmp, Comparator::Eq | Comparator::Exists) => {
                Err(PredicateError::VariableComparator {
                    attr: self.attr.clone(),
                    var: var.clone(),
                })
            }
            (Some(Operand::Value(v)), cmp) if cmp.is_ordering() && v.as_real().is_none() => {
                Err(PredicateError::NotOrderable {
                    attr: self.attr.clone(),
                    cmp,
                    kind: v.kind(),
                })
            }
            _ => Ok(()),
        }
    }

    /// Evaluates the predicate against `record`, possibly extending `bindings`.
    ///
    /// A missing attribute never satisfies a predicate.
    pub fn holds(&self, record: &Record, bindings: &mut Bindings, tol: Tolerance<f64>) -> bool {
        let Some(actual) = record.get(&self.attr) else {
            return false;
        };
        match &self.operand {
            None => self.cmp == Comparator::Exists,
            Some(Operand::Var { var }) => match bindings.iter().find(|(k, _)| k == var) {
                Some((_, bound)) => values_equal(actual, bound, tol),
                None => {
                    bindings.push((var.clone(), actual.clone()));
                    true
                }
            },
            Some(Operand::Value(expected)) => compare(actual, self.cmp, expected, tol),
        }
    }
}

impl fmt::Display for PropertyPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.operand {
            None => write!(f, "{}", self.attr),
            Some(Operand::Var { var }) => write!(f, "{}{}{}", self.attr, self.cmp, var),
            Some(Operand::Value(v)) => write!(f, "{}{}\"{}\"", self.attr, self.cmp, plain(v)),
        }
    }
}

fn plain(v: &PropertyValue) -> String {
    match v {
        PropertyValue::Text(s) => s.clone(),
        PropertyValue::Ref(id) => id.to_string(),
        other => other.to_string(),
    }
}

fn values_equal(a: &PropertyValue, b: &PropertyValue, tol: Tolerance<f64>) -> bool {
    compare(a, Comparator::Eq, b, tol)
}

/// `actual cmp expected`; values of incompatible kinds never compare.
pub fn compare(actual: &PropertyValue, cmp: Comparator, expected: &PropertyValue, tol: Tolerance<f64>) -> bool {
    use PropertyValue as V;
    if cmp == Comparator::Exists {
        return true;
    }
    match (actual, expected) {
        (V::Int(a), V::Int(b)) => match cmp {
            Comparator::Eq => a == b,
            Comparator::Ne => a != b,
            Comparator::Lt => a < b,
            Comparator::Le => a <= b,
            Comparator::Gt => a > b,
            Comparator::Ge => a >= b,
            Comparator::Exists => true,
        },
        (V::Int(_) | V::Real(_), V::Int(_) | V::Real(_)) => {
            let (a, b) = (actual.as_real().unwrap(), expected.as_real().unwrap());
            match cmp {
                Comparator::Eq => tol.eq(a, b),
                Comparator::Ne => !tol.eq(a, b),
                Comparator::Lt => tol.lt(a, b),
                Comparator::Le => tol.le(a, b),
                Comparator::Gt => tol.gt(a, b),
                Comparator::Ge => tol.ge(a, b),
                Comparator::Exists => true,
            }
        }
        (a, b) if a.kind() == b.kind() => match cmp {
            Comparator::Eq => a == b,
            Comparator::Ne => a != b,
            _ => false,
        },
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerance<f64> {
        Tolerance::default()
    }

    #[test]
    fn threshold_with_tolerance() {
        let r = Record::new().with("sigma", 1.0 - 1e-12);
        let p = PropertyPredicate::new("sigma", Comparator::Ge, 1.0);
        assert!(p.holds(&r, &mut Vec::new(), tol()));
        let strict = PropertyPredicate::new("sigma", Comparator::Gt, 1.0);
        assert!(!strict.holds(&r, &mut Vec::new(), tol()));
    }

    #[test]
    fn absent_attribute_fails() {
        let r = Record::new().with("active", true);
        assert!(!PropertyPredicate::exists("theta").holds(&r, &mut Vec::new(), tol()));
        assert!(!PropertyPredicate::new("theta", Comparator::Ne, 0.5).holds(&r, &mut Vec::new(), tol()));
        assert!(PropertyPredicate::exists("active").holds(&r, &mut Vec::new(), tol()));
    }

    #[test]
    fn variables_bind_then_constrain() {
        let mut b = Vec::new();
        let p = PropertyPredicate::bind("size", "x");
        assert!(p.holds(&Record::new().with("size", 3i64), &mut b, tol()));
        assert_eq!(b, vec![("x".to_string(), PropertyValue::Int(3))]);
        assert!(!p.holds(&Record::new().with("size", 4i64), &mut b, tol()));
        assert!(p.holds(&Record::new().with("size", 3.0), &mut b, tol()));
    }

    #[test]
    fn kind_compatibility() {
        assert!(PropertyPredicate::new("a", Comparator::Lt, "x").validate().is_err());
        assert!(PropertyPredicate {
            attr: "a".into(),
            cmp: Comparator::Ge,
            operand: None
        }
        .validate()
        .is_err());
        assert!(PropertyPredicate::new("a", Comparator::Eq, true).validate().is_ok());
        let bool_rec = Record::new().with("a", true);
        assert!(!PropertyPredicate::new("a", Comparator::Eq, 1i64).holds(&bool_rec, &mut Vec::new(), tol()));
    }

    #[test]
    fn json_shape() {
        let p = PropertyPredicate::new("active", Comparator::Eq, true);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"attr":"active","cmp":"=","operand":{"kind":"bool","v":true}}"#);
        let v: PropertyPredicate = serde_json::from_str(r#"{"attr":"size","cmp":"=","operand":{"var":"x"}}"#).unwrap();
        assert_eq!(v, PropertyPredicate::bind("size", "x"));
    }
}
