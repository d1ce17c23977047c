use std::fmt;

use crate::portgraph::{ElementKind, PortGraph, PropertyValue, Selection};
use crate::rewrite::{Comparator, Operand, PropertyPredicate};
use crate::scalar::Tolerance;

/// `Property(CrtGraph, kind, predicate)`: elements of `kind` in the current graph satisfying `predicate`.
#[derive(Clone, Debug, PartialEq)]
pub struct Filter {
    pub kind: ElementKind,
    pub predicate: PropertyPredicate,
}

impl Filter {
    pub fn select(&self, graph: &PortGraph, tol: Tolerance<f64>) -> Selection {
        graph
            .ids_of_kind(self.kind)
            .into_iter()
            .filter(|&id| {
                let record = graph.record(id).expect("listed element exists");
                self.predicate.holds(record, &mut Vec::new(), tol)
            })
            .collect()
    }
}

impl fmt::Display for Filter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Property(CrtGraph,{},{})", self.kind, self.predicate)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Instruction {
    ApplyOnce(String),
    Repeat(String),
    SetPos(Filter),
    SetBan(Filter),
}

impl Instruction {
    pub fn rule_name(&self) -> Option<&str> {
        match self {
            Instruction::ApplyOnce(r) | Instruction::Repeat(r) => Some(r),
            _ => None,
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::ApplyOnce(r) => write!(f, "one({r})"),
            Instruction::Repeat(r) => write!(f, "repeat({r})"),
            Instruction::SetPos(filter) => write!(f, "setPos({filter})"),
            Instruction::SetBan(filter) => write!(f, "setBan({filter})"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StrategyProgram {
    pub instructions: Vec<Instruction>,
}

/// Prints one instruction per line, separated by `;`.
impl fmt::Display for StrategyProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, instr) in self.instructions.iter().enumerate() {
            if i > 0 {
                f.write_str(";\n")?;
            }
            write!(f, "{instr}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("strategy syntax error at line {line}, column {column}: {message}")]
pub struct StrategyParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, at: usize, message: impl Into<String>) -> StrategyParseError {
        let before = &self.src[..at];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        StrategyParseError {
            line,
            column,
            message: message.into(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        loop {
            let rest = self.rest();
            let trimmed = rest.trim_start();
            self.pos += rest.len() - trimmed.len();
            if trimmed.starts_with("//") {
                self.pos += trimmed.find('\n').unwrap_or(trimmed.len());
            } else {
                break;
            }
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos == self.src.len()
    }

    fn expect(&mut self, token: &str) -> Result<(), StrategyParseError> {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            Ok(())
        } else {
            Err(self.error(self.pos, format!("expected `{token}`")))
        }
    }

    fn ident(&mut self) -> Result<&'a str, StrategyParseError> {
        self.skip_ws();
        let rest = self.rest();
        let len = rest
            .find(|c: char| !(c.is_alphanumeric() || c == '_'))
            .unwrap_or(rest.len());
        if len == 0 {
            return Err(self.error(self.pos, "expected an identifier"));
        }
        self.pos += len;
        Ok(&rest[..len])
    }

    /// Everything up to the closing parenthesis, trimmed.
    fn rule_name(&mut self) -> Result<String, StrategyParseError> {
        self.skip_ws();
        let start = self.pos;
        let rest = self.rest();
        let Some(len) = rest.find([')', ';', '\n']) else {
            return Err(self.error(self.src.len(), "unterminated rule name, expected `)`"));
        };
        if !rest[len..].starts_with(')') {
            return Err(self.error(start + len, "expected `)` after rule name"));
        }
        let name = rest[..len].trim();
        if name.is_empty() {
            return Err(self.error(start, "empty rule name"));
        }
        self.pos += len;
        Ok(name.to_owned())
    }

    fn filter(&mut self) -> Result<Filter, StrategyParseError> {
        let at = self.pos;
        if self.ident()? != "Property" {
            return Err(self.error(at, "expected `Property`"));
        }
        self.expect("(")?;
        self.skip_ws();
        let at = self.pos;
        if self.ident()? != "CrtGraph" {
            return Err(self.error(at, "expected `CrtGraph`"));
        }
        self.expect(",")?;
        self.skip_ws();
        let at = self.pos;
        let kind = match self.ident()? {
            "Node" => ElementKind::Node,
            "Edge" => ElementKind::Edge,
            "Port" => ElementKind::Port,
            other => return Err(self.error(at, format!("unknown element kind `{other}`"))),
        };
        self.expect(",")?;
        let predicate = self.predicate()?;
        self.expect(")")?;
        Ok(Filter { kind, predicate })
    }

    fn predicate(&mut self) -> Result<PropertyPredicate, StrategyParseError> {
        let attr = self.ident()?.to_owned();
        self.skip_ws();
        let at = self.pos;
        let rest = self.rest();
        let Some(cmp_str) = [">=", "<=", "!=", "==", "<>", "=", "<", ">"]
            .into_iter()
            .find(|c| rest.starts_with(c))
        else {
            return Ok(PropertyPredicate::exists(attr));
        };
        self.pos += cmp_str.len();
        let cmp: Comparator = cmp_str.parse().map_err(|m: String| self.error(at, m))?;
        self.skip_ws();
        let at = self.pos;
        let value = if self.rest().starts_with('"') {
            let body = &self.rest()[1..];
            let end = body.find('"').ok_or_else(|| self.error(at, "unterminated string"))?;
            self.pos += end + 2;
            operand(&body[..end])
        } else {
            let rest = self.rest();
            let len = rest.find([')', ' ', '\t', '\n', '\r']).unwrap_or(rest.len());
            if len == 0 {
                return Err(self.error(at, "expected a value"));
            }
            self.pos += len;
            operand(&rest[..len])
        };
        let p = PropertyPredicate {
            attr,
            cmp,
            operand: Some(Operand::Value(value)),
        };
        p.validate().map_err(|e| self.error(at, e.to_string()))?;
        Ok(p)
    }

    fn instruction(&mut self) -> Result<Instruction, StrategyParseError> {
        self.skip_ws();
        let at = self.pos;
        let word = self.ident()?;
        let instr = match word {
            "repeat" | "one" => {
                self.expect("(")?;
                let name = self.rule_name()?;
                if word == "repeat" {
                    Instruction::Repeat(name)
                } else {
                    Instruction::ApplyOnce(name)
                }
            }
            "setPos" | "setBan" => {
                self.expect("(")?;
                let f = self.filter()?;
                if word == "setPos" {
                    Instruction::SetPos(f)
                } else {
                    Instruction::SetBan(f)
                }
            }
            other => return Err(self.error(at, format!("unknown instruction `{other}`"))),
        };
        self.expect(")")?;
        Ok(instr)
    }
}

/// Quoted or bare operand: a number becomes a real, `true`/`false` a boolean, anything else text.
fn operand(text: &str) -> PropertyValue {
    let t = text.trim();
    if let Ok(x) = t.parse::<f64>() {
        if x.is_finite() {
            return PropertyValue::Real(x);
        }
    }
    match t {
        "true" => PropertyValue::Bool(true),
        "false" => PropertyValue::Bool(false),
        _ => PropertyValue::Text(text.to_owned()),
    }
}

impl Filter {
    /// Parses `Property(CrtGraph,<Kind>,<predicate>)` on its own.
    pub fn parse(text: &str) -> Result<Self, StrategyParseError> {
        let mut p = Parser { src: text, pos: 0 };
        p.skip_ws();
        let f = p.filter()?;
        if !p.at_end() {
            return Err(p.error(p.pos, "unexpected text after filter"));
        }
        Ok(f)
    }
}

impl StrategyProgram {
    pub fn parse(text: &str) -> Result<Self, StrategyParseError> {
        let mut p = Parser { src: text, pos: 0 };
        let mut instructions = Vec::new();
        while !p.at_end() {
            instructions.push(p.instruction()?);
            if p.at_end() {
                break;
            }
            p.expect(";")?;
        }
        Ok(StrategyProgram { instructions })
    }

    pub fn rule_names(&self) -> impl Iterator<Item = &str> {
        self.instructions.iter().filter_map(Instruction::rule_name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standalone_filter() {
        let f = Filter::parse(r#" Property(CrtGraph,Node,sigma>="1") "#).unwrap();
        assert_eq!(f, sigma_filter());
        assert!(Filter::parse("Property(CrtGraph,Node,sigma) x").is_err());
    }

    fn sigma_filter() -> Filter {
        Filter {
            kind: ElementKind::Node,
            predicate: PropertyPredicate::new("sigma", Comparator::Ge, 1.0),
        }
    }

    #[test]
    fn listing_parses() {
        let p = StrategyProgram::parse(
            "repeat(IC trial d2s);\nrepeat(IC trial s2d);\nsetPos(Property(CrtGraph,Node,sigma>=\"1\"));\nrepeat(IC activate)",
        )
        .unwrap();
        assert_eq!(
            p.instructions,
            vec![
                Instruction::Repeat("IC trial d2s".into()),
                Instruction::Repeat("IC trial s2d".into()),
                Instruction::SetPos(sigma_filter()),
                Instruction::Repeat("IC activate".into()),
            ]
        );
    }

    #[test]
    fn empty_and_whitespace() {
        assert!(StrategyProgram::parse("").unwrap().instructions.is_empty());
        assert!(StrategyProgram::parse("  \n // nothing\n").unwrap().instructions.is_empty());
        let p = StrategyProgram::parse(" one( r1 ) ;\n setBan ( Property ( CrtGraph , Edge , marked = true ) ) ; ").unwrap();
        assert_eq!(p.instructions[0], Instruction::ApplyOnce("r1".into()));
        assert_eq!(
            p.instructions[1],
            Instruction::SetBan(Filter {
                kind: ElementKind::Edge,
                predicate: PropertyPredicate::new("marked", Comparator::Eq, true),
            })
        );
    }

    #[test]
    fn errors_have_positions() {
        let e = StrategyProgram::parse("repeat(").unwrap_err();
        assert_eq!((e.line, e.column), (1, 8));
        let e = StrategyProgram::parse("repeat(a);\n  loop(b)").unwrap_err();
        assert_eq!((e.line, e.column), (2, 3));
        assert!(e.message.contains("unknown instruction"));
        let e = StrategyProgram::parse("repeat(a) repeat(b)").unwrap_err();
        assert_eq!(e.column, 11);
        let e = StrategyProgram::parse("setPos(Property(CrtGraph,Hyperedge,a))").unwrap_err();
        assert!(e.message.contains("Hyperedge"));
        assert!(StrategyProgram::parse("setPos(Property(CrtGraph,Node,name<\"x\"))").is_err());
    }

    #[test]
    fn printer_round_trip() {
        let text = "repeat(LT trial s2d);\nrepeat(LT trial d2s);\nsetPos(Property(CrtGraph,Node,sigma>=\"1\"));\nrepeat(LT activate)";
        let p = StrategyProgram::parse(text).unwrap();
        assert_eq!(p.to_string(), text);
        assert_eq!(StrategyProgram::parse(&p.to_string()).unwrap(), p);
    }

    #[test]
    fn filter_selects_current_values() {
        let mut g = PortGraph::new();
        let a = g.add_node(crate::portgraph::Record::new().with("sigma", 1.0));
        let b = g.add_node(crate::portgraph::Record::new().with("sigma", 2.0));
        g.add_node(crate::portgraph::Record::new().with("sigma", 0.5));
        let sel = sigma_filter().select(&g, Tolerance::default());
        assert_eq!(sel.into_iter().collect::<Vec<_>>(), vec![a, b]);
    }
}
