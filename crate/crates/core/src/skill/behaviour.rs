//! Behaviour descriptors, parameter schemas and the executor trait.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::exec::{Abort, ExecContext};
use super::SkillError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviourCategory {
    Sensing,
    Motion,
    Composite,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum ParamType {
    Int,
    Real,
    Vec2,
    Enum { values: Vec<String> },
}

/// A literal parameter value, or a reference to a value computed earlier in
/// the same execution (for example the pose found by `localise_object`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Vec2([f64; 2]),
    Var { var: String },
    Enum(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Real(r) => write!(f, "{r}"),
            ParamValue::Vec2([x, y]) => write!(f, "[{x}, {y}]"),
            ParamValue::Var { var } => write!(f, "${var}"),
            ParamValue::Enum(s) => f.write_str(s),
        }
    }
}

pub type Params = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(flatten)]
    pub ty: ParamType,
    pub required: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<ParamValue>,
}

impl ParamSpec {
    pub fn required(name: &str, ty: ParamType) -> Self {
        ParamSpec {
            name: name.into(),
            ty,
            required: true,
            default: None,
        }
    }

    pub fn optional(name: &str, ty: ParamType, default: ParamValue) -> Self {
        ParamSpec {
            name: name.into(),
            ty,
            required: false,
            default: Some(default),
        }
    }

    fn accepts(&self, value: &ParamValue) -> bool {
        match (&self.ty, value) {
            (ParamType::Int, ParamValue::Int(_)) => true,
            (ParamType::Real, ParamValue::Real(_) | ParamValue::Int(_)) => true,
            (ParamType::Vec2, ParamValue::Vec2(v)) => v.iter().all(|c| c.is_finite()),
            (ParamType::Vec2, ParamValue::Var { .. }) => true,
            (ParamType::Enum { values }, ParamValue::Enum(s)) => values.contains(s),
            _ => false,
        }
    }
}

/// One instrumented function invocation. The node is active for its own
/// `ticks` followed by the spans of its children, run in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallNode {
    pub function: String,
    #[serde(default)]
    pub ticks: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<CallNode>,
}

impl CallNode {
    pub fn leaf(function: &str, ticks: u32) -> Self {
        CallNode {
            function: function.into(),
            ticks,
            children: Vec::new(),
        }
    }

    pub fn parent(function: &str, children: Vec<CallNode>) -> Self {
        CallNode {
            function: function.into(),
            ticks: 0,
            children,
        }
    }

    pub fn span(&self) -> u32 {
        self.ticks + self.children.iter().map(CallNode::span).sum::<u32>()
    }

    pub fn collect_functions(&self, out: &mut BTreeSet<String>) {
        out.insert(self.function.clone());
        for c in &self.children {
            c.collect_functions(out);
        }
    }
}

pub fn tree_span(tree: &[CallNode]) -> u32 {
    tree.iter().map(CallNode::span).sum()
}

pub fn tree_functions(tree: &[CallNode]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for n in tree {
        n.collect_functions(&mut out);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviourDescriptor {
    pub id: String,
    pub category: BehaviourCategory,
    pub description: String,
    pub required_hardware: BTreeSet<String>,
    pub parameter_schema: Vec<ParamSpec>,
    pub call_tree: Vec<CallNode>,
    /// Duration with default parameters.
    pub duration_ticks: u32,
}

impl BehaviourDescriptor {
    pub fn functions(&self) -> BTreeSet<String> {
        tree_functions(&self.call_tree)
    }

    /// Structural checks that do not need the registries.
    pub fn check(&self) -> Result<(), SkillError> {
        let invalid = |m: String| Err(SkillError::InvalidDescriptor(self.id.clone(), m));
        if self.id.is_empty() {
            return invalid("empty id".into());
        }
        if self.call_tree.is_empty() {
            return invalid("empty call tree".into());
        }
        fn spans_ok(n: &CallNode) -> bool {
            n.span() >= 1 && n.children.iter().all(spans_ok)
        }
        if !self.call_tree.iter().all(spans_ok) {
            return invalid("call node with zero span".into());
        }
        for (i, p) in self.parameter_schema.iter().enumerate() {
            if self.parameter_schema[..i].iter().any(|q| q.name == p.name) {
                return invalid(format!("parameter {} declared twice", p.name));
            }
            if let Some(d) = &p.default {
                if !p.accepts(d) {
                    return invalid(format!("default of {} violates its schema", p.name));
                }
            }
        }
        Ok(())
    }

    /// Checks `params` against the schema and fills in defaults.
    pub fn resolve_params(&self, params: &Params) -> Result<Params, SkillError> {
        let err = |m: String| SkillError::ParamSchema {
            behaviour: self.id.clone(),
            message: m,
        };
        for name in params.keys() {
            if !self.parameter_schema.iter().any(|p| &p.name == name) {
                return Err(err(format!("unknown parameter {name:?}")));
            }
        }
        let mut out = Params::new();
        for spec in &self.parameter_schema {
            match params.get(&spec.name).or(spec.default.as_ref()) {
                Some(v) if spec.accepts(v) => {
                    out.insert(spec.name.clone(), v.clone());
                }
                Some(v) => return Err(err(format!("{} = {v} does not match {:?}", spec.name, spec.ty))),
                None if spec.required => return Err(err(format!("missing required parameter {}", spec.name))),
                None => {}
            }
        }
        Ok(out)
    }
}

/// Executable world transition registered under a descriptor.
pub trait Behaviour: Send + Sync + fmt::Debug {
    fn descriptor(&self) -> &BehaviourDescriptor;

    /// Runs with parameters already resolved against the schema.
    fn run(&self, ctx: &mut ExecContext<'_>, params: &Params) -> Result<(), Abort>;

    fn program(&self) -> Option<&super::ProgramAst> {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn descriptor() -> BehaviourDescriptor {
        BehaviourDescriptor {
            id: "d".into(),
            category: BehaviourCategory::Motion,
            description: String::new(),
            required_hardware: BTreeSet::new(),
            parameter_schema: vec![
                ParamSpec::required("target", ParamType::Vec2),
                ParamSpec::optional("speed", ParamType::Real, ParamValue::Real(1.0)),
            ],
            call_tree: vec![CallNode::parent("a", vec![CallNode::leaf("b", 2)]), CallNode::leaf("c", 1)],
            duration_ticks: 3,
        }
    }

    #[test]
    fn spans_and_functions() {
        let d = descriptor();
        assert_eq!(tree_span(&d.call_tree), 3);
        assert_eq!(d.functions().len(), 3);
        d.check().unwrap();
    }

    #[test]
    fn params_resolve_with_defaults() {
        let d = descriptor();
        let mut p = Params::new();
        p.insert("target".into(), ParamValue::Vec2([1.0, 2.0]));
        let r = d.resolve_params(&p).unwrap();
        assert_eq!(r["speed"], ParamValue::Real(1.0));
        assert!(d.resolve_params(&Params::new()).is_err());
        p.insert("bogus".into(), ParamValue::Int(1));
        assert!(d.resolve_params(&p).is_err());
    }

    #[test]
    fn param_value_json_forms() {
        let v: ParamValue = serde_json::from_str("90").unwrap();
        assert_eq!(v, ParamValue::Int(90));
        let v: ParamValue = serde_json::from_str("2.5").unwrap();
        assert_eq!(v, ParamValue::Real(2.5));
        let v: ParamValue = serde_json::from_str("[1.0, 2.0]").unwrap();
        assert_eq!(v, ParamValue::Vec2([1.0, 2.0]));
        let v: ParamValue = serde_json::from_str(r#"{"var":"object_pose"}"#).unwrap();
        assert_eq!(v, ParamValue::Var { var: "object_pose".into() });
        let v: ParamValue = serde_json::from_str(r#""Deg90""#).unwrap();
        assert_eq!(v, ParamValue::Enum("Deg90".into()));
    }
}
