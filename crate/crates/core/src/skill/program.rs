//! Visual-program AST: JSON form, validation with node-path diagnostics, and
//! interpretation against the registry.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::behaviour::{Behaviour, BehaviourCategory, BehaviourDescriptor, CallNode, Params};
use super::exec::{Abort, ExecContext};
use super::primitives::{waypoint_segment_tree, MOTION_TICKS};
use super::{Registry, SkillError};
use crate::world::{Simulator, WORKSPACE_SIZE};

pub const AST_VERSION: u32 = 1;
pub const MAX_LOOP_COUNT: u32 = 1000;
const WAYPOINT_HARDWARE: &str = "left_arm";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramAst {
    pub ast_version: u32,
    pub root: Node,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Sequence {
        children: Vec<Node>,
    },
    Loop {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        count: Option<u32>,
        /// Repeat while this predicate holds.
        #[serde(default, rename = "while", skip_serializing_if = "Option::is_none")]
        while_predicate: Option<String>,
        /// Repeat until this predicate holds.
        #[serde(default, rename = "until", skip_serializing_if = "Option::is_none")]
        until_predicate: Option<String>,
        body: Box<Node>,
    },
    BehaviourCall {
        behaviour: String,
        #[serde(default)]
        params: Params,
    },
    SkillCall {
        skill: String,
    },
    HardwareDecl {
        hardware: BTreeSet<String>,
    },
    WaypointMotion {
        waypoints: Vec<[f64; 3]>,
    },
}

impl Node {
    pub fn sequence(children: Vec<Node>) -> Node {
        Node::Sequence { children }
    }

    pub fn repeat(count: u32, body: Node) -> Node {
        Node::Loop {
            count: Some(count),
            while_predicate: None,
            until_predicate: None,
            body: Box::new(body),
        }
    }

    pub fn call(behaviour: &str) -> Node {
        Node::BehaviourCall {
            behaviour: behaviour.into(),
            params: Params::new(),
        }
    }

    pub fn call_with(behaviour: &str, params: Params) -> Node {
        Node::BehaviourCall {
            behaviour: behaviour.into(),
            params,
        }
    }

    pub fn skill(skill: &str) -> Node {
        Node::SkillCall { skill: skill.into() }
    }

    pub fn hardware(names: &[&str]) -> Node {
        Node::HardwareDecl {
            hardware: names.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl ProgramAst {
    pub fn new(root: Node) -> Self {
        ProgramAst {
            ast_version: AST_VERSION,
            root,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SkillError> {
        serde_json::from_str(text).map_err(|e| SkillError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("program serializes")
    }

    /// Union of every hardware declaration in the program.
    pub fn declared_hardware(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        visit(&self.root, &mut |n| {
            if let Node::HardwareDecl { hardware } = n {
                out.extend(hardware.iter().cloned());
            }
        });
        out
    }

    /// Skills referenced directly by `SkillCall` nodes.
    pub fn skill_calls(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        visit(&self.root, &mut |n| {
            if let Node::SkillCall { skill } = n {
                out.insert(skill.clone());
            }
        });
        out
    }

    pub fn behaviour_calls(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        visit(&self.root, &mut |n| {
            if let Node::BehaviourCall { behaviour, .. } = n {
                out.insert(behaviour.clone());
            }
        });
        out
    }
}

fn visit(node: &Node, f: &mut impl FnMut(&Node)) {
    f(node);
    match node {
        Node::Sequence { children } => children.iter().for_each(|c| visit(c, f)),
        Node::Loop { body, .. } => visit(body, f),
        _ => {}
    }
}

/// A validation problem located by its path from the root, e.g. `root.children[2].body`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

struct Validator<'a> {
    registry: &'a Registry,
    sim: &'a Simulator,
    /// Skills and behaviours that may not be reached from this program.
    forbidden: &'a BTreeSet<String>,
    out: Vec<Diagnostic>,
}

impl Validator<'_> {
    fn report(&mut self, path: &str, message: impl Into<String>) {
        self.out.push(Diagnostic {
            path: path.to_string(),
            message: message.into(),
        });
    }

    fn require_hardware(&mut self, path: &str, needed: &BTreeSet<String>, declared: &BTreeSet<String>) {
        let missing: Vec<&str> = needed.difference(declared).map(String::as_str).collect();
        if !missing.is_empty() {
            self.report(path, format!("hardware not declared: {}", missing.join(", ")));
        }
    }

    fn node(&mut self, node: &Node, path: &str, declared: &BTreeSet<String>) {
        match node {
            Node::Sequence { children } => {
                let mut scope = declared.clone();
                for c in children {
                    if let Node::HardwareDecl { hardware } = c {
                        scope.extend(hardware.iter().cloned());
                    }
                }
                for (i, c) in children.iter().enumerate() {
                    self.node(c, &format!("{path}.children[{i}]"), &scope);
                }
            }
            Node::Loop {
                count,
                while_predicate,
                until_predicate,
                body,
            } => {
                let conditions = count.is_some() as u8 + while_predicate.is_some() as u8 + until_predicate.is_some() as u8;
                if conditions != 1 {
                    self.report(path, "loop needs exactly one of count, while, until");
                }
                if let Some(n) = count {
                    if !(1..=MAX_LOOP_COUNT).contains(n) {
                        self.report(path, format!("loop count {n} outside 1..={MAX_LOOP_COUNT}"));
                    }
                }
                for p in [while_predicate, until_predicate].into_iter().flatten() {
                    if !self.sim.predicates.contains(p) {
                        self.report(path, format!("unknown predicate {p:?}"));
                    }
                }
                self.node(body, &format!("{path}.body"), declared);
            }
            Node::BehaviourCall { behaviour, params } => match self.registry.behaviour(behaviour) {
                Ok(b) => {
                    let d = b.descriptor();
                    if let Err(e) = d.resolve_params(params) {
                        self.report(path, e.to_string());
                    }
                    self.require_hardware(path, &d.required_hardware, declared);
                    if let Some(cycle) = self.reaches_forbidden_behaviour(behaviour) {
                        self.report(path, format!("call cycle through {cycle}"));
                    }
                }
                Err(_) => self.report(path, format!("unknown behaviour {behaviour:?}")),
            },
            Node::SkillCall { skill } => match self.registry.skill(skill) {
                Ok(s) => {
                    self.require_hardware(path, &s.required_hardware, declared);
                    if let Some(cycle) = self.reaches_forbidden_skill(skill) {
                        self.report(path, format!("skill call cycle through {cycle}"));
                    }
                }
                Err(_) => self.report(path, format!("unknown skill {skill:?}")),
            },
            Node::HardwareDecl { hardware } => {
                for h in hardware {
                    if !self.sim.hardware.contains(h) {
                        self.report(path, format!("unknown hardware {h:?}"));
                    }
                }
            }
            Node::WaypointMotion { waypoints } => {
                if waypoints.is_empty() {
                    self.report(path, "waypoint motion without waypoints");
                }
                for (i, w) in waypoints.iter().enumerate() {
                    if !w.iter().all(|c| c.is_finite() && (0.0..=WORKSPACE_SIZE).contains(c)) {
                        self.report(&format!("{path}.waypoints[{i}]"), "waypoint outside the workspace");
                    }
                }
                let needed = [WAYPOINT_HARDWARE.to_string()].into_iter().collect();
                self.require_hardware(path, &needed, declared);
            }
        }
    }

    fn reaches_forbidden_skill(&self, skill: &str) -> Option<String> {
        let mut seen = BTreeSet::new();
        self.search(Ref::Skill(skill.to_string()), &mut seen)
    }

    fn reaches_forbidden_behaviour(&self, behaviour: &str) -> Option<String> {
        let mut seen = BTreeSet::new();
        self.search(Ref::Behaviour(behaviour.to_string()), &mut seen)
    }

    fn search(&self, r: Ref, seen: &mut BTreeSet<Ref>) -> Option<String> {
        let id = match &r {
            Ref::Skill(s) | Ref::Behaviour(s) => s.clone(),
        };
        if self.forbidden.contains(&id) {
            return Some(id);
        }
        if !seen.insert(r.clone()) {
            return None;
        }
        let next: Vec<Ref> = match r {
            Ref::Skill(s) => match self.registry.skill(&s) {
                Ok(skill) => {
                    let mut v: Vec<Ref> = skill.basic_behaviour.iter().cloned().map(Ref::Behaviour).collect();
                    if let Some(ecm) = &skill.ecm {
                        for p in &ecm.preparations {
                            v.extend(p.references().into_iter().map(|(is_skill, id)| {
                                if is_skill {
                                    Ref::Skill(id)
                                } else {
                                    Ref::Behaviour(id)
                                }
                            }));
                        }
                    }
                    v
                }
                Err(_) => Vec::new(),
            },
            Ref::Behaviour(b) => match self.registry.behaviour(&b) {
                Ok(beh) => match beh.program() {
                    Some(ast) => ast
                        .skill_calls()
                        .into_iter()
                        .map(Ref::Skill)
                        .chain(ast.behaviour_calls().into_iter().map(Ref::Behaviour))
                        .collect(),
                    None => Vec::new(),
                },
                Err(_) => Vec::new(),
            },
        };
        next.into_iter().find_map(|n| self.search(n, seen))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Ref {
    Skill(String),
    Behaviour(String),
}

/// Validates `ast`; `forbidden` names the skills and behaviours the program
/// is being registered as, so that calls back into them are reported as cycles.
pub fn validate(ast: &ProgramAst, registry: &Registry, sim: &Simulator, forbidden: &BTreeSet<String>) -> Vec<Diagnostic> {
    let mut v = Validator {
        registry,
        sim,
        forbidden,
        out: Vec::new(),
    };
    if ast.ast_version != AST_VERSION {
        v.report("ast_version", format!("unsupported version {}", ast.ast_version));
    }
    v.node(&ast.root, "root", &BTreeSet::new());
    v.out
}

/// Interprets one node depth-first; the first failure aborts the rest.
pub fn run_node(ctx: &mut ExecContext<'_>, node: &Node) -> Result<(), Abort> {
    match node {
        Node::Sequence { children } => {
            for c in children {
                run_node(ctx, c)?;
            }
            Ok(())
        }
        Node::Loop {
            count: Some(n),
            body,
            ..
        } => {
            for _ in 0..*n {
                run_node(ctx, body)?;
            }
            Ok(())
        }
        Node::Loop {
            while_predicate,
            until_predicate,
            body,
            ..
        } => {
            let (predicate, continue_while) = match (while_predicate, until_predicate) {
                (Some(p), _) => (p, true),
                (None, Some(p)) => (p, false),
                (None, None) => return Err(ctx.fail("loop without a condition")),
            };
            for _ in 0..MAX_LOOP_COUNT {
                let holds = ctx
                    .sim()
                    .predicates
                    .evaluate(predicate, ctx.world())
                    .map_err(|e| ctx.fail(e.to_string()))?;
                if holds != continue_while {
                    return Ok(());
                }
                run_node(ctx, body)?;
            }
            Ok(())
        }
        Node::BehaviourCall { behaviour, params } => ctx.run_behaviour(behaviour, params),
        Node::SkillCall { skill } => ctx.run_skill_call(skill),
        Node::HardwareDecl { .. } => Ok(()),
        Node::WaypointMotion { waypoints } => {
            if !ctx.has_hardware(WAYPOINT_HARDWARE) {
                return Err(ctx.fail("waypoint motion needs left_arm"));
            }
            let tree = waypoint_segment_tree();
            for w in waypoints {
                ctx.perform(&tree, Some(*w), Default::default())?;
            }
            Ok(())
        }
    }
}

/// Static call tree and duration of a program, looking through skill calls
/// into the skills' basic behaviours.
pub fn static_profile(node: &Node, registry: &Registry) -> (Vec<CallNode>, u32) {
    match node {
        Node::Sequence { children } => {
            let mut tree = Vec::new();
            let mut ticks = 0;
            for c in children {
                let (t, d) = static_profile(c, registry);
                tree.extend(t);
                ticks += d;
            }
            (tree, ticks)
        }
        Node::Loop { count, body, .. } => {
            let (t, d) = static_profile(body, registry);
            (t, d * count.unwrap_or(1))
        }
        Node::BehaviourCall { behaviour, .. } => registry
            .behaviour(behaviour)
            .map(|b| (b.descriptor().call_tree.clone(), b.descriptor().duration_ticks))
            .unwrap_or_default(),
        Node::SkillCall { skill } => registry
            .skill(skill)
            .map(|s| registry.skill_call_tree(&s))
            .unwrap_or_default(),
        Node::HardwareDecl { .. } => (Vec::new(), 0),
        Node::WaypointMotion { waypoints } => {
            let mut tree = Vec::new();
            for _ in waypoints {
                tree.extend(waypoint_segment_tree());
            }
            (tree, MOTION_TICKS * waypoints.len() as u32)
        }
    }
}

/// A program registered as a composite behaviour.
#[derive(Debug)]
pub struct ProgramBehaviour {
    descriptor: BehaviourDescriptor,
    ast: ProgramAst,
}

impl ProgramBehaviour {
    pub fn new(id: &str, description: &str, ast: ProgramAst, registry: &Registry) -> Self {
        let (call_tree, duration_ticks) = static_profile(&ast.root, registry);
        ProgramBehaviour {
            descriptor: BehaviourDescriptor {
                id: id.into(),
                category: BehaviourCategory::Composite,
                description: description.into(),
                required_hardware: ast.declared_hardware(),
                parameter_schema: Vec::new(),
                call_tree,
                duration_ticks,
            },
            ast,
        }
    }
}

impl Behaviour for ProgramBehaviour {
    fn descriptor(&self) -> &BehaviourDescriptor {
        &self.descriptor
    }

    fn run(&self, ctx: &mut ExecContext<'_>, _params: &Params) -> Result<(), Abort> {
        run_node(ctx, &self.ast.root)
    }

    fn program(&self) -> Option<&ProgramAst> {
        Some(&self.ast)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape_uses_kind_tags() {
        let ast = ProgramAst::new(Node::sequence(vec![
            Node::hardware(&["left_arm"]),
            Node::call("move_home"),
            Node::repeat(3, Node::skill("pick_and_place")),
            Node::WaypointMotion {
                waypoints: vec![[1.0, 2.0, 3.0]],
            },
        ]));
        let v: serde_json::Value = serde_json::from_str(&ast.to_json()).unwrap();
        assert_eq!(v["ast_version"], 1);
        assert_eq!(v["root"]["kind"], "sequence");
        assert_eq!(v["root"]["children"][0]["kind"], "hardware_decl");
        assert_eq!(v["root"]["children"][1]["behaviour"], "move_home");
        assert_eq!(v["root"]["children"][2]["count"], 3);
        assert_eq!(v["root"]["children"][2]["body"]["skill"], "pick_and_place");
        assert_eq!(v["root"]["children"][3]["waypoints"][0][2], 3.0);
        assert_eq!(ProgramAst::from_json(&ast.to_json()).unwrap(), ast);
    }

    #[test]
    fn while_loop_parses() {
        let ast = ProgramAst::from_json(
            r#"{"ast_version":1,"root":{"kind":"loop","until":"tower_cleared","body":{"kind":"skill_call","skill":"pick_and_place"}}}"#,
        )
        .unwrap();
        assert!(matches!(ast.root, Node::Loop { until_predicate: Some(_), .. }));
    }
}
