//! Built-in primitive behaviours: sensing actions and motions.

use std::collections::BTreeSet;
use std::sync::Arc;

use super::behaviour::{
    tree_span, Behaviour, BehaviourCategory, BehaviourDescriptor, CallNode, ParamSpec, ParamType, ParamValue,
    Params,
};
use super::exec::{Abort, ExecContext};
use crate::world::{
    clamp_to_workspace, planar_distance, ObjectKind, Orientation, SimObject, Stimulus, HOME_POSE,
    PLACEMENT_TOLERANCE,
};

/// Height of the end effector while reaching for objects on the table.
pub const APPROACH_HEIGHT: f64 = 1.0;
/// Height used by joint-space motions.
pub const JOINT_PTP_HEIGHT: f64 = 3.0;
/// Ticks of every sensing action.
pub const SENSING_TICKS: u32 = 10;
/// Ticks of every motion primitive and of each waypoint segment.
pub const MOTION_TICKS: u32 = 5;

pub const VOID_BEHAVIOUR: &str = "b_void";
pub const SENSING_ACTIONS: [&str; 3] = ["sliding", "poking", "pressing"];

type RunFn = fn(&mut ExecContext<'_>, &BehaviourDescriptor, &Params) -> Result<(), Abort>;

/// A behaviour implemented natively by the simulator.
pub struct Primitive {
    descriptor: BehaviourDescriptor,
    run: RunFn,
}

impl std::fmt::Debug for Primitive {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Primitive").field("id", &self.descriptor.id).finish()
    }
}

impl Primitive {
    pub fn new(descriptor: BehaviourDescriptor, run: RunFn) -> Self {
        Primitive { descriptor, run }
    }
}

impl Behaviour for Primitive {
    fn descriptor(&self) -> &BehaviourDescriptor {
        &self.descriptor
    }

    fn run(&self, ctx: &mut ExecContext<'_>, params: &Params) -> Result<(), Abort> {
        (self.run)(ctx, &self.descriptor, params)
    }
}

fn leaf(f: &str, ticks: u32) -> CallNode {
    CallNode::leaf(f, ticks)
}

fn parent(f: &str, children: Vec<CallNode>) -> CallNode {
    CallNode::parent(f, children)
}

fn hw(names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn primitive(
    id: &str,
    category: BehaviourCategory,
    description: &str,
    hardware: &[&str],
    parameter_schema: Vec<ParamSpec>,
    call_tree: Vec<CallNode>,
    run: RunFn,
) -> Arc<dyn Behaviour> {
    let duration_ticks = tree_span(&call_tree);
    Arc::new(Primitive::new(
        BehaviourDescriptor {
            id: id.into(),
            category,
            description: description.into(),
            required_hardware: hw(hardware),
            parameter_schema,
            call_tree,
            duration_ticks,
        },
        run,
    ))
}

/// Call tree of one segment of a waypoint motion.
pub fn waypoint_segment_tree() -> Vec<CallNode> {
    vec![
        leaf("interpolate_waypoints", 1),
        leaf("inverse_kinematics", 1),
        leaf("execute_trajectory", 2),
        leaf("forward_kinematics", 1),
    ]
}

fn motion_tree() -> Vec<CallNode> {
    vec![
        parent("plan_cartesian", vec![leaf("inverse_kinematics", 1), leaf("check_collision", 1)]),
        leaf("execute_trajectory", 2),
        leaf("forward_kinematics", 1),
    ]
}

fn push_tree() -> Vec<CallNode> {
    vec![
        parent("plan_cartesian", vec![leaf("check_collision", 1)]),
        parent("push_controller", vec![leaf("contact_detect", 1), leaf("execute_trajectory", 3)]),
    ]
}

fn orientation_values() -> ParamType {
    ParamType::Enum {
        values: Orientation::ALL.iter().map(|o| o.to_string()).collect(),
    }
}

/// Every primitive behaviour, in palette order.
pub fn primitives() -> Vec<Arc<dyn Behaviour>> {
    use BehaviourCategory::{Motion, Sensing};
    vec![
        primitive(
            "sliding",
            Sensing,
            "Slide the fingertips along the object surface",
            &["left_arm", "left_hand"],
            vec![],
            vec![
                leaf("contact_detect", 2),
                parent("slide_controller", vec![leaf("read_tactile", 6)]),
                leaf("read_force", 1),
                leaf("read_joint_state", 1),
            ],
            |ctx, d, _| sense(ctx, d, Stimulus::sliding),
        ),
        primitive(
            "poking",
            Sensing,
            "Poke the top of the object and measure the reaction force",
            &["left_arm", "left_hand"],
            vec![],
            vec![
                leaf("contact_detect", 2),
                parent("poke_controller", vec![leaf("read_force", 6)]),
                leaf("read_joint_state", 2),
            ],
            |ctx, d, _| sense(ctx, d, Stimulus::poking),
        ),
        primitive(
            "pressing",
            Sensing,
            "Press the object between the fingers to measure its width",
            &["left_arm", "left_hand"],
            vec![],
            vec![
                leaf("contact_detect", 2),
                parent(
                    "press_controller",
                    vec![leaf("close_hand", 2), leaf("read_tactile", 2), leaf("read_force", 2)],
                ),
                leaf("estimate_pose", 2),
            ],
            |ctx, d, _| sense(ctx, d, Stimulus::pressing),
        ),
        primitive(
            VOID_BEHAVIOUR,
            Motion,
            "Do nothing",
            &[],
            vec![],
            vec![leaf("idle", 1)],
            |ctx, _, _| {
                let token = ctx.enter("idle")?;
                ctx.hold_step();
                ctx.exit(token);
                Ok(())
            },
        ),
        primitive(
            "wait",
            Motion,
            "Wait for a number of ticks",
            &[],
            vec![ParamSpec::optional("ticks", ParamType::Int, ParamValue::Int(1))],
            vec![leaf("idle", 1)],
            |ctx, _, p| {
                let ticks = int(ctx, p, "ticks")?;
                if !(1..=1000).contains(&ticks) {
                    return Err(ctx.fail(format!("wait of {ticks} ticks outside 1..=1000")));
                }
                let token = ctx.enter("idle")?;
                for _ in 0..ticks {
                    ctx.step();
                }
                ctx.exit(token);
                Ok(())
            },
        ),
        primitive(
            "move_home",
            Motion,
            "Move the arm to its home pose",
            &["left_arm"],
            vec![],
            vec![
                parent("plan_joint", vec![leaf("read_joint_state", 1)]),
                leaf("execute_trajectory", 3),
                leaf("forward_kinematics", 1),
            ],
            |ctx, d, _| ctx.perform(&d.call_tree, Some(HOME_POSE), Stimulus::default()),
        ),
        primitive(
            "joint_ptp",
            Motion,
            "Moves joints to specified position",
            &["left_arm"],
            vec![ParamSpec::required("goal", ParamType::Vec2)],
            vec![
                parent("plan_joint", vec![leaf("inverse_kinematics", 1), leaf("check_collision", 1)]),
                leaf("execute_trajectory", 2),
                leaf("read_joint_state", 1),
            ],
            |ctx, d, p| {
                let [x, y] = vec2(ctx, p, "goal")?;
                ctx.perform(&d.call_tree, Some([x, y, JOINT_PTP_HEIGHT]), Stimulus::default())
            },
        ),
        primitive(
            "cartesian_ptp",
            Motion,
            "Moves the end effector to a Cartesian position",
            &["left_arm"],
            vec![ParamSpec::required("target", ParamType::Vec2)],
            motion_tree(),
            |ctx, d, p| {
                let [x, y] = clamp_to_workspace(vec2(ctx, p, "target")?);
                ctx.perform(&d.call_tree, Some([x, y, APPROACH_HEIGHT]), Stimulus::default())
            },
        ),
        primitive(
            "open_hand",
            Motion,
            "Opens the hand and releases any held object",
            &["left_hand"],
            vec![],
            vec![leaf("open_hand", 4), leaf("read_tactile", 1)],
            |ctx, d, _| {
                ctx.perform(&d.call_tree, None, Stimulus::default())?;
                let [x, y, _] = ctx.world().arm_pose;
                let w = ctx.world_mut();
                w.hand_open = true;
                if let Some(held) = w.held_object.take() {
                    if let Some(o) = w.object_mut(&held) {
                        o.position = clamp_to_workspace([x, y]);
                    }
                }
                Ok(())
            },
        ),
        primitive(
            "close_hand",
            Motion,
            "Closes the hand, grasping the object under it if possible",
            &["left_hand"],
            vec![],
            vec![leaf("grasp_planner", 1), leaf("close_hand", 3), leaf("read_tactile", 1)],
            |ctx, d, _| {
                ctx.perform(&d.call_tree, None, Stimulus::default())?;
                close_hand(ctx);
                Ok(())
            },
        ),
        primitive(
            "change_stiffness",
            Motion,
            "Changes the Cartesian stiffness of the arm",
            &["left_arm"],
            vec![ParamSpec::optional("stiffness", ParamType::Real, ParamValue::Real(0.5))],
            vec![leaf("set_stiffness", 4), leaf("read_joint_state", 1)],
            |ctx, d, p| {
                let s = real(ctx, p, "stiffness")?;
                if !(0.0..=1.0).contains(&s) {
                    return Err(ctx.fail(format!("stiffness {s} outside [0, 1]")));
                }
                ctx.perform(&d.call_tree, None, Stimulus::default())
            },
        ),
        primitive(
            "localise_object",
            Motion,
            "Localises the task object with the camera",
            &["camera"],
            vec![],
            vec![
                leaf("camera_capture", 2),
                leaf("segment_point_cloud", 1),
                leaf("estimate_pose", 2),
            ],
            |ctx, d, _| {
                let pose = ctx.world().primary().map(|o| o.position);
                ctx.perform(&d.call_tree, None, Stimulus::default())?;
                let pose = pose.ok_or_else(|| ctx.fail("no object in view"))?;
                ctx.set_blackboard("object_pose", pose);
                Ok(())
            },
        ),
        primitive(
            "localise_bin",
            Motion,
            "Localises the bin with the camera",
            &["camera"],
            vec![],
            vec![leaf("camera_capture", 2), leaf("fit_box", 3)],
            |ctx, d, _| {
                let w = ctx.world();
                let primary = w.primary().map(|o| o.id.clone());
                let pose = w
                    .objects
                    .iter()
                    .find(|o| o.kind == ObjectKind::LidBox && Some(&o.id) != primary.as_ref())
                    .map(|o| o.position);
                ctx.perform(&d.call_tree, None, Stimulus::default())?;
                let pose = pose.ok_or_else(|| ctx.fail("no bin in view"))?;
                ctx.set_blackboard("bin_pose", pose);
                Ok(())
            },
        ),
        primitive(
            "push_to_body",
            Motion,
            "Pushes the object towards the robot",
            &["left_arm", "left_hand"],
            vec![ParamSpec::optional("distance", ParamType::Real, ParamValue::Real(2.0))],
            push_tree(),
            |ctx, d, p| {
                let dist = real(ctx, p, "distance")?;
                push(ctx, d, |o| o.position[1] -= dist)
            },
        ),
        primitive(
            "push_from_body",
            Motion,
            "Pushes the object away from the robot",
            &["left_arm", "left_hand"],
            vec![ParamSpec::optional("distance", ParamType::Real, ParamValue::Real(2.0))],
            push_tree(),
            |ctx, d, p| {
                let dist = real(ctx, p, "distance")?;
                push(ctx, d, |o| o.position[1] += dist)
            },
        ),
        primitive(
            "push_to_position",
            Motion,
            "Pushes the object to a target position",
            &["left_arm", "left_hand"],
            vec![ParamSpec::required("target", ParamType::Vec2)],
            push_tree(),
            |ctx, d, p| {
                let target = vec2(ctx, p, "target")?;
                push(ctx, d, |o| o.position = target)
            },
        ),
        primitive(
            "push_to_orientation",
            Motion,
            "Rotate the object to a certain orientation",
            &["left_arm", "left_hand"],
            vec![ParamSpec::required("orientation", orientation_values())],
            push_tree(),
            |ctx, d, p| {
                let target: Orientation = match p.get("orientation") {
                    Some(ParamValue::Enum(s)) => s.parse().map_err(|e: crate::world::WorldError| ctx.fail(e.to_string()))?,
                    _ => return Err(ctx.fail("orientation missing")),
                };
                push(ctx, d, |o| o.orientation = target)
            },
        ),
        primitive(
            "rotate_by",
            Motion,
            "Rotates the object by a multiple of 90 degrees",
            &["left_arm", "left_hand"],
            vec![ParamSpec::required("angle", ParamType::Int)],
            push_tree(),
            |ctx, d, p| {
                let angle = int(ctx, p, "angle")?;
                let current = ctx
                    .world()
                    .primary()
                    .map(|o| o.orientation)
                    .ok_or_else(|| ctx.fail("no object to rotate"))?;
                let target = i32::try_from(angle)
                    .map_err(|_| ctx.fail(format!("angle {angle} out of range")))
                    .and_then(|a| current.rotated(a).map_err(|e| ctx.fail(e.to_string())))?;
                push(ctx, d, |o| o.orientation = target)
            },
        ),
        primitive(
            "press_button",
            Motion,
            "Presses down on the object, opening a lid",
            &["left_arm"],
            vec![],
            vec![
                parent("press_controller", vec![leaf("contact_detect", 1), leaf("read_force", 3)]),
                leaf("forward_kinematics", 1),
            ],
            |ctx, d, _| {
                let [x, y] = ctx
                    .world()
                    .primary()
                    .map(|o| o.position)
                    .ok_or_else(|| ctx.fail("nothing to press"))?;
                let stimulus = Stimulus {
                    tactile: None,
                    force: Some(4.0),
                };
                ctx.perform(&d.call_tree, Some([x, y, APPROACH_HEIGHT]), stimulus)?;
                if let Some(o) = ctx.world_mut().primary_mut() {
                    if o.kind == ObjectKind::LidBox {
                        o.open = true;
                    }
                }
                Ok(())
            },
        ),
    ]
}

fn sense(ctx: &mut ExecContext<'_>, d: &BehaviourDescriptor, stimulus: fn(&SimObject) -> Stimulus) -> Result<(), Abort> {
    let s = ctx
        .world()
        .primary()
        .map(stimulus)
        .ok_or_else(|| ctx.fail("no object to touch"))?;
    ctx.perform(&d.call_tree, None, s)
}

fn push(ctx: &mut ExecContext<'_>, d: &BehaviourDescriptor, effect: impl FnOnce(&mut SimObject)) -> Result<(), Abort> {
    if ctx.world().held_object.is_some() {
        return Err(ctx.fail("cannot push while holding an object"));
    }
    let mut moved = ctx
        .world()
        .primary()
        .cloned()
        .ok_or_else(|| ctx.fail("no object to push"))?;
    effect(&mut moved);
    moved.position = clamp_to_workspace(moved.position);
    let [x, y] = moved.position;
    ctx.perform(&d.call_tree, Some([x, y, APPROACH_HEIGHT]), Stimulus::default())?;
    if let Some(o) = ctx.world_mut().primary_mut() {
        *o = moved;
    }
    Ok(())
}

fn close_hand(ctx: &mut ExecContext<'_>) {
    let w = ctx.world_mut();
    w.hand_open = false;
    if w.held_object.is_some() {
        return;
    }
    let hand = [w.arm_pose[0], w.arm_pose[1]];
    let target = w
        .objects
        .iter()
        .filter(|o| o.kind != ObjectKind::LidBox)
        .map(|o| (planar_distance(o.position, hand), o.id.clone()))
        .filter(|(d, _)| *d <= PLACEMENT_TOLERANCE)
        .min_by(|a, b| a.0.total_cmp(&b.0));
    let Some((_, id)) = target else {
        return;
    };
    let obj = w.object(&id).expect("target exists").clone();
    match obj.kind {
        ObjectKind::Book if obj.orientation != Orientation::Deg0 => {}
        ObjectKind::BoxStack if obj.height == 0 => {}
        ObjectKind::BoxStack => {
            let n = w.objects.iter().filter(|o| o.id.starts_with(&format!("{id}_block"))).count();
            let block_id = format!("{id}_block{n}");
            if let Some(stack) = w.object_mut(&id) {
                stack.height -= 1;
            }
            w.objects.push(SimObject::new(block_id.clone(), ObjectKind::Cube, clamp_to_workspace(hand)));
            w.held_object = Some(block_id);
        }
        _ => w.held_object = Some(id),
    }
}

fn vec2(ctx: &ExecContext<'_>, p: &Params, name: &str) -> Result<[f64; 2], Abort> {
    match p.get(name) {
        Some(ParamValue::Vec2(v)) => Ok(*v),
        Some(ParamValue::Var { var }) => ctx
            .blackboard(var)
            .ok_or_else(|| ctx.fail(format!("variable {var} has no value yet"))),
        _ => Err(ctx.fail(format!("parameter {name} missing"))),
    }
}

fn real(ctx: &ExecContext<'_>, p: &Params, name: &str) -> Result<f64, Abort> {
    match p.get(name) {
        Some(ParamValue::Real(r)) => Ok(*r),
        Some(ParamValue::Int(i)) => Ok(*i as f64),
        _ => Err(ctx.fail(format!("parameter {name} missing"))),
    }
}

fn int(ctx: &ExecContext<'_>, p: &Params, name: &str) -> Result<i64, Abort> {
    match p.get(name) {
        Some(ParamValue::Int(i)) => Ok(*i),
        _ => Err(ctx.fail(format!("parameter {name} missing"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::INSTRUMENTED_FUNCTIONS;

    #[test]
    fn descriptors_are_well_formed() {
        for b in primitives() {
            let d = b.descriptor();
            d.check().unwrap();
            for f in d.functions() {
                assert!(INSTRUMENTED_FUNCTIONS.contains(&f.as_str()), "{f}");
            }
            let expected = match (d.category, d.id.as_str()) {
                (BehaviourCategory::Sensing, _) => SENSING_TICKS,
                (_, "b_void" | "wait") => 1,
                _ => MOTION_TICKS,
            };
            assert_eq!(d.duration_ticks, expected, "{}", d.id);
        }
        assert_eq!(tree_span(&waypoint_segment_tree()), MOTION_TICKS);
    }
}
