use nalgebra::{DMatrix, DVector};

use super::{KinematicTree, ModelError, SystemState};
use crate::spatial::{SpatialMotion, Transform, Vec3};

/// World poses and twists of every body of a tree.
///
/// Twists are world-aligned: `angular` is the body angular velocity and
/// `linear` the velocity of the body-frame origin, both in world coordinates.
#[derive(Clone, Debug)]
pub struct Kinematics {
    pub poses: Vec<Transform>,
    pub twists: Vec<SpatialMotion>,
}

/// Pose and twist of a single point fixed on a body.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointState {
    pub pose: Transform,
    /// World-aligned angular velocity and linear velocity of the point itself.
    pub twist: SpatialMotion,
}

impl Kinematics {
    pub fn body_pose(&self, body: usize) -> &Transform {
        &self.poses[body]
    }

    /// World pose of the frame that sits at `point` with the body orientation.
    pub fn point_state(&self, body: usize, point: &Vec3) -> PointState {
        let pose = self.poses[body];
        let world = pose.transform_point(point);
        let t = &self.twists[body];
        let linear = t.point_velocity(&(world - pose.translation));
        PointState {
            pose: Transform::new(pose.rotation, world),
            twist: SpatialMotion::new(t.angular, linear),
        }
    }

    /// Non-zero columns of the world point Jacobian as `(dof, [angular; linear])`.
    pub fn jacobian_columns(&self, tree: &KinematicTree, body: usize, point_world: &Vec3) -> Vec<(usize, [f64; 6])> {
        let mut cols = Vec::new();
        for b in tree.ancestors(body) {
            if let Some(d) = tree.dof_of_body(b) {
                let joint = tree.joint(b);
                let pose = &self.poses[b];
                let axis = pose.rotation.rotate(&joint.axis);
                let col = match joint.kind {
                    super::JointKind::Revolute => {
                        let lin = axis.cross(&(point_world - pose.translation));
                        [axis.x, axis.y, axis.z, lin.x, lin.y, lin.z]
                    }
                    super::JointKind::Prismatic => [0.0, 0.0, 0.0, axis.x, axis.y, axis.z],
                    super::JointKind::Fixed => unreachable!(),
                };
                cols.push((d, col));
            }
        }
        cols
    }
}

/// Computes world poses and twists for all bodies.
pub fn forward_kinematics(tree: &KinematicTree, state: &SystemState) -> Result<Kinematics, ModelError> {
    state.check(tree)?;
    Ok(forward_kinematics_unchecked(tree, &state.q, &state.qdot))
}

pub(crate) fn forward_kinematics_unchecked(tree: &KinematicTree, q: &DVector<f64>, qdot: &DVector<f64>) -> Kinematics {
    let nb = tree.body_count();
    let mut poses = Vec::with_capacity(nb);
    let mut twists = Vec::with_capacity(nb);
    poses.push(*tree.base());
    twists.push(SpatialMotion::zero());
    for i in 1..nb {
        let p = tree.parent(i).expect("non-root body has a parent");
        let joint = tree.joint(i);
        let (qi, qdi) = match tree.dof_of_body(i) {
            Some(d) => (q[d], qdot[d]),
            None => (0.0, 0.0),
        };
        let pose = poses[p].compose(&joint.child_in_parent(qi));
        let parent_twist: SpatialMotion = twists[p];
        let parent_pose: &Transform = &poses[p];
        let mut angular = parent_twist.angular;
        let mut linear = parent_twist.point_velocity(&(pose.translation - parent_pose.translation));
        if qdi != 0.0 {
            let axis = pose.rotation.rotate(&joint.axis);
            match joint.kind {
                super::JointKind::Revolute => angular += axis * qdi,
                super::JointKind::Prismatic => linear += axis * qdi,
                super::JointKind::Fixed => {}
            }
        }
        poses.push(pose);
        twists.push(SpatialMotion::new(angular, linear));
    }
    Kinematics { poses, twists }
}

/// 6×n world point Jacobian, rows `[angular; linear]`, with `point` given in
/// the body frame. `J q̇` is the twist of the point.
pub fn point_jacobian(tree: &KinematicTree, q: &DVector<f64>, body: usize, point: &Vec3) -> Result<DMatrix<f64>, ModelError> {
    let n = tree.dof_count();
    if q.len() != n {
        return Err(ModelError::DimensionMismatch { expected: n, got: q.len() });
    }
    if body >= tree.body_count() {
        return Err(ModelError::UnknownBody(format!("#{body}")));
    }
    let kin = forward_kinematics_unchecked(tree, q, &DVector::zeros(n));
    let world = kin.poses[body].transform_point(point);
    let mut j = DMatrix::zeros(6, n);
    for (d, col) in kin.jacobian_columns(tree, body, &world) {
        for r in 0..6 {
            j[(r, d)] = col[r];
        }
    }
    Ok(j)
}

/// Same as [`point_jacobian`] with body and point looked up by name.
pub fn named_point_jacobian(tree: &KinematicTree, q: &DVector<f64>, body: &str, point: &str) -> Result<DMatrix<f64>, ModelError> {
    let (b, p) = tree.resolve_point(body, point)?;
    point_jacobian(tree, q, b, &p)
}
