use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::spatial::{SpatialInertia, SpatialMotion, Transform, Vec3, Rotation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Revolute,
    Prismatic,
    /// Rigid connection; only used for the grounded root.
    Fixed,
}

/// Joint connecting a body to its parent. The joint frame is located by
/// `parent_attachment` in the parent body frame and coincides with the child
/// body frame at zero displacement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub name: String,
    pub kind: JointKind,
    pub axis: Vec3,
    pub parent_attachment: Transform,
    pub lower: f64,
    pub upper: f64,
    /// Joint-space inertia added on the diagonal of the mass matrix.
    #[serde(default)]
    pub armature: f64,
}

impl JointSpec {
    pub fn revolute(name: impl Into<String>, axis: Vec3, parent_attachment: Transform) -> Self {
        JointSpec {
            name: name.into(),
            kind: JointKind::Revolute,
            axis: axis.normalize(),
            parent_attachment,
            lower: -std::f64::consts::PI,
            upper: std::f64::consts::PI,
            armature: 0.0,
        }
    }

    pub fn prismatic(name: impl Into<String>, axis: Vec3, parent_attachment: Transform) -> Self {
        JointSpec {
            name: name.into(),
            kind: JointKind::Prismatic,
            axis: axis.normalize(),
            parent_attachment,
            lower: -0.5,
            upper: 0.5,
            armature: 0.0,
        }
    }

    pub fn fixed(name: impl Into<String>, parent_attachment: Transform) -> Self {
        JointSpec {
            name: name.into(),
            kind: JointKind::Fixed,
            axis: Vec3::z(),
            parent_attachment,
            lower: 0.0,
            upper: 0.0,
            armature: 0.0,
        }
    }

    pub fn with_limits(mut self, lower: f64, upper: f64) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn with_armature(mut self, armature: f64) -> Self {
        self.armature = armature;
        self
    }

    pub fn has_dof(&self) -> bool {
        self.kind != JointKind::Fixed
    }

    /// Child frame pose in the joint frame for displacement `q`.
    pub fn motion_transform(&self, q: f64) -> Transform {
        match self.kind {
            JointKind::Revolute => Transform::from_rotation(Rotation::from_axis_angle(&self.axis, q)),
            JointKind::Prismatic => Transform::from_translation(self.axis * q),
            JointKind::Fixed => Transform::identity(),
        }
    }

    /// Child pose in the parent body frame.
    pub fn child_in_parent(&self, q: f64) -> Transform {
        match self.kind {
            JointKind::Fixed => self.parent_attachment,
            _ => self.parent_attachment.compose(&self.motion_transform(q)),
        }
    }

    /// Motion subspace in the child frame.
    pub fn subspace(&self) -> SpatialMotion {
        match self.kind {
            JointKind::Revolute => SpatialMotion::new(self.axis, Vec3::zeros()),
            JointKind::Prismatic => SpatialMotion::new(Vec3::zeros(), self.axis),
            JointKind::Fixed => SpatialMotion::zero(),
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.has_dof() && (self.axis.norm() - 1.0).abs() > 1e-9 {
            return Err(ModelError::Invalid(format!("joint '{}' axis is not unit length", self.name)));
        }
        if self.lower > self.upper {
            return Err(ModelError::Invalid(format!("joint '{}' has lower limit above upper limit", self.name)));
        }
        if !(self.armature >= 0.0) {
            return Err(ModelError::Invalid(format!("joint '{}' has negative armature", self.name)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodySpec {
    pub name: String,
    pub inertia: SpatialInertia,
    /// Named points in the body frame [m].
    #[serde(default)]
    pub points: Vec<(String, Vec3)>,
}

impl BodySpec {
    pub fn new(name: impl Into<String>, inertia: SpatialInertia) -> Self {
        BodySpec { name: name.into(), inertia, points: Vec::new() }
    }

    pub fn with_point(mut self, name: impl Into<String>, at: Vec3) -> Self {
        self.points.push((name.into(), at));
        self
    }

    pub fn point(&self, name: &str) -> Option<Vec3> {
        self.points.iter().find(|(n, _)| n == name).map(|(_, p)| *p)
    }
}

/// Articulated tree in topological order: `parent[i] < i`, body 0 is the
/// grounded root placed at `base` in the world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KinematicTree {
    bodies: Vec<BodySpec>,
    joints: Vec<JointSpec>,
    parent: Vec<Option<usize>>,
    base: Transform,
    #[serde(skip)]
    dof_of_body: Vec<Option<usize>>,
    #[serde(skip)]
    body_of_dof: Vec<usize>,
}

impl KinematicTree {
    /// Starts a tree from its grounded root body.
    pub fn new(root: BodySpec, base: Transform) -> Self {
        KinematicTree {
            bodies: vec![root],
            joints: vec![JointSpec::fixed("ground", Transform::identity())],
            parent: vec![None],
            base,
            dof_of_body: vec![None],
            body_of_dof: Vec::new(),
        }
    }

    /// Appends a body; returns its index.
    pub fn add_body(&mut self, parent: usize, joint: JointSpec, body: BodySpec) -> Result<usize, ModelError> {
        if parent >= self.bodies.len() {
            return Err(ModelError::Invalid(format!("parent index {parent} does not exist")));
        }
        joint.validate()?;
        if self.bodies.iter().any(|b| b.name == body.name) {
            return Err(ModelError::Invalid(format!("duplicate body name '{}'", body.name)));
        }
        let idx = self.bodies.len();
        let dof = if joint.has_dof() {
            self.body_of_dof.push(idx);
            Some(self.body_of_dof.len() - 1)
        } else {
            None
        };
        self.bodies.push(body);
        self.joints.push(joint);
        self.parent.push(Some(parent));
        self.dof_of_body.push(dof);
        Ok(idx)
    }

    /// Recomputes derived indices, e.g. after deserialization, and checks invariants.
    pub fn reindex(mut self) -> Result<Self, ModelError> {
        if self.bodies.len() != self.joints.len() || self.bodies.len() != self.parent.len() || self.bodies.is_empty() {
            return Err(ModelError::Invalid("bodies, joints and parents must have equal non-zero length".into()));
        }
        if self.parent[0].is_some() {
            return Err(ModelError::Invalid("body 0 must be the root".into()));
        }
        self.dof_of_body.clear();
        self.body_of_dof.clear();
        for (i, (p, j)) in self.parent.iter().zip(&self.joints).enumerate() {
            if i > 0 {
                match p {
                    Some(p) if *p < i => {}
                    _ => return Err(ModelError::Invalid(format!("body {i} must have a parent with a smaller index"))),
                }
                j.validate()?;
            }
            if i > 0 && j.has_dof() {
                self.body_of_dof.push(i);
                self.dof_of_body.push(Some(self.body_of_dof.len() - 1));
            } else {
                self.dof_of_body.push(None);
            }
        }
        Ok(self)
    }

    pub fn body_count(&self) -> usize {
        self.bodies.len()
    }

    pub fn dof_count(&self) -> usize {
        self.body_of_dof.len()
    }

    pub fn bodies(&self) -> &[BodySpec] {
        &self.bodies
    }

    pub fn body(&self, i: usize) -> &BodySpec {
        &self.bodies[i]
    }

    pub fn joint(&self, i: usize) -> &JointSpec {
        &self.joints[i]
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    pub fn base(&self) -> &Transform {
        &self.base
    }

    pub fn dof_of_body(&self, i: usize) -> Option<usize> {
        self.dof_of_body[i]
    }

    pub fn body_of_dof(&self, d: usize) -> usize {
        self.body_of_dof[d]
    }

    pub fn dof_joint(&self, d: usize) -> &JointSpec {
        &self.joints[self.body_of_dof[d]]
    }

    pub fn body_index(&self, name: &str) -> Option<usize> {
        self.bodies.iter().position(|b| b.name == name)
    }

    pub fn dof_index(&self, joint_name: &str) -> Option<usize> {
        self.body_of_dof.iter().position(|&b| self.joints[b].name == joint_name)
    }

    pub fn total_mass(&self) -> f64 {
        self.bodies.iter().map(|b| b.inertia.mass).sum()
    }

    /// Bodies from `body` up to the root, starting with `body` itself.
    pub fn ancestors(&self, body: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(Some(body), move |&b| self.parent[b])
    }

    pub fn armature(&self) -> DVector<f64> {
        DVector::from_iterator(self.dof_count(), self.body_of_dof.iter().map(|&b| self.joints[b].armature))
    }

    pub fn set_body_inertia(&mut self, body: usize, inertia: SpatialInertia) {
        self.bodies[body].inertia = inertia;
    }

    /// Resolves a named point on a named body.
    pub fn resolve_point(&self, body: &str, point: &str) -> Result<(usize, Vec3), ModelError> {
        let b = self.body_index(body).ok_or_else(|| ModelError::UnknownBody(body.to_string()))?;
        let p = self.bodies[b]
            .point(point)
            .ok_or_else(|| ModelError::UnknownPoint { body: body.to_string(), point: point.to_string() })?;
        Ok((b, p))
    }
}

/// Generalized coordinates and velocities of a tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
    pub time: f64,
}

impl SystemState {
    pub fn zeros(n: usize) -> Self {
        SystemState { q: DVector::zeros(n), qdot: DVector::zeros(n), time: 0.0 }
    }

    pub fn new(q: DVector<f64>, qdot: DVector<f64>, time: f64) -> Self {
        SystemState { q, qdot, time }
    }

    pub fn dof_count(&self) -> usize {
        self.q.len()
    }

    pub fn check(&self, tree: &KinematicTree) -> Result<(), ModelError> {
        let n = tree.dof_count();
        if self.q.len() != n || self.qdot.len() != n {
            return Err(ModelError::DimensionMismatch { expected: n, got: self.q.len().max(self.qdot.len()) });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qdot.iter()).all(|v| v.is_finite()) && self.time.is_finite()
    }
}
