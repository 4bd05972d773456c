use serde::{Deserialize, Serialize};

use super::{
    Anthropometrics, Articulation, BodySpec, InterfaceId, JointSpec, KinematicTree, ModelError, Segment, Side,
};
use crate::spatial::{SpatialInertia, Transform, Vec3};

/// Canonical harness DoF order: prismatic x, y, z then revolute x, y, z,
/// all expressed in the mount frame on the exoskeleton segment.
pub const HARNESS_DOF_NAMES: [&str; 6] = ["tx", "ty", "tz", "rx", "ry", "rz"];

/// Share of the exoskeleton mass given to each segment. Leg entries are per
/// side; `pelvis + 2 (thigh + shank + foot)` must equal 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassFractions {
    pub pelvis: f64,
    pub thigh: f64,
    pub shank: f64,
    pub foot: f64,
}

impl MassFractions {
    /// Fractions proportional to segment length.
    pub fn by_length(a: &Anthropometrics) -> Self {
        let total = a.pelvis_width + 2.0 * (a.thigh_length + a.shank_length + a.foot_length);
        MassFractions {
            pelvis: a.pelvis_width / total,
            thigh: a.thigh_length / total,
            shank: a.shank_length / total,
            foot: a.foot_length / total,
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        let parts = [self.pelvis, self.thigh, self.shank, self.foot];
        if parts.iter().any(|v| !(*v > 0.0)) {
            return Err(ModelError::Invalid("mass fractions must be strictly positive".into()));
        }
        let sum = self.pelvis + 2.0 * (self.thigh + self.shank + self.foot);
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ModelError::Invalid(format!("mass fractions sum to {sum}, expected 1")));
        }
        Ok(())
    }

    pub fn segment(&self, s: Segment) -> f64 {
        match s {
            Segment::Thigh => self.thigh,
            Segment::Shank => self.shank,
            Segment::Foot => self.foot,
        }
    }
}

/// Placement of the interfaces and the inertial layout of the device.
///
/// Thigh and shank mounts sit on the segment axis at `*_attachment` (fraction
/// of the segment length measured from the proximal joint); the interface
/// point is displaced laterally to the limb surface by `*_surface` times the
/// segment length. Foot and sacrum entries are fractions of foot length and
/// pelvis width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelLayout {
    pub thigh_attachment: f64,
    pub shank_attachment: f64,
    pub thigh_surface: f64,
    pub shank_surface: f64,
    /// Foot mount (forward, vertical) relative to the ankle centre.
    pub foot_mount: [f64; 2],
    /// Dorsal offset of the instep point above the foot mount.
    pub foot_surface: f64,
    /// Sacrum point relative to the mid-hip point.
    pub sacrum: [f64; 3],
    pub mass_fractions: Option<MassFractions>,
    /// Mass of each harness cuff [kg], taken from the segment budget.
    pub harness_mass: f64,
    /// Joint-space inertia added to every harness DoF [kg or kg·m²].
    pub regularization: f64,
    pub link_radius: f64,
}

impl Default for ModelLayout {
    fn default() -> Self {
        ModelLayout {
            thigh_attachment: 0.5,
            shank_attachment: 0.5,
            thigh_surface: 0.16,
            shank_surface: 0.12,
            foot_mount: [0.35, -0.15],
            foot_surface: 0.1,
            sacrum: [-0.6, 0.0, 0.4],
            mass_fractions: None,
            harness_mass: 0.0,
            regularization: 1e-4,
            link_radius: 0.03,
        }
    }
}

impl ModelLayout {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in [("thigh_attachment", self.thigh_attachment), ("shank_attachment", self.shank_attachment)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ModelError::Invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.regularization > 0.0) {
            return Err(ModelError::Invalid("regularization inertia must be positive".into()));
        }
        if !(self.harness_mass >= 0.0) || !(self.link_radius > 0.0) {
            return Err(ModelError::Invalid("harness mass must be non-negative and link radius positive".into()));
        }
        if let Some(f) = &self.mass_fractions {
            f.validate()?;
        }
        Ok(())
    }

    /// Harness mount on the segment axis, in the segment body frame.
    ///
    /// Right-leg segments have their frame at the distal joint (the chain is
    /// rooted at the right foot), left-leg segments at the proximal joint.
    pub fn mount_point(&self, a: &Anthropometrics, segment: Segment, side: Side) -> Vec3 {
        let along = |l: f64, f: f64| match side {
            Side::Right => Vec3::new(0.0, 0.0, (1.0 - f) * l),
            Side::Left => Vec3::new(0.0, 0.0, -f * l),
        };
        match segment {
            Segment::Thigh => along(a.thigh_length, self.thigh_attachment),
            Segment::Shank => along(a.shank_length, self.shank_attachment),
            Segment::Foot => Vec3::new(self.foot_mount[0], 0.0, self.foot_mount[1]) * a.foot_length,
        }
    }

    /// Interface point relative to the mount, in mount-frame axes.
    pub fn surface_offset(&self, a: &Anthropometrics, segment: Segment, side: Side) -> Vec3 {
        match segment {
            Segment::Thigh => Vec3::new(0.0, side.lateral() * self.thigh_surface * a.thigh_length, 0.0),
            Segment::Shank => Vec3::new(0.0, side.lateral() * self.shank_surface * a.shank_length, 0.0),
            Segment::Foot => Vec3::new(0.0, 0.0, self.foot_surface * a.foot_length),
        }
    }

    /// Interface point in the segment body frame.
    pub fn interface_point(&self, a: &Anthropometrics, segment: Segment, side: Side) -> Vec3 {
        self.mount_point(a, segment, side) + self.surface_offset(a, segment, side)
    }

    /// Sacrum point in the pelvis frame (origin at the right hip centre).
    pub fn sacrum_point(&self, a: &Anthropometrics) -> Vec3 {
        let w = a.pelvis_width;
        Vec3::new(self.sacrum[0] * w, 0.5 * w + self.sacrum[1] * w, self.sacrum[2] * w)
    }
}

/// A named point on a body.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterfacePoint {
    pub body: usize,
    pub point: Vec3,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnatomicalDof {
    pub articulation: Articulation,
    pub side: Side,
    pub dof: usize,
}

/// One 6-DoF harness chain between an exoskeleton segment and its cuff.
#[derive(Clone, Debug, PartialEq)]
pub struct HarnessChain {
    pub interface: InterfaceId,
    pub segment_body: usize,
    /// DoF indices in canonical order (tx, ty, tz, rx, ry, rz).
    pub dofs: [usize; 6],
    pub cuff: InterfacePoint,
    /// The interface point expressed on the segment at zero harness displacement.
    pub segment_point: Vec3,
}

/// The 42-DoF exoskeleton: six sagittal joints plus six harness chains.
#[derive(Clone, Debug)]
pub struct ExoskeletonModel {
    pub tree: KinematicTree,
    pub anthropometrics: Anthropometrics,
    pub layout: ModelLayout,
    pub total_mass: f64,
    pub anatomical: Vec<AnatomicalDof>,
    pub chains: Vec<HarnessChain>,
    pub pelvis: InterfacePoint,
}

impl ExoskeletonModel {
    pub fn dof_count(&self) -> usize {
        self.tree.dof_count()
    }

    pub fn chain(&self, id: InterfaceId) -> Option<&HarnessChain> {
        self.chains.iter().find(|c| c.interface == id)
    }

    pub fn anatomical_dof(&self, articulation: Articulation, side: Side) -> usize {
        self.anatomical
            .iter()
            .find(|a| a.articulation == articulation && a.side == side)
            .map(|a| a.dof)
            .expect("every articulation has a sagittal joint")
    }

    /// Actuated (hip and knee) DoF indices.
    pub fn actuated_dofs(&self) -> Vec<usize> {
        self.anatomical.iter().filter(|a| a.articulation.actuated()).map(|a| a.dof).collect()
    }

    pub fn harness_dofs(&self) -> Vec<usize> {
        self.chains.iter().flat_map(|c| c.dofs).collect()
    }

    pub fn segment_body(&self, segment: Segment, side: Side) -> usize {
        let name = format!("{}_{}", segment.name(), side.suffix());
        self.tree.body_index(&name).expect("segment body exists")
    }

    pub fn pelvis_body(&self) -> usize {
        self.pelvis.body
    }
}

fn segment_inertia(
    segment: Segment,
    side: Side,
    mass: f64,
    a: &Anthropometrics,
    radius: f64,
) -> Result<SpatialInertia, ModelError> {
    let rod_z = |l: f64| {
        let z = match side {
            Side::Right => 0.5 * l,
            Side::Left => -0.5 * l,
        };
        SpatialInertia::rod(mass, Vec3::new(0.0, 0.0, z), l, radius, 2)
    };
    let inertia = match segment {
        Segment::Thigh => rod_z(a.thigh_length),
        Segment::Shank => rod_z(a.shank_length),
        Segment::Foot => {
            let l = a.foot_length;
            SpatialInertia::solid_box(mass, Vec3::new(0.25 * l, 0.0, -0.15 * l), Vec3::new(l, 0.35 * l, 0.3 * l))
        }
    };
    Ok(inertia?)
}

/// Builds the exoskeleton tree grounded at the right foot.
///
/// World frame: origin at the right ankle centre, x forward, y to the left,
/// z up. All joint coordinates are anatomical angles (hip and knee flexion,
/// ankle dorsiflexion positive) on both legs.
pub fn build_exoskeleton(
    anthro: &Anthropometrics,
    total_mass: f64,
    layout: &ModelLayout,
) -> Result<ExoskeletonModel, ModelError> {
    anthro.validate()?;
    layout.validate()?;
    if !(total_mass > 0.0) || !total_mass.is_finite() {
        return Err(ModelError::Invalid(format!("total mass must be positive, got {total_mass}")));
    }
    let segment_budget = total_mass - 6.0 * layout.harness_mass;
    if !(segment_budget > 0.0) {
        return Err(ModelError::Invalid("harness masses exceed the total mass".into()));
    }
    let fractions = layout.mass_fractions.unwrap_or_else(|| MassFractions::by_length(anthro));
    let seg_mass = |s: Segment| fractions.segment(s) * segment_budget;
    let r = layout.link_radius;
    let (lt, ls, w) = (anthro.thigh_length, anthro.shank_length, anthro.pelvis_width);

    let foot_r = BodySpec::new("foot_r", segment_inertia(Segment::Foot, Side::Right, seg_mass(Segment::Foot), anthro, r)?);
    let mut tree = KinematicTree::new(foot_r, Transform::identity());
    let mut anatomical = Vec::new();
    let mut add_anatomical = |tree: &mut KinematicTree,
                              parent: usize,
                              articulation: Articulation,
                              side: Side,
                              attach: Vec3,
                              body: BodySpec|
     -> Result<usize, ModelError> {
        // The right leg is traversed distal to proximal, which reverses the joint axis.
        let axis = match side {
            Side::Right => -articulation.flexion_axis(),
            Side::Left => articulation.flexion_axis(),
        };
        let name = format!("{}_{}", articulation.name(), side.suffix());
        let joint = JointSpec::revolute(name, axis, Transform::from_translation(attach));
        let idx = tree.add_body(parent, joint, body)?;
        anatomical.push(AnatomicalDof { articulation, side, dof: tree.dof_of_body(idx).expect("revolute joint") });
        Ok(idx)
    };

    let shank_r = add_anatomical(
        &mut tree,
        0,
        Articulation::Ankle,
        Side::Right,
        Vec3::zeros(),
        BodySpec::new("shank_r", segment_inertia(Segment::Shank, Side::Right, seg_mass(Segment::Shank), anthro, r)?),
    )?;
    let thigh_r = add_anatomical(
        &mut tree,
        shank_r,
        Articulation::Knee,
        Side::Right,
        Vec3::new(0.0, 0.0, ls),
        BodySpec::new("thigh_r", segment_inertia(Segment::Thigh, Side::Right, seg_mass(Segment::Thigh), anthro, r)?),
    )?;
    let pelvis_mass = fractions.pelvis * segment_budget;
    let pelvis_body = BodySpec::new("pelvis", SpatialInertia::rod(pelvis_mass, Vec3::new(0.0, 0.5 * w, 0.0), w, r, 1)?)
        .with_point("interface", layout.sacrum_point(anthro));
    let pelvis = add_anatomical(&mut tree, thigh_r, Articulation::Hip, Side::Right, Vec3::new(0.0, 0.0, lt), pelvis_body)?;
    let thigh_l = add_anatomical(
        &mut tree,
        pelvis,
        Articulation::Hip,
        Side::Left,
        Vec3::new(0.0, w, 0.0),
        BodySpec::new("thigh_l", segment_inertia(Segment::Thigh, Side::Left, seg_mass(Segment::Thigh), anthro, r)?),
    )?;
    let shank_l = add_anatomical(
        &mut tree,
        thigh_l,
        Articulation::Knee,
        Side::Left,
        Vec3::new(0.0, 0.0, -lt),
        BodySpec::new("shank_l", segment_inertia(Segment::Shank, Side::Left, seg_mass(Segment::Shank), anthro, r)?),
    )?;
    let foot_l = add_anatomical(
        &mut tree,
        shank_l,
        Articulation::Ankle,
        Side::Left,
        Vec3::new(0.0, 0.0, -ls),
        BodySpec::new("foot_l", segment_inertia(Segment::Foot, Side::Left, seg_mass(Segment::Foot), anthro, r)?),
    )?;

    let segment_index = |s: Segment, side: Side| match (s, side) {
        (Segment::Thigh, Side::Right) => thigh_r,
        (Segment::Shank, Side::Right) => shank_r,
        (Segment::Foot, Side::Right) => 0,
        (Segment::Thigh, Side::Left) => thigh_l,
        (Segment::Shank, Side::Left) => shank_l,
        (Segment::Foot, Side::Left) => foot_l,
    };

    let axes = [Vec3::x(), Vec3::y(), Vec3::z()];
    let mut chains = Vec::with_capacity(6);
    for id in InterfaceId::LIMB {
        let (segment, side) = (id.segment().expect("limb interface"), id.side().expect("limb interface"));
        let segment_body = segment_index(segment, side);
        let mount = layout.mount_point(anthro, segment, side);
        let offset = layout.surface_offset(anthro, segment, side);
        let iname = id.name();
        let mut parent = segment_body;
        let mut dofs = [0usize; 6];
        for (k, dof_name) in HARNESS_DOF_NAMES.iter().enumerate() {
            let attach = if k == 0 { Transform::from_translation(mount) } else { Transform::identity() };
            let joint_name = format!("harness_{iname}_{dof_name}");
            let joint = if k < 3 {
                JointSpec::prismatic(joint_name, axes[k], attach)
            } else {
                JointSpec::revolute(joint_name, axes[k - 3], attach)
            }
            .with_armature(layout.regularization);
            let is_cuff = k == 5;
            let inertia = if is_cuff && layout.harness_mass > 0.0 {
                SpatialInertia::point_mass(layout.harness_mass, offset)?
            } else {
                SpatialInertia::zero()
            };
            let mut body = BodySpec::new(format!("harness_{iname}_{dof_name}"), inertia);
            if is_cuff {
                body = body.with_point("interface", offset);
            }
            parent = tree.add_body(parent, joint, body)?;
            dofs[k] = tree.dof_of_body(parent).expect("harness joints move");
        }
        chains.push(HarnessChain {
            interface: id,
            segment_body,
            dofs,
            cuff: InterfacePoint { body: parent, point: offset },
            segment_point: mount + offset,
        });
    }

    let model = ExoskeletonModel {
        tree,
        anthropometrics: anthro.clone(),
        layout: layout.clone(),
        total_mass,
        anatomical,
        chains,
        pelvis: InterfacePoint { body: pelvis, point: layout.sacrum_point(anthro) },
    };
    let mass_error = (model.tree.total_mass() - total_mass).abs();
    if mass_error > 1e-9 * total_mass.max(1.0) {
        return Err(ModelError::Invalid(format!("mass bookkeeping error of {mass_error} kg")));
    }
    Ok(model)
}
