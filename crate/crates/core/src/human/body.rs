use nalgebra::DVector;

use super::gait::{channel_index, GaitInterpolator, Plane, CHANNELS};
use super::HumanError;
use crate::model::{
    forward_kinematics_unchecked, Anthropometrics, Articulation, BodySpec, ExoskeletonModel, InterfaceId, JointSpec,
    KinematicTree, ModelError, ModelLayout, PointState, Segment, Side,
};
use crate::spatial::{SpatialInertia, Transform, Vec3};

/// Pose and twist of the human at each interface, indexed by
/// [`InterfaceId::index`].
pub type AttachmentStates = [PointState; 7];

/// The 18-DoF virtual wearer, grounded at the right foot like the exoskeleton
/// and sharing its segment frames: with zero frontal and transverse angles
/// the two chains coincide.
#[derive(Clone, Debug)]
pub struct HumanModel {
    pub tree: KinematicTree,
    pub anthropometrics: Anthropometrics,
    pub layout: ModelLayout,
    channel_dof: [usize; 18],
    attachments: [(usize, Vec3); 7],
}

fn plane_axis(articulation: Articulation, plane: Plane, side: Side) -> Vec3 {
    match plane {
        Plane::Flexion => articulation.flexion_axis(),
        Plane::Frontal => Vec3::x() * side.mirror(),
        Plane::Transverse => Vec3::z() * side.mirror(),
    }
}

impl HumanModel {
    pub fn new(anthro: &Anthropometrics, layout: &ModelLayout) -> Result<Self, HumanError> {
        anthro.validate()?;
        let (lt, ls, w) = (anthro.thigh_length, anthro.shank_length, anthro.pelvis_width);
        let rod = |m: f64, l: f64, z: f64, axis: usize| -> Result<SpatialInertia, ModelError> {
            let com = if axis == 1 { Vec3::new(0.0, z, 0.0) } else { Vec3::new(0.0, 0.0, z) };
            Ok(SpatialInertia::rod(m, com, l, 0.05, axis)?)
        };
        let foot = |m: f64| -> Result<SpatialInertia, ModelError> {
            let l = anthro.foot_length;
            Ok(SpatialInertia::solid_box(m, Vec3::new(0.25 * l, 0.0, -0.15 * l), Vec3::new(l, 0.35 * l, 0.3 * l))?)
        };
        let mut tree = KinematicTree::new(BodySpec::new("foot_r", foot(anthro.foot_mass)?), Transform::identity());

        // Adds the three rotations of an articulation; the last body is the segment.
        let add = |tree: &mut KinematicTree,
                       parent: usize,
                       art: Articulation,
                       side: Side,
                       attach: Vec3,
                       body: BodySpec|
         -> Result<usize, ModelError> {
            let planes = [Plane::Flexion, Plane::Frontal, Plane::Transverse];
            // The right leg is traversed distal to proximal: reversed order, negated axes.
            let order: Vec<Plane> = match side {
                Side::Left => planes.to_vec(),
                Side::Right => planes.iter().rev().copied().collect(),
            };
            let sign = if side == Side::Right { -1.0 } else { 1.0 };
            let mut p = parent;
            for (k, plane) in order.iter().enumerate() {
                let name = CHANNELS[channel_index(art, *plane, side)];
                let attachment = if k == 0 { Transform::from_translation(attach) } else { Transform::identity() };
                let joint = JointSpec::revolute(name, plane_axis(art, *plane, side) * sign, attachment);
                let b = if k == 2 { body.clone() } else { BodySpec::new(format!("{name}_link"), SpatialInertia::zero()) };
                p = tree.add_body(p, joint, b)?;
            }
            Ok(p)
        };
        let shank_r = add(&mut tree, 0, Articulation::Ankle, Side::Right, Vec3::zeros(), BodySpec::new("shank_r", rod(anthro.shank_mass, ls, 0.5 * ls, 2)?))?;
        let thigh_r = add(&mut tree, shank_r, Articulation::Knee, Side::Right, Vec3::new(0.0, 0.0, ls), BodySpec::new("thigh_r", rod(anthro.thigh_mass, lt, 0.5 * lt, 2)?))?;
        let pelvis = add(&mut tree, thigh_r, Articulation::Hip, Side::Right, Vec3::new(0.0, 0.0, lt), BodySpec::new("pelvis", rod(anthro.pelvis_mass, w, 0.5 * w, 1)?))?;
        let thigh_l = add(&mut tree, pelvis, Articulation::Hip, Side::Left, Vec3::new(0.0, w, 0.0), BodySpec::new("thigh_l", rod(anthro.thigh_mass, lt, -0.5 * lt, 2)?))?;
        let shank_l = add(&mut tree, thigh_l, Articulation::Knee, Side::Left, Vec3::new(0.0, 0.0, -lt), BodySpec::new("shank_l", rod(anthro.shank_mass, ls, -0.5 * ls, 2)?))?;
        let foot_l = add(&mut tree, shank_l, Articulation::Ankle, Side::Left, Vec3::new(0.0, 0.0, -ls), BodySpec::new("foot_l", foot(anthro.foot_mass)?))?;

        let mut channel_dof = [0usize; 18];
        for (c, name) in CHANNELS.iter().enumerate() {
            channel_dof[c] = tree.dof_index(name).expect("every channel has a joint");
        }
        let segment_body = |seg: Segment, side: Side| match (seg, side) {
            (Segment::Thigh, Side::Right) => thigh_r,
            (Segment::Shank, Side::Right) => shank_r,
            (Segment::Foot, Side::Right) => 0,
            (Segment::Thigh, Side::Left) => thigh_l,
            (Segment::Shank, Side::Left) => shank_l,
            (Segment::Foot, Side::Left) => foot_l,
        };
        let mut attachments = [(0usize, Vec3::zeros()); 7];
        for id in InterfaceId::ALL {
            attachments[id.index()] = match (id.segment(), id.side()) {
                (Some(seg), Some(side)) => (segment_body(seg, side), layout.interface_point(anthro, seg, side)),
                _ => (pelvis, layout.sacrum_point(anthro)),
            };
        }
        Ok(HumanModel { tree, anthropometrics: anthro.clone(), layout: layout.clone(), channel_dof, attachments })
    }

    /// Wearer matching the exoskeleton's anthropometrics and interface layout.
    pub fn for_exoskeleton(exo: &ExoskeletonModel) -> Result<Self, HumanError> {
        Self::new(&exo.anthropometrics, &exo.layout)
    }

    pub fn attachment(&self, id: InterfaceId) -> (usize, Vec3) {
        self.attachments[id.index()]
    }

    /// Tree coordinates from channel values.
    pub fn coordinates(&self, channels: &[f64; 18]) -> DVector<f64> {
        let mut q = DVector::zeros(self.tree.dof_count());
        for (c, &d) in self.channel_dof.iter().enumerate() {
            q[d] = channels[c];
        }
        q
    }

    pub fn states(&self, q: &[f64; 18], qdot: &[f64; 18]) -> AttachmentStates {
        let kin = forward_kinematics_unchecked(&self.tree, &self.coordinates(q), &self.coordinates(qdot));
        std::array::from_fn(|i| kin.point_state(self.attachments[i].0, &self.attachments[i].1))
    }

    pub fn states_at(&self, gait: &GaitInterpolator, t: f64) -> Result<AttachmentStates, HumanError> {
        let (q, qd) = gait.eval(t)?;
        Ok(self.states(&q, &qd))
    }
}

/// Interface poses and twists of the wearer at time `t`.
pub fn human_attachment_states(model: &HumanModel, gait: &GaitInterpolator, t: f64) -> Result<AttachmentStates, HumanError> {
    model.states_at(gait, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::human::{synthetic_gait, SyntheticGait};
    use crate::model::{build_exoskeleton, forward_kinematics, Percentile, SystemState};
    use approx::assert_relative_eq;

    fn p50() -> HumanModel {
        HumanModel::new(&Anthropometrics::percentile(Percentile::P50), &ModelLayout::default()).unwrap()
    }

    #[test]
    fn standing_heights_are_segment_sums() {
        let h = p50();
        let a = &h.anthropometrics;
        let s = h.states(&[0.0; 18], &[0.0; 18]);
        let (_, hip_point) = h.attachment(InterfaceId::Pelvis);
        assert_relative_eq!(s[InterfaceId::Pelvis.index()].pose.translation.z, a.shank_length + a.thigh_length + hip_point.z, epsilon = 1e-12);
        let thigh_l = s[InterfaceId::ThighL.index()].pose.translation;
        assert_relative_eq!(thigh_l.z, a.shank_length + a.thigh_length * (1.0 - h.layout.thigh_attachment), epsilon = 1e-12);
        assert!(s.iter().all(|p| p.twist.to_vector().norm() == 0.0));
    }

    #[test]
    fn sagittal_motion_matches_exoskeleton() {
        let h = p50();
        let exo = build_exoskeleton(&h.anthropometrics, 19.0, &h.layout).unwrap();
        let mut ch = [0.0; 18];
        let mut q = DVector::zeros(42);
        for (i, (art, side)) in [(Articulation::Hip, Side::Right), (Articulation::Knee, Side::Left), (Articulation::Ankle, Side::Right), (Articulation::Hip, Side::Left)].iter().enumerate() {
            let v = 0.2 + 0.1 * i as f64;
            ch[channel_index(*art, Plane::Flexion, *side)] = v;
            q[exo.anatomical_dof(*art, *side)] = v;
        }
        let hs = h.states(&ch, &[0.0; 18]);
        let kin = forward_kinematics(&exo.tree, &SystemState::new(q, DVector::zeros(42), 0.0)).unwrap();
        for c in &exo.chains {
            let e = kin.point_state(c.cuff.body, &c.cuff.point).pose;
            let hp = hs[c.interface.index()].pose;
            assert_relative_eq!(e.translation, hp.translation, epsilon = 1e-12);
            assert!(e.rotation.inverse().compose(&hp.rotation).angle() < 1e-12);
        }
    }

    #[test]
    fn anatomical_sign_conventions() {
        let h = p50();
        let mut ch = [0.0; 18];
        ch[channel_index(Articulation::Hip, Plane::Frontal, Side::Left)] = 0.2;
        let s = h.states(&ch, &[0.0; 18]);
        // Left hip adduction moves the left shank towards the midline (−y).
        let shank_l = s[InterfaceId::ShankL.index()].pose.translation;
        let shank_l0 = h.states(&[0.0; 18], &[0.0; 18])[InterfaceId::ShankL.index()].pose.translation;
        assert!(shank_l.y < shank_l0.y - 0.05);
    }

    #[test]
    fn twists_match_pose_differences() {
        let h = p50();
        let gait = synthetic_gait(&SyntheticGait::default()).unwrap().interpolator();
        let dt = 1e-6;
        for t in [0.1, 0.37, 0.8] {
            let s = h.states_at(&gait, t).unwrap();
            let (sp, sm) = (h.states_at(&gait, t + dt).unwrap(), h.states_at(&gait, t - dt).unwrap());
            for i in 0..7 {
                let lin = (sp[i].pose.translation - sm[i].pose.translation) / (2.0 * dt);
                let ang = sp[i].pose.rotation.compose(&sm[i].pose.rotation.inverse()).log().vector / (2.0 * dt);
                assert!((lin - s[i].twist.linear).norm() < 1e-4);
                assert!((ang - s[i].twist.angular).norm() < 1e-4);
            }
        }
        assert!(h.states_at(&gait, 10.0).is_err());
    }

    #[test]
    fn attachments_scale_with_segments() {
        let layout = ModelLayout::default();
        let lo = HumanModel::new(&Anthropometrics::percentile(Percentile::P025), &layout).unwrap();
        let hi = HumanModel::new(&Anthropometrics::percentile(Percentile::P975), &layout).unwrap();
        let ratio = hi.anthropometrics.shank_length / lo.anthropometrics.shank_length;
        let z = |m: &HumanModel| m.states(&[0.0; 18], &[0.0; 18])[InterfaceId::ShankR.index()].pose.translation.z;
        assert_relative_eq!(z(&hi) / z(&lo), ratio, epsilon = 1e-12);
    }
}
