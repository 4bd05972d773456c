use nalgebra::{DMatrix, DVector};

use super::episode::PreparedEpisode;
use super::trace::Sample;
use super::{ActuationPolicy, InterfaceImpedances};
use crate::dynamics::{gravity_forces, DynamicsError, ForceModel, GeneralizedForces, Linearization};
use crate::harness::{interaction_wrench, lock_torque, world_impedance_matrices};
use crate::model::{forward_kinematics_unchecked, InterfaceId, Kinematics, KinematicTree};
use crate::spatial::{SpatialForce, Vec3};

/// Applied forces on the exoskeleton: interface impedances, lock torques and
/// actuation. Optionally captures the trace sample of the state it is
/// evaluated at.
pub struct CoupledForces<'a> {
    episode: &'a PreparedEpisode,
    impedances: &'a InterfaceImpedances,
    capture: bool,
    captured: Option<Sample>,
}

impl<'a> CoupledForces<'a> {
    pub fn new(episode: &'a PreparedEpisode, impedances: &'a InterfaceImpedances) -> Self {
        CoupledForces { episode, impedances, capture: false, captured: None }
    }

    /// Records the next evaluation as a trace sample.
    pub fn capture_next(&mut self) {
        self.capture = true;
        self.captured = None;
    }

    pub fn take_sample(&mut self) -> Option<Sample> {
        self.captured.take()
    }
}

fn dot6(c: &[f64; 6], w: &SpatialForce) -> f64 {
    c[0] * w.torque.x + c[1] * w.torque.y + c[2] * w.torque.z + c[3] * w.force.x + c[4] * w.force.y + c[5] * w.force.z
}

/// Adds `Jᵀ M J` for a sparse point Jacobian given as columns.
fn add_projected(target: &mut DMatrix<f64>, cols: &[(usize, [f64; 6])], m: &DMatrix<f64>) {
    let mc: Vec<[f64; 6]> = cols
        .iter()
        .map(|(_, c)| std::array::from_fn(|r| (0..6).map(|k| m[(r, k)] * c[k]).sum()))
        .collect();
    for (da, ca) in cols {
        for ((db, _), mb) in cols.iter().zip(&mc) {
            target[(*da, *db)] += (0..6).map(|k| ca[k] * mb[k]).sum::<f64>();
        }
    }
}

pub(super) fn cuff_wrench(
    episode: &PreparedEpisode,
    impedances: &InterfaceImpedances,
    kin: &Kinematics,
    human: &crate::human::AttachmentStates,
    id: InterfaceId,
) -> Option<(crate::harness::InteractionWrench, crate::model::PointState)> {
    let params = impedances.get(id);
    if !episode.is_connected(id) || params.is_zero() {
        return None;
    }
    let (body, point) = episode.exo_point(id);
    let e = kin.point_state(body, &point);
    let h = &human[id.index()];
    Some((interaction_wrench(params, &h.pose, &e.pose, &h.twist, &e.twist), e))
}

impl ForceModel for CoupledForces<'_> {
    fn evaluate(
        &mut self,
        t: f64,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
        mut linearization: Option<&mut Linearization>,
    ) -> Result<GeneralizedForces, DynamicsError> {
        let ep = self.episode;
        let tree: &KinematicTree = &ep.exo.tree;
        let human = ep.human_states_at(t)?;
        let kin = forward_kinematics_unchecked(tree, q, qdot);
        let mut f = DVector::zeros(tree.dof_count());
        let mut wrenches = [[0.0; 6]; 7];
        for id in InterfaceId::ALL {
            let Some((iw, e)) = cuff_wrench(ep, self.impedances, &kin, &human, id) else { continue };
            let v = iw.wrench.to_vector();
            wrenches[id.index()] = std::array::from_fn(|i| v[i]);
            let w = iw.world(&e.pose);
            let cols = kin.jacobian_columns(tree, ep.exo_point(id).0, &e.pose.translation);
            for (d, c) in &cols {
                f[*d] += dot6(c, &w);
            }
            if let Some(lin) = linearization.as_deref_mut() {
                let (k, d) = world_impedance_matrices(self.impedances.get(id), &e.pose);
                add_projected(&mut lin.stiffness, &cols, &k);
                add_projected(&mut lin.damping, &cols, &d);
            }
        }
        let lock = &ep.lock;
        f -= lock_torque(lock, q, qdot);
        if let Some(lin) = linearization.as_deref_mut() {
            for i in 0..f.len() {
                lin.stiffness[(i, i)] += lock.stiffness[i];
                lin.damping[(i, i)] += lock.damping[i];
            }
        }
        if ep.settings.actuation == ActuationPolicy::GravityCompensation {
            let g = gravity_forces(tree, q, &ep.settings.gravity)?;
            for &d in &ep.actuated {
                f[d] += g[d];
            }
        }
        if self.capture {
            self.capture = false;
            self.captured = Some(ep.sample(t, q, qdot, &kin, &human, wrenches));
        }
        Ok(f)
    }
}

/// Human minus exoskeleton position of each limb interface, in the
/// exoskeleton interface frame.
pub(super) fn interface_distances(ep: &PreparedEpisode, kin: &Kinematics, human: &crate::human::AttachmentStates) -> [f64; 18] {
    let mut out = [0.0; 18];
    for id in InterfaceId::LIMB {
        let (body, point) = ep.exo_point(id);
        let e = kin.point_state(body, &point);
        let d: Vec3 = e.pose.rotation.inverse_rotate(&(human[id.index()].pose.translation - e.pose.translation));
        out[3 * id.index()..3 * id.index() + 3].copy_from_slice(d.as_slice());
    }
    out
}
