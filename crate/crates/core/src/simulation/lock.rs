use nalgebra::DVector;

use super::SimulationError;
use crate::dynamics::{integrate_step, DynamicsError, ForceModel, GeneralizedForces, IntegratorKind, Linearization};
use crate::harness::{lock_torque, HarnessConfig, LockGains, LockSettings};
use crate::model::{forward_kinematics_unchecked, ExoskeletonModel, InterfaceId, SystemState};
use crate::spatial::{SpatialForce, Vec3};

/// Stiffness holding the anatomical joints in place during a lock test.
const HOLD_STIFFNESS: f64 = 1e9;

struct LoadedHarness<'a> {
    exo: &'a ExoskeletonModel,
    lock: LockGains,
    body: usize,
    point: Vec3,
    load: SpatialForce,
    hold: Vec<usize>,
    hold_damping: f64,
}

impl ForceModel for LoadedHarness<'_> {
    fn evaluate(
        &mut self,
        _t: f64,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
        linearization: Option<&mut Linearization>,
    ) -> Result<GeneralizedForces, DynamicsError> {
        let tree = &self.exo.tree;
        let kin = forward_kinematics_unchecked(tree, q, qdot);
        let at = kin.poses[self.body].transform_point(&self.point);
        let mut f = -lock_torque(&self.lock, q, qdot);
        for (d, c) in kin.jacobian_columns(tree, self.body, &at) {
            f[d] += c[0] * self.load.torque.x + c[1] * self.load.torque.y + c[2] * self.load.torque.z;
            f[d] += c[3] * self.load.force.x + c[4] * self.load.force.y + c[5] * self.load.force.z;
        }
        for &d in &self.hold {
            f[d] -= HOLD_STIFFNESS * q[d] + self.hold_damping * qdot[d];
        }
        if let Some(lin) = linearization {
            for i in 0..f.len() {
                lin.stiffness[(i, i)] += self.lock.stiffness[i];
                lin.damping[(i, i)] += self.lock.damping[i];
            }
            for &d in &self.hold {
                lin.stiffness[(d, d)] += HOLD_STIFFNESS;
                lin.damping[(d, d)] += self.hold_damping;
            }
        }
        Ok(f)
    }
}

/// Largest displacement of the locked DoFs of one harness chain after
/// `duration` seconds under a constant world-aligned `load` at its interface
/// point, with the anatomical joints held and no gravity.
pub fn locked_excursion(
    exo: &ExoskeletonModel,
    harness: &HarnessConfig,
    lock: &LockSettings,
    interface: InterfaceId,
    load: SpatialForce,
    duration: f64,
    dt: f64,
) -> Result<f64, SimulationError> {
    let chain = exo
        .chain(interface)
        .ok_or_else(|| SimulationError::Invalid(format!("{} has no harness chain", interface.name())))?;
    let gains = LockGains::for_model(exo, harness, lock)?;
    let locked: Vec<usize> = chain.dofs.iter().copied().filter(|&d| gains.is_locked(d)).collect();
    if locked.is_empty() {
        return Err(SimulationError::Invalid(format!("no locked DoF on {}", interface.name())));
    }
    let hold: Vec<usize> = exo.anatomical.iter().map(|a| a.dof).collect();
    let mut model = LoadedHarness {
        exo,
        lock: gains,
        body: chain.cuff.body,
        point: chain.cuff.point,
        load,
        hold,
        hold_damping: 2.0 * (HOLD_STIFFNESS * exo.total_mass).sqrt(),
    };
    let n = exo.dof_count();
    let mut state = SystemState::zeros(n);
    let steps = (duration / dt).ceil() as usize;
    for _ in 0..steps {
        state = integrate_step(&exo.tree, &state, &mut model, dt, IntegratorKind::SemiImplicitEuler, &Vec3::zeros())?;
    }
    Ok(locked.iter().map(|&d| state.q[d].abs()).fold(0.0, f64::max))
}
