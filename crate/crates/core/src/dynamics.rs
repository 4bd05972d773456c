//! Joint-space dynamics of a kinematic tree: `B(q) q̈ + C(q, q̇) q̇ + g(q) = τ`,
//! plus time integration.

use nalgebra::{Cholesky, DMatrix, DVector, Matrix6, SymmetricEigen};
use thiserror::Error;

use crate::model::{KinematicTree, ModelError, SystemState};
use crate::spatial::{SpatialForce, SpatialMotion, Transform, Vec3};

pub type GeneralizedForces = DVector<f64>;

pub const STANDARD_GRAVITY: f64 = 9.81;

pub fn default_gravity() -> Vec3 {
    Vec3::new(0.0, 0.0, -STANDARD_GRAVITY)
}

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("mass matrix is not positive definite; smallest diagonal entry {value:e} at DoF {dof} ('{joint}')")]
    NotPositiveDefinite { dof: usize, joint: String, value: f64 },
    #[error("state became non-finite after t = {time} s")]
    Diverged { time: f64, last: Box<SystemState> },
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
}

/// A wrench acting on `body`, applied at `point` (body frame). Torque and
/// force components are world-aligned and refer to the application point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExternalWrench {
    pub body: usize,
    pub point: Vec3,
    pub wrench: SpatialForce,
}

#[derive(Clone, Debug)]
pub struct DynamicsTerms {
    pub mass_matrix: DMatrix<f64>,
    /// `C q̇ + g`
    pub bias: DVector<f64>,
    pub gravity: DVector<f64>,
}

fn joint_transforms(tree: &KinematicTree, q: &DVector<f64>) -> Vec<Transform> {
    (0..tree.body_count())
        .map(|i| {
            let qi = tree.dof_of_body(i).map_or(0.0, |d| q[d]);
            tree.joint(i).child_in_parent(qi)
        })
        .collect()
}

fn world_poses(tree: &KinematicTree, xs: &[Transform]) -> Vec<Transform> {
    let mut poses = Vec::with_capacity(xs.len());
    poses.push(*tree.base());
    for i in 1..xs.len() {
        let p = tree.parent(i).expect("non-root body has a parent");
        poses.push(poses[p].compose(&xs[i]));
    }
    poses
}

fn check_dims(tree: &KinematicTree, vs: &[&DVector<f64>]) -> Result<(), ModelError> {
    let n = tree.dof_count();
    for v in vs {
        if v.len() != n {
            return Err(ModelError::DimensionMismatch { expected: n, got: v.len() });
        }
    }
    Ok(())
}

/// Recursive Newton–Euler: returns `B q̈ + C q̇ + g − Σ Jᵀ w`, including the
/// joint armature contribution.
pub fn inverse_dynamics(
    tree: &KinematicTree,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    qddot: &DVector<f64>,
    gravity: &Vec3,
    external: &[ExternalWrench],
) -> Result<GeneralizedForces, DynamicsError> {
    check_dims(tree, &[q, qdot, qddot])?;
    for w in external {
        if w.body >= tree.body_count() {
            return Err(ModelError::UnknownBody(format!("#{}", w.body)).into());
        }
    }
    Ok(rnea(tree, q, qdot, Some(qddot), gravity, external))
}

fn rnea(
    tree: &KinematicTree,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    qddot: Option<&DVector<f64>>,
    gravity: &Vec3,
    external: &[ExternalWrench],
) -> DVector<f64> {
    let nb = tree.body_count();
    let xs = joint_transforms(tree, q);
    let mut v = vec![SpatialMotion::zero(); nb];
    let mut a = vec![SpatialMotion::zero(); nb];
    let mut f = vec![SpatialForce::zero(); nb];
    // Gravity enters as a fictitious upward acceleration of the root.
    a[0] = SpatialMotion::new(Vec3::zeros(), -tree.base().rotation.inverse_rotate(gravity));
    for i in 1..nb {
        let p = tree.parent(i).expect("non-root body has a parent");
        let x = &xs[i];
        let mut vi = x.inverse_apply_motion(&v[p]);
        let mut ai = x.inverse_apply_motion(&a[p]);
        if let Some(d) = tree.dof_of_body(i) {
            let s = tree.joint(i).subspace();
            let vj = s * qdot[d];
            vi += vj;
            ai += vi.cross_motion(&vj);
            if let Some(qdd) = qddot {
                ai += s * qdd[d];
            }
        }
        let inertia = &tree.body(i).inertia;
        f[i] = inertia.momentum(&ai) + vi.cross_force(&inertia.momentum(&vi));
        v[i] = vi;
        a[i] = ai;
    }
    if !external.is_empty() {
        let poses = world_poses(tree, &xs);
        for w in external {
            let r = &poses[w.body].rotation;
            let local = SpatialForce::new(r.inverse_rotate(&w.wrench.torque), r.inverse_rotate(&w.wrench.force));
            // Move the application point to the body origin.
            f[w.body] -= Transform::from_translation(w.point).apply_force(&local);
        }
    }
    let mut tau = DVector::zeros(tree.dof_count());
    for i in (1..nb).rev() {
        if let Some(d) = tree.dof_of_body(i) {
            let joint = tree.joint(i);
            tau[d] = joint.subspace().dot(&f[i]);
            if let Some(qdd) = qddot {
                tau[d] += joint.armature * qdd[d];
            }
        }
        let p = tree.parent(i).expect("non-root body has a parent");
        let fp = xs[i].apply_force(&f[i]);
        f[p] += fp;
    }
    tau
}

/// Composite-rigid-body joint-space inertia matrix, armature included.
pub fn mass_matrix(tree: &KinematicTree, q: &DVector<f64>) -> Result<DMatrix<f64>, DynamicsError> {
    check_dims(tree, &[q])?;
    Ok(crba(tree, q))
}

fn crba(tree: &KinematicTree, q: &DVector<f64>) -> DMatrix<f64> {
    let nb = tree.body_count();
    let n = tree.dof_count();
    let xs = joint_transforms(tree, q);
    // Motion transform parent -> child coordinates, as a matrix.
    let down: Vec<Matrix6<f64>> = xs.iter().map(|x| x.inverse().motion_matrix()).collect();
    let mut ic: Vec<Matrix6<f64>> = tree.bodies().iter().map(|b| b.inertia.matrix()).collect();
    for i in (1..nb).rev() {
        let p = tree.parent(i).expect("non-root body has a parent");
        let contrib = down[i].transpose() * ic[i] * down[i];
        ic[p] += contrib;
    }
    let mut h = DMatrix::zeros(n, n);
    for i in 1..nb {
        let Some(di) = tree.dof_of_body(i) else { continue };
        let si = tree.joint(i).subspace().to_vector();
        let mut fvec = ic[i] * si;
        h[(di, di)] = si.dot(&fvec) + tree.joint(i).armature;
        let mut j = i;
        while let Some(p) = tree.parent(j) {
            fvec = down[j].transpose() * fvec;
            j = p;
            if let Some(dj) = tree.dof_of_body(j) {
                let sj = tree.joint(j).subspace().to_vector();
                let v = sj.dot(&fvec);
                h[(di, dj)] = v;
                h[(dj, di)] = v;
            }
        }
    }
    h
}

/// `C q̇ + g`: inverse dynamics with zero acceleration and no external wrenches.
pub fn bias_forces(
    tree: &KinematicTree,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    gravity: &Vec3,
) -> Result<GeneralizedForces, DynamicsError> {
    check_dims(tree, &[q, qdot])?;
    Ok(rnea(tree, q, qdot, None, gravity, &[]))
}

pub fn gravity_forces(tree: &KinematicTree, q: &DVector<f64>, gravity: &Vec3) -> Result<GeneralizedForces, DynamicsError> {
    check_dims(tree, &[q])?;
    Ok(rnea(tree, q, &DVector::zeros(tree.dof_count()), None, gravity, &[]))
}

pub fn dynamics_terms(
    tree: &KinematicTree,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    gravity: &Vec3,
) -> Result<DynamicsTerms, DynamicsError> {
    check_dims(tree, &[q, qdot])?;
    Ok(DynamicsTerms {
        mass_matrix: crba(tree, q),
        bias: rnea(tree, q, qdot, None, gravity, &[]),
        gravity: rnea(tree, q, &DVector::zeros(tree.dof_count()), None, gravity, &[]),
    })
}

/// `Σ Jᵀ w` for a set of external wrenches.
pub fn wrench_generalized_forces(
    tree: &KinematicTree,
    q: &DVector<f64>,
    external: &[ExternalWrench],
) -> Result<GeneralizedForces, DynamicsError> {
    let zero = DVector::zeros(tree.dof_count());
    let base = rnea(tree, q, &zero, None, &Vec3::zeros(), &[]);
    Ok(base - inverse_dynamics(tree, q, &zero, &zero, &Vec3::zeros(), external)?)
}

fn factor(tree: &KinematicTree, m: DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>, DynamicsError> {
    let diag = m.diagonal();
    Cholesky::new(m).ok_or_else(|| {
        let (dof, value) = diag.iter().copied().enumerate().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap_or((0, 0.0));
        DynamicsError::NotPositiveDefinite { dof, joint: tree.dof_joint(dof).name.clone(), value }
    })
}

/// Solves `B q̈ = τ + Σ Jᵀ w − M_lock − (C q̇ + g)` by Cholesky factorization.
pub fn forward_dynamics(
    tree: &KinematicTree,
    state: &SystemState,
    tau: &DVector<f64>,
    external: &[ExternalWrench],
    lock_torques: &DVector<f64>,
    gravity: &Vec3,
) -> Result<DVector<f64>, DynamicsError> {
    check_dims(tree, &[&state.q, &state.qdot, tau, lock_torques])?;
    let zero = DVector::zeros(tree.dof_count());
    // RNEA with q̈ = 0 and the wrenches gives C q̇ + g − Σ Jᵀ w in one pass.
    let rhs = tau - lock_torques - inverse_dynamics(tree, &state.q, &state.qdot, &zero, gravity, external)?;
    Ok(factor(tree, crba(tree, &state.q))?.solve(&rhs))
}

/// `½ q̇ᵀ B q̇`, armature included.
pub fn kinetic_energy(tree: &KinematicTree, q: &DVector<f64>, qdot: &DVector<f64>) -> f64 {
    let kin = crate::model::forward_kinematics_unchecked(tree, q, qdot);
    let mut e = 0.0;
    for (i, body) in tree.bodies().iter().enumerate() {
        if body.inertia.is_zero() {
            continue;
        }
        let pose = &kin.poses[i];
        let t = &kin.twists[i];
        let local = SpatialMotion::new(pose.rotation.inverse_rotate(&t.angular), pose.rotation.inverse_rotate(&t.linear));
        e += body.inertia.kinetic_energy(&local);
    }
    e + 0.5 * tree.armature().iter().zip(qdot.iter()).map(|(a, v)| a * v * v).sum::<f64>()
}

/// Gravitational potential energy relative to the world origin.
pub fn potential_energy(tree: &KinematicTree, q: &DVector<f64>, gravity: &Vec3) -> f64 {
    let kin = crate::model::forward_kinematics_unchecked(tree, q, &DVector::zeros(tree.dof_count()));
    tree.bodies()
        .iter()
        .enumerate()
        .map(|(i, b)| -b.inertia.mass * gravity.dot(&kin.poses[i].transform_point(&b.inertia.com)))
        .sum()
}

/// Partial derivatives of the applied forces, sign-flipped:
/// `K = −∂f/∂q`, `D = −∂f/∂q̇`.
#[derive(Clone, Debug)]
pub struct Linearization {
    pub stiffness: DMatrix<f64>,
    pub damping: DMatrix<f64>,
}

impl Linearization {
    pub fn zeros(n: usize) -> Self {
        Linearization { stiffness: DMatrix::zeros(n, n), damping: DMatrix::zeros(n, n) }
    }
}

/// Source of all applied generalized forces except gravity and velocity
/// products: actuation, interaction wrenches projected through `Jᵀ`, and
/// (negated) lock torques.
pub trait ForceModel {
    fn evaluate(
        &mut self,
        t: f64,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
        linearization: Option<&mut Linearization>,
    ) -> Result<GeneralizedForces, DynamicsError>;
}

/// Adapts a closure without linearization (the implicit scheme then treats
/// the forces explicitly).
pub struct FnForces<F>(pub F);

impl<F> ForceModel for FnForces<F>
where
    F: FnMut(f64, &DVector<f64>, &DVector<f64>) -> GeneralizedForces,
{
    fn evaluate(
        &mut self,
        t: f64,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
        _linearization: Option<&mut Linearization>,
    ) -> Result<GeneralizedForces, DynamicsError> {
        Ok((self.0)(t, q, qdot))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorKind {
    /// Classic explicit fourth-order Runge–Kutta.
    Rk4,
    /// Linearly implicit Euler on velocities, then `q ← q + dt q̇'`.
    SemiImplicitEuler,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integrator {
    pub kind: IntegratorKind,
    pub dt: f64,
    pub gravity: Vec3,
}

impl Integrator {
    pub fn new(kind: IntegratorKind, dt: f64) -> Self {
        Integrator { kind, dt, gravity: default_gravity() }
    }

    pub fn with_gravity(mut self, gravity: Vec3) -> Self {
        self.gravity = gravity;
        self
    }

    pub fn step(
        &self,
        tree: &KinematicTree,
        state: &SystemState,
        forces: &mut dyn ForceModel,
    ) -> Result<SystemState, DynamicsError> {
        integrate_step(tree, state, forces, self.dt, self.kind, &self.gravity)
    }
}

/// Advances `state` by `dt`. A non-finite result is reported as
/// [`DynamicsError::Diverged`] carrying the last finite state.
pub fn integrate_step(
    tree: &KinematicTree,
    state: &SystemState,
    forces: &mut dyn ForceModel,
    dt: f64,
    kind: IntegratorKind,
    gravity: &Vec3,
) -> Result<SystemState, DynamicsError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(DynamicsError::InvalidStep(dt));
    }
    state.check(tree)?;
    let next = match kind {
        IntegratorKind::Rk4 => rk4(tree, state, forces, dt, gravity),
        IntegratorKind::SemiImplicitEuler => linearly_implicit_euler(tree, state, forces, dt, gravity),
    };
    match next {
        Ok(s) if s.is_finite() => Ok(s),
        Ok(_) => Err(DynamicsError::Diverged { time: state.time, last: Box::new(state.clone()) }),
        Err(e) => Err(e),
    }
}

fn acceleration(
    tree: &KinematicTree,
    t: f64,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
    forces: &mut dyn ForceModel,
    gravity: &Vec3,
) -> Result<DVector<f64>, DynamicsError> {
    let f = forces.evaluate(t, q, qdot, None)?;
    if !f.iter().all(|v| v.is_finite()) {
        return Ok(DVector::from_element(q.len(), f64::NAN));
    }
    let rhs = f - rnea(tree, q, qdot, None, gravity, &[]);
    Ok(factor(tree, crba(tree, q))?.solve(&rhs))
}

fn rk4(
    tree: &KinematicTree,
    s: &SystemState,
    forces: &mut dyn ForceModel,
    dt: f64,
    gravity: &Vec3,
) -> Result<SystemState, DynamicsError> {
    let (t, q, v) = (s.time, &s.q, &s.qdot);
    let a1 = acceleration(tree, t, q, v, forces, gravity)?;
    let (q2, v2) = (q + v * (0.5 * dt), v + &a1 * (0.5 * dt));
    let a2 = acceleration(tree, t + 0.5 * dt, &q2, &v2, forces, gravity)?;
    let (q3, v3) = (q + &v2 * (0.5 * dt), v + &a2 * (0.5 * dt));
    let a3 = acceleration(tree, t + 0.5 * dt, &q3, &v3, forces, gravity)?;
    let (q4, v4) = (q + &v3 * dt, v + &a3 * dt);
    let a4 = acceleration(tree, t + dt, &q4, &v4, forces, gravity)?;
    let q_next = q + (v + &v2 * 2.0 + &v3 * 2.0 + &v4) * (dt / 6.0);
    let v_next = v + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (dt / 6.0);
    Ok(SystemState::new(q_next, v_next, t + dt))
}

fn linearly_implicit_euler(
    tree: &KinematicTree,
    s: &SystemState,
    forces: &mut dyn ForceModel,
    dt: f64,
    gravity: &Vec3,
) -> Result<SystemState, DynamicsError> {
    let n = tree.dof_count();
    let mut lin = Linearization::zeros(n);
    let f = forces.evaluate(s.time, &s.q, &s.qdot, Some(&mut lin))?;
    if !f.iter().all(|v| v.is_finite()) {
        let nan = DVector::from_element(n, f64::NAN);
        return Ok(SystemState::new(nan.clone(), nan, s.time + dt));
    }
    let bias = rnea(tree, &s.q, &s.qdot, None, gravity, &[]);
    let mut lhs = crba(tree, &s.q);
    lhs += &lin.damping * dt + &lin.stiffness * (dt * dt);
    let rhs = (f - bias - &lin.stiffness * &s.qdot * dt) * dt;
    let dv = match Cholesky::new(lhs.clone()) {
        Some(c) => c.solve(&rhs),
        None => lhs.lu().solve(&rhs).ok_or_else(|| {
            let dof = 0;
            DynamicsError::NotPositiveDefinite { dof, joint: tree.dof_joint(dof).name.clone(), value: f64::NAN }
        })?,
    };
    let v_next = &s.qdot + dv;
    let q_next = &s.q + &v_next * dt;
    Ok(SystemState::new(q_next, v_next, s.time + dt))
}

/// Explicit-integration stability margin for a linearized force model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityReport {
    /// Highest undamped natural frequency of `B⁻¹K` [rad/s].
    pub omega_max: f64,
    /// Largest eigenvalue of `B⁻¹D` [1/s].
    pub damping_rate_max: f64,
    pub dt: f64,
}

impl StabilityReport {
    /// RK4 limit used at start-up: both `ω_max dt` and `μ_max dt` below 2.5.
    pub const RK4_LIMIT: f64 = 2.5;

    pub fn rk4_stable(&self) -> bool {
        self.omega_max * self.dt <= Self::RK4_LIMIT && self.damping_rate_max * self.dt <= Self::RK4_LIMIT
    }
}

pub fn stability_report(
    tree: &KinematicTree,
    q: &DVector<f64>,
    lin: &Linearization,
    dt: f64,
) -> Result<StabilityReport, DynamicsError> {
    check_dims(tree, &[q])?;
    let chol = factor(tree, crba(tree, q))?;
    let l = chol.l();
    let max_gen_eig = |m: &DMatrix<f64>| -> f64 {
        let sym = (m + m.transpose()) * 0.5;
        let x = l.solve_lower_triangular(&sym).expect("factor is invertible");
        let y = l.solve_lower_triangular(&x.transpose()).expect("factor is invertible");
        let y = (&y + y.transpose()) * 0.5;
        SymmetricEigen::new(y).eigenvalues.max().max(0.0)
    };
    Ok(StabilityReport {
        omega_max: max_gen_eig(&lin.stiffness).sqrt(),
        damping_rate_max: max_gen_eig(&lin.damping),
        dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BodySpec, JointSpec};
    use crate::spatial::SpatialInertia;
    use approx::assert_relative_eq;

    fn tree_with(joint: JointSpec, inertia: SpatialInertia) -> KinematicTree {
        let mut t = KinematicTree::new(BodySpec::new("ground", SpatialInertia::zero()), Transform::identity());
        t.add_body(0, joint, BodySpec::new("link", inertia).with_point("tip", Vec3::x())).unwrap();
        t
    }

    fn v1(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    #[test]
    fn prismatic_point_mass() {
        let t = tree_with(
            JointSpec::prismatic("slide", Vec3::z(), Transform::identity()),
            SpatialInertia::point_mass(2.5, Vec3::new(0.3, 0.0, 0.0)).unwrap(),
        );
        assert_relative_eq!(mass_matrix(&t, &v1(0.1)).unwrap()[(0, 0)], 2.5, epsilon = 1e-12);
        let qdd = forward_dynamics(&t, &SystemState::zeros(1), &v1(0.0), &[], &v1(0.0), &default_gravity()).unwrap();
        assert_relative_eq!(qdd[0], -9.81, epsilon = 1e-12);
    }

    #[test]
    fn rod_about_hinge() {
        let (m, l, r) = (1.5, 0.8, 0.02);
        let rod = SpatialInertia::rod(m, Vec3::new(l / 2.0, 0.0, 0.0), l, r, 0).unwrap();
        let t = tree_with(JointSpec::revolute("hinge", Vec3::z(), Transform::identity()), rod);
        let expected = m * (3.0 * r * r + l * l) / 12.0 + m * l * l / 4.0;
        assert_relative_eq!(mass_matrix(&t, &v1(0.7)).unwrap()[(0, 0)], expected, epsilon = 1e-12);
    }

    #[test]
    fn horizontal_pendulum_statics() {
        let (m, l) = (2.0, 0.6);
        let t = tree_with(
            JointSpec::revolute("hinge", Vec3::y(), Transform::identity()),
            SpatialInertia::point_mass(m, Vec3::new(l, 0.0, 0.0)).unwrap(),
        );
        let g = bias_forces(&t, &v1(0.0), &v1(0.0), &default_gravity()).unwrap();
        // Gravity on a mass at +x acts about +y; holding it needs −m g l.
        assert_relative_eq!(g[0], -m * 9.81 * l, epsilon = 1e-12);
        let z = inverse_dynamics(&t, &v1(0.3), &v1(0.0), &v1(0.0), &Vec3::zeros(), &[]).unwrap();
        assert_eq!(z[0], 0.0);
        // Holding torque gives zero acceleration.
        let qdd = forward_dynamics(&t, &SystemState::zeros(1), &g, &[], &v1(0.0), &default_gravity()).unwrap();
        assert!(qdd[0].abs() < 1e-10);
    }

    #[test]
    fn external_wrench_maps_through_jacobian_transpose() {
        let t = tree_with(
            JointSpec::revolute("hinge", Vec3::z(), Transform::identity()),
            SpatialInertia::point_mass(1.0, Vec3::x()).unwrap(),
        );
        let w = ExternalWrench { body: 1, point: Vec3::x(), wrench: SpatialForce::new(Vec3::zeros(), Vec3::new(0.0, 3.0, 0.0)) };
        let gf = wrench_generalized_forces(&t, &v1(0.0), &[w]).unwrap();
        assert_relative_eq!(gf[0], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn singular_mass_matrix_names_dof() {
        let t = tree_with(JointSpec::revolute("floppy", Vec3::z(), Transform::identity()), SpatialInertia::zero());
        let err = forward_dynamics(&t, &SystemState::zeros(1), &v1(0.0), &[], &v1(0.0), &default_gravity()).unwrap_err();
        assert!(err.to_string().contains("floppy"), "{err}");
    }

    #[test]
    fn rest_state_stays_at_rest() {
        let t = tree_with(
            JointSpec::revolute("hinge", Vec3::z(), Transform::identity()),
            SpatialInertia::point_mass(1.0, Vec3::x()).unwrap(),
        );
        let s = SystemState::new(v1(0.4), v1(0.0), 0.0);
        for kind in [IntegratorKind::Rk4, IntegratorKind::SemiImplicitEuler] {
            let mut f = FnForces(|_t: f64, q: &DVector<f64>, _v: &DVector<f64>| DVector::zeros(q.len()));
            let next = integrate_step(&t, &s, &mut f, 1e-3, kind, &Vec3::zeros()).unwrap();
            assert_eq!(next.q, s.q);
            assert_eq!(next.qdot, s.qdot);
        }
    }

    #[test]
    fn divergence_is_reported_with_last_state() {
        let t = tree_with(
            JointSpec::prismatic("slide", Vec3::x(), Transform::identity()),
            SpatialInertia::point_mass(1.0, Vec3::zeros()).unwrap(),
        );
        let mut f = FnForces(|_t: f64, _q: &DVector<f64>, _v: &DVector<f64>| v1(f64::INFINITY));
        let s = SystemState::new(v1(0.25), v1(0.0), 1.5);
        match integrate_step(&t, &s, &mut f, 1e-3, IntegratorKind::Rk4, &Vec3::zeros()) {
            Err(DynamicsError::Diverged { time, last }) => {
                assert_eq!(time, 1.5);
                assert_eq!(last.q[0], 0.25);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
        assert!(matches!(
            integrate_step(&t, &s, &mut f, 0.0, IntegratorKind::Rk4, &Vec3::zeros()),
            Err(DynamicsError::InvalidStep(_))
        ));
    }

    #[test]
    fn stability_report_matches_oscillator() {
        let t = tree_with(
            JointSpec::prismatic("slide", Vec3::x(), Transform::identity()),
            SpatialInertia::point_mass(4.0, Vec3::zeros()).unwrap(),
        );
        let mut lin = Linearization::zeros(1);
        lin.stiffness[(0, 0)] = 400.0;
        lin.damping[(0, 0)] = 8.0;
        let r = stability_report(&t, &v1(0.0), &lin, 1e-3).unwrap();
        assert_relative_eq!(r.omega_max, 10.0, epsilon = 1e-10);
        assert_relative_eq!(r.damping_rate_max, 2.0, epsilon = 1e-10);
        assert!(r.rk4_stable());
        assert!(!StabilityReport { dt: 1.0, ..r }.rk4_stable());
    }
}
