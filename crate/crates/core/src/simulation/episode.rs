use std::sync::Arc;

use nalgebra::DVector;

use super::forces::{cuff_wrench, interface_distances, CoupledForces};
use super::trace::{Sample, SimulationTrace};
use super::{EpisodeSettings, EpisodeSpec, InterfaceImpedances, SimulationError};
use crate::dynamics::{integrate_step, DynamicsError, ForceModel};
use crate::harness::{HarnessConfig, LockGains};
use crate::human::{
    channel_index, noisy_interpolator, perturb_initial, slice_episode, AttachmentStates, GaitInterpolator, GaitTrajectory, HumanModel,
    Plane, CHANNELS,
};
use crate::model::{
    forward_kinematics_unchecked, Articulation, ExoskeletonModel, InterfaceId, Kinematics, ModelError, Side, SystemState,
};
use crate::spatial::Vec3;

/// An episode with everything independent of the interface impedances
/// precomputed: the sliced gait, the (possibly noisy) wearer interface
/// states on the time grid, lock gains and the initial state.
#[derive(Debug)]
pub struct PreparedEpisode {
    pub(super) exo: Arc<ExoskeletonModel>,
    pub(super) settings: EpisodeSettings,
    pub(super) lock: LockGains,
    pub(super) actuated: Vec<usize>,
    harness: HarnessConfig,
    human: HumanModel,
    gait: GaitTrajectory,
    interpolator: GaitInterpolator,
    start: f64,
    horizon: f64,
    steps: usize,
    human_states: Vec<AttachmentStates>,
    human_q: Vec<[f64; 18]>,
    /// (exoskeleton DoF, human flexion channel) per anatomical joint.
    anatomical: [(usize, usize); 6],
    tracking_joints: [&'static str; 6],
    exo_points: [(usize, Vec3); 7],
    connected: [bool; 7],
    initial: SystemState,
    dof_names: Vec<String>,
}

impl PreparedEpisode {
    pub fn new(
        exo: Arc<ExoskeletonModel>,
        harness: &HarnessConfig,
        gait: &GaitTrajectory,
        settings: &EpisodeSettings,
    ) -> Result<Self, SimulationError> {
        settings.validate()?;
        harness.validate()?;
        let sliced = slice_episode(gait, &settings.window)?;
        let interpolator = match settings.snr_db {
            Some(snr) => noisy_interpolator(&sliced, snr, settings.noise_target, settings.noise_seed)?,
            None => sliced.interpolator(),
        };
        let (start, horizon) = interpolator.span();
        let dt = settings.dt;
        let steps = ((horizon - start) / dt + 1e-9).floor() as usize;
        if steps < 1 {
            return Err(SimulationError::Invalid(format!("episode of {} s is shorter than one step of {dt} s", horizon - start)));
        }
        let human = HumanModel::for_exoskeleton(&exo)?;
        let mut human_states = Vec::with_capacity(steps + 1);
        let mut human_q = Vec::with_capacity(steps + 1);
        for k in 0..=steps {
            let (q, qd) = interpolator.eval(start + k as f64 * dt)?;
            human_states.push(human.states(&q, &qd));
            human_q.push(q);
        }

        let mut anatomical = [(0, 0); 6];
        let mut tracking_joints = [""; 6];
        let mut k = 0;
        for side in Side::BOTH {
            for art in Articulation::ALL {
                let c = channel_index(art, Plane::Flexion, side);
                anatomical[k] = (exo.anatomical_dof(art, side), c);
                tracking_joints[k] = CHANNELS[c];
                k += 1;
            }
        }
        let mut exo_points = [(0, Vec3::zeros()); 7];
        let mut connected = [true; 7];
        for id in InterfaceId::ALL {
            exo_points[id.index()] = match exo.chain(id) {
                Some(chain) => (chain.cuff.body, chain.cuff.point),
                None => (exo.pelvis.body, exo.pelvis.point),
            };
            connected[id.index()] = harness.interface_connected(id);
        }

        let n = exo.dof_count();
        let (q0, qd0) = interpolator.eval(start)?;
        let mut q = DVector::zeros(n);
        let mut qdot = DVector::zeros(n);
        for &(d, c) in &anatomical {
            q[d] = q0[c];
            qdot[d] = qd0[c];
        }
        let dofs: Vec<usize> = anatomical.iter().map(|a| a.0).collect();
        let q = perturb_initial(&q, settings.gamma, &dofs, settings.perturbation_seed)?;
        let lock = LockGains::for_model(&exo, harness, &settings.lock)?;
        let dof_names = (0..n).map(|d| exo.tree.dof_joint(d).name.clone()).collect();
        Ok(PreparedEpisode {
            actuated: exo.actuated_dofs(),
            settings: *settings,
            harness: harness.clone(),
            lock,
            human,
            gait: sliced,
            interpolator,
            start,
            horizon: start + steps as f64 * dt,
            steps,
            human_states,
            human_q,
            anatomical,
            tracking_joints,
            exo_points,
            connected,
            initial: SystemState::new(q, qdot, start),
            dof_names,
            exo,
        })
    }

    pub fn from_spec(spec: &EpisodeSpec) -> Result<Self, SimulationError> {
        Self::new(spec.exo.clone(), &spec.harness, &spec.gait, &spec.settings)
    }

    pub fn exo(&self) -> &Arc<ExoskeletonModel> {
        &self.exo
    }

    pub fn human(&self) -> &HumanModel {
        &self.human
    }

    pub fn harness(&self) -> &HarnessConfig {
        &self.harness
    }

    pub fn settings(&self) -> &EpisodeSettings {
        &self.settings
    }

    pub fn lock_gains(&self) -> &LockGains {
        &self.lock
    }

    /// The sliced gait driving the wearer, before any reference noise.
    pub fn gait(&self) -> &GaitTrajectory {
        &self.gait
    }

    pub fn initial_state(&self) -> &SystemState {
        &self.initial
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn time(&self, k: usize) -> f64 {
        self.start + k as f64 * self.settings.dt
    }

    pub fn is_connected(&self, id: InterfaceId) -> bool {
        self.connected[id.index()]
    }

    /// Body and body-frame point of the exoskeleton side of an interface.
    pub fn exo_point(&self, id: InterfaceId) -> (usize, Vec3) {
        self.exo_points[id.index()]
    }

    /// Wearer interface states at `t`: precomputed on the time grid,
    /// interpolated in between.
    pub fn human_states_at(&self, t: f64) -> Result<AttachmentStates, DynamicsError> {
        let dt = self.settings.dt;
        let x = (t - self.start) / dt;
        let k = x.round();
        if (x - k).abs() < 1e-6 && k >= 0.0 && (k as usize) <= self.steps {
            return Ok(self.human_states[k as usize]);
        }
        let (lo, hi) = self.interpolator.span();
        let (q, qd) = self
            .interpolator
            .eval(t.clamp(lo, hi))
            .map_err(|e| DynamicsError::Model(ModelError::Invalid(e.to_string())))?;
        Ok(self.human.states(&q, &qd))
    }

    pub(super) fn sample(
        &self,
        t: f64,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
        kin: &Kinematics,
        human: &AttachmentStates,
        wrenches: [[f64; 6]; 7],
    ) -> Sample {
        let k = (((t - self.start) / self.settings.dt).round().max(0.0) as usize).min(self.steps);
        let human_q = self.human_q[k];
        Sample {
            time: t,
            wrenches,
            distances: interface_distances(self, kin, human),
            q: q.as_slice().to_vec(),
            qdot: qdot.as_slice().to_vec(),
            human_q,
            tracking: self.anatomical.map(|(d, c)| q[d] - human_q[c]),
        }
    }

    fn empty_trace(&self) -> SimulationTrace {
        SimulationTrace {
            samples: Vec::with_capacity(self.steps + 1),
            dof_names: self.dof_names.clone(),
            tracking_joints: self.tracking_joints,
            start: self.start,
            horizon: self.horizon,
            dt: self.settings.dt,
            diverged_at: None,
        }
    }

    /// Integrates the episode with the given interface impedances.
    pub fn run(&self, impedances: &InterfaceImpedances) -> Result<SimulationTrace, SimulationError> {
        impedances.validate()?;
        let tree = &self.exo.tree;
        let mut forces = CoupledForces::new(self, impedances);
        let mut trace = self.empty_trace();
        let mut state = self.initial.clone();
        for k in 0..=self.steps {
            forces.capture_next();
            let next = if k == self.steps {
                forces.evaluate(state.time, &state.q, &state.qdot, None)?;
                None
            } else {
                let dt = self.settings.dt;
                match integrate_step(tree, &state, &mut forces, dt, self.settings.integrator, &self.settings.gravity) {
                    Ok(mut s) => {
                        s.time = self.time(k + 1);
                        Some(Ok(s))
                    }
                    Err(DynamicsError::Diverged { .. }) => Some(Err(self.time(k + 1))),
                    Err(e) => return Err(e.into()),
                }
            };
            let sample = forces.take_sample().expect("the first force evaluation of a step is captured");
            if !sample.wrenches.iter().flatten().chain(&sample.distances).all(|v| v.is_finite()) {
                trace.diverged_at = Some(state.time);
                break;
            }
            trace.samples.push(sample);
            match next {
                Some(Ok(s)) => state = s,
                Some(Err(t)) => {
                    trace.diverged_at = Some(t);
                    break;
                }
                None => {}
            }
        }
        Ok(trace)
    }

    /// Interaction wrenches along the exoskeleton motion recorded in `trace`,
    /// recomputed with other impedances while the exoskeleton is held on
    /// that motion.
    pub fn replay_wrenches(
        &self,
        impedances: &InterfaceImpedances,
        trace: &SimulationTrace,
    ) -> Result<Vec<[[f64; 6]; 7]>, SimulationError> {
        impedances.validate()?;
        let mut out = Vec::with_capacity(trace.len());
        for s in &trace.samples {
            let q = DVector::from_column_slice(&s.q);
            let qdot = DVector::from_column_slice(&s.qdot);
            let kin = forward_kinematics_unchecked(&self.exo.tree, &q, &qdot);
            let human = self.human_states_at(s.time)?;
            let mut w = [[0.0; 6]; 7];
            for id in InterfaceId::ALL {
                if let Some((iw, _)) = cuff_wrench(self, impedances, &kin, &human, id) {
                    let v = iw.wrench.to_vector();
                    w[id.index()] = std::array::from_fn(|i| v[i]);
                }
            }
            out.push(w);
        }
        Ok(out)
    }
}

/// Prepares and runs one episode.
pub fn run_episode(spec: &EpisodeSpec) -> Result<SimulationTrace, SimulationError> {
    PreparedEpisode::from_spec(spec)?.run(&spec.impedances)
}
