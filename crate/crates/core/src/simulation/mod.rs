//! One episode of the coupled system: the prescribed wearer drives the
//! exoskeleton through the interface impedances while the integrator advances
//! the exoskeleton dynamics.

mod episode;
mod forces;
mod lock;
mod metrics;
mod trace;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use episode::{run_episode, PreparedEpisode};
pub use forces::CoupledForces;
pub use lock::locked_excursion;
pub use metrics::{
    constraint_value, cost, episode_metrics, quantiles, tracking_differences, wrench_rms, EpisodeMetrics, InterfaceRms, MetricSettings,
    TrackingStats,
};
pub use trace::{Sample, SimulationTrace, WRENCH_COMPONENTS};

use crate::dynamics::{default_gravity, DynamicsError, IntegratorKind};
use crate::harness::{pelvis_impedance, HarnessConfig, HarnessError, ImpedanceParams, LockSettings};
use crate::human::{EpisodeWindow, GaitTrajectory, HumanError, NoiseTarget};
use crate::model::{ExoskeletonModel, InterfaceId, ModelError};
use crate::spatial::Vec3;

/// Fixed pelvis stiffness, translational [N/m] and rotational [N·m/rad].
pub const PELVIS_K_TRANS: f64 = 1e4;
pub const PELVIS_K_ROT: f64 = 500.0;
/// Reference rotational inertia [kg·m²] for critical rotational damping.
pub const REFERENCE_INERTIA: f64 = 1.0;

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Human(#[from] HumanError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("invalid episode: {0}")]
    Invalid(String),
    #[error("trace diverged at t = {0} s")]
    Diverged(f64),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActuationPolicy {
    Zero,
    /// `τ = g(q)` on hip and knee joints.
    #[default]
    GravityCompensation,
}

/// Interface impedances: the six limb interfaces in [`InterfaceId::LIMB`]
/// order plus the pelvis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterfaceImpedances {
    pub limbs: [ImpedanceParams; 6],
    pub pelvis: ImpedanceParams,
}

impl InterfaceImpedances {
    pub fn uniform(limb: ImpedanceParams, pelvis: ImpedanceParams) -> Self {
        InterfaceImpedances { limbs: [limb; 6], pelvis }
    }

    /// All limb interfaces at zero; the pelvis keeps the fixed default.
    pub fn detached(total_mass: f64) -> Self {
        Self::uniform(ImpedanceParams::zero(), default_pelvis(total_mass))
    }

    pub fn get(&self, id: InterfaceId) -> &ImpedanceParams {
        match id {
            InterfaceId::Pelvis => &self.pelvis,
            _ => &self.limbs[id.index()],
        }
    }

    pub fn get_mut(&mut self, id: InterfaceId) -> &mut ImpedanceParams {
        match id {
            InterfaceId::Pelvis => &mut self.pelvis,
            _ => &mut self.limbs[id.index()],
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.limbs.iter().chain([&self.pelvis]).try_for_each(|p| p.validate())
    }

    /// Limb impedances scaled by `alpha`; the pelvis is left unchanged.
    pub fn scaled_limbs(&self, alpha: f64) -> Self {
        InterfaceImpedances { limbs: self.limbs.map(|p| p.scaled(alpha)), pelvis: self.pelvis }
    }
}

/// The fixed pelvis impedance, critically damped for the device mass.
pub fn default_pelvis(total_mass: f64) -> ImpedanceParams {
    pelvis_impedance(PELVIS_K_TRANS, PELVIS_K_ROT, total_mass, REFERENCE_INERTIA)
}

/// Numerical and perturbation settings of an episode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeSettings {
    pub dt: f64,
    pub integrator: IntegratorKind,
    pub window: EpisodeWindow,
    pub actuation: ActuationPolicy,
    pub lock: LockSettings,
    /// Bound of the uniform initial offset on the six anatomical joints [rad].
    pub gamma: f64,
    /// Additive noise on the gait channels; `None` leaves them clean.
    pub snr_db: Option<f64>,
    pub noise_target: NoiseTarget,
    pub noise_seed: u64,
    pub perturbation_seed: u64,
    pub gravity: Vec3,
}

impl Default for EpisodeSettings {
    fn default() -> Self {
        EpisodeSettings {
            dt: 1e-3,
            integrator: IntegratorKind::SemiImplicitEuler,
            window: EpisodeWindow::default(),
            actuation: ActuationPolicy::default(),
            lock: LockSettings::default(),
            gamma: 0.0,
            snr_db: None,
            noise_target: NoiseTarget::default(),
            noise_seed: 0,
            perturbation_seed: 0,
            gravity: default_gravity(),
        }
    }
}

impl EpisodeSettings {
    pub fn validate(&self) -> Result<(), SimulationError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(SimulationError::Invalid(format!("dt must be positive and finite, got {}", self.dt)));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(SimulationError::Invalid(format!("gamma must be finite and non-negative, got {}", self.gamma)));
        }
        if self.snr_db.is_some_and(|s| s.is_nan() || s == f64::NEG_INFINITY) {
            return Err(SimulationError::Invalid("snr_db must be finite or +inf".into()));
        }
        if !self.gravity.iter().all(|g| g.is_finite()) {
            return Err(SimulationError::Invalid("gravity must be finite".into()));
        }
        self.window.validate()?;
        Ok(())
    }
}

/// Everything that defines one episode.
#[derive(Clone, Debug)]
pub struct EpisodeSpec {
    pub exo: Arc<ExoskeletonModel>,
    pub harness: HarnessConfig,
    pub impedances: InterfaceImpedances,
    /// Full gait cycle (or an already sliced episode).
    pub gait: Arc<GaitTrajectory>,
    pub settings: EpisodeSettings,
}
