//! The virtual wearer: gait trajectories, episode slicing, perturbations and
//! the 18-DoF kinematic model that drives the interfaces.

mod body;
mod gait;
mod noise;
mod spline;
mod synthetic;

use thiserror::Error;

pub use body::{human_attachment_states, AttachmentStates, HumanModel};
pub use gait::{channel_index, slice_episode, EpisodeWindow, GaitInterpolator, GaitTrajectory, Plane, CHANNELS};
pub use noise::{add_awgn, measured_snr_db, noisy_interpolator, perturb_initial, NoiseTarget};
pub use spline::CubicSpline;
pub use synthetic::{gait_profile, synthetic_gait, AmplitudeProfile, SyntheticGait};

use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum HumanError {
    #[error("gait data: {0}")]
    Format(String),
    #[error("{0}")]
    Io(String),
    #[error("episode window: {0}")]
    Window(String),
    #[error("time {t} s outside trajectory span [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}
