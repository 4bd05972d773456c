use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gait::{channel_index, GaitTrajectory, Plane};
use super::HumanError;
use crate::model::{Articulation, Side};

/// Peak-to-peak sagittal ranges [rad] and a common scale for the frontal and
/// transverse components.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AmplitudeProfile {
    pub hip: f64,
    pub knee: f64,
    pub ankle: f64,
    pub non_sagittal_scale: f64,
}

impl Default for AmplitudeProfile {
    fn default() -> Self {
        AmplitudeProfile { hip: 40f64.to_radians(), knee: 60f64.to_radians(), ankle: 25f64.to_radians(), non_sagittal_scale: 1.0 }
    }
}

impl AmplitudeProfile {
    pub fn zero() -> Self {
        AmplitudeProfile { hip: 0.0, knee: 0.0, ankle: 0.0, non_sagittal_scale: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticGait {
    /// Steps per minute; one cycle is two steps.
    pub cadence: f64,
    pub amplitude: AmplitudeProfile,
    /// Relative per-leg spread of amplitudes (and phase, in cycles / 20).
    pub variability: f64,
    pub seed: u64,
    pub sample_rate: f64,
}

impl Default for SyntheticGait {
    fn default() -> Self {
        SyntheticGait { cadence: 105.0, amplitude: AmplitudeProfile::default(), variability: 0.0, seed: 0, sample_rate: 240.0 }
    }
}

/// Periodic bump of unit height centred at phase `c`.
fn bump(phi: f64, c: f64, kappa: f64) -> f64 {
    (kappa * ((TAU * (phi - c)).cos() - 1.0)).exp()
}

fn wave(phi: f64, c: f64) -> f64 {
    (TAU * (phi - c)).cos()
}

/// Closed-form joint angle of one channel as a function of the leg's own
/// gait phase `phi` ∈ [0, 1).
pub fn gait_profile(amp: &AmplitudeProfile, articulation: Articulation, plane: Plane, phi: f64) -> f64 {
    let s = amp.non_sagittal_scale;
    let deg = |v: f64| v.to_radians() * s;
    match (articulation, plane) {
        (Articulation::Hip, Plane::Flexion) => amp.hip * (0.25 + 0.5 * wave(phi, -0.05)),
        (Articulation::Knee, Plane::Flexion) => amp.knee * (0.25 * bump(phi, 0.15, 8.0) + bump(phi, 0.72, 4.0)),
        (Articulation::Ankle, Plane::Flexion) => amp.ankle * (0.35 * bump(phi, 0.45, 6.0) - 0.65 * bump(phi, 0.63, 30.0)),
        (Articulation::Hip, Plane::Frontal) => deg(5.0) * wave(phi, 0.2),
        (Articulation::Hip, Plane::Transverse) => deg(4.0) * wave(phi, 0.35),
        (Articulation::Knee, Plane::Frontal) => deg(2.0) * (bump(phi, 0.72, 4.0) - 0.3),
        (Articulation::Knee, Plane::Transverse) => deg(5.0) * wave(phi, 0.55),
        (Articulation::Ankle, Plane::Frontal) => deg(2.0) * wave(phi, 0.6),
        (Articulation::Ankle, Plane::Transverse) => deg(3.0) * wave(phi, 0.3),
    }
}

/// One gait cycle of smooth, sagittal-dominant joint trajectories.
pub fn synthetic_gait(spec: &SyntheticGait) -> Result<GaitTrajectory, HumanError> {
    if !(spec.cadence > 0.0) || !(spec.sample_rate > 0.0) || !(spec.variability >= 0.0) {
        return Err(HumanError::Invalid("cadence and sample rate must be positive, variability non-negative".into()));
    }
    let period = 120.0 / spec.cadence;
    let n = (period * spec.sample_rate).round() as usize;
    if n < 4 {
        return Err(HumanError::Invalid("sample rate too low for the gait period".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let times: Vec<f64> = (0..n).map(|k| k as f64 / spec.sample_rate).collect();
    let mut channels = vec![Vec::new(); 18];
    for side in Side::BOTH {
        let v = spec.variability;
        let mut jitter = |scale: f64| if v > 0.0 { rng.random_range(-scale..scale) } else { 0.0 };
        let gain = 1.0 + jitter(v);
        let shift = jitter(v / 20.0);
        for art in Articulation::ALL {
            for plane in [Plane::Flexion, Plane::Frontal, Plane::Transverse] {
                let c = channel_index(art, plane, side);
                channels[c] = (0..n)
                    .map(|k| gain * gait_profile(&spec.amplitude, art, plane, k as f64 / n as f64 + shift))
                    .collect();
            }
        }
    }
    let mut traj = GaitTrajectory::new(times, channels)?;
    traj.sample_rate = spec.sample_rate;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn range(v: &[f64]) -> f64 {
        v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
    }

    #[test]
    fn zero_amplitude_is_standing() {
        let g = synthetic_gait(&SyntheticGait { amplitude: AmplitudeProfile::zero(), ..Default::default() }).unwrap();
        assert!(g.channels.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn cadence_sets_period() {
        let a = synthetic_gait(&SyntheticGait { cadence: 100.0, ..Default::default() }).unwrap();
        let b = synthetic_gait(&SyntheticGait { cadence: 200.0, ..Default::default() }).unwrap();
        assert_eq!(a.len(), 288);
        assert_eq!(b.len(), 144);
        assert_relative_eq!(range(&a.channels[0]), range(&b.channels[0]), epsilon = 1e-3);
    }

    #[test]
    fn default_ranges_follow_closed_form() {
        let amp = AmplitudeProfile::default();
        let g = synthetic_gait(&SyntheticGait::default()).unwrap();
        for (art, c) in [(Articulation::Hip, 0), (Articulation::Knee, 3)] {
            let dense: Vec<f64> = (0..100_000).map(|k| gait_profile(&amp, art, Plane::Flexion, k as f64 / 1e5)).collect();
            assert_relative_eq!(range(&g.channels[c]), range(&dense), max_relative = 1e-3);
        }
        assert_relative_eq!(range(&g.channels[0]), 40f64.to_radians(), max_relative = 1e-3);
        assert_relative_eq!(range(&g.channels[3]), 60f64.to_radians(), max_relative = 0.02);
    }

    #[test]
    fn seeded_variability_is_reproducible() {
        let spec = SyntheticGait { variability: 0.1, seed: 9, ..Default::default() };
        assert_eq!(synthetic_gait(&spec).unwrap(), synthetic_gait(&spec).unwrap());
        let other = synthetic_gait(&SyntheticGait { seed: 10, ..spec }).unwrap();
        assert_ne!(synthetic_gait(&spec).unwrap(), other);
    }
}
