use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::gait::{GaitInterpolator, GaitTrajectory};
use super::HumanError;
use crate::seed::splitmix64;

/// Which wearer references receive the measurement noise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseTarget {
    /// Angle samples only; rates come from differentiating the noisy spline,
    /// which amplifies the noise by roughly the sample rate over the gait
    /// frequency.
    Angles,
    /// Angle samples and rate samples, independently, each at the target SNR.
    #[default]
    AnglesAndRates,
}

/// Adds white Gaussian noise to every channel with variance
/// `P / 10^(snr_db / 10)`, `P` being the channel's mean-square value.
/// `snr_db = +∞` returns the input unchanged.
pub fn add_awgn(traj: &GaitTrajectory, snr_db: f64, seed: u64) -> Result<GaitTrajectory, HumanError> {
    if snr_db == f64::INFINITY {
        return Ok(traj.clone());
    }
    if !snr_db.is_finite() {
        return Err(HumanError::Invalid(format!("SNR must be finite or +inf, got {snr_db}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = traj.clone();
    for ch in &mut out.channels {
        let power = ch.iter().map(|v| v * v).sum::<f64>() / ch.len() as f64;
        let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
        if sigma == 0.0 {
            continue;
        }
        let normal = Normal::new(0.0, sigma).expect("finite positive sigma");
        for v in ch.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(out)
}

/// Interpolator of `traj` with white noise at `snr_db` on the references
/// selected by `target`. Rate samples are the clean spline derivative at the
/// sample times.
pub fn noisy_interpolator(traj: &GaitTrajectory, snr_db: f64, target: NoiseTarget, seed: u64) -> Result<GaitInterpolator, HumanError> {
    let angles = add_awgn(traj, snr_db, seed)?.interpolator();
    match target {
        NoiseTarget::Angles => Ok(angles),
        NoiseTarget::AnglesAndRates => {
            let clean = traj.interpolator();
            let mut rates = vec![Vec::with_capacity(traj.len()); traj.channels.len()];
            for &t in &traj.times {
                let (_, qd) = clean.eval(t)?;
                for (ch, v) in rates.iter_mut().zip(qd) {
                    ch.push(v);
                }
            }
            let rates = GaitTrajectory::new(traj.times.clone(), rates)?;
            Ok(angles.with_rates(&add_awgn(&rates, snr_db, splitmix64(seed))?))
        }
    }
}

/// Offsets the listed coordinates of `q0` by independent uniform draws in
/// `[−γ, γ]`.
pub fn perturb_initial(q0: &DVector<f64>, gamma: f64, dofs: &[usize], seed: u64) -> Result<DVector<f64>, HumanError> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(HumanError::Invalid(format!("perturbation bound must be finite and non-negative, got {gamma}")));
    }
    let mut q = q0.clone();
    if gamma == 0.0 {
        return Ok(q);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &d in dofs {
        q[d] += rng.random_range(-gamma..=gamma);
    }
    Ok(q)
}

/// Measured SNR [dB] of `noisy` against `clean`, per channel.
pub fn measured_snr_db(clean: &GaitTrajectory, noisy: &GaitTrajectory) -> Vec<f64> {
    clean
        .channels
        .iter()
        .zip(&noisy.channels)
        .map(|(c, n)| {
            let signal: f64 = c.iter().map(|v| v * v).sum();
            let noise: f64 = c.iter().zip(n).map(|(a, b)| (b - a) * (b - a)).sum();
            10.0 * (signal / noise).log10()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::human::{synthetic_gait, SyntheticGait};

    fn long_gait() -> GaitTrajectory {
        // 24 000 samples per channel.
        synthetic_gait(&SyntheticGait { sample_rate: 20_000.0, ..Default::default() }).unwrap()
    }

    #[test]
    fn empirical_snr_matches_target() {
        let g = long_gait();
        let noisy = add_awgn(&g, 30.0, 4).unwrap();
        for snr in measured_snr_db(&g, &noisy) {
            assert!((snr - 30.0).abs() < 1.0, "measured {snr} dB");
        }
    }

    #[test]
    fn infinite_snr_and_determinism() {
        let g = synthetic_gait(&SyntheticGait::default()).unwrap();
        assert_eq!(add_awgn(&g, f64::INFINITY, 1).unwrap(), g);
        assert_eq!(add_awgn(&g, 30.0, 1).unwrap(), add_awgn(&g, 30.0, 1).unwrap());
        assert_ne!(add_awgn(&g, 30.0, 1).unwrap(), add_awgn(&g, 30.0, 2).unwrap());
        assert!(add_awgn(&g, f64::NAN, 1).is_err());
    }

    /// Per-channel SNR [dB] of the interpolated rates at the sample times.
    fn rate_snr(g: &GaitTrajectory, target: NoiseTarget) -> Vec<f64> {
        let clean = g.interpolator();
        let noisy = noisy_interpolator(g, 30.0, target, 8).unwrap();
        let (mut signal, mut noise) = ([0.0; 18], [0.0; 18]);
        for &t in &g.times {
            let (a, b) = (clean.eval(t).unwrap().1, noisy.eval(t).unwrap().1);
            for c in 0..18 {
                signal[c] += a[c] * a[c];
                noise[c] += (b[c] - a[c]).powi(2);
            }
        }
        (0..18).map(|c| 10.0 * (signal[c] / noise[c]).log10()).collect()
    }

    #[test]
    fn rate_noise_follows_the_target() {
        let g = long_gait();
        for snr in rate_snr(&g, NoiseTarget::AnglesAndRates) {
            assert!((snr - 30.0).abs() < 1.0, "rate SNR {snr} dB");
        }
        let g = synthetic_gait(&SyntheticGait::default()).unwrap();
        assert!(rate_snr(&g, NoiseTarget::Angles).iter().all(|&snr| snr < 10.0));
        let angles_only = noisy_interpolator(&g, 30.0, NoiseTarget::Angles, 8).unwrap();
        let both = noisy_interpolator(&g, 30.0, NoiseTarget::AnglesAndRates, 8).unwrap();
        assert_eq!(angles_only.eval(0.3).unwrap().0, both.eval(0.3).unwrap().0);
    }

    #[test]
    fn perturbation_bounds() {
        let q0 = DVector::from_element(10, 0.5);
        assert_eq!(perturb_initial(&q0, 0.0, &[0, 1, 2], 3).unwrap(), q0);
        let dofs: Vec<usize> = (0..6).collect();
        for seed in 0..200 {
            let q = perturb_initial(&q0, 0.1, &dofs, seed).unwrap();
            assert!((&q - &q0).amax() <= 0.1);
            assert!(q.rows(6, 4).iter().all(|v| *v == 0.5));
        }
        assert_eq!(perturb_initial(&q0, 0.1, &dofs, 5).unwrap(), perturb_initial(&q0, 0.1, &dofs, 5).unwrap());
        assert!(perturb_initial(&q0, -1.0, &dofs, 5).is_err());
    }
}
