use std::sync::Arc;

use approx::assert_relative_eq;
use nalgebra::DVector;

use exoharness::dynamics::{gravity_forces, kinetic_energy, potential_energy, stability_report, ForceModel, IntegratorKind, Linearization};
use exoharness::harness::{HarnessConfig, ImpedanceParams, LockSettings};
use exoharness::human::{synthetic_gait, AmplitudeProfile, EpisodeWindow, GaitTrajectory, SyntheticGait};
use exoharness::model::{build_exoskeleton, forward_kinematics, Anthropometrics, ExoskeletonModel, InterfaceId, ModelLayout, Percentile, SystemState};
use exoharness::simulation::*;

fn exo() -> Arc<ExoskeletonModel> {
    Arc::new(build_exoskeleton(&Anthropometrics::percentile(Percentile::P50), 19.0, &ModelLayout::default()).unwrap())
}

fn gait() -> GaitTrajectory {
    synthetic_gait(&SyntheticGait::default()).unwrap()
}

fn moderate() -> InterfaceImpedances {
    InterfaceImpedances::uniform(ImpedanceParams::isotropic(50.0, 3e3, 5.0, 100.0), default_pelvis(19.0))
}

#[test]
fn standing_still_without_impedance_is_static() {
    let still = synthetic_gait(&SyntheticGait { amplitude: AmplitudeProfile::zero(), ..Default::default() }).unwrap();
    let ep = PreparedEpisode::new(exo(), &HarnessConfig::from_code("[0 1 0]").unwrap(), &still, &EpisodeSettings::default()).unwrap();
    let none = InterfaceImpedances::uniform(ImpedanceParams::zero(), ImpedanceParams::zero());
    let trace = ep.run(&none).unwrap();
    assert!(!trace.is_diverged());
    for s in &trace.samples {
        assert!(s.wrenches.iter().flatten().all(|w| w.abs() < 1e-6));
    }
}

#[test]
fn null_impedance_gives_zero_wrenches_and_violations() {
    let e = exo();
    for code in HarnessConfig::PRESET_CODES {
        let ep = PreparedEpisode::new(e.clone(), &HarnessConfig::from_code(code).unwrap(), &gait(), &EpisodeSettings::default()).unwrap();
        let trace = ep.run(&InterfaceImpedances::uniform(ImpedanceParams::zero(), ImpedanceParams::zero())).unwrap();
        let m = episode_metrics(&trace, &MetricSettings::default());
        assert!(m.wrench_rms.iter().all(|r| r.rms == [0.0; 6]), "{code}");
        assert!(trace.samples.iter().all(|s| s.wrenches == [[0.0; 6]; 7]));
        assert_eq!(m.cost, 0.0);
        assert!(m.constraint > 0, "{code}: a detached device must drift beyond the thresholds");
    }
}

#[test]
fn equal_specs_give_identical_traces() {
    let spec = EpisodeSpec {
        exo: exo(),
        harness: HarnessConfig::from_code("[3 3 2]").unwrap(),
        impedances: moderate(),
        gait: Arc::new(gait()),
        settings: EpisodeSettings { gamma: 0.1, snr_db: Some(30.0), noise_seed: 3, perturbation_seed: 4, ..Default::default() },
    };
    let a = run_episode(&spec).unwrap();
    let b = run_episode(&spec).unwrap();
    assert_eq!(a, b);
    let c = run_episode(&EpisodeSpec { settings: EpisodeSettings { perturbation_seed: 5, ..spec.settings }, ..spec.clone() }).unwrap();
    assert_ne!(a, c);
}

#[test]
fn initial_state_follows_the_wearer() {
    let e = exo();
    let settings = EpisodeSettings::default();
    let ep = PreparedEpisode::new(e.clone(), &HarnessConfig::from_code("[0 1 0]").unwrap(), &gait(), &settings).unwrap();
    let s0 = ep.initial_state();
    let trace = ep.run(&moderate()).unwrap();
    assert_eq!(trace.samples[0].tracking, [0.0; 6]);
    for d in e.harness_dofs() {
        assert_eq!(s0.q[d], 0.0);
        assert_eq!(s0.qdot[d], 0.0);
    }
    let perturbed = EpisodeSettings { gamma: 0.1, perturbation_seed: 11, ..settings };
    let ep = PreparedEpisode::new(e.clone(), &HarnessConfig::from_code("[0 1 0]").unwrap(), &gait(), &perturbed).unwrap();
    let trace = ep.run(&moderate()).unwrap();
    let t0 = trace.samples[0].tracking;
    assert!(t0.iter().all(|d| d.abs() <= 0.1) && t0.iter().any(|d| *d != 0.0));
    assert!(e.harness_dofs().iter().all(|&d| ep.initial_state().q[d] == 0.0));
}

#[test]
fn disconnected_shank_carries_no_wrench() {
    let ep = PreparedEpisode::new(exo(), &HarnessConfig::from_code("[2 6 1]").unwrap(), &gait(), &EpisodeSettings::default()).unwrap();
    let m = episode_metrics(&ep.run(&moderate()).unwrap(), &MetricSettings::default());
    for r in &m.wrench_rms {
        match r.interface {
            InterfaceId::ShankR | InterfaceId::ShankL => assert_eq!(r.rms, [0.0; 6]),
            // The grounded right foot coincides with the wearer's.
            InterfaceId::FootR => {}
            _ => assert!(r.rms.iter().any(|v| *v > 0.0), "{:?}", r.interface),
        }
    }
}

#[test]
fn wrenches_are_linear_in_impedance_on_a_clamped_motion() {
    let ep = PreparedEpisode::new(exo(), &HarnessConfig::from_code("[3 3 2]").unwrap(), &gait(), &EpisodeSettings::default()).unwrap();
    let base = moderate();
    let trace = ep.run(&base).unwrap();
    let w1 = ep.replay_wrenches(&base, &trace).unwrap();
    // Replaying the impedances that produced the motion reproduces the trace.
    for (s, w) in trace.samples.iter().zip(&w1) {
        for i in 0..7 {
            for c in 0..6 {
                assert_relative_eq!(s.wrenches[i][c], w[i][c], epsilon = 1e-9, max_relative = 1e-12);
            }
        }
    }
    for alpha in [0.5, 3.0, 17.0] {
        let scaled = InterfaceImpedances { limbs: base.limbs.map(|p| p.scaled(alpha)), pelvis: base.pelvis.scaled(alpha) };
        let wa = ep.replay_wrenches(&scaled, &trace).unwrap();
        for (a, b) in wa.iter().zip(&w1) {
            for i in 0..7 {
                for c in 0..6 {
                    assert_relative_eq!(a[i][c], alpha * b[i][c], epsilon = 1e-9, max_relative = 1e-12);
                }
            }
        }
    }
    // Stiffness and damping contributions superpose.
    let k_only = InterfaceImpedances { limbs: base.limbs.map(|p| ImpedanceParams { damping: [0.0; 6], ..p }), pelvis: ImpedanceParams { damping: [0.0; 6], ..base.pelvis } };
    let d_only = InterfaceImpedances { limbs: base.limbs.map(|p| ImpedanceParams { stiffness: [0.0; 6], ..p }), pelvis: ImpedanceParams { stiffness: [0.0; 6], ..base.pelvis } };
    let (wk, wd) = (ep.replay_wrenches(&k_only, &trace).unwrap(), ep.replay_wrenches(&d_only, &trace).unwrap());
    for ((a, b), c) in wk.iter().zip(&wd).zip(&w1) {
        for i in 0..7 {
            for j in 0..6 {
                assert_relative_eq!(a[i][j] + b[i][j], c[i][j], epsilon = 1e-9, max_relative = 1e-12);
            }
        }
    }
}

#[test]
fn stiffer_interfaces_track_more_closely() {
    // A sagittal-only wearer is kinematically compatible with the device, so
    // the tracking error vanishes as the interfaces stiffen.
    let planar = synthetic_gait(&SyntheticGait {
        amplitude: AmplitudeProfile { non_sagittal_scale: 0.0, ..Default::default() },
        ..Default::default()
    })
    .unwrap();
    let ep = PreparedEpisode::new(exo(), &HarnessConfig::from_code("[0 1 0]").unwrap(), &planar, &EpisodeSettings::default()).unwrap();
    let spread = |k: f64| {
        let imp = InterfaceImpedances::uniform(
            ImpedanceParams::isotropic(k / 20.0, k, 2.0 * (k / 20.0).sqrt(), 2.0 * (k * 19.0).sqrt()),
            default_pelvis(19.0),
        );
        let tr = ep.run(&imp).unwrap();
        tracking_differences(&tr, 0.05).iter().map(|s| s.max.abs().max(s.min.abs())).fold(0.0, f64::max)
    };
    // Beyond 1e5 N/m the residual is the one-step lag of the integrator.
    let spreads: Vec<f64> = [1e2, 1e3, 1e4, 1e5].iter().map(|k| spread(*k)).collect();
    assert!(spreads.windows(2).all(|w| w[1] < w[0]), "{spreads:?}");
    assert!(spreads[3] < 0.05 * spreads[0], "{spreads:?}");
}

#[test]
fn nominal_tracking_is_bounded() {
    let ep = PreparedEpisode::new(exo(), &HarnessConfig::from_code("[0 1 0]").unwrap(), &gait(), &EpisodeSettings::default()).unwrap();
    let tr = ep.run(&moderate()).unwrap();
    let m = episode_metrics(&tr, &MetricSettings::default());
    assert_eq!(m.constraint, 0);
    // With every interface within 10 cm per axis, no joint can be off by more
    // than the angle a thigh-length lever sweeps over the interface diagonal
    // twice (both ends of the segment contribute).
    let a = Anthropometrics::percentile(Percentile::P50);
    let bound = 2.0 * (0.1 * 3f64.sqrt() / (a.foot_length * 0.35)).min(std::f64::consts::FRAC_PI_2);
    for s in &m.tracking {
        assert!(s.min.is_finite() && s.max.is_finite());
        assert!(s.min >= -bound && s.max <= bound, "{s:?}");
        assert!(s.q1 <= s.median && s.median <= s.q3);
    }
}

#[test]
fn constraint_is_monotone_in_thresholds() {
    let ep = PreparedEpisode::new(exo(), &HarnessConfig::from_code("[0 1 0]").unwrap(), &gait(), &EpisodeSettings::default()).unwrap();
    let tr = ep.run(&InterfaceImpedances::uniform(ImpedanceParams::isotropic(5.0, 300.0, 1.0, 30.0), default_pelvis(19.0))).unwrap();
    let mut th = [0.0; 18];
    let mut last = constraint_value(&tr, &th, 0.05);
    assert_eq!(last, 18 * (tr.len() - 22) as u64);
    for step in 0..60 {
        th[(step * 7) % 18] += 0.01;
        let c = constraint_value(&tr, &th, 0.05);
        assert!(c <= last);
        last = c;
    }
}

#[test]
fn divergence_is_reported_not_raised() {
    // Explicit RK4 at 1 ms cannot resolve the locked harness modes.
    let settings = EpisodeSettings { integrator: IntegratorKind::Rk4, ..Default::default() };
    let ep = PreparedEpisode::new(exo(), &HarnessConfig::from_code("[0 1 0]").unwrap(), &gait(), &settings).unwrap();
    let tr = ep.run(&moderate()).unwrap();
    let t = tr.diverged_at.expect("divergent");
    assert!(t > 0.0 && t <= tr.horizon);
    assert!(tr.samples.iter().all(|s| s.q.iter().all(|v| v.is_finite())));
    let m = MetricSettings::default();
    assert_eq!(cost(&tr, &m.weights, m.transient_discard), f64::INFINITY);
    assert!(wrench_rms(&tr, 0.05).is_err());
    assert_eq!(constraint_value(&tr, &m.thresholds, 0.05) % 18, 0);
    let mut csv = Vec::new();
    tr.write_csv(&mut csv).unwrap();
    assert!(String::from_utf8(csv).unwrap().starts_with("# diverged_at="));
}

#[test]
fn trace_csv_layout() {
    let ep = PreparedEpisode::new(exo(), &HarnessConfig::from_code("[3 3 2]").unwrap(), &gait(), &EpisodeSettings::default()).unwrap();
    let tr = ep.run(&moderate()).unwrap();
    let mut buf = Vec::new();
    tr.write_csv(&mut buf).unwrap();
    let mut rd = csv::Reader::from_reader(buf.as_slice());
    let header = rd.headers().unwrap().clone();
    assert_eq!(header.len(), 1 + 42 + 18 + 42 + 42 + 18 + 6);
    assert_eq!(&header[0], "time");
    assert_eq!(&header[1], "w_thigh_r_mx");
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), tr.len());
    let t_last: f64 = rows.last().unwrap()[0].parse().unwrap();
    assert_relative_eq!(t_last, tr.horizon, epsilon = 1e-12);
}

#[test]
fn episode_spans_the_single_support_window() {
    let g = gait();
    let ep = PreparedEpisode::new(exo(), &HarnessConfig::from_code("[0 1 0]").unwrap(), &g, &EpisodeSettings::default()).unwrap();
    let cycle = g.len() as f64 / g.sample_rate;
    let tr = ep.run(&moderate()).unwrap();
    assert_relative_eq!(tr.horizon - tr.start, 0.38 * cycle, epsilon = 2.0 / g.sample_rate);
    let full = EpisodeSettings { window: EpisodeWindow::FULL, ..Default::default() };
    let ep = PreparedEpisode::new(exo(), &HarnessConfig::from_code("[0 1 0]").unwrap(), &g, &full).unwrap();
    assert!(ep.steps() > 1000);
}

/// Energy balance along an episode: the change of kinetic, gravitational and
/// lock-spring energy equals the work of the interface wrenches and the
/// actuators. Integrated with RK4 at 0.1 ms and softened harness gains.
#[test]
fn power_bookkeeping() {
    let e = exo();
    let settings = EpisodeSettings {
        dt: 1e-4,
        integrator: IntegratorKind::Rk4,
        lock: LockSettings { stiffness: 1e4, damping: Some(0.0) },
        ..Default::default()
    };
    let ep = PreparedEpisode::new(e.clone(), &HarnessConfig::from_code("[3 3 2]").unwrap(), &gait(), &settings).unwrap();
    let imp = InterfaceImpedances::uniform(
        ImpedanceParams::isotropic(50.0, 1e3, 0.05, 1.0),
        ImpedanceParams::isotropic(PELVIS_K_ROT, PELVIS_K_TRANS, 0.2, 20.0),
    );
    let mut f = CoupledForces::new(&ep, &imp);
    let mut lin = Linearization::zeros(e.dof_count());
    let s0 = ep.initial_state();
    f.evaluate(s0.time, &s0.q, &s0.qdot, Some(&mut lin)).unwrap();
    assert!(stability_report(&e.tree, &s0.q, &lin, settings.dt).unwrap().rk4_stable());
    let tr = ep.run(&imp).unwrap();
    assert!(!tr.is_diverged());
    let tree = &e.tree;
    let g = settings.gravity;
    let lock = ep.lock_gains();
    let actuated = e.actuated_dofs();
    let energy = |q: &DVector<f64>, qd: &DVector<f64>| {
        let spring: f64 = (0..q.len()).map(|i| 0.5 * lock.stiffness[i] * (q[i] - lock.q0[i]).powi(2)).sum();
        kinetic_energy(tree, q, qd) + potential_energy(tree, q, &g) + spring
    };
    let mut powers = Vec::with_capacity(tr.len());
    for s in &tr.samples {
        let q = DVector::from_column_slice(&s.q);
        let qd = DVector::from_column_slice(&s.qdot);
        let kin = forward_kinematics(tree, &SystemState::new(q.clone(), qd.clone(), s.time)).unwrap();
        let mut p = 0.0;
        for id in InterfaceId::ALL {
            let (body, point) = ep.exo_point(id);
            let st = kin.point_state(body, &point);
            let w = &s.wrenches[id.index()];
            let r = &st.pose.rotation;
            let torque = r.rotate(&nalgebra::Vector3::new(w[0], w[1], w[2]));
            let force = r.rotate(&nalgebra::Vector3::new(w[3], w[4], w[5]));
            p += torque.dot(&st.twist.angular) + force.dot(&st.twist.linear);
        }
        let tau = gravity_forces(tree, &q, &g).unwrap();
        p += actuated.iter().map(|&d| tau[d] * qd[d]).sum::<f64>();
        powers.push(p);
    }
    let dt = settings.dt;
    let work: f64 = powers.windows(2).map(|w| 0.5 * (w[0] + w[1]) * dt).sum();
    let abs_work: f64 = powers.windows(2).map(|w| 0.5 * (w[0].abs() + w[1].abs()) * dt).sum();
    let (first, last) = (&tr.samples[0], tr.samples.last().unwrap());
    let de = energy(&DVector::from_column_slice(&last.q), &DVector::from_column_slice(&last.qdot))
        - energy(&DVector::from_column_slice(&first.q), &DVector::from_column_slice(&first.qdot));
    let scale = abs_work.max(de.abs());
    assert!(scale > 1.0, "the episode must exchange a meaningful amount of energy ({scale} J)");
    assert!((de - work).abs() <= 0.01 * scale, "ΔE = {de} J, work = {work} J, scale {scale} J");
}
