//! Interface impedance law, harness DoF locking and the `[x y z]`
//! configuration codes.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::model::{ExoskeletonModel, InterfaceId, Segment, HARNESS_DOF_NAMES};
use crate::spatial::{SpatialForce, SpatialMotion, Transform, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum HarnessError {
    #[error("malformed harness code '{0}': expected three digits in 0..=6, e.g. \"[0 1 0]\"")]
    MalformedCode(String),
    #[error("harness code {code} has no built-in layout; give explicit DoF masks")]
    NoPreset { code: HarnessCode },
    #[error("{segment} mask frees {got} DoFs but the code requires {expected}")]
    MaskMismatch { segment: &'static str, expected: u8, got: u8 },
    #[error("unknown harness DoF '{0}' (expected one of tx, ty, tz, rx, ry, rz)")]
    UnknownDof(String),
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

/// Diagonal interface impedance, components ordered `[rx, ry, rz, tx, ty, tz]`
/// like spatial vectors. Units: N·m/rad and N/m; N·m·s/rad and N·s/m.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceParams {
    pub stiffness: [f64; 6],
    pub damping: [f64; 6],
}

impl ImpedanceParams {
    pub fn zero() -> Self {
        ImpedanceParams { stiffness: [0.0; 6], damping: [0.0; 6] }
    }

    /// Same stiffness and damping on the three axes of each block.
    pub fn isotropic(k_rot: f64, k_trans: f64, d_rot: f64, d_trans: f64) -> Self {
        ImpedanceParams {
            stiffness: [k_rot, k_rot, k_rot, k_trans, k_trans, k_trans],
            damping: [d_rot, d_rot, d_rot, d_trans, d_trans, d_trans],
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.stiffness.iter().chain(&self.damping).any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(HarnessError::Invalid("impedance entries must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.stiffness.iter().chain(&self.damping).all(|v| *v == 0.0)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        ImpedanceParams { stiffness: self.stiffness.map(|v| v * alpha), damping: self.damping.map(|v| v * alpha) }
    }

    fn block(v: &[f64; 6], offset: usize) -> Vec3 {
        Vec3::new(v[offset], v[offset + 1], v[offset + 2])
    }
}

/// Wrench from a spring-damper between an exoskeleton frame `p_e` and a human
/// frame `p_h`, expressed in the exoskeleton frame and acting on the
/// exoskeleton. Twists are world-aligned (angular velocity, point velocity).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InteractionWrench {
    pub wrench: SpatialForce,
    /// The relative rotation was exactly π; its axis came from the tie-break.
    pub at_pi: bool,
}

impl InteractionWrench {
    /// World-aligned components, applied at the exoskeleton point.
    pub fn world(&self, p_e: &Transform) -> SpatialForce {
        SpatialForce::new(p_e.rotation.rotate(&self.wrench.torque), p_e.rotation.rotate(&self.wrench.force))
    }
}

pub fn interaction_wrench(
    params: &ImpedanceParams,
    p_h: &Transform,
    p_e: &Transform,
    v_h: &SpatialMotion,
    v_e: &SpatialMotion,
) -> InteractionWrench {
    let re = &p_e.rotation;
    let rel = re.inverse().compose(&p_h.rotation).log();
    let dw = re.inverse_rotate(&(v_h.angular - v_e.angular));
    let dp = re.inverse_rotate(&(p_h.translation - p_e.translation));
    let dv = re.inverse_rotate(&(v_h.linear - v_e.linear));
    let (k, d) = (&params.stiffness, &params.damping);
    let torque = ImpedanceParams::block(k, 0).component_mul(&rel.vector) + ImpedanceParams::block(d, 0).component_mul(&dw);
    let force = ImpedanceParams::block(k, 3).component_mul(&dp) + ImpedanceParams::block(d, 3).component_mul(&dv);
    InteractionWrench { wrench: SpatialForce::new(torque, force), at_pi: rel.at_pi }
}

/// World-aligned 6×6 stiffness and damping of an interface at the
/// exoskeleton frame, used to linearize the interaction for implicit steps.
pub fn world_impedance_matrices(params: &ImpedanceParams, p_e: &Transform) -> (DMatrix<f64>, DMatrix<f64>) {
    let r = p_e.rotation.matrix();
    let rotate = |v: &[f64; 6]| {
        let mut m = DMatrix::zeros(6, 6);
        for b in 0..2 {
            let diag = Matrix3::from_diagonal(&ImpedanceParams::block(v, 3 * b));
            m.fixed_view_mut::<3, 3>(3 * b, 3 * b).copy_from(&(r * diag * r.transpose()));
        }
        m
    };
    (rotate(&params.stiffness), rotate(&params.damping))
}

/// Set of free harness DoFs; bit `k` is `HARNESS_DOF_NAMES[k]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct DofMask(u8);

impl DofMask {
    pub const NONE: DofMask = DofMask(0);
    pub const ALL: DofMask = DofMask(0b11_1111);

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self, HarnessError> {
        let mut bits = 0u8;
        for n in names {
            let n = n.as_ref().trim();
            let k = HARNESS_DOF_NAMES
                .iter()
                .position(|d| d.eq_ignore_ascii_case(n))
                .ok_or_else(|| HarnessError::UnknownDof(n.to_string()))?;
            bits |= 1 << k;
        }
        Ok(DofMask(bits))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn is_free(self, k: usize) -> bool {
        self.0 & (1 << k) != 0
    }

    pub fn count(self) -> u8 {
        self.0.count_ones() as u8
    }

    pub fn names(self) -> Vec<&'static str> {
        (0..6).filter(|&k| self.is_free(k)).map(|k| HARNESS_DOF_NAMES[k]).collect()
    }
}

impl Serialize for DofMask {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.names().serialize(s)
    }
}

impl<'de> Deserialize<'de> for DofMask {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let names = Vec::<String>::deserialize(d)?;
        DofMask::from_names(&names).map_err(serde::de::Error::custom)
    }
}

/// Number of free DoFs at the thigh, shank and foot harnesses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HarnessCode(pub [u8; 3]);

impl FromStr for HarnessCode {
    type Err = HarnessError;

    /// Accepts `"[0 1 0]"`, `"0 1 0"`, `"[010]"`, `"0,1,0"`.
    fn from_str(s: &str) -> Result<Self, HarnessError> {
        let digits: Vec<u8> = s
            .chars()
            .filter(|c| !matches!(c, '[' | ']' | ' ' | ',' | '\t'))
            .map(|c| c.to_digit(10).map(|d| d as u8))
            .collect::<Option<_>>()
            .ok_or_else(|| HarnessError::MalformedCode(s.to_string()))?;
        match digits.as_slice() {
            [a, b, c] if digits.iter().all(|d| *d <= 6) => Ok(HarnessCode([*a, *b, *c])),
            _ => Err(HarnessError::MalformedCode(s.to_string())),
        }
    }
}

impl fmt::Display for HarnessCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{} {} {}]", self.0[0], self.0[1], self.0[2])
    }
}

impl Serialize for HarnessCode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for HarnessCode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-segment free-DoF masks, mirrored on both legs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentMasks {
    pub thigh: DofMask,
    pub shank: DofMask,
    pub foot: DofMask,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub code: HarnessCode,
    pub masks: SegmentMasks,
}

fn mask(names: &[&str]) -> DofMask {
    DofMask::from_names(names).expect("preset DoF names are valid")
}

impl HarnessConfig {
    pub const PRESET_CODES: [&'static str; 3] = ["[0 1 0]", "[2 6 1]", "[3 3 2]"];

    /// Built-in layouts; other codes need [`HarnessConfig::with_masks`].
    pub fn from_code(code: &str) -> Result<Self, HarnessError> {
        let code: HarnessCode = code.parse()?;
        let masks = match code.0 {
            [0, 1, 0] => SegmentMasks { thigh: DofMask::NONE, shank: mask(&["rz"]), foot: DofMask::NONE },
            [2, 6, 1] => SegmentMasks { thigh: mask(&["tz", "ry"]), shank: DofMask::ALL, foot: mask(&["rx"]) },
            [3, 3, 2] => SegmentMasks {
                thigh: mask(&["tz", "rx", "rz"]),
                shank: mask(&["tz", "rx", "rz"]),
                foot: mask(&["rx", "rz"]),
            },
            _ => return Err(HarnessError::NoPreset { code }),
        };
        Ok(HarnessConfig { code, masks })
    }

    pub fn with_masks(code: &str, masks: SegmentMasks) -> Result<Self, HarnessError> {
        let code: HarnessCode = code.parse()?;
        let cfg = HarnessConfig { code, masks };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        for (i, seg) in Segment::ALL.iter().enumerate() {
            let got = self.mask(*seg).count();
            if got != self.code.0[i] {
                return Err(HarnessError::MaskMismatch { segment: seg.name(), expected: self.code.0[i], got });
            }
        }
        Ok(())
    }

    pub fn mask(&self, segment: Segment) -> DofMask {
        match segment {
            Segment::Thigh => self.masks.thigh,
            Segment::Shank => self.masks.shank,
            Segment::Foot => self.masks.foot,
        }
    }

    /// A harness with all six DoFs free transmits nothing: the segment is
    /// not connected and its interface impedance is ignored.
    pub fn is_connected(&self, segment: Segment) -> bool {
        self.mask(segment) != DofMask::ALL
    }

    pub fn interface_connected(&self, id: InterfaceId) -> bool {
        id.segment().is_none_or(|s| self.is_connected(s))
    }
}

/// Lock gains shared by all locked harness DoFs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LockSettings {
    pub stiffness: f64,
    /// `None` selects `2 √(K_lock ε)` with ε the harness regularization inertia.
    pub damping: Option<f64>,
}

impl Default for LockSettings {
    fn default() -> Self {
        LockSettings { stiffness: 1e7, damping: None }
    }
}

/// Diagonal joint-space lock gains over every DoF of the exoskeleton tree;
/// zero on free harness DoFs and anatomical joints.
#[derive(Clone, Debug, PartialEq)]
pub struct LockGains {
    pub stiffness: DVector<f64>,
    pub damping: DVector<f64>,
    pub q0: DVector<f64>,
}

impl LockGains {
    pub fn zeros(n: usize) -> Self {
        LockGains { stiffness: DVector::zeros(n), damping: DVector::zeros(n), q0: DVector::zeros(n) }
    }

    pub fn for_model(model: &ExoskeletonModel, config: &HarnessConfig, settings: &LockSettings) -> Result<Self, HarnessError> {
        if !(settings.stiffness >= 0.0) || settings.damping.is_some_and(|d| !(d >= 0.0)) {
            return Err(HarnessError::Invalid("lock gains must be non-negative".into()));
        }
        let eps = model.layout.regularization;
        let d = settings.damping.unwrap_or_else(|| 2.0 * (settings.stiffness * eps).sqrt());
        let mut gains = LockGains::zeros(model.dof_count());
        for chain in &model.chains {
            let m = config.mask(chain.interface.segment().expect("limb chain"));
            for (k, &dof) in chain.dofs.iter().enumerate() {
                if !m.is_free(k) {
                    gains.stiffness[dof] = settings.stiffness;
                    gains.damping[dof] = d;
                }
            }
        }
        Ok(gains)
    }

    pub fn is_locked(&self, dof: usize) -> bool {
        self.stiffness[dof] != 0.0 || self.damping[dof] != 0.0
    }
}

/// `M_lock = K_lock (q − q₀) + D_lock q̇`, entering the dynamics with a minus sign.
pub fn lock_torque(lock: &LockGains, q: &DVector<f64>, qdot: &DVector<f64>) -> DVector<f64> {
    (q - &lock.q0).component_mul(&lock.stiffness) + qdot.component_mul(&lock.damping)
}

/// Fixed pelvis impedance: translational and rotational stiffness with
/// damping critical for the given reference mass and inertia.
pub fn pelvis_impedance(k_trans: f64, k_rot: f64, reference_mass: f64, reference_inertia: f64) -> ImpedanceParams {
    ImpedanceParams::isotropic(
        k_rot,
        k_trans,
        2.0 * (k_rot * reference_inertia).sqrt(),
        2.0 * (k_trans * reference_mass).sqrt(),
    )
}

/// Harness layout file: a code plus optional explicit masks and lock gains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnessFile {
    pub code: String,
    #[serde(default)]
    pub masks: Option<SegmentMasks>,
    #[serde(default)]
    pub lock: LockSettings,
}

impl HarnessFile {
    pub fn resolve(&self) -> Result<HarnessConfig, HarnessError> {
        match &self.masks {
            Some(m) => HarnessConfig::with_masks(&self.code, *m),
            None => HarnessConfig::from_code(&self.code),
        }
    }
}
