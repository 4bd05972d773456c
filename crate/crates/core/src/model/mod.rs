//! Articulated models: the generic kinematic tree, its kinematics, the
//! exoskeleton builder and the model description file.

mod exoskeleton;
mod file;
mod kinematics;
mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use exoskeleton::{
    build_exoskeleton, AnatomicalDof, ExoskeletonModel, HarnessChain, InterfacePoint, MassFractions, ModelLayout,
    HARNESS_DOF_NAMES,
};
pub use file::{AnthropometricsSource, ModelFile, MODEL_FORMAT_VERSION};
pub use kinematics::{forward_kinematics, named_point_jacobian, point_jacobian, Kinematics, PointState};
#[allow(unused_imports)]
pub(crate) use kinematics::forward_kinematics_unchecked;
pub use tree::{BodySpec, JointKind, JointSpec, KinematicTree, SystemState};

use crate::spatial::SpatialError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("invalid anthropometrics: {0}")]
    Anthropometrics(String),
    #[error("unknown body '{0}'")]
    UnknownBody(String),
    #[error("body '{body}' has no point named '{point}'")]
    UnknownPoint { body: String, point: String },
    #[error("state dimension mismatch: tree has {expected} DoFs, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Spatial(#[from] SpatialError),
    #[error("model file: {0}")]
    File(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Right,
    Left,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Right, Side::Left];

    pub fn suffix(self) -> &'static str {
        match self {
            Side::Right => "r",
            Side::Left => "l",
        }
    }

    /// +1 for the right leg, -1 for the left: sign applied to frontal and
    /// transverse rotation axes so that adduction and internal rotation are
    /// positive on both legs.
    pub fn mirror(self) -> f64 {
        match self {
            Side::Right => 1.0,
            Side::Left => -1.0,
        }
    }

    /// Lateral direction along world y (left is +y).
    pub fn lateral(self) -> f64 {
        -self.mirror()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Thigh,
    Shank,
    Foot,
}

impl Segment {
    pub const ALL: [Segment; 3] = [Segment::Thigh, Segment::Shank, Segment::Foot];

    pub fn name(self) -> &'static str {
        match self {
            Segment::Thigh => "thigh",
            Segment::Shank => "shank",
            Segment::Foot => "foot",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Human/exoskeleton contact interface.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterfaceId {
    ThighR,
    ShankR,
    FootR,
    ThighL,
    ShankL,
    FootL,
    Pelvis,
}

impl InterfaceId {
    /// The six limb interfaces, in the order used for wrench stacks and traces.
    pub const LIMB: [InterfaceId; 6] = [
        InterfaceId::ThighR,
        InterfaceId::ShankR,
        InterfaceId::FootR,
        InterfaceId::ThighL,
        InterfaceId::ShankL,
        InterfaceId::FootL,
    ];
    pub const ALL: [InterfaceId; 7] = [
        InterfaceId::ThighR,
        InterfaceId::ShankR,
        InterfaceId::FootR,
        InterfaceId::ThighL,
        InterfaceId::ShankL,
        InterfaceId::FootL,
        InterfaceId::Pelvis,
    ];

    pub fn limb(segment: Segment, side: Side) -> InterfaceId {
        let i = segment.index() + if side == Side::Left { 3 } else { 0 };
        Self::LIMB[i]
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn segment(self) -> Option<Segment> {
        match self {
            InterfaceId::ThighR | InterfaceId::ThighL => Some(Segment::Thigh),
            InterfaceId::ShankR | InterfaceId::ShankL => Some(Segment::Shank),
            InterfaceId::FootR | InterfaceId::FootL => Some(Segment::Foot),
            InterfaceId::Pelvis => None,
        }
    }

    pub fn side(self) -> Option<Side> {
        match self {
            InterfaceId::ThighR | InterfaceId::ShankR | InterfaceId::FootR => Some(Side::Right),
            InterfaceId::ThighL | InterfaceId::ShankL | InterfaceId::FootL => Some(Side::Left),
            InterfaceId::Pelvis => None,
        }
    }

    pub fn name(self) -> String {
        match (self.segment(), self.side()) {
            (Some(seg), Some(side)) => format!("{}_{}", seg.name(), side.suffix()),
            _ => "pelvis".to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Articulation {
    Hip,
    Knee,
    Ankle,
}

impl Articulation {
    pub const ALL: [Articulation; 3] = [Articulation::Hip, Articulation::Knee, Articulation::Ankle];

    pub fn name(self) -> &'static str {
        match self {
            Articulation::Hip => "hip",
            Articulation::Knee => "knee",
            Articulation::Ankle => "ankle",
        }
    }

    /// Anatomical flexion axis of the distal segment relative to the proximal
    /// one: hip flexion, knee flexion and ankle dorsiflexion are positive.
    pub fn flexion_axis(self) -> crate::spatial::Vec3 {
        match self {
            Articulation::Hip | Articulation::Ankle => -crate::spatial::Vec3::y(),
            Articulation::Knee => crate::spatial::Vec3::y(),
        }
    }

    pub fn actuated(self) -> bool {
        !matches!(self, Articulation::Ankle)
    }
}

/// Wearer body dimensions [m, kg].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Anthropometrics {
    pub label: String,
    #[serde(default)]
    pub stature: Option<f64>,
    #[serde(default)]
    pub body_mass: Option<f64>,
    pub thigh_length: f64,
    pub shank_length: f64,
    pub foot_length: f64,
    pub pelvis_width: f64,
    pub pelvis_mass: f64,
    pub thigh_mass: f64,
    pub shank_mass: f64,
    pub foot_mass: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Percentile {
    #[serde(rename = "p025")]
    P025,
    #[serde(rename = "p50")]
    P50,
    #[serde(rename = "p975")]
    P975,
}

impl Percentile {
    pub const ALL: [Percentile; 3] = [Percentile::P025, Percentile::P50, Percentile::P975];

    pub fn label(self) -> &'static str {
        match self {
            Percentile::P025 => "p025",
            Percentile::P50 => "p50",
            Percentile::P975 => "p975",
        }
    }

    pub fn parse(s: &str) -> Option<Percentile> {
        match s.trim().to_ascii_lowercase().as_str() {
            "p025" | "2.5" | "p2.5" => Some(Percentile::P025),
            "p50" | "50" => Some(Percentile::P50),
            "p975" | "97.5" | "p97.5" => Some(Percentile::P975),
            _ => None,
        }
    }
}

impl Anthropometrics {
    /// Shipped percentile tables (replaceable data files).
    pub fn percentile(p: Percentile) -> Anthropometrics {
        let text = match p {
            Percentile::P025 => include_str!("../../data/anthropometrics_p025.json"),
            Percentile::P50 => include_str!("../../data/anthropometrics_p50.json"),
            Percentile::P975 => include_str!("../../data/anthropometrics_p975.json"),
        };
        serde_json::from_str(text).expect("shipped anthropometric table parses")
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("thigh_length", self.thigh_length),
            ("shank_length", self.shank_length),
            ("foot_length", self.foot_length),
            ("pelvis_width", self.pelvis_width),
            ("pelvis_mass", self.pelvis_mass),
            ("thigh_mass", self.thigh_mass),
            ("shank_mass", self.shank_mass),
            ("foot_mass", self.foot_mass),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ModelError::Anthropometrics(format!("{name} must be strictly positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn segment_length(&self, s: Segment) -> f64 {
        match s {
            Segment::Thigh => self.thigh_length,
            Segment::Shank => self.shank_length,
            Segment::Foot => self.foot_length,
        }
    }
}
