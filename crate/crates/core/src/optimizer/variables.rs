use serde::{Deserialize, Serialize};

use super::OptimizerError;
use crate::harness::{HarnessConfig, ImpedanceParams};
use crate::model::{InterfaceId, Segment, Side};
use crate::simulation::{InterfaceImpedances, REFERENCE_INERTIA};

const COMPONENTS: [&str; 6] = ["rx", "ry", "rz", "tx", "ty", "tz"];

/// Upper bounds of the decision variables.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VariableBounds {
    pub k_trans_max: f64,
    pub k_rot_max: f64,
    /// `None`: critical damping of the upper stiffness for the device mass.
    pub d_trans_max: Option<f64>,
    /// `None`: critical damping of the upper stiffness for a unit inertia.
    pub d_rot_max: Option<f64>,
    /// Decades spanned by the unit-cube log map.
    pub decades: f64,
}

impl Default for VariableBounds {
    fn default() -> Self {
        VariableBounds { k_trans_max: 1e5, k_rot_max: 5e3, d_trans_max: None, d_rot_max: None, decades: 5.0 }
    }
}

impl VariableBounds {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !ok(self.k_trans_max) || !ok(self.k_rot_max) || !ok(self.decades) {
            return Err(OptimizerError::Invalid("stiffness bounds and decades must be positive".into()));
        }
        if self.d_trans_max.is_some_and(|v| !ok(v)) || self.d_rot_max.is_some_and(|v| !ok(v)) {
            return Err(OptimizerError::Invalid("damping bounds must be positive".into()));
        }
        Ok(())
    }

    /// Per-component upper bounds `[K (rx..tz), D (rx..tz)]`.
    pub fn upper(&self, total_mass: f64) -> [f64; 12] {
        let dt = self.d_trans_max.unwrap_or(2.0 * (self.k_trans_max * total_mass).sqrt());
        let dr = self.d_rot_max.unwrap_or(2.0 * (self.k_rot_max * REFERENCE_INERTIA).sqrt());
        let (kr, kt) = (self.k_rot_max, self.k_trans_max);
        [kr, kr, kr, kt, kt, kt, dr, dr, dr, dt, dt, dt]
    }
}

/// One block of twelve variables shared by a set of interfaces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableGroup {
    pub name: String,
    pub interfaces: Vec<InterfaceId>,
}

/// Decision vector layout and the map between the unit cube and physical
/// stiffness/damping values. Each group contributes `[K rx..tz, D rx..tz]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableMap {
    groups: Vec<VariableGroup>,
    upper: Vec<f64>,
    decades: f64,
}

impl VariableMap {
    /// Connected limb interfaces only. With `tie_legs` both legs share the
    /// variables of a segment.
    pub fn new(
        harness: &HarnessConfig,
        tie_legs: bool,
        bounds: &VariableBounds,
        total_mass: f64,
    ) -> Result<Self, OptimizerError> {
        bounds.validate()?;
        let mut groups = Vec::new();
        for segment in Segment::ALL {
            let ids: Vec<InterfaceId> = Side::BOTH
                .iter()
                .map(|&side| InterfaceId::limb(segment, side))
                .filter(|&id| harness.interface_connected(id))
                .collect();
            if ids.is_empty() {
                continue;
            }
            if tie_legs {
                groups.push(VariableGroup { name: segment.name().to_string(), interfaces: ids });
            } else {
                groups.extend(ids.into_iter().map(|id| VariableGroup { name: id.name(), interfaces: vec![id] }));
            }
        }
        if groups.is_empty() {
            return Err(OptimizerError::Invalid("no connected limb interface to optimize".into()));
        }
        let block = bounds.upper(total_mass);
        let upper = groups.iter().flat_map(|_| block).collect();
        Ok(VariableMap { groups, upper, decades: bounds.decades })
    }

    pub fn dimension(&self) -> usize {
        self.upper.len()
    }

    pub fn groups(&self) -> &[VariableGroup] {
        &self.groups
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn names(&self) -> Vec<String> {
        self.groups
            .iter()
            .flat_map(|g| {
                ["k", "d"].into_iter().flat_map(move |kind| COMPONENTS.iter().map(move |c| format!("{}_{kind}_{c}", g.name)))
            })
            .collect()
    }

    /// `x = ub (10^{D u} − 1) / (10^D − 1)`: zero at `u = 0`, the bound at
    /// `u = 1`, logarithmic in between.
    pub fn to_physical(&self, u: &[f64]) -> Vec<f64> {
        let span = 10f64.powf(self.decades) - 1.0;
        u.iter().zip(&self.upper).map(|(u, ub)| ub * (10f64.powf(self.decades * u) - 1.0) / span).collect()
    }

    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        let span = 10f64.powf(self.decades) - 1.0;
        x.iter().zip(&self.upper).map(|(x, ub)| (1.0 + x / ub * span).log10() / self.decades).collect()
    }

    /// Interface impedances for a physical vector; interfaces outside every
    /// group get zero impedance.
    pub fn impedances(&self, x: &[f64], pelvis: ImpedanceParams) -> InterfaceImpedances {
        assert_eq!(x.len(), self.dimension(), "decision vector length");
        let mut out = InterfaceImpedances::uniform(ImpedanceParams::zero(), pelvis);
        for (g, block) in self.groups.iter().zip(x.chunks_exact(12)) {
            let params = ImpedanceParams {
                stiffness: std::array::from_fn(|i| block[i]),
                damping: std::array::from_fn(|i| block[6 + i]),
            };
            for &id in &g.interfaces {
                *out.get_mut(id) = params;
            }
        }
        out
    }
}
