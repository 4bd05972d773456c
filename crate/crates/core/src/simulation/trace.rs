use std::io::Write;

use crate::human::CHANNELS;
use crate::model::InterfaceId;

/// Wrench component names, torques first.
pub const WRENCH_COMPONENTS: [&str; 6] = ["mx", "my", "mz", "fx", "fy", "fz"];

/// State of the coupled system at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub time: f64,
    /// Interaction wrench acting on the exoskeleton, per interface in
    /// [`InterfaceId::ALL`] order, in the exoskeleton interface frame.
    pub wrenches: [[f64; 6]; 7],
    /// Human minus exoskeleton interface position in the exoskeleton
    /// interface frame, three components per limb interface.
    pub distances: [f64; 18],
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    pub human_q: [f64; 18],
    /// Exoskeleton joint angle minus human flexion angle, per anatomical joint.
    pub tracking: [f64; 6],
}

/// Time histories of one episode. A divergent episode is truncated after the
/// last finite sample and flagged with the time at which integration failed.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationTrace {
    pub samples: Vec<Sample>,
    pub dof_names: Vec<String>,
    pub tracking_joints: [&'static str; 6],
    pub start: f64,
    /// Planned end time of the episode.
    pub horizon: f64,
    pub dt: f64,
    pub diverged_at: Option<f64>,
}

impl SimulationTrace {
    pub fn is_diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Number of instants on the full (untruncated) time grid.
    pub fn planned_len(&self) -> usize {
        ((self.horizon - self.start) / self.dt + 1e-9).floor() as usize + 1
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.time).collect()
    }

    /// Wrench history of one interface component.
    pub fn wrench_series(&self, id: InterfaceId, component: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.wrenches[id.index()][component]).collect()
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut cols = vec!["time".to_string()];
        for id in InterfaceId::ALL {
            cols.extend(WRENCH_COMPONENTS.iter().map(|c| format!("w_{}_{c}", id.name())));
        }
        for id in InterfaceId::LIMB {
            cols.extend(["x", "y", "z"].iter().map(|c| format!("d_{}_{c}", id.name())));
        }
        cols.extend(self.dof_names.iter().map(|n| format!("q_{n}")));
        cols.extend(self.dof_names.iter().map(|n| format!("qd_{n}")));
        cols.extend(CHANNELS.iter().map(|n| format!("human_{n}")));
        cols.extend(self.tracking_joints.iter().map(|n| format!("diff_{n}")));
        cols
    }

    /// One row per instant. A divergent trace starts with a
    /// `# diverged_at=<t>` comment line.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        if let Some(t) = self.diverged_at {
            writeln!(writer, "# diverged_at={t}")?;
        }
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.column_names())?;
        for s in &self.samples {
            let mut row = vec![s.time];
            row.extend(s.wrenches.iter().flatten());
            row.extend(s.distances);
            row.extend(&s.q);
            row.extend(&s.qdot);
            row.extend(s.human_q);
            row.extend(s.tracking);
            w.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()
    }
}
