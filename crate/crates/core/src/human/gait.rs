use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::spline::CubicSpline;
use super::HumanError;
use crate::model::{Articulation, Side};

/// Channel vocabulary of gait files, in storage order. Angles in radians.
pub const CHANNELS: [&str; 18] = [
    "hip_flex_r",
    "hip_add_r",
    "hip_rot_r",
    "knee_flex_r",
    "knee_add_r",
    "knee_rot_r",
    "ankle_flex_r",
    "ankle_inv_r",
    "ankle_rot_r",
    "hip_flex_l",
    "hip_add_l",
    "hip_rot_l",
    "knee_flex_l",
    "knee_add_l",
    "knee_rot_l",
    "ankle_flex_l",
    "ankle_inv_l",
    "ankle_rot_l",
];

/// Rotation about the flexion, frontal and transverse axes of an articulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Plane {
    Flexion,
    Frontal,
    Transverse,
}

pub fn channel_index(articulation: Articulation, plane: Plane, side: Side) -> usize {
    let a = match articulation {
        Articulation::Hip => 0,
        Articulation::Knee => 1,
        Articulation::Ankle => 2,
    };
    let p = match plane {
        Plane::Flexion => 0,
        Plane::Frontal => 1,
        Plane::Transverse => 2,
    };
    let s = if side == Side::Left { 9 } else { 0 };
    s + 3 * a + p
}

/// Fractions of the gait cycle [%] kept for the stance (right) and swing
/// (left) leg.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeWindow {
    pub stance: [f64; 2],
    pub swing: [f64; 2],
}

impl Default for EpisodeWindow {
    fn default() -> Self {
        EpisodeWindow { stance: [12.0, 50.0], swing: [62.0, 100.0] }
    }
}

impl EpisodeWindow {
    pub const FULL: EpisodeWindow = EpisodeWindow { stance: [0.0, 100.0], swing: [0.0, 100.0] };

    pub fn validate(&self) -> Result<(), HumanError> {
        for w in [self.stance, self.swing] {
            if !(0.0 <= w[0] && w[0] < w[1] && w[1] <= 100.0) {
                return Err(HumanError::Window(format!("window {w:?} must satisfy 0 ≤ start < end ≤ 100")));
            }
        }
        Ok(())
    }
}

/// Uniformly sampled joint angles of both legs.
///
/// Each leg's channels are expressed on that leg's own gait cycle, 0 % being
/// its heel strike. After [`slice_episode`] all channels share one clock and
/// `window` records the slice.
#[derive(Clone, Debug, PartialEq)]
pub struct GaitTrajectory {
    pub times: Vec<f64>,
    /// `channels[c][k]`: channel `c` (see [`CHANNELS`]) at sample `k`.
    pub channels: Vec<Vec<f64>>,
    pub sample_rate: f64,
    pub window: Option<EpisodeWindow>,
}

impl GaitTrajectory {
    pub fn new(times: Vec<f64>, channels: Vec<Vec<f64>>) -> Result<Self, HumanError> {
        if channels.len() != CHANNELS.len() {
            return Err(HumanError::Format(format!("expected {} channels, got {}", CHANNELS.len(), channels.len())));
        }
        if times.len() < 2 {
            return Err(HumanError::Format("a trajectory needs at least two samples".into()));
        }
        for (c, ch) in channels.iter().enumerate() {
            if ch.len() != times.len() {
                return Err(HumanError::Format(format!("channel {} has {} samples, expected {}", CHANNELS[c], ch.len(), times.len())));
            }
        }
        let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        let traj = GaitTrajectory { times, channels, sample_rate: 1.0 / dt, window: None };
        traj.validate()?;
        Ok(traj)
    }

    pub fn validate(&self) -> Result<(), HumanError> {
        for (k, w) in self.times.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(HumanError::Format(format!("time is not strictly increasing at sample {}", k + 1)));
            }
        }
        let dt = 1.0 / self.sample_rate;
        for (k, w) in self.times.windows(2).enumerate() {
            if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt.max(1.0) {
                return Err(HumanError::Format(format!("non-uniform sampling at sample {}", k + 1)));
            }
        }
        for (c, ch) in self.channels.iter().enumerate() {
            if let Some(k) = ch.iter().position(|v| !v.is_finite()) {
                return Err(HumanError::Format(format!("non-finite value in channel {} at sample {k}", CHANNELS[c])));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        CHANNELS.iter().position(|c| *c == name).map(|i| self.channels[i].as_slice())
    }

    /// Loads the CSV schema: a `time` column [s] and the 18 [`CHANNELS`] in
    /// any column order. Non-uniform input is linearly resampled.
    pub fn load(path: &Path) -> Result<Self, HumanError> {
        let file = std::fs::File::open(path).map_err(|e| HumanError::Io(format!("{}: {e}", path.display())))?;
        Self::read_csv(file).map_err(|e| match e {
            HumanError::Format(m) => HumanError::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, HumanError> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| HumanError::Format(e.to_string()))?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let time_col = col("time").ok_or_else(|| HumanError::Format("missing column 'time'".into()))?;
        let mut cols = Vec::with_capacity(CHANNELS.len());
        for name in CHANNELS {
            cols.push(col(name).ok_or_else(|| HumanError::Format(format!("missing channel column '{name}'")))?);
        }
        let mut times = Vec::new();
        let mut channels = vec![Vec::new(); CHANNELS.len()];
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| HumanError::Format(e.to_string()))?;
            let line = row + 2;
            let cell = |c: usize, name: &str| -> Result<f64, HumanError> {
                let text = rec.get(c).unwrap_or("");
                let v: f64 = text
                    .parse()
                    .map_err(|_| HumanError::Format(format!("row {line}, column '{name}': cannot parse '{text}'")))?;
                if !v.is_finite() {
                    return Err(HumanError::Format(format!("row {line}, column '{name}': non-finite value '{text}'")));
                }
                Ok(v)
            };
            times.push(cell(time_col, "time")?);
            for (i, &c) in cols.iter().enumerate() {
                channels[i].push(cell(c, CHANNELS[i])?);
            }
        }
        if times.len() < 2 {
            return Err(HumanError::Format("a trajectory needs at least two samples".into()));
        }
        for (k, w) in times.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(HumanError::Format(format!("time is not strictly increasing at row {}", k + 3)));
            }
        }
        let dts: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        let mut sorted = dts.clone();
        sorted.sort_by(f64::total_cmp);
        let dt = sorted[sorted.len() / 2];
        if dts.iter().all(|d| (d - dt).abs() <= 1e-4 * dt) {
            return GaitTrajectory::new(times, channels);
        }
        resample_linear(&times, &channels, dt)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), HumanError> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| HumanError::Io(e.to_string());
        let mut header = vec!["time"];
        header.extend(CHANNELS);
        w.write_record(&header).map_err(io)?;
        for k in 0..self.len() {
            let mut rec = vec![format!("{}", self.times[k])];
            rec.extend(self.channels.iter().map(|c| format!("{:.9}", c[k])));
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| HumanError::Io(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), HumanError> {
        let file = std::fs::File::create(path).map_err(|e| HumanError::Io(format!("{}: {e}", path.display())))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Spline interpolant of every channel over the sample times.
    pub fn interpolator(&self) -> GaitInterpolator {
        GaitInterpolator {
            splines: self.channels.iter().map(|c| CubicSpline::natural(&self.times, c)).collect(),
            rates: None,
            span: (self.times[0], self.times[self.len() - 1]),
        }
    }
}

fn resample_linear(times: &[f64], channels: &[Vec<f64>], dt: f64) -> Result<GaitTrajectory, HumanError> {
    let (t0, t1) = (times[0], times[times.len() - 1]);
    let n = ((t1 - t0) / dt + 1e-9).floor() as usize + 1;
    let grid: Vec<f64> = (0..n).map(|k| t0 + k as f64 * dt).collect();
    let resampled = channels
        .iter()
        .map(|ch| {
            let mut j = 0;
            grid.iter()
                .map(|&t| {
                    while j + 2 < times.len() && times[j + 1] < t {
                        j += 1;
                    }
                    let f = ((t - times[j]) / (times[j + 1] - times[j])).clamp(0.0, 1.0);
                    ch[j] + f * (ch[j + 1] - ch[j])
                })
                .collect()
        })
        .collect();
    GaitTrajectory::new(grid, resampled)
}

/// Joint angles and rates at arbitrary times.
#[derive(Clone, Debug)]
pub struct GaitInterpolator {
    splines: Vec<CubicSpline>,
    /// Separately sampled rates; `None` differentiates the angle splines.
    rates: Option<Vec<CubicSpline>>,
    span: (f64, f64),
}

impl GaitInterpolator {
    /// Takes the rates from `rates` (channels in rad/s) instead of
    /// differentiating the angle splines.
    pub fn with_rates(mut self, rates: &GaitTrajectory) -> Self {
        self.rates = Some(rates.channels.iter().map(|c| CubicSpline::natural(&rates.times, c)).collect());
        self
    }

    pub fn span(&self) -> (f64, f64) {
        self.span
    }

    /// Angles and rates of all channels at `t`.
    pub fn eval(&self, t: f64) -> Result<([f64; 18], [f64; 18]), HumanError> {
        let tol = 1e-9 * (1.0 + self.span.1.abs());
        if t < self.span.0 - tol || t > self.span.1 + tol {
            return Err(HumanError::OutOfRange { t, start: self.span.0, end: self.span.1 });
        }
        let mut q = [0.0; 18];
        let mut qd = [0.0; 18];
        for (c, s) in self.splines.iter().enumerate() {
            (q[c], qd[c]) = s.eval(t);
        }
        if let Some(rates) = &self.rates {
            for (c, s) in rates.iter().enumerate() {
                qd[c] = s.eval(t).0;
            }
        }
        Ok((q, qd))
    }
}

fn window_indices(n: usize, window: [f64; 2]) -> Vec<usize> {
    let i0 = (window[0] * n as f64 / 100.0).round() as usize;
    let i1 = (window[1] * n as f64 / 100.0).round() as usize;
    (i0..=i1).map(|i| i % n).collect()
}

/// Cuts the stance-leg (right) channels to `window.stance` and the swing-leg
/// (left) channels to `window.swing` of a one-cycle trajectory and puts both
/// on a common clock starting at zero.
///
/// Sample `i` of an `N`-sample cycle sits at `100 i / N` %; the window ends are
/// inclusive and wrap periodically. A swing slice with a different sample
/// count is resampled onto the stance clock. The full window `[0, 100]` on
/// both legs returns the input unchanged, and slicing an already sliced
/// trajectory with its own window is the identity.
pub fn slice_episode(traj: &GaitTrajectory, window: &EpisodeWindow) -> Result<GaitTrajectory, HumanError> {
    window.validate()?;
    if let Some(done) = traj.window {
        if done == *window {
            return Ok(traj.clone());
        }
        return Err(HumanError::Window(format!("trajectory was already sliced with {done:?}, cannot apply {window:?}")));
    }
    if *window == EpisodeWindow::FULL {
        let mut out = traj.clone();
        out.window = Some(*window);
        return Ok(out);
    }
    let n = traj.len();
    let stance = window_indices(n, window.stance);
    let swing = window_indices(n, window.swing);
    let m = stance.len();
    if m < 2 {
        return Err(HumanError::Window(format!("stance window {:?} holds fewer than two samples", window.stance)));
    }
    let mut channels = Vec::with_capacity(CHANNELS.len());
    for (c, ch) in traj.channels.iter().enumerate() {
        let right = c < 9;
        if right {
            channels.push(stance.iter().map(|&i| ch[i]).collect());
        } else if swing.len() == m {
            channels.push(swing.iter().map(|&i| ch[i]).collect());
        } else {
            let src: Vec<f64> = swing.iter().map(|&i| ch[i]).collect();
            let last = (src.len() - 1) as f64;
            channels.push(
                (0..m)
                    .map(|k| {
                        let x = k as f64 * last / (m - 1) as f64;
                        let j = (x.floor() as usize).min(src.len() - 2);
                        src[j] + (x - j as f64) * (src[j + 1] - src[j])
                    })
                    .collect(),
            );
        }
    }
    let dt = 1.0 / traj.sample_rate;
    let times = (0..m).map(|k| k as f64 * dt).collect();
    let mut out = GaitTrajectory::new(times, channels)?;
    out.sample_rate = traj.sample_rate;
    out.window = Some(*window);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ramp(n: usize, rate: f64) -> GaitTrajectory {
        let times = (0..n).map(|k| k as f64 / rate).collect();
        let channels = (0..18).map(|c| (0..n).map(|k| (k + 1000 * c) as f64).collect()).collect();
        GaitTrajectory::new(times, channels).unwrap()
    }

    #[test]
    fn hundred_sample_window_indices() {
        let t = ramp(100, 100.0);
        let s = slice_episode(&t, &EpisodeWindow::default()).unwrap();
        assert_eq!(s.len(), 39);
        assert_eq!(s.channels[0][0], 12.0);
        assert_eq!(s.channels[0][38], 50.0);
        assert_eq!(s.channels[9][0], 9062.0);
        // 100 % wraps to the first sample of the cycle.
        assert_eq!(s.channels[9][38], 9000.0);
        assert_eq!(s.times[0], 0.0);
    }

    #[test]
    fn stance_spans_38_percent() {
        let rate = 240.0;
        let t = ramp(274, rate);
        let cycle = 274.0 / rate;
        let s = slice_episode(&t, &EpisodeWindow::default()).unwrap();
        assert!((s.duration() / cycle - 0.38).abs() < 1.5 / 274.0);
    }

    #[test]
    fn full_window_and_reslicing() {
        let t = ramp(50, 10.0);
        let full = slice_episode(&t, &EpisodeWindow::FULL).unwrap();
        assert_eq!(full.channels, t.channels);
        assert_eq!(full.times, t.times);
        let once = slice_episode(&ramp(100, 50.0), &EpisodeWindow::default()).unwrap();
        assert_eq!(slice_episode(&once, &EpisodeWindow::default()).unwrap(), once);
        assert!(slice_episode(&once, &EpisodeWindow::FULL).is_err());
        let bad = EpisodeWindow { stance: [50.0, 12.0], swing: [62.0, 100.0] };
        assert!(slice_episode(&t, &bad).is_err());
    }

    #[test]
    fn unequal_windows_resample_swing() {
        let t = ramp(100, 100.0);
        let w = EpisodeWindow { stance: [10.0, 30.0], swing: [60.0, 100.0] };
        let s = slice_episode(&t, &w).unwrap();
        assert_eq!(s.len(), 21);
        assert_relative_eq!(s.channels[9][10], 9080.0, epsilon = 1e-9);
    }

    #[test]
    fn csv_round_trip_any_column_order() {
        let t = ramp(5, 240.0);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = GaitTrajectory::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.channels, t.channels);
        assert_relative_eq!(back.sample_rate, 240.0, epsilon = 1e-6);

        let mut header: Vec<&str> = CHANNELS.iter().rev().copied().collect();
        header.push("time");
        let mut text = header.join(",") + "\n";
        for k in 0..3 {
            let mut row: Vec<String> = (0..18).rev().map(|c| format!("{}", c as f64 * 0.01)).collect();
            row.push(format!("{}", k as f64 * 0.01));
            text += &(row.join(",") + "\n");
        }
        let g = GaitTrajectory::read_csv(text.as_bytes()).unwrap();
        assert_eq!(g.channel("hip_add_r").unwrap()[2], 0.01);
    }

    #[test]
    fn csv_diagnostics() {
        let mut header = vec!["time"];
        header.extend(CHANNELS);
        let good_row = |t: f64| {
            let mut r = vec![format!("{t}")];
            r.extend((0..18).map(|_| "0.1".to_string()));
            r.join(",")
        };
        let mut bad = good_row(0.01);
        bad = bad.replacen("0.1", "NaN", 1);
        let text = format!("{}\n{}\n{}\n", header.join(","), good_row(0.0), bad);
        let err = GaitTrajectory::read_csv(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("row 3") && err.contains("hip_flex_r"), "{err}");

        let text = format!("{}\n{}\n{}\n", header.join(","), good_row(0.1), good_row(0.0));
        assert!(GaitTrajectory::read_csv(text.as_bytes()).unwrap_err().to_string().contains("increasing"));

        let text = format!("time,hip_flex_r\n0,0\n");
        assert!(GaitTrajectory::read_csv(text.as_bytes()).unwrap_err().to_string().contains("hip_add_r"));
    }

    #[test]
    fn non_uniform_input_is_resampled() {
        let mut header = vec!["time"];
        header.extend(CHANNELS);
        let mut text = header.join(",") + "\n";
        for t in [0.0, 0.1, 0.2, 0.25, 0.4] {
            let mut r = vec![format!("{t}")];
            r.extend((0..18).map(|_| format!("{}", 2.0 * t)));
            text += &(r.join(",") + "\n");
        }
        let g = GaitTrajectory::read_csv(text.as_bytes()).unwrap();
        assert_relative_eq!(g.sample_rate, 10.0, epsilon = 1e-9);
        assert_eq!(g.len(), 5);
        assert_relative_eq!(g.channels[4][3], 0.6, epsilon = 1e-12);
    }

    #[test]
    fn constant_file_has_zero_rates() {
        let times: Vec<f64> = (0..10).map(|k| k as f64 / 240.0).collect();
        let g = GaitTrajectory::new(times, vec![vec![0.3; 10]; 18]).unwrap();
        let (q, qd) = g.interpolator().eval(0.02).unwrap();
        assert_eq!(q[5], 0.3);
        assert!(qd.iter().all(|v| *v == 0.0));
        assert!(g.interpolator().eval(1.0).is_err());
    }
}
