use std::io::{self, Write};

use crate::linalg;

#[derive(Clone, Debug, PartialEq)]
pub enum TrajectoryStatus {
    Completed,
    /// `S(t)` was empty at the given grid time; the trajectory stops before it.
    EmptySweptSet { t: f64 },
    /// `|x|` exceeded the divergence bound at the given time.
    Diverged { t: f64 },
}

/// Discrete curve on a strictly increasing time grid.
///
/// `step_speeds[k]` and the breakpoint flag refer to the step from node `k`
/// to node `k + 1`; `breakpoints` stores the index `k + 1` of the node where
/// a new piece starts.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub step_speeds: Vec<f64>,
    pub cum_length: Vec<f64>,
    pub breakpoints: Vec<usize>,
    pub status: TrajectoryStatus,
    /// Nodes whose projection did not certify convergence.
    pub warnings: Vec<usize>,
    /// Projection of the initial point onto the first slice, when the
    /// initial point was outside it. Step 0 then starts from this point as
    /// far as `step_speeds` is concerned.
    pub initial_projection: Option<Vec<f64>>,
}

impl Trajectory {
    /// Builds speeds and lengths from a plain polyline.
    pub fn from_polyline(times: Vec<f64>, points: Vec<Vec<f64>>, status: TrajectoryStatus) -> Self {
        let mut step_speeds = Vec::with_capacity(points.len().saturating_sub(1));
        let mut cum_length = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        cum_length.push(0.0);
        for k in 1..points.len() {
            let step = linalg::dist(&points[k], &points[k - 1]);
            acc += step;
            cum_length.push(acc);
            step_speeds.push(step / (times[k] - times[k - 1]));
        }
        if points.is_empty() {
            cum_length.clear();
        }
        Trajectory {
            times,
            points,
            step_speeds,
            cum_length,
            breakpoints: Vec::new(),
            status,
            warnings: Vec::new(),
            initial_projection: None,
        }
    }

    /// Number of steps.
    pub fn steps(&self) -> usize {
        self.points.len().saturating_sub(1)
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn total_length(&self) -> f64 {
        self.cum_length.last().copied().unwrap_or(0.0)
    }

    pub fn is_breakpoint_step(&self, k: usize) -> bool {
        self.breakpoints.binary_search(&(k + 1)).is_ok()
    }

    /// Start of step `k` as seen by the inclusion (the projected initial
    /// point for step 0 when the initial point was outside the set).
    pub fn step_origin(&self, k: usize) -> &[f64] {
        match (&self.initial_projection, k) {
            (Some(p), 0) => p,
            _ => &self.points[k],
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.points.iter().map(|p| linalg::norm(p)).fold(0.0, f64::max)
    }

    /// Cumulative length at time `t` by linear interpolation on the grid.
    pub fn length_at(&self, t: f64) -> Option<f64> {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 || self.times.is_empty() {
            return None;
        }
        if k == self.times.len() {
            return (t <= *self.times.last()? + 1e-12).then(|| self.total_length());
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        Some(self.cum_length[k - 1] + w * (self.cum_length[k] - self.cum_length[k - 1]))
    }

    /// CSV with columns `t, x_1..x_n, step_speed, cum_length, is_breakpoint`.
    /// Row `k` carries the speed of the step arriving at node `k` (empty on
    /// the first row).
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.dim();
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        header.extend(["step_speed", "cum_length", "is_breakpoint"].map(String::from));
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.points.len() {
            let mut row = vec![fmt(self.times[k])];
            row.extend(self.points[k].iter().map(|&v| fmt(v)));
            row.push(if k == 0 { String::new() } else { fmt(self.step_speeds[k - 1]) });
            row.push(fmt(self.cum_length[k]));
            let bp = k > 0 && self.breakpoints.binary_search(&k).is_ok();
            row.push(if bp { "1" } else { "0" }.to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Shortest round-trip representation.
pub fn fmt(v: f64) -> String {
    format!("{v:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polyline_bookkeeping() {
        let t = Trajectory::from_polyline(
            vec![0.0, 1.0, 3.0],
            vec![vec![0.0, 0.0], vec![3.0, 4.0], vec![3.0, 0.0]],
            TrajectoryStatus::Completed,
        );
        assert_eq!(t.step_speeds, vec![5.0, 2.0]);
        assert_eq!(t.cum_length, vec![0.0, 5.0, 9.0]);
        assert_eq!(t.length_at(2.0), Some(7.0));
        assert_eq!(t.max_norm(), 5.0);
    }

    #[test]
    fn csv_layout() {
        let mut t = Trajectory::from_polyline(
            vec![0.0, 0.5],
            vec![vec![1.0], vec![2.0]],
            TrajectoryStatus::Completed,
        );
        t.breakpoints = vec![1];
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(
            s,
            "t,x_1,step_speed,cum_length,is_breakpoint\n0.0,1.0,,0.0,0\n0.5,2.0,2.0,1.0,1\n"
        );
    }
}
