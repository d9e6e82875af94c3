use alloc::vec::Vec;

use crate::ego::reorigin_timestamps;
use crate::error::{invalid, Result};
use crate::types::Command;

/// Commands received up to "now", re-timed so that now is zero, plus `K`
/// zero-order-hold samples on a uniform grid over the last `span` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandWindow {
    pub span: f64,
    /// `(s_c, omega_c)` held at `-span + (j + 1) * span / K`, oldest first.
    pub bins: Vec<(f64, f64)>,
    /// Re-timed commands (all `t <= 0`), sorted by time. The first entry may
    /// predate the reach so that the value held at the start is known.
    held: Vec<Command>,
}

impl CommandWindow {
    /// Builds a window from already re-timed commands in any order.
    pub fn from_commands(mut cmds: Vec<Command>, span: f64, bins: usize) -> Result<Self> {
        if bins == 0 || !(span > 0.0) {
            return Err(invalid!("command window needs span > 0 and at least one bin"));
        }
        if cmds.iter().any(|c| c.t > 0.0) {
            return Err(invalid!("command window holds a command from the future"));
        }
        cmds.sort_by(|a, b| a.t.total_cmp(&b.t));
        let mut w = CommandWindow { span, bins: Vec::with_capacity(bins), held: cmds };
        let step = span / bins as f64;
        for j in 0..bins {
            let at = -span + (j + 1) as f64 * step;
            let v = w.hold_at(at);
            w.bins.push(v);
        }
        Ok(w)
    }

    /// Gathers from a time-sorted command stream the commands issued in
    /// `[now - reach, now]` (plus the one in force at `now - reach`), re-times
    /// them and samples the bins. `reach` is clamped to at least `span`.
    pub fn gather(stream: &[Command], now: f64, span: f64, bins: usize, reach: f64) -> Result<Self> {
        let reach = reach.max(span);
        let end = stream.partition_point(|c| c.t <= now);
        let first = stream[..end].partition_point(|c| c.t - now < -reach).saturating_sub(1);
        let cmds = reorigin_timestamps(&stream[first..end], now)?;
        Self::from_commands(cmds, span, bins)
    }

    /// Command in force at relative time `t <= 0`; `(0, 0)` before the first
    /// known command.
    pub fn hold_at(&self, t: f64) -> (f64, f64) {
        let n = self.held.partition_point(|c| c.t <= t);
        match n.checked_sub(1) {
            Some(i) => (self.held[i].s_c, self.held[i].omega_c),
            None => (0.0, 0.0),
        }
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Re-timed raw commands held by the window.
    pub fn commands(&self) -> &[Command] {
        &self.held
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins_hold_last_command() {
        let stream: Vec<Command> =
            (0..30).map(|i| Command::new(i as f64 * 0.04 + 0.0047, i as f64, -(i as f64))).collect();
        let w = CommandWindow::gather(&stream, 1.0, 0.2, 5, 0.2).unwrap();
        // grid at now-0.16 .. now; commands every 40 ms offset by 4.7 ms
        let expect: Vec<f64> =
            [0.84, 0.88, 0.92, 0.96, 1.0].iter().map(|t| stream.iter().rfind(|c| c.t <= *t).unwrap().s_c).collect();
        let got: Vec<f64> = w.bins.iter().map(|b| b.0).collect();
        assert_eq!(got, expect);
        assert!(w.commands().iter().all(|c| c.t <= 0.0));
    }

    #[test]
    fn empty_history_holds_zero() {
        let w = CommandWindow::from_commands(Vec::new(), 0.2, 5).unwrap();
        assert_eq!(w.bins, alloc::vec![(0.0, 0.0); 5]);
    }

    #[test]
    fn arrival_order_irrelevant() {
        let cmds = alloc::vec![
            Command::new(-0.19, 1.0, 0.0),
            Command::new(-0.13, 0.5, 0.1),
            Command::new(-0.125, 0.7, 0.2),
            Command::new(-0.01, 0.2, -0.3),
        ];
        let mut shuffled = cmds.clone();
        shuffled.swap(1, 2);
        shuffled.swap(0, 3);
        let a = CommandWindow::from_commands(cmds, 0.2, 5).unwrap();
        let b = CommandWindow::from_commands(shuffled, 0.2, 5).unwrap();
        assert_eq!(a.bins, b.bins);
    }

    #[test]
    fn rejects_future_and_bad_shape() {
        assert!(CommandWindow::from_commands(alloc::vec![Command::new(0.1, 0.0, 0.0)], 0.2, 5).is_err());
        assert!(CommandWindow::from_commands(Vec::new(), 0.2, 0).is_err());
    }
}
