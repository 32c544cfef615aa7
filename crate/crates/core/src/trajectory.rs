//! Trajectory export: delimited text, one row per agent per emitted step.
//!
//! Format: header `step,agent,x,y,vx,vy,radius`, rows ordered by
//! (step, agent) ascending, every float printed as a fixed decimal with
//! nine significant digits. Output bytes depend only on the simulation
//! state, never on thread count or timing.

use std::io::{self, Write};

use crate::agent::Agents;

/// Fixed-point decimal with nine significant digits (no exponent).
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        // -0.0 normalizes to 0.0; non-finite values never reach export
        // (solver invariant) but render readably if they somehow do.
        if v.is_finite() {
            return "0.000000000".to_string();
        }
        return format!("{v}");
    }
    // Exponent after rounding to 9 significant digits.
    let sci = format!("{v:.8e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    let decimals = (8 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

pub const TRAJECTORY_HEADER: &str = "step,agent,x,y,vx,vy,radius";

/// Streaming CSV writer for trajectory snapshots.
pub struct TrajectoryWriter<W: Write> {
    out: W,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "{TRAJECTORY_HEADER}")?;
        Ok(Self { out })
    }

    /// Append one row per agent for the given step index.
    pub fn write_step(&mut self, step: u64, agents: &Agents) -> io::Result<()> {
        for i in 0..agents.len() {
            writeln!(
                self.out,
                "{step},{i},{},{},{},{},{}",
                format_sig9(agents.pos[i].x),
                format_sig9(agents.pos[i].y),
                format_sig9(agents.vel[i].x),
                format_sig9(agents.vel[i].y),
                format_sig9(agents.radius[i]),
            )?;
        }
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec2;

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(0.0), "0.000000000");
        assert_eq!(format_sig9(-0.0), "0.000000000");
        assert_eq!(format_sig9(1.0), "1.00000000");
        assert_eq!(format_sig9(-2.5), "-2.50000000");
        assert_eq!(format_sig9(123.456789123), "123.456789");
        assert_eq!(format_sig9(0.000123456789), "0.000123456789");
        // At or above 1e9 the integer part already carries >= 9 digits
        // and prints exactly.
        assert_eq!(format_sig9(1234567891.0), "1234567891");
    }

    #[test]
    fn one_agent_one_step() {
        let mut agents = Agents::default();
        agents.push(Vec2::new(1.5, -0.25), 0.5, 1.0, 1.4, 0, 0, 0);
        let mut w = TrajectoryWriter::new(Vec::new()).unwrap();
        w.write_step(0, &agents).unwrap();
        let text = String::from_utf8(w.into_inner()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], TRAJECTORY_HEADER);
        assert_eq!(
            lines[1],
            "0,0,1.50000000,-0.250000000,0.000000000,0.000000000,0.500000000"
        );
    }

    /// Parsing the printed decimals back reproduces the values at printed
    /// precision (9 significant digits).
    #[test]
    fn round_trip_at_printed_precision() {
        for &v in &[
            1.0 / 3.0,
            -123.456789456,
            0.029166666666,
            1e-7 * 3.33333333,
            98765.43215,
        ] {
            let printed = format_sig9(v);
            let back: f64 = printed.parse().unwrap();
            let rel = ((back - v) / v).abs();
            assert!(rel < 5e-9, "{v} -> {printed} -> {back} (rel {rel})");
        }
    }
}
