//! Fixed-time traffic signals on a one-dimensional corridor.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("signal {index}: {reason}")]
    InvalidPlan { index: usize, reason: String },
    #[error("corridor: {0}")]
    InvalidCorridor(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Phase {
    Green,
    Yellow,
    Red,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Green => "Green",
            Phase::Yellow => "Yellow",
            Phase::Red => "Red",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Green" => Ok(Phase::Green),
            "Yellow" => Ok(Phase::Yellow),
            "Red" => Ok(Phase::Red),
            other => Err(format!("unknown phase `{other}`")),
        }
    }
}

/// One fixed-time signal: green, then yellow, then red, repeating every
/// `cycle_length` seconds shifted by `offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalPlan {
    pub stop_line_position: f64,
    pub cycle_length: f64,
    pub offset: f64,
    pub green: f64,
    pub yellow: f64,
    pub red: f64,
}

/// Tolerance on `green + yellow + red == cycle_length`.
const CYCLE_SUM_TOL: f64 = 1e-9;
/// Distance to a phase boundary below which a cycle time counts as on it, s.
const PHASE_SNAP: f64 = 1e-9;

impl SignalPlan {
    pub fn validate(&self, index: usize) -> Result<(), SignalError> {
        let fail = |reason: String| Err(SignalError::InvalidPlan { index, reason });
        let all = [
            self.stop_line_position,
            self.cycle_length,
            self.offset,
            self.green,
            self.yellow,
            self.red,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return fail("all fields must be finite".into());
        }
        if self.green < 0.0 || self.yellow < 0.0 || self.red < 0.0 {
            return fail("phase durations must be >= 0".into());
        }
        if self.cycle_length <= 0.0 {
            return fail("cycle_length must be > 0".into());
        }
        let sum = self.green + self.yellow + self.red;
        if (sum - self.cycle_length).abs() > CYCLE_SUM_TOL * self.cycle_length.max(1.0) {
            return fail(format!(
                "green + yellow + red = {sum} does not equal cycle_length = {}",
                self.cycle_length
            ));
        }
        if !(0.0..self.cycle_length).contains(&self.offset) {
            return fail(format!("offset {} must lie in [0, cycle_length)", self.offset));
        }
        Ok(())
    }

    /// Position within the cycle, in `[0, cycle_length)`. Values within
    /// `PHASE_SNAP` of a phase boundary are moved onto it, so that times on
    /// a decimal grid land on the boundary they denote.
    fn cycle_time(&self, time: f64) -> f64 {
        let c = (time - self.offset).rem_euclid(self.cycle_length);
        for edge in [self.green, self.green + self.yellow] {
            if (c - edge).abs() <= PHASE_SNAP {
                return edge;
            }
        }
        // rem_euclid can round up to exactly the modulus for tiny negatives
        if c >= self.cycle_length - PHASE_SNAP || c <= PHASE_SNAP {
            0.0
        } else {
            c
        }
    }

    /// Seconds until the current phase ends.
    pub fn time_to_next_phase(&self, time: f64) -> f64 {
        let c = self.cycle_time(time);
        if c < self.green {
            self.green - c
        } else if c < self.green + self.yellow {
            self.green + self.yellow - c
        } else {
            self.cycle_length - c
        }
    }
}

/// Phase of `plan` at `time`, using half-open intervals
/// `[0, green)`, `[green, green+yellow)`, `[green+yellow, cycle)`.
pub fn phase_at(plan: &SignalPlan, time: f64) -> Phase {
    let c = plan.cycle_time(time);
    if c < plan.green {
        Phase::Green
    } else if c < plan.green + plan.yellow {
        Phase::Yellow
    } else {
        Phase::Red
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corridor {
    pub length: f64,
    /// Sorted by strictly increasing stop-line position.
    pub signals: Vec<SignalPlan>,
    pub speed_limit: f64,
}

impl Corridor {
    pub fn validate(&self) -> Result<(), SignalError> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(SignalError::InvalidCorridor("length must be > 0".into()));
        }
        if !(self.speed_limit.is_finite() && self.speed_limit > 0.0) {
            return Err(SignalError::InvalidCorridor("speed_limit must be > 0".into()));
        }
        for (i, s) in self.signals.iter().enumerate() {
            s.validate(i)?;
            if !(s.stop_line_position > 0.0 && s.stop_line_position < self.length) {
                return Err(SignalError::InvalidPlan {
                    index: i,
                    reason: format!(
                        "stop line {} outside corridor (0, {})",
                        s.stop_line_position, self.length
                    ),
                });
            }
        }
        for (i, w) in self.signals.windows(2).enumerate() {
            if w[1].stop_line_position <= w[0].stop_line_position {
                return Err(SignalError::InvalidPlan {
                    index: i + 1,
                    reason: "stop lines must be strictly increasing".into(),
                });
            }
        }
        Ok(())
    }

    /// Index of the first signal whose stop line is strictly ahead of `position`.
    pub fn next_signal(&self, position: f64) -> Option<usize> {
        self.signals
            .iter()
            .position(|s| s.stop_line_position > position)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(offset: f64) -> SignalPlan {
        SignalPlan {
            stop_line_position: 100.0,
            cycle_length: 60.0,
            offset,
            green: 30.0,
            yellow: 5.0,
            red: 25.0,
        }
    }

    #[test]
    fn boundaries_are_half_open() {
        let p = plan(0.0);
        assert_eq!(phase_at(&p, 0.0), Phase::Green);
        assert_eq!(phase_at(&p, 29.999), Phase::Green);
        assert_eq!(phase_at(&p, 30.0), Phase::Yellow);
        assert_eq!(phase_at(&p, 34.9), Phase::Yellow);
        assert_eq!(phase_at(&p, 35.0), Phase::Red);
        assert_eq!(phase_at(&p, 59.999), Phase::Red);
        assert_eq!(phase_at(&p, 60.0), Phase::Green);
    }

    #[test]
    fn offset_shifts_cycle() {
        // (62 - 10) mod 60 = 52 falls in the red interval [35, 60)
        assert_eq!(phase_at(&plan(10.0), 62.0), Phase::Red);
        // before the offset the cycle wraps backwards: (5 - 10) mod 60 = 55
        assert_eq!(phase_at(&plan(10.0), 5.0), Phase::Red);
        assert_eq!(phase_at(&plan(10.0), 10.0), Phase::Green);
    }

    #[test]
    fn time_to_next() {
        let p = plan(0.0);
        assert_eq!(p.time_to_next_phase(0.0), 30.0);
        assert_eq!(p.time_to_next_phase(31.0), 4.0);
        assert_eq!(p.time_to_next_phase(50.0), 10.0);
    }

    #[test]
    fn validation() {
        assert!(plan(0.0).validate(0).is_ok());
        let mut p = plan(0.0);
        p.red = 20.0;
        let err = p.validate(3).unwrap_err();
        assert!(err.to_string().contains("signal 3"), "{err}");
        assert!(plan(60.0).validate(0).is_err());
        let corridor = Corridor {
            length: 500.0,
            signals: vec![plan(0.0), plan(0.0)],
            speed_limit: 15.0,
        };
        assert!(corridor.validate().is_err());
    }

    #[test]
    fn next_signal_lookup() {
        let mut a = plan(0.0);
        a.stop_line_position = 100.0;
        let mut b = plan(0.0);
        b.stop_line_position = 200.0;
        let c = Corridor { length: 300.0, signals: vec![a, b], speed_limit: 15.0 };
        assert_eq!(c.next_signal(0.0), Some(0));
        assert_eq!(c.next_signal(100.0), Some(1));
        assert_eq!(c.next_signal(250.0), None);
    }
}
