use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

use super::grid::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decay {
    Linear,
    Exponential,
}

impl Decay {
    /// Value at progress `t ∈ [0, 1]` between `start` and `end`.
    pub fn interpolate(self, start: f64, end: f64, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        if t == 0.0 {
            return start;
        }
        if t == 1.0 {
            return end;
        }
        match self {
            Decay::Linear => start + (end - start) * t,
            Decay::Exponential => start * (end / start).powf(t),
        }
    }
}

impl fmt::Display for Decay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decay::Linear => "linear",
            Decay::Exponential => "exponential",
        })
    }
}

impl FromStr for Decay {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(Decay::Linear),
            "exponential" | "exp" => Ok(Decay::Exponential),
            other => Err(Error::InvalidArgument(format!("unknown decay `{other}`"))),
        }
    }
}

/// Neighborhood width and learning rate over the course of training.
///
/// Presentation `n` of `iterations` sits at progress `n / (iterations - 1)`:
/// the first presentation uses the initial values and the last one the final
/// values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingSchedule {
    pub iterations: usize,
    pub r0: f64,
    pub r_final: f64,
    pub eta0: f64,
    pub eta_final: f64,
    pub radius_decay: Decay,
    pub rate_decay: Decay,
    pub seed: u64,
}

pub const DEFAULT_EPOCHS: usize = 10;
pub const DEFAULT_R_FINAL: f64 = 0.5;
pub const DEFAULT_ETA0: f64 = 0.5;
pub const DEFAULT_ETA_FINAL: f64 = 0.01;

impl TrainingSchedule {
    /// Defaults: ten epochs, initial width `max(rows, cols)² / 16` (at least
    /// the final width 0.5), learning rate 0.5 → 0.01, linear width decay and
    /// exponential rate decay.
    pub fn default_for(grid: &GridSpec, samples: usize, seed: u64) -> Self {
        let side = grid.rows.max(grid.cols) as f64;
        TrainingSchedule {
            iterations: DEFAULT_EPOCHS * samples,
            r0: (side * side / 16.0).max(DEFAULT_R_FINAL),
            r_final: DEFAULT_R_FINAL,
            eta0: DEFAULT_ETA0,
            eta_final: DEFAULT_ETA_FINAL,
            radius_decay: Decay::Linear,
            rate_decay: Decay::Exponential,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.r0, self.r_final, self.eta0, self.eta_final]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(self.r0 >= self.r_final && self.r_final > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "radius schedule needs r0 >= r_final > 0 (got {} -> {})",
                self.r0, self.r_final
            )));
        }
        if !(1.0 >= self.eta0 && self.eta0 >= self.eta_final && self.eta_final > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate needs 1 >= eta0 >= eta_final > 0 (got {} -> {})",
                self.eta0, self.eta_final
            )));
        }
        Ok(())
    }

    pub fn progress(&self, n: usize) -> f64 {
        if self.iterations <= 1 {
            0.0
        } else {
            n.min(self.iterations - 1) as f64 / (self.iterations - 1) as f64
        }
    }

    pub fn radius(&self, n: usize) -> f64 {
        self.radius_decay
            .interpolate(self.r0, self.r_final, self.progress(n))
    }

    pub fn rate(&self, n: usize) -> f64 {
        self.rate_decay
            .interpolate(self.eta0, self.eta_final, self.progress(n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults() {
        let g = GridSpec::rectangular(32, 24).unwrap();
        let s = TrainingSchedule::default_for(&g, 100, 1);
        assert_eq!(s.iterations, 1000);
        assert_eq!(s.r0, 64.0);
        assert_eq!((s.r_final, s.eta0, s.eta_final), (0.5, 0.5, 0.01));
        s.validate().unwrap();
        let tiny = TrainingSchedule::default_for(&GridSpec::rectangular(1, 1).unwrap(), 1, 1);
        tiny.validate().unwrap();
    }

    #[test]
    fn validation() {
        let g = GridSpec::rectangular(4, 4).unwrap();
        let mut s = TrainingSchedule::default_for(&g, 10, 0);
        s.eta0 = 1.5;
        assert!(s.validate().is_err());
        s.eta0 = 0.5;
        s.r_final = 0.0;
        assert!(s.validate().is_err());
    }

    proptest! {
        #[test]
        fn schedule_is_monotone_and_hits_finals(
            iterations in 2usize..500,
            r_final in 0.01f64..5.0,
            extra_r in 0.0f64..50.0,
            eta_final in 0.001f64..0.5,
            extra_eta in 0.0f64..0.5,
            lin_r in any::<bool>(),
            lin_eta in any::<bool>(),
        ) {
            let s = TrainingSchedule {
                iterations,
                r0: r_final + extra_r,
                r_final,
                eta0: (eta_final + extra_eta).min(1.0),
                eta_final,
                radius_decay: if lin_r { Decay::Linear } else { Decay::Exponential },
                rate_decay: if lin_eta { Decay::Linear } else { Decay::Exponential },
                seed: 0,
            };
            s.validate().unwrap();
            for n in 1..iterations {
                prop_assert!(s.radius(n) <= s.radius(n - 1) + 1e-12);
                prop_assert!(s.rate(n) <= s.rate(n - 1) + 1e-12);
            }
            prop_assert_eq!(s.radius(0), s.r0);
            prop_assert_eq!(s.rate(0), s.eta0);
            prop_assert_eq!(s.radius(iterations - 1), s.r_final);
            prop_assert_eq!(s.rate(iterations - 1), s.eta_final);
        }
    }
}
