//! Deterministic 1-D UE kinematics.

use serde::Serialize;

/// Converts km/h to m/s.
pub fn kmh_to_mps(kmh: f64) -> f64 {
    kmh / 3.6
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trajectory {
    /// Triangle wave between `a_m` and `b_m`, starting at `a_m`.
    Wobble { a_m: f64, b_m: f64, speed_mps: f64 },
    /// Back-and-forth between `x0_m` and `x1_m`, pausing `dwell_s` at each end.
    ShuttleLoop {
        x0_m: f64,
        x1_m: f64,
        speed_mps: f64,
        dwell_s: f64,
    },
    Static { x_m: f64 },
}

impl Trajectory {
    pub fn validate(&self) -> Result<(), String> {
        let finite = |v: f64, name: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be finite"))
            }
        };
        match *self {
            Trajectory::Wobble { a_m, b_m, speed_mps } => {
                finite(a_m, "a_m")?;
                finite(b_m, "b_m")?;
                if a_m >= b_m {
                    return Err(format!("wobble requires a_m < b_m (got {a_m} >= {b_m})"));
                }
                check_speed(speed_mps)
            }
            Trajectory::ShuttleLoop {
                x0_m,
                x1_m,
                speed_mps,
                dwell_s,
            } => {
                finite(x0_m, "x0_m")?;
                finite(x1_m, "x1_m")?;
                if x0_m >= x1_m {
                    return Err(format!("shuttle requires x0_m < x1_m (got {x0_m} >= {x1_m})"));
                }
                if !(dwell_s.is_finite() && dwell_s >= 0.0) {
                    return Err("dwell_s must be >= 0".into());
                }
                check_speed(speed_mps)
            }
            Trajectory::Static { x_m } => finite(x_m, "x_m"),
        }
    }

    /// Position in metres at `t_s` seconds (clamped to `t_s >= 0`).
    pub fn position_at(&self, t_s: f64) -> f64 {
        let t = t_s.max(0.0);
        match *self {
            Trajectory::Wobble { a_m, b_m, speed_mps } => {
                let leg = (b_m - a_m) / speed_mps;
                let phase = t % (2.0 * leg);
                if phase <= leg {
                    (a_m + speed_mps * phase).min(b_m)
                } else {
                    (b_m - speed_mps * (phase - leg)).max(a_m)
                }
            }
            Trajectory::ShuttleLoop {
                x0_m,
                x1_m,
                speed_mps,
                dwell_s,
            } => {
                let travel = (x1_m - x0_m) / speed_mps;
                let half = travel + dwell_s;
                let phase = t % (2.0 * half);
                if phase < travel {
                    (x0_m + speed_mps * phase).min(x1_m)
                } else if phase < half {
                    x1_m
                } else if phase < half + travel {
                    (x1_m - speed_mps * (phase - half)).max(x0_m)
                } else {
                    x0_m
                }
            }
            Trajectory::Static { x_m } => x_m,
        }
    }

    /// Full cycle duration, `None` for a static UE.
    pub fn period_s(&self) -> Option<f64> {
        match *self {
            Trajectory::Wobble { a_m, b_m, speed_mps } => Some(2.0 * (b_m - a_m) / speed_mps),
            Trajectory::ShuttleLoop {
                x0_m,
                x1_m,
                speed_mps,
                dwell_s,
            } => Some(2.0 * ((x1_m - x0_m) / speed_mps + dwell_s)),
            Trajectory::Static { .. } => None,
        }
    }

    /// Index of the one-way transit leg in progress at `t_s` (dwell time
    /// counts toward the leg it ends).
    pub fn leg_index(&self, t_s: f64) -> Option<u64> {
        self.period_s().map(|p| (t_s.max(0.0) / (p / 2.0)).floor() as u64)
    }

    pub fn speed_mps(&self) -> f64 {
        match *self {
            Trajectory::Wobble { speed_mps, .. } | Trajectory::ShuttleLoop { speed_mps, .. } => {
                speed_mps
            }
            Trajectory::Static { .. } => 0.0,
        }
    }

    /// Same path at a different speed. Static trajectories are unchanged.
    pub fn with_speed(&self, speed_mps: f64) -> Trajectory {
        let mut out = self.clone();
        match &mut out {
            Trajectory::Wobble { speed_mps: s, .. } | Trajectory::ShuttleLoop { speed_mps: s, .. } => {
                *s = speed_mps
            }
            Trajectory::Static { .. } => {}
        }
        out
    }

    /// Closed interval the UE stays inside.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Trajectory::Wobble { a_m, b_m, .. } => (a_m, b_m),
            Trajectory::ShuttleLoop { x0_m, x1_m, .. } => (x0_m, x1_m),
            Trajectory::Static { x_m } => (x_m, x_m),
        }
    }
}

fn check_speed(v: f64) -> Result<(), String> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(format!("speed must be > 0 (got {v})"))
    }
}
