//! Log-distance path loss with spatially correlated log-normal shadowing.
//!
//! Shadowing on one link is a first-order autoregressive process indexed by
//! distance travelled: consecutive samples separated by `dx` metres have
//! correlation `exp(-dx / decorrelation_m)` and marginal standard deviation
//! `shadowing_sigma_dB`.
//!
//! Noise substreams: each link draws from its own ChaCha8 generator seeded
//! with the run seed and switched to stream `(ue_index << 32) | cell_index`,
//! where the indices are the declaration order in the scenario. The mapping
//! is independent of thread count and platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::ids::{CellId, UeId};
use crate::mobility::Trajectory;
use crate::time::SimTime;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadioParams {
    /// Received power at 1 m.
    pub ref_power_dbm: f64,
    pub exponent: f64,
    pub shadowing_sigma_db: f64,
    pub min_distance_m: f64,
    pub decorrelation_m: f64,
}

impl RadioParams {
    pub fn validate(&self) -> Result<(), String> {
        if !self.ref_power_dbm.is_finite() {
            return Err("ref_power_dBm must be finite".into());
        }
        if !(self.exponent.is_finite() && self.exponent > 0.0) {
            return Err("exponent must be > 0".into());
        }
        if !(self.shadowing_sigma_db.is_finite() && self.shadowing_sigma_db >= 0.0) {
            return Err("shadowing_sigma_dB must be >= 0".into());
        }
        if !(self.min_distance_m.is_finite() && self.min_distance_m > 0.0) {
            return Err("min_distance_m must be > 0".into());
        }
        if !(self.decorrelation_m.is_finite() && self.decorrelation_m > 0.0) {
            return Err("decorrelation_m must be > 0".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RsrpSample {
    pub t: SimTime,
    pub ue_id: UeId,
    pub cell_id: CellId,
    pub rsrp_dbm: f64,
}

pub fn rsrp_at(params: &RadioParams, cell_pos_m: f64, ue_pos_m: f64, shadow_db: f64) -> f64 {
    let d = (ue_pos_m - cell_pos_m).abs().max(params.min_distance_m);
    params.ref_power_dbm - 10.0 * params.exponent * d.log10() + shadow_db
}

/// Generator for one link's noise substream.
pub fn link_stream(seed: u64, ue_index: u32, cell_index: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((ue_index as u64) << 32) | cell_index as u64);
    rng
}

/// Shadowing state for one link.
#[derive(Clone, Debug)]
pub struct ShadowProcess {
    sigma_db: f64,
    decorrelation_m: f64,
    last: Option<(f64, f64)>,
    rng: ChaCha8Rng,
}

impl ShadowProcess {
    pub fn new(sigma_db: f64, decorrelation_m: f64, rng: ChaCha8Rng) -> Self {
        ShadowProcess {
            sigma_db,
            decorrelation_m,
            last: None,
            rng,
        }
    }

    /// Shadow value at `ue_pos_m`. Draws nothing when sigma is zero.
    pub fn next(&mut self, ue_pos_m: f64) -> f64 {
        if self.sigma_db == 0.0 {
            return 0.0;
        }
        let z: f64 = StandardNormal.sample(&mut self.rng);
        let value = match self.last {
            None => self.sigma_db * z,
            Some((pos, prev)) => {
                let rho = (-(ue_pos_m - pos).abs() / self.decorrelation_m).exp();
                rho * prev + self.sigma_db * (1.0 - rho * rho).sqrt() * z
            }
        };
        self.last = Some((ue_pos_m, value));
        value
    }
}

/// Samples every `(ue, cell)` link on the measurement grid `0, p, 2p, ... <= duration`.
///
/// Output order is canonical: time, then UE declaration order, then cell
/// declaration order.
pub fn sample_links(
    params: &RadioParams,
    cells: &[(CellId, f64)],
    ues: &[(UeId, Trajectory)],
    meas_period: SimTime,
    duration: SimTime,
    seed: u64,
) -> Vec<RsrpSample> {
    let mut shadows: Vec<Vec<ShadowProcess>> = ues
        .iter()
        .enumerate()
        .map(|(ui, _)| {
            (0..cells.len())
                .map(|ci| {
                    ShadowProcess::new(
                        params.shadowing_sigma_db,
                        params.decorrelation_m,
                        link_stream(seed, ui as u32, ci as u32),
                    )
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    let mut t = SimTime::ZERO;
    while t <= duration {
        for (ui, (ue, traj)) in ues.iter().enumerate() {
            let x = traj.position_at(t.as_secs_f64());
            for (ci, (cell, pos)) in cells.iter().enumerate() {
                let shadow = shadows[ui][ci].next(x);
                out.push(RsrpSample {
                    t,
                    ue_id: ue.clone(),
                    cell_id: cell.clone(),
                    rsrp_dbm: rsrp_at(params, *pos, x, shadow),
                });
            }
        }
        if meas_period == SimTime::ZERO {
            break;
        }
        t = t + meas_period;
    }
    out
}
