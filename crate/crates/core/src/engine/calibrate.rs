//! Uplink power-control calibration against the mean IoT cap.

use serde::{Deserialize, Serialize};

use super::drop::{uplink_interference, DropContext, LargeScale};
use super::rng::{Domain, DropStreams};
use crate::error::Result;
use crate::link::lin_to_db;

/// Calibration aims this far below the IoT cap so that the run's own
/// measurement, drawn from fresh drops, still lands under it.
pub const CALIBRATION_MARGIN_DB: f64 = 1.0;
/// Lowest P0 tried, relative to the configured one, dB.
pub const CALIBRATION_RANGE_DB: f64 = 60.0;
const BISECTION_STEPS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Configured P0, dBm.
    pub p0_initial: f64,
    /// P0 used by the run, dBm.
    pub p0: f64,
    /// Mean IoT over the calibration drops at `p0`, dB.
    pub iot_db: f64,
    pub drops: u32,
    pub warning: Option<String>,
}

/// A calibration drop: large-scale state plus the interferer draws.
struct Snapshot<'a> {
    ls: LargeScale<'a>,
    picks: Vec<Vec<Option<u32>>>,
}

fn mean_iot_db(ctx: &DropContext, snaps: &[Snapshot]) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for snap in snaps {
        let powers = ctx.ul_powers(&snap.ls);
        for p in &snap.picks {
            for i in uplink_interference(&snap.ls, &powers, p) {
                sum += i / ctx.noise_ul_mw();
                count += 1;
            }
        }
    }
    if count == 0 {
        return f64::NEG_INFINITY;
    }
    lin_to_db(sum / count as f64)
}

/// Finds the largest P0 not above the configured one whose mean IoT on
/// `drops` calibration drops meets the cap minus the margin. The drops are
/// fixed across trials, so IoT is monotone in P0 and bisection applies.
pub fn calibrate_p0<'a>(
    make: impl Fn(f64) -> Result<DropContext<'a>>,
    p0_initial: f64,
    iot_target: f64,
    master_seed: u64,
    drops: u32,
) -> Result<Calibration> {
    let base = make(p0_initial)?;
    if drops == 0 {
        return Ok(Calibration {
            p0_initial,
            p0: p0_initial,
            iot_db: f64::NAN,
            drops,
            warning: None,
        });
    }
    let snaps = (0..drops)
        .map(|i| {
            let streams = DropStreams::new(Domain::Calibration, master_seed, i as u64);
            let ls = base.large_scale(&streams)?;
            let picks = base.ul_interferers(&ls, &streams);
            Ok(Snapshot { ls, picks })
        })
        .collect::<Result<Vec<_>>>()?;
    let goal = iot_target - CALIBRATION_MARGIN_DB;
    let iot_at = |p0: f64| -> Result<f64> { Ok(mean_iot_db(&make(p0)?, &snaps)) };

    let initial = iot_at(p0_initial)?;
    if initial <= goal {
        return Ok(Calibration {
            p0_initial,
            p0: p0_initial,
            iot_db: initial,
            drops,
            warning: None,
        });
    }
    let floor = p0_initial - CALIBRATION_RANGE_DB;
    let floor_iot = iot_at(floor)?;
    if floor_iot > goal {
        return Ok(Calibration {
            p0_initial,
            p0: floor,
            iot_db: floor_iot,
            drops,
            warning: Some(format!(
                "uplink calibration failed: mean IoT {floor_iot:.2} dB at P0 = {floor:.1} dBm exceeds {goal:.1} dB"
            )),
        });
    }
    let (mut lo, mut hi) = (floor, p0_initial);
    let mut lo_iot = floor_iot;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let v = iot_at(mid)?;
        if v <= goal {
            lo = mid;
            lo_iot = v;
        } else {
            hi = mid;
        }
    }
    Ok(Calibration {
        p0_initial,
        p0: lo,
        iot_db: lo_iot,
        drops,
        warning: None,
    })
}
