//! Non-full-buffer connection density: message queues fed by the measured uplink SINR.

use super::rng::{link_id, Domain, DropStreams, StreamKind};
use crate::error::Result;
use crate::metrics::{
    connection_density_nonfullbuffer, DensityGrid, DensitySearch, DENSITY_DELAY_PERCENTILE,
};
use crate::scenario::{Direction, EvaluationConfig};
use crate::traffic::{gen_arrivals, serve_fifo, Arrivals};

/// SplitMix64 finalizer; maps a device id to a fixed SINR sample.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Type-7 quantile that tolerates infinite (lost) entries.
fn quantile_with_losses(mut delays: Vec<f64>, p: f64) -> f64 {
    if delays.is_empty() {
        return 0.0;
    }
    delays.sort_by(f64::total_cmp);
    let h = p * (delays.len() - 1) as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= delays.len() || frac == 0.0 {
        return delays[lo];
    }
    if delays[lo + 1].is_infinite() {
        return f64::INFINITY;
    }
    delays[lo] + frac * (delays[lo + 1] - delays[lo])
}

/// One TRxP's message queue at `density` devices/km² over `area_km2`.
///
/// Each device keeps one uplink SINR drawn from `ul_sinr_db`; a message holds
/// one of `resources` channels of `user_bandwidth` for whole slots until its
/// PDU is through, plus the fixed signalling overhead. Devices whose SINR
/// carries nothing lose every message.
pub fn probe_delay(
    config: &EvaluationConfig,
    ul_sinr_db: &[f64],
    area_km2: f64,
    density: f64,
) -> Result<f64> {
    let tr = &config.traffic;
    let n = (density * area_km2).round().min(u32::MAX as f64) as u32;
    let index = density.to_bits();
    let streams = DropStreams::new(Domain::Density, config.run.master_seed, index);
    let mut rng = streams.stream(link_id(StreamKind::Arrivals, 0, 0));
    let arrivals = match gen_arrivals(tr, n, config.run.density_horizon, &mut rng) {
        Arrivals::Packets(a) => a,
        Arrivals::FullBuffer => Vec::new(),
    };
    if arrivals.is_empty() || ul_sinr_db.is_empty() {
        return Ok(0.0);
    }
    let abstraction = config.link.abstraction(Direction::Uplink);
    let backoff = config.link.estimation_backoff;
    let bits = tr.pdu_bits();
    let slot = tr.slot_duration;
    let salt = mix(config.run.master_seed ^ index);
    let log = serve_fifo(&arrivals, tr.resources as usize, |a| {
        let sinr = ul_sinr_db[(mix(salt ^ a.ue_id as u64) % ul_sinr_db.len() as u64) as usize];
        let se = abstraction.sinr_to_se(sinr - backoff);
        if se <= 0.0 {
            return (slot, 1, false);
        }
        let airtime = (bits / (se * tr.user_bandwidth) / slot).ceil() * slot;
        (airtime + tr.message_overhead, 1, true)
    });
    let delays: Vec<f64> = arrivals
        .iter()
        .zip(&log)
        .map(|(a, s)| if s.delivered { s.completion_time - a.time } else { f64::INFINITY })
        .collect();
    Ok(quantile_with_losses(delays, DENSITY_DELAY_PERCENTILE))
}

/// Bisection over the configured density grid.
pub fn density_search(config: &EvaluationConfig, ul_sinr_db: &[f64], area_km2: f64) -> Result<DensitySearch> {
    let r = &config.run;
    let grid = DensityGrid {
        min: r.density_min,
        max: r.density_max,
        step: r.density_step,
    };
    connection_density_nonfullbuffer(grid, |d| probe_delay(config, ul_sinr_db, area_km2, d))
}
