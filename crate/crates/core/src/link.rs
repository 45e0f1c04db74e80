//! Link budget, SINR, combining, uplink power control and link abstraction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::Direction;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// `[link]` section: abstraction, BLER, HARQ, power control and Doppler backoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkParams {
    pub efficiency: f64,
    pub se_max_dl: f64,
    pub se_max_ul: f64,
    /// dB; below this the link carries nothing.
    pub sinr_min: f64,
    /// SINR backoff standing in for estimation and feedback errors, dB.
    pub estimation_backoff: f64,
    pub bler_sinr_50: f64,
    /// dB per decade of BLER.
    pub bler_slope: f64,
    pub bler_floor: f64,
    pub harq_max_transmissions: u32,
    /// Seconds per HARQ transmission including its control overhead.
    pub harq_transmission_time: f64,
    /// SINR gain per retransmission from soft combining, dB.
    pub harq_combining_gain: f64,
    /// Reliability latency budget, seconds.
    pub latency_budget: f64,
    /// Open-loop power control target, dBm, before calibration.
    pub pc_p0: f64,
    pub pc_alpha: f64,
    /// Mean interference-over-thermal cap, dB.
    pub iot_target: f64,
    /// Hz; normalizes the Doppler shift for the mobility backoff.
    pub subcarrier_spacing: f64,
    /// `[normalized Doppler threshold, SINR backoff dB]` rows, ascending.
    pub doppler_backoff: Vec<[f64; 2]>,
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams {
            efficiency: 0.6,
            se_max_dl: 7.4,
            se_max_ul: 5.5,
            sinr_min: -10.0,
            estimation_backoff: 1.0,
            bler_sinr_50: -6.0,
            bler_slope: 1.5,
            bler_floor: 1e-9,
            harq_max_transmissions: 2,
            harq_transmission_time: 0.5e-3,
            harq_combining_gain: 3.0,
            latency_budget: 1e-3,
            pc_p0: -60.0,
            pc_alpha: 0.8,
            iot_target: 10.0,
            subcarrier_spacing: 15e3,
            doppler_backoff: vec![[1e-4, 0.0], [1e-3, 0.5], [1e-2, 1.5], [1e-1, 3.0]],
        }
    }
}

impl LinkParams {
    pub fn abstraction(&self, direction: Direction) -> LinkAbstraction {
        LinkAbstraction {
            efficiency: self.efficiency,
            se_max: match direction {
                Direction::Downlink => self.se_max_dl,
                Direction::Uplink => self.se_max_ul,
            },
            sinr_min: self.sinr_min,
        }
    }

    pub fn bler(&self) -> BlerModel {
        BlerModel {
            sinr_50: self.bler_sinr_50,
            slope: self.bler_slope,
            bler_floor: self.bler_floor,
        }
    }

    pub fn harq(&self) -> HarqConfig {
        HarqConfig {
            max_transmissions: self.harq_max_transmissions,
            per_transmission_time: self.harq_transmission_time,
            combining_gain_per_retx: self.harq_combining_gain,
        }
    }
}

#[inline]
pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[inline]
pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Thermal noise at -174 dBm/Hz, dBm.
pub fn noise_power(bandwidth: f64, noise_figure: f64) -> f64 {
    noise_power_with_density(-174.0, bandwidth, noise_figure)
}

pub fn noise_power_with_density(density_dbm_hz: f64, bandwidth: f64, noise_figure: f64) -> f64 {
    density_dbm_hz + 10.0 * bandwidth.log10() + noise_figure
}

/// One user's SINR with its linear-domain components in dB / dBm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinrSample {
    pub ue_id: u32,
    pub direction: Direction,
    pub sinr: f64,
    pub signal: f64,
    pub interference: f64,
    pub noise: f64,
}

impl SinrSample {
    /// Relative mismatch of sinr against signal / (interference + noise).
    pub fn consistency_error(&self) -> f64 {
        let expect = db_to_lin(self.signal) / (db_to_lin(self.interference) + db_to_lin(self.noise));
        (db_to_lin(self.sinr) - expect).abs() / expect
    }
}

/// SINR from linear powers in mW; interferers are summed in the order given.
pub fn compute_sinr(
    ue_id: u32,
    direction: Direction,
    serving_mw: f64,
    interferers_mw: &[f64],
    noise_mw: f64,
) -> SinrSample {
    let interference: f64 = interferers_mw.iter().sum();
    sinr_from_totals(ue_id, direction, serving_mw, interference, noise_mw)
}

pub fn sinr_from_totals(
    ue_id: u32,
    direction: Direction,
    serving_mw: f64,
    interference_mw: f64,
    noise_mw: f64,
) -> SinrSample {
    let signal = lin_to_db(serving_mw);
    SinrSample {
        ue_id,
        direction,
        sinr: signal - lin_to_db(interference_mw + noise_mw),
        signal,
        interference: lin_to_db(interference_mw),
        noise: lin_to_db(noise_mw),
    }
}

/// Maximum ratio combining under spatially white interference: branch SINRs add.
pub fn combine_mrc(branch_sinrs: &[f64]) -> Result<f64> {
    if branch_sinrs.is_empty() {
        return Err(Error::Domain("MRC needs at least one branch".into()));
    }
    Ok(branch_sinrs.iter().sum())
}

/// Open-loop rule min(p_max, P0 + alpha * loss), dBm.
pub fn uplink_power_control(coupling_loss: f64, p0: f64, alpha: f64, p_max: f64) -> f64 {
    (p0 + alpha * coupling_loss).min(p_max)
}

/// Truncated-Shannon SINR to spectral-efficiency map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkAbstraction {
    pub efficiency: f64,
    pub se_max: f64,
    pub sinr_min: f64,
}

impl LinkAbstraction {
    pub fn sinr_to_se(&self, sinr_db: f64) -> f64 {
        if sinr_db < self.sinr_min {
            return 0.0;
        }
        (self.efficiency * (1.0 + db_to_lin(sinr_db)).log2()).min(self.se_max)
    }
}

pub fn sinr_to_se(abstraction: &LinkAbstraction, sinr_db: f64) -> f64 {
    abstraction.sinr_to_se(sinr_db)
}

/// Log-linear BLER waterfall.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlerModel {
    pub sinr_50: f64,
    pub slope: f64,
    pub bler_floor: f64,
}

impl BlerModel {
    pub fn bler(&self, sinr_db: f64) -> f64 {
        (0.5 * 10f64.powf(-(sinr_db - self.sinr_50) / self.slope)).clamp(self.bler_floor, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarqConfig {
    pub max_transmissions: u32,
    pub per_transmission_time: f64,
    pub combining_gain_per_retx: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarqOutcome {
    pub success_probability: f64,
    /// Probability that the packet first succeeds at attempt i+1.
    pub attempt_probabilities: Vec<f64>,
    /// Delay of a success at attempt i+1.
    pub attempt_delays: Vec<f64>,
    /// No transmission fits in the latency budget.
    pub degenerate_budget: bool,
}

/// HARQ outcome for an arbitrary per-attempt BLER curve.
pub fn harq_outcome_with(
    bler: impl Fn(f64) -> f64,
    harq: &HarqConfig,
    sinr_db: f64,
    latency_budget: f64,
) -> HarqOutcome {
    let fit = (latency_budget / harq.per_transmission_time + 1e-9).floor();
    let k = (harq.max_transmissions as f64).min(fit.max(0.0)) as u32;
    if k == 0 {
        return HarqOutcome {
            success_probability: 0.0,
            attempt_probabilities: Vec::new(),
            attempt_delays: Vec::new(),
            degenerate_budget: true,
        };
    }
    let mut residual = 1.0;
    let mut attempt_probabilities = Vec::with_capacity(k as usize);
    let mut attempt_delays = Vec::with_capacity(k as usize);
    for i in 0..k {
        let p_fail = bler(sinr_db + i as f64 * harq.combining_gain_per_retx);
        attempt_probabilities.push(residual * (1.0 - p_fail));
        attempt_delays.push((i + 1) as f64 * harq.per_transmission_time);
        residual *= p_fail;
    }
    HarqOutcome {
        success_probability: 1.0 - residual,
        attempt_probabilities,
        attempt_delays,
        degenerate_budget: false,
    }
}

pub fn harq_outcome(bler: &BlerModel, harq: &HarqConfig, sinr_db: f64, latency_budget: f64) -> HarqOutcome {
    harq_outcome_with(|s| bler.bler(s), harq, sinr_db, latency_budget)
}

/// Maximum Doppler shift, Hz.
pub fn doppler_hz(speed_kmh: f64, carrier: f64) -> f64 {
    speed_kmh / 3.6 * carrier / SPEED_OF_LIGHT
}

/// Backoff of the first row whose threshold covers `normalized_doppler`; the
/// last row applies beyond the table.
pub fn doppler_backoff_db(table: &[[f64; 2]], normalized_doppler: f64) -> f64 {
    table
        .iter()
        .find(|row| normalized_doppler <= row[0])
        .or(table.last())
        .map_or(0.0, |row| row[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn harq(max: u32, tti: f64, gain: f64) -> HarqConfig {
        HarqConfig {
            max_transmissions: max,
            per_transmission_time: tti,
            combining_gain_per_retx: gain,
        }
    }

    #[test]
    fn noise_arithmetic() {
        assert!((noise_power(10e6, 5.0) - (-99.0)).abs() < 1e-12);
        assert_eq!(noise_power(1.0, 0.0), -174.0);
        let d = noise_power(2e6, 3.0) - noise_power(1e6, 3.0);
        assert!((d - 3.0103).abs() < 1e-4);
    }

    #[test]
    fn sinr_examples() {
        let s = compute_sinr(0, Direction::Downlink, 2.0, &[], 0.5);
        assert!((s.sinr - lin_to_db(4.0)).abs() < 1e-12);
        let s = compute_sinr(0, Direction::Downlink, 1.0, &[], 1.0);
        assert_eq!(s.sinr, 0.0);
        let s = compute_sinr(0, Direction::Uplink, 1.0, &[0.5], 0.5);
        assert!(s.sinr.abs() < 1e-12);
        assert!(s.consistency_error() < 1e-9);
    }

    #[test]
    fn mrc_rules() {
        assert_eq!(combine_mrc(&[3.0]).unwrap(), 3.0);
        let two = lin_to_db(combine_mrc(&[2.0, 2.0]).unwrap()) - lin_to_db(2.0);
        assert!((two - 3.0103).abs() < 1e-4);
        assert!(combine_mrc(&[]).is_err());
    }

    #[test]
    fn power_control_limits() {
        assert_eq!(uplink_power_control(0.0, -80.0, 0.8, 23.0), -80.0);
        assert_eq!(uplink_power_control(200.0, -80.0, 0.8, 23.0), 23.0);
    }

    #[test]
    fn se_map() {
        let a = LinkAbstraction {
            efficiency: 0.6,
            se_max: 7.4,
            sinr_min: -10.0,
        };
        assert_eq!(a.sinr_to_se(-10.5), 0.0);
        assert!((a.sinr_to_se(10.0) - 2.075659).abs() < 1e-6);
        assert_eq!(a.sinr_to_se(80.0), 7.4);
    }

    #[test]
    fn bler_midpoint() {
        let b = LinkParams::default().bler();
        assert!((b.bler(b.sinr_50) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn harq_arithmetic() {
        let h = harq(2, 0.5e-3, 0.0);
        let o = harq_outcome_with(|_| 0.01, &h, 0.0, 1e-3);
        assert!((o.success_probability - 0.9999).abs() < 1e-15);
        assert_eq!(o.attempt_delays, vec![0.5e-3, 1e-3]);
        let o = harq_outcome_with(|_| 0.0, &h, 0.0, 1e-3);
        assert_eq!(o.success_probability, 1.0);
        assert_eq!(o.attempt_probabilities[0], 1.0);
        let o = harq_outcome_with(|_| 0.0, &h, 0.0, 0.4e-3);
        assert_eq!(o.success_probability, 0.0);
        assert!(o.degenerate_budget);
    }

    #[test]
    fn backoff_table_lookup() {
        let t = LinkParams::default().doppler_backoff;
        assert_eq!(doppler_backoff_db(&t, 0.0), 0.0);
        assert_eq!(doppler_backoff_db(&t, 5e-4), 0.5);
        assert_eq!(doppler_backoff_db(&t, 5e-3), 1.5);
        assert_eq!(doppler_backoff_db(&t, 0.05), 3.0);
        assert_eq!(doppler_backoff_db(&t, 0.5), 3.0);
    }

    proptest! {
        #[test]
        fn extra_interferer_never_helps(s in 1e-9f64..1.0, n in 1e-12f64..1.0,
            i in proptest::collection::vec(0.0f64..1.0, 0..8), extra in 0.0f64..1.0) {
            let base = compute_sinr(0, Direction::Downlink, s, &i, n);
            let mut more = i.clone();
            more.push(extra);
            let worse = compute_sinr(0, Direction::Downlink, s, &more, n);
            prop_assert!(worse.sinr <= base.sinr + 1e-12);
            prop_assert!(base.consistency_error() < 1e-9);
        }

        #[test]
        fn mrc_is_permutation_invariant(mut b in proptest::collection::vec(0.0f64..100.0, 1..8)) {
            let x = combine_mrc(&b).unwrap();
            b.reverse();
            prop_assert!((combine_mrc(&b).unwrap() - x).abs() <= 1e-12 * x.max(1.0));
        }

        #[test]
        fn harq_monotone(s in -20.0f64..20.0, ds in 0.0f64..5.0, k in 1u32..5, budget in 0.1e-3f64..3e-3) {
            let b = LinkParams::default().bler();
            let h = harq(k, 0.5e-3, 2.0);
            let base = harq_outcome(&b, &h, s, budget).success_probability;
            prop_assert!(harq_outcome(&b, &h, s + ds, budget).success_probability >= base);
            prop_assert!(harq_outcome(&b, &harq(k + 1, 0.5e-3, 2.0), s, budget).success_probability >= base);
            prop_assert!(harq_outcome(&b, &h, s, budget + 0.5e-3).success_probability >= base);
        }

        #[test]
        fn se_and_bler_monotone(a in -30.0f64..40.0, d in 0.0f64..10.0) {
            let p = LinkParams::default();
            let ab = p.abstraction(Direction::Downlink);
            prop_assert!(ab.sinr_to_se(a + d) >= ab.sinr_to_se(a));
            let b = p.bler();
            prop_assert!(b.bler(a + d) <= b.bler(a));
            prop_assert!(b.bler(a) >= b.bler_floor && b.bler(a) <= 1.0);
        }
    }
}
