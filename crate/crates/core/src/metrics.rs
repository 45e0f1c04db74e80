//! KPI estimators: spectral efficiency, connection density, reliability,
//! mobility, user-experienced data rate, CDFs and convergence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::{doppler_backoff_db, doppler_hz, harq_outcome, BlerModel, HarqConfig, LinkAbstraction};
use crate::scenario::Metric;

/// Fewest samples accepted by the 5th-percentile estimators.
pub const MIN_PERCENTILE_SAMPLES: usize = 20;
/// Delay bound of the connection-density QoS, seconds.
pub const DENSITY_DELAY_BOUND: f64 = 10.0;
/// Percentile of the delay distribution held to the bound.
pub const DENSITY_DELAY_PERCENTILE: f64 = 0.99;
pub const DENSITY_REQUIREMENT: f64 = 1e6;
/// Extra evenly spaced probes below the bisection result.
const MONOTONE_CHECKS: usize = 8;
pub const RELIABILITY_REQUIREMENT: f64 = 0.99999;
pub const UEDR_REQUIREMENT_DL: f64 = 100e6;
pub const UEDR_REQUIREMENT_UL: f64 = 50e6;

/// Empirical distribution holding every sample.
///
/// Quantiles interpolate linearly between order statistics at position
/// p·(n−1) (zero based), i.e. Hyndman–Fan type 7.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CdfEstimator {
    samples: Vec<f64>,
    sorted: bool,
}

impl CdfEstimator {
    pub fn new() -> Self {
        CdfEstimator { samples: Vec::new(), sorted: true }
    }

    pub fn from_samples(mut samples: Vec<f64>) -> Self {
        samples.sort_by(f64::total_cmp);
        CdfEstimator { samples, sorted: true }
    }

    pub fn push(&mut self, x: f64) {
        self.samples.push(x);
        self.sorted = self.samples.len() < 2 || (self.sorted && self.samples[self.samples.len() - 2] <= x);
    }

    pub fn extend(&mut self, xs: impl IntoIterator<Item = f64>) {
        for x in xs {
            self.push(x);
        }
    }

    pub fn merge(&mut self, other: &CdfEstimator) {
        self.extend(other.samples.iter().copied());
    }

    pub fn sort(&mut self) {
        if !self.sorted {
            self.samples.sort_by(f64::total_cmp);
            self.sorted = true;
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Samples in ascending order.
    pub fn sorted_samples(&self) -> std::borrow::Cow<'_, [f64]> {
        if self.sorted {
            std::borrow::Cow::Borrowed(&self.samples)
        } else {
            let mut v = self.samples.clone();
            v.sort_by(f64::total_cmp);
            std::borrow::Cow::Owned(v)
        }
    }

    pub fn mean(&self) -> Option<f64> {
        (!self.is_empty()).then(|| self.samples.iter().sum::<f64>() / self.len() as f64)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("quantile level {p} outside [0, 1]")));
        }
        if self.is_empty() {
            return Err(Error::InsufficientSamples { needed: 1, got: 0 });
        }
        Ok(quantile_sorted(&self.sorted_samples(), p))
    }

    /// (percentile, value) at 0, 0.1, ..., 100.
    pub fn percentile_table(&self) -> Result<Vec<(f64, f64)>> {
        if self.is_empty() {
            return Err(Error::InsufficientSamples { needed: 1, got: 0 });
        }
        let s = self.sorted_samples();
        Ok((0..=1000).map(|i| (i as f64 / 10.0, quantile_sorted(&s, i as f64 / 1000.0))).collect())
    }
}

fn quantile_sorted(s: &[f64], p: f64) -> f64 {
    let h = p * (s.len() - 1) as f64;
    let lo = h.floor() as usize;
    if lo + 1 >= s.len() {
        return s[s.len() - 1];
    }
    s[lo] + (h - lo as f64) * (s[lo + 1] - s[lo])
}

/// Inputs of the average spectral efficiency.
#[derive(Debug, Clone, PartialEq)]
pub struct SeInputs {
    pub n_drops: u32,
    /// Correctly received bits per user, all drops pooled.
    pub bits: Vec<f64>,
    /// Seconds per drop.
    pub duration: f64,
    /// Hz.
    pub bandwidth: f64,
    /// TRxPs the bits are summed over.
    pub trxps: u32,
}

/// Σ bits / (N_drops · T · W · M), bit/s/Hz per TRxP.
pub fn avg_spectral_efficiency(input: &SeInputs) -> Result<f64> {
    if input.n_drops == 0 || input.trxps == 0 || !(input.duration > 0.0) || !(input.bandwidth > 0.0) {
        return Err(Error::Domain("drops, TRxPs, duration and bandwidth must be positive".into()));
    }
    if input.bits.iter().any(|b| !(*b >= 0.0)) {
        return Err(Error::Domain("received bits must be non-negative".into()));
    }
    let total: f64 = input.bits.iter().sum();
    Ok(total / (input.n_drops as f64 * input.duration * input.bandwidth * input.trxps as f64))
}

fn pct5(samples: &[f64]) -> Result<f64> {
    if samples.len() < MIN_PERCENTILE_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_PERCENTILE_SAMPLES,
            got: samples.len(),
        });
    }
    CdfEstimator::from_samples(samples.to_vec()).quantile(0.05)
}

/// 5th percentile of per-user normalized throughput, bit/s/Hz.
pub fn pct5_user_se(normalized_throughputs: &[f64]) -> Result<f64> {
    pct5(normalized_throughputs)
}

/// 5th percentile of per-user throughput, bit/s.
pub fn user_experienced_data_rate(throughputs: &[f64]) -> Result<f64> {
    pct5(throughputs)
}

/// Bandwidth a user occupies to carry `traffic` at rate `rate` achieved on
/// `user_bandwidth`: T / (R / W_user).
pub fn occupied_bandwidth(traffic: f64, rate: f64, user_bandwidth: f64) -> f64 {
    traffic / (rate / user_bandwidth)
}

/// Area of one TRxP of a three-sector hexagonal layout, km².
pub fn sector_area_km2(isd: f64) -> f64 {
    isd * isd * 3f64.sqrt() / 6.0 / 1e6
}

/// Inputs of the full-buffer connection density.
#[derive(Debug, Clone, PartialEq)]
pub struct CdInputs {
    pub n_mux: f64,
    /// Hz.
    pub bandwidth: f64,
    /// Occupied bandwidth per user, same unit as `bandwidth`.
    pub occupied: Vec<f64>,
    /// Meters.
    pub isd: f64,
}

/// (n_mux · W / mean(B)) / TRxP area, devices per km².
pub fn connection_density_fullbuffer(input: &CdInputs) -> Result<f64> {
    if input.occupied.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let mean_b = input.occupied.iter().sum::<f64>() / input.occupied.len() as f64;
    if !(mean_b > 0.0) || !(input.isd > 0.0) {
        return Err(Error::Domain("mean occupied bandwidth and ISD must be positive".into()));
    }
    Ok(input.n_mux * input.bandwidth / mean_b / sector_area_km2(input.isd))
}

/// Device-density grid, devices per km².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl DensityGrid {
    fn len(&self) -> usize {
        ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1
    }

    fn at(&self, i: usize) -> f64 {
        self.min + i as f64 * self.step
    }
}

/// One evaluated density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityProbe {
    pub density: f64,
    /// Delay percentile at this density, seconds (infinite if packets were lost).
    pub delay: f64,
}

impl DensityProbe {
    pub fn meets_delay(&self) -> bool {
        self.delay <= DENSITY_DELAY_BOUND
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySearch {
    /// Largest tested density meeting the delay bound; zero if none did.
    pub density: f64,
    /// Delay percentile at `density`.
    pub delay: f64,
    pub pass: bool,
    /// The search stopped at the top of the grid without a failure.
    pub hit_upper_bound: bool,
    /// Evaluated densities in ascending order.
    pub probes: Vec<DensityProbe>,
    /// False when a failing density lies below a passing one.
    pub monotone: bool,
    /// Widest interval between a passing and a failing probe, when they exist.
    pub bracket: Option<(f64, f64)>,
}

/// Bisection over a density grid for the largest density whose delay
/// percentile stays within the bound. `probe` returns that percentile.
pub fn connection_density_nonfullbuffer(
    grid: DensityGrid,
    mut probe: impl FnMut(f64) -> Result<f64>,
) -> Result<DensitySearch> {
    if !(grid.step > 0.0) || !(grid.min > 0.0) || grid.max < grid.min {
        return Err(Error::Domain("density grid needs 0 < min <= max and a positive step".into()));
    }
    let mut probes: Vec<DensityProbe> = Vec::new();
    let mut eval = |i: usize, probes: &mut Vec<DensityProbe>| -> Result<bool> {
        let density = grid.at(i);
        let delay = probe(density)?;
        let p = DensityProbe { density, delay };
        probes.push(p);
        Ok(p.meets_delay())
    };
    let n = grid.len();
    let (mut lo, mut hi) = (0usize, n - 1);
    let top_ok = eval(hi, &mut probes)?;
    let mut hit_upper_bound = false;
    let best = if top_ok {
        hit_upper_bound = true;
        Some(hi)
    } else if !eval(lo, &mut probes)? {
        None
    } else {
        // invariant: lo passes, hi fails
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if eval(mid, &mut probes)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo)
    };
    // a coarse sweep below the answer exposes failures the bisection skipped
    let top = best.unwrap_or(0);
    for k in 1..MONOTONE_CHECKS {
        let i = top * k / MONOTONE_CHECKS;
        if i > 0 && !probes.iter().any(|p| p.density == grid.at(i)) {
            eval(i, &mut probes)?;
        }
    }
    probes.sort_by(|a, b| a.density.total_cmp(&b.density));
    let first_fail = probes.iter().position(|p| !p.meets_delay());
    let last_pass = probes.iter().rposition(|p| p.meets_delay());
    let monotone = match (first_fail, last_pass) {
        (Some(f), Some(p)) => p < f,
        _ => true,
    };
    // outermost pass-to-fail transitions
    let transitions: Vec<(f64, f64)> = probes
        .windows(2)
        .filter(|w| w[0].meets_delay() && !w[1].meets_delay())
        .map(|w| (w[0].density, w[1].density))
        .collect();
    let bracket = match (transitions.first(), transitions.last()) {
        (Some(a), Some(b)) => Some((a.0, b.1)),
        _ => None,
    };
    let (density, delay) = match best {
        Some(i) => {
            let d = grid.at(i);
            (d, probes.iter().find(|p| p.density == d).map_or(0.0, |p| p.delay))
        }
        None => (0.0, probes[0].delay),
    };
    Ok(DensitySearch {
        density,
        delay,
        pass: Metric::ConnectionDensity.meets(density, DENSITY_REQUIREMENT),
        hit_upper_bound,
        probes,
        monotone,
        bracket,
    })
}

/// Waiting-time CDF of an M/D/1 queue (arrival rate `lambda`, service time `d`).
pub fn md1_waiting_cdf(lambda: f64, d: f64, t: f64) -> f64 {
    let rho = lambda * d;
    if rho >= 1.0 {
        return 0.0;
    }
    if t < 0.0 {
        return 0.0;
    }
    let kmax = (t / d).floor() as u32;
    let mut sum = 0.0;
    let mut fact = 1.0;
    for k in 0..=kmax {
        if k > 0 {
            fact *= k as f64;
        }
        let x = lambda * (k as f64 * d - t);
        sum += x.powi(k as i32) / fact * (-x).exp();
    }
    ((1.0 - rho) * sum).clamp(0.0, 1.0)
}

/// Quantile of the M/D/1 sojourn time (wait plus service).
pub fn md1_sojourn_quantile(lambda: f64, d: f64, p: f64) -> f64 {
    if lambda * d >= 1.0 {
        return f64::INFINITY;
    }
    if md1_waiting_cdf(lambda, d, 0.0) >= p {
        return d;
    }
    let mut hi = d;
    while md1_waiting_cdf(lambda, d, hi) < p {
        hi *= 2.0;
        if hi > 1e9 * d {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if md1_waiting_cdf(lambda, d, mid) >= p {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi + d
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityResult {
    /// Coverage-edge SINR the PDU is sent at, dB.
    pub sinr: f64,
    pub success: f64,
    pub pass: bool,
}

/// Success probability of one PDU at the 5th-percentile SINR within the budget.
pub fn reliability(sinr_cdf: &CdfEstimator, bler: &BlerModel, harq: &HarqConfig, budget: f64) -> Result<ReliabilityResult> {
    let sinr = sinr_cdf.quantile(0.05)?;
    let success = harq_outcome(bler, harq, sinr, budget).success_probability;
    Ok(ReliabilityResult {
        sinr,
        success,
        pass: Metric::Reliability.meets(success, RELIABILITY_REQUIREMENT),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityResult {
    /// Median SINR before the Doppler backoff, dB.
    pub sinr: f64,
    pub backoff: f64,
    /// Normalized link data rate, bit/s/Hz.
    pub rate: f64,
    pub pass: bool,
}

/// Normalized uplink rate at the median SINR after the Doppler backoff.
#[allow(clippy::too_many_arguments)]
pub fn mobility_check(
    sinr_cdf: &CdfEstimator,
    speed_kmh: f64,
    carrier: f64,
    abstraction: &LinkAbstraction,
    backoff_table: &[[f64; 2]],
    subcarrier_spacing: f64,
    requirement: f64,
) -> Result<MobilityResult> {
    let sinr = sinr_cdf.quantile(0.5)?;
    let backoff = if speed_kmh > 0.0 {
        doppler_backoff_db(backoff_table, doppler_hz(speed_kmh, carrier) / subcarrier_spacing)
    } else {
        0.0
    };
    let rate = abstraction.sinr_to_se(sinr - backoff);
    Ok(MobilityResult {
        sinr,
        backoff,
        rate,
        pass: Metric::Mobility { speed_kmh: speed_kmh as u32 }.meets(rate, requirement),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceState {
    Continue,
    Converged,
    Capped,
}

/// Watches the running mean of a per-drop statistic.
///
/// Converged once the running mean moved by less than `tolerance` (relative)
/// over the last `window` drops; capped at `max_drops`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceMonitor {
    pub window: usize,
    pub tolerance: f64,
    pub max_drops: usize,
    running_means: Vec<f64>,
    count: usize,
    mean: f64,
    m2: f64,
}

impl ConvergenceMonitor {
    pub const DEFAULT_CAP: usize = 10_000;

    pub fn new(window: usize, tolerance: f64, max_drops: usize) -> Self {
        ConvergenceMonitor {
            window: window.max(1),
            tolerance,
            max_drops,
            running_means: Vec::new(),
            count: 0,
            mean: 0.0,
            m2: 0.0,
        }
    }

    pub fn push(&mut self, drop_mean: f64) -> ConvergenceState {
        self.count += 1;
        let delta = drop_mean - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (drop_mean - self.mean);
        self.running_means.push(self.mean);
        if self.count > self.window {
            let then = self.running_means[self.count - 1 - self.window];
            let change = (self.mean - then).abs();
            if change == 0.0 || change < self.tolerance * self.mean.abs() {
                return ConvergenceState::Converged;
            }
        }
        if self.count >= self.max_drops {
            return ConvergenceState::Capped;
        }
        ConvergenceState::Continue
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn running_mean(&self) -> f64 {
        self.mean
    }

    pub fn running_means(&self) -> &[f64] {
        &self.running_means
    }

    /// Standard error of the running mean, from the sample variance of the drop means.
    pub fn standard_error(&self) -> f64 {
        if self.count < 2 {
            return f64::INFINITY;
        }
        (self.m2 / (self.count - 1) as f64 / self.count as f64).sqrt()
    }
}

/// Drop-by-drop convergence test used by the engine.
pub fn converged(monitor: &mut ConvergenceMonitor, next_drop_mean: f64) -> ConvergenceState {
    monitor.push(next_drop_mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::LinkParams;
    use crate::scenario::Direction;
    use crate::traffic::{serve_fifo, Arrival};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp};

    #[test]
    fn average_se_on_two_users() {
        let input = SeInputs {
            n_drops: 1,
            bits: vec![5e6, 15e6],
            duration: 1.0,
            bandwidth: 10e6,
            trxps: 1,
        };
        assert_eq!(avg_spectral_efficiency(&input).unwrap(), 2.0);
        let zero = SeInputs { bits: vec![0.0, 0.0], ..input.clone() };
        assert_eq!(avg_spectral_efficiency(&zero).unwrap(), 0.0);
        let double = SeInputs { bits: vec![10e6, 30e6], ..input.clone() };
        assert_eq!(avg_spectral_efficiency(&double).unwrap(), 4.0);
        let bad = SeInputs { trxps: 0, ..input };
        assert!(avg_spectral_efficiency(&bad).is_err());
    }

    #[test]
    fn fifth_percentile_convention() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((pct5_user_se(&v).unwrap() - 5.95).abs() < 1e-12);
        assert_eq!(pct5_user_se(&[0.7; 100]).unwrap(), 0.7);
        assert!(matches!(pct5_user_se(&[1.0; 19]), Err(Error::InsufficientSamples { needed: 20, got: 19 })));
        let mut w = v.clone();
        w.push(1000.0);
        assert!(pct5_user_se(&w).unwrap() >= 5.95);
    }

    #[test]
    fn quantile_ends_and_uniform_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut c = CdfEstimator::new();
        c.extend((0..1_000_000).map(|_| rng.random::<f64>()));
        assert!((c.quantile(0.05).unwrap() - 0.05).abs() < 0.002);
        let s = c.sorted_samples();
        assert_eq!(c.quantile(0.0).unwrap(), s[0]);
        assert_eq!(c.quantile(1.0).unwrap(), s[s.len() - 1]);
        assert!(CdfEstimator::new().quantile(0.5).is_err());
    }

    #[test]
    fn connection_density_examples() {
        let c = connection_density_fullbuffer(&CdInputs {
            n_mux: 10.0,
            bandwidth: 180e3,
            occupied: vec![1.8e3],
            isd: 500.0,
        })
        .unwrap();
        assert!((c - 13_856.4).abs() < 0.1, "{c}");
        assert_eq!(occupied_bandwidth(10.0, 1000.0, 100.0), 1.0);
        let far = connection_density_fullbuffer(&CdInputs {
            n_mux: 10.0,
            bandwidth: 180e3,
            occupied: vec![1.8e3],
            isd: 1000.0,
        })
        .unwrap();
        assert!((c / far - 4.0).abs() < 1e-12);
        // W and B in kHz instead of Hz
        let khz = connection_density_fullbuffer(&CdInputs {
            n_mux: 10.0,
            bandwidth: 180.0,
            occupied: vec![1.8],
            isd: 500.0,
        })
        .unwrap();
        assert!((khz - c).abs() < 1e-9 * c);
        assert!((sector_area_km2(500.0) - 0.07216878).abs() < 1e-8);
    }

    #[test]
    fn zero_delay_hits_upper_bound() {
        let grid = DensityGrid { min: 1e5, max: 1e7, step: 1e5 };
        let s = connection_density_nonfullbuffer(grid, |_| Ok(0.0)).unwrap();
        assert!(s.hit_upper_bound);
        assert_eq!(s.density, 1e7);
        assert!(s.pass);
    }

    #[test]
    fn requirement_boundary_is_inclusive() {
        let grid = DensityGrid { min: 1e5, max: 1e7, step: 1e5 };
        let s = connection_density_nonfullbuffer(grid, |d| Ok(if d <= 1e6 { 10.0 } else { 11.0 })).unwrap();
        assert!((s.density - 1e6).abs() < 1e-3);
        assert!(s.pass == (s.density >= 1e6));
        assert!(Metric::ConnectionDensity.meets(1e6, DENSITY_REQUIREMENT));
        assert!(s.monotone);
    }

    #[test]
    fn non_monotone_probes_are_flagged() {
        let grid = DensityGrid { min: 1.0, max: 100.0, step: 1.0 };
        // fails in a low band, passes above it, fails again at the top
        let s = connection_density_nonfullbuffer(grid, |d| Ok(if (20.0..30.0).contains(&d) || d > 90.0 { 20.0 } else { 1.0 }))
            .unwrap();
        assert!(!s.monotone);
        let (a, b) = s.bracket.unwrap();
        assert!(a < 20.0 && b > 90.0, "{a} {b}");
    }

    fn md1_crossing(rate: f64, d: f64) -> f64 {
        // density (per km², area 1 km²) where the 99th-percentile sojourn equals the bound
        let (mut lo, mut hi) = (1e-9, 1.0 / (rate * d) * (1.0 - 1e-12));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if md1_sojourn_quantile(mid * rate, d, 0.99) <= DENSITY_DELAY_BOUND {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    #[test]
    fn bisection_lands_on_md1_crossing() {
        let (rate, d) = (0.01, 1.0);
        let analytic = md1_crossing(rate, d);
        let grid = DensityGrid { min: 1.0, max: 200.0, step: 0.5 };
        let s = connection_density_nonfullbuffer(grid, |density| Ok(md1_sojourn_quantile(density * rate, d, 0.99))).unwrap();
        assert!((s.density - analytic).abs() <= grid.step, "{} vs {analytic}", s.density);
        assert!(s.density <= analytic);
    }

    #[test]
    fn md1_formula_matches_simulated_queue() {
        let (lambda, d) = (0.7, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let exp = Exp::new(lambda).unwrap();
        let mut t = 0.0;
        let arrivals: Vec<Arrival> = (0..2_000_000)
            .map(|_| {
                t += exp.sample(&mut rng);
                Arrival { ue_id: 0, time: t }
            })
            .collect();
        let log = serve_fifo(&arrivals, 1, |_| (d, 1, true));
        let q = md1_sojourn_quantile(lambda, d, 0.99);
        let within = arrivals.iter().zip(&log).filter(|(a, s)| s.completion_time - a.time <= q).count();
        let frac = within as f64 / arrivals.len() as f64;
        assert!((frac - 0.99).abs() < 0.0015, "{frac}");
        // P(W = 0) = 1 - rho
        assert!((md1_waiting_cdf(lambda, d, 0.0) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn reliability_arithmetic() {
        let cdf = CdfEstimator::from_samples((0..100).map(|i| i as f64 / 10.0).collect());
        let harq = HarqConfig {
            max_transmissions: 2,
            per_transmission_time: 0.5e-3,
            combining_gain_per_retx: 0.0,
        };
        // BLER pinned at the floor: two independent attempts
        let floor = BlerModel { sinr_50: -1e9, slope: 1.0, bler_floor: 0.01 };
        let r = reliability(&cdf, &floor, &harq, 1e-3).unwrap();
        assert_eq!(r.success, 0.9999);
        assert!(!r.pass);
        let perfect = BlerModel { sinr_50: -1e9, slope: 1.0, bler_floor: 0.0 };
        let r = reliability(&cdf, &perfect, &harq, 1e-3).unwrap();
        assert_eq!(r.success, 1.0);
        assert!(r.pass);
        assert!(Metric::Reliability.meets(0.99999, RELIABILITY_REQUIREMENT));
        assert!(!Metric::Reliability.meets(0.9999, RELIABILITY_REQUIREMENT));
    }

    #[test]
    fn mobility_examples() {
        let link = LinkParams::default();
        let ab = link.abstraction(Direction::Uplink);
        let cdf = CdfEstimator::from_samples(vec![10.0; 21]);
        let r = mobility_check(&cdf, 0.0, 4e9, &ab, &link.doppler_backoff, link.subcarrier_spacing, 0.8).unwrap();
        assert_eq!(r.backoff, 0.0);
        assert!((r.rate - 2.075659).abs() < 1e-6);
        assert!(r.pass);
        let fast = mobility_check(&cdf, 120.0, 700e6, &ab, &link.doppler_backoff, link.subcarrier_spacing, 0.8).unwrap();
        assert!(fast.backoff > 0.0 && fast.rate < r.rate);
    }

    #[test]
    fn uedr_examples() {
        assert_eq!(user_experienced_data_rate(&[60e6; 50]).unwrap(), 60e6);
        assert!(Metric::UserExperiencedRate.meets(0.5 * 100e6, UEDR_REQUIREMENT_UL));
        assert!(Metric::UserExperiencedRate.meets(60e6, UEDR_REQUIREMENT_UL));
        assert!(!Metric::UserExperiencedRate.meets(60e6, UEDR_REQUIREMENT_DL));
    }

    #[test]
    fn constant_stream_converges_after_window_plus_one() {
        let k = 25;
        let mut m = ConvergenceMonitor::new(k, 1e-3, 10_000);
        for i in 1..=k {
            assert_eq!(m.push(4.2), ConvergenceState::Continue, "drop {i}");
        }
        assert_eq!(m.push(4.2), ConvergenceState::Converged);
        assert_eq!(m.count(), k + 1);
    }

    #[test]
    fn oscillating_stream_is_capped() {
        let mut m = ConvergenceMonitor::new(10, 1e-12, ConvergenceMonitor::DEFAULT_CAP);
        let mut state = ConvergenceState::Continue;
        let mut n = 0;
        while state == ConvergenceState::Continue {
            n += 1;
            state = m.push(if n % 3 == 0 { 100.0 } else { -40.0 } * n as f64);
        }
        assert_eq!(state, ConvergenceState::Capped);
        assert_eq!(n, 10_000);
    }

    #[test]
    fn standard_error_shrinks_tenfold() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut m = ConvergenceMonitor::new(100, 0.0, 10_000);
        let mut at_100 = 0.0;
        for i in 1..=10_000 {
            m.push(rng.random::<f64>() * 5.0 - 3.0);
            if i == 100 {
                at_100 = m.standard_error();
            }
        }
        let ratio = at_100 / m.standard_error();
        assert!((ratio - 10.0).abs() <= 3.0, "{ratio}");
    }

    proptest! {
        #[test]
        fn quantile_is_monotone(xs in proptest::collection::vec(-1e6f64..1e6, 1..200), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let c = CdfEstimator::from_samples(xs);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(c.quantile(lo).unwrap() <= c.quantile(hi).unwrap());
        }

        #[test]
        fn se_is_invariant_under_reordering(mut bits in proptest::collection::vec(0.0f64..1e9, 1..50), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let base = SeInputs { n_drops: 3, bits: bits.clone(), duration: 0.5, bandwidth: 20e6, trxps: 57 };
            bits.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let shuffled = SeInputs { bits, ..base.clone() };
            let (a, b) = (avg_spectral_efficiency(&base).unwrap(), avg_spectral_efficiency(&shuffled).unwrap());
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }

        #[test]
        fn merge_order_does_not_matter(a in proptest::collection::vec(-10.0f64..10.0, 1..50),
                                       b in proptest::collection::vec(-10.0f64..10.0, 1..50)) {
            let (mut x, mut y) = (CdfEstimator::new(), CdfEstimator::new());
            x.extend(a.iter().copied()); x.extend(b.iter().copied());
            y.extend(b.iter().copied()); y.extend(a.iter().copied());
            x.sort(); y.sort();
            prop_assert_eq!(x.percentile_table().unwrap(), y.percentile_table().unwrap());
        }
    }
}
