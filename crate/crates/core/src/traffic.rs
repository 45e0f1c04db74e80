//! Traffic generation, proportional-fair scheduling and FIFO delay tracking.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, BTreeSet};

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrafficKind {
    FullBuffer,
    PoissonMessaging,
}

/// `[traffic]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficModelSpec {
    pub kind: TrafficKind,
    /// Bytes per message.
    pub pdu_size: u32,
    /// Messages per second per device.
    pub rate: f64,
    /// Bandwidth one user transmits on, Hz.
    pub user_bandwidth: f64,
    /// Resource units per scheduling interval.
    pub resources: u32,
    /// Proportional-fair averaging constant per interval.
    pub pf_constant: f64,
    /// Scheduling interval, seconds.
    pub slot_duration: f64,
    /// Fixed per-message signalling time added to each service, seconds.
    pub message_overhead: f64,
}

impl TrafficModelSpec {
    pub fn pdu_bits(&self) -> f64 {
        self.pdu_size as f64 * 8.0
    }

    /// Offered load of one device, bit/s.
    pub fn offered_load(&self) -> f64 {
        self.pdu_bits() * self.rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub ue_id: u32,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Arrivals {
    /// Every UE is always backlogged.
    FullBuffer,
    /// Sorted by time, then UE.
    Packets(Vec<Arrival>),
}

/// Independent Poisson arrivals per UE over `[0, horizon)`.
pub fn gen_arrivals<R: Rng + ?Sized>(spec: &TrafficModelSpec, n_ues: u32, horizon: f64, rng: &mut R) -> Arrivals {
    if spec.kind == TrafficKind::FullBuffer {
        return Arrivals::FullBuffer;
    }
    let exp = Exp::new(spec.rate).expect("rate validated positive");
    let mut out = Vec::new();
    for ue_id in 0..n_ues {
        let mut t = exp.sample(rng);
        while t < horizon {
            out.push(Arrival { ue_id, time: t });
            t += exp.sample(rng);
        }
    }
    out.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.ue_id.cmp(&b.ue_id)));
    Arrivals::Packets(out)
}

/// Per-UE averaged throughput plus the multiplexing history.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerState {
    pub averages: Vec<f64>,
    pub averaging_constant: f64,
    /// Distinct UEs holding resources in each interval so far.
    pub multiplexed: Vec<u32>,
}

impl SchedulerState {
    pub fn new(n_ues: usize, averaging_constant: f64) -> Self {
        SchedulerState {
            averages: vec![0.0; n_ues],
            averaging_constant,
            multiplexed: Vec::new(),
        }
    }
}

const PF_FLOOR: f64 = 1e-9;

/// One proportional-fair interval. `rates[u]` is the rate UE `u` gets on one
/// resource, bit/s. Returns the UE granted each resource.
///
/// Candidates are ranked by rate over average throughput, ties by UE id, and
/// resource k goes to the k-th candidate cyclically. UEs with zero rate are
/// passed over unless nobody can use the resources.
pub fn schedule_pf(backlogged: &[u32], rates: &[f64], state: &mut SchedulerState, resources: u32) -> Vec<u32> {
    let mut candidates: Vec<u32> = backlogged.iter().copied().filter(|&u| rates[u as usize] > 0.0).collect();
    if candidates.is_empty() {
        candidates = backlogged.to_vec();
    }
    candidates.sort_by(|&a, &b| {
        let ma = rates[a as usize] / state.averages[a as usize].max(PF_FLOOR);
        let mb = rates[b as usize] / state.averages[b as usize].max(PF_FLOOR);
        mb.total_cmp(&ma).then(a.cmp(&b))
    });
    let allocation: Vec<u32> = if candidates.is_empty() {
        Vec::new()
    } else {
        (0..resources as usize).map(|k| candidates[k % candidates.len()]).collect()
    };
    let mut served = vec![0u32; state.averages.len()];
    for &u in &allocation {
        served[u as usize] += 1;
    }
    let beta = state.averaging_constant;
    for (u, avg) in state.averages.iter_mut().enumerate() {
        *avg = (1.0 - beta) * *avg + beta * served[u] as f64 * rates[u];
    }
    let distinct = served.iter().filter(|&&s| s > 0).count() as u32;
    state.multiplexed.push(distinct);
    allocation
}

/// Time-average of multiplexed users per interval.
pub fn n_mux(multiplexed: &[u32]) -> Result<f64> {
    if multiplexed.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    Ok(multiplexed.iter().map(|&m| m as f64).sum::<f64>() / multiplexed.len() as f64)
}

/// How one packet was served.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceEvent {
    pub ue_id: u32,
    pub service_start: f64,
    pub completion_time: f64,
    pub transmissions: u32,
    pub delivered: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketRecord {
    pub ue_id: u32,
    pub arrival_time: f64,
    pub service_start: f64,
    pub completion_time: f64,
    pub transmissions_used: u32,
    /// False when every allowed transmission failed.
    pub delivered: bool,
}

impl PacketRecord {
    pub fn delay(&self) -> f64 {
        if self.delivered {
            self.completion_time - self.arrival_time
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Time(f64);

impl Eq for Time {}

impl PartialOrd for Time {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Time {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// First-come first-served queue with `servers` identical servers and an
/// unbounded waiting room. `service` returns (duration, transmissions, delivered).
pub fn serve_fifo(
    arrivals: &[Arrival],
    servers: usize,
    mut service: impl FnMut(&Arrival) -> (f64, u32, bool),
) -> Vec<ServiceEvent> {
    let mut free: BinaryHeap<Reverse<Time>> = (0..servers.max(1)).map(|_| Reverse(Time(0.0))).collect();
    let mut log = Vec::with_capacity(arrivals.len());
    for a in arrivals {
        let Reverse(Time(ready)) = free.pop().expect("at least one server");
        let start = ready.max(a.time);
        let (duration, transmissions, delivered) = service(a);
        let end = start + duration;
        free.push(Reverse(Time(end)));
        log.push(ServiceEvent {
            ue_id: a.ue_id,
            service_start: start,
            completion_time: end,
            transmissions,
            delivered,
        });
    }
    log
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayReport {
    pub records: Vec<PacketRecord>,
    /// Delays per UE in arrival order; undelivered packets count as infinite.
    pub per_ue: BTreeMap<u32, Vec<f64>>,
}

/// Joins arrivals with their service log (same order).
pub fn track_delays(arrivals: &[Arrival], service_log: &[ServiceEvent]) -> Result<DelayReport> {
    if arrivals.len() != service_log.len() {
        return Err(Error::Internal(format!(
            "{} arrivals but {} service entries",
            arrivals.len(),
            service_log.len()
        )));
    }
    let mut records = Vec::with_capacity(arrivals.len());
    let mut per_ue: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for (i, (a, s)) in arrivals.iter().zip(service_log).enumerate() {
        if a.ue_id != s.ue_id || s.service_start < a.time || s.completion_time < s.service_start {
            return Err(Error::Internal(format!("service entry {i} is inconsistent with its arrival")));
        }
        let rec = PacketRecord {
            ue_id: a.ue_id,
            arrival_time: a.time,
            service_start: s.service_start,
            completion_time: s.completion_time,
            transmissions_used: s.transmissions,
            delivered: s.delivered,
        };
        per_ue.entry(a.ue_id).or_default().push(rec.delay());
        records.push(rec);
    }
    Ok(DelayReport { records, per_ue })
}

/// UEs that appear in an allocation.
pub fn distinct_ues(allocation: &[u32]) -> usize {
    allocation.iter().collect::<BTreeSet<_>>().len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ContinuousCDF, Exp as ExpDist};

    fn poisson(rate: f64) -> TrafficModelSpec {
        TrafficModelSpec {
            kind: TrafficKind::PoissonMessaging,
            pdu_size: 32,
            rate,
            user_bandwidth: 180e3,
            resources: 12,
            pf_constant: 0.01,
            slot_duration: 1e-3,
            message_overhead: 0.0,
        }
    }

    #[test]
    fn full_buffer_is_a_sentinel() {
        let mut spec = poisson(1.0);
        spec.kind = TrafficKind::FullBuffer;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(gen_arrivals(&spec, 10, 1.0, &mut rng), Arrivals::FullBuffer);
    }

    #[test]
    fn poisson_mean_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (n, rate, h) = (10_000u32, 0.5, 4.0);
        let Arrivals::Packets(p) = gen_arrivals(&poisson(rate), n, h, &mut rng) else { panic!() };
        let mean = n as f64 * rate * h;
        assert!((p.len() as f64 - mean).abs() < 3.0 * mean.sqrt(), "{}", p.len());
        assert!(p.windows(2).all(|w| w[0].time <= w[1].time));
    }

    #[test]
    fn inter_arrivals_are_exponential() {
        // KS statistic against the exponential CDF, 1% critical value 1.628/sqrt(n)
        let rate = 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let Arrivals::Packets(p) = gen_arrivals(&poisson(rate), 1, 100_500.0 / rate, &mut rng) else { panic!() };
        let mut gaps: Vec<f64> = p.windows(2).map(|w| w[1].time - w[0].time).take(100_000).collect();
        let n = gaps.len().min(100_000);
        assert!(n > 90_000);
        gaps.sort_by(f64::total_cmp);
        let cdf = ExpDist::new(rate).unwrap();
        let d = gaps
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf.cdf(x);
                (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 1.628 / (n as f64).sqrt(), "{d}");
    }

    #[test]
    fn lone_ue_takes_everything() {
        let mut st = SchedulerState::new(3, 0.01);
        let a = schedule_pf(&[1], &[5.0, 5.0, 5.0], &mut st, 6);
        assert_eq!(a, vec![1; 6]);
    }

    #[test]
    fn zero_rate_ue_starves_while_others_wait() {
        let mut st = SchedulerState::new(3, 0.01);
        for _ in 0..200 {
            let a = schedule_pf(&[0, 1, 2], &[0.0, 1.0, 2.0], &mut st, 4);
            assert!(!a.contains(&0));
            assert_eq!(a.len(), 4);
        }
    }

    #[test]
    fn symmetric_ues_share_fairly() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 8;
        let mut st = SchedulerState::new(n, 0.01);
        let mut share = vec![0u64; n];
        let all: Vec<u32> = (0..n as u32).collect();
        for _ in 0..20_000 {
            let rates: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.1).collect();
            for u in schedule_pf(&all, &rates, &mut st, 1) {
                share[u as usize] += 1;
            }
        }
        for s in share {
            let frac = s as f64 / 20_000.0;
            assert!((frac * n as f64 - 1.0).abs() < 0.1, "{frac}");
        }
    }

    #[test]
    fn multiplexing_average() {
        assert_eq!(n_mux(&[1, 1, 1]).unwrap(), 1.0);
        assert_eq!(n_mux(&[2, 4, 2, 4]).unwrap(), 3.0);
        assert!(n_mux(&[]).is_err());
    }

    #[test]
    fn single_shot_delay_is_service_time() {
        let arr = [Arrival { ue_id: 0, time: 1.0 }];
        let log = serve_fifo(&arr, 1, |_| (0.25, 1, true));
        let r = track_delays(&arr, &log).unwrap();
        assert_eq!(r.records[0].delay(), 0.25);
    }

    #[test]
    fn back_to_back_jobs_queue() {
        let arr = [Arrival { ue_id: 0, time: 0.0 }, Arrival { ue_id: 1, time: 0.0 }];
        let log = serve_fifo(&arr, 1, |_| (1.0, 1, true));
        let r = track_delays(&arr, &log).unwrap();
        assert_eq!(r.records[0].delay(), 1.0);
        assert_eq!(r.records[1].delay(), 2.0);
    }

    #[test]
    fn empty_and_inconsistent_logs() {
        assert!(track_delays(&[], &[]).unwrap().records.is_empty());
        let arr = [Arrival { ue_id: 0, time: 2.0 }];
        let bad = [ServiceEvent {
            ue_id: 0,
            service_start: 1.0,
            completion_time: 3.0,
            transmissions: 1,
            delivered: true,
        }];
        assert!(matches!(track_delays(&arr, &bad), Err(Error::Internal(_))));
    }

    proptest! {
        #[test]
        fn scheduler_is_work_conserving_and_deterministic(
            rates in proptest::collection::vec(0.0f64..10.0, 1..12),
            resources in 1u32..20,
        ) {
            let all: Vec<u32> = (0..rates.len() as u32).collect();
            let mut s1 = SchedulerState::new(rates.len(), 0.05);
            let mut s2 = s1.clone();
            for _ in 0..5 {
                let a = schedule_pf(&all, &rates, &mut s1, resources);
                let b = schedule_pf(&all, &rates, &mut s2, resources);
                prop_assert_eq!(&a, &b);
                prop_assert_eq!(a.len(), resources as usize);
                prop_assert!(distinct_ues(&a) as u32 <= resources);
            }
            prop_assert!(s1.multiplexed.iter().all(|&m| m <= resources));
        }

        #[test]
        fn every_arrival_completes(times in proptest::collection::vec(0.0f64..100.0, 0..200), c in 1usize..4) {
            let mut t = times.clone();
            t.sort_by(f64::total_cmp);
            let arr: Vec<Arrival> = t.iter().map(|&time| Arrival { ue_id: 0, time }).collect();
            let log = serve_fifo(&arr, c, |_| (0.7, 1, true));
            let r = track_delays(&arr, &log).unwrap();
            prop_assert_eq!(r.records.len(), arr.len());
            for rec in &r.records {
                prop_assert!(rec.arrival_time <= rec.service_start && rec.service_start <= rec.completion_time);
            }
        }
    }
}
