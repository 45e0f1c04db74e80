use std::f64::consts::PI;

use num_complex::Complex64;

use super::clusters::ClusterSet;
use crate::antenna::{direction, PortArray, PortTerm};
use crate::link::SPEED_OF_LIGHT;

/// Everything generated for one link in one drop.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// dB.
    pub pathloss: f64,
    /// Shadow fading, dB.
    pub shadow: f64,
    /// Building penetration loss, dB (zero outdoors).
    pub penetration: f64,
    pub los: bool,
    pub clusters: ClusterSet,
    /// km/h.
    pub speed: f64,
    /// Travel direction, radians from east.
    pub direction: f64,
    pub carrier: f64,
    pub distance_3d: f64,
}

impl ChannelRealization {
    fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier
    }

    /// Doppler frequency of a ray arriving from (azimuth, zenith), Hz.
    pub fn doppler(&self, aoa: f64, zoa: f64) -> f64 {
        self.doppler_dir(direction(aoa, zoa))
    }

    /// Doppler frequency of a ray arriving along the unit vector `v`, Hz.
    #[inline]
    pub fn doppler_dir(&self, v: [f64; 3]) -> f64 {
        let (sd, cd) = self.direction.sin_cos();
        self.speed / 3.6 * (v[0] * cd + v[1] * sd) / self.wavelength()
    }

    /// Pathloss, shadowing and penetration, dB.
    pub fn total_loss(&self) -> f64 {
        self.pathloss + self.shadow + self.penetration
    }
}

/// One ray; its port terms live in the generator's flat term arrays.
#[derive(Debug, Clone)]
struct Ray {
    cluster: usize,
    amplitude: f64,
    coupling: [Complex64; 4],
    doppler: f64,
}

/// Time-varying port-to-port channel of a realization.
#[derive(Debug, Clone)]
pub struct CoefficientGenerator {
    n_clusters: usize,
    n_tx: usize,
    n_rx: usize,
    rays: Vec<Ray>,
    /// `rays.len() * n_tx` and `rays.len() * n_rx`, ray-major.
    tx_terms: Vec<PortTerm>,
    rx_terms: Vec<PortTerm>,
}

impl CoefficientGenerator {
    pub fn new(real: &ChannelRealization, tx: &PortArray, rx: &PortArray) -> Self {
        let cs = &real.clusters;
        let m = cs.rays_per_cluster;
        let k = cs.k_factor;
        let scatter = (1.0 / (k + 1.0)).sqrt();
        let n_rays = cs.n_clusters * m + usize::from(k > 0.0);
        let mut rays = Vec::with_capacity(n_rays);
        let mut tx_terms = Vec::with_capacity(n_rays * tx.port_count());
        let mut rx_terms = Vec::with_capacity(n_rays * rx.port_count());
        for c in 0..cs.n_clusters {
            let amp = scatter * (cs.nlos_powers[c] / m as f64).sqrt();
            for r in 0..m {
                let i = c * m + r;
                let arrival = direction(cs.ray_aoa[i], cs.ray_zoa[i]);
                tx.push_terms(direction(cs.ray_aod[i], cs.ray_zod[i]), &mut tx_terms);
                rx.push_terms(arrival, &mut rx_terms);
                let cross = (1.0 / cs.xpr[i]).sqrt();
                let ph = cs.phases[i];
                rays.push(Ray {
                    cluster: c,
                    amplitude: amp,
                    coupling: [
                        Complex64::from_polar(1.0, ph[0]),
                        Complex64::from_polar(cross, ph[1]),
                        Complex64::from_polar(cross, ph[2]),
                        Complex64::from_polar(1.0, ph[3]),
                    ],
                    doppler: real.doppler_dir(arrival),
                });
            }
        }
        if k > 0.0 {
            let a = cs.los_angles;
            let arrival = direction(a.aoa, a.zoa);
            tx.push_terms(direction(a.aod, a.zod), &mut tx_terms);
            rx.push_terms(arrival, &mut rx_terms);
            let phase = Complex64::from_polar(1.0, -2.0 * PI * real.distance_3d / real.wavelength());
            rays.push(Ray {
                cluster: 0,
                amplitude: (k / (k + 1.0)).sqrt(),
                coupling: [phase, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), -phase],
                doppler: real.doppler_dir(arrival),
            });
        }
        CoefficientGenerator {
            n_clusters: cs.n_clusters,
            n_tx: tx.port_count(),
            n_rx: rx.port_count(),
            rays,
            tx_terms,
            rx_terms,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rx, self.n_tx)
    }

    /// Per-cluster matrices (rx x tx, row-major) at time `t`.
    pub fn cluster_matrices(&self, t: f64) -> Vec<Vec<Complex64>> {
        self.flat_clusters(t)
            .chunks(self.n_rx * self.n_tx)
            .map(|c| c.to_vec())
            .collect()
    }

    /// All cluster matrices in one buffer, cluster-major.
    fn flat_clusters(&self, t: f64) -> Vec<Complex64> {
        let size = self.n_rx * self.n_tx;
        let mut out = vec![Complex64::new(0.0, 0.0); self.n_clusters * size];
        let mut vt = vec![Complex64::new(0.0, 0.0); self.n_tx];
        let mut vp = vec![Complex64::new(0.0, 0.0); self.n_tx];
        for (i, ray) in self.rays.iter().enumerate() {
            let rot = if t == 0.0 {
                Complex64::new(ray.amplitude, 0.0)
            } else {
                Complex64::from_polar(ray.amplitude, 2.0 * PI * ray.doppler * t)
            };
            let [m00, m01, m10, m11] = ray.coupling;
            for (s, term) in self.tx_terms[i * self.n_tx..(i + 1) * self.n_tx].iter().enumerate() {
                let gt = term.response * term.f_theta;
                let gp = term.response * term.f_phi;
                vt[s] = (m00 * gt + m01 * gp) * rot;
                vp[s] = (m10 * gt + m11 * gp) * rot;
            }
            let h = &mut out[ray.cluster * size..(ray.cluster + 1) * size];
            for (u, term) in self.rx_terms[i * self.n_rx..(i + 1) * self.n_rx].iter().enumerate() {
                let qt = term.response * term.f_theta;
                let qp = term.response * term.f_phi;
                let row = &mut h[u * self.n_tx..(u + 1) * self.n_tx];
                for s in 0..self.n_tx {
                    row[s] += qt * vt[s] + qp * vp[s];
                }
            }
        }
        out
    }

    /// Narrowband channel at time `t`: the clusters summed at zero delay offset.
    pub fn coefficients(&self, t: f64) -> Vec<Complex64> {
        let mut sum = vec![Complex64::new(0.0, 0.0); self.n_rx * self.n_tx];
        for h in self.cluster_matrices(t) {
            for (a, b) in sum.iter_mut().zip(h) {
                *a += b;
            }
        }
        sum
    }

    /// Band-averaged power gain Σ_clusters ‖H_n(t)‖², summed over all port pairs.
    pub fn wideband_gain(&self, t: f64) -> f64 {
        self.flat_clusters(t).iter().map(|h| h.norm_sqr()).sum()
    }

    /// Band-averaged power gain per receive port, summed over transmit ports.
    pub fn rx_port_gains(&self, t: f64) -> Vec<f64> {
        let mut g = vec![0.0; self.n_rx];
        for h in self.cluster_matrices(t) {
            for (u, gu) in g.iter_mut().enumerate() {
                *gu += h[u * self.n_tx..(u + 1) * self.n_tx].iter().map(|x| x.norm_sqr()).sum::<f64>();
            }
        }
        g
    }
}

/// Channel coefficients of a realization at time `t` (rx x tx, row-major).
pub fn channel_coeff(real: &ChannelRealization, tx: &PortArray, rx: &PortArray, t: f64) -> Vec<Complex64> {
    CoefficientGenerator::new(real, tx, rx).coefficients(t)
}

/// Scales coefficients by 10^(−loss/20) for the given pathloss and shadowing.
pub fn apply_pl_sf(pathloss: f64, shadow: f64, coeffs: &[Complex64]) -> Vec<Complex64> {
    let a = 10f64.powf(-(pathloss + shadow) / 20.0);
    coeffs.iter().map(|h| h * a).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::antenna::ArrayConfig;
    use crate::channel::clusters::{gen_clusters, LosAngles};
    use crate::channel::{gen_lsp, ProfileLibrary};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn iso() -> PortArray {
        PortArray::new(&ArrayConfig::single_isotropic(), 0.0, 0.0).unwrap()
    }

    fn realization_in(name: &str, seed: u64, los: bool, speed: f64) -> ChannelRealization {
        let p = ProfileLibrary::builtin().get(name).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lsp = gen_lsp(p, los, 4e9, &mut rng);
        let tx = [0.0, 0.0, 25.0];
        let rx = [120.0, 40.0, 1.5];
        let cond = p.condition(los);
        let zsd_mu = cond.zsd.mean(p.lsp_x(4e9));
        let clusters =
            gen_clusters(cond, &lsp, cond.clusters as usize, cond.rays as usize, zsd_mu, LosAngles::between(tx, rx), false, &mut rng);
        ChannelRealization {
            pathloss: 100.0,
            shadow: lsp.sf,
            penetration: 0.0,
            los,
            clusters,
            speed,
            direction: 0.3,
            carrier: 4e9,
            distance_3d: 126.7,
        }
    }

    fn realization(seed: u64, los: bool, speed: f64) -> ChannelRealization {
        realization_in("UMa_A", seed, los, speed)
    }

    #[test]
    fn unit_average_power_for_every_profile() {
        // 4 x 2 vertical isotropic ports at the BS, 2 at the UE
        let bs = PortArray::new(&ArrayConfig { m: 4, n: 2, mp: 4, np: 2, ..ArrayConfig::single_isotropic() }, 0.0, 0.0).unwrap();
        let ue = PortArray::new(&ArrayConfig { n: 2, np: 2, ..ArrayConfig::single_isotropic() }, 0.0, 0.0).unwrap();
        let count = (bs.port_count() * ue.port_count()) as f64;
        for name in ["UMa_A", "UMa_B", "UMi_A", "UMi_B", "RMa_A", "InH_A", "InH_B"] {
            for los in [false, true] {
                let n = 10_000;
                let mean: f64 = (0..n)
                    .map(|i| {
                        let r = realization_in(name, i, los, 3.0);
                        channel_coeff(&r, &bs, &ue, 0.0).iter().map(|h| h.norm_sqr()).sum::<f64>() / count
                    })
                    .sum::<f64>()
                    / n as f64;
                assert!((mean - 1.0).abs() < 0.02, "{name} los={los} {mean}");
            }
        }
    }

    #[test]
    fn wideband_gain_has_unit_mean() {
        let (tx, rx) = (iso(), iso());
        let n = 2000;
        let mean: f64 =
            (0..n).map(|i| CoefficientGenerator::new(&realization(i, false, 3.0), &tx, &rx).wideband_gain(0.0)).sum::<f64>()
                / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn deterministic_and_static_without_motion() {
        let (tx, rx) = (iso(), iso());
        let a = realization(7, true, 0.0);
        let b = realization(7, true, 0.0);
        assert_eq!(a, b);
        let g = CoefficientGenerator::new(&a, &tx, &rx);
        assert_eq!(g.coefficients(0.0), g.coefficients(0.5));
        let moving = CoefficientGenerator::new(&realization(7, true, 30.0), &tx, &rx);
        assert_ne!(moving.coefficients(0.0), moving.coefficients(0.01));
    }

    fn single_ray(speed: f64) -> ChannelRealization {
        let mut r = realization(1, false, speed);
        let cs = &mut r.clusters;
        cs.n_clusters = 1;
        cs.rays_per_cluster = 1;
        cs.delays = vec![0.0];
        cs.powers = vec![1.0];
        cs.nlos_powers = vec![1.0];
        cs.k_factor = 0.0;
        // arriving from the travel direction on the horizon
        let az = r.direction.to_degrees();
        cs.ray_aoa = vec![az];
        cs.ray_zoa = vec![90.0];
        cs.ray_aod = vec![0.0];
        cs.ray_zod = vec![90.0];
        cs.xpr = vec![1e9];
        cs.phases = vec![[0.4, 0.0, 0.0, 0.0]];
        r
    }

    #[test]
    fn single_ray_has_unit_magnitude() {
        let g = CoefficientGenerator::new(&single_ray(60.0), &iso(), &iso());
        for i in 0..50 {
            let h = g.coefficients(i as f64 * 1e-3)[0];
            assert!((h.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn doppler_autocorrelation_first_zero() {
        let r = single_ray(60.0);
        let fd = crate::link::doppler_hz(60.0, 4e9);
        assert!((r.doppler(r.direction.to_degrees(), 90.0) - fd).abs() < 1e-9 * fd);
        let g = CoefficientGenerator::new(&r, &iso(), &iso());
        // Re R(τ) = cos(2π f_D τ): first minimum at 1/(2 f_D)
        let dt = 1e-6;
        let h0 = g.coefficients(0.0)[0];
        let re = |tau: f64| (g.coefficients(tau)[0] * h0.conj()).re;
        let mut tau = dt;
        while re(tau + dt) < re(tau) {
            tau += dt;
        }
        let expected = 1.0 / (2.0 * fd);
        assert!((tau - expected).abs() / expected < 0.05, "{tau} vs {expected}");
    }

    #[test]
    fn pathloss_and_shadowing_scale_amplitude() {
        let h = [Complex64::new(1.0, 0.0), Complex64::new(0.0, -2.0)];
        let out = apply_pl_sf(90.0, 10.0, &h);
        assert!((out[0].norm() - 1e-5).abs() < 1e-18);
        assert!((out[1].norm() - 2e-5).abs() < 1e-18);
        assert_eq!(apply_pl_sf(0.0, 0.0, &h), h.to_vec());
    }
}
