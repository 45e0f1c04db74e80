//! Element patterns, panel arrays, TXRU virtualization and directivity.
//!
//! Angles are in degrees. Azimuth is measured counter-clockwise from the array
//! boresight in the horizontal plane, zenith from the local vertical axis, so the
//! boresight sits at (0°, 90°). Element positions are in wavelengths on the local
//! y (horizontal) and z (vertical) axes.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Panel array layout, orientation and element pattern shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    /// Elements per column.
    #[serde(rename = "M")]
    pub m: u32,
    /// Elements per row.
    #[serde(rename = "N")]
    pub n: u32,
    /// Polarizations, 1 (vertical) or 2 (±45° slant).
    #[serde(rename = "P")]
    pub p: u32,
    #[serde(rename = "Mg")]
    pub mg: u32,
    #[serde(rename = "Ng")]
    pub ng: u32,
    /// TXRU ports per column and per row of a panel.
    #[serde(rename = "Mp")]
    pub mp: u32,
    #[serde(rename = "Np")]
    pub np: u32,
    pub element_spacing_h: f64,
    pub element_spacing_v: f64,
    /// Panel pitch in wavelengths.
    pub panel_spacing_h: f64,
    pub panel_spacing_v: f64,
    /// Added to the sector boresight (BS) or the travel direction (UE).
    pub bearing: f64,
    /// Mechanical downtilt below the horizon.
    pub downtilt: f64,
    /// Electrical downtilt applied by the TXRU weights.
    pub electrical_downtilt: f64,
    pub isotropic: bool,
    pub h_beamwidth: f64,
    pub v_beamwidth: f64,
    pub front_back_ratio: f64,
    pub sidelobe_limit: f64,
}

impl ArrayConfig {
    /// A single vertically polarized isotropic element.
    pub fn single_isotropic() -> Self {
        ArrayConfig {
            m: 1,
            n: 1,
            p: 1,
            mg: 1,
            ng: 1,
            mp: 1,
            np: 1,
            element_spacing_h: 0.5,
            element_spacing_v: 0.8,
            panel_spacing_h: 0.5,
            panel_spacing_v: 0.8,
            bearing: 0.0,
            downtilt: 0.0,
            electrical_downtilt: 0.0,
            isotropic: true,
            h_beamwidth: 65.0,
            v_beamwidth: 65.0,
            front_back_ratio: 30.0,
            sidelobe_limit: 30.0,
        }
    }

    /// Directional panel with the default 65°/30 dB element and contiguous panels.
    pub fn panel(m: u32, n: u32, p: u32, mg: u32, ng: u32, mp: u32, np: u32) -> Self {
        ArrayConfig {
            m,
            n,
            p,
            mg,
            ng,
            mp,
            np,
            panel_spacing_h: n as f64 * 0.5,
            panel_spacing_v: m as f64 * 0.8,
            isotropic: false,
            ..ArrayConfig::single_isotropic()
        }
    }

    pub fn element_count(&self) -> usize {
        (self.m * self.n * self.p * self.mg * self.ng) as usize
    }

    pub fn port_count(&self) -> usize {
        (self.mp * self.np * self.p * self.mg * self.ng) as usize
    }

    pub fn pattern(&self, max_gain: f64) -> ElementPattern {
        ElementPattern {
            max_gain,
            h_3db_beamwidth: self.h_beamwidth,
            v_3db_beamwidth: self.v_beamwidth,
            front_back_ratio: self.front_back_ratio,
            sidelobe_limit: self.sidelobe_limit,
            isotropic: self.isotropic,
        }
    }

    pub fn orientation(&self, extra_bearing: f64) -> Orientation {
        Orientation::new(self.bearing + extra_bearing, self.downtilt)
    }

    /// Slant angle of polarization `p`, degrees.
    pub fn slant(&self, p: u32) -> f64 {
        match (self.p, p) {
            (1, _) => 0.0,
            (_, 0) => 45.0,
            _ => -45.0,
        }
    }

    /// Position of every element, index order (gm, gn, p, m, n) with n fastest.
    pub fn element_positions(&self) -> Vec<ElementPosition> {
        let mut out = Vec::with_capacity(self.element_count());
        for gm in 0..self.mg {
            for gn in 0..self.ng {
                for p in 0..self.p {
                    for m in 0..self.m {
                        for n in 0..self.n {
                            out.push(ElementPosition {
                                y: n as f64 * self.element_spacing_h
                                    + gn as f64 * self.panel_spacing_h,
                                z: m as f64 * self.element_spacing_v
                                    + gm as f64 * self.panel_spacing_v,
                                slant: self.slant(p),
                            });
                        }
                    }
                }
            }
        }
        out
    }

    fn element_index(&self, gm: u32, gn: u32, p: u32, m: u32, n: u32) -> usize {
        ((((gm * self.ng + gn) * self.p + p) * self.m + m) * self.n + n) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementPosition {
    pub y: f64,
    pub z: f64,
    pub slant: f64,
}

/// Parametric single-element power pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElementPattern {
    pub max_gain: f64,
    pub h_3db_beamwidth: f64,
    pub v_3db_beamwidth: f64,
    pub front_back_ratio: f64,
    pub sidelobe_limit: f64,
    pub isotropic: bool,
}

impl ElementPattern {
    pub fn isotropic(max_gain: f64) -> Self {
        ElementPattern {
            max_gain,
            h_3db_beamwidth: 65.0,
            v_3db_beamwidth: 65.0,
            front_back_ratio: 30.0,
            sidelobe_limit: 30.0,
            isotropic: true,
        }
    }

    /// Default directional BS element.
    pub fn directional(max_gain: f64) -> Self {
        ElementPattern {
            isotropic: false,
            ..ElementPattern::isotropic(max_gain)
        }
    }

    /// Gain without range checks; azimuth may be any angle.
    #[inline]
    pub fn gain_db(&self, azimuth: f64, zenith: f64) -> f64 {
        if self.isotropic {
            return self.max_gain;
        }
        let az = wrap_deg(azimuth);
        let a_v = -(12.0 * ((zenith - 90.0) / self.v_3db_beamwidth).powi(2)).min(self.sidelobe_limit);
        let a_h = -(12.0 * (az / self.h_3db_beamwidth).powi(2)).min(self.front_back_ratio);
        self.max_gain - (-(a_v + a_h)).min(self.front_back_ratio)
    }

    /// Field amplitudes (theta, phi) for an element with the given slant.
    #[inline]
    pub fn field(&self, azimuth: f64, zenith: f64, slant_deg: f64) -> (f64, f64) {
        let amp = 10f64.powf(self.gain_db(azimuth, zenith) / 20.0);
        if slant_deg == 0.0 {
            (amp, 0.0)
        } else {
            let (s, c) = slant_deg.to_radians().sin_cos();
            (amp * c, amp * s)
        }
    }
}

/// Element gain in dBi with range checking.
pub fn element_gain(pattern: &ElementPattern, azimuth: f64, zenith: f64) -> Result<f64> {
    if !(-180.0..=180.0).contains(&azimuth) || !(0.0..=180.0).contains(&zenith) {
        return Err(Error::Domain(format!(
            "angles (az {azimuth}, zen {zenith}) outside [-180,180]x[0,180]"
        )));
    }
    Ok(pattern.gain_db(azimuth, zenith))
}

/// Wraps an angle into (-180, 180].
#[inline]
pub fn wrap_deg(a: f64) -> f64 {
    if a > -180.0 && a <= 180.0 {
        return a;
    }
    if a > 180.0 && a <= 540.0 {
        return a - 360.0;
    }
    if a > -540.0 && a <= -180.0 {
        return a + 360.0;
    }
    let mut x = a % 360.0;
    if x > 180.0 {
        x -= 360.0;
    } else if x <= -180.0 {
        x += 360.0;
    }
    x
}

/// Rotation from global to array-local coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orientation {
    bearing: f64,
    tilted: bool,
    cb: f64,
    sb: f64,
    ct: f64,
    st: f64,
}

impl Orientation {
    pub fn new(bearing_deg: f64, downtilt_deg: f64) -> Self {
        let (sb, cb) = bearing_deg.to_radians().sin_cos();
        let (st, ct) = downtilt_deg.to_radians().sin_cos();
        Orientation {
            bearing: bearing_deg,
            tilted: downtilt_deg != 0.0,
            cb,
            sb,
            ct,
            st,
        }
    }

    /// Local (azimuth, zenith) of a global direction given in degrees.
    #[inline]
    pub fn local_angles(&self, azimuth: f64, zenith: f64) -> (f64, f64) {
        if !self.tilted {
            return (wrap_deg(azimuth - self.bearing), zenith);
        }
        let (sz, cz) = zenith.to_radians().sin_cos();
        let (sa, ca) = azimuth.to_radians().sin_cos();
        self.local_from_vec([sz * ca, sz * sa, cz])
    }

    /// A global direction vector expressed in array-local coordinates.
    #[inline]
    pub fn to_local(&self, v: [f64; 3]) -> [f64; 3] {
        let x1 = self.cb * v[0] + self.sb * v[1];
        let y1 = -self.sb * v[0] + self.cb * v[1];
        if !self.tilted {
            return [x1, y1, v[2]];
        }
        [self.ct * x1 - self.st * v[2], y1, self.st * x1 + self.ct * v[2]]
    }

    /// Local (azimuth, zenith) of a global direction vector (need not be unit).
    #[inline]
    pub fn local_from_vec(&self, v: [f64; 3]) -> (f64, f64) {
        // undo the bearing rotation about z
        let x1 = self.cb * v[0] + self.sb * v[1];
        let y1 = -self.sb * v[0] + self.cb * v[1];
        let z1 = v[2];
        // boresight (ct, 0, -st), local z axis (st, 0, ct)
        let xl = self.ct * x1 - self.st * z1;
        let zl = self.st * x1 + self.ct * z1;
        let norm = (xl * xl + y1 * y1 + zl * zl).sqrt();
        let zen = (zl / norm).clamp(-1.0, 1.0).acos().to_degrees();
        let az = y1.atan2(xl).to_degrees();
        (az, zen)
    }
}

/// Unit-modulus steering vector, one entry per element. Spacings are already
/// in wavelengths, so the carrier only documents the frequency they refer to.
pub fn array_response(config: &ArrayConfig, _carrier: f64, azimuth: f64, zenith: f64) -> Vec<Complex64> {
    let (u, w) = steering_components(azimuth, zenith);
    config
        .element_positions()
        .iter()
        .map(|e| Complex64::from_polar(1.0, 2.0 * PI * (u * e.y + w * e.z)))
        .collect()
}

/// Unit vector toward (azimuth, zenith), degrees.
#[inline]
pub fn direction(azimuth: f64, zenith: f64) -> [f64; 3] {
    let (sz, cz) = zenith.to_radians().sin_cos();
    let (sa, ca) = azimuth.to_radians().sin_cos();
    [sz * ca, sz * sa, cz]
}

fn steering_components(azimuth: f64, zenith: f64) -> (f64, f64) {
    let (sz, cz) = zenith.to_radians().sin_cos();
    let sa = azimuth.to_radians().sin();
    (sz * sa, cz)
}

/// Per-port element weights: `(element index, weight)` lists, unit power per port.
pub fn txru_weights(config: &ArrayConfig) -> Result<Vec<Vec<(usize, Complex64)>>> {
    if config.mp == 0 || config.np == 0 || config.mp > config.m || config.np > config.n {
        return Err(Error::Mapping(format!(
            "ports (Mp,Np)=({},{}) exceed elements (M,N)=({},{})",
            config.mp, config.np, config.m, config.n
        )));
    }
    if !config.m.is_multiple_of(config.mp) || !config.n.is_multiple_of(config.np) {
        return Err(Error::Mapping(format!(
            "(M,N)=({},{}) not divisible by (Mp,Np)=({},{})",
            config.m, config.n, config.mp, config.np
        )));
    }
    let k_v = config.m / config.mp;
    let l_h = config.n / config.np;
    let norm = 1.0 / ((k_v * l_h) as f64).sqrt();
    let tilt_zenith = (90.0 + config.electrical_downtilt).to_radians();
    let step = -2.0 * PI * config.element_spacing_v * tilt_zenith.cos();
    let mut ports = Vec::with_capacity(config.port_count());
    for gm in 0..config.mg {
        for gn in 0..config.ng {
            for p in 0..config.p {
                for pm in 0..config.mp {
                    for pn in 0..config.np {
                        let mut w = Vec::with_capacity((k_v * l_h) as usize);
                        for k in 0..k_v {
                            for l in 0..l_h {
                                let idx = config.element_index(gm, gn, p, pm * k_v + k, pn * l_h + l);
                                w.push((idx, Complex64::from_polar(norm, step * k as f64)));
                            }
                        }
                        ports.push(w);
                    }
                }
            }
        }
    }
    Ok(ports)
}

/// Element weights produced by driving each port with `signal_per_port`.
pub fn map_txru(config: &ArrayConfig, signal_per_port: &[Complex64]) -> Result<Vec<Complex64>> {
    let ports = txru_weights(config)?;
    if signal_per_port.len() != ports.len() {
        return Err(Error::Mapping(format!(
            "{} port signals for {} ports",
            signal_per_port.len(),
            ports.len()
        )));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); config.element_count()];
    for (port, s) in ports.iter().zip(signal_per_port) {
        for &(idx, w) in port {
            out[idx] += w * s;
        }
    }
    Ok(out)
}

/// Precomputed port-level array for the closed-form subarray response.
#[derive(Debug, Clone)]
pub struct PortArray {
    pub pattern: ElementPattern,
    pub orientation: Orientation,
    ports: Vec<ElementPosition>,
    /// (cos, sin) of each port's slant.
    polarization: Vec<(f64, f64)>,
    /// Field amplitude of an isotropic pattern.
    isotropic_amplitude: Option<f64>,
    k_v: u32,
    l_h: u32,
    dv: f64,
    dh: f64,
    cos_tilt: f64,
    norm: f64,
}

/// Field and array factor of every port toward one local direction.
#[derive(Debug, Clone, Copy)]
pub struct PortTerm {
    pub f_theta: f64,
    pub f_phi: f64,
    pub response: Complex64,
}

impl PortArray {
    pub fn new(config: &ArrayConfig, max_gain: f64, extra_bearing: f64) -> Result<Self> {
        let weights = txru_weights(config)?;
        let positions = config.element_positions();
        let ports: Vec<ElementPosition> = weights.iter().map(|w| positions[w[0].0]).collect();
        let polarization = ports
            .iter()
            .map(|p| {
                let (s, c) = p.slant.to_radians().sin_cos();
                (c, s)
            })
            .collect();
        let k_v = config.m / config.mp;
        let l_h = config.n / config.np;
        let pattern = config.pattern(max_gain);
        Ok(PortArray {
            pattern,
            orientation: config.orientation(extra_bearing),
            ports,
            polarization,
            isotropic_amplitude: pattern.isotropic.then(|| 10f64.powf(pattern.max_gain / 20.0)),
            k_v,
            l_h,
            dv: config.element_spacing_v,
            dh: config.element_spacing_h,
            cos_tilt: (90.0 + config.electrical_downtilt).to_radians().cos(),
            norm: 1.0 / ((k_v * l_h) as f64).sqrt(),
        })
    }

    pub fn port_count(&self) -> usize {
        self.ports.len()
    }

    /// Subarray factor shared by all ports, relative to each port's first element.
    #[inline]
    fn subarray_factor(&self, u: f64, w: f64) -> Complex64 {
        let x = 2.0 * PI * self.dv * (w - self.cos_tilt);
        let y = 2.0 * PI * self.dh * u;
        self.norm * dirichlet(self.k_v, x) * dirichlet(self.l_h, y)
    }

    /// Gain of one port toward a global direction, dBi (element plus subarray).
    #[inline]
    pub fn port_gain_db(&self, azimuth: f64, zenith: f64) -> f64 {
        let (az, zen) = self.orientation.local_angles(azimuth, zenith);
        self.local_port_gain_db(az, zen)
    }

    #[inline]
    pub fn local_port_gain_db(&self, az: f64, zen: f64) -> f64 {
        let g = self.pattern.gain_db(az, zen);
        if self.k_v == 1 && self.l_h == 1 {
            return g;
        }
        let (u, w) = steering_components(az, zen);
        g + 10.0 * self.subarray_factor(u, w).norm_sqr().max(1e-30).log10()
    }

    /// Per-port terms toward a global direction, written into `out`.
    pub fn terms(&self, azimuth: f64, zenith: f64, out: &mut Vec<PortTerm>) {
        out.clear();
        self.push_terms(direction(azimuth, zenith), out);
    }

    /// Appends the per-port terms toward the global unit vector `v`.
    pub fn push_terms(&self, v: [f64; 3], out: &mut Vec<PortTerm>) {
        let l = self.orientation.to_local(v);
        let (u, w) = (l[1], l[2]);
        let af = if self.k_v == 1 && self.l_h == 1 {
            Complex64::new(1.0, 0.0)
        } else {
            self.subarray_factor(u, w)
        };
        let amp = match self.isotropic_amplitude {
            Some(a) => a,
            None => {
                let az = l[1].atan2(l[0]).to_degrees();
                let zen = l[2].clamp(-1.0, 1.0).acos().to_degrees();
                10f64.powf(self.pattern.gain_db(az, zen) / 20.0)
            }
        };
        let mut last: Option<(f64, f64, Complex64)> = None;
        for (port, &(c, s)) in self.ports.iter().zip(&self.polarization) {
            // co-located polarization pairs share the phase term
            let response = match last {
                Some((y, z, r)) if y == port.y && z == port.z => r,
                _ => {
                    let r = af * Complex64::from_polar(1.0, 2.0 * PI * (u * port.y + w * port.z));
                    last = Some((port.y, port.z, r));
                    r
                }
            };
            out.push(PortTerm {
                f_theta: amp * c,
                f_phi: amp * s,
                response,
            });
        }
    }
}

/// Σ_{k<K} e^{jkx} in closed form.
#[inline]
fn dirichlet(count: u32, x: f64) -> Complex64 {
    if count == 1 {
        return Complex64::new(1.0, 0.0);
    }
    if count <= 16 {
        let step = Complex64::cis(x);
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for _ in 1..count {
            term *= step;
            sum += term;
        }
        return sum;
    }
    let k = count as f64;
    let half = 0.5 * x;
    let s = half.sin();
    let mag = if s.abs() < 1e-12 {
        // limit at the grating lobe carries the sign of cos(Kx/2)/cos(x/2)
        k * ((k * half).cos() / half.cos()).signum()
    } else {
        (k * half).sin() / s
    };
    Complex64::from_polar(1.0, (k - 1.0) * half) * mag
}

/// Radiated power density of the uniformly weighted, co-phased array.
fn power_density(pattern: &ElementPattern, elems: &[ElementPosition], weight: f64, az: f64, zen: f64) -> f64 {
    let (u, w) = steering_components(az, zen);
    let mut et = Complex64::new(0.0, 0.0);
    let mut ep = Complex64::new(0.0, 0.0);
    for e in elems {
        let (ft, fp) = pattern.field(az, zen, e.slant);
        let ph = Complex64::from_polar(weight, 2.0 * PI * (u * e.y + w * e.z));
        et += ph * ft;
        ep += ph * fp;
    }
    et.norm_sqr() + ep.norm_sqr()
}

fn check_resolution(grid_resolution: f64) -> Result<usize> {
    let steps = 180.0 / grid_resolution;
    if !(grid_resolution > 0.0) || (steps - steps.round()).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "grid resolution {grid_resolution}° does not divide 180°"
        )));
    }
    Ok(steps.round() as usize)
}

/// Peak power density and total radiated power from midpoint quadrature.
fn quadrature(config: &ArrayConfig, pattern: &ElementPattern, grid_resolution: f64) -> Result<(f64, f64)> {
    let n_zen = check_resolution(grid_resolution)?;
    let elems = config.element_positions();
    let weight = 1.0 / (elems.len() as f64).sqrt();
    let d = grid_resolution.to_radians();
    let mut peak = 0.0f64;
    let mut total = 0.0;
    for i in 0..n_zen {
        let zen = (i as f64 + 0.5) * grid_resolution;
        let sin_zen = zen.to_radians().sin();
        for j in 0..2 * n_zen {
            let az = -180.0 + (j as f64 + 0.5) * grid_resolution;
            let u = power_density(pattern, &elems, weight, az, zen);
            peak = peak.max(u);
            total += u * sin_zen * d * d;
        }
    }
    Ok((peak, total))
}

/// Directivity of the uniformly weighted broadside array, dBi.
pub fn directivity(config: &ArrayConfig, pattern: &ElementPattern, grid_resolution: f64) -> Result<f64> {
    let (peak, total) = quadrature(config, pattern, grid_resolution)?;
    Ok(10.0 * (peak * 4.0 * PI / total).log10())
}

/// Total radiated power of the uniformly weighted array (linear, arbitrary units).
pub fn total_radiated_power(config: &ArrayConfig, pattern: &ElementPattern, grid_resolution: f64) -> Result<f64> {
    Ok(quadrature(config, pattern, grid_resolution)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bs() -> ElementPattern {
        ElementPattern::directional(8.0)
    }

    #[test]
    fn boresight_gain_is_peak() {
        assert_eq!(element_gain(&bs(), 0.0, 90.0).unwrap(), 8.0);
    }

    #[test]
    fn isotropic_is_flat() {
        let p = ElementPattern::isotropic(0.0);
        for (a, z) in [(0.0, 0.0), (-180.0, 180.0), (33.0, 71.0)] {
            assert_eq!(element_gain(&p, a, z).unwrap(), 0.0);
        }
    }

    #[test]
    fn gain_at_half_power_azimuth() {
        let g = element_gain(&bs(), 65.0, 90.0).unwrap();
        assert!((g - (-4.0)).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_angles_rejected() {
        assert!(matches!(element_gain(&bs(), 181.0, 90.0), Err(Error::Domain(_))));
        assert!(matches!(element_gain(&bs(), 0.0, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn single_element_response() {
        let r = array_response(&ArrayConfig::single_isotropic(), 3.5e9, 40.0, 60.0);
        assert_eq!(r, vec![Complex64::new(1.0, 0.0)]);
    }

    #[test]
    fn broadside_column_is_in_phase() {
        let cfg = ArrayConfig::panel(8, 1, 1, 1, 1, 8, 1);
        let r = array_response(&cfg, 4e9, 0.0, 90.0);
        assert_eq!(r.len(), 8);
        for x in &r {
            assert!((x - r[0]).norm() < 1e-12);
        }
    }

    #[test]
    fn endfire_row_half_wavelength_phase_step() {
        let cfg = ArrayConfig::panel(1, 2, 1, 1, 1, 1, 2);
        let r = array_response(&cfg, 4e9, 90.0, 90.0);
        let dphi = (r[1] / r[0]).arg().abs();
        assert!((dphi - PI).abs() < 1e-9);
    }

    #[test]
    fn isotropic_directivity_is_zero_db() {
        let d = directivity(&ArrayConfig::single_isotropic(), &ElementPattern::isotropic(0.0), 1.0).unwrap();
        assert!(d.abs() < 0.05, "{d}");
    }

    #[test]
    fn single_bs_element_directivity() {
        // quadrature oracle at 0.25° resolution, frozen
        let d = directivity(&ArrayConfig::single_isotropic(), &bs(), 1.0).unwrap();
        let oracle = 9.82;
        assert!((d - oracle).abs() < 0.05, "{d}");
    }

    #[test]
    fn doubling_row_adds_three_db() {
        let iso = ElementPattern::isotropic(0.0);
        let four = ArrayConfig {
            isotropic: true,
            ..ArrayConfig::panel(1, 4, 1, 1, 1, 1, 4)
        };
        let eight = ArrayConfig { n: 8, np: 8, ..four.clone() };
        let d4 = directivity(&four, &iso, 0.5).unwrap();
        let d8 = directivity(&eight, &iso, 0.5).unwrap();
        assert!((d8 - d4 - 10.0 * 2f64.log10()).abs() < 0.5, "{d4} {d8}");
    }

    #[test]
    fn quadrature_refinement_is_stable() {
        let cfg = ArrayConfig::panel(2, 2, 2, 1, 1, 2, 2);
        let p1 = total_radiated_power(&cfg, &bs(), 1.0).unwrap();
        let p05 = total_radiated_power(&cfg, &bs(), 0.5).unwrap();
        assert!(((p1 - p05) / p05).abs() < 0.01);
    }

    #[test]
    fn resolution_must_divide_half_turn() {
        assert!(directivity(&ArrayConfig::single_isotropic(), &bs(), 7.0).is_err());
    }

    #[test]
    fn one_element_per_port_is_identity() {
        let mut cfg = ArrayConfig::panel(2, 2, 2, 1, 1, 2, 2);
        cfg.electrical_downtilt = 12.0;
        let ports = txru_weights(&cfg).unwrap();
        assert_eq!(ports.len(), cfg.element_count());
        for (i, p) in ports.iter().enumerate() {
            assert_eq!(p.len(), 1);
            assert_eq!(p[0].0, i);
            assert!((p[0].1 - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn large_panel_ports_span_four_rows() {
        let cfg = ArrayConfig::panel(8, 16, 2, 1, 1, 2, 8);
        let ports = txru_weights(&cfg).unwrap();
        assert_eq!(ports.len(), 2 * 8 * 2);
        for p in &ports {
            // 4 vertical x 2 horizontal elements
            assert_eq!(p.len(), 8);
        }
    }

    #[test]
    fn indivisible_mapping_rejected() {
        let cfg = ArrayConfig::panel(4, 4, 1, 1, 1, 3, 4);
        assert!(matches!(txru_weights(&cfg), Err(Error::Mapping(_))));
    }

    #[test]
    fn map_txru_rejects_wrong_signal_count() {
        let cfg = ArrayConfig::panel(4, 1, 1, 1, 1, 2, 1);
        assert!(map_txru(&cfg, &[Complex64::new(1.0, 0.0)]).is_err());
    }

    #[test]
    fn closed_form_port_response_matches_element_sum() {
        let mut cfg = ArrayConfig::panel(4, 4, 2, 1, 2, 2, 2);
        cfg.electrical_downtilt = 9.0;
        let pattern = cfg.pattern(8.0);
        let arr = PortArray::new(&cfg, 8.0, 0.0).unwrap();
        let ports = txru_weights(&cfg).unwrap();
        let mut terms = Vec::new();
        for (az, zen) in [(0.0, 90.0), (23.0, 101.0), (-70.0, 60.0), (150.0, 120.0)] {
            arr.terms(az, zen, &mut terms);
            let resp = array_response(&cfg, 4e9, az, zen);
            let elems = cfg.element_positions();
            for (q, port) in ports.iter().enumerate() {
                let mut ft = Complex64::new(0.0, 0.0);
                let mut fp = Complex64::new(0.0, 0.0);
                for &(idx, w) in port {
                    let (et, ep) = pattern.field(az, zen, elems[idx].slant);
                    ft += w * resp[idx] * et;
                    fp += w * resp[idx] * ep;
                }
                let t = terms[q];
                assert!((t.response * t.f_theta - ft).norm() < 1e-9);
                assert!((t.response * t.f_phi - fp).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn tilted_orientation_maps_boresight() {
        let o = Orientation::new(30.0, 12.0);
        let (az, zen) = o.local_angles(30.0, 102.0);
        assert!(az.abs() < 1e-9 && (zen - 90.0).abs() < 1e-9);
        let down = Orientation::new(0.0, 90.0);
        let (_, zen) = down.local_angles(0.0, 180.0);
        assert!((zen - 90.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn gain_bounded_and_symmetric(az in -180.0f64..=180.0, zen in 0.0f64..=180.0) {
            let p = bs();
            let g = p.gain_db(az, zen);
            prop_assert!(g <= p.max_gain + 1e-12);
            prop_assert!(g >= p.max_gain - p.front_back_ratio - 1e-12);
            prop_assert!((g - p.gain_db(-az, zen)).abs() < 1e-9);
            prop_assert!((g - p.gain_db(az, 180.0 - zen)).abs() < 1e-9);
        }

        #[test]
        fn port_weights_have_unit_power(m in 1u32..5, n in 1u32..5, p in 1u32..3, tilt in -20.0f64..20.0) {
            let mut cfg = ArrayConfig::panel(m * 2, n, p, 1, 1, 2, 1);
            cfg.electrical_downtilt = tilt;
            for port in txru_weights(&cfg).unwrap() {
                let power: f64 = port.iter().map(|(_, w)| w.norm_sqr()).sum();
                prop_assert!((power - 1.0).abs() < 1e-12);
            }
        }
    }
}
