//! Network layouts, UE drops, wrap-around distances and cell attachment.
//!
//! Coordinates are meters with x east, y north, z up. Azimuths are degrees
//! counter-clockwise from east.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::EvaluationConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayoutKind {
    HexMacro19,
    Indoor12,
    DenseUrbanTwoLayer,
    /// One sector with nothing around it; used to isolate a link from interference.
    Isolated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tier {
    Macro,
    Micro,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Site {
    pub site_id: usize,
    pub position: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Trxp {
    pub trxp_id: usize,
    pub site_id: usize,
    pub sector: usize,
    pub boresight: f64,
    pub position: [f64; 3],
    pub tier: Tier,
}

/// Region a TRxP's UEs are dropped into.
#[derive(Debug, Clone, Copy, PartialEq)]
enum DropArea {
    /// origin + u·a + v·b with u, v uniform in [0, 1).
    Parallelogram { origin: [f64; 2], a: [f64; 2], b: [f64; 2] },
}

impl DropArea {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        match *self {
            DropArea::Parallelogram { origin, a, b } => {
                let u: f64 = rng.random();
                let v: f64 = rng.random();
                [origin[0] + u * a[0] + v * b[0], origin[1] + u * a[1] + v * b[1]]
            }
        }
    }

    fn area(&self) -> f64 {
        match *self {
            DropArea::Parallelogram { a, b, .. } => (a[0] * b[1] - a[1] * b[0]).abs(),
        }
    }

    fn contains(&self, p: [f64; 2]) -> bool {
        match *self {
            DropArea::Parallelogram { origin, a, b } => {
                let det = a[0] * b[1] - a[1] * b[0];
                let (dx, dy) = (p[0] - origin[0], p[1] - origin[1]);
                let u = (dx * b[1] - dy * b[0]) / det;
                let v = (a[0] * dy - a[1] * dx) / det;
                let eps = 1e-12;
                (-eps..1.0 + eps).contains(&u) && (-eps..1.0 + eps).contains(&v)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkLayout {
    pub kind: LayoutKind,
    pub isd: f64,
    pub sites: Vec<Site>,
    pub trxps: Vec<Trxp>,
    /// Zero plus the lattice offsets of the neighboring cluster copies.
    pub wrap_translations: Vec<[f64; 2]>,
    /// Drop area of every macro TRxP, index-aligned with `trxps`.
    areas: Vec<DropArea>,
    /// Minimum 2D distance between a UE and any macro TRxP.
    pub min_ue_distance: f64,
}

/// Sector boresights, degrees from east.
pub const SECTOR_BORESIGHTS: [f64; 3] = [30.0, 150.0, 270.0];

/// Axial offsets of the six neighboring copies of the 19-site cluster.
const WRAP_AXIAL: [(f64, f64); 6] = [(5.0, -2.0), (2.0, 3.0), (-3.0, 5.0), (-5.0, 2.0), (-2.0, -3.0), (3.0, -5.0)];

pub const MICRO_HEIGHT: f64 = 10.0;
pub const MICRO_PER_SECTOR: usize = 3;
pub const MICRO_SEPARATION: f64 = 57.9;
pub const MICRO_UE_MIN_DISTANCE: f64 = 10.0;
const MICRO_CANDIDATES: usize = 2_000;
const MICRO_SECTOR_RESTARTS: usize = 50;
const MICRO_LAYER_RESTARTS: usize = 20;

const INDOOR_X: [f64; 6] = [10.0, 30.0, 50.0, 70.0, 90.0, 110.0];
const INDOOR_Y: [f64; 2] = [15.0, 35.0];

fn axial(isd: f64, q: f64, r: f64) -> [f64; 2] {
    [isd * (q + 0.5 * r), isd * r * 3f64.sqrt() / 2.0]
}

fn polar(len: f64, deg: f64) -> [f64; 2] {
    let (s, c) = deg.to_radians().sin_cos();
    [len * c, len * s]
}

fn hex_sites(isd: f64) -> Vec<Site> {
    let mut coords = Vec::new();
    for q in -2i32..=2 {
        for r in -2i32..=2 {
            if (q.abs() + r.abs() + (q + r).abs()) / 2 <= 2 {
                coords.push((q, r));
            }
        }
    }
    // centre first, then by ring and angle
    coords.sort_by(|a, b| {
        let ring = |&(q, r): &(i32, i32)| (q.abs() + r.abs() + (q + r).abs()) / 2;
        let ang = |&(q, r): &(i32, i32)| {
            let p = axial(1.0, q as f64, r as f64);
            p[1].atan2(p[0]).rem_euclid(2.0 * PI)
        };
        ring(a).cmp(&ring(b)).then(ang(a).total_cmp(&ang(b)))
    });
    coords
        .into_iter()
        .enumerate()
        .map(|(site_id, (q, r))| Site {
            site_id,
            position: axial(isd, q as f64, r as f64),
        })
        .collect()
}

impl NetworkLayout {
    /// Three-sector 19-site hexagonal layout with wrap-around.
    pub fn hex19(isd: f64, bs_height: f64, min_ue_distance: f64) -> Self {
        let sites = hex_sites(isd);
        let radius = isd / 3f64.sqrt();
        let mut trxps = Vec::with_capacity(57);
        let mut areas = Vec::with_capacity(57);
        for site in &sites {
            for (sector, &b) in SECTOR_BORESIGHTS.iter().enumerate() {
                trxps.push(Trxp {
                    trxp_id: trxps.len(),
                    site_id: site.site_id,
                    sector,
                    boresight: b,
                    position: [site.position[0], site.position[1], bs_height],
                    tier: Tier::Macro,
                });
                areas.push(DropArea::Parallelogram {
                    origin: site.position,
                    a: polar(radius, b - 60.0),
                    b: polar(radius, b + 60.0),
                });
            }
        }
        let mut wrap_translations = vec![[0.0, 0.0]];
        wrap_translations.extend(WRAP_AXIAL.iter().map(|&(q, r)| axial(isd, q, r)));
        NetworkLayout {
            kind: LayoutKind::HexMacro19,
            isd,
            sites,
            trxps,
            wrap_translations,
            areas,
            min_ue_distance,
        }
    }

    /// Twelve ceiling TRxPs 20 m apart on a 120 m x 50 m floor, no wrap-around.
    pub fn indoor12(bs_height: f64, min_ue_distance: f64) -> Self {
        let mut sites = Vec::new();
        let mut trxps = Vec::new();
        let mut areas = Vec::new();
        for (row, &y) in INDOOR_Y.iter().enumerate() {
            for &x in &INDOOR_X {
                let id = sites.len();
                sites.push(Site { site_id: id, position: [x, y] });
                trxps.push(Trxp {
                    trxp_id: id,
                    site_id: id,
                    sector: 0,
                    boresight: 0.0,
                    position: [x, y, bs_height],
                    tier: Tier::Macro,
                });
                areas.push(DropArea::Parallelogram {
                    origin: [x - 10.0, row as f64 * 25.0],
                    a: [20.0, 0.0],
                    b: [0.0, 25.0],
                });
            }
        }
        NetworkLayout {
            kind: LayoutKind::Indoor12,
            isd: 20.0,
            sites,
            trxps,
            wrap_translations: vec![[0.0, 0.0]],
            areas,
            min_ue_distance,
        }
    }

    /// A single sector at the origin with boresight east.
    pub fn isolated(isd: f64, bs_height: f64, min_ue_distance: f64) -> Self {
        let radius = isd / 3f64.sqrt();
        NetworkLayout {
            kind: LayoutKind::Isolated,
            isd,
            sites: vec![Site { site_id: 0, position: [0.0, 0.0] }],
            trxps: vec![Trxp {
                trxp_id: 0,
                site_id: 0,
                sector: 0,
                boresight: 0.0,
                position: [0.0, 0.0, bs_height],
                tier: Tier::Macro,
            }],
            wrap_translations: vec![[0.0, 0.0]],
            areas: vec![DropArea::Parallelogram {
                origin: [0.0, 0.0],
                a: polar(radius, -60.0),
                b: polar(radius, 60.0),
            }],
            min_ue_distance,
        }
    }

    /// Macro TRxPs, the ones UEs are dropped around.
    pub fn macro_count(&self) -> usize {
        self.areas.len()
    }

    /// Area UEs of one macro TRxP are dropped over, m².
    pub fn trxp_area(&self, trxp: usize) -> f64 {
        self.areas[trxp].area()
    }

    /// Area of the region tiled by the wrap-around lattice, m².
    pub fn wrapped_area(&self) -> f64 {
        match self.kind {
            LayoutKind::HexMacro19 | LayoutKind::DenseUrbanTwoLayer => {
                let a = self.wrap_translations[1];
                let b = self.wrap_translations[2];
                (a[0] * b[1] - a[1] * b[0]).abs()
            }
            _ => self.areas.iter().map(DropArea::area).sum(),
        }
    }

    /// Smallest distance from `p` to a macro TRxP over all wrap images.
    fn nearest_macro(&self, p: [f64; 2]) -> f64 {
        self.trxps
            .iter()
            .filter(|t| t.tier == Tier::Macro)
            .map(|t| wrap_distance(self, p, [t.position[0], t.position[1]]).0)
            .fold(f64::INFINITY, f64::min)
    }

    /// Drops three micro TRxPs into every macro sector, redrawing any that land
    /// within `MICRO_SEPARATION` of a macro site or another micro TRxP.
    pub fn with_micro_layer<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Self> {
        for _ in 0..MICRO_LAYER_RESTARTS {
            if let Some(placed) = self.try_micro_positions(rng) {
                let mut out = self.clone();
                out.kind = LayoutKind::DenseUrbanTwoLayer;
                for (i, p) in placed.into_iter().enumerate() {
                    let host = &self.trxps[i / MICRO_PER_SECTOR];
                    out.trxps.push(Trxp {
                        trxp_id: out.trxps.len(),
                        site_id: host.site_id,
                        sector: host.sector,
                        boresight: 0.0,
                        position: [p[0], p[1], MICRO_HEIGHT],
                        tier: Tier::Micro,
                    });
                }
                return Ok(out);
            }
        }
        Err(Error::Internal(format!("no room for {MICRO_PER_SECTOR} micro TRxPs per sector")))
    }

    /// One attempt at the whole micro layer. Micro–micro spacing is enforced among the
    /// micros of one sector; a sector that jams is redrawn a bounded number of times.
    fn try_micro_positions<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Vec<[f64; 2]>> {
        let mut placed: Vec<[f64; 2]> = Vec::with_capacity(self.areas.len() * MICRO_PER_SECTOR);
        for area in &self.areas {
            let kept = placed.len();
            let mut sector_done = false;
            for _ in 0..MICRO_SECTOR_RESTARTS {
                placed.truncate(kept);
                let mut jammed = false;
                for _ in 0..MICRO_PER_SECTOR {
                    let found = (0..MICRO_CANDIDATES).map(|_| area.sample(rng)).find(|&p| {
                        self.nearest_macro(p) >= MICRO_SEPARATION
                            && placed[kept..].iter().all(|&q| wrap_distance(self, p, q).0 >= MICRO_SEPARATION)
                    });
                    match found {
                        Some(p) => placed.push(p),
                        None => {
                            jammed = true;
                            break;
                        }
                    }
                }
                if !jammed {
                    sector_done = true;
                    break;
                }
            }
            if !sector_done {
                return None;
            }
        }
        Some(placed)
    }
}

/// Layout for a configuration. The micro layer is random and added per drop.
pub fn build_layout(config: &EvaluationConfig) -> NetworkLayout {
    let s = &config.scenario;
    match s.environment.layout_kind() {
        LayoutKind::Indoor12 => NetworkLayout::indoor12(s.bs_height, s.min_ue_distance),
        LayoutKind::HexMacro19 | LayoutKind::DenseUrbanTwoLayer => {
            NetworkLayout::hex19(s.isd, s.bs_height, s.min_ue_distance)
        }
        LayoutKind::Isolated => NetworkLayout::isolated(s.isd, s.bs_height, s.min_ue_distance),
    }
}

/// Wrap-around distance from `a` to `b` in the plane and the translation applied
/// to `b` that achieves it. Ties go to the earlier translation.
pub fn wrap_distance(layout: &NetworkLayout, a: [f64; 2], b: [f64; 2]) -> (f64, [f64; 2]) {
    let mut best = (f64::INFINITY, [0.0, 0.0]);
    for &t in &layout.wrap_translations {
        let dx = b[0] + t[0] - a[0];
        let dy = b[1] + t[1] - a[1];
        let d = (dx * dx + dy * dy).sqrt();
        if d < best.0 {
            best = (d, t);
        }
    }
    best
}

/// Closest wrap image of a 3D point `b` as seen from `a`.
pub fn wrap_image(layout: &NetworkLayout, a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    let (_, t) = wrap_distance(layout, [a[0], a[1]], [b[0], b[1]]);
    [b[0] + t[0], b[1] + t[1], b[2]]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UePlacement {
    pub ue_id: u32,
    pub position: [f64; 3],
    pub indoor: bool,
    /// Behind a high-loss building wall (indoor UEs only).
    pub high_loss: bool,
    /// Indoor path length for penetration loss, meters.
    pub indoor_distance: f64,
    /// km/h.
    pub speed: f64,
    /// Travel direction, radians in [0, 2π).
    pub direction: f64,
    /// TRxP whose area the UE was dropped into.
    pub home_trxp: usize,
    pub serving_trxp: Option<usize>,
}

/// Drops `ues_per_trxp` UEs uniformly into every macro TRxP area.
pub fn drop_ues<R: Rng + ?Sized>(layout: &NetworkLayout, config: &EvaluationConfig, rng: &mut R) -> Vec<UePlacement> {
    let s = &config.scenario;
    let micro: Vec<[f64; 2]> = layout
        .trxps
        .iter()
        .filter(|t| t.tier == Tier::Micro)
        .map(|t| [t.position[0], t.position[1]])
        .collect();
    let mut out = Vec::with_capacity(layout.macro_count() * s.ues_per_trxp as usize);
    for (home, area) in layout.areas.iter().enumerate() {
        for _ in 0..s.ues_per_trxp {
            let p = loop {
                let p = area.sample(rng);
                if layout.min_ue_distance > 0.0 && layout.nearest_macro(p) < layout.min_ue_distance {
                    continue;
                }
                if micro.iter().any(|&m| wrap_distance(layout, p, m).0 < MICRO_UE_MIN_DISTANCE) {
                    continue;
                }
                break p;
            };
            let indoor = rng.random::<f64>() < s.indoor_fraction;
            let high_loss = indoor && rng.random::<f64>() < s.high_loss_fraction;
            let indoor_distance = if indoor {
                let a: f64 = rng.random_range(0.0..25.0);
                let b: f64 = rng.random_range(0.0..25.0);
                a.min(b)
            } else {
                0.0
            };
            let speed = if indoor { s.ue_speed_indoor } else { s.ue_speed_outdoor };
            let direction = rng.random_range(0.0..2.0 * PI);
            out.push(UePlacement {
                ue_id: out.len() as u32,
                position: [p[0], p[1], s.ue_height],
                indoor,
                high_loss,
                indoor_distance,
                speed,
                direction,
                home_trxp: home,
                serving_trxp: None,
            });
        }
    }
    out
}

/// TRxP with the smallest coupling loss; ties go to the lowest index.
pub fn attach(n_trxps: usize, coupling_loss: impl Fn(usize) -> f64) -> usize {
    let mut best = 0;
    let mut best_loss = f64::INFINITY;
    for t in 0..n_trxps {
        let l = coupling_loss(t);
        if l < best_loss {
            best = t;
            best_loss = l;
        }
    }
    best
}

/// Whether a point lies in any macro drop area (used by tests and dumps).
pub fn in_drop_region(layout: &NetworkLayout, p: [f64; 2]) -> bool {
    layout.areas.iter().any(|a| a.contains(p))
}

pub fn write_trxps_csv<W: Write>(layout: &NetworkLayout, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["trxp_id", "x", "y", "z", "azimuth"])
        .map_err(|e| Error::Internal(e.to_string()))?;
    for t in &layout.trxps {
        wr.write_record([
            t.trxp_id.to_string(),
            format!("{:.6}", t.position[0]),
            format!("{:.6}", t.position[1]),
            format!("{:.6}", t.position[2]),
            format!("{:.6}", t.boresight),
        ])
        .map_err(|e| Error::Internal(e.to_string()))?;
    }
    wr.flush().map_err(|e| Error::Internal(e.to_string()))
}

pub fn write_ues_csv<W: Write>(ues: &[UePlacement], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["ue_id", "x", "y", "z", "indoor", "serving_trxp"])
        .map_err(|e| Error::Internal(e.to_string()))?;
    for u in ues {
        wr.write_record([
            u.ue_id.to_string(),
            format!("{:.6}", u.position[0]),
            format!("{:.6}", u.position[1]),
            format!("{:.6}", u.position[2]),
            u.indoor.to_string(),
            u.serving_trxp.map_or(String::new(), |s| s.to_string()),
        ])
        .map_err(|e| Error::Internal(e.to_string()))?;
    }
    wr.flush().map_err(|e| Error::Internal(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{preset, TestEnvironment, Variant};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mmtc() -> EvaluationConfig {
        preset(TestEnvironment::UrbanMacroMmtc, Variant::A).unwrap()
    }

    #[test]
    fn hex_layout_has_57_trxps_at_isd_spacing() {
        let l = NetworkLayout::hex19(500.0, 25.0, 35.0);
        assert_eq!(l.sites.len(), 19);
        assert_eq!(l.trxps.len(), 57);
        for (i, a) in l.sites.iter().enumerate() {
            let nearest = l
                .sites
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, b)| ((a.position[0] - b.position[0]).powi(2) + (a.position[1] - b.position[1]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min);
            assert!((nearest - 500.0).abs() < 1e-9);
        }
        assert_eq!(l.sites[0].position, [0.0, 0.0]);
    }

    #[test]
    fn sector_area_matches_hexagon_third() {
        for isd in [200.0, 500.0, 1732.0] {
            let l = NetworkLayout::hex19(isd, 25.0, 35.0);
            let expect = isd * isd * 3f64.sqrt() / 6.0;
            assert!((l.wrapped_area() / 57.0 - expect).abs() / expect < 1e-6);
            for t in 0..57 {
                assert!((l.trxp_area(t) - expect).abs() / expect < 1e-6);
            }
        }
    }

    #[test]
    fn layouts_scale_with_isd() {
        let a = NetworkLayout::hex19(500.0, 25.0, 35.0);
        let b = NetworkLayout::hex19(1732.0, 25.0, 35.0);
        let k = 1732.0 / 500.0;
        for (sa, sb) in a.sites.iter().zip(&b.sites) {
            assert!((sa.position[0] * k - sb.position[0]).abs() < 1e-9);
            assert!((sa.position[1] * k - sb.position[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn indoor_floor_geometry() {
        let l = NetworkLayout::indoor12(3.0, 0.0);
        assert_eq!(l.trxps.len(), 12);
        for t in &l.trxps {
            assert!(t.position[0] > 0.0 && t.position[0] < 120.0);
            assert!(t.position[1] > 0.0 && t.position[1] < 50.0);
            let nearest = l
                .trxps
                .iter()
                .filter(|o| o.trxp_id != t.trxp_id)
                .map(|o| ((t.position[0] - o.position[0]).powi(2) + (t.position[1] - o.position[1]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min);
            assert_eq!(nearest, 20.0);
        }
        assert!((l.wrapped_area() - 6000.0).abs() < 1e-9);
    }

    #[test]
    fn translations_contain_zero_and_negations() {
        let l = NetworkLayout::hex19(500.0, 25.0, 35.0);
        assert!(l.wrap_translations.contains(&[0.0, 0.0]));
        for t in &l.wrap_translations {
            assert!(l
                .wrap_translations
                .iter()
                .any(|u| (u[0] + t[0]).abs() < 1e-9 && (u[1] + t[1]).abs() < 1e-9));
        }
    }

    #[test]
    fn wrapping_shortens_long_paths() {
        let l = NetworkLayout::hex19(500.0, 25.0, 35.0);
        let a = l.sites[7].position;
        let b = l.sites[13].position;
        let direct = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let (wrapped, _) = wrap_distance(&l, a, b);
        assert!(direct > 1500.0);
        assert!(wrapped < direct);
        // brute force over every translation
        let brute = l
            .wrap_translations
            .iter()
            .map(|t| ((b[0] + t[0] - a[0]).powi(2) + (b[1] + t[1] - a[1]).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(wrapped, brute);
    }

    #[test]
    fn ue_count_and_flags() {
        let c = mmtc();
        let l = build_layout(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ues = drop_ues(&l, &c, &mut rng);
        assert_eq!(ues.len(), 570);
        for u in &ues {
            assert!(in_drop_region(&l, [u.position[0], u.position[1]]));
            assert_eq!(u.speed, if u.indoor { c.scenario.ue_speed_indoor } else { c.scenario.ue_speed_outdoor });
            assert!((0.0..2.0 * PI).contains(&u.direction));
            let site = l.sites[l.trxps[u.home_trxp].site_id].position;
            let d = ((u.position[0] - site[0]).powi(2) + (u.position[1] - site[1]).powi(2)).sqrt();
            assert!(d >= 35.0);
        }
    }

    #[test]
    fn all_indoor_fraction() {
        let mut c = mmtc();
        c.scenario.indoor_fraction = 1.0;
        let l = build_layout(&c);
        let ues = drop_ues(&l, &c, &mut ChaCha8Rng::seed_from_u64(6));
        assert!(ues.iter().all(|u| u.indoor));
    }

    #[test]
    fn indoor_share_within_binomial_band() {
        let c = mmtc();
        let l = build_layout(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut n = 0usize;
        let mut indoor = 0usize;
        for _ in 0..40 {
            let ues = drop_ues(&l, &c, &mut rng);
            n += ues.len();
            indoor += ues.iter().filter(|u| u.indoor).count();
        }
        let p = c.scenario.indoor_fraction;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((indoor as f64 - n as f64 * p).abs() < 3.0 * sigma);
    }

    #[test]
    fn indoor_drop_is_uniform_chi_square() {
        // 10x10 grid over the floor, chi-square critical value at 0.01 with 99 dof
        let mut c = preset(TestEnvironment::IndoorHotspotEmbb, Variant::A).unwrap();
        c.scenario.ues_per_trxp = 100_000 / 12 + 1;
        let l = build_layout(&c);
        let ues = drop_ues(&l, &c, &mut ChaCha8Rng::seed_from_u64(8));
        let mut counts = [0f64; 100];
        for u in &ues {
            let i = ((u.position[0] / 12.0) as usize).min(9);
            let j = ((u.position[1] / 5.0) as usize).min(9);
            counts[i * 10 + j] += 1.0;
        }
        let expect = ues.len() as f64 / 100.0;
        let chi2: f64 = counts.iter().map(|&o| (o - expect).powi(2) / expect).sum();
        assert!(chi2 < 134.642, "{chi2}");
    }

    #[test]
    fn attachment_rules() {
        assert_eq!(attach(1, |_| 123.0), 0);
        assert_eq!(attach(3, |t| [5.0, 1.0, 1.0][t]), 1);
    }

    #[test]
    fn colocated_ue_attaches_to_own_site() {
        let l = NetworkLayout::hex19(500.0, 25.0, 35.0);
        for site in [0usize, 4, 11] {
            let p = l.sites[site].position;
            let q = [p[0] + 40.0, p[1] + 10.0];
            let chosen = attach(l.trxps.len(), |t| {
                let tp = l.trxps[t].position;
                wrap_distance(&l, q, [tp[0], tp[1]]).0
            });
            assert_eq!(l.trxps[chosen].site_id, site);
        }
    }

    #[test]
    fn micro_layer_respects_separation() {
        let c = preset(TestEnvironment::DenseUrbanEmbb, Variant::A).unwrap();
        let l = build_layout(&c);
        let two = l.with_micro_layer(&mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(two.kind, LayoutKind::DenseUrbanTwoLayer);
        let micro: Vec<_> = two.trxps.iter().filter(|t| t.tier == Tier::Micro).collect();
        assert_eq!(micro.len(), 57 * 3);
        for (i, a) in micro.iter().enumerate() {
            let pa = [a.position[0], a.position[1]];
            assert!(l.nearest_macro(pa) >= MICRO_SEPARATION);
            assert!(l.areas[i / MICRO_PER_SECTOR].contains(pa));
            for b in micro[i + 1..].iter().take(MICRO_PER_SECTOR - 1 - i % MICRO_PER_SECTOR) {
                assert!(wrap_distance(&l, pa, [b.position[0], b.position[1]]).0 >= MICRO_SEPARATION);
            }
        }
    }

    #[test]
    fn interferer_count_is_position_independent() {
        // mean number of TRxP images within R of the UE, split by the UE's home ring
        let c = mmtc();
        let l = build_layout(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let radius = 1000.0;
        let (mut inner, mut outer) = (Vec::new(), Vec::new());
        for _ in 0..60 {
            for u in drop_ues(&l, &c, &mut rng) {
                let p = [u.position[0], u.position[1]];
                let n = l
                    .sites
                    .iter()
                    .filter(|s| wrap_distance(&l, p, s.position).0 < radius)
                    .count() as f64;
                if l.trxps[u.home_trxp].site_id == 0 {
                    inner.push(n);
                } else if l.trxps[u.home_trxp].site_id >= 7 {
                    outer.push(n);
                }
            }
        }
        let stats = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
            (m, (var / v.len() as f64).sqrt())
        };
        let (mi, si) = stats(&inner);
        let (mo, so) = stats(&outer);
        assert!((mi - mo).abs() < 3.0 * (si * si + so * so).sqrt(), "{mi} vs {mo}");
    }

    proptest! {
        #[test]
        fn wrap_distance_symmetric_and_short(ax in -1200.0f64..1200.0, ay in -1200.0f64..1200.0,
                                             bx in -1200.0f64..1200.0, by in -1200.0f64..1200.0) {
            let l = NetworkLayout::hex19(500.0, 25.0, 35.0);
            let (d1, _) = wrap_distance(&l, [ax, ay], [bx, by]);
            let (d2, _) = wrap_distance(&l, [bx, by], [ax, ay]);
            prop_assert!((d1 - d2).abs() < 1e-9);
            let direct = ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt();
            prop_assert!(d1 <= direct + 1e-12);
        }

        #[test]
        fn attachment_is_translation_invariant(dx in -5000.0f64..5000.0, dy in -5000.0f64..5000.0,
                                               ux in -700.0f64..700.0, uy in -700.0f64..700.0) {
            let l = NetworkLayout::hex19(500.0, 25.0, 35.0);
            let l = &l;
            let loss = |off: [f64; 2]| move |t: usize| {
                let tp = l.trxps[t].position;
                let px = ux + off[0];
                let py = uy + off[1];
                ((tp[0] + off[0] - px).powi(2) + (tp[1] + off[1] - py).powi(2)).sqrt() + t as f64 * 1e-3
            };
            prop_assert_eq!(attach(57, loss([0.0, 0.0])), attach(57, loss([dx, dy])));
        }
    }
}
