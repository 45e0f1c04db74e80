//! IMT-2020 minimum technical performance requirements.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Direction, TestEnvironment};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    AvgSe,
    Pct5Se,
    ConnectionDensity,
    Reliability,
    /// Normalized uplink traffic-channel link data rate at a given speed.
    Mobility {
        speed_kmh: u32,
    },
    UserExperiencedRate,
    UserPlaneLatency,
    ControlPlaneLatency,
    MobilityInterruptionTime,
    /// Reported by some evaluators in place of a link rate; carries no requirement.
    SnrMargin,
}

/// Direction of a pass/fail comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    AtLeast,
    AtMost,
}

impl Metric {
    pub fn sense(self) -> Sense {
        match self {
            Metric::UserPlaneLatency
            | Metric::ControlPlaneLatency
            | Metric::MobilityInterruptionTime => Sense::AtMost,
            _ => Sense::AtLeast,
        }
    }

    /// Rows that are assessed analytically are listed but never computed.
    pub fn is_analytical(self) -> bool {
        matches!(
            self,
            Metric::UserPlaneLatency | Metric::ControlPlaneLatency | Metric::MobilityInterruptionTime
        )
    }

    /// Boundary-inclusive comparison. Reliability is compared at 10 decimals.
    pub fn meets(self, measured: f64, threshold: f64) -> bool {
        let (m, t) = if self == Metric::Reliability {
            ((measured * 1e10).round(), (threshold * 1e10).round())
        } else {
            (measured, threshold)
        };
        match self.sense() {
            Sense::AtLeast => m >= t,
            Sense::AtMost => m <= t,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::AvgSe => f.write_str("avg_se"),
            Metric::Pct5Se => f.write_str("pct5_se"),
            Metric::ConnectionDensity => f.write_str("connection_density"),
            Metric::Reliability => f.write_str("reliability"),
            Metric::Mobility { speed_kmh } => write!(f, "mobility@{speed_kmh}"),
            Metric::UserExperiencedRate => f.write_str("user_experienced_rate"),
            Metric::UserPlaneLatency => f.write_str("user_plane_latency"),
            Metric::ControlPlaneLatency => f.write_str("control_plane_latency"),
            Metric::MobilityInterruptionTime => f.write_str("mobility_interruption_time"),
            Metric::SnrMargin => f.write_str("snr_margin"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(speed) = s.strip_prefix("mobility@") {
            let speed_kmh = speed
                .parse()
                .map_err(|_| Error::Domain(format!("bad mobility speed in `{s}`")))?;
            return Ok(Metric::Mobility { speed_kmh });
        }
        Ok(match s {
            "avg_se" => Metric::AvgSe,
            "pct5_se" => Metric::Pct5Se,
            "connection_density" => Metric::ConnectionDensity,
            "reliability" => Metric::Reliability,
            "user_experienced_rate" => Metric::UserExperiencedRate,
            "user_plane_latency" => Metric::UserPlaneLatency,
            "control_plane_latency" => Metric::ControlPlaneLatency,
            "mobility_interruption_time" => Metric::MobilityInterruptionTime,
            "snr_margin" => Metric::SnrMargin,
            other => return Err(Error::Domain(format!("unknown metric `{other}`"))),
        })
    }
}

impl Serialize for Metric {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Metric {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Requirement family a row comes from, with its ITU-R M.2410 citation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequirementSource {
    FifthPercentileSe,
    AverageSe,
    Urllc,
    MobilityRate,
    ConnectionDensity,
    UserExperiencedRate,
}

impl RequirementSource {
    pub fn citation(self) -> &'static str {
        match self {
            RequirementSource::FifthPercentileSe => "ITU-R M.2410 4.4 (5th percentile user SE)",
            RequirementSource::AverageSe => "ITU-R M.2410 4.5 (average SE)",
            RequirementSource::Urllc => "ITU-R M.2410 4.7/4.10/4.12 (URLLC)",
            RequirementSource::MobilityRate => "ITU-R M.2410 4.11 (mobility link data rate)",
            RequirementSource::ConnectionDensity => "ITU-R M.2410 4.8 (connection density)",
            RequirementSource::UserExperiencedRate => {
                "ITU-R M.2410 4.3 (user experienced data rate)"
            }
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            RequirementSource::FifthPercentileSe => "fifth_percentile_se",
            RequirementSource::AverageSe => "average_se",
            RequirementSource::Urllc => "urllc",
            RequirementSource::MobilityRate => "mobility_rate",
            RequirementSource::ConnectionDensity => "connection_density",
            RequirementSource::UserExperiencedRate => "user_experienced_rate",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            RequirementSource::FifthPercentileSe,
            RequirementSource::AverageSe,
            RequirementSource::Urllc,
            RequirementSource::MobilityRate,
            RequirementSource::ConnectionDensity,
            RequirementSource::UserExperiencedRate,
        ]
        .into_iter()
        .find(|r| r.as_str() == s.trim())
    }
}

/// One threshold row. `direction == None` applies to both directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Requirement {
    pub environment: TestEnvironment,
    pub direction: Option<Direction>,
    pub metric: Metric,
    pub value: f64,
    pub unit: String,
    pub source: RequirementSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequirementSet {
    rows: Vec<Requirement>,
}

const CSV_HEADER: [&str; 6] = ["environment", "direction", "metric", "value", "unit", "source"];

impl RequirementSet {
    pub fn builtin() -> Self {
        use Direction::{Downlink as Dl, Uplink as Ul};
        use RequirementSource as Src;
        use TestEnvironment::*;

        let mut rows = Vec::new();
        let mut push = |environment, direction, metric, value, unit: &str, source| {
            rows.push(Requirement {
                environment,
                direction,
                metric,
                value,
                unit: unit.to_string(),
                source,
            })
        };

        for (env, dl, ul) in [
            (IndoorHotspotEmbb, 0.3, 0.21),
            (DenseUrbanEmbb, 0.225, 0.15),
            (RuralEmbb, 0.12, 0.045),
        ] {
            push(env, Some(Dl), Metric::Pct5Se, dl, "bit/s/Hz", Src::FifthPercentileSe);
            push(env, Some(Ul), Metric::Pct5Se, ul, "bit/s/Hz", Src::FifthPercentileSe);
        }
        for (env, dl, ul) in [
            (IndoorHotspotEmbb, 9.0, 6.75),
            (DenseUrbanEmbb, 7.8, 5.4),
            (RuralEmbb, 3.3, 1.6),
        ] {
            push(env, Some(Dl), Metric::AvgSe, dl, "bit/s/Hz/TRxP", Src::AverageSe);
            push(env, Some(Ul), Metric::AvgSe, ul, "bit/s/Hz/TRxP", Src::AverageSe);
        }
        push(UrbanMacroUrllc, None, Metric::UserPlaneLatency, 1.0, "ms", Src::Urllc);
        push(UrbanMacroUrllc, None, Metric::ControlPlaneLatency, 10.0, "ms", Src::Urllc);
        push(UrbanMacroUrllc, None, Metric::Reliability, 0.99999, "fraction", Src::Urllc);
        push(UrbanMacroUrllc, None, Metric::MobilityInterruptionTime, 0.0, "ms", Src::Urllc);
        for (env, value, speed_kmh) in [
            (IndoorHotspotEmbb, 1.5, 10),
            (DenseUrbanEmbb, 1.12, 30),
            (RuralEmbb, 0.8, 120),
            (RuralEmbb, 0.45, 500),
        ] {
            let metric = Metric::Mobility { speed_kmh };
            push(env, Some(Ul), metric, value, "bit/s/Hz", Src::MobilityRate);
        }
        push(
            UrbanMacroMmtc,
            Some(Ul),
            Metric::ConnectionDensity,
            1e6,
            "devices/km2",
            Src::ConnectionDensity,
        );
        push(DenseUrbanEmbb, Some(Dl), Metric::UserExperiencedRate, 100e6, "bit/s", Src::UserExperiencedRate);
        push(DenseUrbanEmbb, Some(Ul), Metric::UserExperiencedRate, 50e6, "bit/s", Src::UserExperiencedRate);
        RequirementSet { rows }
    }

    pub fn rows(&self) -> &[Requirement] {
        &self.rows
    }

    pub fn find(
        &self,
        environment: TestEnvironment,
        direction: Direction,
        metric: Metric,
    ) -> Option<&Requirement> {
        self.rows.iter().find(|r| {
            r.environment == environment
                && r.metric == metric
                && r.direction.is_none_or(|d| d == direction)
        })
    }

    /// Rows for `metric` in `environment`, regardless of direction.
    pub fn find_any(&self, environment: TestEnvironment, metric: Metric) -> Vec<&Requirement> {
        self.rows
            .iter()
            .filter(|r| r.environment == environment && r.metric == metric)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let to_err = |e: csv::Error| Error::Internal(format!("csv write: {e}"));
        w.write_record(CSV_HEADER).map_err(to_err)?;
        for r in &self.rows {
            w.write_record([
                r.environment.name().to_string(),
                r.direction.map(|d| d.to_string()).unwrap_or_default(),
                r.metric.to_string(),
                r.value.to_string(),
                r.unit.clone(),
                r.source.as_str().to_string(),
            ])
            .map_err(to_err)?;
        }
        w.flush().map_err(|e| Error::Internal(format!("csv flush: {e}")))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = r.headers().map_err(|e| Error::Schema {
            line: 1,
            message: e.to_string(),
        })?;
        if header.iter().map(str::trim).ne(CSV_HEADER) {
            return Err(Error::Schema {
                line: 1,
                message: format!("expected header {}", CSV_HEADER.join(",")),
            });
        }
        let mut rows = Vec::new();
        for (i, record) in r.records().enumerate() {
            let line = i + 2;
            let bad = |message: String| Error::Schema { line, message };
            let rec = record.map_err(|e| bad(e.to_string()))?;
            if rec.len() != CSV_HEADER.len() {
                return Err(bad(format!("expected {} fields", CSV_HEADER.len())));
            }
            let environment = rec[0].trim().parse().map_err(|_| bad(format!("unknown environment `{}`", &rec[0])))?;
            let direction = match rec[1].trim() {
                "" => None,
                d => Some(d.parse().map_err(|e: Error| bad(e.to_string()))?),
            };
            let metric = rec[2].parse().map_err(|e: Error| bad(e.to_string()))?;
            let value: f64 = rec[3]
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad value `{}`", &rec[3])))?;
            let source = RequirementSource::parse(&rec[5])
                .ok_or_else(|| bad(format!("unknown source `{}`", &rec[5])))?;
            rows.push(Requirement {
                environment,
                direction,
                metric,
                value,
                unit: rec[4].trim().to_string(),
                source,
            });
        }
        Ok(RequirementSet { rows })
    }
}

impl Default for RequirementSet {
    fn default() -> Self {
        RequirementSet::builtin()
    }
}

/// Threshold for a defined row; `UnknownRequirement` otherwise.
pub fn requirement_for(
    set: &RequirementSet,
    environment: TestEnvironment,
    direction: Direction,
    metric: Metric,
) -> Result<f64> {
    set.find(environment, direction, metric)
        .map(|r| r.value)
        .ok_or_else(|| Error::UnknownRequirement(format!("{environment} {direction} {metric}")))
}
