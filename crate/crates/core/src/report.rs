//! Compliance checking, external result tables and result bundles.
//!
//! External tables are CSV files with the header in [`RESULT_HEADER`]:
//!
//! | column | content |
//! |---|---|
//! | `evaluator` | organisation that reported the value |
//! | `environment` | test environment name, e.g. `IndoorHotspot_eMBB` |
//! | `variant` | `A`, `B` or empty |
//! | `direction` | `downlink` / `uplink` (`dl` / `ul` accepted) |
//! | `setting` | free text describing the evaluation setup |
//! | `rit`, `antenna_config`, `numerology`, `condition` | free text |
//! | `metric` | KPI name, e.g. `avg_se`, `mobility@120` |
//! | `value` | number as printed: thousands separators, `%`, a leading `>` |
//! | `unit` | unit of `value`; `%`, `Mbit/s` and `kbit/s` are converted |
//! | `bandwidth` | `<number> <unit>` or empty |
//! | `note` | free text |

use std::collections::BTreeSet;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{DropResult, KpiValue, RunResult};
use crate::error::{Error, Result};
use crate::metrics::{ConvergenceState, DensitySearch};
use crate::scenario::{Direction, Metric, RequirementSet, TestEnvironment, Variant};

pub const RESULT_HEADER: [&str; 14] = [
    "evaluator",
    "environment",
    "variant",
    "direction",
    "setting",
    "rit",
    "antenna_config",
    "numerology",
    "condition",
    "metric",
    "value",
    "unit",
    "bandwidth",
    "note",
];

pub const COMPLIANCE_HEADER: [&str; 12] = [
    "environment",
    "variant",
    "direction",
    "metric",
    "evaluator",
    "setting",
    "condition",
    "requirement",
    "measured",
    "status",
    "source",
    "footnotes",
];

/// Evaluator name used for simulated rows.
pub const SIMULATOR_NAME: &str = "imtsim";

/// Reported reliabilities below this are kept as printed but flagged.
const RELIABILITY_PLAUSIBLE: f64 = 0.9;

/// One measured value ready for comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasuredRow {
    pub environment: TestEnvironment,
    pub variant: Option<Variant>,
    pub direction: Direction,
    pub metric: Metric,
    pub evaluator: String,
    pub setting: String,
    pub condition: String,
    /// None when the source cell carries no number.
    pub value: Option<f64>,
    pub suspect: bool,
    pub notes: Vec<String>,
}

/// Anything that can be checked against a requirement set.
pub trait MeasuredRows {
    fn measured_rows(&self) -> Vec<MeasuredRow>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    NotEvaluated,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::NotEvaluated => "not evaluated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplianceRow {
    pub environment: TestEnvironment,
    pub variant: Option<Variant>,
    pub direction: Direction,
    pub metric: Metric,
    pub evaluator: String,
    pub setting: String,
    pub condition: String,
    pub requirement: Option<f64>,
    pub measured: Option<f64>,
    pub status: Status,
    /// Citation of the requirement row; None when nothing matched.
    pub source: Option<&'static str>,
    pub footnotes: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ComplianceReport {
    pub rows: Vec<ComplianceRow>,
}

impl ComplianceReport {
    pub fn count(&self, status: Status) -> usize {
        self.rows.iter().filter(|r| r.status == status).count()
    }

    /// No row failed.
    pub fn all_pass(&self) -> bool {
        self.count(Status::Fail) == 0
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(COMPLIANCE_HEADER).map_err(csv_err)?;
        let num = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.environment.name().to_string(),
                r.variant.map(|v| v.to_string()).unwrap_or_default(),
                r.direction.to_string(),
                r.metric.to_string(),
                r.evaluator.clone(),
                r.setting.clone(),
                r.condition.clone(),
                num(r.requirement),
                num(r.measured),
                r.status.as_str().to_string(),
                r.source.unwrap_or_default().to_string(),
                r.footnotes.join("; "),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Internal(format!("csv: {e}")))?;
        Ok(())
    }
}

/// Boundary-inclusive comparison of every row; rows without a requirement,
/// analytical metrics and cells without a number are not evaluated.
pub fn check_compliance(results: &impl MeasuredRows, reqs: &RequirementSet) -> ComplianceReport {
    let rows = results
        .measured_rows()
        .into_iter()
        .map(|m| {
            let mut footnotes = m.notes;
            if m.suspect {
                footnotes.push("suspect entry".into());
            }
            let req = reqs.find(m.environment, m.direction, m.metric);
            let (status, requirement, source) = match (req, m.value) {
                _ if m.metric.is_analytical() => {
                    footnotes.push("assessed analytically".into());
                    (Status::NotEvaluated, req.map(|r| r.value), req.map(|r| r.source.citation()))
                }
                (None, _) => {
                    footnotes.push("no requirement row".into());
                    (Status::NotEvaluated, None, None)
                }
                (Some(r), None) => {
                    footnotes.push("no numeric value".into());
                    (Status::NotEvaluated, Some(r.value), Some(r.source.citation()))
                }
                (Some(r), Some(v)) => {
                    let status = if m.metric.meets(v, r.value) { Status::Pass } else { Status::Fail };
                    (status, Some(r.value), Some(r.source.citation()))
                }
            };
            ComplianceRow {
                environment: m.environment,
                variant: m.variant,
                direction: m.direction,
                metric: m.metric,
                evaluator: m.evaluator,
                setting: m.setting,
                condition: m.condition,
                requirement,
                measured: m.value,
                status,
                source,
                footnotes,
            }
        })
        .collect();
    ComplianceReport { rows }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth {
    pub value: f64,
    pub unit: String,
}

impl Bandwidth {
    pub fn hz(&self) -> Option<f64> {
        let scale = match self.unit.as_str() {
            "Hz" => 1.0,
            "kHz" => 1e3,
            "MHz" => 1e6,
            "GHz" => 1e9,
            _ => return None,
        };
        Some(self.value * scale)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExternalRow {
    /// 1-based line in the source file.
    pub line: usize,
    pub evaluator: String,
    pub environment: TestEnvironment,
    pub variant: Option<Variant>,
    pub direction: Direction,
    pub setting: String,
    pub rit: String,
    pub antenna_config: String,
    pub numerology: String,
    pub condition: String,
    pub metric: Metric,
    /// Cell as printed.
    pub raw: String,
    /// Parsed value in `unit`.
    pub value: Option<f64>,
    pub unit: String,
    pub bandwidth: Option<Bandwidth>,
    /// The cell was prefixed with `>`.
    pub lower_bound: bool,
    pub suspect: bool,
    pub note: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExternalResultTable {
    pub rows: Vec<ExternalRow>,
}

impl ExternalResultTable {
    pub fn evaluators(&self) -> BTreeSet<&str> {
        self.rows.iter().map(|r| r.evaluator.as_str()).collect()
    }

    pub fn for_evaluator(&self, evaluator: &str) -> ExternalResultTable {
        ExternalResultTable {
            rows: self.rows.iter().filter(|r| r.evaluator == evaluator).cloned().collect(),
        }
    }

    pub fn extend(&mut self, other: ExternalResultTable) {
        self.rows.extend(other.rows);
    }
}

impl MeasuredRows for ExternalResultTable {
    fn measured_rows(&self) -> Vec<MeasuredRow> {
        self.rows
            .iter()
            .map(|r| {
                let mut notes = Vec::new();
                if r.lower_bound {
                    notes.push("reported as a lower bound".into());
                }
                if !r.note.is_empty() {
                    notes.push(r.note.clone());
                }
                MeasuredRow {
                    environment: r.environment,
                    variant: r.variant,
                    direction: r.direction,
                    metric: r.metric,
                    evaluator: r.evaluator.clone(),
                    setting: r.setting.clone(),
                    condition: r.condition.clone(),
                    value: r.value,
                    suspect: r.suspect,
                    notes,
                }
            })
            .collect()
    }
}

/// Parsed value cell: (value in the canonical unit, canonical unit, lower bound, suspect).
fn parse_value(raw: &str, unit: &str, metric: Metric) -> std::result::Result<(Option<f64>, String, bool, bool), String> {
    let mut s = raw.trim();
    if s.is_empty() {
        return Err("empty value".into());
    }
    let lower_bound = s.starts_with('>');
    if lower_bound {
        s = s[1..].trim();
        if s.is_empty() {
            return Ok((None, unit.to_string(), true, true));
        }
    }
    let percent = s.ends_with('%');
    if percent {
        if unit != "%" {
            return Err(format!("`{raw}` carries % but the unit is `{unit}`"));
        }
        s = s[..s.len() - 1].trim();
    }
    let v: f64 = s.replace(',', "").parse().map_err(|_| format!("bad value `{raw}`"))?;
    if !v.is_finite() || v < 0.0 {
        return Err(format!("value `{raw}` must be finite and non-negative"));
    }
    let (v, unit) = match unit {
        "%" => (v / 100.0, "fraction"),
        "Mbit/s" => (v * 1e6, "bit/s"),
        "kbit/s" => (v * 1e3, "bit/s"),
        u => (v, u),
    };
    let suspect = metric == Metric::Reliability && v < RELIABILITY_PLAUSIBLE;
    Ok((Some(v), unit.to_string(), lower_bound, suspect))
}

fn parse_bandwidth(s: &str) -> std::result::Result<Option<Bandwidth>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(None);
    }
    let (num, unit) = s.split_once(' ').ok_or_else(|| format!("bandwidth `{s}` needs `<number> <unit>`"))?;
    let value: f64 = num.replace(',', "").parse().map_err(|_| format!("bad bandwidth `{s}`"))?;
    let bw = Bandwidth {
        value,
        unit: unit.trim().to_string(),
    };
    if bw.hz().is_none() || value < 0.0 {
        return Err(format!("bad bandwidth `{s}`"));
    }
    Ok(Some(bw))
}

/// Reads a result table from any reader; `line` numbers count the header as 1.
pub fn read_table<R: Read>(reader: R) -> Result<ExternalResultTable> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = r.headers().map_err(|e| Error::Schema {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().map(str::trim).ne(RESULT_HEADER) {
        return Err(Error::Schema {
            line: 1,
            message: format!("expected header {}", RESULT_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for record in r.records() {
        let rec = record.map_err(|e| Error::Schema {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let bad = |message: String| Error::Schema { line, message };
        let field = |i: usize| rec[i].trim().to_string();
        let environment = rec[1]
            .trim()
            .parse()
            .map_err(|_| bad(format!("unknown environment `{}`", &rec[1])))?;
        let variant = match rec[2].trim() {
            "" => None,
            v => Some(v.parse().map_err(|_| bad(format!("unknown variant `{v}`")))?),
        };
        let direction = rec[3].parse().map_err(|e: Error| bad(e.to_string()))?;
        let metric: Metric = rec[9].parse().map_err(|e: Error| bad(e.to_string()))?;
        let (value, unit, lower_bound, suspect) = parse_value(&rec[10], rec[11].trim(), metric).map_err(bad)?;
        let bandwidth = parse_bandwidth(&rec[12]).map_err(bad)?;
        rows.push(ExternalRow {
            line,
            evaluator: field(0),
            environment,
            variant,
            direction,
            setting: field(4),
            rit: field(5),
            antenna_config: field(6),
            numerology: field(7),
            condition: field(8),
            metric,
            raw: field(10),
            value,
            unit,
            bandwidth,
            lower_bound,
            suspect,
            note: field(13),
        });
    }
    Ok(ExternalResultTable { rows })
}

pub fn ingest_table(path: &Path) -> Result<ExternalResultTable> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_table(file)
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// One KPI as written to `kpi.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiRecord {
    pub direction: Direction,
    pub metric: Metric,
    pub value: Option<f64>,
    pub unit: String,
    pub requirement: Option<f64>,
    pub pass: Option<bool>,
    pub cdf: String,
    pub detail: String,
}

impl From<&KpiValue> for KpiRecord {
    fn from(k: &KpiValue) -> Self {
        KpiRecord {
            direction: k.direction,
            metric: k.metric,
            value: finite(k.value),
            unit: k.unit.to_string(),
            requirement: k.requirement,
            pass: k.pass,
            cdf: k.cdf.to_string(),
            detail: k.detail.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceSummary {
    pub state: ConvergenceState,
    pub window: u32,
    pub tolerance: f64,
    pub running_mean: Option<f64>,
    pub standard_error: Option<f64>,
    pub drop_means: Vec<Option<f64>>,
}

/// Contents of `kpi.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KpiSummary<'a> {
    pub environment: TestEnvironment,
    pub variant: Variant,
    pub config_hash: &'a str,
    pub drops_run: u32,
    pub kpis: Vec<KpiRecord>,
    pub mean_iot_db: Option<f64>,
    pub n_mux: Option<f64>,
    pub full_buffer_density: Option<f64>,
    pub density_search: Option<&'a DensitySearch>,
    pub max_sinr_consistency_error: Option<f64>,
    pub convergence: ConvergenceSummary,
}

impl<'a> KpiSummary<'a> {
    pub fn new(r: &'a RunResult) -> Self {
        let c = &r.convergence;
        KpiSummary {
            environment: r.environment,
            variant: r.variant,
            config_hash: &r.config_hash,
            drops_run: r.drops_run,
            kpis: r.kpis.iter().map(KpiRecord::from).collect(),
            mean_iot_db: finite(r.mean_iot_db),
            n_mux: finite(r.n_mux),
            full_buffer_density: r.full_buffer_density.and_then(finite),
            density_search: r.density_search.as_ref(),
            max_sinr_consistency_error: finite(r.max_sinr_consistency_error),
            convergence: ConvergenceSummary {
                state: c.state,
                window: c.window,
                tolerance: c.tolerance,
                running_mean: finite(c.running_mean),
                standard_error: finite(c.standard_error),
                drop_means: c.drop_means.iter().map(|&m| finite(m)).collect(),
            },
        }
    }
}

/// The fields of `kpi.json` needed to re-check a finished run.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SimulatedKpis {
    pub environment: TestEnvironment,
    pub variant: Variant,
    pub drops_run: u32,
    pub kpis: Vec<KpiRecord>,
}

impl SimulatedKpis {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Schema {
            line: e.line(),
            message: e.to_string(),
        })
    }

    fn rows(&self) -> Vec<MeasuredRow> {
        self.kpis
            .iter()
            .map(|k| MeasuredRow {
                environment: self.environment,
                variant: Some(self.variant),
                direction: k.direction,
                metric: k.metric,
                evaluator: SIMULATOR_NAME.into(),
                setting: format!("{} drops", self.drops_run),
                condition: String::new(),
                value: k.value,
                suspect: false,
                notes: Vec::new(),
            })
            .collect()
    }
}

impl MeasuredRows for SimulatedKpis {
    fn measured_rows(&self) -> Vec<MeasuredRow> {
        self.rows()
    }
}

impl MeasuredRows for RunResult {
    fn measured_rows(&self) -> Vec<MeasuredRow> {
        SimulatedKpis {
            environment: self.environment,
            variant: self.variant,
            drops_run: self.drops_run,
            kpis: self.kpis.iter().map(KpiRecord::from).collect(),
        }
        .rows()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ManifestKpi {
    direction: Direction,
    metric: Metric,
    value: Option<f64>,
    requirement: Option<f64>,
    pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct CalibrationRecord {
    p0_initial: f64,
    p0: f64,
    iot_db: Option<f64>,
    drops: u32,
}

/// Contents of `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
struct Manifest<'a> {
    software: &'static str,
    version: &'static str,
    environment: TestEnvironment,
    variant: Variant,
    config_hash: &'a str,
    master_seed: u64,
    stream_algorithm: &'static str,
    /// Drop d draws from key index d; indices run 0..drops_run.
    drops_requested: u32,
    drops_run: u32,
    convergence: ConvergenceState,
    calibration: CalibrationRecord,
    kpis: Vec<ManifestKpi>,
    compliance: ComplianceCounts,
    warnings: &'a [String],
    files: Vec<String>,
    config: &'a str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ComplianceCounts {
    pass: usize,
    fail: usize,
    not_evaluated: usize,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| Error::Internal(format!("json: {e}")))?;
    v.push(b'\n');
    Ok(v)
}

/// `percentile,value` rows at 0, 0.1, ..., 100.
pub fn cdf_csv(cdf: &crate::metrics::CdfEstimator) -> Result<Vec<u8>> {
    let mut out = String::from("percentile,value\n");
    for (p, v) in cdf.percentile_table()? {
        out.push_str(&format!("{p:.1},{v}\n"));
    }
    Ok(out.into_bytes())
}

/// Header of the per-sample SINR dump.
pub const SINR_DUMP_HEADER: [&str; 7] = ["drop", "ue_id", "direction", "signal", "interference", "noise", "sinr"];

/// Streams every SINR sample of a run as CSV, one row per UE, direction and
/// fading sample. Powers are dBm, `sinr` dB; an absent interferer is `-inf`.
pub struct SinrDump<W: Write> {
    out: csv::Writer<W>,
}

impl<W: Write> SinrDump<W> {
    pub fn new(writer: W) -> Result<Self> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(SINR_DUMP_HEADER).map_err(csv_err)?;
        Ok(SinrDump { out })
    }

    pub fn push(&mut self, drop: &DropResult) -> Result<()> {
        for s in drop.dl.iter().chain(&drop.ul) {
            self.out
                .write_record([
                    drop.drop_index.to_string(),
                    s.ue_id.to_string(),
                    s.direction.to_string(),
                    s.signal.to_string(),
                    s.interference.to_string(),
                    s.noise.to_string(),
                    s.sinr.to_string(),
                ])
                .map_err(csv_err)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush().map_err(|e| Error::Internal(format!("csv: {e}")))?;
        self.out.into_inner().map_err(|e| Error::Internal(format!("csv: {e}")))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Internal(format!("csv: {e}"))
}

/// Writes the bundle into `out_dir`: manifest, KPI summary, compliance table
/// and one CDF per distinct CDF the KPIs were read from. Returns the paths
/// written, sorted.
pub fn emit(results: &RunResult, report: &ComplianceReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let cdf_names: BTreeSet<&str> = results.kpis.iter().map(|k| k.cdf).collect();
    let mut files: Vec<String> = ["manifest.json", "kpi.json", "compliance.csv"].map(String::from).to_vec();
    files.extend(cdf_names.iter().map(|n| format!("cdf_{n}.csv")));
    files.sort();

    for name in &cdf_names {
        let cdf = results
            .cdfs
            .get(name)
            .ok_or_else(|| Error::Internal(format!("KPI refers to missing CDF `{name}`")))?;
        write_file(&out_dir.join(format!("cdf_{name}.csv")), &cdf_csv(cdf)?)?;
    }

    write_file(&out_dir.join("kpi.json"), &json_bytes(&KpiSummary::new(results))?)?;

    let mut compliance = Vec::new();
    report.write_csv(&mut compliance)?;
    write_file(&out_dir.join("compliance.csv"), &compliance)?;

    let cal = &results.calibration;
    let manifest = Manifest {
        software: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        environment: results.environment,
        variant: results.variant,
        config_hash: &results.config_hash,
        master_seed: results.master_seed,
        stream_algorithm: results.stream_algorithm,
        drops_requested: results.drops_requested,
        drops_run: results.drops_run,
        convergence: results.convergence.state,
        calibration: CalibrationRecord {
            p0_initial: cal.p0_initial,
            p0: cal.p0,
            iot_db: finite(cal.iot_db),
            drops: cal.drops,
        },
        kpis: results
            .kpis
            .iter()
            .map(|k| ManifestKpi {
                direction: k.direction,
                metric: k.metric,
                value: finite(k.value),
                requirement: k.requirement,
                pass: k.pass,
            })
            .collect(),
        compliance: ComplianceCounts {
            pass: report.count(Status::Pass),
            fail: report.count(Status::Fail),
            not_evaluated: report.count(Status::NotEvaluated),
        },
        warnings: &results.warnings,
        files: files.clone(),
        config: &results.config_toml,
    };
    write_file(&out_dir.join("manifest.json"), &json_bytes(&manifest)?)?;

    Ok(files.iter().map(|f| out_dir.join(f)).collect())
}
