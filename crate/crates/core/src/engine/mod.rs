//! Drop loop: seeded streams, per-drop link evaluation, uplink calibration,
//! deterministic parallel merge and KPI evaluation.
//!
//! Each drop follows drop → user → channel steps: UEs are placed, every
//! UE–TRxP link gets its large-scale parameters, UEs attach by coupling loss,
//! and only the serving link gets clusters and fast fading. Interfering links
//! contribute their average power, so the order of the inner loops does not
//! change any result.

mod calibrate;
mod density;
mod drop;
mod rng;
mod run;

pub use calibrate::{calibrate_p0, Calibration, CALIBRATION_MARGIN_DB, CALIBRATION_RANGE_DB};
pub use density::{density_search, probe_delay};
pub use drop::{run_drop, DropContext, DropResult, MICRO_POWER_OFFSET_DB};
pub use rng::{derive_stream, link_id, Domain, DropStreams, StreamKind, STREAM_ALGORITHM};
pub use run::{
    run, run_with_layout, Accumulator, ConvergenceReport, KpiValue, RunResult, Simulator, CDF_DL_SE, CDF_DL_SINR,
    CDF_DL_THROUGHPUT, CDF_UL_SE, CDF_UL_SINR, CDF_UL_THROUGHPUT, CHUNK_DROPS,
};
