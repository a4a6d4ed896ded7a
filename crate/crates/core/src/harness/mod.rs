//! Experiment harness: the three trilemma tracks, the summary table and
//! machine-readable reports.

mod config;
pub mod generators;
mod tracks;

use std::path::Path;

use serde::Serialize;

pub use config::TrilemmaConfig;
pub use tracks::{
    baseline_demonstration, box_maximum, experiment_gt_not_s, experiment_sg_not_t, experiment_st_not_g,
    symmetry_suite_network, DiagonalInstance, DiagonalTrack, GeneralityExhibit, IdentityControl, PairExhibit,
    PairTrack, ScalingRow, ScalingTable, SupportSweepRow, VerdictPair, VerdictRecord, IBP_TIME_SLACK,
};

use crate::exact::BinaryVerdict;
use crate::rational::format_rational;
use crate::Result;

/// Result of one track; an error is recorded instead of aborting the suite.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum TrackOutcome<T> {
    Completed { result: T },
    Failed { error: String, resource_cap: bool },
}

impl<T> TrackOutcome<T> {
    fn from_result(r: Result<T>) -> Self {
        match r {
            Ok(result) => TrackOutcome::Completed { result },
            Err(e) => TrackOutcome::Failed {
                resource_cap: matches!(e, crate::Error::RegionCap { .. } | crate::Error::OracleCap { .. }),
                error: e.to_string(),
            },
        }
    }

    pub fn result(&self) -> Option<&T> {
        match self {
            TrackOutcome::Completed { result } => Some(result),
            TrackOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Environment {
    pub crate_version: &'static str,
    pub os: &'static str,
    pub arch: &'static str,
    pub threads: usize,
    pub debug_assertions: bool,
}

impl Environment {
    pub fn current() -> Self {
        Self {
            crate_version: env!("CARGO_PKG_VERSION"),
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            debug_assertions: cfg!(debug_assertions),
        }
    }
}

/// One row of the summary table: the pair of properties a track keeps and
/// the property it shows failing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SummaryRow {
    pub held: &'static str,
    pub fails: &'static str,
    pub track: &'static str,
    pub verified: bool,
    pub evidence: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteStatus {
    Passed,
    AssertionFailed,
    ResourceCap,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrilemmaReport {
    pub config: TrilemmaConfig,
    pub environment: Environment,
    pub sg_not_t: TrackOutcome<ScalingTable>,
    pub st_not_g: TrackOutcome<PairTrack>,
    pub gt_not_s: TrackOutcome<DiagonalTrack>,
    pub summary: Vec<SummaryRow>,
}

impl TrilemmaReport {
    pub fn status(&self) -> SuiteStatus {
        let failed_cap = |f: bool| if f { SuiteStatus::ResourceCap } else { SuiteStatus::AssertionFailed };
        let outcomes = [
            match &self.sg_not_t {
                TrackOutcome::Completed { result } if result.truncated_at.is_some() && result.passed => {
                    SuiteStatus::ResourceCap
                }
                TrackOutcome::Completed { result } if result.passed => SuiteStatus::Passed,
                TrackOutcome::Completed { .. } => SuiteStatus::AssertionFailed,
                TrackOutcome::Failed { resource_cap, .. } => failed_cap(*resource_cap),
            },
            match &self.st_not_g {
                TrackOutcome::Completed { result } if result.passed => SuiteStatus::Passed,
                TrackOutcome::Completed { .. } => SuiteStatus::AssertionFailed,
                TrackOutcome::Failed { resource_cap, .. } => failed_cap(*resource_cap),
            },
            match &self.gt_not_s {
                TrackOutcome::Completed { result } if result.passed => SuiteStatus::Passed,
                TrackOutcome::Completed { .. } => SuiteStatus::AssertionFailed,
                TrackOutcome::Failed { resource_cap, .. } => failed_cap(*resource_cap),
            },
        ];
        if outcomes.contains(&SuiteStatus::AssertionFailed) {
            SuiteStatus::AssertionFailed
        } else if outcomes.contains(&SuiteStatus::ResourceCap) {
            SuiteStatus::ResourceCap
        } else {
            SuiteStatus::Passed
        }
    }

    /// Every verdict the report maps to a binary outcome, with its tag.
    pub fn verdict_records(&self) -> Vec<VerdictRecord> {
        let mut out = Vec::new();
        if let Some(t) = self.sg_not_t.result() {
            out.extend(t.rows.iter().filter_map(|r| r.exact_verdict.clone()));
        }
        if let Some(t) = self.st_not_g.result() {
            for p in std::iter::once(&t.abs_swap).chain(&t.pairs) {
                for v in &p.verdicts {
                    out.push(v.net.clone());
                    out.push(v.partner.clone());
                }
            }
        }
        if let Some(t) = self.gt_not_s.result() {
            for r in std::iter::once(&t.baseline).chain(t.instances.iter().map(|i| &i.report)) {
                out.push(VerdictRecord {
                    verifier: "full",
                    tag: r.exact_patched.tag(),
                    binary: r.exact_patched.to_binary(),
                });
            }
        }
        out
    }
}

fn summarize(report: &TrilemmaReport) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    if let Some(t) = report.sg_not_t.result() {
        let regions: Vec<String> = t
            .rows
            .iter()
            .map(|r| r.regions.map_or_else(|| "cap".to_string(), |n| n.to_string()))
            .collect();
        let lps: Vec<String> = t.rows.iter().filter_map(|r| r.lp_calls).map(|n| n.to_string()).collect();
        rows.push(SummaryRow {
            held: "S+G",
            fails: "T",
            track: "sg_not_t",
            verified: t.passed,
            evidence: format!(
                "sawtooth regions on [0,1]: {}; LP calls: {}; IBP ops linear: {}; IBP time ratio {:.2} for neuron ratio {:.0}",
                regions.join(" "),
                lps.join(" "),
                t.ibp_ops_linear,
                t.ibp_time_ratio,
                t.neuron_ratio
            ),
        });
    }
    if let Some(t) = report.st_not_g.result() {
        rows.push(SummaryRow {
            held: "S+T",
            fails: "G",
            track: "st_not_g",
            verified: t.passed,
            evidence: format!(
                "{}/{} equivalent pairs with distinct traces, differing A* and identical verdicts; box-certified ReLU(x-1) <= 0 violated at x={}",
                t.passed_pairs,
                t.pairs.len(),
                t.bounded_exhibit.witness.as_ref().map_or("none".into(), |w| w.join(","))
            ),
        });
    }
    if let Some(t) = report.gt_not_s.result() {
        rows.push(SummaryRow {
            held: "G+T",
            fails: "S",
            track: "gt_not_s",
            verified: t.passed,
            evidence: format!(
                "{}/{} diagonal constructions pass all four assertions; all proxy gaps 1: {}; baseline gap {}",
                t.passed_instances,
                report.config.diagonal_instances,
                t.all_gaps_one,
                format_rational(&t.baseline.proxy_gap)
            ),
        });
    }
    rows
}

/// Run all three tracks and assemble the report. Deterministic given the
/// config, apart from wall-clock fields.
pub fn run_trilemma_suite(cfg: &TrilemmaConfig) -> Result<TrilemmaReport> {
    cfg.validate()?;
    let (sg, st, gt) = if cfg.parallel {
        std::thread::scope(|s| {
            let sg = s.spawn(|| experiment_sg_not_t(cfg));
            let st = s.spawn(|| experiment_st_not_g(cfg));
            let gt = experiment_gt_not_s(cfg);
            (sg.join().expect("track thread"), st.join().expect("track thread"), gt)
        })
    } else {
        (experiment_sg_not_t(cfg), experiment_st_not_g(cfg), experiment_gt_not_s(cfg))
    };
    let mut report = TrilemmaReport {
        config: cfg.clone(),
        environment: Environment::current(),
        sg_not_t: TrackOutcome::from_result(sg),
        st_not_g: TrackOutcome::from_result(st),
        gt_not_s: TrackOutcome::from_result(gt),
        summary: Vec::new(),
    };
    report.summary = summarize(&report);
    Ok(report)
}

#[derive(Serialize)]
struct PairCsvRow {
    index: usize,
    widths: String,
    equivalent: bool,
    generic_probes: usize,
    positive_distance_probes: usize,
    objective_net: u8,
    objective_partner: u8,
    verdicts: String,
    generality_witness: String,
    passed: bool,
}

#[derive(Serialize)]
struct DiagonalCsvRow {
    index: usize,
    support_size: usize,
    proxy_gap: String,
    off_support_witness: String,
    passed: bool,
}

#[derive(Serialize)]
struct ScalingCsvRow {
    depth: u32,
    neurons: usize,
    expected_regions: u64,
    regions: Option<usize>,
    lp_calls: Option<u64>,
    exact_ms: Option<f64>,
    ibp_ops: u64,
    ibp_ns: f64,
    montufar: String,
    truncated: bool,
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Write `report.json` and the CSV tables into `dir`.
pub fn write_report(report: &TrilemmaReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    write_csv(&dir.join("summary.csv"), &report.summary)?;
    if let Some(t) = report.sg_not_t.result() {
        write_csv(
            &dir.join("scaling.csv"),
            t.rows.iter().map(|r| ScalingCsvRow {
                depth: r.depth,
                neurons: r.neurons,
                expected_regions: r.expected_regions,
                regions: r.regions,
                lp_calls: r.lp_calls,
                exact_ms: r.exact_ms,
                ibp_ops: r.ibp_ops,
                ibp_ns: r.ibp_ns,
                montufar: r.montufar.clone(),
                truncated: r.truncated,
            }),
        )?;
    }
    if let Some(t) = report.st_not_g.result() {
        write_csv(
            &dir.join("pairs.csv"),
            t.pairs.iter().map(|p| PairCsvRow {
                index: p.index,
                widths: format!("{:?}", p.net.hidden_widths()),
                equivalent: p.equivalent,
                generic_probes: p.generic_probes,
                positive_distance_probes: p.positive_distance_probes,
                objective_net: p.objective[0],
                objective_partner: p.objective[1],
                verdicts: p
                    .verdicts
                    .iter()
                    .map(|v| format!("{}={}", v.net.verifier, v.net.tag))
                    .collect::<Vec<_>>()
                    .join(" "),
                generality_witness: p
                    .generality
                    .as_ref()
                    .and_then(|g| g.witness.as_ref())
                    .map_or(String::new(), |w| w.join(" ")),
                passed: p.passed,
            }),
        )?;
    }
    if let Some(t) = report.gt_not_s.result() {
        write_csv(
            &dir.join("diagonal.csv"),
            t.instances.iter().map(|i| DiagonalCsvRow {
                index: i.index,
                support_size: i.support_size,
                proxy_gap: format_rational(&i.report.proxy_gap),
                off_support_witness: format_rational(&i.report.off_support_witness[0]),
                passed: i.passed,
            }),
        )?;
    }
    Ok(())
}

/// True when no verdict is reported aligned without being certified.
pub fn no_false_alignment(records: &[VerdictRecord]) -> bool {
    records
        .iter()
        .all(|r| r.binary != BinaryVerdict::Aligned || matches!(r.tag, "certified" | "aligned"))
}
