//! Serializable task reports.
//!
//! Reports carry no timestamps or timings, so a rerun on the same input
//! produces the same bytes. Field order follows the struct declarations.

use serde::Serialize;

use crate::extension::necessity::{MomentWitness, NecessityOutcome, NecessityReport, SiteReport};
use crate::extension::wco::WcoReport;
use crate::extension::{SubnormalityCertificate, Verdict};
use crate::moments::{MomentSequence, Recovery, StieltjesVerdict};

pub const REPORT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Serialize)]
pub struct Report {
    pub version: &'static str,
    pub task: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moments: Option<MomentsSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub necessity: Option<NecessitySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wco: Option<WcoSection>,
}

impl Report {
    pub fn new(task: &'static str, label: Option<String>, tol: f64) -> Self {
        Report {
            version: REPORT_VERSION,
            task,
            label,
            tol,
            check: None,
            certificate: None,
            moments: None,
            necessity: None,
            wco: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

#[derive(Debug, Serialize)]
pub struct CheckSection {
    pub n_vertices: usize,
    pub n_atoms: usize,
    pub dim: usize,
    pub is_counting: bool,
    pub exact: bool,
    pub incomplete_vertices: Vec<usize>,
    pub cycles: Vec<Vec<usize>>,
    pub operator_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conditions: Option<ConditionsSection>,
}

#[derive(Debug, Serialize)]
pub struct ConditionsSection {
    pub satisfied: bool,
    pub violations: Vec<[usize; 3]>,
}

#[derive(Debug, Serialize)]
pub struct CertificateSection {
    pub verdict: &'static str,
    pub was_reduced: bool,
    pub conditions: ConditionsSection,
    pub lift_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density_sup: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quasinormality_defect: Option<f64>,
    pub defect_threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consistency_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cstarc_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding_isometry_defect: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intertwining_defect: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sqrt_route_commutator: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub routes_agree: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe_residual: Option<f64>,
    pub masked_vertices: Vec<usize>,
    pub internal_inconsistency: bool,
}

pub fn verdict_name(v: &Verdict) -> &'static str {
    match v {
        Verdict::CertifiedSubnormal => "certified-subnormal",
        Verdict::RefutedHypotheses => "refuted-hypotheses",
        Verdict::NumericalIndeterminate => "numerical-indeterminate",
    }
}

impl From<&SubnormalityCertificate> for CertificateSection {
    fn from(c: &SubnormalityCertificate) -> Self {
        CertificateSection {
            verdict: verdict_name(&c.verdict),
            was_reduced: c.was_reduced,
            conditions: ConditionsSection {
                satisfied: c.conditions.satisfied,
                violations: c
                    .conditions
                    .violations
                    .iter()
                    .map(|&(x, w, s)| [x, w, s])
                    .collect(),
            },
            lift_norm: c.lift_norm,
            density_sup: c.g.as_ref().map(|g| g.sup()),
            quasinormality_defect: c.quasinormality_defect,
            defect_threshold: c.defect_threshold,
            consistency_residual: c.consistency.as_ref().map(|r| r.residual),
            cstarc_residual: c.cstarc_residual,
            embedding_isometry_defect: c.embedding_isometry_defect,
            intertwining_defect: c.intertwining_defect,
            sqrt_route_commutator: c.sqrt_route_commutator,
            routes_agree: c.routes_agree,
            probe_residual: c.probe_residual,
            masked_vertices: c.masked_vertices.clone(),
            internal_inconsistency: c.internal_inconsistency,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct MomentsSection {
    pub vertex: usize,
    pub atom: usize,
    pub depth: usize,
    pub values: Vec<f64>,
    pub is_stieltjes: bool,
    pub min_eig_h0: f64,
    pub min_eig_h1: f64,
    pub prescale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support_bound: Option<f64>,
    pub support_growing: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovery: Option<RecoverySection>,
}

impl MomentsSection {
    pub fn new(
        vertex: usize,
        atom: usize,
        seq: &MomentSequence,
        verdict: &StieltjesVerdict,
        recovery: Option<&Recovery>,
    ) -> Self {
        MomentsSection {
            vertex,
            atom,
            depth: seq.order(),
            values: seq.values().to_vec(),
            is_stieltjes: verdict.is_stieltjes,
            min_eig_h0: verdict.min_eig_h0,
            min_eig_h1: verdict.min_eig_h1,
            prescale: verdict.prescale,
            support_bound: verdict.support.value,
            support_growing: verdict.support.growing,
            recovery: recovery.map(RecoverySection::from),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RecoverySection {
    pub atoms: Vec<f64>,
    pub weights: Vec<f64>,
    pub rank: usize,
    pub quadrature_truncated: bool,
    pub roundtrip_residual: f64,
}

impl From<&Recovery> for RecoverySection {
    fn from(r: &Recovery) -> Self {
        RecoverySection {
            atoms: r.measure.grid().to_vec(),
            weights: r.measure.weights().to_vec(),
            rank: r.rank,
            quadrature_truncated: r.quadrature_truncated,
            roundtrip_residual: r.roundtrip_residual,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct NecessitySection {
    pub outcome: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm_sq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support_ok: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recurrence_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alignment_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalization_drift: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub masked_vertices: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sites: Option<Vec<SiteSection>>,
}

#[derive(Debug, Serialize)]
pub struct WitnessSection {
    pub vertex: usize,
    pub atom: usize,
    pub min_eig: f64,
    pub minor: [[f64; 2]; 2],
    pub minor_indices: [usize; 2],
    pub shifted: bool,
}

impl From<&MomentWitness> for WitnessSection {
    fn from(w: &MomentWitness) -> Self {
        WitnessSection {
            vertex: w.vertex,
            atom: w.atom,
            min_eig: w.min_eig,
            minor: w.minor,
            minor_indices: [w.minor_indices.0, w.minor_indices.1],
            shifted: w.shifted,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SiteSection {
    pub vertex: usize,
    pub atom: usize,
    pub depth: usize,
    pub rank: usize,
    pub quadrature_truncated: bool,
    pub roundtrip_residual: f64,
    pub delta_zero: bool,
    pub insufficient: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub copied_from: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support_bound: Option<f64>,
}

impl From<&SiteReport> for SiteSection {
    fn from(s: &SiteReport) -> Self {
        SiteSection {
            vertex: s.vertex,
            atom: s.atom,
            depth: s.depth,
            rank: s.rank,
            quadrature_truncated: s.quadrature_truncated,
            roundtrip_residual: s.roundtrip_residual,
            delta_zero: s.delta_zero,
            insufficient: s.insufficient,
            copied_from: s.copied_from,
            support_bound: s.support_bound,
        }
    }
}

impl From<&NecessityOutcome> for NecessitySection {
    fn from(outcome: &NecessityOutcome) -> Self {
        match outcome {
            NecessityOutcome::NotSubnormal(w) => NecessitySection {
                outcome: "not-subnormal",
                witness: Some(WitnessSection::from(w)),
                grid: None,
                rows: None,
                norm_sq: None,
                support_ok: None,
                recurrence_residual: None,
                alignment_residual: None,
                normalization_drift: None,
                masked_vertices: None,
                sites: None,
            },
            NecessityOutcome::Extracted(r) => NecessitySection::from(r),
        }
    }
}

impl From<&NecessityReport> for NecessitySection {
    fn from(r: &NecessityReport) -> Self {
        let n_w = r.theta.n_w();
        let n_s = r.theta.n_s();
        let rows: Vec<Vec<f64>> = (0..r.theta.n_vertices() * n_w)
            .map(|i| {
                (0..n_s)
                    .map(|s| r.theta.weight(i / n_w, i % n_w, s))
                    .collect()
            })
            .collect();
        NecessitySection {
            outcome: "extracted",
            witness: None,
            grid: Some(r.theta.grid().to_vec()),
            rows: Some(rows),
            norm_sq: Some(r.norm_sq),
            support_ok: Some(r.support_ok),
            recurrence_residual: Some(r.recurrence_residual),
            alignment_residual: r.alignment_residual,
            normalization_drift: Some(r.normalization_drift),
            masked_vertices: Some(
                r.masked
                    .iter()
                    .enumerate()
                    .filter(|&(_, &m)| m)
                    .map(|(x, _)| x)
                    .collect(),
            ),
            sites: Some(r.sites.iter().map(SiteSection::from).collect()),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct WcoSection {
    pub balance_residual: f64,
    pub per_vertex: Vec<f64>,
    pub masked_vertices: Vec<usize>,
    pub max_first_moment: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_matches_t: Option<f64>,
    pub certificate: CertificateSection,
}

impl From<&WcoReport> for WcoSection {
    fn from(r: &WcoReport) -> Self {
        WcoSection {
            balance_residual: r.balance_residual,
            per_vertex: r.per_vertex.clone(),
            masked_vertices: r
                .masked
                .iter()
                .enumerate()
                .filter(|&(_, &m)| m)
                .map(|(x, _)| x)
                .collect(),
            max_first_moment: r.max_first_moment,
            g_matches_t: r.g_matches_t,
            certificate: CertificateSection::from(&r.certificate),
        }
    }
}
