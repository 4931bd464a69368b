//! JSON scenario files: an explicit system or a gallery reference, plus the
//! knobs the tasks read.
//!
//! Complex numbers are written as `[re, im]` pairs. The weight table `lambda`
//! is indexed vertex first, atom second. Measure family rows follow the flat
//! site order `x * n_w + w` and list weights over the shared grid.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::extension::ThetaFamily;
use crate::gallery::{by_name, GalleryEntry};
use crate::graph::FunctionalGraph;
use crate::spaces::{DiscreteMeasureSpace, GridMeasure, OwcoSpec};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    label: Option<String>,
    tol: Option<f64>,
    gallery: Option<GalleryRef>,
    graph: Option<GraphDef>,
    base: Option<BaseDef>,
    lambda: Option<Vec<Vec<[f64; 2]>>>,
    vertex_mass: Option<Vec<f64>>,
    theta: Option<ThetaDef>,
    site: Option<SiteDef>,
    max_depth: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GalleryRef {
    name: String,
    #[serde(default)]
    params: BTreeMap<String, f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDef {
    phi: Vec<usize>,
    incomplete: Option<Vec<bool>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BaseDef {
    payloads: Vec<[f64; 2]>,
    masses: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThetaDef {
    grid: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

/// Site selector for the moments task.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteDef {
    pub vertex: usize,
    #[serde(default)]
    pub atom: usize,
    pub depth: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub label: Option<String>,
    pub tol: Option<f64>,
    pub entry: GalleryEntry,
    pub site: Option<SiteDef>,
    pub max_depth: Option<usize>,
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let origin = path.display().to_string();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::scenario(origin.clone(), format!("cannot read the file: {e}")))?;
    parse_scenario(&text, &origin)
}

pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario> {
    let file: ScenarioFile = serde_json::from_str(text)
        .map_err(|e| Error::scenario(origin, format!("invalid json: {e}")))?;
    let err = |msg: String| Error::scenario(origin, msg);

    let entry = if let Some(gallery) = &file.gallery {
        if file.graph.is_some()
            || file.base.is_some()
            || file.lambda.is_some()
            || file.vertex_mass.is_some()
            || file.theta.is_some()
        {
            return Err(err(
                "a gallery reference excludes graph, base, lambda, vertex_mass and theta".into(),
            ));
        }
        by_name(&gallery.name, &gallery.params).map_err(|e| err(format!("gallery: {e}")))?
    } else {
        let graph_def = file
            .graph
            .ok_or_else(|| err("missing field graph (or a gallery reference)".into()))?;
        let base_def = file.base.ok_or_else(|| err("missing field base".into()))?;
        let lambda_def = file
            .lambda
            .ok_or_else(|| err("missing field lambda".into()))?;

        let graph = match graph_def.incomplete {
            Some(flags) => FunctionalGraph::truncated(graph_def.phi, flags),
            None => FunctionalGraph::new(graph_def.phi),
        }
        .map_err(|e| err(format!("graph: {e}")))?;
        let payloads: Vec<Complex64> = base_def
            .payloads
            .iter()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect();
        let base = DiscreteMeasureSpace::new(payloads, base_def.masses)
            .map_err(|e| err(format!("base: {e}")))?;

        let n = graph.vertex_count();
        let n_w = base.len();
        if lambda_def.len() != n {
            return Err(err(format!(
                "lambda: {} vertex rows for {} vertices",
                lambda_def.len(),
                n
            )));
        }
        let mut lambda = Vec::with_capacity(n * n_w);
        for (x, row) in lambda_def.iter().enumerate() {
            if row.len() != n_w {
                return Err(err(format!(
                    "lambda[{x}]: {} entries for {} atoms",
                    row.len(),
                    n_w
                )));
            }
            lambda.extend(row.iter().map(|&[re, im]| Complex64::new(re, im)));
        }
        let spec = OwcoSpec::new(graph, base, lambda, file.vertex_mass)
            .map_err(|e| err(format!("{e}")))?;

        let theta = match file.theta {
            None => None,
            Some(def) => {
                if def.rows.len() != n * n_w {
                    return Err(err(format!(
                        "theta: {} rows for {} sites",
                        def.rows.len(),
                        n * n_w
                    )));
                }
                let mut rows = Vec::with_capacity(def.rows.len());
                for (i, weights) in def.rows.into_iter().enumerate() {
                    let row = GridMeasure::probability(def.grid.clone(), weights)
                        .map_err(|e| err(format!("theta row {i}: {e}")))?;
                    rows.push(row);
                }
                Some(ThetaFamily::new(n, n_w, rows).map_err(|e| err(format!("theta: {e}")))?)
            }
        };
        GalleryEntry::Owco { spec, theta }
    };

    if let Some(tol) = file.tol {
        if !tol.is_finite() || tol <= 0.0 {
            return Err(err(format!("tol must be positive, got {tol}")));
        }
    }
    if let Some(site) = &file.site {
        let (n, n_w) = match &entry {
            GalleryEntry::Owco { spec, .. } => (spec.n_vertices(), spec.n_w()),
            GalleryEntry::Classical(sys) => (sys.graph().vertex_count(), 1),
        };
        if site.vertex >= n || site.atom >= n_w {
            return Err(err(format!(
                "site ({}, {}) outside a system with {} vertices and {} atoms",
                site.vertex, site.atom, n, n_w
            )));
        }
    }

    Ok(Scenario {
        label: file.label,
        tol: file.tol,
        entry,
        site: file.site,
        max_depth: file.max_depth,
    })
}
