//! Classical weighted composition operators as one-atom systems.
//!
//! A scalar weight family on a functional graph, together with a candidate
//! measure `Q_x` per vertex, reduces to an operator-weighted system over a
//! one-point base. The balance condition checked here is
//! `mu_x t Q_x(t) = sum over the fiber of |w_y|^2 mu_y Q_y(t)` atom by atom;
//! perturbing a single weight `w_y` breaks it at `phi(y)` and nowhere else,
//! which makes failures easy to localize.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::graph::FunctionalGraph;
use crate::par;
use crate::spaces::{DiscreteMeasureSpace, OwcoSpec};

use super::{certify_subnormality, SubnormalityCertificate, ThetaFamily};

#[derive(Debug, Clone)]
pub struct WcoSystem {
    graph: FunctionalGraph,
    weights: Vec<Complex64>,
    vertex_mass: Vec<f64>,
    q: ThetaFamily,
}

impl WcoSystem {
    pub fn new(
        graph: FunctionalGraph,
        weights: Vec<Complex64>,
        vertex_mass: Option<Vec<f64>>,
        q: ThetaFamily,
    ) -> Result<Self> {
        let n = graph.vertex_count();
        if weights.len() != n {
            return Err(Error::Shape(format!(
                "{} weights for {} vertices",
                weights.len(),
                n
            )));
        }
        if q.n_w() != 1 {
            return Err(Error::Shape(format!(
                "scalar systems carry one measure per vertex, got {}",
                q.n_w()
            )));
        }
        if q.n_vertices() != n {
            return Err(Error::Shape(format!(
                "measure family covers {} vertices, graph has {}",
                q.n_vertices(),
                n
            )));
        }
        let vertex_mass = vertex_mass.unwrap_or_else(|| vec![1.0; n]);
        if vertex_mass.len() != n {
            return Err(Error::Shape(format!(
                "{} vertex masses for {} vertices",
                vertex_mass.len(),
                n
            )));
        }
        if let Some(m) = vertex_mass.iter().find(|m| !m.is_finite() || **m <= 0.0) {
            return Err(Error::Input(format!("vertex mass {m} is not positive")));
        }
        Ok(WcoSystem {
            graph,
            weights,
            vertex_mass,
            q,
        })
    }

    pub fn graph(&self) -> &FunctionalGraph {
        &self.graph
    }

    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    pub fn vertex_mass(&self) -> &[f64] {
        &self.vertex_mass
    }

    pub fn q(&self) -> &ThetaFamily {
        &self.q
    }

    /// The equivalent one-atom operator-weighted system.
    pub fn spec(&self) -> Result<OwcoSpec> {
        let base = DiscreteMeasureSpace::new(vec![Complex64::new(1.0, 0.0)], vec![1.0])?;
        OwcoSpec::new(
            self.graph.clone(),
            base,
            self.weights.clone(),
            Some(self.vertex_mass.clone()),
        )
    }
}

#[derive(Debug, Clone)]
pub struct WcoReport {
    /// Worst balance defect over vertices with complete fibers.
    pub balance_residual: f64,
    /// Balance defect per vertex; zero at masked vertices.
    pub per_vertex: Vec<f64>,
    /// Vertices with clipped fibers, excluded from `balance_residual`.
    pub masked: Vec<bool>,
    /// Largest first moment among the candidate measures.
    pub max_first_moment: f64,
    /// Full certificate for the reduced one-atom system.
    pub certificate: SubnormalityCertificate,
    /// Worst deviation of the density table from the identity map `t -> t`
    /// on the supports of the `Q_x`; `None` when no table was built. For a
    /// balanced system this is a rephrasing of the balance condition.
    pub g_matches_t: Option<f64>,
}

/// Check the balance condition and certify the reduced system.
pub fn wco_reduce(sys: &WcoSystem, tol: f64) -> Result<WcoReport> {
    let n = sys.graph.vertex_count();
    let grid = sys.q.grid();

    let per_vertex = par::map_indexed(n, |x| {
        if sys.graph.is_incomplete(x) {
            return 0.0;
        }
        let fiber = sys.graph.fiber(x).expect("vertex in range");
        let mut worst = 0.0f64;
        for (s, &t) in grid.iter().enumerate() {
            let lhs = sys.vertex_mass[x] * t * sys.q.weight(x, 0, s);
            let mut rhs = 0.0;
            for &y in fiber {
                rhs += sys.weights[y].norm_sqr() * sys.vertex_mass[y] * sys.q.weight(y, 0, s);
            }
            worst = worst.max((lhs - rhs).abs());
        }
        worst
    });
    let masked: Vec<bool> = (0..n).map(|x| sys.graph.is_incomplete(x)).collect();
    let balance_residual = per_vertex
        .iter()
        .zip(&masked)
        .filter(|(_, &m)| !m)
        .map(|(&r, _)| r)
        .fold(0.0f64, f64::max);

    let max_first_moment = (0..n)
        .map(|x| sys.q.row(x, 0).moment(1))
        .fold(0.0f64, f64::max);

    let certificate = certify_subnormality(&sys.spec()?, &sys.q, tol)?;
    let g_matches_t = certificate.g.as_ref().map(|g| {
        let mut worst = 0.0f64;
        for x in 0..n {
            if g.is_clipped(x) {
                continue;
            }
            for (s, &t) in grid.iter().enumerate() {
                if sys.q.weight(x, 0, s) > 0.0 {
                    worst = worst.max((g.value(x, 0, s) - t).abs());
                }
            }
        }
        worst
    });

    Ok(WcoReport {
        balance_residual,
        per_vertex,
        masked,
        max_first_moment,
        certificate,
        g_matches_t,
    })
}
