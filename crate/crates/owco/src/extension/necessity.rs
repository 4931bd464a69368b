//! Extraction of the fiber-measure family from moment data.
//!
//! If the operator is subnormal, each site `(x, w)` has a Stieltjes moment
//! sequence, the recovered measures satisfy the pushforward recurrence
//! `t dtheta_x = sum over the fiber of |lambda_y|^2 dtheta_y`, and the
//! density table built from them is constant along trajectories. Running the
//! extraction on a system that is not subnormal produces a concrete moment
//! witness instead of a family.

use crate::error::{Error, Result};
use crate::moments::{
    available_moment_depth, owco_moments, recover_atomic_measure, stieltjes_test,
};
use crate::operators::owco_build;
use crate::par;
use crate::spaces::{counting_reduction, GridMeasure, OwcoSpec};

use super::{check_conditions, consistency_check, density_table, ThetaFamily};

#[derive(Debug, Clone, Copy)]
pub struct NecessityOptions {
    /// Cap on the moment depth per site; truncation boundaries may lower it.
    pub max_depth: usize,
    pub tol: f64,
}

impl Default for NecessityOptions {
    fn default() -> Self {
        NecessityOptions {
            max_depth: 6,
            tol: 1e-9,
        }
    }
}

/// Concrete refutation: a site whose moments fail the Hankel test, with the
/// worst 2x2 principal minor as a hand-checkable certificate.
#[derive(Debug, Clone)]
pub struct MomentWitness {
    pub vertex: usize,
    pub atom: usize,
    /// Smaller of the two prescaled Hankel minimal eigenvalues.
    pub min_eig: f64,
    /// Most negative 2x2 principal minor, in plain moment values.
    pub minor: [[f64; 2]; 2],
    /// Row indices `(i, j)` of that minor inside its Hankel block.
    pub minor_indices: (usize, usize),
    /// The minor sits in the shifted block `(a_{i+j+1})`.
    pub shifted: bool,
}

#[derive(Debug, Clone)]
pub struct SiteReport {
    pub vertex: usize,
    pub atom: usize,
    /// Highest moment order used at this site.
    pub depth: usize,
    pub rank: usize,
    pub quadrature_truncated: bool,
    pub roundtrip_residual: f64,
    /// All moments past `a_0` vanish; the measure is the point mass at zero.
    pub delta_zero: bool,
    /// No faithful moment data at all (the vertex sits on the truncation
    /// boundary); the measure was copied along the trajectory instead.
    pub insufficient: bool,
    /// Vertex the measure was copied from, for insufficient sites.
    pub copied_from: Option<usize>,
    /// Even-moment ratio bound for this site, when the data gives one.
    pub support_bound: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct NecessityReport {
    pub theta: ThetaFamily,
    pub sites: Vec<SiteReport>,
    /// Squared norm of the reduced operator.
    pub norm_sq: f64,
    /// Every finite per-site support bound stays below `norm_sq + tol`.
    pub support_ok: bool,
    /// `max |t_s theta_x^w(s) - sum_y |lambda_y(w)|^2 theta_y^w(s)|` over
    /// vertices with complete fibers and fully extracted data.
    pub recurrence_residual: f64,
    /// Consistency residual of the density table over the recovered family,
    /// masked where extraction was unfaithful. `None` when the recovered
    /// family violates the support condition outright.
    pub alignment_residual: Option<f64>,
    /// Largest deviation of a raw recovered row from unit mass.
    pub normalization_drift: f64,
    /// Vertices excluded from the recurrence and alignment checks.
    pub masked: Vec<bool>,
}

#[derive(Debug, Clone)]
pub enum NecessityOutcome {
    Extracted(NecessityReport),
    NotSubnormal(MomentWitness),
}

fn worst_minor(a: &[f64]) -> ([[f64; 2]; 2], (usize, usize), bool) {
    let n = a.len() - 1;
    let mut best = f64::INFINITY;
    let mut minor = [[a[0], a[0]], [a[0], a[0]]];
    let mut at = (0, 0);
    let mut shifted = false;
    for i in 0..=n / 2 {
        for j in (i + 1)..=n / 2 {
            let det = a[2 * i] * a[2 * j] - a[i + j] * a[i + j];
            if det < best {
                best = det;
                minor = [[a[2 * i], a[i + j]], [a[i + j], a[2 * j]]];
                at = (i, j);
                shifted = false;
            }
        }
    }
    if n >= 1 {
        let top = (n - 1) / 2;
        for i in 0..=top {
            for j in (i + 1)..=top {
                let det = a[2 * i + 1] * a[2 * j + 1] - a[i + j + 1] * a[i + j + 1];
                if det < best {
                    best = det;
                    minor = [[a[2 * i + 1], a[i + j + 1]], [a[i + j + 1], a[2 * j + 1]]];
                    at = (i, j);
                    shifted = true;
                }
            }
        }
    }
    (minor, at, shifted)
}

enum SiteOutcome {
    Recovered {
        report: SiteReport,
        measure: GridMeasure,
    },
    Insufficient {
        vertex: usize,
        atom: usize,
    },
    Witness(MomentWitness),
}

/// Run the necessity battery and assemble the recovered family.
pub fn necessity_extract(spec: &OwcoSpec, opts: &NecessityOptions) -> Result<NecessityOutcome> {
    let work = if spec.is_counting() {
        spec.clone()
    } else {
        counting_reduction(spec)
    };
    let nv = work.n_vertices();
    let n_w = work.n_w();
    let norm = owco_build(&work).operator_norm();
    let norm_sq = norm * norm;
    let tol = opts.tol;

    let sites: Vec<(usize, usize)> = (0..nv)
        .flat_map(|x| (0..n_w).map(move |w| (x, w)))
        .collect();
    let outcomes = par::map_collect(&sites, |&(x, w)| -> Result<SiteOutcome> {
        let depth = available_moment_depth(&work, x, w, opts.max_depth)?;
        if depth == 0 {
            return Ok(SiteOutcome::Insufficient { vertex: x, atom: w });
        }
        let seq = owco_moments(&work, x, w, depth)?;
        let verdict = stieltjes_test(&seq, tol)?;
        if !verdict.is_stieltjes {
            let (minor, at, shifted) = worst_minor(seq.values());
            return Ok(SiteOutcome::Witness(MomentWitness {
                vertex: x,
                atom: w,
                min_eig: verdict.min_eig_h0.min(verdict.min_eig_h1),
                minor,
                minor_indices: at,
                shifted,
            }));
        }
        let recovery = match recover_atomic_measure(&seq, tol) {
            Ok(r) => r,
            Err(Error::NotStieltjes(_)) => {
                let (minor, at, shifted) = worst_minor(seq.values());
                return Ok(SiteOutcome::Witness(MomentWitness {
                    vertex: x,
                    atom: w,
                    min_eig: verdict.min_eig_h0.min(verdict.min_eig_h1),
                    minor,
                    minor_indices: at,
                    shifted,
                }));
            }
            Err(e) => return Err(e),
        };
        let delta_zero = seq.values()[1..].iter().all(|&v| v == 0.0);
        Ok(SiteOutcome::Recovered {
            report: SiteReport {
                vertex: x,
                atom: w,
                depth,
                rank: recovery.rank,
                quadrature_truncated: recovery.quadrature_truncated,
                roundtrip_residual: recovery.roundtrip_residual,
                delta_zero,
                insufficient: false,
                copied_from: None,
                support_bound: verdict.support.value,
            },
            measure: recovery.measure,
        })
    });

    // a witness ends the run; hard errors propagate
    let mut recovered: Vec<Option<(SiteReport, GridMeasure)>> = vec![None; nv * n_w];
    let mut insufficient_sites: Vec<(usize, usize)> = Vec::new();
    for outcome in outcomes {
        match outcome? {
            SiteOutcome::Witness(w) => return Ok(NecessityOutcome::NotSubnormal(w)),
            SiteOutcome::Recovered { report, measure } => {
                let idx = report.vertex * n_w + report.atom;
                recovered[idx] = Some((report, measure));
            }
            SiteOutcome::Insufficient { vertex, atom } => {
                insufficient_sites.push((vertex, atom));
            }
        }
    }

    // sites without data copy the measure from along the trajectory; if the
    // whole forward orbit is dry the point mass at zero stands in
    let phi = work.graph().phi();
    for &(x, w) in &insufficient_sites {
        let mut y = phi[x];
        let mut hops = 0;
        let (measure, copied_from, delta_zero) = loop {
            if let Some((_, m)) = &recovered[y * n_w + w] {
                break (m.clone(), Some(y), false);
            }
            y = phi[y];
            hops += 1;
            if hops > nv {
                break (GridMeasure::dirac(0.0)?, None, true);
            }
        };
        recovered[x * n_w + w] = Some((
            SiteReport {
                vertex: x,
                atom: w,
                depth: 0,
                rank: 0,
                quadrature_truncated: false,
                roundtrip_residual: 0.0,
                delta_zero,
                insufficient: true,
                copied_from,
                support_bound: None,
            },
            measure,
        ));
    }

    // union grid: pool every recovered atom, merge within the resolution the
    // operator norm supports, snap site atoms to the merged grid
    let radius = 1e-8 * norm_sq.max(1.0);
    let mut pool: Vec<(f64, f64)> = Vec::new();
    for entry in recovered.iter().flatten() {
        for (&t, &wgt) in entry.1.grid().iter().zip(entry.1.weights()) {
            if wgt > 0.0 {
                pool.push((t, wgt));
            }
        }
    }
    pool.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut grid: Vec<f64> = Vec::new();
    {
        let mut cluster_mass = 0.0;
        let mut cluster_sum = 0.0;
        let mut cluster_last = f64::NEG_INFINITY;
        for &(t, wgt) in &pool {
            if cluster_mass > 0.0 && t - cluster_last > radius {
                grid.push(cluster_sum / cluster_mass);
                cluster_mass = 0.0;
                cluster_sum = 0.0;
            }
            cluster_sum += t * wgt;
            cluster_mass += wgt;
            cluster_last = t;
        }
        if cluster_mass > 0.0 {
            grid.push(cluster_sum / cluster_mass);
        }
    }
    if grid.is_empty() {
        return Err(Error::Numerical(
            "no atoms were recovered at any site".into(),
        ));
    }

    let nearest = |t: f64| -> usize {
        let i = grid.partition_point(|&g| g < t);
        if i == 0 {
            0
        } else if i == grid.len() {
            grid.len() - 1
        } else if t - grid[i - 1] <= grid[i] - t {
            i - 1
        } else {
            i
        }
    };

    let mut rows: Vec<GridMeasure> = Vec::with_capacity(nv * n_w);
    let mut sites_out: Vec<SiteReport> = Vec::with_capacity(nv * n_w);
    let mut drift = 0.0f64;
    for entry in recovered.into_iter() {
        let (report, measure) = entry.expect("every site is filled by now");
        let mut weights = vec![0.0f64; grid.len()];
        for (&t, &wgt) in measure.grid().iter().zip(measure.weights()) {
            weights[nearest(t)] += wgt;
        }
        let sum: f64 = weights.iter().sum();
        drift = drift.max((sum - 1.0).abs());
        for v in &mut weights {
            *v /= sum;
        }
        rows.push(GridMeasure::probability(grid.clone(), weights)?);
        sites_out.push(report);
    }
    let theta = ThetaFamily::new(nv, n_w, rows)?;

    // unusable vertices: clipped fiber, or unfaithful data at the vertex
    // itself or inside its fiber
    let mut tainted = vec![false; nv];
    for x in 0..nv {
        let dry = |v: usize| (0..n_w).any(|w| sites_out[v * n_w + w].insufficient);
        if work.graph().is_incomplete(x) || dry(x) {
            tainted[x] = true;
            continue;
        }
        if work.graph().fiber(x)?.iter().any(|&y| dry(y)) {
            tainted[x] = true;
        }
    }

    let mut recurrence_residual = 0.0f64;
    for x in 0..nv {
        if tainted[x] {
            continue;
        }
        for w in 0..n_w {
            for s in 0..grid.len() {
                let mut flow = 0.0;
                for &y in work.graph().fiber(x)? {
                    flow += work.lambda(y, w).norm_sqr() * theta.weight(y, w, s);
                }
                let r = (grid[s] * theta.weight(x, w, s) - flow).abs();
                recurrence_residual = recurrence_residual.max(r);
            }
        }
    }

    let support_ok = sites_out
        .iter()
        .filter_map(|s| s.support_bound)
        .all(|b| b <= norm_sq + tol);

    let conditions = check_conditions(&work, &theta)?;
    let alignment_residual = if conditions.satisfied {
        let mut g = density_table(&work, &theta, &conditions)?;
        for x in 0..nv {
            if tainted[x] {
                g.clipped[x] = true;
            }
        }
        Some(consistency_check(&work, &theta, &g)?.residual)
    } else {
        None
    };

    Ok(NecessityOutcome::Extracted(NecessityReport {
        theta,
        sites: sites_out,
        norm_sq,
        support_ok,
        recurrence_residual,
        alignment_residual,
        normalization_drift: drift,
        masked: tainted,
    }))
}
