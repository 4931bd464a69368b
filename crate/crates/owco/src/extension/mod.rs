//! Lifting a composition system to a product space on which the operator is
//! quasinormal, and certifying subnormality of the original operator from
//! that lift.
//!
//! The data beyond the `OwcoSpec` is a family of probability measures on a shared
//! nonnegative grid, one per `(vertex, atom)` pair. The lift acts on blocks
//! over the product atoms `(w, s)` weighted by `rho(w) theta_x^w({s})`;
//! zero-weight pairs stay in the index set as null atoms. All checks run on
//! the counting reduction of the input system.
//!
//! Truncated systems certify on the interior: a vertex whose stored fiber is
//! incomplete has an unfaithful density row, so the consistency check and the
//! quasinormality defect mask every vertex `x` for which `x` or `phi(x)` is
//! incomplete. The product identity `Chat* Chat = M_G` needs no mask; it
//! holds for the literal finite matrices whatever got clipped.

pub mod necessity;
pub mod wco;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::operators::{mult_build, owco_build, LinearMap};
use crate::par;
use crate::spaces::{
    counting_reduction, weighted_inner, BlockSpace, BlockVector, GridMeasure, OwcoSpec,
    PROBABILITY_TOL,
};

/// Family of fiber measures `theta_x^w`, all probability measures on one
/// shared grid, stored flat by `(vertex, atom)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaFamily {
    n_vertices: usize,
    n_w: usize,
    grid: Vec<f64>,
    rows: Vec<GridMeasure>, // flat [x * n_w + w]
}

impl ThetaFamily {
    pub fn new(n_vertices: usize, n_w: usize, rows: Vec<GridMeasure>) -> Result<Self> {
        if rows.len() != n_vertices * n_w {
            return Err(Error::Shape(format!(
                "{} fiber measures for {} vertices x {} atoms",
                rows.len(),
                n_vertices,
                n_w
            )));
        }
        let grid = rows[0].grid().to_vec();
        for (i, row) in rows.iter().enumerate() {
            if row.grid() != grid.as_slice() {
                return Err(Error::Input(format!(
                    "fiber measure at flat index {i} lives on a different grid"
                )));
            }
            let sum = row.total_mass();
            if (sum - 1.0).abs() > PROBABILITY_TOL {
                return Err(Error::NotProbability {
                    what: format!("fiber measure at flat index {i}"),
                    sum,
                    tol: PROBABILITY_TOL,
                });
            }
        }
        Ok(ThetaFamily {
            n_vertices,
            n_w,
            grid,
            rows,
        })
    }

    /// One measure repeated at every site.
    pub fn constant(n_vertices: usize, n_w: usize, row: GridMeasure) -> Result<Self> {
        Self::new(n_vertices, n_w, vec![row; n_vertices * n_w])
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_w(&self) -> usize {
        self.n_w
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn n_s(&self) -> usize {
        self.grid.len()
    }

    pub fn row(&self, x: usize, w: usize) -> &GridMeasure {
        &self.rows[x * self.n_w + w]
    }

    /// Weight `theta_x^w({s})` by grid index.
    pub fn weight(&self, x: usize, w: usize, s: usize) -> f64 {
        self.rows[x * self.n_w + w].weights()[s]
    }

    pub fn rows(&self) -> &[GridMeasure] {
        &self.rows
    }

    fn matches(&self, spec: &OwcoSpec) -> Result<()> {
        if self.n_vertices != spec.n_vertices() || self.n_w != spec.n_w() {
            return Err(Error::Shape(format!(
                "fiber family of shape {} x {} for a system with {} vertices and {} atoms",
                self.n_vertices,
                self.n_w,
                spec.n_vertices(),
                spec.n_w()
            )));
        }
        Ok(())
    }
}

/// Hypotheses that make the product-space densities well defined.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionsReport {
    /// All vertices share one base space, so the first hypothesis (absolute
    /// continuity of the pushforward against the base) holds by construction.
    pub shared_base: bool,
    /// Violations of the support condition: triples `(x, w, s)` with
    /// `lambda_x(w) != 0` and `theta_x^w({s}) > 0` but `theta_phi(x)^w({s}) = 0`.
    pub violations: Vec<(usize, usize, usize)>,
    pub satisfied: bool,
}

/// Check the support condition atom by atom.
pub fn check_conditions(spec: &OwcoSpec, theta: &ThetaFamily) -> Result<ConditionsReport> {
    theta.matches(spec)?;
    let n_w = spec.n_w();
    let n_s = theta.n_s();
    let phi = spec.graph().phi();
    let per_vertex = par::map_indexed(spec.n_vertices(), |x| {
        let mut found = Vec::new();
        for w in 0..n_w {
            if spec.lambda(x, w).norm_sqr() == 0.0 {
                continue;
            }
            for s in 0..n_s {
                if theta.weight(x, w, s) > 0.0 && theta.weight(phi[x], w, s) == 0.0 {
                    found.push((x, w, s));
                }
            }
        }
        found
    });
    let violations: Vec<(usize, usize, usize)> = per_vertex.into_iter().flatten().collect();
    Ok(ConditionsReport {
        shared_base: true,
        satisfied: violations.is_empty(),
        violations,
    })
}

/// Density table `G_x(w, s)` of the lifted modulus squared: on atoms in the
/// support of the product measure at `x`,
/// `G_x(w, s) = sum over y in phi^{-1}(x) of |lambda_y(w)|^2 theta_y^w({s}) / theta_x^w({s})`,
/// and 0 on null atoms and outside the image. Values use the counting
/// reduction of the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct GTable {
    n_vertices: usize,
    n_w: usize,
    n_s: usize,
    values: Vec<f64>, // flat [x * n_w * n_s + w * n_s + s]
    null: Vec<bool>,
    clipped: Vec<bool>, // per vertex: stored fiber is incomplete
}

impl GTable {
    fn flat(&self, x: usize, w: usize, s: usize) -> usize {
        (x * self.n_w + w) * self.n_s + s
    }

    pub fn value(&self, x: usize, w: usize, s: usize) -> f64 {
        self.values[self.flat(x, w, s)]
    }

    pub fn is_null(&self, x: usize, w: usize, s: usize) -> bool {
        self.null[self.flat(x, w, s)]
    }

    /// The density row at this vertex misses clipped fiber members.
    pub fn is_clipped(&self, x: usize) -> bool {
        self.clipped[x]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    /// Largest density over supported atoms; the squared norm of the lift.
    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| m.max(v))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Diagonal symbol for a multiplication operator on the product space.
    pub fn as_gamma(&self) -> Vec<Complex64> {
        self.values
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect()
    }
}

/// Compute the density table. The support condition must have been verified
/// first; the report is demanded to make that order explicit.
pub fn density_table(
    spec: &OwcoSpec,
    theta: &ThetaFamily,
    conditions: &ConditionsReport,
) -> Result<GTable> {
    theta.matches(spec)?;
    if !conditions.satisfied {
        return Err(Error::ConditionsNotVerified);
    }
    let work = if spec.is_counting() {
        std::borrow::Cow::Borrowed(spec)
    } else {
        std::borrow::Cow::Owned(counting_reduction(spec))
    };
    let n_w = spec.n_w();
    let n_s = theta.n_s();
    let rows = par::map_indexed(spec.n_vertices(), |x| {
        let mut vals = vec![0.0f64; n_w * n_s];
        let mut null = vec![false; n_w * n_s];
        let fiber = work.graph().fiber(x).expect("vertex index is in range");
        for w in 0..n_w {
            for s in 0..n_s {
                let base = theta.weight(x, w, s);
                if base == 0.0 {
                    null[w * n_s + s] = true;
                    continue;
                }
                let mut acc = 0.0;
                for &y in fiber {
                    let l2 = work.lambda(y, w).norm_sqr();
                    if l2 != 0.0 {
                        acc += l2 * theta.weight(y, w, s);
                    }
                }
                vals[w * n_s + s] = acc / base;
            }
        }
        (vals, null)
    });
    let mut values = Vec::with_capacity(spec.n_vertices() * n_w * n_s);
    let mut null = Vec::with_capacity(spec.n_vertices() * n_w * n_s);
    for (vals, nulls) in rows {
        values.extend(vals);
        null.extend(nulls);
    }
    let clipped = (0..spec.n_vertices())
        .map(|x| spec.graph().is_incomplete(x))
        .collect();
    Ok(GTable {
        n_vertices: spec.n_vertices(),
        n_w,
        n_s,
        values,
        null,
        clipped,
    })
}

/// Vertices whose consistency data is faithful: neither the vertex itself nor
/// its image has a clipped fiber.
pub fn unmasked_vertices(spec: &OwcoSpec, g: &GTable) -> Vec<bool> {
    let phi = spec.graph().phi();
    (0..spec.n_vertices())
        .map(|x| !(g.clipped[x] || g.clipped[phi[x]]))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    /// `max |lambda_x(w)| |G_phi(x)(w, s) - G_x(w, s)|` over supported atoms
    /// at unmasked vertices.
    pub residual: f64,
    /// Same maximum per vertex, including masked ones.
    pub per_vertex: Vec<f64>,
    /// `true` where the vertex was excluded from the global residual.
    pub masked: Vec<bool>,
}

/// How far the density table is from being constant along trajectories,
/// weighted by the weights that propagate the mismatch.
pub fn consistency_check(
    spec: &OwcoSpec,
    theta: &ThetaFamily,
    g: &GTable,
) -> Result<ConsistencyReport> {
    theta.matches(spec)?;
    let n_w = spec.n_w();
    let n_s = theta.n_s();
    let phi = spec.graph().phi();
    let per_vertex = par::map_indexed(spec.n_vertices(), |x| {
        let mut worst = 0.0f64;
        for w in 0..n_w {
            let l = spec.lambda(x, w).norm();
            if l == 0.0 {
                continue;
            }
            for s in 0..n_s {
                if g.is_null(x, w, s) {
                    continue;
                }
                let d = l * (g.value(phi[x], w, s) - g.value(x, w, s)).abs();
                worst = worst.max(d);
            }
        }
        worst
    });
    let keep = unmasked_vertices(spec, g);
    let residual = per_vertex
        .iter()
        .zip(&keep)
        .filter(|&(_, &k)| k)
        .fold(0.0f64, |m, (&v, _)| m.max(v));
    Ok(ConsistencyReport {
        residual,
        per_vertex,
        masked: keep.iter().map(|&k| !k).collect(),
    })
}

/// The lifted system: the product-space operator, and the isometric
/// embedding that intertwines it with the original operator.
#[derive(Debug, Clone)]
pub struct Extension {
    pub base_space: BlockSpace,
    pub ext_space: BlockSpace,
    /// `(Chat F)_x(w, s) = lambda_x(w) F_phi(x)(w, s)`.
    pub c_hat: LinearMap,
    /// `(Q f)_x(w, s) = f_x(w)`.
    pub embedding: LinearMap,
}

/// Block space over the product atoms, masses `rho(w) theta_x^w({s})`.
pub fn extension_space(spec: &OwcoSpec, theta: &ThetaFamily) -> Result<BlockSpace> {
    theta.matches(spec)?;
    let n_w = spec.n_w();
    let n_s = theta.n_s();
    let mut mass = Vec::with_capacity(spec.n_vertices() * n_w * n_s);
    for x in 0..spec.n_vertices() {
        for w in 0..n_w {
            let rho = spec.base().mass(w);
            for s in 0..n_s {
                mass.push(rho * theta.weight(x, w, s));
            }
        }
    }
    BlockSpace::new(spec.n_vertices(), n_w * n_s, mass)
}

/// Build the lift of a counting-measure system over a verified family.
pub fn build_extension(spec: &OwcoSpec, theta: &ThetaFamily, g: &GTable) -> Result<Extension> {
    theta.matches(spec)?;
    if !spec.is_counting() {
        return Err(Error::Input(
            "the lift is built over counting vertex measure; reduce the system first".into(),
        ));
    }
    if g.n_vertices != spec.n_vertices() || g.n_w != spec.n_w() || g.n_s != theta.n_s() {
        return Err(Error::Shape(
            "density table does not match the system and fiber family".into(),
        ));
    }
    let base_space = spec.space();
    let ext_space = extension_space(spec, theta)?;
    let n_w = spec.n_w();
    let n_s = theta.n_s();
    let phi = spec.graph().phi();

    let mut c_triplets = Vec::new();
    let mut q_triplets = Vec::new();
    for x in 0..spec.n_vertices() {
        for w in 0..n_w {
            let l = spec.lambda(x, w);
            for s in 0..n_s {
                if theta.weight(x, w, s) == 0.0 {
                    continue;
                }
                let row = ext_space.flat(x, w * n_s + s);
                q_triplets.push((row, base_space.flat(x, w), Complex64::new(1.0, 0.0)));
                if l.norm_sqr() != 0.0 {
                    c_triplets.push((row, ext_space.flat(phi[x], w * n_s + s), l));
                }
            }
        }
    }
    let c_hat = LinearMap::from_plain_triplets(ext_space.clone(), ext_space.clone(), &c_triplets)?;
    let embedding =
        LinearMap::from_plain_triplets(base_space.clone(), ext_space.clone(), &q_triplets)?;
    Ok(Extension {
        base_space,
        ext_space,
        c_hat,
        embedding,
    })
}

/// `|| Chat* Chat - M_G ||`. Exact up to rounding on any finite system,
/// truncated or not, because the stored fibers define both sides.
pub fn verify_cstar_c(ext: &Extension, g: &GTable) -> Result<f64> {
    let ctc = ext.c_hat.adjoint().compose(&ext.c_hat)?;
    let m_g = mult_build(&g.as_gamma(), &ext.ext_space)?;
    Ok(ctc.sub(&m_g)?.operator_norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    CertifiedSubnormal,
    RefutedHypotheses,
    NumericalIndeterminate,
}

#[derive(Debug, Clone)]
pub struct SubnormalityCertificate {
    pub verdict: Verdict,
    /// The input carried a nontrivial vertex measure and was reduced.
    pub was_reduced: bool,
    pub conditions: ConditionsReport,
    pub g: Option<GTable>,
    pub consistency: Option<ConsistencyReport>,
    /// Operator norm of the lift.
    pub lift_norm: f64,
    /// `|| Chat Chat*Chat - Chat*Chat Chat ||` over unmasked rows.
    pub quasinormality_defect: Option<f64>,
    pub defect_threshold: f64,
    /// `|| Chat* Chat - M_G ||`, unmasked.
    pub cstarc_residual: Option<f64>,
    /// `|| Q* Q - I ||`.
    pub embedding_isometry_defect: Option<f64>,
    /// `|| Chat Q - Q C ||`.
    pub intertwining_defect: Option<f64>,
    /// Second route: `|| Chat M_sqrt(G) - M_sqrt(G) Chat ||` over unmasked rows.
    pub sqrt_route_commutator: Option<f64>,
    /// The polar-style route and the literal defect land on the same side of
    /// the threshold.
    pub routes_agree: Option<bool>,
    /// Relative mismatch of `<Chat*Chat F, F>` against the direct integral of
    /// `G |F|^2` for one seeded random probe.
    pub probe_residual: Option<f64>,
    pub masked_vertices: Vec<usize>,
    /// The defect and the consistency residual disagree about the verdict.
    pub internal_inconsistency: bool,
    pub tol: f64,
}

/// Full certification pipeline: hypotheses, density table, consistency,
/// lift, quasinormality of the lift, and the embedding identities.
pub fn certify_subnormality(
    spec: &OwcoSpec,
    theta: &ThetaFamily,
    tol: f64,
) -> Result<SubnormalityCertificate> {
    theta.matches(spec)?;
    let was_reduced = !spec.is_counting();
    let work = if was_reduced {
        counting_reduction(spec)
    } else {
        spec.clone()
    };
    let conditions = check_conditions(&work, theta)?;
    if !conditions.satisfied {
        return Ok(SubnormalityCertificate {
            verdict: Verdict::RefutedHypotheses,
            was_reduced,
            conditions,
            g: None,
            consistency: None,
            lift_norm: 0.0,
            quasinormality_defect: None,
            defect_threshold: 0.0,
            cstarc_residual: None,
            embedding_isometry_defect: None,
            intertwining_defect: None,
            sqrt_route_commutator: None,
            routes_agree: None,
            probe_residual: None,
            masked_vertices: Vec::new(),
            internal_inconsistency: false,
            tol,
        });
    }

    let g = density_table(&work, theta, &conditions)?;
    if !g.is_finite() {
        return Err(Error::Numerical(
            "density table contains non-finite values".into(),
        ));
    }
    let consistency = consistency_check(&work, theta, &g)?;
    let ext = build_extension(&work, theta, &g)?;
    let lift_norm = ext.c_hat.operator_norm();
    let keep = unmasked_vertices(&work, &g);
    let masked_vertices: Vec<usize> = keep
        .iter()
        .enumerate()
        .filter(|&(_, &k)| !k)
        .map(|(x, _)| x)
        .collect();

    let ctc = ext.c_hat.adjoint().compose(&ext.c_hat)?;
    let comm_full = ext.c_hat.compose(&ctc)?.sub(&ctc.compose(&ext.c_hat)?)?;
    let quasinormality_defect = comm_full.mask_vertex_rows(&keep)?.operator_norm();
    let defect_threshold = 10.0 * tol * lift_norm.powi(3).max(1.0);

    let cstarc_residual = verify_cstar_c(&ext, &g)?;

    let qtq = ext.embedding.adjoint().compose(&ext.embedding)?;
    let embedding_isometry_defect = qtq
        .sub(&LinearMap::identity(ext.base_space.clone()))?
        .operator_norm();
    let c_base = owco_build(&work);
    let intertwining_defect = ext
        .c_hat
        .compose(&ext.embedding)?
        .sub(&ext.embedding.compose(&c_base)?)?
        .operator_norm();

    let sqrt_gamma: Vec<Complex64> = g
        .values()
        .iter()
        .map(|&v| Complex64::new(v.max(0.0).sqrt(), 0.0))
        .collect();
    let m_sqrt = mult_build(&sqrt_gamma, &ext.ext_space)?;
    let sqrt_route_commutator = ext
        .c_hat
        .compose(&m_sqrt)?
        .sub(&m_sqrt.compose(&ext.c_hat)?)?
        .mask_vertex_rows(&keep)?
        .operator_norm();

    // seeded random probe of the product-space pairing
    let mut rng = ChaCha8Rng::seed_from_u64(2_718_281_828);
    let probe = BlockVector::from_values(
        ext.ext_space.n_vertices(),
        ext.ext_space.n_atoms(),
        (0..ext.ext_space.dim())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect(),
    )?;
    let lhs = weighted_inner(&ext.ext_space, &ctc.apply(&probe)?, &probe)?.re;
    let rhs: f64 = (0..ext.ext_space.dim())
        .map(|i| g.values()[i] * probe.values()[i].norm_sqr() * ext.ext_space.mass_flat(i))
        .sum();
    let probe_residual = (lhs - rhs).abs() / lhs.abs().max(1.0);

    let residual_threshold = tol * lift_norm.powi(2).max(1.0);
    let defect_ok = quasinormality_defect <= defect_threshold;
    let consistency_ok = consistency.residual <= residual_threshold;
    let verdict = match (defect_ok, consistency_ok) {
        (true, true) => Verdict::CertifiedSubnormal,
        (false, false) => Verdict::RefutedHypotheses,
        _ => Verdict::NumericalIndeterminate,
    };
    let routes_agree = Some((sqrt_route_commutator <= defect_threshold) == defect_ok);

    Ok(SubnormalityCertificate {
        verdict,
        was_reduced,
        conditions,
        g: Some(g),
        consistency: Some(consistency),
        lift_norm,
        quasinormality_defect: Some(quasinormality_defect),
        defect_threshold,
        cstarc_residual: Some(cstarc_residual),
        embedding_isometry_defect: Some(embedding_isometry_defect),
        intertwining_defect: Some(intertwining_defect),
        sqrt_route_commutator: Some(sqrt_route_commutator),
        routes_agree,
        probe_residual: Some(probe_residual),
        masked_vertices,
        internal_inconsistency: defect_ok != consistency_ok,
        tol,
    })
}
