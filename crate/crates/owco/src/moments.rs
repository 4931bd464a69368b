//! Moment sequences attached to a composition system, Hankel positivity
//! tests, and recovery of atomic representing measures.
//!
//! For a vertex `x` and atom `w` the sequence is
//! `a_n = sum over y in phi^{-n}(x) of |lambda_y^[n](w)|^2` computed on the
//! counting reduction, so vertex masses enter through the reduced weights.
//! Equivalently `a_n` is the squared norm of the n-th power applied to the
//! normalized indicator of `(x, w)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::operators::owco_build;
use crate::spaces::{counting_reduction, norm_sq, BlockVector, GridMeasure, OwcoSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct MomentSequence {
    values: Vec<f64>,
}

impl MomentSequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Input("empty moment sequence".into()));
        }
        for (n, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Input(format!(
                    "moment {n} = {v} is not a finite nonnegative number"
                )));
            }
        }
        Ok(MomentSequence { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Highest moment order carried, `len() - 1`.
    pub fn order(&self) -> usize {
        self.values.len() - 1
    }
}

/// Bound on the support radius read off from even-moment ratios:
/// `max_n sqrt(a_{2n+2} / a_{2n})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportBound {
    /// `None` when the data gives no finite bound (either too few moments or
    /// a zero even moment followed by a positive one, which no measure can
    /// produce).
    pub value: Option<f64>,
    /// The maximum ratio was attained at the last available pair, so longer
    /// sequences would likely push the bound further up.
    pub growing: bool,
}

pub fn support_bound(moments: &MomentSequence) -> SupportBound {
    let a = moments.values();
    let mut best = f64::NEG_INFINITY;
    let mut best_at = 0usize;
    let mut pairs = 0usize;
    let mut n = 0usize;
    while 2 * n + 2 < a.len() {
        let (lo, hi) = (a[2 * n], a[2 * n + 2]);
        if lo == 0.0 {
            if hi > 0.0 {
                return SupportBound {
                    value: None,
                    growing: false,
                };
            }
            // zero stays zero; the pair bounds nothing but contradicts nothing
        } else {
            let r = (hi / lo).sqrt();
            if r >= best {
                best = r;
                best_at = n;
            }
            pairs += 1;
        }
        n += 1;
    }
    if pairs == 0 {
        if n > 0 {
            // every even moment past a_0 vanishes: the point mass at zero
            return SupportBound {
                value: Some(0.0),
                growing: false,
            };
        }
        return SupportBound {
            value: None,
            growing: false,
        };
    }
    SupportBound {
        value: Some(best),
        growing: best_at + 1 == n,
    }
}

/// Scale used to precondition Hankel matrices: `b_n = a_n / r^n` with `r` the
/// support bound. Rescaling is a diagonal congruence, so positivity verdicts
/// are unchanged while growing sequences stay within floating-point range.
pub fn prescale_factor(moments: &MomentSequence) -> f64 {
    match support_bound(moments).value {
        Some(r) if r > 0.0 && r.is_finite() => r,
        _ => 1.0,
    }
}

fn prescaled(moments: &MomentSequence, r: f64) -> Vec<f64> {
    moments
        .values()
        .iter()
        .enumerate()
        .map(|(n, &v)| v / r.powi(n as i32))
        .collect()
}

fn hankel(b: &[f64], offset: usize, size: usize) -> DMatrix<f64> {
    DMatrix::from_fn(size, size, |i, j| b[i + j + offset])
}

fn eig_range(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = m.clone().symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut scale = 0.0f64;
    for &v in eig.eigenvalues.iter() {
        lo = lo.min(v);
        scale = scale.max(v.abs());
    }
    (lo, scale)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StieltjesVerdict {
    /// Both Hankel blocks are positive semidefinite within tolerance. This is
    /// the necessary condition tested; it is not claimed sufficient for the
    /// truncated problem.
    pub is_stieltjes: bool,
    /// Smallest eigenvalue of the prescaled `(a_{i+j})` block.
    pub min_eig_h0: f64,
    /// Smallest eigenvalue of the prescaled `(a_{i+j+1})` block.
    pub min_eig_h1: f64,
    /// Largest absolute eigenvalues, the scales the minima are judged against.
    pub h0_scale: f64,
    pub h1_scale: f64,
    pub prescale: f64,
    pub support: SupportBound,
    pub tol: f64,
}

/// Hankel positivity test for membership in the Stieltjes moment cone.
/// Needs at least two moments.
pub fn stieltjes_test(moments: &MomentSequence, tol: f64) -> Result<StieltjesVerdict> {
    if moments.len() < 2 {
        return Err(Error::Input(
            "the Hankel test needs at least two moments".into(),
        ));
    }
    let n_top = moments.order();
    let r = prescale_factor(moments);
    let b = prescaled(moments, r);
    let p = n_top / 2 + 1;
    let q = (n_top - 1) / 2 + 1;
    let (min0, scale0) = eig_range(&hankel(&b, 0, p));
    let (min1, scale1) = eig_range(&hankel(&b, 1, q));
    let ok0 = min0 >= -tol * scale0.max(1.0);
    let ok1 = min1 >= -tol * scale1.max(1.0);
    Ok(StieltjesVerdict {
        is_stieltjes: ok0 && ok1,
        min_eig_h0: min0,
        min_eig_h1: min1,
        h0_scale: scale0,
        h1_scale: scale1,
        prescale: r,
        support: support_bound(moments),
        tol,
    })
}

/// Jacobi coefficients from the first `2m` prescaled moments via the moment
/// determinant recursion. `alpha` has length `m`, `beta` likewise with
/// `beta[0] = b_0`; a nonpositive `beta[k]` means the sequence is not a
/// positive moment sequence at depth `k` and is reported as such.
fn jacobi_from_moments(b: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = b.len() / 2;
    debug_assert_eq!(b.len(), 2 * m);
    if b[0] <= 0.0 {
        return Err(Error::NotStieltjes(format!(
            "leading moment {} is not positive",
            b[0]
        )));
    }
    let mut alpha = vec![0.0f64; m];
    let mut beta = vec![0.0f64; m];
    alpha[0] = b[1] / b[0];
    beta[0] = b[0];
    let mut prev = vec![0.0f64; 2 * m]; // row k-2
    let mut cur = b.to_vec(); // row k-1
    for k in 1..m {
        let mut next = vec![0.0f64; 2 * m];
        for l in k..=(2 * m - 1 - k) {
            next[l] = cur[l + 1] - alpha[k - 1] * cur[l] - beta[k - 1] * prev[l];
        }
        let bk = next[k] / cur[k - 1];
        if !bk.is_finite() || bk <= 0.0 {
            return Err(Error::NotStieltjes(format!(
                "Jacobi coefficient beta_{k} = {bk:e} is not positive"
            )));
        }
        beta[k] = bk;
        alpha[k] = next[k + 1] / next[k] - cur[k] / cur[k - 1];
        prev = cur;
        cur = next;
    }
    Ok((alpha, beta))
}

#[derive(Debug, Clone)]
pub struct Recovery {
    /// Recovered atomic measure, atoms ascending. Not normalized; its total
    /// mass approximates `a_0`.
    pub measure: GridMeasure,
    /// Numerical rank of the Hankel block, an atom-count estimate.
    pub rank: usize,
    /// The sequence was too short to place `rank` atoms; the measure is the
    /// Gauss quadrature matching all moments the data does carry.
    pub quadrature_truncated: bool,
    /// Largest relative mismatch when the recovered measure's moments are
    /// compared back against the input.
    pub roundtrip_residual: f64,
}

/// Recover an atomic measure on the nonnegative half line from its moments.
/// Rank detection on the prescaled Hankel block decides the atom count; the
/// atoms and masses come from the eigendecomposition of the Jacobi matrix.
pub fn recover_atomic_measure(moments: &MomentSequence, tol: f64) -> Result<Recovery> {
    if moments.len() < 2 {
        return Err(Error::Input(
            "measure recovery needs at least two moments".into(),
        ));
    }
    let a = moments.values();
    let n_top = moments.order();
    let r = prescale_factor(moments);
    let b = prescaled(moments, r);
    let p = n_top / 2 + 1;

    let eig = hankel(&b, 0, p).symmetric_eigen();
    let mut evals: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    evals.sort_unstable_by(|x, y| y.partial_cmp(x).unwrap());
    let scale = evals.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::Input(
            "cannot recover a measure from the zero moment sequence".into(),
        ));
    }
    let thresh = 10.0 * tol;
    let norm: Vec<f64> = evals.iter().map(|&v| v / scale).collect();
    let rank = norm.iter().filter(|&&v| v > thresh).count();
    if rank == 0 {
        return Err(Error::NotStieltjes(
            "Hankel matrix has no positive eigenvalues".into(),
        ));
    }
    if rank < p {
        let gap = norm[rank - 1] - norm[rank];
        if gap < thresh {
            return Err(Error::IndeterminateRank {
                gap,
                threshold: thresh,
            });
        }
    }

    // the data carries 2m moments for an m-point quadrature
    let m = rank.min(n_top.div_ceil(2));
    let quadrature_truncated = m < rank;

    let (alpha, beta) = jacobi_from_moments(&b[..2 * m])?;
    let j = DMatrix::from_fn(m, m, |i, k| {
        if i == k {
            alpha[i]
        } else if i + 1 == k || k + 1 == i {
            beta[i.max(k)].sqrt()
        } else {
            0.0
        }
    });
    let eig = j.symmetric_eigen();
    let node_tol = tol * r.max(1.0);
    let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(m);
    for i in 0..m {
        let node = eig.eigenvalues[i] * r;
        let weight = beta[0] * eig.eigenvectors[(0, i)].powi(2);
        if node < -node_tol {
            return Err(Error::NotStieltjes(format!(
                "quadrature node {node:e} lies outside the half line"
            )));
        }
        if weight > 0.0 {
            atoms.push((node.max(0.0), weight));
        }
    }
    atoms.sort_unstable_by(|x, y| x.0.partial_cmp(&y.0).unwrap());

    // merge nodes closer than the resolution the arithmetic supports
    let radius = 1e-8 * r.max(1.0);
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    for (t, w) in atoms {
        match merged.last_mut() {
            Some(last) if t - last.0 <= radius => {
                let total = last.1 + w;
                last.0 = (last.0 * last.1 + t * w) / total;
                last.1 = total;
            }
            _ => merged.push((t, w)),
        }
    }
    let (grid, weights): (Vec<f64>, Vec<f64>) = merged.into_iter().unzip();
    let measure = GridMeasure::unnormalized(grid, weights)?;

    let mut residual = 0.0f64;
    for n in 0..=n_top.min(2 * m - 1) {
        let s = measure.moment(n);
        residual = residual.max((s - a[n]).abs() / a[n].abs().max(1.0));
    }
    Ok(Recovery {
        measure,
        rank,
        quadrature_truncated,
        roundtrip_residual: residual,
    })
}

fn check_site(spec: &OwcoSpec, x: usize, w: usize) -> Result<()> {
    if x >= spec.n_vertices() {
        return Err(Error::InvalidVertex {
            index: x,
            count: spec.n_vertices(),
        });
    }
    if w >= spec.n_w() {
        return Err(Error::InvalidAtom {
            index: w,
            count: spec.n_w(),
        });
    }
    Ok(())
}

fn reduced_for_moments(spec: &OwcoSpec) -> std::borrow::Cow<'_, OwcoSpec> {
    if spec.is_counting() {
        std::borrow::Cow::Borrowed(spec)
    } else {
        std::borrow::Cow::Owned(counting_reduction(spec))
    }
}

/// Moments of the system at one site, by walking preimage trees level by
/// level. Zero-weight branches are pruned before the truncation guard fires,
/// so a clipped region only blocks depths whose mass actually reaches it.
pub fn owco_moments(spec: &OwcoSpec, x: usize, w: usize, n_max: usize) -> Result<MomentSequence> {
    check_site(spec, x, w)?;
    let spec = reduced_for_moments(spec);
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(1.0);
    let mut frontier: Vec<(usize, f64)> = vec![(x, 1.0)];
    for depth in 1..=n_max {
        let mut next: Vec<(usize, f64)> = Vec::new();
        let mut acc = 0.0f64;
        for &(y, wgt) in &frontier {
            if spec.graph().is_incomplete(y) {
                return Err(Error::TruncationBoundary {
                    from: x,
                    depth,
                    blocked: y,
                });
            }
            for &z in spec.graph().fiber(y)? {
                let contribution = spec.lambda(z, w).norm_sqr() * wgt;
                if contribution != 0.0 {
                    next.push((z, contribution));
                    acc += contribution;
                }
            }
        }
        out.push(acc);
        frontier = next;
    }
    MomentSequence::new(out)
}

/// Largest depth up to `cap` for which `owco_moments` succeeds at this site.
pub fn available_moment_depth(spec: &OwcoSpec, x: usize, w: usize, cap: usize) -> Result<usize> {
    check_site(spec, x, w)?;
    let spec = reduced_for_moments(spec);
    let mut frontier: Vec<(usize, f64)> = vec![(x, 1.0)];
    for depth in 1..=cap {
        let mut next: Vec<(usize, f64)> = Vec::new();
        for &(y, wgt) in &frontier {
            if spec.graph().is_incomplete(y) {
                return Ok(depth - 1);
            }
            for &z in spec.graph().fiber(y)? {
                let contribution = spec.lambda(z, w).norm_sqr() * wgt;
                if contribution != 0.0 {
                    next.push((z, contribution));
                }
            }
        }
        frontier = next;
    }
    Ok(cap)
}

/// Squared norms `||C^n f||^2` for `n = 0..=n_max`, by literally applying the
/// operator. Serves as the independent oracle for the moment walks.
pub fn lambert_moments(spec: &OwcoSpec, f: &BlockVector, n_max: usize) -> Result<Vec<f64>> {
    let space = spec.space();
    let c = owco_build(spec);
    let mut cur = f.clone();
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(norm_sq(&space, &cur)?);
    for _ in 0..n_max {
        cur = c.apply(&cur)?;
        out.push(norm_sq(&space, &cur)?);
    }
    Ok(out)
}

/// Tables `h^(n)` on the literal finite system, flat `(x, w)` per level, with
/// `||C^n f||^2 = sum over (x, w) of h^(n)_x(w) |f_x(w)|^2 mass(x, w)`. These
/// satisfy the transfer recursion over stored fibers, so they describe the
/// matrix as built, including any clipped boundary.
pub fn moment_table(spec: &OwcoSpec, n_max: usize) -> Result<Vec<Vec<f64>>> {
    let spec = reduced_for_moments(spec);
    let nv = spec.n_vertices();
    let n_w = spec.n_w();
    let mut levels: Vec<Vec<f64>> = Vec::with_capacity(n_max + 1);
    levels.push(vec![1.0; nv * n_w]);
    for _ in 1..=n_max {
        let prev = levels.last().unwrap();
        let mut next = vec![0.0f64; nv * n_w];
        for x in 0..nv {
            for &y in spec.graph().fiber(x)? {
                for w in 0..n_w {
                    next[x * n_w + w] += spec.lambda(y, w).norm_sqr() * prev[y * n_w + w];
                }
            }
        }
        levels.push(next);
    }
    Ok(levels)
}
