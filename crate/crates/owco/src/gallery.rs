//! Named reference systems used across the test suite and the command line.
//!
//! Each entry is small enough to reason about by hand and pins down one
//! behavior: constant density on regular trees, a genuinely `t`-dependent
//! density on the factorial shift, null atoms on a sparse grid, and a shift
//! whose norm sequence fails the Hankel test.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::extension::wco::WcoSystem;
use crate::extension::ThetaFamily;
use crate::graph::FunctionalGraph;
use crate::moments::{recover_atomic_measure, MomentSequence};
use crate::spaces::{DiscreteMeasureSpace, GridMeasure, OwcoSpec};

#[derive(Debug, Clone)]
pub enum GalleryEntry {
    Owco {
        spec: OwcoSpec,
        theta: Option<ThetaFamily>,
    },
    Classical(WcoSystem),
}

/// Regular `k`-ary tree of the given depth with a dead loop at the root.
///
/// Every vertex away from the root carries the identity weight, so the site
/// moments at any interior vertex are `(k |w|^2)^n` and the density table is
/// the constant `k |w|^2`. The leaf fibers are unknown and marked clipped.
pub fn kary(k: usize, depth: usize, moduli_sq: &[f64]) -> Result<(OwcoSpec, ThetaFamily)> {
    if k == 0 || depth == 0 {
        return Err(Error::Input(format!(
            "k-ary tree needs k >= 1 and depth >= 1, got k = {k}, depth = {depth}"
        )));
    }
    if moduli_sq.is_empty() {
        return Err(Error::Input("k-ary tree needs at least one atom".into()));
    }
    for &m in moduli_sq {
        if !m.is_finite() || m <= 0.0 {
            return Err(Error::Input(format!("modulus squared {m} is not positive")));
        }
    }

    let mut phi = vec![0usize];
    let mut level_start = 0usize;
    let mut level_count = 1usize;
    for _ in 0..depth {
        let next_start = level_start + level_count;
        for parent in 0..level_count {
            for _ in 0..k {
                phi.push(level_start + parent);
            }
        }
        level_start = next_start;
        level_count *= k;
    }
    let n = phi.len();
    let incomplete: Vec<bool> = (0..n).map(|x| x >= level_start).collect();
    let graph = FunctionalGraph::truncated(phi, incomplete)?;

    let n_w = moduli_sq.len();
    let payloads: Vec<Complex64> = moduli_sq
        .iter()
        .map(|&m| Complex64::new(m.sqrt(), 0.0))
        .collect();
    let base = DiscreteMeasureSpace::new(payloads.clone(), vec![1.0; n_w])?;
    let mut lambda = vec![Complex64::new(0.0, 0.0); n * n_w];
    for x in 1..n {
        lambda[x * n_w..(x + 1) * n_w].copy_from_slice(&payloads);
    }
    let spec = OwcoSpec::new(graph, base, lambda, None)?;

    let mut grid: Vec<f64> = moduli_sq.iter().map(|&m| k as f64 * m).collect();
    grid.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    let mut rows = Vec::with_capacity(n * n_w);
    for _ in 0..n {
        for &m in moduli_sq {
            let atom = k as f64 * m;
            let weights: Vec<f64> = grid
                .iter()
                .map(|&t| if t == atom { 1.0 } else { 0.0 })
                .collect();
            rows.push(GridMeasure::probability(grid.clone(), weights)?);
        }
    }
    let theta = ThetaFamily::new(n, n_w, rows)?;
    Ok((spec, theta))
}

/// Moment data of the factorial sequence and the measure family it generates
/// along a shift: `theta_l` has moments `(n + l)! / l!`, realized here on the
/// quadrature support recovered from `0!, .., 9!`.
fn factorial_rows(depth: usize) -> Result<(Vec<f64>, Vec<GridMeasure>)> {
    let mut a = vec![1.0f64];
    for n in 1..10 {
        a.push(a[n - 1] * n as f64);
    }
    let rec = recover_atomic_measure(&MomentSequence::new(a)?, 1e-10)?;
    let grid = rec.measure.grid().to_vec();
    let mut weights: Vec<f64> = rec.measure.weights().to_vec();
    let total: f64 = weights.iter().sum();
    for v in &mut weights {
        *v /= total;
    }
    let mut rows = vec![GridMeasure::probability(grid.clone(), weights.clone())?];
    for l in 1..=depth {
        for (v, &t) in weights.iter_mut().zip(&grid) {
            *v *= t / l as f64;
        }
        let total: f64 = weights.iter().sum();
        for v in &mut weights {
            *v /= total;
        }
        rows.push(GridMeasure::probability(grid.clone(), weights.clone())?);
    }
    Ok((grid, rows))
}

fn chain_graph(depth: usize) -> Result<FunctionalGraph> {
    let mut phi = vec![0usize];
    for x in 1..=depth {
        phi.push(x - 1);
    }
    let incomplete: Vec<bool> = (0..=depth).map(|x| x == depth).collect();
    FunctionalGraph::truncated(phi, incomplete)
}

/// Unilateral weighted shift with weights `sqrt(l)`, truncated at `depth`.
///
/// The site moments at the origin are the factorials and the density table is
/// the identity map `t -> t` on the recovered quadrature support, so this is
/// the one gallery entry whose density genuinely depends on `t`.
pub fn shift_factorial(depth: usize) -> Result<(OwcoSpec, ThetaFamily)> {
    if depth == 0 {
        return Err(Error::Input("the shift needs depth >= 1".into()));
    }
    let graph = chain_graph(depth)?;
    let base = DiscreteMeasureSpace::new(vec![Complex64::new(1.0, 0.0)], vec![1.0])?;
    let lambda: Vec<Complex64> = (0..=depth)
        .map(|l| Complex64::new((l as f64).sqrt(), 0.0))
        .collect();
    let spec = OwcoSpec::new(graph, base, lambda, None)?;
    let (_, rows) = factorial_rows(depth)?;
    let theta = ThetaFamily::new(depth + 1, 1, rows)?;
    Ok((spec, theta))
}

/// Two-cycle with `k` pendant vertices hanging off each cycle vertex.
///
/// The moving weights sit on the cycle with conjugate payload values, the
/// pendants carry zero weight, and every vertex shares one sparse measure on
/// a sixteen-point grid; most grid slots are massless, which exercises the
/// null-atom paths of the extension. The system is exact and normal.
pub fn branch_loop(k: usize) -> Result<(OwcoSpec, ThetaFamily)> {
    let n = 2 + 2 * k;
    let mut phi = vec![1usize, 0usize];
    phi.extend(std::iter::repeat(0).take(k));
    phi.extend(std::iter::repeat(1).take(k));
    let graph = FunctionalGraph::new(phi)?;

    let payloads = vec![Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.5)];
    let n_w = payloads.len();
    let base = DiscreteMeasureSpace::new(payloads.clone(), vec![1.0, 2.0])?;
    let mut lambda = vec![Complex64::new(0.0, 0.0); n * n_w];
    lambda[..n_w].copy_from_slice(&payloads);
    for (w, &p) in payloads.iter().enumerate() {
        lambda[n_w + w] = p.conj();
    }
    let spec = OwcoSpec::new(graph, base, lambda, None)?;

    let grid: Vec<f64> = (0..16).map(|i| (2 * i + 1) as f64 / 32.0).collect();
    let mut weights = vec![0.0f64; 16];
    weights[3] = 0.6;
    weights[8] = 0.3;
    weights[13] = 0.1;
    let row = GridMeasure::probability(grid, weights)?;
    let theta = ThetaFamily::constant(n, n_w, row)?;
    Ok((spec, theta))
}

/// Truncated shift whose weight moduli repeat the given pattern. With the
/// pattern `(sqrt 2, 1)` the norm sequence at the origin is
/// `1, 2, 2, 4, 4, ..` which is not a Stieltjes moment sequence.
pub fn periodic_shift(pattern: &[f64], depth: usize) -> Result<OwcoSpec> {
    if pattern.is_empty() || depth == 0 {
        return Err(Error::Input(
            "the periodic shift needs a pattern and depth >= 1".into(),
        ));
    }
    let graph = chain_graph(depth)?;
    let base = DiscreteMeasureSpace::new(vec![Complex64::new(1.0, 0.0)], vec![1.0])?;
    let mut lambda = vec![Complex64::new(0.0, 0.0)];
    for x in 1..=depth {
        lambda.push(Complex64::new(pattern[(x - 1) % pattern.len()], 0.0));
    }
    OwcoSpec::new(graph, base, lambda, None)
}

/// Identity composition with unit weights and unit point masses.
pub fn wco_identity(n: usize) -> Result<WcoSystem> {
    if n == 0 {
        return Err(Error::Input("the identity system needs a vertex".into()));
    }
    let graph = FunctionalGraph::new((0..n).collect())?;
    let q = ThetaFamily::constant(n, 1, GridMeasure::dirac(1.0)?)?;
    WcoSystem::new(graph, vec![Complex64::new(1.0, 0.0); n], None, q)
}

/// The factorial shift as a classical system: weights `sqrt(l)` and the
/// factorial measure family as the per-vertex candidate measures.
pub fn wco_shift(depth: usize) -> Result<WcoSystem> {
    if depth == 0 {
        return Err(Error::Input("the shift needs depth >= 1".into()));
    }
    let graph = chain_graph(depth)?;
    let weights: Vec<Complex64> = (0..=depth)
        .map(|l| Complex64::new((l as f64).sqrt(), 0.0))
        .collect();
    let (_, rows) = factorial_rows(depth)?;
    let q = ThetaFamily::new(depth + 1, 1, rows)?;
    WcoSystem::new(graph, weights, None, q)
}

fn int_param(
    params: &BTreeMap<String, f64>,
    key: &str,
    default: usize,
    allowed: &[&str],
) -> Result<usize> {
    for k in params.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::Input(format!(
                "unknown parameter {k}; this entry takes {}",
                allowed.join(", ")
            )));
        }
    }
    match params.get(key) {
        None => Ok(default),
        Some(&v) => {
            if v.fract() != 0.0 || v < 0.0 || v > usize::MAX as f64 {
                return Err(Error::Input(format!(
                    "parameter {key} must be a nonnegative integer, got {v}"
                )));
            }
            Ok(v as usize)
        }
    }
}

pub const GALLERY_NAMES: [&str; 6] = [
    "kary",
    "shift-factorial",
    "branch-loop",
    "periodic-shift",
    "wco-identity",
    "wco-shift",
];

/// Look up a gallery entry by name with integer parameters.
pub fn by_name(name: &str, params: &BTreeMap<String, f64>) -> Result<GalleryEntry> {
    match name {
        "kary" => {
            let k = int_param(params, "k", 3, &["k", "depth"])?;
            let depth = int_param(params, "depth", 4, &["k", "depth"])?;
            let (spec, theta) = kary(k, depth, &[0.5, 1.0, 2.0])?;
            Ok(GalleryEntry::Owco {
                spec,
                theta: Some(theta),
            })
        }
        "shift-factorial" => {
            let depth = int_param(params, "depth", 6, &["depth"])?;
            let (spec, theta) = shift_factorial(depth)?;
            Ok(GalleryEntry::Owco {
                spec,
                theta: Some(theta),
            })
        }
        "branch-loop" => {
            let k = int_param(params, "k", 3, &["k"])?;
            let (spec, theta) = branch_loop(k)?;
            Ok(GalleryEntry::Owco {
                spec,
                theta: Some(theta),
            })
        }
        "periodic-shift" => {
            let depth = int_param(params, "depth", 8, &["depth"])?;
            let spec = periodic_shift(&[2.0f64.sqrt(), 1.0], depth)?;
            Ok(GalleryEntry::Owco { spec, theta: None })
        }
        "wco-identity" => {
            let n = int_param(params, "n", 3, &["n"])?;
            Ok(GalleryEntry::Classical(wco_identity(n)?))
        }
        "wco-shift" => {
            let depth = int_param(params, "depth", 6, &["depth"])?;
            Ok(GalleryEntry::Classical(wco_shift(depth)?))
        }
        other => Err(Error::Input(format!(
            "unknown gallery entry {other}; available: {}",
            GALLERY_NAMES.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extension::{certify_subnormality, Verdict};
    use crate::moments::owco_moments;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn kary_counts_vertices_and_masks_leaves() {
        let (spec, theta) = kary(2, 3, &[0.5, 1.0, 2.0]).unwrap();
        assert_eq!(spec.n_vertices(), 15);
        assert_eq!(theta.grid(), &[1.0, 2.0, 4.0]);
        // leaves are the last 8 vertices
        for x in 0..15 {
            assert_eq!(spec.graph().is_incomplete(x), x >= 7);
        }
        assert_eq!(spec.graph().phi()[3], 1);
        assert_eq!(spec.graph().phi()[6], 2);
    }

    #[test]
    fn kary_moments_are_exact_powers() {
        for k in 1..=3usize {
            let moduli = [0.5, 1.0, 2.0];
            let (spec, _) = kary(k, 4, &moduli).unwrap();
            for (w, &m2) in moduli.iter().enumerate() {
                let seq = owco_moments(&spec, 0, w, 4).unwrap();
                for (n, &a) in seq.values().iter().enumerate() {
                    let expect = (k as f64 * m2).powi(n as i32);
                    assert_relative_eq!(a, expect, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn kary_certifies_with_constant_density() {
        let (spec, theta) = kary(3, 2, &[0.5, 1.0, 2.0]).unwrap();
        let cert = certify_subnormality(&spec, &theta, 1e-9).unwrap();
        assert_eq!(cert.verdict, Verdict::CertifiedSubnormal);
        assert!(cert.quasinormality_defect.unwrap() <= 1e-10);
        let g = cert.g.as_ref().unwrap();
        for (w, &m2) in [0.5, 1.0, 2.0].iter().enumerate() {
            let atom = theta.grid().iter().position(|&t| t == 3.0 * m2).unwrap();
            for x in 0..4 {
                // root and its children are interior image vertices
                assert_relative_eq!(g.value(x, w, atom), 3.0 * m2, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn factorial_support_matches_the_laguerre_oracle() {
        // five-point Gauss quadrature of exp(-t) dt: the nodes are the roots
        // of the fifth Laguerre polynomial
        let oracle_nodes = [
            0.263560319718141,
            1.413403059106517,
            3.596425771040722,
            7.085810005858837,
            12.640800844275782,
        ];
        let oracle_weights = [
            5.217556105828087e-1,
            3.986668110831759e-1,
            7.594244968170759e-2,
            3.611758679922048e-3,
            2.336997238577623e-5,
        ];
        let (grid, rows) = factorial_rows(3).unwrap();
        assert_eq!(grid.len(), 5);
        for i in 0..5 {
            assert_relative_eq!(grid[i], oracle_nodes[i], max_relative = 1e-8);
            assert_abs_diff_eq!(rows[0].weights()[i], oracle_weights[i], epsilon = 1e-8);
        }
        // theta_l carries the moments (n + l)! / l!
        for (l, row) in rows.iter().enumerate() {
            let expect = match l {
                0 => 1.0, // 1!/0!
                1 => 2.0, // 2!/1!
                2 => 3.0, // 3!/2!
                _ => 4.0, // 4!/3!
            };
            assert_relative_eq!(row.moment(1), expect, max_relative = 1e-7);
        }
    }

    #[test]
    fn shift_factorial_certifies_with_density_t() {
        let (spec, theta) = shift_factorial(4).unwrap();
        let cert = certify_subnormality(&spec, &theta, 1e-9).unwrap();
        assert_eq!(cert.verdict, Verdict::CertifiedSubnormal);
        assert_eq!(cert.masked_vertices, vec![4]);
        let g = cert.g.as_ref().unwrap();
        for x in 0..4 {
            for (s, &t) in theta.grid().iter().enumerate() {
                assert_relative_eq!(g.value(x, 0, s), t, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn branch_loop_is_exactly_normal() {
        let (spec, theta) = branch_loop(3).unwrap();
        assert_eq!(spec.n_vertices(), 8);
        let cert = certify_subnormality(&spec, &theta, 1e-9).unwrap();
        assert_eq!(cert.verdict, Verdict::CertifiedSubnormal);
        assert!(cert.masked_vertices.is_empty());
        assert_eq!(cert.quasinormality_defect.unwrap(), 0.0);
        assert_eq!(cert.consistency.as_ref().unwrap().residual, 0.0);
        // sup G = max |w|^2 = 1 on a unit-modulus cycle
        assert_relative_eq!(cert.lift_norm, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn lookup_dispatches_and_validates() {
        let mut params = BTreeMap::new();
        assert!(matches!(
            by_name("kary", &params).unwrap(),
            GalleryEntry::Owco { theta: Some(_), .. }
        ));
        assert!(matches!(
            by_name("periodic-shift", &params).unwrap(),
            GalleryEntry::Owco { theta: None, .. }
        ));
        assert!(matches!(
            by_name("wco-shift", &params).unwrap(),
            GalleryEntry::Classical(_)
        ));
        assert!(by_name("no-such-entry", &params).is_err());
        params.insert("k".into(), 2.5);
        assert!(by_name("kary", &params).is_err());
        params.clear();
        params.insert("depth".into(), 3.0);
        assert!(by_name("wco-identity", &params).is_err());
    }
}
