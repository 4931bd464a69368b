//! Weighted discrete measure spaces and the block vectors living on them.
//!
//! A system couples a functional graph with one atomic measure space `W` that
//! is shared by all vertices; the Hilbert space over vertex `x` is the
//! weighted l2 space of functions on the atoms of `W`, scaled by an optional
//! vertex mass. Product spaces over `W x S` (with `S` a grid on the
//! nonnegative reals) may carry zero-mass atoms; those are kept as structural
//! atoms so that all vertices index the same product grid, and everything
//! downstream treats them as negligible.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::graph::FunctionalGraph;

/// Tolerance on probability normalization checks.
pub const PROBABILITY_TOL: f64 = 1e-12;

/// Finite atomic measure space with strictly positive atom masses. Atoms
/// carry a complex payload (the point of the underlying set they stand for).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasureSpace {
    payloads: Vec<Complex64>,
    masses: Vec<f64>,
}

impl DiscreteMeasureSpace {
    pub fn new(payloads: Vec<Complex64>, masses: Vec<f64>) -> Result<Self> {
        if payloads.len() != masses.len() {
            return Err(Error::Shape(format!(
                "{} payloads vs {} masses",
                payloads.len(),
                masses.len()
            )));
        }
        if payloads.is_empty() {
            return Err(Error::Input("measure space needs at least one atom".into()));
        }
        for (i, &m) in masses.iter().enumerate() {
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::Input(format!(
                    "atom {i} has mass {m}, expected a strictly positive finite value"
                )));
            }
        }
        Ok(DiscreteMeasureSpace { payloads, masses })
    }

    /// Counting measure on `n` atoms with payloads `0, 1, .., n-1`.
    pub fn counting(n: usize) -> Self {
        DiscreteMeasureSpace {
            payloads: (0..n).map(|i| Complex64::new(i as f64, 0.0)).collect(),
            masses: vec![1.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn payload(&self, i: usize) -> Complex64 {
        self.payloads[i]
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.masses[i]
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }
}

/// Atomic measure on a finite grid in the nonnegative reals. The grid is
/// strictly increasing; weights are nonnegative. `normalized` records whether
/// the measure passed the probability check when it was built.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    grid: Vec<f64>,
    weights: Vec<f64>,
    normalized: bool,
}

impl GridMeasure {
    fn validate(grid: &[f64], weights: &[f64]) -> Result<()> {
        if grid.len() != weights.len() {
            return Err(Error::Shape(format!(
                "grid has {} points, weights {}",
                grid.len(),
                weights.len()
            )));
        }
        for (i, &t) in grid.iter().enumerate() {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::Input(format!(
                    "grid point {i} is {t}, expected finite and nonnegative"
                )));
            }
            if i > 0 && grid[i - 1] >= t {
                return Err(Error::Input(format!(
                    "grid is not strictly increasing at index {i}"
                )));
            }
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Input(format!(
                    "weight {i} is {w}, expected finite and nonnegative"
                )));
            }
        }
        Ok(())
    }

    /// Probability measure: weights must sum to 1 within [`PROBABILITY_TOL`].
    pub fn probability(grid: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::validate(&grid, &weights)?;
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_TOL {
            return Err(Error::NotProbability {
                what: "grid measure".into(),
                sum,
                tol: PROBABILITY_TOL,
            });
        }
        Ok(GridMeasure {
            grid,
            weights,
            normalized: true,
        })
    }

    /// Measure with arbitrary total mass; flagged as not normalized unless
    /// the weights happen to sum to 1 within [`PROBABILITY_TOL`].
    pub fn unnormalized(grid: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::validate(&grid, &weights)?;
        let sum: f64 = weights.iter().sum();
        Ok(GridMeasure {
            normalized: (sum - 1.0).abs() <= PROBABILITY_TOL,
            grid,
            weights,
        })
    }

    pub fn dirac(t: f64) -> Result<Self> {
        Self::probability(vec![t], vec![1.0])
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// k-th power moment `sum_j t_j^k w_j`.
    pub fn moment(&self, k: usize) -> f64 {
        self.grid
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| t.powi(k as i32) * w)
            .sum()
    }

    /// Atoms with strictly positive weight.
    pub fn support(&self) -> Vec<f64> {
        self.grid
            .iter()
            .zip(&self.weights)
            .filter(|&(_, &w)| w > 0.0)
            .map(|(&t, _)| t)
            .collect()
    }
}

/// Product of a base space `W` with a grid `S`, one measure per `W`-atom:
/// the mass of the pair `(w, s)` is `rho(w) * theta_w({s})`. Zero-mass pairs
/// are retained as structural atoms and flagged null.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductMeasure {
    n_w: usize,
    grid: Vec<f64>,
    masses: Vec<f64>, // flat, w-major: [w * grid.len() + s]
}

impl ProductMeasure {
    pub fn n_w(&self) -> usize {
        self.n_w
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn n_s(&self) -> usize {
        self.grid.len()
    }

    pub fn mass(&self, w: usize, s: usize) -> f64 {
        self.masses[w * self.grid.len() + s]
    }

    pub fn is_null(&self, w: usize, s: usize) -> bool {
        self.mass(w, s) == 0.0
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }
}

/// Product measure over `W x S` from a base space and one grid measure per
/// base atom. All measures must share one grid.
pub fn product_measure(
    base: &DiscreteMeasureSpace,
    rows: &[GridMeasure],
) -> Result<ProductMeasure> {
    if rows.len() != base.len() {
        return Err(Error::Shape(format!(
            "{} grid measures for a base space with {} atoms",
            rows.len(),
            base.len()
        )));
    }
    let grid = rows[0].grid().to_vec();
    for (w, row) in rows.iter().enumerate() {
        if row.grid() != grid.as_slice() {
            return Err(Error::Input(format!(
                "grid measure for atom {w} lives on a different grid"
            )));
        }
    }
    let n_s = grid.len();
    let mut masses = vec![0.0; base.len() * n_s];
    for w in 0..base.len() {
        for s in 0..n_s {
            masses[w * n_s + s] = base.mass(w) * rows[w].weights()[s];
        }
    }
    Ok(ProductMeasure {
        n_w: base.len(),
        grid,
        masses,
    })
}

/// Weighted direct sum of identical-shape atom spaces over the vertices of a
/// graph: effective mass of `(x, a)` is stored flat. Zero mass marks a null
/// atom; vectors and operators are compared and applied modulo null atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpace {
    n_vertices: usize,
    n_atoms: usize,
    mass: Vec<f64>, // flat [x * n_atoms + a]
}

impl BlockSpace {
    pub fn new(n_vertices: usize, n_atoms: usize, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != n_vertices * n_atoms {
            return Err(Error::Shape(format!(
                "mass vector of length {} for {} vertices x {} atoms",
                mass.len(),
                n_vertices,
                n_atoms
            )));
        }
        for (i, &m) in mass.iter().enumerate() {
            if !m.is_finite() || m < 0.0 {
                return Err(Error::Input(format!(
                    "effective mass {m} at flat index {i}, expected finite and nonnegative"
                )));
            }
        }
        Ok(BlockSpace {
            n_vertices,
            n_atoms,
            mass,
        })
    }

    /// Same atom masses on every vertex, scaled per vertex.
    pub fn uniform(n_vertices: usize, atom_masses: &[f64], vertex_mass: &[f64]) -> Result<Self> {
        if vertex_mass.len() != n_vertices {
            return Err(Error::Shape(format!(
                "{} vertex masses for {} vertices",
                vertex_mass.len(),
                n_vertices
            )));
        }
        let mut mass = Vec::with_capacity(n_vertices * atom_masses.len());
        for &mu in vertex_mass {
            for &rho in atom_masses {
                mass.push(mu * rho);
            }
        }
        Self::new(n_vertices, atom_masses.len(), mass)
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    pub fn flat(&self, x: usize, a: usize) -> usize {
        x * self.n_atoms + a
    }

    pub fn mass(&self, x: usize, a: usize) -> f64 {
        self.mass[self.flat(x, a)]
    }

    pub fn mass_flat(&self, i: usize) -> f64 {
        self.mass[i]
    }

    pub fn is_null(&self, x: usize, a: usize) -> bool {
        self.mass(x, a) == 0.0
    }
}

/// Element of the direct sum: one complex value per `(vertex, atom)` slot.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    n_vertices: usize,
    n_atoms: usize,
    values: Vec<Complex64>,
}

impl BlockVector {
    pub fn zeros(n_vertices: usize, n_atoms: usize) -> Self {
        BlockVector {
            n_vertices,
            n_atoms,
            values: vec![Complex64::new(0.0, 0.0); n_vertices * n_atoms],
        }
    }

    pub fn from_values(n_vertices: usize, n_atoms: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != n_vertices * n_atoms {
            return Err(Error::Shape(format!(
                "value vector of length {} for {} x {} slots",
                values.len(),
                n_vertices,
                n_atoms
            )));
        }
        Ok(BlockVector {
            n_vertices,
            n_atoms,
            values,
        })
    }

    /// Indicator of a single `(vertex, atom)` slot.
    pub fn indicator(n_vertices: usize, n_atoms: usize, x: usize, a: usize) -> Self {
        let mut v = Self::zeros(n_vertices, n_atoms);
        v.values[x * n_atoms + a] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn value(&self, x: usize, a: usize) -> Complex64 {
        self.values[x * self.n_atoms + a]
    }

    pub fn set(&mut self, x: usize, a: usize, v: Complex64) {
        self.values[x * self.n_atoms + a] = v;
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn matches(&self, space: &BlockSpace) -> bool {
        self.n_vertices == space.n_vertices() && self.n_atoms == space.n_atoms()
    }
}

/// Mass-weighted inner product `sum_i m_i f_i conj(g_i)`. Null atoms
/// contribute nothing, whatever values sit there.
pub fn weighted_inner(space: &BlockSpace, f: &BlockVector, g: &BlockVector) -> Result<Complex64> {
    if !f.matches(space) || !g.matches(space) {
        return Err(Error::Shape(
            "vector shape does not match the block space".into(),
        ));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..space.dim() {
        let m = space.mass_flat(i);
        if m != 0.0 {
            acc += m * f.values[i] * g.values[i].conj();
        }
    }
    Ok(acc)
}

pub fn norm_sq(space: &BlockSpace, f: &BlockVector) -> Result<f64> {
    Ok(weighted_inner(space, f, f)?.re)
}

/// Full description of an operator-weighted composition operator at atomic
/// scale: graph, shared base space `W`, operator weights given pointwise as
/// `lambda_x(w)`, and an optional vertex measure.
#[derive(Debug, Clone, PartialEq)]
pub struct OwcoSpec {
    graph: FunctionalGraph,
    base: DiscreteMeasureSpace,
    lambda: Vec<Complex64>, // flat [x * n_w + w]
    vertex_mass: Vec<f64>,
}

impl OwcoSpec {
    pub fn new(
        graph: FunctionalGraph,
        base: DiscreteMeasureSpace,
        lambda: Vec<Complex64>,
        vertex_mass: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = graph.vertex_count();
        let n_w = base.len();
        if lambda.len() != n * n_w {
            return Err(Error::Shape(format!(
                "lambda table of length {} for {} vertices x {} atoms",
                lambda.len(),
                n,
                n_w
            )));
        }
        for (i, l) in lambda.iter().enumerate() {
            if !l.re.is_finite() || !l.im.is_finite() {
                return Err(Error::Input(format!(
                    "lambda at flat index {i} is not finite"
                )));
            }
        }
        let vertex_mass = vertex_mass.unwrap_or_else(|| vec![1.0; n]);
        if vertex_mass.len() != n {
            return Err(Error::Shape(format!(
                "{} vertex masses for {} vertices",
                vertex_mass.len(),
                n
            )));
        }
        for (x, &m) in vertex_mass.iter().enumerate() {
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::Input(format!(
                    "vertex {x} has mass {m}, expected strictly positive and finite"
                )));
            }
        }
        Ok(OwcoSpec {
            graph,
            base,
            lambda,
            vertex_mass,
        })
    }

    pub fn graph(&self) -> &FunctionalGraph {
        &self.graph
    }

    pub fn base(&self) -> &DiscreteMeasureSpace {
        &self.base
    }

    pub fn n_vertices(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn n_w(&self) -> usize {
        self.base.len()
    }

    pub fn lambda(&self, x: usize, w: usize) -> Complex64 {
        self.lambda[x * self.base.len() + w]
    }

    pub fn lambda_table(&self) -> &[Complex64] {
        &self.lambda
    }

    pub fn vertex_mass(&self) -> &[f64] {
        &self.vertex_mass
    }

    pub fn is_counting(&self) -> bool {
        self.vertex_mass.iter().all(|&m| m == 1.0)
    }

    /// Space the operator acts on: effective mass `mu_x * rho_w`.
    pub fn space(&self) -> BlockSpace {
        BlockSpace::uniform(self.n_vertices(), self.base.masses(), &self.vertex_mass)
            .expect("spec dimensions are validated at construction")
    }
}

/// Rescale the weights so the vertex measure becomes counting measure:
/// `lambda'_x(w) = sqrt(mu_x / mu_phi(x)) * lambda_x(w)`. The rescaled system
/// is unitarily equivalent to the original via the diagonal map
/// `(Uf)_x = sqrt(mu_x) f_x`.
pub fn counting_reduction(spec: &OwcoSpec) -> OwcoSpec {
    let n = spec.n_vertices();
    let n_w = spec.n_w();
    let mut lambda = Vec::with_capacity(n * n_w);
    for x in 0..n {
        let y = spec.graph.phi()[x];
        let scale = (spec.vertex_mass[x] / spec.vertex_mass[y]).sqrt();
        for w in 0..n_w {
            lambda.push(scale * spec.lambda(x, w));
        }
    }
    OwcoSpec {
        graph: spec.graph.clone(),
        base: spec.base.clone(),
        lambda,
        vertex_mass: vec![1.0; n],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn weighted_inner_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, k) = (4, 3);
        let mass: Vec<f64> = (0..n * k).map(|_| rng.gen_range(0.0..2.0)).collect();
        let space = BlockSpace::new(n, k, mass.clone()).unwrap();
        let rand_vec = |rng: &mut ChaCha8Rng| {
            BlockVector::from_values(
                n,
                k,
                (0..n * k)
                    .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect(),
            )
            .unwrap()
        };
        let f = rand_vec(&mut rng);
        let g = rand_vec(&mut rng);
        let mut expect = c(0.0, 0.0);
        for i in 0..n * k {
            expect += mass[i] * f.values()[i] * g.values()[i].conj();
        }
        let got = weighted_inner(&space, &f, &g).unwrap();
        assert_relative_eq!(got.re, expect.re, max_relative = 1e-14);
        assert_relative_eq!(got.im, expect.im, max_relative = 1e-14);
    }

    #[test]
    fn indicator_inner_product_uses_effective_mass() {
        // atom mass 0.25, vertex mass 2 -> <f, f> = 0.5
        let space = BlockSpace::uniform(2, &[0.25, 1.0], &[2.0, 1.0]).unwrap();
        let f = BlockVector::indicator(2, 2, 0, 0);
        assert_abs_diff_eq!(norm_sq(&space, &f).unwrap(), 0.5);
    }

    #[test]
    fn null_atoms_do_not_contribute() {
        let space = BlockSpace::new(1, 2, vec![0.0, 1.0]).unwrap();
        let mut f = BlockVector::zeros(1, 2);
        f.set(0, 0, c(7.0, -3.0)); // sits on a null atom
        f.set(0, 1, c(2.0, 0.0));
        assert_abs_diff_eq!(norm_sq(&space, &f).unwrap(), 4.0);
        assert!(space.is_null(0, 0));
    }

    #[test]
    fn counting_reduction_identity_masses() {
        let graph = FunctionalGraph::new(vec![0, 0, 1]).unwrap();
        let base = DiscreteMeasureSpace::counting(2);
        let lambda: Vec<Complex64> = (0..6).map(|i| c(i as f64, 0.0)).collect();
        let spec = OwcoSpec::new(graph, base, lambda.clone(), None).unwrap();
        let reduced = counting_reduction(&spec);
        assert_eq!(reduced.lambda_table(), lambda.as_slice());
        // applying it twice changes nothing further
        assert_eq!(counting_reduction(&reduced), reduced);
    }

    #[test]
    fn counting_reduction_two_vertex_swap() {
        // mu = (1, 4), phi swaps the vertices:
        // lambda'_0 = sqrt(1/4) lambda_0, lambda'_1 = sqrt(4/1) lambda_1
        let graph = FunctionalGraph::new(vec![1, 0]).unwrap();
        let base = DiscreteMeasureSpace::new(vec![c(1.0, 0.0)], vec![1.0]).unwrap();
        let spec = OwcoSpec::new(
            graph,
            base,
            vec![c(1.0, 0.0), c(1.0, 0.0)],
            Some(vec![1.0, 4.0]),
        )
        .unwrap();
        let reduced = counting_reduction(&spec);
        assert_abs_diff_eq!(reduced.lambda(0, 0).re, 0.5);
        assert_abs_diff_eq!(reduced.lambda(1, 0).re, 2.0);
        assert!(reduced.is_counting());
    }

    #[test]
    fn product_measure_single_dirac() {
        let base = DiscreteMeasureSpace::new(vec![c(1.0, 0.0)], vec![1.0]).unwrap();
        let rows = vec![GridMeasure::dirac(6.0).unwrap()];
        let p = product_measure(&base, &rows).unwrap();
        assert_eq!(p.n_s(), 1);
        assert_abs_diff_eq!(p.mass(0, 0), 1.0);
        assert_abs_diff_eq!(p.total_mass(), 1.0);
    }

    #[test]
    fn product_measure_mixed_supports() {
        // rho = (1, 2); theta_0 = uniform on {1, 3}, theta_1 = point mass at 3
        let base =
            DiscreteMeasureSpace::new(vec![c(1.0, 0.0), c(2.0, 0.0)], vec![1.0, 2.0]).unwrap();
        let rows = vec![
            GridMeasure::probability(vec![1.0, 3.0], vec![0.5, 0.5]).unwrap(),
            GridMeasure::probability(vec![1.0, 3.0], vec![0.0, 1.0]).unwrap(),
        ];
        let p = product_measure(&base, &rows).unwrap();
        assert_abs_diff_eq!(p.mass(0, 0), 0.5);
        assert_abs_diff_eq!(p.mass(0, 1), 0.5);
        assert_abs_diff_eq!(p.mass(1, 0), 0.0);
        assert!(p.is_null(1, 0));
        assert_abs_diff_eq!(p.mass(1, 1), 2.0);
        // total mass equals rho(W)
        assert_abs_diff_eq!(p.total_mass(), base.total_mass(), epsilon = 1e-13);
    }

    #[test]
    fn product_measure_fubini_identity() {
        // integrating F against the product equals iterated integration
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n_w = 3;
        let grid = vec![0.5, 1.0, 2.0, 4.0];
        let base = DiscreteMeasureSpace::new(
            (0..n_w).map(|i| c(i as f64, 0.0)).collect(),
            (0..n_w).map(|_| rng.gen_range(0.1..2.0)).collect(),
        )
        .unwrap();
        let rows: Vec<GridMeasure> = (0..n_w)
            .map(|_| {
                let mut w: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
                let s: f64 = w.iter().sum();
                w.iter_mut().for_each(|v| *v /= s);
                GridMeasure::probability(grid.clone(), w).unwrap()
            })
            .collect();
        let p = product_measure(&base, &rows).unwrap();
        let f: Vec<f64> = (0..n_w * grid.len())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let direct: f64 = (0..n_w * grid.len()).map(|i| f[i] * p.masses()[i]).sum();
        let iterated: f64 = (0..n_w)
            .map(|w| {
                let inner: f64 = (0..grid.len())
                    .map(|s| f[w * grid.len() + s] * rows[w].weights()[s])
                    .sum();
                base.mass(w) * inner
            })
            .sum();
        assert_relative_eq!(direct, iterated, max_relative = 1e-13);
    }

    #[test]
    fn grid_measure_validation() {
        assert!(GridMeasure::probability(vec![1.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(GridMeasure::probability(vec![-1.0], vec![1.0]).is_err());
        assert!(matches!(
            GridMeasure::probability(vec![1.0, 2.0], vec![0.5, 0.4]),
            Err(Error::NotProbability { .. })
        ));
        let m = GridMeasure::unnormalized(vec![1.0, 2.0], vec![0.5, 0.4]).unwrap();
        assert!(!m.is_normalized());
        assert_abs_diff_eq!(m.total_mass(), 0.9);
        assert_abs_diff_eq!(m.moment(1), 1.3);
        assert_eq!(m.support(), vec![1.0, 2.0]);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let base = DiscreteMeasureSpace::counting(2);
        let rows = vec![
            GridMeasure::dirac(1.0).unwrap(),
            GridMeasure::dirac(2.0).unwrap(),
        ];
        assert!(product_measure(&base, &rows).is_err());
    }
}
