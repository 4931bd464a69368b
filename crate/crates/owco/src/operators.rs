//! Sparse linear maps between weighted block spaces, and the composition
//! operators built on them.
//!
//! Internally a map is stored in mass-isometric coordinates: the entry kept
//! for `(i, j)` is `sqrt(m_cod(i)) * a_ij / sqrt(m_dom(j))`. In these
//! coordinates the weighted adjoint is the plain conjugate transpose (so the
//! adjoint is an exact involution on stored data), operator norms are plain
//! spectral norms, and null atoms carry no entries at all. Accessors translate
//! back to plain matrix entries.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spaces::{BlockSpace, BlockVector, OwcoSpec};

/// Eigenvalues of a positive semidefinite product below this fraction of the
/// largest one are clamped to zero before taking square roots.
pub const PSD_CLAMP: f64 = 1e-13;
/// Singular values below this fraction of the largest one are dropped when
/// forming pseudoinverses.
pub const PINV_CUT: f64 = 1e-10;

type Row = Vec<(usize, Complex64)>;

#[derive(Debug, Clone)]
pub struct LinearMap {
    domain: BlockSpace,
    codomain: BlockSpace,
    rows: Vec<Row>, // mass-isometric entries, each row sorted by column
}

fn is_zero(z: Complex64) -> bool {
    z.re == 0.0 && z.im == 0.0
}

impl LinearMap {
    fn from_iso_rows(domain: BlockSpace, codomain: BlockSpace, mut rows: Vec<Row>) -> Self {
        for row in &mut rows {
            row.retain(|&(_, v)| !is_zero(v));
            row.sort_unstable_by_key(|&(c, _)| c);
        }
        LinearMap {
            domain,
            codomain,
            rows,
        }
    }

    pub fn zeros(domain: BlockSpace, codomain: BlockSpace) -> Self {
        let rows = vec![Vec::new(); codomain.dim()];
        LinearMap {
            domain,
            codomain,
            rows,
        }
    }

    /// Identity on a space (zero on its null atoms).
    pub fn identity(space: BlockSpace) -> Self {
        let rows = (0..space.dim())
            .map(|i| {
                if space.mass_flat(i) == 0.0 {
                    Vec::new()
                } else {
                    vec![(i, Complex64::new(1.0, 0.0))]
                }
            })
            .collect();
        LinearMap {
            domain: space.clone(),
            codomain: space,
            rows,
        }
    }

    /// Build from plain entries `(codomain flat index, domain flat index,
    /// value)`. A nonzero entry touching a zero-mass atom is rejected.
    pub fn from_plain_triplets(
        domain: BlockSpace,
        codomain: BlockSpace,
        triplets: &[(usize, usize, Complex64)],
    ) -> Result<Self> {
        let mut rows: Vec<Row> = vec![Vec::new(); codomain.dim()];
        for &(i, j, a) in triplets {
            if i >= codomain.dim() || j >= domain.dim() {
                return Err(Error::Shape(format!(
                    "entry ({i}, {j}) outside a {} x {} map",
                    codomain.dim(),
                    domain.dim()
                )));
            }
            if is_zero(a) {
                continue;
            }
            let mc = codomain.mass_flat(i);
            let md = domain.mass_flat(j);
            if mc == 0.0 || md == 0.0 {
                return Err(Error::NullAtom(format!(
                    "entry ({i}, {j}) = {a} maps through a zero-mass atom"
                )));
            }
            rows[i].push((j, a * (mc / md).sqrt()));
        }
        Ok(Self::from_iso_rows(domain, codomain, rows))
    }

    pub fn domain(&self) -> &BlockSpace {
        &self.domain
    }

    pub fn codomain(&self) -> &BlockSpace {
        &self.codomain
    }

    /// Plain matrix entry at `(codomain flat index, domain flat index)`.
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        let b = self.rows[i]
            .iter()
            .find(|&&(c, _)| c == j)
            .map(|&(_, v)| v)
            .unwrap_or_else(|| Complex64::new(0.0, 0.0));
        if is_zero(b) {
            return b;
        }
        b * (self.domain.mass_flat(j) / self.codomain.mass_flat(i)).sqrt()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn is_endomorphism(&self) -> bool {
        self.domain == self.codomain
    }

    pub fn apply(&self, f: &BlockVector) -> Result<BlockVector> {
        if !f.matches(&self.domain) {
            return Err(Error::Shape(
                "vector shape does not match the map's domain".into(),
            ));
        }
        let iso: Vec<Complex64> = f
            .values()
            .iter()
            .enumerate()
            .map(|(j, &v)| v * self.domain.mass_flat(j).sqrt())
            .collect();
        let mut out = vec![Complex64::new(0.0, 0.0); self.codomain.dim()];
        for (i, row) in self.rows.iter().enumerate() {
            if row.is_empty() {
                continue;
            }
            let mut acc = Complex64::new(0.0, 0.0);
            for &(j, b) in row {
                acc += b * iso[j];
            }
            out[i] = acc / self.codomain.mass_flat(i).sqrt();
        }
        BlockVector::from_values(self.codomain.n_vertices(), self.codomain.n_atoms(), out)
    }

    /// Matrix product `self o rhs` (apply `rhs` first).
    pub fn compose(&self, rhs: &LinearMap) -> Result<LinearMap> {
        if rhs.codomain != self.domain {
            return Err(Error::Shape("compose: inner spaces do not match".into()));
        }
        let mut rows: Vec<Row> = Vec::with_capacity(self.rows.len());
        for row in &self.rows {
            let mut acc: std::collections::BTreeMap<usize, Complex64> = Default::default();
            for &(k, b) in row {
                for &(j, c) in &rhs.rows[k] {
                    *acc.entry(j).or_insert_with(|| Complex64::new(0.0, 0.0)) += b * c;
                }
            }
            rows.push(acc.into_iter().collect());
        }
        Ok(Self::from_iso_rows(
            rhs.domain.clone(),
            self.codomain.clone(),
            rows,
        ))
    }

    fn combine(&self, rhs: &LinearMap, sign: f64) -> Result<LinearMap> {
        if self.domain != rhs.domain || self.codomain != rhs.codomain {
            return Err(Error::Shape("add/sub: spaces do not match".into()));
        }
        let mut rows: Vec<Row> = Vec::with_capacity(self.rows.len());
        for (a, b) in self.rows.iter().zip(&rhs.rows) {
            let mut acc: std::collections::BTreeMap<usize, Complex64> = Default::default();
            for &(j, v) in a {
                *acc.entry(j).or_insert_with(|| Complex64::new(0.0, 0.0)) += v;
            }
            for &(j, v) in b {
                *acc.entry(j).or_insert_with(|| Complex64::new(0.0, 0.0)) += sign * v;
            }
            rows.push(acc.into_iter().collect());
        }
        Ok(Self::from_iso_rows(
            self.domain.clone(),
            self.codomain.clone(),
            rows,
        ))
    }

    pub fn add(&self, rhs: &LinearMap) -> Result<LinearMap> {
        self.combine(rhs, 1.0)
    }

    pub fn sub(&self, rhs: &LinearMap) -> Result<LinearMap> {
        self.combine(rhs, -1.0)
    }

    pub fn scale(&self, s: Complex64) -> LinearMap {
        let rows = self
            .rows
            .iter()
            .map(|row| row.iter().map(|&(j, v)| (j, s * v)).collect())
            .collect();
        Self::from_iso_rows(self.domain.clone(), self.codomain.clone(), rows)
    }

    /// Adjoint with respect to the weighted inner products. Exact involution:
    /// in mass-isometric coordinates this is the conjugate transpose.
    pub fn adjoint(&self) -> LinearMap {
        let mut rows: Vec<Row> = vec![Vec::new(); self.domain.dim()];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, b) in row {
                rows[j].push((i, b.conj()));
            }
        }
        Self::from_iso_rows(self.codomain.clone(), self.domain.clone(), rows)
    }

    /// Zero out all rows belonging to vertices with `keep[x] == false`.
    pub fn mask_vertex_rows(&self, keep: &[bool]) -> Result<LinearMap> {
        if keep.len() != self.codomain.n_vertices() {
            return Err(Error::Shape(
                "mask length does not match the codomain vertex count".into(),
            ));
        }
        let n_atoms = self.codomain.n_atoms();
        let rows = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                if keep[i / n_atoms] {
                    row.clone()
                } else {
                    Vec::new()
                }
            })
            .collect();
        Ok(Self::from_iso_rows(
            self.domain.clone(),
            self.codomain.clone(),
            rows,
        ))
    }

    /// Mass-isometric dense form (plain spectral norm of this matrix equals
    /// the weighted operator norm of the map).
    pub fn to_dense_iso(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::from_element(
            self.codomain.dim(),
            self.domain.dim(),
            Complex64::new(0.0, 0.0),
        );
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, b) in row {
                m[(i, j)] = b;
            }
        }
        m
    }

    /// Weighted operator norm. Maps with at most one entry per row (or per
    /// column) get a closed form; everything else goes through dense singular
    /// values.
    pub fn operator_norm(&self) -> f64 {
        if self.rows.iter().all(|r| r.len() <= 1) {
            let mut acc = vec![0.0f64; self.domain.dim()];
            for row in &self.rows {
                if let Some(&(j, b)) = row.first() {
                    acc[j] += b.norm_sqr();
                }
            }
            return acc.iter().fold(0.0f64, |m, &v| m.max(v)).sqrt();
        }
        let mut per_col = vec![0usize; self.domain.dim()];
        let mut col_ok = true;
        'outer: for row in &self.rows {
            for &(j, _) in row {
                per_col[j] += 1;
                if per_col[j] > 1 {
                    col_ok = false;
                    break 'outer;
                }
            }
        }
        if col_ok {
            let mut best = 0.0f64;
            for row in &self.rows {
                let s: f64 = row.iter().map(|&(_, b)| b.norm_sqr()).sum();
                best = best.max(s);
            }
            return best.sqrt();
        }
        dense_norm(&self.to_dense_iso())
    }
}

pub(crate) fn dense_norm(m: &DMatrix<Complex64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.singular_values().iter().fold(0.0f64, |a, &s| a.max(s))
}

/// Composition operator of a spec: `(Cf)_x(w) = lambda_x(w) f_{phi(x)}(w)`.
pub fn owco_build(spec: &OwcoSpec) -> LinearMap {
    let space = spec.space();
    let n_w = spec.n_w();
    let phi = spec.graph().phi();
    let mut rows: Vec<Row> = Vec::with_capacity(space.dim());
    for x in 0..spec.n_vertices() {
        let y = phi[x];
        for w in 0..n_w {
            let l = spec.lambda(x, w);
            if is_zero(l) {
                rows.push(Vec::new());
            } else {
                // masses share the rho(w) factor, so the ratio is mu_x / mu_y
                let b = l * (space.mass(x, w) / space.mass(y, w)).sqrt();
                rows.push(vec![(space.flat(y, w), b)]);
            }
        }
    }
    LinearMap::from_iso_rows(space.clone(), space, rows)
}

/// Diagonal multiplication operator `(M f)_x(w) = gamma_x(w) f_x(w)`.
/// Values supplied at null atoms are ignored; the operator vanishes there.
pub fn mult_build(gamma: &[Complex64], space: &BlockSpace) -> Result<LinearMap> {
    if gamma.len() != space.dim() {
        return Err(Error::Shape(format!(
            "gamma table of length {} on a space of dimension {}",
            gamma.len(),
            space.dim()
        )));
    }
    let rows = (0..space.dim())
        .map(|i| {
            if space.mass_flat(i) == 0.0 || is_zero(gamma[i]) {
                Vec::new()
            } else {
                vec![(i, gamma[i])]
            }
        })
        .collect();
    Ok(LinearMap::from_iso_rows(space.clone(), space.clone(), rows))
}

/// n-th power, both as a matrix power and as the composition system it
/// equals: graph `phi^n` with weights `lambda_x lambda_{phi(x)} ...
/// lambda_{phi^{n-1}(x)}` (empty product for n = 0).
pub fn power_owco(spec: &OwcoSpec, n: usize) -> Result<(LinearMap, OwcoSpec)> {
    let c = owco_build(spec);
    let mut power = LinearMap::identity(spec.space());
    for _ in 0..n {
        power = c.compose(&power)?;
    }

    let nv = spec.n_vertices();
    let n_w = spec.n_w();
    let mut phi_n = Vec::with_capacity(nv);
    let mut lambda = Vec::with_capacity(nv * n_w);
    for x in 0..nv {
        phi_n.push(spec.graph().iterate(x, n)?);
        for w in 0..n_w {
            let mut prod = Complex64::new(1.0, 0.0);
            let mut v = x;
            for _ in 0..n {
                prod *= spec.lambda(v, w);
                v = spec.graph().phi()[v];
            }
            lambda.push(prod);
        }
    }
    let graph = crate::graph::FunctionalGraph::truncated(
        phi_n,
        (0..nv).map(|x| spec.graph().is_incomplete(x)).collect(),
    )?;
    let power_spec = OwcoSpec::new(
        graph,
        spec.base().clone(),
        lambda,
        Some(spec.vertex_mass().to_vec()),
    )?;
    Ok((power, power_spec))
}

/// `|| A A*A - A*A A ||`; zero exactly for quasinormal maps.
pub fn quasinormality_defect(a: &LinearMap) -> Result<f64> {
    if !a.is_endomorphism() {
        return Err(Error::Shape(
            "quasinormality defect needs an endomorphism".into(),
        ));
    }
    let ata = a.adjoint().compose(a)?;
    let d = a.compose(&ata)?.sub(&ata.compose(a)?)?;
    Ok(d.operator_norm())
}

/// `|| A*A - A A* ||`.
pub fn normality_defect(a: &LinearMap) -> Result<f64> {
    if !a.is_endomorphism() {
        return Err(Error::Shape(
            "normality defect needs an endomorphism".into(),
        ));
    }
    let ata = a.adjoint().compose(a)?;
    let aat = a.compose(&a.adjoint())?;
    Ok(ata.sub(&aat)?.operator_norm())
}

#[derive(Debug, Clone)]
pub struct PolarReport {
    /// `|| U |A| - |A| U ||` restricted to the range of `|A|`.
    pub commutator_norm: f64,
    pub verdict: bool,
    pub sigma_max: f64,
    /// Numerical rank of `|A|` after the pseudoinverse cut.
    pub rank: usize,
}

/// Polar-decomposition route to quasinormality: factor `A = U |A|` and
/// measure how far `U` is from commuting with `|A|` on the range of `|A|`.
pub fn polar_quasinormal_check(a: &LinearMap, tol: f64) -> Result<PolarReport> {
    if !a.is_endomorphism() {
        return Err(Error::Shape("polar check needs an endomorphism".into()));
    }
    let b = a.to_dense_iso();
    let h = b.adjoint() * &b;
    let h = (&h + h.adjoint()).scale(0.5);
    let eig = h.symmetric_eigen();
    let lam_max = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v));
    if lam_max <= 0.0 {
        return Ok(PolarReport {
            commutator_norm: 0.0,
            verdict: true,
            sigma_max: 0.0,
            rank: 0,
        });
    }
    let clamped: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&v| if v < PSD_CLAMP * lam_max { 0.0 } else { v })
        .collect();
    let sqrt_vals: Vec<f64> = clamped.iter().map(|&v| v.sqrt()).collect();
    let sigma_max = sqrt_vals.iter().fold(0.0f64, |m, &v| m.max(v));
    let kept: Vec<bool> = sqrt_vals
        .iter()
        .map(|&s| s > PINV_CUT * sigma_max)
        .collect();
    let rank = kept.iter().filter(|&&k| k).count();

    let v = &eig.eigenvectors;
    let diag = |vals: &dyn Fn(usize) -> f64| -> DMatrix<Complex64> {
        DMatrix::from_fn(sqrt_vals.len(), sqrt_vals.len(), |r, c| {
            if r == c {
                Complex64::new(vals(r), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    };
    let modulus = v * diag(&|i| sqrt_vals[i]) * v.adjoint();
    let pinv = v * diag(&|i| if kept[i] { 1.0 / sqrt_vals[i] } else { 0.0 }) * v.adjoint();
    let proj = v * diag(&|i| if kept[i] { 1.0 } else { 0.0 }) * v.adjoint();
    let u = &b * pinv;
    let comm = (&u * &modulus - &modulus * &u) * proj;
    let commutator_norm = dense_norm(&comm);
    Ok(PolarReport {
        commutator_norm,
        verdict: commutator_norm <= tol * sigma_max.max(1.0),
        sigma_max,
        rank,
    })
}

/// Restriction of a composition operator to the fiber over one vertex:
/// maps the block at `x` into the stacked blocks over `phi^{-1}(x)`. The
/// domain carries the base atom masses only; vertex masses sit on the
/// codomain, so stacking the fiber norms reproduces the full norm.
pub fn fiber_decompose(spec: &OwcoSpec) -> Result<Vec<(usize, LinearMap)>> {
    let n_w = spec.n_w();
    let rho = spec.base().masses();
    let mut out = Vec::new();
    for x in spec.graph().image_set() {
        let fiber = spec.graph().fiber(x)?.to_vec();
        let mu: Vec<f64> = fiber.iter().map(|&y| spec.vertex_mass()[y]).collect();
        let domain = BlockSpace::uniform(1, rho, &[1.0])?;
        let codomain = BlockSpace::uniform(fiber.len(), rho, &mu)?;
        let mut triplets = Vec::new();
        for (yi, &y) in fiber.iter().enumerate() {
            for w in 0..n_w {
                let l = spec.lambda(y, w);
                if !is_zero(l) {
                    triplets.push((codomain.flat(yi, w), w, l));
                }
            }
        }
        out.push((
            x,
            LinearMap::from_plain_triplets(domain, codomain, &triplets)?,
        ));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct IntertwiningReport {
    /// `max_{x,w} |lambda_x(w)| |gamma_x(w) - gamma_{phi(x)}(w)|`.
    pub hypothesis_residual: f64,
    /// `|| M C - C M ||`.
    pub commutator_norm: f64,
}

/// Commutation of a diagonal multiplication operator with the composition
/// operator. Vanishing hypothesis residual forces a vanishing commutator.
pub fn intertwining_check(spec: &OwcoSpec, gamma: &[Complex64]) -> Result<IntertwiningReport> {
    let space = spec.space();
    if gamma.len() != space.dim() {
        return Err(Error::Shape(format!(
            "gamma table of length {} on a space of dimension {}",
            gamma.len(),
            space.dim()
        )));
    }
    let n_w = spec.n_w();
    let mut residual = 0.0f64;
    for x in 0..spec.n_vertices() {
        let y = spec.graph().phi()[x];
        for w in 0..n_w {
            let r = spec.lambda(x, w).norm() * (gamma[x * n_w + w] - gamma[y * n_w + w]).norm();
            residual = residual.max(r);
        }
    }
    let m = mult_build(gamma, &space)?;
    let c = owco_build(spec);
    let comm = m.compose(&c)?.sub(&c.compose(&m)?)?;
    Ok(IntertwiningReport {
        hypothesis_residual: residual,
        commutator_norm: comm.operator_norm(),
    })
}
