//! Randomized instance generation for stress tests and benches.
//!
//! A valid instance keeps its moving weights on the cycles of the graph: off
//! the cycles the weights vanish, every vertex inherits the measure of the
//! cycle its orbit falls into, and the weight moduli are constant along each
//! cycle per payload atom. Such a system is normal after reduction, so the
//! certification pipeline must accept it; rescaling a single cycle weight
//! breaks the density constancy and must be refuted.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::extension::ThetaFamily;
use crate::graph::FunctionalGraph;
use crate::spaces::{BlockVector, DiscreteMeasureSpace, GridMeasure, OwcoSpec};

/// Size envelope for random instances.
#[derive(Debug, Clone, Copy)]
pub struct CorpusParams {
    pub max_vertices: usize,
    pub max_atoms: usize,
    /// Support points per cycle measure.
    pub max_points: usize,
    /// Draw a nontrivial vertex measure half of the time.
    pub random_vertex_mass: bool,
}

impl Default for CorpusParams {
    fn default() -> Self {
        CorpusParams {
            max_vertices: 12,
            max_atoms: 4,
            max_points: 5,
            random_vertex_mass: true,
        }
    }
}

/// Random self-map with a guaranteed two-cycle on vertices 0 and 1.
pub fn random_functional_graph<R: Rng>(rng: &mut R, n: usize) -> Result<FunctionalGraph> {
    if n < 2 {
        return Err(Error::Input("the corpus graph needs two vertices".into()));
    }
    let mut phi = vec![1usize, 0usize];
    for _ in 2..n {
        phi.push(rng.gen_range(0..n));
    }
    FunctionalGraph::new(phi)
}

/// Index of the cycle each vertex eventually falls into.
pub fn terminal_cycle_ids(graph: &FunctionalGraph) -> Vec<usize> {
    let cycles = graph.cycles();
    let n = graph.vertex_count();
    let mut id = vec![usize::MAX; n];
    for (c, cycle) in cycles.iter().enumerate() {
        for &v in cycle {
            id[v] = c;
        }
    }
    for x in 0..n {
        let mut y = x;
        while id[y] == usize::MAX {
            y = graph.phi()[y];
        }
        id[x] = id[y];
    }
    id
}

/// A certifiable system together with the measure family witnessing it.
pub fn random_valid_instance<R: Rng>(
    rng: &mut R,
    params: &CorpusParams,
) -> Result<(OwcoSpec, ThetaFamily)> {
    let n = rng.gen_range(4..=params.max_vertices.max(4));
    let n_w = rng.gen_range(1..=params.max_atoms.max(1));
    let graph = random_functional_graph(rng, n)?;
    let cycles = graph.cycles();
    let cycle_of = terminal_cycle_ids(&graph);
    let on_cycle: Vec<bool> = {
        let mut v = vec![false; n];
        for cycle in &cycles {
            for &x in cycle {
                v[x] = true;
            }
        }
        v
    };

    // shared grid with comfortable separation
    let n_grid = rng.gen_range(3..=8usize);
    let mut grid = Vec::with_capacity(n_grid);
    let mut t = rng.gen_range(0.1..0.5);
    for _ in 0..n_grid {
        grid.push(t);
        t += rng.gen_range(0.4..1.2);
    }

    // per cycle and atom: a measure on a random subset of the grid and a
    // shared weight modulus
    let n_cycles = cycles.len();
    let mut cycle_measures: Vec<GridMeasure> = Vec::with_capacity(n_cycles * n_w);
    let mut cycle_moduli: Vec<f64> = Vec::with_capacity(n_cycles * n_w);
    for _ in 0..n_cycles {
        for _ in 0..n_w {
            let n_pts = rng.gen_range(1..=params.max_points.min(n_grid).max(1));
            let picks = rand::seq::index::sample(rng, n_grid, n_pts);
            let mut weights = vec![0.0f64; n_grid];
            for i in picks {
                weights[i] = rng.gen_range(0.1..1.0);
            }
            let total: f64 = weights.iter().sum();
            for v in &mut weights {
                *v /= total;
            }
            cycle_measures.push(GridMeasure::probability(grid.clone(), weights)?);
            cycle_moduli.push(rng.gen_range(0.6..1.4));
        }
    }

    let payloads: Vec<Complex64> = (0..n_w)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let masses: Vec<f64> = (0..n_w).map(|_| rng.gen_range(0.3..2.0)).collect();
    let base = DiscreteMeasureSpace::new(payloads, masses)?;

    let vertex_mass: Option<Vec<f64>> = if params.random_vertex_mass && rng.gen_bool(0.5) {
        Some((0..n).map(|_| rng.gen_range(0.5..2.0)).collect())
    } else {
        None
    };
    let unit_mass = vec![1.0f64; n];
    let mass = vertex_mass.as_deref().unwrap_or(&unit_mass);

    // the reduced modulus must be the cycle modulus, so the stored weight
    // carries the inverse mass ratio
    let phi = graph.phi().to_vec();
    let mut lambda = vec![Complex64::new(0.0, 0.0); n * n_w];
    for x in 0..n {
        if !on_cycle[x] {
            continue;
        }
        for w in 0..n_w {
            let r = cycle_moduli[cycle_of[x] * n_w + w];
            let scale = r * (mass[phi[x]] / mass[x]).sqrt();
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            lambda[x * n_w + w] = Complex64::new(scale * phase.cos(), scale * phase.sin());
        }
    }
    let spec = OwcoSpec::new(graph, base, lambda, vertex_mass)?;

    let mut rows: Vec<GridMeasure> = Vec::with_capacity(n * n_w);
    for x in 0..n {
        for w in 0..n_w {
            rows.push(cycle_measures[cycle_of[x] * n_w + w].clone());
        }
    }
    let theta = ThetaFamily::new(n, n_w, rows)?;
    Ok((spec, theta))
}

/// Rescale one weight on a cycle of length at least two, breaking the
/// constancy of the density along that cycle.
pub fn perturb_lambda<R: Rng>(rng: &mut R, spec: &OwcoSpec) -> Result<OwcoSpec> {
    let cycles = spec.graph().cycles();
    let long: Vec<&Vec<usize>> = cycles.iter().filter(|c| c.len() >= 2).collect();
    let candidates: Vec<usize> = long
        .iter()
        .flat_map(|c| c.iter().copied())
        .filter(|&x| (0..spec.n_w()).any(|w| spec.lambda(x, w).norm_sqr() != 0.0))
        .collect();
    if candidates.is_empty() {
        return Err(Error::Input(
            "no weighted cycle of length at least two to perturb".into(),
        ));
    }
    let x = candidates[rng.gen_range(0..candidates.len())];
    let live: Vec<usize> = (0..spec.n_w())
        .filter(|&w| spec.lambda(x, w).norm_sqr() != 0.0)
        .collect();
    let w = live[rng.gen_range(0..live.len())];
    let mut lambda = spec.lambda_table().to_vec();
    lambda[x * spec.n_w() + w] *= 1.5;
    OwcoSpec::new(
        spec.graph().clone(),
        spec.base().clone(),
        lambda,
        Some(spec.vertex_mass().to_vec()),
    )
}

/// Dense random vector with entries in the unit square.
pub fn random_block_vector<R: Rng>(rng: &mut R, n_vertices: usize, n_atoms: usize) -> BlockVector {
    let values = (0..n_vertices * n_atoms)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    BlockVector::from_values(n_vertices, n_atoms, values).expect("shape is consistent")
}

/// A symbol table constant along every trajectory: one random value per
/// terminal cycle and atom, pulled back through the orbit map.
pub fn trajectory_constant_gamma<R: Rng>(rng: &mut R, spec: &OwcoSpec) -> Vec<Complex64> {
    let cycle_of = terminal_cycle_ids(spec.graph());
    let n_cycles = cycle_of.iter().copied().max().map_or(0, |m| m + 1);
    let n_w = spec.n_w();
    let table: Vec<Complex64> = (0..n_cycles * n_w)
        .map(|_| Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
        .collect();
    (0..spec.n_vertices() * n_w)
        .map(|i| {
            let (x, w) = (i / n_w, i % n_w);
            table[cycle_of[x] * n_w + w]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extension::{certify_subnormality, Verdict};
    use crate::operators::intertwining_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn valid_instances_certify() {
        let params = CorpusParams::default();
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (spec, theta) = random_valid_instance(&mut rng, &params).unwrap();
            let cert = certify_subnormality(&spec, &theta, 1e-9).unwrap();
            assert_eq!(
                cert.verdict,
                Verdict::CertifiedSubnormal,
                "seed {seed}: defect {:?} residual {:?}",
                cert.quasinormality_defect,
                cert.consistency.as_ref().map(|c| c.residual)
            );
            assert!(!cert.internal_inconsistency);
            assert!(cert.masked_vertices.is_empty());
        }
    }

    #[test]
    fn perturbed_instances_are_refuted_coherently() {
        let params = CorpusParams::default();
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let (spec, theta) = random_valid_instance(&mut rng, &params).unwrap();
            let bad = perturb_lambda(&mut rng, &spec).unwrap();
            let cert = certify_subnormality(&bad, &theta, 1e-9).unwrap();
            assert_eq!(cert.verdict, Verdict::RefutedHypotheses, "seed {seed}");
            assert!(!cert.internal_inconsistency, "seed {seed}");
        }
    }

    #[test]
    fn constant_gamma_commutes() {
        let params = CorpusParams::default();
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
            let (spec, _) = random_valid_instance(&mut rng, &params).unwrap();
            let gamma = trajectory_constant_gamma(&mut rng, &spec);
            let report = intertwining_check(&spec, &gamma).unwrap();
            assert_eq!(report.hypothesis_residual, 0.0, "seed {seed}");
            assert!(
                report.commutator_norm <= 1e-12,
                "seed {seed}: commutator {}",
                report.commutator_norm
            );
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let params = CorpusParams::default();
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        let (s1, t1) = random_valid_instance(&mut a, &params).unwrap();
        let (s2, t2) = random_valid_instance(&mut b, &params).unwrap();
        assert_eq!(s1.lambda_table(), s2.lambda_table());
        assert_eq!(s1.graph().phi(), s2.graph().phi());
        assert_eq!(t1.grid(), t2.grid());
    }
}
