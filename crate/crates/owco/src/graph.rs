//! Finite functional graphs: a total self-map of `{0, .., n-1}` with
//! precomputed level-1 preimage fibers.
//!
//! Infinite vertex sets are handled as finite truncations. A vertex whose
//! true fiber got clipped by the truncation is flagged *incomplete*; any
//! depth-n query that would have to expand such a vertex fails with a
//! boundary error instead of silently returning a clipped fiber.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionalGraph {
    phi: Vec<usize>,
    fibers: Vec<Vec<usize>>,
    incomplete: Vec<bool>,
}

impl FunctionalGraph {
    /// Graph of an exactly known self-map: every fiber is trusted.
    pub fn new(phi: Vec<usize>) -> Result<Self> {
        let n = phi.len();
        Self::truncated(phi, vec![false; n])
    }

    /// Graph of a truncated system. `incomplete[x]` marks vertices whose
    /// preimage fiber is missing vertices that lie outside the truncation.
    pub fn truncated(phi: Vec<usize>, incomplete: Vec<bool>) -> Result<Self> {
        let n = phi.len();
        if incomplete.len() != n {
            return Err(Error::Shape(format!(
                "incomplete flags have length {}, graph has {} vertices",
                incomplete.len(),
                n
            )));
        }
        for (x, &y) in phi.iter().enumerate() {
            if y >= n {
                return Err(Error::Input(format!(
                    "phi({x}) = {y} is outside the vertex set of size {n}"
                )));
            }
        }
        let mut fibers = vec![Vec::new(); n];
        for (x, &y) in phi.iter().enumerate() {
            fibers[y].push(x);
        }
        // insertion order is already ascending in x
        Ok(FunctionalGraph {
            phi,
            fibers,
            incomplete,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.phi.len()
    }

    pub fn phi(&self) -> &[usize] {
        &self.phi
    }

    fn check_vertex(&self, x: usize) -> Result<()> {
        if x >= self.phi.len() {
            return Err(Error::InvalidVertex {
                index: x,
                count: self.phi.len(),
            });
        }
        Ok(())
    }

    /// n-fold forward iterate of `phi`. Always stays inside the vertex set.
    pub fn iterate(&self, x: usize, n: usize) -> Result<usize> {
        self.check_vertex(x)?;
        let mut y = x;
        for _ in 0..n {
            y = self.phi[y];
        }
        Ok(y)
    }

    /// Level-1 fiber, ascending.
    pub fn fiber(&self, x: usize) -> Result<&[usize]> {
        self.check_vertex(x)?;
        Ok(&self.fibers[x])
    }

    /// Level-n fiber as recorded in the truncation, ascending. Does not
    /// consult the incompleteness flags; use [`preimage_fiber_checked`]
    /// wherever clipped fibers would corrupt a result.
    ///
    /// [`preimage_fiber_checked`]: FunctionalGraph::preimage_fiber_checked
    pub fn preimage_fiber(&self, x: usize, n: usize) -> Result<Vec<usize>> {
        self.check_vertex(x)?;
        let mut level: BTreeSet<usize> = BTreeSet::from([x]);
        for _ in 0..n {
            let mut next = BTreeSet::new();
            for &v in &level {
                next.extend(self.fibers[v].iter().copied());
            }
            level = next;
        }
        Ok(level.into_iter().collect())
    }

    /// Level-n fiber with the truncation guard: expanding an incomplete
    /// vertex raises [`Error::TruncationBoundary`].
    pub fn preimage_fiber_checked(&self, x: usize, n: usize) -> Result<Vec<usize>> {
        self.check_vertex(x)?;
        let mut level: BTreeSet<usize> = BTreeSet::from([x]);
        for depth in 1..=n {
            if let Some(&blocked) = level.iter().find(|&&v| self.incomplete[v]) {
                return Err(Error::TruncationBoundary {
                    from: x,
                    depth,
                    blocked,
                });
            }
            let mut next = BTreeSet::new();
            for &v in &level {
                next.extend(self.fibers[v].iter().copied());
            }
            level = next;
        }
        Ok(level.into_iter().collect())
    }

    /// Largest depth `n <= cap` for which every level-k fiber from `x`,
    /// `k <= n`, is complete in the truncation.
    pub fn guard_radius(&self, x: usize, cap: usize) -> Result<usize> {
        self.check_vertex(x)?;
        let mut level: BTreeSet<usize> = BTreeSet::from([x]);
        for depth in 1..=cap {
            if level.iter().any(|&v| self.incomplete[v]) {
                return Ok(depth - 1);
            }
            let mut next = BTreeSet::new();
            for &v in &level {
                next.extend(self.fibers[v].iter().copied());
            }
            level = next;
        }
        Ok(cap)
    }

    /// Image `phi(X)`, ascending.
    pub fn image_set(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.phi.iter().copied().collect();
        set.into_iter().collect()
    }

    pub fn in_image(&self, x: usize) -> bool {
        !self.fibers[x].is_empty()
    }

    pub fn is_incomplete(&self, x: usize) -> bool {
        self.incomplete[x]
    }

    pub fn incomplete_vertices(&self) -> Vec<usize> {
        (0..self.phi.len())
            .filter(|&x| self.incomplete[x])
            .collect()
    }

    /// True when no vertex is flagged incomplete (the map is exactly known).
    pub fn is_exact(&self) -> bool {
        self.incomplete.iter().all(|&b| !b)
    }

    /// Vertices lying on a cycle of `phi`, grouped per cycle. Every finite
    /// functional graph has at least one cycle.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let n = self.phi.len();
        // 0 = unvisited, 1 = on current path, 2 = done
        let mut state = vec![0u8; n];
        let mut cycles = Vec::new();
        for start in 0..n {
            if state[start] != 0 {
                continue;
            }
            let mut path = Vec::new();
            let mut v = start;
            while state[v] == 0 {
                state[v] = 1;
                path.push(v);
                v = self.phi[v];
            }
            if state[v] == 1 {
                let pos = path.iter().position(|&u| u == v).unwrap();
                cycles.push(path[pos..].to_vec());
            }
            for u in path {
                state[u] = 2;
            }
        }
        cycles
    }
}
