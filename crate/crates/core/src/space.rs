//! Discrete trial spaces on boundary meshes.

use std::fmt;
use std::sync::Arc;

use crate::error::{AbemError, Result};
use crate::mesh::BoundaryMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    /// Piecewise constants, one dof per element.
    P0,
    /// Continuous piecewise linears vanishing at the endpoints of an open arc.
    S1Tilde,
    /// Continuous piecewise linears, one dof per node.
    S1,
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpaceKind::P0 => "P0",
            SpaceKind::S1Tilde => "S1_tilde",
            SpaceKind::S1 => "S1",
        })
    }
}

/// A trial space together with its dof-to-geometry association.
#[derive(Debug, Clone)]
pub struct DiscreteSpace {
    kind: SpaceKind,
    mesh: Arc<BoundaryMesh>,
    // element id (P0) or node index (S1 kinds) of each dof
    dof_map: Vec<usize>,
    node_dof: Vec<Option<usize>>,
}

impl DiscreteSpace {
    pub fn new(kind: SpaceKind, mesh: Arc<BoundaryMesh>) -> Result<Self> {
        let (dof_map, node_dof) = match kind {
            SpaceKind::P0 => ((0..mesh.len()).collect(), Vec::new()),
            SpaceKind::S1 => {
                let n = mesh.node_count();
                ((0..n).collect(), (0..n).map(Some).collect())
            }
            SpaceKind::S1Tilde => {
                if mesh.is_closed() {
                    return Err(AbemError::IncompatibleSpace(
                        "S1_tilde requires an open arc".into(),
                    ));
                }
                let n = mesh.node_count();
                let dofs: Vec<usize> = (1..n - 1).collect();
                let node_dof = (0..n)
                    .map(|i| (i > 0 && i + 1 < n).then(|| i - 1))
                    .collect();
                (dofs, node_dof)
            }
        };
        Ok(Self {
            kind,
            mesh,
            dof_map,
            node_dof,
        })
    }

    pub fn p0(mesh: Arc<BoundaryMesh>) -> Self {
        Self::new(SpaceKind::P0, mesh).expect("P0 exists on every mesh")
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn mesh(&self) -> &Arc<BoundaryMesh> {
        &self.mesh
    }

    pub fn dof_count(&self) -> usize {
        self.dof_map.len()
    }

    /// Element id (P0) or mesh node index (S1 kinds) carrying dof `i`.
    pub fn dof_map(&self) -> &[usize] {
        &self.dof_map
    }

    /// Dof attached to mesh node `node`, if any (S1 kinds only).
    pub fn node_dof(&self, node: usize) -> Option<usize> {
        self.node_dof.get(node).copied().flatten()
    }

    pub fn is_continuous(&self) -> bool {
        self.kind != SpaceKind::P0
    }

    /// Dofs of the two hat functions that are nonzero on element `e`, as
    /// `(start node dof, end node dof)`.
    pub fn element_dofs(&self, e: usize) -> (Option<usize>, Option<usize>) {
        let (a, b) = self.mesh.element_nodes(e);
        (self.node_dof(a), self.node_dof(b))
    }

    fn require_continuous(&self) -> Result<()> {
        if self.is_continuous() {
            Ok(())
        } else {
            Err(AbemError::IncompatibleSpace(
                "operation needs a continuous piecewise-linear space".into(),
            ))
        }
    }

    fn check_len(&self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != self.dof_count() {
            return Err(AbemError::DimensionMismatch {
                expected: self.dof_count(),
                found: coeffs.len(),
            });
        }
        Ok(())
    }

    /// Element-wise arc-length derivative of a piecewise-linear function.
    pub fn derivative(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.require_continuous()?;
        self.check_len(coeffs)?;
        let value = |d: Option<usize>| d.map_or(0.0, |i| coeffs[i]);
        Ok((0..self.mesh.len())
            .map(|e| {
                let (a, b) = self.element_dofs(e);
                (value(b) - value(a)) / self.mesh.element(e).len()
            })
            .collect())
    }

    /// Transpose of [`derivative`](Self::derivative): maps element values
    /// `g` to `sum_e g_e * (phi_i)'|_e`.
    pub fn derivative_transpose(&self, g: &[f64]) -> Result<Vec<f64>> {
        self.require_continuous()?;
        if g.len() != self.mesh.len() {
            return Err(AbemError::DimensionMismatch {
                expected: self.mesh.len(),
                found: g.len(),
            });
        }
        let mut out = vec![0.0; self.dof_count()];
        for (e, &ge) in g.iter().enumerate() {
            let inv = ge / self.mesh.element(e).len();
            let (a, b) = self.element_dofs(e);
            if let Some(a) = a {
                out[a] -= inv;
            }
            if let Some(b) = b {
                out[b] += inv;
            }
        }
        Ok(out)
    }

    /// Integrals of the basis functions over the curve.
    pub fn mass_vector(&self) -> Vec<f64> {
        match self.kind {
            SpaceKind::P0 => self.mesh.diameters(),
            _ => {
                let mut m = vec![0.0; self.dof_count()];
                for e in 0..self.mesh.len() {
                    let half = 0.5 * self.mesh.element(e).len();
                    let (a, b) = self.element_dofs(e);
                    for d in [a, b].into_iter().flatten() {
                        m[d] += half;
                    }
                }
                m
            }
        }
    }

    /// Value of the discrete function at local parameter `t` of element `e`.
    pub fn value_at(&self, coeffs: &[f64], e: usize, t: f64) -> f64 {
        match self.kind {
            SpaceKind::P0 => coeffs[e],
            _ => {
                let (a, b) = self.element_dofs(e);
                let va = a.map_or(0.0, |i| coeffs[i]);
                let vb = b.map_or(0.0, |i| coeffs[i]);
                va + t * (vb - va)
            }
        }
    }

    /// Coefficients on `fine` representing the same function; `fine` must be
    /// a space of the same kind on a mesh nested in this one.
    pub fn prolongate(&self, coeffs: &[f64], fine: &DiscreteSpace) -> Result<Vec<f64>> {
        self.check_len(coeffs)?;
        if fine.kind != self.kind {
            return Err(AbemError::IncompatibleSpace(format!(
                "cannot prolongate {} to {}",
                self.kind, fine.kind
            )));
        }
        if Arc::ptr_eq(&self.mesh, &fine.mesh) {
            return Ok(coeffs.to_vec());
        }
        let map = self.mesh.ancestor_map(&fine.mesh)?;
        if self.kind == SpaceKind::P0 {
            return Ok(map.iter().map(|&c| coeffs[c]).collect());
        }
        let mut out = vec![0.0; fine.dof_count()];
        for (dof, &node) in fine.dof_map.iter().enumerate() {
            let (elem, arc) = if node < fine.mesh.len() {
                (map[node], fine.mesh.node_arc(node))
            } else {
                (self.mesh.len() - 1, fine.mesh.node_arc(node))
            };
            let c = self.mesh.element(elem);
            let t = ((arc - c.arc_start) / (c.arc_end - c.arc_start)).clamp(0.0, 1.0);
            out[dof] = self.value_at(coeffs, elem, t);
        }
        Ok(out)
    }
    /// Transpose of [`prolongate`](Self::prolongate): maps fine-space
    /// functionals `<g, phi_fine_k>` to `<g, phi_i>` on this space.
    pub fn restrict(&self, fine: &DiscreteSpace, g: &[f64]) -> Result<Vec<f64>> {
        fine.check_len(g)?;
        if fine.kind != self.kind {
            return Err(AbemError::IncompatibleSpace(format!(
                "cannot restrict {} to {}",
                fine.kind, self.kind
            )));
        }
        if Arc::ptr_eq(&self.mesh, &fine.mesh) {
            return Ok(g.to_vec());
        }
        let map = self.mesh.ancestor_map(&fine.mesh)?;
        let mut out = vec![0.0; self.dof_count()];
        if self.kind == SpaceKind::P0 {
            for (k, &c) in map.iter().enumerate() {
                out[c] += g[k];
            }
            return Ok(out);
        }
        for (dof, &node) in fine.dof_map.iter().enumerate() {
            let (elem, arc) = if node < fine.mesh.len() {
                (map[node], fine.mesh.node_arc(node))
            } else {
                (self.mesh.len() - 1, fine.mesh.node_arc(node))
            };
            let c = self.mesh.element(elem);
            let t = ((arc - c.arc_start) / (c.arc_end - c.arc_start)).clamp(0.0, 1.0);
            let (a, b) = self.element_dofs(elem);
            if let Some(a) = a {
                out[a] += (1.0 - t) * g[dof];
            }
            if let Some(b) = b {
                out[b] += t * g[dof];
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoundaryCurve, Point};

    fn slit_mesh(breaks: &[f64]) -> Arc<BoundaryMesh> {
        let c = BoundaryCurve::segment(Point::new(0.0, 0.0), Point::new(2.0, 0.0)).unwrap();
        Arc::new(BoundaryMesh::from_arc_breakpoints(c, breaks, 2.0).unwrap())
    }

    #[test]
    fn dof_counts() {
        let m = slit_mesh(&[1.0]);
        assert_eq!(DiscreteSpace::p0(m.clone()).dof_count(), 2);
        assert_eq!(
            DiscreteSpace::new(SpaceKind::S1Tilde, m.clone())
                .unwrap()
                .dof_count(),
            1
        );
        assert_eq!(DiscreteSpace::new(SpaceKind::S1, m).unwrap().dof_count(), 3);
    }

    #[test]
    fn s1_tilde_rejected_on_closed_curves() {
        let sq = BoundaryCurve::new(
            vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(1.0, 1.0),
            ],
            true,
        )
        .unwrap();
        let m = Arc::new(BoundaryMesh::initial(sq, 3, 2.0).unwrap());
        assert!(DiscreteSpace::new(SpaceKind::S1Tilde, m.clone()).is_err());
        let s = DiscreteSpace::new(SpaceKind::S1, m).unwrap();
        let d = s.derivative(&vec![1.0; s.dof_count()]).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hat_derivative_and_mass() {
        let s = DiscreteSpace::new(SpaceKind::S1Tilde, slit_mesh(&[1.0])).unwrap();
        assert_eq!(s.derivative(&[1.0]).unwrap(), vec![1.0, -1.0]);
        assert_eq!(s.derivative_transpose(&[1.0, -1.0]).unwrap(), vec![2.0]);
        assert_eq!(s.mass_vector(), vec![1.0]);
    }

    #[test]
    fn prolongation_preserves_values() {
        let coarse = slit_mesh(&[1.0]);
        let fine = Arc::new(coarse.uniform_refine());
        let sc = DiscreteSpace::new(SpaceKind::S1Tilde, coarse).unwrap();
        let sf = DiscreteSpace::new(SpaceKind::S1Tilde, fine).unwrap();
        assert_eq!(sc.prolongate(&[2.0], &sf).unwrap(), vec![1.0, 2.0, 1.0]);
        let pc = DiscreteSpace::p0(sc.mesh().clone());
        let pf = DiscreteSpace::p0(sf.mesh().clone());
        assert_eq!(
            pc.prolongate(&[3.0, -1.0], &pf).unwrap(),
            vec![3.0, 3.0, -1.0, -1.0]
        );
    }

    #[test]
    fn restriction_is_prolongation_transpose() {
        let coarse = slit_mesh(&[0.5, 1.5]);
        let fine = Arc::new(coarse.refine_marked(&[1].into()).unwrap());
        for kind in [SpaceKind::P0, SpaceKind::S1Tilde] {
            let sc = DiscreteSpace::new(kind, coarse.clone()).unwrap();
            let sf = DiscreteSpace::new(kind, fine.clone()).unwrap();
            let g: Vec<f64> = (0..sf.dof_count())
                .map(|i| (i as f64 + 1.0).sqrt())
                .collect();
            let r = sc.restrict(&sf, &g).unwrap();
            for i in 0..sc.dof_count() {
                let mut e = vec![0.0; sc.dof_count()];
                e[i] = 1.0;
                let p = sc.prolongate(&e, &sf).unwrap();
                let expected: f64 = p.iter().zip(&g).map(|(a, b)| a * b).sum();
                assert!((r[i] - expected).abs() < 1e-14);
            }
        }
    }
}
