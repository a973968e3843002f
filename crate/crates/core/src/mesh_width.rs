//! Plain and modified mesh-width functions along a refinement sequence.
//!
//! The modified width is built recursively: it starts as the element
//! diameter, is inherited by sons, and is multiplied by `q` on the k-patch
//! of the refined elements, always capped by the current diameter.

use std::collections::BTreeSet;

use crate::error::{AbemError, Result};
use crate::mesh::BoundaryMesh;

/// Element-wise mesh widths of one level.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshWidth {
    /// `diam(T)`.
    pub plain: Vec<f64>,
    /// Modified width, `plain / c_meshsize <= modified <= plain`.
    pub modified: Vec<f64>,
    pub k: usize,
    /// Contraction factor on the k-patch of refined elements.
    pub q: f64,
    /// Smallest constant with `diam / c <= modified` on this and all
    /// previous levels.
    pub c_meshsize: f64,
}

/// `(1/2)^(1/(k+1))`.
pub fn contraction_factor(k: usize) -> f64 {
    0.5f64.powf(1.0 / (k as f64 + 1.0))
}

fn equivalence_constant(plain: &[f64], modified: &[f64]) -> f64 {
    plain
        .iter()
        .zip(modified)
        .map(|(d, h)| d / h)
        .fold(1.0, f64::max)
}

impl MeshWidth {
    /// Level without history: the modified width is the diameter.
    pub fn initial(mesh: &BoundaryMesh, k: usize) -> Self {
        let plain = mesh.diameters();
        Self {
            modified: plain.clone(),
            plain,
            k,
            q: contraction_factor(k),
            c_meshsize: 1.0,
        }
    }

    /// Width on `next`, the direct successor of `prev` (the mesh this
    /// width belongs to).
    pub fn advance(&self, prev: &BoundaryMesh, next: &BoundaryMesh) -> Result<MeshWidth> {
        if self.plain.len() != prev.len() {
            return Err(AbemError::DimensionMismatch {
                expected: prev.len(),
                found: self.plain.len(),
            });
        }
        if next.level() == prev.level() && next.elements() == prev.elements() {
            return Ok(self.clone());
        }
        prev.check_successor(next)?;
        let refined = prev.refined_elements(next);
        let patch = prev.k_patch(&refined, self.k)?;
        let plain = next.diameters();
        let modified: Vec<f64> = next
            .elements()
            .iter()
            .zip(&plain)
            .map(|(e, &d)| {
                let p = e.parent.expect("checked successor has parents");
                let s = if patch.contains(&p) { self.q } else { 1.0 };
                d.min(s * self.modified[p])
            })
            .collect();
        let c = equivalence_constant(&plain, &modified).max(self.c_meshsize);
        Ok(MeshWidth {
            plain,
            modified,
            k: self.k,
            q: self.q,
            c_meshsize: c,
        })
    }
}

/// Modified mesh widths for a nested sequence, each mesh the direct
/// successor of the one before.
pub fn modified_mesh_width(meshes: &[BoundaryMesh], k: usize) -> Result<Vec<MeshWidth>> {
    let Some(first) = meshes.first() else {
        return Ok(Vec::new());
    };
    let mut out = vec![MeshWidth::initial(first, k)];
    for w in meshes.windows(2) {
        let next = out.last().unwrap().advance(&w[0], &w[1])?;
        out.push(next);
    }
    Ok(out)
}

/// Checks equivalence, monotonicity and k-patch contraction for a
/// sequence; returns a description of the first violation.
pub fn check_mesh_width_invariants(
    meshes: &[BoundaryMesh],
    widths: &[MeshWidth],
) -> Result<(), String> {
    if meshes.len() != widths.len() {
        return Err("one width per mesh required".into());
    }
    let c = widths.last().map_or(1.0, |w| w.c_meshsize) * (1.0 + 1e-12);
    for (l, (m, w)) in meshes.iter().zip(widths).enumerate() {
        for (i, (&d, &h)) in w.plain.iter().zip(&w.modified).enumerate() {
            if h > d * (1.0 + 1e-14) || d / c > h {
                return Err(format!("equivalence fails on level {l}, element {i}"));
            }
        }
        if l == 0 {
            continue;
        }
        let prev = &meshes[l - 1];
        if m.level() == prev.level() {
            continue;
        }
        let refined = prev.refined_elements(m);
        let patch: BTreeSet<usize> = prev.k_patch(&refined, w.k).map_err(|e| e.to_string())?;
        for (i, e) in m.elements().iter().enumerate() {
            let p = e.parent.ok_or("missing parent")?;
            let before = widths[l - 1].modified[p];
            if w.modified[i] > before * (1.0 + 1e-14) {
                return Err(format!("monotonicity fails on level {l}, element {i}"));
            }
            if patch.contains(&p) && w.modified[i] > w.q * before * (1.0 + 1e-14) {
                return Err(format!("contraction fails on level {l}, element {i}"));
            }
        }
    }
    Ok(())
}
