//! Boundary meshes on polygonal curves with bisection refinement.
//!
//! Elements are stored in curve order, so element `i` touches elements
//! `i - 1` and `i + 1` (cyclically for closed curves). Refinement replaces
//! an element by its two sons in place, which keeps that ordering and lets
//! every son record the id of its parent on the previous level.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{AbemError, Result};
use crate::geometry::{BoundaryCurve, Point};

/// Default cap on the diameter ratio of touching elements.
pub const DEFAULT_GAMMA: f64 = 2.0;

/// Straight boundary element with its refinement genealogy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    pub start: Point,
    pub end: Point,
    /// Arc-length position of `start`, measured from the first curve vertex.
    pub arc_start: f64,
    pub arc_end: f64,
    /// Element id on the previous level this element descends from.
    pub parent: Option<usize>,
    pub generation: u32,
}

impl Element {
    pub fn len(&self) -> f64 {
        self.start.dist(self.end)
    }

    pub fn midpoint(&self) -> Point {
        self.start.midpoint(self.end)
    }

    /// Unit tangent pointing from `start` to `end`.
    pub fn tangent(&self) -> Point {
        (self.end - self.start) * (1.0 / self.len())
    }

    /// Point at local parameter `t` in `[0, 1]`.
    pub fn point_at(&self, t: f64) -> Point {
        if t == 1.0 {
            return self.end;
        }
        self.start.lerp(self.end, t)
    }

    /// Arc-length position of local parameter `t`.
    pub fn arc_at(&self, t: f64) -> f64 {
        if t == 1.0 {
            return self.arc_end;
        }
        self.arc_start + t * (self.arc_end - self.arc_start)
    }

    fn bisect(&self, parent: usize) -> [Element; 2] {
        let mid = self.midpoint();
        let arc_mid = 0.5 * (self.arc_start + self.arc_end);
        let generation = self.generation + 1;
        [
            Element {
                start: self.start,
                end: mid,
                arc_start: self.arc_start,
                arc_end: arc_mid,
                parent: Some(parent),
                generation,
            },
            Element {
                start: mid,
                end: self.end,
                arc_start: arc_mid,
                arc_end: self.arc_end,
                parent: Some(parent),
                generation,
            },
        ]
    }

    fn as_root(&self) -> Element {
        Element {
            parent: None,
            ..*self
        }
    }
}

/// Node together with the elements containing it.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePatch {
    pub node: Point,
    pub node_index: usize,
    pub elements: Vec<usize>,
    pub diameter: f64,
}

/// Partition of a boundary curve into straight elements.
#[derive(Debug, Clone)]
pub struct BoundaryMesh {
    curve: Arc<BoundaryCurve>,
    elements: Vec<Element>,
    level: usize,
    gamma_bound: f64,
}

impl BoundaryMesh {
    /// Mesh with about `target_elements` elements, distributed over the
    /// curve sides proportionally to their length (at least one per side).
    /// The local mesh-ratio bound is enforced afterwards.
    pub fn initial(curve: BoundaryCurve, target_elements: usize, gamma_bound: f64) -> Result<Self> {
        check_gamma(gamma_bound)?;
        let total = curve.length();
        let mut breakpoints = Vec::new();
        let mut arc = 0.0;
        for side in 0..curve.side_count() {
            let (a, b) = curve.side(side);
            let len = a.dist(b);
            let pieces = ((target_elements as f64) * len / total).round().max(1.0) as usize;
            for k in 1..pieces {
                breakpoints.push(arc + len * k as f64 / pieces as f64);
            }
            arc += len;
        }
        let mesh = Self::from_arc_breakpoints(curve, &breakpoints, gamma_bound)?;
        let mut mesh = mesh.enforce_mesh_ratio(vec![false; mesh.len()]);
        mesh.level = 0;
        for e in &mut mesh.elements {
            *e = e.as_root();
            e.generation = 0;
        }
        Ok(mesh)
    }

    /// Mesh whose nodes are the curve vertices plus the given arc-length
    /// positions (strictly inside `(0, length)`). No mesh-ratio closure is
    /// applied.
    pub fn from_arc_breakpoints(
        curve: BoundaryCurve,
        breakpoints: &[f64],
        gamma_bound: f64,
    ) -> Result<Self> {
        check_gamma(gamma_bound)?;
        let total = curve.length();
        let cuts = breakpoints;
        if cuts
            .iter()
            .any(|&s| !s.is_finite() || s <= 0.0 || s >= total)
        {
            return Err(AbemError::InvalidParameter {
                name: "breakpoints",
                reason: format!("arc positions must lie strictly inside (0, {total})"),
            });
        }
        let mut elements = Vec::new();
        let mut arc = 0.0;
        for side in 0..curve.side_count() {
            let (a, b) = curve.side(side);
            let len = a.dist(b);
            let side_end = if side + 1 == curve.side_count() {
                total
            } else {
                arc + len
            };
            let mut local: Vec<f64> = cuts
                .iter()
                .copied()
                .filter(|&s| s > arc && s < side_end)
                .collect();
            local.sort_by(|x, y| x.partial_cmp(y).unwrap());
            local.dedup();
            let mut prev_s = arc;
            let mut prev_p = a;
            for &s in local.iter().chain(std::iter::once(&side_end)) {
                let p = if s == side_end {
                    b
                } else {
                    a.lerp(b, (s - arc) / len)
                };
                if s - prev_s <= 1e-14 * total {
                    return Err(AbemError::InvalidParameter {
                        name: "breakpoints",
                        reason: "breakpoints too close to each other or to a vertex".into(),
                    });
                }
                elements.push(Element {
                    start: prev_p,
                    end: p,
                    arc_start: prev_s,
                    arc_end: s,
                    parent: None,
                    generation: 0,
                });
                prev_s = s;
                prev_p = p;
            }
            arc = side_end;
        }
        Ok(Self {
            curve: Arc::new(curve),
            elements,
            level: 0,
            gamma_bound,
        })
    }

    pub fn curve(&self) -> &BoundaryCurve {
        &self.curve
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn element(&self, id: usize) -> &Element {
        &self.elements[id]
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn gamma_bound(&self) -> f64 {
        self.gamma_bound
    }

    pub fn is_closed(&self) -> bool {
        self.curve.is_closed()
    }

    pub fn node_count(&self) -> usize {
        if self.is_closed() {
            self.elements.len()
        } else {
            self.elements.len() + 1
        }
    }

    /// Node `i`: the start of element `i`, or the end of the last element
    /// for the final node of an open arc.
    pub fn node(&self, i: usize) -> Point {
        if i == self.elements.len() {
            self.elements[i - 1].end
        } else {
            self.elements[i].start
        }
    }

    pub fn node_arc(&self, i: usize) -> f64 {
        if i == self.elements.len() {
            self.elements[i - 1].arc_end
        } else {
            self.elements[i].arc_start
        }
    }

    /// Node indices of element `e` as `(start, end)`.
    pub fn element_nodes(&self, e: usize) -> (usize, usize) {
        let n = self.elements.len();
        if self.is_closed() {
            (e, (e + 1) % n)
        } else {
            (e, e + 1)
        }
    }

    /// Elements containing node `i` (one at an arc endpoint, two otherwise),
    /// ordered along the curve.
    pub fn node_elements(&self, i: usize) -> Vec<usize> {
        let n = self.elements.len();
        if self.is_closed() {
            vec![(i + n - 1) % n, i]
        } else if i == 0 {
            vec![0]
        } else if i == n {
            vec![n - 1]
        } else {
            vec![i - 1, i]
        }
    }

    /// Whether node `i` is an endpoint of an open arc.
    pub fn is_boundary_node(&self, i: usize) -> bool {
        !self.is_closed() && (i == 0 || i == self.elements.len())
    }

    /// Elements sharing a node with element `e` (excluding `e`).
    pub fn neighbors(&self, e: usize) -> Vec<usize> {
        let n = self.elements.len();
        let mut out = Vec::with_capacity(2);
        if self.is_closed() {
            if n > 1 {
                out.push((e + n - 1) % n);
                if n > 2 {
                    out.push((e + 1) % n);
                }
            }
        } else {
            if e > 0 {
                out.push(e - 1);
            }
            if e + 1 < n {
                out.push(e + 1);
            }
        }
        out
    }

    /// Pairs `(i, j)` of touching elements with `j` following `i`.
    pub fn touching_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.elements.len();
        let mut pairs: Vec<(usize, usize)> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        if self.is_closed() && n > 2 {
            pairs.push((n - 1, 0));
        }
        pairs
    }

    pub fn total_length(&self) -> f64 {
        self.elements.iter().map(Element::len).sum()
    }

    /// Largest diameter ratio over all touching element pairs.
    pub fn max_mesh_ratio(&self) -> f64 {
        self.touching_pairs()
            .into_iter()
            .map(|(i, j)| {
                let (a, b) = (self.elements[i].len(), self.elements[j].len());
                (a / b).max(b / a)
            })
            .fold(1.0, f64::max)
    }

    /// Element-wise diameters.
    pub fn diameters(&self) -> Vec<f64> {
        self.elements.iter().map(Element::len).collect()
    }

    /// Bisects every element.
    pub fn uniform_refine(&self) -> BoundaryMesh {
        let elements = self
            .elements
            .iter()
            .enumerate()
            .flat_map(|(i, e)| e.bisect(i))
            .collect();
        BoundaryMesh {
            curve: Arc::clone(&self.curve),
            elements,
            level: self.level + 1,
            gamma_bound: self.gamma_bound,
        }
    }

    /// Bisects every marked element, then keeps bisecting the larger element
    /// of any touching pair whose diameter ratio exceeds `gamma_bound`.
    pub fn refine_marked(&self, marked: &BTreeSet<usize>) -> Result<BoundaryMesh> {
        if let Some(&bad) = marked.iter().find(|&&id| id >= self.len()) {
            return Err(AbemError::InvalidElement(bad));
        }
        if marked.is_empty() {
            return Ok(self.clone());
        }
        let mut flags = vec![false; self.len()];
        for &id in marked {
            flags[id] = true;
        }
        Ok(self.enforce_mesh_ratio(flags))
    }

    fn enforce_mesh_ratio(&self, first: Vec<bool>) -> BoundaryMesh {
        // (element, id of its ancestor on the input level)
        let mut current: Vec<(Element, usize)> = self
            .elements
            .iter()
            .enumerate()
            .map(|(i, e)| (*e, i))
            .collect();
        let mut flags = first;
        let closed = self.is_closed();
        let gamma = self.gamma_bound * (1.0 + 1e-12);
        loop {
            let mut next = Vec::with_capacity(current.len() + flags.len());
            for ((e, anc), &split) in current.iter().zip(&flags) {
                if split {
                    next.extend(e.bisect(*anc).into_iter().map(|s| (s, *anc)));
                } else {
                    next.push((*e, *anc));
                }
            }
            current = next;
            let n = current.len();
            flags = vec![false; n];
            let mut any = false;
            let last = if closed && n > 2 { n } else { n - 1 };
            for i in 0..last {
                let j = (i + 1) % n;
                let (a, b) = (current[i].0.len(), current[j].0.len());
                if a > gamma * b {
                    flags[i] = true;
                    any = true;
                } else if b > gamma * a {
                    flags[j] = true;
                    any = true;
                }
            }
            if !any {
                break;
            }
        }
        let elements = current
            .into_iter()
            .map(|(mut e, anc)| {
                e.parent = Some(anc);
                e
            })
            .collect();
        BoundaryMesh {
            curve: Arc::clone(&self.curve),
            elements,
            level: self.level + 1,
            gamma_bound: self.gamma_bound,
        }
    }

    /// Index of the node located at `p` (up to a relative tolerance).
    pub fn find_node(&self, p: Point) -> Option<usize> {
        let tol = 1e-12 * self.curve.diameter();
        (0..self.node_count()).find(|&i| self.node(i).dist(p) <= tol)
    }

    pub fn node_patch(&self, p: Point) -> Result<NodePatch> {
        let i = self
            .find_node(p)
            .ok_or(AbemError::NotANode { x: p.x, y: p.y })?;
        Ok(self.node_patch_at(i))
    }

    pub fn node_patch_at(&self, i: usize) -> NodePatch {
        let elements = self.node_elements(i);
        let mut pts: Vec<Point> = Vec::with_capacity(4);
        for &e in &elements {
            pts.push(self.elements[e].start);
            pts.push(self.elements[e].end);
        }
        let mut diameter: f64 = 0.0;
        for (k, a) in pts.iter().enumerate() {
            for b in &pts[k + 1..] {
                diameter = diameter.max(a.dist(*b));
            }
        }
        NodePatch {
            node: self.node(i),
            node_index: i,
            elements,
            diameter,
        }
    }

    /// k-fold neighborhood of `seed`: `k = 0` is the seed itself, each
    /// further step adds every element touching the previous set.
    pub fn k_patch(&self, seed: &BTreeSet<usize>, k: usize) -> Result<BTreeSet<usize>> {
        if let Some(&bad) = seed.iter().find(|&&id| id >= self.len()) {
            return Err(AbemError::InvalidElement(bad));
        }
        let mut set = seed.clone();
        for _ in 0..k {
            let grown: Vec<usize> = set.iter().flat_map(|&e| self.neighbors(e)).collect();
            let before = set.len();
            set.extend(grown);
            if set.len() == before {
                break;
            }
        }
        Ok(set)
    }

    /// Elements of this mesh that do not survive unchanged into `next`,
    /// which must be the direct successor produced by refinement.
    pub fn refined_elements(&self, next: &BoundaryMesh) -> BTreeSet<usize> {
        let mut count = vec![0usize; self.len()];
        for e in &next.elements {
            if let Some(p) = e.parent {
                if p < count.len() {
                    count[p] += 1;
                }
            }
        }
        (0..self.len()).filter(|&i| count[i] != 1).collect()
    }

    /// Checks that `next` is the direct successor of `self`: parent ids are
    /// valid and every element lies inside its parent.
    pub fn check_successor(&self, next: &BoundaryMesh) -> Result<()> {
        if next.level != self.level + 1 {
            return Err(AbemError::NotNested(format!(
                "level {} does not follow level {}",
                next.level, self.level
            )));
        }
        let tol = 1e-12 * self.curve.length();
        for (i, e) in next.elements.iter().enumerate() {
            let p = e
                .parent
                .ok_or_else(|| AbemError::NotNested(format!("element {i} has no parent")))?;
            let parent = self.elements.get(p).ok_or_else(|| {
                AbemError::NotNested(format!("element {i} has unknown parent {p}"))
            })?;
            if e.arc_start < parent.arc_start - tol || e.arc_end > parent.arc_end + tol {
                return Err(AbemError::NotNested(format!(
                    "element {i} is not contained in its parent {p}"
                )));
            }
        }
        Ok(())
    }

    /// For each element of `fine`, the element of `self` containing it.
    /// Fails unless every node of `self` is a node of `fine`.
    pub fn ancestor_map(&self, fine: &BoundaryMesh) -> Result<Vec<usize>> {
        if !Arc::ptr_eq(&self.curve, &fine.curve) && *self.curve != *fine.curve {
            return Err(AbemError::NotNested(
                "meshes live on different curves".into(),
            ));
        }
        let round = 8.0 * f64::EPSILON * self.curve.length();
        let mut map = Vec::with_capacity(fine.len());
        let mut c = 0;
        for (i, e) in fine.elements.iter().enumerate() {
            // graded meshes go far below any fixed fraction of the curve
            let tol = (1e-6 * (e.arc_end - e.arc_start)).max(round);
            while c < self.len() && self.elements[c].arc_end <= e.arc_start + tol {
                c += 1;
            }
            let coarse = self.elements.get(c).ok_or_else(|| {
                AbemError::NotNested(format!("fine element {i} lies beyond the coarse mesh"))
            })?;
            if e.arc_start < coarse.arc_start - tol || e.arc_end > coarse.arc_end + tol {
                return Err(AbemError::NotNested(format!(
                    "fine element {i} straddles a coarse node"
                )));
            }
            map.push(c);
        }
        Ok(map)
    }

    /// Whether every node of `self` is a node of `fine`.
    pub fn is_nested_in(&self, fine: &BoundaryMesh) -> bool {
        self.ancestor_map(fine).is_ok()
    }

    /// Plain-text snapshot, one element per line:
    /// `level element_id parent_id x0 y0 x1 y1` (parent `-1` for roots).
    pub fn snapshot(&self) -> String {
        let mut out = String::new();
        for (i, e) in self.elements.iter().enumerate() {
            let parent = e.parent.map_or(-1, |p| p as i64);
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {}",
                self.level, i, parent, e.start.x, e.start.y, e.end.x, e.end.y
            );
        }
        out
    }

    /// Locates the element containing `p` in its interior and the local
    /// parameter of `p`. Points within `rel_tol * len` of an element
    /// endpoint are reported as `Err(PointAtEndpoint)`.
    pub fn locate(&self, p: Point) -> Result<(usize, f64)> {
        let scale = self.curve.diameter();
        let mut best: Option<(usize, f64, f64)> = None;
        for (i, e) in self.elements.iter().enumerate() {
            let len = e.len();
            let t = (p - e.start).dot(e.end - e.start) / (len * len);
            let tc = t.clamp(0.0, 1.0);
            let d = p.dist(e.point_at(tc));
            if best.is_none_or(|(_, _, bd)| d < bd) {
                best = Some((i, t, d));
            }
        }
        let (i, t, d) = best.expect("mesh has elements");
        if d > 1e-10 * scale {
            return Err(AbemError::PointOffCurve { x: p.x, y: p.y });
        }
        let len = self.elements[i].len();
        if t * len <= 1e-12 * scale || (1.0 - t) * len <= 1e-12 * scale {
            return Err(AbemError::PointAtEndpoint { x: p.x, y: p.y });
        }
        Ok((i, t))
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 1.0) || !gamma.is_finite() {
        return Err(AbemError::InvalidParameter {
            name: "gamma_bound",
            reason: format!("must be a finite value above 1, got {gamma}"),
        });
    }
    Ok(())
}
