//! Uniform Cartesian partitions of axis-aligned boxes in 2D/3D with
//! classified faces and per-element nodal points.

use crate::Point;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("dimension must be 2 or 3, got {0}")]
    BadDimension(usize),
    #[error("zero cells on axis {0}")]
    ZeroCells(usize),
    #[error("degenerate box on axis {axis}: lower {lower} >= upper {upper}")]
    DegenerateBox { axis: usize, lower: f64, upper: f64 },
    #[error("PML width {delta} is not an integer multiple of the mesh size {h} on axis {axis}")]
    DeltaNotMultiple { delta: f64, h: f64, axis: usize },
    #[error("point {0:?} lies outside the mesh domain")]
    OutsideDomain(Point),
    #[error("nodal rule must place at least one point per element")]
    EmptyNodalRule,
}

/// Description of a uniform Cartesian partition of an axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub dim: usize,
    pub lower: Point,
    pub upper: Point,
    pub cells_per_axis: [usize; 3],
}

impl MeshSpec {
    pub fn new_2d(lower: [f64; 2], upper: [f64; 2], cells: [usize; 2]) -> Self {
        MeshSpec {
            dim: 2,
            lower: [lower[0], lower[1], 0.0],
            upper: [upper[0], upper[1], 0.0],
            cells_per_axis: [cells[0], cells[1], 1],
        }
    }

    pub fn new_3d(lower: [f64; 3], upper: [f64; 3], cells: [usize; 3]) -> Self {
        MeshSpec { dim: 3, lower, upper, cells_per_axis: cells }
    }

    fn validate(&self) -> Result<(), MeshError> {
        if self.dim != 2 && self.dim != 3 {
            return Err(MeshError::BadDimension(self.dim));
        }
        for a in 0..self.dim {
            if self.cells_per_axis[a] == 0 {
                return Err(MeshError::ZeroCells(a));
            }
            if self.upper[a] <= self.lower[a] {
                return Err(MeshError::DegenerateBox {
                    axis: a,
                    lower: self.lower[a],
                    upper: self.upper[a],
                });
            }
        }
        Ok(())
    }
}

/// Placement rule for the nodal points carried by each element.
///
/// `count` points are placed along the main diagonal of the element at
/// Chebyshev positions `(1 - cos((2k+1)pi/(2L)))/2`; a single point lands
/// exactly at the element center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodalRule {
    pub count: usize,
}

impl Default for NodalRule {
    fn default() -> Self {
        NodalRule { count: 1 }
    }
}

impl NodalRule {
    pub fn new(count: usize) -> Self {
        NodalRule { count }
    }

    /// Relative positions in [0,1] along each axis, shared by all axes.
    pub fn relative_positions(&self) -> Vec<f64> {
        let l = self.count;
        (0..l)
            .map(|k| 0.5 * (1.0 - ((2 * k + 1) as f64 * std::f64::consts::PI / (2 * l) as f64).cos()))
            .collect()
    }
}

/// Which side of the domain box a boundary face belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Side {
    pub axis: usize,
    pub upper: bool,
}

impl Side {
    pub const fn new(axis: usize, upper: bool) -> Self {
        Side { axis, upper }
    }

    pub fn outward_normal(&self, dim: usize) -> Point {
        let mut n = [0.0; 3];
        debug_assert!(self.axis < dim);
        n[self.axis] = if self.upper { 1.0 } else { -1.0 };
        n
    }

    pub fn name(&self) -> &'static str {
        match (self.axis, self.upper) {
            (0, false) => "xmin",
            (0, true) => "xmax",
            (1, false) => "ymin",
            (1, true) => "ymax",
            (2, false) => "zmin",
            (2, true) => "zmax",
            _ => "invalid",
        }
    }

    pub fn parse(s: &str) -> Option<Side> {
        match s {
            "xmin" => Some(Side::new(0, false)),
            "xmax" => Some(Side::new(0, true)),
            "ymin" => Some(Side::new(1, false)),
            "ymax" => Some(Side::new(1, true)),
            "zmin" => Some(Side::new(2, false)),
            "zmax" => Some(Side::new(2, true)),
            _ => None,
        }
    }
}

/// Boundary condition tag attached to a boundary face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryTag {
    Impedance,
    Dirichlet,
    Neumann,
    PmlOuter,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FaceKind {
    /// Shared by two elements. `lo` is the element on the lower side along
    /// `axis` (its outward normal is +e_axis), `hi` the one on the upper
    /// side (outward normal -e_axis).
    Interior { lo: usize, hi: usize },
    Boundary { element: usize, side: Side, tag: BoundaryTag },
}

/// Codimension-1 facet of the partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub id: usize,
    /// Axis the face is perpendicular to.
    pub axis: usize,
    pub kind: FaceKind,
    /// Lower corner of the face rectangle (the `axis` component is the
    /// face plane position).
    pub corner: Point,
    /// Extent along every axis; zero along `axis`.
    pub extent: Point,
}

impl Face {
    pub fn is_interior(&self) -> bool {
        matches!(self.kind, FaceKind::Interior { .. })
    }

    /// Surface measure of the face.
    pub fn measure(&self, dim: usize) -> f64 {
        (0..dim).filter(|&a| a != self.axis).map(|a| self.extent[a]).product()
    }
}

/// Lightweight per-element view: geometry plus nodal points.
#[derive(Debug, Clone)]
pub struct Element {
    pub index: usize,
    pub dim: usize,
    pub lower: Point,
    pub upper: Point,
    pub nodal_points: Vec<Point>,
}

impl Element {
    /// Vertex `j` in tensor order: bit a of `j` selects lower/upper on axis a.
    pub fn vertex(&self, j: usize) -> Point {
        let mut v = [0.0; 3];
        for a in 0..self.dim {
            v[a] = if (j >> a) & 1 == 1 { self.upper[a] } else { self.lower[a] };
        }
        v
    }

    pub fn n_vertices(&self) -> usize {
        1 << self.dim
    }

    pub fn center(&self) -> Point {
        let mut c = [0.0; 3];
        for a in 0..self.dim {
            c[a] = 0.5 * (self.lower[a] + self.upper[a]);
        }
        c
    }

    pub fn contains(&self, x: &Point, tol: f64) -> bool {
        (0..self.dim).all(|a| x[a] >= self.lower[a] - tol && x[a] <= self.upper[a] + tol)
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|a| self.upper[a] - self.lower[a]).product()
    }
}

/// Uniform Cartesian mesh, immutable after construction.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub dim: usize,
    pub lower: Point,
    pub upper: Point,
    pub cells: [usize; 3],
    /// Element size per axis.
    pub h: Point,
    pub nodal_rule: NodalRule,
    pub faces: Vec<Face>,
    /// Box of the physical (non-PML) region; equals the mesh box when no
    /// PML extension was applied.
    pub physical_lower: Point,
    pub physical_upper: Point,
}

/// Build a mesh from a spec. Elements are indexed lexicographically with x
/// fastest; faces are enumerated axis by axis, positions lexicographic, so
/// rebuilding reproduces identical indexing.
pub fn build_mesh(spec: &MeshSpec, nodal_rule: NodalRule) -> Result<Mesh, MeshError> {
    spec.validate()?;
    if nodal_rule.count == 0 {
        return Err(MeshError::EmptyNodalRule);
    }
    let mut h = [0.0; 3];
    let mut cells = [1usize; 3];
    for a in 0..spec.dim {
        cells[a] = spec.cells_per_axis[a];
        h[a] = (spec.upper[a] - spec.lower[a]) / cells[a] as f64;
    }
    let mut mesh = Mesh {
        dim: spec.dim,
        lower: spec.lower,
        upper: spec.upper,
        cells,
        h,
        nodal_rule,
        faces: Vec::new(),
        physical_lower: spec.lower,
        physical_upper: spec.upper,
    };
    mesh.enumerate_faces();
    Ok(mesh)
}

impl Mesh {
    pub fn n_elements(&self) -> usize {
        (0..self.dim).map(|a| self.cells[a]).product()
    }

    /// Uniform mesh size used in penalty scalings: the largest axis size.
    pub fn h_max(&self) -> f64 {
        (0..self.dim).fold(0.0f64, |m, a| m.max(self.h[a]))
    }

    pub fn element_coords(&self, idx: usize) -> [usize; 3] {
        let nx = self.cells[0];
        let ny = self.cells[1];
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    pub fn element_index(&self, c: [usize; 3]) -> usize {
        c[0] + self.cells[0] * (c[1] + self.cells[1] * c[2])
    }

    pub fn element(&self, idx: usize) -> Element {
        let c = self.element_coords(idx);
        let mut lower = [0.0; 3];
        let mut upper = [0.0; 3];
        for a in 0..self.dim {
            lower[a] = self.lower[a] + c[a] as f64 * self.h[a];
            upper[a] = self.lower[a] + (c[a] + 1) as f64 * self.h[a];
        }
        let rel = self.nodal_rule.relative_positions();
        let nodal_points = rel
            .iter()
            .map(|&t| {
                let mut p = [0.0; 3];
                for a in 0..self.dim {
                    p[a] = lower[a] + t * (upper[a] - lower[a]);
                }
                p
            })
            .collect();
        Element { index: idx, dim: self.dim, lower, upper, nodal_points }
    }

    /// Whether an element lies in the physical (non-PML) region.
    pub fn is_physical(&self, idx: usize) -> bool {
        let e = self.element(idx);
        let c = e.center();
        (0..self.dim).all(|a| {
            c[a] > self.physical_lower[a] - 1e-12 && c[a] < self.physical_upper[a] + 1e-12
        })
    }

    pub fn physical_elements(&self) -> Vec<usize> {
        (0..self.n_elements()).filter(|&k| self.is_physical(k)).collect()
    }

    fn enumerate_faces(&mut self) {
        self.faces.clear();
        let dim = self.dim;
        let mut id = 0;
        for axis in 0..dim {
            // Transverse axes in increasing order.
            let other: Vec<usize> = (0..dim).filter(|&a| a != axis).collect();
            let n_axis = self.cells[axis];
            let mut trans_counts = [1usize; 2];
            for (i, &a) in other.iter().enumerate() {
                trans_counts[i] = self.cells[a];
            }
            let n_trans: usize = trans_counts.iter().product();
            for pos in 0..=n_axis {
                for t in 0..n_trans {
                    let mut tc = [0usize; 2];
                    tc[0] = t % trans_counts[0];
                    tc[1] = t / trans_counts[0];
                    let mut coords = [0usize; 3];
                    for (i, &a) in other.iter().enumerate() {
                        coords[a] = tc[i];
                    }
                    let mut corner = [0.0; 3];
                    let mut extent = [0.0; 3];
                    for &a in &other {
                        corner[a] = self.lower[a] + coords[a] as f64 * self.h[a];
                        extent[a] = self.h[a];
                    }
                    corner[axis] = self.lower[axis] + pos as f64 * self.h[axis];
                    let kind = if pos == 0 {
                        coords[axis] = 0;
                        FaceKind::Boundary {
                            element: self.element_index(coords),
                            side: Side::new(axis, false),
                            tag: BoundaryTag::Impedance,
                        }
                    } else if pos == n_axis {
                        coords[axis] = n_axis - 1;
                        FaceKind::Boundary {
                            element: self.element_index(coords),
                            side: Side::new(axis, true),
                            tag: BoundaryTag::Impedance,
                        }
                    } else {
                        coords[axis] = pos - 1;
                        let lo = self.element_index(coords);
                        coords[axis] = pos;
                        let hi = self.element_index(coords);
                        FaceKind::Interior { lo, hi }
                    };
                    self.faces.push(Face { id, axis, kind, corner, extent });
                    id += 1;
                }
            }
        }
    }

    /// Re-tag boundary faces: faces on `sides` get `tag`, the rest keep
    /// their current tag.
    pub fn tag_boundary(&mut self, sides: &[Side], tag: BoundaryTag) {
        for f in &mut self.faces {
            if let FaceKind::Boundary { side, tag: t, .. } = &mut f.kind {
                if sides.contains(side) {
                    *t = tag;
                }
            }
        }
    }

    pub fn interior_faces(&self) -> impl Iterator<Item = &Face> {
        self.faces.iter().filter(|f| f.is_interior())
    }

    pub fn boundary_faces(&self) -> impl Iterator<Item = &Face> {
        self.faces.iter().filter(|f| !f.is_interior())
    }

    /// Extend the mesh by `delta` on every side for a PML region.
    /// `delta` must be an integer multiple of the mesh size on every axis;
    /// `delta = 0` returns an identical mesh.
    pub fn extend_for_pml(&self, delta: f64) -> Result<Mesh, MeshError> {
        let all: Vec<Side> = (0..self.dim)
            .flat_map(|a| [Side::new(a, false), Side::new(a, true)])
            .collect();
        self.extend_for_pml_sides(delta, &all)
    }

    /// Extend the mesh by `delta` on the given sides only. The original box
    /// is recorded as the physical region; new elements are PML cells.
    pub fn extend_for_pml_sides(&self, delta: f64, sides: &[Side]) -> Result<Mesh, MeshError> {
        if delta == 0.0 || sides.is_empty() {
            return Ok(self.clone());
        }
        let mut lower = self.lower;
        let mut upper = self.upper;
        let mut cells = self.cells;
        for side in sides {
            let a = side.axis;
            let ratio = delta / self.h[a];
            let k = ratio.round();
            if k < 1.0 || (ratio - k).abs() > 1e-9 * ratio.max(1.0) {
                return Err(MeshError::DeltaNotMultiple { delta, h: self.h[a], axis: a });
            }
            let k = k as usize;
            cells[a] += k;
            if side.upper {
                upper[a] += k as f64 * self.h[a];
            } else {
                lower[a] -= k as f64 * self.h[a];
            }
        }
        let mut mesh = Mesh {
            dim: self.dim,
            lower,
            upper,
            cells,
            h: self.h,
            nodal_rule: self.nodal_rule,
            faces: Vec::new(),
            physical_lower: self.physical_lower,
            physical_upper: self.physical_upper,
        };
        mesh.enumerate_faces();
        Ok(mesh)
    }

    /// Containing element of a point. Points on shared facets resolve to
    /// the lexicographically smallest incident element.
    pub fn locate(&self, x: &Point) -> Result<usize, MeshError> {
        let mut coords = [0usize; 3];
        for a in 0..self.dim {
            let tol = 1e-12 * (1.0 + self.h[a].abs());
            if x[a] < self.lower[a] - tol || x[a] > self.upper[a] + tol {
                return Err(MeshError::OutsideDomain(*x));
            }
            let t = (x[a] - self.lower[a]) / self.h[a];
            let mut i = t.floor() as isize;
            // A point exactly on a facet belongs to the lower element.
            if i > 0 && (t - i as f64).abs() * self.h[a] <= tol {
                i -= 1;
            }
            let i = i.clamp(0, self.cells[a] as isize - 1) as usize;
            coords[a] = i;
        }
        Ok(self.element_index(coords))
    }

    pub fn domain_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.upper[a] - self.lower[a]).product()
    }
}
