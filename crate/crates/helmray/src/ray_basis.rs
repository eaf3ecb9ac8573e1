//! Local approximation spaces: products of multilinear Lagrange shape
//! functions with locally linearized plane-wave phases.
//!
//! Each element carries a set of modulations (nodal anchor, unit direction,
//! local slowness). A modulation with zero direction is the unmodulated
//! case and reproduces the plain bilinear DG space.

use crate::fields::{dot, WaveSpeed};
use crate::mesh::{Element, Mesh};
use crate::{CGrad, Complex64, Point};
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BasisError {
    #[error("direction set covers {covered} elements, mesh has {expected}")]
    CoverageMismatch { covered: usize, expected: usize },
    #[error("element {0} has an empty direction list")]
    EmptyDirections(usize),
    #[error("direction {0:?} is not unit length")]
    NotUnit(Point),
    #[error("direction file: {0}")]
    Format(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Field(#[from] crate::fields::FieldError),
}

/// Directions attached to one nodal point of one element.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalDirections {
    pub anchor: Point,
    /// 1/c at the anchor; zero marks the unmodulated (plain bilinear) case.
    pub inv_speed: f64,
    pub directions: Vec<Point>,
}

/// Ray directions for every element of a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    pub dim: usize,
    /// Indexed by element, then nodal point.
    pub per_element: Vec<Vec<NodalDirections>>,
}

impl DirectionSet {
    /// Same unit directions at every nodal point of every element.
    pub fn uniform(mesh: &Mesh, ws: &WaveSpeed, dirs: &[Point]) -> Result<Self, BasisError> {
        Self::from_fn(mesh, ws, |_, _, _| dirs.to_vec())
    }

    /// Per-nodal-point directions from a callback `(element, l, anchor)`.
    pub fn from_fn(
        mesh: &Mesh,
        ws: &WaveSpeed,
        mut f: impl FnMut(usize, usize, &Point) -> Vec<Point>,
    ) -> Result<Self, BasisError> {
        let mut per_element = Vec::with_capacity(mesh.n_elements());
        for e in 0..mesh.n_elements() {
            let elem = mesh.element(e);
            let mut nodal = Vec::with_capacity(elem.nodal_points.len());
            for (l, anchor) in elem.nodal_points.iter().enumerate() {
                let dirs = f(e, l, anchor);
                for d in &dirs {
                    let norm = dot(d, d).sqrt();
                    if (norm - 1.0).abs() > 1e-12 {
                        return Err(BasisError::NotUnit(*d));
                    }
                }
                nodal.push(NodalDirections {
                    anchor: *anchor,
                    inv_speed: 1.0 / ws.eval(anchor)?,
                    directions: dirs,
                });
            }
            per_element.push(nodal);
        }
        Ok(DirectionSet { dim: mesh.dim, per_element })
    }

    /// The unmodulated set: one zero direction per element, giving the
    /// standard bilinear DG space.
    pub fn zero_phase(mesh: &Mesh) -> Self {
        let per_element = (0..mesh.n_elements())
            .map(|e| {
                let elem = mesh.element(e);
                vec![NodalDirections {
                    anchor: elem.center(),
                    inv_speed: 0.0,
                    directions: vec![[0.0; 3]],
                }]
            })
            .collect();
        DirectionSet { dim: mesh.dim, per_element }
    }

    /// Text serialization: one line `elem l d_1 .. d_dim` per direction.
    pub fn write<W: Write>(&self, mut w: W) -> Result<(), BasisError> {
        for (e, nodal) in self.per_element.iter().enumerate() {
            for (l, nd) in nodal.iter().enumerate() {
                for d in &nd.directions {
                    write!(w, "{e} {l}")?;
                    for a in 0..self.dim {
                        write!(w, " {:.17e}", d[a])?;
                    }
                    writeln!(w)?;
                }
            }
        }
        Ok(())
    }

    /// Parse the text format against a mesh (anchors and local speeds are
    /// recomputed from the mesh nodal rule).
    pub fn read<R: BufRead>(reader: R, mesh: &Mesh, ws: &WaveSpeed) -> Result<Self, BasisError> {
        let l_count = mesh.nodal_rule.count;
        let mut collected: Vec<Vec<Vec<Point>>> =
            vec![vec![Vec::new(); l_count]; mesh.n_elements()];
        for (ln, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 2 + mesh.dim {
                return Err(BasisError::Format(format!(
                    "line {}: expected {} tokens, got {}",
                    ln + 1,
                    2 + mesh.dim,
                    toks.len()
                )));
            }
            let parse =
                |s: &str| s.parse::<f64>().map_err(|e| BasisError::Format(format!("line {}: {e}", ln + 1)));
            let e = parse(toks[0])? as usize;
            let l = parse(toks[1])? as usize;
            if e >= mesh.n_elements() || l >= l_count {
                return Err(BasisError::Format(format!("line {}: index out of range", ln + 1)));
            }
            let mut d = [0.0; 3];
            for a in 0..mesh.dim {
                d[a] = parse(toks[2 + a])?;
            }
            collected[e][l].push(d);
        }
        Self::from_fn(mesh, ws, |e, l, _| collected[e][l].clone())
    }
}

/// One modulation of an element's shape functions.
#[derive(Debug, Clone, PartialEq)]
pub struct Modulation {
    pub nodal_index: usize,
    pub anchor: Point,
    pub direction: Point,
    pub inv_speed: f64,
}

impl Modulation {
    fn phase_at(&self, omega: f64, x: &Point) -> f64 {
        let rel = [x[0] - self.anchor[0], x[1] - self.anchor[1], x[2] - self.anchor[2]];
        omega * self.inv_speed * dot(&self.direction, &rel)
    }
}

/// Identity of one global DOF: element, modulation, vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofId {
    pub element: usize,
    pub modulation: usize,
    pub vertex: usize,
}

/// All DOFs of the ray space, grouped contiguously by element.
#[derive(Debug, Clone)]
pub struct BasisTable {
    pub dim: usize,
    pub omega: f64,
    /// Modulations per element.
    pub mods: Vec<Vec<Modulation>>,
    /// Global DOF offset of each element; one extra entry holds the total.
    pub offsets: Vec<usize>,
}

/// Multilinear Lagrange shape value of vertex `j` at `x`.
/// Panics if `j` is out of range for the element dimension.
pub fn lagrange_shape(element: &Element, j: usize, x: &Point) -> f64 {
    assert!(j < element.n_vertices(), "vertex index {j} out of range");
    let mut v = 1.0;
    for a in 0..element.dim {
        let t = (x[a] - element.lower[a]) / (element.upper[a] - element.lower[a]);
        v *= if (j >> a) & 1 == 1 { t } else { 1.0 - t };
    }
    v
}

/// Gradient of the multilinear shape function of vertex `j` at `x`.
pub fn lagrange_gradient(element: &Element, j: usize, x: &Point) -> Point {
    assert!(j < element.n_vertices(), "vertex index {j} out of range");
    let mut grad = [0.0; 3];
    for a in 0..element.dim {
        let mut g = 1.0;
        for b in 0..element.dim {
            let hb = element.upper[b] - element.lower[b];
            let t = (x[b] - element.lower[b]) / hb;
            if b == a {
                g *= if (j >> b) & 1 == 1 { 1.0 / hb } else { -1.0 / hb };
            } else {
                g *= if (j >> b) & 1 == 1 { t } else { 1.0 - t };
            }
        }
        grad[a] = g;
    }
    grad
}

/// Build the global DOF table for a direction set at frequency `omega`.
///
/// Every (nodal point, direction) pair becomes a distinct modulation;
/// near-parallel directions within one element are kept with a warning
/// since the penalty term leaves the system solvable but ill-conditioned.
pub fn build_space(mesh: &Mesh, dirs: &DirectionSet, omega: f64) -> Result<BasisTable, BasisError> {
    if dirs.per_element.len() != mesh.n_elements() {
        return Err(BasisError::CoverageMismatch {
            covered: dirs.per_element.len(),
            expected: mesh.n_elements(),
        });
    }
    let n_verts = 1usize << mesh.dim;
    let mut mods: Vec<Vec<Modulation>> = Vec::with_capacity(mesh.n_elements());
    let mut offsets = Vec::with_capacity(mesh.n_elements() + 1);
    let mut offset = 0usize;
    let mut near_parallel = 0usize;
    for (e, nodal) in dirs.per_element.iter().enumerate() {
        let mut elem_mods: Vec<Modulation> = Vec::new();
        for (l, nd) in nodal.iter().enumerate() {
            for d in &nd.directions {
                for m in &elem_mods {
                    let cosang = dot(&m.direction, d);
                    if cosang > (1.0 - 5e-7) && dot(&m.direction, &m.direction) > 0.5 {
                        near_parallel += 1;
                    }
                }
                elem_mods.push(Modulation {
                    nodal_index: l,
                    anchor: nd.anchor,
                    direction: *d,
                    inv_speed: nd.inv_speed,
                });
            }
        }
        if elem_mods.is_empty() {
            return Err(BasisError::EmptyDirections(e));
        }
        offsets.push(offset);
        offset += elem_mods.len() * n_verts;
        mods.push(elem_mods);
    }
    offsets.push(offset);
    if near_parallel > 0 {
        log::warn!(
            "{near_parallel} near-parallel direction pairs (angle < 1e-3 rad) within elements; \
             the system stays solvable but may be ill-conditioned"
        );
    }
    Ok(BasisTable { dim: mesh.dim, omega, mods, offsets })
}

impl BasisTable {
    pub fn n_dofs(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn n_verts(&self) -> usize {
        1 << self.dim
    }

    pub fn element_dofs(&self, e: usize) -> std::ops::Range<usize> {
        self.offsets[e]..self.offsets[e] + self.mods[e].len() * self.n_verts()
    }

    /// (modulation index, vertex index) of a local DOF; vertex-fastest.
    pub fn split_local(&self, local: usize) -> (usize, usize) {
        (local / self.n_verts(), local % self.n_verts())
    }

    pub fn dof_id(&self, global: usize) -> DofId {
        let e = match self.offsets.binary_search(&global) {
            Ok(i) => {
                // offsets has a trailing total; an exact hit on it cannot
                // happen for a valid dof index.
                i
            }
            Err(i) => i - 1,
        };
        let (m, j) = self.split_local(global - self.offsets[e]);
        DofId { element: e, modulation: m, vertex: j }
    }

    /// Value of one local basis function at `x` inside `element`.
    pub fn eval_value(&self, element: &Element, modulation: usize, vertex: usize, x: &Point) -> Complex64 {
        let m = &self.mods[element.index][modulation];
        let shape = lagrange_shape(element, vertex, x);
        let phase = m.phase_at(self.omega, x);
        Complex64::from_polar(shape, phase)
    }

    /// Value and gradient of one local basis function at `x`.
    pub fn eval_value_grad(
        &self,
        element: &Element,
        modulation: usize,
        vertex: usize,
        x: &Point,
    ) -> (Complex64, CGrad) {
        let m = &self.mods[element.index][modulation];
        let shape = lagrange_shape(element, vertex, x);
        let sgrad = lagrange_gradient(element, vertex, x);
        let osc = Complex64::from_polar(1.0, m.phase_at(self.omega, x));
        let value = shape * osc;
        let mut grad = [Complex64::new(0.0, 0.0); 3];
        let k = self.omega * m.inv_speed;
        for a in 0..self.dim {
            grad[a] = (Complex64::new(sgrad[a], 0.0)
                + Complex64::new(0.0, k * m.direction[a]) * shape)
                * osc;
        }
        (value, grad)
    }

    /// Evaluate a coefficient field at `x` inside `element`.
    pub fn eval_field(&self, element: &Element, coeffs: &[Complex64], x: &Point) -> Complex64 {
        let base = self.offsets[element.index];
        let nv = self.n_verts();
        let mut sum = Complex64::new(0.0, 0.0);
        for (mi, _m) in self.mods[element.index].iter().enumerate() {
            for j in 0..nv {
                let c = coeffs[base + mi * nv + j];
                if c != Complex64::new(0.0, 0.0) {
                    sum += c * self.eval_value(element, mi, j, x);
                }
            }
        }
        sum
    }

    /// Evaluate a coefficient field with gradient at `x` inside `element`.
    pub fn eval_field_grad(
        &self,
        element: &Element,
        coeffs: &[Complex64],
        x: &Point,
    ) -> (Complex64, CGrad) {
        let base = self.offsets[element.index];
        let nv = self.n_verts();
        let mut sum = Complex64::new(0.0, 0.0);
        let mut grad = [Complex64::new(0.0, 0.0); 3];
        for mi in 0..self.mods[element.index].len() {
            for j in 0..nv {
                let c = coeffs[base + mi * nv + j];
                let (v, g) = self.eval_value_grad(element, mi, j, x);
                sum += c * v;
                for a in 0..self.dim {
                    grad[a] += c * g[a];
                }
            }
        }
        (sum, grad)
    }

    /// Marks DOFs whose Lagrange factor vanishes on the mesh boundary
    /// (membership in the interior subspace).
    pub fn interior_subspace_mask(&self, mesh: &Mesh) -> Vec<bool> {
        let sides: Vec<crate::mesh::Side> = (0..self.dim)
            .flat_map(|a| [crate::mesh::Side::new(a, false), crate::mesh::Side::new(a, true)])
            .collect();
        self.interior_mask_for_sides(mesh, &sides)
    }

    /// Interior mask relative to selected boundary sides only: a DOF is
    /// masked out when its vertex lies on one of the given sides.
    pub fn interior_mask_for_sides(&self, mesh: &Mesh, sides: &[crate::mesh::Side]) -> Vec<bool> {
        let mut mask = vec![true; self.n_dofs()];
        let nv = self.n_verts();
        for e in 0..mesh.n_elements() {
            let elem = mesh.element(e);
            for j in 0..nv {
                let v = elem.vertex(j);
                let on_side = sides.iter().any(|s| {
                    let bound = if s.upper { mesh.upper[s.axis] } else { mesh.lower[s.axis] };
                    (v[s.axis] - bound).abs() <= 1e-12 * (1.0 + bound.abs())
                });
                if on_side {
                    for mi in 0..self.mods[e].len() {
                        mask[self.offsets[e] + mi * nv + j] = false;
                    }
                }
            }
        }
        mask
    }
}
