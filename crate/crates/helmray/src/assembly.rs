//! Assembly of the IPDG sesquilinear forms and right-hand sides over the
//! ray space, for impedance, Cauchy, and PML boundary handling.
//!
//! All inner products conjugate the second (test) argument. Element and
//! face contributions are computed in parallel and merged in deterministic
//! element/face order, so assembled matrices are bit-identical across runs
//! and worker counts.

use crate::fields::{FieldError, SourceTerm, WaveSpeed};
use crate::mesh::{BoundaryTag, Element, Face, FaceKind, Mesh, Side};
use crate::quadrature::QuadratureRule;
use crate::ray_basis::BasisTable;
use crate::solver::ComplexSparseSystem;
use crate::{CGrad, Complex64, Point};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("boundary data: {0}")]
    BoundaryData(String),
    #[error("{0}")]
    BadConfig(String),
}

/// Boundary handling of the Helmholtz problem.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryMode {
    /// `grad(u).n + i (omega/c) u = g` on the whole boundary.
    Impedance,
    /// `u = g1` on the Dirichlet sides, `grad(u).n = g2` on the Neumann
    /// sides; the two sets must cover the boundary.
    Cauchy { dirichlet: Vec<Side>, neumann: Vec<Side> },
    /// Complex coordinate stretching outside the physical box with
    /// homogeneous Dirichlet conditions on the outer boundary; sides listed
    /// in `dirichlet` are not stretched and carry `u = g1` moment rows.
    Pml { delta: f64, a_pml: f64, dirichlet: Vec<Side> },
}

/// Parameters of one assembly pass.
#[derive(Debug, Clone)]
pub struct AssemblyConfig {
    pub omega: f64,
    /// Interior penalty a_p.
    pub penalty: f64,
    pub mode: BoundaryMode,
    /// Gauss points per axis; `None` picks automatically from the phase
    /// swing per element.
    pub quad_points: Option<usize>,
}

impl AssemblyConfig {
    pub fn impedance(omega: f64, dim: usize) -> Self {
        AssemblyConfig {
            omega,
            penalty: default_penalty(dim),
            mode: BoundaryMode::Impedance,
            quad_points: None,
        }
    }

    /// Quadrature rule for a mesh/speed pair, warning when an explicit
    /// order under-resolves the oscillation.
    pub fn rule(&self, mesh: &Mesh, ws: &WaveSpeed) -> QuadratureRule {
        let (c_min, _) = ws.bounds();
        let recommended = QuadratureRule::points_for(self.omega, mesh.h_max(), c_min);
        match self.quad_points {
            Some(n) => {
                if n < recommended {
                    log::warn!(
                        "quadrature order {n} below recommended {recommended} for omega*H/c = {:.2}; \
                         oscillatory integrals may be under-resolved",
                        self.omega * mesh.h_max() / c_min
                    );
                }
                QuadratureRule::new(n)
            }
            None => QuadratureRule::new(recommended),
        }
    }
}

/// Default interior penalty: large enough for coercivity on the meshes
/// used here without hurting conditioning.
pub fn default_penalty(dim: usize) -> f64 {
    10.0 * dim as f64
}

/// DG average gradient and jump on an interior face:
/// `{grad u} = (grad u+ + grad u-)/2`, `[[u]] = u+ n+ + u- n-`.
pub fn jump_average(
    u_plus: Complex64,
    grad_plus: &CGrad,
    u_minus: Complex64,
    grad_minus: &CGrad,
    n_plus: &Point,
    n_minus: &Point,
) -> (CGrad, CGrad) {
    let mut avg = [Complex64::new(0.0, 0.0); 3];
    let mut jump = [Complex64::new(0.0, 0.0); 3];
    for a in 0..3 {
        avg[a] = 0.5 * (grad_plus[a] + grad_minus[a]);
        jump[a] = u_plus * n_plus[a] + u_minus * n_minus[a];
    }
    (avg, jump)
}

/// Complex stretching factor `s(t) = 1/(1 + i*gamma(t)/omega)` for one
/// coordinate, with `gamma` ramping quadratically outside `[lo, hi]`.
pub fn pml_stretch(t: f64, lo: f64, hi: f64, omega: f64, delta: f64, a_pml: f64) -> Complex64 {
    let gamma = if t < lo {
        a_pml / (delta * delta) * (t - lo) * (t - lo)
    } else if t > hi {
        a_pml / (delta * delta) * (t - hi) * (t - hi)
    } else {
        0.0
    };
    Complex64::new(1.0, 0.0) / Complex64::new(1.0, gamma / omega)
}

/// How each DOF participates in the assembled square system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RowKind {
    Interior,
    DirichletMoment,
    NeumannMoment,
    Removed,
}

/// Mapping from basis DOFs to system rows/columns. For impedance and Cauchy
/// modes every DOF is kept; PML modes drop DOFs on the stretched outer
/// boundary.
#[derive(Debug, Clone)]
pub struct DofLayout {
    pub(crate) row_kind: Vec<RowKind>,
    sys_index: Vec<Option<usize>>,
    pub(crate) kept: Vec<usize>,
}

impl DofLayout {
    pub fn n_system(&self) -> usize {
        self.kept.len()
    }

    /// Expand a system solution vector to all DOFs, zero on removed ones.
    pub fn expand(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut full = vec![Complex64::new(0.0, 0.0); self.sys_index.len()];
        for (sys, &dof) in self.kept.iter().enumerate() {
            full[dof] = x[sys];
        }
        full
    }
}

/// Assembled system plus its DOF layout.
#[derive(Debug)]
pub struct AssembledSystem {
    pub system: ComplexSparseSystem,
    pub layout: DofLayout,
}

impl AssembledSystem {
    /// Solve and map back to the full DOF vector.
    pub fn solve_expanded(&self) -> Result<(Vec<Complex64>, f64), crate::solver::SolveError> {
        let r = self.system.solve()?;
        Ok((self.layout.expand(&r.x), r.relative_residual))
    }
}

fn vertex_on_sides(mesh: &Mesh, v: &Point, sides: &[Side]) -> bool {
    sides.iter().any(|s| {
        let bound = if s.upper { mesh.upper[s.axis] } else { mesh.lower[s.axis] };
        (v[s.axis] - bound).abs() <= 1e-12 * (1.0 + bound.abs())
    })
}

pub(crate) fn all_sides(dim: usize) -> Vec<Side> {
    (0..dim).flat_map(|a| [Side::new(a, false), Side::new(a, true)]).collect()
}

fn make_layout(
    mesh: &Mesh,
    table: &BasisTable,
    mode: &BoundaryMode,
) -> Result<DofLayout, AssemblyError> {
    let n = table.n_dofs();
    let nv = table.n_verts();
    let mut row_kind = vec![RowKind::Interior; n];
    match mode {
        BoundaryMode::Impedance => {}
        BoundaryMode::Cauchy { dirichlet, neumann } => {
            for s in all_sides(mesh.dim) {
                if !dirichlet.contains(&s) && !neumann.contains(&s) {
                    return Err(AssemblyError::BadConfig(format!(
                        "Cauchy mode leaves side {} uncovered",
                        s.name()
                    )));
                }
            }
            for e in 0..mesh.n_elements() {
                let elem = mesh.element(e);
                for j in 0..nv {
                    let v = elem.vertex(j);
                    let kind = if vertex_on_sides(mesh, &v, dirichlet) {
                        RowKind::DirichletMoment
                    } else if vertex_on_sides(mesh, &v, neumann) {
                        RowKind::NeumannMoment
                    } else {
                        continue;
                    };
                    for mi in 0..table.mods[e].len() {
                        row_kind[table.offsets[e] + mi * nv + j] = kind;
                    }
                }
            }
        }
        BoundaryMode::Pml { dirichlet, .. } => {
            let outer: Vec<Side> =
                all_sides(mesh.dim).into_iter().filter(|s| !dirichlet.contains(s)).collect();
            for e in 0..mesh.n_elements() {
                let elem = mesh.element(e);
                for j in 0..nv {
                    let v = elem.vertex(j);
                    let kind = if vertex_on_sides(mesh, &v, &outer) {
                        RowKind::Removed
                    } else if vertex_on_sides(mesh, &v, dirichlet) {
                        RowKind::DirichletMoment
                    } else {
                        continue;
                    };
                    for mi in 0..table.mods[e].len() {
                        row_kind[table.offsets[e] + mi * nv + j] = kind;
                    }
                }
            }
        }
    }
    let mut sys_index = vec![None; n];
    let mut kept = Vec::with_capacity(n);
    for (dof, kind) in row_kind.iter().enumerate() {
        if *kind != RowKind::Removed {
            sys_index[dof] = Some(kept.len());
            kept.push(dof);
        }
    }
    Ok(DofLayout { row_kind, sys_index, kept })
}

/// Per-axis stretch factors at a point; identity outside PML mode.
fn stretch_at(mesh: &Mesh, cfg: &AssemblyConfig, x: &Point) -> [Complex64; 3] {
    let mut s = [Complex64::new(1.0, 0.0); 3];
    if let BoundaryMode::Pml { delta, a_pml, .. } = &cfg.mode {
        for a in 0..mesh.dim {
            s[a] = pml_stretch(
                x[a],
                mesh.physical_lower[a],
                mesh.physical_upper[a],
                cfg.omega,
                *delta,
                *a_pml,
            );
        }
    }
    s
}

type Triplets = Vec<(usize, usize, Complex64)>;
type RhsEntries = Vec<(usize, Complex64)>;

struct LocalBasis {
    /// values[local_dof][point]
    values: Vec<Vec<Complex64>>,
    grads: Vec<Vec<CGrad>>,
}

fn eval_local_basis(table: &BasisTable, elem: &Element, pts: &[(Point, f64)]) -> LocalBasis {
    let nv = table.n_verts();
    let n_loc = table.mods[elem.index].len() * nv;
    let mut values = vec![Vec::with_capacity(pts.len()); n_loc];
    let mut grads = vec![Vec::with_capacity(pts.len()); n_loc];
    for (loc, (vals, grs)) in values.iter_mut().zip(grads.iter_mut()).enumerate() {
        let (mi, j) = table.split_local(loc);
        for (x, _) in pts {
            let (v, g) = table.eval_value_grad(elem, mi, j, x);
            vals.push(v);
            grs.push(g);
        }
    }
    LocalBasis { values, grads }
}

/// Volume contributions of one element: (stretched) gradient stiffness
/// minus omega^2 mass, plus the source term on the right-hand side.
#[allow(clippy::too_many_arguments)]
fn element_volume(
    mesh: &Mesh,
    table: &BasisTable,
    ws: &WaveSpeed,
    cfg: &AssemblyConfig,
    layout: &DofLayout,
    rule: &QuadratureRule,
    f: &SourceTerm,
    e: usize,
) -> Result<(Triplets, RhsEntries), AssemblyError> {
    let elem = mesh.element(e);
    let pts = rule.cell_points(mesh.dim, &elem.lower, &elem.upper);
    let basis = eval_local_basis(table, &elem, &pts);
    let nv = table.n_verts();
    let n_loc = table.mods[e].len() * nv;
    let base = table.offsets[e];
    let omega2 = cfg.omega * cfg.omega;

    let mut cinv2 = Vec::with_capacity(pts.len());
    let mut stretches = Vec::with_capacity(pts.len());
    let mut fvals = Vec::with_capacity(pts.len());
    for (x, _) in &pts {
        let c = ws.eval(x)?;
        cinv2.push(1.0 / (c * c));
        stretches.push(stretch_at(mesh, cfg, x));
        fvals.push(f.eval(x));
    }

    let mut trips = Vec::with_capacity(n_loc * n_loc);
    let mut rhs = Vec::new();
    for m in 0..n_loc {
        let row_dof = base + m;
        if layout.row_kind[row_dof] != RowKind::Interior {
            continue;
        }
        let row = layout.sys_index[row_dof].unwrap();
        for n in 0..n_loc {
            let col_dof = base + n;
            let Some(col) = layout.sys_index[col_dof] else { continue };
            let mut acc = Complex64::new(0.0, 0.0);
            for (p, (_, w)) in pts.iter().enumerate() {
                let s = &stretches[p];
                let mut grad_term = Complex64::new(0.0, 0.0);
                for a in 0..mesh.dim {
                    grad_term += s[a] * s[a] * basis.grads[n][p][a] * basis.grads[m][p][a].conj();
                }
                let mass = basis.values[n][p] * basis.values[m][p].conj() * (omega2 * cinv2[p]);
                acc += (grad_term - mass) * *w;
            }
            if acc != Complex64::new(0.0, 0.0) {
                trips.push((row, col, acc));
            }
        }
        if !f.is_zero() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (p, (_, w)) in pts.iter().enumerate() {
                acc += fvals[p] * basis.values[m][p].conj() * *w;
            }
            rhs.push((row, acc));
        }
    }
    Ok((trips, rhs))
}

/// Interior-face contributions: -({grad u},[[v]]) - ([[u]],{grad v}) +
/// (a_p/H)([[u]],[[v]]), with stretched gradients in PML mode.
fn face_interior(
    mesh: &Mesh,
    table: &BasisTable,
    cfg: &AssemblyConfig,
    layout: &DofLayout,
    rule: &QuadratureRule,
    face: &Face,
) -> (Triplets, RhsEntries) {
    let FaceKind::Interior { lo, hi } = face.kind else { unreachable!() };
    let pts = rule.face_points(mesh.dim, face);
    let elems = [mesh.element(lo), mesh.element(hi)];
    let bases =
        [eval_local_basis(table, &elems[0], &pts), eval_local_basis(table, &elems[1], &pts)];
    // Outward normal along face.axis: +1 for the lower element, -1 upper.
    let normals = [1.0f64, -1.0f64];
    let penalty = cfg.penalty / mesh.h_max();
    let axis = face.axis;

    let mut stretch_axis = Vec::with_capacity(pts.len());
    for (x, _) in &pts {
        stretch_axis.push(stretch_at(mesh, cfg, x)[axis]);
    }

    let nv = table.n_verts();
    let mut trips = Vec::new();
    for (ti, te) in elems.iter().enumerate() {
        let n_test = table.mods[te.index].len() * nv;
        for m in 0..n_test {
            let row_dof = table.offsets[te.index] + m;
            if layout.row_kind[row_dof] != RowKind::Interior {
                continue;
            }
            let row = layout.sys_index[row_dof].unwrap();
            for (si, se) in elems.iter().enumerate() {
                let n_trial = table.mods[se.index].len() * nv;
                for n in 0..n_trial {
                    let col_dof = table.offsets[se.index] + n;
                    let Some(col) = layout.sys_index[col_dof] else { continue };
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (p, (_, w)) in pts.iter().enumerate() {
                        let s = stretch_axis[p];
                        let u = bases[si].values[n][p];
                        let du = s * bases[si].grads[n][p][axis];
                        let v = bases[ti].values[m][p].conj();
                        let dv = (s * bases[ti].grads[m][p][axis]).conj();
                        let term = -0.5 * du * v * normals[ti] - 0.5 * u * normals[si] * dv
                            + penalty * normals[si] * normals[ti] * u * v;
                        acc += term * *w;
                    }
                    if acc != Complex64::new(0.0, 0.0) {
                        trips.push((row, col, acc));
                    }
                }
            }
        }
    }
    (trips, Vec::new())
}

/// Impedance boundary term `i (omega/c) u v` and data `(g, v)`.
#[allow(clippy::too_many_arguments)]
fn face_impedance(
    mesh: &Mesh,
    table: &BasisTable,
    ws: &WaveSpeed,
    cfg: &AssemblyConfig,
    layout: &DofLayout,
    rule: &QuadratureRule,
    face: &Face,
    g: &(dyn Fn(&Point, &Point) -> Result<Complex64, FieldError> + Sync),
) -> Result<(Triplets, RhsEntries), AssemblyError> {
    let FaceKind::Boundary { element, side, .. } = face.kind else { unreachable!() };
    let pts = rule.face_points(mesh.dim, face);
    let elem = mesh.element(element);
    let basis = eval_local_basis(table, &elem, &pts);
    let normal = side.outward_normal(mesh.dim);
    let nv = table.n_verts();
    let n_loc = table.mods[element].len() * nv;
    let base = table.offsets[element];

    let mut coef = Vec::with_capacity(pts.len());
    let mut gvals = Vec::with_capacity(pts.len());
    for (x, _) in &pts {
        let c = ws.eval(x)?;
        coef.push(Complex64::new(0.0, cfg.omega / c));
        gvals.push(g(x, &normal).map_err(|e| AssemblyError::BoundaryData(e.to_string()))?);
    }

    let mut trips = Vec::new();
    let mut rhs = Vec::new();
    for m in 0..n_loc {
        let row_dof = base + m;
        if layout.row_kind[row_dof] != RowKind::Interior {
            continue;
        }
        let row = layout.sys_index[row_dof].unwrap();
        for n in 0..n_loc {
            let Some(col) = layout.sys_index[base + n] else { continue };
            let mut acc = Complex64::new(0.0, 0.0);
            for (p, (_, w)) in pts.iter().enumerate() {
                acc += coef[p] * basis.values[n][p] * basis.values[m][p].conj() * *w;
            }
            trips.push((row, col, acc));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (p, (_, w)) in pts.iter().enumerate() {
            acc += gvals[p] * basis.values[m][p].conj() * *w;
        }
        rhs.push((row, acc));
    }
    Ok((trips, rhs))
}

/// Moment rows on tagged boundary faces: `(u, v)_F = (g1, v)_F` for
/// Dirichlet rows and `(grad u . n, v)_F = (g2, v)_F` for Neumann rows.
#[allow(clippy::too_many_arguments)]
fn face_moment(
    mesh: &Mesh,
    table: &BasisTable,
    layout: &DofLayout,
    rule: &QuadratureRule,
    face: &Face,
    kind: RowKind,
    data: &(dyn Fn(&Point, &Point) -> Result<Complex64, FieldError> + Sync),
) -> Result<(Triplets, RhsEntries), AssemblyError> {
    let FaceKind::Boundary { element, side, .. } = face.kind else { unreachable!() };
    let pts = rule.face_points(mesh.dim, face);
    let elem = mesh.element(element);
    let basis = eval_local_basis(table, &elem, &pts);
    let normal = side.outward_normal(mesh.dim);
    let nv = table.n_verts();
    let n_loc = table.mods[element].len() * nv;
    let base = table.offsets[element];

    let mut dvals = Vec::with_capacity(pts.len());
    for (x, _) in &pts {
        dvals.push(data(x, &normal).map_err(|e| AssemblyError::BoundaryData(e.to_string()))?);
    }

    let mut trips = Vec::new();
    let mut rhs = Vec::new();
    for m in 0..n_loc {
        let row_dof = base + m;
        if layout.row_kind[row_dof] != kind {
            continue;
        }
        let row = layout.sys_index[row_dof].unwrap();
        for n in 0..n_loc {
            let Some(col) = layout.sys_index[base + n] else { continue };
            let mut acc = Complex64::new(0.0, 0.0);
            for (p, (_, w)) in pts.iter().enumerate() {
                let trial = match kind {
                    RowKind::NeumannMoment => {
                        let mut dn = Complex64::new(0.0, 0.0);
                        for a in 0..mesh.dim {
                            dn += basis.grads[n][p][a] * normal[a];
                        }
                        dn
                    }
                    _ => basis.values[n][p],
                };
                acc += trial * basis.values[m][p].conj() * *w;
            }
            if acc != Complex64::new(0.0, 0.0) {
                trips.push((row, col, acc));
            }
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (p, (_, w)) in pts.iter().enumerate() {
            acc += dvals[p] * basis.values[m][p].conj() * *w;
        }
        rhs.push((row, acc));
    }
    Ok((trips, rhs))
}

type DataFn<'a> = &'a (dyn Fn(&Point, &Point) -> Result<Complex64, FieldError> + Sync);

/// Boundary data closures for one assembly pass.
pub struct BoundaryData<'a> {
    /// Impedance data `g(x, n)`.
    pub impedance: Option<DataFn<'a>>,
    /// Dirichlet data `g1(x, n)` (normal ignored).
    pub dirichlet: Option<DataFn<'a>>,
    /// Neumann data `g2(x, n)`.
    pub neumann: Option<DataFn<'a>>,
}

fn zero_data(_: &Point, _: &Point) -> Result<Complex64, FieldError> {
    Ok(Complex64::new(0.0, 0.0))
}

/// General assembly driver shared by the public entry points.
fn assemble(
    mesh: &Mesh,
    table: &BasisTable,
    ws: &WaveSpeed,
    cfg: &AssemblyConfig,
    f: &SourceTerm,
    data: &BoundaryData,
) -> Result<AssembledSystem, AssemblyError> {
    if let BoundaryMode::Pml { delta, .. } = &cfg.mode {
        let extended = (0..mesh.dim).any(|a| {
            mesh.lower[a] < mesh.physical_lower[a] - 1e-12
                || mesh.upper[a] > mesh.physical_upper[a] + 1e-12
        });
        if *delta <= 0.0 || !extended {
            return Err(AssemblyError::BadConfig(
                "PML mode needs an extended mesh and positive delta".into(),
            ));
        }
    }
    let layout = make_layout(mesh, table, &cfg.mode)?;
    let rule = cfg.rule(mesh, ws);
    let n_sys = layout.n_system();
    let mut system = ComplexSparseSystem::new(n_sys);

    // Volume terms, merged in element order.
    let volume: Result<Vec<(Triplets, RhsEntries)>, AssemblyError> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| element_volume(mesh, table, ws, cfg, &layout, &rule, f, e))
        .collect();
    for (trips, rhs) in volume? {
        system.extend_triplets(trips);
        for (row, v) in rhs {
            system.add_rhs(row, v);
        }
    }

    // Face terms, merged in face order.
    let impedance_g: DataFn = data.impedance.unwrap_or(&zero_data);
    let dirichlet_g: DataFn = data.dirichlet.unwrap_or(&zero_data);
    let neumann_g: DataFn = data.neumann.unwrap_or(&zero_data);
    let face_results: Result<Vec<(Triplets, RhsEntries)>, AssemblyError> = mesh
        .faces
        .par_iter()
        .map(|face| match face.kind {
            FaceKind::Interior { .. } => Ok(face_interior(mesh, table, cfg, &layout, &rule, face)),
            FaceKind::Boundary { tag, .. } => match (&cfg.mode, tag) {
                (BoundaryMode::Impedance, _) => {
                    face_impedance(mesh, table, ws, cfg, &layout, &rule, face, impedance_g)
                }
                (
                    BoundaryMode::Cauchy { .. } | BoundaryMode::Pml { .. },
                    BoundaryTag::Dirichlet,
                ) => face_moment(
                    mesh,
                    table,
                    &layout,
                    &rule,
                    face,
                    RowKind::DirichletMoment,
                    dirichlet_g,
                ),
                (BoundaryMode::Cauchy { .. }, BoundaryTag::Neumann) => face_moment(
                    mesh,
                    table,
                    &layout,
                    &rule,
                    face,
                    RowKind::NeumannMoment,
                    neumann_g,
                ),
                _ => Ok((Vec::new(), Vec::new())),
            },
        })
        .collect();
    for (trips, rhs) in face_results? {
        system.extend_triplets(trips);
        for (row, v) in rhs {
            system.add_rhs(row, v);
        }
    }

    system.finalize();
    Ok(AssembledSystem { system, layout })
}

fn tag_for_mode(mesh: &mut Mesh, mode: &BoundaryMode) {
    match mode {
        BoundaryMode::Impedance => mesh.tag_boundary(&all_sides(mesh.dim), BoundaryTag::Impedance),
        BoundaryMode::Cauchy { dirichlet, neumann } => {
            mesh.tag_boundary(neumann, BoundaryTag::Neumann);
            mesh.tag_boundary(dirichlet, BoundaryTag::Dirichlet);
        }
        BoundaryMode::Pml { dirichlet, .. } => {
            mesh.tag_boundary(&all_sides(mesh.dim), BoundaryTag::PmlOuter);
            mesh.tag_boundary(dirichlet, BoundaryTag::Dirichlet);
        }
    }
}

/// Copy of the mesh with boundary faces tagged to match `mode`.
pub fn tagged_mesh(mesh: &Mesh, mode: &BoundaryMode) -> Mesh {
    let mut m = mesh.clone();
    tag_for_mode(&mut m, mode);
    m
}

/// Impedance problem over the whole boundary.
pub fn assemble_impedance(
    mesh: &Mesh,
    table: &BasisTable,
    ws: &WaveSpeed,
    cfg: &AssemblyConfig,
    f: &SourceTerm,
    g: DataFn,
) -> Result<AssembledSystem, AssemblyError> {
    debug_assert!(matches!(cfg.mode, BoundaryMode::Impedance));
    let mesh = tagged_mesh(mesh, &cfg.mode);
    assemble(
        &mesh,
        table,
        ws,
        cfg,
        f,
        &BoundaryData { impedance: Some(g), dirichlet: None, neumann: None },
    )
}

/// Cauchy problem: interior equations tested on the interior subspace plus
/// Dirichlet/Neumann moment rows on the boundary DOFs.
pub fn assemble_cauchy(
    mesh: &Mesh,
    table: &BasisTable,
    ws: &WaveSpeed,
    cfg: &AssemblyConfig,
    f: &SourceTerm,
    g1: DataFn,
    g2: DataFn,
) -> Result<AssembledSystem, AssemblyError> {
    debug_assert!(matches!(cfg.mode, BoundaryMode::Cauchy { .. }));
    let mesh = tagged_mesh(mesh, &cfg.mode);
    assemble(
        &mesh,
        table,
        ws,
        cfg,
        f,
        &BoundaryData { impedance: None, dirichlet: Some(g1), neumann: Some(g2) },
    )
}

/// PML problem on an extended mesh with homogeneous outer Dirichlet
/// conditions enforced by removing boundary DOFs.
pub fn assemble_pml(
    mesh: &Mesh,
    table: &BasisTable,
    ws: &WaveSpeed,
    cfg: &AssemblyConfig,
    f: &SourceTerm,
) -> Result<AssembledSystem, AssemblyError> {
    debug_assert!(matches!(cfg.mode, BoundaryMode::Pml { .. }));
    let mesh = tagged_mesh(mesh, &cfg.mode);
    assemble(
        &mesh,
        table,
        ws,
        cfg,
        f,
        &BoundaryData { impedance: None, dirichlet: None, neumann: None },
    )
}

/// PML problem with inhomogeneous Dirichlet data on the non-stretched
/// sides named in the mode.
pub fn assemble_pml_with_dirichlet(
    mesh: &Mesh,
    table: &BasisTable,
    ws: &WaveSpeed,
    cfg: &AssemblyConfig,
    f: &SourceTerm,
    g1: DataFn,
) -> Result<AssembledSystem, AssemblyError> {
    debug_assert!(matches!(cfg.mode, BoundaryMode::Pml { .. }));
    let mesh = tagged_mesh(mesh, &cfg.mode);
    assemble(
        &mesh,
        table,
        ws,
        cfg,
        f,
        &BoundaryData { impedance: None, dirichlet: Some(g1), neumann: None },
    )
}

/// Evaluable complex field with gradient, element by element.
pub trait FieldEval: Sync {
    fn eval(&self, elem: &Element, x: &Point) -> (Complex64, CGrad);
}

/// Discrete field given by basis coefficients.
pub struct DiscreteField<'a> {
    pub table: &'a BasisTable,
    pub coeffs: &'a [Complex64],
}

impl FieldEval for DiscreteField<'_> {
    fn eval(&self, elem: &Element, x: &Point) -> (Complex64, CGrad) {
        self.table.eval_field_grad(elem, self.coeffs, x)
    }
}

/// Analytic reference field (element-independent).
pub struct AnalyticField<'a>(pub &'a crate::fields::ReferenceField);

impl FieldEval for AnalyticField<'_> {
    fn eval(&self, _elem: &Element, x: &Point) -> (Complex64, CGrad) {
        let v = self.0.eval(x).unwrap_or(Complex64::new(f64::NAN, f64::NAN));
        let g = self.0.gradient(x).unwrap_or([Complex64::new(f64::NAN, f64::NAN); 3]);
        (v, g)
    }
}

/// Pointwise difference of two fields.
pub struct DiffField<'a>(pub &'a dyn FieldEval, pub &'a dyn FieldEval);

impl FieldEval for DiffField<'_> {
    fn eval(&self, elem: &Element, x: &Point) -> (Complex64, CGrad) {
        let (va, ga) = self.0.eval(elem, x);
        let (vb, gb) = self.1.eval(elem, x);
        let mut g = [Complex64::new(0.0, 0.0); 3];
        for a in 0..3 {
            g[a] = ga[a] - gb[a];
        }
        (va - vb, g)
    }
}

/// Mesh-dependent energy norm: broken gradients, scaled interior jumps,
/// omega-weighted boundary traces and L2 mass.
pub fn dg_norm(
    field: &dyn FieldEval,
    mesh: &Mesh,
    omega: f64,
    penalty: f64,
    rule: &QuadratureRule,
    physical_only: bool,
) -> f64 {
    let h = mesh.h_max();
    let include = |e: usize| !physical_only || mesh.is_physical(e);

    let volume: f64 = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            if !include(e) {
                return 0.0;
            }
            let elem = mesh.element(e);
            let pts = rule.cell_points(mesh.dim, &elem.lower, &elem.upper);
            let mut grad2 = 0.0;
            let mut mass2 = 0.0;
            for (x, w) in pts {
                let (v, g) = field.eval(&elem, &x);
                let g2: f64 = (0..mesh.dim).map(|a| g[a].norm_sqr()).sum();
                grad2 += w * g2;
                mass2 += w * v.norm_sqr();
            }
            grad2 + omega * omega * mass2
        })
        .sum();

    let faces: f64 = mesh
        .faces
        .par_iter()
        .map(|face| match face.kind {
            FaceKind::Interior { lo, hi } => {
                if !include(lo) || !include(hi) {
                    return 0.0;
                }
                let pts = rule.face_points(mesh.dim, face);
                let el = mesh.element(lo);
                let eh = mesh.element(hi);
                let mut jump2 = 0.0;
                for (x, w) in pts {
                    let (vl, _) = field.eval(&el, &x);
                    let (vh, _) = field.eval(&eh, &x);
                    jump2 += w * (vl - vh).norm_sqr();
                }
                penalty / h * jump2
            }
            FaceKind::Boundary { element, .. } => {
                if !include(element) {
                    return 0.0;
                }
                let pts = rule.face_points(mesh.dim, face);
                let elem = mesh.element(element);
                let mut trace2 = 0.0;
                for (x, w) in pts {
                    let (v, _) = field.eval(&elem, &x);
                    trace2 += w * v.norm_sqr();
                }
                omega * trace2
            }
        })
        .sum();

    (volume + faces).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{PlaneWaveTerm, ReferenceField};
    use crate::mesh::{build_mesh, MeshSpec, NodalRule};
    use crate::ray_basis::{build_space, DirectionSet};
    use approx::assert_relative_eq;

    fn unit_mesh(n: usize) -> Mesh {
        build_mesh(&MeshSpec::new_2d([0.0, 0.0], [1.0, 1.0], [n, n]), NodalRule::default())
            .unwrap()
    }

    fn standard_space(mesh: &Mesh, omega: f64) -> BasisTable {
        let dirs = DirectionSet::zero_phase(mesh);
        build_space(mesh, &dirs, omega).unwrap()
    }

    #[test]
    fn jump_average_definitions() {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let g0 = [zero; 3];
        let np = [1.0, 0.0, 0.0];
        let nm = [-1.0, 0.0, 0.0];
        let (_, jump) = jump_average(one, &g0, one, &g0, &np, &nm);
        assert!(jump.iter().all(|c| c.norm() < 1e-15));
        let (_, jump) = jump_average(one, &g0, zero, &g0, &np, &nm);
        assert_relative_eq!(jump[0].re, 1.0);
        let gp = [Complex64::new(1.0, 0.0), zero, zero];
        let gm = [Complex64::new(3.0, 0.0), zero, zero];
        let (avg, _) = jump_average(zero, &gp, zero, &gm, &np, &nm);
        assert_relative_eq!(avg[0].re, 2.0);
    }

    #[test]
    fn pml_stretch_values() {
        let omega = 10.0;
        let delta = 0.25;
        let a = 40.0 * omega;
        assert_eq!(pml_stretch(0.5, 0.0, 1.0, omega, delta, a), Complex64::new(1.0, 0.0));
        let s0 = pml_stretch(0.0, 0.0, 1.0, omega, delta, a);
        assert_relative_eq!(s0.re, 1.0, epsilon = 1e-14);
        assert_relative_eq!(s0.im, 0.0, epsilon = 1e-14);
        let s = pml_stretch(-delta, 0.0, 1.0, omega, delta, a);
        let expect = Complex64::new(1.0, 0.0) / Complex64::new(1.0, a / omega);
        assert_relative_eq!(s.re, expect.re, epsilon = 1e-14);
        assert_relative_eq!(s.im, expect.im, epsilon = 1e-14);
    }

    #[test]
    fn zero_frequency_matrix_real_symmetric() {
        let mesh = unit_mesh(3);
        let ws = WaveSpeed::Constant(1.0);
        let table = standard_space(&mesh, 0.0);
        let cfg = AssemblyConfig {
            omega: 0.0,
            penalty: 20.0,
            mode: BoundaryMode::Impedance,
            quad_points: Some(4),
        };
        let asys =
            assemble_impedance(&mesh, &table, &ws, &cfg, &SourceTerm::Zero, &zero_data).unwrap();
        let n = asys.system.n;
        let scale = asys.system.max_abs();
        for i in 0..n {
            for j in 0..n {
                let a = asys.system.get(i, j);
                let b = asys.system.get(j, i);
                assert!(a.im.abs() <= 1e-12 * scale);
                assert!((a - b).norm() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn bilinear_corner_stiffness_entry() {
        // Single unit element, unmodulated, omega = 0: the (0,0) entry is
        // exactly (grad phi_0, grad phi_0) = 2/3.
        let mesh = unit_mesh(1);
        let ws = WaveSpeed::Constant(1.0);
        let table = standard_space(&mesh, 0.0);
        let cfg = AssemblyConfig {
            omega: 0.0,
            penalty: 20.0,
            mode: BoundaryMode::Impedance,
            quad_points: Some(4),
        };
        let asys =
            assemble_impedance(&mesh, &table, &ws, &cfg, &SourceTerm::Zero, &zero_data).unwrap();
        assert_relative_eq!(asys.system.get(0, 0).re, 2.0 / 3.0, max_relative = 1e-13);
    }

    #[test]
    fn anti_hermitian_part_is_boundary_mass_only() {
        // A = H + i*B with H Hermitian (volume + faces + mass) and B the
        // real boundary mass; so (A - A^H)/(2i) must itself be Hermitian.
        let mesh = unit_mesh(2);
        let ws = WaveSpeed::Constant(1.0);
        let omega = 11.0;
        let dirs =
            DirectionSet::uniform(&mesh, &ws, &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        let table = build_space(&mesh, &dirs, omega).unwrap();
        let cfg = AssemblyConfig {
            omega,
            penalty: 20.0,
            mode: BoundaryMode::Impedance,
            quad_points: Some(12),
        };
        let asys =
            assemble_impedance(&mesh, &table, &ws, &cfg, &SourceTerm::Zero, &zero_data).unwrap();
        let n = asys.system.n;
        let scale = asys.system.max_abs();
        for i in 0..n {
            for j in i..n {
                let skew_ij = (asys.system.get(i, j) - asys.system.get(j, i).conj())
                    / Complex64::new(0.0, 2.0);
                let skew_ji = (asys.system.get(j, i) - asys.system.get(i, j).conj())
                    / Complex64::new(0.0, 2.0);
                assert!(
                    (skew_ij - skew_ji.conj()).norm() <= 1e-10 * scale,
                    "anti-Hermitian part not Hermitian at ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn plane_wave_consistency_residual() {
        // Exact plane wave in the span: discrete residual at quadrature
        // accuracy. Scaled-down instance of the paper setup (same omega*H).
        let n = 10usize;
        let omega = 20.0 * std::f64::consts::PI;
        let mesh = unit_mesh(n);
        let ws = WaveSpeed::Constant(1.0);
        let d = [1.0, 0.0, 0.0];
        let dirs = DirectionSet::uniform(&mesh, &ws, &[d]).unwrap();
        let table = build_space(&mesh, &dirs, omega).unwrap();
        let rf = ReferenceField::plane_waves(
            omega,
            vec![PlaneWaveTerm {
                amplitude: Complex64::new(1.0, 0.0),
                direction: d,
                wavenumber: omega,
            }],
        );
        let cfg = AssemblyConfig::impedance(omega, 2);
        let g = |x: &Point, nrm: &Point| rf.impedance_data(&ws, x, nrm);
        let asys = assemble_impedance(&mesh, &table, &ws, &cfg, &SourceTerm::Zero, &g).unwrap();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); table.n_dofs()];
        for e in 0..mesh.n_elements() {
            let anchor = table.mods[e][0].anchor;
            let c = Complex64::from_polar(1.0, omega * anchor[0]);
            for j in 0..4 {
                coeffs[table.offsets[e] + j] = c;
            }
        }
        let ax = asys.system.matvec(&coeffs);
        let rn: f64 =
            ax.iter().zip(&asys.system.rhs).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let bn: f64 = asys.system.rhs.iter().map(|b| b.norm_sqr()).sum::<f64>().sqrt();
        assert!(rn / bn <= 1e-8, "consistency residual {:.3e}", rn / bn);
        // The solve reproduces the wave.
        let (sol, _res) = asys.solve_expanded().unwrap();
        let mut max_err = 0.0f64;
        for e in 0..mesh.n_elements() {
            let elem = mesh.element(e);
            let x = elem.center();
            let got = table.eval_field(&elem, &sol, &x);
            let want = rf.eval(&x).unwrap();
            max_err = max_err.max((got - want).norm());
        }
        assert!(max_err <= 1e-6, "solution error {max_err}");
    }

    #[test]
    fn consistency_improves_under_quadrature_refinement() {
        let n = 4usize;
        let omega = 8.0 * std::f64::consts::PI;
        let mesh = unit_mesh(n);
        let ws = WaveSpeed::Constant(1.0);
        let d = [0.6, 0.8, 0.0];
        let dirs = DirectionSet::uniform(&mesh, &ws, &[d]).unwrap();
        let table = build_space(&mesh, &dirs, omega).unwrap();
        let rf = ReferenceField::plane_waves(
            omega,
            vec![PlaneWaveTerm {
                amplitude: Complex64::new(1.0, 0.0),
                direction: d,
                wavenumber: omega,
            }],
        );
        let residual_at = |q: usize| {
            let cfg = AssemblyConfig {
                omega,
                penalty: 20.0,
                mode: BoundaryMode::Impedance,
                quad_points: Some(q),
            };
            let g = |x: &Point, nrm: &Point| rf.impedance_data(&ws, x, nrm);
            let asys =
                assemble_impedance(&mesh, &table, &ws, &cfg, &SourceTerm::Zero, &g).unwrap();
            let mut coeffs = vec![Complex64::new(0.0, 0.0); table.n_dofs()];
            for e in 0..mesh.n_elements() {
                let anchor = table.mods[e][0].anchor;
                let c = Complex64::from_polar(1.0, omega * crate::fields::dot(&d, &anchor));
                for j in 0..4 {
                    coeffs[table.offsets[e] + j] = c;
                }
            }
            let ax = asys.system.matvec(&coeffs);
            let rn: f64 = ax
                .iter()
                .zip(&asys.system.rhs)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let bn: f64 = asys.system.rhs.iter().map(|b| b.norm_sqr()).sum::<f64>().sqrt();
            rn / bn
        };
        // omega*h per element ~ 2*pi: quadrature under-resolves at 6 points
        // and converges rapidly as points increase.
        let coarse = residual_at(6);
        let fine = residual_at(14);
        assert!(fine < coarse * 1e-2, "no quadrature convergence: {coarse:.3e} -> {fine:.3e}");
    }

    #[test]
    fn cauchy_square_and_consistent() {
        let n = 6usize;
        let omega = 12.0 * std::f64::consts::PI;
        let mesh = unit_mesh(n);
        let ws = WaveSpeed::Constant(1.0);
        let d = [1.0, 0.0, 0.0];
        let dirs = DirectionSet::uniform(&mesh, &ws, &[d]).unwrap();
        let table = build_space(&mesh, &dirs, omega).unwrap();
        let rf = ReferenceField::plane_waves(
            omega,
            vec![PlaneWaveTerm {
                amplitude: Complex64::new(1.0, 0.0),
                direction: d,
                wavenumber: omega,
            }],
        );
        let mode = BoundaryMode::Cauchy {
            dirichlet: vec![Side::new(0, false), Side::new(1, false)],
            neumann: vec![Side::new(0, true), Side::new(1, true)],
        };
        let cfg = AssemblyConfig { omega, penalty: 20.0, mode, quad_points: None };
        let g1 = |x: &Point, _n: &Point| rf.eval(x);
        let g2 = |x: &Point, nrm: &Point| rf.normal_derivative(x, nrm);
        let asys =
            assemble_cauchy(&mesh, &table, &ws, &cfg, &SourceTerm::Zero, &g1, &g2).unwrap();
        assert_eq!(asys.system.n, table.n_dofs());
        let mut coeffs = vec![Complex64::new(0.0, 0.0); table.n_dofs()];
        for e in 0..mesh.n_elements() {
            let anchor = table.mods[e][0].anchor;
            let c = Complex64::from_polar(1.0, omega * anchor[0]);
            for j in 0..4 {
                coeffs[table.offsets[e] + j] = c;
            }
        }
        let ax = asys.system.matvec(&coeffs);
        let rn: f64 =
            ax.iter().zip(&asys.system.rhs).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let bn: f64 = asys.system.rhs.iter().map(|b| b.norm_sqr()).sum::<f64>().sqrt();
        assert!(rn / bn <= 1e-8, "Cauchy consistency residual {:.3e}", rn / bn);
    }

    #[test]
    fn cauchy_rejects_uncovered_boundary() {
        let mesh = unit_mesh(2);
        let ws = WaveSpeed::Constant(1.0);
        let table = standard_space(&mesh, 1.0);
        let mode = BoundaryMode::Cauchy { dirichlet: vec![Side::new(0, false)], neumann: vec![] };
        let cfg = AssemblyConfig { omega: 1.0, penalty: 20.0, mode, quad_points: Some(4) };
        assert!(assemble_cauchy(
            &mesh,
            &table,
            &ws,
            &cfg,
            &SourceTerm::Zero,
            &zero_data,
            &zero_data
        )
        .is_err());
    }

    #[test]
    fn pure_neumann_zero_frequency_singular() {
        // Pure Neumann Laplace problem: constants in the kernel, reported
        // singular rather than silently solved.
        let mesh = unit_mesh(2);
        let ws = WaveSpeed::Constant(1.0);
        let table = standard_space(&mesh, 0.0);
        let mode = BoundaryMode::Cauchy { dirichlet: vec![], neumann: all_sides(2) };
        let cfg = AssemblyConfig { omega: 0.0, penalty: 20.0, mode, quad_points: Some(4) };
        let asys =
            assemble_cauchy(&mesh, &table, &ws, &cfg, &SourceTerm::Zero, &zero_data, &zero_data)
                .unwrap();
        assert!(asys.system.solve().is_err());
    }

    #[test]
    fn pml_zero_strength_matches_unstretched_interior_form() {
        // a_pml = 0 makes s identically 1: interior rows of the PML system
        // agree with the unstretched Cauchy interior form on the same mesh.
        let mesh0 = unit_mesh(2);
        let mesh = mesh0.extend_for_pml(0.5).unwrap();
        let ws = WaveSpeed::Constant(1.0);
        let omega = 7.0;
        let dirs = DirectionSet::uniform(&mesh, &ws, &[[1.0, 0.0, 0.0]]).unwrap();
        let table = build_space(&mesh, &dirs, omega).unwrap();
        let cfg_pml = AssemblyConfig {
            omega,
            penalty: 20.0,
            mode: BoundaryMode::Pml { delta: 0.5, a_pml: 0.0, dirichlet: vec![] },
            quad_points: Some(10),
        };
        let a = assemble_pml(&mesh, &table, &ws, &cfg_pml, &SourceTerm::Zero).unwrap();
        let cfg_cauchy = AssemblyConfig {
            omega,
            penalty: 20.0,
            mode: BoundaryMode::Cauchy { dirichlet: all_sides(2), neumann: vec![] },
            quad_points: Some(10),
        };
        let b = assemble_cauchy(
            &mesh,
            &table,
            &ws,
            &cfg_cauchy,
            &SourceTerm::Zero,
            &zero_data,
            &zero_data,
        )
        .unwrap();
        let scale = b.system.max_abs();
        for (si, &dof_i) in a.layout.kept.iter().enumerate() {
            if a.layout.row_kind[dof_i] != RowKind::Interior {
                continue;
            }
            for (sj, &dof_j) in a.layout.kept.iter().enumerate() {
                let va = a.system.get(si, sj);
                let vb = b.system.get(dof_i, dof_j);
                assert!(
                    (va - vb).norm() <= 1e-12 * scale,
                    "PML(a=0) vs unstretched mismatch at ({dof_i},{dof_j})"
                );
            }
        }
    }

    #[test]
    fn pml_requires_extended_mesh() {
        let mesh = unit_mesh(2);
        let ws = WaveSpeed::Constant(1.0);
        let table = standard_space(&mesh, 1.0);
        let cfg = AssemblyConfig {
            omega: 1.0,
            penalty: 20.0,
            mode: BoundaryMode::Pml { delta: 0.5, a_pml: 10.0, dirichlet: vec![] },
            quad_points: Some(4),
        };
        assert!(assemble_pml(&mesh, &table, &ws, &cfg, &SourceTerm::Zero).is_err());
    }

    #[test]
    fn pml_physical_entries_match_impedance_volume() {
        // Entries coupling DOFs of a strictly interior physical element are
        // identical with and without stretching since s = 1 there.
        let mesh0 = unit_mesh(4);
        let mesh = mesh0.extend_for_pml(0.25).unwrap();
        let ws = WaveSpeed::Constant(1.0);
        let omega = 9.0;
        let dirs = DirectionSet::uniform(&mesh, &ws, &[[1.0, 0.0, 0.0]]).unwrap();
        let table = build_space(&mesh, &dirs, omega).unwrap();
        let a_pml = AssemblyConfig {
            omega,
            penalty: 20.0,
            mode: BoundaryMode::Pml { delta: 0.25, a_pml: 50.0, dirichlet: vec![] },
            quad_points: Some(10),
        };
        let a = assemble_pml(&mesh, &table, &ws, &a_pml, &SourceTerm::Zero).unwrap();
        let zero = AssemblyConfig {
            omega,
            penalty: 20.0,
            mode: BoundaryMode::Pml { delta: 0.25, a_pml: 0.0, dirichlet: vec![] },
            quad_points: Some(10),
        };
        let b = assemble_pml(&mesh, &table, &ws, &zero, &SourceTerm::Zero).unwrap();
        // Central physical element of the extended 6x6 mesh: index for
        // coords (2,2) wait extension adds 1 cell per side -> (3,3) on 6x6.
        let center = mesh.element_index([3, 3, 0]);
        assert!(mesh.is_physical(center));
        let scale = b.system.max_abs();
        for m in table.element_dofs(center) {
            for n in table.element_dofs(center) {
                let (Some(sa), Some(sb)) =
                    (a.layout.sys_index[m], b.layout.sys_index[n])
                else {
                    continue;
                };
                let _ = sb;
                let va = a.system.get(sa, a.layout.sys_index[n].unwrap());
                let vb = b.system.get(b.layout.sys_index[m].unwrap(), b.layout.sys_index[n].unwrap());
                assert!((va - vb).norm() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn dg_norm_constant_field() {
        // v = 1 on [0,1]^2: no gradient, no jumps; omega*|bdry| + omega^2.
        struct One;
        impl FieldEval for One {
            fn eval(&self, _e: &Element, _x: &Point) -> (Complex64, CGrad) {
                (Complex64::new(1.0, 0.0), [Complex64::new(0.0, 0.0); 3])
            }
        }
        let mesh = unit_mesh(4);
        let omega = 3.0;
        let rule = QuadratureRule::new(4);
        let v = dg_norm(&One, &mesh, omega, 20.0, &rule, false);
        assert_relative_eq!(v * v, 4.0 * omega + omega * omega, max_relative = 1e-12);
        struct Zero;
        impl FieldEval for Zero {
            fn eval(&self, _e: &Element, _x: &Point) -> (Complex64, CGrad) {
                (Complex64::new(0.0, 0.0), [Complex64::new(0.0, 0.0); 3])
            }
        }
        assert_eq!(dg_norm(&Zero, &mesh, omega, 20.0, &rule, false), 0.0);
    }

    #[test]
    fn dg_norm_piecewise_jump() {
        // 2x1 mesh on [0,2]x[0,1], v = 1 left / 0 right, omega = 0: only
        // the jump term survives: (a_p/H) * |shared face|.
        let spec = MeshSpec::new_2d([0.0, 0.0], [2.0, 1.0], [2, 1]);
        let mesh = build_mesh(&spec, NodalRule::default()).unwrap();
        struct LeftOne;
        impl FieldEval for LeftOne {
            fn eval(&self, e: &Element, _x: &Point) -> (Complex64, CGrad) {
                let v = if e.index == 0 { 1.0 } else { 0.0 };
                (Complex64::new(v, 0.0), [Complex64::new(0.0, 0.0); 3])
            }
        }
        let rule = QuadratureRule::new(3);
        let penalty = 20.0;
        let v = dg_norm(&LeftOne, &mesh, 0.0, penalty, &rule, false);
        assert_relative_eq!(v * v, penalty, max_relative = 1e-12);
    }

    #[test]
    fn coercivity_surrogate_on_random_fields() {
        // |b_DG(v,v)| >= 0.1 ||v||_DG^2 with b_DG = a_H + omega^2 mass,
        // evaluated through the assembled matrices on random coefficients.
        let mesh = unit_mesh(4);
        let ws = WaveSpeed::Constant(1.0);
        let omega = 8.0 * std::f64::consts::PI;
        let dirs = DirectionSet::uniform(&mesh, &ws, &[[1.0, 0.0, 0.0]]).unwrap();
        let table = build_space(&mesh, &dirs, omega).unwrap();
        let cfg = AssemblyConfig::impedance(omega, 2);
        let asys =
            assemble_impedance(&mesh, &table, &ws, &cfg, &SourceTerm::Zero, &zero_data).unwrap();
        // b_DG(v,v) = v^H (A + 2*omega^2*M) v where A already contains
        // -omega^2 M; recover M by assembling at the same phases with the
        // mass isolated: instead evaluate b directly by quadrature.
        let rule = cfg.rule(&mesh, &ws);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let coeffs: Vec<Complex64> = (0..table.n_dofs())
                .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            // v^H A v
            let av = asys.system.matvec(&coeffs);
            let vav: Complex64 =
                coeffs.iter().zip(&av).map(|(c, a)| a * c.conj()).sum();
            // 2 omega^2 (c^-2 v, v) by quadrature
            let field = DiscreteField { table: &table, coeffs: &coeffs };
            let mut mass = 0.0;
            for e in 0..mesh.n_elements() {
                let elem = mesh.element(e);
                for (x, w) in rule.cell_points(2, &elem.lower, &elem.upper) {
                    let (v, _) = field.eval(&elem, &x);
                    let c = ws.eval(&x).unwrap();
                    mass += w * v.norm_sqr() / (c * c);
                }
            }
            let b = vav + Complex64::new(2.0 * omega * omega * mass, 0.0);
            let nrm = dg_norm(&field, &mesh, omega, cfg.penalty, &rule, false);
            assert!(
                b.norm() >= 0.1 * nrm * nrm,
                "coercivity surrogate failed: |b| = {:.3e}, ||v||^2 = {:.3e}",
                b.norm(),
                nrm * nrm
            );
        }
    }
}
