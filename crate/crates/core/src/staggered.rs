//! Staggered (MAC) operators on an orthogonal mesh.
//!
//! Scalars live at cell centers, vectors are stored by their normal
//! component on faces, shear quantities live at vertices. Boundary faces
//! carry the normal trace and are never updated.

use crate::geometry::{Axis, Mesh};

/// Treatment of the tangential velocity at walls.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WallMode {
    /// Zero tangential traction.
    Slip,
    /// Zero tangential velocity.
    NoSlip,
}

#[derive(Clone, Debug)]
pub struct Vertex {
    pub ie: usize,
    pub je: usize,
    /// Surrounding cells (low-low, high-low, low-high, high-high).
    pub cells: [Option<usize>; 4],
    pub weight: f64,
    pub h: f64,
    /// `∂₂u₁` as a linear form in face velocities.
    d2u1: Vec<(usize, f64)>,
    /// `∂₁(u₂/h)`.
    d1u2h: Vec<(usize, f64)>,
    /// `(u₂/h)` at the vertex.
    u2h: Vec<(usize, f64)>,
}

#[derive(Clone, Debug)]
struct FaceStencil {
    /// Vertices at the two ends of the face.
    verts: [Option<usize>; 2],
    /// Faces of the other orientation surrounding this one.
    cross: Vec<usize>,
}

/// Precomputed staggered stencils of a mesh.
#[derive(Clone, Debug)]
pub struct Staggered {
    pub mode: WallMode,
    pub vertices: Vec<Vertex>,
    stencils: Vec<FaceStencil>,
    h_prime: f64,
}

fn apply(form: &[(usize, f64)], u: &[f64]) -> f64 {
    form.iter().map(|&(f, c)| c * u[f]).sum()
}

impl Staggered {
    pub fn new(mesh: &Mesh, mode: WallMode) -> Self {
        let g = &mesh.grid;
        let (n1, n2) = (g.n1(), g.n2);
        let ghost = match mode {
            WallMode::Slip => 1.0,
            WallMode::NoSlip => -1.0,
        };
        let wrap1 = |i: isize| -> Option<usize> {
            if g.periodic[0] {
                Some(i.rem_euclid(n1 as isize) as usize)
            } else if i >= 0 && (i as usize) < n1 {
                Some(i as usize)
            } else {
                None
            }
        };
        let wrap2 = |j: isize| -> Option<usize> {
            if g.periodic[1] {
                Some(j.rem_euclid(n2 as isize) as usize)
            } else if j >= 0 && (j as usize) < n2 {
                Some(j as usize)
            } else {
                None
            }
        };
        let cell = |i: isize, j: isize| match (wrap1(i), wrap2(j)) {
            (Some(i), Some(j)) => mesh.cell_at(i, j),
            _ => None,
        };
        let face1 = |ie: usize, j: isize| wrap2(j).and_then(|j| mesh.face1_at(ie, j));
        let face2 = |i: isize, je: usize| wrap1(i).and_then(|i| mesh.face2_at(i, je));
        let v_ie = if g.periodic[0] { n1 } else { n1 + 1 };
        let v_je = if g.periodic[1] { n2 } else { n2 + 1 };
        let mut vertices = Vec::new();
        let mut vid = vec![usize::MAX; v_ie * v_je];
        for ie in 0..v_ie {
            for je in 0..v_je {
                let (a, b) = (ie as isize, je as isize);
                let cells = [cell(a - 1, b - 1), cell(a, b - 1), cell(a - 1, b), cell(a, b)];
                if cells.iter().all(Option::is_none) {
                    continue;
                }
                let h = g.h(g.e1[ie]);
                let half_spans: f64 = [(a - 1, cells[0]), (a, cells[1]), (a - 1, cells[2]), (a, cells[3])]
                    .iter()
                    .filter_map(|&(i, c)| c.map(|_| 0.5 * g.dx1(wrap1(i).unwrap())))
                    .sum();
                let weight = h * 0.5 * g.d2 * half_spans;

                let mut d2u1 = Vec::new();
                match (face1(ie, b - 1), face1(ie, b)) {
                    (Some(lo), Some(hi)) => {
                        d2u1.push((hi, 1.0 / g.d2));
                        d2u1.push((lo, -1.0 / g.d2));
                    }
                    (Some(lo), None) => d2u1.push((lo, (ghost - 1.0) / g.d2)),
                    (None, Some(hi)) => d2u1.push((hi, (1.0 - ghost) / g.d2)),
                    (None, None) => {}
                }
                let mut d1u2h = Vec::new();
                let mut u2h = Vec::new();
                let e = g.e1[ie];
                match (face2(a - 1, je), face2(a, je)) {
                    (Some(l), Some(r)) => {
                        let (il, ir) = (wrap1(a - 1).unwrap(), wrap1(a).unwrap());
                        let (cl, cr) = (g.c1(il), g.c1(ir));
                        let mut d = cr - cl;
                        if d <= 0.0 {
                            d += g.length1();
                        }
                        let (hl, hr) = (g.h(cl), g.h(cr));
                        d1u2h.push((r, 1.0 / (hr * d)));
                        d1u2h.push((l, -1.0 / (hl * d)));
                        u2h.push((r, 0.5 / hr));
                        u2h.push((l, 0.5 / hl));
                    }
                    (None, Some(r)) => {
                        let cr = g.c1(wrap1(a).unwrap());
                        let hr = g.h(cr);
                        d1u2h.push((r, (1.0 - ghost) / (hr * 2.0 * (cr - e))));
                        u2h.push((r, 0.5 * (1.0 + ghost) / hr));
                    }
                    (Some(l), None) => {
                        let cl = g.c1(wrap1(a - 1).unwrap());
                        let hl = g.h(cl);
                        d1u2h.push((l, (ghost - 1.0) / (hl * 2.0 * (e - cl))));
                        u2h.push((l, 0.5 * (1.0 + ghost) / hl));
                    }
                    (None, None) => {}
                }
                vid[ie * v_je + je] = vertices.len();
                vertices.push(Vertex { ie, je, cells, weight, h, d2u1, d1u2h, u2h });
            }
        }
        let vert = |ie: usize, je: usize| {
            let ie = if g.periodic[0] { ie % n1 } else { ie };
            let je = if g.periodic[1] { je % n2 } else { je };
            let v = vid[ie * v_je + je];
            (v != usize::MAX).then_some(v)
        };
        let stencils = mesh
            .faces
            .iter()
            .map(|f| match f.axis {
                Axis::One => {
                    let (ie, j) = (f.edge, f.along);
                    let mut cross = Vec::new();
                    for i in [ie as isize - 1, ie as isize] {
                        for je in [j, j + 1] {
                            cross.extend(face2(i, je));
                        }
                    }
                    FaceStencil { verts: [vert(ie, j), vert(ie, j + 1)], cross }
                }
                Axis::Two => {
                    let (i, je) = (f.along, f.edge);
                    let mut cross = Vec::new();
                    for ie in [i, i + 1] {
                        for j in [je as isize - 1, je as isize] {
                            cross.extend(face1(ie, j));
                        }
                    }
                    FaceStencil { verts: [vert(i, je), vert(i + 1, je)], cross }
                }
            })
            .collect();
        Staggered { mode, vertices, stencils, h_prime: g.h_prime() }
    }

    /// Twice the shear strain `2e₁₂` at every vertex.
    pub fn shear(&self, u: &[f64]) -> Vec<f64> {
        self.vertices.iter().map(|v| v.h * apply(&v.d1u2h, u) + apply(&v.d2u1, u) / v.h).collect()
    }

    /// Scalar vorticity at every vertex.
    pub fn vorticity(&self, u: &[f64]) -> Vec<f64> {
        self.vertices
            .iter()
            .map(|v| 2.0 * self.h_prime * apply(&v.u2h, u) + v.h * apply(&v.d1u2h, u) - apply(&v.d2u1, u) / v.h)
            .collect()
    }

    /// Adds `-Σ_v W_v s_v ∂(2e₁₂)_v/∂u_f` to `acc` (an unnormalized force).
    pub fn shear_transpose(&self, s: &[f64], acc: &mut [f64]) {
        for (v, &sv) in self.vertices.iter().zip(s) {
            if sv == 0.0 {
                continue;
            }
            let w = v.weight * sv;
            for &(f, c) in &v.d1u2h {
                acc[f] -= w * v.h * c;
            }
            for &(f, c) in &v.d2u1 {
                acc[f] -= w * c / v.h;
            }
        }
    }

    /// Average of a vertex field at the two ends of each face.
    pub fn vertex_to_face(&self, q: &[f64]) -> Vec<f64> {
        self.stencils
            .iter()
            .map(|s| {
                let (sum, n) = s.verts.iter().flatten().fold((0.0, 0), |(a, n), &v| (a + q[v], n + 1));
                if n == 0 {
                    0.0
                } else {
                    sum / n as f64
                }
            })
            .collect()
    }

    /// Average of the faces of the other orientation around each face.
    pub fn cross_average(&self, u: &[f64]) -> Vec<f64> {
        self.stencils
            .iter()
            .map(|s| {
                if s.cross.is_empty() {
                    0.0
                } else {
                    s.cross.iter().map(|&f| u[f]).sum::<f64>() / s.cross.len() as f64
                }
            })
            .collect()
    }

    /// Average of a cell field over the cells around each vertex.
    pub fn cell_to_vertex(&self, q: &[f64]) -> Vec<f64> {
        self.vertices
            .iter()
            .map(|v| {
                let (s, n) = v.cells.iter().flatten().fold((0.0, 0), |(a, n), &c| (a + q[c], n + 1));
                s / n as f64
            })
            .collect()
    }

    /// Vertices whose four surrounding cells are all active.
    pub fn is_interior(&self, v: usize) -> bool {
        self.vertices[v].cells.iter().all(Option::is_some)
    }
}

/// Cell-wise divergence `(1/|K|) Σ ±L_f u_f`.
pub fn div(mesh: &Mesh, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_cells()];
    for (f, face) in mesh.faces.iter().enumerate() {
        let flux = face.length * u[f];
        if let Some(a) = face.minus {
            out[a] += flux;
        }
        if let Some(b) = face.plus {
            out[b] -= flux;
        }
    }
    for (o, c) in out.iter_mut().zip(&mesh.cells) {
        *o /= c.area;
    }
    out
}

/// Face-normal gradient; zero on boundary faces.
pub fn grad(mesh: &Mesh, p: &[f64]) -> Vec<f64> {
    mesh.faces
        .iter()
        .map(|f| match (f.minus, f.plus) {
            (Some(a), Some(b)) => (p[b] - p[a]) / f.dist,
            _ => 0.0,
        })
        .collect()
}

/// Average of the two cell values across each face (the one value on boundaries).
pub fn cell_to_face(mesh: &Mesh, q: &[f64]) -> Vec<f64> {
    mesh.faces
        .iter()
        .map(|f| match (f.minus, f.plus) {
            (Some(a), Some(b)) => 0.5 * (q[a] + q[b]),
            (Some(a), None) | (None, Some(a)) => q[a],
            _ => 0.0,
        })
        .collect()
}

/// Velocity components `(u₁, u₂)` at cell centers in the local orthonormal frame.
pub fn cell_components(mesh: &Mesh, u: &[f64]) -> Vec<[f64; 2]> {
    let mut out = vec![[0.0; 2]; mesh.n_cells()];
    for (f, face) in mesh.faces.iter().enumerate() {
        let k = match face.axis {
            Axis::One => 0,
            Axis::Two => 1,
        };
        for c in [face.minus, face.plus].into_iter().flatten() {
            out[c][k] += 0.5 * u[f];
        }
    }
    out
}

/// Velocity at cell centers in Cartesian components.
pub fn cell_cartesian(mesh: &Mesh, u: &[f64]) -> Vec<[f64; 2]> {
    cell_components(mesh, u)
        .into_iter()
        .zip(&mesh.cells)
        .map(|(v, c)| {
            let (e1, e2) = mesh.grid.basis(c.x2);
            [v[0] * e1[0] + v[1] * e2[0], v[0] * e1[1] + v[1] * e2[1]]
        })
        .collect()
}

/// Samples a Cartesian vector field as face-normal components; boundary faces get zero.
pub fn sample_faces(mesh: &Mesh, v: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
    mesh.faces
        .iter()
        .map(|f| {
            if f.is_boundary() {
                0.0
            } else {
                let w = v(f.center);
                w[0] * f.normal[0] + w[1] * f.normal[1]
            }
        })
        .collect()
}

/// Face-weighted inner product of two face fields.
pub fn face_inner(mesh: &Mesh, u: &[f64], v: &[f64]) -> f64 {
    mesh.faces.iter().zip(u.iter().zip(v)).map(|(f, (a, b))| f.weight() * a * b).sum()
}

/// Cell normal stresses, vertex shear stresses, cell strains and vertex
/// shear rates.
pub type Stresses = (Vec<[f64; 2]>, Vec<f64>, Vec<[f64; 2]>, Vec<f64>);

/// Cell strains `(e₁₁, e₂₂)`.
pub fn normal_strains(mesh: &Mesh, u: &[f64]) -> Vec<[f64; 2]> {
    let g = &mesh.grid;
    let hp = g.h_prime();
    let mut out = vec![[0.0; 2]; mesh.n_cells()];
    let mut avg1 = vec![0.0; mesh.n_cells()];
    for (f, face) in mesh.faces.iter().enumerate() {
        for (c, sign) in [(face.minus, -1.0), (face.plus, 1.0)] {
            let Some(c) = c else { continue };
            let cell = &mesh.cells[c];
            // the face is the high side of `minus` and the low side of `plus`
            match face.axis {
                Axis::One => {
                    out[c][0] -= sign * u[f] / g.dx1(cell.i);
                    avg1[c] += 0.5 * u[f];
                }
                Axis::Two => out[c][1] -= sign * u[f] / (cell.h * g.d2),
            }
        }
    }
    for (c, o) in out.iter_mut().enumerate() {
        o[1] += hp / mesh.cells[c].h * avg1[c];
    }
    out
}

/// Adds the transpose of the normal-strain map weighted by `|K| s`:
/// `acc_f -= Σ_c |K_c| (s₁₁ ∂e₁₁/∂u_f + s₂₂ ∂e₂₂/∂u_f)`.
pub fn normal_strain_transpose(mesh: &Mesh, s: &[[f64; 2]], acc: &mut [f64]) {
    let g = &mesh.grid;
    let hp = g.h_prime();
    for (f, face) in mesh.faces.iter().enumerate() {
        for (c, sign) in [(face.minus, -1.0), (face.plus, 1.0)] {
            let Some(c) = c else { continue };
            let cell = &mesh.cells[c];
            let w = cell.area;
            match face.axis {
                Axis::One => {
                    acc[f] -= w * (-sign * s[c][0] / g.dx1(cell.i) + s[c][1] * 0.5 * hp / cell.h);
                }
                Axis::Two => acc[f] -= w * (-sign * s[c][1] / (cell.h * g.d2)),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, DomainSpec, Resolution};

    fn annulus() -> Mesh {
        Mesh::annulus((0..=12).map(|k| 1.0 + 0.1 * k as f64).collect(), 32).unwrap()
    }

    fn rough() -> Mesh {
        build_domain(&DomainSpec {
            eps: 0.25,
            delta: 1.5,
            beta: 0.125,
            r_obs: 1.0,
            amp: 0.2,
            freq: 3.0,
            cap_radius: Some(2.5),
            resolution: Resolution { n_theta: 48, dr_fine: 0.06, fine_band: 0.3, growth: 1.15 },
        })
        .unwrap()
    }

    fn lcg(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect()
    }

    fn interior_only(mesh: &Mesh, mut u: Vec<f64>) -> Vec<f64> {
        for (f, face) in mesh.faces.iter().enumerate() {
            if face.is_boundary() {
                u[f] = 0.0;
            }
        }
        u
    }

    #[test]
    fn div_grad_adjoint() {
        for m in [annulus(), rough()] {
            let p = lcg(m.n_cells(), 1);
            let u = interior_only(&m, lcg(m.n_faces(), 2));
            let lhs: f64 = div(&m, &u).iter().zip(&p).zip(&m.cells).map(|((d, p), c)| c.area * d * p).sum();
            let rhs = -face_inner(&m, &u, &grad(&m, &p));
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn strains_match_divergence() {
        let m = rough();
        let u = interior_only(&m, lcg(m.n_faces(), 3));
        let d = div(&m, &u);
        for (s, d) in normal_strains(&m, &u).iter().zip(&d) {
            assert!((s[0] + s[1] - d).abs() < 1e-11 * (1.0 + d.abs()));
        }
    }

    #[test]
    fn rigid_rotation_has_no_shear() {
        // u = r e_φ in the interior of an annulus
        let m = annulus();
        let st = Staggered::new(&m, WallMode::Slip);
        let u = sample_faces(&m, |x| [-x[1], x[0]]);
        let s = st.shear(&u);
        let w = st.vorticity(&u);
        for v in (0..st.vertices.len()).filter(|&v| st.is_interior(v)) {
            assert!(s[v].abs() < 1e-12, "shear {}", s[v]);
            assert!((w[v] - 2.0).abs() < 1e-12, "vorticity {}", w[v]);
        }
    }

    #[test]
    fn shear_flow_in_box() {
        let m = Mesh::rectangle(8, 8, [1.0, 1.0], [true, true]).unwrap();
        let st = Staggered::new(&m, WallMode::Slip);
        let k = std::f64::consts::TAU;
        let u = sample_faces(&m, |x| [(k * x[1]).sin(), 0.0]);
        let s = st.shear(&u);
        let w = st.vorticity(&u);
        for (v, vert) in st.vertices.iter().enumerate() {
            let y = m.grid.edge2(vert.je);
            let exact = k * (k * y).cos() * (k / 8.0 / 2.0).sin() / (k / 16.0);
            assert!((s[v] - exact).abs() < 1e-10);
            assert!((w[v] + exact).abs() < 1e-10);
        }
    }

    #[test]
    fn no_slip_wall_shear() {
        // plug flow u = (1, 0) in a channel: shear concentrates at the walls
        let m = Mesh::rectangle(4, 4, [1.0, 1.0], [true, false]).unwrap();
        let st = Staggered::new(&m, WallMode::NoSlip);
        let u = sample_faces(&m, |_| [1.0, 0.0]);
        let s = st.shear(&u);
        for (v, vert) in st.vertices.iter().enumerate() {
            let expected = match vert.je {
                0 => 8.0,
                4 => -8.0,
                _ => 0.0,
            };
            assert!((s[v] - expected).abs() < 1e-12);
        }
        let slip = Staggered::new(&m, WallMode::Slip);
        assert!(slip.shear(&u).iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn transposes_are_adjoint() {
        let m = rough();
        for mode in [WallMode::Slip, WallMode::NoSlip] {
            let st = Staggered::new(&m, mode);
            let u = interior_only(&m, lcg(m.n_faces(), 5));
            let s = lcg(st.vertices.len(), 6);
            let mut acc = vec![0.0; m.n_faces()];
            st.shear_transpose(&s, &mut acc);
            let lhs: f64 = acc.iter().zip(&u).map(|(a, b)| a * b).sum();
            let e = st.shear(&u);
            let rhs: f64 = -st.vertices.iter().zip(e.iter().zip(&s)).map(|(v, (e, s))| v.weight * e * s).sum::<f64>();
            assert!((lhs - rhs).abs() < 1e-10 * rhs.abs().max(1.0));

            let sc: Vec<[f64; 2]> = lcg(2 * m.n_cells(), 7).chunks(2).map(|c| [c[0], c[1]]).collect();
            let mut acc = vec![0.0; m.n_faces()];
            normal_strain_transpose(&m, &sc, &mut acc);
            let lhs: f64 = acc.iter().zip(&u).map(|(a, b)| a * b).sum();
            let rhs: f64 = -normal_strains(&m, &u)
                .iter()
                .zip(&sc)
                .zip(&m.cells)
                .map(|((e, s), c)| c.area * (e[0] * s[0] + e[1] * s[1]))
                .sum::<f64>();
            assert!((lhs - rhs).abs() < 1e-10 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn cartesian_reconstruction() {
        let m = annulus();
        let u = sample_faces(&m, |_| [1.0, 2.0]);
        for (v, c) in cell_cartesian(&m, &u).iter().zip(&m.cells) {
            // interior cells reproduce a constant field to second order
            if c.i > 0 && c.i + 1 < m.grid.n1() {
                assert!((v[0] - 1.0).abs() < 0.02 && (v[1] - 2.0).abs() < 0.02);
            }
        }
    }
}
