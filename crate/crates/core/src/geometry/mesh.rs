use serde::{Deserialize, Serialize};

use super::{DomainSpec, ObstacleCurve};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coords {
    Cartesian,
    Polar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    One,
    Two,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaceTag {
    Interior,
    Obstacle,
    Outer,
    Wall,
}

impl FaceTag {
    pub fn as_str(self) -> &'static str {
        match self {
            FaceTag::Interior => "interior",
            FaceTag::Obstacle => "obstacle",
            FaceTag::Outer => "outer",
            FaceTag::Wall => "wall",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "interior" => FaceTag::Interior,
            "obstacle" => FaceTag::Obstacle,
            "outer" => FaceTag::Outer,
            "wall" => FaceTag::Wall,
            _ => return None,
        })
    }
}

/// Orthogonal logical grid. Direction 1 is `x` or `r`, direction 2 is `y` or `φ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub coords: Coords,
    pub e1: Vec<f64>,
    pub x2_0: f64,
    pub d2: f64,
    pub n2: usize,
    pub periodic: [bool; 2],
}

impl Grid {
    pub fn n1(&self) -> usize {
        self.e1.len() - 1
    }

    pub fn c1(&self, i: usize) -> f64 {
        0.5 * (self.e1[i] + self.e1[i + 1])
    }

    pub fn dx1(&self, i: usize) -> f64 {
        self.e1[i + 1] - self.e1[i]
    }

    pub fn c2(&self, j: usize) -> f64 {
        self.x2_0 + (j as f64 + 0.5) * self.d2
    }

    pub fn edge2(&self, je: usize) -> f64 {
        self.x2_0 + je as f64 * self.d2
    }

    /// Metric factor of direction 2.
    pub fn h(&self, x1: f64) -> f64 {
        match self.coords {
            Coords::Cartesian => 1.0,
            Coords::Polar => x1,
        }
    }

    /// Derivative of the metric factor with respect to `x1`.
    pub fn h_prime(&self) -> f64 {
        match self.coords {
            Coords::Cartesian => 0.0,
            Coords::Polar => 1.0,
        }
    }

    pub fn to_xy(&self, x1: f64, x2: f64) -> [f64; 2] {
        match self.coords {
            Coords::Cartesian => [x1, x2],
            Coords::Polar => [x1 * x2.cos(), x1 * x2.sin()],
        }
    }

    /// Unit basis vectors `(e1, e2)` at angle `x2`.
    pub fn basis(&self, x2: f64) -> ([f64; 2], [f64; 2]) {
        match self.coords {
            Coords::Cartesian => ([1.0, 0.0], [0.0, 1.0]),
            Coords::Polar => {
                let (s, c) = x2.sin_cos();
                ([c, s], [-s, c])
            }
        }
    }

    pub fn length1(&self) -> f64 {
        self.e1[self.n1()] - self.e1[0]
    }

    fn validate(&self) -> Result<()> {
        if self.e1.len() < 2 || self.n2 == 0 {
            return Err(Error::Geometry("grid needs at least one cell per direction".into()));
        }
        if !self.e1.iter().all(|x| x.is_finite()) || !self.e1.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::Geometry("edges in direction 1 must increase strictly".into()));
        }
        if !(self.d2 > 0.0 && self.d2.is_finite() && self.x2_0.is_finite()) {
            return Err(Error::Geometry("spacing in direction 2 must be positive".into()));
        }
        if self.coords == Coords::Polar {
            if self.e1[0] <= 0.0 {
                return Err(Error::Geometry("polar grid must stay away from the origin".into()));
            }
            if self.periodic[0] {
                return Err(Error::Geometry("radial direction cannot be periodic".into()));
            }
            if self.periodic[1] && (self.d2 * self.n2 as f64 - std::f64::consts::TAU).abs() > 1e-9 {
                return Err(Error::Geometry("periodic angular direction must span 2π".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellInfo {
    pub i: usize,
    pub j: usize,
    pub x1: f64,
    pub x2: f64,
    pub center: [f64; 2],
    pub area: f64,
    /// Metric factor at the center.
    pub h: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Face {
    pub axis: Axis,
    /// Edge index along `axis`, cell index along the other direction.
    pub edge: usize,
    pub along: usize,
    /// Cell on the low side (`minus`) and high side (`plus`) of the face.
    pub minus: Option<usize>,
    pub plus: Option<usize>,
    pub length: f64,
    /// Center-to-center distance, or center-to-face for boundary faces.
    pub dist: f64,
    pub center: [f64; 2],
    /// Unit normal at the face center, pointing from `minus` to `plus`.
    pub normal: [f64; 2],
    /// Exact integral of the unit normal over the face.
    pub normal_integral: [f64; 2],
    pub tag: FaceTag,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.minus.is_none() || self.plus.is_none()
    }

    /// The single adjacent cell of a boundary face and the sign of the
    /// outward normal relative to `normal`.
    pub fn boundary_cell(&self) -> Option<(usize, f64)> {
        match (self.minus, self.plus) {
            (Some(c), None) => Some((c, 1.0)),
            (None, Some(c)) => Some((c, -1.0)),
            _ => None,
        }
    }

    /// Weight of the face in the discrete velocity inner product.
    pub fn weight(&self) -> f64 {
        self.length * self.dist
    }
}

const NONE: usize = usize::MAX;

/// Masked orthogonal mesh with cell-centered scalars and face-normal vectors.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub grid: Grid,
    active: Vec<bool>,
    cell_of: Vec<usize>,
    pub cells: Vec<CellInfo>,
    pub faces: Vec<Face>,
    face1: Vec<usize>,
    face2: Vec<usize>,
    /// Faces bounding each cell with the outward sign.
    cell_faces: Vec<Vec<(usize, f64)>>,
    pub obstacle: Option<ObstacleCurve>,
    pub outer_radius: Option<f64>,
}

impl Mesh {
    pub fn new(
        grid: Grid,
        active: Vec<bool>,
        obstacle: Option<ObstacleCurve>,
        outer_radius: Option<f64>,
    ) -> Result<Self> {
        grid.validate()?;
        let (n1, n2) = (grid.n1(), grid.n2);
        if active.len() != n1 * n2 {
            return Err(Error::Shape { expected: n1 * n2, got: active.len() });
        }
        let mut cell_of = vec![NONE; n1 * n2];
        let mut cells = Vec::new();
        for i in 0..n1 {
            for j in 0..n2 {
                if !active[i * n2 + j] {
                    continue;
                }
                cell_of[i * n2 + j] = cells.len();
                let x1 = grid.c1(i);
                let x2 = grid.c2(j);
                let h = grid.h(x1);
                cells.push(CellInfo {
                    i,
                    j,
                    x1,
                    x2,
                    center: grid.to_xy(x1, x2),
                    area: h * grid.dx1(i) * grid.d2,
                    h,
                });
            }
        }
        if cells.is_empty() {
            return Err(Error::Geometry("mesh has no active cells".into()));
        }
        let mut mesh = Mesh {
            grid,
            active,
            cell_of,
            cells,
            faces: Vec::new(),
            face1: vec![NONE; (n1 + 1) * n2],
            face2: vec![NONE; n1 * (n2 + 1)],
            cell_faces: Vec::new(),
            obstacle,
            outer_radius,
        };
        mesh.build_faces();
        Ok(mesh)
    }

    fn build_faces(&mut self) {
        let g = self.grid.clone();
        let (n1, n2) = (g.n1(), g.n2);
        let boundary_tag = |outer: bool| match g.coords {
            Coords::Cartesian => FaceTag::Wall,
            Coords::Polar if outer => FaceTag::Outer,
            Coords::Polar => FaceTag::Obstacle,
        };
        let edges1 = if g.periodic[0] { n1 } else { n1 + 1 };
        for ie in 0..edges1 {
            for j in 0..n2 {
                let lo = if ie > 0 {
                    Some(ie - 1)
                } else if g.periodic[0] {
                    Some(n1 - 1)
                } else {
                    None
                };
                let hi = if ie < n1 { Some(ie) } else { None };
                let minus = lo.and_then(|i| self.cell_at(i, j));
                let plus = hi.and_then(|i| self.cell_at(i, j));
                if minus.is_none() && plus.is_none() {
                    continue;
                }
                let r = g.e1[ie];
                let x2 = g.c2(j);
                let dist = match (minus, plus) {
                    (Some(_), Some(_)) => {
                        let a = g.c1(lo.unwrap());
                        let b = g.c1(hi.unwrap());
                        if b > a {
                            b - a
                        } else {
                            b - a + g.length1()
                        }
                    }
                    (Some(_), None) => r - g.c1(lo.unwrap()),
                    _ => g.c1(hi.unwrap()) - r,
                };
                let (e1v, _) = g.basis(x2);
                let (a0, a1) = (g.edge2(j), g.edge2(j + 1));
                let normal_integral = match g.coords {
                    Coords::Cartesian => [g.d2, 0.0],
                    Coords::Polar => [r * (a1.sin() - a0.sin()), -r * (a1.cos() - a0.cos())],
                };
                let tag = if minus.is_some() && plus.is_some() {
                    FaceTag::Interior
                } else {
                    boundary_tag(ie == n1 && minus.is_some())
                };
                self.face1[ie * n2 + j] = self.faces.len();
                self.faces.push(Face {
                    axis: Axis::One,
                    edge: ie,
                    along: j,
                    minus,
                    plus,
                    length: g.h(r) * g.d2,
                    dist,
                    center: g.to_xy(r, x2),
                    normal: e1v,
                    normal_integral,
                    tag,
                });
            }
        }
        let edges2 = if g.periodic[1] { n2 } else { n2 + 1 };
        for i in 0..n1 {
            for je in 0..edges2 {
                let lo = if je > 0 {
                    Some(je - 1)
                } else if g.periodic[1] {
                    Some(n2 - 1)
                } else {
                    None
                };
                let hi = if je < n2 { Some(je) } else { None };
                let minus = lo.and_then(|j| self.cell_at(i, j));
                let plus = hi.and_then(|j| self.cell_at(i, j));
                if minus.is_none() && plus.is_none() {
                    continue;
                }
                let x1 = g.c1(i);
                let phi = g.edge2(je);
                let h = g.h(x1);
                let dist = if minus.is_some() && plus.is_some() { h * g.d2 } else { 0.5 * h * g.d2 };
                let (_, e2v) = g.basis(phi);
                let len = g.dx1(i);
                let tag = if minus.is_some() && plus.is_some() {
                    FaceTag::Interior
                } else {
                    boundary_tag(false)
                };
                self.face2[i * (n2 + 1) + je] = self.faces.len();
                self.faces.push(Face {
                    axis: Axis::Two,
                    edge: je,
                    along: i,
                    minus,
                    plus,
                    length: len,
                    dist,
                    center: g.to_xy(x1, phi),
                    normal: e2v,
                    normal_integral: [e2v[0] * len, e2v[1] * len],
                    tag,
                });
            }
        }
        let mut cell_faces = vec![Vec::with_capacity(4); self.cells.len()];
        for (f, face) in self.faces.iter().enumerate() {
            if let Some(c) = face.minus {
                cell_faces[c].push((f, 1.0));
            }
            if let Some(c) = face.plus {
                cell_faces[c].push((f, -1.0));
            }
        }
        self.cell_faces = cell_faces;
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn is_active(&self, i: usize, j: usize) -> bool {
        self.active[i * self.grid.n2 + j]
    }

    pub fn active_mask(&self) -> &[bool] {
        &self.active
    }

    pub fn cell_at(&self, i: usize, j: usize) -> Option<usize> {
        let c = self.cell_of[i * self.grid.n2 + j];
        (c != NONE).then_some(c)
    }

    /// Face of direction 1 at edge `ie` (wrapped if periodic) and row `j`.
    pub fn face1_at(&self, ie: usize, j: usize) -> Option<usize> {
        let n1 = self.grid.n1();
        let ie = if self.grid.periodic[0] { ie % n1 } else { ie };
        let f = *self.face1.get(ie * self.grid.n2 + j)?;
        (f != NONE).then_some(f)
    }

    pub fn face2_at(&self, i: usize, je: usize) -> Option<usize> {
        let n2 = self.grid.n2;
        let je = if self.grid.periodic[1] { je % n2 } else { je };
        let f = *self.face2.get(i * (n2 + 1) + je)?;
        (f != NONE).then_some(f)
    }

    pub fn cell_faces(&self, c: usize) -> &[(usize, f64)] {
        &self.cell_faces[c]
    }

    pub fn areas(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.area).collect()
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.area).sum()
    }

    pub fn face_weights(&self) -> Vec<f64> {
        self.faces.iter().map(Face::weight).collect()
    }

    pub fn dimension(&self) -> usize {
        if self.grid.n2 == 1 && !self.grid.periodic[1] {
            1
        } else {
            2
        }
    }

    /// Largest relative defect of the discrete Gauss identity `Σ ±∫n = 0`.
    pub fn gauss_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for faces in &self.cell_faces {
            let mut s = [0.0; 2];
            let mut perim = 0.0;
            for &(f, sign) in faces {
                let n = self.faces[f].normal_integral;
                s[0] += sign * n[0];
                s[1] += sign * n[1];
                perim += self.faces[f].length;
            }
            worst = worst.max(s[0].hypot(s[1]) / perim);
        }
        worst
    }

    /// Cells whose centers lie in the annulus `r0 ≤ |x| ≤ r1`.
    pub fn cells_in_annulus(&self, r0: f64, r1: f64) -> Vec<usize> {
        (0..self.n_cells())
            .filter(|&c| {
                let p = self.cells[c].center;
                let r = p[0].hypot(p[1]);
                r >= r0 && r <= r1
            })
            .collect()
    }

    /// Smallest cell extent in either direction, used for CFL bounds.
    pub fn min_spacing(&self) -> (f64, f64) {
        let mut m1 = f64::INFINITY;
        let mut m2 = f64::INFINITY;
        for c in &self.cells {
            m1 = m1.min(self.grid.dx1(c.i));
            m2 = m2.min(c.h * self.grid.d2);
        }
        (m1, m2)
    }

    /// Periodic or walled 1D mesh on `[0, length]`, one cell wide.
    pub fn interval(n: usize, length: f64, periodic: bool) -> Result<Self> {
        Self::rectangle(n, 1, [length, 1.0], [periodic, false])
    }

    pub fn rectangle(n1: usize, n2: usize, size: [f64; 2], periodic: [bool; 2]) -> Result<Self> {
        if n1 == 0 || n2 == 0 || !(size[0] > 0.0 && size[1] > 0.0) {
            return Err(Error::Geometry("rectangle needs positive size and cell counts".into()));
        }
        let e1 = (0..=n1).map(|i| size[0] * i as f64 / n1 as f64).collect();
        let grid = Grid {
            coords: Coords::Cartesian,
            e1,
            x2_0: 0.0,
            d2: size[1] / n2 as f64,
            n2,
            periodic,
        };
        Self::new(grid, vec![true; n1 * n2], None, None)
    }

    /// Full polar annulus with the given radial edges.
    pub fn annulus(edges: Vec<f64>, n_theta: usize) -> Result<Self> {
        let r_in = *edges.first().ok_or_else(|| Error::Geometry("no radial edges".into()))?;
        let r_out = *edges.last().unwrap();
        let n1 = edges.len().saturating_sub(1);
        let grid = Grid {
            coords: Coords::Polar,
            e1: edges,
            x2_0: 0.0,
            d2: std::f64::consts::TAU / n_theta as f64,
            n2: n_theta,
            periodic: [false, true],
        };
        let obstacle = ObstacleCurve { r_obs: r_in, amp_eff: 0.0, wavenumber: 0 };
        Self::new(grid, vec![true; n1 * n_theta], Some(obstacle), Some(r_out))
    }

    pub(crate) fn from_domain(spec: &DomainSpec) -> Result<Self> {
        let edges = spec.radial_edges();
        let curve = spec.curve();
        let n_theta = spec.resolution.n_theta;
        let grid = Grid {
            coords: Coords::Polar,
            e1: edges,
            x2_0: 0.0,
            d2: std::f64::consts::TAU / n_theta as f64,
            n2: n_theta,
            periodic: [false, true],
        };
        let mut active = vec![false; grid.n1() * n_theta];
        for i in 0..grid.n1() {
            for j in 0..n_theta {
                active[i * n_theta + j] = grid.c1(i) > curve.radius(grid.c2(j));
            }
        }
        Self::new(grid, active, Some(curve), Some(spec.outer_radius()))
    }

    /// True when every cell is active and direction 2 is a full periodic ring.
    pub fn is_full_annulus(&self) -> bool {
        self.grid.coords == Coords::Polar
            && self.grid.periodic[1]
            && self.active.iter().all(|&a| a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, Resolution};

    fn rough() -> Mesh {
        build_domain(&DomainSpec {
            eps: 0.25,
            delta: 1.5,
            beta: 0.125,
            r_obs: 1.0,
            amp: 0.2,
            freq: 3.0,
            cap_radius: Some(4.0),
            resolution: Resolution { n_theta: 64, dr_fine: 0.05, fine_band: 0.3, growth: 1.1 },
        })
        .unwrap()
    }

    #[test]
    fn gauss_identity_holds() {
        for m in [
            rough(),
            Mesh::annulus(vec![1.0, 1.3, 1.7, 2.5], 16).unwrap(),
            Mesh::rectangle(5, 4, [1.0, 2.0], [true, false]).unwrap(),
            Mesh::interval(7, 1.0, false).unwrap(),
        ] {
            assert!(m.gauss_defect() < 1e-14, "defect {}", m.gauss_defect());
        }
    }

    #[test]
    fn polar_areas_are_exact() {
        let m = Mesh::annulus(vec![1.0, 1.5, 2.0], 8).unwrap();
        let exact = std::f64::consts::PI * (4.0 - 1.0);
        assert!((m.total_area() - exact).abs() < 1e-13);
    }

    #[test]
    fn rough_mesh_area_converges_to_domain_area() {
        let m = rough();
        let c = m.obstacle.unwrap();
        // ∫ ½ r(φ)² dφ = π r_obs² (1 + A²/2)
        let hole = std::f64::consts::PI * (1.0 + 0.5 * c.amp_eff * c.amp_eff);
        let exact = std::f64::consts::PI * 16.0 - hole;
        assert!((m.total_area() - exact).abs() / exact < 5e-3);
    }

    #[test]
    fn boundary_tags() {
        let m = rough();
        let outer = m.faces.iter().filter(|f| f.tag == FaceTag::Outer).count();
        assert_eq!(outer, 64);
        assert!(m.faces.iter().any(|f| f.tag == FaceTag::Obstacle && f.axis == Axis::Two));
        let walls = Mesh::interval(4, 1.0, true).unwrap();
        assert_eq!(walls.faces.iter().filter(|f| f.tag == FaceTag::Wall).count(), 8);
        assert_eq!(walls.dimension(), 1);
    }

    #[test]
    fn each_cell_has_four_faces() {
        let m = rough();
        for c in 0..m.n_cells() {
            assert_eq!(m.cell_faces(c).len(), 4);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Mesh::annulus(vec![0.0, 1.0], 8).is_err());
        assert!(Mesh::annulus(vec![1.0, 1.0], 8).is_err());
        assert!(Mesh::rectangle(0, 2, [1.0, 1.0], [false, false]).is_err());
    }
}
