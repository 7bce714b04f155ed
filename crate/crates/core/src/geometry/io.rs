//! Plain-text mesh format.
//!
//! ```text
//! limitlab-mesh 1
//! coords polar|cartesian
//! periodic <0|1> <0|1>
//! edges1 <n1+1 values>
//! dir2 <x2_0> <d2> <n2>
//! active <n1 rows of n2 characters 0/1>   (one row per line)
//! obstacle <r_obs> <amp_eff> <wavenumber> (optional)
//! outer <radius>                          (optional)
//! vertices <count>                        followed by `x y` lines
//! cells <count>                           followed by `i j area` lines
//! faces <count>                           followed by `minus plus tag` lines, `-` for none
//! end
//! ```
//!
//! The grid section determines the mesh; the listed vertices, cells and
//! faces are checked against the rebuilt mesh.

use std::fmt::Write as _;

use super::{Coords, FaceTag, Grid, Mesh, ObstacleCurve};
use crate::error::{Error, Result};

const MAGIC: &str = "limitlab-mesh 1";

fn vertices(mesh: &Mesh) -> Vec<[f64; 2]> {
    let g = &mesh.grid;
    let mut out = Vec::new();
    for ie in 0..=g.n1() {
        for je in 0..=g.n2 {
            out.push(g.to_xy(g.e1[ie], g.edge2(je)));
        }
    }
    out
}

pub fn write_mesh(mesh: &Mesh) -> String {
    let g = &mesh.grid;
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let coords = match g.coords {
        Coords::Cartesian => "cartesian",
        Coords::Polar => "polar",
    };
    let _ = writeln!(s, "coords {coords}");
    let _ = writeln!(s, "periodic {} {}", g.periodic[0] as u8, g.periodic[1] as u8);
    let edges: Vec<String> = g.e1.iter().map(|x| format!("{x:e}")).collect();
    let _ = writeln!(s, "edges1 {}", edges.join(" "));
    let _ = writeln!(s, "dir2 {:e} {:e} {}", g.x2_0, g.d2, g.n2);
    let _ = writeln!(s, "active");
    for i in 0..g.n1() {
        let row: String = (0..g.n2).map(|j| if mesh.is_active(i, j) { '1' } else { '0' }).collect();
        let _ = writeln!(s, "{row}");
    }
    if let Some(c) = mesh.obstacle {
        let _ = writeln!(s, "obstacle {:e} {:e} {}", c.r_obs, c.amp_eff, c.wavenumber);
    }
    if let Some(r) = mesh.outer_radius {
        let _ = writeln!(s, "outer {r:e}");
    }
    let v = vertices(mesh);
    let _ = writeln!(s, "vertices {}", v.len());
    for p in &v {
        let _ = writeln!(s, "{:e} {:e}", p[0], p[1]);
    }
    let _ = writeln!(s, "cells {}", mesh.n_cells());
    for c in &mesh.cells {
        let _ = writeln!(s, "{} {} {:e}", c.i, c.j, c.area);
    }
    let _ = writeln!(s, "faces {}", mesh.n_faces());
    let opt = |c: Option<usize>| c.map_or("-".to_string(), |c| c.to_string());
    for f in &mesh.faces {
        let _ = writeln!(s, "{} {} {}", opt(f.minus), opt(f.plus), f.tag.as_str());
    }
    s.push_str("end\n");
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        loop {
            let (n, l) = self.inner.next().ok_or_else(|| Error::Parse("unexpected end of mesh".into()))?;
            let l = l.trim();
            if !l.is_empty() && !l.starts_with('#') {
                return Ok((n + 1, l));
            }
        }
    }

    fn keyed(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (n, l) = self.next()?;
        let mut it = l.split_whitespace();
        if it.next() != Some(key) {
            return Err(Error::Parse(format!("line {n}: expected `{key}`")));
        }
        Ok((n, it.collect()))
    }
}

fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse(format!("line {line}: bad number `{s}`")))
}

fn count(line: usize, toks: &[&str], cap: usize) -> Result<usize> {
    if toks.len() != 1 {
        return Err(Error::Parse(format!("line {line}: expected a count")));
    }
    let n: usize = num(line, toks[0])?;
    if n > cap {
        return Err(Error::Parse(format!("line {line}: count {n} exceeds {cap}")));
    }
    Ok(n)
}

const MAX_CELLS: usize = 1 << 24;

pub fn read_mesh(text: &str) -> Result<Mesh> {
    let mut lines = Lines { inner: text.lines().enumerate() };
    let (_, head) = lines.next()?;
    if head != MAGIC {
        return Err(Error::Parse(format!("missing header `{MAGIC}`")));
    }
    let (n, t) = lines.keyed("coords")?;
    let coords = match t.as_slice() {
        ["polar"] => Coords::Polar,
        ["cartesian"] => Coords::Cartesian,
        _ => return Err(Error::Parse(format!("line {n}: unknown coordinates"))),
    };
    let (n, t) = lines.keyed("periodic")?;
    let flag = |s: &str| match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(Error::Parse(format!("line {n}: periodic flags are 0 or 1"))),
    };
    if t.len() != 2 {
        return Err(Error::Parse(format!("line {n}: expected two periodic flags")));
    }
    let periodic = [flag(t[0])?, flag(t[1])?];
    let (n, t) = lines.keyed("edges1")?;
    let e1 = t.iter().map(|s| num::<f64>(n, s)).collect::<Result<Vec<_>>>()?;
    if e1.len() < 2 || e1.len() > MAX_CELLS {
        return Err(Error::Parse(format!("line {n}: need at least two edges")));
    }
    let (n, t) = lines.keyed("dir2")?;
    if t.len() != 3 {
        return Err(Error::Parse(format!("line {n}: dir2 takes origin, spacing, count")));
    }
    let (x2_0, d2, n2): (f64, f64, usize) = (num(n, t[0])?, num(n, t[1])?, num(n, t[2])?);
    let n1 = e1.len() - 1;
    if n2 == 0 || n1.saturating_mul(n2) > MAX_CELLS {
        return Err(Error::Parse(format!("line {n}: grid size out of range")));
    }
    lines.keyed("active")?;
    let mut active = Vec::with_capacity(n1 * n2);
    for _ in 0..n1 {
        let (n, row) = lines.next()?;
        if row.len() != n2 {
            return Err(Error::Parse(format!("line {n}: mask row must have {n2} entries")));
        }
        for ch in row.chars() {
            active.push(match ch {
                '0' => false,
                '1' => true,
                _ => return Err(Error::Parse(format!("line {n}: mask entries are 0 or 1"))),
            });
        }
    }
    let (mut n, mut l) = lines.next()?;
    let mut obstacle = None;
    let mut outer = None;
    if let Some(rest) = l.strip_prefix("obstacle ") {
        let t: Vec<&str> = rest.split_whitespace().collect();
        if t.len() != 3 {
            return Err(Error::Parse(format!("line {n}: obstacle takes three values")));
        }
        obstacle = Some(ObstacleCurve { r_obs: num(n, t[0])?, amp_eff: num(n, t[1])?, wavenumber: num(n, t[2])? });
        (n, l) = lines.next()?;
    }
    if let Some(rest) = l.strip_prefix("outer ") {
        outer = Some(num::<f64>(n, rest.trim())?);
        (n, l) = lines.next()?;
    }
    let grid = Grid { coords, e1, x2_0, d2, n2, periodic };
    let mesh = Mesh::new(grid, active, obstacle, outer)?;

    let toks: Vec<&str> = l.split_whitespace().collect();
    if toks.first() != Some(&"vertices") {
        return Err(Error::Parse(format!("line {n}: expected `vertices`")));
    }
    let nv = count(n, &toks[1..], MAX_CELLS)?;
    let expected = vertices(&mesh);
    if nv != expected.len() {
        return Err(Error::Parse(format!("line {n}: vertex count {nv} does not match the grid")));
    }
    for p in &expected {
        let (n, l) = lines.next()?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() != 2 {
            return Err(Error::Parse(format!("line {n}: vertex needs two coordinates")));
        }
        let q: [f64; 2] = [num(n, t[0])?, num(n, t[1])?];
        let scale = 1.0 + p[0].abs().max(p[1].abs());
        if (q[0] - p[0]).abs() > 1e-9 * scale || (q[1] - p[1]).abs() > 1e-9 * scale {
            return Err(Error::Parse(format!("line {n}: vertex inconsistent with the grid")));
        }
    }
    let (n, t) = lines.keyed("cells")?;
    if count(n, &t, MAX_CELLS)? != mesh.n_cells() {
        return Err(Error::Parse(format!("line {n}: cell count does not match the mask")));
    }
    for c in &mesh.cells {
        let (n, l) = lines.next()?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() != 3 {
            return Err(Error::Parse(format!("line {n}: cell needs `i j area`")));
        }
        let (i, j, a): (usize, usize, f64) = (num(n, t[0])?, num(n, t[1])?, num(n, t[2])?);
        if i != c.i || j != c.j || (a - c.area).abs() > 1e-9 * c.area.max(1.0) {
            return Err(Error::Parse(format!("line {n}: cell inconsistent with the grid")));
        }
    }
    let (n, t) = lines.keyed("faces")?;
    if count(n, &t, 4 * MAX_CELLS)? != mesh.n_faces() {
        return Err(Error::Parse(format!("line {n}: face count does not match the mask")));
    }
    let side = |n: usize, s: &str| -> Result<Option<usize>> {
        if s == "-" {
            Ok(None)
        } else {
            num(n, s).map(Some)
        }
    };
    for f in &mesh.faces {
        let (n, l) = lines.next()?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() != 3 {
            return Err(Error::Parse(format!("line {n}: face needs `minus plus tag`")));
        }
        let tag = FaceTag::parse(t[2]).ok_or_else(|| Error::Parse(format!("line {n}: unknown tag")))?;
        if side(n, t[0])? != f.minus || side(n, t[1])? != f.plus || tag != f.tag {
            return Err(Error::Parse(format!("line {n}: face inconsistent with the grid")));
        }
    }
    let (n, l) = lines.next()?;
    if l != "end" {
        return Err(Error::Parse(format!("line {n}: expected `end`")));
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, DomainSpec, Resolution};
    use proptest::prelude::*;

    #[test]
    fn roundtrip_rough_domain() {
        let spec = DomainSpec {
            eps: 0.5,
            delta: 1.5,
            beta: 0.125,
            r_obs: 1.0,
            amp: 0.2,
            freq: 3.0,
            cap_radius: Some(2.0),
            resolution: Resolution { n_theta: 24, dr_fine: 0.1, fine_band: 0.2, growth: 1.2 },
        };
        let m = build_domain(&spec).unwrap();
        let text = write_mesh(&m);
        let back = read_mesh(&text).unwrap();
        assert_eq!(back.grid, m.grid);
        assert_eq!(back.active_mask(), m.active_mask());
        assert_eq!(back.obstacle, m.obstacle);
        assert_eq!(write_mesh(&back), text);
    }

    #[test]
    fn rejects_corruption() {
        let m = Mesh::rectangle(3, 2, [1.0, 1.0], [true, false]).unwrap();
        let text = write_mesh(&m);
        assert!(read_mesh("").is_err());
        assert!(read_mesh(&text.replace("limitlab-mesh 1", "mesh")).is_err());
        assert!(read_mesh(&text.replace("wall", "inner")).is_err());
        assert!(read_mesh(&text.replace("\nend\n", "\n")).is_err());
        assert!(read_mesh(&text.replace("cells 6", "cells 5")).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip_random_masks(n1 in 1usize..6, n2 in 1usize..6, bits in proptest::collection::vec(any::<bool>(), 36), p in any::<[bool; 2]>()) {
            let grid = Grid {
                coords: Coords::Cartesian,
                e1: (0..=n1).map(|i| i as f64 * 0.3).collect(),
                x2_0: -1.0,
                d2: 0.25,
                n2,
                periodic: p,
            };
            let mask: Vec<bool> = bits[..n1 * n2].to_vec();
            if let Ok(m) = Mesh::new(grid, mask, None, None) {
                let back = read_mesh(&write_mesh(&m)).unwrap();
                prop_assert_eq!(back.n_faces(), m.n_faces());
                prop_assert_eq!(back.active_mask(), m.active_mask());
            }
        }
    }
}
