//! Structured triangulations of axis-aligned rectangles, uniform refinement,
//! periodic vertex identification, and plain-text import/export.

use crate::error::{Error, Result};
use std::io::{BufRead, Write};
use std::sync::OnceLock;

pub const PERIODIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    /// One diagonal per grid cell (lower-left to upper-right).
    Diagonal,
    /// Four triangles per grid cell around its center vertex.
    CrissCross,
}

/// Conforming triangulation with counterclockwise triangles.
#[derive(Debug, Clone)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// Undirected edges as sorted vertex pairs, lexicographically ordered.
    pub edges: Vec<[usize; 2]>,
    /// Per triangle: index into `edges` of the edge opposite local vertex k.
    pub tri_edges: Vec<[usize; 3]>,
    /// Per edge: (boundary tag, or None for interior edges).
    pub edge_boundary: Vec<Option<u32>>,
    pub h_max: f64,
    pub domain_box: [[f64; 2]; 2],
    /// Max circumradius/inradius ratio over all triangles.
    pub shape_regularity: f64,
    locator: OnceLock<Locator>,
}

/// Boundary tags for generated rectangle meshes.
pub const TAG_BOTTOM: u32 = 0;
pub const TAG_RIGHT: u32 = 1;
pub const TAG_TOP: u32 = 2;
pub const TAG_LEFT: u32 = 3;

impl TriMesh {
    /// Builds the edge structure and validates conformity and orientation.
    pub fn from_parts(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<TriMesh> {
        if vertices.is_empty() || triangles.is_empty() {
            return Err(Error::InvalidArgument("empty mesh".into()));
        }
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        let mut h_max: f64 = 0.0;
        let mut shape: f64 = 0.0;
        for (t, tri) in triangles.iter().enumerate() {
            let [a, b, c] = *tri;
            if a >= vertices.len() || b >= vertices.len() || c >= vertices.len() {
                return Err(Error::InvalidArgument(format!(
                    "triangle {} references missing vertex",
                    t
                )));
            }
            let pa = vertices[a];
            let pb = vertices[b];
            let pc = vertices[c];
            let area2 =
                (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0]);
            if area2 <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "triangle {} is degenerate or clockwise",
                    t
                )));
            }
            let la = dist(pb, pc);
            let lb = dist(pc, pa);
            let lc = dist(pa, pb);
            h_max = h_max.max(la).max(lb).max(lc);
            let s = 0.5 * (la + lb + lc);
            let area = 0.5 * area2;
            let inradius = area / s;
            let circumradius = la * lb * lc / (4.0 * area);
            shape = shape.max(circumradius / inradius);
        }

        // Edge census.
        let mut edge_map: std::collections::HashMap<[usize; 2], usize> =
            std::collections::HashMap::new();
        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut edge_count: Vec<usize> = Vec::new();
        let mut tri_edges = vec![[usize::MAX; 3]; triangles.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let i = tri[(k + 1) % 3];
                let j = tri[(k + 2) % 3];
                let key = [i.min(j), i.max(j)];
                let e = *edge_map.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_count.push(0);
                    edges.len() - 1
                });
                edge_count[e] += 1;
                tri_edges[t][k] = e;
            }
        }
        if edge_count.iter().any(|&c| c > 2) {
            return Err(Error::InvalidArgument(
                "non-conforming mesh: edge shared by more than 2 triangles".into(),
            ));
        }
        // Canonical edge ordering for reproducible dof numbering.
        let mut order: Vec<usize> = (0..edges.len()).collect();
        order.sort_by_key(|&e| edges[e]);
        let mut rank = vec![0usize; edges.len()];
        for (r, &e) in order.iter().enumerate() {
            rank[e] = r;
        }
        let sorted_edges: Vec<[usize; 2]> = order.iter().map(|&e| edges[e]).collect();
        let sorted_count: Vec<usize> = order.iter().map(|&e| edge_count[e]).collect();
        for te in tri_edges.iter_mut() {
            for k in 0..3 {
                te[k] = rank[te[k]];
            }
        }
        let edge_boundary = sorted_edges
            .iter()
            .zip(&sorted_count)
            .map(|(e, &c)| {
                if c == 2 {
                    None
                } else {
                    Some(rect_boundary_tag(vertices[e[0]], vertices[e[1]], lo, hi))
                }
            })
            .collect();

        Ok(TriMesh {
            vertices,
            triangles,
            edges: sorted_edges,
            tri_edges,
            edge_boundary,
            h_max,
            domain_box: [lo, hi],
            shape_regularity: shape,
            locator: OnceLock::new(),
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [pa, pb, pc] = self.triangle_points(t);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0]))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    /// True if the vertex lies on the domain-box boundary.
    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        let p = self.vertices[v];
        let [lo, hi] = self.domain_box;
        (p[0] - lo[0]).abs() < PERIODIC_TOL
            || (p[0] - hi[0]).abs() < PERIODIC_TOL
            || (p[1] - lo[1]).abs() < PERIODIC_TOL
            || (p[1] - hi[1]).abs() < PERIODIC_TOL
    }

    /// Locates the triangle containing the point; tolerance 1e-12 in
    /// barycentric coordinates. Points on shared edges resolve to the
    /// lowest-index candidate triangle.
    pub fn locate(&self, p: [f64; 2]) -> Result<(usize, [f64; 3])> {
        let loc = self.locator.get_or_init(|| Locator::build(self));
        loc.locate(self, p)
            .ok_or(Error::Location(p[0], p[1]))
    }

    pub fn barycentric(&self, t: usize, p: [f64; 2]) -> [f64; 3] {
        let [pa, pb, pc] = self.triangle_points(t);
        let area2 = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0]);
        let la = ((pb[0] - p[0]) * (pc[1] - p[1]) - (pb[1] - p[1]) * (pc[0] - p[0])) / area2;
        let lb = ((pc[0] - p[0]) * (pa[1] - p[1]) - (pc[1] - p[1]) * (pa[0] - p[0])) / area2;
        [la, lb, 1.0 - la - lb]
    }

    /// Writes the `tri-mesh v1` plain-text format.
    pub fn export<W: Write>(&self, w: &mut W) -> Result<()> {
        let boundary: Vec<(usize, usize, u32)> = self
            .edges
            .iter()
            .zip(&self.edge_boundary)
            .filter_map(|(e, b)| b.map(|tag| (e[0], e[1], tag)))
            .collect();
        writeln!(w, "tri-mesh v1")?;
        writeln!(
            w,
            "{} {} {}",
            self.n_vertices(),
            self.n_triangles(),
            boundary.len()
        )?;
        for v in &self.vertices {
            writeln!(w, "{:.17e} {:.17e}", v[0], v[1])?;
        }
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        for (i, j, tag) in boundary {
            writeln!(w, "{} {} {}", i, j, tag)?;
        }
        Ok(())
    }

    /// Reads the `tri-mesh v1` plain-text format.
    pub fn import<R: BufRead>(r: &mut R) -> Result<TriMesh> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            loop {
                match lines.next() {
                    Some(l) => {
                        let l = l?;
                        if !l.trim().is_empty() {
                            return Ok(l);
                        }
                    }
                    None => return Err(Error::Format("unexpected end of mesh file".into())),
                }
            }
        };
        let header = next()?;
        if header.trim() != "tri-mesh v1" {
            return Err(Error::Format(format!("bad mesh header: {:?}", header)));
        }
        let counts = next()?;
        let mut it = counts.split_whitespace();
        let nv: usize = parse_field(it.next(), "nv")?;
        let nt: usize = parse_field(it.next(), "nt")?;
        let nbe: usize = parse_field(it.next(), "nbe")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let line = next()?;
            let mut it = line.split_whitespace();
            let x: f64 = parse_field(it.next(), "vertex x")?;
            let y: f64 = parse_field(it.next(), "vertex y")?;
            vertices.push([x, y]);
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let line = next()?;
            let mut it = line.split_whitespace();
            let a: usize = parse_field(it.next(), "triangle i")?;
            let b: usize = parse_field(it.next(), "triangle j")?;
            let c: usize = parse_field(it.next(), "triangle k")?;
            triangles.push([a, b, c]);
        }
        for _ in 0..nbe {
            let _ = next()?; // boundary tags are recomputed geometrically
        }
        TriMesh::from_parts(vertices, triangles)
    }
}

fn parse_field<T: std::str::FromStr>(s: Option<&str>, what: &str) -> Result<T> {
    s.ok_or_else(|| Error::Format(format!("missing field {}", what)))?
        .parse()
        .map_err(|_| Error::Format(format!("bad field {}", what)))
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn rect_boundary_tag(a: [f64; 2], b: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> u32 {
    let on = |v: f64, t: f64| (v - t).abs() < PERIODIC_TOL;
    if on(a[1], lo[1]) && on(b[1], lo[1]) {
        TAG_BOTTOM
    } else if on(a[0], hi[0]) && on(b[0], hi[0]) {
        TAG_RIGHT
    } else if on(a[1], hi[1]) && on(b[1], hi[1]) {
        TAG_TOP
    } else {
        TAG_LEFT
    }
}

/// Uniform mesh of the unit square with n subdivisions per side.
pub fn unit_square_mesh(n: usize, pattern: Pattern) -> Result<TriMesh> {
    let ticks: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    tensor_mesh(&ticks, &ticks, pattern)
}

/// Unit-square mesh whose interior grid lines sit at (2i-1)/(2n), so no grid
/// line falls on {x = 1/2} for even n. Used for non-aligned convergence runs.
pub fn shifted_unit_square_mesh(n: usize, pattern: Pattern) -> Result<TriMesh> {
    let mut ticks = Vec::with_capacity(n + 2);
    ticks.push(0.0);
    for i in 1..=n {
        ticks.push((2.0 * i as f64 - 1.0) / (2.0 * n as f64));
    }
    ticks.push(1.0);
    tensor_mesh(&ticks, &ticks, pattern)
}

/// Triangulation of the rectangle spanned by the tick vectors.
pub fn tensor_mesh(xs: &[f64], ys: &[f64], pattern: Pattern) -> Result<TriMesh> {
    if xs.len() < 2 || ys.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least one subdivision per side".into(),
        ));
    }
    let nx = xs.len() - 1;
    let ny = ys.len() - 1;
    let grid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices: Vec<[f64; 2]> = Vec::new();
    for &y in ys {
        for &x in xs {
            vertices.push([x, y]);
        }
    }
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    match pattern {
        Pattern::Diagonal => {
            for j in 0..ny {
                for i in 0..nx {
                    let v00 = grid(i, j);
                    let v10 = grid(i + 1, j);
                    let v01 = grid(i, j + 1);
                    let v11 = grid(i + 1, j + 1);
                    triangles.push([v00, v10, v11]);
                    triangles.push([v00, v11, v01]);
                }
            }
        }
        Pattern::CrissCross => {
            let base = vertices.len();
            for j in 0..ny {
                for i in 0..nx {
                    vertices.push([0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])]);
                }
            }
            for j in 0..ny {
                for i in 0..nx {
                    let v00 = grid(i, j);
                    let v10 = grid(i + 1, j);
                    let v01 = grid(i, j + 1);
                    let v11 = grid(i + 1, j + 1);
                    let c = base + j * nx + i;
                    triangles.push([v00, v10, c]);
                    triangles.push([v10, v11, c]);
                    triangles.push([v11, v01, c]);
                    triangles.push([v01, v00, c]);
                }
            }
        }
    }
    TriMesh::from_parts(vertices, triangles)
}

/// Uniform red refinement: each triangle into 4 similar ones.
pub fn refine(mesh: &TriMesh) -> TriMesh {
    let nv = mesh.n_vertices();
    let mut vertices = mesh.vertices.clone();
    for e in &mesh.edges {
        let a = mesh.vertices[e[0]];
        let b = mesh.vertices[e[1]];
        vertices.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
    }
    let mid = |e: usize| nv + e;
    let mut triangles = Vec::with_capacity(4 * mesh.n_triangles());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let [a, b, c] = *tri;
        // Edge k is opposite local vertex k.
        let mbc = mid(mesh.tri_edges[t][0]);
        let mca = mid(mesh.tri_edges[t][1]);
        let mab = mid(mesh.tri_edges[t][2]);
        triangles.push([a, mab, mca]);
        triangles.push([b, mbc, mab]);
        triangles.push([c, mca, mbc]);
        triangles.push([mab, mbc, mca]);
    }
    TriMesh::from_parts(vertices, triangles).expect("refinement of a valid mesh is valid")
}

/// Identification of opposite-boundary vertices of a rectangular cell.
#[derive(Debug)]
pub struct PeriodicPairing {
    /// master_of[v] = v for masters, otherwise the master vertex index.
    pub master_of: Vec<usize>,
    pub n_free: usize,
}

impl PeriodicPairing {
    pub fn master(&self, v: usize) -> usize {
        self.master_of[v]
    }
}

/// Pairs x=lo with x=hi and y=lo with y=hi boundary vertices.
///
/// Requires matching vertex traces on opposite sides; the four corners all
/// collapse to the lower-left corner.
pub fn periodic_pairing(mesh: &TriMesh) -> Result<PeriodicPairing> {
    let [lo, hi] = mesh.domain_box;
    let nv = mesh.n_vertices();
    let mut master_of: Vec<usize> = (0..nv).collect();
    // Pair along each axis: vertex on the hi side maps to the matching lo vertex.
    for axis in 0..2 {
        let other = 1 - axis;
        let mut lo_side: Vec<usize> = Vec::new();
        let mut hi_side: Vec<usize> = Vec::new();
        for v in 0..nv {
            let p = mesh.vertices[v];
            if (p[axis] - lo[axis]).abs() < PERIODIC_TOL {
                lo_side.push(v);
            } else if (p[axis] - hi[axis]).abs() < PERIODIC_TOL {
                hi_side.push(v);
            }
        }
        if lo_side.len() != hi_side.len() {
            return Err(Error::PeriodicityMismatch(format!(
                "axis {}: {} vs {} boundary vertices",
                axis,
                lo_side.len(),
                hi_side.len()
            )));
        }
        for &v in &hi_side {
            let pv = mesh.vertices[v];
            let m = lo_side
                .iter()
                .copied()
                .find(|&u| (mesh.vertices[u][other] - pv[other]).abs() < PERIODIC_TOL);
            match m {
                Some(u) => master_of[v] = u,
                None => {
                    return Err(Error::PeriodicityMismatch(format!(
                        "no partner for vertex at ({}, {})",
                        pv[0], pv[1]
                    )))
                }
            }
        }
    }
    // Path-compress: corner (hi,hi) chains through (lo,hi) to (lo,lo).
    for v in 0..nv {
        let mut m = master_of[v];
        while master_of[m] != m {
            m = master_of[m];
        }
        master_of[v] = m;
    }
    let n_free = master_of.iter().enumerate().filter(|&(v, &m)| v == m).count();
    Ok(PeriodicPairing { master_of, n_free })
}

/// Macro triangulation of Ω whose vertices serve as cell-problem nodes.
#[derive(Debug)]
pub struct MacroGrid {
    pub triangulation: TriMesh,
    pub k: f64,
}

impl MacroGrid {
    /// Uniform two-triangle grid on the unit square with spacing k = 1/n;
    /// nodes are the grid points.
    pub fn unit_square(n: usize) -> Result<MacroGrid> {
        let triangulation = unit_square_mesh(n, Pattern::Diagonal)?;
        let k = 1.0 / n as f64;
        Ok(MacroGrid { triangulation, k })
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.triangulation.vertices
    }
}

/// Uniform bin grid over the mesh bounding box for O(1) point location.
#[derive(Debug, Clone)]
struct Locator {
    nx: usize,
    ny: usize,
    lo: [f64; 2],
    inv_cell: [f64; 2],
    bins: Vec<Vec<u32>>,
}

impl Locator {
    fn build(mesh: &TriMesh) -> Locator {
        let [lo, hi] = mesh.domain_box;
        let n = ((mesh.n_triangles() as f64).sqrt().ceil() as usize).max(1);
        let (nx, ny) = (n, n);
        let span = [hi[0] - lo[0], hi[1] - lo[1]];
        let inv_cell = [nx as f64 / span[0].max(1e-300), ny as f64 / span[1].max(1e-300)];
        let mut bins = vec![Vec::new(); nx * ny];
        for t in 0..mesh.n_triangles() {
            let pts = mesh.triangle_points(t);
            let (mut bx0, mut bx1, mut by0, mut by1) = (usize::MAX, 0, usize::MAX, 0);
            for p in pts {
                let ix = (((p[0] - lo[0]) * inv_cell[0]) as usize).min(nx - 1);
                let iy = (((p[1] - lo[1]) * inv_cell[1]) as usize).min(ny - 1);
                bx0 = bx0.min(ix);
                bx1 = bx1.max(ix);
                by0 = by0.min(iy);
                by1 = by1.max(iy);
            }
            for iy in by0..=by1 {
                for ix in bx0..=bx1 {
                    bins[iy * nx + ix].push(t as u32);
                }
            }
        }
        Locator {
            nx,
            ny,
            lo,
            inv_cell,
            bins,
        }
    }

    fn locate(&self, mesh: &TriMesh, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let ix = (((p[0] - self.lo[0]) * self.inv_cell[0]) as isize)
            .clamp(0, self.nx as isize - 1) as usize;
        let iy = (((p[1] - self.lo[1]) * self.inv_cell[1]) as isize)
            .clamp(0, self.ny as isize - 1) as usize;
        // Search the home bin, then its neighbors for points near bin edges.
        for radius in 0..2usize {
            let x0 = ix.saturating_sub(radius);
            let x1 = (ix + radius).min(self.nx - 1);
            let y0 = iy.saturating_sub(radius);
            let y1 = (iy + radius).min(self.ny - 1);
            for by in y0..=y1 {
                for bx in x0..=x1 {
                    if radius == 1 && bx == ix && by == iy {
                        continue;
                    }
                    for &t in &self.bins[by * self.nx + bx] {
                        let lam = mesh.barycentric(t as usize, p);
                        if lam.iter().all(|&l| l >= -1e-12) {
                            return Some((t as usize, lam));
                        }
                    }
                }
            }
        }
        None
    }
}
