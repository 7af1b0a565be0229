//! Uniform tetrahedral meshes of axis-aligned boxes.
//!
//! Every grid cube is split into the six Kuhn (path) tetrahedra that share the
//! cube's main diagonal. Vertices are numbered lexicographically with x running
//! fastest, edges are stored once with orientation from the lower to the higher
//! vertex index, and each tet records the global edge index and sign of its six
//! local edges.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::sparse::TripletBuilder;

pub type Point = Vector3<f64>;

/// Local vertex pairs of the six tet edges, in the order used by `tet_to_edges`.
pub const LOCAL_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub lo: Point,
    pub hi: Point,
}

impl Aabb {
    pub fn new(lo: [f64; 3], hi: [f64; 3]) -> Self {
        Self {
            lo: Point::from(lo),
            hi: Point::from(hi),
        }
    }

    pub fn unit_cube() -> Self {
        Self::new([0.0; 3], [1.0; 3])
    }

    pub fn volume(&self) -> f64 {
        (self.hi - self.lo).product()
    }

    pub fn contains(&self, x: &Point) -> bool {
        (0..3).all(|d| x[d] >= self.lo[d] && x[d] <= self.hi[d])
    }
}

/// Which part of the cavity a tetrahedron belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Inside the ferromagnet D.
    Magnet,
    /// In the cavity but outside the ferromagnet.
    Cavity,
}

/// A mesh edge, oriented from `a` to `b` with `a < b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub tangent: Point,
    pub length: f64,
}

/// Per-tet geometric data for affine P1 maps.
#[derive(Debug, Clone, PartialEq)]
pub struct TetGeometry {
    pub volume: f64,
    /// Gradients of the four barycentric coordinates (constant on the tet).
    pub grad_bary: [Point; 4],
}

impl TetGeometry {
    fn from_points(p: [&Point; 4]) -> Option<Self> {
        let b = Matrix3::from_columns(&[p[1] - p[0], p[2] - p[0], p[3] - p[0]]);
        let det = b.determinant();
        let inv = b.try_inverse()?;
        let g1 = inv.row(0).transpose();
        let g2 = inv.row(1).transpose();
        let g3 = inv.row(2).transpose();
        Some(Self {
            volume: det / 6.0,
            grad_bary: [-(g1 + g2 + g3), g1, g2, g3],
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub tets: Vec<[usize; 4]>,
    pub edges: Vec<Edge>,
    /// Global edge index and orientation sign (+1/-1) of each local edge.
    pub tet_to_edges: Vec<[(usize, f64); 6]>,
    pub region: Vec<Region>,
    pub geometry: Vec<TetGeometry>,
    /// Maximal element diameter.
    pub h: f64,
    /// Uniform grid spacing per axis, when the mesh came from a grid.
    pub spacing: Option<Point>,
    /// Global indices of the vertices of magnet tets, ascending.
    pub magnet_vertices: Vec<usize>,
    vertex_to_magnet: Vec<Option<usize>>,
}

impl Mesh {
    /// Builds a mesh from raw connectivity. Every tet must have positive signed volume.
    pub fn from_tets(
        vertices: Vec<Point>,
        tets: Vec<[usize; 4]>,
        region: Vec<Region>,
    ) -> Result<Self> {
        if region.len() != tets.len() {
            return Err(Error::Input(format!(
                "{} region tags for {} tets",
                region.len(),
                tets.len()
            )));
        }
        let mut geometry = Vec::with_capacity(tets.len());
        for (t, tet) in tets.iter().enumerate() {
            if tet.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::Input(format!("tet {t} references a missing vertex")));
            }
            let geo = TetGeometry::from_points(tet.map(|v| &vertices[v]))
                .filter(|g| g.volume > 0.0)
                .ok_or_else(|| Error::Input(format!("tet {t} has nonpositive signed volume")))?;
            geometry.push(geo);
        }

        let mut pairs: Vec<(usize, usize)> = tets
            .iter()
            .flat_map(|tet| {
                LOCAL_EDGES.iter().map(move |&(i, j)| {
                    let (a, b) = (tet[i], tet[j]);
                    (a.min(b), a.max(b))
                })
            })
            .collect();
        pairs.sort_unstable();
        pairs.dedup();

        let edges: Vec<Edge> = pairs
            .iter()
            .map(|&(a, b)| {
                let d = vertices[b] - vertices[a];
                let length = d.norm();
                Edge {
                    a,
                    b,
                    tangent: d / length,
                    length,
                }
            })
            .collect();

        let tet_to_edges = tets
            .iter()
            .map(|tet| {
                LOCAL_EDGES.map(|(i, j)| {
                    let (a, b) = (tet[i], tet[j]);
                    let key = (a.min(b), a.max(b));
                    let idx = pairs.binary_search(&key).expect("edge enumerated above");
                    (idx, if a < b { 1.0 } else { -1.0 })
                })
            })
            .collect();

        let h = tets
            .iter()
            .map(|tet| {
                LOCAL_EDGES
                    .iter()
                    .map(|&(i, j)| (vertices[tet[i]] - vertices[tet[j]]).norm())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);

        let mut in_magnet = vec![false; vertices.len()];
        for (tet, r) in tets.iter().zip(&region) {
            if *r == Region::Magnet {
                for &v in tet {
                    in_magnet[v] = true;
                }
            }
        }
        let mut vertex_to_magnet = vec![None; vertices.len()];
        let mut magnet_vertices = Vec::new();
        for (v, inside) in in_magnet.iter().enumerate() {
            if *inside {
                vertex_to_magnet[v] = Some(magnet_vertices.len());
                magnet_vertices.push(v);
            }
        }

        Ok(Self {
            vertices,
            tets,
            edges,
            tet_to_edges,
            region,
            geometry,
            h,
            spacing: None,
            magnet_vertices,
            vertex_to_magnet,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    /// Number of vertices carrying magnetization degrees of freedom.
    pub fn num_magnet_vertices(&self) -> usize {
        self.magnet_vertices.len()
    }

    /// Position of a global vertex in the magnet numbering.
    pub fn magnet_index(&self, vertex: usize) -> Option<usize> {
        self.vertex_to_magnet[vertex]
    }

    pub fn magnet_tets(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.tets.len()).filter(|&t| self.region[t] == Region::Magnet)
    }

    /// Tet vertices translated to magnet numbering. Only valid for magnet tets.
    pub fn magnet_tet(&self, t: usize) -> [usize; 4] {
        self.tets[t].map(|v| self.vertex_to_magnet[v].expect("vertex of a magnet tet"))
    }

    pub fn tet_points(&self, t: usize) -> [Point; 4] {
        self.tets[t].map(|v| self.vertices[v])
    }

    /// Physical point at barycentric coordinates `bary` of tet `t`.
    pub fn point_at(&self, t: usize, bary: &[f64; 4]) -> Point {
        self.tets[t]
            .iter()
            .zip(bary)
            .fold(Point::zeros(), |acc, (&v, &l)| acc + self.vertices[v] * l)
    }

    pub fn total_volume(&self) -> f64 {
        self.geometry.iter().map(|g| g.volume).sum()
    }

    pub fn magnet_volume(&self) -> f64 {
        self.magnet_tets().map(|t| self.geometry[t].volume).sum()
    }

    /// Grid spacing used by discrete nodal norms; falls back to `h` for unstructured input.
    pub fn cell_volume(&self) -> f64 {
        match self.spacing {
            Some(s) => s.product(),
            None => self.h.powi(3),
        }
    }

    /// Moves one vertex and rebuilds the geometry. Fails if any tet inverts.
    pub fn perturb_vertex(&self, vertex: usize, offset: Point) -> Result<Mesh> {
        let mut vertices = self.vertices.clone();
        vertices[vertex] += offset;
        let mut mesh = Mesh::from_tets(vertices, self.tets.clone(), self.region.clone())?;
        mesh.spacing = self.spacing;
        Ok(mesh)
    }

    /// Writes the plain-text mesh dump (format documented in the README).
    pub fn write_dump(&self, out: &mut impl Write) -> std::io::Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "# mllg mesh v1");
        let _ = writeln!(s, "h {:.17e}", self.h);
        let _ = writeln!(s, "vertices {}", self.vertices.len());
        for (i, v) in self.vertices.iter().enumerate() {
            let _ = writeln!(s, "{i} {:.17e} {:.17e} {:.17e}", v[0], v[1], v[2]);
        }
        let _ = writeln!(s, "tets {}", self.tets.len());
        for (i, (t, r)) in self.tets.iter().zip(&self.region).enumerate() {
            let tag = match r {
                Region::Magnet => "D",
                Region::Cavity => "C",
            };
            let _ = writeln!(s, "{i} {} {} {} {} {tag}", t[0], t[1], t[2], t[3]);
        }
        let _ = writeln!(s, "edges {}", self.edges.len());
        for (i, e) in self.edges.iter().enumerate() {
            let _ = writeln!(s, "{i} {} {}", e.a, e.b);
        }
        out.write_all(s.as_bytes())
    }

    pub fn dump_to_file(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_dump(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

/// Kuhn subdivision of `n^3` cubes tiling `bounds`; tets whose centroid lies in
/// `magnet` (the whole box when `None`) are tagged [`Region::Magnet`].
pub fn build_cube_mesh(n: usize, bounds: Aabb, magnet: Option<Aabb>) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::config("n", "must be at least 1"));
    }
    let spacing = (bounds.hi - bounds.lo) / n as f64;
    if spacing.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::config(
            "box",
            "must have positive extent along every axis",
        ));
    }
    if let Some(d) = &magnet {
        for d_corner in [d.lo, d.hi] {
            for axis in 0..3 {
                let steps = (d_corner[axis] - bounds.lo[axis]) / spacing[axis];
                let aligned = (steps - steps.round()).abs() <= 1e-9 * n as f64;
                if !aligned || steps.round() < 0.0 || steps.round() > n as f64 {
                    return Err(Error::config(
                        "d_region",
                        "corners must lie on grid points inside the box",
                    ));
                }
            }
        }
        if (0..3).any(|a| d.hi[a] <= d.lo[a]) {
            return Err(Error::config("d_region", "must have positive extent"));
        }
    }

    let n1 = n + 1;
    let index = |i: usize, j: usize, k: usize| i + n1 * (j + n1 * k);
    let mut vertices = Vec::with_capacity(n1 * n1 * n1);
    for k in 0..n1 {
        for j in 0..n1 {
            for i in 0..n1 {
                vertices.push(Point::new(
                    bounds.lo[0] + i as f64 * spacing[0],
                    bounds.lo[1] + j as f64 * spacing[1],
                    bounds.lo[2] + k as f64 * spacing[2],
                ));
            }
        }
    }

    const AXIS_ORDERS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut tets = Vec::with_capacity(6 * n * n * n);
    let mut region = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for order in AXIS_ORDERS {
                    let mut cursor = [i, j, k];
                    let mut tet = [index(i, j, k); 4];
                    for (slot, &axis) in order.iter().enumerate() {
                        cursor[axis] += 1;
                        tet[slot + 1] = index(cursor[0], cursor[1], cursor[2]);
                    }
                    let p = tet.map(|v| vertices[v]);
                    let det = (p[1] - p[0]).cross(&(p[2] - p[0])).dot(&(p[3] - p[0]));
                    if det < 0.0 {
                        tet.swap(2, 3);
                    }
                    let centroid = tet.iter().fold(Point::zeros(), |a, &v| a + vertices[v]) / 4.0;
                    let inside = magnet.is_none_or(|d| d.contains(&centroid));
                    tets.push(tet);
                    region.push(if inside {
                        Region::Magnet
                    } else {
                        Region::Cavity
                    });
                }
            }
        }
    }

    let mut mesh = Mesh::from_tets(vertices, tets, region)?;
    mesh.spacing = Some(spacing);
    Ok(mesh)
}

/// Outcome of the stiffness sign check on the magnet submesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffDiagonalReport {
    pub pass: bool,
    pub worst_entry: f64,
}

/// Assembles the scalar P1 stiffness matrix over magnet tets and checks that
/// every off-diagonal entry is nonpositive (up to 1e-12).
pub fn verify_offdiagonal_condition(mesh: &Mesh) -> OffDiagonalReport {
    let n = mesh.num_magnet_vertices();
    let mut builder = TripletBuilder::new(n, n);
    for t in mesh.magnet_tets() {
        let geo = &mesh.geometry[t];
        let loc = mesh.magnet_tet(t);
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    builder.push(
                        loc[a],
                        loc[b],
                        geo.volume * geo.grad_bary[a].dot(&geo.grad_bary[b]),
                    );
                }
            }
        }
    }
    let matrix = builder.build();
    let worst_entry = matrix
        .iter()
        .filter(|(r, c, _)| r != c)
        .map(|(_, _, v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let worst_entry = if worst_entry.is_finite() {
        worst_entry
    } else {
        0.0
    };
    OffDiagonalReport {
        pass: worst_entry <= 1e-12,
        worst_entry,
    }
}

/// Single tetrahedron with unit edge length, positively oriented.
pub fn regular_tetrahedron() -> Mesh {
    let s = 1.0 / 8f64.sqrt();
    let vertices = vec![
        Point::new(s, s, s),
        Point::new(s, -s, -s),
        Point::new(-s, s, -s),
        Point::new(-s, -s, s),
    ];
    let mut tet = [0, 1, 2, 3];
    let det = (vertices[1] - vertices[0])
        .cross(&(vertices[2] - vertices[0]))
        .dot(&(vertices[3] - vertices[0]));
    if det < 0.0 {
        tet.swap(2, 3);
    }
    Mesh::from_tets(vertices, vec![tet], vec![Region::Magnet]).expect("regular tet is valid")
}

/// Shifts the far corner of the first cell by 0.3 cell widths along x, which
/// gives some tets an obtuse dihedral angle while keeping all volumes positive.
pub fn obtuse_variant(mesh: &Mesh) -> Result<Mesh> {
    let spacing = mesh.spacing.unwrap_or(Point::repeat(mesh.h));
    let target = mesh
        .vertices
        .iter()
        .position(|v| (v - (mesh.vertices[0] + spacing)).norm() < 1e-12 * mesh.h.max(1.0))
        .ok_or_else(|| Error::Input("mesh has no first-cell far corner".into()))?;
    mesh.perturb_vertex(target, Point::new(0.3 * spacing[0], 0.0, 0.0))
}
