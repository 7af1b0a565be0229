//! Vector P1 elements on the magnet and lowest-order Nédélec (Whitney) edge
//! elements on the whole cavity.
//!
//! Nodal fields are indexed by magnet vertex (see [`Mesh::magnet_vertices`]);
//! edge fields by global edge. The Whitney function of local edge `(i, j)` is
//! `l_i grad l_j - l_j grad l_i`, multiplied by the edge's orientation sign so
//! that its circulation along the globally oriented edge is one.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point, Region, TetGeometry, LOCAL_EDGES};
use crate::quadrature::{edge_gauss2, QuadratureRule};
use crate::sparse::{CsrMatrix, TripletBuilder};

pub type Vec3 = Vector3<f64>;

/// Piecewise-linear vector field given by its values at magnet vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    pub values: Vec<Vec3>,
}

impl NodalField {
    pub fn new(values: Vec<Vec3>) -> Self {
        Self { values }
    }

    pub fn constant(mesh: &Mesh, v: Vec3) -> Self {
        Self {
            values: vec![v; mesh.num_magnet_vertices()],
        }
    }

    pub fn zeros(mesh: &Mesh) -> Self {
        Self::constant(mesh, Vec3::zeros())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Value at barycentric coordinates `bary` of magnet tet `t`.
    pub fn value_at(&self, mesh: &Mesh, t: usize, bary: &[f64; 4]) -> Vec3 {
        let loc = mesh.magnet_tet(t);
        loc.iter()
            .zip(bary)
            .fold(Vec3::zeros(), |acc, (&v, &l)| acc + self.values[v] * l)
    }

    /// Elementwise Jacobian `J[(c, d)] = d m_c / d x_d` on magnet tet `t`.
    pub fn jacobian(&self, mesh: &Mesh, t: usize) -> Matrix3<f64> {
        let geo = &mesh.geometry[t];
        let loc = mesh.magnet_tet(t);
        (0..4).fold(Matrix3::zeros(), |acc, i| {
            acc + self.values[loc[i]] * geo.grad_bary[i].transpose()
        })
    }

    /// Component-stacked copy `[x_0, y_0, z_0, x_1, ...]`.
    pub fn flatten(&self) -> Vec<f64> {
        self.values
            .iter()
            .flat_map(|v| [v[0], v[1], v[2]])
            .collect()
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[c]).collect()
    }

    pub fn max_norm_deviation_from_unit(&self) -> f64 {
        self.values
            .iter()
            .map(|v| (v.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Function in the lowest-order Nédélec space, one circulation per edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeField {
    pub coeffs: Vec<f64>,
}

impl EdgeField {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            coeffs: vec![0.0; mesh.num_edges()],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|x| x.is_finite())
    }

    pub fn value_at(&self, mesh: &Mesh, t: usize, bary: &[f64; 4]) -> Vec3 {
        let geo = &mesh.geometry[t];
        mesh.tet_to_edges[t]
            .iter()
            .enumerate()
            .fold(Vec3::zeros(), |acc, (l, &(e, s))| {
                acc + whitney(geo, bary, l) * (s * self.coeffs[e])
            })
    }

    /// Exact curl on tet `t` (constant per element).
    pub fn curl(&self, mesh: &Mesh, t: usize) -> Vec3 {
        let geo = &mesh.geometry[t];
        mesh.tet_to_edges[t]
            .iter()
            .enumerate()
            .fold(Vec3::zeros(), |acc, (l, &(e, s))| {
                acc + whitney_curl(geo, l) * (s * self.coeffs[e])
            })
    }
}

/// Local Whitney function of local edge `l` at barycentric point `bary`.
pub fn whitney(geo: &TetGeometry, bary: &[f64; 4], l: usize) -> Vec3 {
    let (i, j) = LOCAL_EDGES[l];
    geo.grad_bary[j] * bary[i] - geo.grad_bary[i] * bary[j]
}

pub fn whitney_curl(geo: &TetGeometry, l: usize) -> Vec3 {
    let (i, j) = LOCAL_EDGES[l];
    geo.grad_bary[i].cross(&geo.grad_bary[j]) * 2.0
}

/// Nodal interpolation onto the magnet vertices.
pub fn interpolate_nodal(mesh: &Mesh, f: impl Fn(&Point) -> Vec3) -> Result<NodalField> {
    let values = mesh
        .magnet_vertices
        .iter()
        .map(|&v| {
            let x = &mesh.vertices[v];
            let y = f(x);
            if y.iter().all(|c| c.is_finite()) {
                Ok(y)
            } else {
                Err(Error::Input(format!(
                    "non-finite value at vertex {v} ({}, {}, {})",
                    x[0], x[1], x[2]
                )))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NodalField { values })
}

/// Edge interpolation: circulation of `f` along each oriented edge, by
/// two-point Gauss quadrature.
pub fn interpolate_edge(mesh: &Mesh, f: impl Fn(&Point) -> Vec3) -> EdgeField {
    let rule = edge_gauss2();
    let coeffs = mesh
        .edges
        .iter()
        .map(|e| {
            let (xa, xb) = (mesh.vertices[e.a], mesh.vertices[e.b]);
            rule.iter()
                .map(|&(s, w)| w * f(&(xa + (xb - xa) * s)).dot(&e.tangent))
                .sum::<f64>()
                * e.length
        })
        .collect();
    EdgeField { coeffs }
}

/// Scalar P1 mass and stiffness matrices on the magnet, `N x N`.
#[derive(Debug, Clone)]
pub struct P1Matrices {
    pub mass: CsrMatrix,
    pub stiffness: CsrMatrix,
}

pub fn assemble_p1_matrices(mesh: &Mesh) -> P1Matrices {
    let n = mesh.num_magnet_vertices();
    let mut mass = TripletBuilder::new(n, n);
    let mut stiffness = TripletBuilder::new(n, n);
    for t in mesh.magnet_tets() {
        let geo = &mesh.geometry[t];
        let loc = mesh.magnet_tet(t);
        for a in 0..4 {
            for b in 0..4 {
                let m = if a == b {
                    geo.volume / 10.0
                } else {
                    geo.volume / 20.0
                };
                mass.push(loc[a], loc[b], m);
                stiffness.push(
                    loc[a],
                    loc[b],
                    geo.volume * geo.grad_bary[a].dot(&geo.grad_bary[b]),
                );
            }
        }
    }
    P1Matrices {
        mass: mass.build(),
        stiffness: stiffness.build(),
    }
}

/// Per-region scalar coefficient (conductivity-inverse for the curl-curl form).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionCoefficient {
    pub magnet: f64,
    pub cavity: f64,
}

impl RegionCoefficient {
    pub fn uniform(v: f64) -> Self {
        Self {
            magnet: v,
            cavity: v,
        }
    }

    pub fn at(&self, region: Region) -> f64 {
        match region {
            Region::Magnet => self.magnet,
            Region::Cavity => self.cavity,
        }
    }
}

/// Nédélec mass and weighted curl-curl matrices, `M x M`.
#[derive(Debug, Clone)]
pub struct NedelecMatrices {
    pub mass: CsrMatrix,
    pub curlcurl: CsrMatrix,
}

pub fn assemble_nedelec_matrices(mesh: &Mesh, sigma: RegionCoefficient) -> Result<NedelecMatrices> {
    if !(sigma.magnet > 0.0) {
        return Err(Error::config("sigma_D", "must be positive"));
    }
    if !(sigma.cavity > 0.0) {
        return Err(Error::config("sigma", "must be positive"));
    }
    let m = mesh.num_edges();
    let rule = QuadratureRule::degree2();
    let mut mass = TripletBuilder::new(m, m);
    let mut curlcurl = TripletBuilder::new(m, m);
    for t in 0..mesh.num_tets() {
        let geo = &mesh.geometry[t];
        let edges = &mesh.tet_to_edges[t];
        let s_t = sigma.at(mesh.region[t]);
        let curls: [Vec3; 6] = std::array::from_fn(|l| whitney_curl(geo, l));
        let mut local = [[0.0; 6]; 6];
        for (p, w) in rule.iter() {
            let phi: [Vec3; 6] = std::array::from_fn(|l| whitney(geo, p, l));
            for a in 0..6 {
                for b in 0..6 {
                    local[a][b] += w * phi[a].dot(&phi[b]);
                }
            }
        }
        for a in 0..6 {
            for b in 0..6 {
                let sign = edges[a].1 * edges[b].1;
                mass.push(edges[a].0, edges[b].0, sign * geo.volume * local[a][b]);
                curlcurl.push(
                    edges[a].0,
                    edges[b].0,
                    sign * s_t * geo.volume * curls[a].dot(&curls[b]),
                );
            }
        }
    }
    Ok(NedelecMatrices {
        mass: mass.build(),
        curlcurl: curlcurl.build(),
    })
}

/// Elementwise curl of an edge field on tet `t`.
pub fn curl_edge_field(mesh: &Mesh, p: &EdgeField, t: usize) -> Vec3 {
    p.curl(mesh, t)
}

/// Discrete nodal norm `(h^3 sum_n |u(x_n)|^p)^(1/p)`.
pub fn discrete_lp_norm(mesh: &Mesh, u: &NodalField, p: f64) -> f64 {
    let sum: f64 = u.values.iter().map(|v| v.norm().powf(p)).sum();
    (mesh.cell_volume() * sum).powf(1.0 / p)
}

/// `sum_c u_c^T A u_c` for a scalar matrix applied blockwise to a vector field.
pub fn blockwise_quadratic_form(a: &CsrMatrix, u: &NodalField) -> f64 {
    (0..3).map(|c| a.quadratic_form(&u.component(c))).sum()
}

/// `||u||^2` over the magnet, via the mass matrix.
pub fn l2_norm_sq(p1: &P1Matrices, u: &NodalField) -> f64 {
    blockwise_quadratic_form(&p1.mass, u)
}

/// `||grad u||^2` over the magnet, via the stiffness matrix.
pub fn dirichlet_energy(p1: &P1Matrices, u: &NodalField) -> f64 {
    blockwise_quadratic_form(&p1.stiffness, u)
}
