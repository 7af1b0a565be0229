//! Wiener paths and the rotation operators that absorb the Stratonovich noise.
//!
//! With `G u = u x g` and `|g| = 1`, `exp(sG)` is the rotation about `g` through
//! angle `-s`, written as the three-term formula `u + sin(s) Gu + (1 - cos s) G^2 u`.
//! The discrete operators use the nodal interpolant `g_h` of `g` pointwise, so
//! they are only contractions (not rotations) between vertices.

use nalgebra::Matrix3;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::fem::{interpolate_nodal, NodalField, Vec3};
use crate::mesh::{Mesh, Point};
use crate::quadrature::QuadratureRule;

/// One sampled Brownian trajectory on the grid `t_j = j k`.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerPath {
    pub values: Vec<f64>,
    pub k: f64,
    pub seed: u64,
}

impl WienerPath {
    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    /// `W_k(t_j)`: the path is piecewise constant from the left grid point.
    pub fn at_step(&self, j: usize) -> f64 {
        self.values[j]
    }

    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.windows(2).map(|w| w[1] - w[0])
    }
}

/// Standard normal draw number `index` of the stream keyed by `seed`.
///
/// Each draw consumes a fixed block of the ChaCha8 keystream, so any draw can be
/// regenerated without producing the ones before it.
pub fn standard_normal_at(seed: u64, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(u128::from(index) * 4);
    box_muller(&mut rng)
}

fn box_muller(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 / (1u64 << 53) as f64;
    let u2 = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Samples `W(t_0..t_J)` with `W(0) = 0` and i.i.d. `N(0, k)` increments.
pub fn sample_wiener_path(steps: usize, k: f64, seed: u64) -> Result<WienerPath> {
    if steps == 0 {
        return Err(Error::config("J", "must be at least 1"));
    }
    if !(k > 0.0) {
        return Err(Error::config("k", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = k.sqrt();
    let mut values = Vec::with_capacity(steps + 1);
    values.push(0.0);
    let mut w = 0.0;
    for _ in 0..steps {
        w += sd * box_muller(&mut rng);
        values.push(w);
    }
    Ok(WienerPath { values, k, seed })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of path `index` in an ensemble. Injective in `index` for a fixed base.
pub fn path_seed(base_seed: u64, index: u64) -> u64 {
    splitmix64(base_seed.wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03)))
}

/// `G u = u x g`.
pub fn apply_g(u: &Vec3, g: &Vec3) -> Vec3 {
    u.cross(g)
}

/// `exp(sG) u = u + sin(s) Gu + (1 - cos s) G^2 u`, evaluated as written.
pub fn apply_exp_sg(u: &Vec3, g: &Vec3, s: f64) -> Vec3 {
    let gu = u.cross(g);
    let ggu = gu.cross(g);
    u + gu * s.sin() + ggu * (1.0 - s.cos())
}

/// Matrix of `u -> exp(sG) u` for fixed `g`.
pub fn exp_sg_matrix(g: &Vec3, s: f64) -> Matrix3<f64> {
    // u x g = -[g]_x u
    let skew = -g.cross_matrix();
    Matrix3::identity() + skew * s.sin() + skew * skew * (1.0 - s.cos())
}

/// Analytic noise direction `g` with its derivatives.
pub trait NoiseDirection: Send + Sync {
    fn value(&self, x: &Point) -> Vec3;
    /// `[d g / d x_0, d g / d x_1, d g / d x_2]`.
    fn gradient(&self, x: &Point) -> [Vec3; 3];
    fn laplacian(&self, x: &Point) -> Vec3;
    fn is_constant(&self) -> bool {
        false
    }
}

/// Spatially constant unit direction.
#[derive(Debug, Clone, Copy)]
pub struct ConstantDirection(pub Vec3);

impl NoiseDirection for ConstantDirection {
    fn value(&self, _: &Point) -> Vec3 {
        self.0
    }
    fn gradient(&self, _: &Point) -> [Vec3; 3] {
        [Vec3::zeros(); 3]
    }
    fn laplacian(&self, _: &Point) -> Vec3 {
        Vec3::zeros()
    }
    fn is_constant(&self) -> bool {
        true
    }
}

/// `g(x) = (cos phi, sin phi, 0)` with `phi = wave . x + phase`; unit everywhere.
#[derive(Debug, Clone, Copy)]
pub struct HelicalDirection {
    pub wave: Vec3,
    pub phase: f64,
}

impl Default for HelicalDirection {
    fn default() -> Self {
        Self {
            wave: Vec3::new(std::f64::consts::PI, 0.5 * std::f64::consts::PI, 0.0),
            phase: 0.3,
        }
    }
}

impl NoiseDirection for HelicalDirection {
    fn value(&self, x: &Point) -> Vec3 {
        let phi = self.wave.dot(x) + self.phase;
        Vec3::new(phi.cos(), phi.sin(), 0.0)
    }
    fn gradient(&self, x: &Point) -> [Vec3; 3] {
        let phi = self.wave.dot(x) + self.phase;
        let d = Vec3::new(-phi.sin(), phi.cos(), 0.0);
        [d * self.wave[0], d * self.wave[1], d * self.wave[2]]
    }
    fn laplacian(&self, x: &Point) -> Vec3 {
        -self.value(x) * self.wave.norm_squared()
    }
}

/// Nodal interpolants of `g`, its gradient, and its Laplacian on the magnet.
#[derive(Debug, Clone)]
pub struct GData {
    pub g: NodalField,
    pub grad: Vec<[Vec3; 3]>,
    pub lap: NodalField,
    pub constant: bool,
}

impl GData {
    pub fn new(mesh: &Mesh, dir: &dyn NoiseDirection) -> Result<Self> {
        let g = interpolate_nodal(mesh, |x| dir.value(x))?;
        if let Some((n, v)) = g
            .values
            .iter()
            .enumerate()
            .find(|(_, v)| (v.norm() - 1.0).abs() > 1e-12)
        {
            return Err(Error::Input(format!(
                "noise direction has |g| = {} at magnet vertex {n}",
                v.norm()
            )));
        }
        let grad = mesh
            .magnet_vertices
            .iter()
            .map(|&v| dir.gradient(&mesh.vertices[v]))
            .collect();
        let lap = interpolate_nodal(mesh, |x| dir.laplacian(x))?;
        Ok(Self {
            g,
            grad,
            lap,
            constant: dir.is_constant(),
        })
    }

    pub fn constant(mesh: &Mesh, g: Vec3) -> Result<Self> {
        Self::new(mesh, &ConstantDirection(g))
    }

    /// `g_h` and its elementwise Jacobian at a point of magnet tet `t`.
    pub fn g_at(&self, mesh: &Mesh, t: usize, bary: &[f64; 4]) -> (Vec3, Matrix3<f64>) {
        (self.g.value_at(mesh, t, bary), self.g.jacobian(mesh, t))
    }

    /// `I(grad g)` at a point: the three partial derivatives.
    pub fn grad_at(&self, mesh: &Mesh, t: usize, bary: &[f64; 4]) -> [Vec3; 3] {
        let loc = mesh.magnet_tet(t);
        let mut out = [Vec3::zeros(); 3];
        for (i, &v) in loc.iter().enumerate() {
            for d in 0..3 {
                out[d] += self.grad[v][d] * bary[i];
            }
        }
        out
    }
}

/// `u x I(lap g) + 2 sum_d (d_d u) x I(d_d g)` from pointwise data.
fn ch_pointwise(u: &Vec3, du: &Matrix3<f64>, lap: &Vec3, grad: &[Vec3; 3]) -> Vec3 {
    let mut out = u.cross(lap);
    for d in 0..3 {
        out += du.column(d).into_owned().cross(&grad[d]) * 2.0;
    }
    out
}

/// `C_h(m)` evaluable at any point of a magnet tet.
pub struct ChField<'a> {
    mesh: &'a Mesh,
    m: &'a NodalField,
    gdata: &'a GData,
}

/// Builds the evaluator for `C_h(m)`.
pub fn compute_ch<'a>(mesh: &'a Mesh, m: &'a NodalField, gdata: &'a GData) -> ChField<'a> {
    ChField { mesh, m, gdata }
}

struct PointData {
    m: Vec3,
    dm: Matrix3<f64>,
    g: Vec3,
    dg: Matrix3<f64>,
    lap: Vec3,
    grad: [Vec3; 3],
}

impl<'a> ChField<'a> {
    fn point_data(&self, t: usize, bary: &[f64; 4]) -> PointData {
        let (g, dg) = self.gdata.g_at(self.mesh, t, bary);
        PointData {
            m: self.m.value_at(self.mesh, t, bary),
            dm: self.m.jacobian(self.mesh, t),
            g,
            dg,
            lap: self.gdata.lap.value_at(self.mesh, t, bary),
            grad: self.gdata.grad_at(self.mesh, t, bary),
        }
    }

    pub fn eval(&self, t: usize, bary: &[f64; 4]) -> Vec3 {
        if self.gdata.constant {
            return Vec3::zeros();
        }
        let p = self.point_data(t, bary);
        ch_pointwise(&p.m, &p.dm, &p.lap, &p.grad)
    }

    /// `C_h(G_h m) = C_h(m x g_h)`, differentiating the product exactly.
    fn eval_of_gm(&self, p: &PointData) -> Vec3 {
        let u = p.m.cross(&p.g);
        let mut du = Matrix3::zeros();
        for d in 0..3 {
            let col =
                p.dm.column(d).into_owned().cross(&p.g) + p.m.cross(&p.dg.column(d).into_owned());
            du.set_column(d, &col);
        }
        ch_pointwise(&u, &du, &p.lap, &p.grad)
    }
}

/// `R_{h,k}(t_j, m)` evaluable at any point of a magnet tet.
pub struct RhkField<'a> {
    ch: ChField<'a>,
    w: f64,
    lambda1: f64,
    lambda2: f64,
}

/// Composes `D_{h,k}`, then `C~_{h,k}`, then `R_{h,k}` at the Wiener value `w`.
pub fn compute_rhk<'a>(
    mesh: &'a Mesh,
    m: &'a NodalField,
    gdata: &'a GData,
    w: f64,
    lambda1: f64,
    lambda2: f64,
) -> RhkField<'a> {
    RhkField {
        ch: compute_ch(mesh, m, gdata),
        w,
        lambda1,
        lambda2,
    }
}

impl<'a> RhkField<'a> {
    pub fn is_identically_zero(&self) -> bool {
        self.ch.gdata.constant || self.w == 0.0
    }

    pub fn eval(&self, t: usize, bary: &[f64; 4]) -> Vec3 {
        if self.is_identically_zero() {
            return Vec3::zeros();
        }
        let p = self.ch.point_data(t, bary);
        let (s, c1) = (self.w.sin(), 1.0 - self.w.cos());
        let cm = ch_pointwise(&p.m, &p.dm, &p.lap, &p.grad);
        let d = cm * s + (cm.cross(&p.g) + self.ch.eval_of_gm(&p)) * c1;
        let dg = d.cross(&p.g);
        let c_tilde = d - dg * s + dg.cross(&p.g) * c1;
        p.m.cross(&p.m.cross(&c_tilde)) * self.lambda2.powi(2) - c_tilde * self.lambda1.powi(2)
    }

    /// `||R_{h,k}||^2` over the magnet.
    pub fn l2_norm_sq(&self, rule: &QuadratureRule) -> f64 {
        let mesh = self.ch.mesh;
        mesh.magnet_tets()
            .map(|t| {
                let vol = mesh.geometry[t].volume;
                rule.iter()
                    .map(|(q, w)| w * vol * self.eval(t, q).norm_squared())
                    .sum::<f64>()
            })
            .sum()
    }
}

/// `M = exp(W G_h) m`, applied at each vertex with `g = g_h(x_n)`.
pub fn reconstruct_m(m: &NodalField, gdata: &GData, w: f64) -> NodalField {
    NodalField::new(
        m.values
            .iter()
            .zip(&gdata.g.values)
            .map(|(u, g)| apply_exp_sg(u, g, w))
            .collect(),
    )
}
