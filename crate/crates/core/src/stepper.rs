//! One step of the linear tangent-plane scheme and the per-path run loop.
//!
//! Each step solves for a nodally tangent update `v` of the magnetization
//! (a `2N x 2N` system in per-vertex tangent frames), advances the Nédélec
//! field by an implicit eddy-current step (`M x M`, SPD), and renormalizes
//! `m + k v` at the vertices.

use nalgebra::Matrix3;

use crate::config::{GMode, SimConfig};
use crate::error::{Error, Result};
use crate::fem::{
    assemble_nedelec_matrices, assemble_p1_matrices, dirichlet_energy, interpolate_edge,
    interpolate_nodal, l2_norm_sq, whitney_curl, EdgeField, NedelecMatrices, NodalField,
    P1Matrices, RegionCoefficient, Vec3,
};
use crate::mesh::{
    build_cube_mesh, obtuse_variant, verify_offdiagonal_condition, Aabb, Mesh, Point,
};
use crate::noise::{
    apply_exp_sg, compute_rhk, ConstantDirection, GData, HelicalDirection, NoiseDirection,
    WienerPath,
};
use crate::quadrature::QuadratureRule;
use crate::sparse::{
    bicgstab, conjugate_gradient, relative_residual, BandedLu, CsrMatrix, SolveStats,
    TripletBuilder,
};

/// Above this many flops the LLG system is solved iteratively instead of by banded LU.
const DIRECT_SOLVE_BUDGET: f64 = 2e10;

/// Scheme coefficients shared by every step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu0: f64,
    pub sigma: f64,
    pub sigma_d: f64,
    pub theta: f64,
    pub k: f64,
    pub solver_tol: f64,
}

impl SchemeParams {
    pub fn from_config(cfg: &SimConfig) -> Self {
        Self {
            lambda1: cfg.lambda1,
            lambda2: cfg.lambda2,
            mu0: cfg.mu0,
            sigma: cfg.sigma,
            sigma_d: cfg.sigma_d,
            theta: cfg.theta,
            k: cfg.k(),
            solver_tol: cfg.solver_tol,
        }
    }

    pub fn mu(&self) -> f64 {
        self.lambda1 * self.lambda1 + self.lambda2 * self.lambda2
    }
}

/// Mesh, assembled matrices and noise data; immutable and shared by all paths.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Mesh,
    pub p1: P1Matrices,
    pub ned: NedelecMatrices,
    /// `(mu0 / k) M + C_sigma`.
    pub maxwell_matrix: CsrMatrix,
    pub gdata: GData,
    pub rule: QuadratureRule,
    pub params: SchemeParams,
    /// Whether the stiffness sign condition holds on the magnet.
    pub mesh_condition: bool,
}

impl Discretization {
    pub fn new(mesh: Mesh, gdir: &dyn NoiseDirection, params: SchemeParams) -> Result<Self> {
        let p1 = assemble_p1_matrices(&mesh);
        let ned = assemble_nedelec_matrices(
            &mesh,
            RegionCoefficient {
                magnet: params.sigma_d,
                cavity: params.sigma,
            },
        )?;
        let maxwell_matrix = ned
            .mass
            .linear_combination(params.mu0 / params.k, &ned.curlcurl, 1.0);
        let gdata = GData::new(&mesh, gdir)?;
        let mesh_condition = verify_offdiagonal_condition(&mesh).pass;
        Ok(Self {
            mesh,
            p1,
            ned,
            maxwell_matrix,
            gdata,
            rule: QuadratureRule::volume_default(),
            params,
            mesh_condition,
        })
    }

    /// Unit-cube discretization described by `cfg` (with `n` and `J` from the config).
    pub fn from_config(cfg: &SimConfig) -> Result<Self> {
        cfg.check_stability(cfg.n, cfg.k())?;
        let mut mesh = build_cube_mesh(cfg.n, Aabb::unit_cube(), None)?;
        if cfg.obtuse_mesh {
            mesh = obtuse_variant(&mesh)?;
        }
        let params = SchemeParams::from_config(cfg);
        match cfg.g_mode {
            GMode::Constant => {
                Self::new(mesh, &ConstantDirection(Vec3::new(0.0, 0.0, 1.0)), params)
            }
            GMode::Analytic => Self::new(mesh, &HelicalDirection::default(), params),
        }
    }
}

/// Vortex profile: `(2 x* A, A^2 - |x*|^2) / (A^2 + |x*|^2)` inside the
/// cylinder `|x*| < 1/2` around the vertical axis through the cube centre,
/// `(0, 0, -1)` outside, with `A = (1 - 2|x*|)^4 / 4`.
pub fn vortex_m0(x: &Point) -> Vec3 {
    let xs = Vec3::new(x[0] - 0.5, x[1] - 0.5, 0.0);
    let r = xs.norm();
    if r >= 0.5 {
        return Vec3::new(0.0, 0.0, -1.0);
    }
    let a = (1.0 - 2.0 * r).powi(4) / 4.0;
    let denom = a * a + r * r;
    Vec3::new(
        2.0 * xs[0] * a / denom,
        2.0 * xs[1] * a / denom,
        (a * a - r * r) / denom,
    )
}

/// Initial discrete state `(m_h^0, P_h^0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub m: NodalField,
    pub p: EdgeField,
}

impl InitialData {
    /// Vortex magnetization with `P_0 = H_0 + M~_0`, `H_0 = H_0* - chi_D M_0`,
    /// and uniform applied field `H_0* = (0, 0, h_s)`.
    pub fn vortex(disc: &Discretization, h_s: f64) -> Result<Self> {
        let mesh = &disc.mesh;
        let m = interpolate_nodal(mesh, vortex_m0)?;
        let h_star = Vec3::new(0.0, 0.0, h_s);
        let p = interpolate_edge(mesh, |x| {
            let chi = if point_in_magnet(mesh, x) { 1.0 } else { 0.0 };
            let m0 = vortex_m0(x) * chi;
            (h_star - m0) + m0
        });
        Ok(Self { m, p })
    }

    pub fn uniform(disc: &Discretization, m: Vec3, p: Vec3) -> Result<Self> {
        let m = m / m.norm();
        Ok(Self {
            m: NodalField::constant(&disc.mesh, m),
            p: interpolate_edge(&disc.mesh, |_| p),
        })
    }
}

fn point_in_magnet(mesh: &Mesh, x: &Point) -> bool {
    if mesh.num_magnet_vertices() == mesh.num_vertices()
        && mesh.magnet_tets().count() == mesh.num_tets()
    {
        return true;
    }
    mesh.magnet_tets().any(|t| {
        let p = mesh.tet_points(t);
        let g = &mesh.geometry[t];
        // lambda_i vanishes at every other vertex
        (0..4).all(|i| g.grad_bary[i].dot(&(x - p[(i + 1) % 4])) >= -1e-12)
    })
}

/// Per-vertex orthonormal basis of the plane orthogonal to `m(x_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentFrame {
    pub t1: Vec<Vec3>,
    pub t2: Vec<Vec3>,
}

/// For each vertex: `t1` is the axis least aligned with `m` projected onto the
/// tangent plane and normalized, `t2 = m x t1`.
pub fn build_tangent_frame(m: &NodalField) -> Result<TangentFrame> {
    let mut t1 = Vec::with_capacity(m.len());
    let mut t2 = Vec::with_capacity(m.len());
    for (n, v) in m.values.iter().enumerate() {
        let len = v.norm();
        if !(len >= 0.5) {
            return Err(Error::Invariant(format!(
                "|m| = {len} at vertex {n}; cannot build tangent frame"
            )));
        }
        let mh = v / len;
        let mut axis = 0;
        for a in 1..3 {
            if mh[a].abs() < mh[axis].abs() {
                axis = a;
            }
        }
        let e = Vec3::ith(axis, 1.0);
        let p = e - mh * mh[axis];
        let a = p / p.norm();
        t2.push(mh.cross(&a));
        t1.push(a);
    }
    Ok(TangentFrame { t1, t2 })
}

impl TangentFrame {
    pub fn dir(&self, n: usize, a: usize) -> &Vec3 {
        if a == 0 {
            &self.t1[n]
        } else {
            &self.t2[n]
        }
    }

    /// `sum_n (alpha_n t1_n + beta_n t2_n)` from interleaved coefficients.
    pub fn expand(&self, coeffs: &[f64]) -> NodalField {
        NodalField::new(
            (0..self.t1.len())
                .map(|n| self.t1[n] * coeffs[2 * n] + self.t2[n] * coeffs[2 * n + 1])
                .collect(),
        )
    }
}

/// Iterate of the scheme at step `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepState {
    pub j: usize,
    pub m: NodalField,
    pub p: EdgeField,
}

/// The reduced tangent-plane system in interleaved `(alpha_n, beta_n)` unknowns.
pub fn llg_system(
    disc: &Discretization,
    m: &NodalField,
    p: &EdgeField,
    w: f64,
    frame: &TangentFrame,
) -> (CsrMatrix, Vec<f64>) {
    let mesh = &disc.mesh;
    let sp = &disc.params;
    let mu = sp.mu();
    let n = mesh.num_magnet_vertices();
    let mut a = TripletBuilder::new(2 * n, 2 * n);
    let mut rhs = vec![0.0; 2 * n];
    let rhk = compute_rhk(mesh, m, &disc.gdata, w, sp.lambda1, sp.lambda2);
    let rhk_zero = rhk.is_identically_zero();

    for t in mesh.magnet_tets() {
        let geo = &mesh.geometry[t];
        let loc = mesh.magnet_tet(t);
        let mut local = [[0.0; 8]; 8];
        for i in 0..4 {
            for j in 0..4 {
                let kij = geo.volume * geo.grad_bary[i].dot(&geo.grad_bary[j]);
                for al in 0..2 {
                    let ta = frame.dir(loc[i], al);
                    rhs[2 * loc[i] + al] -= mu * kij * m.values[loc[j]].dot(ta);
                    for be in 0..2 {
                        local[2 * i + al][2 * j + be] +=
                            mu * sp.k * sp.theta * kij * ta.dot(frame.dir(loc[j], be));
                    }
                }
            }
        }
        for (q, wq) in disc.rule.iter() {
            let wv = wq * geo.volume;
            let mh = m.value_at(mesh, t, q);
            let gh = disc.gdata.g.value_at(mesh, t, q);
            let mut src = apply_exp_sg(&p.value_at(mesh, t, q), &gh, -w) * mu;
            if !rhk_zero {
                src -= rhk.eval(t, q);
            }
            for i in 0..4 {
                for al in 0..2 {
                    let ta = frame.dir(loc[i], al);
                    rhs[2 * loc[i] + al] += wv * q[i] * src.dot(ta);
                    for j in 0..4 {
                        let phiphi = wv * q[i] * q[j];
                        for be in 0..2 {
                            let tb = frame.dir(loc[j], be);
                            local[2 * i + al][2 * j + be] += phiphi
                                * (sp.lambda2 * ta.dot(tb) - sp.lambda1 * mh.cross(tb).dot(ta));
                        }
                    }
                }
            }
        }
        for i in 0..4 {
            for al in 0..2 {
                for j in 0..4 {
                    for be in 0..2 {
                        a.push(
                            2 * loc[i] + al,
                            2 * loc[j] + be,
                            local[2 * i + al][2 * j + be],
                        );
                    }
                }
            }
        }
    }
    (a.build(), rhs)
}

fn solve_nonsymmetric(a: &CsrMatrix, b: &[f64], tol: f64) -> Result<(Vec<f64>, SolveStats)> {
    let max_iter = 20 * b.len() + 100;
    if BandedLu::cost_estimate(a) <= DIRECT_SOLVE_BUDGET {
        let lu = BandedLu::factor(a)?;
        let mut x = lu.solve(b);
        let mut res = relative_residual(a, &x, b);
        let mut refinements = 0;
        while res > tol && refinements < 3 {
            let ax = a.mul_vec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
            let dx = lu.solve(&r);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
            res = relative_residual(a, &x, b);
            refinements += 1;
        }
        if res <= tol {
            return Ok((
                x,
                SolveStats {
                    iterations: refinements,
                    relative_residual: res,
                },
            ));
        }
        return bicgstab(a, b, &x, tol, max_iter);
    }
    bicgstab(a, b, &vec![0.0; b.len()], tol, max_iter)
}

/// Solves the tangent-plane system for `v` (nodally orthogonal to `m`).
pub fn llg_step(
    disc: &Discretization,
    m: &NodalField,
    p: &EdgeField,
    w: f64,
    frame: &TangentFrame,
) -> Result<NodalField> {
    let (a, b) = llg_system(disc, m, p, w, frame);
    let (x, _) = solve_nonsymmetric(&a, &b, disc.params.solver_tol)?;
    if x.iter().any(|c| !c.is_finite()) {
        return Err(Error::Invariant("non-finite tangent update".into()));
    }
    Ok(frame.expand(&x))
}

/// `(m + k v) / |m + k v|` at every vertex.
pub fn normalize_update(m: &NodalField, v: &NodalField, k: f64) -> Result<NodalField> {
    let values = m
        .values
        .iter()
        .zip(&v.values)
        .enumerate()
        .map(|(n, (mi, vi))| {
            let u = mi + vi * k;
            let len = u.norm();
            if !(len >= 1.0 - 1e-10) {
                return Err(Error::Invariant(format!(
                    "|m + k v| = {len} < 1 at vertex {n}: update is not tangent"
                )));
            }
            Ok(u / len)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NodalField::new(values))
}

/// Jacobian (columns are partial derivatives) of `exp(s G_h) m` on a magnet tet.
fn rotated_jacobian(
    m: &Vec3,
    dm: &Matrix3<f64>,
    g: &Vec3,
    dg: &Matrix3<f64>,
    w: f64,
) -> Matrix3<f64> {
    let (s, c1) = (w.sin(), 1.0 - w.cos());
    let q = m.cross(g);
    let mut out = Matrix3::zeros();
    for d in 0..3 {
        let dm_d: Vec3 = dm.column(d).into_owned();
        let dg_d: Vec3 = dg.column(d).into_owned();
        let dq = dm_d.cross(g) + m.cross(&dg_d);
        let dr = dq.cross(g) + q.cross(&dg_d);
        out.set_column(d, &(dm_d + dq * s + dr * c1));
    }
    out
}

fn curl_from_jacobian(j: &Matrix3<f64>) -> Vec3 {
    Vec3::new(
        j[(2, 1)] - j[(1, 2)],
        j[(0, 2)] - j[(2, 0)],
        j[(1, 0)] - j[(0, 1)],
    )
}

/// Source `sigma_D (curl exp(W G_h) m, curl zeta)_D` for every edge basis function.
pub fn maxwell_source(disc: &Discretization, m: &NodalField, w: f64) -> Vec<f64> {
    let mesh = &disc.mesh;
    let mut out = vec![0.0; mesh.num_edges()];
    for t in mesh.magnet_tets() {
        let geo = &mesh.geometry[t];
        let dm = m.jacobian(mesh, t);
        let dg = disc.gdata.g.jacobian(mesh, t);
        let mut integral = Vec3::zeros();
        for (q, wq) in disc.rule.iter() {
            let mq = m.value_at(mesh, t, q);
            let gq = disc.gdata.g.value_at(mesh, t, q);
            integral +=
                curl_from_jacobian(&rotated_jacobian(&mq, &dm, &gq, &dg, w)) * (wq * geo.volume);
        }
        for (l, &(e, s)) in mesh.tet_to_edges[t].iter().enumerate() {
            out[e] += disc.params.sigma_d * s * whitney_curl(geo, l).dot(&integral);
        }
    }
    out
}

/// Right-hand side of the implicit eddy-current step.
pub fn maxwell_rhs(disc: &Discretization, p: &EdgeField, m: &NodalField, w: f64) -> Vec<f64> {
    let scale = disc.params.mu0 / disc.params.k;
    let mp = disc.ned.mass.mul_vec(&p.coeffs);
    maxwell_source(disc, m, w)
        .iter()
        .zip(&mp)
        .map(|(s, x)| s + scale * x)
        .collect()
}

/// Advances `P` one step; `m` and `w` are taken at the left time point.
pub fn maxwell_step(
    disc: &Discretization,
    p: &EdgeField,
    m: &NodalField,
    w: f64,
) -> Result<EdgeField> {
    let rhs = maxwell_rhs(disc, p, m, w);
    let max_iter = 10 * rhs.len() + 200;
    let (x, _) = conjugate_gradient(
        &disc.maxwell_matrix,
        &rhs,
        &p.coeffs,
        disc.params.solver_tol,
        max_iter,
    )?;
    Ok(EdgeField::new(x))
}

/// Squared energies at one time point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRecord {
    pub t: f64,
    /// `||grad m||^2` on the magnet.
    pub exchange_sq: f64,
    /// `||P||^2` on the cavity.
    pub field_sq: f64,
    /// `||curl P||^2` on the cavity.
    pub curl_sq: f64,
}

impl EnergyRecord {
    pub fn total(&self) -> f64 {
        self.exchange_sq + self.field_sq
    }
}

pub type EnergyTrace = Vec<EnergyRecord>;

pub fn compute_energies(disc: &Discretization, m: &NodalField, p: &EdgeField) -> EnergyRecord {
    let mesh = &disc.mesh;
    let curl_sq = (0..mesh.num_tets())
        .map(|t| mesh.geometry[t].volume * p.curl(mesh, t).norm_squared())
        .sum();
    EnergyRecord {
        t: 0.0,
        exchange_sq: dirichlet_energy(&disc.p1, m),
        field_sq: disc.ned.mass.quadratic_form(&p.coeffs),
        curl_sq,
    }
}

/// `int_D (1 - |m|)^2` by volume quadrature.
pub fn sphere_defect_sq(disc: &Discretization, m: &NodalField) -> f64 {
    let mesh = &disc.mesh;
    mesh.magnet_tets()
        .map(|t| {
            let vol = mesh.geometry[t].volume;
            disc.rule
                .iter()
                .map(|(q, w)| w * vol * (1.0 - m.value_at(mesh, t, q).norm()).powi(2))
                .sum::<f64>()
        })
        .sum()
}

/// Optional per-step checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Assert that renormalization never increases the Dirichlet energy.
    pub check_normalization_energy: bool,
    /// Abort once the total energy exceeds this multiple of its initial value.
    pub energy_guard: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            check_normalization_energy: cfg!(debug_assertions),
            energy_guard: 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub seed: u64,
    pub trace: EnergyTrace,
    /// `int_0^T int_D (1 - |m^-_{h,k}|)^2`.
    pub sphere_error_sq: f64,
    pub final_state: StepState,
    /// Largest `||m(x_n)| - 1|` over all vertices and steps.
    pub max_unit_deviation: f64,
    /// Largest `|v(x_n) . m(x_n)|` over all vertices and steps.
    pub max_tangency: f64,
    /// Running a priori energy functional (exchange, dissipation, field and curl terms).
    pub apriori: Vec<f64>,
}

impl PathResult {
    pub fn max_total_energy_ratio(&self) -> f64 {
        let e0 = self.trace[0].total();
        self.trace.iter().map(|r| r.total()).fold(0.0, f64::max) / e0
    }
}

/// Runs every step of one Wiener path from `init`.
pub fn run_path(
    disc: &Discretization,
    init: &InitialData,
    path: &WienerPath,
    opts: &RunOptions,
) -> Result<PathResult> {
    let sp = disc.params;
    let k = sp.k;
    if (path.k - k).abs() > 1e-12 * k {
        return Err(Error::Input(format!(
            "path step {} differs from scheme step {k}",
            path.k
        )));
    }
    let steps = path.steps();
    let mut m = init.m.clone();
    let mut p = init.p.clone();
    let mut trace = Vec::with_capacity(steps + 1);
    let mut sphere_error_sq = 0.0;
    let mut max_unit_deviation = m.max_norm_deviation_from_unit();
    let mut max_tangency: f64 = 0.0;

    let record = |j: usize, m: &NodalField, p: &EdgeField| {
        let mut r = compute_energies(disc, m, p);
        r.t = j as f64 * k;
        r
    };
    trace.push(record(0, &m, &p));
    let e0 = trace[0].total().max(f64::MIN_POSITIVE);
    let mut dissipation = 0.0;
    let mut apriori = vec![trace[0].total()];

    for j in 0..steps {
        let step = |m: &NodalField, p: &EdgeField| -> Result<(NodalField, NodalField, EdgeField)> {
            let w = path.at_step(j);
            let frame = build_tangent_frame(m)?;
            let v = llg_step(disc, m, p, w, &frame)?;
            let p_next = maxwell_step(disc, p, m, w)?;
            if !p_next.is_finite() {
                return Err(Error::Invariant("non-finite field iterate".into()));
            }
            let m_next = normalize_update(m, &v, k)?;
            Ok((v, m_next, p_next))
        };
        sphere_error_sq += k * sphere_defect_sq(disc, &m);
        let (v, m_next, p_next) = step(&m, &p).map_err(|e| e.at_step(j))?;

        for (mi, vi) in m.values.iter().zip(&v.values) {
            max_tangency = max_tangency.max(mi.dot(vi).abs());
        }
        if max_tangency > 1e-10 {
            return Err(
                Error::Invariant(format!("v . m = {max_tangency:e} exceeds 1e-10")).at_step(j),
            );
        }
        if opts.check_normalization_energy && disc.mesh_condition {
            let unnormalized = NodalField::new(
                m.values
                    .iter()
                    .zip(&v.values)
                    .map(|(a, b)| a + b * k)
                    .collect(),
            );
            let before = dirichlet_energy(&disc.p1, &unnormalized);
            let after = dirichlet_energy(&disc.p1, &m_next);
            if after > before + 1e-10 * before.max(1.0) {
                return Err(Error::Invariant(format!(
                    "renormalization raised the Dirichlet energy from {before} to {after}"
                ))
                .at_step(j));
            }
        }

        let dp: Vec<f64> = p_next
            .coeffs
            .iter()
            .zip(&p.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        let prev_curl = trace[j].curl_sq;
        dissipation += k * l2_norm_sq(&disc.p1, &v)
            + k * k * (2.0 * sp.theta - 1.0) * dirichlet_energy(&disc.p1, &v)
            + disc.ned.mass.quadratic_form(&dp)
            + k * prev_curl;

        m = m_next;
        p = p_next;
        max_unit_deviation = max_unit_deviation.max(m.max_norm_deviation_from_unit());
        let rec = record(j + 1, &m, &p);
        apriori.push(rec.total() + dissipation);
        if !rec.total().is_finite() || rec.total() > opts.energy_guard * e0 {
            return Err(Error::Invariant(format!(
                "energy blow-up: total {} exceeds {} x initial {}",
                rec.total(),
                opts.energy_guard,
                e0
            ))
            .at_step(j));
        }
        trace.push(rec);
    }
    if max_unit_deviation > 1e-12 {
        return Err(Error::Invariant(format!(
            "nodal |m| deviates from 1 by {max_unit_deviation:e}"
        )));
    }

    Ok(PathResult {
        seed: path.seed,
        trace,
        sphere_error_sq,
        final_state: StepState { j: steps, m, p },
        max_unit_deviation,
        max_tangency,
        apriori,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::sample_wiener_path;

    fn params(k: f64) -> SchemeParams {
        SchemeParams {
            lambda1: 1.0,
            lambda2: 1.0,
            mu0: 1.0,
            sigma: 1.0,
            sigma_d: 1.0,
            theta: 0.7,
            k,
            solver_tol: 1e-12,
        }
    }

    fn disc(n: usize, k: f64) -> Discretization {
        let mesh = build_cube_mesh(n, Aabb::unit_cube(), None).unwrap();
        Discretization::new(
            mesh,
            &ConstantDirection(Vec3::new(0.0, 0.0, 1.0)),
            params(k),
        )
        .unwrap()
    }

    #[test]
    fn frame_examples() {
        let f = build_tangent_frame(&NodalField::new(vec![
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(1.0, 0.0, 0.0),
        ]))
        .unwrap();
        assert_eq!(f.t1[0], Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(f.t2[0], Vec3::new(0.0, 1.0, 0.0));
        assert_eq!(f.t1[1], Vec3::new(0.0, 1.0, 0.0));
        assert_eq!(f.t2[1], Vec3::new(0.0, 0.0, 1.0));
        assert!(build_tangent_frame(&NodalField::new(vec![Vec3::new(0.1, 0.0, 0.0)])).is_err());
    }

    #[test]
    fn normalize_examples() {
        let m = NodalField::new(vec![Vec3::new(0.0, 0.0, 1.0)]);
        let v = NodalField::new(vec![Vec3::new(1.0, 0.0, 0.0)]);
        assert_eq!(
            normalize_update(&m, &NodalField::new(vec![Vec3::zeros()]), 0.5).unwrap(),
            m
        );
        let out = normalize_update(&m, &v, 1.0).unwrap();
        let expected = Vec3::new(1.0, 0.0, 1.0) / 2f64.sqrt();
        assert!((out.values[0] - expected).norm() < 1e-15);
        let bad = NodalField::new(vec![Vec3::new(0.0, 0.0, -1.0)]);
        assert!(matches!(
            normalize_update(&m, &bad, 0.5),
            Err(Error::Invariant(_))
        ));
    }

    #[test]
    fn vortex_profile_values() {
        assert_eq!(
            vortex_m0(&Point::new(0.5, 0.5, 0.3)),
            Vec3::new(0.0, 0.0, 1.0)
        );
        assert_eq!(
            vortex_m0(&Point::new(0.0, 0.0, 0.0)),
            Vec3::new(0.0, 0.0, -1.0)
        );
        let v = vortex_m0(&Point::new(0.6, 0.45, 0.0));
        assert!((v.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn constant_state_has_zero_update() {
        let d = disc(2, 0.1);
        let m = NodalField::constant(&d.mesh, Vec3::new(0.0, 0.6, 0.8));
        let p = EdgeField::zeros(&d.mesh);
        let frame = build_tangent_frame(&m).unwrap();
        let v = llg_step(&d, &m, &p, 0.3, &frame).unwrap();
        assert!(v.values.iter().all(|x| x.norm() < 1e-14));
    }

    #[test]
    fn constant_field_is_a_maxwell_fixed_point() {
        let d = disc(2, 0.1);
        let m = NodalField::constant(&d.mesh, Vec3::new(0.0, 0.0, 1.0));
        let p = interpolate_edge(&d.mesh, |_| Vec3::new(0.2, -0.1, 30.0));
        let next = maxwell_step(&d, &p, &m, 0.8).unwrap();
        let scale = p.coeffs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        for (a, b) in next.coeffs.iter().zip(&p.coeffs) {
            assert!((a - b).abs() < 1e-10 * scale);
        }
    }

    #[test]
    fn energies_of_simple_fields() {
        let d = disc(2, 0.1);
        let m = NodalField::constant(&d.mesh, Vec3::new(0.0, 0.0, 1.0));
        let p = interpolate_edge(&d.mesh, |_| Vec3::new(0.0, 0.0, 30.0));
        let e = compute_energies(&d, &m, &p);
        assert!(e.exchange_sq.abs() < 1e-14);
        assert!((e.field_sq - 900.0).abs() < 1e-10);
        assert!(e.curl_sq < 1e-20);
    }

    #[test]
    fn trivial_path_is_stationary() {
        let d = disc(2, 1.0);
        let init = InitialData::uniform(&d, Vec3::new(0.0, 0.0, 1.0), Vec3::zeros()).unwrap();
        let path = sample_wiener_path(1, 1.0, 3).unwrap();
        let res = run_path(&d, &init, &path, &RunOptions::default()).unwrap();
        assert_eq!(res.trace.len(), 2);
        assert_eq!(res.trace[0].total(), res.trace[1].total());
        assert_eq!(res.sphere_error_sq, 0.0);
    }

    #[test]
    fn mismatched_path_step_is_rejected() {
        let d = disc(1, 0.5);
        let init = InitialData::uniform(&d, Vec3::new(0.0, 0.0, 1.0), Vec3::zeros()).unwrap();
        let path = sample_wiener_path(2, 0.25, 3).unwrap();
        assert!(matches!(
            run_path(&d, &init, &path, &RunOptions::default()),
            Err(Error::Input(_))
        ));
    }
}
