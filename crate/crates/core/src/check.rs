//! Self-check suites run by `mllg check`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::SimConfig;
use crate::error::Result;
use crate::fem::{dirichlet_energy, EdgeField, NodalField, Vec3};
use crate::mesh::{build_cube_mesh, obtuse_variant, verify_offdiagonal_condition, Aabb, Mesh};
use crate::noise::{apply_exp_sg, apply_g, sample_wiener_path, HelicalDirection};
use crate::stepper::{
    build_tangent_frame, llg_step, llg_system, maxwell_rhs, maxwell_step, normalize_update,
    run_path, Discretization, InitialData, RunOptions, SchemeParams,
};

pub const SUITES: [&str; 4] = ["rotation", "mesh", "oracle", "constraint"];

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn report(name: &'static str, checks: &[(&str, f64, f64)]) -> SuiteReport {
    let passed = checks.iter().all(|&(_, v, tol)| v <= tol);
    let detail = checks
        .iter()
        .map(|(what, v, tol)| format!("{what} {v:.2e} (tol {tol:.0e})"))
        .collect::<Vec<_>>()
        .join("; ");
    SuiteReport {
        name,
        passed,
        detail,
    }
}

pub fn random_vec(rng: &mut impl Rng) -> Vec3 {
    Vec3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    )
}

pub fn random_unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = random_vec(rng);
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn random_unit_field(mesh: &Mesh, rng: &mut impl Rng) -> NodalField {
    NodalField::new(
        (0..mesh.num_magnet_vertices())
            .map(|_| random_unit(rng))
            .collect(),
    )
}

/// Random nodal field orthogonal to `m` at every vertex.
pub fn random_tangent_field(m: &NodalField, rng: &mut impl Rng) -> NodalField {
    NodalField::new(
        m.values
            .iter()
            .map(|mi| {
                let v = random_vec(rng);
                v - mi * mi.dot(&v)
            })
            .collect(),
    )
}

/// `exp(sG)` identities against the matrix exponential of the generator.
pub fn rotation_suite(samples: usize, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut err = [0.0f64; 4];
    for _ in 0..samples {
        let (u, v, g) = (
            random_vec(&mut rng),
            random_vec(&mut rng),
            random_unit(&mut rng),
        );
        let s: f64 = rng.random_range(-10.0..10.0);
        let e = |x: &Vec3, s: f64| apply_exp_sg(x, &g, s);
        let expm = (-g.cross_matrix() * s).exp();
        err[0] = err[0].max((e(&u, s) - expm * u).norm());
        err[1] = err[1].max((e(&u, s).dot(&v) - u.dot(&e(&v, -s))).abs());
        err[2] = err[2].max((e(&apply_g(&u, &g), s) - apply_g(&e(&u, s), &g)).norm());
        err[3] = err[3].max((e(&u.cross(&v), s) - e(&u, s).cross(&e(&v, s))).norm());
    }
    report(
        "rotation",
        &[
            ("expansion", err[0], 1e-12),
            ("adjoint", err[1], 1e-12),
            ("commutes with G", err[2], 1e-12),
            ("cross product", err[3], 1e-12),
        ],
    )
}

/// Kuhn meshes `n = 1..=7` and the configured mesh satisfy the stiffness sign condition.
pub fn mesh_suite(cfg: &SimConfig) -> Result<SuiteReport> {
    let mut worst: f64 = f64::NEG_INFINITY;
    for n in 1..=7 {
        let m = build_cube_mesh(n, Aabb::unit_cube(), None)?;
        worst = worst.max(verify_offdiagonal_condition(&m).worst_entry);
    }
    let mut configured = build_cube_mesh(cfg.n, Aabb::unit_cube(), None)?;
    if cfg.obtuse_mesh {
        configured = obtuse_variant(&configured)?;
    }
    let own = verify_offdiagonal_condition(&configured).worst_entry;
    Ok(report(
        "mesh",
        &[
            ("Kuhn n<=7 max off-diagonal", worst, 1e-12),
            ("configured mesh max off-diagonal", own, 1e-12),
        ],
    ))
}

/// Sparse solves against dense LU on the `n = 1` mesh, plus SPD-ness of the Maxwell matrix.
pub fn oracle_suite(cfg: &SimConfig, states: usize, seed: u64) -> Result<SuiteReport> {
    let mesh = build_cube_mesh(1, Aabb::unit_cube(), None)?;
    let params = SchemeParams {
        k: 0.1,
        ..SchemeParams::from_config(cfg)
    };
    let disc = Discretization::new(mesh, &HelicalDirection::default(), params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut llg_err, mut max_err) = (0.0f64, 0.0f64);
    for _ in 0..states {
        let m = random_unit_field(&disc.mesh, &mut rng);
        let p = EdgeField::new(
            (0..disc.mesh.num_edges())
                .map(|_| rng.random_range(-5.0..5.0))
                .collect(),
        );
        let w: f64 = rng.random_range(-2.0..2.0);
        let frame = build_tangent_frame(&m)?;

        let v = llg_step(&disc, &m, &p, w, &frame)?;
        let (a, b) = llg_system(&disc, &m, &p, w, &frame);
        let x = a
            .to_dense()
            .lu()
            .solve(&DVector::from_vec(b))
            .expect("singular LLG matrix");
        let v_dense = frame.expand(x.as_slice());
        llg_err = llg_err.max(relative_diff(&v.flatten(), &v_dense.flatten()));

        let p_next = maxwell_step(&disc, &p, &m, w)?;
        let rhs = DVector::from_vec(maxwell_rhs(&disc, &p, &m, w));
        let y = disc
            .maxwell_matrix
            .to_dense()
            .lu()
            .solve(&rhs)
            .expect("singular Maxwell matrix");
        max_err = max_err.max(relative_diff(&p_next.coeffs, y.as_slice()));
    }
    let dense: DMatrix<f64> = disc.maxwell_matrix.to_dense();
    let asym = (&dense - dense.transpose()).amax() / dense.amax();
    let min_eig = dense.symmetric_eigenvalues().min();
    Ok(report(
        "oracle",
        &[
            ("LLG vs dense", llg_err, 1e-10),
            ("Maxwell vs dense", max_err, 1e-10),
            ("Maxwell asymmetry", asym, 1e-12),
            ("-min eigenvalue", -min_eig, 0.0),
        ],
    ))
}

fn relative_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

/// Unit length and tangency over a short vortex run, and the renormalization
/// energy inequality on random `(m, v, k)`.
pub fn constraint_suite(cfg: &SimConfig, seed: u64) -> Result<SuiteReport> {
    let short = SimConfig {
        n: cfg.n.min(3),
        steps: cfg.steps.min(5),
        t_final: cfg.t_final * cfg.steps.min(5) as f64 / cfg.steps as f64,
        ..cfg.clone()
    };
    let disc = Discretization::from_config(&short)?;
    let init = InitialData::vortex(&disc, short.h_s)?;
    let path = sample_wiener_path(short.steps, short.k(), seed)?;
    let opts = RunOptions {
        energy_guard: short.energy_guard,
        check_normalization_energy: false,
    };
    let res = run_path(&disc, &init, &path, &opts)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ine: f64 = f64::NEG_INFINITY;
    for _ in 0..100 {
        let m = random_unit_field(&disc.mesh, &mut rng);
        let v = random_tangent_field(&m, &mut rng);
        let k: f64 = rng.random_range(0.01..2.0);
        let next = normalize_update(&m, &v, k)?;
        let raw = NodalField::new(
            m.values
                .iter()
                .zip(&v.values)
                .map(|(a, b)| a + b * k)
                .collect(),
        );
        ine = ine.max(dirichlet_energy(&disc.p1, &next) - dirichlet_energy(&disc.p1, &raw));
    }
    let ine_tol = if disc.mesh_condition {
        1e-10
    } else {
        f64::INFINITY
    };
    Ok(report(
        "constraint",
        &[
            ("max ||m|-1|", res.max_unit_deviation, 1e-12),
            ("max |v.m|", res.max_tangency, 1e-10),
            ("renormalization energy increase", ine, ine_tol),
        ],
    ))
}

/// Runs `only` (or every suite) and returns one report per suite.
pub fn run_checks(cfg: &SimConfig, only: Option<&str>) -> Result<Vec<SuiteReport>> {
    let wanted = |s: &str| only.is_none_or(|o| o == s);
    let mut out = Vec::new();
    if wanted("rotation") {
        out.push(rotation_suite(1000, cfg.base_seed));
    }
    if wanted("mesh") {
        out.push(mesh_suite(cfg)?);
    }
    if wanted("oracle") {
        out.push(oracle_suite(cfg, 20, cfg.base_seed)?);
    }
    if wanted("constraint") {
        out.push(constraint_suite(cfg, cfg.base_seed)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass_on_defaults() {
        let cfg = SimConfig::default();
        for r in run_checks(&cfg, None).unwrap() {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }

    #[test]
    fn obtuse_mesh_fails_mesh_suite() {
        let cfg = SimConfig {
            obtuse_mesh: true,
            ..SimConfig::default()
        };
        let r = run_checks(&cfg, Some("mesh")).unwrap();
        assert_eq!(r.len(), 1);
        assert!(!r[0].passed);
    }
}
