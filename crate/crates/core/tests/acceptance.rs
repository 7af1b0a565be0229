//! End-to-end acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line.

#![allow(clippy::needless_range_loop)]

use std::time::Instant;

use nalgebra::{DMatrix, DVector, Rotation3, Unit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use mllg_core::check::{random_tangent_field, random_unit, random_unit_field, random_vec};
use mllg_core::ensemble::{run_ensemble, EnsembleResult};
use mllg_core::fem::{EdgeField, NodalField, Vec3};
use mllg_core::mesh::{
    build_cube_mesh, obtuse_variant, verify_offdiagonal_condition, Aabb, Mesh, LOCAL_EDGES,
};
use mllg_core::noise::{apply_exp_sg, apply_g, sample_wiener_path, ConstantDirection};
use mllg_core::output::{energy_csv, paths_csv};
use mllg_core::stepper::{
    build_tangent_frame, llg_step, maxwell_step, normalize_update, run_path, Discretization,
    InitialData, RunOptions, SchemeParams,
};
use mllg_core::{Error, SimConfig};

fn verdict(n: usize, pass: bool, detail: String) {
    println!(
        "criterion {n}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {n} failed: {detail}");
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `int_K prod lambda_i^{e_i}` over a tetrahedron of volume `vol`.
fn simplex_integral(vol: f64, e: [u32; 4]) -> f64 {
    vol * 6.0 * e.iter().map(|&a| factorial(a)).product::<f64>()
        / factorial(e.iter().sum::<u32>() + 3)
}

fn bary_monomial(idx: &[usize]) -> [u32; 4] {
    let mut e = [0; 4];
    for &i in idx {
        e[i] += 1;
    }
    e
}

#[test]
fn criterion_01_rotation_identities() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (u, v, g) = (
            random_vec(&mut rng),
            random_vec(&mut rng),
            random_unit(&mut rng),
        );
        let s: f64 = rng.random_range(-10.0..10.0);
        // u x g = -(g x u): exp(sG) is the rotation by -s about g
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(g), -s);
        let e = |x: &Vec3, s: f64| apply_exp_sg(x, &g, s);
        worst = worst
            .max((e(&u, s) - rot * u).norm())
            .max((e(&u, s).dot(&v) - u.dot(&e(&v, -s))).abs())
            .max((e(&apply_g(&u, &g), s) - apply_g(&e(&u, s), &g)).norm())
            .max((e(&u.cross(&v), s) - e(&u, s).cross(&e(&v, s))).norm());
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        1,
        worst <= 1e-12 && secs < 1.0,
        format!("max identity error {worst:.2e}, {secs:.3}s"),
    );
}

#[test]
fn criterion_02_mesh_condition() {
    let start = Instant::now();
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut all_pass = true;
    for n in 1..=7 {
        let r = verify_offdiagonal_condition(&build_cube_mesh(n, Aabb::unit_cube(), None).unwrap());
        all_pass &= r.pass;
        worst = worst.max(r.worst_entry);
    }
    let obtuse = verify_offdiagonal_condition(
        &obtuse_variant(&build_cube_mesh(3, Aabb::unit_cube(), None).unwrap()).unwrap(),
    );
    let secs = start.elapsed().as_secs_f64();
    verdict(
        2,
        all_pass && worst <= 1e-12 && !obtuse.pass && secs < 10.0,
        format!(
            "Kuhn max off-diagonal {worst:.2e}, obtuse max {:.2e}, {secs:.2}s",
            obtuse.worst_entry
        ),
    );
}

#[test]
fn criterion_03_constraint_preservation() {
    let cfg = SimConfig {
        n: 4,
        steps: 20,
        theta: 0.7,
        paths: 3,
        ..SimConfig::default()
    };
    let disc = Discretization::from_config(&cfg).unwrap();
    let init = InitialData::vortex(&disc, cfg.h_s).unwrap();
    let (mut unit, mut tang): (f64, f64) = (0.0, 0.0);
    for i in 0..3 {
        let path = sample_wiener_path(
            cfg.steps,
            cfg.k(),
            mllg_core::noise::path_seed(cfg.base_seed, i),
        )
        .unwrap();
        let r = run_path(&disc, &init, &path, &RunOptions::default()).unwrap();
        unit = unit.max(r.max_unit_deviation);
        tang = tang.max(r.max_tangency);
    }
    verdict(
        3,
        unit <= 1e-12 && tang <= 1e-10,
        format!("max ||m|-1| {unit:.2e}, max |v.m| {tang:.2e}"),
    );
}

/// `||grad u||^2` from per-tet gradients of the P1 interpolant.
fn brute_dirichlet(mesh: &Mesh, u: &NodalField) -> f64 {
    mesh.magnet_tets()
        .map(|t| {
            let geo = &mesh.geometry[t];
            let loc = mesh.magnet_tet(t);
            let mut grad = nalgebra::Matrix3::<f64>::zeros();
            for i in 0..4 {
                grad += u.values[loc[i]] * geo.grad_bary[i].transpose();
            }
            geo.volume * grad.norm_squared()
        })
        .sum()
}

#[test]
fn criterion_04_normalization_energy_decrease() {
    let mesh = build_cube_mesh(3, Aabb::unit_cube(), None).unwrap();
    assert!(verify_offdiagonal_condition(&mesh).pass);
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let m = random_unit_field(&mesh, &mut rng);
        let v = random_tangent_field(&m, &mut rng);
        let k: f64 = rng.random_range(0.001..3.0);
        let next = normalize_update(&m, &v, k).unwrap();
        let raw = NodalField::new(
            m.values
                .iter()
                .zip(&v.values)
                .map(|(a, b)| a + b * k)
                .collect(),
        );
        worst = worst.max(brute_dirichlet(&mesh, &next) - brute_dirichlet(&mesh, &raw));
    }
    verdict(
        4,
        worst <= 1e-10,
        format!("max energy increase {worst:.3e} over 100 instances"),
    );
}

struct DenseOracle<'a> {
    mesh: &'a Mesh,
    p: SchemeParams,
    g: Vec3,
}

impl DenseOracle<'_> {
    /// Whitney function of local edge `l` as `(lambda index, gradient)` pairs.
    fn whitney_terms(&self, t: usize, l: usize) -> [(usize, Vec3); 2] {
        let (i, j) = LOCAL_EDGES[l];
        let gb = &self.mesh.geometry[t].grad_bary;
        [(i, gb[j]), (j, -gb[i])]
    }

    fn llg(
        &self,
        m: &NodalField,
        pf: &EdgeField,
        w: f64,
        t1: &[Vec3],
        t2: &[Vec3],
    ) -> (DMatrix<f64>, DVector<f64>) {
        let mesh = self.mesh;
        let n = mesh.num_magnet_vertices();
        let sp = &self.p;
        let mu = sp.lambda1.powi(2) + sp.lambda2.powi(2);
        let dir = |p: usize, a: usize| if a == 0 { t1[p] } else { t2[p] };
        // exp(-W G) for constant g: rotation by +W about g
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(self.g), w);
        let mut a = DMatrix::zeros(2 * n, 2 * n);
        let mut b = DVector::zeros(2 * n);
        for t in mesh.magnet_tets() {
            let geo = &mesh.geometry[t];
            let vol = geo.volume;
            let loc = mesh.magnet_tet(t);
            for i in 0..4 {
                for al in 0..2 {
                    let ta = dir(loc[i], al);
                    let row = 2 * loc[i] + al;
                    for j in 0..4 {
                        let kij = vol * geo.grad_bary[i].dot(&geo.grad_bary[j]);
                        let mij = simplex_integral(vol, bary_monomial(&[i, j]));
                        b[row] -= mu * kij * m.values[loc[j]].dot(&ta);
                        for be in 0..2 {
                            let tb = dir(loc[j], be);
                            let mut cross = 0.0;
                            for l in 0..4 {
                                cross += simplex_integral(vol, bary_monomial(&[i, j, l]))
                                    * m.values[loc[l]].cross(&tb).dot(&ta);
                            }
                            a[(row, 2 * loc[j] + be)] += sp.lambda2 * mij * ta.dot(&tb)
                                - sp.lambda1 * cross
                                + mu * sp.k * sp.theta * kij * ta.dot(&tb);
                        }
                    }
                    for (l, &(e, s)) in mesh.tet_to_edges[t].iter().enumerate() {
                        for (li, grad) in self.whitney_terms(t, l) {
                            let int = simplex_integral(vol, bary_monomial(&[i, li]));
                            b[row] += mu * s * pf.coeffs[e] * int * (rot * grad).dot(&ta);
                        }
                    }
                }
            }
        }
        (a, b)
    }

    fn maxwell(&self, m: &NodalField, pf: &EdgeField, w: f64) -> (DMatrix<f64>, DVector<f64>) {
        let mesh = self.mesh;
        let sp = &self.p;
        let ne = mesh.num_edges();
        let mut mass = DMatrix::zeros(ne, ne);
        let mut a = DMatrix::zeros(ne, ne);
        let mut src = DVector::zeros(ne);
        // exp(W G): rotation by -W about g
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(self.g), -w);
        for t in 0..mesh.num_tets() {
            let geo = &mesh.geometry[t];
            let sigma = match mesh.region[t] {
                mllg_core::mesh::Region::Magnet => sp.sigma_d,
                mllg_core::mesh::Region::Cavity => sp.sigma,
            };
            let curls: Vec<Vec3> = LOCAL_EDGES
                .iter()
                .map(|&(i, j)| geo.grad_bary[i].cross(&geo.grad_bary[j]) * 2.0)
                .collect();
            let edges = &mesh.tet_to_edges[t];
            for l in 0..6 {
                for l2 in 0..6 {
                    let (e1, s1) = edges[l];
                    let (e2, s2) = edges[l2];
                    let mut int = 0.0;
                    for (i, gi) in self.whitney_terms(t, l) {
                        for (j, gj) in self.whitney_terms(t, l2) {
                            int +=
                                simplex_integral(geo.volume, bary_monomial(&[i, j])) * gi.dot(&gj);
                        }
                    }
                    mass[(e1, e2)] += s1 * s2 * int;
                    a[(e1, e2)] += s1 * s2 * sigma * geo.volume * curls[l].dot(&curls[l2]);
                }
            }
            if mesh.region[t] == mllg_core::mesh::Region::Magnet {
                let loc = mesh.magnet_tet(t);
                let mut jac = nalgebra::Matrix3::<f64>::zeros();
                for i in 0..4 {
                    jac += (rot * m.values[loc[i]]) * geo.grad_bary[i].transpose();
                }
                let curl = Vec3::new(
                    jac[(2, 1)] - jac[(1, 2)],
                    jac[(0, 2)] - jac[(2, 0)],
                    jac[(1, 0)] - jac[(0, 1)],
                );
                for l in 0..6 {
                    let (e, s) = edges[l];
                    src[e] += sp.sigma_d * s * geo.volume * curl.dot(&curls[l]);
                }
            }
        }
        let scale = sp.mu0 / sp.k;
        let lhs = &mass * scale + a;
        let rhs = &mass * DVector::from_column_slice(&pf.coeffs) * scale + src;
        (lhs, rhs)
    }
}

fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn criterion_05_oracle_equivalence() {
    let mesh = build_cube_mesh(1, Aabb::unit_cube(), None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let (mut llg_err, mut max_err): (f64, f64) = (0.0, 0.0);
    let mut spd = true;
    let mut asym: f64 = 0.0;
    for _ in 0..20 {
        let g = random_unit(&mut rng);
        let params = SchemeParams {
            lambda1: rng.random_range(0.2..2.0),
            lambda2: rng.random_range(0.2..2.0),
            mu0: rng.random_range(0.5..2.0),
            sigma: rng.random_range(0.5..2.0),
            sigma_d: rng.random_range(0.5..2.0),
            theta: rng.random_range(0.0..1.0),
            k: rng.random_range(0.01..0.5),
            solver_tol: 1e-12,
        };
        let disc = Discretization::new(mesh.clone(), &ConstantDirection(g), params).unwrap();
        let oracle = DenseOracle {
            mesh: &mesh,
            p: params,
            g,
        };
        let m = random_unit_field(&mesh, &mut rng);
        let pf = EdgeField::new(
            (0..mesh.num_edges())
                .map(|_| rng.random_range(-5.0..5.0))
                .collect(),
        );
        let w: f64 = rng.random_range(-3.0..3.0);

        let frame = build_tangent_frame(&m).unwrap();
        let v = llg_step(&disc, &m, &pf, w, &frame).unwrap();
        let (a, b) = oracle.llg(&m, &pf, w, &frame.t1, &frame.t2);
        let x = a.lu().solve(&b).unwrap();
        let v_dense = frame.expand(x.as_slice());
        llg_err = llg_err.max(rel(
            &DVector::from_vec(v.flatten()),
            &DVector::from_vec(v_dense.flatten()),
        ));

        let p_next = maxwell_step(&disc, &pf, &m, w).unwrap();
        let (ma, mb) = oracle.maxwell(&m, &pf, w);
        asym = asym.max((&ma - ma.transpose()).amax() / ma.amax());
        spd &= ma.clone().symmetric_eigenvalues().min() > 0.0;
        let y = ma.lu().solve(&mb).unwrap();
        max_err = max_err.max(rel(&DVector::from_vec(p_next.coeffs), &y));
    }
    verdict(
        5,
        llg_err <= 1e-10 && max_err <= 1e-10 && asym <= 1e-12 && spd,
        format!("LLG rel err {llg_err:.2e}, Maxwell rel err {max_err:.2e}, asymmetry {asym:.1e}, SPD {spd}"),
    );
}

#[test]
fn criterion_06_energy_boundedness() {
    let start = Instant::now();
    let cfg = SimConfig {
        n: 4,
        steps: 20,
        paths: 3,
        ..SimConfig::default()
    };
    let res = run_ensemble(&cfg).unwrap();
    let mut worst: f64 = 0.0;
    for (_, trace) in res
        .sample_paths
        .iter()
        .chain([(usize::MAX, res.mean_trace.clone())].iter())
    {
        let e0 = trace[0].total();
        let max = trace.iter().map(|r| r.total()).fold(0.0, f64::max);
        assert!(trace.iter().all(|r| r.total().is_finite()));
        worst = worst.max(max / e0);
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        6,
        worst <= 10.0 && secs < 120.0,
        format!("max total/initial {worst:.4}, {secs:.1}s"),
    );
}

#[test]
fn criterion_07_sphere_error_scaling() {
    let start = Instant::now();
    let mut pts = Vec::new();
    for n in [2usize, 4, 8] {
        let cfg = SimConfig {
            n,
            steps: n,
            paths: 10,
            ..SimConfig::default()
        };
        let res = run_ensemble(&cfg).unwrap();
        let hk = cfg.h() * cfg.k();
        pts.push((hk, res.mean_sphere_error_sq.sqrt()));
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = pts.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let (mx, my) = (lx.iter().sum::<f64>() / 3.0, ly.iter().sum::<f64>() / 3.0);
    let slope = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let decreasing = pts.windows(2).all(|w| w[1].1 < w[0].1);
    let secs = start.elapsed().as_secs_f64();
    let values: Vec<String> = pts
        .iter()
        .map(|(x, y)| format!("hk={x:.4} err={y:.4e}"))
        .collect();
    verdict(
        7,
        (0.7..=1.3).contains(&slope) && decreasing && secs < 600.0,
        format!("slope {slope:.3}; {}; {secs:.1}s", values.join(", ")),
    );
}

#[test]
fn criterion_08_wiener_statistics() {
    let n = 100_000;
    let k = 0.05;
    let path = sample_wiener_path(n, k, 808).unwrap();
    let inc: Vec<f64> = path.increments().collect();
    let mean = inc.iter().sum::<f64>() / n as f64;
    let var = inc.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (k / n as f64).sqrt();
    let dof = (n - 1) as f64;
    let chi2 = ChiSquared::new(dof).unwrap();
    let (lo, hi) = (
        k * chi2.inverse_cdf(0.0015) / dof,
        k * chi2.inverse_cdf(0.9985) / dof,
    );
    verdict(
        8,
        mean.abs() <= 3.0 * se && (lo..=hi).contains(&var),
        format!(
            "mean {mean:.3e} (3 SE {:.3e}), variance {var:.5} in [{lo:.5}, {hi:.5}]",
            3.0 * se
        ),
    );
}

fn csvs(res: &EnsembleResult) -> (String, String) {
    (energy_csv(res), paths_csv(res))
}

#[test]
fn criterion_09_determinism() {
    let base = SimConfig {
        n: 3,
        steps: 6,
        paths: 8,
        ..SimConfig::default()
    };
    let runs: Vec<_> = [4usize, 1, 3, 2]
        .iter()
        .map(|&w| {
            csvs(
                &run_ensemble(&SimConfig {
                    workers: w,
                    ..base.clone()
                })
                .unwrap(),
            )
        })
        .collect();
    let identical = runs.windows(2).all(|w| w[0] == w[1]);
    verdict(
        9,
        identical,
        format!("worker counts 4,1,3,2 give identical CSVs: {identical}"),
    );
}

#[test]
fn criterion_10_theta_gate() {
    let unstable = SimConfig {
        n: 4,
        steps: 4,
        theta: 0.3,
        paths: 1,
        ..SimConfig::default()
    };
    let rejected = matches!(unstable.validate(), Err(Error::Config { ref key, .. }) if key == "theta")
        && matches!(run_ensemble(&unstable), Err(Error::Config { .. }));

    let overridden = SimConfig {
        allow_unstable_theta: true,
        theta: 0.0,
        n: 6,
        steps: 2,
        ..unstable.clone()
    };
    let finite_or_reported = match run_ensemble(&overridden) {
        Ok(res) => res.mean_trace.iter().all(|r| r.total().is_finite()),
        Err(e) => matches!(e.root(), Error::Invariant(_)),
    };
    let tight = SimConfig {
        energy_guard: 1.05,
        ..overridden.clone()
    };
    let guard = match run_ensemble(&tight) {
        Err(e) => e.exit_code() == 4 && matches!(e.root(), Error::Invariant(_)),
        Ok(_) => false,
    };
    verdict(
        10,
        rejected && finite_or_reported && guard,
        format!("rejected without override {rejected}, override run finite or reported {finite_or_reported}, growth reported as invariant violation {guard}"),
    );
}
