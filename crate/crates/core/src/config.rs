//! Simulation parameters and the plain-text `key = value` configuration format.
//!
//! One pair per line, `#` starts a comment, unknown keys are rejected and
//! missing keys keep their defaults. The defaults reproduce the reference
//! vortex experiment: `T = 1`, `J = 20`, `n = 7`, `theta = 0.7`, unit material
//! constants, `H_s = 30` and `L = 400` paths.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GMode {
    /// `g = (0, 0, 1)` everywhere.
    Constant,
    /// Helical unit field with analytic derivatives (see [`crate::noise::HelicalDirection`]).
    Analytic,
}

impl GMode {
    fn as_str(self) -> &'static str {
        match self {
            GMode::Constant => "constant",
            GMode::Analytic => "analytic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub t_final: f64,
    pub steps: usize,
    pub n: usize,
    pub theta: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu0: f64,
    pub sigma: f64,
    pub sigma_d: f64,
    pub h_s: f64,
    pub paths: usize,
    pub base_seed: u64,
    pub g_mode: GMode,
    pub output_dir: PathBuf,
    pub allow_unstable_theta: bool,
    /// A path aborts once its total energy exceeds this multiple of the initial one.
    pub energy_guard: f64,
    /// Relative residual target for both linear solves.
    pub solver_tol: f64,
    /// Replace the mesh by a variant with an obtuse tetrahedron (diagnostics only).
    pub obtuse_mesh: bool,
    pub retain_paths: usize,
    /// Worker threads for ensembles; 0 picks the machine default.
    pub workers: usize,
    pub n_list: Vec<usize>,
    pub k_ratios: Vec<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            t_final: 1.0,
            steps: 20,
            n: 7,
            theta: 0.7,
            lambda1: 1.0,
            lambda2: 1.0,
            mu0: 1.0,
            sigma: 1.0,
            sigma_d: 1.0,
            h_s: 30.0,
            paths: 400,
            base_seed: 1,
            g_mode: GMode::Constant,
            output_dir: PathBuf::from("out"),
            allow_unstable_theta: false,
            energy_guard: 1e3,
            solver_tol: 1e-12,
            obtuse_mesh: false,
            retain_paths: 3,
            workers: 0,
            n_list: vec![2, 3, 4, 5, 6, 7],
            k_ratios: vec![1.0, 0.5, 0.25],
        }
    }
}

const KEYS: &[&str] = &[
    "T",
    "J",
    "n",
    "theta",
    "lambda1",
    "lambda2",
    "mu0",
    "sigma",
    "sigma_D",
    "H_s",
    "L",
    "base_seed",
    "g_mode",
    "output_dir",
    "allow_unstable_theta",
    "energy_guard",
    "solver_tol",
    "obtuse_mesh",
    "retain_paths",
    "workers",
    "n_list",
    "k_ratios",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::config(
            key,
            format!("expects true/false, got `{value}`"),
        )),
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

fn fmt_list<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl SimConfig {
    pub fn k(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    /// Grid spacing of the unit-cube mesh.
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn mu(&self) -> f64 {
        self.lambda1 * self.lambda1 + self.lambda2 * self.lambda2
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "T" => self.t_final = parse_num("T", value)?,
            "J" => self.steps = parse_num("J", value)?,
            "n" => self.n = parse_num("n", value)?,
            "theta" => self.theta = parse_num("theta", value)?,
            "lambda1" => self.lambda1 = parse_num("lambda1", value)?,
            "lambda2" => self.lambda2 = parse_num("lambda2", value)?,
            "mu0" => self.mu0 = parse_num("mu0", value)?,
            "sigma" => self.sigma = parse_num("sigma", value)?,
            "sigma_D" => self.sigma_d = parse_num("sigma_D", value)?,
            "H_s" => self.h_s = parse_num("H_s", value)?,
            "L" => self.paths = parse_num("L", value)?,
            "base_seed" => {
                self.base_seed = match value.strip_prefix("0x") {
                    Some(hex) => u64::from_str_radix(hex, 16).map_err(|_| {
                        Error::config("base_seed", format!("cannot parse `{value}`"))
                    })?,
                    None => parse_num("base_seed", value)?,
                }
            }
            "g_mode" => {
                self.g_mode = match value {
                    "constant" => GMode::Constant,
                    "analytic" => GMode::Analytic,
                    _ => return Err(Error::config("g_mode", "must be `constant` or `analytic`")),
                }
            }
            "output_dir" => self.output_dir = PathBuf::from(value),
            "allow_unstable_theta" => self.allow_unstable_theta = parse_bool(key, value)?,
            "energy_guard" => self.energy_guard = parse_num("energy_guard", value)?,
            "solver_tol" => self.solver_tol = parse_num("solver_tol", value)?,
            "obtuse_mesh" => self.obtuse_mesh = parse_bool(key, value)?,
            "retain_paths" => self.retain_paths = parse_num("retain_paths", value)?,
            "workers" => self.workers = parse_num("workers", value)?,
            "n_list" => self.n_list = parse_list("n_list", value)?,
            "k_ratios" => self.k_ratios = parse_list("k_ratios", value)?,
            other => {
                return Err(Error::config(
                    other,
                    format!("is not a known key (expected one of {})", KEYS.join(", ")),
                ))
            }
        }
        Ok(())
    }

    /// Parses configuration text on top of the defaults and validates the result.
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_overrides(text, &[])
    }

    /// Parses `text`, then applies `KEY=VALUE` overrides in order, then validates.
    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(
                    format!("line {}", lineno + 1),
                    format!("expected `key = value`, got `{line}`"),
                )
            })?;
            cfg.set(key, value)?;
        }
        for o in overrides {
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| Error::config(o.as_str(), "override must look like KEY=VALUE"))?;
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config(path.display().to_string(), format!("cannot be read: {e}"))
        })?;
        Self::parse_with_overrides(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(
                    key,
                    format!("must be positive and finite (got {v})"),
                ))
            }
        };
        positive("T", self.t_final)?;
        if self.steps == 0 {
            return Err(Error::config("J", "must be at least 1"));
        }
        if self.n == 0 {
            return Err(Error::config("n", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::config(
                "theta",
                format!("must lie in [0, 1] (got {})", self.theta),
            ));
        }
        if self.lambda1 == 0.0 || !self.lambda1.is_finite() {
            return Err(Error::config("lambda1", "must be nonzero (λ₁ ≠ 0)"));
        }
        positive("lambda2", self.lambda2)?;
        positive("mu0", self.mu0)?;
        positive("sigma", self.sigma)?;
        positive("sigma_D", self.sigma_d)?;
        if !self.h_s.is_finite() {
            return Err(Error::config("H_s", "must be finite"));
        }
        if self.paths == 0 {
            return Err(Error::config("L", "must be at least 1"));
        }
        if !(self.energy_guard > 1.0) {
            return Err(Error::config("energy_guard", "must exceed 1"));
        }
        if !(self.solver_tol > 0.0 && self.solver_tol <= 1e-10) {
            return Err(Error::config("solver_tol", "must lie in (0, 1e-10]"));
        }
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return Err(Error::config(
                "n_list",
                "must be a nonempty list of positive integers",
            ));
        }
        if self.k_ratios.is_empty() || self.k_ratios.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::config(
                "k_ratios",
                "must be a nonempty list of positive reals",
            ));
        }
        self.check_stability(self.n, self.k())
    }

    /// Explicit-leaning schemes (`theta < 1/2`) need `k < h^2 / 2` unless overridden.
    pub fn check_stability(&self, n: usize, k: f64) -> Result<()> {
        let h = 1.0 / n as f64;
        if self.theta < 0.5 && k >= 0.5 * h * h && !self.allow_unstable_theta {
            return Err(Error::config(
                "theta",
                format!(
                    "= {} < 1/2 requires k < h^2/2 (k = {k}, h = {h}); set allow_unstable_theta = true to override",
                    self.theta
                ),
            ));
        }
        Ok(())
    }

    /// Serializes every key so that `parse` reproduces this configuration exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("T", format!("{:?}", self.t_final));
        kv("J", self.steps.to_string());
        kv("n", self.n.to_string());
        kv("theta", format!("{:?}", self.theta));
        kv("lambda1", format!("{:?}", self.lambda1));
        kv("lambda2", format!("{:?}", self.lambda2));
        kv("mu0", format!("{:?}", self.mu0));
        kv("sigma", format!("{:?}", self.sigma));
        kv("sigma_D", format!("{:?}", self.sigma_d));
        kv("H_s", format!("{:?}", self.h_s));
        kv("L", self.paths.to_string());
        kv("base_seed", format!("{:#x}", self.base_seed));
        kv("g_mode", self.g_mode.as_str().to_string());
        kv("output_dir", self.output_dir.display().to_string());
        kv(
            "allow_unstable_theta",
            self.allow_unstable_theta.to_string(),
        );
        kv("energy_guard", format!("{:?}", self.energy_guard));
        kv("solver_tol", format!("{:?}", self.solver_tol));
        kv("obtuse_mesh", self.obtuse_mesh.to_string());
        kv("retain_paths", self.retain_paths.to_string());
        kv("workers", self.workers.to_string());
        kv("n_list", fmt_list(&self.n_list));
        kv(
            "k_ratios",
            self.k_ratios
                .iter()
                .map(|r| format!("{r:?}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        s
    }
}
