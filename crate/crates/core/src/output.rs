//! CSV, plot-script and manifest emission. Numbers use 17 significant digits
//! in scientific notation, independent of locale.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::SimConfig;
use crate::ensemble::{ConvergenceRow, EnsembleResult};
use crate::error::{Error, Result};
use crate::stepper::EnergyRecord;

pub const ENERGY_HEADER: &str = "path,t,exchange_sq,exchange,field_sq,field,total,curl_sq";
pub const ERROR_HEADER: &str = "n,k,mean_sphere_error_sq,L,wallclock_s";
pub const PATHS_HEADER: &str = "path,seed,sphere_error_sq";

pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn energy_row(out: &mut String, tag: &str, r: &EnergyRecord) {
    let cols = [
        r.t,
        r.exchange_sq,
        r.exchange_sq.sqrt(),
        r.field_sq,
        r.field_sq.sqrt(),
        r.total(),
        r.curl_sq,
    ];
    out.push_str(tag);
    for c in cols {
        out.push(',');
        out.push_str(&fmt_num(c));
    }
    out.push('\n');
}

/// One block per retained path, then the mean block; blocks are separated by
/// two blank lines so gnuplot can address them with `index`.
pub fn energy_csv(res: &EnsembleResult) -> String {
    let mut out = String::from(ENERGY_HEADER);
    out.push('\n');
    for (i, trace) in &res.sample_paths {
        let tag = i.to_string();
        for r in trace {
            energy_row(&mut out, &tag, r);
        }
        out.push_str("\n\n");
    }
    for r in &res.mean_trace {
        energy_row(&mut out, "mean", r);
    }
    out
}

pub fn paths_csv(res: &EnsembleResult) -> String {
    let mut out = String::from(PATHS_HEADER);
    out.push('\n');
    for s in &res.summaries {
        let _ = writeln!(
            out,
            "{},{:#018x},{}",
            s.index,
            s.seed,
            fmt_num(s.sphere_error_sq)
        );
    }
    out
}

pub fn error_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from(ERROR_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.n,
            fmt_num(r.k),
            fmt_num(r.mean_sphere_error_sq),
            r.paths,
            fmt_num(r.wallclock_s)
        );
    }
    out
}

/// Gnuplot script for the error plot and the exchange, field and total energy plots.
pub fn plot_script(retained: usize) -> String {
    let mut s = String::from(
        "# gnuplot script; run from the output directory: gnuplot plot.gp\n\
         set datafile separator ','\n\
         set terminal pngcairo size 900,600\n\
         set key top right\n\n\
         if (system('test -f error.csv && echo 1') eq '1') {\n\
         \x20   set output 'error.png'\n\
         \x20   set title 'E[E^2_{h,k}] versus h'\n\
         \x20   set xlabel 'h = 1/n'\n\
         \x20   set ylabel 'mean sphere error (squared)'\n\
         \x20   set logscale xy\n\
         \x20   plot 'error.csv' using (1.0/$1):3 with linespoints title 'all k'\n\
         \x20   unset logscale\n\
         }\n\n",
    );
    let figures = [
        ("exchange.png", "exchange energy ||grad m||", 4),
        ("field.png", "field energy ||P||", 6),
        ("total.png", "total energy ||grad m||^2 + ||P||^2", 7),
    ];
    for (file, title, col) in figures {
        let _ = writeln!(s, "if (system('test -f energy.csv && echo 1') eq '1') {{");
        let _ = writeln!(s, "    set output '{file}'");
        let _ = writeln!(s, "    set title '{title}'");
        let _ = writeln!(s, "    set xlabel 't'");
        let mut parts = vec![format!(
            "'energy.csv' index {retained} using 2:{col} with lines lw 3 title 'expectation'"
        )];
        for i in 0..retained {
            parts.push(format!(
                "'' index {i} using 2:{col} with lines title 'path {i}'"
            ));
        }
        let _ = writeln!(s, "    plot {}", parts.join(", \\\n         "));
        let _ = writeln!(s, "}}\n");
    }
    s
}

pub fn manifest(cfg: &SimConfig, seeds: &[u64]) -> String {
    let mut s = format!("# mllg {}\n", env!("CARGO_PKG_VERSION"));
    s.push_str(&cfg.to_text());
    let _ = writeln!(s, "# seeds");
    for (i, seed) in seeds.iter().enumerate() {
        let _ = writeln!(s, "# {i} {seed:#018x}");
    }
    s
}

/// Writes `contents` under `dir`, creating the directory as needed.
pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::Input(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

/// energy.csv, paths.csv, plot.gp and manifest.txt for one ensemble.
pub fn write_ensemble_outputs(
    dir: &Path,
    cfg: &SimConfig,
    res: &EnsembleResult,
) -> Result<Vec<PathBuf>> {
    Ok(vec![
        write_file(dir, "energy.csv", &energy_csv(res))?,
        write_file(dir, "paths.csv", &paths_csv(res))?,
        write_file(dir, "plot.gp", &plot_script(res.sample_paths.len()))?,
        write_file(dir, "manifest.txt", &manifest(cfg, &res.seeds()))?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::PathSummary;

    fn rec(t: f64) -> EnergyRecord {
        EnergyRecord {
            t,
            exchange_sq: 4.0,
            field_sq: 9.0,
            curl_sq: 0.5,
        }
    }

    fn result(retained: usize) -> EnsembleResult {
        EnsembleResult {
            paths: 3,
            mean_trace: vec![rec(0.0), rec(0.5)],
            sample_paths: (0..retained)
                .map(|i| (i, vec![rec(0.0), rec(0.5)]))
                .collect(),
            mean_sphere_error_sq: 0.25,
            summaries: (0..3)
                .map(|i| PathSummary {
                    index: i,
                    seed: i as u64,
                    sphere_error_sq: 0.25,
                })
                .collect(),
        }
    }

    #[test]
    fn energy_csv_has_one_block_per_path_plus_mean() {
        let csv = energy_csv(&result(3));
        assert_eq!(csv.split("\n\n\n").count(), 4);
        let mean: Vec<_> = csv.lines().filter(|l| l.starts_with("mean,")).collect();
        assert_eq!(mean.len(), 2);
        let cols: Vec<f64> = mean[0]
            .split(',')
            .skip(1)
            .map(|c| c.parse().unwrap())
            .collect();
        assert_eq!(cols, [0.0, 4.0, 2.0, 9.0, 3.0, 13.0, 0.5]);
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2e-300, 123456.789] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn manifest_reparses_to_the_same_config() {
        let cfg = SimConfig::default();
        let text = manifest(&cfg, &[1, 2]);
        assert_eq!(SimConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn plot_script_references_all_blocks() {
        let s = plot_script(2);
        assert!(s.contains("index 2 using 2:7"));
        assert!(s.contains("index 1 using 2:4"));
    }
}
