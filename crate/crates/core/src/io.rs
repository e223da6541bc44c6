//! Dataset, truth and report files.
//!
//! A dataset directory holds
//!
//! * `y.csv`: header `y`, then one observation per line;
//! * `A.csv`: header `row,col,value`, then one triplet per line (0-based);
//! * `Z.csv`: header `z0,z1,...`, then one comma-separated row per observation;
//! * optionally `G.csv` and `C.csv`: spatial stiffness and diagonal mass as
//!   triplets, replacing the lattice operators.
//!
//! Headers are optional on read. All floats are written with 17 significant
//! digits, which round-trips every `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::bta::BtaLayout;
use crate::error::{Error, Result};
use crate::inla::InferenceReport;
use crate::kernels::Block;
use crate::model::{build_lattice_spec, Dataset, HyperParameters, ModelSpec, Triplets, Tridiagonal};
use crate::simgen::Truth;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Non-empty data lines with 1-based line numbers, skipping a header line
/// whose first field is not numeric.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut first = true;
    text.lines().enumerate().filter_map(move |(i, l)| {
        let l = l.trim();
        if l.is_empty() {
            return None;
        }
        let header = first && l.split(',').next().is_some_and(|f| f.trim().parse::<f64>().is_err());
        first = false;
        (!header).then_some((i + 1, l))
    })
}

fn fields(path: &Path, line: usize, text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(path, line, format!("cannot parse number `{}`", f.trim())))
        })
        .collect()
}

fn index(path: &Path, line: usize, v: f64) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(Error::parse(path, line, format!("`{v}` is not a valid index")))
    }
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text = read(path)?;
    data_lines(&text)
        .map(|(line, l)| {
            let f = fields(path, line, l)?;
            match f.as_slice() {
                [v] => Ok(*v),
                _ => Err(Error::parse(path, line, "expected a single value")),
            }
        })
        .collect()
}

pub fn read_triplets(path: &Path, rows: usize, cols: usize) -> Result<Triplets> {
    let text = read(path)?;
    let mut entries = Vec::new();
    for (line, l) in data_lines(&text) {
        let f = fields(path, line, l)?;
        let [r, c, v] = f.as_slice() else {
            return Err(Error::parse(path, line, "expected `row,col,value`"));
        };
        let (r, c) = (index(path, line, *r)?, index(path, line, *c)?);
        if r >= rows || c >= cols {
            return Err(Error::parse(path, line, format!("entry ({r}, {c}) outside {rows}x{cols}")));
        }
        entries.push((r, c, *v));
    }
    Triplets::new(rows, cols, entries)
}

pub fn read_dense(path: &Path, rows: usize, cols: usize) -> Result<Block> {
    let text = read(path)?;
    let mut data = Vec::with_capacity(rows * cols);
    let mut count = 0;
    for (line, l) in data_lines(&text) {
        let f = fields(path, line, l)?;
        if f.len() != cols {
            return Err(Error::parse(path, line, format!("expected {cols} columns, found {}", f.len())));
        }
        data.extend(f);
        count += 1;
    }
    if count != rows {
        return Err(Error::parse(path, text.lines().count(), format!("expected {rows} rows, found {count}")));
    }
    Ok(Block::from_row_major(rows, cols, data))
}

pub fn vector_csv(header: &str, v: &[f64]) -> String {
    let mut s = format!("{header}\n");
    for x in v {
        let _ = writeln!(s, "{}", fmt_f64(*x));
    }
    s
}

pub fn triplets_csv(t: &Triplets) -> String {
    let mut s = String::from("row,col,value\n");
    for &(r, c, v) in &t.entries {
        let _ = writeln!(s, "{r},{c},{}", fmt_f64(v));
    }
    s
}

pub fn dense_csv(b: &Block) -> String {
    let header: Vec<String> = (0..b.cols()).map(|j| format!("z{j}")).collect();
    let mut s = header.join(",") + "\n";
    for r in 0..b.rows() {
        let row: Vec<String> = b.row(r).iter().map(|&v| fmt_f64(v)).collect();
        s += &row.join(",");
        s.push('\n');
    }
    s
}

pub fn write_dataset(dir: &Path, data: &Dataset) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_text(&dir.join("y.csv"), &vector_csv("y", data.y()))?;
    write_text(&dir.join("A.csv"), &triplets_csv(data.a()))?;
    write_text(&dir.join("Z.csv"), &dense_csv(data.z()))
}

/// Reads `y.csv`, `A.csv` and `Z.csv`. `Z.csv` may be absent when `n_b = 0`.
pub fn read_dataset(dir: &Path, layout: BtaLayout) -> Result<Dataset> {
    let y = read_vector(&dir.join("y.csv"))?;
    let n_o = y.len();
    let a = read_triplets(&dir.join("A.csv"), n_o, layout.n_st())?;
    let z_path = dir.join("Z.csv");
    let z = if layout.n_b() == 0 && !z_path.exists() {
        Block::zeros(n_o, 0)
    } else {
        read_dense(&z_path, n_o, layout.n_b())?
    };
    Dataset::new(layout, y, a, z)
}

/// Lattice operators, or the `G.csv`/`C.csv` operators when `G.csv` exists in
/// `dir`.
pub fn load_spec(
    dir: &Path,
    rows: usize,
    cols: usize,
    n_t: usize,
    n_b: usize,
    prior_precision_fixed: f64,
) -> Result<ModelSpec> {
    let g_path = dir.join("G.csv");
    if !g_path.exists() {
        return build_lattice_spec(rows, cols, n_t, n_b, prior_precision_fixed);
    }
    let n_s = rows * cols;
    let g = read_triplets(&g_path, n_s, n_s)?;
    let c_path = dir.join("C.csv");
    let mass = if c_path.exists() {
        let c = read_triplets(&c_path, n_s, n_s)?;
        let mut m = vec![0.0; n_s];
        for &(r, col, v) in &c.entries {
            if r != col {
                return Err(Error::InvalidModel("C.csv must be diagonal".into()));
            }
            m[r] += v;
        }
        m
    } else {
        vec![1.0; n_s]
    };
    ModelSpec::new(
        BtaLayout::new(n_s, n_t, n_b)?,
        mass,
        g,
        Tridiagonal::path_laplacian(n_t),
        prior_precision_fixed,
    )
}

pub fn truth_csv(truth: &Truth) -> String {
    let mut s = String::from("name,value\n");
    for (name, v) in HyperParameters::NAMES.iter().zip(truth.theta.to_array()) {
        let _ = writeln!(s, "{name},{}", fmt_f64(v));
    }
    for (j, b) in truth.beta.iter().enumerate() {
        let _ = writeln!(s, "beta_{j},{}", fmt_f64(*b));
    }
    s
}

/// `(name, value)` rows of a `truth.csv` file.
pub fn read_truth(path: &Path) -> Result<Vec<(String, f64)>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (i, l) in text.lines().enumerate().skip(1) {
        if l.trim().is_empty() {
            continue;
        }
        let (name, v) = l
            .split_once(',')
            .ok_or_else(|| Error::parse(path, i + 1, "expected `name,value`"))?;
        let v = v
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, i + 1, format!("cannot parse number `{}`", v.trim())))?;
        out.push((name.trim().to_string(), v));
    }
    Ok(out)
}

pub fn hyper_csv(report: &InferenceReport) -> String {
    let mut s = String::from("name,mode_log,sd_log,mode_natural\n");
    let theta = report.theta_mode.to_array();
    for (i, name) in HyperParameters::NAMES.iter().enumerate() {
        let sd = report.hyper_marginals.as_ref().map_or(f64::NAN, |m| m[i].sd_log);
        let _ = writeln!(s, "{name},{},{},{}", fmt_f64(theta[i]), fmt_f64(sd), fmt_f64(theta[i].exp()));
    }
    s
}

pub fn latent_csv(report: &InferenceReport) -> String {
    let mut s = String::from("index,mean,sd\n");
    for (i, (m, sd)) in report.latent_means.iter().zip(&report.latent_sds).enumerate() {
        let _ = writeln!(s, "{i},{},{}", fmt_f64(*m), fmt_f64(*sd));
    }
    s
}

pub fn trace_csv(report: &InferenceReport) -> String {
    let mut s = String::from("iter,f,grad_norm,step\n");
    for t in &report.trace {
        let _ = writeln!(s, "{},{},{},{}", t.iteration, fmt_f64(t.value), fmt_f64(t.grad_norm), fmt_f64(t.step));
    }
    s
}

pub fn summary_text(report: &InferenceReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "status = {:?}", report.status);
    let _ = writeln!(s, "iterations = {}", report.iterations);
    let _ = writeln!(s, "function_evaluations = {}", report.function_evaluations);
    let _ = writeln!(s, "objective_at_mode = {}", fmt_f64(report.objective_at_mode));
    let _ = writeln!(s, "final_gradient_norm = {}", fmt_f64(report.final_gradient_norm));
    let _ = writeln!(s, "hessian_positive_definite = {}", report.hessian_is_positive_definite());
    let _ = writeln!(s, "hessian_min_eigenvalue = {}", fmt_f64(report.hessian_min_eigenvalue));
    let _ = writeln!(s, "wall_seconds = {:.6}", report.wall_time.as_secs_f64());
    for r in 0..report.neg_hessian.rows() {
        let row: Vec<String> = report.neg_hessian.row(r).iter().map(|&v| fmt_f64(v)).collect();
        let _ = writeln!(s, "neg_hessian_row_{r} = {}", row.join(" "));
    }
    s
}

pub fn grid_csv(report: &InferenceReport) -> String {
    let mut s = String::from("ring,direction,sign,theta_0,theta_1,theta_2,theta_3,f\n");
    for p in &report.grid {
        let th: Vec<String> = p.theta.iter().map(|&v| fmt_f64(v)).collect();
        let _ = writeln!(s, "{},{},{},{},{}", p.ring, p.direction, p.sign, th.join(","), fmt_f64(p.value));
    }
    s
}

/// Writes `hyper.csv`, `latent.csv`, `trace.csv`, `timing.txt`,
/// `summary.txt`, and `grid.csv` when exploration ran.
pub fn write_report(dir: &Path, report: &InferenceReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_text(&dir.join("hyper.csv"), &hyper_csv(report))?;
    write_text(&dir.join("latent.csv"), &latent_csv(report))?;
    write_text(&dir.join("trace.csv"), &trace_csv(report))?;
    write_text(&dir.join("timing.txt"), &report.stage_times.to_table())?;
    write_text(&dir.join("summary.txt"), &summary_text(report))?;
    if !report.grid.is_empty() {
        write_text(&dir.join("grid.csv"), &grid_csv(report))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn header_is_optional() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.csv");
        write_text(&p, "1.5\n2.5\n").unwrap();
        assert_eq!(read_vector(&p).unwrap(), vec![1.5, 2.5]);
        write_text(&p, "y\n1.5\n\n2.5\n").unwrap();
        assert_eq!(read_vector(&p).unwrap(), vec![1.5, 2.5]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("A.csv");
        write_text(&p, "row,col,value\n0,0,1\n1,x,2\n").unwrap();
        match read_triplets(&p, 2, 2) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        write_text(&p, "row,col,value\n0,5,1\n").unwrap();
        assert!(matches!(read_triplets(&p, 2, 2), Err(Error::Parse { line: 2, .. })));
        let z = dir.path().join("Z.csv");
        write_text(&z, "1,2\n3\n").unwrap();
        assert!(matches!(read_dense(&z, 2, 2), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn dataset_round_trip() {
        let lay = BtaLayout::new(2, 2, 1).unwrap();
        let a = Triplets::new(3, 4, vec![(0, 0, 1.0), (1, 3, 0.25), (2, 2, 1.0 / 3.0)]).unwrap();
        let z = Block::from_rows(&[&[1.0], &[0.1], &[-7.0e-12]]);
        let data = Dataset::new(lay, vec![0.1, 0.2, 1.0 / 7.0], a, z).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &data).unwrap();
        let back = read_dataset(dir.path(), lay).unwrap();
        assert_eq!(back.y(), data.y());
        assert_eq!(back.a(), data.a());
        assert_eq!(back.z(), data.z());
    }
}
