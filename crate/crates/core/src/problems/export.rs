//! Matrix Market text dumps of problem instances.
//!
//! `export_instance` writes, into one directory:
//!
//! * `A.mtx`: forward operator of the least-squares term (coordinate, real, general)
//! * `b.mtx`: its target (array, real, general, one column)
//! * `B.mtx`: the operator inside `h`
//! * `x_true.mtx`: ground truth, when known
//!
//! Indices are 1-based as the format requires; values use 17 significant digits.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::operators::{LinearMap, Vector};
use crate::solvers::{SmoothFunction, SplitProblem};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn triplets(op: &LinearMap) -> Vec<(usize, usize, f64)> {
    match op {
        LinearMap::Sparse(s) => (0..s.nrows())
            .flat_map(|r| s.row(r).map(move |(c, v)| (r, c, v)))
            .filter(|t| t.2 != 0.0)
            .collect(),
        _ => {
            let dense = op.to_dense();
            let mut out = Vec::new();
            for c in 0..dense.ncols() {
                for r in 0..dense.nrows() {
                    if dense[(r, c)] != 0.0 {
                        out.push((r, c, dense[(r, c)]));
                    }
                }
            }
            out.sort_by_key(|t| (t.0, t.1));
            out
        }
    }
}

pub fn write_matrix_market(path: &Path, op: &LinearMap) -> Result<()> {
    let entries = triplets(op);
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut body = || -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", op.out_dim(), op.in_dim(), entries.len())?;
        for (r, c, v) in &entries {
            writeln!(w, "{} {} {:.16e}", r + 1, c + 1, v)?;
        }
        w.flush()
    };
    body().map_err(io_err(path))
}

pub fn write_vector_market(path: &Path, v: &Vector) -> Result<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut body = || -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix array real general")?;
        writeln!(w, "{} 1", v.len())?;
        for x in v.iter() {
            writeln!(w, "{x:.16e}")?;
        }
        w.flush()
    };
    body().map_err(io_err(path))
}

pub fn export_instance(p: &SplitProblem, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    if let SmoothFunction::LeastSquares { op, target, .. } = &p.f {
        write_matrix_market(&dir.join("A.mtx"), op)?;
        write_vector_market(&dir.join("b.mtx"), target)?;
    }
    write_matrix_market(&dir.join("B.mtx"), &p.b)?;
    if let Some(x) = &p.ground_truth {
        write_vector_market(&dir.join("x_true.mtx"), x)?;
    }
    Ok(())
}
