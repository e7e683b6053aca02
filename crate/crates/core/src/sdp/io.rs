//! Line-oriented text dump of a [`ConicProblem`], for debugging.
//!
//! ```txt
//! conic-problem
//! scalars 2
//! psd_dim 2
//! objective c=1,1 C=1:0,0:0,0:0,1:0
//! constraint a=0.5,0 S=1:0,0:0,0:0,0:0 b=6
//! ```
//!
//! Matrices are written row-major as `re:im` pairs. Blank lines and lines
//! starting with `#` are ignored. Numbers use Rust's shortest round-trip
//! formatting, so a dump reloads bit for bit.

use std::fmt::Write as _;

use num_complex::Complex64;

use super::ConicProblem;
use crate::error::{Error, Result};
use crate::linalg::CMat;

fn join_reals(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:?}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn join_matrix(m: &CMat) -> String {
    let n = m.dim();
    let mut parts = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            parts.push(format!("{:?}:{:?}", z.re, z.im));
        }
    }
    parts.join(",")
}

pub fn write_problem(problem: &ConicProblem) -> String {
    let mut out = String::from("conic-problem\n");
    let _ = writeln!(out, "scalars {}", problem.n_scalars);
    let _ = writeln!(out, "psd_dim {}", problem.psd_dim);
    let _ = writeln!(
        out,
        "objective c={} C={}",
        join_reals(&problem.objective_scalars),
        join_matrix(&problem.objective_matrix)
    );
    for c in &problem.constraints {
        let _ = writeln!(
            out,
            "constraint a={} S={} b={:?}",
            join_reals(&c.scalars),
            join_matrix(&c.matrix),
            c.bound
        );
    }
    out
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::InvalidInput(format!("line {}: {}", line + 1, msg.into()))
}

fn parse_reals(line: usize, s: &str) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| parse_err(line, format!("bad number {t:?}")))
        })
        .collect()
}

fn parse_matrix(line: usize, s: &str, n: usize) -> Result<CMat> {
    let entries: Vec<Complex64> = if s.is_empty() {
        Vec::new()
    } else {
        s.split(',')
            .map(|t| {
                let (re, im) = t
                    .split_once(':')
                    .ok_or_else(|| parse_err(line, format!("bad entry {t:?}")))?;
                let re = re
                    .parse::<f64>()
                    .map_err(|_| parse_err(line, format!("bad number {re:?}")))?;
                let im = im
                    .parse::<f64>()
                    .map_err(|_| parse_err(line, format!("bad number {im:?}")))?;
                Ok(Complex64::new(re, im))
            })
            .collect::<Result<_>>()?
    };
    if entries.len() != n * n {
        return Err(parse_err(
            line,
            format!("expected {} matrix entries, got {}", n * n, entries.len()),
        ));
    }
    let rows: Vec<Vec<Complex64>> = entries.chunks(n.max(1)).map(|c| c.to_vec()).collect();
    let m = if n == 0 {
        CMat::zeros(0)
    } else {
        CMat::from_rows(&rows)
    };
    if !m.is_hermitian() {
        return Err(parse_err(line, "matrix is not Hermitian"));
    }
    Ok(m)
}

fn fields(line: usize, rest: &str) -> Result<Vec<(&str, &str)>> {
    rest.split_whitespace()
        .map(|tok| {
            tok.split_once('=')
                .ok_or_else(|| parse_err(line, format!("expected key=value, got {tok:?}")))
        })
        .collect()
}

fn field<'a>(line: usize, fs: &[(&str, &'a str)], key: &str) -> Result<&'a str> {
    fs.iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| parse_err(line, format!("missing field {key}")))
}

pub fn read_problem(text: &str) -> Result<ConicProblem> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, "conic-problem")) => {}
        Some((i, _)) => return Err(parse_err(i, "expected header `conic-problem`")),
        None => return Err(Error::InvalidInput("empty problem file".into())),
    }
    let mut n_scalars = None;
    let mut psd_dim = None;
    let mut problem: Option<ConicProblem> = None;
    for (i, l) in lines {
        let (kw, rest) = l.split_once(' ').unwrap_or((l, ""));
        match kw {
            "scalars" => {
                n_scalars = Some(rest.trim().parse().map_err(|_| parse_err(i, "bad count"))?)
            }
            "psd_dim" => psd_dim = Some(rest.trim().parse().map_err(|_| parse_err(i, "bad size"))?),
            "objective" | "constraint" => {
                let (Some(ns), Some(nd)) = (n_scalars, psd_dim) else {
                    return Err(parse_err(i, "sizes must precede objective and constraints"));
                };
                let p = problem.get_or_insert_with(|| ConicProblem::new(ns, nd));
                let fs = fields(i, rest)?;
                if kw == "objective" {
                    p.objective_scalars = parse_reals(i, field(i, &fs, "c")?)?;
                    p.objective_matrix = parse_matrix(i, field(i, &fs, "C")?, nd)?;
                } else {
                    let a = parse_reals(i, field(i, &fs, "a")?)?;
                    let s = parse_matrix(i, field(i, &fs, "S")?, nd)?;
                    let b = field(i, &fs, "b")?
                        .parse::<f64>()
                        .map_err(|_| parse_err(i, "bad bound"))?;
                    p.add_constraint(a, s, b);
                }
            }
            other => return Err(parse_err(i, format!("unknown record {other:?}"))),
        }
    }
    let problem = match problem {
        Some(p) => p,
        None => match (n_scalars, psd_dim) {
            (Some(ns), Some(nd)) => ConicProblem::new(ns, nd),
            _ => return Err(Error::InvalidInput("missing scalars/psd_dim".into())),
        },
    };
    problem.validate()?;
    Ok(problem)
}
