//! Dense matrix text format and tabulated problem files.
//!
//! A matrix file holds one or more blocks. Each block starts with a header
//! line `rows cols` (real entries) or `rows cols complex` (entries given as
//! `re im` pairs), followed by the entries in row-major order, any number per
//! line. Blank lines and text after `#` are ignored.
//!
//! ```text
//! # 2x2 complex
//! 2 2 complex
//! 1 0   0.5 -0.25
//! 0.5 0.25   2 0
//! ```
//!
//! A problem file is JSON:
//!
//! ```json
//! { "mass": "mass.txt", "vgram": "vgram.txt",
//!   "matrices": "forms.txt", "times": [0.0, 0.5, 1.0], "gamma": 0.5 }
//! ```
//!
//! with paths relative to the JSON file. `matrices` holds one block per
//! time; the form interpolates linearly between them.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::NonautonomousForm;
use crate::gelfand::GelfandTriple;
use crate::linalg::{CMat, C64};

/// Parse every block in `text`.
pub fn parse_matrices(text: &str) -> Result<Vec<CMat>> {
    // Tokens tagged with their 1-based line number.
    let tokens: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .flat_map(|(i, line)| {
            let content = line.split('#').next().unwrap_or("");
            content.split_whitespace().map(move |tok| (i + 1, tok))
        })
        .collect();
    let mut pos = 0;
    let mut blocks = Vec::new();
    let parse_usize = |(line, tok): (usize, &str)| {
        tok.parse::<usize>().map_err(|_| Error::Parse {
            line,
            msg: format!("expected a dimension, found `{tok}`"),
        })
    };
    while pos < tokens.len() {
        let header_line = tokens[pos].0;
        if pos + 1 >= tokens.len() {
            return Err(Error::Parse {
                line: header_line,
                msg: "incomplete header".into(),
            });
        }
        let rows = parse_usize(tokens[pos])?;
        let cols = parse_usize(tokens[pos + 1])?;
        pos += 2;
        let complex = tokens.get(pos).is_some_and(|t| t.1 == "complex" && t.0 == header_line);
        if complex {
            pos += 1;
        }
        if rows == 0 || cols == 0 {
            return Err(Error::Parse {
                line: header_line,
                msg: "matrix dimensions must be positive".into(),
            });
        }
        let per_entry = if complex { 2 } else { 1 };
        let needed = rows * cols * per_entry;
        if pos + needed > tokens.len() {
            return Err(Error::Parse {
                line: tokens.last().map_or(header_line, |t| t.0),
                msg: format!("block needs {needed} values, found {}", tokens.len() - pos),
            });
        }
        let mut values = Vec::with_capacity(needed);
        for &(line, tok) in &tokens[pos..pos + needed] {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("expected a number, found `{tok}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    msg: format!("non-finite value `{tok}`"),
                });
            }
            values.push(v);
        }
        pos += needed;
        blocks.push(CMat::from_fn(rows, cols, |i, j| {
            let k = (i * cols + j) * per_entry;
            if complex {
                C64::new(values[k], values[k + 1])
            } else {
                C64::new(values[k], 0.0)
            }
        }));
    }
    Ok(blocks)
}

/// Append one block to `out`; the real header is used when every imaginary
/// part is zero. Values round-trip exactly.
pub fn format_matrix(out: &mut String, a: &CMat) {
    let complex = a.iter().any(|z| z.im != 0.0);
    let _ = writeln!(out, "{} {}{}", a.nrows(), a.ncols(), if complex { " complex" } else { "" });
    for i in 0..a.nrows() {
        let row: Vec<String> = (0..a.ncols())
            .map(|j| {
                let z = a[(i, j)];
                if complex {
                    format!("{:e} {:e}", z.re, z.im)
                } else {
                    format!("{:e}", z.re)
                }
            })
            .collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

pub fn read_matrix_file(path: &Path) -> Result<Vec<CMat>> {
    parse_matrices(&std::fs::read_to_string(path)?)
}

pub fn write_matrix_file(path: &Path, blocks: &[CMat]) -> Result<()> {
    let mut out = String::new();
    for b in blocks {
        format_matrix(&mut out, b);
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn single(path: &Path) -> Result<CMat> {
    let mut blocks = read_matrix_file(path)?;
    if blocks.len() != 1 {
        return Err(Error::Invalid(format!(
            "{} holds {} matrices, expected one",
            path.display(),
            blocks.len()
        )));
    }
    Ok(blocks.remove(0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub mass: PathBuf,
    pub vgram: PathBuf,
    pub matrices: PathBuf,
    pub times: Vec<f64>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_gamma() -> f64 {
    0.5
}

impl ProblemFile {
    /// Assemble the tabulated form, resolving paths against `base`.
    pub fn build(&self, base: &Path) -> Result<NonautonomousForm> {
        let mass = single(&base.join(&self.mass))?;
        let vgram = single(&base.join(&self.vgram))?;
        let matrices = read_matrix_file(&base.join(&self.matrices))?;
        let triple = Arc::new(GelfandTriple::new(mass, vgram)?);
        NonautonomousForm::piecewise_linear(triple, self.times.clone(), matrices, self.gamma)
    }
}

/// Read a JSON problem file and build its form.
pub fn load_problem_file(path: &Path) -> Result<NonautonomousForm> {
    let file: ProblemFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    file.build(path.parent().unwrap_or(Path::new(".")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn parses_real_and_complex_blocks() {
        let text = "# two blocks\n2 2\n1 2\n3 4\n\n2 2 complex\n1 0 0.5 -0.25 # tail\n0.5 0.25 2 0\n";
        let b = parse_matrices(text).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b[0][(0, 1)], c(2.0));
        assert_eq!(b[0][(1, 0)], c(3.0));
        assert_eq!(b[1][(0, 1)], C64::new(0.5, -0.25));
        assert_eq!(b[1][(1, 0)], C64::new(0.5, 0.25));
    }

    #[test]
    fn round_trips_exactly() {
        let a = CMat::from_fn(3, 3, |i, j| C64::new(1.0 / (i + j + 1) as f64, (i as f64 - j as f64) * 1e-17));
        let r = CMat::from_fn(2, 2, |i, j| c(std::f64::consts::PI * (i + 2 * j) as f64 - 1e300));
        let mut s = String::new();
        format_matrix(&mut s, &a);
        format_matrix(&mut s, &r);
        assert!(s.lines().nth(4).unwrap() == "2 2");
        let back = parse_matrices(&s).unwrap();
        assert_eq!(back, vec![a, r]);
    }

    #[test]
    fn reports_line_of_error() {
        let err = parse_matrices("2 2\n1 2\n3 x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        assert!(matches!(parse_matrices("2 2\n1 2 3\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_matrices("0 2\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_matrices("1 1\nnan\n"), Err(Error::Parse { .. })));
        assert!(parse_matrices("").unwrap().is_empty());
    }

    #[test]
    fn problem_file_builds_piecewise_linear_form() {
        let dir = tempfile::tempdir().unwrap();
        let eye = CMat::identity(2, 2);
        write_matrix_file(&dir.path().join("m.txt"), std::slice::from_ref(&eye)).unwrap();
        write_matrix_file(&dir.path().join("k.txt"), &[&eye * c(2.0)]).unwrap();
        let a0 = &eye * c(2.0);
        let mut a1 = &eye * c(4.0);
        a1[(0, 1)] = C64::new(0.0, 1.0);
        write_matrix_file(&dir.path().join("a.txt"), &[a0.clone(), a1.clone()]).unwrap();
        let json = r#"{"mass": "m.txt", "vgram": "k.txt", "matrices": "a.txt", "times": [0, 2]}"#;
        let path = dir.path().join("problem.json");
        std::fs::write(&path, json).unwrap();
        let form = load_problem_file(&path).unwrap();
        assert_eq!(form.horizon(), 2.0);
        assert_eq!(form.matrix_at(1.0).unwrap(), (a0 + a1) * c(0.5));

        std::fs::write(&path, r#"{"mass": "m.txt", "vgram": "k.txt", "matrices": "a.txt", "times": [0]}"#).unwrap();
        assert!(load_problem_file(&path).is_err());
        std::fs::write(&path, r#"{"mass": "missing.txt", "vgram": "k.txt", "matrices": "a.txt", "times": [0, 1]}"#)
            .unwrap();
        assert!(matches!(load_problem_file(&path), Err(Error::Io(_))));
    }
}
