//! Plain-text problem format.
//!
//! ```text
//! %%ParabolicProblem 1
//! <dim> <steps> <matrix count>
//! %%mesh <1d|2d> <cells>            (optional)
//! %%tau_ref <value>
//! %%steps                            one tau_n per line
//! %%matrix <id> <nnz>                1-based "i j value", i <= j
//! %%mass <id>
//! %%stiffness                        one "<id> <scale>" per step
//! %%reference <id> <scale>
//! %%initial                          dim values
//! %%load <n>                         dim values, n = 1..steps
//! ```
//!
//! Lines starting with a single `%` are comments. Values are written with
//! the shortest representation that round-trips exactly.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::SpatialMatrix;
use crate::model::{Mesh, ProblemSpec, ScaledMatrix, Space, TimeGrid};

const MAGIC: &str = "%%ParabolicProblem 1";

pub fn write_problem(spec: &ProblemSpec) -> String {
    let mut bases: Vec<Arc<SpatialMatrix>> = Vec::new();
    let id_of = |m: &Arc<SpatialMatrix>, bases: &mut Vec<Arc<SpatialMatrix>>| -> usize {
        match bases.iter().position(|b| Arc::ptr_eq(b, m)) {
            Some(i) => i,
            None => {
                bases.push(m.clone());
                bases.len() - 1
            }
        }
    };
    let mass_id = id_of(spec.mass(), &mut bases);
    let stiff_ids: Vec<usize> = spec.stiffness().iter().map(|a| id_of(&a.base, &mut bases)).collect();
    let ref_id = id_of(&spec.a_ref().base, &mut bases);

    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "% alpha = {}", spec.alpha());
    let _ = writeln!(out, "{} {} {}", spec.dim(), spec.steps(), bases.len());
    if let Some(mesh) = spec.mesh() {
        let tag = match mesh.space {
            Space::OneD => "1d",
            Space::TwoD => "2d",
        };
        let _ = writeln!(out, "%%mesh {tag} {}", mesh.cells);
    }
    let _ = writeln!(out, "%%tau_ref {}", spec.tau_ref());
    let _ = writeln!(out, "%%steps");
    for s in spec.grid().steps() {
        let _ = writeln!(out, "{s}");
    }
    for (id, m) in bases.iter().enumerate() {
        let _ = writeln!(out, "%%matrix {id} {}", m.nnz_upper());
        for (i, j, v) in m.upper_entries() {
            let _ = writeln!(out, "{} {} {v}", i + 1, j + 1);
        }
    }
    let _ = writeln!(out, "%%mass {mass_id}");
    let _ = writeln!(out, "%%stiffness");
    for (id, a) in stiff_ids.iter().zip(spec.stiffness()) {
        let _ = writeln!(out, "{id} {}", a.scale);
    }
    let _ = writeln!(out, "%%reference {ref_id} {}", spec.a_ref().scale);
    let _ = writeln!(out, "%%initial");
    for v in spec.initial() {
        let _ = writeln!(out, "{v}");
    }
    for (n, f) in spec.loads().iter().enumerate() {
        let _ = writeln!(out, "%%load {}", n + 1);
        for v in f {
            let _ = writeln!(out, "{v}");
        }
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Option<(usize, &'a str)> {
        for (no, line) in self.inner.by_ref() {
            let t = line.trim();
            if t.is_empty() || (t.starts_with('%') && !t.starts_with("%%")) {
                continue;
            }
            return Some((no + 1, t));
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.next_line()
            .ok_or_else(|| Error::Parse { line: 0, message: format!("unexpected end of input, expected {what}") })
    }
}

fn parse<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse { line, message: format!("expected {what}") })
}

fn read_values(lines: &mut Lines<'_>, count: usize) -> Result<Vec<f64>> {
    (0..count)
        .map(|_| {
            let (no, l) = lines.expect("a value")?;
            parse(Some(l), no, "a real value")
        })
        .collect()
}

pub fn read_problem(text: &str) -> Result<ProblemSpec> {
    let mut lines = Lines { inner: text.lines().enumerate().peekable() };
    let (no, head) = lines.expect("header")?;
    if head != MAGIC {
        return Err(Error::Parse { line: no, message: format!("expected '{MAGIC}'") });
    }
    let (no, sizes) = lines.expect("sizes")?;
    let mut it = sizes.split_whitespace();
    let dim: usize = parse(it.next(), no, "dim")?;
    let steps: usize = parse(it.next(), no, "steps")?;
    let nmat: usize = parse(it.next(), no, "matrix count")?;

    let mut mesh = None;
    let mut tau_ref = None;
    let mut step_lengths = None;
    let mut matrices: HashMap<usize, Arc<SpatialMatrix>> = HashMap::new();
    let mut mass = None;
    let mut stiffness: Option<Vec<(usize, f64)>> = None;
    let mut reference = None;
    let mut initial = None;
    let mut loads: Vec<Option<Vec<f64>>> = vec![None; steps];

    while let Some((no, line)) = lines.next_line() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("%%mesh") => {
                let space = match tok.next() {
                    Some("1d") => Space::OneD,
                    Some("2d") => Space::TwoD,
                    _ => return Err(Error::Parse { line: no, message: "mesh space must be 1d or 2d".into() }),
                };
                mesh = Some(Mesh::new(space, parse(tok.next(), no, "cells")?)?);
            }
            Some("%%tau_ref") => tau_ref = Some(parse::<f64>(tok.next(), no, "tau_ref")?),
            Some("%%steps") => step_lengths = Some(read_values(&mut lines, steps)?),
            Some("%%matrix") => {
                let id: usize = parse(tok.next(), no, "matrix id")?;
                let nnz: usize = parse(tok.next(), no, "nnz")?;
                let mut triplets = Vec::with_capacity(nnz);
                for _ in 0..nnz {
                    let (no, l) = lines.expect("a matrix entry")?;
                    let mut t = l.split_whitespace();
                    let i: usize = parse(t.next(), no, "row")?;
                    let j: usize = parse(t.next(), no, "column")?;
                    let v: f64 = parse(t.next(), no, "value")?;
                    if i == 0 || j == 0 || i > j {
                        return Err(Error::Parse { line: no, message: "entries must be 1-based with i <= j".into() });
                    }
                    triplets.push((i - 1, j - 1, v));
                }
                matrices.insert(id, Arc::new(SpatialMatrix::from_triplets(dim, &triplets)?));
            }
            Some("%%mass") => mass = Some(parse::<usize>(tok.next(), no, "mass id")?),
            Some("%%stiffness") => {
                let mut entries = Vec::with_capacity(steps);
                for _ in 0..steps {
                    let (no, l) = lines.expect("a stiffness entry")?;
                    let mut t = l.split_whitespace();
                    entries.push((parse(t.next(), no, "matrix id")?, parse(t.next(), no, "scale")?));
                }
                stiffness = Some(entries);
            }
            Some("%%reference") => {
                reference = Some((parse::<usize>(tok.next(), no, "matrix id")?, parse::<f64>(tok.next(), no, "scale")?))
            }
            Some("%%initial") => initial = Some(read_values(&mut lines, dim)?),
            Some("%%load") => {
                let n: usize = parse(tok.next(), no, "load index")?;
                if n == 0 || n > steps {
                    return Err(Error::Parse { line: no, message: format!("load index {n} out of range") });
                }
                loads[n - 1] = Some(read_values(&mut lines, dim)?);
            }
            _ => return Err(Error::Parse { line: no, message: format!("unexpected line '{line}'") }),
        }
    }

    if matrices.len() != nmat {
        return Err(Error::Parse { line: 0, message: format!("expected {nmat} matrices, found {}", matrices.len()) });
    }
    let missing = |what: &str| Error::Parse { line: 0, message: format!("missing section {what}") };
    let lookup = |id: usize| {
        matrices
            .get(&id)
            .cloned()
            .ok_or_else(|| Error::Parse { line: 0, message: format!("unknown matrix id {id}") })
    };
    let mass = lookup(mass.ok_or_else(|| missing("%%mass"))?)?;
    let stiffness = stiffness
        .ok_or_else(|| missing("%%stiffness"))?
        .into_iter()
        .map(|(id, s)| Ok(ScaledMatrix::new(s, lookup(id)?)))
        .collect::<Result<Vec<_>>>()?;
    let (ref_id, ref_scale) = reference.ok_or_else(|| missing("%%reference"))?;
    let loads = loads
        .into_iter()
        .map(|l| l.ok_or_else(|| missing("%%load")))
        .collect::<Result<Vec<_>>>()?;
    let grid = TimeGrid::from_steps(step_lengths.ok_or_else(|| missing("%%steps"))?)?;
    let spec = ProblemSpec::new(
        mass,
        stiffness,
        grid,
        loads,
        initial.ok_or_else(|| missing("%%initial"))?,
        tau_ref.ok_or_else(|| missing("%%tau_ref"))?,
        ScaledMatrix::new(ref_scale, lookup(ref_id)?),
    )?;
    match mesh {
        Some(m) => spec.with_mesh(m),
        None => Ok(spec),
    }
}
