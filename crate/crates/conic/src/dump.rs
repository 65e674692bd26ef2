//! Plain-text program dump for cross-checking against external solvers.
//!
//! ```text
//! conic-program v1
//! n_vars <n>
//! objective <const> <nnz>
//! <var> <coef>                      (nnz lines)
//! cones <count>
//! <zero|nonneg|soc|exp> <dim>        (count lines, in row order)
//! offsets <rows>
//! <value>                           (one per row)
//! triplets <nnz>
//! <row> <var> <coef>                 (row value = offset + Σ coef·x[var])
//! ```
//!
//! The objective is maximized. Floats use Rust's shortest round-trip form, so
//! a dump read back reproduces the program exactly (up to term merging).

use std::io::{BufRead, Write};

use crate::expr::{AffExpr, Var};
use crate::program::{Cone, ConicProgram};
use crate::ConicError;

const MAGIC: &str = "conic-program v1";

pub fn write_dump<W: Write>(prog: &ConicProgram, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "n_vars {}", prog.n_vars())?;
    let obj = prog.objective();
    writeln!(out, "objective {} {}", obj.constant, obj.terms.len())?;
    for (v, c) in &obj.terms {
        writeln!(out, "{} {}", v.0, c)?;
    }
    writeln!(out, "cones {}", prog.constraints().len())?;
    for c in prog.constraints() {
        writeln!(out, "{} {}", c.cone.tag(), c.cone.dim())?;
    }
    let rows: Vec<&AffExpr> = prog.constraints().iter().flat_map(|c| &c.rows).collect();
    writeln!(out, "offsets {}", rows.len())?;
    for r in &rows {
        writeln!(out, "{}", r.constant)?;
    }
    let nnz: usize = rows.iter().map(|r| r.terms.len()).sum();
    writeln!(out, "triplets {nnz}")?;
    for (i, r) in rows.iter().enumerate() {
        for (v, c) in &r.terms {
            writeln!(out, "{i} {} {c}", v.0)?;
        }
    }
    Ok(())
}

pub fn read_dump<R: BufRead>(input: R) -> Result<ConicProgram, ConicError> {
    let mut lines = input.lines().enumerate().map(|(i, l)| {
        l.map(|s| (i + 1, s))
            .map_err(|e| ConicError::Parse(format!("io error: {e}")))
    });
    let mut next = || -> Result<(usize, String), ConicError> {
        lines
            .next()
            .unwrap_or_else(|| Err(ConicError::Parse("unexpected end of dump".into())))
    };

    let (ln, magic) = next()?;
    if magic.trim() != MAGIC {
        return Err(ConicError::Parse(format!("line {ln}: bad header {magic:?}")));
    }
    let n_vars = header(&mut next, "n_vars")?[0].parse::<usize>().map_err(perr)?;
    let obj_head = header(&mut next, "objective")?;
    if obj_head.len() != 2 {
        return Err(ConicError::Parse("objective header needs constant and count".into()));
    }
    let mut objective = AffExpr::constant(obj_head[0].parse().map_err(perr)?);
    for _ in 0..obj_head[1].parse::<usize>().map_err(perr)? {
        let (ln, l) = next()?;
        let f = fields(&l, 2, ln)?;
        objective.add_term(Var(f[0].parse().map_err(perr)?), f[1].parse().map_err(perr)?);
    }
    let n_cones = header(&mut next, "cones")?[0].parse::<usize>().map_err(perr)?;
    let mut cones = Vec::with_capacity(n_cones);
    for _ in 0..n_cones {
        let (ln, l) = next()?;
        let f = fields(&l, 2, ln)?;
        let d: usize = f[1].parse().map_err(perr)?;
        cones.push(match f[0] {
            "zero" => Cone::Zero(d),
            "nonneg" => Cone::Nonnegative(d),
            "soc" => Cone::SecondOrder(d),
            "exp" if d == 3 => Cone::Exponential,
            other => {
                return Err(ConicError::Parse(format!("line {ln}: unknown cone {other} {d}")))
            }
        });
    }
    let n_rows = header(&mut next, "offsets")?[0].parse::<usize>().map_err(perr)?;
    let mut rows = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let (_, l) = next()?;
        rows.push(AffExpr::constant(l.trim().parse().map_err(perr)?));
    }
    let nnz = header(&mut next, "triplets")?[0].parse::<usize>().map_err(perr)?;
    for _ in 0..nnz {
        let (ln, l) = next()?;
        let f = fields(&l, 3, ln)?;
        let r: usize = f[0].parse().map_err(perr)?;
        let row = rows
            .get_mut(r)
            .ok_or_else(|| ConicError::Parse(format!("line {ln}: row {r} out of range")))?;
        row.add_term(Var(f[1].parse().map_err(perr)?), f[2].parse().map_err(perr)?);
    }

    let mut prog = ConicProgram::new();
    prog.add_vars(n_vars);
    prog.maximize(objective);
    let mut it = rows.into_iter();
    for cone in cones {
        let block: Vec<AffExpr> = it.by_ref().take(cone.dim()).collect();
        prog.add_constraint(cone, block);
    }
    if it.next().is_some() {
        return Err(ConicError::Parse("more rows than cone dimensions".into()));
    }
    prog.validate()?;
    Ok(prog)
}

fn header(
    next: &mut impl FnMut() -> Result<(usize, String), ConicError>,
    key: &str,
) -> Result<Vec<String>, ConicError> {
    let (ln, l) = next()?;
    let mut it = l.split_whitespace();
    if it.next() != Some(key) {
        return Err(ConicError::Parse(format!("line {ln}: expected `{key}`")));
    }
    let rest: Vec<String> = it.map(str::to_owned).collect();
    if rest.is_empty() {
        return Err(ConicError::Parse(format!("line {ln}: `{key}` needs a value")));
    }
    Ok(rest)
}

fn fields(l: &str, n: usize, ln: usize) -> Result<Vec<&str>, ConicError> {
    let f: Vec<&str> = l.split_whitespace().collect();
    if f.len() != n {
        return Err(ConicError::Parse(format!("line {ln}: expected {n} fields")));
    }
    Ok(f)
}

fn perr<E: std::fmt::Display>(e: E) -> ConicError {
    ConicError::Parse(e.to_string())
}
