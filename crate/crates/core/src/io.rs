//! File formats: Matrix Market ingestion and emission, JSON problem and
//! structure descriptions, CSV iteration traces, JSON run summaries, and
//! warm-start factor files.

use crate::error::{Error, Result};
use crate::linalg::matrix::{Dense, Sparse};
use crate::linalg::{ComplexMatrix, TargetSelector};
use crate::objective::ObjectiveKind;
use crate::outer::OuterTrace;
use crate::scalar::{cast, C, Real};
use crate::solver::{SolverConfig, Trace};
use crate::structure::{FieldKind, StructureSpace};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

// ---------------------------------------------------------------------------
// Matrix Market
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum MmFormat {
    Coordinate,
    Array,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum MmField {
    Real,
    Complex,
    Integer,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum MmSymmetry {
    General,
    Symmetric,
    SkewSymmetric,
    Hermitian,
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Reads a Matrix Market file. Coordinate bodies yield the sparse layout,
/// array bodies the dense one; symmetric/skew-symmetric/hermitian storage is
/// expanded to general storage and 1-based indices become 0-based.
pub fn read_matrix_market<T: Real>(path: impl AsRef<Path>) -> Result<ComplexMatrix<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    // Header line.
    let (mut lineno, header) = match lines.next() {
        Some((i, Ok(l))) => (i + 1, l),
        Some((i, Err(e))) => return Err(Error::io(format!("{}:{}", path.display(), i + 1), e)),
        None => return Err(parse_err(path, 1, "empty file")),
    };
    let header_tokens: Vec<String> = header.split_whitespace().map(|t| t.to_lowercase()).collect();
    if header_tokens.len() != 5 || header_tokens[0] != "%%matrixmarket" {
        return Err(parse_err(path, 1, format!("malformed header: {header}")));
    }
    if header_tokens[1] != "matrix" {
        return Err(parse_err(path, 1, format!("unsupported object: {}", header_tokens[1])));
    }
    let format = match header_tokens[2].as_str() {
        "coordinate" => MmFormat::Coordinate,
        "array" => MmFormat::Array,
        other => return Err(parse_err(path, 1, format!("unsupported format: {other}"))),
    };
    let field = match header_tokens[3].as_str() {
        "real" => MmField::Real,
        "complex" => MmField::Complex,
        "integer" => MmField::Integer,
        other => return Err(parse_err(path, 1, format!("unsupported field: {other}"))),
    };
    let symmetry = match header_tokens[4].as_str() {
        "general" => MmSymmetry::General,
        "symmetric" => MmSymmetry::Symmetric,
        "skew-symmetric" => MmSymmetry::SkewSymmetric,
        "hermitian" => MmSymmetry::Hermitian,
        other => return Err(parse_err(path, 1, format!("unsupported symmetry: {other}"))),
    };

    // Size line (skipping comments).
    let size_line = loop {
        match lines.next() {
            Some((i, Ok(l))) => {
                lineno = i + 1;
                let trimmed = l.trim().to_string();
                if trimmed.is_empty() || trimmed.starts_with('%') {
                    continue;
                }
                break trimmed;
            }
            Some((i, Err(e))) => {
                return Err(Error::io(format!("{}:{}", path.display(), i + 1), e))
            }
            None => return Err(parse_err(path, lineno, "missing size line")),
        }
    };
    let dims: Vec<&str> = size_line.split_whitespace().collect();
    let want_dims = if format == MmFormat::Coordinate { 3 } else { 2 };
    if dims.len() != want_dims {
        return Err(parse_err(
            path,
            lineno,
            format!("size line needs {want_dims} fields, got {}", dims.len()),
        ));
    }
    let parse_usize = |tok: &str, what: &str, line: usize| -> Result<usize> {
        tok.parse::<usize>()
            .map_err(|_| parse_err(path, line, format!("bad {what}: {tok}")))
    };
    let nrows = parse_usize(dims[0], "row count", lineno)?;
    let ncols = parse_usize(dims[1], "column count", lineno)?;

    let parse_f = |tok: &str, line: usize| -> Result<f64> {
        tok.parse::<f64>()
            .map_err(|_| parse_err(path, line, format!("bad numeric value: {tok}")))
    };

    match format {
        MmFormat::Coordinate => {
            let nnz = parse_usize(dims[2], "entry count", lineno)?;
            let mut entries: Vec<(usize, usize, C<T>)> = Vec::with_capacity(nnz);
            let mut seen = 0usize;
            for (i, line) in lines {
                let lineno = i + 1;
                let line = line.map_err(|e| Error::io(format!("{}:{lineno}", path.display()), e))?;
                let trimmed = line.trim();
                if trimmed.is_empty() || trimmed.starts_with('%') {
                    continue;
                }
                let toks: Vec<&str> = trimmed.split_whitespace().collect();
                let want = match field {
                    MmField::Complex => 4,
                    _ => 3,
                };
                if toks.len() != want {
                    return Err(parse_err(
                        path,
                        lineno,
                        format!("entry needs {want} fields, got {}", toks.len()),
                    ));
                }
                seen += 1;
                if seen > nnz {
                    return Err(parse_err(
                        path,
                        lineno,
                        format!("more than the declared {nnz} entries"),
                    ));
                }
                let r = parse_usize(toks[0], "row index", lineno)?;
                let c = parse_usize(toks[1], "column index", lineno)?;
                if r == 0 || c == 0 || r > nrows || c > ncols {
                    return Err(parse_err(
                        path,
                        lineno,
                        format!("index ({r}, {c}) out of range for {nrows}x{ncols}"),
                    ));
                }
                let (re, im) = match field {
                    MmField::Complex => (parse_f(toks[2], lineno)?, parse_f(toks[3], lineno)?),
                    _ => (parse_f(toks[2], lineno)?, 0.0),
                };
                let v = C::new(cast::<T>(re), cast::<T>(im));
                let (r0, c0) = (r - 1, c - 1);
                entries.push((r0, c0, v));
                if r0 != c0 {
                    match symmetry {
                        MmSymmetry::General => {}
                        MmSymmetry::Symmetric => entries.push((c0, r0, v)),
                        MmSymmetry::SkewSymmetric => entries.push((c0, r0, -v)),
                        MmSymmetry::Hermitian => entries.push((c0, r0, v.conj())),
                    }
                } else if symmetry == MmSymmetry::SkewSymmetric && (re != 0.0 || im != 0.0) {
                    return Err(parse_err(
                        path,
                        lineno,
                        "skew-symmetric matrix with nonzero diagonal entry",
                    ));
                }
                if r0 == c0 && symmetry == MmSymmetry::Hermitian && im != 0.0 {
                    return Err(parse_err(
                        path,
                        lineno,
                        "hermitian matrix with non-real diagonal entry",
                    ));
                }
            }
            if seen != nnz {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("declared {nnz} entries but found {seen}"),
                ));
            }
            Sparse::from_triplets(nrows, ncols, entries)
                .map(ComplexMatrix::Sparse)
                .map_err(|e| match e {
                    Error::InvalidProblem(msg) => parse_err(path, 0, msg),
                    other => other,
                })
        }
        MmFormat::Array => {
            // Column-major list of values; symmetric variants store the
            // lower triangle by columns.
            let mut values: Vec<f64> = Vec::new();
            let mut last_line = lineno;
            for (i, line) in lines {
                last_line = i + 1;
                let line =
                    line.map_err(|e| Error::io(format!("{}:{last_line}", path.display()), e))?;
                let trimmed = line.trim();
                if trimmed.is_empty() || trimmed.starts_with('%') {
                    continue;
                }
                for tok in trimmed.split_whitespace() {
                    values.push(parse_f(tok, last_line)?);
                }
            }
            let per_entry = if field == MmField::Complex { 2 } else { 1 };
            let n_entries = match symmetry {
                MmSymmetry::General => nrows * ncols,
                _ => {
                    if nrows != ncols {
                        return Err(parse_err(path, 1, "symmetric array must be square"));
                    }
                    nrows * (nrows + 1) / 2
                }
            };
            if values.len() != n_entries * per_entry {
                return Err(parse_err(
                    path,
                    last_line,
                    format!(
                        "array body has {} numbers, expected {}",
                        values.len(),
                        n_entries * per_entry
                    ),
                ));
            }
            let mut m = Dense::<T>::zeros(nrows, ncols);
            let mut idx = 0usize;
            let mut next = || {
                let re = values[idx];
                let im = if per_entry == 2 { values[idx + 1] } else { 0.0 };
                idx += per_entry;
                C::new(cast::<T>(re), cast::<T>(im))
            };
            match symmetry {
                MmSymmetry::General => {
                    for j in 0..ncols {
                        for i in 0..nrows {
                            m[(i, j)] = next();
                        }
                    }
                }
                _ => {
                    for j in 0..ncols {
                        for i in j..nrows {
                            let v = next();
                            m[(i, j)] = v;
                            if i != j {
                                m[(j, i)] = match symmetry {
                                    MmSymmetry::Symmetric => v,
                                    MmSymmetry::SkewSymmetric => -v,
                                    MmSymmetry::Hermitian => v.conj(),
                                    MmSymmetry::General => unreachable!(),
                                };
                            }
                        }
                    }
                }
            }
            Ok(ComplexMatrix::Dense(m))
        }
    }
}

/// Writes a matrix in Matrix Market form: coordinate for sparse layouts,
/// array for dense ones; the field is real when all imaginary parts vanish.
pub fn write_matrix_market<T: Real>(path: impl AsRef<Path>, m: &ComplexMatrix<T>) -> Result<()> {
    let path = path.as_ref();
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?,
    );
    let w = |e: std::io::Error| Error::io(path.display().to_string(), e);
    let fmt = |v: T| -> String {
        // Shortest representation that round-trips exactly.
        format!("{:e}", v.to_f64().unwrap_or(0.0))
    };
    match m {
        ComplexMatrix::Sparse(s) => {
            let complex = s.entries().iter().any(|&(_, _, v)| v.im != T::zero());
            writeln!(
                out,
                "%%MatrixMarket matrix coordinate {} general",
                if complex { "complex" } else { "real" }
            )
            .map_err(w)?;
            writeln!(out, "{} {} {}", s.nrows(), s.ncols(), s.nnz()).map_err(w)?;
            for &(i, j, v) in s.entries() {
                if complex {
                    writeln!(out, "{} {} {} {}", i + 1, j + 1, fmt(v.re), fmt(v.im)).map_err(w)?;
                } else {
                    writeln!(out, "{} {} {}", i + 1, j + 1, fmt(v.re)).map_err(w)?;
                }
            }
        }
        ComplexMatrix::Dense(d) => {
            let complex = d.max_imag_abs() != T::zero();
            writeln!(
                out,
                "%%MatrixMarket matrix array {} general",
                if complex { "complex" } else { "real" }
            )
            .map_err(w)?;
            writeln!(out, "{} {}", d.nrows(), d.ncols()).map_err(w)?;
            for j in 0..d.ncols() {
                for i in 0..d.nrows() {
                    let v = d[(i, j)];
                    if complex {
                        writeln!(out, "{} {}", fmt(v.re), fmt(v.im)).map_err(w)?;
                    } else {
                        writeln!(out, "{}", fmt(v.re)).map_err(w)?;
                    }
                }
            }
        }
    }
    Ok(())
}

/// Sparsity-pattern structure from the stored nonzeros of a sparse matrix;
/// explicit zeros carry no perturbation freedom and are dropped.
pub fn derive_pattern<T: Real>(
    a: &ComplexMatrix<T>,
    field: FieldKind,
) -> Result<StructureSpace<T>> {
    let s = match a {
        ComplexMatrix::Sparse(s) => s,
        ComplexMatrix::Dense(_) => {
            return Err(Error::InvalidProblem(
                "derive_pattern needs the sparse layout".into(),
            ))
        }
    };
    let pattern: Vec<(usize, usize)> = s
        .entries()
        .iter()
        .filter(|&&(_, _, v)| v != crate::linalg::matrix::c_zero::<T>())
        .map(|&(i, j, _)| (i, j))
        .collect();
    StructureSpace::sparsity_pattern(s.nrows(), pattern, field)
}

// ---------------------------------------------------------------------------
// Problem and structure descriptions (JSON)
// ---------------------------------------------------------------------------

/// JSON description of a structure space: kind, field, plus the pattern or
/// the B/C Matrix Market paths for the range/co-range class.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StructureSpecFile {
    pub kind: String,
    #[serde(default)]
    pub field: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<Vec<(usize, usize)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<String>,
}

/// Execution mode of a problem file / CLI invocation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Psa,
    Psr,
    Dist2inst,
    Dist2sing,
    FixedEps,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Psa => "psa",
            Mode::Psr => "psr",
            Mode::Dist2inst => "dist2inst",
            Mode::Dist2sing => "dist2sing",
            Mode::FixedEps => "fixed-eps",
        }
    }

    pub fn is_nearness(self) -> bool {
        matches!(self, Mode::Dist2inst | Mode::Dist2sing)
    }
}

/// JSON problem description.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub matrix: String,
    pub structure: StructureSpecFile,
    pub mode: Mode,
    #[serde(default)]
    pub objective: Option<String>,
    #[serde(default)]
    pub selector: Option<String>,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub solver: Option<SolverOverrides>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SolverOverrides {
    #[serde(default)]
    pub h0: Option<f64>,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub tol_f: Option<f64>,
    #[serde(default)]
    pub tol_stat: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub min_h: Option<f64>,
}

impl SolverOverrides {
    pub fn apply<T: Real>(&self, cfg: &mut SolverConfig<T>) {
        if let Some(v) = self.h0 {
            cfg.h0 = cast(v);
        }
        if let Some(v) = self.theta {
            cfg.theta = cast(v);
        }
        if let Some(v) = self.tol_f {
            cfg.tol_f = cast(v);
        }
        if let Some(v) = self.tol_stat {
            cfg.tol_stat = cast(v);
        }
        if let Some(v) = self.max_iter {
            cfg.max_iter = v;
        }
        if let Some(v) = self.min_h {
            cfg.min_h = cast(v);
        }
    }
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        match self.mode {
            Mode::Psa | Mode::Psr | Mode::FixedEps => {
                if self.eps.is_none() {
                    return Err(Error::InvalidProblem(format!(
                        "mode {} requires eps",
                        self.mode.name()
                    )));
                }
            }
            Mode::Dist2inst | Mode::Dist2sing => {}
        }
        Ok(())
    }
}

pub fn read_problem_spec(path: impl AsRef<Path>) -> Result<ProblemSpec> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let spec: ProblemSpec = serde_json::from_str(&text)?;
    spec.validate()?;
    Ok(spec)
}

pub fn write_problem_spec(path: impl AsRef<Path>, spec: &ProblemSpec) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(spec)?;
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn parse_field(name: Option<&str>) -> Result<FieldKind> {
    match name.unwrap_or("real") {
        "real" | "real-linear" => Ok(FieldKind::RealLinear),
        "complex" | "complex-linear" => Ok(FieldKind::ComplexLinear),
        other => Err(Error::InvalidProblem(format!("unknown field: {other}"))),
    }
}

/// Parses "name" or "name:RE,IM" selector strings.
pub fn parse_selector<T: Real>(text: &str) -> Result<TargetSelector<T>> {
    let (name, point) = split_point(text)?;
    match name {
        "rightmost" => Ok(TargetSelector::Rightmost),
        "leftmost" => Ok(TargetSelector::Leftmost),
        "largest-modulus" => Ok(TargetSelector::LargestModulus),
        "smallest-modulus" => Ok(TargetSelector::SmallestModulus),
        "closest-to" => {
            let (re, im) = point.ok_or_else(|| {
                Error::InvalidProblem("closest-to needs a point: closest-to:RE,IM".into())
            })?;
            Ok(TargetSelector::ClosestTo(C::new(cast(re), cast(im))))
        }
        other => Err(Error::InvalidProblem(format!("unknown selector: {other}"))),
    }
}

/// Parses "name" or "name:RE,IM" objective strings.
pub fn parse_objective_kind<T: Real>(text: &str) -> Result<ObjectiveKind<T>> {
    let (name, point) = split_point(text)?;
    match name {
        "neg-real-part" => Ok(ObjectiveKind::NegRealPart),
        "real-part" => Ok(ObjectiveKind::RealPart),
        "modulus-squared" => Ok(ObjectiveKind::ModulusSquared),
        "neg-modulus-squared" => Ok(ObjectiveKind::NegModulusSquared),
        "distance-to-point-squared" => {
            let (re, im) = point.ok_or_else(|| {
                Error::InvalidProblem(
                    "distance-to-point-squared needs a point: ...:RE,IM".into(),
                )
            })?;
            Ok(ObjectiveKind::DistanceToPointSquared(C::new(
                cast(re),
                cast(im),
            )))
        }
        other => Err(Error::InvalidProblem(format!("unknown objective: {other}"))),
    }
}

fn split_point(text: &str) -> Result<(&str, Option<(f64, f64)>)> {
    match text.split_once(':') {
        None => Ok((text, None)),
        Some((name, pt)) => {
            let (re, im) = pt.split_once(',').ok_or_else(|| {
                Error::InvalidProblem(format!("point must be RE,IM in '{text}'"))
            })?;
            let re = re
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidProblem(format!("bad real part in '{text}'")))?;
            let im = im
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidProblem(format!("bad imaginary part in '{text}'")))?;
            Ok((name, Some((re, im))))
        }
    }
}

/// Builds a structure space from its JSON description. `a` supplies the
/// ambient size and, for kind "sparsity-of-input", the pattern; B/C paths
/// are resolved relative to `base`.
pub fn build_structure<T: Real>(
    file: &StructureSpecFile,
    a: &ComplexMatrix<T>,
    base: &Path,
) -> Result<StructureSpace<T>> {
    let field = parse_field(file.field.as_deref())?;
    let n = a.nrows();
    match file.kind.as_str() {
        "sparsity-of-input" => derive_pattern(a, field),
        "sparsity-pattern" => {
            let pattern = file.pattern.clone().ok_or_else(|| {
                Error::InvalidProblem("sparsity-pattern needs a pattern list".into())
            })?;
            StructureSpace::sparsity_pattern(n, pattern, field)
        }
        "toeplitz" => Ok(StructureSpace::toeplitz(n, field)),
        "hankel" => Ok(StructureSpace::hankel(n, field)),
        "hamiltonian" => StructureSpace::hamiltonian(n),
        "range-corange" => {
            let bp = file
                .b
                .as_ref()
                .ok_or_else(|| Error::InvalidProblem("range-corange needs b".into()))?;
            let cp = file
                .c
                .as_ref()
                .ok_or_else(|| Error::InvalidProblem("range-corange needs c".into()))?;
            let b = read_matrix_market::<T>(base.join(bp))?.to_dense();
            let c = read_matrix_market::<T>(base.join(cp))?.to_dense();
            StructureSpace::range_corange(&b, &c, field)
        }
        "full" => Ok(StructureSpace::full(n, field)),
        other => Err(Error::InvalidProblem(format!(
            "unknown structure kind: {other}"
        ))),
    }
}

// ---------------------------------------------------------------------------
// Traces and summaries
// ---------------------------------------------------------------------------

/// Writes the inner trace: one row per evaluated trial step.
pub fn write_inner_trace_csv<T: Real>(path: impl AsRef<Path>, trace: &Trace<T>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::InvalidProblem(format!("csv open {}: {e}", path.display())))?;
    w.write_record(["k", "t", "re_lambda", "im_lambda", "f", "h", "g", "accepted"])
        .map_err(|e| Error::InvalidProblem(format!("csv write: {e}")))?;
    let f = |x: T| format!("{:e}", x.to_f64().unwrap_or(f64::NAN));
    for row in &trace.rows {
        w.write_record([
            row.k.to_string(),
            f(row.t),
            f(row.lambda.re),
            f(row.lambda.im),
            f(row.f),
            f(row.h),
            f(row.g),
            (row.accepted as u8).to_string(),
        ])
        .map_err(|e| Error::InvalidProblem(format!("csv write: {e}")))?;
    }
    w.flush()
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

/// Parsed-back inner trace row (used by trace-plot-data).
#[derive(Clone, Debug)]
pub struct InnerTraceRow {
    pub k: usize,
    pub t: f64,
    pub re_lambda: f64,
    pub im_lambda: f64,
    pub f: f64,
    pub h: f64,
    pub g: f64,
    pub accepted: bool,
}

pub fn read_inner_trace_csv(path: impl AsRef<Path>) -> Result<Vec<InnerTraceRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::InvalidProblem(format!("csv open {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(path, i + 2, format!("csv: {e}")))?;
        if rec.len() != 8 {
            return Err(parse_err(path, i + 2, "expected 8 columns"));
        }
        let pf = |idx: usize| -> Result<f64> {
            rec[idx]
                .parse::<f64>()
                .map_err(|_| parse_err(path, i + 2, format!("bad number: {}", &rec[idx])))
        };
        rows.push(InnerTraceRow {
            k: rec[0]
                .parse()
                .map_err(|_| parse_err(path, i + 2, "bad k"))?,
            t: pf(1)?,
            re_lambda: pf(2)?,
            im_lambda: pf(3)?,
            f: pf(4)?,
            h: pf(5)?,
            g: pf(6)?,
            accepted: &rec[7] == "1",
        });
    }
    Ok(rows)
}

/// Writes the outer trace: one row per outer evaluation.
pub fn write_outer_trace_csv<T: Real>(
    path: impl AsRef<Path>,
    trace: &OuterTrace<T>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::InvalidProblem(format!("csv open {}: {e}", path.display())))?;
    w.write_record(["k", "eps", "phi", "dphi", "n_eig", "step_type"])
        .map_err(|e| Error::InvalidProblem(format!("csv write: {e}")))?;
    let f = |x: T| format!("{:e}", x.to_f64().unwrap_or(f64::NAN));
    for row in &trace.rows {
        w.write_record([
            row.k.to_string(),
            f(row.eps),
            f(row.phi),
            row.dphi.map(&f).unwrap_or_default(),
            row.n_eig.to_string(),
            row.step.name().to_string(),
        ])
        .map_err(|e| Error::InvalidProblem(format!("csv write: {e}")))?;
    }
    w.flush()
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

/// Warm-start factors: u and v as interleaved re/im arrays plus rho.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FactorsFile {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub rho: f64,
}

pub fn write_factors_json<T: Real>(
    path: impl AsRef<Path>,
    u: &[C<T>],
    v: &[C<T>],
    rho: T,
) -> Result<()> {
    let path = path.as_ref();
    let inter = |w: &[C<T>]| -> Vec<f64> {
        w.iter()
            .flat_map(|z| [z.re.to_f64().unwrap_or(0.0), z.im.to_f64().unwrap_or(0.0)])
            .collect()
    };
    let file = FactorsFile {
        u: inter(u),
        v: inter(v),
        rho: rho.to_f64().unwrap_or(0.0),
    };
    let text = serde_json::to_string(&file)?;
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_factors_json<T: Real>(path: impl AsRef<Path>) -> Result<(Vec<C<T>>, Vec<C<T>>, T)> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let file: FactorsFile = serde_json::from_str(&text)?;
    let de = |w: &[f64]| -> Result<Vec<C<T>>> {
        if w.len() % 2 != 0 {
            return Err(Error::InvalidProblem(
                "factor array must interleave re/im pairs".into(),
            ));
        }
        Ok(w.chunks(2).map(|p| C::new(cast(p[0]), cast(p[1]))).collect())
    };
    Ok((de(&file.u)?, de(&file.v)?, cast(file.rho)))
}

/// Self-describing run summary; all effective settings are echoed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: String,
    pub matrix: String,
    pub structure: String,
    pub field: String,
    pub objective: String,
    pub selector: String,
    pub n: usize,
    pub structure_dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    pub f_star: f64,
    pub lambda_re: f64,
    pub lambda_im: f64,
    /// Mode-specific headline value: the pseudospectral abscissa/radius or
    /// the computed distance.
    pub result_value: f64,
    pub n_eig: usize,
    pub status: String,
    pub monotone: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stationarity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tangent_residual: Option<f64>,
    pub solver: SolverEcho,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverEcho {
    pub h0: f64,
    pub theta: f64,
    pub tol_f: f64,
    pub tol_stat: f64,
    pub max_iter: usize,
    pub min_h: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warm_start: Option<bool>,
}

impl SolverEcho {
    pub fn from_config<T: Real>(cfg: &SolverConfig<T>) -> Self {
        let f = |x: T| x.to_f64().unwrap_or(f64::NAN);
        SolverEcho {
            h0: f(cfg.h0),
            theta: f(cfg.theta),
            tol_f: f(cfg.tol_f),
            tol_stat: f(cfg.tol_stat),
            max_iter: cfg.max_iter,
            min_h: f(cfg.min_h),
            tol_r: None,
            tol_eps: None,
            warm_start: None,
        }
    }
}

pub fn write_summary_json(path: impl AsRef<Path>, summary: &RunSummary) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(summary)?;
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Everything a finished (or partially finished) run may emit.
pub struct RunArtifacts<'a, T: Real> {
    pub summary: &'a RunSummary,
    pub inner_trace: &'a Trace<T>,
    /// Present only for the nearness modes.
    pub outer_trace: Option<&'a OuterTrace<T>>,
    pub e_star: Option<&'a ComplexMatrix<T>>,
    pub factors: Option<(&'a [C<T>], &'a [C<T>], T)>,
}

/// Writes the standard output set into `dir` and returns the paths written:
/// summary.json, inner_trace.csv, outer_trace.csv (nearness modes only),
/// e_star.mtx and factors.json (when available).
pub fn write_results<T: Real>(dir: impl AsRef<Path>, art: &RunArtifacts<'_, T>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut written = Vec::new();

    let p = dir.join("summary.json");
    write_summary_json(&p, art.summary)?;
    written.push(p);

    let p = dir.join("inner_trace.csv");
    write_inner_trace_csv(&p, art.inner_trace)?;
    written.push(p);

    if let Some(outer) = art.outer_trace {
        let p = dir.join("outer_trace.csv");
        write_outer_trace_csv(&p, outer)?;
        written.push(p);
    }
    if let Some(e) = art.e_star {
        let p = dir.join("e_star.mtx");
        write_matrix_market(&p, e)?;
        written.push(p);
    }
    if let Some((u, v, rho)) = art.factors {
        let p = dir.join("factors.json");
        write_factors_json(&p, u, v, rho)?;
        written.push(p);
    }
    Ok(written)
}

/// Plot-ready monotone-decay data: accepted steps only, as k, t, f columns.
pub fn write_plot_data(path: impl AsRef<Path>, rows: &[InnerTraceRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::InvalidProblem(format!("csv open {}: {e}", path.display())))?;
    w.write_record(["k", "t", "f"])
        .map_err(|e| Error::InvalidProblem(format!("csv write: {e}")))?;
    for row in rows.iter().filter(|r| r.accepted) {
        w.write_record([
            row.k.to_string(),
            format!("{:e}", row.t),
            format!("{:e}", row.f),
        ])
        .map_err(|e| Error::InvalidProblem(format!("csv write: {e}")))?;
    }
    w.flush()
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::TraceRow;

    fn c(re: f64, im: f64) -> C<f64> {
        C::new(re, im)
    }

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write as _;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn coordinate_real_diagonal() {
        let f = write_tmp(
            "%%MatrixMarket matrix coordinate real general\n% a comment\n2 2 2\n1 1 1.0\n2 2 2.0\n",
        );
        let m = read_matrix_market::<f64>(f.path()).unwrap();
        assert_eq!(m.nrows(), 2);
        assert_eq!(m.get(0, 0), c(1.0, 0.0));
        assert_eq!(m.get(1, 1), c(2.0, 0.0));
        assert_eq!(m.get(0, 1), c(0.0, 0.0));
    }

    #[test]
    fn coordinate_complex_entry_sign() {
        let f = write_tmp("%%MatrixMarket matrix coordinate complex general\n2 2 1\n1 2 3.0 -4.0\n");
        let m = read_matrix_market::<f64>(f.path()).unwrap();
        assert_eq!(m.get(0, 1), c(3.0, -4.0));
    }

    #[test]
    fn symmetric_and_skew_expansion() {
        let f = write_tmp(
            "%%MatrixMarket matrix coordinate real symmetric\n3 3 2\n2 1 5.0\n3 3 1.0\n",
        );
        let m = read_matrix_market::<f64>(f.path()).unwrap();
        assert_eq!(m.get(1, 0), c(5.0, 0.0));
        assert_eq!(m.get(0, 1), c(5.0, 0.0));
        let f = write_tmp(
            "%%MatrixMarket matrix coordinate real skew-symmetric\n3 3 1\n3 1 2.0\n",
        );
        let m = read_matrix_market::<f64>(f.path()).unwrap();
        assert_eq!(m.get(2, 0), c(2.0, 0.0));
        assert_eq!(m.get(0, 2), c(-2.0, 0.0));
    }

    #[test]
    fn array_body_is_column_major() {
        let f = write_tmp("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n");
        let m = read_matrix_market::<f64>(f.path()).unwrap();
        let d = m.to_dense();
        assert_eq!(d[(0, 0)], c(1.0, 0.0));
        assert_eq!(d[(1, 0)], c(2.0, 0.0));
        assert_eq!(d[(0, 1)], c(3.0, 0.0));
        assert_eq!(d[(1, 1)], c(4.0, 0.0));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad_header = write_tmp("%%MatrixMarket tensor coordinate real general\n1 1 0\n");
        match read_matrix_market::<f64>(bad_header.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
        let oob = write_tmp("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n");
        match read_matrix_market::<f64>(oob.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        let count = write_tmp("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n");
        match read_matrix_market::<f64>(count.path()) {
            Err(Error::Parse { msg, .. }) => assert!(msg.contains("declared 2")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn round_trip_preserves_entries_exactly() {
        let mut rng = crate::linalg::random::Rng64::seeded(10);
        let s = crate::linalg::random::sparse_real::<f64>(12, 0.2, &mut rng);
        let m = ComplexMatrix::Sparse(s);
        let f = tempfile::NamedTempFile::new().unwrap();
        write_matrix_market(f.path(), &m).unwrap();
        let back = read_matrix_market::<f64>(f.path()).unwrap();
        assert_eq!(m, back);
        // Complex dense round trip.
        let d = crate::linalg::random::dense_complex::<f64>(5, 3, &mut rng);
        let m = ComplexMatrix::Dense(d);
        let f = tempfile::NamedTempFile::new().unwrap();
        write_matrix_market(f.path(), &m).unwrap();
        let back = read_matrix_market::<f64>(f.path()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn derive_pattern_drops_explicit_zeros() {
        let s = Sparse::from_triplets(
            2,
            2,
            vec![(0, 0, c(1.0, 0.0)), (1, 1, c(2.0, 0.0)), (0, 1, c(0.0, 0.0))],
        )
        .unwrap();
        let sp = derive_pattern(&ComplexMatrix::Sparse(s), FieldKind::RealLinear).unwrap();
        assert_eq!(sp.pattern().unwrap(), &[(0, 0), (1, 1)]);
        assert_eq!(sp.dim(), 2);
        // Empty matrix gives an empty pattern.
        let empty = ComplexMatrix::Sparse(Sparse::<f64>::zeros(3, 3));
        let sp = derive_pattern(&empty, FieldKind::RealLinear).unwrap();
        assert_eq!(sp.dim(), 0);
    }

    #[test]
    fn problem_spec_round_trip_and_validation() {
        let spec = ProblemSpec {
            matrix: "a.mtx".into(),
            structure: StructureSpecFile {
                kind: "sparsity-of-input".into(),
                field: Some("real".into()),
                pattern: None,
                b: None,
                c: None,
            },
            mode: Mode::Psa,
            objective: Some("neg-real-part".into()),
            selector: Some("rightmost".into()),
            eps: Some(1.0),
            r: None,
            solver: None,
        };
        let f = tempfile::NamedTempFile::new().unwrap();
        write_problem_spec(f.path(), &spec).unwrap();
        let back = read_problem_spec(f.path()).unwrap();
        assert_eq!(back.mode, Mode::Psa);
        assert_eq!(back.eps, Some(1.0));

        let invalid = ProblemSpec {
            eps: None,
            ..spec
        };
        assert!(invalid.validate().is_err());
    }

    #[test]
    fn selector_and_objective_parsing() {
        assert!(matches!(
            parse_selector::<f64>("rightmost").unwrap(),
            TargetSelector::Rightmost
        ));
        match parse_selector::<f64>("closest-to:1.5,-2.0").unwrap() {
            TargetSelector::ClosestTo(z) => assert_eq!(z, c(1.5, -2.0)),
            other => panic!("{other:?}"),
        }
        assert!(parse_selector::<f64>("nearest").is_err());
        assert!(matches!(
            parse_objective_kind::<f64>("neg-modulus-squared").unwrap(),
            ObjectiveKind::NegModulusSquared
        ));
        assert!(parse_objective_kind::<f64>("distance-to-point-squared").is_err());
    }

    #[test]
    fn trace_csv_round_trip_and_plot_data() {
        let trace = Trace {
            rows: vec![
                TraceRow {
                    k: 0,
                    t: 0.0,
                    lambda: c(-1.0, 0.5),
                    f: 1.0,
                    h: 0.1,
                    g: 0.0,
                    accepted: true,
                },
                TraceRow {
                    k: 1,
                    t: 0.0,
                    lambda: c(-1.1, 0.4),
                    f: 1.2,
                    h: 0.1,
                    g: 2.0,
                    accepted: false,
                },
                TraceRow {
                    k: 1,
                    t: 0.066,
                    lambda: c(-1.2, 0.3),
                    f: 0.8,
                    h: 0.066,
                    g: 2.0,
                    accepted: true,
                },
            ],
            factors: vec![],
        };
        let f = tempfile::NamedTempFile::new().unwrap();
        write_inner_trace_csv(f.path(), &trace).unwrap();
        let rows = read_inner_trace_csv(f.path()).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1].accepted, false);
        assert_eq!(rows[2].f, 0.8);
        let pf = tempfile::NamedTempFile::new().unwrap();
        write_plot_data(pf.path(), &rows).unwrap();
        let text = std::fs::read_to_string(pf.path()).unwrap();
        let lines: Vec<&str> = text.trim().lines().collect();
        assert_eq!(lines.len(), 3, "header + 2 accepted rows: {text}");
    }

    #[test]
    fn factors_json_round_trip() {
        let u = vec![c(0.6, -0.1), c(0.0, 0.79)];
        let v = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let f = tempfile::NamedTempFile::new().unwrap();
        write_factors_json(f.path(), &u, &v, 1.25).unwrap();
        let (u2, v2, rho) = read_factors_json::<f64>(f.path()).unwrap();
        assert_eq!(u, u2);
        assert_eq!(v, v2);
        assert_eq!(rho, 1.25);
    }

    #[test]
    fn write_results_mode_contract() {
        let dir = tempfile::tempdir().unwrap();
        let trace = Trace::<f64> {
            rows: vec![],
            factors: vec![],
        };
        let summary = RunSummary {
            mode: "psa".into(),
            matrix: "a.mtx".into(),
            structure: "sparsity-pattern".into(),
            field: "real".into(),
            objective: "neg-real-part".into(),
            selector: "rightmost".into(),
            n: 2,
            structure_dim: 2,
            eps: Some(1.0),
            eps_star: None,
            r: None,
            f_star: 0.5,
            lambda_re: -0.5,
            lambda_im: 0.0,
            result_value: -0.5,
            n_eig: 12,
            status: "converged".into(),
            monotone: true,
            stationarity: Some(1e-9),
            tangent_residual: Some(1e-9),
            solver: SolverEcho::from_config(&SolverConfig::<f64>::default()),
        };
        let e = ComplexMatrix::Sparse(
            Sparse::from_triplets(2, 2, vec![(0, 0, c(1.0, 0.0))]).unwrap(),
        );
        let u = vec![c(1.0, 0.0), c(0.0, 0.0)];
        // Fixed-eps: no outer trace.
        let written = write_results(
            dir.path().join("fixed"),
            &RunArtifacts {
                summary: &summary,
                inner_trace: &trace,
                outer_trace: None,
                e_star: Some(&e),
                factors: Some((&u, &u, 1.0)),
            },
        )
        .unwrap();
        let names: Vec<String> = written
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert!(names.contains(&"summary.json".to_string()));
        assert!(names.contains(&"inner_trace.csv".to_string()));
        assert!(names.contains(&"e_star.mtx".to_string()));
        assert!(names.contains(&"factors.json".to_string()));
        assert!(!names.contains(&"outer_trace.csv".to_string()));
        // Nearness: outer trace present with one row per outer iteration.
        let outer = OuterTrace {
            rows: vec![crate::outer::OuterRow {
                k: 0,
                eps: 0.1,
                phi: 0.5,
                dphi: Some(-1.0),
                n_eig: 13,
                step: crate::outer::OuterStepKind::Growth,
            }],
        };
        let written = write_results(
            dir.path().join("near"),
            &RunArtifacts {
                summary: &summary,
                inner_trace: &trace,
                outer_trace: Some(&outer),
                e_star: Some(&e),
                factors: None,
            },
        )
        .unwrap();
        let names: Vec<String> = written
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert!(names.contains(&"outer_trace.csv".to_string()));
        let text =
            std::fs::read_to_string(dir.path().join("near").join("outer_trace.csv")).unwrap();
        assert_eq!(text.trim().lines().count(), 2);
        assert!(text.contains("growth"));
    }

    #[test]
    fn summary_json_is_self_describing() {
        let summary = RunSummary {
            mode: "dist2sing".into(),
            matrix: "a.mtx".into(),
            structure: "sparsity-of-input".into(),
            field: "real".into(),
            objective: "modulus-squared".into(),
            selector: "smallest-modulus".into(),
            n: 10,
            structure_dim: 40,
            eps: None,
            eps_star: Some(0.026),
            r: Some(0.0),
            f_star: 1e-10,
            lambda_re: 1e-5,
            lambda_im: 0.0,
            result_value: 0.026,
            n_eig: 140,
            status: "converged".into(),
            monotone: true,
            stationarity: None,
            tangent_residual: None,
            solver: SolverEcho::from_config(&SolverConfig::<f64>::default()),
        };
        let f = tempfile::NamedTempFile::new().unwrap();
        write_summary_json(f.path(), &summary).unwrap();
        let text = std::fs::read_to_string(f.path()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["mode"], "dist2sing");
        assert_eq!(v["eps_star"], 0.026);
        // Defaults are echoed.
        assert_eq!(v["solver"]["theta"], 1.5);
        assert_eq!(v["solver"]["h0"], 0.1);
    }
}
