//! Measure files.
//!
//! Atom lists are CSV with a header row `x1,...,xN,t,weight,sign`; the
//! dimension is read off the header. Gridded densities use a small
//! line-oriented text format, see [`parse_grid_density`].

use std::io::Write;
use std::path::Path;

use super::{GridDensity, MeasureError, Result, SignedMeasure, SpaceTimeAtom, SpaceTimeMeasure};
use crate::axes::{Axis, CellAxes, SpaceTimeAxes};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureFormat {
    /// Atom CSV. `dim` is only consulted for a zero-byte file, which has no
    /// header to read the dimension from.
    AtomsCsv { dim: Option<usize> },
    GridDensity,
}

pub fn load_measure(path: impl AsRef<Path>, format: MeasureFormat) -> Result<SignedMeasure> {
    let text = std::fs::read_to_string(path)?;
    match format {
        MeasureFormat::AtomsCsv { dim } => parse_atoms_csv(&text, dim),
        MeasureFormat::GridDensity => parse_grid_density(&text),
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> MeasureError {
    MeasureError::Parse { line, msg: msg.into() }
}

fn parse_sign(s: &str) -> Option<bool> {
    match s {
        "+" => Some(true),
        "-" | "\u{2212}" => Some(false),
        _ => None,
    }
}

pub fn parse_atoms_csv(text: &str, dim_hint: Option<usize>) -> Result<SignedMeasure> {
    if text.trim().is_empty() {
        return match dim_hint {
            Some(d) if d > 0 => Ok(SignedMeasure::zero(d)),
            _ => Err(parse_err(1, "empty file: no header to infer the dimension from")),
        };
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let cols = headers.len();
    if cols < 4 {
        return Err(parse_err(1, format!("header needs at least 4 columns, found {cols}")));
    }
    let dim = cols - 3;
    for k in 0..dim {
        let want = format!("x{}", k + 1);
        if headers[k] != want {
            return Err(parse_err(1, format!("column {} should be `{want}`, found `{}`", k + 1, &headers[k])));
        }
    }
    if &headers[dim] != "t" || &headers[dim + 1] != "weight" || &headers[dim + 2] != "sign" {
        return Err(parse_err(1, "header must end with `t,weight,sign`"));
    }
    if let Some(d) = dim_hint {
        if d != dim {
            return Err(MeasureError::DimensionMismatch { expected: d, found: dim });
        }
    }
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != cols {
            return Err(parse_err(line, format!("expected {cols} fields, found {}", rec.len())));
        }
        let mut nums = Vec::with_capacity(dim + 2);
        for field in rec.iter().take(dim + 2) {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("not a number: `{field}`")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("non-finite value `{field}`")));
            }
            nums.push(v);
        }
        let weight = nums[dim + 1];
        if !(weight > 0.0) {
            return Err(parse_err(line, format!("weight must be positive, found {weight}")));
        }
        let positive = parse_sign(&rec[dim + 2])
            .ok_or_else(|| parse_err(line, format!("sign must be + or -, found `{}`", &rec[dim + 2])))?;
        let atom = SpaceTimeAtom { position: nums[..dim].to_vec(), time: nums[dim], weight };
        if positive {
            plus.push(atom);
        } else {
            minus.push(atom);
        }
    }
    SignedMeasure::new(SpaceTimeMeasure::atoms(dim, plus)?, SpaceTimeMeasure::atoms(dim, minus)?)
}

pub fn write_atoms_csv<W: Write>(out: W, mu: &SignedMeasure) -> Result<()> {
    let dim = mu.dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=dim).map(|k| format!("x{k}")).collect();
    header.extend(["t".into(), "weight".into(), "sign".into()]);
    w.write_record(&header).map_err(csv_io)?;
    for (sign, part) in [("+", &mu.plus), ("-", &mu.minus)] {
        let mut atoms = Vec::new();
        part.collect_atoms(&mut atoms);
        for a in atoms {
            let mut row: Vec<String> = a.position.iter().map(|x| format!("{x:e}")).collect();
            row.push(format!("{:e}", a.time));
            row.push(format!("{:e}", a.weight));
            row.push(sign.into());
            w.write_record(&row).map_err(csv_io)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> MeasureError {
    MeasureError::Io(std::io::Error::other(e))
}

/// Parses the gridded-density format:
///
/// ```text
/// # pwolff grid-density v1
/// dim N
/// origin o1 ... oN t0
/// spacing h1 ... hN k
/// counts n1 ... nN nt
/// sign +
/// values
/// v v v ...
/// ```
///
/// Each `sign` line opens a block whose `values` list holds
/// `n1·…·nN·nt` nonnegative numbers, row-major with time slowest and the
/// last spatial index fastest. At most one block per sign; a missing sign
/// is the zero measure. Blank lines and `#` comments are ignored.
pub fn parse_grid_density(text: &str) -> Result<SignedMeasure> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .peekable();

    let mut dim = None;
    let mut origin = None;
    let mut spacing = None;
    let mut counts: Option<Vec<usize>> = None;
    let mut blocks: [Option<Vec<f64>>; 2] = [None, None];
    let mut current: Option<usize> = None;
    let mut in_values = false;

    let nums = |line: usize, toks: &[&str]| -> Result<Vec<f64>> {
        toks.iter()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(line, format!("bad number `{t}`")))
            })
            .collect()
    };

    while let Some((ln, l)) = lines.next() {
        let toks: Vec<&str> = l.split_whitespace().collect();
        let key = toks[0];
        if in_values && key.parse::<f64>().is_ok() {
            let vals = nums(ln, &toks)?;
            if let Some(v) = vals.iter().find(|v| **v < 0.0) {
                return Err(MeasureError::InvalidDensity(*v));
            }
            blocks[current.expect("values follow a sign")].as_mut().unwrap().extend(vals);
            continue;
        }
        in_values = false;
        match key {
            "dim" => {
                let d: usize = toks
                    .get(1)
                    .and_then(|t| t.parse().ok())
                    .filter(|d| *d > 0)
                    .ok_or_else(|| parse_err(ln, "dim needs a positive integer"))?;
                dim = Some(d);
            }
            "origin" => origin = Some(nums(ln, &toks[1..])?),
            "spacing" => spacing = Some(nums(ln, &toks[1..])?),
            "counts" => {
                counts = Some(
                    toks[1..]
                        .iter()
                        .map(|t| t.parse::<usize>().map_err(|_| parse_err(ln, format!("bad count `{t}`"))))
                        .collect::<Result<_>>()?,
                )
            }
            "sign" => {
                let s = toks.get(1).and_then(|s| parse_sign(s)).ok_or_else(|| parse_err(ln, "sign must be + or -"))?;
                let slot = if s { 0 } else { 1 };
                if blocks[slot].is_some() {
                    return Err(parse_err(ln, "duplicate sign block"));
                }
                blocks[slot] = Some(Vec::new());
                current = Some(slot);
            }
            "values" => {
                if current.is_none() {
                    return Err(parse_err(ln, "`values` before any `sign` line"));
                }
                in_values = true;
                if toks.len() > 1 {
                    let vals = nums(ln, &toks[1..])?;
                    if let Some(v) = vals.iter().find(|v| **v < 0.0) {
                        return Err(MeasureError::InvalidDensity(*v));
                    }
                    blocks[current.unwrap()].as_mut().unwrap().extend(vals);
                }
            }
            other => return Err(parse_err(ln, format!("unknown key `{other}`"))),
        }
    }

    let dim = dim.ok_or_else(|| parse_err(0, "missing `dim`"))?;
    let origin = origin.ok_or_else(|| parse_err(0, "missing `origin`"))?;
    let spacing = spacing.ok_or_else(|| parse_err(0, "missing `spacing`"))?;
    let counts = counts.ok_or_else(|| parse_err(0, "missing `counts`"))?;
    for (name, len) in [("origin", origin.len()), ("spacing", spacing.len()), ("counts", counts.len())] {
        if len != dim + 1 {
            return Err(parse_err(0, format!("`{name}` needs {} entries (N spatial + time), found {len}", dim + 1)));
        }
    }
    let space = CellAxes::new((0..dim).map(|k| Axis::new(origin[k], spacing[k], counts[k])).collect());
    let axes = SpaceTimeAxes::new(space, Axis::new(origin[dim], spacing[dim], counts[dim]));
    let [plus, minus] = blocks;
    let build = |vals: Option<Vec<f64>>| -> Result<SpaceTimeMeasure> {
        match vals {
            None => Ok(SpaceTimeMeasure::zero(dim)),
            Some(v) => Ok(SpaceTimeMeasure::grid(GridDensity::new(axes.clone(), v)?)),
        }
    };
    SignedMeasure::new(build(plus)?, build(minus)?)
}

/// Renders a grid density block in the format read by [`parse_grid_density`].
pub fn format_grid_density(plus: Option<&GridDensity>, minus: Option<&GridDensity>) -> String {
    let axes = match plus.or(minus) {
        Some(g) => &g.axes,
        None => return String::new(),
    };
    let join = |v: Vec<String>| v.join(" ");
    let mut s = String::from("# pwolff grid-density v1\n");
    s += &format!("dim {}\n", axes.dim());
    let all: Vec<&Axis> = axes.space.axes.iter().chain(std::iter::once(&axes.time)).collect();
    s += &format!("origin {}\n", join(all.iter().map(|a| format!("{:e}", a.origin)).collect()));
    s += &format!("spacing {}\n", join(all.iter().map(|a| format!("{:e}", a.spacing)).collect()));
    s += &format!("counts {}\n", join(all.iter().map(|a| a.count.to_string()).collect()));
    for (sign, g) in [("+", plus), ("-", minus)] {
        if let Some(g) = g {
            s += &format!("sign {sign}\nvalues\n");
            for chunk in g.values.chunks(axes.space.axes.last().map_or(1, |a| a.count.max(1))) {
                s += &join(chunk.iter().map(|v| format!("{v:e}")).collect());
                s.push('\n');
            }
        }
    }
    s
}
