//! On-disk formats: trajectory CSV, basin raster CSV, the plain-text model
//! file, and JSON helpers that write NaN as `null`.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::basin::BasinGrid;
use crate::error::{Error, Result};
use crate::features::{MonomialBasis, CANONICAL_ORDERING};
use crate::types::{same_dt, FeatureConfig, LearnedOperator, Provenance, Trajectory};

pub const MODEL_MAGIC: &str = "nldm-model";
pub const MODEL_VERSION: u32 = 1;

/// 17 significant digits: enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(context: impl Into<String>) -> impl FnOnce(csv::Error) -> Error {
    let context = context.into();
    move |source| Error::Csv { context, source }
}

/// Writes `t,x1..xS`, one row per sample.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let ctx = format!("writing {}", path.display());
    let mut w = csv::Writer::from_path(path).map_err(csv_err(&ctx))?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=traj.state_dim()).map(|n| format!("x{n}")));
    w.write_record(&header).map_err(csv_err(&ctx))?;
    let mut row = Vec::with_capacity(traj.state_dim() + 1);
    for k in 0..traj.len() {
        row.clear();
        row.push(fmt_f64(traj.time(k)));
        row.extend(traj.state(k).iter().map(|&v| fmt_f64(v)));
        w.write_record(&row).map_err(csv_err(&ctx))?;
    }
    w.flush().map_err(|e| Error::io(ctx, e))
}

/// Reads a trajectory CSV. The time column must be uniform; `dt` and `t0`
/// are recovered from it.
pub fn read_trajectory_csv(path: &Path, provenance: Provenance) -> Result<Trajectory> {
    let ctx = format!("reading {}", path.display());
    let mut r = csv::Reader::from_path(path).map_err(csv_err(&ctx))?;
    let header = r.headers().map_err(csv_err(&ctx))?.clone();
    let s = header.len().saturating_sub(1);
    let expected: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=s).map(|n| format!("x{n}")))
        .collect();
    if s == 0 || header.iter().zip(&expected).any(|(a, b)| a.trim() != b) {
        return Err(Error::Incompatible(format!(
            "{}: expected header `t,x1..xS`, found `{}`",
            path.display(),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut times = Vec::new();
    let mut data = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(csv_err(&ctx))?;
        let parse = |field: &str| {
            field.trim().parse::<f64>().map_err(|_| {
                Error::Incompatible(format!(
                    "{}: row {} has non-numeric field `{field}`",
                    path.display(),
                    line + 2
                ))
            })
        };
        times.push(parse(&record[0])?);
        for field in record.iter().skip(1) {
            data.push(parse(field)?);
        }
    }
    if times.len() < 2 {
        return Err(Error::TooShort {
            index: 0,
            len: times.len(),
            needed: 2,
        });
    }
    let t0 = times[0];
    let dt = (times[times.len() - 1] - t0) / (times.len() - 1) as f64;
    for (k, pair) in times.windows(2).enumerate() {
        if !same_dt(pair[1] - pair[0], dt) {
            return Err(Error::Incompatible(format!(
                "{}: non-uniform sampling between rows {} and {}",
                path.display(),
                k + 2,
                k + 3
            )));
        }
    }
    Trajectory::from_flat(s, data, dt, t0, provenance)
}

/// Writes `x,y,label` with attractor names, `unresolved` or `diverged`.
pub fn write_basin_csv(path: &Path, grid: &BasinGrid) -> Result<()> {
    let ctx = format!("writing {}", path.display());
    let mut w = csv::Writer::from_path(path).map_err(csv_err(&ctx))?;
    w.write_record(["x", "y", "label"]).map_err(csv_err(&ctx))?;
    for (x, y, label) in grid.cells() {
        w.write_record([fmt_f64(x), fmt_f64(y), grid.label_name(label).to_string()])
            .map_err(csv_err(&ctx))?;
    }
    w.flush().map_err(|e| Error::io(ctx, e))
}

/// Plain-text model: a versioned header, then `lambda` and S rows of L
/// values each.
pub fn write_model(path: &Path, op: &LearnedOperator) -> Result<()> {
    let c = op.config();
    let mut out = String::new();
    out.push_str(&format!("{MODEL_MAGIC} {MODEL_VERSION}\n"));
    out.push_str(&format!("states {}\n", c.states()));
    out.push_str(&format!("delay {}\n", c.delay()));
    out.push_str(&format!("degree {}\n", c.degree()));
    out.push_str(&format!("features {}\n", c.dim()));
    out.push_str(&format!("dt {}\n", fmt_f64(op.dt())));
    out.push_str(&format!("ordering {CANONICAL_ORDERING}\n"));
    out.push_str("lambda\n");
    let lambda = canonical_lambda(op);
    for i in 0..lambda.nrows() {
        let row: Vec<String> = lambda.row(i).iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Columns of `Lambda` rearranged into the canonical monomial order.
fn canonical_lambda(op: &LearnedOperator) -> DMatrix<f64> {
    if op.basis().is_canonical() {
        return op.lambda().clone();
    }
    let canonical = MonomialBasis::new(op.config());
    let position: std::collections::HashMap<_, usize> =
        op.basis().monomials().iter().enumerate().map(|(j, m)| (m, j)).collect();
    let lambda = op.lambda();
    DMatrix::from_fn(lambda.nrows(), lambda.ncols(), |i, c| {
        lambda[(i, position[&canonical.monomials()[c]])]
    })
}

pub fn read_model(path: &Path) -> Result<LearnedOperator> {
    let bad = |message: String| Error::ModelFormat {
        path: path.to_path_buf(),
        message,
    };
    let file = fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut lines = BufReader::new(file).lines();
    let mut next = || -> Result<String> {
        match lines.next() {
            Some(Ok(l)) => Ok(l),
            Some(Err(e)) => Err(Error::io(format!("reading {}", path.display()), e)),
            None => Err(bad("unexpected end of file".into())),
        }
    };

    let magic = next()?;
    let mut parts = magic.split_whitespace();
    if parts.next() != Some(MODEL_MAGIC) {
        return Err(bad(format!("missing `{MODEL_MAGIC}` header")));
    }
    match parts.next().and_then(|v| v.parse::<u32>().ok()) {
        Some(MODEL_VERSION) => {}
        other => return Err(bad(format!("unsupported model version {other:?}"))),
    }

    let mut field = |name: &str| -> Result<String> {
        let line = next()?;
        match line.split_once(' ') {
            Some((key, value)) if key == name => Ok(value.trim().to_string()),
            _ => Err(bad(format!("expected `{name}`, found `{line}`"))),
        }
    };
    let int = |name: &str, v: String| {
        v.parse::<usize>()
            .map_err(|_| bad(format!("`{name}` is not a non-negative integer: `{v}`")))
    };
    let states = int("states", field("states")?)?;
    let delay = int("delay", field("delay")?)?;
    let degree = int("degree", field("degree")?)?;
    let features = int("features", field("features")?)?;
    let dt_text = field("dt")?;
    let dt = dt_text
        .parse::<f64>()
        .map_err(|_| bad(format!("`dt` is not a number: `{dt_text}`")))?;
    let ordering = field("ordering")?;
    if ordering != CANONICAL_ORDERING {
        return Err(bad(format!("unknown monomial ordering `{ordering}`")));
    }
    if next()?.trim() != "lambda" {
        return Err(bad("expected `lambda` before the coefficient rows".into()));
    }

    let config = FeatureConfig::new(states, delay, degree)?;
    if config.dim() != features {
        return Err(bad(format!(
            "header says {features} features but S={states}, d={delay}, o={degree} gives {}",
            config.dim()
        )));
    }
    let mut values = Vec::with_capacity(states * features);
    for i in 0..states {
        let line = next()?;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad(format!("row {i} of lambda has a non-numeric entry")))?;
        if row.len() != features {
            return Err(bad(format!(
                "row {i} of lambda has {} entries, expected {features}",
                row.len()
            )));
        }
        values.extend(row);
    }
    let lambda = DMatrix::from_row_slice(states, features, &values);
    LearnedOperator::new(lambda, MonomialBasis::new(config), dt)
}

/// Replaces non-finite numbers with `null` so the output is valid JSON.
pub fn json_number(v: f64) -> serde_json::Value {
    serde_json::Number::from_f64(v).map_or(serde_json::Value::Null, serde_json::Value::Number)
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let ctx = format!("writing {}", path.display());
    let mut f = fs::File::create(path).map_err(|e| Error::io(&ctx, e))?;
    serde_json::to_writer_pretty(&mut f, value)
        .map_err(|e| Error::io(&ctx, std::io::Error::other(e)))?;
    f.write_all(b"\n").map_err(|e| Error::io(ctx, e))
}
