//! File formats: grid fields as CSV and as a little-endian binary block,
//! contours and diagnostic tables as CSV.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use iamcf_core::flow::{GrowthSeries, MinimalityReport};
use iamcf_core::{Contour, FieldMeaning, Grid2, ScalarField};

use crate::error::{Error, Result};

/// Leading bytes of a binary field file.
pub const FIELD_MAGIC: [u8; 8] = *b"IAMCFLD1";

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Headers are written explicitly, so struct rows must not add their own.
fn headerless<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(headerless(create(path)?))
}

/// A CSV file whose first line is a `# key=value ...` comment.
fn commented_csv(path: &Path, comment: &str) -> Result<csv::Writer<BufWriter<File>>> {
    let mut out = create(path)?;
    writeln!(out, "# {comment}").map_err(|e| Error::io(path, e))?;
    Ok(headerless(out))
}

fn finish<W: Write>(path: &Path, mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Rows `i, j, x, y, value` with `i` running fastest.
pub fn write_field_csv(path: &Path, field: &ScalarField) -> Result<()> {
    let mut w = csv_writer(path)?;
    let g = &field.grid;
    let err = |e: csv::Error| Error::io(path, e);
    w.write_record(["i", "j", "x", "y", "value"]).map_err(err)?;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let [x, y] = g.point(i, j);
            w.serialize((i, j, x, y, field.at(i, j))).map_err(err)?;
        }
    }
    finish(path, w)
}

/// Header `magic, nx: u64, ny: u64, h, origin_x, origin_y` followed by the
/// values row-major in `j`, all little-endian.
pub fn write_field_binary(path: &Path, field: &ScalarField) -> Result<()> {
    let g = &field.grid;
    let mut bytes = Vec::with_capacity(48 + 8 * field.values.len());
    bytes.extend_from_slice(&FIELD_MAGIC);
    bytes.extend_from_slice(&(g.nx as u64).to_le_bytes());
    bytes.extend_from_slice(&(g.ny as u64).to_le_bytes());
    for x in [g.h, g.origin[0], g.origin[1]] {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    for v in &field.values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let mut out = create(path)?;
    out.write_all(&bytes).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_field_binary(path: &Path, meaning: FieldMeaning) -> Result<ScalarField> {
    let mut bytes = Vec::new();
    File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::Io { path: path.to_path_buf(), message: msg.into() };
    if bytes.len() < 48 || bytes[..8] != FIELD_MAGIC {
        return Err(bad("not a field file"));
    }
    let word = |k: usize| -> [u8; 8] { bytes[8 * k..8 * k + 8].try_into().expect("8-byte slice") };
    let (nx, ny) = (u64::from_le_bytes(word(1)) as usize, u64::from_le_bytes(word(2)) as usize);
    let (h, ox, oy) = (f64::from_le_bytes(word(3)), f64::from_le_bytes(word(4)), f64::from_le_bytes(word(5)));
    let count = nx.checked_mul(ny).ok_or_else(|| bad("grid size overflows"))?;
    if bytes.len() != 48 + 8 * count {
        return Err(bad("payload length does not match the header"));
    }
    let values = (0..count).map(|k| f64::from_le_bytes(word(6 + k))).collect();
    let grid = Grid2::new(nx, ny, [ox, oy], h).map_err(|e| bad(&e.to_string()))?;
    Ok(ScalarField::new(grid, values, meaning)?)
}

/// One row per facet: midpoint, Euclidean normal, length and curvature
/// (empty where unavailable).
pub fn write_contour_csv(path: &Path, contour: &Contour) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = |e: csv::Error| Error::io(path, e);
    w.write_record(["x", "y", "nu_x", "nu_y", "measure", "H_F"]).map_err(err)?;
    for f in &contour.facets {
        let [x, y] = f.midpoint();
        w.serialize((x, y, f.normal[0], f.normal[1], f.measure, f.curvature)).map_err(err)?;
    }
    finish(path, w)
}

pub fn write_growth_csv(path: &Path, series: &GrowthSeries, seed: u64, p: f64) -> Result<()> {
    let comment = format!(
        "seed={seed} p={p} sigma_initial={} hypothesis_verified={}",
        series.sigma_initial, series.hypothesis_verified
    );
    let mut w = commented_csv(path, &comment)?;
    let err = |e: csv::Error| Error::io(path, e);
    w.write_record(["t", "sigma_contour", "sigma_coarea", "predicted", "ratio", "coarea_ratio"]).map_err(err)?;
    for s in &series.samples {
        w.serialize((s.t, s.sigma_contour, s.sigma_coarea, s.predicted, s.ratio(), s.coarea_ratio()))
            .map_err(err)?;
    }
    finish(path, w)
}

pub fn write_minimality_csv(path: &Path, report: &MinimalityReport) -> Result<()> {
    let comment = format!("seed={} slack_constant={}", report.seed, report.slack_constant);
    let mut w = commented_csv(path, &comment)?;
    let err = |e: csv::Error| Error::io(path, e);
    w.write_record([
        "trial", "center_x", "center_y", "width", "amplitude", "support_nodes", "j_u", "j_phi", "slack", "margin", "passed",
    ])
    .map_err(err)?;
    for t in &report.trials {
        w.serialize((
            t.trial,
            t.center[0],
            t.center[1],
            t.width,
            t.amplitude,
            t.support_nodes,
            t.j_u,
            t.j_phi,
            t.slack,
            t.margin(),
            t.passed(),
        ))
        .map_err(err)?;
    }
    finish(path, w)
}

/// A plain table with a header row.
pub fn write_table<R: serde::Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = |e: csv::Error| Error::io(path, e);
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.serialize(row).map_err(err)?;
    }
    finish(path, w)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut out = create(path)?;
    out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}
