//! CSV and SVG output.
//!
//! Numbers are written with 17 significant digits so that a field read back
//! from its CSV is bit-identical to the original.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::rearrangement::StepFunction;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn axis_names(dim: usize) -> &'static [&'static str] {
    if dim == 1 {
        &["x"]
    } else {
        &["x", "y"]
    }
}

/// One row per cell: the cell index and the coordinates of its center.
pub fn write_grid_csv(grid: &Grid, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["cell"];
    header.extend_from_slice(axis_names(grid.dim()));
    w.write_record(&header)?;
    for (i, c) in grid.centers().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(c.iter().map(|&v| fmt_f64(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per cell: center coordinates, then the value.
pub fn write_grid_function_csv(f: &GridFunction, path: &Path) -> Result<()> {
    let grid = f.grid();
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = axis_names(grid.dim()).to_vec();
    header.push("value");
    w.write_record(&header)?;
    for (c, &v) in grid.centers().zip(f.values()) {
        let mut row: Vec<String> = c.iter().map(|&x| fmt_f64(x)).collect();
        row.push(fmt_f64(v));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a field written by [`write_grid_function_csv`] back onto `grid`.
///
/// The coordinate columns must match the grid's cell centers.
pub fn read_grid_function_csv_on(path: &Path, grid: &Arc<Grid>) -> Result<GridFunction> {
    let (coords, values) = read_columns(path)?;
    let dim = grid.dim();
    if values.len() != grid.len() || coords.len() != values.len() * dim {
        return Err(Error::GridMismatch(format!(
            "{} has {} rows of {} coordinates, grid has {} cells in dimension {dim}",
            path.display(),
            values.len(),
            coords.len() / values.len().max(1),
            grid.len()
        )));
    }
    let tol = 1e-9 * grid.spacing();
    for (i, c) in coords.chunks_exact(dim).enumerate() {
        if c.iter().zip(grid.center(i)).any(|(a, b)| (a - b).abs() > tol) {
            return Err(Error::GridMismatch(format!(
                "{}: row {i} is not at cell center {:?}",
                path.display(),
                grid.center(i)
            )));
        }
    }
    GridFunction::new(grid.clone(), values)
}

/// Reads a field and reconstructs its grid from the coordinate columns.
pub fn read_grid_function_csv(path: &Path) -> Result<GridFunction> {
    let (coords, values) = read_columns(path)?;
    let m = values.len();
    if m < 2 {
        return Err(Error::InvalidGrid(format!("{} holds fewer than 2 cells", path.display())));
    }
    let dim = coords.len() / m;
    let n = match dim {
        1 => m,
        2 => (m as f64).sqrt().round() as usize,
        _ => return Err(Error::InvalidGrid(format!("{}: {dim} coordinate columns", path.display()))),
    };
    if n.pow(dim as u32) != m {
        return Err(Error::InvalidGrid(format!("{}: {m} cells is not a square grid", path.display())));
    }
    let first = coords[0];
    let last = coords[(n - 1) * dim];
    let h = (last - first) / (n - 1) as f64;
    let half_width = 0.5 * h * n as f64;
    let grid = Arc::new(Grid::new(dim, half_width, n)?);
    read_grid_function_csv_on(path, &grid)
}

fn read_columns(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    if !path.exists() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} does not exist", path.display()),
        )));
    }
    let mut r = csv::Reader::from_path(path)?;
    let mut coords = Vec::new();
    let mut values = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(|s| s.trim().parse::<f64>()).collect();
        let parsed = parsed.map_err(|e| Error::InvalidSpec(format!("{} row {row}: {e}", path.display())))?;
        let Some((&v, c)) = parsed.split_last() else {
            return Err(Error::InvalidSpec(format!("{} row {row} is empty", path.display())));
        };
        coords.extend_from_slice(c);
        values.push(v);
    }
    Ok((coords, values))
}

pub fn write_step_function_csv(f: &StepFunction, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["breakpoint", "level"])?;
    for (t, v) in f.breakpoints.iter().zip(&f.levels) {
        w.write_record([fmt_f64(*t), fmt_f64(*v)])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes named columns of equal length.
pub fn write_columns_csv(path: &Path, names: &[&str], columns: &[&[f64]]) -> Result<()> {
    let rows = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != rows) || names.len() != columns.len() {
        return Err(Error::Domain("columns must have equal length and one name each".into()));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(names)?;
    for r in 0..rows {
        w.write_record(columns.iter().map(|c| fmt_f64(c[r])))?;
    }
    w.flush()?;
    Ok(())
}

/// Data accepted by [`emit_plot`].
pub enum PlotData<'a> {
    Series { x: &'a [f64], y: &'a [f64] },
    Field(&'a GridFunction),
    Step(&'a StepFunction),
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 40.0;

/// Writes an SVG plot to `path` and the plotted data to `path` with a `.csv`
/// extension. Returns the CSV path.
pub fn emit_plot(data: PlotData<'_>, path: &Path) -> Result<PathBuf> {
    let csv_path = path.with_extension("csv");
    let svg = match data {
        PlotData::Series { x, y } => {
            if x.is_empty() || x.len() != y.len() {
                return Err(Error::Empty("a plot needs a non-empty series of matching length".into()));
            }
            write_columns_csv(&csv_path, &["x", "y"], &[x, y])?;
            line_svg(x, y)
        }
        PlotData::Step(f) => {
            if f.levels.is_empty() {
                return Err(Error::Empty("a plot needs a non-empty step function".into()));
            }
            write_step_function_csv(f, &csv_path)?;
            let mut x = Vec::with_capacity(2 * f.levels.len());
            let mut y = Vec::with_capacity(2 * f.levels.len());
            for (w, &v) in f.breakpoints.windows(2).zip(&f.levels) {
                x.extend([w[0], w[1]]);
                y.extend([v, v]);
            }
            line_svg(&x, &y)
        }
        PlotData::Field(f) => {
            if f.is_empty() {
                return Err(Error::Empty("a plot needs a non-empty field".into()));
            }
            write_grid_function_csv(f, &csv_path)?;
            if f.grid().dim() == 1 {
                let x: Vec<f64> = f.grid().centers().map(|c| c[0]).collect();
                line_svg(&x, f.values())
            } else {
                heat_svg(f)
            }
        }
    };
    fs::write(path, svg)?;
    Ok(csv_path)
}

fn range(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

fn svg_open() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

fn line_svg(x: &[f64], y: &[f64]) -> String {
    let (x0, x1) = range(x);
    let (y0, y1) = range(y);
    let sx = |v: f64| MARGIN + (v - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |v: f64| HEIGHT - MARGIN - (v - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
    let mut s = svg_open();
    let _ = writeln!(
        s,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>",
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let pts: Vec<String> = x.iter().zip(y).map(|(&a, &b)| format!("{:.3},{:.3}", sx(a), sy(b))).collect();
    let _ = writeln!(
        s,
        "<polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"1.5\" points=\"{}\"/>",
        pts.join(" ")
    );
    let _ = writeln!(s, "<text x=\"{MARGIN}\" y=\"{}\" font-size=\"11\">x: [{x0:.4}, {x1:.4}]  y: [{y0:.4}, {y1:.4}]</text>", HEIGHT - 12.0);
    s.push_str("</svg>\n");
    s
}

fn heat_svg(f: &GridFunction) -> String {
    let g = f.grid();
    let n = g.cells_per_dim();
    let (lo, hi) = range(f.values());
    let side = (HEIGHT - 2.0 * MARGIN) / n as f64;
    let mut s = svg_open();
    for (i, &v) in f.values().iter().enumerate() {
        let [ix, iy] = g.multi_index(i);
        let t = (v - lo) / (hi - lo);
        let (r, b) = ((255.0 * t).round() as u8, (255.0 * (1.0 - t)).round() as u8);
        let _ = writeln!(
            s,
            "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"{side:.3}\" height=\"{side:.3}\" fill=\"rgb({r},64,{b})\"/>",
            MARGIN + ix as f64 * side,
            HEIGHT - MARGIN - (iy + 1) as f64 * side,
        );
    }
    let _ = writeln!(s, "<text x=\"{MARGIN}\" y=\"{}\" font-size=\"11\">range [{lo:.4e}, {hi:.4e}]</text>", MARGIN - 10.0);
    s.push_str("</svg>\n");
    s
}
