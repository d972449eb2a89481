//! SVG figures rendered from CSV artifacts on disk.
//!
//! Two layouts are recognized from the header row:
//! * training curves (`epoch,...,train_loss,...,val_loss,...`) become a line
//!   chart of both losses per epoch;
//! * RMSE tables (first column `label` or `scope`, plus `rmse_1s`,
//!   `rmse_2s`, ...) become grouped bars of RMSE against horizon, one group
//!   per second and one bar per row. Ablation tables and evaluation reports
//!   (whose rows are the position buckets) both use this layout.

use std::path::Path;

use plotters::prelude::*;

use crate::error::{CliError, Result, ResultExt};

const SIZE: (u32, u32) = (800, 500);

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).data_ctx(|| format!("opening {}", path.display()))?;
        let headers = rdr.headers().data_ctx(|| format!("reading {}", path.display()))?.iter().map(String::from).collect();
        let rows = rdr
            .records()
            .map(|r| r.map(|r| r.iter().map(String::from).collect()))
            .collect::<std::result::Result<Vec<Vec<String>>, _>>()
            .data_ctx(|| format!("reading {}", path.display()))?;
        Ok(Self { headers, rows })
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn numbers(&self, col: usize) -> Result<Vec<f64>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r[col].parse::<f64>().map_err(|e| {
                    CliError::data(anyhow::anyhow!("row {}, column `{}`: {e}", i + 1, self.headers[col]))
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureKind {
    Curves,
    RmseBars,
}

pub fn detect(table: &Table) -> Option<FigureKind> {
    if table.column("epoch").is_some() && table.column("train_loss").is_some() && table.column("val_loss").is_some() {
        return Some(FigureKind::Curves);
    }
    let labelled = matches!(table.headers.first().map(String::as_str), Some("label" | "scope"));
    if labelled && table.headers.iter().any(|h| h.starts_with("rmse_")) {
        return Some(FigureKind::RmseBars);
    }
    None
}

fn plot_err<E: std::fmt::Debug>(e: E) -> CliError {
    CliError::data(anyhow::anyhow!("rendering failed: {e:?}"))
}

fn finite_max(values: impl Iterator<Item = f64>) -> f64 {
    let m = values.filter(|v| v.is_finite()).fold(0.0f64, f64::max);
    if m > 0.0 {
        m * 1.1
    } else {
        1.0
    }
}

fn draw_curves(table: &Table, title: &str, out: &Path) -> Result<()> {
    let epochs = table.numbers(table.column("epoch").expect("detected"))?;
    let series = [("train_loss", RED), ("val_loss", BLUE)];
    let values: Vec<Vec<f64>> =
        series.iter().map(|(n, _)| table.numbers(table.column(n).expect("detected"))).collect::<Result<_>>()?;
    let x_max = epochs.iter().cloned().fold(1.0f64, f64::max);
    let y_max = finite_max(values.iter().flatten().cloned());

    let root = SVGBackend::new(out, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0.0..x_max, 0.0..y_max)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("epoch").y_desc("loss").draw().map_err(plot_err)?;
    for ((name, color), ys) in series.iter().zip(&values) {
        let pts: Vec<(f64, f64)> = epochs.iter().cloned().zip(ys.iter().cloned()).filter(|p| p.1.is_finite()).collect();
        chart
            .draw_series(LineSeries::new(pts, color.stroke_width(2)))
            .map_err(plot_err)?
            .label(*name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(plot_err)?;
    root.present().map_err(plot_err)
}

fn draw_bars(table: &Table, title: &str, out: &Path) -> Result<()> {
    let cols: Vec<usize> = (0..table.headers.len()).filter(|&c| table.headers[c].starts_with("rmse_")).collect();
    let labels: Vec<&str> = table.rows.iter().map(|r| r[0].as_str()).collect();
    let values: Vec<Vec<f64>> = cols.iter().map(|&c| table.numbers(c)).collect::<Result<_>>()?;
    let secs = cols.len();
    let y_max = finite_max(values.iter().flatten().cloned());
    let groups = labels.len().max(1);
    let width = 0.8 / groups as f64;

    let root = SVGBackend::new(out, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0.5..secs as f64 + 0.5, 0.0..y_max)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .disable_x_mesh()
        .x_labels(secs)
        .x_label_formatter(&|x| format!("{}s", x.round()))
        .x_desc("prediction horizon")
        .y_desc("RMSE (m)")
        .draw()
        .map_err(plot_err)?;
    for (g, label) in labels.iter().enumerate() {
        let color = Palette99::pick(g).filled();
        let bars = (0..secs).filter(|&s| values[s][g].is_finite()).map(|s| {
            let x0 = s as f64 + 1.0 - 0.4 + g as f64 * width;
            Rectangle::new([(x0, 0.0), (x0 + width, values[s][g])], color)
        });
        chart
            .draw_series(bars)
            .map_err(plot_err)?
            .label(*label)
            .legend(move |(x, y)| Rectangle::new([(x, y - 5), (x + 12, y + 5)], color));
    }
    chart
        .configure_series_labels()
        .position(SeriesLabelPosition::UpperLeft)
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)
}

/// Renders `input` to the SVG file `out`; the figure depends only on the
/// file's contents and name.
pub fn render(input: &Path, out: &Path) -> Result<FigureKind> {
    let table = Table::read(input)?;
    let kind = detect(&table).ok_or_else(|| {
        CliError::data(anyhow::anyhow!(
            "{}: not a curves file or an RMSE table (header: {})",
            input.display(),
            table.headers.join(",")
        ))
    })?;
    if table.rows.is_empty() {
        return Err(CliError::data(anyhow::anyhow!("{} has no data rows", input.display())));
    }
    let title = input.file_stem().map_or_else(String::new, |s| s.to_string_lossy().replace('_', " "));
    match kind {
        FigureKind::Curves => draw_curves(&table, &title, out)?,
        FigureKind::RmseBars => draw_bars(&table, &title, out)?,
    }
    Ok(kind)
}
