//! Plot-ready data: two-column CSVs plus a `plot.json` describing axes.

use crate::error::{CliError, CliResult};
use crate::experiments::{self, Figure};
use crate::manifest::{write_atomic, RunManifest};
use rotorlab_core::TimeSeries;
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize)]
pub struct AxisMeta {
    pub column: String,
    pub label: String,
    pub scale: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct PlotMeta {
    pub experiment: String,
    pub figure: String,
    pub title: String,
    pub x: AxisMeta,
    pub y: AxisMeta,
    pub series: Vec<String>,
}

fn meta(axis: &experiments::Axis) -> AxisMeta {
    AxisMeta {
        column: axis.column.to_string(),
        label: axis.label.to_string(),
        scale: if axis.log { "log" } else { "linear" },
    }
}

/// Extracts figure `figure_id` of the run whose manifest is at
/// `manifest_path`. Output lands in `<run>/plot/<figure>/` unless `out` is
/// given. Returns the directory written.
pub fn emit_plotdata(manifest_path: &Path, figure_id: &str, out: Option<&Path>) -> CliResult<PathBuf> {
    let manifest = RunManifest::load(manifest_path)?;
    let exp = experiments::find(&manifest.config.experiment)?;
    let fig: &Figure = exp.figures.iter().find(|f| f.id == figure_id).ok_or_else(|| {
        let known: Vec<&str> = exp.figures.iter().map(|f| f.id).collect();
        CliError::Usage(format!("experiment `{}` has no figure `{figure_id}`; available: {}", exp.id, known.join(", ")))
    })?;
    let run_dir = manifest_path.parent().unwrap_or(Path::new("."));
    let dest = out.map(Path::to_path_buf).unwrap_or_else(|| run_dir.join("plot").join(fig.id));

    let sources: Vec<&str> = manifest
        .files
        .iter()
        .map(|f| f.path.as_str())
        .filter(|p| p.starts_with(fig.files) && p.ends_with(".csv"))
        .collect();
    if sources.is_empty() {
        return Err(CliError::Data(format!("figure `{}` needs series `{}*.csv`, none recorded in the manifest", fig.id, fig.files)));
    }
    let mut names = Vec::new();
    for src in sources {
        let path = run_dir.join(src);
        let text = std::fs::read_to_string(&path).map_err(|_| CliError::Data(format!("series `{src}` listed in the manifest is missing on disk")))?;
        let ts = TimeSeries::from_csv(&text).ok_or_else(|| CliError::Data(format!("series `{src}` is not valid CSV")))?;
        let col = |c: &str| ts.column(c).ok_or_else(|| CliError::Data(format!("series `{src}` has no column `{c}`")));
        let (x, y) = (col(fig.x.column)?, col(fig.y.column)?);
        let mut two = TimeSeries::new(&[fig.x.column, fig.y.column]);
        for (a, b) in x.into_iter().zip(y) {
            two.push(vec![a, b]);
        }
        write_atomic(&dest.join(src), two.to_csv().as_bytes())?;
        names.push(src.to_string());
    }
    let m = PlotMeta {
        experiment: exp.id.to_string(),
        figure: fig.id.to_string(),
        title: fig.title.to_string(),
        x: meta(&fig.x),
        y: meta(&fig.y),
        series: names,
    };
    let text = serde_json::to_string_pretty(&m).expect("plot metadata serializes");
    write_atomic(&dest.join("plot.json"), text.as_bytes())?;
    Ok(dest)
}
