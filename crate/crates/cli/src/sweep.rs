//! One-axis parameter sweeps. Children run in parallel, each in its own
//! directory, and the aggregate lands in `sweep.json` and `sweep.csv`.

use crate::config::{parse_values, RunConfig};
use crate::error::{CliError, CliResult};
use crate::experiments;
use crate::manifest::write_atomic;
use rayon::prelude::*;
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize)]
pub struct SweepChild {
    pub index: usize,
    pub value: toml::Value,
    pub dir: PathBuf,
    pub ok: bool,
    pub error: Option<String>,
    pub diagnostics: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub experiment: String,
    pub axis: String,
    pub children: Vec<SweepChild>,
}

fn child_dir(root: &Path, axis: &str, i: usize) -> PathBuf {
    root.join(format!("{axis}_{i:03}"))
}

pub fn run_sweep(base: &RunConfig, axis: &str, raw_values: &str, root: &Path) -> CliResult<SweepSummary> {
    let values = parse_values(raw_values);
    if values.is_empty() {
        return Err(CliError::Usage("sweep needs at least one value".into()));
    }
    let exp = experiments::find(&base.experiment)?;
    if axis != "seed" && !(exp.schema)().iter().any(|p| p.key == axis) {
        return Err(CliError::Usage(format!("`{axis}` is not a parameter of `{}`", exp.id)));
    }
    // Validate every child before computing any of them.
    let configs: Vec<RunConfig> = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut c = base.clone();
            c.apply_set(&format!("{axis}={v}"))?;
            c.out = Some(child_dir(root, axis, i));
            crate::validate(&c)?;
            Ok(c)
        })
        .collect::<CliResult<_>>()?;

    let children: Vec<SweepChild> = configs
        .par_iter()
        .zip(values.par_iter())
        .enumerate()
        .map(|(i, (c, v))| {
            let dir = c.out.clone().expect("set above");
            match crate::run_experiment(c) {
                Ok(m) => SweepChild {
                    index: i,
                    value: v.clone(),
                    dir,
                    ok: true,
                    error: None,
                    diagnostics: m.diagnostics,
                },
                Err(e) => SweepChild {
                    index: i,
                    value: v.clone(),
                    dir,
                    ok: false,
                    error: Some(e.to_string()),
                    diagnostics: serde_json::Map::new(),
                },
            }
        })
        .collect();

    let summary = SweepSummary {
        experiment: base.experiment.clone(),
        axis: axis.to_string(),
        children,
    };
    write_atomic(&root.join("sweep.json"), serde_json::to_string_pretty(&summary).expect("summary serializes").as_bytes())?;
    let mut csv = String::from("index,value,ok,dir\n");
    for c in &summary.children {
        csv.push_str(&format!("{},{},{},{}\n", c.index, c.value.to_string().replace(',', ";"), c.ok, c.dir.display()));
    }
    write_atomic(&root.join("sweep.csv"), csv.as_bytes())?;

    let failed = summary.children.iter().filter(|c| !c.ok).count();
    if failed > 0 {
        return Err(CliError::PartialSweep {
            failed,
            total: summary.children.len(),
        });
    }
    Ok(summary)
}
