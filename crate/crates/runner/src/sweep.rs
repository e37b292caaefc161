//! Parameter grids over config keys.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::Config;
use crate::error::RunError;
use crate::output::{num, write_atomic, Table};
use crate::run::{run_seed, SeedRun};

/// Dotted config paths (array elements by index, e.g. `agents.0.planning_eps`) with their values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Grid {
    pub axes: Vec<(String, Vec<toml::Value>)>,
}

impl Grid {
    /// Reads `"path" = [v1, v2, ...]` entries, either top-level or under `[grid]`.
    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| RunError::Config(format!("grid: {e}")))?;
        if let Some(toml::Value::Table(g)) = table.remove("grid") {
            if !table.is_empty() {
                return Err(RunError::Config("grid: keys outside [grid]".into()));
            }
            table = g;
        }
        let mut axes = Vec::new();
        for (k, v) in table {
            match v {
                toml::Value::Array(vals) if !vals.is_empty() => {
                    if !vals.iter().all(|v| v.is_integer() || v.is_float()) {
                        return Err(RunError::Config(format!("grid `{k}`: values must be numeric")));
                    }
                    axes.push((k, vals));
                }
                _ => return Err(RunError::Config(format!("grid `{k}`: expected a non-empty array"))),
            }
        }
        Ok(Self { axes })
    }

    /// All combinations in row-major order; a grid without axes has one empty point.
    pub fn points(&self) -> Vec<Vec<(String, toml::Value)>> {
        let mut out = vec![Vec::new()];
        for (k, vals) in &self.axes {
            out = out
                .into_iter()
                .flat_map(|p| {
                    vals.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push((k.clone(), v.clone()));
                        q
                    })
                })
                .collect();
        }
        out
    }
}

fn set_path(root: &mut toml::Value, path: &str, v: toml::Value) -> Result<(), RunError> {
    let missing = || RunError::Config(format!("grid key `{path}` does not name a config entry"));
    let parts: Vec<&str> = path.split('.').collect();
    let mut cur = root;
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            toml::Value::Table(t) => {
                if last {
                    t.insert(part.to_string(), v);
                    return Ok(());
                }
                t.get_mut(*part).ok_or_else(missing)?
            }
            toml::Value::Array(a) => {
                let idx: usize = part.parse().map_err(|_| missing())?;
                let slot = a.get_mut(idx).ok_or_else(missing)?;
                if last {
                    *slot = v;
                    return Ok(());
                }
                slot
            }
            _ => return Err(missing()),
        };
    }
    Err(missing())
}

/// Per-run rows and their per-point aggregation.
#[derive(Debug)]
pub struct SweepResult {
    pub runs: Table,
    pub aggregate: Table,
    pub failures: Vec<RunError>,
}

/// Runs every (grid point, seed) pair. Per-run files are not written; only the two tables.
pub fn sweep(base: &str, grid: &Grid) -> Result<SweepResult, RunError> {
    let base: toml::Value = toml::from_str(base).map_err(|e: toml::de::Error| RunError::Config(e.to_string()))?;
    let points = grid.points();
    let mut configs = Vec::with_capacity(points.len());
    for p in &points {
        let mut v = base.clone();
        for (k, x) in p {
            set_path(&mut v, k, x.clone())?;
        }
        configs.push(Config::from_value(v)?);
    }
    let jobs: Vec<(usize, u64)> = configs
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.experiment.seeds.resolve().into_iter().map(move |s| (i, s)))
        .collect();
    let mut results: Vec<(usize, SeedRun)> = jobs
        .into_par_iter()
        .map(|(i, s)| (i, run_seed(&configs[i], s)))
        .collect();
    let mut failures = Vec::new();
    for (_, r) in &mut results {
        match r.error.take() {
            Some(e @ RunError::Config(_)) => return Err(e),
            Some(e) => failures.push(e),
            None => {}
        }
    }

    let keys: Vec<String> = grid.axes.iter().map(|(k, _)| k.clone()).collect();
    let mut metrics: Vec<String> = results
        .iter()
        .flat_map(|(_, r)| r.scalars.keys().cloned())
        .collect();
    metrics.sort();
    metrics.dedup();

    let mut header = vec!["point".to_string()];
    header.extend(keys.iter().cloned());
    header.push("seed".into());
    header.push("status".into());
    header.extend(metrics.iter().cloned());
    let mut runs = Table::new(header);
    let mut by_point: BTreeMap<usize, Vec<&SeedRun>> = BTreeMap::new();
    for (i, r) in &results {
        let ok = r.record.summary.get("status").and_then(|s| s.as_str()) == Some("ok");
        let mut row = vec![i.to_string()];
        row.extend(points[*i].iter().map(|(_, v)| v.to_string()));
        row.push(r.seed.to_string());
        row.push(if ok { "ok" } else { "error" }.into());
        row.extend(metrics.iter().map(|m| r.scalars.get(m).map(|&x| num(x)).unwrap_or_default()));
        runs.push(row);
        by_point.entry(*i).or_default().push(r);
    }

    let mut header = vec!["point".to_string()];
    header.extend(keys.iter().cloned());
    header.push("runs".into());
    for m in &metrics {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_ci95"));
    }
    let mut aggregate = Table::new(header);
    for (i, rs) in by_point {
        let mut row = vec![i.to_string()];
        row.extend(points[i].iter().map(|(_, v)| v.to_string()));
        row.push(rs.len().to_string());
        for m in &metrics {
            let xs: Vec<f64> = rs.iter().filter_map(|r| r.scalars.get(m).copied()).collect();
            let (mean, ci) = mean_ci(&xs);
            row.push(num(mean));
            row.push(num(ci));
        }
        aggregate.push(row);
    }
    Ok(SweepResult {
        runs,
        aggregate,
        failures,
    })
}

/// Sample mean and normal-approximation 95% half-width (NaN when undefined).
pub fn mean_ci(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

impl SweepResult {
    /// Writes `<name>_sweep_runs.csv` and `<name>_sweep.csv`.
    pub fn write(&self, dir: &Path, name: &str) -> Result<Vec<PathBuf>, RunError> {
        let a = dir.join(format!("{name}_sweep_runs.csv"));
        let b = dir.join(format!("{name}_sweep.csv"));
        write_atomic(&a, &self.runs.to_csv()?)?;
        write_atomic(&b, &self.aggregate.to_csv()?)?;
        Ok(vec![a, b])
    }
}
