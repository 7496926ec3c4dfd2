//! Aggregates finished runs into a comparison table and epoch curves.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::runner::{read_epoch_rows, RunSummary};
use crate::{Error, Result};

const MODEL_ORDER: [&str; 5] = ["baseline", "fixed", "linear", "power", "exp"];

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub cutoff: usize,
    pub rows: Vec<String>,
    /// `(dataset, eval_pos, metric)`
    pub columns: Vec<(String, usize, &'static str)>,
    pub cells: Vec<Vec<Option<Cell>>>,
    pub curves_csv: String,
}

fn mean_std(xs: &[f64]) -> Cell {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Cell { mean, std, n }
}

fn protocol_name(k: usize) -> String {
    if k == 1 {
        "traditional".into()
    } else {
        format!("mfi@{k}")
    }
}

fn run_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let base = if root.join("runs").is_dir() {
        root.join("runs")
    } else {
        root.to_path_buf()
    };
    let mut dirs: Vec<PathBuf> = fs::read_dir(&base)
        .map_err(|e| Error::io(&base, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("summary.json").is_file())
        .collect();
    dirs.sort();
    Ok(dirs)
}

fn row_order(label: &str) -> (usize, String) {
    let base = label.split("-tp").next().unwrap_or(label);
    let idx = MODEL_ORDER.iter().position(|m| *m == base).unwrap_or(MODEL_ORDER.len());
    (idx, label.to_string())
}

/// Reads every run below `root` (or `root/runs`).
pub fn build_report(root: &Path) -> Result<Report> {
    let mut runs = Vec::new();
    for dir in run_dirs(root)? {
        let path = dir.join("summary.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let s: RunSummary = serde_json::from_str(&text)?;
        runs.push((dir, s));
    }
    if runs.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no finished runs under {}",
            root.display()
        )));
    }
    let cutoff = runs[0].1.cutoff;
    if let Some((_, s)) = runs.iter().find(|(_, s)| s.cutoff != cutoff) {
        return Err(Error::InvalidArgument(format!(
            "mixed cutoffs: {} uses {} but {} uses {}",
            runs[0].1.run_id, cutoff, s.run_id, s.cutoff
        )));
    }

    let mut tps: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (_, s) in &runs {
        let v = tps.entry(&s.model).or_default();
        if !v.contains(&s.train_positives) {
            v.push(s.train_positives);
        }
    }
    let label = |s: &RunSummary| -> String {
        if tps[s.model.as_str()].len() > 1 {
            format!("{}-tp{}", s.model, s.train_positives)
        } else {
            s.model.clone()
        }
    };

    // (row, dataset, eval_pos, metric) -> values over seeds
    let mut values: BTreeMap<(String, String, usize, &'static str), Vec<f64>> = BTreeMap::new();
    let mut datasets: Vec<String> = Vec::new();
    let mut ks: Vec<usize> = Vec::new();
    let mut rows: Vec<String> = Vec::new();
    for (_, s) in &runs {
        let l = label(s);
        if !rows.contains(&l) {
            rows.push(l.clone());
        }
        if !datasets.contains(&s.dataset) {
            datasets.push(s.dataset.clone());
        }
        for m in &s.test {
            if !ks.contains(&m.k_eval) {
                ks.push(m.k_eval);
            }
            for (metric, v) in [("NDCG", m.ndcg_at_k), ("HR", m.hr_at_k)] {
                values
                    .entry((l.clone(), s.dataset.clone(), m.k_eval, metric))
                    .or_default()
                    .push(v);
            }
        }
    }
    rows.sort_by_key(|r| row_order(r));
    ks.sort_unstable();
    let columns: Vec<(String, usize, &'static str)> = datasets
        .iter()
        .flat_map(|d| {
            ks.iter()
                .flat_map(move |&k| ["NDCG", "HR"].map(|m| (d.clone(), k, m)))
        })
        .filter(|(d, k, m)| {
            values
                .keys()
                .any(|(_, d2, k2, m2)| d2 == d && k2 == k && m2 == m)
        })
        .collect();
    let cells = rows
        .iter()
        .map(|r| {
            columns
                .iter()
                .map(|(d, k, m)| {
                    values
                        .get(&(r.clone(), d.clone(), *k, *m))
                        .map(|v| mean_std(v))
                })
                .collect()
        })
        .collect();

    let mut curves = String::from("epoch,model,protocol,ndcg,dataset,seed,eval_pos\n");
    let mut curve_rows = Vec::new();
    for (dir, s) in &runs {
        let csv_path = dir.join("epochs.csv");
        if !csv_path.is_file() {
            continue;
        }
        for r in read_epoch_rows(&csv_path)? {
            curve_rows.push((r.dataset.clone(), label(s), s.seed, r.eval_pos, r.epoch, r.ndcg));
        }
    }
    curve_rows.sort_by(|a, b| {
        (&a.0, row_order(&a.1), a.2, a.3, a.4).cmp(&(&b.0, row_order(&b.1), b.2, b.3, b.4))
    });
    for (d, m, seed, k, e, ndcg) in curve_rows {
        writeln!(curves, "{e},{m},{},{ndcg},{d},{seed},{k}", protocol_name(k)).expect("write to String");
    }

    Ok(Report {
        cutoff,
        rows,
        columns,
        cells,
        curves_csv: curves,
    })
}

impl Report {
    fn best(&self, col: usize) -> Option<f64> {
        self.cells
            .iter()
            .filter_map(|r| r[col].as_ref().map(|c| c.mean))
            .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))))
    }

    /// Markdown table: one row per model, one column per dataset, protocol and
    /// metric. Cells are `mean ± std` over seeds; the best mean per column is
    /// bold.
    pub fn table(&self) -> String {
        let c = self.cutoff;
        let mut header = vec!["model".to_string()];
        header.extend(
            self.columns
                .iter()
                .map(|(d, k, m)| format!("{d} {m}@{c} {}", protocol_name(*k))),
        );
        let mut grid = vec![header];
        for (r, row) in self.rows.iter().enumerate() {
            let mut line = vec![row.clone()];
            for (col, cell) in self.cells[r].iter().enumerate() {
                line.push(match cell {
                    None => "-".into(),
                    Some(cell) => {
                        let text = if cell.n > 1 {
                            format!("{:.4} ± {:.4}", cell.mean, cell.std)
                        } else {
                            format!("{:.4}", cell.mean)
                        };
                        if self.best(col) == Some(cell.mean) {
                            format!("**{text}**")
                        } else {
                            text
                        }
                    }
                });
            }
            grid.push(line);
        }
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|j| grid.iter().map(|l| l[j].chars().count()).max().unwrap_or(0))
            .collect();
        let fmt_line = |l: &[String]| {
            let cells: Vec<String> = l
                .iter()
                .zip(&widths)
                .map(|(s, &w)| format!("{s}{}", " ".repeat(w - s.chars().count())))
                .collect();
            format!("| {} |\n", cells.join(" | "))
        };
        let mut out = fmt_line(&grid[0]);
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        out += &fmt_line(&rule);
        for l in &grid[1..] {
            out += &fmt_line(l);
        }
        out
    }

    /// Long-format CSV of the table cells.
    pub fn cells_csv(&self) -> String {
        let mut out = String::from("model,dataset,protocol,eval_pos,metric,cutoff,mean,std,seeds\n");
        for (r, row) in self.rows.iter().enumerate() {
            for (col, (d, k, m)) in self.columns.iter().enumerate() {
                if let Some(c) = &self.cells[r][col] {
                    writeln!(
                        out,
                        "{row},{d},{},{k},{m},{},{},{},{}",
                        protocol_name(*k),
                        self.cutoff,
                        c.mean,
                        c.std,
                        c.n
                    )
                    .expect("write to String");
                }
            }
        }
        out
    }

    /// Writes `report.md`, `report.csv` and `curves.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        for (name, text) in [
            ("report.md", self.table()),
            ("report.csv", self.cells_csv()),
            ("curves.csv", self.curves_csv.clone()),
        ] {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}
