use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::config::ExperimentConfig;
use super::run::{run_experiment, Summary};
use crate::error::{Error, Result};

/// Medians over seeds for one config.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub label: String,
    pub optimizer: String,
    pub final_loss: f64,
    pub min_grad_norm_sq: f64,
    pub sfo_calls: u64,
    /// SFO total differs from the first row's (or varies across seeds).
    pub sfo_mismatch: bool,
}

/// Thread cap from `AMOPT_THREADS`, defaulting to the available parallelism.
pub fn threads_from_env() -> Result<usize> {
    match std::env::var("AMOPT_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::config(
                "AMOPT_THREADS",
                format!("`{v}` is not a positive integer"),
            )),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs every config under seeds `seed, seed + 1, …, seed + seeds − 1`
/// on at most `threads` workers. Rows come back in input order and do not
/// depend on scheduling. The first failing run (in input order) is returned
/// as the error.
pub fn compare(
    configs: &[(String, ExperimentConfig)],
    seeds: usize,
    threads: usize,
) -> Result<Vec<CompareRow>> {
    if configs.is_empty() {
        return Err(Error::config("compare", "no configs given"));
    }
    if seeds == 0 {
        return Err(Error::config("seeds", "must be at least 1"));
    }
    let jobs: Vec<(usize, ExperimentConfig)> = configs
        .iter()
        .enumerate()
        .flat_map(|(i, (_, c))| {
            (0..seeds).map(move |s| {
                let mut c = c.clone();
                c.seed = c.seed.wrapping_add(s as u64);
                c.trace.output = None;
                c.trace.wall_clock = false;
                (i, c)
            })
        })
        .collect();
    let results: Vec<Mutex<Option<Result<Summary>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = threads.clamp(1, jobs.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::Relaxed);
                if j >= jobs.len() {
                    break;
                }
                let out = run_experiment(&jobs[j].1, None).map(|o| o.summary);
                *results[j].lock().expect("no poisoning") = Some(out);
            });
        }
    });

    let mut per_config: Vec<Vec<Summary>> = vec![Vec::new(); configs.len()];
    for ((i, _), slot) in jobs.iter().zip(results) {
        let out = slot
            .into_inner()
            .expect("no poisoning")
            .expect("every job ran");
        per_config[*i].push(out?);
    }
    let mut rows: Vec<CompareRow> = per_config
        .into_iter()
        .zip(configs)
        .map(|(runs, (label, _))| {
            let sfo = runs[0].sfo_calls;
            CompareRow {
                label: label.clone(),
                optimizer: runs[0].optimizer.clone(),
                final_loss: median(runs.iter().map(|r| r.final_loss).collect()),
                min_grad_norm_sq: median(runs.iter().map(|r| r.min_grad_norm_sq).collect()),
                sfo_calls: sfo,
                sfo_mismatch: runs.iter().any(|r| r.sfo_calls != sfo),
            }
        })
        .collect();
    let reference = rows[0].sfo_calls;
    for r in &mut rows {
        r.sfo_mismatch |= r.sfo_calls != reference;
    }
    Ok(rows)
}

/// Aligned text table; SFO totals that differ from the first row are starred.
pub fn format_table(rows: &[CompareRow]) -> String {
    let header = [
        "config",
        "optimizer",
        "final_loss",
        "min_grad_norm_sq",
        "sfo_calls",
    ];
    let body: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            [
                r.label.clone(),
                r.optimizer.clone(),
                format!("{:.6e}", r.final_loss),
                format!("{:.6e}", r.min_grad_norm_sq),
                format!("{}{}", r.sfo_calls, if r.sfo_mismatch { " *" } else { "" }),
            ]
        })
        .collect();
    let mut width = header.map(str::len);
    for row in &body {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: &[&str]| -> String {
        cells
            .iter()
            .zip(width)
            .enumerate()
            .map(|(i, (c, w))| {
                if i < 2 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(&header);
    out.push('\n');
    for row in &body {
        let cells: Vec<&str> = row.iter().map(String::as_str).collect();
        out.push_str(&line(&cells));
        out.push('\n');
    }
    if rows.iter().any(|r| r.sfo_mismatch) {
        out.push_str("* SFO budget differs between runs\n");
    }
    out
}
