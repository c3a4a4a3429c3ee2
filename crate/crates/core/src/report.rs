//! Offline trace analysis: convergence tables and worker schedules.

use std::path::Path;

use crate::error::Result;
use crate::scheduler::{JobRecord, JobStatus};

/// Parse a JSONL trace, skipping malformed lines.
///
/// Returns the parsed records and the number of lines skipped.
pub fn read_trace(path: &Path) -> Result<(Vec<JobRecord>, usize)> {
    let text = std::fs::read_to_string(path)?;
    let mut records = Vec::new();
    let mut skipped = 0;
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<JobRecord>(line) {
            Ok(r) => records.push(r),
            Err(_) => skipped += 1,
        }
    }
    Ok((records, skipped))
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let t = pos - lo as f64;
        sorted[lo] * (1.0 - t) + sorted[hi] * t
    }
}

/// Across-run convergence table aligned by evaluation index.
///
/// One row per index up to the shortest run: the per-run incumbents, then
/// their median and quartiles, plus the median wall-clock time.
pub fn convergence_csv(runs: &[Vec<JobRecord>]) -> String {
    let mut out = String::new();
    out.push_str("index");
    for i in 0..runs.len() {
        out.push_str(&format!(",run{i}_best"));
    }
    out.push_str(",best_median,best_q25,best_q75,wall_ms_median\n");
    let len = runs
        .iter()
        .map(|r| r.iter().filter(|j| j.status == JobStatus::Complete).count())
        .min()
        .unwrap_or(0);
    let completed: Vec<Vec<&JobRecord>> = runs
        .iter()
        .map(|r| r.iter().filter(|j| j.status == JobStatus::Complete).collect())
        .collect();
    for idx in 0..len {
        let mut bests: Vec<f64> = completed
            .iter()
            .map(|r| r[idx].best_so_far.unwrap_or(f64::NAN))
            .collect();
        let mut walls: Vec<f64> = completed.iter().map(|r| r[idx].complete_ms as f64).collect();
        out.push_str(&format!("{idx}"));
        for b in &bests {
            out.push_str(&format!(",{b:.12e}"));
        }
        bests.sort_by(f64::total_cmp);
        walls.sort_by(f64::total_cmp);
        out.push_str(&format!(
            ",{:.12e},{:.12e},{:.12e},{:.1}\n",
            quantile(&bests, 0.5),
            quantile(&bests, 0.25),
            quantile(&bests, 0.75),
            quantile(&walls, 0.5),
        ));
    }
    out
}

/// Per-worker schedule bars: `(worker, start_ms, end_ms, task)` per job.
pub fn schedule_csv(trace: &[JobRecord]) -> String {
    let mut rows: Vec<&JobRecord> = trace.iter().collect();
    rows.sort_by_key(|r| (r.worker_id, r.submit_ms));
    let mut out = String::from("worker,start_ms,end_ms,task\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:?}\n",
            r.worker_id, r.submit_ms, r.complete_ms, r.task
        ));
    }
    out
}

/// Idle fraction per worker: gap time between that worker's first submit
/// and last completion, relative to its total busy time.
pub fn worker_idle_fractions(trace: &[JobRecord]) -> Vec<(usize, f64)> {
    use std::collections::BTreeMap;
    let mut per_worker: BTreeMap<usize, Vec<(u64, u64)>> = BTreeMap::new();
    for r in trace {
        per_worker
            .entry(r.worker_id)
            .or_default()
            .push((r.submit_ms, r.complete_ms));
    }
    per_worker
        .into_iter()
        .map(|(w, mut spans)| {
            spans.sort_unstable();
            let busy: u64 = spans.iter().map(|(s, e)| e.saturating_sub(*s)).sum();
            let first = spans.first().map_or(0, |(s, _)| *s);
            let last = spans.iter().map(|(_, e)| *e).max().unwrap_or(first);
            let span = last.saturating_sub(first);
            let idle = span.saturating_sub(busy);
            (w, if busy == 0 { 0.0 } else { idle as f64 / busy as f64 })
        })
        .collect()
}
