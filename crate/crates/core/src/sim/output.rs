//! Sweep persistence: one JSON line per trial and a CSV row per point.

use std::collections::HashSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{run_point, ExperimentSpec, PointSpec, PointSummary, TrialRecord};
use crate::error::{Error, Result};

pub const SUMMARY_HEADER: &str = "K,r,m,p,d,B,C,K_star,miss_mean,miss_se,fa_mean,fa_se,trials";
const TRIALS_FILE: &str = "trials.jsonl";
const SUMMARY_FILE: &str = "summary.csv";

#[derive(Clone, Debug, Default)]
pub struct SweepOutcome {
    /// Every point of the spec, including ones found on disk.
    pub summaries: Vec<PointSummary>,
    pub computed: usize,
    pub skipped: usize,
    pub trials_path: PathBuf,
    pub summary_path: PathBuf,
}

type PointKey = (u64, usize, usize, usize, usize);

fn key(devices: f64, r: usize, m: usize, p: usize, d: usize) -> PointKey {
    (devices.to_bits(), r, m, p, d)
}

fn point_key(point: &PointSpec) -> PointKey {
    key(
        point.devices,
        point.geometry.antennas,
        point.frame.m,
        point.frame.p,
        point.frame.d,
    )
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, message: impl ToString) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

pub fn read_summaries(path: &Path) -> Result<Vec<PointSummary>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| format_err(path, e))?;
    let header = reader.headers().map_err(|e| format_err(path, e))?;
    if header.iter().collect::<Vec<_>>().join(",") != SUMMARY_HEADER {
        return Err(format_err(path, "unexpected summary header"));
    }
    reader
        .deserialize()
        .map(|row| row.map_err(|e| format_err(path, e)))
        .collect()
}

/// Keeps only trial lines whose point already has a summary row, so a sweep
/// interrupted between the two writes resumes cleanly.
fn prune_trials(path: &Path, done: &HashSet<PointKey>) -> Result<()> {
    if !path.exists() {
        return Ok(());
    }
    let file = File::open(path).map_err(io_err(path))?;
    let mut kept = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TrialRecord = serde_json::from_str(&line).map_err(|e| format_err(path, e))?;
        if done.contains(&key(rec.devices, rec.r, rec.m, rec.p, rec.d)) {
            kept.push(line);
        }
    }
    let mut out = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for line in kept {
        writeln!(out, "{line}").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

/// Runs every point not already present in `out_dir/summary.csv`, appending
/// its trials to `out_dir/trials.jsonl` and its aggregate to the summary.
pub fn run_sweep(spec: &ExperimentSpec, out_dir: &Path) -> Result<SweepOutcome> {
    spec.validate()?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let trials_path = out_dir.join(TRIALS_FILE);
    let summary_path = out_dir.join(SUMMARY_FILE);
    let existing = if summary_path.exists() {
        read_summaries(&summary_path)?
    } else {
        Vec::new()
    };
    let done: HashSet<PointKey> = existing
        .iter()
        .map(|s| key(s.devices, s.r, s.m, s.p, s.d))
        .collect();
    prune_trials(&trials_path, &done)?;
    if existing.is_empty() {
        let mut f = File::create(&summary_path).map_err(io_err(&summary_path))?;
        writeln!(f, "{SUMMARY_HEADER}").map_err(io_err(&summary_path))?;
    }

    let mut outcome = SweepOutcome {
        trials_path: trials_path.clone(),
        summary_path: summary_path.clone(),
        ..SweepOutcome::default()
    };
    for point in spec.points()? {
        let k = point_key(&point);
        if let Some(found) = existing.iter().find(|s| key(s.devices, s.r, s.m, s.p, s.d) == k) {
            outcome.summaries.push(found.clone());
            outcome.skipped += 1;
            continue;
        }
        let (summary, records) = run_point(&point, spec.seed, spec.trials)?;
        let trials_file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&trials_path)
            .map_err(io_err(&trials_path))?;
        let mut trials_out = BufWriter::new(trials_file);
        for rec in &records {
            let line = serde_json::to_string(rec).map_err(|e| format_err(&trials_path, e))?;
            writeln!(trials_out, "{line}").map_err(io_err(&trials_path))?;
        }
        trials_out.flush().map_err(io_err(&trials_path))?;
        drop(trials_out);

        let summary_file = OpenOptions::new()
            .append(true)
            .open(&summary_path)
            .map_err(io_err(&summary_path))?;
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(summary_file);
        writer
            .serialize(&summary)
            .map_err(|e| format_err(&summary_path, e))?;
        writer.flush().map_err(io_err(&summary_path))?;
        outcome.summaries.push(summary);
        outcome.computed += 1;
    }
    Ok(outcome)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

/// Fixed-width table for terminals.
pub fn summary_table(rows: &[PointSummary]) -> String {
    let mut out = format!(
        "{:>8} {:>3} {:>3} {:>3} {:>2} {:>4} {:>6} {:>7} {:>8} {:>8} {:>8} {:>8} {:>6}\n",
        "K", "r", "m", "p", "d", "B", "C", "K*", "miss", "miss_se", "FA", "FA_se", "trials"
    );
    for s in rows {
        out.push_str(&format!(
            "{:>8} {:>3} {:>3} {:>3} {:>2} {:>4} {:>6} {:>7.2} {:>8} {:>8} {:>8.4} {:>8.4} {:>6}\n",
            s.devices,
            s.r,
            s.m,
            s.p,
            s.d,
            s.info_bits,
            s.codelength,
            s.k_star,
            opt(s.miss_mean),
            opt(s.miss_se),
            s.fa_mean,
            s.fa_se,
            s.trials
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(devices: Vec<f64>) -> ExperimentSpec {
        let mut spec = ExperimentSpec::reference(devices, vec![2], 5, 2, 0);
        spec.trials = 1;
        spec
    }

    fn lines(path: &Path) -> Vec<String> {
        fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(str::to_string)
            .collect()
    }

    #[test]
    fn single_trial_sweep_writes_one_record() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_sweep(&spec(vec![50.0]), dir.path()).unwrap();
        assert_eq!(out.computed, 1);
        assert_eq!(lines(&out.trials_path).len(), 1);
        let summary = lines(&out.summary_path);
        assert_eq!(summary[0], SUMMARY_HEADER);
        assert_eq!(summary.len(), 2);
        assert_eq!(read_summaries(&out.summary_path).unwrap(), out.summaries);
    }

    #[test]
    fn resume_skips_finished_points() {
        let dir = tempfile::tempdir().unwrap();
        let first = run_sweep(&spec(vec![50.0]), dir.path()).unwrap();
        let before = lines(&first.trials_path);
        let second = run_sweep(&spec(vec![50.0, 80.0]), dir.path()).unwrap();
        assert_eq!((second.skipped, second.computed), (1, 1));
        let after = lines(&second.trials_path);
        assert_eq!(after.len(), 2);
        assert_eq!(after[0], before[0]);
        assert_eq!(lines(&second.summary_path).len(), 3);
        let third = run_sweep(&spec(vec![50.0, 80.0]), dir.path()).unwrap();
        assert_eq!((third.skipped, third.computed), (2, 0));
    }

    #[test]
    fn orphan_trials_are_pruned() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_sweep(&spec(vec![50.0]), dir.path()).unwrap();
        let mut orphan: TrialRecord = serde_json::from_str(&lines(&out.trials_path)[0]).unwrap();
        orphan.devices = 999.0;
        let mut f = OpenOptions::new().append(true).open(&out.trials_path).unwrap();
        writeln!(f, "{}", serde_json::to_string(&orphan).unwrap()).unwrap();
        run_sweep(&spec(vec![50.0]), dir.path()).unwrap();
        assert_eq!(lines(&out.trials_path).len(), 1);
    }

    #[test]
    fn unreadable_output_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = run_sweep(&spec(vec![50.0]), &blocker.join("sub")).unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
    }

    #[test]
    fn table_has_a_row_per_point() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_sweep(&spec(vec![0.0, 50.0]), dir.path()).unwrap();
        let table = summary_table(&out.summaries);
        assert_eq!(table.lines().count(), 3);
        assert!(table.lines().nth(1).unwrap().contains(" - "));
    }
}
