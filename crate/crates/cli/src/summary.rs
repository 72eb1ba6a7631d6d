//! Cross-run aggregation: scan run directories for manifests and lay the
//! final test MSEs out as one mode-by-task table.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use qseq_core::datasets::SeriesKind;

const MODE_ORDER: [&str; 10] = [
    "nonshared",
    "shared",
    "reservoir-nonshared",
    "reservoir-shared",
    "config1",
    "config2",
    "config3",
    "config4",
    "config5",
    "config6",
];

pub fn cmd_summary(root: PathBuf, out: Option<PathBuf>) -> ExitCode {
    let entries = match std::fs::read_dir(&root) {
        Ok(entries) => entries,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", root.display());
            return ExitCode::from(2);
        }
    };

    // (mode, task) -> final test MSEs across seeds/runs.
    let mut cells: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    let mut found = 0;
    for entry in entries.flatten() {
        let manifest_path = entry.path().join("manifest.json");
        let Ok(text) = std::fs::read_to_string(&manifest_path) else {
            continue;
        };
        let Ok(manifest) = serde_json::from_str::<serde_json::Value>(&text) else {
            eprintln!("warning: skipping unreadable {}", manifest_path.display());
            continue;
        };
        let (Some(task), Some(mode), Some(mse)) = (
            manifest
                .pointer("/config/task")
                .and_then(task_label_from_value),
            manifest.pointer("/config/mode").map(mode_label_from_value),
            manifest.pointer("/final_test_mse").and_then(|v| v.as_f64()),
        ) else {
            eprintln!("warning: incomplete manifest {}", manifest_path.display());
            continue;
        };
        cells.entry((mode, task)).or_default().push(mse);
        found += 1;
    }
    if found == 0 {
        eprintln!("error: no run manifests under {}", root.display());
        return ExitCode::from(2);
    }

    let tasks: Vec<&str> = SeriesKind::all().iter().map(|k| k.label()).collect();
    let mut csv = String::from("model");
    for t in &tasks {
        csv.push(',');
        csv.push_str(t);
    }
    csv.push('\n');
    for mode in MODE_ORDER {
        let row_has_data = tasks
            .iter()
            .any(|t| cells.contains_key(&(mode.to_string(), t.to_string())));
        if !row_has_data {
            continue;
        }
        csv.push_str(mode);
        for t in &tasks {
            csv.push(',');
            if let Some(values) = cells.get(&(mode.to_string(), t.to_string())) {
                csv.push_str(&format!("{}", median(values)));
            }
        }
        csv.push('\n');
    }

    let out_path = out.unwrap_or_else(|| root.join("summary.csv"));
    if let Err(e) = std::fs::write(&out_path, &csv) {
        eprintln!("error: cannot write {}: {e}", out_path.display());
        return ExitCode::FAILURE;
    }
    print!("{csv}");
    ExitCode::SUCCESS
}

/// Median over runs of the same cell (multiple seeds land in one cell).
fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}

fn task_label_from_value(v: &serde_json::Value) -> Option<String> {
    let name = v.as_str()?;
    let kind = match name {
        "Bessel" => SeriesKind::Bessel,
        "DampedShm" => SeriesKind::DampedShm,
        "DelayedControl" => SeriesKind::DelayedControl,
        "Narma5" => SeriesKind::Narma5,
        "Narma10" => SeriesKind::Narma10,
        _ => return None,
    };
    Some(kind.label().to_string())
}

fn mode_label_from_value(v: &serde_json::Value) -> String {
    if let Some(regime) = v.pointer("/Regime").and_then(|r| r.as_str()) {
        match regime {
            "NonShared" => "nonshared",
            "Shared" => "shared",
            "ReservoirNonShared" => "reservoir-nonshared",
            "ReservoirShared" => "reservoir-shared",
            other => other,
        }
        .to_string()
    } else if let Some(index) = v.pointer("/Baseline").and_then(|b| b.as_u64()) {
        format!("config{index}")
    } else {
        "unknown".to_string()
    }
}
