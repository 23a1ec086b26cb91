//! Cross-run report assembly: one markdown document per command with
//! metric tables laid out as rows = statistics kinds, columns = seasons,
//! in with/without-selection blocks, plus the selected-features table.

use payshare::cv::CvReport;
use payshare::Task;

pub struct RunEntry {
    pub season: String,
    pub kind: String,
    pub with_selection: bool,
    pub report: CvReport,
}

fn metric_cell(report: &CvReport, metric: &str) -> String {
    let best = report.best_summary();
    let ci = match metric {
        "pcc" => best.pcc.as_ref(),
        "pve" => best.pve.as_ref(),
        "auc" => best.auc.as_ref(),
        _ => None,
    };
    match ci {
        Some(c) => format!("{:.3} [{:.3}, {:.3}]", c.mean, c.lo, c.hi),
        None => "-".to_string(),
    }
}

fn lookup<'a>(
    entries: &'a [RunEntry],
    season: &str,
    kind: &str,
    with_selection: bool,
) -> Option<&'a RunEntry> {
    entries
        .iter()
        .find(|e| e.season == season && e.kind == kind && e.with_selection == with_selection)
}

/// Best-hyperparameter metric per (kind, season), with/without blocks.
pub fn metric_table(
    entries: &[RunEntry],
    seasons: &[String],
    kinds: &[String],
    metric: &str,
    title: &str,
) -> String {
    let has_with = entries.iter().any(|e| e.with_selection);
    let has_without = entries.iter().any(|e| !e.with_selection);

    let mut out = format!("## {title}\n\n| Dataset |");
    for block in [true, false] {
        if (block && !has_with) || (!block && !has_without) {
            continue;
        }
        let label = if block {
            "with selection"
        } else {
            "without selection"
        };
        for season in seasons {
            out.push_str(&format!(" {season} ({label}) |"));
        }
    }
    out.push('\n');
    let columns = out.lines().last().unwrap().matches('|').count() - 1;
    out.push_str(&format!("|{}\n", "---|".repeat(columns)));

    for kind in kinds {
        out.push_str(&format!("| {kind} |"));
        for block in [true, false] {
            if (block && !has_with) || (!block && !has_without) {
                continue;
            }
            for season in seasons {
                let cell = lookup(entries, season, kind, block)
                    .map(|e| metric_cell(&e.report, metric))
                    .unwrap_or_else(|| "-".to_string());
                out.push_str(&format!(" {cell} |"));
            }
        }
        out.push('\n');
    }
    out.push('\n');
    out
}

/// Most frequently selected statistics per (kind, season).
pub fn selection_table(entries: &[RunEntry], seasons: &[String], kinds: &[String]) -> String {
    let mut out = String::from("## Most frequently selected statistics\n\n| Dataset |");
    for season in seasons {
        out.push_str(&format!(" {season} |"));
    }
    out.push('\n');
    out.push_str(&format!("|{}\n", "---|".repeat(seasons.len() + 1)));
    for kind in kinds {
        out.push_str(&format!("| {kind} |"));
        for season in seasons {
            let cell = lookup(entries, season, kind, true)
                .map(|e| {
                    if e.report.most_important.is_empty() {
                        "none".to_string()
                    } else {
                        e.report.most_important.join(", ")
                    }
                })
                .unwrap_or_else(|| "-".to_string());
            out.push_str(&format!(" {cell} |"));
        }
        out.push('\n');
    }
    out.push('\n');
    out
}

/// Share-distribution band counts per season.
pub fn band_table(rows: &[(String, [usize; 6])]) -> String {
    let mut out = String::from(
        "## Salary share distribution\n\n\
         | Season | [0,5%) | [5,10%) | [10,15%) | [15,20%) | [20,25%) | 25%+ |\n\
         |---|---|---|---|---|---|---|\n",
    );
    for (season, bands) in rows {
        out.push_str(&format!(
            "| {season} | {} | {} | {} | {} | {} | {} |\n",
            bands[0], bands[1], bands[2], bands[3], bands[4], bands[5]
        ));
    }
    out.push('\n');
    out
}

pub fn assemble_markdown(
    title: &str,
    entries: &[RunEntry],
    seasons: &[String],
    kinds: &[String],
    task: Task,
    extra: &str,
    config_hash: &str,
) -> String {
    let mut out = format!("# {title}\n\n");
    match task {
        Task::Regression => {
            out.push_str(&metric_table(
                entries,
                seasons,
                kinds,
                "pcc",
                "Correlation (PCC)",
            ));
            out.push_str(&metric_table(
                entries,
                seasons,
                kinds,
                "pve",
                "Variance explained (PVE)",
            ));
        }
        Task::Classification => {
            out.push_str(&metric_table(entries, seasons, kinds, "auc", "AUC"));
        }
    }
    if entries.iter().any(|e| e.with_selection) {
        out.push_str(&selection_table(entries, seasons, kinds));
    }
    out.push_str(extra);
    out.push_str("\n---\n\nPer-run details\n\n");
    for e in entries {
        out.push_str(&e.report.to_markdown());
        out.push('\n');
    }
    out.push_str(&format!("\nconfig hash: {config_hash}\n"));
    out
}
