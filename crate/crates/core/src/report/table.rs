//! Metric tables: CSV for machines, markdown laid out like the usual
//! per-attribute and with/without-strategy tables.

use crate::metrics::MetricsReport;

pub const UNDEFINED: &str = "—";
pub const METRICS_COLUMNS: [&str; 5] = ["condition", "n", "success_rate", "avg_turns", "guided_continuation_ratio"];
pub const COMPARISON_COLUMNS: [&str; 4] = ["condition", "success_rate", "avg_turns", "guided_continuation_ratio"];

/// Two decimals, `—` when undefined. Rounds the exact binary value
/// (ties to even), e.g. 0.6125 -> "0.61".
pub fn fmt2(v: Option<f64>) -> String {
    match v {
        Some(v) if v.is_finite() => format!("{v:.2}"),
        _ => UNDEFINED.to_string(),
    }
}

/// "w/o / w/" cell.
pub fn paired(without: Option<f64>, with: Option<f64>) -> String {
    format!("{} / {}", fmt2(without), fmt2(with))
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

pub fn metrics_table(reports: &[MetricsReport]) -> String {
    let rows = reports
        .iter()
        .map(|r| {
            vec![
                r.condition.clone(),
                r.n_conversations.to_string(),
                fmt2(Some(r.success_rate)),
                fmt2(r.avg_turns_successful),
                fmt2(r.guided_continuation_ratio),
            ]
        })
        .collect();
    csv_text(&METRICS_COLUMNS, rows)
}

/// Rows are (condition, without, with); either side may be missing.
pub fn comparison_table(rows: &[(String, Option<&MetricsReport>, Option<&MetricsReport>)]) -> String {
    let rows = rows
        .iter()
        .map(|(c, a, b)| {
            let (a, b) = (*a, *b);
            vec![
                c.clone(),
                paired(a.map(|r| r.success_rate), b.map(|r| r.success_rate)),
                paired(a.and_then(|r| r.avg_turns_successful), b.and_then(|r| r.avg_turns_successful)),
                paired(a.and_then(|r| r.guided_continuation_ratio), b.and_then(|r| r.guided_continuation_ratio)),
            ]
        })
        .collect();
    csv_text(&COMPARISON_COLUMNS, rows)
}

/// Significance mark: ‡ for p < 0.05, † for p < 0.10.
pub fn significance_mark(p: Option<f64>) -> &'static str {
    match p {
        Some(p) if p < 0.05 => "‡",
        Some(p) if p < 0.10 => "†",
        _ => "",
    }
}

/// One attribute section of the per-attribute table.
pub struct AttributeSection<'a> {
    pub title: String,
    pub reports: &'a [MetricsReport],
    /// p-value of the success-rate test; its mark goes on the best row.
    pub success_p: Option<f64>,
}

pub fn markdown_attribute_table(sections: &[AttributeSection<'_>]) -> String {
    let mut out = String::from(
        "| Attribute | Success Rate | Avg. #Turns (↓) | Guided Conti. Ratio | n |\n|---|---|---|---|---|\n",
    );
    for s in sections {
        out.push_str(&format!("| *{}* | | | | |\n", s.title));
        let best = s
            .reports
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.success_rate.total_cmp(&b.1.success_rate).then(b.0.cmp(&a.0)))
            .map(|(k, _)| k);
        for (k, r) in s.reports.iter().enumerate() {
            let mark = if Some(k) == best { significance_mark(s.success_p) } else { "" };
            out.push_str(&format!(
                "| {} | {}{} | {} | {} | {} |\n",
                r.condition,
                fmt2(Some(r.success_rate)),
                mark,
                fmt2(r.avg_turns_successful),
                fmt2(r.guided_continuation_ratio),
                r.n_conversations
            ));
        }
    }
    out.push_str("\n‡: p < 0.05; †: p < 0.10 in significance tests.\n");
    out
}

pub fn markdown_comparison_table(rows: &[(String, Option<&MetricsReport>, Option<&MetricsReport>)]) -> String {
    let mut out = String::from(
        "| Sec. | Success Rate | Avg. # Turns (↓) | Guided Conti. Ratio |\n|---|---|---|---|\n",
    );
    for (c, a, b) in rows {
        let (a, b) = (*a, *b);
        out.push_str(&format!(
            "| {} | {} | {} | {} |\n",
            c,
            paired(a.map(|r| r.success_rate), b.map(|r| r.success_rate)),
            paired(a.and_then(|r| r.avg_turns_successful), b.and_then(|r| r.avg_turns_successful)),
            paired(a.and_then(|r| r.guided_continuation_ratio), b.and_then(|r| r.guided_continuation_ratio)),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::MetricOptions;

    fn report(c: &str, sr: f64, turns: Option<f64>, g: Option<f64>) -> MetricsReport {
        MetricsReport {
            condition: c.into(),
            n_conversations: 300,
            n_successes: 0,
            success_rate: sr,
            avg_turns_successful: turns,
            intent_distribution: Default::default(),
            success_intent_distribution: Default::default(),
            guided_continuation_ratio: g,
            same_intent_continuation_ratio: None,
            pivot_events: 0,
            options: MetricOptions::default(),
        }
    }

    #[test]
    fn csv_rounding_and_undefined() {
        let t = metrics_table(&[report("Adult", 0.6125, Some(11.614), None)]);
        assert_eq!(t, "condition,n,success_rate,avg_turns,guided_continuation_ratio\nAdult,300,0.61,11.61,—\n");
        assert_eq!(metrics_table(&[]), "condition,n,success_rate,avg_turns,guided_continuation_ratio\n");
    }

    #[test]
    fn paired_cells() {
        let a = report("Edu", 0.21, Some(17.7), Some(0.71));
        let b = report("Edu", 0.74, Some(10.96), Some(0.51));
        let csv = comparison_table(&[("Edu".into(), Some(&a), Some(&b))]);
        assert_eq!(csv.lines().nth(1).unwrap(), "Edu,0.21 / 0.74,17.70 / 10.96,0.71 / 0.51");
        let md = markdown_comparison_table(&[("Edu".into(), Some(&a), None)]);
        assert!(md.contains("| Edu | 0.21 / — | 17.70 / — | 0.71 / — |"));
    }

    #[test]
    fn attribute_sections_mark_the_best_row() {
        let reports = [report("Teen", 0.46, Some(11.38), None), report("Adult", 0.61, Some(11.61), None)];
        let md = markdown_attribute_table(&[AttributeSection { title: "Age".into(), reports: &reports, success_p: Some(0.02) }]);
        assert!(md.contains("| *Age* |"));
        assert!(md.contains("| Adult | 0.61‡ | 11.61 | — | 300 |"));
        assert!(md.contains("| Teen | 0.46 | 11.38 |"));
        assert_eq!(significance_mark(Some(0.07)), "†");
        assert_eq!(significance_mark(None), "");
    }
}
