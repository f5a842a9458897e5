use std::fmt::Write as _;

use serde::Serialize;

use crate::probe::MixWeights;

/// Outcome of one task run. Values are percentages (Spearman x 100).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskReport {
    pub task: String,
    pub split: String,
    pub metric: String,
    pub value: f64,
    /// `None` for mixed-layer runs.
    pub layer: Option<usize>,
    pub seed: u64,
    /// Named sub-metrics (e.g. CAP `same` / `next`), same scale as `value`.
    pub components: Vec<(String, f64)>,
    pub mix: Option<MixWeights>,
    pub n_parameters: usize,
    pub notes: Vec<String>,
}

impl TaskReport {
    pub fn new(task: &str, metric: &str, value: f64, seed: u64) -> Self {
        TaskReport {
            task: task.to_owned(),
            split: "test".to_owned(),
            metric: metric.to_owned(),
            value,
            layer: None,
            seed,
            components: Vec::new(),
            mix: None,
            n_parameters: 0,
            notes: Vec::new(),
        }
    }

    pub fn layer_label(&self) -> String {
        self.layer
            .map_or_else(|| "mix".to_owned(), |l| l.to_string())
    }

    /// Headline row followed by one row per component (`task/component`).
    pub fn tsv_rows(&self) -> String {
        let mut out = String::new();
        let layer = self.layer_label();
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{:.4}\t{}\t{}",
            self.task, self.split, self.metric, self.value, layer, self.seed
        );
        for (name, value) in &self.components {
            let _ = writeln!(
                out,
                "{}/{}\t{}\t{}\t{:.4}\t{}\t{}",
                self.task, name, self.split, self.metric, value, layer, self.seed
            );
        }
        out
    }
}

pub const TSV_HEADER: &str = "task\tsplit\tmetric\tvalue\tlayer\tseed";

/// Aggregation definitions appended to every report.
pub const FOOTNOTES: &[&str] = &[
    "# cap = mean(cap/same, cap/next) test accuracy",
    "# esr = mean of the Spearman x 100 of kore, wikisrs_rel, wikisrs_sim (cosine, no training)",
    "# ned = mean(ned/conll, ned/rare) test accuracy; conll and rare weighted equally",
    "# average = mean of the seven task headlines",
    "# et = macro F1 with per-type thresholds tuned on valid",
];

/// Full TSV document: header, rows, optional average row, footnotes.
pub fn render_tsv(reports: &[TaskReport], with_average: bool) -> String {
    let mut out = String::from(TSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.tsv_rows());
    }
    if with_average {
        let heads: Vec<&TaskReport> = reports.iter().filter(|r| r.layer.is_none()).collect();
        if !heads.is_empty() {
            let mean = heads.iter().map(|r| r.value).sum::<f64>() / heads.len() as f64;
            let seed = heads[0].seed;
            let _ = writeln!(out, "average\ttest\tmean_headline\t{mean:.4}\tmix\t{seed}");
        }
    }
    for note in FOOTNOTES {
        out.push_str(note);
        out.push('\n');
    }
    for r in reports {
        for note in &r.notes {
            let _ = writeln!(out, "# {}: {}", r.task, note);
        }
    }
    out
}

/// Arithmetic mean of headline values.
pub fn headline_average(reports: &[TaskReport]) -> Option<f64> {
    (!reports.is_empty())
        .then(|| reports.iter().map(|r| r.value).sum::<f64>() / reports.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_and_components() {
        let mut r = TaskReport::new("cap", "accuracy", 75.0, 42);
        r.components = vec![("same".into(), 80.0), ("next".into(), 70.0)];
        assert_eq!(
            r.tsv_rows(),
            "cap\ttest\taccuracy\t75.0000\tmix\t42\ncap/same\ttest\taccuracy\t80.0000\tmix\t42\ncap/next\ttest\taccuracy\t70.0000\tmix\t42\n"
        );
        let doc = render_tsv(&[r], true);
        assert!(doc.starts_with(TSV_HEADER));
        assert!(doc.contains("average\ttest\tmean_headline\t75.0000"));
    }

    #[test]
    fn average_of_headlines() {
        let rs: Vec<TaskReport> = [10.0, 20.0, 60.0]
            .iter()
            .map(|&v| TaskReport::new("x", "m", v, 1))
            .collect();
        assert_eq!(headline_average(&rs), Some(30.0));
        assert_eq!(headline_average(&[]), None);
    }
}
