//! Plain-text reports: the training log and retrieval rankings.

use std::fmt::Write as _;

use transnets_core::eval::{EvalReport, RetrievalResult};
use transnets_core::training::EvalPoint;

pub const LOG_HEADER: &str = "batch\tloss_T\tloss_trans\tloss_S\tval_mse\ttest_mse";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x}"))
}

/// Tab-separated log, one line per evaluation point. Losses that do not
/// apply to the model are written as `-`. Floats use the shortest form
/// that reads back to the same bits.
pub fn format_log(log: &[EvalPoint]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{LOG_HEADER}");
    for p in log {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            p.batch,
            opt(p.loss_t),
            opt(p.loss_trans),
            p.loss_s,
            p.val_mse,
            p.test_mse
        );
    }
    out
}

/// Parses a log written by [`format_log`].
pub fn parse_log(text: &str) -> Option<Vec<EvalPoint>> {
    let mut lines = text.lines();
    if lines.next()? != LOG_HEADER {
        return None;
    }
    let num = |s: &str| -> Option<Option<f64>> {
        if s == "-" {
            Some(None)
        } else {
            s.parse().ok().map(Some)
        }
    };
    lines
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            if f.len() != 6 {
                return None;
            }
            Some(EvalPoint {
                batch: f[0].parse().ok()?,
                loss_t: num(f[1])?,
                loss_trans: num(f[2])?,
                loss_s: f[3].parse().ok()?,
                val_mse: f[4].parse().ok()?,
                test_mse: f[5].parse().ok()?,
            })
        })
        .collect()
}

/// `rank review_id distance`, ranks from 1, at most `k` lines.
pub fn format_retrieval(result: &RetrievalResult, k: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "rank\treview_id\tdistance");
    for (rank, (id, dist)) in result.ranked.iter().take(k).enumerate() {
        let _ = writeln!(out, "{}\t{id}\t{dist}", rank + 1);
    }
    out
}

pub fn format_eval(split: &str, report: &EvalReport) -> String {
    format!("split\tn\tmse\n{split}\t{}\t{}\n", report.n, report.mse)
}
