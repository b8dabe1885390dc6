//! End-to-end batch evaluation.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::config::RunConfig;
use super::plot::render_overlay;
use super::records::{load_records, LineDiagnostic};
use super::PipelineError;
use crate::metrics::{
    aggregate, evaluate_all, EvalOptions, EvalSummary, RecordEvaluation, RecordOutcome,
};
use crate::structured::SpecialTokens;
use crate::types::EvalRecord;

pub const RECORDS_FILE: &str = "records.jsonl";
pub const SUMMARY_JSON: &str = "summary.json";
pub const SUMMARY_TEXT: &str = "summary.txt";
pub const PLOTS_DIR: &str = "plots";

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub summary: EvalSummary,
    /// Input lines that were skipped.
    pub load_diagnostics: Vec<LineDiagnostic>,
    pub plots_written: usize,
}

#[derive(Serialize)]
struct DiagnosticLine<'a> {
    id: &'a str,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error_kind: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    input_len: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ade_3s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ade_5s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    smoothness_pre: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    smoothness_post: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    outliers: Option<&'a [usize]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    keypoints: Option<&'a [usize]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    windows: Option<&'a [usize]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    refined: Option<Vec<[f64; 2]>>,
}

impl<'a> DiagnosticLine<'a> {
    fn new(eval: &'a RecordEvaluation) -> Self {
        let mut line = DiagnosticLine {
            id: &eval.id,
            status: "ok",
            error_kind: None,
            error: None,
            input_len: None,
            ade_3s: None,
            ade_5s: None,
            smoothness_pre: None,
            smoothness_post: None,
            outliers: None,
            keypoints: None,
            windows: None,
            refined: None,
        };
        match &eval.outcome {
            RecordOutcome::Scored(s) => {
                line.input_len = Some(s.input_len);
                line.ade_3s = Some(s.ade_3s);
                line.ade_5s = Some(s.ade_5s);
                line.smoothness_pre = Some(s.smoothness_pre);
                line.smoothness_post = Some(s.smoothness_post);
                if let Some(r) = &s.report {
                    line.outliers = Some(&r.outlier_indices);
                    line.keypoints = Some(&r.keypoint_indices);
                    line.windows = Some(&r.window_used);
                }
                line.refined = Some(s.refined.to_pairs());
            }
            RecordOutcome::ParseFailure(e) => {
                line.status = "parse_failure";
                line.error_kind = Some(e.kind());
                line.error = Some(e.to_string());
            }
            RecordOutcome::LengthFailure(msg) => {
                line.status = "length_failure";
                line.error_kind = Some("length");
                line.error = Some(msg.clone());
            }
        }
        line
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), PipelineError> {
    fs::write(path, contents).map_err(io_err(path))
}

fn plot_name(index: usize, id: &str) -> String {
    let safe: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{index:05}_{safe}.svg")
}

/// Evaluates already-loaded records and writes all outputs into
/// `cfg.output`. Files are written from this thread only, in input order.
pub fn run_records(
    records: &[EvalRecord],
    cfg: &RunConfig,
) -> Result<(EvalSummary, usize), PipelineError> {
    cfg.validate()?;
    let opts = EvalOptions {
        refinement: cfg.refine.then_some(cfg.refinement),
        target_len: cfg.target_len,
        workers: cfg.workers,
        tokens: SpecialTokens::default(),
    };
    let evaluations = evaluate_all(records, &opts);
    let summary = aggregate(&evaluations);

    let out_dir = &cfg.output;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let records_path = out_dir.join(RECORDS_FILE);
    let file = fs::File::create(&records_path).map_err(io_err(&records_path))?;
    let mut writer = BufWriter::new(file);
    for eval in &evaluations {
        serde_json::to_writer(&mut writer, &DiagnosticLine::new(eval))?;
        writer.write_all(b"\n").map_err(io_err(&records_path))?;
    }
    writer.flush().map_err(io_err(&records_path))?;

    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    write_file(&out_dir.join(SUMMARY_JSON), json.as_bytes())?;
    write_file(
        &out_dir.join(SUMMARY_TEXT),
        summary.to_report_text().as_bytes(),
    )?;

    let mut plots_written = 0;
    if cfg.emit_plots {
        let plot_dir = out_dir.join(PLOTS_DIR);
        fs::create_dir_all(&plot_dir).map_err(io_err(&plot_dir))?;
        for (index, (eval, record)) in evaluations.iter().zip(records).enumerate() {
            let RecordOutcome::Scored(s) = &eval.outcome else {
                continue;
            };
            let flagged = s
                .report
                .as_ref()
                .is_some_and(|r| !r.outlier_indices.is_empty() || !r.keypoint_indices.is_empty());
            if !flagged {
                continue;
            }
            let svg = render_overlay(&eval.id, &s.normalized, &s.refined, Some(&record.gt));
            write_file(&plot_dir.join(plot_name(index, &eval.id)), svg.as_bytes())?;
            plots_written += 1;
        }
    }
    Ok((summary, plots_written))
}

/// load → parse → normalize → refine → evaluate, writing results to
/// `cfg.output`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunOutput, PipelineError> {
    cfg.validate()?;
    let loaded = load_records(&cfg.input)?;
    let (summary, plots_written) = run_records(&loaded.records, cfg)?;
    Ok(RunOutput {
        summary,
        load_diagnostics: loaded.diagnostics,
        plots_written,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plot_names_are_filesystem_safe() {
        assert_eq!(plot_name(3, "a/b c"), "00003_a_b_c.svg");
    }
}
