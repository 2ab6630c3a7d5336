//! Batch analysis of pre/post workshop questionnaires.
//!
//! Input files are UTF-8 CSV with the header
//! `participant,instrument,timing,i1,...,ik`. Rows may leave trailing item
//! columns empty when an instrument has fewer items than the widest one.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::descriptive::{Descriptives, FiveNumber};
use crate::error::ReportError;
use crate::reliability::{cronbach_alpha, ReliabilityResult};
use crate::scales::{score_chs, score_tssf, score_umux_lite, Instrument, ScaleResponse, Timing};
use crate::ttest::{paired_t, PairedTestResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub participants: usize,
    pub descriptives: Vec<LabeledDescriptives>,
    pub chs: ChsComparison,
    /// Internal consistency of the transportation items, when collected.
    pub tssf_reliability: Option<ReliabilityResult>,
    pub boxplots: Vec<BoxplotSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDescriptives {
    pub label: String,
    #[serde(flatten)]
    pub stats: Descriptives,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChsComparison {
    pub total: PairedTestResult,
    pub agency: PairedTestResult,
    pub pathways: PairedTestResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxplotPanel {
    /// Hope scores before and after the session.
    HopeScores,
    /// Usability and immersion ratings.
    Reception,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotSeries {
    pub panel: BoxplotPanel,
    pub label: String,
    #[serde(flatten)]
    pub summary: FiveNumber,
}

pub fn analyze_workshop_files(pre: &Path, post: &Path) -> Result<AnalysisReport, ReportError> {
    let pre_text = std::fs::read_to_string(pre)?;
    let post_text = std::fs::read_to_string(post)?;
    analyze_workshop(&pre_text, &post_text)
}

pub fn analyze_workshop(pre_csv: &str, post_csv: &str) -> Result<AnalysisReport, ReportError> {
    let pre = parse_responses(pre_csv, "pre", Timing::Pre)?;
    let post = parse_responses(post_csv, "post", Timing::Post)?;

    let chs_pre = responses_for(&pre, Instrument::Chs);
    let chs_post = responses_for(&post, Instrument::Chs);
    if chs_pre.is_empty() || chs_post.is_empty() {
        return Err(ReportError::Parse {
            file: if chs_pre.is_empty() { "pre" } else { "post" }.into(),
            message: "no CHS responses found".into(),
        });
    }
    if let Some(id) = first_unmatched(&chs_pre, &chs_post) {
        return Err(ReportError::ParticipantMismatch(id));
    }

    let mut pre_scores = Vec::new();
    let mut post_scores = Vec::new();
    for (id, items) in &chs_pre {
        pre_scores.push(score(id, score_chs(items))?);
        post_scores.push(score(id, score_chs(&chs_post[id]))?);
    }
    let column = |scores: &[crate::scales::ChsScore], pick: fn(&crate::scales::ChsScore) -> i32| {
        scores.iter().map(|s| f64::from(pick(s))).collect::<Vec<f64>>()
    };
    let total_pre = column(&pre_scores, |s| s.total);
    let total_post = column(&post_scores, |s| s.total);
    let agency_pre = column(&pre_scores, |s| s.agency);
    let agency_post = column(&post_scores, |s| s.agency);
    let pathways_pre = column(&pre_scores, |s| s.pathways);
    let pathways_post = column(&post_scores, |s| s.pathways);

    let chs = ChsComparison {
        total: paired_t(&total_pre, &total_post)?,
        agency: paired_t(&agency_pre, &agency_post)?,
        pathways: paired_t(&pathways_pre, &pathways_post)?,
    };

    let mut descriptives = Vec::new();
    let mut boxplots = Vec::new();
    for (label, values) in [
        ("CHS total (pre)", &total_pre),
        ("CHS total (post)", &total_post),
        ("CHS agency (pre)", &agency_pre),
        ("CHS agency (post)", &agency_post),
        ("CHS pathways (pre)", &pathways_pre),
        ("CHS pathways (post)", &pathways_post),
    ] {
        push_series(&mut descriptives, &mut boxplots, BoxplotPanel::HopeScores, label, values);
    }

    let tssf = responses_for(&post, Instrument::Tssf);
    let mut tssf_scores = Vec::new();
    for (id, items) in &tssf {
        tssf_scores.push(score(id, score_tssf(items))?);
    }
    let umux = responses_for(&post, Instrument::Umux);
    let mut umux_scores = Vec::new();
    for (id, items) in &umux {
        umux_scores.push(score(id, score_umux_lite(items))?);
    }
    push_series(&mut descriptives, &mut boxplots, BoxplotPanel::Reception, "UMUX-Lite", &umux_scores);
    push_series(&mut descriptives, &mut boxplots, BoxplotPanel::Reception, "TS-SF", &tssf_scores);

    let tssf_reliability = if tssf.len() >= 2 {
        let matrix: Vec<Vec<f64>> = tssf
            .values()
            .map(|items| items.iter().map(|&v| f64::from(v)).collect())
            .collect();
        Some(cronbach_alpha(&matrix)?)
    } else {
        None
    };

    Ok(AnalysisReport {
        participants: chs_pre.len(),
        descriptives,
        chs,
        tssf_reliability,
        boxplots,
    })
}

fn push_series(
    descriptives: &mut Vec<LabeledDescriptives>,
    boxplots: &mut Vec<BoxplotSeries>,
    panel: BoxplotPanel,
    label: &str,
    values: &[f64],
) {
    if let (Some(stats), Some(summary)) = (Descriptives::of(values), FiveNumber::of(values)) {
        descriptives.push(LabeledDescriptives { label: label.into(), stats });
        boxplots.push(BoxplotSeries { panel, label: label.into(), summary });
    }
}

fn score<T>(participant: &str, r: Result<T, crate::error::ScoreError>) -> Result<T, ReportError> {
    r.map_err(|source| ReportError::Score {
        participant: participant.to_string(),
        source,
    })
}

fn responses_for(responses: &[ScaleResponse], instrument: Instrument) -> BTreeMap<String, Vec<i32>> {
    responses
        .iter()
        .filter(|r| r.instrument == instrument)
        .map(|r| (r.participant.clone(), r.items.clone()))
        .collect()
}

fn first_unmatched(a: &BTreeMap<String, Vec<i32>>, b: &BTreeMap<String, Vec<i32>>) -> Option<String> {
    a.keys()
        .find(|id| !b.contains_key(*id))
        .or_else(|| b.keys().find(|id| !a.contains_key(*id)))
        .cloned()
}

/// Parses one questionnaire CSV. Every row must carry `expected` timing.
pub fn parse_responses(text: &str, file: &str, expected: Timing) -> Result<Vec<ScaleResponse>, ReportError> {
    let parse_err = |message: String| ReportError::Parse {
        file: file.to_string(),
        message,
    };

    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| parse_err(e.to_string()))?.clone();
    let head: Vec<&str> = headers.iter().take(3).collect();
    if head != ["participant", "instrument", "timing"] {
        return Err(parse_err(format!(
            "expected header `participant,instrument,timing,i1..ik`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let participant = field(0).to_string();
        if participant.is_empty() {
            return Err(parse_err(format!("line {line}: empty participant id")));
        }
        let instrument: Instrument = field(1)
            .parse()
            .map_err(|e| parse_err(format!("line {line}: {e}")))?;
        let timing: Timing = field(2)
            .parse()
            .map_err(|e| parse_err(format!("line {line}: {e}")))?;
        if timing != expected {
            return Err(parse_err(format!(
                "line {line}: timing `{timing}` in the {expected} file"
            )));
        }
        let items = record
            .iter()
            .skip(3)
            .filter(|f| !f.is_empty())
            .map(|f| {
                f.parse::<i32>()
                    .map_err(|_| parse_err(format!("line {line}: item `{f}` is not an integer")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if seen.insert((participant.clone(), instrument), line).is_some() {
            return Err(parse_err(format!(
                "line {line}: duplicate {instrument} row for {participant}"
            )));
        }
        out.push(ScaleResponse {
            participant,
            instrument,
            timing,
            items,
        });
    }
    if out.is_empty() {
        return Err(parse_err("no data rows".into()));
    }
    Ok(out)
}

impl AnalysisReport {
    pub fn to_markdown(&self) -> String {
        let mut md = String::new();
        let _ = writeln!(md, "# Workshop analysis\n");
        let _ = writeln!(md, "Participants: {}\n", self.participants);

        let _ = writeln!(md, "## Hope scores (paired t-tests)\n");
        let _ = writeln!(md, "| Scale | M pre | M post | t | df | p | d_z | d_av |");
        let _ = writeln!(md, "|---|---|---|---|---|---|---|---|");
        for (name, r) in [
            ("Total", &self.chs.total),
            ("Agency", &self.chs.agency),
            ("Pathways", &self.chs.pathways),
        ] {
            let _ = writeln!(
                md,
                "| {name} | {:.2} | {:.2} | {:.2} | {} | {:.3} | {:.2} | {:.2} |",
                r.mean_pre, r.mean_post, r.t, r.df, r.p_two_tailed, r.d_z, r.d_av
            );
        }

        let _ = writeln!(md, "\n## Descriptives\n");
        let _ = writeln!(md, "| Measure | n | M | SD | min | max |");
        let _ = writeln!(md, "|---|---|---|---|---|---|");
        for d in &self.descriptives {
            let sd = d.stats.sd.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
            let _ = writeln!(
                md,
                "| {} | {} | {:.2} | {} | {} | {} |",
                d.label, d.stats.n, d.stats.mean, sd, d.stats.min, d.stats.max
            );
        }

        if let Some(rel) = &self.tssf_reliability {
            let _ = writeln!(md, "\nTS-SF Cronbach's alpha = {:.2} ({} items)", rel.alpha, rel.k_items);
        }

        let _ = writeln!(md, "\n## Boxplot data\n");
        let _ = writeln!(md, "| Panel | Series | min | Q1 | median | Q3 | max |");
        let _ = writeln!(md, "|---|---|---|---|---|---|---|");
        for b in &self.boxplots {
            let panel = match b.panel {
                BoxplotPanel::HopeScores => "hope",
                BoxplotPanel::Reception => "reception",
            };
            let s = &b.summary;
            let _ = writeln!(
                md,
                "| {panel} | {} | {} | {} | {} | {} | {} |",
                b.label, s.min, s.q1, s.median, s.q3, s.max
            );
        }
        md
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "participant,instrument,timing,i1,i2,i3,i4,i5,i6\n";

    #[test]
    fn empty_files_are_parse_errors() {
        assert!(matches!(analyze_workshop("", ""), Err(ReportError::Parse { .. })));
        assert!(matches!(
            analyze_workshop(HEADER, HEADER),
            Err(ReportError::Parse { .. })
        ));
    }

    #[test]
    fn missing_participant_is_named() {
        let pre = format!("{HEADER}A,CHS,pre,1,2,3,4,5,6\nB,CHS,pre,2,2,2,2,2,2\n");
        let post = format!(
            "{HEADER}A,CHS,post,2,2,3,4,5,6\nB,CHS,post,3,2,2,2,2,2\nC,CHS,post,3,3,3,3,3,3\n"
        );
        match analyze_workshop(&pre, &post) {
            Err(ReportError::ParticipantMismatch(id)) => assert_eq!(id, "C"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn timing_must_match_file() {
        let pre = format!("{HEADER}A,CHS,post,1,2,3,4,5,6\n");
        assert!(matches!(
            parse_responses(&pre, "pre", Timing::Pre),
            Err(ReportError::Parse { .. })
        ));
    }

    #[test]
    fn out_of_range_item_names_participant() {
        let pre = format!("{HEADER}A,CHS,pre,1,2,3,4,5,9\nB,CHS,pre,2,2,2,2,2,2\n");
        let post = format!("{HEADER}A,CHS,post,2,2,3,4,5,6\nB,CHS,post,3,2,2,2,2,2\n");
        match analyze_workshop(&pre, &post) {
            Err(ReportError::Score { participant, .. }) => assert_eq!(participant, "A"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn short_rows_with_trailing_blanks() {
        let post = format!("{HEADER}A,UMUX,post,6,7,,,,\n");
        let rows = parse_responses(&post, "post", Timing::Post).unwrap();
        assert_eq!(rows[0].items, vec![6, 7]);
    }
}
