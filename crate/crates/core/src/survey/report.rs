//! Report bundle: `report.json` plus one CSV per table under `tables/`.
//!
//! Regenerating from the same dataset and options gives byte-identical files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::analysis::{likeliness_distribution, mean_mode, timing_averages, Filter};
use super::{Cohort, LikertCoding, SurveyDataset, SurveyError, QUESTIONS};
use crate::bank::Category;
use crate::stats::{round_to, Rounding};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub rounding: Rounding,
    pub coding: LikertCoding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortCount {
    pub cohort: Cohort,
    pub respondents: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanModeEntry {
    pub question: usize,
    pub cohort: Cohort,
    pub n: u64,
    pub mean: f64,
    pub mean_display: f64,
    pub modes: Vec<u8>,
    pub counts: [u64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingEntry {
    pub category: Category,
    pub per_question: Vec<Option<f64>>,
    pub average: f64,
    pub average_display: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelinessEntry {
    pub category: Category,
    pub respondents: u64,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyReport {
    pub respondents: u64,
    pub cohorts: Vec<CohortCount>,
    pub rounding: Rounding,
    pub coding: LikertCoding,
    /// Question by cohort; cells with no respondents are left out.
    pub mean_mode: Vec<MeanModeEntry>,
    pub timing: Vec<TimingEntry>,
    pub likeliness: Vec<LikelinessEntry>,
}

pub fn build_report(dataset: &SurveyDataset, options: &ReportOptions) -> Result<SurveyReport, SurveyError> {
    options.coding.validate()?;
    let cohorts = Cohort::ALL
        .iter()
        .map(|c| CohortCount {
            cohort: *c,
            respondents: dataset.records.iter().filter(|r| r.cohort == *c).count() as u64,
        })
        .collect();

    let mut grid = Vec::new();
    for question in 1..=QUESTIONS {
        for cohort in Cohort::ALL {
            match mean_mode::<f64>(dataset, question, &Filter::cohort(cohort), &options.coding) {
                Ok(mm) => grid.push(MeanModeEntry {
                    question,
                    cohort,
                    n: mm.n,
                    mean: mm.mean,
                    mean_display: round_to(mm.mean, 2, options.rounding),
                    modes: mm.modes,
                    counts: mm.counts,
                }),
                Err(SurveyError::EmptySelection) => {}
                Err(e) => return Err(e),
            }
        }
    }

    let timing = match timing_averages::<f64>(dataset, options.rounding) {
        Ok(rows) => rows
            .into_iter()
            .map(|(category, row)| TimingEntry {
                category,
                per_question: row.per_question.to_vec(),
                average: row.average,
                average_display: row.display,
            })
            .collect(),
        Err(SurveyError::EmptySelection) => Vec::new(),
        Err(e) => return Err(e),
    };

    let likeliness = match likeliness_distribution(dataset) {
        Ok(dist) => dist
            .into_iter()
            .map(|(category, percent)| LikelinessEntry {
                category,
                respondents: dataset
                    .records
                    .iter()
                    .filter(|r| r.preferred_category == Some(category))
                    .count() as u64,
                percent,
            })
            .collect(),
        Err(SurveyError::EmptySelection) => Vec::new(),
        Err(e) => return Err(e),
    };

    Ok(SurveyReport {
        respondents: dataset.len() as u64,
        cohorts,
        rounding: options.rounding,
        coding: options.coding,
        mean_mode: grid,
        timing,
        likeliness,
    })
}

/// Writes `report.json` and `tables/{timing,mean_mode,likeliness}.csv`
/// under `out_dir`, creating it if needed.
pub fn export_report(dataset: &SurveyDataset, out_dir: &Path, options: &ReportOptions) -> Result<SurveyReport, SurveyError> {
    let report = build_report(dataset, options)?;
    let tables = out_dir.join("tables");
    fs::create_dir_all(&tables)?;

    let mut json = serde_json::to_vec_pretty(&report).map_err(std::io::Error::other)?;
    json.push(b'\n');
    fs::write(out_dir.join("report.json"), json)?;

    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    write_csv(
        &tables.join("timing.csv"),
        &["category", "q1", "q2", "q3", "q4", "q5", "average", "average_display"],
        report.timing.iter().map(|t| {
            let mut row = vec![t.category.as_str().to_owned()];
            row.extend(t.per_question.iter().map(|v| opt(*v)));
            row.push(t.average.to_string());
            row.push(format!("{:.2}", t.average_display));
            row
        }),
    )?;
    write_csv(
        &tables.join("mean_mode.csv"),
        &["question", "cohort", "n", "mean", "mean_display", "modes"],
        report.mean_mode.iter().map(|m| {
            vec![
                m.question.to_string(),
                m.cohort.as_str().to_owned(),
                m.n.to_string(),
                m.mean.to_string(),
                format!("{:.2}", m.mean_display),
                m.modes.iter().map(u8::to_string).collect::<Vec<_>>().join(";"),
            ]
        }),
    )?;
    write_csv(
        &tables.join("likeliness.csv"),
        &["category", "respondents", "percent"],
        report
            .likeliness
            .iter()
            .map(|l| vec![l.category.as_str().to_owned(), l.respondents.to_string(), l.percent.to_string()]),
    )?;
    Ok(report)
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<(), SurveyError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    w.write_record(header).map_err(csv_io)?;
    for row in rows {
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> SurveyError {
    SurveyError::Io(std::io::Error::other(e))
}
