//! Human assessment scores: attribute correlations and score-threshold harvesting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    correlation_report, harvest_metrics_with, pearson, CorrelationReport, HarvestReport, HARVEST_THRESHOLD,
};

pub const HUMAN_HEADER: [&str; 5] = ["sample_id", "mean_brix", "color_score", "lignification", "berry_shape"];
pub const ATTRIBUTES: [&str; 4] = ["mean_brix", "color_score", "lignification", "berry_shape"];
pub const DEFAULT_SCORE_THRESHOLD: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanScore {
    pub sample_id: String,
    pub mean_brix: f64,
    pub color_score: f64,
    pub lignification: f64,
    pub berry_shape: f64,
}

impl HumanScore {
    fn attribute(&self, k: usize) -> f64 {
        match k {
            0 => self.mean_brix,
            1 => self.color_score,
            2 => self.lignification,
            _ => self.berry_shape,
        }
    }
}

pub fn parse_human_scores(text: &str) -> Result<Vec<HumanScore>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = rdr.records();
    let header = rows.next().ok_or(Error::EmptyInput("human scores file is empty"))??;
    if header.iter().ne(HUMAN_HEADER) {
        return Err(Error::MalformedRow {
            line: 1,
            reason: format!("expected header `{}`", HUMAN_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for row in rows {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != HUMAN_HEADER.len() {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected {} fields, got {}", HUMAN_HEADER.len(), row.len()),
            });
        }
        let num = |i: usize| -> Result<f64> {
            row[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::MalformedRow {
                    line,
                    reason: format!("{} `{}` is not a number", HUMAN_HEADER[i], &row[i]),
                })
        };
        out.push(HumanScore {
            sample_id: row[0].to_string(),
            mean_brix: num(1)?,
            color_score: num(2)?,
            lignification: num(3)?,
            berry_shape: num(4)?,
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyInput("human scores file has no rows"));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanAnalysis {
    pub n: usize,
    pub attributes: Vec<String>,
    /// Pearson matrix over `attributes`; `null` where a column is constant.
    pub correlation: Vec<Vec<Option<f64>>>,
    /// Each score attribute against mean Brix.
    pub vs_brix: Vec<(String, Option<CorrelationReport>)>,
    pub score_threshold: f64,
    pub brix_threshold: f64,
    /// Color score at or above `score_threshold` taken as "harvest".
    pub harvest: HarvestReport,
}

pub fn analyze_human_scores(scores: &[HumanScore], score_threshold: f64) -> Result<HumanAnalysis> {
    if scores.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: scores.len(),
        });
    }
    let cols: Vec<Vec<f64>> = (0..ATTRIBUTES.len())
        .map(|k| scores.iter().map(|s| s.attribute(k)).collect())
        .collect();
    let correlation = cols
        .iter()
        .map(|a| cols.iter().map(|b| pearson(a, b).ok()).collect())
        .collect();
    let vs_brix = (1..ATTRIBUTES.len())
        .map(|k| (ATTRIBUTES[k].to_string(), correlation_report(&cols[k], &cols[0]).ok()))
        .collect();
    let harvest = harvest_metrics_with(&cols[1], score_threshold, &cols[0], HARVEST_THRESHOLD)?;
    Ok(HumanAnalysis {
        n: scores.len(),
        attributes: ATTRIBUTES.iter().map(|s| s.to_string()).collect(),
        correlation,
        vs_brix,
        score_threshold,
        brix_threshold: HARVEST_THRESHOLD,
        harvest,
    })
}
