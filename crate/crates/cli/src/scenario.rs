//! Scenario files: the JSON schema the CLI accepts and its validation.

use serde::Deserialize;

use segmarket::market::{binary_segmentation, perfect_segmentation, pooled_segmentation, Prior, Segmentation, Submarket, SurplusSplit};
use segmarket::meeting::MeetingFunction;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub meeting: MeetingFunction,
    pub prior: PriorSpec,
    pub k: f64,
    pub lambda: SurplusSplit,
    #[serde(default)]
    pub segmentation: Option<SegmentationSpec>,
    #[serde(default)]
    pub options: Options,
}

/// `{"kind":"uniform","n":…}` or `{"grid":[…],"weights":[…]}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    #[serde(default)]
    kind: Option<String>,
    #[serde(default)]
    n: Option<usize>,
    #[serde(default)]
    grid: Option<Vec<f64>>,
    #[serde(default)]
    weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SegmentationSpec {
    Perfect,
    Pooled,
    Binary {
        cutoff_index: usize,
        #[serde(default)]
        split: Option<f64>,
    },
    Explicit {
        submarkets: Vec<Submarket>,
    },
}

/// Command-specific knobs; command-line flags take precedence.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    pub mesh: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    /// Random segmentations checked against the designed bound.
    pub probes: Option<usize>,
    pub exhaustive: Option<bool>,
    pub max_n: Option<usize>,
    /// Evaluate the linear program at this reservation value instead of solving for it.
    pub u: Option<f64>,
    /// Buyer share at the cutoff for the Hosios-compatible share table.
    pub lambda_at_cutoff: Option<f64>,
}

/// A scenario whose components passed every validator.
#[derive(Debug, Clone)]
pub struct Validated {
    pub meeting: MeetingFunction,
    pub prior: Prior,
    pub k: f64,
    pub lambda: SurplusSplit,
    pub segmentation: Segmentation,
    pub options: Options,
}

impl Validated {
    /// The constant buyer share, when the split is constant across types.
    pub fn constant_ell(&self) -> Option<f64> {
        let values = self.lambda.values_on(&self.prior).ok()?;
        let first = values[0];
        values.iter().all(|&v| v == first).then_some(first)
    }
}

impl PriorSpec {
    fn build(&self) -> Result<Prior, CliError> {
        match (&self.kind, self.n, &self.grid, &self.weights) {
            (Some(kind), Some(n), None, None) if kind == "uniform" => Ok(Prior::uniform(n)?),
            (None, None, Some(grid), Some(weights)) => Ok(Prior::new(grid.clone(), weights.clone())?),
            _ => Err(CliError::validation(
                "prior must be {\"kind\":\"uniform\",\"n\":…} or {\"grid\":[…],\"weights\":[…]}",
            )),
        }
    }
}

impl SegmentationSpec {
    fn build(&self, prior: &Prior) -> Result<Segmentation, CliError> {
        Ok(match self {
            SegmentationSpec::Perfect => perfect_segmentation(prior),
            SegmentationSpec::Pooled => pooled_segmentation(prior),
            SegmentationSpec::Binary { cutoff_index, split } => binary_segmentation(prior, *cutoff_index, *split)?.segmentation,
            SegmentationSpec::Explicit { submarkets } => Segmentation::new(submarkets.clone())?,
        })
    }
}

pub fn parse(text: &str) -> Result<Validated, CliError> {
    let raw: Scenario = serde_json::from_str(text).map_err(|e| CliError::validation(format!("scenario: {e}")))?;
    validate(raw)
}

fn validate(raw: Scenario) -> Result<Validated, CliError> {
    if !(raw.k > 0.0 && raw.k.is_finite()) {
        return Err(CliError::validation(format!("k must be positive, got {}", raw.k)));
    }
    let prior = raw.prior.build()?;
    // re-run the constructors so deserialized splits get the same checks
    let lambda = match &raw.lambda {
        SurplusSplit::Constant { ell } => SurplusSplit::constant(*ell)?,
        SurplusSplit::Table { values } => SurplusSplit::table(values.clone())?,
    };
    lambda.values_on(&prior)?;
    let segmentation = raw.segmentation.as_ref().unwrap_or(&SegmentationSpec::Perfect).build(&prior)?;
    let check = segmarket::market::verify_consistency(&prior, &segmentation)?;
    if !check.consistent {
        return Err(CliError::validation("segmentation is not consistent with the prior"));
    }
    Ok(Validated { meeting: raw.meeting, prior, k: raw.k, lambda, segmentation, options: raw.options })
}
