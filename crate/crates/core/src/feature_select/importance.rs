use std::io::Write;

use serde::{Deserialize, Serialize};

use super::boost::{fit_gbt_importance, BoostParams};
use super::forest::{fit_forest_importance, ForestParams};
use super::tree::{fit_cart_importance, TreeParams};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub label: String,
    pub cart: f64,
    pub forest: f64,
    pub boosted: f64,
    pub combined: f64,
}

/// Min-max scaled importances of the three learners and their mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub features: Vec<FeatureImportance>,
    /// Learners whose raw scores were all equal and were zeroed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ImportanceReport {
    pub fn get(&self, label: &str) -> Option<&FeatureImportance> {
        self.features.iter().find(|f| f.label == label)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Two-column `label,combined` CSV.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["label", "combined"])?;
        for f in &self.features {
            w.write_record([f.label.clone(), format!("{:?}", f.combined)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Scales `raw` to `[0, 1]`. Returns `None` when every score is equal.
pub fn min_max_scale<T: Real>(raw: &[T]) -> Option<Vec<T>> {
    let lo = raw.iter().copied().fold(T::infinity(), T::min);
    let hi = raw.iter().copied().fold(T::neg_infinity(), T::max);
    if !(hi > lo) {
        return None;
    }
    Some(raw.iter().map(|&v| (v - lo) / (hi - lo)).collect())
}

/// Scales each learner's raw scores and averages them per feature.
pub fn combine_importance<T: Real>(
    labels: &[String],
    cart: &[T],
    forest: &[T],
    boosted: &[T],
) -> Result<ImportanceReport> {
    let p = labels.len();
    for (name, s) in [("cart", cart), ("forest", forest), ("boosted", boosted)] {
        if s.len() != p {
            return Err(Error::invalid(format!(
                "{name} scores cover {} features, expected {p}",
                s.len()
            )));
        }
    }
    let mut warnings = Vec::new();
    let mut scaled = |name: &str, s: &[T]| -> Vec<f64> {
        match min_max_scale(s) {
            Some(v) => v.into_iter().map(Real::as_f64).collect(),
            None => {
                warnings.push(format!("{name} importances are all equal; scaled to 0"));
                vec![0.0; p]
            }
        }
    };
    let c = scaled("cart", cart);
    let f = scaled("forest", forest);
    let b = scaled("boosted", boosted);
    let features = (0..p)
        .map(|i| FeatureImportance {
            label: labels[i].clone(),
            cart: c[i],
            forest: f[i],
            boosted: b[i],
            combined: (c[i] + f[i] + b[i]) / 3.0,
        })
        .collect();
    Ok(ImportanceReport { features, warnings })
}

/// Forced labels plus every label whose combined score exceeds `threshold`,
/// ordered by descending combined score.
pub fn select_features(report: &ImportanceReport, threshold: f64, forced: &[String]) -> Result<Vec<String>> {
    for f in forced {
        if report.get(f).is_none() {
            return Err(Error::UnknownLabel(f.clone()));
        }
    }
    let mut chosen: Vec<&FeatureImportance> = report
        .features
        .iter()
        .filter(|f| f.combined > threshold || forced.contains(&f.label))
        .collect();
    chosen.sort_by(|a, b| b.combined.total_cmp(&a.combined));
    Ok(chosen.into_iter().map(|f| f.label.clone()).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub cart: TreeParams,
    pub forest: ForestParams,
    pub boost: BoostParams,
    pub threshold: f64,
    pub forced: Vec<String>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            cart: TreeParams::default(),
            forest: ForestParams::default(),
            boost: BoostParams::default(),
            threshold: 0.2,
            forced: vec!["NOx".to_string()],
        }
    }
}

/// Runs all three learners on column-major `x` and combines their scores.
pub fn compute_importance<T: Real>(
    labels: &[String],
    x: &[Vec<T>],
    y: &[T],
    cfg: &SelectionConfig,
) -> Result<ImportanceReport> {
    if labels.len() != x.len() {
        return Err(Error::Dimension {
            expected: labels.len(),
            got: x.len(),
        });
    }
    let ((cart, forest), boosted) = rayon::join(
        || {
            rayon::join(
                || fit_cart_importance(x, y, cfg.cart),
                || fit_forest_importance(x, y, &cfg.forest),
            )
        },
        || fit_gbt_importance(x, y, cfg.boost),
    );
    combine_importance(labels, &cart?, &forest?, &boosted?)
}
