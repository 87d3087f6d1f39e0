use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a variable sits in the plant; governs how far back its delay is searched.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableGroup {
    /// Measured inside the SCR reactor loop; delays up to 600 s.
    ScrInternal,
    /// Unit-level operating parameters (load, coal, air); delays up to 300 s.
    UnitLevel,
}

impl VariableGroup {
    /// Longest delay searched for this group, in seconds.
    pub fn max_delay_seconds(self) -> f64 {
        match self {
            VariableGroup::ScrInternal => 600.0,
            VariableGroup::UnitLevel => 300.0,
        }
    }

    /// Longest delay in samples for a given sampling period.
    pub fn max_delay_samples(self, sample_period: f64) -> usize {
        (self.max_delay_seconds() / sample_period).floor() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableSchema {
    pub label: String,
    pub unit: String,
    pub expected_range: (f64, f64),
    pub group: VariableGroup,
}

impl VariableSchema {
    pub fn new(label: &str, unit: &str, range: (f64, f64), group: VariableGroup) -> Self {
        Self {
            label: label.to_string(),
            unit: unit.to_string(),
            expected_range: range,
            group,
        }
    }
}

/// Ordered column list with one designated target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    variables: Vec<VariableSchema>,
    target: String,
}

impl Schema {
    pub fn new(variables: Vec<VariableSchema>, target: &str) -> Result<Self> {
        let mut seen = HashSet::new();
        for v in &variables {
            if !seen.insert(v.label.as_str()) {
                return Err(Error::Schema(format!("duplicate label {:?}", v.label)));
            }
            let (lo, hi) = v.expected_range;
            if !(lo < hi) {
                return Err(Error::Schema(format!(
                    "expected range of {:?} must satisfy min < max, got ({lo}, {hi})",
                    v.label
                )));
            }
        }
        if !seen.contains(target) {
            return Err(Error::Schema(format!("target {target:?} is not a column")));
        }
        Ok(Self {
            variables,
            target: target.to_string(),
        })
    }

    /// The sixteen operating variables of the reference SCR unit, target `Y`.
    pub fn table1() -> Self {
        use VariableGroup::*;
        let v = VariableSchema::new;
        Self::new(
            vec![
                v("Y", "mg/Nm3", (21.378, 37.241), ScrInternal),
                v("NOx", "mg/Nm3", (89.921, 317.043), ScrInternal),
                v("O2in", "%", (3.673, 5.856), ScrInternal),
                v("CO", "mg/Nm3", (4.275, 864.527), ScrInternal),
                v("F", "Nm3/h", (115.333, 149.616), ScrInternal),
                v("Pin", "kPa", (-1.155, -0.549), ScrInternal),
                v("Tin", "degC", (350.000, 371.427), ScrInternal),
                v("Q", "m3/h", (43.813, 129.658), ScrInternal),
                v("3AB", "A", (0.220, 0.708), ScrInternal),
                v("Pout", "kPa", (-1.614, -0.979), ScrInternal),
                v("Tout", "degC", (350.876, 371.053), ScrInternal),
                v("O2out", "%", (3.566, 6.161), ScrInternal),
                v("NH3", "ppm", (1.878, 2.379), ScrInternal),
                v("Ne", "MW", (765.312, 967.453), UnitLevel),
                v("TF", "t/h", (251.343, 357.814), UnitLevel),
                v("TA", "t/h", (2783.210, 3406.900), UnitLevel),
            ],
            "Y",
        )
        .expect("reference schema is valid")
    }

    /// Builds a schema for arbitrary labels. Ranges are placeholders and every
    /// input is treated as SCR-internal.
    pub fn infer(labels: &[String], target: &str) -> Result<Self> {
        let vars = labels
            .iter()
            .map(|l| VariableSchema::new(l, "", (f64::MIN, f64::MAX), VariableGroup::ScrInternal))
            .collect();
        Self::new(vars, target)
    }

    pub fn variables(&self) -> &[VariableSchema] {
        &self.variables
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.variables.iter().map(|v| v.label.as_str())
    }

    /// Non-target labels in schema order.
    pub fn candidates(&self) -> Vec<String> {
        self.labels()
            .filter(|l| *l != self.target)
            .map(str::to_string)
            .collect()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.label == label)
    }

    pub fn get(&self, label: &str) -> Option<&VariableSchema> {
        self.variables.iter().find(|v| v.label == label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table1_has_fifteen_candidates() {
        let s = Schema::table1();
        assert_eq!(s.len(), 16);
        assert_eq!(s.target(), "Y");
        assert_eq!(s.candidates().len(), 15);
        assert_eq!(s.get("TA").unwrap().group, VariableGroup::UnitLevel);
        assert_eq!(s.get("Q").unwrap().group.max_delay_samples(10.0), 60);
        assert_eq!(s.get("Ne").unwrap().group.max_delay_samples(10.0), 30);
    }

    #[test]
    fn rejects_duplicates_and_bad_ranges() {
        let a = VariableSchema::new("a", "", (0.0, 1.0), VariableGroup::ScrInternal);
        let bad = VariableSchema::new("b", "", (1.0, 1.0), VariableGroup::ScrInternal);
        assert!(Schema::new(vec![a.clone(), a.clone()], "a").is_err());
        assert!(Schema::new(vec![a.clone(), bad], "a").is_err());
        assert!(Schema::new(vec![a], "zzz").is_err());
    }
}
