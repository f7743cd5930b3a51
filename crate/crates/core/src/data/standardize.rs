use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};

/// Centering/scaling statistics for one continuous covariate column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
}

/// Frozen pooled statistics; held-out panels are scaled with the same values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationReport {
    /// Always `"population"`: the divisor is the pooled count, not count - 1.
    pub sd_convention: String,
    pub columns: Vec<ColumnScale>,
}

impl StandardizationReport {
    /// Pooled mean and population sd of each column over all rows.
    pub fn fit<'a>(names: &[&str], rows: impl IntoIterator<Item = &'a [f64]> + Clone) -> Result<Self> {
        let k = names.len();
        let mut sum = vec![0.0; k];
        let mut count = 0usize;
        for row in rows.clone() {
            for (s, v) in sum.iter_mut().zip(row) {
                *s += v;
            }
            count += 1;
        }
        if count == 0 {
            return Err(Error::Invalid("no rows to standardize".into()));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut ss = vec![0.0; k];
        for row in rows {
            for ((s, v), m) in ss.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let mut columns = Vec::with_capacity(k);
        for (j, name) in names.iter().enumerate() {
            let sd = (ss[j] / count as f64).sqrt();
            // relative guard: constant columns leave only rounding noise
            if !(sd > 1e-12 * mean[j].abs().max(1.0)) {
                return Err(Error::ZeroVariance(name.to_string()));
            }
            columns.push(ColumnScale { name: name.to_string(), mean: mean[j], sd });
        }
        Ok(StandardizationReport { sd_convention: "population".into(), columns })
    }

    pub fn apply(&self, row: &mut [f64]) {
        for (v, col) in row.iter_mut().zip(&self.columns) {
            *v = (*v - col.mean) / col.sd;
        }
    }

    pub fn column(&self, name: &str) -> Option<&ColumnScale> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Undo the scaling of one named column.
    pub fn unscale(&self, name: &str, value: f64) -> Option<f64> {
        self.column(name).map(|c| value * c.sd + c.mean)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}
