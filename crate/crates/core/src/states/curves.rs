use chrono::NaiveDate;
use std::io::Write;

use crate::data::CountryPanel;
use crate::error::Result;
use crate::model::{transition_matrix, Matrix3};
use crate::params::ParameterSet;

/// Week-by-week transition matrices driven by covariates alone.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityCurves {
    pub country_id: String,
    pub weeks: Vec<NaiveDate>,
    pub probs: Vec<Matrix3>,
}

pub fn probability_curves(params: &ParameterSet, panel: &CountryPanel) -> Result<ProbabilityCurves> {
    let probs = (0..panel.len())
        .map(|k| transition_matrix(params, panel.x_row(k)).map(|m| m.probs))
        .collect::<Result<Vec<_>>>()?;
    Ok(ProbabilityCurves { country_id: panel.country_id.clone(), weeks: panel.weeks.clone(), probs })
}

/// `country_id,week_start,p11,p12,...,p33`.
pub fn write_curves_csv<W: Write>(sink: W, curves: &[ProbabilityCurves]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["country_id".to_string(), "week_start".into()];
    for i in 1..=3 {
        for j in 1..=3 {
            header.push(format!("p{i}{j}"));
        }
    }
    w.write_record(&header).map_err(std::io::Error::other)?;
    for c in curves {
        for (week, m) in c.weeks.iter().zip(&c.probs) {
            let mut row = vec![c.country_id.clone(), week.to_string()];
            row.extend(m.iter().flatten().map(|v| v.to_string()));
            w.write_record(&row).map_err(std::io::Error::other)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_panel, random_params};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_covariates_give_constant_rows_summing_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let params = random_params(&mut rng, 4);
        let mut panel = random_panel(&mut rng, &params, 20, 0.0);
        let first = panel.x_row(0).to_vec();
        for k in 0..panel.len() {
            panel.x[k * 4..(k + 1) * 4].copy_from_slice(&first);
        }
        let c = probability_curves(&params, &panel).unwrap();
        for m in &c.probs {
            assert_eq!(m, &c.probs[0]);
            for row in m {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn csv_has_nine_columns_per_week() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let params = random_params(&mut rng, 4);
        let panel = random_panel(&mut rng, &params, 6, 0.0);
        let mut buf = Vec::new();
        write_curves_csv(&mut buf, &[probability_curves(&params, &panel).unwrap()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 7);
        assert!(lines[0].ends_with("p31,p32,p33"));
        assert_eq!(lines[1].split(',').count(), 11);
    }
}
