use serde::{Deserialize, Serialize};

use super::fit::FittedModel;
use crate::error::{Error, Result};

/// Standard normal CDF via the complementary error function (musl `erfc`,
/// accurate to about one ulp, including deep in the tails).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `2 (1 − Φ(|z|))`, computed without cancellation.
pub fn two_sided_p_value(z: f64) -> f64 {
    libm::erfc(z.abs() / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldRow {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
    /// `None` when the standard error is zero or undefined.
    pub p_value: Option<f64>,
    pub degenerate: bool,
}

pub fn wald_tests(model: &FittedModel) -> Result<Vec<WaldRow>> {
    if !model.converged {
        return Err(Error::NotConverged);
    }
    Ok(model
        .column_names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let estimate = model.coefficients[k];
            let std_error = model.covariance[k][k].sqrt();
            let ok = std_error.is_finite() && std_error > 0.0;
            let z = if ok { estimate / std_error } else { f64::NAN };
            WaldRow {
                name: name.clone(),
                estimate,
                std_error,
                z,
                p_value: ok.then(|| two_sided_p_value(z)),
                degenerate: !ok,
            }
        })
        .collect())
}

/// Fixed-width coefficient table.
pub fn format_wald_table(rows: &[WaldRow]) -> String {
    let mut out = format!(
        "{:<18} {:>12} {:>12} {:>9} {:>10}\n",
        "term", "estimate", "std_error", "z", "p_value"
    );
    for r in rows {
        let p = r.p_value.map_or("degenerate".to_string(), |p| format!("{p:.4}"));
        out.push_str(&format!(
            "{:<18} {:>12.6} {:>12.6} {:>9.3} {:>10}\n",
            r.name, r.estimate, r.std_error, r.z, p
        ));
    }
    out
}
