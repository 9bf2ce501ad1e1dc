//! McNemar's test on paired per-example outcomes.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF};

use super::{EvalError, EvalOutcome, Result};

/// Discordant pairs at or below this count use the exact binomial test.
pub const EXACT_LIMIT: u64 = 25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    /// Examples where system A is right and B wrong.
    pub b: u64,
    /// Examples where system A is wrong and B right.
    pub c: u64,
    pub exact: bool,
    /// Continuity-corrected chi-square statistic; absent for the exact test.
    pub statistic: Option<f64>,
    pub p_value: f64,
}

/// Two-sided p-value from discordant counts.
pub fn mcnemar_from_counts(b: u64, c: u64) -> McNemarResult {
    let n = b + c;
    if n == 0 {
        return McNemarResult {
            b,
            c,
            exact: true,
            statistic: None,
            p_value: 1.0,
        };
    }
    if n <= EXACT_LIMIT {
        let binom = Binomial::new(0.5, n).expect("valid binomial");
        let p = (2.0 * binom.cdf(b.min(c))).min(1.0);
        return McNemarResult {
            b,
            c,
            exact: true,
            statistic: None,
            p_value: p,
        };
    }
    let diff = (b as f64 - c as f64).abs() - 1.0;
    let stat = diff.max(0.0).powi(2) / n as f64;
    let p = ChiSquared::new(1.0).expect("valid chi-square").sf(stat);
    McNemarResult {
        b,
        c,
        exact: false,
        statistic: Some(stat),
        p_value: p.clamp(0.0, 1.0),
    }
}

/// Pairs outcomes by position; example ids must agree pairwise.
pub fn mcnemar_test(a: &[EvalOutcome], b: &[EvalOutcome]) -> Result<McNemarResult> {
    if a.len() != b.len() {
        return Err(EvalError::MisalignedOutcomes(format!("{} vs {} outcomes", a.len(), b.len())));
    }
    let (mut only_a, mut only_b) = (0, 0);
    for (x, y) in a.iter().zip(b) {
        if x.example_id != y.example_id {
            return Err(EvalError::MisalignedOutcomes(format!(
                "example {} paired with {}",
                x.example_id, y.example_id
            )));
        }
        match (x.matched, y.matched) {
            (true, false) => only_a += 1,
            (false, true) => only_b += 1,
            _ => {}
        }
    }
    Ok(mcnemar_from_counts(only_a, only_b))
}
