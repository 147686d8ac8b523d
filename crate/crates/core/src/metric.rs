//! Rank-based evaluation statistics: prediction probability PK, Kendall
//! tau-b, and the unpaired t-test.
//!
//! PK scores how well a prediction ranks pairs of samples against a
//! reference rater. Over all unordered pairs with distinct reference
//! values: concordant pairs count as 1, prediction ties as 1/2, discordant
//! pairs as 0, normalized by the number of considered pairs. 1.0 is a
//! perfect ranking, 0.5 is chance.
//!
//! Tie detection uses exact equality by default; an epsilon can be supplied
//! where inputs carry float noise.

use rand::Rng as _;
use thiserror::Error;

use crate::seeds;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("length mismatch: reference has {reference}, prediction has {prediction}")]
    LengthMismatch { reference: usize, prediction: usize },
    #[error("need at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("PK undefined: all reference values are tied")]
    AllReferencesTied,
    #[error("tau-b undefined: denominator is zero (one input is constant)")]
    TauDenominatorZero,
    #[error("t-test needs at least 2 samples per group, got {0} and {1}")]
    GroupTooSmall(usize, usize),
    #[error("t-test undefined: {0}")]
    DegenerateVariance(String),
    #[error("no reference columns supplied")]
    NoColumns,
    #[error("bootstrap needs at least 1 resample")]
    NoResamples,
}

/// Pair counts and PK value against a single reference rater.
#[derive(Debug, Clone, PartialEq)]
pub struct PkReport {
    /// Pairs with distinct reference values (`concordant + discordant + ties_pred_only`).
    pub n_pairs_considered: u64,
    pub concordant: u64,
    pub discordant: u64,
    /// Considered pairs where only the prediction is tied.
    pub ties_pred_only: u64,
    pub pk: f64,
}

/// Per-rater PK reports plus their arithmetic mean.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragePk {
    pub per_rater: Vec<PkReport>,
    pub mean_pk: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TTestVariant {
    Welch,
    Student,
}

impl std::fmt::Display for TTestVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TTestVariant::Welch => write!(f, "welch"),
            TTestVariant::Student => write!(f, "student"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_two_tailed: f64,
    pub variant: TTestVariant,
}

#[inline]
fn cmp_eps(a: f64, b: f64, eps: f64) -> std::cmp::Ordering {
    if (a - b).abs() <= eps {
        std::cmp::Ordering::Equal
    } else if a < b {
        std::cmp::Ordering::Less
    } else {
        std::cmp::Ordering::Greater
    }
}

/// Prediction probability of `prediction` against one reference rater.
pub fn pk(reference: &[f64], prediction: &[f64]) -> Result<PkReport, MetricError> {
    pk_with_epsilon(reference, prediction, 0.0)
}

/// PK with an explicit tie tolerance (used for both vectors).
pub fn pk_with_epsilon(reference: &[f64], prediction: &[f64], eps: f64) -> Result<PkReport, MetricError> {
    if reference.len() != prediction.len() {
        return Err(MetricError::LengthMismatch {
            reference: reference.len(),
            prediction: prediction.len(),
        });
    }
    let n = reference.len();
    if n < 2 {
        return Err(MetricError::TooShort(n));
    }
    let mut concordant = 0u64;
    let mut discordant = 0u64;
    let mut ties_pred_only = 0u64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dref = cmp_eps(reference[i], reference[j], eps);
            if dref == std::cmp::Ordering::Equal {
                continue;
            }
            match cmp_eps(prediction[i], prediction[j], eps) {
                std::cmp::Ordering::Equal => ties_pred_only += 1,
                dpred if dpred == dref => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let considered = concordant + discordant + ties_pred_only;
    if considered == 0 {
        return Err(MetricError::AllReferencesTied);
    }
    let pk = (concordant as f64 + ties_pred_only as f64 / 2.0) / considered as f64;
    Ok(PkReport {
        n_pairs_considered: considered,
        concordant,
        discordant,
        ties_pred_only,
        pk,
    })
}

/// PK against each reference column, plus the arithmetic mean.
pub fn average_pk(reference_columns: &[Vec<f64>], prediction: &[f64]) -> Result<AveragePk, MetricError> {
    average_pk_with_epsilon(reference_columns, prediction, 0.0)
}

pub fn average_pk_with_epsilon(
    reference_columns: &[Vec<f64>],
    prediction: &[f64],
    eps: f64,
) -> Result<AveragePk, MetricError> {
    if reference_columns.is_empty() {
        return Err(MetricError::NoColumns);
    }
    let per_rater: Vec<PkReport> = reference_columns
        .iter()
        .map(|col| pk_with_epsilon(col, prediction, eps))
        .collect::<Result<_, _>>()?;
    let mean_pk = per_rater.iter().map(|r| r.pk).sum::<f64>() / per_rater.len() as f64;
    Ok(AveragePk { per_rater, mean_pk })
}

/// Kendall tau-b over all pairs, with the standard tie adjustment:
/// `(C - D) / sqrt((C + D + Tx)(C + D + Ty))` where `Tx`/`Ty` count pairs
/// tied in only one of the two inputs.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch {
            reference: x.len(),
            prediction: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(MetricError::TooShort(n));
    }
    let mut concordant = 0u64;
    let mut discordant = 0u64;
    let mut ties_x_only = 0u64;
    let mut ties_y_only = 0u64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = cmp_eps(x[i], x[j], 0.0);
            let dy = cmp_eps(y[i], y[j], 0.0);
            use std::cmp::Ordering::Equal;
            match (dx, dy) {
                (Equal, Equal) => {}
                (Equal, _) => ties_x_only += 1,
                (_, Equal) => ties_y_only += 1,
                (a, b) if a == b => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let den_x = concordant + discordant + ties_y_only; // pairs distinct in x
    let den_y = concordant + discordant + ties_x_only; // pairs distinct in y
    if den_x == 0 || den_y == 0 {
        return Err(MetricError::TauDenominatorZero);
    }
    let num = concordant as f64 - discordant as f64;
    Ok((num / ((den_x as f64) * (den_y as f64)).sqrt()).clamp(-1.0, 1.0))
}

fn mean_and_var(sample: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let var = sample.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Two-sample unpaired t-test.
///
/// Welch uses per-group variances with the Welch-Satterthwaite degrees of
/// freedom; Student pools the variances with `n_a + n_b - 2` degrees. The
/// two-tailed p-value comes from the regularized incomplete beta function.
pub fn unpaired_t_test(a: &[f64], b: &[f64], variant: TTestVariant) -> Result<TTestResult, MetricError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(MetricError::GroupTooSmall(a.len(), b.len()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mean_a, var_a) = mean_and_var(a);
    let (mean_b, var_b) = mean_and_var(b);
    let (t, df) = match variant {
        TTestVariant::Welch => {
            if var_a <= 0.0 || var_b <= 0.0 {
                return Err(MetricError::DegenerateVariance(
                    "welch requires nonzero variance in both groups".into(),
                ));
            }
            let sa = var_a / na;
            let sb = var_b / nb;
            let se2 = sa + sb;
            let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
            ((mean_a - mean_b) / se2.sqrt(), df)
        }
        TTestVariant::Student => {
            let df = na + nb - 2.0;
            let pooled = ((na - 1.0) * var_a + (nb - 1.0) * var_b) / df;
            if pooled <= 0.0 {
                return Err(MetricError::DegenerateVariance(
                    "student requires positive pooled variance".into(),
                ));
            }
            let se = (pooled * (1.0 / na + 1.0 / nb)).sqrt();
            ((mean_a - mean_b) / se, df)
        }
    };
    Ok(TTestResult {
        t_statistic: t,
        degrees_of_freedom: df,
        p_two_tailed: student_t_two_tailed_p(t, df),
        variant,
    })
}

/// Two-tailed p-value of a t statistic: `I_{df/(df + t^2)}(df/2, 1/2)`.
pub fn student_t_two_tailed_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Mean PK over seeded bootstrap resamples of the evaluation rows.
///
/// Each resample draws `n` row indices with replacement and recomputes the
/// mean PK over all reference columns. Degenerate resamples (all reference
/// values tied) are redrawn from the same stream.
pub fn bootstrap_pk(
    reference_columns: &[Vec<f64>],
    prediction: &[f64],
    resamples: usize,
    seed: u64,
) -> Result<Vec<f64>, MetricError> {
    if resamples == 0 {
        return Err(MetricError::NoResamples);
    }
    // validate the full sample once so errors surface deterministically
    average_pk(reference_columns, prediction)?;
    let n = prediction.len();
    let mut out = Vec::with_capacity(resamples);
    let mut rng = seeds::rng(seeds::derive(seed, "bootstrap-pk"));
    while out.len() < resamples {
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let cols: Vec<Vec<f64>> = reference_columns
            .iter()
            .map(|col| idx.iter().map(|&i| col[i]).collect())
            .collect();
        let pred: Vec<f64> = idx.iter().map(|&i| prediction[i]).collect();
        match average_pk(&cols, &pred) {
            Ok(r) => out.push(r.mean_pk),
            Err(MetricError::AllReferencesTied) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Incomplete beta numerics
// ---------------------------------------------------------------------------

/// Lanczos approximation (g = 7, n = 9).
fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        std::f64::consts::PI.ln() - (std::f64::consts::PI * x).sin().ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut a = COEF[0];
        let t = x + 7.5;
        for (i, &c) in COEF.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
    }
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 3e-16;
    const FPMIN: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}
