//! Verification metrics over dissimilarity scores, and run-level statistics.
//!
//! Scores are dissimilarities: a pair is accepted when `score <= threshold`.
//! `FAR(t)` is the fraction of impostor scores `<= t`, `FRR(t)` the fraction
//! of genuine scores `> t`.

use serde::{Deserialize, Serialize};

use crate::verify::ScoreSet;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("{what} needs at least {needed} values, got {got}")]
    TooFew {
        what: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("both score distributions have zero spread")]
    ZeroSpread,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("zero variance of differences")]
    ZeroVarianceOfDifferences,
    #[error("empty curve")]
    EmptyCurve,
}

pub type Result<T> = std::result::Result<T, MetricsError>;

fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(MetricsError::NonFinite(what))
    }
}

/// Mean and population (divide-by-N) standard deviation.
pub fn population_stats(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Decidability `|mu_E - mu_I| / sqrt((sigma_I^2 + sigma_E^2) / 2)` with
/// population standard deviations.
pub fn decidability(genuine: &[f64], impostor: &[f64]) -> Result<f64> {
    for (list, what) in [(genuine, "genuine scores"), (impostor, "impostor scores")] {
        if list.len() < 2 {
            return Err(MetricsError::TooFew {
                what,
                needed: 2,
                got: list.len(),
            });
        }
        check_finite(list, what)?;
    }
    let (mu_i, sd_i) = population_stats(genuine);
    let (mu_e, sd_e) = population_stats(impostor);
    let pooled = ((sd_i * sd_i + sd_e * sd_e) / 2.0).sqrt();
    if pooled == 0.0 {
        return Err(MetricsError::ZeroSpread);
    }
    Ok((mu_e - mu_i).abs() / pooled)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct CurvePoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

impl From<[f64; 3]> for CurvePoint {
    fn from(v: [f64; 3]) -> Self {
        CurvePoint {
            threshold: v[0],
            far: v[1],
            frr: v[2],
        }
    }
}

impl From<CurvePoint> for [f64; 3] {
    fn from(p: CurvePoint) -> Self {
        [p.threshold, p.far, p.frr]
    }
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v
}

/// FAR/FRR at every distinct score, bracketed by one threshold below the
/// minimum (FAR = 0, FRR = 1) and one above the maximum (FAR = 1, FRR = 0).
pub fn far_frr_curve(genuine: &[f64], impostor: &[f64]) -> Result<Vec<CurvePoint>> {
    for (list, what) in [(genuine, "genuine scores"), (impostor, "impostor scores")] {
        if list.is_empty() {
            return Err(MetricsError::TooFew {
                what,
                needed: 1,
                got: 0,
            });
        }
        check_finite(list, what)?;
    }
    let g = sorted(genuine);
    let i = sorted(impostor);
    let lo = g[0].min(i[0]);
    let hi = g[g.len() - 1].max(i[i.len() - 1]);
    let (ng, ni) = (g.len() as f64, i.len() as f64);

    let mut curve = Vec::with_capacity(g.len() + i.len() + 2);
    curve.push(CurvePoint {
        threshold: lo - lo.abs().max(1.0),
        far: 0.0,
        frr: 1.0,
    });
    let (mut gi, mut ii) = (0usize, 0usize);
    while gi < g.len() || ii < i.len() {
        let t = match (g.get(gi), i.get(ii)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while gi < g.len() && g[gi] <= t {
            gi += 1;
        }
        while ii < i.len() && i[ii] <= t {
            ii += 1;
        }
        curve.push(CurvePoint {
            threshold: t,
            far: ii as f64 / ni,
            frr: (g.len() - gi) as f64 / ng,
        });
    }
    curve.push(CurvePoint {
        threshold: hi + hi.abs().max(1.0),
        far: 1.0,
        frr: 0.0,
    });
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EqualErrorRate {
    pub eer: f64,
    pub threshold: f64,
}

/// Equal error rate where the FAR and FRR curves cross.
///
/// An exact `FAR == FRR` point is returned as is. Otherwise both curves are
/// linearly interpolated between the first pair of adjacent points where
/// `FAR - FRR` changes sign. For a curve without a bracketed crossing the
/// point minimizing `|FAR - FRR|` is used with `(FAR + FRR) / 2`.
pub fn eer(curve: &[CurvePoint]) -> Result<EqualErrorRate> {
    if curve.is_empty() {
        return Err(MetricsError::EmptyCurve);
    }
    if let Some(p) = curve.iter().find(|p| p.far == p.frr) {
        return Ok(EqualErrorRate {
            eer: p.far,
            threshold: p.threshold,
        });
    }
    for w in curve.windows(2) {
        let (p, q) = (w[0], w[1]);
        let (dp, dq) = (p.far - p.frr, q.far - q.frr);
        if (dp < 0.0) != (dq < 0.0) {
            let s = dp / (dp - dq);
            return Ok(EqualErrorRate {
                eer: p.far + s * (q.far - p.far),
                threshold: p.threshold + s * (q.threshold - p.threshold),
            });
        }
    }
    let p = curve
        .iter()
        .min_by(|a, b| (a.far - a.frr).abs().total_cmp(&(b.far - b.frr).abs()))
        .expect("non-empty curve");
    Ok(EqualErrorRate {
        eer: (p.far + p.frr) / 2.0,
        threshold: p.threshold,
    })
}

/// Summary of one genuine/impostor evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub scheme: String,
    pub metric: String,
    pub eer: f64,
    pub eer_threshold: f64,
    pub decidability: f64,
    pub genuine_count: usize,
    pub impostor_count: usize,
    pub genuine_mean: f64,
    pub genuine_std: f64,
    pub impostor_mean: f64,
    pub impostor_std: f64,
    pub curve: Vec<CurvePoint>,
}

impl VerificationReport {
    pub fn from_scores(scores: &ScoreSet, scheme: impl Into<String>) -> Result<Self> {
        let d = decidability(&scores.genuine, &scores.impostor)?;
        let curve = far_frr_curve(&scores.genuine, &scores.impostor)?;
        let e = eer(&curve)?;
        let (genuine_mean, genuine_std) = population_stats(&scores.genuine);
        let (impostor_mean, impostor_std) = population_stats(&scores.impostor);
        Ok(Self {
            scheme: scheme.into(),
            metric: scores.metric.name().to_string(),
            eer: e.eer,
            eer_threshold: e.threshold,
            decidability: d,
            genuine_count: scores.genuine.len(),
            impostor_count: scores.impostor.len(),
            genuine_mean,
            genuine_std,
            impostor_mean,
            impostor_std,
            curve,
        })
    }

    /// `threshold,far,frr` rows for external DET plotting.
    pub fn det_csv(&self) -> String {
        let mut out = String::from("threshold,far,frr\n");
        for p in &self.curve {
            out.push_str(&format!(
                "{},{},{}\n",
                crate::numfmt::sig9(p.threshold),
                crate::numfmt::sig9(p.far),
                crate::numfmt::sig9(p.frr)
            ));
        }
        out
    }
}

/// Per-run values of one metric, e.g. the EER of each of 30 runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSeries {
    pub name: String,
    pub values: Vec<f64>,
}

impl RunSeries {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunStatistics {
    pub n: usize,
    pub mean: f64,
    /// Sample (divide-by-(N-1)) standard deviation; 0 for a single run.
    pub std: f64,
    /// False when fewer than two runs make `std` meaningless.
    pub std_defined: bool,
}

impl RunStatistics {
    /// Renders `mean±std` with `decimals` places, e.g. `13.98±0.55`.
    pub fn format(&self, scale: f64, decimals: usize) -> String {
        format_mean_std(self.mean * scale, self.std * scale, decimals)
    }
}

pub fn format_mean_std(mean: f64, std: f64, decimals: usize) -> String {
    format!("{mean:.decimals$}±{std:.decimals$}")
}

pub fn run_statistics(series: &RunSeries) -> Result<RunStatistics> {
    let v = &series.values;
    if v.is_empty() {
        return Err(MetricsError::TooFew {
            what: "run series",
            needed: 1,
            got: 0,
        });
    }
    check_finite(v, "run series")?;
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return Ok(RunStatistics {
            n,
            mean,
            std: 0.0,
            std_defined: false,
        });
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    Ok(RunStatistics {
        n,
        mean,
        std: var.sqrt(),
        std_defined: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: usize,
    /// Two-sided p-value.
    pub p: f64,
    pub significant: bool,
}

/// Two-sided paired t-test on `a - b`.
pub fn paired_t_test(a: &RunSeries, b: &RunSeries, alpha: f64) -> Result<TTestResult> {
    if a.values.len() != b.values.len() {
        return Err(MetricsError::LengthMismatch(a.values.len(), b.values.len()));
    }
    let n = a.values.len();
    if n < 2 {
        return Err(MetricsError::TooFew {
            what: "paired series",
            needed: 2,
            got: n,
        });
    }
    let diffs: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
    check_finite(&diffs, "paired differences")?;
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
    // constant differences that picked up rounding noise are still degenerate
    let scale = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if var.sqrt() <= 1e-12 * scale {
        return Err(MetricsError::ZeroVarianceOfDifferences);
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    let df = n - 1;
    let p = students_t_two_sided_p(t, df as f64);
    Ok(TTestResult {
        t,
        df,
        p,
        significant: p < alpha,
    })
}

/// Two-sided tail probability of Student's t: `I_{df/(df+t^2)}(df/2, 1/2)`.
pub fn students_t_two_sided_p(t: f64, df: f64) -> f64 {
    let x = df / (df + t * t);
    regularized_incomplete_beta(x, df / 2.0, 0.5).clamp(0.0, 1.0)
}

/// Regularized incomplete beta `I_x(a, b)` via its continued fraction
/// (modified Lentz evaluation).
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
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

/// Lanczos approximation (g = 7, 9 terms), with reflection below 0.5.
pub fn ln_gamma(x: f64) -> f64 {
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
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin().abs()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}
