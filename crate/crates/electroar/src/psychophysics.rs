//! The subjective-intensity transfer function `S = F(p)`, its inverse,
//! and a deterministic least-squares fit from magnitude-estimation data.
//!
//! `F(p) = k / (1 + exp(a - b*p))` maps a stimulation probability
//! `p in [0,1]` to a reported magnitude relative to the reference level
//! 100. The inverse uses the natural logarithm:
//! `p = (a - ln(k/S - 1)) / b`.
//!
//! The fit profiles out `(a, b)` with a closed-form linear regression of
//! `ln(k/S - 1)` against `p` inside a 1-D search over `k`: a geometric
//! scan of 200 candidates followed by golden-section refinement. No
//! general nonlinear solver, no randomness — identical inputs produce
//! bit-identical models.

use std::io::{BufRead, Write};

use thiserror::Error;

/// Cells below this fraction of full scale map to probability 0, so
/// resting sensor noise does not fire electrodes.
pub const DEFAULT_DEADZONE_FRACTION: f64 = 0.02;

/// Target magnitudes are capped at this fraction of `k` so the inverse
/// stays away from its asymptote and clamping is exceptional.
pub const MAGNITUDE_CEILING_FRACTION: f64 = 0.95;

const K_SCAN_POINTS: usize = 200;
const K_SCAN_LO: f64 = 1.0001;
const K_SCAN_HI: f64 = 10.0;
/// Golden-section termination: relative width on `k - max(S)`, which is
/// at least as tight as relative width on `k` itself.
const GSS_REL_WIDTH: f64 = 1e-9;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PsychophysicsError {
    #[error("domain error: {context}")]
    Domain { context: String },
    #[error("insufficient data: {context}")]
    InsufficientData { context: String },
    #[error("non-positive magnitude {value} at sample {index}")]
    NonPositiveMagnitude { index: usize, value: f64 },
    #[error("degenerate slope: data admit no increasing sigmoid (fitted b = {b})")]
    DegenerateSlope { b: f64 },
    #[error("calibration CSV line {line}: {message}")]
    InvalidCsv { line: usize, message: String },
}

/// Coefficients of the sigmoid transfer function. `b > 0` keeps `F`
/// strictly increasing; `k > 0` is the asymptotic magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmoidModel {
    a: f64,
    b: f64,
    k: f64,
}

/// Result of inverting a magnitude: the probability clamped into
/// `[0, 1]`, a flag set when clamping occurred, and the raw logit value.
/// The raw value is what satisfies the algebraic identity
/// `F(F^-1(S)) = S`; the clamped value is what a scheduler can use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inverted {
    pub probability: f64,
    pub clamped: bool,
    pub raw: f64,
}

impl SigmoidModel {
    pub fn new(a: f64, b: f64, k: f64) -> Result<Self, PsychophysicsError> {
        if !a.is_finite() || !b.is_finite() || !k.is_finite() || b <= 0.0 || k <= 0.0 {
            return Err(PsychophysicsError::Domain {
                context: format!("invalid sigmoid coefficients a={a}, b={b}, k={k}"),
            });
        }
        Ok(Self { a, b, k })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// `F(p) = k / (1 + exp(a - b*p))` for `p in [0, 1]`.
    pub fn forward(&self, p: f64) -> Result<f64, PsychophysicsError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(PsychophysicsError::Domain {
                context: format!("probability {p} outside [0, 1]"),
            });
        }
        Ok(self.magnitude_at(p))
    }

    /// The sigmoid evaluated on the whole real line. `forward` is the
    /// validated operational path; this extension exists because the
    /// forward/inverse identity is algebraic and holds for raw logit
    /// values outside `[0, 1]` too.
    pub fn magnitude_at(&self, p: f64) -> f64 {
        self.k / (1.0 + (self.a - self.b * p).exp())
    }

    /// `F^-1(S) = (a - ln(k/S - 1)) / b` for `0 < S < k`, clamped into
    /// `[0, 1]` with a flag when clamping occurred.
    pub fn inverse(&self, s: f64) -> Result<Inverted, PsychophysicsError> {
        if !(s > 0.0 && s < self.k) {
            return Err(PsychophysicsError::Domain {
                context: format!("magnitude {s} outside (0, {})", self.k),
            });
        }
        let raw = (self.a - (self.k / s - 1.0).ln()) / self.b;
        let probability = raw.clamp(0.0, 1.0);
        Ok(Inverted {
            probability,
            clamped: probability != raw,
            raw,
        })
    }
}

/// One magnitude-estimation trial: stimulation probability and the
/// magnitude the subject reported relative to the reference level 100.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnitudeSample {
    pub probability: f64,
    pub reported: f64,
}

impl MagnitudeSample {
    pub fn new(probability: f64, reported: f64) -> Result<Self, PsychophysicsError> {
        if !(0.0..=1.0).contains(&probability) {
            return Err(PsychophysicsError::Domain {
                context: format!("sample probability {probability} outside [0, 1]"),
            });
        }
        if !(reported > 0.0) {
            return Err(PsychophysicsError::NonPositiveMagnitude {
                index: 0,
                value: reported,
            });
        }
        Ok(Self {
            probability,
            reported,
        })
    }
}

/// Diagnostics from [`fit`]: the residual sum of squares in transformed
/// space, mean reported magnitude per probability level, and the
/// `(k, residual)` scan trace.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub residual: f64,
    pub per_level_means: Vec<(f64, f64)>,
    pub k_trace: Vec<(f64, f64)>,
}

/// Closed-form linear profile for a fixed `k`: regress
/// `y = ln(k/S - 1)` on `p` as `y = a - b*p`, returning `(a, b, rss)`.
fn profile(k: f64, samples: &[MagnitudeSample]) -> (f64, f64, f64) {
    let n = samples.len() as f64;
    let ys: Vec<f64> = samples
        .iter()
        .map(|s| ((k - s.reported) / s.reported).ln())
        .collect();
    let mean_p = samples.iter().map(|s| s.probability).sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (s, y) in samples.iter().zip(&ys) {
        let dp = s.probability - mean_p;
        sxx += dp * dp;
        sxy += dp * (y - mean_y);
    }
    let beta = sxy / sxx;
    let alpha = mean_y - beta * mean_p;
    let rss = samples
        .iter()
        .zip(&ys)
        .map(|(s, y)| {
            let e = y - (alpha + beta * s.probability);
            e * e
        })
        .sum();
    (alpha, -beta, rss)
}

/// Fit `(a, b, k)` by minimizing the residual sum of squares of
/// `ln(k/S - 1)` against `a - b*p`.
///
/// Requires at least 3 samples spanning at least 3 distinct probability
/// levels, all magnitudes positive. Samples are sorted internally so the
/// result is invariant to input order, bit for bit.
pub fn fit(samples: &[MagnitudeSample]) -> Result<(SigmoidModel, FitReport), PsychophysicsError> {
    for (index, s) in samples.iter().enumerate() {
        if !(s.reported > 0.0) || !s.reported.is_finite() {
            return Err(PsychophysicsError::NonPositiveMagnitude {
                index,
                value: s.reported,
            });
        }
        if !(0.0..=1.0).contains(&s.probability) {
            return Err(PsychophysicsError::Domain {
                context: format!("sample {index} probability {} outside [0, 1]", s.probability),
            });
        }
    }
    let mut sorted: Vec<MagnitudeSample> = samples.to_vec();
    sorted.sort_by(|x, y| {
        x.probability
            .total_cmp(&y.probability)
            .then(x.reported.total_cmp(&y.reported))
    });
    let mut levels: Vec<f64> = sorted.iter().map(|s| s.probability).collect();
    levels.dedup();
    if sorted.len() < 3 || levels.len() < 3 {
        return Err(PsychophysicsError::InsufficientData {
            context: format!(
                "need >= 3 samples over >= 3 distinct levels, got {} samples over {} levels",
                sorted.len(),
                levels.len()
            ),
        });
    }

    let s_max = sorted.iter().map(|s| s.reported).fold(f64::MIN, f64::max);

    // Geometric scan over candidate k; this is the published trace.
    let ratio = (K_SCAN_HI / K_SCAN_LO).powf(1.0 / (K_SCAN_POINTS - 1) as f64);
    let mut k_trace = Vec::with_capacity(K_SCAN_POINTS);
    for idx in 0..K_SCAN_POINTS {
        let k = s_max * K_SCAN_LO * ratio.powi(idx as i32);
        let (_, _, rss) = profile(k, &sorted);
        k_trace.push((k, rss));
    }

    // Bracket the minimum in g = k - max(S), which is strictly positive.
    // The scan alone cannot be trusted: its geometric-in-k spacing is
    // coarse in ln(g) near the lower edge, where the minimum hides when
    // the top calibration level sits close to the asymptote, and the
    // 10*max(S) cap undershoots when it sits far below. The objective
    // also flattens onto a log-linear plateau as k grows, so a missed
    // basin would send the search off to enormous k. A candidate grid
    // dense in ln(g) from the float floor to the scan cap, plus a
    // doubling expansion above the cap, pins the basin in every regime.
    let rss_at_g = |g: f64| profile(s_max + g, &sorted).2;
    let mut candidates: Vec<(f64, f64)> = k_trace.iter().map(|&(k, r)| (k - s_max, r)).collect();
    let g_floor = s_max * f64::EPSILON * 4.0;
    let g_cap = candidates.last().expect("scan is non-empty").0;
    let dense_steps = ((g_cap / g_floor).ln() / 0.1).ceil() as usize;
    for step in 0..dense_steps {
        let g = g_floor * (g_cap / g_floor).powf(step as f64 / dense_steps as f64);
        candidates.push((g, rss_at_g(g)));
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0));
    // Coincident candidates would confuse the edge detection below.
    candidates.dedup_by(|x, y| (x.0 - y.0).abs() <= y.0 * 1e-12);
    let best = candidates
        .iter()
        .enumerate()
        .min_by(|(_, x), (_, y)| x.1.total_cmp(&y.1))
        .map(|(idx, _)| idx)
        .expect("candidate list is non-empty");

    let (g_lo, g_hi);
    if best + 1 == candidates.len() {
        let mut g_mid = candidates[best].0;
        let mut r_mid = candidates[best].1;
        let mut lo = candidates[best - 1].0;
        let mut steps = 0;
        loop {
            let g_up = g_mid * 2.0;
            let r_up = rss_at_g(g_up);
            steps += 1;
            if r_up < r_mid && steps < 200 {
                lo = g_mid;
                g_mid = g_up;
                r_mid = r_up;
            } else {
                g_hi = g_up;
                break;
            }
        }
        g_lo = lo;
    } else if best == 0 {
        g_lo = candidates[0].0 / 2.0;
        g_hi = candidates[1].0;
    } else {
        g_lo = candidates[best - 1].0;
        g_hi = candidates[best + 1].0;
    }

    // Golden-section search on ln(g); terminating at relative width 1e-9
    // on g bounds the relative width on k at least as tightly.
    let mut lo = g_lo.ln();
    let mut hi = g_hi.ln();
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = rss_at_g(x1.exp());
    let mut f2 = rss_at_g(x2.exp());
    let mut iterations = 0;
    while hi - lo > GSS_REL_WIDTH && iterations < 500 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = rss_at_g(x1.exp());
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = rss_at_g(x2.exp());
        }
        iterations += 1;
    }
    let k = s_max + ((lo + hi) / 2.0).exp();
    let (a, b, residual) = profile(k, &sorted);
    if !(b > 0.0) || !b.is_finite() {
        return Err(PsychophysicsError::DegenerateSlope { b });
    }
    let model = SigmoidModel::new(a, b, k)?;

    let per_level_means = levels
        .iter()
        .map(|&level| {
            let (sum, count) = sorted
                .iter()
                .filter(|s| s.probability == level)
                .fold((0.0, 0usize), |(sum, count), s| (sum + s.reported, count + 1));
            (level, sum / count as f64)
        })
        .collect();

    Ok((
        model,
        FitReport {
            residual,
            per_level_means,
            k_trace,
        },
    ))
}

/// Map one raw pressure count to a stimulation probability through the
/// inverse transfer function, with the default 2% deadzone.
pub fn pressure_to_probability(model: &SigmoidModel, cell: u16, max_count: u16) -> f64 {
    pressure_to_probability_with_deadzone(model, cell, max_count, DEFAULT_DEADZONE_FRACTION)
}

/// As [`pressure_to_probability`] with an explicit deadzone fraction.
///
/// The target magnitude is `(cell / max_count) * 0.95 * k`; the 0.95
/// ceiling keeps the inverse off its asymptote, so the result is finite
/// and clamping cannot trigger from this path.
pub fn pressure_to_probability_with_deadzone(
    model: &SigmoidModel,
    cell: u16,
    max_count: u16,
    deadzone_fraction: f64,
) -> f64 {
    debug_assert!(max_count > 0);
    let cell = cell.min(max_count);
    if (cell as f64) < deadzone_fraction * max_count as f64 {
        return 0.0;
    }
    let s_target = (cell as f64 / max_count as f64) * MAGNITUDE_CEILING_FRACTION * model.k();
    if s_target <= 0.0 {
        return 0.0;
    }
    model
        .inverse(s_target)
        .map(|inv| inv.probability)
        .unwrap_or(0.0)
}

/// Parse a calibration CSV with header `probability,reported`, one trial
/// per row.
pub fn read_calibration_csv<R: BufRead>(
    reader: R,
) -> Result<Vec<MagnitudeSample>, PsychophysicsError> {
    let mut samples = Vec::new();
    for (zero_line, line) in reader.lines().enumerate() {
        let line_no = zero_line + 1;
        let line = line.map_err(|e| PsychophysicsError::InvalidCsv {
            line: line_no,
            message: e.to_string(),
        })?;
        let trimmed = line.trim_end_matches('\r').trim();
        if line_no == 1 {
            if trimmed != "probability,reported" {
                return Err(PsychophysicsError::InvalidCsv {
                    line: 1,
                    message: format!("expected header `probability,reported`, got `{trimmed}`"),
                });
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let mut parts = trimmed.split(',');
        let parse = |field: Option<&str>, name: &str| -> Result<f64, PsychophysicsError> {
            field
                .ok_or_else(|| PsychophysicsError::InvalidCsv {
                    line: line_no,
                    message: format!("missing {name} column"),
                })?
                .trim()
                .parse::<f64>()
                .map_err(|e| PsychophysicsError::InvalidCsv {
                    line: line_no,
                    message: format!("bad {name}: {e}"),
                })
        };
        let probability = parse(parts.next(), "probability")?;
        let reported = parse(parts.next(), "reported")?;
        if parts.next().is_some() {
            return Err(PsychophysicsError::InvalidCsv {
                line: line_no,
                message: "expected exactly two columns".into(),
            });
        }
        samples.push(MagnitudeSample {
            probability,
            reported,
        });
    }
    Ok(samples)
}

/// Write the one-line model record `a,b,k,residual`, full precision.
pub fn write_model_record<W: Write>(
    mut w: W,
    model: &SigmoidModel,
    residual: f64,
) -> std::io::Result<()> {
    writeln!(w, "{},{},{},{}", model.a(), model.b(), model.k(), residual)
}

/// Parse a model record written by [`write_model_record`].
pub fn read_model_record(text: &str) -> Result<(SigmoidModel, f64), PsychophysicsError> {
    let line = text.lines().next().unwrap_or("").trim();
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 4 {
        return Err(PsychophysicsError::InvalidCsv {
            line: 1,
            message: format!("model record needs 4 fields `a,b,k,residual`, got {}", fields.len()),
        });
    }
    let mut parsed = [0.0f64; 4];
    for (slot, field) in parsed.iter_mut().zip(&fields) {
        *slot = field
            .trim()
            .parse()
            .map_err(|e| PsychophysicsError::InvalidCsv {
                line: 1,
                message: format!("bad model field `{field}`: {e}"),
            })?;
    }
    Ok((SigmoidModel::new(parsed[0], parsed[1], parsed[2])?, parsed[3]))
}

/// Write the `k_candidate,residual` scan trace.
pub fn write_k_trace<W: Write>(mut w: W, report: &FitReport) -> std::io::Result<()> {
    writeln!(w, "k_candidate,residual")?;
    for (k, rss) in &report.k_trace {
        writeln!(w, "{k},{rss}")?;
    }
    Ok(())
}
