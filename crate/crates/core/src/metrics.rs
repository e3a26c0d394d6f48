//! Split standard deviations, asymmetry index, band-exceedance minutes and
//! probability-density histograms of a frequency trace.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly sampled frequency series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTrace {
    /// Hz.
    pub samples: Vec<f64>,
    /// Seconds between samples.
    pub sample_period: f64,
    pub f_nominal: f64,
}

impl FrequencyTrace {
    pub fn new(samples: Vec<f64>, sample_period: f64, f_nominal: f64) -> Result<FrequencyTrace> {
        if !(sample_period > 0.0 && sample_period.is_finite()) {
            return Err(Error::Precondition(format!(
                "sample period must be positive, got {sample_period}"
            )));
        }
        if let Some(i) = samples.iter().position(|f| !f.is_finite()) {
            return Err(Error::Precondition(format!("sample {i} is not finite")));
        }
        Ok(FrequencyTrace {
            samples,
            sample_period,
            f_nominal,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.sample_period
    }

    pub fn mean(&self) -> Option<f64> {
        (!self.is_empty()).then(|| self.samples.iter().sum::<f64>() / self.len() as f64)
    }

    /// Reflects every sample about the nominal frequency.
    pub fn mirrored(&self) -> FrequencyTrace {
        FrequencyTrace {
            samples: self.samples.iter().map(|f| 2.0 * self.f_nominal - f).collect(),
            ..self.clone()
        }
    }

    fn require_samples(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::EmptyTrace)
        } else {
            Ok(())
        }
    }
}

/// Running sums for the below/above-nominal split. Partial accumulators over
/// disjoint chunks merge exactly.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SplitAccumulator {
    pub n_minus: usize,
    pub n_plus: usize,
    sum_sq_minus: f64,
    sum_sq_plus: f64,
}

impl SplitAccumulator {
    pub fn push(&mut self, f: f64, f_nominal: f64) {
        let d = f - f_nominal;
        if f < f_nominal {
            self.n_minus += 1;
            self.sum_sq_minus += d * d;
        } else if f > f_nominal {
            self.n_plus += 1;
            self.sum_sq_plus += d * d;
        }
    }

    pub fn merge(mut self, other: SplitAccumulator) -> SplitAccumulator {
        self.n_minus += other.n_minus;
        self.n_plus += other.n_plus;
        self.sum_sq_minus += other.sum_sq_minus;
        self.sum_sq_plus += other.sum_sq_plus;
        self
    }

    pub fn sigma_minus(&self) -> f64 {
        side_sigma(self.sum_sq_minus, self.n_minus)
    }

    pub fn sigma_plus(&self) -> f64 {
        side_sigma(self.sum_sq_plus, self.n_plus)
    }
}

fn side_sigma(sum_sq: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        (sum_sq / n as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSigma {
    pub sigma_minus: f64,
    pub n_minus: usize,
    pub sigma_plus: f64,
    pub n_plus: usize,
}

/// RMS deviation from nominal over the samples strictly below and strictly
/// above it. Samples equal to nominal belong to neither side; an empty side
/// has σ = 0.
pub fn split_sigma(trace: &FrequencyTrace) -> Result<SplitSigma> {
    trace.require_samples()?;
    let mut acc = SplitAccumulator::default();
    for &f in &trace.samples {
        acc.push(f, trace.f_nominal);
    }
    Ok(SplitSigma {
        sigma_minus: acc.sigma_minus(),
        n_minus: acc.n_minus,
        sigma_plus: acc.sigma_plus(),
        n_plus: acc.n_plus,
    })
}

/// Count-weighted combination of the two side deviations.
///
/// # Panics
///
/// If `n_minus + n_plus == 0`.
pub fn sigma_total(sigma_minus: f64, n_minus: usize, sigma_plus: f64, n_plus: usize) -> f64 {
    let n = n_minus + n_plus;
    assert!(n > 0, "sigma_total needs at least one off-nominal sample");
    let (nm, np) = (n_minus as f64, n_plus as f64);
    ((np * sigma_plus * sigma_plus + nm * sigma_minus * sigma_minus) / n as f64).sqrt()
}

pub fn asymmetry(sigma_minus: f64, sigma_plus: f64) -> f64 {
    debug_assert!(sigma_minus >= 0.0 && sigma_plus >= 0.0);
    (sigma_minus - sigma_plus).abs()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandMinutes {
    pub total: f64,
    pub above: f64,
    pub below: f64,
}

/// Minutes spent strictly outside `f_nominal ± band_half_width`.
/// Samples exactly on a band edge count as inside.
pub fn minutes_outside_band(trace: &FrequencyTrace, band_half_width: f64) -> Result<BandMinutes> {
    trace.require_samples()?;
    let hi = trace.f_nominal + band_half_width;
    let lo = trace.f_nominal - band_half_width;
    let above = trace.samples.iter().filter(|&&f| f > hi).count();
    let below = trace.samples.iter().filter(|&&f| f < lo).count();
    let to_min = trace.sample_period / 60.0;
    let (above, below) = (above as f64 * to_min, below as f64 * to_min);
    Ok(BandMinutes {
        total: above + below,
        above,
        below,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub sigma: f64,
    pub sigma_minus: f64,
    pub sigma_plus: f64,
    pub asymmetry: f64,
    pub n_minus: usize,
    pub n_plus: usize,
    pub n_total: usize,
    pub minutes_outside: f64,
    pub minutes_above: f64,
    pub minutes_below: f64,
    pub f_nominal: f64,
    pub band: f64,
    /// Seconds covered by the trace.
    pub duration: f64,
    /// Time-averaged network losses, when the trace comes from a simulation.
    pub p_loss: Option<f64>,
    pub q_loss: Option<f64>,
}

pub const REPORT_CSV_HEADER: &str = "sigma_f_hz,sigma_minus_hz,sigma_plus_hz,delta_sigma_hz,\
minutes_outside,minutes_above,minutes_below,p_loss_pu,q_loss_pu,\
n_minus,n_plus,n_total,duration_s,f_nominal_hz,band_hz";

impl MetricsReport {
    pub fn compute(trace: &FrequencyTrace, band_half_width: f64) -> Result<MetricsReport> {
        let s = split_sigma(trace)?;
        let m = minutes_outside_band(trace, band_half_width)?;
        let sigma = if s.n_minus + s.n_plus == 0 {
            0.0
        } else {
            sigma_total(s.sigma_minus, s.n_minus, s.sigma_plus, s.n_plus)
        };
        Ok(MetricsReport {
            sigma,
            sigma_minus: s.sigma_minus,
            sigma_plus: s.sigma_plus,
            asymmetry: asymmetry(s.sigma_minus, s.sigma_plus),
            n_minus: s.n_minus,
            n_plus: s.n_plus,
            n_total: trace.len(),
            minutes_outside: m.total,
            minutes_above: m.above,
            minutes_below: m.below,
            f_nominal: trace.f_nominal,
            band: band_half_width,
            duration: trace.duration(),
            p_loss: None,
            q_loss: None,
        })
    }

    pub fn with_losses(mut self, p_loss: f64, q_loss: f64) -> MetricsReport {
        self.p_loss = Some(p_loss);
        self.q_loss = Some(q_loss);
        self
    }

    /// One CSV row in [`REPORT_CSV_HEADER`] order, without a newline.
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.sigma,
            self.sigma_minus,
            self.sigma_plus,
            self.asymmetry,
            self.minutes_outside,
            self.minutes_above,
            self.minutes_below,
            opt(self.p_loss),
            opt(self.q_loss),
            self.n_minus,
            self.n_plus,
            self.n_total,
            self.duration,
            self.f_nominal,
            self.band
        )
    }

    pub fn to_csv(&self) -> String {
        format!("{REPORT_CSV_HEADER}\n{}\n", self.csv_row())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mhz = self.band * 1e3;
        let _ = writeln!(s, "nominal frequency      {:>12} Hz", self.f_nominal);
        let _ = writeln!(s, "samples                {:>12}", self.n_total);
        let _ = writeln!(s, "duration               {:>12.1} s", self.duration);
        let _ = writeln!(s, "sigma_f                {:>12.6} Hz", self.sigma);
        let _ = writeln!(s, "sigma_f-                {:>11.6} Hz  (N- = {})", self.sigma_minus, self.n_minus);
        let _ = writeln!(s, "sigma_f+                {:>11.6} Hz  (N+ = {})", self.sigma_plus, self.n_plus);
        let _ = writeln!(s, "delta sigma_f          {:>12.6} Hz", self.asymmetry);
        let _ = writeln!(s, "minutes outside ±{mhz:.0} mHz {:>9.2}", self.minutes_outside);
        let _ = writeln!(s, "minutes above +{mhz:.0} mHz  {:>10.2}", self.minutes_above);
        let _ = writeln!(s, "minutes below -{mhz:.0} mHz  {:>10.2}", self.minutes_below);
        if let (Some(p), Some(q)) = (self.p_loss, self.q_loss) {
            let _ = writeln!(s, "mean P_loss            {p:>12.6} pu");
            let _ = writeln!(s, "mean Q_loss            {q:>12.6} pu");
        }
        s
    }
}

/// Density histogram with bins centred on the nominal frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramPD {
    /// `densities.len() + 1` edges, Hz.
    pub edges: Vec<f64>,
    /// 1/Hz.
    pub densities: Vec<f64>,
}

impl HistogramPD {
    pub fn bin_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Σ density · width; 1 up to rounding.
    pub fn total_mass(&self) -> f64 {
        self.edges
            .windows(2)
            .zip(&self.densities)
            .map(|(w, d)| d * (w[1] - w[0]))
            .sum()
    }

    /// Mean and standard deviation of the binned distribution.
    pub fn moments(&self) -> (f64, f64) {
        let w = self.bin_width();
        let c = self.centers();
        let mean: f64 = c.iter().zip(&self.densities).map(|(x, d)| x * d * w).sum();
        let var: f64 = c
            .iter()
            .zip(&self.densities)
            .map(|(x, d)| (x - mean).powi(2) * d * w)
            .sum();
        (mean, var.sqrt())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_center_hz,density\n");
        for (c, d) in self.centers().iter().zip(&self.densities) {
            let _ = writeln!(out, "{c},{d}");
        }
        out
    }
}

/// Normalised histogram with one bin centred exactly on nominal.
///
/// Bin index is `round((f − f_n)/w)` with halves rounded away from zero, so a
/// trace and its mirror image occupy mirrored bins.
pub fn estimate_pd(trace: &FrequencyTrace, bin_width: f64) -> Result<HistogramPD> {
    if !(bin_width > 0.0) {
        return Err(Error::Precondition(format!(
            "bin width must be positive, got {bin_width}"
        )));
    }
    trace.require_samples()?;
    let fnom = trace.f_nominal;
    let idx: Vec<i64> = trace
        .samples
        .iter()
        .map(|f| ((f - fnom) / bin_width).round() as i64)
        .collect();
    let lo = *idx.iter().min().expect("non-empty");
    let hi = *idx.iter().max().expect("non-empty");
    let nbins = (hi - lo + 1) as usize;
    let mut counts = vec![0usize; nbins];
    for i in idx {
        counts[(i - lo) as usize] += 1;
    }
    let norm = 1.0 / (trace.len() as f64 * bin_width);
    let edges = (0..=nbins)
        .map(|k| fnom + ((lo + k as i64) as f64 - 0.5) * bin_width)
        .collect();
    Ok(HistogramPD {
        edges,
        densities: counts.into_iter().map(|c| c as f64 * norm).collect(),
    })
}
