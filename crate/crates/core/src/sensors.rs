//! Sensor models: the spring-damper FT emulation with Gaussian noise,
//! strain-gauge bridge and ADC resolution arithmetic, and linear
//! calibration with accuracy metrics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::contact::BaseWrench;
use crate::error::{Error, Result};

/// Per-axis values along the base `x`, `z` and rotational directions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AxisTriple {
    pub x: f64,
    pub z: f64,
    pub rot: f64,
}

impl AxisTriple {
    pub const fn new(x: f64, z: f64, rot: f64) -> Self {
        AxisTriple { x, z, rot }
    }

    fn all(&self, pred: impl Fn(f64) -> bool) -> bool {
        pred(self.x) && pred(self.z) && pred(self.rot)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "VirtualFtFields", into = "VirtualFtFields")]
pub struct VirtualFtConfig {
    /// N/m, N/m, N·m/rad.
    pub stiffness: AxisTriple,
    /// N·s/m, N·s/m, N·m·s/rad.
    pub damping: AxisTriple,
    /// Noise standard deviation: N, N, N·m.
    pub noise_sigma: AxisTriple,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct VirtualFtFields {
    kx_N_per_m: f64,
    kz_N_per_m: f64,
    krot_Nm_per_rad: f64,
    dx_Ns_per_m: f64,
    dz_Ns_per_m: f64,
    drot_Nms_per_rad: f64,
    sigma_x_N: f64,
    sigma_z_N: f64,
    sigma_rot_Nm: f64,
}

impl From<VirtualFtFields> for VirtualFtConfig {
    fn from(f: VirtualFtFields) -> Self {
        VirtualFtConfig {
            stiffness: AxisTriple::new(f.kx_N_per_m, f.kz_N_per_m, f.krot_Nm_per_rad),
            damping: AxisTriple::new(f.dx_Ns_per_m, f.dz_Ns_per_m, f.drot_Nms_per_rad),
            noise_sigma: AxisTriple::new(f.sigma_x_N, f.sigma_z_N, f.sigma_rot_Nm),
        }
    }
}

impl From<VirtualFtConfig> for VirtualFtFields {
    fn from(c: VirtualFtConfig) -> Self {
        VirtualFtFields {
            kx_N_per_m: c.stiffness.x,
            kz_N_per_m: c.stiffness.z,
            krot_Nm_per_rad: c.stiffness.rot,
            dx_Ns_per_m: c.damping.x,
            dz_Ns_per_m: c.damping.z,
            drot_Nms_per_rad: c.damping.rot,
            sigma_x_N: c.noise_sigma.x,
            sigma_z_N: c.noise_sigma.z,
            sigma_rot_Nm: c.noise_sigma.rot,
        }
    }
}

impl Default for VirtualFtConfig {
    fn default() -> Self {
        VirtualFtConfig {
            stiffness: AxisTriple::new(5000.0, 5000.0, 500.0),
            damping: AxisTriple::new(50.0, 50.0, 20.0),
            noise_sigma: AxisTriple::new(0.1, 0.1, 0.01),
        }
    }
}

impl VirtualFtConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        if !self.stiffness.all(ok) {
            return Err(Error::invalid("ft_sensor.k*", "must be ≥ 0"));
        }
        if !self.damping.all(ok) {
            return Err(Error::invalid("ft_sensor.d*", "must be ≥ 0"));
        }
        if !self.noise_sigma.all(ok) {
            return Err(Error::invalid("ft_sensor.sigma_*", "must be ≥ 0"));
        }
        Ok(())
    }

    /// Noise-free spring-damper wrench on the base for a displacement
    /// `disp` and velocity `vel` of the base coordinates.
    pub fn spring_wrench(&self, disp: AxisTriple, vel: AxisTriple) -> BaseWrench {
        let k = self.stiffness;
        let d = self.damping;
        BaseWrench::new(
            -k.x * disp.x - d.x * vel.x,
            -k.z * disp.z - d.z * vel.z,
            -k.rot * disp.rot - d.rot * vel.rot,
        )
    }
}

/// White Gaussian noise, independent per channel, from a seeded stream.
#[derive(Clone, Debug)]
pub struct NoiseSource {
    rng: ChaCha8Rng,
}

impl NoiseSource {
    pub fn new(seed: u64) -> Self {
        NoiseSource {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn gaussian(&mut self, sigma: f64) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        z * sigma
    }

    pub fn wrench(&mut self, sigma: AxisTriple) -> BaseWrench {
        let fx = self.gaussian(sigma.x);
        let fz = self.gaussian(sigma.z);
        let my = self.gaussian(sigma.rot);
        BaseWrench::new(fx, fz, my)
    }
}

/// `F_b = −K∘disp − D∘vel + N(0, σ)`.
pub fn virtual_ft_read(
    config: &VirtualFtConfig,
    disp: AxisTriple,
    vel: AxisTriple,
    noise: &mut NoiseSource,
) -> BaseWrench {
    config.spring_wrench(disp, vel) + noise.wrench(config.noise_sigma)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrainGaugeSpec {
    pub gauge_factor: f64,
    /// Bridge excitation (V).
    pub excitation_v: f64,
    /// ADC reference (V).
    pub adc_reference_v: f64,
    pub adc_bits: u32,
    pub enob: u32,
    pub bridge_resistance_ohm: f64,
    /// Divisor in `V_o = V_ex·GF·ε / divisor`: 4 for a quarter bridge,
    /// 1 for a full bridge with four active gauges.
    pub bridge_divisor: f64,
}

impl Default for StrainGaugeSpec {
    fn default() -> Self {
        StrainGaugeSpec {
            gauge_factor: 2.0,
            excitation_v: 5.0,
            adc_reference_v: 2.5,
            adc_bits: 24,
            enob: 16,
            bridge_resistance_ohm: 1000.0,
            bridge_divisor: 4.0,
        }
    }
}

impl StrainGaugeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.gauge_factor > 0.0) {
            return Err(Error::invalid("gauge_factor", "must be > 0"));
        }
        if !(self.excitation_v > 0.0) {
            return Err(Error::invalid("excitation_v", "must be > 0"));
        }
        if !(self.adc_reference_v > 0.0) {
            return Err(Error::invalid("adc_reference_v", "must be > 0"));
        }
        if self.enob < 1 || self.enob > self.adc_bits {
            return Err(Error::invalid("enob", "must lie in 1..=adc_bits"));
        }
        if !(self.bridge_divisor > 0.0) {
            return Err(Error::invalid("bridge_divisor", "must be > 0"));
        }
        Ok(())
    }

    /// ADC least significant bit for `bits` of resolution (V).
    pub fn lsb(&self, bits: u32) -> f64 {
        self.adc_reference_v / 2f64.powi(bits as i32)
    }

    /// Bridge sensitivity `V_o / ε` (V per unit strain).
    pub fn sensitivity(&self) -> f64 {
        self.excitation_v * self.gauge_factor / self.bridge_divisor
    }
}

/// Smallest strain that moves the ADC by one LSB:
/// `ε_min = 4 V_ref / (GF · V_ex · 2^N)` with the quarter-bridge divisor.
pub fn min_detectable_strain(spec: &StrainGaugeSpec, use_enob: bool) -> f64 {
    let bits = if use_enob { spec.enob } else { spec.adc_bits };
    spec.lsb(bits) / spec.sensitivity()
}

/// `V_o = V_ex · GF · ε / divisor`.
pub fn bridge_output(spec: &StrainGaugeSpec, strain: f64) -> f64 {
    spec.sensitivity() * strain
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub rmse: f64,
    pub mae: f64,
    pub samples: usize,
}

impl CalibrationFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Ordinary least squares `y = a·x + b` with residual metrics.
pub fn calibrate_linear(samples: &[(f64, f64)]) -> Result<CalibrationFit> {
    if samples.len() < 2 {
        return Err(Error::DegenerateData("need at least two samples"));
    }
    if samples.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::DegenerateData("non-finite sample"));
    }
    let n = samples.len() as f64;
    let mean_x = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let mean_y = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in samples {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateData("all x values are identical"));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let (mut sse, mut sae) = (0.0, 0.0);
    for (x, y) in samples {
        let e = y - (slope * x + intercept);
        sse += e * e;
        sae += e.abs();
    }
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 0.0 };
    Ok(CalibrationFit {
        slope,
        intercept,
        r_squared,
        rmse: (sse / n).sqrt(),
        mae: sae / n,
        samples: samples.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub rmse: f64,
    pub mae: f64,
    /// Coefficient of determination of the best straight line through
    /// `(estimate, truth)`.
    pub r_squared: f64,
    /// Span of the ground-truth series.
    pub range: f64,
    /// `100 · (1 − MAE / range)`.
    pub accuracy_pct: f64,
}

pub const ACCURACY_DEFINITION: &str = "accuracy_pct = 100 * (1 - MAE / (max(truth) - min(truth)))";

pub fn accuracy_report(estimates: &[f64], truth: &[f64]) -> Result<AccuracyReport> {
    if estimates.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: estimates.len(),
            right: truth.len(),
        });
    }
    if estimates.is_empty() {
        return Err(Error::DegenerateData("empty series"));
    }
    let n = estimates.len() as f64;
    let (mut sse, mut sae) = (0.0, 0.0);
    for (e, t) in estimates.iter().zip(truth) {
        sse += (e - t).powi(2);
        sae += (e - t).abs();
    }
    let lo = truth.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = truth.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let pairs: Vec<(f64, f64)> = estimates.iter().cloned().zip(truth.iter().cloned()).collect();
    let r_squared = match calibrate_linear(&pairs) {
        Ok(fit) => fit.r_squared,
        // Constant estimates explain nothing unless they are exact.
        Err(_) => {
            if sse == 0.0 {
                1.0
            } else {
                0.0
            }
        }
    };
    let mae = sae / n;
    let accuracy_pct = if range > 0.0 {
        100.0 * (1.0 - mae / range)
    } else {
        f64::NAN
    };
    Ok(AccuracyReport {
        rmse: (sse / n).sqrt(),
        mae,
        r_squared,
        range,
        accuracy_pct,
    })
}

/// Parses two numeric columns separated by commas, semicolons, tabs or
/// spaces. A non-numeric first line is treated as a header; `#` starts a
/// comment.
pub fn parse_two_column(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    let mut first = true;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        let parsed: Option<Vec<f64>> = fields.iter().map(|f| f.parse().ok()).collect();
        match parsed {
            Some(v) if v.len() == 2 => out.push((v[0], v[1])),
            _ if first => {}
            _ => {
                return Err(Error::Parse {
                    path: format!("line {}", lineno + 1),
                    message: format!("expected two numeric columns, found `{line}`"),
                })
            }
        }
        first = false;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn spring_wrench_matches_stiffness() {
        let cfg = VirtualFtConfig {
            noise_sigma: AxisTriple::default(),
            ..VirtualFtConfig::default()
        };
        let mut noise = NoiseSource::new(1);
        let zero = virtual_ft_read(&cfg, AxisTriple::default(), AxisTriple::default(), &mut noise);
        assert_eq!(zero, BaseWrench::ZERO);
        let f = virtual_ft_read(
            &cfg,
            AxisTriple::new(1e-3, 0.0, 0.0),
            AxisTriple::default(),
            &mut noise,
        );
        assert_abs_diff_eq!(f.fx, -5.0, epsilon = 1e-12);
        assert_eq!(f.fz, 0.0);
    }

    #[test]
    fn noise_stream_is_reproducible() {
        let mut a = NoiseSource::new(42);
        let mut b = NoiseSource::new(42);
        for _ in 0..100 {
            assert_eq!(a.gaussian(1.0).to_bits(), b.gaussian(1.0).to_bits());
        }
        let mut c = NoiseSource::new(43);
        assert_ne!(a.gaussian(1.0), c.gaussian(1.0));
    }

    #[test]
    fn strain_resolution_values() {
        let spec = StrainGaugeSpec::default();
        assert_abs_diff_eq!(min_detectable_strain(&spec, false), 5.96e-8, epsilon = 0.005e-8);
        assert_abs_diff_eq!(min_detectable_strain(&spec, true), 1.53e-5, epsilon = 0.005e-5);
        let doubled = StrainGaugeSpec {
            excitation_v: 10.0,
            ..spec
        };
        assert_abs_diff_eq!(
            min_detectable_strain(&doubled, true),
            0.5 * min_detectable_strain(&spec, true),
            epsilon = 1e-20
        );
    }

    #[test]
    fn bridge_output_values() {
        let spec = StrainGaugeSpec::default();
        assert_eq!(bridge_output(&spec, 0.0), 0.0);
        assert_abs_diff_eq!(bridge_output(&spec, 1.6e-3), 4e-3, epsilon = 1e-15);
        assert_abs_diff_eq!(
            bridge_output(&spec, 2.0 * 3e-4),
            2.0 * bridge_output(&spec, 3e-4),
            epsilon = 1e-18
        );
        let full = StrainGaugeSpec {
            bridge_divisor: 1.0,
            ..spec
        };
        assert_abs_diff_eq!(bridge_output(&full, 1e-3), 4.0 * bridge_output(&spec, 1e-3), epsilon = 1e-15);
    }

    #[test]
    fn fit_of_two_points_is_exact() {
        let fit = calibrate_linear(&[(1.0, 3.0), (3.0, 7.0)]).unwrap();
        assert_abs_diff_eq!(fit.slope, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fit.intercept, 1.0, epsilon = 1e-15);
        assert_eq!(fit.r_squared, 1.0);
        assert_eq!(fit.rmse, 0.0);
    }

    #[test]
    fn constant_response_has_no_explained_variance() {
        let fit = calibrate_linear(&[(1.0, 5.0), (2.0, 5.0), (4.0, 5.0)]).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.r_squared, 0.0);
    }

    #[test]
    fn degenerate_calibration_inputs() {
        assert!(matches!(
            calibrate_linear(&[(1.0, 2.0)]),
            Err(Error::DegenerateData(_))
        ));
        assert!(matches!(
            calibrate_linear(&[(1.0, 2.0), (1.0, 3.0)]),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn accuracy_of_offset_series() {
        let truth: Vec<f64> = (0..50).map(|i| i as f64 * 0.04).collect();
        let exact = accuracy_report(&truth, &truth).unwrap();
        assert_eq!(exact.rmse, 0.0);
        assert_abs_diff_eq!(exact.r_squared, 1.0, epsilon = 1e-15);
        let shifted: Vec<f64> = truth.iter().map(|t| t + 0.1).collect();
        let rep = accuracy_report(&shifted, &truth).unwrap();
        assert_abs_diff_eq!(rep.mae, 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.rmse, 0.1, epsilon = 1e-12);
        assert!(matches!(
            accuracy_report(&truth[..3], &truth),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn parses_delimited_text() {
        let text = "raw,torque\n1, 2\n3\t4\n# note\n5;6 # trailing\n";
        assert_eq!(
            parse_two_column(text).unwrap(),
            vec![(1.0, 2.0), (3.0, 4.0), (5.0, 6.0)]
        );
        assert!(parse_two_column("1,2\nfoo,bar\n").is_err());
        assert!(parse_two_column("1,2,3\n4,5\n").is_ok());
    }
}
