//! Frame-function spectra induced by the closed-form `u` and `g` solves,
//! per-image empirical lowpass/bandpass/highpass filters, and sample
//! distribution diagnostics.

use num_complex::Complex;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::grid::{ImageGrid, Mask};
use crate::scalar::Real;
use crate::spectral::{Direction, Fft2, SpectrumGrid};

fn energy_symbol(dirs: &[Direction<f64>], k1: usize, k2: usize, m: usize, n: usize) -> f64 {
    dirs.iter().map(|d| d.forward_symbol(k1, k2, m, n).norm_sqr()).sum()
}

/// Spectra of the cartoon solve: `Phi = beta4 / X`, the directional
/// differences `Psi_l = P_l` and their duals `Psi~_l = beta1 conj(P_l) / X`.
#[derive(Clone, Debug)]
pub struct UFilterBank {
    pub rows: usize,
    pub cols: usize,
    pub directions: usize,
    pub beta1: f64,
    pub beta4: f64,
    /// `X(z) = beta4 + beta1 sum_l |P_l|^2`.
    pub x: Vec<f64>,
    pub phi: SpectrumGrid<f64>,
    pub psi: Vec<SpectrumGrid<f64>>,
    pub psi_dual: Vec<SpectrumGrid<f64>>,
}

/// Spectra of the texture-field solve for each direction `a`:
/// `Xi_a = beta2 / A_a`, `Psi_a = P_a` and `Psi'_a = beta3 conj(P_a) / A_a`.
#[derive(Clone, Debug)]
pub struct GFilterBank {
    pub rows: usize,
    pub cols: usize,
    pub directions: usize,
    pub beta2: f64,
    pub beta3: f64,
    /// `A_a(z) = beta2 + beta3 |P_a|^2`.
    pub a: Vec<Vec<f64>>,
    pub xi: Vec<SpectrumGrid<f64>>,
    pub psi: Vec<SpectrumGrid<f64>>,
    pub psi_dual: Vec<SpectrumGrid<f64>>,
}

/// Both halves of the analytic filter bank.
#[derive(Clone, Debug)]
pub struct FilterBank {
    pub u: UFilterBank,
    pub g: GFilterBank,
}

fn check_grid(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("frequency grid must be non-empty"));
    }
    Ok(())
}

pub fn build_u_filters(directions: usize, beta1: f64, beta4: f64, rows: usize, cols: usize) -> Result<UFilterBank> {
    check_grid(rows, cols)?;
    if directions == 0 {
        return Err(Error::invalid("L must be >= 1"));
    }
    if !(beta1 >= 0.0) || !(beta4 > 0.0) {
        return Err(Error::invalid("need beta1 >= 0 and beta4 > 0"));
    }
    let dirs = Direction::<f64>::all(directions);
    let x: Vec<f64> = (0..rows * cols)
        .map(|k| beta4 + beta1 * energy_symbol(&dirs, k / cols, k % cols, rows, cols))
        .collect();
    let phi = SpectrumGrid::from_fn(rows, cols, |k1, k2| Complex::new(beta4 / x[k1 * cols + k2], 0.0));
    let psi: Vec<_> = dirs
        .iter()
        .map(|d| SpectrumGrid::from_fn(rows, cols, |k1, k2| d.forward_symbol(k1, k2, rows, cols)))
        .collect();
    let psi_dual = dirs
        .iter()
        .map(|d| {
            SpectrumGrid::from_fn(rows, cols, |k1, k2| {
                d.forward_symbol(k1, k2, rows, cols).conj() * (beta1 / x[k1 * cols + k2])
            })
        })
        .collect();
    Ok(UFilterBank { rows, cols, directions, beta1, beta4, x, phi, psi, psi_dual })
}

pub fn build_g_filters(directions: usize, beta2: f64, beta3: f64, rows: usize, cols: usize) -> Result<GFilterBank> {
    check_grid(rows, cols)?;
    if directions == 0 {
        return Err(Error::invalid("S must be >= 1"));
    }
    if !(beta2 > 0.0) || !(beta3 >= 0.0) {
        return Err(Error::invalid("need beta2 > 0 and beta3 >= 0"));
    }
    let dirs = Direction::<f64>::all(directions);
    let a: Vec<Vec<f64>> = dirs
        .iter()
        .map(|d| {
            (0..rows * cols)
                .map(|k| beta2 + beta3 * d.forward_symbol(k / cols, k % cols, rows, cols).norm_sqr())
                .collect()
        })
        .collect();
    let xi = a
        .iter()
        .map(|aa| SpectrumGrid::from_fn(rows, cols, |k1, k2| Complex::new(beta2 / aa[k1 * cols + k2], 0.0)))
        .collect();
    let psi = dirs
        .iter()
        .map(|d| SpectrumGrid::from_fn(rows, cols, |k1, k2| d.forward_symbol(k1, k2, rows, cols)))
        .collect();
    let psi_dual = dirs
        .iter()
        .zip(&a)
        .map(|(d, aa)| {
            SpectrumGrid::from_fn(rows, cols, |k1, k2| {
                d.forward_symbol(k1, k2, rows, cols).conj() * (beta3 / aa[k1 * cols + k2])
            })
        })
        .collect();
    Ok(GFilterBank { rows, cols, directions, beta2, beta3, a, xi, psi, psi_dual })
}

pub fn build_filter_bank(params: &crate::solver::SolverParams, rows: usize, cols: usize) -> Result<FilterBank> {
    params.validate()?;
    let p = params.penalties();
    Ok(FilterBank {
        u: build_u_filters(params.tv_directions, p.beta1, p.beta4, rows, cols)?,
        g: build_g_filters(params.texture_directions, p.beta2, p.beta3, rows, cols)?,
    })
}

/// `(min, (k1, k2))` of a real grid; ties go to the first index.
fn argmin(values: &[f64], cols: usize) -> (f64, (usize, usize)) {
    let (k, v) = values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bk, bv), (k, &v)| if v < bv { (k, v) } else { (bk, bv) });
    (v, (k / cols, k % cols))
}

fn max_symmetry_defect(grids: impl IntoIterator<Item = impl std::ops::Deref<Target = SpectrumGrid<f64>>>) -> f64 {
    grids.into_iter().map(|g| g.conjugate_symmetry_defect()).fold(0.0, f64::max)
}

impl UFilterBank {
    /// `max_z |Phi + sum_l Psi~_l Psi_l - 1|`.
    pub fn unity_defect(&self) -> f64 {
        (0..self.rows * self.cols)
            .map(|k| {
                let sum = self.psi.iter().zip(&self.psi_dual).fold(self.phi.as_slice()[k], |acc, (p, d)| {
                    acc + p.as_slice()[k] * d.as_slice()[k]
                });
                (sum - Complex::new(1.0, 0.0)).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Minimum of `X` and where it is attained.
    pub fn riesz_lower(&self) -> (f64, (usize, usize)) {
        argmin(&self.x, self.cols)
    }

    pub fn symmetry_defect(&self) -> f64 {
        max_symmetry_defect(std::iter::once(&self.phi).chain(&self.psi).chain(&self.psi_dual))
    }

    /// Fraction of frequency points where `Phi >= 1/2`.
    pub fn half_power_fraction(&self) -> f64 {
        let count = self.phi.as_slice().iter().filter(|c| c.re >= 0.5).count();
        count as f64 / (self.rows * self.cols) as f64
    }
}

impl GFilterBank {
    /// `max_a max_z |Xi_a + Psi_a Psi'_a - 1|`.
    pub fn unity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..self.directions {
            for k in 0..self.rows * self.cols {
                let v = self.xi[a].as_slice()[k] + self.psi[a].as_slice()[k] * self.psi_dual[a].as_slice()[k];
                worst = worst.max((v - Complex::new(1.0, 0.0)).norm());
            }
        }
        worst
    }

    /// Minimum of `A_a` and where it is attained, per direction.
    pub fn riesz_lower(&self) -> Vec<(f64, (usize, usize))> {
        self.a.iter().map(|a| argmin(a, self.cols)).collect()
    }

    pub fn symmetry_defect(&self) -> f64 {
        max_symmetry_defect(self.xi.iter().chain(&self.psi).chain(&self.psi_dual))
    }
}

/// Relative threshold below which `|F(z)|` is treated as zero.
pub const SPECTRUM_GUARD: f64 = 1e-8;

/// Per-image transfer functions of the decomposition. Masked frequencies
/// hold zero.
#[derive(Clone, Debug)]
pub struct EmpiricalFilters {
    pub spectrum: SpectrumGrid<f64>,
    pub lowpass: SpectrumGrid<f64>,
    pub highpass: SpectrumGrid<f64>,
    pub bandpass: Vec<SpectrumGrid<f64>>,
    /// True where `|F| > guard * max |F|`.
    pub valid: Vec<bool>,
    pub masked: usize,
    /// Mean of `|LP + HP + sum BP - 1|^2` over the valid frequencies.
    pub unity_mse: f64,
}

/// `LP = U/F`, `HP = E/F`, `BP_s = V_s/F`.
pub fn empirical_filters<T: Real>(
    f: &ImageGrid<T>,
    u: &ImageGrid<T>,
    v_parts: &[ImageGrid<T>],
    eps: &ImageGrid<T>,
) -> Result<EmpiricalFilters> {
    let (m, n) = f.dims();
    u.ensure_same_dims(m, n)?;
    eps.ensure_same_dims(m, n)?;
    for v in v_parts {
        v.ensure_same_dims(m, n)?;
    }
    let fft = Fft2::<f64>::new(m, n);
    let spec = |g: &ImageGrid<T>| fft.forward(&g.cast::<f64>());
    let big_f = spec(f);
    let peak = big_f.as_slice().iter().map(|c| c.norm()).fold(0.0, f64::max);
    let guard = SPECTRUM_GUARD * peak;
    let valid: Vec<bool> = big_f.as_slice().iter().map(|c| peak > 0.0 && c.norm() > guard).collect();
    let masked = valid.iter().filter(|&&b| !b).count();
    if masked == m * n {
        return Err(Error::DegenerateSpectrum);
    }
    let ratio = |g: &ImageGrid<T>| {
        let s = spec(g);
        let data = s
            .as_slice()
            .iter()
            .zip(big_f.as_slice())
            .zip(&valid)
            .map(|((x, y), &ok)| if ok { x / y } else { Complex::new(0.0, 0.0) })
            .collect();
        SpectrumGrid::new(m, n, data).expect("dimensions are consistent")
    };
    let lowpass = ratio(u);
    let highpass = ratio(eps);
    let bandpass: Vec<_> = v_parts.iter().map(ratio).collect();
    let mut sum = 0.0;
    for k in (0..m * n).filter(|&k| valid[k]) {
        let total = bandpass
            .iter()
            .fold(lowpass.as_slice()[k] + highpass.as_slice()[k], |acc, b| acc + b.as_slice()[k]);
        sum += (total - Complex::new(1.0, 0.0)).norm_sqr();
    }
    let unity_mse = sum / (m * n - masked) as f64;
    Ok(EmpiricalFilters { spectrum: big_f, lowpass, highpass, bandpass, valid, masked, unity_mse })
}

/// Histogram with equal-width bins over `[edges[0], edges[bins]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct DensityReport {
    pub name: String,
    pub samples: usize,
    pub histogram: Histogram,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// `m4 / m2^2 - 3` from central sample moments.
    pub excess_kurtosis: f64,
    /// `(theoretical normal quantile, sorted standardized sample)`.
    pub qq: Vec<(f64, f64)>,
    /// Pearson correlation of the QQ pairs.
    pub qq_correlation: f64,
}

pub const HISTOGRAM_BINS: usize = 64;
pub const MIN_DENSITY_SAMPLES: usize = 100;

fn pearson(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let (mx, my) = pairs.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x / n, b + y / n));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Distribution summary of a set of samples.
pub fn describe(name: &str, samples: &[f64]) -> Result<DensityReport> {
    let count = samples.len();
    if count < MIN_DENSITY_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_DENSITY_SAMPLES, got: count });
    }
    let nf = count as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let (m2, m4) = samples.iter().fold((0.0, 0.0), |(a, b), &x| {
        let d = x - mean;
        (a + d * d, b + d.powi(4))
    });
    let variance = m2 / (nf - 1.0);
    let (pm2, pm4) = (m2 / nf, m4 / nf);
    let excess_kurtosis = if pm2 > 0.0 { pm4 / (pm2 * pm2) - 3.0 } else { 0.0 };

    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / HISTOGRAM_BINS as f64 } else { 1.0 };
    let edges = (0..=HISTOGRAM_BINS).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0usize; HISTOGRAM_BINS];
    for &x in samples {
        let bin = (((x - lo) / width) as usize).min(HISTOGRAM_BINS - 1);
        counts[bin] += 1;
    }

    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let sd = variance.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let qq: Vec<(f64, f64)> = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let p = (i as f64 + 0.5) / nf;
            let z = if sd > 0.0 { (x - mean) / sd } else { 0.0 };
            (normal.inverse_cdf(p), z)
        })
        .collect();
    let qq_correlation = pearson(&qq);
    Ok(DensityReport {
        name: name.to_string(),
        samples: count,
        histogram: Histogram { edges, counts },
        mean,
        variance,
        excess_kurtosis,
        qq,
        qq_correlation,
    })
}

/// [`describe`] for each named grid restricted to `region`.
pub fn density_diagnostics<T: Real>(grids: &[(&str, &ImageGrid<T>)], region: &Mask) -> Result<Vec<DensityReport>> {
    grids
        .iter()
        .map(|(name, g)| {
            region.ensure_dims(g.rows(), g.cols())?;
            let samples: Vec<f64> = g
                .as_slice()
                .iter()
                .zip(region.as_slice())
                .filter(|(_, &keep)| keep)
                .map(|(x, _)| x.to_f64_lossy())
                .collect();
            describe(name, &samples)
        })
        .collect()
}
