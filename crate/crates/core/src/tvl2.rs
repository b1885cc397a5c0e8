//! Reference TV inpainting: minimizes `TV(u) + beta/2 ||chi .x (f - u)||^2`
//! with the split `d = grad u`, `z = u` and scaled multipliers.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::grid::{ImageGrid, Mask};
use crate::scalar::Real;
use crate::solver::shrink_scalar;
use crate::spectral::{Direction, Fft2, SpectrumGrid};

#[derive(Clone, Debug, PartialEq)]
pub struct Tvl2Params {
    /// Fidelity weight on known pixels.
    pub beta: f64,
    /// Penalty weight of both splitting constraints.
    pub rho: f64,
    pub iterations: usize,
    /// Euclidean norm of the gradient per pixel; otherwise `|dx| + |dy|`.
    pub isotropic: bool,
}

impl Default for Tvl2Params {
    fn default() -> Self {
        Self { beta: 0.01, rho: 0.05, iterations: 300, isotropic: true }
    }
}

impl Tvl2Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!("tvl2 beta must be > 0, got {}", self.beta)));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::invalid(format!("tvl2 rho must be > 0, got {}", self.rho)));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("tvl2 needs at least one iteration"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tvl2Metrics {
    pub iteration: usize,
    pub energy: f64,
    /// `||chi .x (f - u)||`.
    pub fidelity_l2: f64,
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug)]
pub struct Tvl2Outcome<T> {
    pub u: ImageGrid<T>,
    /// Energy of the initialization `u = f`.
    pub initial_energy: f64,
    pub trace: Vec<Tvl2Metrics>,
}

fn grad_dirs<T: Real>() -> [Direction<T>; 2] {
    [
        Direction { index: 0, count: 2, cos: T::one(), sin: T::zero() },
        Direction { index: 1, count: 2, cos: T::zero(), sin: T::one() },
    ]
}

fn tv<T: Real>(dx: &ImageGrid<T>, dy: &ImageGrid<T>, isotropic: bool) -> T {
    dx.as_slice()
        .iter()
        .zip(dy.as_slice())
        .map(|(&a, &b)| if isotropic { a.hypot(b) } else { a.abs() + b.abs() })
        .sum()
}

/// `TV(u) + beta/2 ||chi .x (f - u)||^2` for the known-pixel indicator of `missing`.
pub fn tvl2_energy<T: Real>(u: &ImageGrid<T>, f: &ImageGrid<T>, missing: &Mask, params: &Tvl2Params) -> Result<T> {
    let (m, n) = u.dims();
    f.ensure_same_dims(m, n)?;
    missing.ensure_dims(m, n)?;
    let [gx, gy] = grad_dirs::<T>();
    Ok(energy(&gx.forward(u), &gy.forward(u), u, f, missing, params))
}

fn energy<T: Real>(
    dx: &ImageGrid<T>,
    dy: &ImageGrid<T>,
    u: &ImageGrid<T>,
    f: &ImageGrid<T>,
    missing: &Mask,
    params: &Tvl2Params,
) -> T {
    T::lit(params.beta) * T::lit(0.5) * fidelity_sq(u, f, missing) + tv(dx, dy, params.isotropic)
}

fn fidelity_sq<T: Real>(u: &ImageGrid<T>, f: &ImageGrid<T>, missing: &Mask) -> T {
    (0..u.len())
        .filter(|&k| !missing.as_slice()[k])
        .map(|k| {
            let d = f.as_slice()[k] - u.as_slice()[k];
            d * d
        })
        .sum()
}

/// TV inpainting of `f` on the known pixels (complement of `missing`),
/// starting from `u = f`.
pub fn tvl2_inpaint<T: Real>(f: &ImageGrid<T>, missing: &Mask, params: &Tvl2Params) -> Result<Tvl2Outcome<T>> {
    params.validate()?;
    let (m, n) = f.dims();
    missing.ensure_dims(m, n)?;
    if m < 2 || n < 2 {
        return Err(Error::GridTooSmall { rows: m, cols: n, reason: "tvl2 needs at least 2x2".into() });
    }
    if !f.is_finite() {
        return Err(Error::invalid("input image contains non-finite values"));
    }
    let start = Instant::now();
    let (beta, rho) = (T::lit(params.beta), T::lit(params.rho));
    let dirs = grad_dirs::<T>();
    let fft = Fft2::<T>::new(m, n);
    let denom: Vec<T> = (0..m * n)
        .map(|k| {
            let (k1, k2) = (k / n, k % n);
            dirs.iter().map(|d| d.forward_symbol(k1, k2, m, n).norm_sqr()).sum::<T>() + T::one()
        })
        .collect();

    let mut u = f.clone();
    let mut z = f.clone();
    let mut d = [dirs[0].forward(f), dirs[1].forward(f)];
    let mut b = [ImageGrid::zeros(m, n), ImageGrid::zeros(m, n)];
    let mut b_z = ImageGrid::<T>::zeros(m, n);
    let initial_energy = energy(&d[0], &d[1], f, f, missing, params).to_f64_lossy();
    let known = missing.complement();
    let mut trace = Vec::with_capacity(params.iterations);

    for it in 1..=params.iterations {
        // (grad^T grad + I) u = grad^T (d - b) + z - b_z
        let mut rhs = z.sub(&b_z);
        for (dir, (dl, bl)) in dirs.iter().zip(d.iter().zip(&b)) {
            dir.backward_acc(&dl.sub(bl), -T::one(), &mut rhs);
        }
        let mut spectrum: SpectrumGrid<T> = fft.forward(&rhs);
        for (y, &x) in spectrum.as_mut_slice().iter_mut().zip(&denom) {
            *y = *y / x;
        }
        u = fft.inverse_real_checked(&spectrum);

        let grad = [dirs[0].forward(&u), dirs[1].forward(&u)];
        let tx = grad[0].add(&b[0]);
        let ty = grad[1].add(&b[1]);
        let tau = T::one() / rho;
        if params.isotropic {
            let scale: Vec<T> = tx
                .as_slice()
                .iter()
                .zip(ty.as_slice())
                .map(|(&a, &c)| {
                    let mag = a.hypot(c);
                    if mag > tau { (mag - tau) / mag } else { T::zero() }
                })
                .collect();
            let s = ImageGrid::from_vec_unchecked(m, n, scale);
            d = [tx.zip_map(&s, |a, w| a * w), ty.zip_map(&s, |a, w| a * w)];
        } else {
            d = [tx.map(|a| shrink_scalar(a, tau)), ty.map(|a| shrink_scalar(a, tau))];
        }

        z = ImageGrid::from_fn(m, n, |r, c| {
            let target = u[(r, c)] + b_z[(r, c)];
            if known.get(r, c) {
                (beta * f[(r, c)] + rho * target) / (beta + rho)
            } else {
                target
            }
        });

        for k in 0..2 {
            b[k].axpy(T::one(), &grad[k].sub(&d[k]));
        }
        b_z.axpy(T::one(), &u.sub(&z));

        if !u.is_finite() {
            return Err(Error::NonFinite { iteration: it, field: "u" });
        }
        trace.push(Tvl2Metrics {
            iteration: it,
            energy: energy(&grad[0], &grad[1], &u, f, missing, params).to_f64_lossy(),
            fidelity_l2: fidelity_sq(&u, f, missing).sqrt().to_f64_lossy(),
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(Tvl2Outcome { u, initial_energy, trace })
}
