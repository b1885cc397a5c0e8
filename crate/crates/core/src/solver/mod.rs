//! ADMM solver for the directional three-part decomposition with a
//! missing-pixel mask.
//!
//! Given `f` and the known-pixel indicator `chi = chi_D^c`, the solver
//! splits `f = u + v + eps` where `u` minimizes a directional TV term,
//! `v = sum_s d_s^+ g_s` is penalized through `||g_s||_1` and `||v||_1`,
//! and `chi .x eps` is bounded in the sup norm of its frame coefficients.
//!
//! Each iteration solves, in this order, the `r`, `w`, `g`, `v`, `u`, `e`
//! and `eps` subproblems and then updates the five multiplier families.
//! Every step is a public method of [`Solver`] so a caller can replay an
//! iteration by hand.

mod params;

pub use params::{Penalties, SolverParams, Threshold};

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{ImageGrid, Mask};
use crate::msdt::MsdtFrame;
use crate::scalar::Real;
use crate::spectral::{Direction, Fft2, SpectrumGrid};

/// Soft thresholding `sign(x) max(|x| - tau, 0)`.
#[inline]
pub fn shrink_scalar<T: Real>(x: T, tau: T) -> T {
    let mag = x.abs() - tau;
    if mag > T::zero() {
        mag.copysign(x)
    } else {
        T::zero()
    }
}

/// Elementwise [`shrink_scalar`].
pub fn shrink<T: Real>(x: &ImageGrid<T>, tau: T) -> ImageGrid<T> {
    x.map(|v| shrink_scalar(v, tau))
}

/// Every variable of one ADMM iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState<T> {
    pub u: ImageGrid<T>,
    pub v: ImageGrid<T>,
    pub eps: ImageGrid<T>,
    pub e: ImageGrid<T>,
    /// Input of the last `e` step: `chi .x eps - lambda5 / beta5`.
    pub e1: ImageGrid<T>,
    /// Frame-smoothed part of `e1`; `e = e1 - e2`.
    pub e2: ImageGrid<T>,
    pub r: Vec<ImageGrid<T>>,
    pub w: Vec<ImageGrid<T>>,
    pub g: Vec<ImageGrid<T>>,
    pub lambda1: Vec<ImageGrid<T>>,
    pub lambda2: Vec<ImageGrid<T>>,
    pub lambda3: ImageGrid<T>,
    pub lambda4: ImageGrid<T>,
    pub lambda5: ImageGrid<T>,
    /// `sum_s d_s^+ g_s` for the current `g`, refreshed by the `v` step.
    pub div_g: ImageGrid<T>,
    /// Completed iterations.
    pub iteration: usize,
    pub mu1: T,
    pub mu2: T,
    pub nu: T,
}

/// Telemetry recorded after every iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationMetrics {
    pub iteration: usize,
    /// `||f - u - v - eps||_2` over the known pixels.
    pub unity_residual_l2: f64,
    /// The same, divided by `||f||_2` over the known pixels.
    pub unity_residual_rel: f64,
    /// `||f - u - v - eps||_2` over the whole grid.
    pub unity_residual_full_l2: f64,
    /// Sup norm of the frame coefficients of `e`.
    pub sup_coeff_e: f64,
    /// `||v - div g||_2`.
    pub texture_residual_l2: f64,
    pub nu: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub elapsed_ms: f64,
}

/// Final cartoon/texture/residual split and its trace.
#[derive(Clone, Debug)]
pub struct Decomposition<T> {
    pub u: ImageGrid<T>,
    pub v: ImageGrid<T>,
    pub eps: ImageGrid<T>,
    pub e: ImageGrid<T>,
    pub e1: ImageGrid<T>,
    pub e2: ImageGrid<T>,
    pub g: Vec<ImageGrid<T>>,
    /// Directional texture parts `v_s = d_s^+ g_s`.
    pub texture_parts: Vec<ImageGrid<T>>,
    pub penalties: Penalties,
    pub trace: Vec<IterationMetrics>,
}

/// Problem data and iteration-invariant spectra for one run.
pub struct Solver<T: Real> {
    params: SolverParams,
    penalties: Penalties,
    f: ImageGrid<T>,
    /// `chi_D^c` as 0/1 samples; `None` runs the mask-free path.
    known: Option<ImageGrid<T>>,
    fft: Fft2<T>,
    frame: Arc<MsdtFrame<T>>,
    tv_dirs: Vec<Direction<T>>,
    tex_dirs: Vec<Direction<T>>,
    /// `X(z) = beta4 + beta1 sum_l |P_l|^2`.
    x_symbol: Vec<T>,
    /// `A_a(z) = beta2 + beta3 |P_a|^2`.
    a_symbols: Vec<Vec<T>>,
}

impl<T: Real> std::fmt::Debug for Solver<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Solver")
            .field("dims", &self.f.dims())
            .field("params", &self.params)
            .field("masked", &self.known.is_some())
            .finish()
    }
}

impl<T: Real> Solver<T> {
    /// Solver with a missing region `missing` (true = unknown pixel).
    pub fn new(f: &ImageGrid<T>, missing: &Mask, params: &SolverParams) -> Result<Self> {
        missing.ensure_dims(f.rows(), f.cols())?;
        Self::build(f, Some(missing.known_weights()), params)
    }

    /// Solver without a mask: every pixel is known.
    pub fn unmasked(f: &ImageGrid<T>, params: &SolverParams) -> Result<Self> {
        Self::build(f, None, params)
    }

    fn build(f: &ImageGrid<T>, known: Option<ImageGrid<T>>, params: &SolverParams) -> Result<Self> {
        params.validate()?;
        if f.rows() < 4 || f.cols() < 4 {
            return Err(Error::GridTooSmall {
                rows: f.rows(),
                cols: f.cols(),
                reason: "the solver needs at least 4x4".into(),
            });
        }
        if !f.is_finite() {
            return Err(Error::invalid("input image contains non-finite samples"));
        }
        let (m, n) = f.dims();
        let penalties = params.penalties();
        let tv_dirs = Direction::all(params.tv_directions);
        let tex_dirs = Direction::all(params.texture_directions);

        let (b1, b2, b3, b4) = (
            T::lit(penalties.beta1),
            T::lit(penalties.beta2),
            T::lit(penalties.beta3),
            T::lit(penalties.beta4),
        );
        let mut x_symbol = vec![b4; m * n];
        let mut a_symbols = vec![vec![b2; m * n]; tex_dirs.len()];
        for k1 in 0..m {
            for k2 in 0..n {
                let k = k1 * n + k2;
                let energy: T = tv_dirs.iter().map(|d| d.forward_symbol(k1, k2, m, n).norm_sqr()).sum();
                x_symbol[k] = b4 + b1 * energy;
                for (a, d) in tex_dirs.iter().enumerate() {
                    a_symbols[a][k] = b2 + b3 * d.forward_symbol(k1, k2, m, n).norm_sqr();
                }
            }
        }
        let x_min = x_symbol.iter().copied().fold(T::infinity(), T::min);
        assert!(x_min >= b4 - T::lit(1e-12), "X(z) fell below beta4");
        for a in &a_symbols {
            let a_min = a.iter().copied().fold(T::infinity(), T::min);
            assert!(a_min >= b2 - T::lit(1e-12), "A_a(z) fell below beta2");
        }

        Ok(Self {
            params: params.clone(),
            penalties,
            f: f.clone(),
            known,
            fft: Fft2::new(m, n),
            frame: MsdtFrame::new(m, n, &params.frame)?,
            tv_dirs,
            tex_dirs,
            x_symbol,
            a_symbols,
        })
    }

    pub fn params(&self) -> &SolverParams {
        &self.params
    }

    pub fn penalties(&self) -> Penalties {
        self.penalties
    }

    pub fn frame(&self) -> &Arc<MsdtFrame<T>> {
        &self.frame
    }

    pub fn image(&self) -> &ImageGrid<T> {
        &self.f
    }

    /// `X(z)` on the DFT grid.
    pub fn cartoon_symbol(&self) -> &[T] {
        &self.x_symbol
    }

    /// `A_a(z)` on the DFT grid.
    pub fn texture_symbol(&self, a: usize) -> &[T] {
        &self.a_symbols[a]
    }

    pub fn tv_directions(&self) -> &[Direction<T>] {
        &self.tv_dirs
    }

    pub fn texture_directions(&self) -> &[Direction<T>] {
        &self.tex_dirs
    }

    /// Initial iterate: `u = f`, everything else zero.
    pub fn init_state(&self) -> SolverState<T> {
        let (m, n) = self.f.dims();
        let z = ImageGrid::zeros(m, n);
        let l = self.tv_dirs.len();
        let s = self.tex_dirs.len();
        SolverState {
            u: self.f.clone(),
            v: z.clone(),
            eps: z.clone(),
            e: z.clone(),
            e1: z.clone(),
            e2: z.clone(),
            r: vec![z.clone(); l],
            w: vec![z.clone(); s],
            g: vec![z.clone(); s],
            lambda1: vec![z.clone(); l],
            lambda2: vec![z.clone(); s],
            lambda3: z.clone(),
            lambda4: z.clone(),
            lambda5: z.clone(),
            div_g: z,
            iteration: 0,
            mu1: T::zero(),
            mu2: T::zero(),
            nu: T::zero(),
        }
    }

    fn beta(&self) -> (T, T, T, T, T) {
        let p = &self.penalties;
        (T::lit(p.beta1), T::lit(p.beta2), T::lit(p.beta3), T::lit(p.beta4), T::lit(p.beta5))
    }

    /// `chi .x x`, or a plain copy on the mask-free path.
    fn restrict(&self, x: &ImageGrid<T>) -> ImageGrid<T> {
        match &self.known {
            Some(chi) => chi.zip_map(x, |c, v| c * v),
            None => x.clone(),
        }
    }

    /// `r_l = Shrink(d_l^+ u - lambda1_l / beta1, 1 / beta1)`.
    pub fn solve_r(&self, state: &mut SolverState<T>) {
        let (b1, ..) = self.beta();
        let u = &state.u;
        let (m, n) = u.dims();
        if b1 == T::zero() {
            state.r.iter_mut().for_each(|r| *r = ImageGrid::zeros(m, n));
            return;
        }
        let tau = T::one() / b1;
        state
            .r
            .par_iter_mut()
            .zip(state.lambda1.par_iter())
            .zip(self.tv_dirs.par_iter())
            .for_each(|((r, lambda), dir)| {
                let mut t = lambda.map(|l| -l / b1);
                dir.forward_acc(u, T::one(), &mut t);
                *r = shrink(&t, tau);
            });
    }

    /// `w_a = Shrink(g_a - lambda2_a / beta2, mu1 / beta2)`, with the
    /// adaptive `mu1` taken from the global maximum over all directions.
    /// Returns `mu1`.
    pub fn solve_w(&self, state: &mut SolverState<T>) -> T {
        let (_, b2, ..) = self.beta();
        let targets: Vec<ImageGrid<T>> = state
            .g
            .iter()
            .zip(&state.lambda2)
            .map(|(g, l2)| g.zip_map(l2, |g, l| g - l / b2))
            .collect();
        let mu1 = match self.params.mu1 {
            Threshold::Adaptive(c) => {
                let peak = targets.iter().fold(T::zero(), |acc, t| acc.max(t.max_abs()));
                T::lit(c) * b2 * peak
            }
            Threshold::Fixed(mu) => T::lit(mu),
        };
        let tau = mu1 / b2;
        for (w, t) in state.w.iter_mut().zip(&targets) {
            *w = shrink(t, tau);
        }
        state.mu1 = mu1;
        mu1
    }

    /// Spatial right-hand side of the `g_a` normal equation:
    /// `beta2 w_a + lambda2_a + beta3 (d_a^+)^T (v - sum_{s != a} d_s^+ g_s + lambda3 / beta3)`.
    pub fn texture_rhs(&self, state: &SolverState<T>, a: usize) -> ImageGrid<T> {
        let (_, b2, b3, ..) = self.beta();
        let mut rest = state.v.zip_map(&state.lambda3, |v, l| v + l / b3);
        for (s, (dir, g)) in self.tex_dirs.iter().zip(&state.g).enumerate() {
            if s != a {
                dir.forward_acc(g, -T::one(), &mut rest);
            }
        }
        let mut rhs = state.w[a].zip_map(&state.lambda2[a], |w, l| b2 * w + l);
        // (d^+)^T = -d^-
        self.tex_dirs[a].backward_acc(&rest, -b3, &mut rhs);
        rhs
    }

    /// `B_a(z)`, the spectrum of [`Solver::texture_rhs`].
    pub fn texture_rhs_spectrum(&self, state: &SolverState<T>, a: usize) -> SpectrumGrid<T> {
        self.fft.forward(&self.texture_rhs(state, a))
    }

    /// `g_a = Re F^-1 { B_a / A_a }` for `a = 0..S`, sweeping the directions
    /// in order so each solve sees the already updated `g_s`, `s < a`.
    pub fn solve_g(&self, state: &mut SolverState<T>) {
        for a in 0..self.tex_dirs.len() {
            let mut spectrum = self.texture_rhs_spectrum(state, a);
            for (b, &den) in spectrum.as_mut_slice().iter_mut().zip(&self.a_symbols[a]) {
                *b = *b / den;
            }
            state.g[a] = self.fft.inverse_real_checked(&spectrum);
        }
    }

    /// `sum_s d_s^+ g_s`.
    pub fn divergence(&self, g: &[ImageGrid<T>]) -> ImageGrid<T> {
        let (m, n) = self.f.dims();
        let mut div = ImageGrid::zeros(m, n);
        for (dir, gs) in self.tex_dirs.iter().zip(g) {
            dir.forward_acc(gs, T::one(), &mut div);
        }
        div
    }

    /// `t_v = theta (div g - lambda3 / beta3) + (1 - theta)(f - u - eps + lambda4 / beta4)`
    /// followed by `v = Shrink(t_v, mu2 / (beta3 + beta4))`. Returns `mu2`.
    pub fn solve_v(&self, state: &mut SolverState<T>) -> T {
        let (_, _, b3, b4, _) = self.beta();
        let sum = b3 + b4;
        let (w3, w4) = (b3 / sum, b4 / sum);
        state.div_g = self.divergence(&state.g);
        let f = self.f.as_slice();
        let (u, eps) = (state.u.as_slice(), state.eps.as_slice());
        let (l3, l4) = (state.lambda3.as_slice(), state.lambda4.as_slice());
        let div = state.div_g.as_slice();
        let t: Vec<T> = (0..f.len())
            .map(|k| w3 * (div[k] - l3[k] / b3) + w4 * (f[k] - u[k] - eps[k] + l4[k] / b4))
            .collect();
        let t = ImageGrid::from_vec_unchecked(self.f.rows(), self.f.cols(), t);
        let mu2 = match self.params.mu2 {
            Threshold::Adaptive(c) => T::lit(c) * sum * t.max_abs(),
            Threshold::Fixed(mu) => T::lit(mu),
        };
        state.v = shrink(&t, mu2 / sum);
        state.mu2 = mu2;
        mu2
    }

    /// Spatial right-hand side of the `u` normal equation:
    /// `beta4 (f - v - eps + lambda4 / beta4) + sum_l (d_l^+)^T (beta1 r_l + lambda1_l)`.
    pub fn cartoon_rhs(&self, state: &SolverState<T>) -> ImageGrid<T> {
        let (b1, _, _, b4, _) = self.beta();
        let f = self.f.as_slice();
        let (v, eps, l4) = (state.v.as_slice(), state.eps.as_slice(), state.lambda4.as_slice());
        let y: Vec<T> = (0..f.len()).map(|k| b4 * (f[k] - v[k] - eps[k] + l4[k] / b4)).collect();
        let mut y = ImageGrid::from_vec_unchecked(self.f.rows(), self.f.cols(), y);
        let terms: Vec<ImageGrid<T>> = self
            .tv_dirs
            .par_iter()
            .zip(state.r.par_iter().zip(state.lambda1.par_iter()))
            .map(|(dir, (r, l1))| {
                let src = r.zip_map(l1, |r, l| b1 * r + l);
                dir.backward(&src)
            })
            .collect();
        for t in &terms {
            y.axpy(-T::one(), t);
        }
        y
    }

    /// `Y(z)`, the spectrum of [`Solver::cartoon_rhs`].
    pub fn cartoon_rhs_spectrum(&self, state: &SolverState<T>) -> SpectrumGrid<T> {
        self.fft.forward(&self.cartoon_rhs(state))
    }

    /// `u = Re F^-1 { Y / X }`.
    pub fn solve_u(&self, state: &mut SolverState<T>) {
        let mut spectrum = self.cartoon_rhs_spectrum(state);
        for (y, &x) in spectrum.as_mut_slice().iter_mut().zip(&self.x_symbol) {
            *y = *y / x;
        }
        state.u = self.fft.inverse_real_checked(&spectrum);
    }

    /// `e = e1 - CST(e1, nu)` with `e1 = chi .x eps - lambda5 / beta5`.
    /// Returns the `nu` used.
    pub fn solve_e(&self, state: &mut SolverState<T>) -> Result<T> {
        let (.., b5) = self.beta();
        let restricted = self.restrict(&state.eps);
        let e1 = restricted.zip_map(&state.lambda5, |x, l| x - l / b5);
        let mut pyramid = self.frame.forward(&e1)?;
        let nu = match self.params.nu {
            Threshold::Adaptive(c) => T::lit(c) * pyramid.sup(),
            Threshold::Fixed(nu) => T::lit(nu),
        };
        pyramid.shrink(nu);
        let e2 = pyramid.inverse();
        state.e = e1.sub(&e2);
        state.e1 = e1;
        state.e2 = e2;
        state.nu = nu;
        Ok(nu)
    }

    /// `eps = [beta4 (f - u - v + lambda4 / beta4) + beta5 chi .x (e + lambda5 / beta5)]
    ///        ./ [beta4 + beta5 chi]`.
    pub fn solve_eps(&self, state: &mut SolverState<T>) {
        let (.., b4, b5) = self.beta();
        let f = self.f.as_slice();
        let (u, v, e) = (state.u.as_slice(), state.v.as_slice(), state.e.as_slice());
        let (l4, l5) = (state.lambda4.as_slice(), state.lambda5.as_slice());
        let eps: Vec<T> = match &self.known {
            Some(chi) => {
                let chi = chi.as_slice();
                (0..f.len())
                    .map(|k| {
                        let num = b4 * (f[k] - u[k] - v[k] + l4[k] / b4)
                            + b5 * (chi[k] * (e[k] + l5[k] / b5));
                        num / (b4 + b5 * chi[k])
                    })
                    .collect()
            }
            None => (0..f.len())
                .map(|k| {
                    let num = b4 * (f[k] - u[k] - v[k] + l4[k] / b4) + b5 * (e[k] + l5[k] / b5);
                    num / (b4 + b5)
                })
                .collect(),
        };
        state.eps = ImageGrid::from_vec_unchecked(self.f.rows(), self.f.cols(), eps);
    }

    /// Multiplier ascent. `lambda1..lambda4` step by `gamma beta_i`; `lambda5`
    /// steps by `beta5` alone.
    pub fn update_multipliers(&self, state: &mut SolverState<T>) {
        let (b1, b2, b3, b4, b5) = self.beta();
        let gamma = T::lit(self.params.gamma);
        let u = &state.u;
        state
            .lambda1
            .par_iter_mut()
            .zip(state.r.par_iter())
            .zip(self.tv_dirs.par_iter())
            .for_each(|((l1, r), dir)| {
                let mut residual = r.clone();
                dir.forward_acc(u, -T::one(), &mut residual);
                l1.axpy(gamma * b1, &residual);
            });
        for (l2, (w, g)) in state.lambda2.iter_mut().zip(state.w.iter().zip(&state.g)) {
            l2.axpy(gamma * b2, &w.sub(g));
        }
        state.lambda3.axpy(gamma * b3, &state.v.sub(&state.div_g));
        let f = self.f.as_slice();
        let unity: Vec<T> = (0..f.len())
            .map(|k| f[k] - state.u.as_slice()[k] - state.v.as_slice()[k] - state.eps.as_slice()[k])
            .collect();
        let unity = ImageGrid::from_vec_unchecked(self.f.rows(), self.f.cols(), unity);
        state.lambda4.axpy(gamma * b4, &unity);
        let restricted = self.restrict(&state.eps);
        state.lambda5.axpy(b5, &state.e.sub(&restricted));
    }

    /// One full iteration in the prescribed order.
    pub fn step(&self, state: &mut SolverState<T>) -> Result<()> {
        self.solve_r(state);
        self.solve_w(state);
        self.solve_g(state);
        self.solve_v(state);
        self.solve_u(state);
        self.solve_e(state)?;
        self.solve_eps(state);
        self.update_multipliers(state);
        state.iteration += 1;
        for (name, grid) in [("u", &state.u), ("v", &state.v), ("eps", &state.eps), ("e", &state.e)] {
            if !grid.is_finite() {
                return Err(Error::NonFinite { iteration: state.iteration, field: name });
            }
        }
        Ok(())
    }

    /// Unity residual `f - u - v - eps`.
    pub fn unity_residual(&self, state: &SolverState<T>) -> ImageGrid<T> {
        self.f.sub(&state.u).sub(&state.v).sub(&state.eps)
    }

    /// `(||r||_known, ||f||_known)` for a residual `r`.
    fn known_norms(&self, residual: &ImageGrid<T>) -> (f64, f64) {
        let f = self.f.as_slice();
        let r = residual.as_slice();
        let mut rr = 0.0;
        let mut ff = 0.0;
        for k in 0..f.len() {
            let keep = match &self.known {
                Some(chi) => chi.as_slice()[k] != T::zero(),
                None => true,
            };
            if keep {
                rr += r[k].to_f64_lossy().powi(2);
                ff += f[k].to_f64_lossy().powi(2);
            }
        }
        (rr.sqrt(), ff.sqrt())
    }

    pub fn metrics(&self, state: &SolverState<T>, elapsed_ms: f64) -> Result<IterationMetrics> {
        let residual = self.unity_residual(state);
        let (known, f_norm) = self.known_norms(&residual);
        let sup_e = self.frame.forward(&state.e)?.sup();
        Ok(IterationMetrics {
            iteration: state.iteration,
            unity_residual_l2: known,
            unity_residual_rel: if f_norm > 0.0 { known / f_norm } else { known },
            unity_residual_full_l2: residual.norm_l2().to_f64_lossy(),
            sup_coeff_e: sup_e.to_f64_lossy(),
            texture_residual_l2: state.v.sub(&state.div_g).norm_l2().to_f64_lossy(),
            nu: state.nu.to_f64_lossy(),
            mu1: state.mu1.to_f64_lossy(),
            mu2: state.mu2.to_f64_lossy(),
            elapsed_ms,
        })
    }

    /// Runs the configured number of iterations from the initial state.
    pub fn run(&self) -> Result<Decomposition<T>> {
        let mut state = self.init_state();
        let mut trace = Vec::with_capacity(self.params.iterations);
        for _ in 0..self.params.iterations {
            let start = Instant::now();
            self.step(&mut state)?;
            let elapsed = start.elapsed().as_secs_f64() * 1e3;
            trace.push(self.metrics(&state, elapsed)?);
        }
        Ok(self.finish(state, trace))
    }

    pub fn finish(&self, state: SolverState<T>, trace: Vec<IterationMetrics>) -> Decomposition<T> {
        let texture_parts = self.tex_dirs.iter().zip(&state.g).map(|(d, g)| d.forward(g)).collect();
        Decomposition {
            u: state.u,
            v: state.v,
            eps: state.eps,
            e: state.e,
            e1: state.e1,
            e2: state.e2,
            g: state.g,
            texture_parts,
            penalties: self.penalties,
            trace,
        }
    }
}

/// Decomposes `f` with missing region `missing`.
pub fn run<T: Real>(f: &ImageGrid<T>, missing: &Mask, params: &SolverParams) -> Result<Decomposition<T>> {
    Solver::new(f, missing, params)?.run()
}

/// Decomposes a fully known `f`, skipping every mask product.
pub fn run_unmasked<T: Real>(f: &ImageGrid<T>, params: &SolverParams) -> Result<Decomposition<T>> {
    Solver::unmasked(f, params)?.run()
}
