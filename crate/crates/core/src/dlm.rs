//! Conjugate Normal-Gamma dynamic linear model for a single series.
//!
//! Conventions: given the observation precision λ, the state is
//! `θ | λ ~ N(m, C / (s λ))` and `λ ~ Gamma(n/2, rate = n s / 2)`, so the
//! marginal of θ is Student-t with `n` degrees of freedom and scale `C`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{repair_psd, symmetrize};
use crate::special::student_t_half_width;

/// Posterior `NG(m, C, n, s)` after observing day t.
#[derive(Debug, Clone, PartialEq)]
pub struct DlmState {
    pub m: DVector<f64>,
    pub c: DMatrix<f64>,
    pub n: f64,
    pub s: f64,
}

/// Prior `NG(a, R, r, s)` for day t+1 given data through t.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorState {
    pub a: DVector<f64>,
    pub big_r: DMatrix<f64>,
    pub r: f64,
    pub s: f64,
}

/// Borrowed view shared by posteriors and priors for sampling.
#[derive(Debug, Clone, Copy)]
pub struct NormalGammaView<'a> {
    pub mean: &'a DVector<f64>,
    pub scale: &'a DMatrix<f64>,
    pub dof: f64,
    pub s: f64,
}

impl DlmState {
    pub fn dim(&self) -> usize {
        self.m.len()
    }

    pub fn view(&self) -> NormalGammaView<'_> {
        NormalGammaView {
            mean: &self.m,
            scale: &self.c,
            dof: self.n,
            s: self.s,
        }
    }

    /// Posterior equal to the prior: the update for a missing observation.
    pub fn from_prior(prior: &PriorState) -> Self {
        DlmState {
            m: prior.a.clone(),
            c: prior.big_r.clone(),
            n: prior.r,
            s: prior.s,
        }
    }

    /// Append a coefficient with the given mean and variance, uncorrelated
    /// with the existing ones.
    pub fn push_coefficient(&mut self, mean: f64, var: f64) {
        let (m, c) = push_coef(&self.m, &self.c, mean, var);
        self.m = m;
        self.c = c;
    }

    pub fn remove_coefficient(&mut self, idx: usize) {
        self.m = self.m.clone().remove_row(idx);
        self.c = self.c.clone().remove_row(idx).remove_column(idx);
    }
}

impl PriorState {
    /// Zero-mean prior with isotropic scale `var`.
    pub fn initial(p: usize, var: f64, dof: f64, s: f64) -> Self {
        PriorState {
            a: DVector::zeros(p),
            big_r: DMatrix::identity(p, p) * var,
            r: dof,
            s,
        }
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn view(&self) -> NormalGammaView<'_> {
        NormalGammaView {
            mean: &self.a,
            scale: &self.big_r,
            dof: self.r,
            s: self.s,
        }
    }

    pub fn push_coefficient(&mut self, mean: f64, var: f64) {
        let (a, r) = push_coef(&self.a, &self.big_r, mean, var);
        self.a = a;
        self.big_r = r;
    }

    pub fn remove_coefficient(&mut self, idx: usize) {
        self.a = self.a.clone().remove_row(idx);
        self.big_r = self.big_r.clone().remove_row(idx).remove_column(idx);
    }
}

fn push_coef(m: &DVector<f64>, c: &DMatrix<f64>, mean: f64, var: f64) -> (DVector<f64>, DMatrix<f64>) {
    let p = m.len();
    let m = m.clone().insert_row(p, mean);
    let mut c = c.clone().insert_row(p, 0.0).insert_column(p, 0.0);
    c[(p, p)] = var;
    (m, c)
}

/// Discount factors for the endogenous block, the parent block and the
/// observation precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscountConfig {
    pub delta_phi: f64,
    pub delta_gamma: f64,
    pub beta_lambda: f64,
}

impl Default for DiscountConfig {
    fn default() -> Self {
        DiscountConfig {
            delta_phi: 0.99,
            delta_gamma: 0.95,
            beta_lambda: 0.95,
        }
    }
}

impl DiscountConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("discount.delta_phi", self.delta_phi),
            ("discount.delta_gamma", self.delta_gamma),
            ("discount.beta_lambda", self.beta_lambda),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::config(name, format!("{v} is outside (0, 1]")));
            }
        }
        Ok(())
    }
}

/// Student-t one-step predictive distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Forecast {
    pub mean: f64,
    /// Predictive scale `q = s + Fᵀ R F` (a variance).
    pub scale: f64,
    pub dof: f64,
}

impl Forecast {
    /// Central interval holding probability `mass`.
    pub fn interval(&self, mass: f64) -> (f64, f64) {
        let k = student_t_half_width(mass, self.dof);
        if k.is_infinite() {
            return (f64::NEG_INFINITY, f64::INFINITY);
        }
        let h = k * self.scale.sqrt();
        (self.mean - h, self.mean + h)
    }
}

fn check_dims(prior: &PriorState, f: &DVector<f64>) -> Result<()> {
    if f.len() != prior.a.len() || prior.big_r.nrows() != prior.a.len() || prior.big_r.ncols() != prior.a.len() {
        return Err(Error::Data(format!(
            "regression vector of length {} against a state of dimension {}",
            f.len(),
            prior.a.len()
        )));
    }
    Ok(())
}

pub fn forecast_one(prior: &PriorState, f: &DVector<f64>) -> Result<Forecast> {
    check_dims(prior, f)?;
    let rf = &prior.big_r * f;
    let q = prior.s + f.dot(&rf);
    if !(q > 0.0) {
        return Err(Error::Numerical(format!("predictive scale q = {q} is not positive")));
    }
    Ok(Forecast {
        mean: f.dot(&prior.a),
        scale: q,
        dof: prior.r,
    })
}

/// Conjugate posterior update with observation `y` and regression vector `f`.
pub fn kalman_update(prior: &PriorState, f: &DVector<f64>, y: f64) -> Result<DlmState> {
    check_dims(prior, f)?;
    let rf = &prior.big_r * f;
    let q = prior.s + f.dot(&rf);
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::Numerical(format!(
            "predictive scale q = {q} is not positive (s = {}, R not PSD?)",
            prior.s
        )));
    }
    let e = y - f.dot(&prior.a);
    let gain = rf / q;
    let z = (prior.r + e * e / q) / (prior.r + 1.0);
    let m = &prior.a + &gain * e;
    let mut c = (&prior.big_r - &gain * gain.transpose() * q) * z;
    symmetrize(&mut c);
    repair_psd(&mut c);
    Ok(DlmState {
        m,
        c,
        n: prior.r + 1.0,
        s: z * prior.s,
    })
}

/// Block-discount evolution to the next prior.
///
/// `g` is the evolution matrix and `n_endo` the size of the leading
/// endogenous block; the remaining coefficients form the parent block.
pub fn evolve(post: &DlmState, g: &DMatrix<f64>, cfg: &DiscountConfig, n_endo: usize) -> Result<PriorState> {
    cfg.validate()?;
    let p = post.dim();
    if g.nrows() != p || g.ncols() != p {
        return Err(Error::Data(format!("evolution matrix is {}x{}, state has dimension {p}", g.nrows(), g.ncols())));
    }
    if n_endo > p {
        return Err(Error::Data(format!("n_endo = {n_endo} exceeds state dimension {p}")));
    }
    let a = g * &post.m;
    let b = g * &post.c * g.transpose();
    Ok(PriorState {
        a,
        big_r: discounted(b, cfg, n_endo),
        r: cfg.beta_lambda * post.n,
        s: post.s,
    })
}

/// Evolution with a diagonal `G`.
pub fn evolve_diagonal(post: &DlmState, g_diag: &[f64], cfg: &DiscountConfig, n_endo: usize) -> Result<PriorState> {
    cfg.validate()?;
    let p = post.dim();
    if g_diag.len() != p || n_endo > p {
        return Err(Error::Data(format!(
            "diagonal evolution of length {} (n_endo {n_endo}) for state dimension {p}",
            g_diag.len()
        )));
    }
    let a = DVector::from_fn(p, |i, _| g_diag[i] * post.m[i]);
    let b = DMatrix::from_fn(p, p, |i, j| g_diag[i] * post.c[(i, j)] * g_diag[j]);
    Ok(PriorState {
        a,
        big_r: discounted(b, cfg, n_endo),
        r: cfg.beta_lambda * post.n,
        s: post.s,
    })
}

/// `B + W` with W's blocks scaled by `1/δ_φ − 1`, `1/√(δ_φ δ_γ) − 1` and
/// `1/δ_γ − 1`. The lower-left block mirrors the upper-right.
fn discounted(b: DMatrix<f64>, cfg: &DiscountConfig, n_endo: usize) -> DMatrix<f64> {
    let p = b.nrows();
    let f_endo = 1.0 / cfg.delta_phi;
    let f_cross = 1.0 / (cfg.delta_phi * cfg.delta_gamma).sqrt();
    let f_par = 1.0 / cfg.delta_gamma;
    let mut r = DMatrix::from_fn(p, p, |i, j| {
        let factor = match (i < n_endo, j < n_endo) {
            (true, true) => f_endo,
            (false, false) => f_par,
            _ => f_cross,
        };
        b[(i, j)] * factor
    });
    symmetrize(&mut r);
    repair_psd(&mut r);
    r
}
