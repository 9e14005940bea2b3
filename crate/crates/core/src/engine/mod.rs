//! The simultaneous cycle: per-series updates, Monte-Carlo recoupling,
//! variational decoupling, parent maintenance and evolution.
//!
//! Each day runs forecast → update → sample → recouple → decouple → Wishart
//! → candidates → promotion (every ΔT) → evolve. The forecast for day t is
//! produced before day t's targets are read.

mod decouple;
mod forecast;
mod recouple;
mod sampling;

pub use decouple::{dof_equation, solve_dof, vb_decouple, vb_decouple_anchored, Decoupled, DOF_BRACKET};
pub use forecast::{
    cascade_features, joint_forecast, CascadeUpdater, FeatureUpdater, ForecastSettings, JointForecast,
    PredictiveSummary, PricePathUpdater, MAX_REJECTION_SHARE,
};
pub use recouple::{effective_sample_size, recouple_weights, weight_entropy, GammaMatrix, Recoupling};
pub use sampling::{sample_normal_gamma, sample_posteriors, SampleBatch, SeriesDraws};

use nalgebra::DVector;
use rayon::prelude::*;

use crate::dlm::{evolve_diagonal, kalman_update, DiscountConfig, DlmState, PriorState};
use crate::error::{Error, Result};
use crate::linalg::min_eigenvalue;
use crate::parents::{
    downset_decay_matrix, promote_and_retire, propose_candidates, wishart_update, ParentConfig, ParentSets, SetKind,
    WishartState,
};

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub discount: DiscountConfig,
    pub parents: ParentConfig,
    pub n_mc: usize,
    /// Probability mass of the reported central interval.
    pub interval_mass: f64,
    pub ess_floor: f64,
    pub prior_variance: f64,
    pub prior_dof: f64,
    pub prior_scale: f64,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            discount: DiscountConfig::default(),
            parents: ParentConfig::default(),
            n_mc: 500,
            interval_mass: 0.9,
            ess_floor: 10.0,
            prior_variance: 1.0,
            prior_dof: 1.0,
            prior_scale: 1.0,
            seed: 0,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        self.discount.validate()?;
        self.parents.validate()?;
        if self.n_mc < 2 {
            return Err(Error::config("engine.n_mc", "at least 2 draws are required"));
        }
        if !(self.interval_mass > 0.0 && self.interval_mass < 1.0) {
            return Err(Error::config("engine.interval_mass", "must lie in (0, 1)"));
        }
        for (name, v) in [
            ("engine.prior_variance", self.prior_variance),
            ("engine.prior_dof", self.prior_dof),
            ("engine.prior_scale", self.prior_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be positive"));
            }
        }
        if !(self.ess_floor >= 1.0) {
            return Err(Error::config("engine.ess_floor", "must be at least 1"));
        }
        Ok(())
    }
}

/// One day's standardized inputs. `features[j]` is the endogenous vector
/// built from data through the previous day; `targets[j]` is `None` when
/// series j is missing or not yet warmed up.
#[derive(Debug, Clone, PartialEq)]
pub struct DayInput {
    pub features: Vec<DVector<f64>>,
    pub targets: Vec<Option<f64>>,
}

/// Posterior snapshot of one series after a day's update.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSnapshot {
    pub m: DVector<f64>,
    pub c_diag: DVector<f64>,
    pub n: f64,
    pub s: f64,
    /// Parent id and set, in coefficient order after the endogenous block.
    pub parents: Vec<(usize, SetKind, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetiredParent {
    pub child: usize,
    pub parent: usize,
    /// Prior mean of the coefficient at removal.
    pub final_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayReport {
    pub day: u64,
    pub forecasts: Vec<PredictiveSummary>,
    pub entropy: f64,
    pub ess: f64,
    pub tempering: f64,
    pub det_fallbacks: usize,
    pub forecast_rejections: usize,
    pub vb_fallbacks: usize,
    pub max_dof_residual: f64,
    pub min_eigenvalue: f64,
    pub snapshots: Vec<SeriesSnapshot>,
    pub retired: Vec<RetiredParent>,
}

#[derive(Debug, Clone)]
pub struct Engine {
    pub cfg: EngineConfig,
    pub n_endo: usize,
    pub priors: Vec<PriorState>,
    pub sets: Vec<ParentSets>,
    pub wishart: WishartState,
    /// Series with at least one observed target; the others keep their
    /// initial prior.
    pub observed: Vec<bool>,
    pub day: u64,
}

impl Engine {
    pub fn new(cfg: EngineConfig, n_series: usize, n_endo: usize) -> Result<Self> {
        cfg.validate()?;
        if n_series == 0 || n_endo == 0 {
            return Err(Error::config("engine", "needs at least one series and one feature"));
        }
        let prior = PriorState::initial(n_endo, cfg.prior_variance, cfg.prior_dof, cfg.prior_scale);
        Ok(Engine {
            wishart: WishartState::new(n_series, cfg.parents.delta_w, cfg.parents.beta_w),
            priors: vec![prior; n_series],
            sets: vec![ParentSets::default(); n_series],
            observed: vec![false; n_series],
            n_endo,
            day: 0,
            cfg,
        })
    }

    pub fn n_series(&self) -> usize {
        self.priors.len()
    }

    /// Current Γ sparsity from parent memberships.
    pub fn gamma(&self) -> GammaMatrix {
        GammaMatrix {
            rows: self
                .sets
                .iter()
                .map(|s| s.members.iter().enumerate().map(|(k, m)| (m.id, self.n_endo + k)).collect())
                .collect(),
        }
    }

    fn forecast_settings(&self) -> ForecastSettings {
        ForecastSettings {
            n_mc: self.cfg.n_mc,
            mass: self.cfg.interval_mass,
            seed: self.cfg.seed,
        }
    }

    /// Forecast of the next day's targets from the current priors.
    pub fn forecast(&self, features: &[DVector<f64>]) -> Result<JointForecast> {
        self.check_features(features)?;
        joint_forecast(&self.priors, features, &self.gamma(), &self.forecast_settings(), self.day)
    }

    fn check_features(&self, features: &[DVector<f64>]) -> Result<()> {
        if features.len() != self.n_series() {
            return Err(Error::Data(format!(
                "{} feature vectors for {} series",
                features.len(),
                self.n_series()
            )));
        }
        if let Some(j) = features.iter().position(|f| f.len() != self.n_endo) {
            return Err(Error::Data(format!(
                "series {j}: {} endogenous features, expected {}",
                features[j].len(),
                self.n_endo
            )));
        }
        Ok(())
    }

    /// Recursive multi-step forecast. Horizon 1 equals [`Engine::forecast`];
    /// later horizons re-discount the priors and feed each series' median
    /// prediction to `updater`.
    pub fn forecast_k_steps(
        &self,
        features: &[DVector<f64>],
        k: usize,
        updater: &mut dyn FeatureUpdater,
    ) -> Result<Vec<JointForecast>> {
        if k == 0 {
            return Err(Error::config("forecast.k", "horizon must be at least 1"));
        }
        self.check_features(features)?;
        let gamma = self.gamma();
        let mut priors = self.priors.clone();
        let mut x = features.to_vec();
        let mut out = Vec::with_capacity(k);
        for h in 0..k {
            if h > 0 {
                let medians: Vec<f64> = out.last().map(|f: &JointForecast| f.series.iter().map(|s| s.median).collect()).unwrap();
                x = updater.advance(&medians)?;
                self.check_features(&x)?;
                priors = priors
                    .iter()
                    .map(|p| {
                        let mut next = evolve_diagonal(&DlmState::from_prior(p), &vec![1.0; p.dim()], &self.cfg.discount, self.n_endo)?;
                        next.r = p.r;
                        Ok(next)
                    })
                    .collect::<Result<Vec<_>>>()?;
            }
            // horizon h uses its own stream so horizon 1 matches `forecast`
            let day = if h == 0 { self.day } else { self.day + ((h as u64) << 32) };
            out.push(joint_forecast(&priors, &x, &gamma, &self.forecast_settings(), day)?);
        }
        Ok(out)
    }

    /// Run one day: forecast, then update on `input.targets`.
    pub fn step(&mut self, input: &DayInput) -> Result<DayReport> {
        let m = self.n_series();
        if input.targets.len() != m {
            return Err(Error::Data(format!("{} targets for {m} series", input.targets.len())));
        }
        let fc = self.forecast(&input.features)?;
        let gamma = self.gamma();
        let z: Vec<f64> = input.targets.iter().map(|y| y.unwrap_or(0.0)).collect();

        // posterior update, independent per series
        let n_endo = self.n_endo;
        let mut posts: Vec<DlmState> = (0..m)
            .into_par_iter()
            .map(|j| {
                let prior = &self.priors[j];
                match input.targets[j] {
                    None => Ok(DlmState::from_prior(prior)),
                    Some(y) => {
                        let mut f = DVector::zeros(prior.dim());
                        f.rows_mut(0, n_endo).copy_from(&input.features[j]);
                        for (k, mem) in self.sets[j].members.iter().enumerate() {
                            f[n_endo + k] = z[mem.id];
                        }
                        kalman_update(prior, &f, y).map_err(|e| Error::Numerical(format!("series {j}: {e}")))
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;

        // recouple and decouple the series tied together by Γ
        let mut rec = Recoupling {
            weights: Vec::new(),
            entropy: 0.0,
            ess: self.cfg.n_mc as f64,
            tempering: 1.0,
            dense_fallbacks: 0,
        };
        let mut vb_fallbacks = 0;
        let mut max_dof_residual: f64 = 0.0;
        if !gamma.is_empty() {
            let involved = gamma.involved();
            let batch = sample_posteriors(&posts, &involved, self.cfg.n_mc, self.cfg.seed, self.day)?;
            rec = recouple_weights(&batch, &gamma, self.cfg.ess_floor)?;
            let decoupled: Vec<Option<Decoupled>> = (0..m)
                .into_par_iter()
                .map(|j| {
                    if !involved[j] {
                        return Ok(None);
                    }
                    vb_decouple_anchored(&batch.series[j], &rec.weights, &posts[j])
                        .map(Some)
                        .map_err(|e| Error::Numerical(format!("series {j}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            for (j, d) in decoupled.into_iter().enumerate() {
                if let Some(d) = d {
                    if d.fallback {
                        vb_fallbacks += 1;
                    } else {
                        max_dof_residual = max_dof_residual.max(d.residual);
                    }
                    posts[j] = d.state;
                }
            }
        }
        let min_eig = posts
            .par_iter()
            .map(|p| min_eigenvalue(&p.c))
            .reduce(|| f64::INFINITY, f64::min);

        let snapshots: Vec<SeriesSnapshot> = posts
            .iter()
            .zip(&self.sets)
            .map(|(p, s)| SeriesSnapshot {
                m: p.m.clone(),
                c_diag: p.c.diagonal(),
                n: p.n,
                s: p.s,
                parents: s.members.iter().map(|mm| (mm.id, mm.set, mm.score)).collect(),
            })
            .collect();

        for (o, y) in self.observed.iter_mut().zip(&input.targets) {
            *o |= y.is_some();
        }
        let mut retired = Vec::new();
        if self.cfg.parents.enabled {
            self.maintain_parents(&mut posts, &input.targets, &z)?;
        }
        self.evolve_all(&posts, &mut retired)?;
        let report = DayReport {
            day: self.day,
            forecasts: fc.series,
            entropy: rec.entropy,
            ess: rec.ess,
            tempering: rec.tempering,
            det_fallbacks: rec.dense_fallbacks,
            forecast_rejections: fc.rejected,
            vb_fallbacks,
            max_dof_residual,
            min_eigenvalue: min_eig,
            snapshots,
            retired,
        };
        self.day += 1;
        Ok(report)
    }

    fn maintain_parents(&mut self, posts: &mut [DlmState], targets: &[Option<f64>], z: &[f64]) -> Result<()> {
        let pc = &self.cfg.parents;
        wishart_update(&mut self.wishart, &DVector::from_column_slice(z))?;
        let precision = self.wishart.precision()?;
        let eligible: Vec<bool> = targets.iter().map(Option::is_some).collect();
        let promote = (self.day + 1) % pc.delta_t as u64 == 0;
        let n_endo = self.n_endo;
        for (j, (sets, post)) in self.sets.iter_mut().zip(posts.iter_mut()).enumerate() {
            sets.tick_up();
            if promote {
                let scores: Vec<f64> = (0..sets.len())
                    .map(|k| {
                        let i = n_endo + k;
                        let sd = post.c[(i, i)].max(0.0).sqrt();
                        if sd > 0.0 {
                            post.m[i].abs() / sd
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let r = promote_and_retire(sets, &scores, pc);
                for k in r.dropped {
                    sets.members.remove(k);
                    post.remove_coefficient(n_endo + k);
                }
            }
            if eligible[j] {
                for id in propose_candidates(&precision, j, pc.n_max, sets, pc, &eligible) {
                    sets.add_up(id);
                    post.push_coefficient(0.0, pc.entry_variance);
                }
            }
            sets.check(j, pc)?;
        }
        Ok(())
    }

    fn evolve_all(&mut self, posts: &[DlmState], retired: &mut Vec<RetiredParent>) -> Result<()> {
        let n_endo = self.n_endo;
        let delta_t = self.cfg.parents.delta_t;
        for s in self.sets.iter_mut() {
            s.tick_down();
        }
        let cfg = self.cfg.discount;
        let (sets, observed, priors) = (&self.sets, &self.observed, &self.priors);
        self.priors = posts
            .par_iter()
            .zip(sets.par_iter())
            .enumerate()
            .map(|(j, (p, s))| {
                if observed[j] {
                    evolve_diagonal(p, &downset_decay_matrix(s, n_endo, delta_t), &cfg, n_endo)
                } else {
                    Ok(priors[j].clone())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        for (j, (sets, prior)) in self.sets.iter_mut().zip(self.priors.iter_mut()).enumerate() {
            for k in sets.expired(delta_t) {
                retired.push(RetiredParent {
                    child: j,
                    parent: sets.members[k].id,
                    final_mean: prior.a[n_endo + k],
                });
                sets.members.remove(k);
                prior.remove_coefficient(n_endo + k);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dlm::forecast_one;

    fn inputs(day: usize, m: usize) -> DayInput {
        DayInput {
            features: (0..m)
                .map(|j| DVector::from_vec(vec![1.0, ((day * 7 + j * 3) % 11) as f64 / 11.0 - 0.5]))
                .collect(),
            targets: (0..m)
                .map(|j| Some(((day * 13 + j * 5) % 17) as f64 / 17.0 - 0.5))
                .collect(),
        }
    }

    #[test]
    fn disabled_parents_match_standalone_dlm() {
        let cfg = EngineConfig {
            parents: ParentConfig { enabled: false, ..Default::default() },
            ..Default::default()
        };
        let mut eng = Engine::new(cfg.clone(), 3, 2).unwrap();
        let mut solo: Vec<PriorState> = vec![PriorState::initial(2, 1.0, 1.0, 1.0); 3];
        for t in 0..60 {
            let inp = inputs(t, 3);
            let rep = eng.step(&inp).unwrap();
            for j in 0..3 {
                let fc = forecast_one(&solo[j], &inp.features[j]).unwrap();
                assert_eq!(rep.forecasts[j].mean, fc.mean);
                let post = kalman_update(&solo[j], &inp.features[j], inp.targets[j].unwrap()).unwrap();
                solo[j] = evolve_diagonal(&post, &[1.0, 1.0], &cfg.discount, 2).unwrap();
                assert_eq!(eng.priors[j], solo[j]);
            }
            assert_eq!(rep.entropy, 0.0);
        }
    }

    #[test]
    fn single_series_never_recouples() {
        let mut eng = Engine::new(EngineConfig::default(), 1, 2).unwrap();
        for t in 0..30 {
            let rep = eng.step(&inputs(t, 1)).unwrap();
            assert_eq!(rep.entropy, 0.0);
            assert!(eng.sets[0].is_empty());
        }
    }

    #[test]
    fn parents_appear_and_invariants_hold() {
        let mut eng = Engine::new(EngineConfig { n_mc: 100, ..Default::default() }, 6, 2).unwrap();
        let mut saw_parents = false;
        for t in 0..80 {
            let rep = eng.step(&inputs(t, 6)).unwrap();
            assert!(rep.entropy >= 0.0 && rep.entropy <= (100f64).ln() + 1e-12);
            for (j, s) in eng.sets.iter().enumerate() {
                s.check(j, &eng.cfg.parents).unwrap();
                assert_eq!(eng.priors[j].dim(), 2 + s.len());
                saw_parents |= !s.is_empty();
            }
            for r in &rep.retired {
                assert_eq!(r.final_mean, 0.0);
            }
        }
        assert!(saw_parents);
    }

    #[test]
    fn missing_target_keeps_prior() {
        let cfg = EngineConfig {
            parents: ParentConfig { enabled: false, ..Default::default() },
            discount: DiscountConfig { delta_phi: 1.0, delta_gamma: 1.0, beta_lambda: 1.0 },
            ..Default::default()
        };
        let mut eng = Engine::new(cfg, 2, 2).unwrap();
        let before = eng.priors[1].clone();
        let mut inp = inputs(0, 2);
        inp.targets[1] = None;
        eng.step(&inp).unwrap();
        assert_eq!(eng.priors[1], before);
    }

    #[test]
    fn unobserved_series_hold_their_initial_prior() {
        let cfg = EngineConfig {
            parents: ParentConfig { enabled: false, ..Default::default() },
            ..Default::default()
        };
        let mut eng = Engine::new(cfg, 2, 2).unwrap();
        let initial = eng.priors[1].clone();
        for t in 0..50 {
            let mut inp = inputs(t, 2);
            inp.targets[1] = None;
            eng.step(&inp).unwrap();
        }
        assert_eq!(eng.priors[1], initial);
        eng.step(&inputs(50, 2)).unwrap();
        let after_first = eng.priors[1].r;
        let mut inp = inputs(51, 2);
        inp.targets[1] = None;
        eng.step(&inp).unwrap();
        assert!(eng.priors[1].r < after_first);
    }

    #[test]
    fn one_step_path_equals_forecast() {
        let mut eng = Engine::new(EngineConfig { n_mc: 50, ..Default::default() }, 4, 2).unwrap();
        for t in 0..40 {
            eng.step(&inputs(t, 4)).unwrap();
        }
        let x = inputs(40, 4).features;
        let direct = eng.forecast(&x).unwrap();
        let mut up = PricePathUpdater;
        let path = eng.forecast_k_steps(&x, 1, &mut up).unwrap();
        assert_eq!(path[0], direct);
        assert!(eng.forecast_k_steps(&x, 2, &mut up).is_err());
    }
}
