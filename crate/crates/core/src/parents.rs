//! Simultaneous-parent graph: a discount Wishart filter nominating candidates,
//! and per-series core/up/down membership.
//!
//! Each series' parent coefficients follow its endogenous block in the order
//! of `ParentSets::members`, so member position `k` is state index
//! `n_endo + k`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{shrink_to_pd, spd_inverse};

#[derive(Debug, Clone, PartialEq)]
pub struct ParentConfig {
    pub enabled: bool,
    pub n_core: usize,
    pub n_up: usize,
    pub n_down: usize,
    pub delta_t: usize,
    pub n_max: usize,
    pub delta_w: f64,
    pub beta_w: f64,
    /// Prior variance of a freshly added parent coefficient.
    pub entry_variance: f64,
}

impl Default for ParentConfig {
    fn default() -> Self {
        ParentConfig {
            enabled: true,
            n_core: 5,
            n_up: 5,
            n_down: 5,
            delta_t: 10,
            n_max: 5,
            delta_w: 0.97,
            beta_w: 0.97,
            entry_variance: 1e-4,
        }
    }
}

impl ParentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta_t == 0 {
            return Err(Error::config("parents.delta_t", "must be at least 1"));
        }
        for (name, v) in [("parents.delta_w", self.delta_w), ("parents.beta_w", self.beta_w)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::config(name, format!("{v} is outside (0, 1]")));
            }
        }
        if !(self.entry_variance > 0.0) {
            return Err(Error::config("parents.entry_variance", "must be positive"));
        }
        Ok(())
    }
}

/// Discount Wishart filter over the cross-section of standardized targets.
#[derive(Debug, Clone, PartialEq)]
pub struct WishartState {
    pub d: DMatrix<f64>,
    pub h: f64,
    pub delta_w: f64,
    pub beta_w: f64,
}

impl WishartState {
    pub fn new(m: usize, delta_w: f64, beta_w: f64) -> Self {
        WishartState {
            d: DMatrix::identity(m, m),
            h: 1.0,
            delta_w,
            beta_w,
        }
    }

    pub fn dim(&self) -> usize {
        self.d.nrows()
    }

    /// Point estimate of the precision matrix, `(h + m − 1) D⁻¹`.
    pub fn precision(&self) -> Result<DMatrix<f64>> {
        let inv = spd_inverse(&self.d).map_err(|_| {
            Error::Numerical(format!(
                "Wishart D is singular after shrinkage (min eigenvalue {:.3e}, h = {})",
                shrink_to_pd(&self.d).min_eigenvalue,
                self.h
            ))
        })?;
        Ok(inv * (self.h + self.dim() as f64 - 1.0))
    }
}

/// `D ← δ_w D + y yᵀ`, `h ← β_w h + 1`.
pub fn wishart_update(state: &mut WishartState, y: &DVector<f64>) -> Result<()> {
    if y.len() != state.dim() {
        return Err(Error::Data(format!(
            "Wishart observation of length {} for {} series",
            y.len(),
            state.dim()
        )));
    }
    state.d *= state.delta_w;
    state.d.ger(1.0, y, y, 1.0);
    state.h = state.beta_w * state.h + 1.0;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SetKind {
    Core,
    Up,
    Down,
}

impl SetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SetKind::Core => "core",
            SetKind::Up => "up",
            SetKind::Down => "down",
        }
    }
}

/// A parent of some child series. `age` counts steps spent in `Up` or, for
/// `Down`, decay steps already applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub id: usize,
    pub set: SetKind,
    pub age: usize,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParentSets {
    pub members: Vec<Member>,
}

impl ParentSets {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn count(&self, set: SetKind) -> usize {
        self.members.iter().filter(|m| m.set == set).count()
    }

    pub fn ids(&self, set: SetKind) -> Vec<usize> {
        self.members.iter().filter(|m| m.set == set).map(|m| m.id).collect()
    }

    pub fn position(&self, id: usize) -> Option<usize> {
        self.members.iter().position(|m| m.id == id)
    }

    pub fn contains(&self, id: usize) -> bool {
        self.position(id).is_some()
    }

    /// Append a new up-set member; returns its coefficient position.
    pub fn add_up(&mut self, id: usize) -> usize {
        debug_assert!(!self.contains(id));
        self.members.push(Member {
            id,
            set: SetKind::Up,
            age: 0,
            score: 0.0,
        });
        self.members.len() - 1
    }

    /// Advance up-set ages by one step.
    pub fn tick_up(&mut self) {
        for m in self.members.iter_mut().filter(|m| m.set == SetKind::Up) {
            m.age += 1;
        }
    }

    /// Advance down-set decay ages by one step, ahead of an evolve.
    pub fn tick_down(&mut self) {
        for m in self.members.iter_mut().filter(|m| m.set == SetKind::Down) {
            m.age += 1;
        }
    }

    /// Positions of down members whose decay is complete, descending so they
    /// can be removed in order.
    pub fn expired(&self, delta_t: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .members
            .iter()
            .enumerate()
            .filter(|(_, m)| m.set == SetKind::Down && m.age >= delta_t)
            .map(|(k, _)| k)
            .collect();
        v.reverse();
        v
    }

    pub fn check(&self, child: usize, cfg: &ParentConfig) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for m in &self.members {
            if m.id == child {
                return Err(Error::Numerical(format!("series {child} is its own parent")));
            }
            if !seen.insert(m.id) {
                return Err(Error::Numerical(format!("parent {} listed twice for {child}", m.id)));
            }
            if m.age > cfg.delta_t.max(1) && m.set == SetKind::Down {
                return Err(Error::Numerical(format!("down age {} exceeds horizon", m.age)));
            }
        }
        if self.count(SetKind::Core) > cfg.n_core || self.count(SetKind::Up) > cfg.n_up {
            return Err(Error::Numerical(format!("capacity exceeded for series {child}")));
        }
        Ok(())
    }
}

/// Top-`n_max` series by `|precision[j, k]|`, excluding `j`, current members
/// and ineligible series, truncated to the free up-set capacity.
pub fn propose_candidates(
    precision: &DMatrix<f64>,
    j: usize,
    n_max: usize,
    sets: &ParentSets,
    cfg: &ParentConfig,
    eligible: &[bool],
) -> Vec<usize> {
    let capacity = cfg.n_up.saturating_sub(sets.count(SetKind::Up));
    let take = n_max.min(capacity);
    if take == 0 {
        return Vec::new();
    }
    let mut pool: Vec<(usize, f64)> = (0..precision.ncols())
        .filter(|&k| k != j && eligible.get(k).copied().unwrap_or(false) && !sets.contains(k))
        .map(|k| (k, precision[(j, k)].abs()))
        .filter(|(_, v)| v.is_finite())
        .collect();
    pool.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    pool.truncate(take);
    pool.into_iter().map(|(k, _)| k).collect()
}

/// Rank core and matured up members by score; the best `n_core` form the
/// core and the rest move to the down set. Returns the ids retired.
///
/// `scores[k]` is the signal-to-noise of member position `k`. If the down
/// set would overflow, its oldest members are returned in `dropped` and must
/// be removed by the caller immediately.
pub fn promote_and_retire(sets: &mut ParentSets, scores: &[f64], cfg: &ParentConfig) -> Retirement {
    debug_assert_eq!(scores.len(), sets.members.len());
    for (m, &s) in sets.members.iter_mut().zip(scores) {
        m.score = s;
    }
    let mut pool: Vec<usize> = sets
        .members
        .iter()
        .enumerate()
        .filter(|(_, m)| m.set == SetKind::Core || (m.set == SetKind::Up && m.age >= cfg.delta_t))
        .map(|(k, _)| k)
        .collect();
    pool.sort_by(|&a, &b| {
        let (ma, mb) = (&sets.members[a], &sets.members[b]);
        mb.score.total_cmp(&ma.score).then(ma.id.cmp(&mb.id))
    });
    let mut retired = Vec::new();
    for (rank, &k) in pool.iter().enumerate() {
        let m = &mut sets.members[k];
        if rank < cfg.n_core {
            m.set = SetKind::Core;
            m.age = 0;
        } else {
            m.set = SetKind::Down;
            m.age = 0;
            retired.push(m.id);
        }
    }
    // oldest first: highest decay age, then earliest position
    let mut down: Vec<usize> = (0..sets.members.len())
        .filter(|&k| sets.members[k].set == SetKind::Down)
        .collect();
    let mut dropped = Vec::new();
    if down.len() > cfg.n_down {
        down.sort_by(|&a, &b| sets.members[b].age.cmp(&sets.members[a].age).then(a.cmp(&b)));
        let mut drop_pos: Vec<usize> = down[..down.len() - cfg.n_down].to_vec();
        drop_pos.sort_unstable_by(|a, b| b.cmp(a));
        dropped = drop_pos;
    }
    Retirement { retired, dropped }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Retirement {
    pub retired: Vec<usize>,
    /// Member positions to remove now, descending.
    pub dropped: Vec<usize>,
}

/// Diagonal of G for one series: 1 on the endogenous block and non-down
/// parents, `1 − 1/(ΔT + 1 − l)` for a down member at decay age `l`.
pub fn downset_decay_matrix(sets: &ParentSets, n_endo: usize, delta_t: usize) -> Vec<f64> {
    let mut g = vec![1.0; n_endo + sets.len()];
    for (k, m) in sets.members.iter().enumerate() {
        if m.set == SetKind::Down {
            g[n_endo + k] = decay_factor(m.age, delta_t);
        }
    }
    g
}

/// `1 − 1/(ΔT + 1 − l)` for `l ∈ [1, ΔT]`; 1 before decay starts.
pub fn decay_factor(l: usize, delta_t: usize) -> f64 {
    if l == 0 {
        return 1.0;
    }
    let l = l.min(delta_t);
    1.0 - 1.0 / (delta_t + 1 - l) as f64
}
