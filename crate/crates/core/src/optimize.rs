//! Budgeted optimizers over internal-space points: random search,
//! successive halving and Hyperband, plus the fix-one-hyperparameter
//! verification search.
//!
//! Budgets are fractions `b ∈ (0, 1]` of the maximum resource; `b = 1` is a
//! full-fidelity evaluation.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::configspace::{ConfigSpace, Domain, HyperparameterSpec, Value};
use crate::error::{Error, Result};
use crate::forest::RegressionForest;
use crate::priors::PriorModel;

/// Budget-dependent distortion of a full-fidelity score:
/// `f − bias·(1−b) + Normal(0, noise·(1−b))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fidelity {
    pub bias: f64,
    pub noise: f64,
}

impl Default for Fidelity {
    fn default() -> Self {
        Fidelity {
            bias: 0.05,
            noise: 0.02,
        }
    }
}

impl Fidelity {
    pub const EXACT: Fidelity = Fidelity {
        bias: 0.0,
        noise: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.bias >= 0.0 && self.bias.is_finite() && self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "fidelity bias and noise must be finite and >= 0, got {} and {}",
                self.bias, self.noise
            )));
        }
        Ok(())
    }

    fn apply(&self, full: f64, point: &[f64], budget: f64, seed: u64) -> f64 {
        if budget >= 1.0 {
            return full;
        }
        let gap = 1.0 - budget;
        let mut score = full - self.bias * gap;
        let sd = self.noise * gap;
        if sd > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(evaluation_key(point, budget, seed));
            score += Normal::new(0.0, sd).expect("sd is positive").sample(&mut rng);
        }
        score
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn evaluation_key(point: &[f64], budget: f64, seed: u64) -> u64 {
    let mut h = splitmix64(seed);
    for x in point {
        h = splitmix64(h ^ x.to_bits());
    }
    splitmix64(h ^ budget.to_bits())
}

/// A budgeted black box over internal-space points; higher scores are
/// better. Must be pure for fixed `(point, budget, seed)`.
pub trait Objective: Send + Sync {
    fn evaluate(&self, point: &[f64], budget: f64, seed: u64) -> f64;
}

type BaseFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct SyntheticObjective {
    f: BaseFn,
    fidelity: Fidelity,
}

impl SyntheticObjective {
    pub fn new(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static, fidelity: Fidelity) -> Result<Self> {
        fidelity.validate()?;
        Ok(SyntheticObjective {
            f: Arc::new(f),
            fidelity,
        })
    }

    /// Built-in test functions over a space, in unit coordinates (numeric
    /// dims as-is, category `i` of `c` at `(i + 0.5) / c`):
    /// `separable` = `−Σ_j 0.01^j (z_j − 0.5)²`, `additive` = `Σ_j z_j`,
    /// `product` = `Π_j z_j`, `constant` = 0.
    pub fn named(name: &str, space: &ConfigSpace, fidelity: Fidelity) -> Result<Self> {
        let cats: Vec<Option<usize>> = space.specs().iter().map(|s| s.n_categories()).collect();
        let unit = move |p: &[f64]| -> Vec<f64> {
            p.iter()
                .zip(&cats)
                .map(|(&u, c)| match c {
                    Some(c) => (u + 0.5) / *c as f64,
                    None => u,
                })
                .collect()
        };
        match name {
            "separable" => Self::new(
                move |p| {
                    unit(p)
                        .iter()
                        .enumerate()
                        .map(|(j, z)| -0.01f64.powi(j as i32) * (z - 0.5).powi(2))
                        .sum()
                },
                fidelity,
            ),
            "additive" => Self::new(move |p| unit(p).iter().sum(), fidelity),
            "product" => Self::new(move |p| unit(p).iter().product(), fidelity),
            "constant" => Self::new(|_| 0.0, fidelity),
            other => Err(Error::InvalidArgument(format!(
                "unknown synthetic objective {other:?} (expected separable, additive, product or constant)"
            ))),
        }
    }

    pub fn full(&self, point: &[f64]) -> f64 {
        (self.f)(point)
    }
}

impl Objective for SyntheticObjective {
    fn evaluate(&self, point: &[f64], budget: f64, seed: u64) -> f64 {
        self.fidelity.apply(self.full(point), point, budget, seed)
    }
}

/// Replays a fitted forest as the full-fidelity score.
pub struct SurrogateObjective {
    forest: RegressionForest,
    fidelity: Fidelity,
}

impl SurrogateObjective {
    pub fn new(forest: RegressionForest, fidelity: Fidelity) -> Result<Self> {
        fidelity.validate()?;
        Ok(SurrogateObjective { forest, fidelity })
    }

    pub fn forest(&self) -> &RegressionForest {
        &self.forest
    }
}

impl Objective for SurrogateObjective {
    fn evaluate(&self, point: &[f64], budget: f64, seed: u64) -> f64 {
        self.fidelity
            .apply(self.forest.predict_point(point), point, budget, seed)
    }
}

#[derive(Debug, Clone)]
pub enum Sampler {
    Uniform,
    Prior(PriorModel),
}

impl Sampler {
    /// Draws an internal point that is exactly representable as a
    /// configuration (integers rounded, log values round-tripped).
    pub fn draw(&self, space: &ConfigSpace, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let raw = match self {
            Sampler::Uniform => space.sample_internal(rng),
            Sampler::Prior(p) => p.sample_internal(rng),
        };
        snap(space, &raw)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Sampler::Uniform => "uniform",
            Sampler::Prior(_) => "prior",
        }
    }
}

fn snap(space: &ConfigSpace, point: &[f64]) -> Vec<f64> {
    space
        .from_internal(point)
        .and_then(|c| space.to_internal(&c))
        .expect("sampled points lie inside the space")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    /// Sampling index of the configuration within the run.
    pub candidate: usize,
    pub bracket: usize,
    pub round: usize,
    pub budget: f64,
    pub score: f64,
    pub point: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub trajectory: Vec<Evaluation>,
    pub best_candidate: usize,
    pub best_point: Vec<f64>,
    /// Best score among the evaluations each configuration received at its
    /// own highest budget.
    pub best_score: f64,
}

impl OptResult {
    fn from_trajectory(trajectory: Vec<Evaluation>) -> Self {
        let mut top: Vec<Option<&Evaluation>> = Vec::new();
        for e in &trajectory {
            if top.len() <= e.candidate {
                top.resize(e.candidate + 1, None);
            }
            match top[e.candidate] {
                Some(prev) if prev.budget > e.budget => {}
                _ => top[e.candidate] = Some(e),
            }
        }
        let best = top
            .iter()
            .flatten()
            .fold(None::<&Evaluation>, |acc, e| match acc {
                Some(a) if a.score >= e.score => Some(a),
                _ => Some(e),
            })
            .expect("trajectory is non-empty");
        OptResult {
            best_candidate: best.candidate,
            best_point: best.point.clone(),
            best_score: best.score,
            trajectory,
        }
    }

    /// Best full-budget score seen after each evaluation (`NaN` before the
    /// first full-budget evaluation).
    pub fn incumbent_curve(&self) -> Vec<f64> {
        let mut best = f64::NAN;
        self.trajectory
            .iter()
            .map(|e| {
                if e.budget >= 1.0 && !(e.score <= best) {
                    best = e.score;
                }
                best
            })
            .collect()
    }

    /// `iter,bracket,round,budget,score,<hyperparameters>`.
    pub fn trajectory_csv(&self, space: &ConfigSpace) -> Result<String> {
        let mut out = String::from("iter,bracket,round,budget,score");
        for name in space.names() {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (i, e) in self.trajectory.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}",
                i + 1,
                e.bracket,
                e.round,
                e.budget,
                e.score
            ));
            for v in space.from_internal(&e.point)?.values() {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        Ok(out)
    }
}

/// `n_iters` full-budget evaluations of sampler draws.
pub fn random_search(
    obj: &dyn Objective,
    space: &ConfigSpace,
    sampler: &Sampler,
    n_iters: usize,
    seed: u64,
) -> Result<OptResult> {
    pinned_search(obj, space, sampler, None, n_iters, seed)
}

fn pinned_search(
    obj: &dyn Objective,
    space: &ConfigSpace,
    sampler: &Sampler,
    pin: Option<(usize, f64)>,
    n_iters: usize,
    seed: u64,
) -> Result<OptResult> {
    if n_iters == 0 {
        return Err(Error::InvalidArgument("random search needs n_iters >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..n_iters)
        .map(|_| {
            let mut p = sampler.draw(space, &mut rng);
            if let Some((j, u)) = pin {
                p[j] = u;
            }
            p
        })
        .collect();
    let trajectory = points
        .into_par_iter()
        .enumerate()
        .map(|(candidate, point)| Evaluation {
            candidate,
            bracket: 0,
            round: 0,
            budget: 1.0,
            score: obj.evaluate(&point, 1.0, seed),
            point,
        })
        .collect();
    Ok(OptResult::from_trajectory(trajectory))
}

/// Values a hyperparameter is pinned to during verification: every
/// category, or the `k` internal bin midpoints `(2i+1)/(2k)` externalized
/// and deduplicated in order.
pub fn fixed_values(spec: &HyperparameterSpec, k: usize) -> Result<Vec<Value>> {
    if let Domain::Categorical { categories } = spec.domain() {
        return Ok(categories.iter().cloned().map(Value::Cat).collect());
    }
    if k == 0 {
        return Err(Error::InvalidArgument("need k >= 1 fixed values".into()));
    }
    let mut out: Vec<Value> = Vec::with_capacity(k);
    for i in 0..k {
        let v = spec.from_internal((2 * i + 1) as f64 / (2 * k) as f64)?;
        if !out.contains(&v) {
            out.push(v);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verification {
    pub dim: usize,
    pub values: Vec<String>,
    /// Best score of the search pinned to each value.
    pub bests: Vec<f64>,
    pub y_star: f64,
    /// Incumbent after each iteration, averaged over the pinned values.
    pub curve: Vec<f64>,
}

/// Runs one random search per value in `fixed_values(dim, k)` with `dim`
/// pinned; all searches share `seed`, so the free dimensions see the same
/// draws. `y*` is the mean of their best scores.
pub fn verify_importance(
    obj: &dyn Objective,
    space: &ConfigSpace,
    dim: usize,
    k: usize,
    n_iters: usize,
    seed: u64,
) -> Result<Verification> {
    if dim >= space.len() {
        return Err(Error::InvalidArgument(format!(
            "dimension {dim} out of range for a space of {}",
            space.len()
        )));
    }
    let spec = space.spec(dim);
    let values = fixed_values(spec, k)?;
    let mut bests = Vec::with_capacity(values.len());
    let mut curve = vec![0.0; n_iters];
    for v in &values {
        let u = spec.to_internal(v)?;
        let res = pinned_search(obj, space, &Sampler::Uniform, Some((dim, u)), n_iters, seed)?;
        for (c, x) in curve.iter_mut().zip(res.incumbent_curve()) {
            *c += x / values.len() as f64;
        }
        bests.push(res.best_score);
    }
    Ok(Verification {
        dim,
        values: values.iter().map(ToString::to_string).collect(),
        y_star: bests.iter().sum::<f64>() / bests.len() as f64,
        bests,
        curve,
    })
}

/// Evaluates `points` at `r0, r0·η, …` (capped at 1), keeping the best
/// `⌊n/η⌋` after each round with ties going to the earlier point, until one
/// survivor remains or a full-budget round has run.
pub fn successive_halving(
    obj: &dyn Objective,
    points: &[Vec<f64>],
    r0: f64,
    eta: f64,
    seed: u64,
) -> Result<OptResult> {
    Ok(OptResult::from_trajectory(halving_rounds(obj, points, r0, eta, seed, 0, 0)?))
}

fn halving_rounds(
    obj: &dyn Objective,
    points: &[Vec<f64>],
    r0: f64,
    eta: f64,
    seed: u64,
    bracket: usize,
    first_candidate: usize,
) -> Result<Vec<Evaluation>> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("successive halving needs configurations".into()));
    }
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::InvalidArgument(format!("initial budget must be > 0, got {r0}")));
    }
    if !(eta > 1.0 && eta.is_finite()) {
        return Err(Error::InvalidArgument(format!("eta must be > 1, got {eta}")));
    }
    let mut survivors: Vec<usize> = (0..points.len()).collect();
    let mut trajectory = Vec::new();
    for round in 0.. {
        let budget = (r0 * eta.powi(round as i32)).min(1.0);
        let scores: Vec<f64> = survivors
            .par_iter()
            .map(|&i| obj.evaluate(&points[i], budget, seed))
            .collect();
        for (&i, &score) in survivors.iter().zip(&scores) {
            trajectory.push(Evaluation {
                candidate: first_candidate + i,
                bracket,
                round,
                budget,
                score,
                point: points[i].clone(),
            });
        }
        if survivors.len() == 1 || budget >= 1.0 {
            break;
        }
        let keep = ((survivors.len() as f64 / eta).floor() as usize).max(1);
        let mut order: Vec<usize> = (0..survivors.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        order.truncate(keep);
        order.sort_unstable();
        survivors = order.into_iter().map(|o| survivors[o]).collect();
    }
    Ok(trajectory)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HyperbandSettings {
    pub s_max: usize,
    pub eta: f64,
    /// Maximum resource `R`; budgets are reported to objectives as `r / R`.
    pub r_max: f64,
    pub seed: u64,
}

impl Default for HyperbandSettings {
    fn default() -> Self {
        HyperbandSettings {
            s_max: 4,
            eta: 2.0,
            r_max: 16.0,
            seed: 0,
        }
    }
}

impl HyperbandSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 1.0 && self.eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("eta must be > 1, got {}", self.eta)));
        }
        if !(self.r_max > 0.0 && self.r_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("R must be > 0, got {}", self.r_max)));
        }
        if self.s_max > 30 {
            return Err(Error::InvalidArgument(format!("s_max {} is too large", self.s_max)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bracket {
    pub s: usize,
    pub n: usize,
    /// Initial resource `r_s = R·η^(−s)`.
    pub r: f64,
    /// `(survivors, budget fraction)` per round.
    pub rounds: Vec<(usize, f64)>,
}

impl Bracket {
    pub fn evaluations(&self) -> usize {
        self.rounds.iter().map(|&(n, _)| n).sum()
    }
}

/// Brackets for `s = s_max, …, 0`: `n_s = ⌈(s_max+1)/(s+1)·η^s⌉` configs
/// starting at `r_s = R·η^(−s)`.
pub fn hyperband_schedule(settings: &HyperbandSettings) -> Result<Vec<Bracket>> {
    settings.validate()?;
    let eta = settings.eta;
    Ok((0..=settings.s_max)
        .rev()
        .map(|s| {
            let exact = (settings.s_max + 1) as f64 / (s + 1) as f64 * eta.powi(s as i32);
            let n = (exact - 1e-9 * exact).ceil() as usize;
            let b0 = eta.powi(-(s as i32));
            let mut rounds = Vec::new();
            let mut alive = n;
            for i in 0.. {
                let b = (b0 * eta.powi(i)).min(1.0);
                rounds.push((alive, b));
                if alive == 1 || b >= 1.0 {
                    break;
                }
                alive = ((alive as f64 / eta).floor() as usize).max(1);
            }
            Bracket {
                s,
                n,
                r: settings.r_max * b0,
                rounds,
            }
        })
        .collect())
}

pub fn hyperband(
    obj: &dyn Objective,
    space: &ConfigSpace,
    sampler: &Sampler,
    settings: &HyperbandSettings,
) -> Result<OptResult> {
    let schedule = hyperband_schedule(settings)?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut trajectory = Vec::new();
    let mut next = 0;
    for bracket in &schedule {
        let points: Vec<Vec<f64>> = (0..bracket.n).map(|_| sampler.draw(space, &mut rng)).collect();
        let b0 = bracket.r / settings.r_max;
        trajectory.extend(halving_rounds(
            obj,
            &points,
            b0,
            settings.eta,
            settings.seed,
            bracket.s,
            next,
        )?);
        next += bracket.n;
    }
    Ok(OptResult::from_trajectory(trajectory))
}
