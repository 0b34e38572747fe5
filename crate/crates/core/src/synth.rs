//! Synthetic minutiae templates, acquisition-noise models and the
//! genuine/impostor evaluation harness.

use rand::{CryptoRng, Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cancelable::{match_and_recover, register, TemplateConfig};
use crate::error::{Error, Result};
use crate::template::{Bounds, Minutia, MinutiaKind, MinutiaTemplate};

/// Minimum distance between generated minutiae, in pixels.
pub const MIN_SEPARATION: f64 = 6.0;
const MAX_REJECTIONS: usize = 10_000;

/// Uniform minutiae over `bounds` with at least [`MIN_SEPARATION`] between
/// any two points; kinds are fair coin flips.
pub fn generate_template<R: Rng + ?Sized>(
    rng: &mut R,
    count: usize,
    bounds: Bounds,
) -> Result<MinutiaTemplate> {
    if count == 0 {
        return Err(Error::BadParams("count must be at least 1".into()));
    }
    let mut points: Vec<Minutia> = Vec::with_capacity(count);
    let mut rejections = 0;
    while points.len() < count {
        let m = Minutia::new(
            rng.gen_range(bounds.min_x..=bounds.max_x),
            rng.gen_range(bounds.min_y..=bounds.max_y),
            if rng.gen_bool(0.5) {
                MinutiaKind::Ending
            } else {
                MinutiaKind::Bifurcation
            },
        );
        if points.iter().all(|p| p.distance(&m) >= MIN_SEPARATION) {
            points.push(m);
        } else {
            rejections += 1;
            if rejections >= MAX_REJECTIONS {
                return Err(Error::PlacementFailed);
            }
        }
    }
    MinutiaTemplate::new(points, bounds)
}

/// Differences between two impressions of the same finger.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerturbModel {
    /// Per-axis Gaussian displacement, pixels.
    pub jitter_sigma: f64,
    pub delete_rate: f64,
    /// Expected spurious minutiae as a fraction of the template size.
    pub spurious_rate: f64,
    pub type_flip_rate: f64,
}

impl PerturbModel {
    pub fn validate(&self) -> Result<()> {
        let rate_ok = |r: f64| (0.0..1.0).contains(&r) || r == 1.0;
        if !(self.jitter_sigma.is_finite() && self.jitter_sigma >= 0.0) {
            return Err(Error::BadParams(
                "jitter sigma must be finite and >= 0".into(),
            ));
        }
        if !rate_ok(self.delete_rate) || !rate_ok(self.type_flip_rate) {
            return Err(Error::BadParams("rates must lie in [0, 1]".into()));
        }
        if !(self.spurious_rate.is_finite() && self.spurious_rate >= 0.0) {
            return Err(Error::BadParams(
                "spurious rate must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Applies jitter, deletions, kind flips and spurious insertions. Jittered
/// points are clamped into the template bounds; points that collide after
/// jitter are dropped.
pub fn perturb<R: Rng + ?Sized>(
    tmpl: &MinutiaTemplate,
    model: &PerturbModel,
    rng: &mut R,
) -> Result<MinutiaTemplate> {
    model.validate()?;
    let bounds = tmpl.bounds();
    let mut out: Vec<Minutia> = Vec::with_capacity(tmpl.len());
    let jitter = (model.jitter_sigma > 0.0)
        .then(|| Normal::new(0.0, model.jitter_sigma).expect("validated sigma"));
    for m in tmpl.minutiae() {
        if model.delete_rate > 0.0 && rng.gen_bool(model.delete_rate.min(1.0)) {
            continue;
        }
        let (mut x, mut y) = (m.x, m.y);
        if let Some(n) = &jitter {
            x += n.sample(rng);
            y += n.sample(rng);
            (x, y) = bounds.clamp(x, y);
        }
        let mut kind = m.kind;
        if model.type_flip_rate > 0.0 && rng.gen_bool(model.type_flip_rate.min(1.0)) {
            kind = kind.flipped();
        }
        out.push(Minutia::new(x, y, kind));
    }
    let expected = model.spurious_rate * tmpl.len() as f64;
    if expected > 0.0 {
        let extra = Poisson::new(expected).expect("positive mean").sample(rng) as usize;
        for _ in 0..extra {
            out.push(Minutia::new(
                rng.gen_range(bounds.min_x..=bounds.max_x),
                rng.gen_range(bounds.min_y..=bounds.max_y),
                if rng.gen_bool(0.5) {
                    MinutiaKind::Ending
                } else {
                    MinutiaKind::Bifurcation
                },
            ));
        }
    }
    let mut seen = std::collections::HashSet::new();
    out.retain(|m| seen.insert((m.x.to_bits(), m.y.to_bits(), m.kind)));
    MinutiaTemplate::new(out, bounds)
}

/// What the harness enrolls and how it matches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalParams {
    pub template: TemplateConfig,
    /// Minutiae per synthetic finger.
    pub count: usize,
    pub bounds: [f64; 4],
    pub genuine_trials: usize,
    pub impostor_trials: usize,
    pub seed: u64,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            template: TemplateConfig::default(),
            count: DEFAULT_COUNT,
            bounds: [0.0, 0.0, DEFAULT_SIDE, DEFAULT_SIDE],
            genuine_trials: 200,
            impostor_trials: 200,
            seed: 0,
        }
    }
}

/// Default synthetic finger: minutiae count and square side in pixels.
pub const DEFAULT_COUNT: usize = 96;
pub const DEFAULT_SIDE: f64 = 400.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub genuine_trials: usize,
    pub impostor_trials: usize,
    pub genuine_accepts: usize,
    pub false_accepts: usize,
    /// `None` when no genuine trials ran.
    pub genuine_accept_rate: Option<f64>,
    /// `None` when no impostor trials ran.
    pub false_accept_rate: Option<f64>,
    pub params: EvalParams,
    pub model: PerturbModel,
}

impl EvalReport {
    pub fn summary_table(&self) -> String {
        let rate = |r: Option<f64>| r.map_or("-".to_string(), |r| format!("{r:.4}"));
        let mut s = String::new();
        s.push_str(&format!(
            "{:<22}{:>12}{:>12}{:>10}\n",
            "", "trials", "accepts", "rate"
        ));
        s.push_str(&format!(
            "{:<22}{:>12}{:>12}{:>10}\n",
            "genuine (GAR)",
            self.genuine_trials,
            self.genuine_accepts,
            rate(self.genuine_accept_rate)
        ));
        s.push_str(&format!(
            "{:<22}{:>12}{:>12}{:>10}\n",
            "impostor (FAR)",
            self.impostor_trials,
            self.false_accepts,
            rate(self.false_accept_rate)
        ));
        s.push_str(&format!(
            "seed={} grid={}x{} tau={} rho_block={} rho_overall={} count={}\n",
            self.params.seed,
            self.params.template.rows,
            self.params.template.cols,
            self.params.template.tau,
            self.params.template.rates.block,
            self.params.template.rates.overall,
            self.params.count,
        ));
        s.push_str(&format!(
            "jitter={} delete={} spurious={} flip={}\n",
            self.model.jitter_sigma,
            self.model.delete_rate,
            self.model.spurious_rate,
            self.model.type_flip_rate
        ));
        s
    }
}

/// Independent RNG stream for one trial, split from the master seed.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn genuine_trial<R: RngCore + CryptoRng>(
    p: &EvalParams,
    model: &PerturbModel,
    rng: &mut R,
) -> Result<bool> {
    let bounds = Bounds::new(p.bounds[0], p.bounds[1], p.bounds[2], p.bounds[3])?;
    let tmpl = generate_template(rng, p.count, bounds)?;
    let (reg, master) = register(&tmpl, rng.next_u64(), &p.template, rng)?;
    let probe = perturb(&tmpl, model, rng)?;
    Ok(match_and_recover(&reg, &probe, &p.template).is_ok_and(|m| m == master))
}

fn impostor_trial<R: RngCore + CryptoRng>(p: &EvalParams, rng: &mut R) -> Result<bool> {
    let bounds = Bounds::new(p.bounds[0], p.bounds[1], p.bounds[2], p.bounds[3])?;
    let tmpl = generate_template(rng, p.count, bounds)?;
    let (reg, _) = register(&tmpl, rng.next_u64(), &p.template, rng)?;
    let other = generate_template(rng, p.count, bounds)?;
    Ok(match_and_recover(&reg, &other, &p.template).is_ok())
}

/// Runs genuine and impostor trials. Trial `i` draws from its own stream of
/// the master seed, so reports are reproducible regardless of scheduling.
pub fn run_evaluation(params: &EvalParams, model: &PerturbModel) -> Result<EvalReport> {
    model.validate()?;
    if params.genuine_trials + params.impostor_trials == 0 {
        return Err(Error::BadParams("at least one trial is required".into()));
    }
    let genuine: Vec<bool> = (0..params.genuine_trials as u64)
        .into_par_iter()
        .map(|i| genuine_trial(params, model, &mut trial_rng(params.seed, 2 * i)))
        .collect::<Result<_>>()?;
    let impostor: Vec<bool> = (0..params.impostor_trials as u64)
        .into_par_iter()
        .map(|i| impostor_trial(params, &mut trial_rng(params.seed, 2 * i + 1)))
        .collect::<Result<_>>()?;
    let genuine_accepts = genuine.iter().filter(|&&a| a).count();
    let false_accepts = impostor.iter().filter(|&&a| a).count();
    let rate = |hits: usize, total: usize| (total > 0).then(|| hits as f64 / total as f64);
    Ok(EvalReport {
        genuine_trials: params.genuine_trials,
        impostor_trials: params.impostor_trials,
        genuine_accepts,
        false_accepts,
        genuine_accept_rate: rate(genuine_accepts, params.genuine_trials),
        false_accept_rate: rate(false_accepts, params.impostor_trials),
        params: *params,
        model: *model,
    })
}
