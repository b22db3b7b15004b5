use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::config::{ObjectiveConfig, OptimizerConfig};
use super::objective::{ObjectiveBreakdown, Problem, StreamCache};
use crate::error::{Error, Result};
use crate::imaging::resample::{resize_image, resize_mask, shrink_to_fit};
use crate::imaging::{EditRecipe, MaskLayer, ParamSet, Provenance, RasterImage, TraceEntry};
use crate::saliency::SaliencySource;

/// Finite-difference gradient of the objective with respect to the flattened
/// recipe (foreground then background).
///
/// Central differences with step `fd_step * half_width` per parameter; within
/// one step of a bound the difference is one-sided. `base` is the objective at
/// `recipe` and is only needed for one-sided differences.
pub fn finite_diff_gradient(
    problem: &Problem<'_>,
    recipe: &EditRecipe,
    fd_step: f64,
    parallel: bool,
) -> Result<Vec<f64>> {
    let cache = problem.streams(recipe)?;
    let base = problem.evaluate_cached(recipe, &cache)?.total;
    gradient_with_cache(problem, recipe, &cache, base, fd_step, parallel)
}

#[derive(Debug, Clone, Copy)]
struct Probe {
    index: usize,
    value: f64,
}

#[derive(Debug, Clone, Copy)]
enum Scheme {
    Central { plus: usize, minus: usize, h: f64 },
    Forward { plus: usize, h: f64 },
    Backward { minus: usize, h: f64 },
}

fn gradient_with_cache(
    problem: &Problem<'_>,
    recipe: &EditRecipe,
    cache: &StreamCache,
    base: f64,
    fd_step: f64,
    parallel: bool,
) -> Result<Vec<f64>> {
    let values = recipe.to_vec();
    let half = values.len() / 2;
    let mut probes = Vec::with_capacity(values.len() * 2);
    let mut schemes = Vec::with_capacity(values.len());
    for (index, &v) in values.iter().enumerate() {
        let range = ParamSet::range_at(index % half);
        let h = fd_step * range.half_width();
        let up_ok = v + h <= range.max;
        let down_ok = v - h >= range.min;
        let mut push = |value: f64| {
            probes.push(Probe { index, value });
            probes.len() - 1
        };
        let scheme = match (up_ok, down_ok) {
            (true, true) => Scheme::Central {
                plus: push(v + h),
                minus: push(v - h),
                h,
            },
            (true, false) => Scheme::Forward {
                plus: push(v + h),
                h,
            },
            (false, true) => Scheme::Backward {
                minus: push(v - h),
                h,
            },
            (false, false) => {
                return Err(Error::InvalidConfig(format!(
                    "finite-difference step {h} exceeds the range of parameter {index}"
                )))
            }
        };
        schemes.push(scheme);
    }

    let eval = |p: &Probe| {
        problem
            .evaluate_probe(recipe, cache, p.index, p.value)
            .map(|b| b.total)
    };
    let totals: Vec<f64> = if parallel {
        probes.par_iter().map(eval).collect::<Result<_>>()?
    } else {
        probes.iter().map(eval).collect::<Result<_>>()?
    };

    Ok(schemes
        .into_iter()
        .map(|s| match s {
            Scheme::Central { plus, minus, h } => (totals[plus] - totals[minus]) / (2.0 * h),
            Scheme::Forward { plus, h } => (totals[plus] - base) / h,
            Scheme::Backward { minus, h } => (base - totals[minus]) / h,
        })
        .collect())
}

/// Result of one optimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    /// Best recipe seen; its provenance carries the per-iteration trace.
    pub recipe: EditRecipe,
    pub best: ObjectiveBreakdown,
    pub initial: ObjectiveBreakdown,
}

/// Projected gradient descent with momentum from `start`.
///
/// Each step moves the largest-momentum coordinate by `step_size` half-widths
/// and the others proportionally, then clamps into range.
pub fn descend(
    problem: &Problem<'_>,
    start: &EditRecipe,
    config: &OptimizerConfig,
) -> Result<OptimizationResult> {
    config.validate()?;
    let mut recipe = start.clone();
    recipe.project();
    recipe.mode = problem.config().mode;
    let half = recipe.foreground.dimension();
    let widths: Vec<f64> = (0..2 * half)
        .map(|i| ParamSet::range_at(i % half).half_width())
        .collect();

    let mut velocity = vec![0.0; 2 * half];
    let mut trace = Vec::with_capacity(config.iterations + 1);
    let mut best: Option<(ObjectiveBreakdown, EditRecipe)> = None;
    let mut initial = None;

    for iteration in 0..=config.iterations {
        let cache = problem.streams(&recipe)?;
        let current = problem.evaluate_cached(&recipe, &cache)?;
        if !current.total.is_finite() {
            return Err(Error::NonFiniteObjective { iteration });
        }
        initial.get_or_insert(current);
        if best.as_ref().is_none_or(|(b, _)| current.total < b.total) {
            best = Some((current, recipe.clone()));
        }
        let best_total = best.as_ref().expect("set above").0.total;
        trace.push(TraceEntry {
            iteration,
            total: current.total,
            attention: current.attention,
            fidelity: current.fidelity,
            regularization: current.regularization,
            best_total,
        });
        if iteration == config.iterations {
            break;
        }

        let grad = gradient_with_cache(
            problem,
            &recipe,
            &cache,
            current.total,
            config.fd_step,
            config.parallel,
        )?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteObjective { iteration });
        }
        for ((v, g), w) in velocity.iter_mut().zip(&grad).zip(&widths) {
            *v = config.momentum * *v + g * w;
        }
        let norm = velocity.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if norm == 0.0 {
            continue;
        }
        let mut values = recipe.to_vec();
        for ((p, v), w) in values.iter_mut().zip(&velocity).zip(&widths) {
            *p -= config.step_size * w * v / norm;
        }
        recipe = recipe.with_vec(&values)?;
        recipe.project();
    }

    let (best, mut best_recipe) = best.expect("at least one iteration");
    best_recipe.provenance = Provenance {
        seed: config.seed,
        iterations: config.iterations,
        trace: Some(trace),
    };
    Ok(OptimizationResult {
        recipe: best_recipe,
        best,
        initial: initial.expect("at least one iteration"),
    })
}

/// Working-resolution copies of an image and mask.
pub fn prepare_inputs(
    image: &RasterImage,
    mask: &MaskLayer,
    working_resolution: usize,
) -> Result<(RasterImage, MaskLayer)> {
    if image.dims() != mask.dims() {
        return Err(Error::Shape {
            expected: image.dims(),
            found: mask.dims(),
        });
    }
    mask.ensure_partial()?;
    let (w, h) = shrink_to_fit(image.width(), image.height(), working_resolution);
    let small_image = resize_image(image, w, h);
    let small_mask = resize_mask(mask, w, h);
    small_mask.ensure_partial()?;
    Ok((small_image, small_mask))
}

fn perturbed_start(
    curve_resolution: usize,
    sigma_fraction: f64,
    rng: &mut ChaCha8Rng,
) -> EditRecipe {
    let mut recipe = EditRecipe::identity(curve_resolution);
    if sigma_fraction == 0.0 {
        return recipe;
    }
    let half = recipe.foreground.dimension();
    let values: Vec<f64> = recipe
        .to_vec()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let sd = sigma_fraction * ParamSet::range_at(i % half).half_width();
            let normal = Normal::new(0.0, sd).expect("finite positive spread");
            v + normal.sample(rng)
        })
        .collect();
    recipe = recipe.with_vec(&values).expect("same layout");
    recipe.project();
    recipe
}

/// Optimizes `(foreground, background)` parameters for one image.
///
/// Inputs are shrunk to the working resolution first; the returned recipe is
/// resolution independent. With `restarts > 1` the extra starts are seeded
/// perturbations of identity and the lowest objective wins.
pub fn optimize(
    image: &RasterImage,
    mask: &MaskLayer,
    source: &dyn SaliencySource,
    objective: &ObjectiveConfig,
    config: &OptimizerConfig,
) -> Result<OptimizationResult> {
    config.validate()?;
    let (small_image, small_mask) = prepare_inputs(image, mask, objective.working_resolution)?;
    let problem = Problem::new(&small_image, &small_mask, source, objective.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best = descend(&problem, &EditRecipe::identity(8), config)?;
    for _ in 1..config.restarts {
        let start = perturbed_start(8, config.restart_sigma, &mut rng);
        let run = descend(&problem, &start, config)?;
        if run.best.total < best.best.total {
            best = run;
        }
    }
    Ok(best)
}

/// `n` independent runs from seeded perturbations of identity, sorted by
/// final objective (best first). The spread is `config.restart_sigma`
/// half-widths; with a spread of zero every run starts from identity.
pub fn multi_style(
    image: &RasterImage,
    mask: &MaskLayer,
    n: usize,
    seed: u64,
    source: &dyn SaliencySource,
    objective: &ObjectiveConfig,
    config: &OptimizerConfig,
) -> Result<Vec<OptimizationResult>> {
    if n == 0 {
        return Err(Error::InvalidConfig(
            "style count must be at least 1".into(),
        ));
    }
    config.validate()?;
    let (small_image, small_mask) = prepare_inputs(image, mask, objective.working_resolution)?;
    let problem = Problem::new(&small_image, &small_mask, source, objective.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let run_config = OptimizerConfig {
        seed,
        ..config.clone()
    };
    let mut results = Vec::with_capacity(n);
    for _ in 0..n {
        let start = perturbed_start(8, config.restart_sigma, &mut rng);
        results.push(descend(&problem, &start, &run_config)?);
    }
    results.sort_by(|a, b| a.best.total.total_cmp(&b.best.total));
    Ok(results)
}
