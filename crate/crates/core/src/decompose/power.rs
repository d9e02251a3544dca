use nalgebra::DVector;

use crate::error::{ensure_dim, Result, TpmError};
use crate::geometry::off_axis_ratio;
use crate::sampling::{stream_rng, uniform_unit, Domain};
use crate::tensor::{check_unit, ComponentSet, Rank1SumTensor, OPERATION_UNIT_TOL};

/// Sign-aligned step size below which the iteration is considered converged.
pub const EARLY_EXIT_TOL: f64 = 1e-13;
/// `‖T(I,w,w,w)‖` at or below this cannot be normalised.
pub const DEGENERATE_NORM: f64 = 1e-300;

/// Iteration count constants: `⌈50 + 20 ln(1 / (√k τ⁴))⌉`.
pub const ITERATION_BASE: f64 = 50.0;
pub const ITERATION_SLOPE: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TpmOutcome {
    pub vector: DVector<f64>,
    pub weight: f64,
    pub iterations: usize,
    /// `r_t = ‖P_{u⊥} w_t‖ / |w_tᵀu|` for `t = 0..=iterations`; empty without a target.
    pub ratio_trace: Vec<f64>,
    /// `λ_t` for `t = 1..=iterations`.
    pub lambda_trace: Vec<f64>,
}

/// Runs `w ← T(I,w,w,w)/‖T(I,w,w,w)‖`, `λ ← T(w,w,w,w)` for up to `iters` steps.
pub fn tpm(t: &Rank1SumTensor, w0: &DVector<f64>, iters: usize) -> Result<TpmOutcome> {
    tpm_tracked(t, w0, iters, None)
}

/// As [`tpm`], additionally recording the off-axis ratio of every iterate
/// relative to `target`.
pub fn tpm_tracked(
    t: &Rank1SumTensor,
    w0: &DVector<f64>,
    iters: usize,
    target: Option<&DVector<f64>>,
) -> Result<TpmOutcome> {
    ensure_dim(t.dim(), w0.len())?;
    check_unit(w0, 0, OPERATION_UNIT_TOL)?;
    if iters == 0 {
        return Err(TpmError::InvalidParameter("iteration count must be at least 1".into()));
    }
    if let Some(u) = target {
        ensure_dim(t.dim(), u.len())?;
    }

    let mut w = w0.clone();
    let mut ratio_trace = Vec::new();
    if let Some(u) = target {
        ratio_trace.push(off_axis_ratio(&w, u));
    }
    let mut lambda_trace = Vec::with_capacity(iters.min(1024));
    let mut weight = f64::NAN;
    let mut iterations = 0;
    for step in 1..=iters {
        let image = t.contract_vector_unchecked(&w);
        let norm = image.norm();
        if !(norm > DEGENERATE_NORM) {
            return Err(TpmError::DegenerateIterate { step });
        }
        let next = image / norm;
        weight = t.contract_full_unchecked(&next);
        lambda_trace.push(weight);
        if let Some(u) = target {
            ratio_trace.push(off_axis_ratio(&next, u));
        }
        let sign = if next.dot(&w) >= 0.0 { 1.0 } else { -1.0 };
        let change = (&next - &w * sign).norm();
        w = next;
        iterations = step;
        if change <= EARLY_EXIT_TOL {
            break;
        }
    }
    Ok(TpmOutcome { vector: w, weight, iterations, ratio_trace, lambda_trace })
}

/// `max(50, ⌈50 + 20 ln(1/(√k τ⁴))⌉)`.
pub fn default_iteration_count(k: usize, tau: f64) -> Result<usize> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(TpmError::InvalidParameter(format!("incoherence must lie in (0, 1), got {tau}")));
    }
    if k == 0 {
        return Err(TpmError::InvalidParameter("k must be positive".into()));
    }
    let ln_inverse = -(0.5 * (k as f64).ln() + 4.0 * tau.ln());
    let count = (ITERATION_BASE + ITERATION_SLOPE * ln_inverse).ceil();
    Ok(count.max(ITERATION_BASE) as usize)
}

/// One extracted `(û, λ̂)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Extracted {
    pub vector: DVector<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartRecord {
    pub restart: usize,
    pub start: DVector<f64>,
    /// Ground-truth component most correlated with the start, when truth was supplied.
    pub target: Option<usize>,
    /// `None` when the restart hit a degenerate iterate and was discarded.
    pub outcome: Option<TpmOutcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub selected: usize,
    pub restarts: Vec<RestartRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TpmrRun {
    pub extracted: Vec<Extracted>,
    pub rounds: Vec<RoundRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TpmrSettings {
    pub iters: usize,
    pub restarts: usize,
    pub rounds: usize,
    pub seed: u64,
}

/// Power method with `L` random restarts per round and deflation between rounds.
pub fn tpmr(t: &Rank1SumTensor, iters: usize, restarts: usize, k: usize, seed: u64) -> Result<Vec<Extracted>> {
    let settings = TpmrSettings { iters, restarts, rounds: k, seed };
    Ok(tpmr_run(t, &settings, None)?.extracted)
}

/// [`tpmr`] with per-restart records; with `truth` each run also traces the
/// off-axis ratio to the component its start correlates with most.
pub fn tpmr_run(t: &Rank1SumTensor, settings: &TpmrSettings, truth: Option<&ComponentSet>) -> Result<TpmrRun> {
    let TpmrSettings { iters, restarts, rounds, seed } = *settings;
    if restarts == 0 || rounds == 0 {
        return Err(TpmError::InvalidParameter("restart and round counts must be positive".into()));
    }
    if iters == 0 {
        return Err(TpmError::InvalidParameter("iteration count must be at least 1".into()));
    }
    if let Some(truth) = truth {
        ensure_dim(t.dim(), truth.dim())?;
    }
    let d = t.dim();
    let mut current = t.clone();
    let mut extracted = Vec::with_capacity(rounds);
    let mut records = Vec::with_capacity(rounds);

    for round in 0..rounds {
        if let Some(last) = extracted.last() {
            let Extracted { vector, weight } = last;
            current = current.deflate(vector, *weight)?;
        }
        let run_restart = |restart: usize| -> RestartRecord {
            let mut rng = stream_rng(seed, Domain::Restarts, round as u32, restart as u32);
            let start = uniform_unit(&mut rng, d);
            let target = truth.map(|truth| most_correlated(truth, &start));
            let target_vector = truth.zip(target).map(|(truth, i)| truth.vector(i));
            let outcome = tpm_tracked(&current, &start, iters, target_vector.as_ref()).ok();
            RestartRecord { restart, start, target, outcome }
        };
        let restart_records = run_all(restarts, run_restart);

        let mut selected: Option<usize> = None;
        for record in &restart_records {
            if let Some(outcome) = &record.outcome {
                let better = match selected {
                    None => true,
                    Some(best) => {
                        outcome.weight > restart_records[best].outcome.as_ref().map_or(f64::NEG_INFINITY, |o| o.weight)
                    }
                };
                if better {
                    selected = Some(record.restart);
                }
            }
        }
        let selected = selected.ok_or(TpmError::ExtractionFailure { round })?;
        let best = restart_records[selected].outcome.as_ref().expect("selected restart has an outcome");
        extracted.push(Extracted { vector: best.vector.clone(), weight: best.weight });
        records.push(RoundRecord { round, selected, restarts: restart_records });
    }
    Ok(TpmrRun { extracted, rounds: records })
}

fn most_correlated(truth: &ComponentSet, v: &DVector<f64>) -> usize {
    let c = truth.matrix().transpose() * v;
    let mut best = 0;
    for i in 1..c.len() {
        if c[i].abs() > c[best].abs() {
            best = i;
        }
    }
    best
}

#[cfg(feature = "parallel")]
fn run_all<T: Send, F: Fn(usize) -> T + Sync + Send>(count: usize, f: F) -> Vec<T> {
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_all<T, F: Fn(usize) -> T>(count: usize, f: F) -> Vec<T> {
    (0..count).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{generate_components, ComponentModel};

    fn e(d: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(d);
        v[i] = 1.0;
        v
    }

    #[test]
    fn component_is_a_fixed_point() {
        let set = ComponentSet::equal_weights(&[e(4, 0), e(4, 1)]).unwrap();
        let t = Rank1SumTensor::from_components(&set);
        let out = tpm(&t, &e(4, 0), 20).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.vector, e(4, 0));
        assert_eq!(out.weight, 1.0);
    }

    #[test]
    fn single_component_contracts_cubically() {
        let set = ComponentSet::new(&[e(3, 2)], vec![1.7]).unwrap();
        let t = Rank1SumTensor::from_components(&set);
        let w0 = DVector::from_vec(vec![0.6, 0.0, 0.8]);
        let out = tpm_tracked(&t, &w0, 10, Some(&e(3, 2))).unwrap();
        assert!((out.vector[2].abs() - 1.0).abs() < 1e-15);
        assert!((out.weight - 1.7).abs() < 1e-14);
        // with one component the image is exactly ±u after one step
        assert!((out.ratio_trace[0] - 0.75).abs() < 1e-15);
        assert_eq!(out.ratio_trace[1], 0.0);
    }

    #[test]
    fn ratio_contracts_cubically_in_the_orthogonal_case() {
        let set = ComponentSet::equal_weights(&[e(3, 0), e(3, 1), e(3, 2)]).unwrap();
        let t = Rank1SumTensor::from_components(&set);
        let w0 = DVector::from_vec(vec![0.8, 0.48, 0.36]);
        let out = tpm_tracked(&t, &w0, 3, Some(&e(3, 0))).unwrap();
        // the ratio vector (c_j / c_1) gets cubed entrywise each step
        let (a, b) = (0.48f64 / 0.8, 0.36f64 / 0.8);
        for (step, r) in out.ratio_trace.iter().enumerate() {
            let p = 3i32.pow(step as u32);
            let expected = (a.powi(2 * p) + b.powi(2 * p)).sqrt();
            assert!((r - expected).abs() <= 1e-12 * expected.max(1e-300), "step {step}");
        }
    }

    #[test]
    fn degenerate_start_is_reported() {
        let set = ComponentSet::equal_weights(&[e(3, 0)]).unwrap();
        let t = Rank1SumTensor::from_components(&set);
        assert!(matches!(tpm(&t, &e(3, 1), 5), Err(TpmError::DegenerateIterate { step: 1 })));
        assert!(matches!(tpm(&t, &e(3, 0), 0), Err(TpmError::InvalidParameter(_))));
    }

    #[test]
    fn iteration_count_formula() {
        let k = 20;
        let tau: f64 = 0.05;
        let direct = (50.0 + 20.0 * (1.0 / ((k as f64).sqrt() * tau.powi(4))).ln()).ceil() as usize;
        assert_eq!(default_iteration_count(k, tau).unwrap(), direct);
        assert_eq!(default_iteration_count(k, 0.999_999).unwrap(), 50);
        let halved = default_iteration_count(k, 0.025).unwrap() as f64 - direct as f64;
        assert!((halved - 20.0 * 16f64.ln()).abs() <= 1.0);
        assert!(default_iteration_count(k, 0.0).is_err());
        assert!(default_iteration_count(k, 1.0).is_err());
        let mut previous = usize::MAX;
        for step in 1..100 {
            let count = default_iteration_count(k, step as f64 / 100.0).unwrap();
            assert!(count <= previous);
            previous = count;
        }
    }

    #[test]
    fn single_round_is_best_of_restarts() {
        let set = generate_components(ComponentModel::GaussianUnit, 12, 3, (1.0, 1.25), 5).unwrap();
        let t = Rank1SumTensor::from_components(&set);
        let out = tpmr(&t, 60, 8, 1, 9).unwrap();
        let mut best: Option<TpmOutcome> = None;
        for restart in 0..8 {
            let mut rng = stream_rng(9, Domain::Restarts, 0, restart);
            let start = uniform_unit(&mut rng, 12);
            let run = tpm(&t, &start, 60).unwrap();
            if best.as_ref().is_none_or(|b| run.weight > b.weight) {
                best = Some(run);
            }
        }
        let best = best.unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].vector, best.vector);
        assert_eq!(out[0].weight, best.weight);
    }

    #[test]
    fn extraction_fails_when_every_restart_degenerates() {
        let t = Rank1SumTensor::empty(4);
        assert!(matches!(tpmr(&t, 5, 3, 1, 0), Err(TpmError::ExtractionFailure { round: 0 })));
    }
}
