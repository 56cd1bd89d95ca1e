//! Solution-quality and resource metrics with their error bars.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubo::SampleSet;
use crate::ENERGY_TOL;

/// Desired confidence used for reported time-to-solution.
pub const DEFAULT_P_DESIRED: f64 = 0.99;

/// Keeps the records with exactly `n_vacancies` zeros.
pub fn post_select(samples: &SampleSet, n_vacancies: usize) -> SampleSet {
    samples.filter(|r| r.bits.count_zeros() == n_vacancies)
}

fn hits(samples: &SampleSet, e_ground: f64) -> u64 {
    samples.records().iter().filter(|r| (r.energy - e_ground).abs() <= ENERGY_TOL).map(|r| r.count).sum()
}

/// Fraction of shots whose energy is within [`ENERGY_TOL`] of `e_ground`.
pub fn optimal_solution_probability(samples: &SampleSet, e_ground: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::UndefinedMetric("success probability of an empty sample set".into()));
    }
    Ok(hits(samples, e_ground) as f64 / samples.n_shots_total() as f64)
}

/// `(E - e_max) / (e_min - e_max)` with `E` the shot-weighted mean energy.
pub fn approximation_ratio(samples: &SampleSet, e_min: f64, e_max: f64) -> Result<f64> {
    if (e_max - e_min).abs() <= ENERGY_TOL {
        return Err(Error::UndefinedMetric(format!("degenerate energy range [{e_min}, {e_max}]")));
    }
    if e_min > e_max {
        return Err(Error::InvalidArgument(format!("e_min {e_min} exceeds e_max {e_max}")));
    }
    let mean = samples
        .mean_energy()
        .ok_or_else(|| Error::UndefinedMetric("approximation ratio of an empty sample set".into()))?;
    Ok((mean - e_max) / (e_min - e_max))
}

/// Binomial shot-noise error `sqrt(ps (1 - ps) / n)`.
pub fn standard_error(ps: f64, n_solutions: u64) -> f64 {
    if n_solutions == 0 {
        return 0.0;
    }
    (ps * (1.0 - ps) / n_solutions as f64).max(0.0).sqrt()
}

pub fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::UndefinedMetric("mean of an empty list".into()));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Population standard deviation (divisor `n`).
pub fn std_deviation(values: &[f64]) -> Result<f64> {
    let mu = mean(values).map_err(|_| Error::UndefinedMetric("standard deviation of an empty list".into()))?;
    let var = values.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / values.len() as f64;
    Ok(var.sqrt())
}

/// `T ln(1 - p_d) / ln(1 - ps)`. By convention `ps = 1` gives `T` and
/// `ps = 0` gives `+inf`.
pub fn time_to_solution(user_runtime_s: f64, ps: f64, p_desired: f64) -> Result<f64> {
    if !(p_desired > 0.0 && p_desired < 1.0) {
        return Err(Error::InvalidArgument(format!("p_desired must lie in (0, 1), got {p_desired}")));
    }
    if !(0.0..=1.0).contains(&ps) {
        return Err(Error::InvalidArgument(format!("ps must lie in [0, 1], got {ps}")));
    }
    if user_runtime_s < 0.0 {
        return Err(Error::InvalidArgument(format!("negative runtime {user_runtime_s}")));
    }
    if ps == 1.0 {
        return Ok(user_runtime_s);
    }
    if ps == 0.0 {
        return Ok(f64::INFINITY);
    }
    if ps == p_desired {
        return Ok(user_runtime_s);
    }
    Ok(user_runtime_s * (1.0 - p_desired).ln() / (1.0 - ps).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpsilonMode {
    /// Target `e_ground + eps * |e_ground|`.
    #[default]
    Relative,
    /// Target `e_ground + eps`.
    Absolute,
}

/// First elapsed time whose best energy is within `epsilon` of the ground
/// energy (relative to `|e_ground|`).
pub fn time_to_epsilon(trajectory: &[(f64, f64)], e_ground: f64, epsilon: f64) -> Option<f64> {
    time_to_epsilon_with(trajectory, e_ground, epsilon, EpsilonMode::Relative)
}

pub fn time_to_epsilon_with(trajectory: &[(f64, f64)], e_ground: f64, epsilon: f64, mode: EpsilonMode) -> Option<f64> {
    let target = match mode {
        EpsilonMode::Relative => e_ground + epsilon * e_ground.abs(),
        EpsilonMode::Absolute => e_ground + epsilon,
    };
    trajectory.iter().find(|(_, best)| *best <= target + ENERGY_TOL).map(|(t, _)| *t)
}

/// `(user runtime, device time)`. Local backends have no latency and the
/// simulated device time stands in for QPU time.
pub fn runtime_breakdown(samples: &SampleSet) -> (f64, f64) {
    (samples.timing.user_runtime(), samples.timing.device_s)
}

/// Raw metric values of a single experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMetrics {
    pub ps: f64,
    /// `None` when post-selection removed every shot.
    pub ps_post: Option<f64>,
    pub ar_post: Option<f64>,
    pub n_shots: u64,
    pub n_shots_post: u64,
    pub min_energy: Option<f64>,
    pub chain_break_fraction: Option<f64>,
}

impl ExperimentMetrics {
    /// Metrics of one experiment's samples against the constrained extrema.
    pub fn evaluate(samples: &SampleSet, e_min: f64, e_max: f64, n_vacancies: usize) -> Result<Self> {
        let ps = optimal_solution_probability(samples, e_min)?;
        let post = post_select(samples, n_vacancies);
        let ps_post = optimal_solution_probability(&post, e_min).ok();
        let ar_post = if post.is_empty() || (e_max - e_min).abs() <= ENERGY_TOL {
            None
        } else {
            Some(approximation_ratio(&post, e_min, e_max)?)
        };
        Ok(Self {
            ps,
            ps_post,
            ar_post,
            n_shots: samples.n_shots_total(),
            n_shots_post: post.n_shots_total(),
            min_energy: samples.min_energy(),
            chain_break_fraction: None,
        })
    }
}

/// Per-experiment timing values that feed the runtime columns.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperimentTiming {
    pub user_runtime_s: f64,
    pub qpu_time_s: Option<f64>,
    pub tt_eps_s: Option<f64>,
}

/// Aggregate over repeated experiments: pooled values with shot-noise SE and
/// across-experiment population sigma.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ps: f64,
    pub se: f64,
    pub sigma: f64,
    pub ps_post: Option<f64>,
    pub ps_post_se: Option<f64>,
    pub ps_post_sigma: Option<f64>,
    pub ar_post: Option<f64>,
    pub ar_post_sigma: Option<f64>,
    pub user_runtime_s: f64,
    pub user_runtime_sigma: f64,
    pub qpu_time_s: Option<f64>,
    pub tts_s: Option<f64>,
    pub tt_eps_s: Option<f64>,
    pub chain_break_fraction: Option<f64>,
    pub n_experiments: usize,
    pub n_shots_per_experiment: u64,
}

impl MetricReport {
    pub fn aggregate(experiments: &[(ExperimentMetrics, ExperimentTiming)]) -> Result<Self> {
        if experiments.is_empty() {
            return Err(Error::UndefinedMetric("no successful experiments to aggregate".into()));
        }
        let metrics: Vec<&ExperimentMetrics> = experiments.iter().map(|(m, _)| m).collect();
        let timings: Vec<&ExperimentTiming> = experiments.iter().map(|(_, t)| t).collect();

        let shots: u64 = metrics.iter().map(|m| m.n_shots).sum();
        let ps = weighted(metrics.iter().map(|m| (m.ps, m.n_shots))).unwrap_or(0.0);
        let ps_values: Vec<f64> = metrics.iter().map(|m| m.ps).collect();

        let post: Vec<(f64, u64)> = metrics.iter().filter_map(|m| m.ps_post.map(|p| (p, m.n_shots_post))).collect();
        let post_shots: u64 = post.iter().map(|p| p.1).sum();
        let ps_post = weighted(post.iter().copied());
        let ps_post_values: Vec<f64> = post.iter().map(|p| p.0).collect();

        let ar: Vec<(f64, u64)> = metrics.iter().filter_map(|m| m.ar_post.map(|a| (a, m.n_shots_post))).collect();
        let ar_values: Vec<f64> = ar.iter().map(|a| a.0).collect();

        let runtimes: Vec<f64> = timings.iter().map(|t| t.user_runtime_s).collect();
        let user_runtime_s = mean(&runtimes)?;
        let qpu: Vec<f64> = timings.iter().filter_map(|t| t.qpu_time_s).collect();
        let tt_eps: Vec<f64> = timings.iter().filter_map(|t| t.tt_eps_s).collect();
        let cbf: Vec<f64> = metrics.iter().filter_map(|m| m.chain_break_fraction).collect();

        Ok(Self {
            ps,
            se: standard_error(ps, shots),
            sigma: std_deviation(&ps_values)?,
            ps_post,
            ps_post_se: ps_post.map(|p| standard_error(p, post_shots)),
            ps_post_sigma: std_deviation(&ps_post_values).ok(),
            ar_post: weighted(ar.iter().copied()),
            ar_post_sigma: std_deviation(&ar_values).ok(),
            user_runtime_s,
            user_runtime_sigma: std_deviation(&runtimes)?,
            qpu_time_s: mean(&qpu).ok(),
            tts_s: time_to_solution(user_runtime_s, ps, DEFAULT_P_DESIRED).ok(),
            tt_eps_s: mean(&tt_eps).ok(),
            chain_break_fraction: mean(&cbf).ok(),
            n_experiments: experiments.len(),
            n_shots_per_experiment: shots / experiments.len() as u64,
        })
    }
}

/// Count-weighted mean; `None` when the total weight is zero.
fn weighted(values: impl Iterator<Item = (f64, u64)>) -> Option<f64> {
    let (sum, total) = values.fold((0.0, 0u64), |(s, n), (v, c)| (s + v * c as f64, n + c));
    (total > 0).then(|| sum / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubo::{Bitstring, QuboInstance, SampleRecord, Timing};

    fn set(records: &[(&str, f64, u64)]) -> SampleSet {
        let n = records[0].0.len();
        SampleSet::from_records(
            n,
            records
                .iter()
                .map(|(b, e, c)| SampleRecord { bits: b.parse::<Bitstring>().unwrap(), energy: *e, count: *c })
                .collect(),
            Timing::default(),
        )
        .unwrap()
    }

    #[test]
    fn post_selection_counts_zeros() {
        let s = set(&[("111111111111111000", -20.0, 2), ("111111111111111100", -19.0, 3)]);
        let p = post_select(&s, 3);
        assert_eq!(p.n_shots_total(), 2);
        assert_eq!(p.records()[0].bits.count_zeros(), 3);
        assert_eq!(post_select(&p, 3), p);
        assert!(post_select(&s, 5).is_empty());
    }

    #[test]
    fn post_selection_keeps_timing() {
        let mut s = set(&[("10", 1.0, 1)]);
        s.timing = Timing::device(2.0);
        assert_eq!(post_select(&s, 1).timing.device_s, 2.0);
    }

    #[test]
    fn success_probability_endpoints() {
        let s = set(&[("10", -2.0, 4)]);
        assert_eq!(optimal_solution_probability(&s, -2.0).unwrap(), 1.0);
        assert_eq!(optimal_solution_probability(&s, -3.0).unwrap(), 0.0);
        let mixed = set(&[("10", -2.0, 1), ("01", -1.0, 3)]);
        assert_eq!(optimal_solution_probability(&mixed, -2.0).unwrap(), 0.25);
        assert!(optimal_solution_probability(&SampleSet::empty(2), 0.0).is_err());
    }

    #[test]
    fn approximation_ratio_endpoints() {
        assert_eq!(approximation_ratio(&set(&[("10", -20.0, 3)]), -20.0, -13.0).unwrap(), 1.0);
        assert_eq!(approximation_ratio(&set(&[("10", -13.0, 3)]), -20.0, -13.0).unwrap(), 0.0);
        let half = set(&[("10", -20.0, 1), ("01", -13.0, 1)]);
        assert_eq!(approximation_ratio(&half, -20.0, -13.0).unwrap(), 0.5);
        assert!(matches!(approximation_ratio(&half, -20.0, -20.0), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn standard_error_values() {
        assert_eq!(standard_error(0.5, 100), 0.05);
        assert_eq!(standard_error(0.0, 100), 0.0);
        assert_eq!(standard_error(1.0, 100), 0.0);
        let se = standard_error(0.993, 1_000_000);
        assert!((se - 8.337e-5).abs() < 1e-7, "{se}");
    }

    #[test]
    fn std_deviation_values() {
        assert_eq!(std_deviation(&[3.0, 3.0, 3.0]).unwrap(), 0.0);
        assert_eq!(std_deviation(&[0.0, 1.0]).unwrap(), 0.5);
        assert!((std_deviation(&[1.0, 2.0, 3.0, 4.0]).unwrap() - 1.25f64.sqrt()).abs() < 1e-15);
        assert!(std_deviation(&[]).is_err());
    }

    #[test]
    fn tts_values() {
        assert_eq!(time_to_solution(2.0, 0.7, 0.7).unwrap(), 2.0);
        let tts = time_to_solution(0.339, 0.993, 0.99).unwrap();
        assert!((tts - 0.3146).abs() < 1e-4, "{tts}");
        assert_eq!(time_to_solution(1.5, 1.0, 0.99).unwrap(), 1.5);
        assert_eq!(time_to_solution(1.5, 0.0, 0.99).unwrap(), f64::INFINITY);
        assert!(time_to_solution(1.0, 1.0 - 1e-12, 0.99).unwrap() < 0.2);
        assert!(time_to_solution(1.0, 0.5, 1.0).is_err());
        assert!(time_to_solution(1.0, 1.5, 0.9).is_err());
    }

    #[test]
    fn tt_eps_values() {
        let traj = [(0.5, -10.0), (1.0, -15.0), (2.0, -20.0), (3.0, -20.0)];
        assert_eq!(time_to_epsilon(&traj, -20.0, 0.0), Some(2.0));
        assert_eq!(time_to_epsilon(&traj, -20.0, 0.25), Some(1.0));
        assert_eq!(time_to_epsilon(&traj, -25.0, 0.0), None);
        assert_eq!(time_to_epsilon_with(&traj, -20.0, 5.0, EpsilonMode::Absolute), Some(1.0));
    }

    #[test]
    fn runtime_breakdown_sums() {
        let mut s = SampleSet::empty(1);
        s.timing = Timing { encoding_s: 0.37, latency_s: 0.0, device_s: 2.17 };
        let (user, qpu) = runtime_breakdown(&s);
        assert!((user - 2.54).abs() < 1e-12);
        assert_eq!(qpu, 2.17);
        s.timing = Timing::default();
        assert_eq!(runtime_breakdown(&s), (0.0, 0.0));
        s.timing = Timing { encoding_s: 0.4, ..Timing::default() };
        assert_eq!(runtime_breakdown(&s).0, 0.4);
    }

    #[test]
    fn aggregate_pools_and_spreads() {
        let q = QuboInstance::from_entries(2, &[(0, 0, -1.0), (1, 1, -1.0), (0, 1, 3.0)], 0.0).unwrap();
        // Ground energy -1 at 10 and 01; one zero required.
        let a = SampleSet::from_bitstrings(&q, ["10", "10", "11", "00"].map(|s| s.parse().unwrap()), Timing::default());
        let b = SampleSet::from_bitstrings(&q, ["01", "01", "01", "01"].map(|s| s.parse().unwrap()), Timing::default());
        let ma = ExperimentMetrics::evaluate(&a, -1.0, -1.0, 1).unwrap();
        let mb = ExperimentMetrics::evaluate(&b, -1.0, -1.0, 1).unwrap();
        assert_eq!(ma.ps, 0.5);
        assert_eq!(ma.ps_post, Some(1.0));
        assert_eq!(ma.ar_post, None);
        let t = ExperimentTiming { user_runtime_s: 1.0, ..Default::default() };
        let r = MetricReport::aggregate(&[(ma, t), (mb, t)]).unwrap();
        assert_eq!(r.ps, 0.75);
        assert_eq!(r.sigma, 0.25);
        assert_eq!(r.se, standard_error(0.75, 8));
        assert_eq!(r.n_experiments, 2);
        assert_eq!(r.n_shots_per_experiment, 4);
        // Pooled equals the value on the concatenation.
        let pooled = SampleSet::merge([&a, &b]).unwrap();
        assert_eq!(optimal_solution_probability(&pooled, -1.0).unwrap(), r.ps);
        assert!(MetricReport::aggregate(&[]).is_err());
    }

    #[test]
    fn single_experiment_has_zero_sigma() {
        let m = ExperimentMetrics {
            ps: 0.3,
            ps_post: Some(0.6),
            ar_post: Some(0.9),
            n_shots: 10,
            n_shots_post: 5,
            min_energy: None,
            chain_break_fraction: None,
        };
        let r = MetricReport::aggregate(&[(m, ExperimentTiming::default())]).unwrap();
        assert_eq!(r.sigma, 0.0);
        assert_eq!(r.ps_post_sigma, Some(0.0));
    }
}
