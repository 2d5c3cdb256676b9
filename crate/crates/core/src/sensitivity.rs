//! Monte Carlo propagation of parameter uncertainty.
//!
//! Each draw gets its own ChaCha8 stream selected by the draw index, so a
//! report depends only on `(portfolio, params, draws, seed)` and never on how
//! draws are scheduled across threads.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Pert, Triangular, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::enbcds::{Context, Enbcds, SpendVector};
use crate::io::{portfolio_from_value, portfolio_to_value};
use crate::model::{validate_portfolio, ValidPortfolio, ValidationReport};
use crate::optimize::{allocate, optimal_spend};

/// Distribution of one uncertain input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    Point(f64),
    Uniform {
        lo: f64,
        hi: f64,
    },
    Triangular {
        lo: f64,
        mode: f64,
        hi: f64,
    },
    /// Beta-PERT with shape 4.
    Pert {
        lo: f64,
        mode: f64,
        hi: f64,
    },
}

impl Distribution {
    fn bounds(&self) -> (f64, f64) {
        match *self {
            Self::Point(v) => (v, v),
            Self::Uniform { lo, hi } => (lo, hi),
            Self::Triangular { lo, hi, .. } | Self::Pert { lo, hi, .. } => (lo, hi),
        }
    }

    fn check(&self) -> Result<(), String> {
        let ok = match *self {
            Self::Point(v) => v.is_finite(),
            Self::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
            Self::Triangular { lo, mode, hi } | Self::Pert { lo, mode, hi } => {
                lo.is_finite() && hi.is_finite() && lo <= mode && mode <= hi
            }
        };
        if ok {
            Ok(())
        } else {
            Err(format!("{self:?} needs finite lo <= mode <= hi"))
        }
    }

    fn sampler(&self) -> Sampler {
        match *self {
            Self::Point(v) => Sampler::Point(v),
            Self::Uniform { lo, hi } => Sampler::Uniform(Uniform::new_inclusive(lo, hi).expect("checked")),
            Self::Triangular { lo, mode, hi } => Sampler::Triangular(Triangular::new(lo, hi, mode).expect("checked")),
            Self::Pert { lo, mode, hi } if hi > lo => {
                Sampler::Pert(Pert::new(lo, hi).with_mode(mode).expect("checked"))
            }
            Self::Pert { lo, .. } => Sampler::Point(lo),
        }
    }
}

enum Sampler {
    Point(f64),
    Uniform(Uniform<f64>),
    Triangular(Triangular<f64>),
    Pert(Pert<f64>),
}

impl Sampler {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Self::Point(v) => *v,
            Self::Uniform(d) => d.sample(rng),
            Self::Triangular(d) => d.sample(rng),
            Self::Pert(d) => d.sample(rng),
        }
    }
}

/// An uncertain scalar in a scenario.
///
/// `target` is a JSON pointer into the portfolio object, e.g.
/// `/gdfs/scada/attacks/vpn/loss`. Array elements may be addressed by index
/// or by their `id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertainParam {
    pub target: String,
    pub distribution: Distribution,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SensitivityError {
    #[error("target {0} does not name a number in the portfolio")]
    UnresolvedTarget(String),
    #[error("invalid distribution for {target}: {reason}")]
    InvalidDistribution { target: String, reason: String },
    #[error("draw {draw} produced an invalid portfolio:\n{report}")]
    InvalidDraw { draw: u64, report: ValidationReport },
    #[error("draws must be at least 1")]
    NoDraws,
}

/// Summary of one sampled quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
}

impl Stats {
    /// Welford mean and sample standard deviation; type-7 percentiles.
    pub fn of(values: &[f64]) -> Self {
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for (i, &x) in values.iter().enumerate() {
            let d = x - mean;
            mean += d / (i + 1) as f64;
            m2 += d * (x - mean);
        }
        let n = values.len();
        let std = if n > 1 { (m2 / (n - 1) as f64).sqrt() } else { 0.0 };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            mean,
            std,
            p5: percentile(&sorted, 0.05),
            p50: percentile(&sorted, 0.50),
            p95: percentile(&sorted, 0.95),
        }
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let i = h.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    let (a, b) = (sorted[i], sorted[j]);
    if a == b {
        a
    } else {
        a + (h - i as f64) * (b - a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSummary {
    pub target: String,
    pub stats: Stats,
    /// Draws clamped into `[0, 1]` because the target is a probability.
    pub clamped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GdfSummary {
    pub id: String,
    /// ENBCDS at the actual spends recorded in the scenario (0 where absent).
    pub enbcds_at_actual: Stats,
    pub s_star: Stats,
    pub peak_value: Stats,
    pub allocated_spend: Stats,
    pub drop_frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub draws: usize,
    pub seed: u64,
    pub params: Vec<ParamSummary>,
    pub gdfs: Vec<GdfSummary>,
    /// Allocation objective.
    pub objective: Stats,
}

struct Draw {
    inputs: Vec<f64>,
    clamped: Vec<bool>,
    at_actual: Vec<f64>,
    s_star: Vec<f64>,
    peak: Vec<f64>,
    allocated: Vec<f64>,
    dropped: Vec<bool>,
    objective: f64,
}

/// Pointer segments decoded per RFC 6901.
fn segments(pointer: &str) -> Option<Vec<String>> {
    let rest = pointer.strip_prefix('/')?;
    Some(
        rest.split('/')
            .map(|s| s.replace("~1", "/").replace("~0", "~"))
            .collect(),
    )
}

fn resolve_mut<'a>(root: &'a mut Value, pointer: &str) -> Option<&'a mut Value> {
    let mut cur = root;
    for seg in segments(pointer)? {
        cur = match cur {
            Value::Object(m) => m.get_mut(&seg)?,
            Value::Array(items) => {
                let at = match seg.parse::<usize>() {
                    Ok(i) if i < items.len() => i,
                    _ => items
                        .iter()
                        .position(|v| v.get("id").and_then(Value::as_str) == Some(seg.as_str()))?,
                };
                &mut items[at]
            }
            _ => return None,
        };
    }
    cur.is_number().then_some(cur)
}

fn is_probability(pointer: &str) -> bool {
    matches!(pointer.rsplit('/').next(), Some("baseline_prob" | "prob"))
}

/// Writes `v` at `target`, clamping probabilities. Returns whether it clamped.
fn assign(root: &mut Value, target: &str, v: f64) -> Result<bool, SensitivityError> {
    let slot = resolve_mut(root, target).ok_or_else(|| SensitivityError::UnresolvedTarget(target.into()))?;
    let (v, clamped) = if is_probability(target) && !(0.0..=1.0).contains(&v) {
        (v.clamp(0.0, 1.0), true)
    } else {
        (v, false)
    };
    *slot = Value::from(v);
    Ok(clamped)
}

/// Checks that `u` targets a number of `portfolio` (as produced by
/// [`portfolio_to_value`]) and has a well-formed distribution.
pub fn check_param(portfolio: &Value, u: &UncertainParam) -> Result<(), SensitivityError> {
    u.distribution
        .check()
        .map_err(|reason| SensitivityError::InvalidDistribution {
            target: u.target.clone(),
            reason,
        })?;
    let mut v = portfolio.clone();
    resolve_mut(&mut v, &u.target)
        .map(|_| ())
        .ok_or_else(|| SensitivityError::UnresolvedTarget(u.target.clone()))
}

fn rebuild(value: Value) -> Result<ValidPortfolio<f64>, ValidationReport> {
    let p = portfolio_from_value(value).expect("sampling only replaces numbers");
    validate_portfolio(p)
}

pub fn sample(
    p: &ValidPortfolio<f64>,
    params: &[UncertainParam],
    draws: usize,
    seed: u64,
) -> Result<SensitivityReport, SensitivityError> {
    if draws == 0 {
        return Err(SensitivityError::NoDraws);
    }
    let base = portfolio_to_value(p);
    for u in params {
        check_param(&base, u)?;
        // both ends of the support must give a valid portfolio on their own
        let (lo, hi) = u.distribution.bounds();
        for v in [lo, hi] {
            let mut trial = base.clone();
            assign(&mut trial, &u.target, v)?;
            if let Err(report) = rebuild(trial) {
                return Err(SensitivityError::InvalidDistribution {
                    target: u.target.clone(),
                    reason: format!("value {v} is not allowed: {report}"),
                });
            }
        }
    }
    let samplers: Vec<Sampler> = params.iter().map(|u| u.distribution.sampler()).collect();

    let results: Vec<Result<Draw, SensitivityError>> = (0..draws as u64)
        .into_par_iter()
        .map(|d| run_draw(&base, params, &samplers, seed, d))
        .collect();
    let mut all = Vec::with_capacity(draws);
    for r in results {
        all.push(r?);
    }

    let column = |f: &dyn Fn(&Draw) -> f64| all.iter().map(f).collect::<Vec<f64>>();
    let param_summaries = params
        .iter()
        .enumerate()
        .map(|(k, u)| ParamSummary {
            target: u.target.clone(),
            stats: Stats::of(&column(&|d| d.inputs[k])),
            clamped: all.iter().filter(|d| d.clamped[k]).count(),
        })
        .collect();
    let gdfs = p
        .gdfs
        .iter()
        .enumerate()
        .map(|(i, g)| GdfSummary {
            id: g.id.clone(),
            enbcds_at_actual: Stats::of(&column(&|d| d.at_actual[i])),
            s_star: Stats::of(&column(&|d| d.s_star[i])),
            peak_value: Stats::of(&column(&|d| d.peak[i])),
            allocated_spend: Stats::of(&column(&|d| d.allocated[i])),
            drop_frequency: all.iter().filter(|d| d.dropped[i]).count() as f64 / draws as f64,
        })
        .collect();
    Ok(SensitivityReport {
        draws,
        seed,
        params: param_summaries,
        gdfs,
        objective: Stats::of(&column(&|d| d.objective)),
    })
}

fn run_draw(
    base: &Value,
    params: &[UncertainParam],
    samplers: &[Sampler],
    seed: u64,
    draw: u64,
) -> Result<Draw, SensitivityError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw);
    let mut value = base.clone();
    let mut inputs = Vec::with_capacity(params.len());
    let mut clamped = Vec::with_capacity(params.len());
    for (u, s) in params.iter().zip(samplers) {
        let v = s.draw(&mut rng);
        clamped.push(assign(&mut value, &u.target, v)?);
        inputs.push(v);
    }
    let p = rebuild(value).map_err(|report| SensitivityError::InvalidDraw { draw, report })?;
    Ok(evaluate(&p, inputs, clamped))
}

fn evaluate(p: &ValidPortfolio<f64>, inputs: Vec<f64>, clamped: Vec<bool>) -> Draw {
    let actual = SpendVector::actual(p);
    let ctx = Context::new(p, &actual);
    let evals = Enbcds::all_in_context(&ctx);
    let at_actual = evals.iter().map(|e| e.value(actual.get(&e.gdf().id))).collect();
    let (s_star, peak) = p
        .gdfs
        .iter()
        .map(|g| {
            let o = optimal_spend(g, Some(&ctx)).expect("gdf belongs to its portfolio");
            (o.s_star, o.value)
        })
        .unzip();
    let alloc = allocate(p).expect("validated budget");
    let dropped: &BTreeSet<String> = &alloc.dropped;
    Draw {
        inputs,
        clamped,
        at_actual,
        s_star,
        peak,
        allocated: p.gdfs.iter().map(|g| alloc.spends.get(&g.id)).collect(),
        dropped: p.gdfs.iter().map(|g| dropped.contains(&g.id)).collect(),
        objective: alloc.objective,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AttackType, BreachModel, Gdf, Portfolio};

    fn portfolio() -> ValidPortfolio<f64> {
        let mut g = Gdf::new("x", 1e5);
        g.attacks.push(AttackType {
            id: "a".into(),
            description: String::new(),
            baseline_prob: 0.5,
            loss: 2e4,
            breach: BreachModel::GordonLoebI { alpha: 0.01, beta: 1.0 },
        });
        g.actual_spend = Some(500.0);
        validate_portfolio(Portfolio::new(1e4).with_gdf(g)).unwrap()
    }

    fn param(target: &str, distribution: Distribution) -> UncertainParam {
        UncertainParam {
            target: target.into(),
            distribution,
        }
    }

    #[test]
    fn pointer_resolution() {
        let mut v = portfolio_to_value(&portfolio());
        assert!(resolve_mut(&mut v, "/gdfs/x/attacks/a/loss").is_some());
        assert!(resolve_mut(&mut v, "/gdfs/0/attacks/0/breach/gordon_loeb_i/alpha").is_some());
        assert!(resolve_mut(&mut v, "/budget").is_some());
        assert!(resolve_mut(&mut v, "/gdfs/y/ben").is_none());
        assert!(resolve_mut(&mut v, "/gdfs/x/id").is_none());
        assert!(resolve_mut(&mut v, "budget").is_none());
    }

    #[test]
    fn point_draws_are_exact() {
        let p = portfolio();
        let r = sample(&p, &[param("/gdfs/x/ben", Distribution::Point(1e5))], 20, 7).unwrap();
        let o = optimal_spend(&p.gdfs[0], None).unwrap();
        let s = r.gdfs[0].s_star;
        assert_eq!(
            (s.mean, s.std, s.p5, s.p50, s.p95),
            (o.s_star, 0.0, o.s_star, o.s_star, o.s_star)
        );
        assert_eq!(r.gdfs[0].drop_frequency, 0.0);
    }

    #[test]
    fn probabilities_are_clamped_and_counted() {
        let p = portfolio();
        let r = sample(
            &p,
            &[param(
                "/gdfs/x/attacks/a/baseline_prob",
                Distribution::Uniform { lo: 0.5, hi: 1.5 },
            )],
            400,
            1,
        );
        // the upper end alone is not a probability, but clamping makes it one
        let r = r.unwrap();
        let c = r.params[0].clamped;
        assert!(c > 100 && c < 300, "{c}");
    }

    #[test]
    fn bad_inputs() {
        let p = portfolio();
        assert_eq!(
            sample(&p, &[param("/gdfs/q/ben", Distribution::Point(1.0))], 1, 0),
            Err(SensitivityError::UnresolvedTarget("/gdfs/q/ben".into()))
        );
        assert!(matches!(
            sample(
                &p,
                &[param(
                    "/gdfs/x/ben",
                    Distribution::Triangular {
                        lo: 1.0,
                        mode: 0.0,
                        hi: 2.0
                    }
                )],
                1,
                0
            ),
            Err(SensitivityError::InvalidDistribution { .. })
        ));
        assert!(matches!(
            sample(
                &p,
                &[param(
                    "/gdfs/x/attacks/a/loss",
                    Distribution::Uniform { lo: -1.0, hi: 2.0 }
                )],
                1,
                0
            ),
            Err(SensitivityError::InvalidDistribution { .. })
        ));
        assert_eq!(sample(&p, &[], 0, 0), Err(SensitivityError::NoDraws));
    }

    #[test]
    fn percentiles_interpolate() {
        let s = Stats::of(&[4.0, 1.0, 3.0, 2.0, 5.0]);
        assert_eq!(s.mean, 3.0);
        assert_eq!(s.p50, 3.0);
        assert!((s.p5 - 1.2).abs() < 1e-12);
        assert!((s.p95 - 4.8).abs() < 1e-12);
        assert!((s.std - 2.5f64.sqrt()).abs() < 1e-12);
    }
}
