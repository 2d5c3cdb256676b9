//! Expected net benefit of a GDF as a function of its cyber-defense spend.
//!
//! For a GDF `x` with spend `s`:
//!
//! ```text
//! f(s)      = s + sum_j P_s(x_j) * L_j
//! ENBCDS(s) = Ben - DirCosts - sum_k P(x_k) * Noncyb(x_k) - f(s)
//! ```
//!
//! `P_s(x_j) = baseline_j * g_j(s)` for a standalone GDF. When other GDFs feed
//! into `x` through dependency edges, each parent `u` is compromised with
//! probability `q_u` independently of the other parents, and a compromised
//! parent multiplies the attack's probability by its uplift, capped at 1. The
//! effective probability is the expectation of that capped product over all
//! parent states.
//!
//! Because `f(s) >= s`, any spend above `f(0)` is worth less than spending nothing.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::EvalError;
use crate::model::{Gdf, Money, Probability, ValidPortfolio};
use crate::scalar::Scalar;

/// How defensive spend enters the expected cyber cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    /// `f(s) = s + sum_j P_s(x_j) L_j`: spend is charged once. Concave ENBCDS.
    #[default]
    Additive,
    /// `f(s) = sum_j P_s(x_j) (L_j + s)`: spend only counts when an attack succeeds.
    /// Not concave in general.
    Literal,
}

/// Spend per GDF id. Missing ids spend nothing.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
#[serde(transparent)]
pub struct SpendVector<T>(BTreeMap<String, T>);

impl<T: Scalar> SpendVector<T> {
    pub fn new() -> Self {
        Self(BTreeMap::new())
    }

    /// Every GDF at its recorded actual spend (zero when none is recorded).
    pub fn actual(p: &ValidPortfolio<T>) -> Self {
        Self(
            p.gdfs
                .iter()
                .map(|g| (g.id.clone(), g.actual_spend.unwrap_or_else(T::zero)))
                .collect(),
        )
    }

    pub fn zeros(p: &ValidPortfolio<T>) -> Self {
        Self(p.gdfs.iter().map(|g| (g.id.clone(), T::zero())).collect())
    }

    pub fn set(&mut self, id: impl Into<String>, spend: T) -> Result<(), EvalError> {
        check_spend(spend)?;
        self.0.insert(id.into(), spend);
        Ok(())
    }

    pub fn get(&self, id: &str) -> T {
        self.0.get(id).copied().unwrap_or_else(T::zero)
    }

    pub fn total(&self) -> T {
        self.0.values().copied().fold(T::zero(), |a, b| a + b)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, T)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Fails on the first id that is not in the portfolio.
    pub fn check_against(&self, p: &ValidPortfolio<T>) -> Result<(), EvalError> {
        match self.0.keys().find(|k| p.position(k).is_none()) {
            Some(k) => Err(EvalError::UnknownGdf(k.clone())),
            None => Ok(()),
        }
    }
}

fn check_spend<T: Scalar>(s: T) -> Result<(), EvalError> {
    if s.is_finite() && s >= T::zero() {
        Ok(())
    } else {
        Err(EvalError::InvalidSpend(s.to_f64_lossless()))
    }
}

/// Portfolio state that determines how likely each parent GDF is to be compromised.
#[derive(Debug, Clone, Copy)]
pub struct Context<'a, T> {
    pub portfolio: &'a ValidPortfolio<T>,
    pub spends: &'a SpendVector<T>,
    /// GDFs that are not deployed. They cannot be compromised.
    pub dropped: Option<&'a BTreeSet<String>>,
}

impl<'a, T: Scalar> Context<'a, T> {
    pub fn new(portfolio: &'a ValidPortfolio<T>, spends: &'a SpendVector<T>) -> Self {
        Self {
            portfolio,
            spends,
            dropped: None,
        }
    }

    pub fn with_dropped(mut self, dropped: &'a BTreeSet<String>) -> Self {
        self.dropped = Some(dropped);
        self
    }

    fn is_dropped(&self, id: &str) -> bool {
        self.dropped.is_some_and(|d| d.contains(id))
    }

    /// Compromise probability `q` of every GDF, indexed by portfolio position:
    /// `q_u = 1 - prod_j (1 - P(u_j))` at the spend in this context.
    pub fn compromise_probabilities(&self) -> Vec<T> {
        let p = self.portfolio;
        let spends: Vec<T> = p.gdfs.iter().map(|g| self.spends.get(&g.id)).collect();
        let dropped: Vec<bool> = p.gdfs.iter().map(|g| self.is_dropped(&g.id)).collect();
        compromise_by_position(p, &spends, &dropped)
    }
}

/// Compromise probabilities with spends and deployment given by portfolio position.
pub(crate) fn compromise_by_position<T: Scalar>(p: &ValidPortfolio<T>, spends: &[T], dropped: &[bool]) -> Vec<T> {
    let mut q = vec![T::zero(); p.gdfs.len()];
    for &i in p.topological_order() {
        if dropped[i] {
            continue;
        }
        let g = &p.gdfs[i];
        let eval = Enbcds::from_parts(g, parent_factors(p, i, &q), CostMode::Additive);
        let survive = (0..g.attacks.len())
            .map(|j| T::one() - eval.effective_prob(j, spends[i]).get())
            .fold(T::one(), |a, b| a * b);
        q[i] = Probability::clamped(T::one() - survive).get();
    }
    q
}

/// Evaluator for GDF `i` given the compromise probabilities of every GDF.
pub(crate) fn evaluator_at<'a, T: Scalar>(
    p: &'a ValidPortfolio<T>,
    i: usize,
    q: &[T],
    mode: CostMode,
) -> Enbcds<'a, T> {
    Enbcds::from_parts(&p.gdfs[i], parent_factors(p, i, q), mode)
}

/// `(q_u, uplift)` pairs per attack of GDF `i`, skipping parents that cannot matter.
fn parent_factors<T: Scalar>(p: &ValidPortfolio<T>, i: usize, q: &[T]) -> Vec<Vec<(T, T)>> {
    let g = &p.gdfs[i];
    let mut factors = vec![Vec::new(); g.attacks.len()];
    for e in p.incoming(i) {
        let qu = q[p.position(&e.from).expect("validated edge")];
        if qu <= T::zero() {
            continue;
        }
        for (attack, &u) in &e.uplift {
            if u > T::one() {
                let j = g.attack_index(attack).expect("validated uplift target");
                factors[j].push((qu, u));
            }
        }
    }
    factors
}

/// Expectation over independent parent states of `min(1, base * M)`, where `M` is
/// the product of the uplifts of the compromised parents. Also returns the
/// derivative with respect to `base`, `E[M * 1{base * M < 1}]`.
fn mixture<T: Scalar>(base: T, factors: &[(T, T)]) -> (T, T) {
    fn go<T: Scalar>(base: T, mult: T, rest: &[(T, T)]) -> (T, T) {
        let level = base * mult;
        if level >= T::one() {
            return (T::one(), T::zero());
        }
        let max_mult = rest.iter().fold(T::one(), |a, f| a * f.1);
        if level * max_mult <= T::one() {
            // no branch reaches the cap: the expectation factorizes
            let e = rest.iter().fold(T::one(), |a, &(q, u)| a * (T::one() - q + q * u));
            return (level * e, mult * e);
        }
        let (q, u) = rest[0];
        let (v0, d0) = go(base, mult, &rest[1..]);
        let (v1, d1) = go(base, mult * u, &rest[1..]);
        let r = T::one() - q;
        (r * v0 + q * v1, r * d0 + q * d1)
    }
    go(base, T::one(), factors)
}

/// ENBCDS evaluator for one GDF, with parent compromise probabilities frozen.
#[derive(Debug, Clone)]
pub struct Enbcds<'a, T> {
    gdf: &'a Gdf<T>,
    mode: CostMode,
    factors: Vec<Vec<(T, T)>>,
    zero_cost: T,
    fd_step: T,
}

impl<'a, T: Scalar> Enbcds<'a, T> {
    /// Evaluator ignoring dependencies.
    pub fn new(gdf: &'a Gdf<T>) -> Self {
        Self::from_parts(gdf, vec![Vec::new(); gdf.attacks.len()], CostMode::Additive)
    }

    /// Evaluator for the portfolio's copy of `id`, with parents at the context's spends.
    pub fn in_context(id: &str, ctx: &Context<'a, T>) -> Result<Self, EvalError> {
        let p = ctx.portfolio;
        let i = p.position(id).ok_or_else(|| EvalError::UnknownGdf(id.to_string()))?;
        let q = ctx.compromise_probabilities();
        Ok(Self::from_parts(
            &p.gdfs[i],
            parent_factors(p, i, &q),
            CostMode::Additive,
        ))
    }

    /// Evaluators for every GDF of the context's portfolio, in portfolio order.
    pub fn all_in_context(ctx: &Context<'a, T>) -> Vec<Self> {
        let p = ctx.portfolio;
        let q = ctx.compromise_probabilities();
        (0..p.gdfs.len())
            .map(|i| Self::from_parts(&p.gdfs[i], parent_factors(p, i, &q), CostMode::Additive))
            .collect()
    }

    /// Evaluator for `x` with optional context. With a context, `x.id` must be in it.
    pub fn for_gdf(x: &'a Gdf<T>, ctx: Option<&Context<'_, T>>) -> Result<Self, EvalError> {
        match ctx {
            None => Ok(Self::new(x)),
            Some(ctx) => {
                let p = ctx.portfolio;
                let i = p.position(&x.id).ok_or_else(|| EvalError::UnknownGdf(x.id.clone()))?;
                let q = ctx.compromise_probabilities();
                Ok(Self::from_parts(x, parent_factors(p, i, &q), CostMode::Additive))
            }
        }
    }

    fn from_parts(gdf: &'a Gdf<T>, factors: Vec<Vec<(T, T)>>, mode: CostMode) -> Self {
        let mut e = Self {
            gdf,
            mode,
            factors,
            zero_cost: T::zero(),
            fd_step: T::of(1e-6),
        };
        e.zero_cost = e.cyber_cost(T::zero());
        if e.zero_cost > T::zero() {
            e.fd_step = T::of(1e-6) * e.zero_cost;
        }
        e
    }

    pub fn with_mode(self, mode: CostMode) -> Self {
        Self::from_parts(self.gdf, self.factors, mode)
    }

    pub fn gdf(&self) -> &'a Gdf<T> {
        self.gdf
    }

    pub fn mode(&self) -> CostMode {
        self.mode
    }

    /// `f(0)`: expected attack cost with no defensive spend.
    pub fn zero_spend_cost(&self) -> T {
        self.zero_cost
    }

    /// True when ENBCDS is known to be concave in the spend: additive mode and
    /// no active dependency uplift.
    pub fn is_concave(&self) -> bool {
        self.mode == CostMode::Additive && self.factors.iter().all(Vec::is_empty)
    }

    /// Effective success probability of attack `j` (by position) at spend `s`.
    pub fn effective_prob(&self, j: usize, s: T) -> Probability<T> {
        Probability::clamped(self.prob_and_slope(j, s).0)
    }

    fn prob_and_slope(&self, j: usize, s: T) -> (T, T) {
        let a = &self.gdf.attacks[j];
        let g = a.breach.multiplier(s, a.baseline_prob);
        let base = a.baseline_prob * g;
        let (p, dp_dbase) = if self.factors[j].is_empty() {
            (base, T::one())
        } else {
            mixture(base, &self.factors[j])
        };
        if dp_dbase == T::zero() {
            return (p, T::zero());
        }
        let dg = a.breach.slope(s, a.baseline_prob, self.fd_step);
        (p, dp_dbase * a.baseline_prob * dg)
    }

    /// `f(s)`.
    pub fn cyber_cost(&self, s: T) -> T {
        let attacks = &self.gdf.attacks;
        match self.mode {
            CostMode::Additive => {
                s + (0..attacks.len())
                    .map(|j| self.prob_and_slope(j, s).0 * attacks[j].loss)
                    .fold(T::zero(), |a, b| a + b)
            }
            CostMode::Literal => (0..attacks.len())
                .map(|j| self.prob_and_slope(j, s).0 * (attacks[j].loss + s))
                .fold(T::zero(), |a, b| a + b),
        }
    }

    /// Loss part of `f(s)`: `sum_j P_s(x_j) L_j`.
    pub fn expected_attack_loss(&self, s: T) -> T {
        let attacks = &self.gdf.attacks;
        (0..attacks.len())
            .map(|j| self.prob_and_slope(j, s).0 * attacks[j].loss)
            .fold(T::zero(), |a, b| a + b)
    }

    /// `ENBCDS(s)`.
    pub fn value(&self, s: T) -> T {
        self.gdf.net_static_value() - self.cyber_cost(s)
    }

    /// `d ENBCDS / ds`.
    pub fn marginal(&self, s: T) -> T {
        let attacks = &self.gdf.attacks;
        match self.mode {
            CostMode::Additive => {
                -T::one()
                    - (0..attacks.len())
                        .map(|j| self.prob_and_slope(j, s).1 * attacks[j].loss)
                        .fold(T::zero(), |a, b| a + b)
            }
            CostMode::Literal => -(0..attacks.len())
                .map(|j| {
                    let (p, dp) = self.prob_and_slope(j, s);
                    dp * (attacks[j].loss + s) + p
                })
                .fold(T::zero(), |a, b| a + b),
        }
    }

    /// Uniformly sampled curve on `[0, s_max]` (default `s_max = f(0)`) with its peak.
    pub fn curve(&self, s_max: Option<T>, samples: usize) -> Result<EnbcdsCurve<T>, EvalError> {
        let s_max = s_max.unwrap_or(self.zero_cost);
        if samples < 2 || !(s_max.is_finite() && s_max > T::zero()) {
            return Err(EvalError::DegenerateRange {
                s_max: s_max.to_f64_lossless(),
                samples,
            });
        }
        let last = samples - 1;
        let step_of = |i: usize| {
            if i == last {
                s_max
            } else {
                s_max * T::of(i as f64) / T::of(last as f64)
            }
        };
        let points: Vec<(T, T)> = (0..samples)
            .map(|i| {
                let s = step_of(i);
                (s, self.value(s))
            })
            .collect();
        let upper = s_max.min(self.zero_cost);
        let (mut s_star, mut peak) = crate::optimize::peak_on(self, upper);
        for &(s, v) in &points {
            if v > peak {
                s_star = s;
                peak = v;
            }
        }
        Ok(EnbcdsCurve {
            gdf: self.gdf.id.clone(),
            samples: points,
            s_star,
            peak_value: peak,
        })
    }
}

/// Sampled ENBCDS curve and its maximum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnbcdsCurve<T> {
    pub gdf: String,
    /// `(spend, ENBCDS)` pairs, strictly increasing in spend.
    pub samples: Vec<(T, T)>,
    pub s_star: T,
    pub peak_value: T,
}

fn attack_position<T: Scalar>(x: &Gdf<T>, attack: &str) -> Result<usize, EvalError> {
    x.attack_index(attack).ok_or_else(|| EvalError::UnknownAttack {
        gdf: x.id.clone(),
        attack: attack.to_string(),
    })
}

/// `f(s)` for `x`, with dependency effects when a context is given.
pub fn expected_cyber_cost<T: Scalar>(x: &Gdf<T>, s: T, ctx: Option<&Context<'_, T>>) -> Result<Money<T>, EvalError> {
    check_spend(s)?;
    let f = Enbcds::for_gdf(x, ctx)?.cyber_cost(s);
    Ok(Money::new(f).unwrap_or_else(|_| Money::zero()))
}

/// Expected net benefit of `x` at spend `s` (identical to ENBCDS at `s`).
pub fn enb<T: Scalar>(x: &Gdf<T>, s: T, ctx: Option<&Context<'_, T>>) -> Result<T, EvalError> {
    check_spend(s)?;
    Ok(Enbcds::for_gdf(x, ctx)?.value(s))
}

pub fn enbcds_curve<T: Scalar>(
    x: &Gdf<T>,
    s_max: Option<T>,
    samples: usize,
    ctx: Option<&Context<'_, T>>,
) -> Result<EnbcdsCurve<T>, EvalError> {
    Enbcds::for_gdf(x, ctx)?.curve(s_max, samples)
}

pub fn effective_prob<T: Scalar>(
    x: &Gdf<T>,
    attack: &str,
    s: T,
    ctx: Option<&Context<'_, T>>,
) -> Result<Probability<T>, EvalError> {
    check_spend(s)?;
    let j = attack_position(x, attack)?;
    Ok(Enbcds::for_gdf(x, ctx)?.effective_prob(j, s))
}
