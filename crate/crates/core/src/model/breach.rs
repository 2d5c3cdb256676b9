//! Breach-probability models: how defensive spend scales an attack's success probability.

use crate::scalar::Scalar;

/// One `(spend, multiplier)` point of a tabulated breach model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableKnot<T> {
    pub spend: T,
    pub multiplier: T,
}

/// Spend-to-multiplier family `g(s)`.
///
/// The effective success probability of an attack is `baseline * g(s)`, with
/// `g(0) = 1`, `g` non-increasing and strictly positive. The three parametric
/// families are convex in `s`; tables are validated for convexity.
#[derive(Debug, Clone, PartialEq)]
pub enum BreachModel<T> {
    /// `g(s) = (alpha * s + 1)^(-beta)`.
    GordonLoebI { alpha: T, beta: T },
    /// `g(s) = v^(alpha * s)` where `v` is the attack's baseline probability.
    GordonLoebII { alpha: T },
    /// `g(s) = exp(-kappa * s)`.
    Exponential { kappa: T },
    /// Piecewise-linear interpolation through the knots, constant past the last one.
    Table(Vec<TableKnot<T>>),
}

impl<T: Scalar> BreachModel<T> {
    /// Multiplier `g(s)` for an attack with the given baseline probability.
    pub fn multiplier(&self, spend: T, baseline: T) -> T {
        match self {
            Self::GordonLoebI { alpha, beta } => (*alpha * spend + T::one()).powf(-*beta),
            Self::GordonLoebII { alpha } => (*alpha * spend * baseline.ln()).exp(),
            Self::Exponential { kappa } => (-*kappa * spend).exp(),
            Self::Table(knots) => interpolate(knots, spend),
        }
    }

    /// Derivative `g'(s)`.
    ///
    /// Analytic for the parametric families. Tables use a central difference
    /// with half-width `fd_step` (one-sided near zero).
    pub fn slope(&self, spend: T, baseline: T, fd_step: T) -> T {
        match self {
            Self::GordonLoebI { alpha, beta } => -*alpha * *beta * (*alpha * spend + T::one()).powf(-*beta - T::one()),
            Self::GordonLoebII { alpha } => {
                let rate = *alpha * baseline.ln();
                rate * (rate * spend).exp()
            }
            Self::Exponential { kappa } => -*kappa * (-*kappa * spend).exp(),
            Self::Table(knots) => {
                let lo = (spend - fd_step).max(T::zero());
                let hi = spend + fd_step;
                (interpolate(knots, hi) - interpolate(knots, lo)) / (hi - lo)
            }
        }
    }

    pub fn is_parametric(&self) -> bool {
        !matches!(self, Self::Table(_))
    }

    /// Re-expresses the model for spend measured in units `factor` times smaller,
    /// so that `rescaled.multiplier(factor * s) == self.multiplier(s)`.
    pub fn rescale_spend(&self, factor: T) -> Self {
        match self {
            Self::GordonLoebI { alpha, beta } => Self::GordonLoebI {
                alpha: *alpha / factor,
                beta: *beta,
            },
            Self::GordonLoebII { alpha } => Self::GordonLoebII { alpha: *alpha / factor },
            Self::Exponential { kappa } => Self::Exponential { kappa: *kappa / factor },
            Self::Table(knots) => Self::Table(
                knots
                    .iter()
                    .map(|k| TableKnot {
                        spend: k.spend * factor,
                        multiplier: k.multiplier,
                    })
                    .collect(),
            ),
        }
    }

    pub fn cast<U: Scalar>(&self) -> BreachModel<U> {
        let c = |v: T| U::of(v.to_f64_lossless());
        match self {
            Self::GordonLoebI { alpha, beta } => BreachModel::GordonLoebI {
                alpha: c(*alpha),
                beta: c(*beta),
            },
            Self::GordonLoebII { alpha } => BreachModel::GordonLoebII { alpha: c(*alpha) },
            Self::Exponential { kappa } => BreachModel::Exponential { kappa: c(*kappa) },
            Self::Table(knots) => BreachModel::Table(
                knots
                    .iter()
                    .map(|k| TableKnot {
                        spend: c(k.spend),
                        multiplier: c(k.multiplier),
                    })
                    .collect(),
            ),
        }
    }

    /// Checks the family parameters. `baseline` is needed by `GordonLoebII`.
    pub(crate) fn check(&self, baseline: T) -> Result<(), BreachProblem> {
        let positive = |v: T| v.is_finite() && v > T::zero();
        match self {
            Self::GordonLoebI { alpha, beta } => {
                if !positive(*alpha) {
                    return Err(BreachProblem::Parameter("alpha must be finite and > 0"));
                }
                if !(beta.is_finite() && *beta >= T::one()) {
                    return Err(BreachProblem::Parameter("beta must be finite and >= 1"));
                }
            }
            Self::GordonLoebII { alpha } => {
                if !positive(*alpha) {
                    return Err(BreachProblem::Parameter("alpha must be finite and > 0"));
                }
                if !(baseline > T::zero() && baseline < T::one()) {
                    return Err(BreachProblem::Parameter(
                        "gordon_loeb_ii needs a baseline probability strictly between 0 and 1",
                    ));
                }
            }
            Self::Exponential { kappa } => {
                if !positive(*kappa) {
                    return Err(BreachProblem::Parameter("kappa must be finite and > 0"));
                }
            }
            Self::Table(knots) => check_table(knots)?,
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum BreachProblem {
    Parameter(&'static str),
    Table(String),
    NonConvex(String),
}

fn check_table<T: Scalar>(knots: &[TableKnot<T>]) -> Result<(), BreachProblem> {
    let first = knots
        .first()
        .ok_or_else(|| BreachProblem::Table("table needs at least one knot".into()))?;
    if first.spend != T::zero() || first.multiplier != T::one() {
        return Err(BreachProblem::Table(
            "first knot must be (0, 1) so that zero spend leaves the baseline unchanged".into(),
        ));
    }
    for (i, k) in knots.iter().enumerate() {
        if !k.spend.is_finite() || !k.multiplier.is_finite() {
            return Err(BreachProblem::Table(format!("knot {i} is not finite")));
        }
        if !(k.multiplier > T::zero() && k.multiplier <= T::one()) {
            return Err(BreachProblem::Table(format!(
                "knot {i} multiplier {} outside (0, 1]",
                k.multiplier
            )));
        }
    }
    for (i, w) in knots.windows(2).enumerate() {
        if w[1].spend <= w[0].spend {
            return Err(BreachProblem::Table(format!(
                "knot spends must be strictly increasing (knot {})",
                i + 1
            )));
        }
        if w[1].multiplier > w[0].multiplier {
            return Err(BreachProblem::Table(format!(
                "knot multipliers must be non-increasing (knot {})",
                i + 1
            )));
        }
    }
    let slopes: Vec<T> = knots
        .windows(2)
        .map(|w| (w[1].multiplier - w[0].multiplier) / (w[1].spend - w[0].spend))
        .collect();
    for (i, w) in slopes.windows(2).enumerate() {
        let tol = T::of(1e-12) * w[0].abs().max(w[1].abs());
        if w[1] < w[0] - tol {
            return Err(BreachProblem::NonConvex(format!(
                "slope decreases from {} to {} at knot {}",
                w[0],
                w[1],
                i + 1
            )));
        }
    }
    Ok(())
}

fn interpolate<T: Scalar>(knots: &[TableKnot<T>], spend: T) -> T {
    let Some(last) = knots.last() else {
        return T::one();
    };
    if spend >= last.spend {
        return last.multiplier;
    }
    // index of the first knot strictly beyond `spend`; knots[0].spend == 0 <= spend
    let hi = knots.partition_point(|k| k.spend <= spend).max(1);
    let (a, b) = (knots[hi - 1], knots[hi]);
    a.multiplier + (b.multiplier - a.multiplier) * (spend - a.spend) / (b.spend - a.spend)
}
