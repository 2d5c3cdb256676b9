use serde::Serialize;

use crate::enbcds::{Context, CostMode, Enbcds};
use crate::error::EvalError;
use crate::model::{BreachModel, Gdf, Money};
use crate::scalar::Scalar;

use super::search::{golden_section_max, scanned_max};

/// Relative bracket width at which the per-GDF search stops.
const REL_TOL: f64 = 1e-10;
const SCAN_POINTS: usize = 64;

/// Spend that maximizes ENBCDS for one GDF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpendOptimum<T> {
    pub s_star: T,
    pub value: T,
    /// Stationary point from the closed form, when the GDF has a single
    /// parametric attack and no dependency effects.
    pub closed_form: Option<T>,
}

/// Maximizer of ENBCDS on `[0, upper]`.
///
/// Concave evaluators use golden-section search directly on the cyber cost;
/// anything else is scanned first so that a secondary peak is not missed.
pub(crate) fn peak_on<T: Scalar>(eval: &Enbcds<'_, T>, upper: T) -> (T, T) {
    let base = eval.gdf().net_static_value();
    if !(upper > T::zero()) {
        return (T::zero(), eval.value(T::zero()));
    }
    let tol = T::of(REL_TOL) * upper;
    let neg_cost = |s: T| -eval.cyber_cost(s);
    let (s, v) = if eval.is_concave() {
        golden_section_max(neg_cost, T::zero(), upper, tol, 400)
    } else {
        scanned_max(neg_cost, T::zero(), upper, tol, SCAN_POINTS)
    };
    (s, base + v)
}

/// Optimum of an already-configured evaluator, searched on `[0, f(0)]`.
pub fn optimum<T: Scalar>(eval: &Enbcds<'_, T>) -> SpendOptimum<T> {
    let (s_star, value) = peak_on(eval, eval.zero_spend_cost());
    let closed_form = if eval.is_concave() {
        closed_form_spend(eval.gdf())
    } else {
        None
    };
    SpendOptimum {
        s_star,
        value,
        closed_form,
    }
}

/// `s*` and `ENBCDS(s*)` for `x`, optionally with its dependency context.
pub fn optimal_spend<T: Scalar>(x: &Gdf<T>, ctx: Option<&Context<'_, T>>) -> Result<SpendOptimum<T>, EvalError> {
    Ok(optimum(&Enbcds::for_gdf(x, ctx)?))
}

pub fn optimal_spend_with_mode<T: Scalar>(
    x: &Gdf<T>,
    ctx: Option<&Context<'_, T>>,
    mode: CostMode,
) -> Result<SpendOptimum<T>, EvalError> {
    Ok(optimum(&Enbcds::for_gdf(x, ctx)?.with_mode(mode)))
}

/// Spend minimizing the expected loss of a mandatory GDF, even when its best
/// net benefit is negative. Same argmax as [`optimal_spend`].
pub fn mandatory_min_loss<T: Scalar>(x: &Gdf<T>, ctx: Option<&Context<'_, T>>) -> Result<Money<T>, EvalError> {
    if !x.mandatory {
        return Err(EvalError::NotMandatory(x.id.clone()));
    }
    let s = optimal_spend(x, ctx)?.s_star;
    Ok(Money::new(s).unwrap_or_else(|_| Money::zero()))
}

/// Stationary point of `s + p L g(s)` for a GDF with one parametric attack.
///
/// - Gordon-Loeb I: `1 = p L alpha beta (alpha s + 1)^(-beta-1)`
/// - Gordon-Loeb II: `1 = -L v alpha ln(v) v^(alpha s)`
/// - Exponential: `1 = p L kappa exp(-kappa s)`
///
/// Clamped at zero when even the first unit of spend does not pay.
pub fn closed_form_spend<T: Scalar>(x: &Gdf<T>) -> Option<T> {
    let [a] = x.attacks.as_slice() else {
        return None;
    };
    let (p, l) = (a.baseline_prob, a.loss);
    let s = match a.breach {
        BreachModel::GordonLoebI { alpha, beta } => {
            let k = p * l * alpha * beta;
            if k <= T::one() {
                T::zero()
            } else {
                (k.powf(T::one() / (beta + T::one())) - T::one()) / alpha
            }
        }
        BreachModel::GordonLoebII { alpha } => {
            let k = -l * p * alpha * p.ln();
            if k <= T::one() {
                T::zero()
            } else {
                k.ln() / (alpha * -p.ln())
            }
        }
        BreachModel::Exponential { kappa } => {
            let k = p * l * kappa;
            if k <= T::one() {
                T::zero()
            } else {
                k.ln() / kappa
            }
        }
        BreachModel::Table(_) => return None,
    };
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AdverseEvent, AttackType};

    fn single(p: f64, loss: f64, breach: BreachModel<f64>) -> Gdf<f64> {
        let mut g = Gdf::new("x", 1e5);
        g.dir_costs = 1e4;
        g.attacks.push(AttackType {
            id: "a".into(),
            description: String::new(),
            baseline_prob: p,
            loss,
            breach,
        });
        g
    }

    #[test]
    fn no_attacks_optimum_is_zero() {
        let mut g = Gdf::new("x", 50.0);
        g.dir_costs = 5.0;
        g.adverse.push(AdverseEvent {
            id: "k".into(),
            prob: 0.5,
            cost: 10.0,
        });
        let o = optimal_spend(&g, None).unwrap();
        assert_eq!(o.s_star, 0.0);
        assert_eq!(o.value, 40.0);
    }

    #[test]
    fn golden_matches_gordon_loeb_i_root() {
        // p L = 10000, alpha = 0.01, beta = 1
        let g = single(0.5, 20000.0, BreachModel::GordonLoebI { alpha: 0.01, beta: 1.0 });
        let o = optimal_spend(&g, None).unwrap();
        // 1 = pL alpha beta (alpha s + 1)^-2  =>  s = (sqrt(100) - 1) / 0.01 = 900
        let root = ((10000.0f64 * 0.01).sqrt() - 1.0) / 0.01;
        assert!((root - 900.0).abs() < 1e-9);
        assert!((o.s_star - root).abs() / root < 1e-4);
        assert!((o.closed_form.unwrap() - root).abs() < 1e-9);
    }

    #[test]
    fn closed_forms_agree_with_search() {
        let cases = [
            single(0.3, 5e4, BreachModel::GordonLoebII { alpha: 2e-4 }),
            single(0.6, 8e4, BreachModel::Exponential { kappa: 1e-4 }),
            single(0.2, 1e5, BreachModel::GordonLoebI { alpha: 1e-3, beta: 2.5 }),
        ];
        for g in &cases {
            let o = optimal_spend(g, None).unwrap();
            let cf = o.closed_form.unwrap();
            assert!(cf > 0.0);
            assert!(
                (o.s_star - cf).abs() <= 1e-6 * cf,
                "{:?}: {} vs {}",
                g.attacks[0].breach,
                o.s_star,
                cf
            );
        }
    }

    #[test]
    fn unprofitable_spend_clamps_at_zero() {
        let g = single(0.01, 10.0, BreachModel::Exponential { kappa: 0.01 });
        assert_eq!(closed_form_spend(&g), Some(0.0));
        assert_eq!(optimal_spend(&g, None).unwrap().s_star, 0.0);
    }

    #[test]
    fn optimum_dominates_endpoints() {
        let g = single(0.4, 3e4, BreachModel::GordonLoebI { alpha: 5e-4, beta: 1.2 });
        let e = Enbcds::new(&g);
        let o = optimum(&e);
        assert!(o.value >= e.value(0.0));
        assert!(o.value >= e.value(e.zero_spend_cost()));
    }

    #[test]
    fn mandatory_rules() {
        let mut g = single(0.4, 3e4, BreachModel::GordonLoebI { alpha: 5e-4, beta: 1.2 });
        assert_eq!(mandatory_min_loss(&g, None), Err(EvalError::NotMandatory("x".into())));
        g.mandatory = true;
        let s = mandatory_min_loss(&g, None).unwrap().get();
        assert_eq!(s, optimal_spend(&g, None).unwrap().s_star);

        let mut flat = Gdf::new("w", 0.0);
        flat.dir_costs = 10.0;
        flat.mandatory = true;
        assert_eq!(mandatory_min_loss(&flat, None).unwrap().get(), 0.0);
    }
}
