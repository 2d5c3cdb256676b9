#![allow(dead_code)]

use gridcba::model::{validate_portfolio, AttackType, BreachModel, DependencyEdge, Gdf, Portfolio, ValidPortfolio};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn log_uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    10f64.powf(r.random_range(lo..hi))
}

pub fn random_breach(r: &mut ChaCha8Rng) -> BreachModel<f64> {
    match r.random_range(0..3) {
        0 => BreachModel::GordonLoebI {
            alpha: log_uniform(r, -7.0, -3.0),
            beta: r.random_range(1.0..3.0),
        },
        1 => BreachModel::GordonLoebII {
            alpha: log_uniform(r, -7.0, -3.0),
        },
        _ => BreachModel::Exponential {
            kappa: log_uniform(r, -7.0, -3.0),
        },
    }
}

pub fn random_attack(r: &mut ChaCha8Rng, id: String, breach: BreachModel<f64>) -> AttackType<f64> {
    AttackType {
        id,
        description: String::new(),
        baseline_prob: r.random_range(0.01..0.99),
        loss: log_uniform(r, 3.0, 7.0),
        breach,
    }
}

/// GDF with 1 to 4 parametric attacks and benefits of the same order as its risks.
pub fn random_gdf(r: &mut ChaCha8Rng, id: &str) -> Gdf<f64> {
    let mut g = Gdf::new(id, 0.0);
    for j in 0..r.random_range(1..=4) {
        let b = random_breach(r);
        g.attacks.push(random_attack(r, format!("a{j}"), b));
    }
    let risk = g.baseline_expected_loss();
    g.ben = risk * r.random_range(0.2..2.0);
    g.dir_costs = g.ben * r.random_range(0.0..0.5);
    if r.random_bool(0.5) {
        g.adverse.push(gridcba::model::AdverseEvent {
            id: "k".into(),
            prob: r.random_range(0.0..0.3),
            cost: g.ben * r.random_range(0.0..0.5),
        });
    }
    g
}

pub fn single_gl1(r: &mut ChaCha8Rng) -> Gdf<f64> {
    let mut g = Gdf::new("x", 0.0);
    let b = BreachModel::GordonLoebI {
        alpha: log_uniform(r, -7.0, -3.0),
        beta: r.random_range(1.0..3.0),
    };
    g.attacks.push(random_attack(r, "a".into(), b));
    g.ben = g.baseline_expected_loss() * r.random_range(0.2..2.0);
    g
}

/// Portfolio of `n` random GDFs with a budget between nothing and a bit
/// more than the sum of standalone optima.
pub fn random_portfolio(r: &mut ChaCha8Rng, n: usize) -> Portfolio<f64> {
    let mut p = Portfolio::new(0.0);
    for i in 0..n {
        let mut g = random_gdf(r, &format!("g{i}"));
        g.mandatory = r.random_bool(0.2);
        p.gdfs.push(g);
    }
    let caps: f64 = p
        .gdfs
        .iter()
        .map(|g| gridcba::optimize::optimal_spend(g, None).unwrap().s_star)
        .sum();
    p.budget = caps * r.random_range(0.0..1.2);
    p
}

/// Adds random forward edges (so the graph stays acyclic) with uplifts in (1, 5].
pub fn add_edges(r: &mut ChaCha8Rng, p: &mut Portfolio<f64>, density: f64) {
    let n = p.gdfs.len();
    for from in 0..n {
        for to in from + 1..n {
            if !r.random_bool(density) {
                continue;
            }
            let mut e = DependencyEdge {
                from: p.gdfs[from].id.clone(),
                to: p.gdfs[to].id.clone(),
                uplift: Default::default(),
            };
            for a in &p.gdfs[to].attacks {
                if r.random_bool(0.7) {
                    e.uplift.insert(a.id.clone(), r.random_range(1.0..5.0));
                }
            }
            p.edges.push(e);
        }
    }
}

pub fn valid(p: Portfolio<f64>) -> ValidPortfolio<f64> {
    validate_portfolio(p).expect("generated portfolios are valid")
}
