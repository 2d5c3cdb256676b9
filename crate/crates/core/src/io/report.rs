//! Portfolio comparison: actual versus optimal spend, drop decisions and
//! budget moves, as a plain-text table or JSON.

use std::fmt::Write as _;

use serde::Serialize;

use crate::enbcds::{Context, Enbcds, SpendVector};
use crate::error::EvalError;
use crate::model::ValidPortfolio;
use crate::optimize::{allocate_with, optimal_spend_with_mode, AllocationOptions, AllocationResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// Non-mandatory and negative at every spend.
    DoNotDeploy,
    /// Worth deploying on its own, but not under this budget.
    DroppedForBudget,
    /// Mandatory with a negative best value: fund only to cut the loss.
    MandatoryLoss,
    OverFunded,
    UnderFunded,
    AtOptimum,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Self::DoNotDeploy => "do not deploy",
            Self::DroppedForBudget => "drop (budget)",
            Self::MandatoryLoss => "mandatory, net loss",
            Self::OverFunded => "over-funded",
            Self::UnderFunded => "under-funded",
            Self::AtOptimum => "at optimum",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GdfRow {
    pub id: String,
    pub name: String,
    pub mandatory: bool,
    pub actual_spend: f64,
    pub enbcds_at_actual: f64,
    pub s_star: f64,
    pub enbcds_at_s_star: f64,
    pub allocated_spend: f64,
    /// `None` when the allocation drops the GDF.
    pub enbcds_at_allocated: Option<f64>,
    pub status: Status,
    pub recommendation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transfer {
    /// `None` for budget not spent today.
    pub from: Option<String>,
    pub to: Option<String>,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Analysis {
    pub budget: f64,
    pub total_actual: f64,
    /// Sum of ENBCDS at actual spends (every GDF deployed).
    pub objective_at_actual: f64,
    pub rows: Vec<GdfRow>,
    pub transfers: Vec<Transfer>,
    pub allocation: AllocationResult<f64>,
}

/// Spends closer than this fraction of the larger one count as equal.
const SAME_SPEND: f64 = 1e-3;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= SAME_SPEND * a.abs().max(b.abs()).max(1.0)
}

pub fn analyze(p: &ValidPortfolio<f64>, opts: &AllocationOptions<f64>) -> Result<Analysis, EvalError> {
    let actual = SpendVector::actual(p);
    let ctx = Context::new(p, &actual);
    let alloc = allocate_with(p, opts)?;
    let mut rows = Vec::with_capacity(p.gdfs.len());
    for g in &p.gdfs {
        let e = Enbcds::in_context(&g.id, &ctx)?.with_mode(opts.mode);
        let s_a = actual.get(&g.id);
        let opt = optimal_spend_with_mode(g, Some(&ctx), opts.mode)?;
        let dropped = alloc.dropped.contains(&g.id);
        let s_alloc = alloc.spends.get(&g.id);
        let status = if !g.mandatory && opt.value < 0.0 {
            Status::DoNotDeploy
        } else if dropped {
            Status::DroppedForBudget
        } else if g.mandatory && opt.value < 0.0 {
            Status::MandatoryLoss
        } else if close(s_alloc, s_a) {
            Status::AtOptimum
        } else if s_alloc < s_a {
            Status::OverFunded
        } else {
            Status::UnderFunded
        };
        let recommendation = match status {
            Status::DoNotDeploy => "remove; no spend makes it pay".to_string(),
            Status::DroppedForBudget => "remove under this budget".to_string(),
            _ if close(s_alloc, s_a) => "keep spend".to_string(),
            _ if s_alloc < s_a => format!("cut spend by {}", money(s_a - s_alloc)),
            _ => format!("raise spend by {}", money(s_alloc - s_a)),
        };
        rows.push(GdfRow {
            id: g.id.clone(),
            name: g.name.clone(),
            mandatory: g.mandatory,
            actual_spend: s_a,
            enbcds_at_actual: e.value(s_a),
            s_star: opt.s_star,
            enbcds_at_s_star: opt.value,
            allocated_spend: s_alloc,
            enbcds_at_allocated: alloc.values.get(&g.id).copied(),
            status,
            recommendation,
        });
    }
    let transfers = transfers(&rows, alloc.budget);
    Ok(Analysis {
        budget: alloc.budget,
        total_actual: actual.total(),
        objective_at_actual: rows.iter().map(|r| r.enbcds_at_actual).fold(0.0, |a, b| a + b),
        rows,
        transfers,
        allocation: alloc,
    })
}

/// Greedy pairing of surpluses (actual above allocated) with deficits,
/// largest first; unspent budget counts as a surplus.
fn transfers(rows: &[GdfRow], budget: f64) -> Vec<Transfer> {
    let by_size = |v: &mut Vec<(Option<String>, f64)>| {
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    };
    let mut give: Vec<(Option<String>, f64)> = rows
        .iter()
        .filter(|r| !close(r.allocated_spend, r.actual_spend) && r.actual_spend > r.allocated_spend)
        .map(|r| (Some(r.id.clone()), r.actual_spend - r.allocated_spend))
        .collect();
    let mut take: Vec<(Option<String>, f64)> = rows
        .iter()
        .filter(|r| !close(r.allocated_spend, r.actual_spend) && r.allocated_spend > r.actual_spend)
        .map(|r| (Some(r.id.clone()), r.allocated_spend - r.actual_spend))
        .collect();
    let total_actual: f64 = rows.iter().map(|r| r.actual_spend).fold(0.0, |a, b| a + b);
    if budget > total_actual && !close(budget, total_actual) {
        give.push((None, budget - total_actual));
    }
    by_size(&mut give);
    by_size(&mut take);
    let mut out = Vec::new();
    let (mut gi, mut ti) = (0, 0);
    while gi < give.len() && ti < take.len() {
        let amount = give[gi].1.min(take[ti].1);
        if amount > 0.0 {
            out.push(Transfer {
                from: give[gi].0.clone(),
                to: take[ti].0.clone(),
                amount,
            });
        }
        give[gi].1 -= amount;
        take[ti].1 -= amount;
        if give[gi].1 <= SAME_SPEND {
            gi += 1;
        }
        if take[ti].1 <= SAME_SPEND {
            ti += 1;
        }
    }
    // spending released and not needed elsewhere
    for (from, left) in &give[gi.min(give.len())..] {
        if from.is_some() && *left > SAME_SPEND && !close(*left, 0.0) {
            out.push(Transfer {
                from: from.clone(),
                to: None,
                amount: *left,
            });
        }
    }
    out
}

fn money(v: f64) -> String {
    format!("{v:.2}")
}

const COLUMNS: [&str; 10] = [
    "gdf",
    "mandatory",
    "s^A",
    "ENBCDS(s^A)",
    "s*",
    "ENBCDS(s*)",
    "allocated",
    "ENBCDS(alloc)",
    "status",
    "recommendation",
];

/// Human-readable comparison table. Output depends only on its inputs.
pub fn emit_report(p: &ValidPortfolio<f64>, a: &Analysis) -> String {
    let mut table: Vec<Vec<String>> = vec![COLUMNS.iter().map(|c| c.to_string()).collect()];
    for r in &a.rows {
        table.push(vec![
            r.id.clone(),
            if r.mandatory { "yes" } else { "no" }.to_string(),
            money(r.actual_spend),
            money(r.enbcds_at_actual),
            money(r.s_star),
            money(r.enbcds_at_s_star),
            money(r.allocated_spend),
            r.enbcds_at_allocated.map_or_else(|| "-".to_string(), money),
            r.status.label().to_string(),
            r.recommendation.clone(),
        ]);
    }
    let widths: Vec<usize> = (0..COLUMNS.len())
        .map(|c| table.iter().map(|row| row[c].chars().count()).max().unwrap_or(0))
        .collect();

    let mut out = String::new();
    let _ = writeln!(out, "ENBCDS comparison ({} GDFs)", p.gdfs.len());
    let _ = writeln!(
        out,
        "budget {}  actual total {}  allocated total {}",
        money(a.budget),
        money(a.total_actual),
        money(a.allocation.budget_used)
    );
    let _ = writeln!(
        out,
        "total ENBCDS at actual spend {}  after allocation {}",
        money(a.objective_at_actual),
        money(a.allocation.objective)
    );
    out.push('\n');
    for (i, row) in table.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (cell, w))| {
                if c == 0 || c >= 8 || i == 0 {
                    format!("{cell:<w$}")
                } else {
                    format!("{cell:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            let _ = writeln!(out, "{}", rule.join("  "));
        }
    }
    if !a.transfers.is_empty() {
        out.push_str("\nReallocation\n");
        for t in &a.transfers {
            let from = t.from.as_deref().unwrap_or("unspent budget");
            let line = match &t.to {
                Some(to) => format!("  move {} from {from} to {to}", money(t.amount)),
                None => format!("  release {} from {from}", money(t.amount)),
            };
            let _ = writeln!(out, "{line}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_portfolio, AttackType, BreachModel, Gdf, Portfolio};

    #[test]
    fn empty_portfolio_header_only() {
        let p = validate_portfolio(Portfolio::new(0.0)).unwrap();
        let a = analyze(&p, &AllocationOptions::default()).unwrap();
        let text = emit_report(&p, &a);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines.iter().any(|l| l.starts_with("gdf")));
        assert!(!text.contains("Reallocation"));
        assert_eq!(lines.len(), 6);
    }

    #[test]
    fn negative_gdf_flagged() {
        let mut z = Gdf::new("z", 1.0);
        z.dir_costs = 10.0;
        z.actual_spend = Some(5.0);
        let mut x = Gdf::new("x", 1e5);
        x.attacks.push(AttackType {
            id: "a".into(),
            description: String::new(),
            baseline_prob: 0.5,
            loss: 2e4,
            breach: BreachModel::GordonLoebI { alpha: 0.01, beta: 1.0 },
        });
        let p = validate_portfolio(Portfolio::new(5.0).with_gdf(x).with_gdf(z)).unwrap();
        let a = analyze(&p, &AllocationOptions::default()).unwrap();
        assert_eq!(a.rows[1].status, Status::DoNotDeploy);
        assert_eq!(a.rows[0].status, Status::UnderFunded);
        assert_eq!(
            a.transfers,
            vec![Transfer {
                from: Some("z".into()),
                to: Some("x".into()),
                amount: 5.0
            }]
        );
        let r1 = emit_report(&p, &a);
        assert_eq!(
            r1,
            emit_report(&p, &analyze(&p, &AllocationOptions::default()).unwrap())
        );
        assert!(r1.contains("do not deploy"));
        assert!(r1.contains("move 5.00 from z to x"));
    }
}
