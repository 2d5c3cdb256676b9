//! Domain vocabulary: grid digital functionalities, attacks, adverse events,
//! dependency edges and the portfolio that ties them to a defense budget.
//!
//! All monetary quantities are annualized rates in one currency. Validation
//! happens once, in [`validate_portfolio`]; downstream code only accepts a
//! [`ValidPortfolio`].
//!
//! Attack losses within a GDF are additive in expectation. Two attacks whose
//! losses describe the same outage will double-count it; scenario authors
//! should split losses so that each attack carries only its own share.

mod breach;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Deref;

pub use breach::{BreachModel, TableKnot};

use crate::scalar::Scalar;

/// Non-negative, finite amount of money.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, serde::Serialize)]
#[serde(transparent)]
pub struct Money<T>(T);

impl<T: Scalar> Money<T> {
    pub fn new(v: T) -> Result<Self, ViolationKind> {
        if !v.is_finite() {
            Err(ViolationKind::NonFinite {
                value: v.to_f64_lossless(),
            })
        } else if v < T::zero() {
            Err(ViolationKind::NegativeMoney {
                value: v.to_f64_lossless(),
            })
        } else {
            Ok(Self(v))
        }
    }

    pub fn zero() -> Self {
        Self(T::zero())
    }

    pub fn get(self) -> T {
        self.0
    }
}

/// Probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, serde::Serialize)]
#[serde(transparent)]
pub struct Probability<T>(T);

impl<T: Scalar> Probability<T> {
    pub fn new(v: T) -> Result<Self, ViolationKind> {
        if v >= T::zero() && v <= T::one() {
            Ok(Self(v))
        } else {
            Err(ViolationKind::ProbabilityOutOfRange {
                value: v.to_f64_lossless(),
            })
        }
    }

    /// Clamps into `[0, 1]`; NaN maps to 0.
    pub fn clamped(v: T) -> Self {
        if v.is_nan() {
            Self(T::zero())
        } else {
            Self(v.max(T::zero()).min(T::one()))
        }
    }

    pub fn get(self) -> T {
        self.0
    }
}

/// Attack type `j` against one GDF.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackType<T> {
    pub id: String,
    pub description: String,
    /// Success probability at zero defensive spend (threat and vulnerability combined).
    pub baseline_prob: T,
    /// Loss if the attack succeeds.
    pub loss: T,
    pub breach: BreachModel<T>,
}

/// Non-cyber adverse event exposure `k` of one GDF.
#[derive(Debug, Clone, PartialEq)]
pub struct AdverseEvent<T> {
    pub id: String,
    pub prob: T,
    pub cost: T,
}

/// Grid digital functionality.
#[derive(Debug, Clone, PartialEq)]
pub struct Gdf<T> {
    pub id: String,
    pub name: String,
    pub ben: T,
    pub dir_costs: T,
    pub attacks: Vec<AttackType<T>>,
    pub adverse: Vec<AdverseEvent<T>>,
    /// Mandatory functionalities cannot be dropped by any optimizer.
    pub mandatory: bool,
    /// Current defensive spend, reported alongside the optimum. Never a constraint.
    pub actual_spend: Option<T>,
}

impl<T: Scalar> Gdf<T> {
    /// Minimal GDF with benefits only.
    pub fn new(id: impl Into<String>, ben: T) -> Self {
        let id = id.into();
        Self {
            name: id.clone(),
            id,
            ben,
            dir_costs: T::zero(),
            attacks: Vec::new(),
            adverse: Vec::new(),
            mandatory: false,
            actual_spend: None,
        }
    }

    /// `sum_k P(x_k) * Noncyb(x_k)`.
    pub fn expected_noncyber(&self) -> T {
        self.adverse
            .iter()
            .map(|e| e.prob * e.cost)
            .fold(T::zero(), |a, b| a + b)
    }

    /// The spend-independent part of ENBCDS: benefits less direct and non-cyber costs.
    pub fn net_static_value(&self) -> T {
        self.ben - self.dir_costs - self.expected_noncyber()
    }

    /// Expected zero-spend attack loss without dependency effects.
    pub fn baseline_expected_loss(&self) -> T {
        self.attacks
            .iter()
            .map(|a| a.baseline_prob * a.loss)
            .fold(T::zero(), |a, b| a + b)
    }

    pub fn attack_index(&self, id: &str) -> Option<usize> {
        self.attacks.iter().position(|a| a.id == id)
    }

    pub fn cast<U: Scalar>(&self) -> Gdf<U> {
        let c = |v: T| U::of(v.to_f64_lossless());
        Gdf {
            id: self.id.clone(),
            name: self.name.clone(),
            ben: c(self.ben),
            dir_costs: c(self.dir_costs),
            attacks: self
                .attacks
                .iter()
                .map(|a| AttackType {
                    id: a.id.clone(),
                    description: a.description.clone(),
                    baseline_prob: c(a.baseline_prob),
                    loss: c(a.loss),
                    breach: a.breach.cast(),
                })
                .collect(),
            adverse: self
                .adverse
                .iter()
                .map(|e| AdverseEvent {
                    id: e.id.clone(),
                    prob: c(e.prob),
                    cost: c(e.cost),
                })
                .collect(),
            mandatory: self.mandatory,
            actual_spend: self.actual_spend.map(c),
        }
    }
}

/// `from` compromised makes attacks on `to` more likely.
#[derive(Debug, Clone, PartialEq)]
pub struct DependencyEdge<T> {
    pub from: String,
    pub to: String,
    /// Multiplier (>= 1) on the success probability of each listed attack of `to`
    /// when `from` has been compromised. Unlisted attacks are unaffected.
    pub uplift: BTreeMap<String, T>,
}

/// The set of GDFs under analysis, their dependencies and the shared defense budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio<T> {
    pub gdfs: Vec<Gdf<T>>,
    pub edges: Vec<DependencyEdge<T>>,
    pub budget: T,
}

impl<T: Scalar> Portfolio<T> {
    pub fn new(budget: T) -> Self {
        Self {
            gdfs: Vec::new(),
            edges: Vec::new(),
            budget,
        }
    }

    pub fn with_gdf(mut self, gdf: Gdf<T>) -> Self {
        self.gdfs.push(gdf);
        self
    }

    pub fn cast<U: Scalar>(&self) -> Portfolio<U> {
        Portfolio {
            gdfs: self.gdfs.iter().map(Gdf::cast).collect(),
            edges: self
                .edges
                .iter()
                .map(|e| DependencyEdge {
                    from: e.from.clone(),
                    to: e.to.clone(),
                    uplift: e
                        .uplift
                        .iter()
                        .map(|(k, v)| (k.clone(), U::of(v.to_f64_lossless())))
                        .collect(),
                })
                .collect(),
            budget: U::of(self.budget.to_f64_lossless()),
        }
    }
}

/// What is wrong with one entity.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ViolationKind {
    #[error("dependency cycle among {members:?}")]
    CyclicDependency { members: Vec<String> },
    #[error("duplicate id `{id}`")]
    DuplicateId { id: String },
    #[error("probability {value} outside [0, 1]")]
    ProbabilityOutOfRange { value: f64 },
    #[error("negative amount {value}")]
    NegativeMoney { value: f64 },
    #[error("non-finite value {value}")]
    NonFinite { value: f64 },
    #[error("breach table is not convex: {reason}")]
    NonConvexTable { reason: String },
    #[error("invalid breach model: {reason}")]
    InvalidBreachModel { reason: String },
    #[error("unknown gdf `{id}`")]
    UnknownGdf { id: String },
    #[error("unknown attack `{id}` on the target gdf")]
    UnknownAttack { id: String },
    #[error("edge from a gdf to itself")]
    SelfDependency,
    #[error("uplift {value} must be finite and >= 1")]
    UpliftBelowOne { value: f64 },
}

/// A violated invariant together with the path of the offending entity.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub entity: String,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.kind)
    }
}

/// Every violation found in a portfolio.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

/// A portfolio whose invariants have been checked, with the dependency graph indexed.
#[derive(Debug, Clone)]
pub struct ValidPortfolio<T> {
    inner: Portfolio<T>,
    index: BTreeMap<String, usize>,
    /// Incoming edge indices per GDF.
    incoming: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

impl<T> PartialEq for ValidPortfolio<T>
where
    Portfolio<T>: PartialEq,
{
    fn eq(&self, other: &Self) -> bool {
        self.inner == other.inner
    }
}

impl<T> Deref for ValidPortfolio<T> {
    type Target = Portfolio<T>;

    fn deref(&self) -> &Portfolio<T> {
        &self.inner
    }
}

impl<T: Scalar> ValidPortfolio<T> {
    pub fn portfolio(&self) -> &Portfolio<T> {
        &self.inner
    }

    pub fn into_inner(self) -> Portfolio<T> {
        self.inner
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn gdf(&self, id: &str) -> Option<&Gdf<T>> {
        self.position(id).map(|i| &self.inner.gdfs[i])
    }

    /// Edges pointing into GDF `i`.
    pub fn incoming(&self, i: usize) -> impl Iterator<Item = &DependencyEdge<T>> {
        self.incoming[i].iter().map(move |&e| &self.inner.edges[e])
    }

    /// GDF positions ordered so that every edge goes from an earlier to a later one.
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn has_edges(&self) -> bool {
        !self.inner.edges.is_empty()
    }

    /// Same portfolio with a different budget.
    pub fn with_budget(&self, budget: T) -> Result<Self, ValidationReport> {
        let mut p = self.inner.clone();
        p.budget = budget;
        validate_portfolio(p)
    }

    /// Sub-portfolio keeping only the listed GDFs (and edges between them).
    pub fn restricted_to(&self, keep: &BTreeSet<String>) -> Self {
        let mut p = self.inner.clone();
        p.gdfs.retain(|g| keep.contains(&g.id));
        p.edges.retain(|e| keep.contains(&e.from) && keep.contains(&e.to));
        validate_portfolio(p).expect("a subset of a valid portfolio is valid")
    }
}

struct Checker {
    out: Vec<Violation>,
}

impl Checker {
    fn push(&mut self, entity: impl Into<String>, kind: ViolationKind) {
        self.out.push(Violation {
            entity: entity.into(),
            kind,
        });
    }

    fn money<T: Scalar>(&mut self, entity: String, v: T) {
        if let Err(kind) = Money::new(v) {
            self.push(entity, kind);
        }
    }

    fn prob<T: Scalar>(&mut self, entity: String, v: T) {
        if let Err(kind) = Probability::new(v) {
            self.push(entity, kind);
        }
    }
}

/// Checks every invariant of the portfolio and indexes its dependency graph.
///
/// All violations are collected; the error lists each offending entity.
pub fn validate_portfolio<T: Scalar>(p: Portfolio<T>) -> Result<ValidPortfolio<T>, ValidationReport> {
    let mut c = Checker { out: Vec::new() };
    c.money("budget".into(), p.budget);

    let mut index = BTreeMap::new();
    for (i, g) in p.gdfs.iter().enumerate() {
        let path = format!("gdf[{}]", g.id);
        if index.insert(g.id.clone(), i).is_some() {
            c.push(path.clone(), ViolationKind::DuplicateId { id: g.id.clone() });
        }
        c.money(format!("{path}.ben"), g.ben);
        c.money(format!("{path}.dir_costs"), g.dir_costs);
        if let Some(s) = g.actual_spend {
            c.money(format!("{path}.actual_spend"), s);
        }
        let mut seen = BTreeSet::new();
        for a in &g.attacks {
            let apath = format!("{path}.attack[{}]", a.id);
            if !seen.insert(a.id.as_str()) {
                c.push(apath.clone(), ViolationKind::DuplicateId { id: a.id.clone() });
            }
            c.prob(format!("{apath}.baseline_prob"), a.baseline_prob);
            c.money(format!("{apath}.loss"), a.loss);
            if let Err(problem) = a.breach.check(a.baseline_prob) {
                let kind = match problem {
                    breach::BreachProblem::NonConvex(reason) => ViolationKind::NonConvexTable { reason },
                    breach::BreachProblem::Parameter(reason) => {
                        ViolationKind::InvalidBreachModel { reason: reason.into() }
                    }
                    breach::BreachProblem::Table(reason) => ViolationKind::InvalidBreachModel { reason },
                };
                c.push(format!("{apath}.breach"), kind);
            }
        }
        let mut seen = BTreeSet::new();
        for e in &g.adverse {
            let epath = format!("{path}.adverse[{}]", e.id);
            if !seen.insert(e.id.as_str()) {
                c.push(epath.clone(), ViolationKind::DuplicateId { id: e.id.clone() });
            }
            c.prob(format!("{epath}.prob"), e.prob);
            c.money(format!("{epath}.cost"), e.cost);
        }
    }

    let n = p.gdfs.len();
    let mut incoming = vec![Vec::new(); n];
    let mut outgoing = vec![Vec::new(); n];
    let mut pairs = BTreeSet::new();
    for (ei, e) in p.edges.iter().enumerate() {
        let path = format!("edge[{}->{}]", e.from, e.to);
        let from = index.get(&e.from).copied();
        let to = index.get(&e.to).copied();
        if from.is_none() {
            c.push(path.clone(), ViolationKind::UnknownGdf { id: e.from.clone() });
        }
        if to.is_none() {
            c.push(path.clone(), ViolationKind::UnknownGdf { id: e.to.clone() });
        }
        if e.from == e.to {
            c.push(path.clone(), ViolationKind::SelfDependency);
        }
        if !pairs.insert((e.from.as_str(), e.to.as_str())) {
            c.push(
                path.clone(),
                ViolationKind::DuplicateId {
                    id: format!("{}->{}", e.from, e.to),
                },
            );
        }
        for (attack, &u) in &e.uplift {
            if !(u.is_finite() && u >= T::one()) {
                c.push(
                    format!("{path}.uplift[{attack}]"),
                    ViolationKind::UpliftBelowOne {
                        value: u.to_f64_lossless(),
                    },
                );
            }
            if let Some(t) = to {
                if p.gdfs[t].attack_index(attack).is_none() {
                    c.push(
                        format!("{path}.uplift[{attack}]"),
                        ViolationKind::UnknownAttack { id: attack.clone() },
                    );
                }
            }
        }
        if let (Some(f), Some(t)) = (from, to) {
            if f != t {
                incoming[t].push(ei);
                outgoing[f].push(t);
            }
        }
    }

    // Kahn's algorithm; whatever is left over sits on a cycle (or downstream of one).
    let mut indegree: Vec<usize> = incoming.iter().map(Vec::len).collect();
    let mut ready: Vec<usize> = (0..n).rev().filter(|&i| indegree[i] == 0).collect();
    let mut topo = Vec::with_capacity(n);
    while let Some(i) = ready.pop() {
        topo.push(i);
        for &t in &outgoing[i] {
            indegree[t] -= 1;
            if indegree[t] == 0 {
                ready.push(t);
            }
        }
    }
    if topo.len() < n {
        let members = (0..n)
            .filter(|&i| indegree[i] > 0)
            .map(|i| p.gdfs[i].id.clone())
            .collect();
        c.push("edges", ViolationKind::CyclicDependency { members });
    }

    if c.out.is_empty() {
        Ok(ValidPortfolio {
            inner: p,
            index,
            incoming,
            topo,
        })
    } else {
        Err(ValidationReport { violations: c.out })
    }
}
