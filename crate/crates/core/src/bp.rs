//! Belief propagation on labeled trees and tree-like balls.
//!
//! Messages are log-likelihood ratios `xi = log(nu(1) / nu(2))`. A vertex at
//! depth `r` starts at `+inf`/`-inf` when its label is revealed (as 1/2) and at
//! the prior log-ratio `h` otherwise; every shallower vertex receives
//! `h + sum_children f(xi_child)` with `f(x) = log((a e^x + b) / (b e^x + c))`.
//! Infinite messages are kept symbolic and `f` maps them to its exact limits.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::graphs::{Ball, LabeledGraph, LabeledTree, RevealedSet, RootedTree};
use crate::model::{Community, ModelParams};

/// Default bound on the number of unrevealed vertices the enumeration oracle
/// will sum over (`2^budget` assignments).
pub const DEFAULT_ENUMERATION_BUDGET: usize = 22;

/// Log-likelihood ratio `log(P(X = 1 | .) / P(X = 2 | .))`, possibly infinite.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct LogRatio(pub f64);

impl LogRatio {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Posterior distribution of a root label.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PosteriorPair {
    pub prob1: f64,
    pub prob2: f64,
}

impl PosteriorPair {
    pub fn prob(&self, x: Community) -> f64 {
        match x {
            Community::One => self.prob1,
            Community::Two => self.prob2,
        }
    }

    pub fn log_ratio(&self) -> LogRatio {
        LogRatio(self.prob1.ln() - self.prob2.ln())
    }
}

/// The edge function `f(x) = log((a e^x + b) / (b e^x + c))`.
#[derive(Clone, Copy, Debug)]
pub struct EdgeFunction {
    a: f64,
    b: f64,
    c: f64,
    at_plus_inf: f64,
    at_minus_inf: f64,
}

impl EdgeFunction {
    pub fn new(params: &ModelParams) -> Self {
        let (a, b, c) = (params.a(), params.b(), params.c());
        Self {
            a,
            b,
            c,
            at_plus_inf: (a / b).ln(),
            at_minus_inf: (b / c).ln(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            self.at_plus_inf
        } else if x == f64::NEG_INFINITY {
            self.at_minus_inf
        } else if x > 0.0 {
            let e = (-x).exp();
            (self.a + self.b * e).ln() - (self.b + self.c * e).ln()
        } else {
            let e = x.exp();
            (self.a * e + self.b).ln() - (self.b * e + self.c).ln()
        }
    }

    /// Derivative `f'(x) = (ac - b^2) e^x / ((a e^x + b)(b e^x + c))`.
    pub fn derivative(&self, x: f64) -> f64 {
        let e = x.exp();
        (self.a * self.c - self.b * self.b) * e / ((self.a * e + self.b) * (self.b * e + self.c))
    }
}

fn sum_sorted(h: f64, terms: &mut [f64]) -> f64 {
    // Canonical order makes the sum independent of how children are listed.
    terms.sort_unstable_by(|x, y| x.total_cmp(y));
    terms.iter().fold(h, |acc, t| acc + t)
}

/// Root message of a tree whose labels are revealed on `revealed`, a subset of
/// the vertices at depth `r`. Revealed vertices at other depths are ignored;
/// vertices deeper than `r` do not take part. A childless vertex above depth
/// `r` gets the empty-product message `h`.
pub fn tree_messages<T: RootedTree + ?Sized>(
    tree: &T,
    revealed: &RevealedSet,
    r: usize,
    params: &ModelParams,
) -> LogRatio {
    let f = EdgeFunction::new(params);
    let h = params.h();
    let n = tree.vertex_count();
    let mut xi = vec![f64::NAN; n];
    let mut scratch = Vec::new();
    for v in (0..n).rev() {
        let depth = tree.depth(v);
        if depth > r {
            continue;
        }
        xi[v] = if depth == r {
            if revealed.contains(v) {
                match tree.label(v) {
                    Community::One => f64::INFINITY,
                    Community::Two => f64::NEG_INFINITY,
                }
            } else {
                h
            }
        } else {
            scratch.clear();
            scratch.extend(tree.children(v).map(|c| f.eval(xi[c])));
            sum_sorted(h, &mut scratch)
        };
    }
    LogRatio(xi[0])
}

/// Converts a log-ratio to the pair `(e^xi / (1 + e^xi), 1 / (1 + e^xi))`.
pub fn ratio_to_posterior(xi: LogRatio) -> PosteriorPair {
    let x = xi.0;
    if x == f64::INFINITY {
        return PosteriorPair {
            prob1: 1.0,
            prob2: 0.0,
        };
    }
    if x == f64::NEG_INFINITY {
        return PosteriorPair {
            prob1: 0.0,
            prob2: 1.0,
        };
    }
    if x >= 0.0 {
        let small = 1.0 / (1.0 + x.exp());
        PosteriorPair {
            prob1: 1.0 - small,
            prob2: small,
        }
    } else {
        let small = 1.0 / (1.0 + (-x).exp());
        PosteriorPair {
            prob1: small,
            prob2: 1.0 - small,
        }
    }
}

/// A labeled structure that the enumeration oracle can sum over: vertex 0 is
/// the root and every edge carries the factor `(a b; b c)`.
pub trait FactorStructure {
    fn factor_vertex_count(&self) -> usize;
    fn factor_edges(&self) -> Vec<(usize, usize)>;
    fn factor_label(&self, v: usize) -> Community;
}

impl FactorStructure for LabeledTree {
    fn factor_vertex_count(&self) -> usize {
        self.vertex_count()
    }

    fn factor_edges(&self) -> Vec<(usize, usize)> {
        (1..self.vertex_count())
            .map(|v| (self.parent(v).unwrap(), v))
            .collect()
    }

    fn factor_label(&self, v: usize) -> Community {
        self.label(v)
    }
}

impl FactorStructure for Ball {
    fn factor_vertex_count(&self) -> usize {
        self.vertex_count()
    }

    fn factor_edges(&self) -> Vec<(usize, usize)> {
        self.edges().to_vec()
    }

    fn factor_label(&self, v: usize) -> Community {
        self.label(v)
    }
}

impl FactorStructure for LabeledGraph {
    fn factor_vertex_count(&self) -> usize {
        self.n()
    }

    fn factor_edges(&self) -> Vec<(usize, usize)> {
        self.edges().collect()
    }

    fn factor_label(&self, v: usize) -> Community {
        self.label(v)
    }
}

pub fn exact_posterior<S: FactorStructure + ?Sized>(
    structure: &S,
    revealed: &RevealedSet,
    params: &ModelParams,
) -> Result<PosteriorPair> {
    exact_posterior_with_budget(structure, revealed, params, DEFAULT_ENUMERATION_BUDGET)
}

/// Posterior of the root label by brute-force summation of
/// `prod_v p(x_v) prod_(u,v) psi(x_u, x_v)` over every labeling of the
/// unrevealed vertices, revealed vertices pinned to their true labels. On a
/// tree this is `p(x_root) prod R_{x_i x_j}`.
pub fn exact_posterior_with_budget<S: FactorStructure + ?Sized>(
    structure: &S,
    revealed: &RevealedSet,
    params: &ModelParams,
    budget: usize,
) -> Result<PosteriorPair> {
    let n = structure.factor_vertex_count();
    let free: Vec<usize> = (0..n).filter(|&v| !revealed.contains(v)).collect();
    if free.len() > budget || free.len() >= 63 {
        return Err(Error::BudgetExceeded {
            what: "unrevealed vertices to enumerate",
            limit: budget,
        });
    }
    let edges = structure.factor_edges();
    let log_prior = [params.p().ln(), (1.0 - params.p()).ln()];
    let psi = params.affinity();
    let log_psi = [
        [psi[0][0].ln(), psi[0][1].ln()],
        [psi[1][0].ln(), psi[1][1].ln()],
    ];

    let mut x: Vec<usize> = (0..n).map(|v| structure.factor_label(v).index()).collect();
    // Running log-sum-exp per root class: (max, scaled sum).
    let mut acc = [(f64::NEG_INFINITY, 0.0f64); 2];
    for mask in 0u64..(1u64 << free.len()) {
        for (bit, &v) in free.iter().enumerate() {
            x[v] = ((mask >> bit) & 1) as usize;
        }
        let mut lw: f64 = x.iter().map(|&k| log_prior[k]).sum();
        for &(u, v) in &edges {
            lw += log_psi[x[u]][x[v]];
        }
        if lw == f64::NEG_INFINITY {
            continue;
        }
        let (m, s) = &mut acc[x[0]];
        if lw > *m {
            *s = *s * (*m - lw).exp() + 1.0;
            *m = lw;
        } else {
            *s += (lw - *m).exp();
        }
    }
    let log_mass = acc.map(|(m, s)| {
        if s > 0.0 {
            m + s.ln()
        } else {
            f64::NEG_INFINITY
        }
    });
    if log_mass.iter().all(|&l| l == f64::NEG_INFINITY) {
        return Err(Error::Precondition(
            "revealed labels have zero probability under the model".into(),
        ));
    }
    Ok(ratio_to_posterior(LogRatio(log_mass[0] - log_mass[1])))
}

/// Optimal threshold test: label 1 iff `xi >= h`.
pub fn tree_test(xi: LogRatio, params: &ModelParams) -> Community {
    if xi.0 >= params.h() {
        Community::One
    } else {
        Community::Two
    }
}

/// What to do with a ball that contains a cycle and is too large to enumerate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CyclicBallPolicy {
    /// Run tree BP on the breadth-first spanning tree of the ball.
    #[default]
    SpanningTree,
    /// Return the prior decision.
    PriorDecision,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalTestOptions {
    pub enumeration_budget: usize,
    pub cyclic: CyclicBallPolicy,
}

impl Default for LocalTestOptions {
    fn default() -> Self {
        Self {
            enumeration_budget: DEFAULT_ENUMERATION_BUDGET,
            cyclic: CyclicBallPolicy::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecisionMethod {
    TreeMessages,
    Enumeration,
    SpanningTree,
    Prior,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalDecision {
    pub label: Community,
    pub xi: LogRatio,
    pub method: DecisionMethod,
}

impl LocalDecision {
    /// True when the ball was not a tree and could not be enumerated.
    pub fn flagged(&self) -> bool {
        matches!(
            self.method,
            DecisionMethod::SpanningTree | DecisionMethod::Prior
        )
    }
}

/// Local test on a ball with labels revealed on its boundary sphere
/// (`revealed_boundary` holds local ids).
pub fn local_test(
    ball: &Ball,
    revealed_boundary: &RevealedSet,
    params: &ModelParams,
    options: &LocalTestOptions,
) -> LocalDecision {
    let r = ball.radius();
    let (xi, method) = if ball.is_tree() {
        (
            tree_messages(ball, revealed_boundary, r, params),
            DecisionMethod::TreeMessages,
        )
    } else {
        match exact_posterior_with_budget(
            ball,
            revealed_boundary,
            params,
            options.enumeration_budget,
        ) {
            Ok(post) => (post.log_ratio(), DecisionMethod::Enumeration),
            Err(_) => match options.cyclic {
                CyclicBallPolicy::SpanningTree => (
                    tree_messages(ball, revealed_boundary, r, params),
                    DecisionMethod::SpanningTree,
                ),
                CyclicBallPolicy::PriorDecision => (LogRatio(params.h()), DecisionMethod::Prior),
            },
        }
    };
    let label = match method {
        DecisionMethod::Prior => prior_decision(params),
        _ => tree_test(xi, params),
    };
    LocalDecision { label, xi, method }
}

/// Label favoured by the prior alone: community 2 unless `p = 1/2`.
pub fn prior_decision(params: &ModelParams) -> Community {
    match params.p().partial_cmp(&0.5) {
        Some(Ordering::Less) => Community::Two,
        _ => Community::One,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{extract_ball, sample_gw, sample_reveal};
    use approx::assert_abs_diff_eq;

    fn chain(labels: &[Community]) -> LabeledTree {
        let parent: Vec<Option<usize>> = (0..labels.len()).map(|v| v.checked_sub(1)).collect();
        LabeledTree::from_parents(&parent, labels.to_vec(), labels.len() - 1).unwrap()
    }

    #[test]
    fn root_only_tree_gives_prior() {
        let m = ModelParams::new(0.25, 3.0, 1.0).unwrap();
        let t = chain(&[Community::One]);
        let xi = tree_messages(&t, &RevealedSet::empty(), 0, &m);
        assert_eq!(xi.0, m.h());
        let post = exact_posterior(&t, &RevealedSet::empty(), &m).unwrap();
        assert_abs_diff_eq!(post.prob1, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(post.prob2, 0.75, epsilon = 1e-15);
    }

    #[test]
    fn single_revealed_child() {
        let m = ModelParams::new(0.25, 3.0, 1.0).unwrap();
        let t = chain(&[Community::Two, Community::One]);
        let rev = RevealedSet::new(1.0, vec![1]);
        let xi = tree_messages(&t, &rev, 1, &m);
        assert_abs_diff_eq!(xi.0, m.h() + (m.a() / m.b()).ln(), epsilon = 1e-14);

        let r = m.transition_matrix();
        let (w1, w2) = (m.p() * r.rows[0][0], (1.0 - m.p()) * r.rows[1][0]);
        let post = exact_posterior(&t, &rev, &m).unwrap();
        assert_abs_diff_eq!(post.prob1, w1 / (w1 + w2), epsilon = 1e-14);
        assert_abs_diff_eq!(ratio_to_posterior(xi).prob1, post.prob1, epsilon = 1e-14);
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(
            ratio_to_posterior(LogRatio(0.0)),
            PosteriorPair {
                prob1: 0.5,
                prob2: 0.5
            }
        );
        assert_eq!(
            ratio_to_posterior(LogRatio(f64::INFINITY)),
            PosteriorPair {
                prob1: 1.0,
                prob2: 0.0
            }
        );
        assert_eq!(
            ratio_to_posterior(LogRatio(f64::NEG_INFINITY)),
            PosteriorPair {
                prob1: 0.0,
                prob2: 1.0
            }
        );
        let m = ModelParams::new(0.25, 3.0, 1.0).unwrap();
        let post = ratio_to_posterior(LogRatio(m.h()));
        assert_abs_diff_eq!(post.prob1, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(post.prob2, 0.75, epsilon = 1e-15);
        for x in [-800.0, -30.0, -1e-3, 2.5, 40.0, 900.0] {
            let p = ratio_to_posterior(LogRatio(x));
            assert!((p.prob1 + p.prob2 - 1.0).abs() <= 1e-12);
            assert!((0.0..=1.0).contains(&p.prob1));
        }
    }

    #[test]
    fn test_thresholds() {
        let m = ModelParams::new(0.25, 3.0, 1.0).unwrap();
        assert_eq!(tree_test(LogRatio(m.h()), &m), Community::One);
        assert_eq!(tree_test(LogRatio(m.h() - 0.1), &m), Community::Two);
        assert_eq!(tree_test(LogRatio(f64::INFINITY), &m), Community::One);
    }

    #[test]
    fn edge_function_limits_and_slope() {
        let m = ModelParams::new(0.3, 5.0, 2.0).unwrap();
        let f = EdgeFunction::new(&m);
        assert_eq!(f.eval(f64::INFINITY), (m.a() / m.b()).ln());
        assert_eq!(f.eval(f64::NEG_INFINITY), (m.b() / m.c()).ln());
        assert_abs_diff_eq!(
            f.eval(0.0),
            ((m.a() + m.b()) / (m.b() + m.c())).ln(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(f.eval(60.0), f.eval(f64::INFINITY), epsilon = 1e-12);
        assert_abs_diff_eq!(f.eval(-60.0), f.eval(f64::NEG_INFINITY), epsilon = 1e-12);
        for i in -200..=200 {
            let x = i as f64 * 0.1;
            assert!(f.derivative(x) > 0.0, "f'({x}) not positive");
            let fd = (f.eval(x + 1e-6) - f.eval(x - 1e-6)) / 2e-6;
            assert_abs_diff_eq!(fd, f.derivative(x), epsilon = 1e-6);
        }
    }

    #[test]
    fn no_signal_local_test_is_constant() {
        // f vanishes at lambda = 0, so every root message is exactly h and the
        // inclusive threshold answers 1 whatever the ball.
        for p in [0.3, 0.5] {
            let m = ModelParams::new(p, 4.0, 0.0).unwrap();
            let g = crate::graphs::sample_sbm(&m, 2000, 3).unwrap();
            let all = RevealedSet::new(1.0, (0..g.n()).collect());
            for c in 0..20 {
                let ball = extract_ball(&g, c, 2).unwrap();
                let d = local_test(
                    &ball,
                    &ball.revealed_boundary(&all),
                    &m,
                    &LocalTestOptions::default(),
                );
                assert!((d.xi.0 - m.h()).abs() <= 1e-12);
                if d.method == DecisionMethod::TreeMessages {
                    assert_eq!(d.xi.0, m.h());
                    assert_eq!(d.label, Community::One);
                }
            }
        }
    }

    #[test]
    fn radius_zero_revealed_center() {
        let m = ModelParams::new(0.3, 4.0, 1.0).unwrap();
        let g = crate::graphs::sample_sbm(&m, 500, 8).unwrap();
        for c in 0..50 {
            let ball = extract_ball(&g, c, 0).unwrap();
            let rev = RevealedSet::new(1.0, vec![0]);
            let d = local_test(&ball, &rev, &m, &LocalTestOptions::default());
            assert_eq!(d.label, g.label(c));
        }
    }

    #[test]
    fn cyclic_ball_uses_enumeration_then_fallbacks() {
        let m = ModelParams::new(0.3, 4.0, 1.0).unwrap();
        let g = LabeledGraph::from_edges(
            vec![Community::One, Community::One, Community::Two],
            &[(0, 1), (1, 2), (0, 2)],
        )
        .unwrap();
        let ball = extract_ball(&g, 0, 1).unwrap();
        let rev = ball.revealed_boundary(&RevealedSet::new(1.0, vec![1, 2]));
        let d = local_test(&ball, &rev, &m, &LocalTestOptions::default());
        assert_eq!(d.method, DecisionMethod::Enumeration);
        assert!(!d.flagged());
        let exact = exact_posterior(&ball, &rev, &m).unwrap();
        assert_abs_diff_eq!(ratio_to_posterior(d.xi).prob1, exact.prob1, epsilon = 1e-12);

        let none = RevealedSet::empty();
        let opts = LocalTestOptions {
            enumeration_budget: 0,
            cyclic: CyclicBallPolicy::PriorDecision,
        };
        let d = local_test(&ball, &none, &m, &opts);
        assert_eq!((d.method, d.label), (DecisionMethod::Prior, Community::Two));
        assert!(d.flagged());
        let opts = LocalTestOptions {
            enumeration_budget: 0,
            cyclic: CyclicBallPolicy::SpanningTree,
        };
        let d = local_test(&ball, &none, &m, &opts);
        assert_eq!(d.method, DecisionMethod::SpanningTree);
        assert!(d.flagged());
    }

    #[test]
    fn enumeration_budget_is_enforced() {
        let m = ModelParams::new(0.3, 2.0, 1.0).unwrap();
        let t = chain(&[Community::One; 6]);
        assert!(exact_posterior_with_budget(&t, &RevealedSet::empty(), &m, 5).is_err());
        assert!(exact_posterior_with_budget(&t, &RevealedSet::new(1.0, vec![5]), &m, 5).is_ok());
    }

    #[test]
    fn ten_vertex_trees_match_enumeration() {
        let m = ModelParams::new(0.3, 2.0, 1.5).unwrap();
        let mut checked = 0;
        for seed in 0..400u64 {
            let t = sample_gw(&m, 3, seed).unwrap();
            if t.vertex_count() != 10 {
                continue;
            }
            let rev = sample_reveal(t.generation(3), 0.5, seed).unwrap();
            let bp = ratio_to_posterior(tree_messages(&t, &rev, 3, &m));
            let ex = exact_posterior(&t, &rev, &m).unwrap();
            assert_abs_diff_eq!(bp.prob1, ex.prob1, epsilon = 1e-10);
            assert_abs_diff_eq!(bp.prob2, ex.prob2, epsilon = 1e-10);
            checked += 1;
        }
        assert!(checked >= 5, "only {checked} ten-vertex trees");
    }

    #[test]
    fn deep_trees_do_not_overflow() {
        let m = ModelParams::new(0.2, 10.0, 9.0).unwrap();
        let mut checked = 0;
        for seed in 0..3u64 {
            let t = match crate::graphs::sample_gw(&m, 6, seed) {
                Ok(t) => t,
                Err(_) => continue,
            };
            let rev = sample_reveal(t.generation(6), 0.9, seed).unwrap();
            let xi = tree_messages(&t, &rev, 6, &m);
            assert!(!xi.0.is_nan());
            let p = ratio_to_posterior(xi);
            assert!(p.prob1.is_finite() && p.prob2.is_finite());
            checked += 1;
        }
        assert!(checked > 0);
    }
}
