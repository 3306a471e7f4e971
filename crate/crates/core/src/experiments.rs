//! Monte Carlo validation: cavity population dynamics, the Nishimori check,
//! and estimators of the rescaled success probability
//! `P(T = 1 | X = 1) + P(T = 2 | X = 2) - 1` on trees and on SBM graphs.
//!
//! Parallel work is split into chunks whose generators are derived from the
//! master seed and the chunk index, and results are reduced in chunk order, so
//! a report depends only on its seed and never on the number of workers.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::bp::{self, EdgeFunction, LocalTestOptions, LogRatio};
use crate::error::{Error, Result};
use crate::graphs::{self, poisson_count, RootedTree};
use crate::model::{Community, ModelParams};
use crate::rng::{rng_for, stream};

const CHUNK: usize = 4096;

/// Class-conditional samples of the root message after `r` generations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MessageSamplePair {
    /// Samples of `xi^(1)` (root label 1).
    pub xi1: Vec<f64>,
    /// Samples of `xi^(2)` (root label 2).
    pub xi2: Vec<f64>,
    pub r: usize,
    pub p: f64,
    pub d: f64,
    pub lambda: f64,
    pub q: f64,
}

/// Mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var)
}

struct Sampler(Option<Poisson<f64>>);

impl Sampler {
    fn new(mean: f64) -> Self {
        Self(if mean > 0.0 {
            Some(Poisson::new(mean).expect("finite Poisson mean"))
        } else {
            None
        })
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> usize {
        self.0.as_ref().map_or(0, |p| p.sample(rng) as usize)
    }
}

/// Population dynamics for the cavity recursion
///
/// ```text
/// xi^(1) = h + sum_{i <= L11} f(xi^(1)_i) + sum_{i <= L12} f(xi^(2)_i),  L11 ~ Poi(pad),  L12 ~ Poi((1-p)bd)
/// xi^(2) = h + sum_{i <= L21} f(xi^(1)_i) + sum_{i <= L22} f(xi^(2)_i),  L21 ~ Poi(pbd),  L22 ~ Poi((1-p)cd)
/// ```
///
/// started from `xi^(1)_0 = +inf` (resp. `xi^(2)_0 = -inf`) with probability
/// `q` and `h` otherwise. Each generation resamples the previous pools with
/// replacement.
pub fn population_dynamics(
    params: &ModelParams,
    q: f64,
    r: usize,
    pool: usize,
    seed: u64,
) -> Result<MessageSamplePair> {
    population_dynamics_with(params, q, r, pool, seed, &PopulationOptions::default())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PopulationOptions {
    /// Rescale the `f`-images of each pool by a constant before each generation
    /// so that the likelihood-ratio identities
    /// `sum_y R_2y E e^{f(xi^(y))} = 1` and `sum_y R_1y E e^{-f(xi^(y))} = 1`
    /// hold exactly for the empirical pools. Without this, pool-mean noise is
    /// amplified by about `sqrt(lambda d)` per generation.
    pub moment_matching: bool,
}

impl Default for PopulationOptions {
    fn default() -> Self {
        Self {
            moment_matching: true,
        }
    }
}

/// Scale factors `(1 + t1, 1 + t2)` for the `f`-images of the two pools that
/// restore both identities; Newton's method from `t = 0`. Scaling keeps
/// `f(h) = 0`, so messages of unrevealed subtrees stay exactly at `h`.
fn matching_scales(params: &ModelParams, images: &[Vec<f64>; 2]) -> [f64; 2] {
    let (p, a, b, c) = (params.p(), params.a(), params.b(), params.c());
    // Mean of e^{s x} and of x e^{s x} over a pool.
    let moments = |xs: &[f64], s: f64| {
        let (m0, m1) = xs.iter().fold((0.0, 0.0), |(m0, m1), &x| {
            let e = (s * x).exp();
            (m0 + e, m1 + x * e)
        });
        (m0 / xs.len() as f64, m1 / xs.len() as f64)
    };
    let (w1, w2, v1, v2) = (p * b, (1.0 - p) * c, p * a, (1.0 - p) * b);
    let mut t = [0.0f64; 2];
    for iter in 0..30 {
        let (e1, de1) = moments(&images[0], 1.0 + t[0]);
        let (e2, de2) = moments(&images[1], 1.0 + t[1]);
        let (n1, dn1) = moments(&images[0], -(1.0 + t[0]));
        let (n2, dn2) = moments(&images[1], -(1.0 + t[1]));
        let f1 = w1 * e1 + w2 * e2 - 1.0;
        let f2 = v1 * n1 + v2 * n2 - 1.0;
        // Pool sums carry rounding of order 1e-13.
        let residual = f1.abs().max(f2.abs());
        if residual < 1e-12 || (iter == 29 && residual < 1e-9) {
            return [1.0 + t[0], 1.0 + t[1]];
        }
        let (j11, j12, j21, j22) = (w1 * de1, w2 * de2, -v1 * dn1, -v2 * dn2);
        let det = j11 * j22 - j12 * j21;
        if det.abs() < 1e-300 || !det.is_finite() {
            break;
        }
        t[0] -= (j22 * f1 - j12 * f2) / det;
        t[1] -= (j11 * f2 - j21 * f1) / det;
        if !(t[0].abs() < 0.5 && t[1].abs() < 0.5) {
            break;
        }
    }
    [1.0, 1.0]
}

pub fn population_dynamics_with(
    params: &ModelParams,
    q: f64,
    r: usize,
    pool: usize,
    seed: u64,
    options: &PopulationOptions,
) -> Result<MessageSamplePair> {
    if pool < 1000 {
        return Err(Error::InvalidParameter(format!(
            "pool must be at least 1000, got {pool}"
        )));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!(
            "q must lie in [0, 1], got {q}"
        )));
    }
    let h = params.h();
    let f = EdgeFunction::new(params);
    let (p, d) = (params.p(), params.d());
    let counts = [
        [
            Sampler::new(p * params.a() * d),
            Sampler::new((1.0 - p) * params.b() * d),
        ],
        [
            Sampler::new(p * params.b() * d),
            Sampler::new((1.0 - p) * params.c() * d),
        ],
    ];
    let chunks = pool.div_ceil(CHUNK);
    let generation = |gen: u64,
                      class: usize,
                      fill: &(dyn Fn(&mut rand_chacha::ChaCha8Rng) -> f64 + Sync)|
     -> Vec<f64> {
        (0..chunks)
            .into_par_iter()
            .flat_map_iter(|chunk| {
                let index = (gen << 32) | ((class as u64) << 31) | chunk as u64;
                let mut rng = rng_for(seed, stream::POPULATION, index);
                let len = CHUNK.min(pool - chunk * CHUNK);
                (0..len).map(move |_| fill(&mut rng)).collect::<Vec<_>>()
            })
            .collect()
    };

    let mut pools = [
        generation(0, 0, &|rng| {
            if rng.random_bool(q) {
                f64::INFINITY
            } else {
                h
            }
        }),
        generation(0, 1, &|rng| {
            if rng.random_bool(q) {
                f64::NEG_INFINITY
            } else {
                h
            }
        }),
    ];
    for gen in 1..=r as u64 {
        let mut images = [
            pools[0].iter().map(|&x| f.eval(x)).collect::<Vec<_>>(),
            pools[1].iter().map(|&x| f.eval(x)).collect::<Vec<_>>(),
        ];
        if options.moment_matching {
            let scales = matching_scales(params, &images);
            for (img, s) in images.iter_mut().zip(scales) {
                img.iter_mut().for_each(|x| *x *= s);
            }
        }
        let next = [0usize, 1].map(|class| {
            let images = &images;
            let counts = &counts[class];
            generation(gen, class, &move |rng| {
                let mut xi = h;
                for (src, sampler) in counts.iter().enumerate() {
                    let pool_images = &images[src];
                    for _ in 0..sampler.draw(rng) {
                        xi += pool_images[rng.random_range(0..pool_images.len())];
                    }
                }
                xi
            })
        });
        pools = next;
    }
    let [xi1, xi2] = pools;
    Ok(MessageSamplePair {
        xi1,
        xi2,
        r,
        p,
        d,
        lambda: params.lambda(),
        q,
    })
}

/// Bounded test functions for the Nishimori identity
/// `E g(xi^(2)) = p/(1-p) E[g(xi^(1)) e^{-xi^(1)}]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestFunction {
    One,
    Sigmoid,
    AboveThreshold,
}

impl TestFunction {
    pub const BATTERY: [TestFunction; 3] = [
        TestFunction::One,
        TestFunction::Sigmoid,
        TestFunction::AboveThreshold,
    ];

    pub fn eval(self, x: f64, h: f64) -> f64 {
        match self {
            TestFunction::One => 1.0,
            TestFunction::Sigmoid => bp::ratio_to_posterior(LogRatio(x)).prob1,
            TestFunction::AboveThreshold => f64::from(u8::from(x > h)),
        }
    }

    /// `g(x) e^{-x}` as one expression; the `+inf` atom contributes 0.
    pub fn eval_tilted(self, x: f64, h: f64) -> f64 {
        if x == f64::INFINITY {
            return 0.0;
        }
        match self {
            TestFunction::One => (-x).exp(),
            TestFunction::Sigmoid => bp::ratio_to_posterior(LogRatio(x)).prob2,
            TestFunction::AboveThreshold => {
                if x > h {
                    (-x).exp()
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NishimoriEntry {
    pub test: TestFunction,
    pub lhs: f64,
    pub rhs: f64,
    pub stderr: f64,
    /// `|lhs - rhs| / stderr`.
    pub discrepancy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NishimoriReport {
    pub entries: Vec<NishimoriEntry>,
    pub max_discrepancy: f64,
}

pub fn nishimori_check(
    pair: &MessageSamplePair,
    tests: &[TestFunction],
) -> Result<NishimoriReport> {
    if pair.xi1.contains(&f64::NEG_INFINITY) {
        return Err(Error::Precondition(
            "xi^(1) pool holds a -inf atom, impossible given root label 1".into(),
        ));
    }
    if pair.xi2.contains(&f64::NEG_INFINITY) {
        return Err(Error::Precondition(
            "xi^(2) pool holds revealed -inf atoms, which the identity does not cover; use r >= 1"
                .into(),
        ));
    }
    if pair.xi1.iter().chain(&pair.xi2).any(|x| x.is_nan()) {
        return Err(Error::Precondition("message pools contain NaN".into()));
    }
    let h = (pair.p / (1.0 - pair.p)).ln();
    let scale = pair.p / (1.0 - pair.p);
    let entries: Vec<NishimoriEntry> = tests
        .iter()
        .map(|&test| {
            let left: Vec<f64> = pair.xi2.iter().map(|&x| test.eval(x, h)).collect();
            let right: Vec<f64> = pair.xi1.iter().map(|&x| test.eval_tilted(x, h)).collect();
            let (lm, lv) = mean_var(&left);
            let (rm, rv) = mean_var(&right);
            let rhs = scale * rm;
            let stderr = (lv / left.len() as f64 + scale * scale * rv / right.len() as f64).sqrt();
            let gap = (lm - rhs).abs();
            let floor = 1e-12 * lm.abs().max(rhs.abs()).max(1.0);
            let discrepancy = if gap <= floor {
                0.0
            } else if stderr > 0.0 {
                gap / stderr.max(floor)
            } else {
                f64::INFINITY
            };
            NishimoriEntry {
                test,
                lhs: lm,
                rhs,
                stderr,
                discrepancy,
            }
        })
        .collect();
    let max_discrepancy = entries.iter().map(|e| e.discrepancy).fold(0.0, f64::max);
    Ok(NishimoriReport {
        entries,
        max_discrepancy,
    })
}

/// Which decision rule an estimator scores.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Classifier {
    /// Threshold the exact (or local) posterior log-ratio at `h`.
    #[default]
    Optimal,
    /// Always answer the same label.
    Constant(Community),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateReport {
    pub estimate: f64,
    pub stderr: f64,
    pub n_samples: usize,
    /// Fraction of samples decided without an exact posterior (cyclic balls).
    pub flagged_fraction: f64,
    pub class_counts: [usize; 2],
    pub workers: usize,
}

/// One scored sample: true label, decision, and whether it was flagged.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub truth: Community,
    pub decision: Community,
    pub flagged: bool,
}

/// Class-conditional estimate `s1 + s2 - 1`, where `s_k` is the fraction of
/// class-`k` samples labeled `k`. The standard error is the sample standard
/// deviation of the per-sample influence values over `sqrt(n)`.
pub fn score_outcomes(outcomes: &[Outcome]) -> Result<EstimateReport> {
    let n = outcomes.len();
    let mut class = [0usize; 2];
    let mut hits = [0usize; 2];
    let mut flagged = 0usize;
    for o in outcomes {
        class[o.truth.index()] += 1;
        if o.decision == o.truth {
            hits[o.truth.index()] += 1;
        }
        flagged += usize::from(o.flagged);
    }
    if class.contains(&0) {
        return Err(Error::Precondition(format!(
            "both classes must be observed, got counts {class:?}"
        )));
    }
    let s = [
        hits[0] as f64 / class[0] as f64,
        hits[1] as f64 / class[1] as f64,
    ];
    let estimate = s[0] + s[1] - 1.0;
    let nf = n as f64;
    let sum_sq: f64 = outcomes
        .iter()
        .map(|o| {
            let k = o.truth.index();
            let hit = f64::from(u8::from(o.decision == o.truth));
            (nf / class[k] as f64 * (hit - s[k])).powi(2)
        })
        .sum();
    let stderr = (sum_sq / (nf - 1.0).max(1.0)).sqrt() / nf.sqrt();
    Ok(EstimateReport {
        estimate,
        stderr,
        n_samples: n,
        flagged_fraction: flagged as f64 / nf,
        class_counts: class,
        workers: rayon::current_num_threads(),
    })
}

/// How tree replicates are generated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TreeSampler {
    /// Build the tree, reveal depth-`r` labels, run [`bp::tree_messages`].
    Explicit,
    /// Same law, computed while the tree is generated; the revealed and
    /// unrevealed leaves of each depth-`(r-1)` vertex are drawn as thinned
    /// Poisson counts, so no leaf is materialized.
    #[default]
    Streaming,
}

/// Draws one `(root label, root message)` pair for a tree of the given depth
/// with leaves revealed independently with probability `q`.
pub fn sample_root_message<R: Rng>(
    params: &ModelParams,
    q: f64,
    depth: usize,
    sampler: TreeSampler,
    rng: &mut R,
    budget: usize,
) -> Result<(Community, LogRatio)> {
    match sampler {
        TreeSampler::Explicit => {
            let tree = graphs::sample_gw_from(params, depth, rng, budget)?;
            let leaves: Vec<usize> = tree.generation(depth).collect();
            let members = leaves.into_iter().filter(|_| rng.random_bool(q)).collect();
            let revealed = graphs::RevealedSet::new(q, members);
            Ok((
                tree.label(0),
                bp::tree_messages(&tree, &revealed, depth, params),
            ))
        }
        TreeSampler::Streaming => {
            let root = if rng.random_bool(params.p()) {
                Community::One
            } else {
                Community::Two
            };
            let mut state = Streaming {
                params,
                f: EdgeFunction::new(params),
                q,
                depth,
                budget,
                used: 1,
            };
            let xi = state.message(root, 0, rng)?;
            Ok((root, LogRatio(xi)))
        }
    }
}

struct Streaming<'a> {
    params: &'a ModelParams,
    f: EdgeFunction,
    q: f64,
    depth: usize,
    budget: usize,
    used: usize,
}

impl Streaming<'_> {
    fn message<R: Rng>(&mut self, label: Community, level: usize, rng: &mut R) -> Result<f64> {
        let h = self.params.h();
        if level == self.depth {
            return Ok(if rng.random_bool(self.q) {
                match label {
                    Community::One => f64::INFINITY,
                    Community::Two => f64::NEG_INFINITY,
                }
            } else {
                h
            });
        }
        let row = self.params.transition_matrix().rows[label.index()];
        let d = self.params.d();
        if level + 1 == self.depth {
            let rev1 = poisson_count(rng, d * row[0] * self.q);
            let rev2 = poisson_count(rng, d * row[1] * self.q);
            let hidden = poisson_count(rng, d * (1.0 - self.q));
            return Ok(h
                + rev1 as f64 * self.f.eval(f64::INFINITY)
                + rev2 as f64 * self.f.eval(f64::NEG_INFINITY)
                + hidden as f64 * self.f.eval(h));
        }
        let mut xi = h;
        for (k, &prob) in row.iter().enumerate() {
            let count = poisson_count(rng, d * prob);
            self.used += count;
            if self.used > self.budget {
                return Err(Error::BudgetExceeded {
                    what: "Galton-Watson tree size",
                    limit: self.budget,
                });
            }
            for _ in 0..count {
                let child = self.message(Community::from_index(k), level + 1, rng)?;
                xi += self.f.eval(child);
            }
        }
        Ok(xi)
    }
}

fn decide(classifier: Classifier, xi: LogRatio, params: &ModelParams) -> Community {
    match classifier {
        Classifier::Optimal => bp::tree_test(xi, params),
        Classifier::Constant(x) => x,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeEstimateOptions {
    pub classifier: Classifier,
    pub sampler: TreeSampler,
    pub budget: usize,
}

impl Default for TreeEstimateOptions {
    fn default() -> Self {
        Self {
            classifier: Classifier::Optimal,
            sampler: TreeSampler::Streaming,
            budget: graphs::DEFAULT_TREE_BUDGET,
        }
    }
}

/// Success probability of the optimal tree test at the given depth.
pub fn estimate_psucc_tree(
    params: &ModelParams,
    q: f64,
    depth: usize,
    reps: usize,
    seed: u64,
    options: &TreeEstimateOptions,
) -> Result<EstimateReport> {
    let (_, report) = tree_replicates(params, q, depth, reps, seed, options)?;
    Ok(report)
}

/// Tree replicates and their scored report; the first element holds the
/// `(root label, root message)` of every replicate in order.
pub fn tree_replicates(
    params: &ModelParams,
    q: f64,
    depth: usize,
    reps: usize,
    seed: u64,
    options: &TreeEstimateOptions,
) -> Result<(Vec<(Community, LogRatio)>, EstimateReport)> {
    if reps < 100 {
        return Err(Error::InvalidParameter(format!(
            "reps must be at least 100, got {reps}"
        )));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!(
            "q must lie in [0, 1], got {q}"
        )));
    }
    let samples: Vec<(Community, LogRatio)> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, stream::TREE, i as u64);
            sample_root_message(params, q, depth, options.sampler, &mut rng, options.budget)
        })
        .collect::<Result<_>>()?;
    let outcomes: Vec<Outcome> = samples
        .iter()
        .map(|&(truth, xi)| Outcome {
            truth,
            decision: decide(options.classifier, xi, params),
            flagged: false,
        })
        .collect();
    Ok((samples, score_outcomes(&outcomes)?))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SbmEstimateOptions {
    pub classifier: Classifier,
    pub local: LocalTestOptions,
    pub ball_budget: usize,
}

impl Default for SbmEstimateOptions {
    fn default() -> Self {
        Self {
            classifier: Classifier::Optimal,
            local: LocalTestOptions::default(),
            ball_budget: graphs::DEFAULT_BALL_BUDGET,
        }
    }
}

/// Success probability of the local test of radius `r` on one sampled SBM
/// graph, with labels revealed with probability `q` and `reps` centers drawn
/// uniformly with replacement.
pub fn estimate_psucc_sbm(
    params: &ModelParams,
    n: usize,
    q: f64,
    r: usize,
    reps: usize,
    seed: u64,
    options: &SbmEstimateOptions,
) -> Result<EstimateReport> {
    Ok(estimate_psucc_sbm_radii(params, n, q, &[r], reps, seed, options)?.remove(0))
}

/// Same as [`estimate_psucc_sbm`] for several radii, sharing the graph, the
/// revealed set and the centers across radii.
pub fn estimate_psucc_sbm_radii(
    params: &ModelParams,
    n: usize,
    q: f64,
    radii: &[usize],
    reps: usize,
    seed: u64,
    options: &SbmEstimateOptions,
) -> Result<Vec<EstimateReport>> {
    if n < 1000 {
        return Err(Error::InvalidParameter(format!(
            "n must be at least 1000, got {n}"
        )));
    }
    if reps == 0 {
        return Err(Error::InvalidParameter("reps must be positive".into()));
    }
    let graph = graphs::sample_sbm(params, n, seed)?;
    let revealed = graphs::sample_reveal(0..n, q, seed)?;
    let mut center_rng = rng_for(seed, stream::CENTERS, 0);
    let centers: Vec<usize> = (0..reps).map(|_| center_rng.random_range(0..n)).collect();
    radii
        .iter()
        .map(|&r| {
            let outcomes: Vec<Outcome> = centers
                .par_iter()
                .map(|&c| {
                    let truth = graph.label(c);
                    if let Classifier::Constant(x) = options.classifier {
                        return Ok(Outcome {
                            truth,
                            decision: x,
                            flagged: false,
                        });
                    }
                    let ball = graphs::extract_ball_with_budget(&graph, c, r, options.ball_budget)?;
                    let boundary = ball.revealed_boundary(&revealed);
                    let decision = bp::local_test(&ball, &boundary, params, &options.local);
                    Ok(Outcome {
                        truth,
                        decision: decision.label,
                        flagged: decision.flagged(),
                    })
                })
                .collect::<Result<_>>()?;
            score_outcomes(&outcomes)
        })
        .collect()
}

/// Tree-likeness of radius-`r` balls around distinct uniformly drawn centers.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalTreeStats {
    pub n: usize,
    pub r: usize,
    pub centers: usize,
    pub tree_fraction: f64,
    pub stderr: f64,
    /// Degree of the center (its degree within the ball) for every ball.
    pub root_degrees: Vec<usize>,
}

/// Samples one SBM graph and inspects the balls around `min(centers, n)`
/// distinct centers drawn without replacement.
pub fn local_tree_stats(
    params: &ModelParams,
    n: usize,
    r: usize,
    centers: usize,
    seed: u64,
) -> Result<LocalTreeStats> {
    let graph = graphs::sample_sbm(params, n, seed)?;
    let mut rng = rng_for(seed, stream::CENTERS, 0);
    let mut picks = rand::seq::index::sample(&mut rng, n, centers.min(n)).into_vec();
    picks.sort_unstable();
    let balls: Vec<(bool, usize)> = picks
        .par_iter()
        .map(|&c| graphs::extract_ball(&graph, c, r).map(|b| (b.is_tree(), b.root_degree())))
        .collect::<Result<_>>()?;
    let trees = balls.iter().filter(|b| b.0).count();
    let m = balls.len();
    let frac = trees as f64 / m as f64;
    Ok(LocalTreeStats {
        n,
        r,
        centers: m,
        tree_fraction: frac,
        stderr: (frac * (1.0 - frac) / m as f64).sqrt(),
        root_degrees: balls.iter().map(|b| b.1).collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square goodness of fit of counts to `Poisson(mean)`. Cells
/// are merged from the left until each expects at least 5 observations and
/// the last cell collects the upper tail.
pub fn chi_square_poisson(samples: &[usize], mean: f64) -> ChiSquareResult {
    let n = samples.len() as f64;
    let max = samples.iter().copied().max().unwrap_or(0);
    let pmf: Vec<f64> = {
        let mut v = Vec::with_capacity(max + 2);
        let mut p = (-mean).exp();
        for k in 0..=max {
            v.push(p);
            p *= mean / (k as f64 + 1.0);
        }
        v
    };
    let mut observed = vec![0usize; max + 1];
    for &s in samples {
        observed[s] += 1;
    }
    // Cells as (expected, observed); the final cell absorbs the tail beyond the last value.
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut e_acc, mut o_acc) = (0.0, 0.0);
    let mut cum = 0.0;
    for k in 0..=max {
        e_acc += n * pmf[k];
        o_acc += observed[k] as f64;
        cum += pmf[k];
        if e_acc >= 5.0 && n * (1.0 - cum) >= 5.0 {
            cells.push((e_acc, o_acc));
            e_acc = 0.0;
            o_acc = 0.0;
        }
    }
    e_acc += n * (1.0 - cum).max(0.0);
    match cells.last_mut() {
        Some(last) if e_acc < 5.0 => {
            last.0 += e_acc;
            last.1 += o_acc;
        }
        _ => cells.push((e_acc, o_acc)),
    }
    let statistic: f64 = cells.iter().map(|&(e, o)| (o - e).powi(2) / e).sum();
    let dof = cells.len().saturating_sub(1).max(1);
    let p_value = 1.0
        - ChiSquared::new(dof as f64)
            .expect("positive dof")
            .cdf(statistic);
    ChiSquareResult {
        statistic,
        dof,
        p_value,
    }
}

/// Kolmogorov-Smirnov distance between the empirical law of `samples` and `N(mean, var)`.
pub fn ks_distance_normal(samples: &[f64], mean: f64, var: f64) -> f64 {
    let normal = Normal::new(mean, var.sqrt()).expect("positive variance");
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = normal.cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

/// Total-variation distance between the empirical laws of two samples of a
/// discrete statistic (values compared exactly).
pub fn empirical_tv(xs: &[f64], ys: &[f64]) -> f64 {
    let mut all: Vec<(f64, usize)> = xs
        .iter()
        .map(|&x| (x, 0))
        .chain(ys.iter().map(|&y| (y, 1)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (nx, ny) = (xs.len() as f64, ys.len() as f64);
    let mut tv = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut c = [0usize; 2];
        let v = all[i].0;
        while i < all.len() && all[i].0.total_cmp(&v).is_eq() {
            c[all[i].1] += 1;
            i += 1;
        }
        tv += (c[0] as f64 / nx - c[1] as f64 / ny).abs();
    }
    0.5 * tv
}

/// Best rescaled success over the threshold tests `1 iff xi >= t` and
/// `1 iff xi < t`, with `t` ranging over the observed values and `+inf`.
pub fn best_threshold_psucc(xi1: &[f64], xi2: &[f64]) -> f64 {
    let mut a = xi1.to_vec();
    let mut b = xi2.to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut best: f64 = 0.0;
    for &t in a.iter().chain(b.iter()) {
        let above1 = a.len() - a.partition_point(|x| x.total_cmp(&t).is_lt());
        let below2 = b.partition_point(|x| x.total_cmp(&t).is_lt());
        let s = above1 as f64 / na + below2 as f64 / nb - 1.0;
        best = best.max(s.abs());
    }
    best
}
