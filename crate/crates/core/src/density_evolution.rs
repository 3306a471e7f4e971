//! Large-degree density evolution.
//!
//! As `d -> inf` the class-conditional BP messages become Gaussian,
//! `N(h +/- mu/2, mu)`, and the single parameter evolves as
//! `mu_{k+1} = G(mu_k)` from `mu_1 = q lambda / (p (1-p))`, with
//!
//! ```text
//! G(mu) = lambda / (1-p)^2 * E[ 1 / (p + (1-p) exp(sqrt(mu) Z - mu/2)) - 1 ],  Z ~ N(0, 1).
//! ```
//!
//! `G` is linear in `lambda`; [`DensityEvolution::h`] is `G` at `lambda = 1`.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::model::ModelParams;

pub const DEFAULT_QUAD_NODES: usize = 201;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;
pub const DEFAULT_GRID_POINTS: usize = 2000;

/// Gauss-Hermite rule rescaled to expectations under the standard normal:
/// `E[phi(Z)] ~ sum_i w_i phi(z_i)` with `z_i = sqrt(2) x_i`, `w_i = omega_i / sqrt(pi)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Nodes start from the eigenvalues of the Jacobi matrix of the Hermite
    /// recurrence and are polished by Newton steps on the orthonormal
    /// three-term recurrence, which also gives the weights. The recurrence is
    /// rescaled on the fly so large rules do not overflow.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "quadrature needs at least one node".into(),
            ));
        }
        let jacobi = DMatrix::from_fn(n, n, |i, j| {
            if i + 1 == j || j + 1 == i {
                (i.max(j) as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        });
        let mut guesses: Vec<f64> = SymmetricEigen::new(jacobi)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        guesses.sort_by(|a, b| b.total_cmp(a));

        let pi_m4 = std::f64::consts::PI.powf(-0.25);
        let nf = n as f64;
        // Orthonormal recurrence at z: returns (p_n(z), p_{n-1}(z), log scale).
        let recur = |z: f64| {
            let (mut p1, mut p2, mut log_scale) = (pi_m4, 0.0f64, 0.0f64);
            for j in 1..=n {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                if p1.abs() > 1e150 {
                    p1 *= 1e-150;
                    p2 *= 1e-150;
                    log_scale += 150.0 * std::f64::consts::LN_10;
                }
            }
            (p1, p2, log_scale)
        };
        let mut x = vec![0.0; n];
        let mut log_w = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut z = guesses[i];
            for _ in 0..8 {
                let (p1, p2, _) = recur(z);
                let step = p1 / ((2.0 * nf).sqrt() * p2);
                z -= step;
                if step.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            if n % 2 == 1 && i == n / 2 {
                z = 0.0;
            }
            let (_, p2, log_scale) = recur(z);
            let log_pp = ((2.0 * nf).sqrt() * p2).abs().ln() + log_scale;
            x[i] = z;
            x[n - 1 - i] = -z;
            log_w[i] = std::f64::consts::LN_2 - 2.0 * log_pp;
            log_w[n - 1 - i] = log_w[i];
        }
        let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
        let nodes = x.iter().map(|v| v * std::f64::consts::SQRT_2).collect();
        let weights = log_w.iter().map(|lw| lw.exp() * inv_sqrt_pi).collect();
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Approximates `E[phi(Z)]` for `Z ~ N(0, 1)`.
    pub fn expect<F: Fn(f64) -> f64>(&self, phi: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * phi(z))
            .sum()
    }
}

/// The map `G` for fixed `(p, lambda)`.
#[derive(Clone, Debug)]
pub struct DensityEvolution {
    p: f64,
    lambda: f64,
    quad: GaussHermite,
}

impl DensityEvolution {
    pub fn new(p: f64, lambda: f64, quad_nodes: usize) -> Result<Self> {
        Self::with_rule(p, lambda, GaussHermite::new(quad_nodes)?)
    }

    pub fn with_rule(p: f64, lambda: f64, quad: GaussHermite) -> Result<Self> {
        if !(p > 0.0 && p <= 0.5) {
            return Err(Error::InvalidParameter(format!(
                "p must lie in (0, 1/2], got {p}"
            )));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be nonnegative, got {lambda}"
            )));
        }
        Ok(Self { p, lambda, quad })
    }

    pub fn from_params(params: &ModelParams, quad_nodes: usize) -> Result<Self> {
        Self::new(params.p(), params.lambda(), quad_nodes)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Upper end of the range of `G`: `lambda / (p (1-p))`.
    pub fn mu_max(&self) -> f64 {
        self.lambda / (self.p * (1.0 - self.p))
    }

    /// `G(mu) / lambda`, clamped at 0.
    pub fn h(&self, mu: f64) -> f64 {
        assert!(mu >= 0.0, "mu must be nonnegative, got {mu}");
        if mu == 0.0 {
            return 0.0;
        }
        let p = self.p;
        let q = 1.0 - p;
        let s = mu.sqrt();
        // 1/(p + q w) - 1 = q (1 - w) / (p + q w) with 1 - w = -expm1(.)
        let mean = self.quad.expect(|z| {
            let t = s * z - 0.5 * mu;
            if t > 700.0 {
                -1.0
            } else {
                -q * t.exp_m1() / (p + q * t.exp())
            }
        });
        (mean / (q * q)).max(0.0)
    }

    pub fn g(&self, mu: f64) -> f64 {
        self.lambda * self.h(mu)
    }

    /// Central-difference slope of `G`, one-sided at 0.
    pub fn g_prime(&self, mu: f64) -> f64 {
        if mu == 0.0 {
            let step = 1e-6;
            return (4.0 * self.g(step) - self.g(2.0 * step) - 3.0 * self.g(0.0)) / (2.0 * step);
        }
        let step = (1e-5 * mu.max(1.0)).min(0.5 * mu);
        (self.g(mu + step) - self.g(mu - step)) / (2.0 * step)
    }

    /// Iterates `mu_{k+1} = G(mu_k)` from `mu_1 = q lambda / (p (1-p))`.
    pub fn iterate(&self, q: f64, tol: f64, max_iter: usize) -> Result<DensityEvolutionTrace> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidParameter(format!(
                "q must lie in [0, 1], got {q}"
            )));
        }
        let mut mus = vec![q * self.mu_max()];
        let mut converged = false;
        for _ in 0..max_iter {
            let last = *mus.last().unwrap();
            let next = self.g(last);
            mus.push(next);
            if (next - last).abs() < tol {
                converged = true;
                break;
            }
        }
        let converged_to = *mus.last().unwrap();
        let classification = if converged {
            let report = self.fixed_points();
            Some(report.nearest(converged_to))
        } else {
            None
        };
        Ok(DensityEvolutionTrace {
            q,
            mus,
            converged_to,
            iterations: 0,
            converged,
            classification,
        }
        .with_count())
    }

    /// Locates the fixed points of `G` on `(0, mu_max]` and classifies them.
    pub fn fixed_points(&self) -> FixedPointReport {
        self.fixed_points_on_grid(DEFAULT_GRID_POINTS)
    }

    pub fn fixed_points_on_grid(&self, grid_points: usize) -> FixedPointReport {
        let zero_slope = self.g_prime(0.0);
        let mut report = FixedPointReport {
            p: self.p,
            lambda: self.lambda,
            zero_stable: zero_slope.abs() < 1.0,
            zero_slope,
            beta: None,
            alpha: None,
            roots: Vec::new(),
            warnings: Vec::new(),
        };
        let hi = self.mu_max();
        if hi == 0.0 {
            return report;
        }
        let lo = hi * 1e-9;
        let ratio = (hi / lo).ln() / (grid_points - 1) as f64;
        let grid: Vec<f64> = (0..grid_points)
            .map(|i| {
                if i + 1 == grid_points {
                    hi
                } else {
                    lo * (ratio * i as f64).exp()
                }
            })
            .collect();
        let phi = |mu: f64| self.g(mu) - mu;
        let values: Vec<f64> = grid.iter().map(|&mu| phi(mu)).collect();

        let mut last_cell = None;
        for i in 0..grid_points - 1 {
            let (fa, fb) = (values[i], values[i + 1]);
            let root = if fa == 0.0 {
                Some(grid[i])
            } else if fa * fb < 0.0 {
                Some(bisect(&phi, grid[i], grid[i + 1], fa))
            } else {
                None
            };
            if let Some(mu) = root {
                if last_cell == Some(i.wrapping_sub(1)) {
                    report.warnings.push(format!(
                        "sign changes in adjacent grid cells near mu = {mu:.3e}; roots may be closer than the grid resolution"
                    ));
                }
                last_cell = Some(i);
                let slope = self.g_prime(mu);
                report.roots.push(FixedPoint {
                    mu,
                    slope,
                    stable: slope.abs() < 1.0,
                });
            }
        }
        report.alpha = report.roots.iter().rev().find(|r| r.stable).map(|r| r.mu);
        report.beta = report
            .roots
            .iter()
            .find(|r| !r.stable && report.alpha.is_none_or(|a| r.mu < a))
            .map(|r| r.mu);
        report
    }

    /// `beta p (1-p) / lambda`: the reveal fraction above which `mu_1 > beta`.
    pub fn q_threshold(&self) -> Result<f64> {
        let report = self.fixed_points();
        match (report.beta, report.alpha) {
            (Some(beta), Some(_)) => Ok(beta * self.p * (1.0 - self.p) / self.lambda),
            _ => Err(Error::Precondition(format!(
                "no unstable fixed point beta at p = {}, lambda = {}; the q-threshold needs lambda_sp(p) < lambda < 1",
                self.p, self.lambda
            ))),
        }
    }
}

fn bisect<F: Fn(f64) -> f64>(phi: &F, mut lo: f64, mut hi: f64, mut f_lo: f64) -> f64 {
    while hi - lo > 1e-12 * hi.max(1.0) * 1e-3 + 1e-15 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = phi(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Which fixed point a density-evolution run settled on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Zero,
    Alpha,
    BetaUnstableHit,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityEvolutionTrace {
    pub q: f64,
    pub mus: Vec<f64>,
    pub converged_to: f64,
    pub iterations: usize,
    pub converged: bool,
    pub classification: Option<Classification>,
}

impl DensityEvolutionTrace {
    fn with_count(mut self) -> Self {
        self.iterations = self.mus.len() - 1;
        self
    }

    /// CSV `k,mu_k` rows (k starts at 1).
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,mu_k")?;
        for (k, mu) in self.mus.iter().enumerate() {
            writeln!(w, "{},{}", k + 1, mu)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FixedPoint {
    pub mu: f64,
    pub slope: f64,
    pub stable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FixedPointReport {
    pub p: f64,
    pub lambda: f64,
    pub zero_stable: bool,
    pub zero_slope: f64,
    /// Smallest unstable positive fixed point below `alpha`.
    pub beta: Option<f64>,
    /// Largest stable positive fixed point.
    pub alpha: Option<f64>,
    /// Every positive fixed point found, ascending.
    pub roots: Vec<FixedPoint>,
    pub warnings: Vec<String>,
}

impl FixedPointReport {
    pub fn nearest(&self, mu: f64) -> Classification {
        let mut best = (mu.abs(), Classification::Zero);
        for (v, c) in [
            (self.alpha, Classification::Alpha),
            (self.beta, Classification::BetaUnstableHit),
        ] {
            if let Some(v) = v {
                if (mu - v).abs() < best.0 {
                    best = ((mu - v).abs(), c);
                }
            }
        }
        best.1
    }
}

/// `p* = 1/2 - 1/(2 sqrt 3)`, the root of `1 - 6 p (1-p)` in `(0, 1/2)`.
pub fn p_star() -> f64 {
    0.5 - 0.5 / 3f64.sqrt()
}

/// `2 P(N(mu/2, mu) > 0) - 1 = 2 Phi(sqrt(mu)/2) - 1`.
pub fn success_from_mu(mu: f64) -> f64 {
    assert!(mu >= 0.0, "mu must be nonnegative, got {mu}");
    if mu == 0.0 {
        return 0.0;
    }
    erf(mu.sqrt() / (2.0 * std::f64::consts::SQRT_2))
}

/// Spinodal `lambda_sp(p) = min(1, inf_{mu > 0} mu / h(mu))`, minimised over
/// `(0, 10/(p(1-p))]` by a log grid followed by golden-section refinement.
pub fn spinodal(p: f64, tol: f64, quad_nodes: usize) -> Result<f64> {
    let de = DensityEvolution::new(p, 1.0, quad_nodes)?;
    Ok(spinodal_with(&de, tol))
}

fn spinodal_with(de: &DensityEvolution, tol: f64) -> f64 {
    let p = de.p();
    let mu_hi = 10.0 / (p * (1.0 - p));
    let mu_lo = 1e-4;
    let ratio = |mu: f64| {
        let h = de.h(mu);
        if h > 0.0 {
            mu / h
        } else {
            f64::INFINITY
        }
    };
    let points = 400;
    let step = (mu_hi / mu_lo).ln() / (points - 1) as f64;
    let grid: Vec<f64> = (0..points)
        .map(|i| mu_lo * (step * i as f64).exp())
        .collect();
    let values: Vec<f64> = grid.iter().map(|&m| ratio(m)).collect();
    let (best, _) =
        values.iter().enumerate().fold(
            (0, f64::INFINITY),
            |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc },
        );
    let mut lo = grid[best.saturating_sub(1)];
    let mut hi = grid[(best + 1).min(points - 1)];
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (ratio(x1), ratio(x2));
    while hi - lo > tol * lo.max(1e-3) {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = ratio(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = ratio(x2);
        }
    }
    values[best].min(f1).min(f2).min(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhaseRow {
    pub p: f64,
    pub lambda_sp: f64,
    pub lambda_ks: f64,
}

/// One `(p, lambda_sp, lambda_ks = 1)` row per grid value; rows are computed in parallel.
pub fn phase_diagram(p_grid: &[f64], tol: f64, quad_nodes: usize) -> Result<Vec<PhaseRow>> {
    let quad = GaussHermite::new(quad_nodes)?;
    p_grid
        .par_iter()
        .map(|&p| {
            let de = DensityEvolution::with_rule(p, 1.0, quad.clone())?;
            Ok(PhaseRow {
                p,
                lambda_sp: spinodal_with(&de, tol),
                lambda_ks: 1.0,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PerfRow {
    pub lambda: f64,
    pub alpha: Option<f64>,
    pub psucc_alpha: f64,
    pub beta: Option<f64>,
    pub q_threshold: Option<f64>,
}

/// Per-lambda stable fixed point `alpha`, the success probability it implies,
/// and the q-threshold `beta p (1-p) / lambda` where `beta` exists.
pub fn perf_curve(p: f64, lambdas: &[f64], quad_nodes: usize) -> Result<Vec<PerfRow>> {
    let quad = GaussHermite::new(quad_nodes)?;
    lambdas
        .par_iter()
        .map(|&lambda| {
            let de = DensityEvolution::with_rule(p, lambda, quad.clone())?;
            let fp = de.fixed_points();
            let q_threshold = match (fp.beta, fp.alpha) {
                (Some(beta), Some(_)) => Some(beta * p * (1.0 - p) / lambda),
                _ => None,
            };
            Ok(PerfRow {
                lambda,
                alpha: fp.alpha,
                psucc_alpha: fp.alpha.map_or(0.0, success_from_mu),
                beta: fp.beta,
                q_threshold,
            })
        })
        .collect()
}
