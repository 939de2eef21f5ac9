//! Property sweeps behind the verify-lemmas and oracle-check subcommands:
//! randomized checks of the squared-gap inequality, the norm-equivalence
//! bound, the dual-norm identity, and closed-form-vs-brute-force optimality.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::bruteforce::{boundary_grid_max, brute_force_linear_max};
use crate::error::Result;
use crate::geometry::{
    argmax_linear, dual_exponent, lp_norm, lemma_trick_slack, norm_equivalence_slack,
    sample_feasible, LpBall,
};
use crate::seeding::{derive_seed, policy_tag};
use crate::util::INEQ_TOL;

/// The (d, p, c) combinations the lemma sweep covers.
pub const LEMMA_GRID_D: [usize; 3] = [2, 4, 8];
pub const LEMMA_GRID_P: [f64; 3] = [1.5, 2.0, 4.0];
pub const LEMMA_GRID_C: [f64; 3] = [0.5, 1.0, 2.0];

/// Worst residual seen for one inequality family (most negative = worst).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WorstResidual {
    pub residual: f64,
    pub d: usize,
    pub p: f64,
    pub c: f64,
}

impl WorstResidual {
    fn start() -> Self {
        Self {
            residual: f64::INFINITY,
            d: 0,
            p: 0.0,
            c: 0.0,
        }
    }

    fn observe(&mut self, residual: f64, ball: &LpBall) {
        if residual < self.residual {
            *self = Self {
                residual,
                d: ball.dim(),
                p: ball.exponent(),
                c: ball.radius(),
            };
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaSweepReport {
    pub trials_per_combo: usize,
    pub combos: usize,
    pub checks: usize,
    pub violations: usize,
    pub worst_trick: WorstResidual,
    pub worst_norm_equivalence: WorstResidual,
    pub worst_dual_identity: WorstResidual,
}

impl LemmaSweepReport {
    pub fn pass(&self) -> bool {
        self.violations == 0
    }
}

/// Runs `trials` random checks per (d, p, c) combination: the squared-gap
/// inequality at a random feasible point and sign pattern, the squared-norm
/// bound at the same point, and the dual-norm identity for a Gaussian
/// direction. Counts every residual below -tolerance as a violation.
pub fn verify_lemmas(trials: usize, master_seed: u64) -> Result<LemmaSweepReport> {
    let mut checks = 0usize;
    let mut violations = 0usize;
    let mut worst_trick = WorstResidual::start();
    let mut worst_ne = WorstResidual::start();
    let mut worst_dual = WorstResidual::start();

    for &d in &LEMMA_GRID_D {
        for &p in &LEMMA_GRID_P {
            for &c in &LEMMA_GRID_C {
                let ball = LpBall::new(d, p, c)?;
                let seed = derive_seed(
                    master_seed,
                    &[policy_tag("verify-lemmas"), d as u64, p.to_bits(), c.to_bits()],
                );
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                let q = dual_exponent(p)?;
                for _ in 0..trials {
                    let x = sample_feasible(&ball, &mut rng);
                    let signs: Vec<i8> =
                        (0..d).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();

                    let r_trick = lemma_trick_slack(&ball, x.coords(), &signs);
                    worst_trick.observe(r_trick, &ball);
                    checks += 1;
                    if r_trick < -INEQ_TOL {
                        violations += 1;
                    }

                    let r_ne = norm_equivalence_slack(&ball, x.coords());
                    worst_ne.observe(r_ne, &ball);
                    checks += 1;
                    if r_ne < -INEQ_TOL {
                        violations += 1;
                    }

                    let theta: Vec<f64> =
                        (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                    let (_, value) = argmax_linear(&ball, &theta)?;
                    let expected = c * lp_norm(&theta, q)?;
                    let scale = value.abs().max(expected.abs()).max(1.0);
                    let r_dual = -((value - expected).abs() / scale);
                    worst_dual.observe(r_dual, &ball);
                    checks += 1;
                    if r_dual < -INEQ_TOL {
                        violations += 1;
                    }
                }
            }
        }
    }

    Ok(LemmaSweepReport {
        trials_per_combo: trials,
        combos: LEMMA_GRID_D.len() * LEMMA_GRID_P.len() * LEMMA_GRID_C.len(),
        checks,
        violations,
        worst_trick,
        worst_norm_equivalence: worst_ne,
        worst_dual_identity: worst_dual,
    })
}

/// Relative tolerance for closed form vs multi-start ascent.
pub const ORACLE_RTOL: f64 = 1e-6;
/// The boundary grid is a finite lower bound on the maximum: it must never
/// beat the closed form, and coverage keeps it within this factor below.
pub const GRID_COVERAGE_RTOL: f64 = 5e-2;
/// Gradient-ascent restarts for the independent maximizer.
pub const ORACLE_STARTS: usize = 64;
/// Dense boundary grid size used when d <= 3.
pub const GRID_POINTS: usize = 100_000;

#[derive(Debug, Clone, Serialize)]
pub struct OracleCheckReport {
    pub instances: usize,
    pub grid_checked: usize,
    pub max_rel_err: f64,
    pub failures: Vec<String>,
}

impl OracleCheckReport {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Draws random instances (d in 1..=6, p in [1.1, 20], c in [0.1, 10],
/// Gaussian direction) and compares the closed-form maximizer's value with
/// projected gradient ascent; when d <= 3, also against a dense boundary
/// grid.
pub fn oracle_check(instances: usize, master_seed: u64) -> Result<OracleCheckReport> {
    let mut max_rel_err = 0.0f64;
    let mut failures = Vec::new();
    let mut grid_checked = 0usize;

    for idx in 0..instances {
        let seed = derive_seed(master_seed, &[policy_tag("oracle-check"), idx as u64]);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let d = rng.random_range(1..=6usize);
        let p = rng.random_range(1.1..=20.0f64);
        let c = rng.random_range(0.1..=10.0f64);
        let ball = LpBall::new(d, p, c)?;
        let theta: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();

        let (_, closed) = argmax_linear(&ball, &theta)?;
        let (_, ascent) = brute_force_linear_max(&ball, &theta, ORACLE_STARTS, &mut rng)?;
        let scale = closed.abs().max(ascent.abs()).max(1e-12);
        let rel = (closed - ascent).abs() / scale;
        max_rel_err = max_rel_err.max(rel);
        if rel > ORACLE_RTOL {
            failures.push(format!(
                "instance {idx}: d={d} p={p:.3} c={c:.3}: closed {closed} vs ascent {ascent} (rel {rel:.2e})"
            ));
        }

        if d <= 3 {
            grid_checked += 1;
            let grid = boundary_grid_max(&ball, &theta, GRID_POINTS)?;
            // The grid samples the boundary, so it can only undershoot the
            // true maximum; beating the closed form means the closed form is
            // wrong.
            if grid > closed + ORACLE_RTOL * scale {
                failures.push(format!(
                    "instance {idx}: d={d} p={p:.3} c={c:.3}: grid {grid} beats closed form {closed}"
                ));
            }
            if grid < closed - GRID_COVERAGE_RTOL * scale {
                failures.push(format!(
                    "instance {idx}: d={d} p={p:.3} c={c:.3}: grid {grid} implausibly far below {closed}"
                ));
            }
        }
    }

    Ok(OracleCheckReport {
        instances,
        grid_checked,
        max_rel_err,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lemma_sweep_small_run_clean() {
        let report = verify_lemmas(50, 3).unwrap();
        assert_eq!(report.combos, 27);
        assert_eq!(report.checks, 27 * 50 * 3);
        assert!(report.pass(), "violations: {report:?}");
        // Residuals can be tiny but never beyond tolerance.
        assert!(report.worst_trick.residual >= -INEQ_TOL);
        assert!(report.worst_norm_equivalence.residual >= -INEQ_TOL);
        assert!(report.worst_dual_identity.residual >= -INEQ_TOL);
    }

    #[test]
    fn lemma_sweep_deterministic() {
        let a = verify_lemmas(20, 9).unwrap();
        let b = verify_lemmas(20, 9).unwrap();
        assert_eq!(a.worst_trick.residual.to_bits(), b.worst_trick.residual.to_bits());
        assert_eq!(
            a.worst_dual_identity.residual.to_bits(),
            b.worst_dual_identity.residual.to_bits()
        );
    }

    #[test]
    fn oracle_check_small_run_clean() {
        let report = oracle_check(20, 4).unwrap();
        assert!(report.pass(), "failures: {:?}", report.failures);
        assert!(report.max_rel_err <= ORACLE_RTOL);
        assert!(report.grid_checked > 0);
    }
}
