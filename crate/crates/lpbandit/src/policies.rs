//! Bandit policies measured against the lower bound: a uniform-vertex
//! baseline, explore-then-commit, a LinUCB-style optimism policy with
//! approximate UCB maximization over the ball, and the fixed test policies
//! (oracle, anti-oracle, origin) whose regret is known in closed form.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::geometry::{argmax_linear, project_lp_hint, sample_boundary, vertex_action, LpBall, Point};
use crate::instance::HardInstance;

/// Behavioral contract: `act` is called once per round, then `update` with
/// the realized reward. Configuration is immutable after construction.
pub trait Policy {
    fn name(&self) -> &'static str;
    fn act(&mut self, t: usize, rng: &mut ChaCha12Rng) -> Result<Point>;
    fn update(&mut self, t: usize, action: &[f64], reward: f64);
}

/// Uniform draw from the 2^d equal-coordinate boundary points.
pub fn uniform_vertex_act<R: Rng + ?Sized>(ball: &LpBall, rng: &mut R) -> Point {
    let signs: Vec<i8> = (0..ball.dim())
        .map(|_| if rng.random::<bool>() { 1 } else { -1 })
        .collect();
    vertex_action(ball, &signs)
}

/// Baseline: a fresh uniform vertex every round, no learning.
pub struct UniformVertex {
    ball: LpBall,
}

impl UniformVertex {
    pub fn new(ball: LpBall) -> Self {
        Self { ball }
    }
}

impl Policy for UniformVertex {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn act(&mut self, _t: usize, rng: &mut ChaCha12Rng) -> Result<Point> {
        Ok(uniform_vertex_act(&self.ball, rng))
    }

    fn update(&mut self, _t: usize, _action: &[f64], _reward: f64) {}
}

/// Regularized least squares behind the optimism policy: V_t = lambda I +
/// sum x xT, moment = sum x r, and theta_hat = V_t^-1 moment after every
/// update (full re-factorization; d is small).
#[derive(Debug, Clone)]
pub struct RidgeState {
    gram: DMatrix<f64>,
    moment: DVector<f64>,
    theta_hat: DVector<f64>,
    round: usize,
    lambda: f64,
}

impl RidgeState {
    pub fn new(d: usize, lambda: f64) -> Result<Self> {
        if lambda <= 0.0 || !lambda.is_finite() {
            return Err(Error::InvalidInput(format!(
                "ridge regularizer lambda = {lambda} must be positive"
            )));
        }
        Ok(Self {
            gram: DMatrix::identity(d, d) * lambda,
            moment: DVector::zeros(d),
            theta_hat: DVector::zeros(d),
            round: 0,
            lambda,
        })
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn theta_hat(&self) -> &[f64] {
        self.theta_hat.as_slice()
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// Rank-one data update followed by a fresh solve of the normal equations.
pub fn ridge_update(state: &mut RidgeState, action: &[f64], reward: f64) -> Result<()> {
    let x = DVector::from_column_slice(action);
    state.gram.ger(1.0, &x, &x, 1.0);
    state.moment.axpy(reward, &x, 1.0);
    state.round += 1;
    let chol = Cholesky::new(state.gram.clone()).ok_or(Error::NumericalFailure {
        context: "ridge gram factorization",
        residual: f64::NAN,
        iterations: 0,
    })?;
    state.theta_hat = chol.solve(&state.moment);
    Ok(())
}

/// Explore-then-commit: m rounds of uniform vertices, then the greedy action
/// under the unregularized least-squares estimate, frozen for the rest of
/// the horizon. The pseudo-inverse solve recovers theta exactly from
/// noiseless spanning data.
pub struct Etc {
    ball: LpBall,
    m: usize,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    committed: Option<Point>,
}

impl Etc {
    /// The conventional exploration length for this family of baselines.
    pub fn default_m(d: usize, n: usize) -> usize {
        (d as f64 * (n as f64).sqrt()).ceil() as usize
    }

    pub fn new(ball: LpBall, m: usize) -> Result<Self> {
        if m < ball.dim() {
            return Err(Error::InvalidInput(format!(
                "exploration length m = {m} must be at least d = {}",
                ball.dim()
            )));
        }
        Ok(Self {
            ball,
            m,
            actions: Vec::new(),
            rewards: Vec::new(),
            committed: None,
        })
    }

    fn commit(&mut self) -> Result<Point> {
        let d = self.ball.dim();
        let mut gram = DMatrix::zeros(d, d);
        let mut moment = DVector::zeros(d);
        for (row, &r) in self.actions.chunks_exact(d).zip(&self.rewards) {
            let x = DVector::from_column_slice(row);
            gram.ger(1.0, &x, &x, 1.0);
            moment.axpy(r, &x, 1.0);
        }
        // Pseudo-inverse through the symmetric eigendecomposition; rank
        // deficiency maps to the minimum-norm solution.
        let eig = gram.symmetric_eigen();
        let mut theta_hat = DVector::zeros(d);
        let scale = eig.eigenvalues.amax().max(1.0);
        for j in 0..d {
            let ev = eig.eigenvalues[j];
            if ev > 1e-12 * scale {
                let u = eig.eigenvectors.column(j);
                theta_hat.axpy(u.dot(&moment) / ev, &u, 1.0);
            }
        }
        let (point, _) = argmax_linear(&self.ball, theta_hat.as_slice())?;
        Ok(point)
    }
}

impl Policy for Etc {
    fn name(&self) -> &'static str {
        "etc"
    }

    fn act(&mut self, t: usize, rng: &mut ChaCha12Rng) -> Result<Point> {
        if t < self.m {
            return Ok(uniform_vertex_act(&self.ball, rng));
        }
        if self.committed.is_none() {
            self.committed = Some(self.commit()?);
        }
        Ok(self.committed.clone().expect("committed above"))
    }

    fn update(&mut self, t: usize, action: &[f64], reward: f64) {
        if t < self.m {
            self.actions.extend_from_slice(action);
            self.rewards.push(reward);
        }
    }
}

/// Approximate maximizer of f(x) = x.theta_hat + beta sqrt(xT gram^-1 x)
/// over the ball, by multi-start projected gradient ascent. f is convex, so
/// the maximum sits on the boundary; the greedy anchor argmax_linear(theta_
/// hat) is always among the candidates, which makes the result no worse than
/// greedy regardless of how the ascents fare.
pub fn ucb_maximize<R: Rng + ?Sized>(
    ball: &LpBall,
    theta_hat: &[f64],
    gram: &DMatrix<f64>,
    beta: f64,
    starts: usize,
    rng: &mut R,
) -> Result<(Point, f64)> {
    if beta < 0.0 || !beta.is_finite() {
        return Err(Error::InvalidInput(format!(
            "confidence width beta = {beta} must be finite and nonnegative"
        )));
    }
    let chol = Cholesky::new(gram.clone()).ok_or(Error::NumericalFailure {
        context: "ucb gram factorization",
        residual: f64::NAN,
        iterations: 0,
    })?;
    let (anchor, _) = argmax_linear(ball, theta_hat)?;
    if beta == 0.0 {
        let value = objective(theta_hat, &chol, beta, anchor.coords());
        return Ok((anchor, value));
    }

    let mut best = anchor.clone();
    let mut best_value = objective(theta_hat, &chol, beta, anchor.coords());
    let mut converged_any = false;

    let starts = starts.max(1);
    for k in 0..starts {
        let start = if k == 0 {
            anchor.clone()
        } else if k + 1 < starts {
            uniform_vertex_act(ball, rng)
        } else {
            sample_boundary(ball, rng)
        };
        if let Some((point, value)) = ascend_ucb(ball, theta_hat, &chol, beta, start) {
            converged_any = true;
            // 1e-12 ties keep the earlier start, for determinism.
            if value - best_value > 1e-12 * best_value.abs().max(1.0) {
                best = point;
                best_value = value;
            }
        }
    }
    if !converged_any {
        return Err(Error::NumericalFailure {
            context: "ucb_maximize ascent",
            residual: best_value,
            iterations: UCB_MAX_ITER,
        });
    }
    Ok((best, best_value))
}

const UCB_MAX_ITER: usize = 500;

fn objective(theta_hat: &[f64], chol: &Cholesky<f64, Dyn>, beta: f64, x: &[f64]) -> f64 {
    let xv = DVector::from_column_slice(x);
    let vinv_x = chol.solve(&xv);
    let quad = xv.dot(&vinv_x).max(0.0);
    let lin: f64 = x.iter().zip(theta_hat).map(|(a, b)| a * b).sum();
    lin + beta * quad.sqrt()
}

/// Single ascent run with backtracking line search and a warm-started
/// projection dual. Returns None when the iteration cap is hit while the
/// objective is still visibly improving.
fn ascend_ucb(
    ball: &LpBall,
    theta_hat: &[f64],
    chol: &Cholesky<f64, Dyn>,
    beta: f64,
    start: Point,
) -> Option<(Point, f64)> {
    let d = ball.dim();
    let mut x = start.into_coords();
    let mut f = objective(theta_hat, chol, beta, &x);
    let grad_scale: f64 = theta_hat.iter().map(|t| t * t).sum::<f64>().sqrt() + beta;
    let mut eta = ball.radius() / grad_scale.max(1e-9);
    let mut hint = None;
    let mut candidate = vec![0.0; d];

    for _ in 0..UCB_MAX_ITER {
        // Gradient of the optimism objective; the quadratic term's gradient
        // is V^-1 x normalized by the current ellipsoid norm.
        let xv = DVector::from_column_slice(&x);
        let vinv_x = chol.solve(&xv);
        let quad = xv.dot(&vinv_x).max(1e-300);
        let root = quad.sqrt();
        let mut grad: Vec<f64> = theta_hat
            .iter()
            .zip(vinv_x.iter())
            .map(|(t, v)| t + beta * v / root)
            .collect();
        let gnorm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm == 0.0 {
            return Some((Point::new(x).ok()?, f));
        }
        for g in &mut grad {
            *g /= gnorm;
        }

        let mut improved = false;
        for _ in 0..40 {
            for i in 0..d {
                candidate[i] = x[i] + eta * grad[i];
            }
            let (proj, lam) = project_lp_hint(ball, &candidate, hint).ok()?;
            let f_new = objective(theta_hat, chol, beta, proj.coords());
            if f_new > f {
                let gain = f_new - f;
                x.copy_from_slice(proj.coords());
                hint = Some(lam);
                f = f_new;
                improved = true;
                // Step-size-normalized improvement as the stopping signal.
                if gain / eta < 1e-10 * f.abs().max(1.0) {
                    return Some((Point::new(x).ok()?, f));
                }
                eta *= 1.5;
                break;
            }
            eta *= 0.5;
            if eta < 1e-16 * ball.radius() {
                // No ascent direction survives the projection: local max.
                return Some((Point::new(x).ok()?, f));
            }
        }
        if !improved {
            return Some((Point::new(x).ok()?, f));
        }
    }
    None
}

/// Confidence-width schedule and hyperparameters for the optimism policy.
#[derive(Debug, Clone, Copy)]
pub struct LinUcbConfig {
    pub lambda: f64,
    pub delta: f64,
    pub sigma: f64,
    /// Upper estimate of |theta|_2; the instance's true norm when known.
    pub s_norm: f64,
    pub restarts: usize,
}

impl Default for LinUcbConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            delta: 0.01,
            sigma: 1.0,
            s_norm: 1.0,
            restarts: 8,
        }
    }
}

impl LinUcbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda <= 0.0 || !(0.0..1.0).contains(&self.delta) || self.delta == 0.0 {
            return Err(Error::InvalidInput(
                "linucb requires lambda > 0 and delta in (0, 1)".into(),
            ));
        }
        if self.sigma < 0.0 || self.s_norm < 0.0 || self.restarts == 0 {
            return Err(Error::InvalidInput(
                "linucb requires sigma >= 0, s >= 0, restarts >= 1".into(),
            ));
        }
        Ok(())
    }

    /// beta_t = sigma sqrt(d log((1 + t c^2/lambda)/delta)) + sqrt(lambda) S,
    /// nondecreasing in t.
    pub fn beta(&self, d: usize, t: usize, c: f64) -> f64 {
        let grown = (1.0 + t as f64 * c * c / self.lambda) / self.delta;
        self.sigma * (d as f64 * grown.ln()).sqrt() + self.lambda.sqrt() * self.s_norm
    }
}

/// Optimism in the face of uncertainty over the ball.
pub struct LinUcb {
    ball: LpBall,
    state: RidgeState,
    config: LinUcbConfig,
}

impl LinUcb {
    pub fn new(ball: LpBall, config: LinUcbConfig) -> Result<Self> {
        config.validate()?;
        let state = RidgeState::new(ball.dim(), config.lambda)?;
        Ok(Self { ball, state, config })
    }

    pub fn state(&self) -> &RidgeState {
        &self.state
    }
}

impl Policy for LinUcb {
    fn name(&self) -> &'static str {
        "linucb"
    }

    fn act(&mut self, t: usize, rng: &mut ChaCha12Rng) -> Result<Point> {
        let beta = self.config.beta(self.ball.dim(), t, self.ball.radius());
        let (point, _) = ucb_maximize(
            &self.ball,
            self.state.theta_hat(),
            self.state.gram(),
            beta,
            self.config.restarts,
            rng,
        )?;
        Ok(point)
    }

    fn update(&mut self, _t: usize, action: &[f64], reward: f64) {
        ridge_update(&mut self.state, action, reward).expect("gram stays SPD for lambda > 0");
    }
}

/// Plays the instance's optimal vertex every round; zero regret.
pub struct Oracle {
    action: Point,
}

impl Oracle {
    pub fn new(inst: &HardInstance) -> Self {
        Self {
            action: vertex_action(inst.family().ball(), inst.signs()),
        }
    }
}

impl Policy for Oracle {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn act(&mut self, _t: usize, _rng: &mut ChaCha12Rng) -> Result<Point> {
        Ok(self.action.clone())
    }

    fn update(&mut self, _t: usize, _action: &[f64], _reward: f64) {}
}

/// Plays the sign-flipped vertex every round; the regret chain is tight on it.
pub struct AntiOracle {
    action: Point,
}

impl AntiOracle {
    pub fn new(inst: &HardInstance) -> Self {
        let flipped: Vec<i8> = inst.signs().iter().map(|s| -s).collect();
        Self {
            action: vertex_action(inst.family().ball(), &flipped),
        }
    }
}

impl Policy for AntiOracle {
    fn name(&self) -> &'static str {
        "anti-oracle"
    }

    fn act(&mut self, _t: usize, _rng: &mut ChaCha12Rng) -> Result<Point> {
        Ok(self.action.clone())
    }

    fn update(&mut self, _t: usize, _action: &[f64], _reward: f64) {}
}

/// Plays the origin every round; forfeits the full optimal value.
pub struct OriginPolicy {
    d: usize,
}

impl OriginPolicy {
    pub fn new(d: usize) -> Self {
        Self { d }
    }
}

impl Policy for OriginPolicy {
    fn name(&self) -> &'static str {
        "origin"
    }

    fn act(&mut self, _t: usize, _rng: &mut ChaCha12Rng) -> Result<Point> {
        Ok(Point::origin(self.d))
    }

    fn update(&mut self, _t: usize, _action: &[f64], _reward: f64) {}
}
