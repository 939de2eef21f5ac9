//! L^p-ball geometry: norms, dual exponents, the closed-form linear maximizer,
//! Euclidean projection onto the ball, and the two ball inequalities as
//! testable predicates.

use rand::Rng;

use crate::error::{Error, Result};
use crate::util::normalized_slack;

/// Exponent range accepted by [`LpBall::new`]. The closed forms degenerate
/// numerically as p -> 1 (q -> inf) and p -> inf (q -> 1).
pub const P_MIN: f64 = 1.01;
pub const P_MAX: f64 = 100.0;

/// Relative feasibility tolerance on |x|_p <= c.
pub const FEASIBILITY_RTOL: f64 = 1e-9;

/// The action set {x in R^d : |x|_p <= c}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpBall {
    d: usize,
    p: f64,
    c: f64,
}

impl LpBall {
    pub fn new(d: usize, p: f64, c: f64) -> Result<Self> {
        if d < 1 {
            return Err(Error::InvalidInput("ball dimension must be >= 1".into()));
        }
        if !p.is_finite() || !(P_MIN..=P_MAX).contains(&p) {
            return Err(Error::InvalidInput(format!(
                "ball exponent p = {p} outside accepted range [{P_MIN}, {P_MAX}]"
            )));
        }
        if !c.is_finite() || c <= 0.0 {
            return Err(Error::InvalidInput(format!("ball radius c = {c} must be positive")));
        }
        Ok(Self { d, p, c })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn exponent(&self) -> f64 {
        self.p
    }

    pub fn radius(&self) -> f64 {
        self.c
    }

    /// Coordinate magnitude c / d^(1/p) of the equal-coordinate boundary points.
    pub fn vertex_coord(&self) -> f64 {
        self.c / (self.d as f64).powf(1.0 / self.p)
    }

    /// Feasibility check with relative round-off tolerance.
    pub fn is_feasible(&self, x: &[f64]) -> bool {
        match lp_norm(x, self.p) {
            Ok(norm) => x.len() == self.d && norm <= self.c * (1.0 + FEASIBILITY_RTOL),
            Err(_) => false,
        }
    }
}

/// A point of the action space. Coordinates are finite by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("point has non-finite coordinates".into()));
        }
        Ok(Self { coords })
    }

    pub fn origin(d: usize) -> Self {
        Self { coords: vec![0.0; d] }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

impl AsRef<[f64]> for Point {
    fn as_ref(&self) -> &[f64] {
        &self.coords
    }
}

/// (sum_i |x_i|^p)^(1/p), computed with max-scaling so large exponents
/// neither overflow nor underflow the intermediate powers.
pub fn lp_norm(x: &[f64], p: f64) -> Result<f64> {
    if !p.is_finite() || p < 1.0 {
        return Err(Error::InvalidInput(format!("lp_norm requires finite p >= 1, got {p}")));
    }
    let mut m = 0.0f64;
    for &v in x {
        if !v.is_finite() {
            return Err(Error::InvalidInput("lp_norm input has non-finite coordinate".into()));
        }
        m = m.max(v.abs());
    }
    if m == 0.0 {
        return Ok(0.0);
    }
    let sum: f64 = x.iter().map(|&v| (v.abs() / m).powf(p)).sum();
    Ok(m * sum.powf(1.0 / p))
}

/// The Holder-conjugate exponent q with 1/p + 1/q = 1.
pub fn dual_exponent(p: f64) -> Result<f64> {
    if !p.is_finite() || p <= 1.0 {
        return Err(Error::InvalidExponent(p));
    }
    Ok(p / (p - 1.0))
}

/// Closed-form maximizer of x . theta over the ball, with the optimal value.
///
/// The maximizer is x*_i = c |theta_i|^(1/(p-1)) sign(theta_i) / (sum_j |theta_j|^q)^(1/p)
/// and the value is c |theta|_q with q the dual exponent. theta = 0 returns the
/// origin with value 0. Powers are taken on coordinates scaled by max |theta_i|,
/// which keeps them in [0, 1] for any p in the accepted range.
pub fn argmax_linear(ball: &LpBall, theta: &[f64]) -> Result<(Point, f64)> {
    if theta.len() != ball.dim() {
        return Err(Error::InvalidInput(format!(
            "theta length {} does not match ball dimension {}",
            theta.len(),
            ball.dim()
        )));
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("theta has non-finite coordinates".into()));
    }
    let m = theta.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    if m == 0.0 {
        return Ok((Point::origin(ball.dim()), 0.0));
    }
    let p = ball.exponent();
    let q = dual_exponent(p)?;
    let c = ball.radius();

    // u_i = |theta_i| / m in [0, 1]; t_i = u_i^(1/(p-1)); then u_i^q = t_i * u_i.
    let mut t = Vec::with_capacity(theta.len());
    let mut s_q = 0.0f64;
    for &v in theta {
        let u = v.abs() / m;
        let ti = if u == 0.0 { 0.0 } else { u.powf(1.0 / (p - 1.0)) };
        s_q += ti * u;
        t.push(ti);
    }
    let denom = s_q.powf(1.0 / p);
    let coords: Vec<f64> = theta
        .iter()
        .zip(&t)
        .map(|(&v, &ti)| c * ti * v.signum() / denom)
        .collect();
    let value = c * m * s_q.powf(1.0 / q);
    Ok((Point::new(coords)?, value))
}

/// The equal-magnitude boundary point with coordinates (c / d^(1/p)) s_i.
/// Its p-norm is exactly c.
pub fn vertex_action(ball: &LpBall, signs: &[i8]) -> Point {
    assert_eq!(signs.len(), ball.dim(), "sign pattern length must equal ball dimension");
    assert!(signs.iter().all(|&s| s == 1 || s == -1), "signs must be +1 or -1");
    let a = ball.vertex_coord();
    Point {
        coords: signs.iter().map(|&s| a * f64::from(s)).collect(),
    }
}

/// Euclidean projection onto the ball. Returns `y` unchanged when it is
/// already feasible; otherwise solves the KKT system by scalar root-finding
/// on the Lagrange multiplier (bracketed bisection refined by Newton steps).
pub fn project_lp(ball: &LpBall, y: &[f64]) -> Result<Point> {
    project_lp_hint(ball, y, None).map(|(point, _)| point)
}

/// Absolute tolerance on the projection constraint residual |x|_p - c,
/// scale-guarded by max(1, c).
const PROJECTION_TOL: f64 = 1e-12;
const PROJECTION_MAX_ITER: usize = 200;

/// Projection with a warm-start hint for the dual multiplier. Returns the
/// multiplier alongside the point so iterative callers can chain hints.
pub(crate) fn project_lp_hint(ball: &LpBall, y: &[f64], hint: Option<f64>) -> Result<(Point, f64)> {
    if y.len() != ball.dim() {
        return Err(Error::InvalidInput(format!(
            "projection input length {} does not match ball dimension {}",
            y.len(),
            ball.dim()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("projection input has non-finite coordinates".into()));
    }
    let p = ball.exponent();
    let c = ball.radius();
    let norm = lp_norm(y, p)?;
    if norm <= c {
        return Ok((Point { coords: y.to_vec() }, 0.0));
    }

    // p = 2: the projection is radial.
    if p == 2.0 {
        let scale = c / norm;
        let coords = y.iter().map(|&v| v * scale).collect();
        return Ok((Point { coords }, (norm / c - 1.0) / 2.0));
    }

    // Scale so the largest magnitude is 1; multipliers transform as
    // lambda_scaled = lambda * s^(p-2).
    let s = y.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    let z: Vec<f64> = y.iter().map(|&v| v.abs() / s).collect();
    let c_scaled = c / s;
    let target = c_scaled.powf(p);
    let tol = PROJECTION_TOL * c.max(1.0);

    let mut solver = DualSolver::new(p, &z);
    let mut iterations = 0usize;

    // Bracket the root of h(lambda) = sum a_i(lambda)^p - target. h is
    // strictly decreasing with h(0) > 0.
    let mut lo = 0.0f64;
    let mut hi = hint.map(|l| (l * s.powf(p - 2.0)).max(1e-6)).unwrap_or(1.0);
    loop {
        iterations += 1;
        if iterations > PROJECTION_MAX_ITER {
            return Err(Error::NumericalFailure {
                context: "project_lp bracketing",
                residual: solver.current_norm() * s - c,
                iterations,
            });
        }
        let (h, _) = solver.eval(hi, target);
        if h < 0.0 {
            break;
        }
        lo = hi;
        hi *= 8.0;
    }

    // Safeguarded Newton within the bracket.
    let mut lambda = 0.5 * (lo + hi);
    loop {
        iterations += 1;
        let (h, dh) = solver.eval(lambda, target);
        let norm_now = solver.current_norm() * s;
        if (norm_now - c).abs() <= tol {
            break;
        }
        if iterations > PROJECTION_MAX_ITER {
            return Err(Error::NumericalFailure {
                context: "project_lp dual root-finding",
                residual: norm_now - c,
                iterations,
            });
        }
        if h > 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
        let newton = lambda - h / dh;
        lambda = if dh < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }

    let coords: Vec<f64> = y
        .iter()
        .zip(solver.solution())
        .map(|(&v, &a)| v.signum() * a * s)
        .collect();
    let lambda_unscaled = lambda / s.powf(p - 2.0);
    Ok((Point { coords }, lambda_unscaled))
}

/// Per-coordinate KKT solver for the projection dual. For a fixed multiplier
/// each coordinate magnitude solves a + lambda p a^(p-1) = z on [0, z];
/// solutions are cached as warm starts for the next multiplier.
struct DualSolver {
    p: f64,
    z: Vec<f64>,
    a: Vec<f64>,
    last_sum: f64, // sum a_i^p from the latest eval
}

impl DualSolver {
    fn new(p: f64, z: &[f64]) -> Self {
        Self {
            p,
            z: z.to_vec(),
            a: z.to_vec(),
            last_sum: f64::INFINITY,
        }
    }

    /// Evaluates h(lambda) = sum a_i(lambda)^p - target and dh/dlambda, where
    /// da/dlambda comes from implicit differentiation of the coordinate KKT
    /// equation.
    fn eval(&mut self, lambda: f64, target: f64) -> (f64, f64) {
        let p = self.p;
        let lam_p = lambda * p;
        let mut sum = 0.0f64;
        let mut dsum = 0.0f64;
        for i in 0..self.z.len() {
            let z = self.z[i];
            if z == 0.0 {
                self.a[i] = 0.0;
                continue;
            }
            let (a, t) = solve_coordinate(p, lam_p, z, self.a[i]);
            self.a[i] = a;
            sum += t * a; // a^p
            let gp = 1.0 + lam_p * (p - 1.0) * t / a;
            dsum -= p * t * p * t / gp;
        }
        self.last_sum = sum;
        (sum - target, dsum)
    }

    fn solution(&self) -> &[f64] {
        &self.a
    }

    fn current_norm(&self) -> f64 {
        self.last_sum.powf(1.0 / self.p)
    }
}

/// Solves a + lam_p a^(p-1) = z for a in (0, z], warm-started. Returns
/// (a, a^(p-1)). Newton steps fall back to bisection whenever they leave the
/// bracket, so the iteration always converges.
fn solve_coordinate(p: f64, lam_p: f64, z: f64, warm: f64) -> (f64, f64) {
    if lam_p == 0.0 {
        return (z, z.powf(p - 1.0));
    }
    let mut lo = 0.0f64;
    let mut hi = z;
    let mut a = warm.clamp(z * 1e-12, z);
    let gtol = 1e-15 * z.max(1.0);
    let mut t = a.powf(p - 1.0);
    for _ in 0..80 {
        let g = a + lam_p * t - z;
        if g.abs() <= gtol {
            break;
        }
        if g > 0.0 {
            hi = a;
        } else {
            lo = a;
        }
        let gp = 1.0 + lam_p * (p - 1.0) * t / a;
        let next = a - g / gp;
        a = if next.is_finite() && next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
        t = a.powf(p - 1.0);
    }
    (a, t)
}

/// Upper bound on |x|_2^2 over the ball: c^2 d^(max(0, 1 - 2/p)). The
/// exponent clamps at zero because for p <= 2 the Euclidean norm is already
/// dominated by the p-norm itself; without the clamp the bound would be
/// violated by single-coordinate boundary points whenever p < 2.
pub fn sq_norm_bound(ball: &LpBall) -> f64 {
    let d = ball.dim() as f64;
    ball.radius().powi(2) * d.powf((1.0 - 2.0 / ball.exponent()).max(0.0))
}

/// Additive slack term of the squared-gap inequality; zero for p >= 2.
pub fn trick_slack_term(ball: &LpBall) -> f64 {
    let d = ball.dim() as f64;
    (sq_norm_bound(ball) - d * ball.vertex_coord().powi(2)).max(0.0)
}

/// Slack of the squared-gap inequality
/// sum_i (a - x_i s_i)^2 <= 2a sum_i (a - x_i s_i) + max(0, c^2 - d a^2)
/// with a = c / d^(1/p), normalized by the larger side. Nonnegative (up to
/// round-off) for every feasible x and every sign pattern; the additive term
/// vanishes for p >= 2, where the inequality is tight at the equal-coordinate
/// boundary points.
pub fn lemma_trick_slack(ball: &LpBall, x: &[f64], signs: &[i8]) -> f64 {
    let a = ball.vertex_coord();
    let mut sq = 0.0f64;
    let mut lin = 0.0f64;
    for (&xi, &si) in x.iter().zip(signs) {
        let gap = a - xi * f64::from(si);
        sq += gap * gap;
        lin += gap;
    }
    normalized_slack(sq, 2.0 * a * lin + trick_slack_term(ball))
}

/// Slack of the norm-equivalence inequality |x|_2^2 <= sq_norm_bound,
/// normalized by the larger side. Equality holds at vertex actions when
/// p >= 2 and at single-coordinate boundary points when p <= 2.
pub fn norm_equivalence_slack(ball: &LpBall, x: &[f64]) -> f64 {
    let sq: f64 = x.iter().map(|&v| v * v).sum();
    normalized_slack(sq, sq_norm_bound(ball))
}

/// Random feasible point: a Gaussian direction rescaled onto the ball, with a
/// 20% chance of landing exactly on the boundary so the boundary cases of the
/// ball inequalities get exercised.
pub fn sample_feasible<R: Rng + ?Sized>(ball: &LpBall, rng: &mut R) -> Point {
    let boundary = rng.random::<f64>() < 0.2;
    let mut point = sample_boundary(ball, rng);
    if !boundary {
        let t = rng.random::<f64>().powf(1.0 / ball.dim() as f64);
        for v in &mut point.coords {
            *v *= t;
        }
    }
    point
}

/// Random boundary point: a Gaussian direction scaled to p-norm exactly c.
pub fn sample_boundary<R: Rng + ?Sized>(ball: &LpBall, rng: &mut R) -> Point {
    loop {
        let v: Vec<f64> = (0..ball.dim())
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let norm = lp_norm(&v, ball.exponent()).expect("gaussian draw is finite");
        if norm > 1e-12 {
            let scale = ball.radius() / norm;
            return Point {
                coords: v.into_iter().map(|x| x * scale).collect(),
            };
        }
    }
}
