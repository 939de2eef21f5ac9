//! Brute-force maximizers of a linear objective over the ball, independent of
//! the closed form in `geometry`. Used as oracles when validating
//! `argmax_linear`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{lp_norm, project_lp_hint, sample_boundary, LpBall, Point};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Multi-start projected gradient ascent. With a linear objective each run
/// ascends monotonically (concave objective, any constant step), so the only
/// role of the restarts is to escape flat boundary regions at large p.
pub fn brute_force_linear_max<R: Rng + ?Sized>(
    ball: &LpBall,
    theta: &[f64],
    starts: usize,
    rng: &mut R,
) -> Result<(Point, f64)> {
    if theta.len() != ball.dim() {
        return Err(Error::InvalidInput(
            "theta length does not match ball dimension".into(),
        ));
    }
    let norm2 = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
    if norm2 == 0.0 {
        return Ok((Point::origin(ball.dim()), 0.0));
    }
    let step = ball.radius() / norm2;
    let mut best: Option<(Point, f64)> = None;
    for _ in 0..starts.max(1) {
        let start = sample_boundary(ball, rng);
        let (point, value) = ascend(ball, theta, start, step)?;
        if best.as_ref().is_none_or(|(_, b)| value > *b) {
            best = Some((point, value));
        }
    }
    Ok(best.expect("at least one start"))
}

fn ascend(ball: &LpBall, theta: &[f64], start: Point, step: f64) -> Result<(Point, f64)> {
    let mut x = start.into_coords();
    let mut y = vec![0.0; x.len()];
    let mut hint = None;
    let mut quiet = 0u32;
    for _ in 0..400 {
        for ((yi, &xi), &ti) in y.iter_mut().zip(&x).zip(theta) {
            *yi = xi + step * ti;
        }
        let (proj, lam) = project_lp_hint(ball, &y, hint)?;
        hint = Some(lam);
        let moved = x
            .iter()
            .zip(proj.coords())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        x.copy_from_slice(proj.coords());
        if moved <= 1e-10 * ball.radius() {
            quiet += 1;
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    let value = dot(&x, theta);
    Ok((Point::new(x)?, value))
}

/// Dense boundary-grid maximum for d <= 3: exact sign enumeration at d = 1,
/// uniform angles at d = 2, a Fibonacci sphere at d = 3, all rescaled onto
/// the p-sphere. Coverage error is second order in the grid spacing.
pub fn boundary_grid_max(ball: &LpBall, theta: &[f64], points: usize) -> Result<f64> {
    if theta.len() != ball.dim() {
        return Err(Error::InvalidInput(
            "theta length does not match ball dimension".into(),
        ));
    }
    let c = ball.radius();
    let p = ball.exponent();
    match ball.dim() {
        1 => Ok(c * theta[0].abs()),
        2 => {
            let n = points.max(8);
            let mut best = f64::NEG_INFINITY;
            for k in 0..n {
                let phi = 2.0 * std::f64::consts::PI * (k as f64) / (n as f64);
                let u = [phi.cos(), phi.sin()];
                let s = c / lp_norm(&u, p)?;
                best = best.max(s * dot(&u, theta));
            }
            Ok(best)
        }
        3 => {
            let n = points.max(16);
            let golden = (1.0 + 5.0f64.sqrt()) / 2.0;
            let mut best = f64::NEG_INFINITY;
            for k in 0..n {
                let z = 1.0 - 2.0 * (k as f64 + 0.5) / (n as f64);
                let r = (1.0 - z * z).max(0.0).sqrt();
                let phi = 2.0 * std::f64::consts::PI * (k as f64) * golden;
                let u = [r * phi.cos(), r * phi.sin(), z];
                let s = c / lp_norm(&u, p)?;
                best = best.max(s * dot(&u, theta));
            }
            Ok(best)
        }
        d => Err(Error::InvalidInput(format!(
            "boundary grid supports d <= 3, got {d}"
        ))),
    }
}
