//! The adversarial sign-hypercube family: the per-coordinate gap, the
//! parameter vectors theta in {+delta, -delta}^d, the admissibility condition
//! on d, and the analytic lower-bound value they force.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::LpBall;

/// 4 sqrt(3), the denominator constant of the gap.
pub fn four_rt3() -> f64 {
    4.0 * 3.0f64.sqrt()
}

/// 16 sqrt(3), the denominator constant of the bound.
pub fn sixteen_rt3() -> f64 {
    16.0 * 3.0f64.sqrt()
}

/// Outcome of the admissibility check, carrying both condition variants: the
/// one the derivation actually uses as well as the looser headline variant.
#[derive(Debug, Clone, Copy)]
pub struct Admissibility {
    pub ok: bool,
    /// (2 n c^2)^(p/2) — the enforced bound on d.
    pub proof_bound: f64,
    /// (2 c n^2)^(p/2) — reported for diagnostics only.
    pub statement_bound: f64,
}

/// d must stay below (2nc^2)^(p/2) for the gap calibration to make sense.
pub fn admissible(d: usize, n: usize, p: f64, c: f64) -> Admissibility {
    let nf = n as f64;
    let proof_bound = (2.0 * nf * c * c).powf(p / 2.0);
    let statement_bound = (2.0 * c * nf * nf).powf(p / 2.0);
    Admissibility {
        ok: d as f64 <= proof_bound,
        proof_bound,
        statement_bound,
    }
}

/// The per-coordinate gap delta = d^(1/p) / (4 sqrt(3) c sqrt(n)).
pub fn delta_gap(d: usize, n: usize, p: f64, c: f64) -> Result<f64> {
    let ball = LpBall::new(d, p, c)?;
    if n < 1 {
        return Err(Error::InvalidInput("horizon n must be >= 1".into()));
    }
    let adm = admissible(d, n, p, c);
    if !adm.ok {
        return Err(Error::InadmissibleRegime {
            d,
            n,
            p,
            c,
            proof_bound: adm.proof_bound,
            statement_bound: adm.statement_bound,
        });
    }
    let df = ball.dim() as f64;
    Ok(df.powf(1.0 / p) / (four_rt3() * c * (n as f64).sqrt()))
}

/// The analytic lower bound d sqrt(n) / (16 sqrt(3)); independent of p and c.
pub fn minimax_lower_bound(d: usize, n: usize) -> f64 {
    d as f64 * (n as f64).sqrt() / sixteen_rt3()
}

/// A calibrated hard family: ball, horizon, and the gap they induce.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardFamily {
    ball: LpBall,
    n: usize,
    delta: f64,
}

impl HardFamily {
    pub fn new(ball: LpBall, n: usize) -> Result<Self> {
        let delta = delta_gap(ball.dim(), n, ball.exponent(), ball.radius())?;
        Ok(Self { ball, n, delta })
    }

    pub fn ball(&self) -> &LpBall {
        &self.ball
    }

    pub fn horizon(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Optimal per-round reward delta c d^(1 - 1/p), the same for every
    /// member of the family.
    pub fn optimal_reward(&self) -> f64 {
        let d = self.ball.dim() as f64;
        self.delta * self.ball.radius() * d.powf(1.0 - 1.0 / self.ball.exponent())
    }
}

/// One member of the family: theta = delta * signs.
#[derive(Debug, Clone, PartialEq)]
pub struct HardInstance {
    family: HardFamily,
    signs: Vec<i8>,
    theta: Vec<f64>,
}

impl HardInstance {
    pub fn family(&self) -> &HardFamily {
        &self.family
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn sign_id(&self) -> u64 {
        sign_id(&self.signs)
    }
}

pub fn make_instance(family: &HardFamily, signs: &[i8]) -> Result<HardInstance> {
    if signs.len() != family.ball().dim() {
        return Err(Error::InvalidInput(format!(
            "sign pattern length {} does not match dimension {}",
            signs.len(),
            family.ball().dim()
        )));
    }
    if signs.iter().any(|&s| s != 1 && s != -1) {
        return Err(Error::InvalidInput("sign pattern entries must be +1 or -1".into()));
    }
    let delta = family.delta();
    let theta = signs.iter().map(|&s| delta * f64::from(s)).collect();
    Ok(HardInstance {
        family: *family,
        signs: signs.to_vec(),
        theta,
    })
}

/// The member that differs from `inst` only in the sign of coordinate i.
pub fn neighbor_instance(inst: &HardInstance, i: usize) -> Result<HardInstance> {
    if i >= inst.signs.len() {
        return Err(Error::InvalidInput(format!(
            "coordinate {i} out of range for dimension {}",
            inst.signs.len()
        )));
    }
    let mut signs = inst.signs.clone();
    signs[i] = -signs[i];
    make_instance(&inst.family, &signs)
}

/// Bit i of the id set means coordinate i carries a minus sign.
pub fn pattern_from_id(d: usize, id: u64) -> Vec<i8> {
    (0..d).map(|i| if id >> i & 1 == 1 { -1 } else { 1 }).collect()
}

pub fn sign_id(signs: &[i8]) -> u64 {
    signs
        .iter()
        .enumerate()
        .fold(0u64, |acc, (i, &s)| if s == -1 { acc | 1 << i } else { acc })
}

/// All 2^d pattern ids in increasing order. Callers gate d; the harness
/// refuses full enumeration above d = 12.
pub fn all_pattern_ids(d: usize) -> Vec<u64> {
    assert!(d < 64, "pattern ids are 64-bit");
    (0..1u64 << d).collect()
}

/// K distinct pattern ids drawn uniformly without replacement, in draw order.
pub fn sample_pattern_ids<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> Vec<u64> {
    assert!(d < 64, "pattern ids are 64-bit");
    let total = 1u64 << d;
    if k as u64 >= total {
        return all_pattern_ids(d);
    }
    let mut seen = std::collections::HashSet::with_capacity(k);
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let id = rng.random_range(0..total);
        if seen.insert(id) {
            out.push(id);
        }
    }
    out
}
