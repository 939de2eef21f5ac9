//! The stochastic environment: unit-variance Gaussian rewards over a ball,
//! fully recorded trajectories, and a line-oriented text format for audit
//! replay.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{lp_norm, LpBall, FEASIBILITY_RTOL};
use crate::instance::HardInstance;
use crate::policies::Policy;

/// A completed (or aborted) episode: parameter, every action, every reward,
/// and the per-round expected shortfall. Actions are stored flattened,
/// row-major by round.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    ball: LpBall,
    theta: Vec<f64>,
    n: usize,
    noise_seed: u64,
    optimal_value: f64,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    instant_regrets: Vec<f64>,
}

impl Trajectory {
    fn empty(ball: LpBall, theta: Vec<f64>, n: usize, noise_seed: u64, optimal_value: f64) -> Self {
        let d = ball.dim();
        Self {
            ball,
            theta,
            n,
            noise_seed,
            optimal_value,
            actions: Vec::with_capacity(n * d),
            rewards: Vec::with_capacity(n),
            instant_regrets: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, action: &[f64], reward: f64) {
        let played: f64 = action.iter().zip(&self.theta).map(|(x, t)| x * t).sum();
        self.actions.extend_from_slice(action);
        self.rewards.push(reward);
        self.instant_regrets.push(self.optimal_value - played);
    }

    pub fn ball(&self) -> &LpBall {
        &self.ball
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// The configured horizon; equals `len` once the episode completed.
    pub fn horizon(&self) -> usize {
        self.n
    }

    /// Rounds actually recorded (shorter than the horizon only on aborts).
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.ball.dim()
    }

    pub fn noise_seed(&self) -> u64 {
        self.noise_seed
    }

    /// The per-round optimal reward against which regret is measured.
    pub fn optimal_value(&self) -> f64 {
        self.optimal_value
    }

    /// Action of round t (0-based).
    pub fn action(&self, t: usize) -> &[f64] {
        let d = self.ball.dim();
        &self.actions[t * d..(t + 1) * d]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn instant_regrets(&self) -> &[f64] {
        &self.instant_regrets
    }

    /// Serializes to the documented replay format: a key=value header block
    /// followed by one round per line (1-based round index, the action
    /// coordinates, the reward, the instant regret), all floats written in
    /// shortest round-trip form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("format=trajectory-v1\n");
        out.push_str(&format!("d={}\n", self.ball.dim()));
        out.push_str(&format!("p={}\n", self.ball.exponent()));
        out.push_str(&format!("c={}\n", self.ball.radius()));
        out.push_str(&format!("n={}\n", self.n));
        out.push_str(&format!("noise_seed={}\n", self.noise_seed));
        out.push_str(&format!("optimal_value={}\n", self.optimal_value));
        let theta: Vec<String> = self.theta.iter().map(f64::to_string).collect();
        out.push_str(&format!("theta={}\n", theta.join(",")));
        for t in 0..self.len() {
            out.push_str(&(t + 1).to_string());
            for v in self.action(t) {
                out.push(' ');
                out.push_str(&v.to_string());
            }
            out.push(' ');
            out.push_str(&self.rewards[t].to_string());
            out.push(' ');
            out.push_str(&self.instant_regrets[t].to_string());
            out.push('\n');
        }
        out
    }

    /// Parses the `to_text` format back; validates feasibility and lengths.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut header = std::collections::BTreeMap::new();
        let mut rows = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((key, value)) = line.split_once('=') {
                header.insert(key.trim().to_string(), value.trim().to_string());
            } else {
                rows.push(line.to_string());
            }
        }
        let get = |key: &str| {
            header
                .get(key)
                .ok_or_else(|| Error::InvalidInput(format!("trajectory header missing {key}")))
        };
        if get("format")? != "trajectory-v1" {
            return Err(Error::InvalidInput("unknown trajectory format".into()));
        }
        let parse_f = |key: &str| -> Result<f64> {
            get(key)?
                .parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("bad {key}: {e}")))
        };
        let parse_u = |key: &str| -> Result<usize> {
            get(key)?
                .parse::<usize>()
                .map_err(|e| Error::InvalidInput(format!("bad {key}: {e}")))
        };
        let d = parse_u("d")?;
        let ball = LpBall::new(d, parse_f("p")?, parse_f("c")?)?;
        let n = parse_u("n")?;
        let noise_seed: u64 = get("noise_seed")?
            .parse()
            .map_err(|e| Error::InvalidInput(format!("bad noise_seed: {e}")))?;
        let optimal_value = parse_f("optimal_value")?;
        let theta: Vec<f64> = get("theta")?
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidInput(format!("bad theta entry: {e}")))
            })
            .collect::<Result<_>>()?;
        if theta.len() != d {
            return Err(Error::InvalidInput("theta length does not match d".into()));
        }

        let mut traj = Trajectory::empty(ball, theta, n, noise_seed, optimal_value);
        for (idx, row) in rows.iter().enumerate() {
            let fields: Vec<&str> = row.split_whitespace().collect();
            if fields.len() != d + 3 {
                return Err(Error::InvalidInput(format!(
                    "round line has {} fields, expected {}",
                    fields.len(),
                    d + 3
                )));
            }
            let t: usize = fields[0]
                .parse()
                .map_err(|e| Error::InvalidInput(format!("bad round index: {e}")))?;
            if t != idx + 1 {
                return Err(Error::InvalidInput(format!(
                    "round lines out of order: saw {t}, expected {}",
                    idx + 1
                )));
            }
            let mut nums = Vec::with_capacity(d + 2);
            for f in &fields[1..] {
                nums.push(
                    f.parse::<f64>()
                        .map_err(|e| Error::InvalidInput(format!("bad round value: {e}")))?,
                );
            }
            let action = &nums[..d];
            check_feasible(&traj.ball, action, idx)?;
            traj.actions.extend_from_slice(action);
            traj.rewards.push(nums[d]);
            traj.instant_regrets.push(nums[d + 1]);
        }
        if traj.len() > n {
            return Err(Error::InvalidInput("more rounds than the horizon".into()));
        }
        Ok(traj)
    }
}

fn check_feasible(ball: &LpBall, action: &[f64], round: usize) -> Result<()> {
    if action.len() != ball.dim() {
        return Err(Error::InvalidInput(format!(
            "action at round {round} has dimension {}, ball has {}",
            action.len(),
            ball.dim()
        )));
    }
    let norm = lp_norm(action, ball.exponent())?;
    if norm > ball.radius() * (1.0 + FEASIBILITY_RTOL) {
        return Err(Error::InfeasibleAction {
            round,
            norm,
            c: ball.radius(),
        });
    }
    Ok(())
}

/// One observation: reward = action . theta + noise. The noise draw is
/// supplied by the caller so the stream stays under the episode's control.
pub fn play_round(ball: &LpBall, theta: &[f64], action: &[f64], noise: f64) -> Result<f64> {
    check_feasible(ball, action, 0)?;
    Ok(action.iter().zip(theta).map(|(x, t)| x * t).sum::<f64>() + noise)
}

/// An aborted episode: the error plus whatever prefix was recorded.
#[derive(Debug)]
pub struct EpisodeFailure {
    pub error: Error,
    pub partial: Trajectory,
}

impl std::fmt::Display for EpisodeFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "episode aborted after {} rounds: {}", self.partial.len(), self.error)
    }
}

impl std::error::Error for EpisodeFailure {}

impl From<EpisodeFailure> for Error {
    fn from(failure: EpisodeFailure) -> Self {
        failure.error
    }
}

/// Runs one episode of `n` rounds. Deterministic given (policy configuration,
/// instance, n, seed): the noise stream and the policy's private stream are
/// split off the same seed as independent counter-based streams.
pub fn run_episode(
    policy: &mut dyn Policy,
    inst: &HardInstance,
    n: usize,
    seed: u64,
) -> std::result::Result<Trajectory, Box<EpisodeFailure>> {
    let ball = *inst.family().ball();
    let mut noise_rng = ChaCha12Rng::seed_from_u64(seed);
    noise_rng.set_stream(0);
    let mut policy_rng = ChaCha12Rng::seed_from_u64(seed);
    policy_rng.set_stream(1);

    let optimal_value = inst.family().optimal_reward();
    let mut traj = Trajectory::empty(ball, inst.theta().to_vec(), n, seed, optimal_value);

    for t in 0..n {
        let action = match policy.act(t, &mut policy_rng) {
            Ok(a) => a,
            Err(error) => return Err(Box::new(EpisodeFailure { error, partial: traj })),
        };
        let noise: f64 = noise_rng.sample(StandardNormal);
        let reward = match play_round(&ball, inst.theta(), action.coords(), noise) {
            Ok(r) => r,
            Err(error) => {
                let error = match error {
                    Error::InfeasibleAction { norm, c, .. } => {
                        Error::InfeasibleAction { round: t, norm, c }
                    }
                    other => other,
                };
                return Err(Box::new(EpisodeFailure { error, partial: traj }));
            }
        };
        policy.update(t, action.coords(), reward);
        traj.push(action.coords(), reward);
    }
    Ok(traj)
}

/// Sum of instant regrets; computed from theta and the actions only.
pub fn pseudo_regret(traj: &Trajectory) -> f64 {
    traj.instant_regrets.iter().sum()
}
