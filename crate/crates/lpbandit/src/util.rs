//! Small numeric helpers shared by the geometry predicates and the
//! trajectory auditor.

/// Tolerance on normalized inequality slacks: a slack above `-INEQ_TOL`
/// counts as the inequality holding.
pub const INEQ_TOL: f64 = 1e-9;

/// Slack of `lhs <= rhs`, normalized by the larger magnitude in play (floored
/// at 1 so tiny quantities are compared absolutely). Nonnegative iff the
/// inequality holds exactly.
pub fn normalized_slack(lhs: f64, rhs: f64) -> f64 {
    (rhs - lhs) / lhs.abs().max(rhs.abs()).max(1.0)
}

/// True when `lhs <= rhs` up to the shared tolerance.
pub fn holds(lhs: f64, rhs: f64) -> bool {
    normalized_slack(lhs, rhs) >= -INEQ_TOL
}
