//! Level-set shapes, volume projection by shifting, the sphere update and
//! the optimization loop.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fem::{l2_inner, ScalarFieldP1};
use crate::physics::{Evaluation, Problem, TopDerivField};

/// Fluid area fraction of a triangle on which ψ is linear with the given
/// vertex values. Points with ψ = 0 count as non-fluid.
pub fn cut_fraction(psi: [f64; 3]) -> f64 {
    let neg: Vec<usize> = (0..3).filter(|&k| psi[k] < 0.0).collect();
    match neg.len() {
        0 => 0.0,
        3 => 1.0,
        1 => {
            let i = neg[0];
            let t = |j: usize| psi[i] / (psi[i] - psi[j]);
            t((i + 1) % 3) * t((i + 2) % 3)
        }
        _ => {
            let i = (0..3).find(|&k| psi[k] >= 0.0).expect("one nonnegative vertex");
            if psi[i] == 0.0 {
                return 1.0;
            }
            let s = |j: usize| psi[i] / (psi[i] - psi[j]);
            1.0 - s((i + 1) % 3) * s((i + 2) % 3)
        }
    }
}

/// A shape `Ω = {ψ < 0}` with cached element fractions and volume.
#[derive(Debug, Clone)]
pub struct LevelSet {
    psi: ScalarFieldP1,
    fractions: Vec<f64>,
    volume: f64,
}

impl LevelSet {
    pub fn new(psi: ScalarFieldP1) -> Self {
        let mesh = psi.mesh().clone();
        let fractions: Vec<f64> =
            mesh.triangles().iter().map(|tri| cut_fraction(tri.map(|v| psi.values()[v]))).collect();
        let volume = fractions.iter().zip(mesh.element_areas()).map(|(f, a)| f * a).sum();
        LevelSet { psi, fractions, volume }
    }

    pub fn psi(&self) -> &ScalarFieldP1 {
        &self.psi
    }

    pub fn fractions(&self) -> &[f64] {
        &self.fractions
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn fluid_fraction(&self, element: usize) -> f64 {
        self.fractions[element]
    }

    /// Nodal indicator: 1 where ψ < 0.
    pub fn nodal_indicator(&self) -> Vec<f64> {
        self.psi.values().iter().map(|&v| if v < 0.0 { 1.0 } else { 0.0 }).collect()
    }

    pub fn norm(&self) -> f64 {
        self.psi.l2_norm()
    }

    /// Rescales ψ to unit L² norm (the shape is unchanged).
    pub fn normalized(&self) -> Result<LevelSet> {
        let n = self.norm();
        if !(n > 0.0) {
            return Err(Error::ZeroNorm);
        }
        Ok(LevelSet { psi: self.psi.scale(1.0 / n), fractions: self.fractions.clone(), volume: self.volume })
    }

    pub fn shifted(&self, c: f64) -> LevelSet {
        LevelSet::new(self.psi.map(|v| v + c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VolumeConstraint {
    Equality(f64),
    Bounds { lower: f64, upper: f64 },
}

impl VolumeConstraint {
    pub fn validate(&self, total_area: f64) -> Result<()> {
        let ok = match *self {
            VolumeConstraint::Equality(v) => (0.0..=total_area).contains(&v),
            VolumeConstraint::Bounds { lower, upper } => 0.0 <= lower && lower <= upper && upper <= total_area,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("volume constraint {self:?} incompatible with domain area {total_area}")))
        }
    }
}

#[derive(Debug, Clone)]
pub struct VolumeShift {
    pub level_set: LevelSet,
    pub c: f64,
    /// Bisection steps taken (0 if no shift was needed).
    pub steps: usize,
}

/// Shift `c` with `|{ψ + c < 0}|` within `tol` of `target`, by bisection.
/// Returns the shifted level set and `c`.
pub fn shift_to_volume(ls: &LevelSet, target: f64, tol: f64) -> Result<(LevelSet, f64)> {
    let s = bisect_shift(ls, target, tol)?;
    Ok((s.level_set, s.c))
}

pub fn bisect_shift(ls: &LevelSet, target: f64, tol: f64) -> Result<VolumeShift> {
    let (lo_psi, hi_psi) = (ls.psi.min(), ls.psi.max());
    if lo_psi == hi_psi {
        return Err(Error::NoBracket);
    }
    if (ls.volume - target).abs() <= tol {
        return Ok(VolumeShift { level_set: ls.clone(), c: 0.0, steps: 0 });
    }
    // volume is nonincreasing in c: zero at c_hi, full at c_lo
    let slack = 1e-9 * (hi_psi - lo_psi);
    let mut c_hi = (-lo_psi).max(0.0);
    let mut c_lo = (-hi_psi - slack).min(0.0);
    let mut best = (f64::INFINITY, ls.clone(), 0.0);
    let mut steps = 0;
    while steps < 200 {
        steps += 1;
        let c = 0.5 * (c_lo + c_hi);
        let cand = ls.shifted(c);
        let err = cand.volume - target;
        if err.abs() < best.0 {
            best = (err.abs(), cand.clone(), c);
        }
        if err.abs() <= tol {
            return Ok(VolumeShift { level_set: cand, c, steps });
        }
        if err > 0.0 {
            c_lo = c;
        } else {
            c_hi = c;
        }
        if c_hi - c_lo <= f64::EPSILON * (1.0 + c_lo.abs().max(c_hi.abs())) {
            break;
        }
    }
    // volume jumps across a flat region: return the closest shift found
    Ok(VolumeShift { level_set: best.1, c: best.2, steps })
}

/// Shifts into the constraint set if violated and renormalizes.
pub fn project_volume(ls: &LevelSet, constraint: VolumeConstraint, tol: f64) -> Result<LevelSet> {
    let target = match constraint {
        VolumeConstraint::Equality(v) => Some(v),
        VolumeConstraint::Bounds { lower, .. } if ls.volume < lower => Some(lower),
        VolumeConstraint::Bounds { upper, .. } if ls.volume > upper => Some(upper),
        VolumeConstraint::Bounds { .. } => None,
    };
    match target {
        Some(t) => shift_to_volume(ls, t, tol)?.0.normalized(),
        None => ls.normalized(),
    }
}

/// L² angle between ψ and g in radians.
pub fn angle(ls: &LevelSet, g: &TopDerivField) -> Result<f64> {
    let npsi = ls.norm();
    let ng = g.l2_norm();
    if !(npsi > 0.0 && ng > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let cos = l2_inner(&ls.psi, g)? / (npsi * ng);
    Ok(cos.clamp(-1.0, 1.0).acos())
}

/// `ψ' = [sin((1-κ)θ) ψ + sin(κθ) g/‖g‖] / sin θ` for unit-norm ψ.
pub fn sphere_update(ls: &LevelSet, g: &TopDerivField, kappa: f64) -> Result<LevelSet> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::invalid(format!("step {kappa} outside (0, 1]")));
    }
    let theta = angle(ls, g)?;
    if theta < 1e-12 || PI - theta < 1e-12 {
        return Err(Error::DegenerateUpdate(theta));
    }
    let s = theta.sin();
    let a = ((1.0 - kappa) * theta).sin() / s;
    let b = (kappa * theta).sin() / (s * g.l2_norm());
    let psi = ls.psi.scale(a).axpy(b, g)?;
    Ok(LevelSet::new(psi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    /// Angle tolerance in radians.
    pub eps_theta: f64,
    pub kappa_min: f64,
    pub max_iters: usize,
    /// Volume tolerance relative to `|D|`.
    pub eps_c: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams { eps_theta: 2f64.to_radians(), kappa_min: 1e-3, max_iters: 500, eps_c: 1e-4 }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_theta > 0.0 && self.eps_theta < PI / 2.0) {
            return Err(Error::invalid(format!("eps_theta {} outside (0, pi/2)", self.eps_theta)));
        }
        if !(self.kappa_min > 0.0 && self.kappa_min <= 1.0) {
            return Err(Error::invalid(format!("kappa_min {} outside (0, 1]", self.kappa_min)));
        }
        if !(self.eps_c > 0.0) {
            return Err(Error::invalid("eps_c must be positive"));
        }
        Ok(())
    }
}

/// Additional term added to the objective, e.g. a deflation penalty.
pub trait ExtraObjective {
    fn value(&self, ls: &LevelSet) -> f64;
    fn derivative(&self, ls: &LevelSet) -> Result<TopDerivField>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub iter: usize,
    pub objective: f64,
    pub penalty: f64,
    pub total: f64,
    pub theta: f64,
    pub volume: f64,
    /// Step that produced this iterate (0 for the initial one).
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    Stalled,
    MaxIters,
}

#[derive(Debug, Clone)]
pub struct TopOptResult {
    pub minimizer: LevelSet,
    pub evaluation: Evaluation,
    pub objective: f64,
    pub penalty: f64,
    pub status: SolveStatus,
    pub history: Vec<HistoryRow>,
}

#[derive(Debug)]
pub struct TopOptFailure {
    pub error: Error,
    pub history: Vec<HistoryRow>,
}

impl std::fmt::Display for TopOptFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} recorded iterations)", self.error, self.history.len())
    }
}

impl std::error::Error for TopOptFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

struct Iterate {
    ls: LevelSet,
    eval: Evaluation,
    penalty: f64,
    total: f64,
}

fn evaluate_iterate(problem: &Problem, ls: LevelSet, extra: Option<&dyn ExtraObjective>) -> Result<Iterate> {
    let eval = problem.evaluate(&problem.alpha_from_fractions(ls.fractions()))?;
    let penalty = extra.map_or(0.0, |e| e.value(&ls));
    let total = eval.objective + penalty;
    Ok(Iterate { ls, eval, penalty, total })
}

fn search_direction(it: &Iterate, extra: Option<&dyn ExtraObjective>) -> Result<TopDerivField> {
    match extra {
        Some(e) => it.eval.derivative.axpy(1.0, &e.derivative(&it.ls)?),
        None => Ok(it.eval.derivative.clone()),
    }
}

/// Projects the initial guess onto the constraint. A level set that cannot
/// be shifted (constant ψ) is replaced by the normalized descent direction
/// evaluated on it.
fn initial_iterate(
    problem: &Problem,
    init: &LevelSet,
    params: &SolverParams,
    extra: Option<&dyn ExtraObjective>,
) -> Result<Iterate> {
    let constraint = problem.spec().volume;
    let tol = params.eps_c * problem.mesh().total_area();
    match project_volume(init, constraint, tol) {
        Ok(ls) => evaluate_iterate(problem, ls, extra),
        Err(Error::NoBracket | Error::ZeroNorm) => {
            let it = evaluate_iterate(problem, init.clone(), extra)?;
            let g = search_direction(&it, extra)?;
            let ls = project_volume(&LevelSet::new(g), constraint, tol)?;
            evaluate_iterate(problem, ls, extra)
        }
        Err(e) => Err(e),
    }
}

/// Level-set topology optimization with sphere updates and backtracking.
pub fn solve_topopt(
    problem: &Problem,
    init: &LevelSet,
    params: &SolverParams,
    extra: Option<&dyn ExtraObjective>,
) -> std::result::Result<TopOptResult, TopOptFailure> {
    let mut history = Vec::new();
    match run_topopt(problem, init, params, extra, &mut history) {
        Ok(r) => Ok(r),
        Err(error) => Err(TopOptFailure { error, history }),
    }
}

fn run_topopt(
    problem: &Problem,
    init: &LevelSet,
    params: &SolverParams,
    extra: Option<&dyn ExtraObjective>,
    history: &mut Vec<HistoryRow>,
) -> Result<TopOptResult> {
    params.validate()?;
    let constraint = problem.spec().volume;
    let tol = params.eps_c * problem.mesh().total_area();
    let mut current = initial_iterate(problem, init, params, extra)?;
    let mut kappa_used = 0.0;
    let mut iter = 0;
    let status = loop {
        let g = search_direction(&current, extra)?;
        // a vanishing derivative is an exact stationary point
        let theta = if g.l2_norm() == 0.0 { 0.0 } else { angle(&current.ls, &g)? };
        history.push(HistoryRow {
            iter,
            objective: current.eval.objective,
            penalty: current.penalty,
            total: current.total,
            theta,
            volume: current.ls.volume(),
            kappa: kappa_used,
        });
        if theta <= params.eps_theta {
            break SolveStatus::Converged;
        }
        if iter >= params.max_iters {
            break SolveStatus::MaxIters;
        }
        let mut kappa = 1.0;
        let accepted = loop {
            let cand = project_volume(&sphere_update(&current.ls, &g, kappa)?, constraint, tol)?;
            let next = evaluate_iterate(problem, cand, extra)?;
            if next.total <= current.total {
                break Some(next);
            }
            kappa *= 0.5;
            if kappa < params.kappa_min {
                break None;
            }
        };
        match accepted {
            Some(next) => {
                current = next;
                kappa_used = kappa;
                iter += 1;
            }
            None => break SolveStatus::Stalled,
        }
    };
    Ok(TopOptResult {
        objective: current.eval.objective,
        penalty: current.penalty,
        minimizer: current.ls,
        evaluation: current.eval,
        status,
        history: std::mem::take(history),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeCase {
    AtLower,
    Interior,
    AtUpper,
    Equality,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub name: &'static str,
    /// Lumped area of violating vertices divided by `|D|`.
    pub violating_fraction: f64,
    /// Largest violation beyond the tolerance, zero if none.
    pub worst_margin: f64,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.violating_fraction == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityReport {
    pub case: VolumeCase,
    pub conditions: Vec<ConditionReport>,
}

impl OptimalityReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(ConditionReport::passed)
    }
}

/// Evaluates the necessary optimality conditions for volume-constrained
/// problems at the vertices, away from the interface `ψ = 0`.
///
/// Inside `Ω` the derivative must not exceed its infimum outside when the
/// volume sits at the lower bound (else it must be nonpositive); outside it
/// must not fall below its supremum inside at the upper bound (else it must
/// be nonnegative). Equality constraints require both exchange conditions.
/// `vol_tol` decides whether the volume is at a bound, `tol` is the slack on
/// the derivative values.
pub fn check_optimality(
    ls: &LevelSet,
    g: &TopDerivField,
    constraint: VolumeConstraint,
    vol_tol: f64,
    tol: f64,
) -> Result<OptimalityReport> {
    crate::fem::fields::check_same_mesh(ls.psi.mesh(), g.mesh())?;
    let mesh = ls.psi.mesh();
    let lumped = mesh.vertex_areas();
    let total = mesh.total_area();
    let psi = ls.psi.values();
    let gv = g.values();
    let inside: Vec<usize> = (0..psi.len()).filter(|&i| psi[i] < 0.0).collect();
    let outside: Vec<usize> = (0..psi.len()).filter(|&i| psi[i] > 0.0).collect();
    let inf_out = outside.iter().map(|&i| gv[i]).fold(f64::INFINITY, f64::min);
    let sup_in = inside.iter().map(|&i| gv[i]).fold(f64::NEG_INFINITY, f64::max);

    let case = match constraint {
        VolumeConstraint::Equality(_) => VolumeCase::Equality,
        VolumeConstraint::Bounds { lower, .. } if (ls.volume - lower).abs() <= vol_tol => VolumeCase::AtLower,
        VolumeConstraint::Bounds { upper, .. } if (ls.volume - upper).abs() <= vol_tol => VolumeCase::AtUpper,
        VolumeConstraint::Bounds { .. } => VolumeCase::Interior,
    };

    // each condition is `g(x) <= bound` (sign = 1) or `g(x) >= bound` (sign = -1)
    let condition = |name: &'static str, set: &[usize], bound: f64, sign: f64| {
        let mut area = 0.0;
        let mut worst: f64 = 0.0;
        for &i in set {
            let excess = sign * (gv[i] - bound) - tol;
            if excess > 0.0 {
                area += lumped[i];
                worst = worst.max(excess);
            }
        }
        ConditionReport { name, violating_fraction: area / total, worst_margin: worst }
    };
    let outside_nonneg = || condition("outside nonnegative", &outside, 0.0, -1.0);
    let inside_nonpos = || condition("inside nonpositive", &inside, 0.0, 1.0);
    let inside_below_outside = || condition("inside below outside infimum", &inside, inf_out, 1.0);
    let outside_above_inside = || condition("outside above inside supremum", &outside, sup_in, -1.0);
    let conditions = match case {
        VolumeCase::Interior => vec![outside_nonneg(), inside_nonpos()],
        VolumeCase::AtLower => vec![outside_nonneg(), inside_below_outside()],
        VolumeCase::AtUpper => vec![outside_above_inside(), inside_nonpos()],
        VolumeCase::Equality => vec![outside_above_inside(), inside_below_outside()],
    };
    Ok(OptimalityReport { case, conditions })
}
