//! Deflation: penalizing known minimizers to find new ones.
//!
//! The penalty around a shape `Ω̃` is `δ exp(γ² / (d² - γ²))` for
//! `d = ‖χ_Ω - χ_Ω̃‖ < γ` and zero otherwise. [`deflate_with`] runs the
//! deflation loop with restarts for any problem implementing
//! [`DeflationProblem`]; [`deflate`] instantiates it for topology
//! optimization.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::fields::check_same_mesh;
use crate::fem::ScalarFieldP1;
use crate::levelset::{
    solve_topopt, ExtraObjective, HistoryRow, LevelSet, SolveStatus, SolverParams, TopOptFailure,
};
use crate::mesh::Mesh;
use crate::physics::{Evaluation, Problem, TopDerivField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyParams {
    pub gamma: f64,
    pub delta: f64,
}

impl PenaltyParams {
    pub fn validate(&self) -> Result<()> {
        if self.gamma > 0.0 && self.delta > 0.0 && self.gamma.is_finite() && self.delta.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid(format!("penalty needs gamma, delta > 0, got {self:?}")))
        }
    }
}

/// `δ exp(γ²/(d² - γ²))` for `d < γ`, else 0.
pub fn penalty_value(dist: f64, params: &PenaltyParams) -> f64 {
    let g2 = params.gamma * params.gamma;
    if dist >= params.gamma {
        return 0.0;
    }
    params.delta * (g2 / (dist * dist - g2)).exp()
}

/// Derivative of the penalty with respect to `d²`.
pub fn penalty_slope(dist: f64, params: &PenaltyParams) -> f64 {
    let g2 = params.gamma * params.gamma;
    if dist >= params.gamma {
        return 0.0;
    }
    let den = dist * dist - g2;
    -g2 / (den * den) * params.delta * (g2 / den).exp()
}

/// Frozen copy of a shape: enough to evaluate distances and penalties.
#[derive(Debug, Clone)]
pub struct ShapeSnapshot {
    pub level_set: LevelSet,
    pub objective: f64,
    pub found_at: usize,
    pub via_restart: bool,
}

impl ShapeSnapshot {
    pub fn new(level_set: LevelSet, objective: f64, found_at: usize, via_restart: bool) -> Self {
        ShapeSnapshot { level_set, objective, found_at, via_restart }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.level_set.psi().mesh()
    }
}

/// `Σ_e |T_e| (f_a - f_b)²` for per-element fluid fractions on `mesh`.
pub fn fraction_dist_sq(mesh: &Mesh, fa: &[f64], fb: &[f64]) -> Result<f64> {
    let n = mesh.n_triangles();
    if fa.len() != n || fb.len() != n {
        return Err(Error::invalid(format!("need {n} fractions, got {} and {}", fa.len(), fb.len())));
    }
    Ok(fa.iter().zip(fb).zip(mesh.element_areas()).map(|((a, b), area)| area * (a - b) * (a - b)).sum())
}

/// `sqrt(Σ_e |T_e| (f_a - f_b)²)` over element fluid fractions.
pub fn fraction_dist(a: &LevelSet, b: &LevelSet) -> Result<f64> {
    check_same_mesh(a.psi().mesh(), b.psi().mesh())?;
    Ok(fraction_dist_sq(a.psi().mesh(), a.fractions(), b.fractions())?.sqrt())
}

/// Generalized topological derivative of `dist(·, b)²`: `1 - 2 χ_b` at
/// each vertex, from the nodal signs of `b`.
pub fn dist_sq_top_derivative(b: &LevelSet) -> Result<TopDerivField> {
    let values = b.nodal_indicator().into_iter().map(|chi| 1.0 - 2.0 * chi).collect();
    ScalarFieldP1::new(b.psi().mesh().clone(), values)
}

pub fn shape_dist(a: &ShapeSnapshot, b: &ShapeSnapshot) -> Result<f64> {
    fraction_dist(&a.level_set, &b.level_set)
}

pub fn penalty(a: &LevelSet, b: &ShapeSnapshot, params: &PenaltyParams) -> Result<f64> {
    Ok(penalty_value(fraction_dist(a, &b.level_set)?, params))
}

pub fn penalty_set(a: &LevelSet, defs: &[ShapeSnapshot], params: &PenaltyParams) -> Result<f64> {
    defs.iter().map(|d| penalty(a, d, params)).sum()
}

/// Generalized topological derivative of the penalty around `b`:
/// `P'(d²) (1 - 2 χ_b)` with `χ_b` from the nodal signs of the stored shape.
pub fn penalty_top_derivative(a: &LevelSet, b: &ShapeSnapshot, params: &PenaltyParams) -> Result<TopDerivField> {
    let slope = penalty_slope(fraction_dist(a, &b.level_set)?, params);
    Ok(dist_sq_top_derivative(&b.level_set)?.scale(slope))
}

/// Chain rule: the derivative of `f(J)` is `f'(J)` times that of `J`.
pub fn compose_chain(dj: &TopDerivField, j_value: f64, f_prime: impl Fn(f64) -> f64) -> TopDerivField {
    dj.scale(f_prime(j_value))
}

pub fn is_unperturbed_minimizer(a: &LevelSet, defs: &[ShapeSnapshot], params: &PenaltyParams) -> Result<bool> {
    for d in defs {
        if fraction_dist(a, &d.level_set)? < params.gamma {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The multi-shape penalty as an objective term for the level-set solver.
#[derive(Debug, Clone)]
pub struct DeflationPenalty<'a> {
    pub defs: &'a [ShapeSnapshot],
    pub params: PenaltyParams,
}

impl ExtraObjective for DeflationPenalty<'_> {
    fn value(&self, ls: &LevelSet) -> f64 {
        penalty_set(ls, self.defs, &self.params).unwrap_or(f64::INFINITY)
    }

    fn derivative(&self, ls: &LevelSet) -> Result<TopDerivField> {
        let mut total = ScalarFieldP1::constant(ls.psi().mesh().clone(), 0.0)?;
        for d in self.defs {
            total = total.axpy(1.0, &penalty_top_derivative(ls, d, &self.params)?)?;
        }
        Ok(total)
    }
}

/// Where an inner solve starts.
#[derive(Debug, Clone, Copy)]
pub enum Start<'a, S> {
    /// The user-provided initial guess.
    Initial,
    /// A restart from a perturbed minimizer.
    From(&'a S),
}

/// An optimization problem the deflation loop can drive.
pub trait DeflationProblem {
    type Solution: Clone;

    /// Minimizes the objective plus the penalty around `defs` (none for the
    /// unperturbed problem).
    fn solve(
        &mut self,
        round: usize,
        start: Start<'_, Self::Solution>,
        defs: &[Self::Solution],
        params: &PenaltyParams,
    ) -> Result<Self::Solution>;

    fn dist(&self, a: &Self::Solution, b: &Self::Solution) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub enum RoundOutcome {
    /// Unperturbed minimizer, added to both sets.
    Found,
    /// Perturbed minimizer with nonvanishing penalty, and the restart result.
    Restarted { new_minimizer: bool },
    Failed(String),
    RestartFailed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub outcome: RoundOutcome,
    /// Size of the penalty set used in this round.
    pub n_penalties: usize,
}

#[derive(Debug, Clone)]
pub struct FoundMinimizer<S> {
    pub solution: S,
    pub found_at: usize,
    pub via_restart: bool,
}

#[derive(Debug, Clone)]
pub struct DeflationState<S> {
    pub defs: Vec<S>,
    pub solutions: Vec<FoundMinimizer<S>>,
    pub rounds: Vec<RoundRecord>,
    pub restarts: usize,
}

impl<S> DeflationState<S> {
    pub fn iterations(&self) -> usize {
        self.rounds.len()
    }
}

/// The deflation loop with `n` total iterations: one unperturbed solve, then
/// `n - 1` perturbed solves from the same initial guess, each followed by a
/// restart when its penalty does not vanish. Restart results enter the
/// solution set only if at least `tau_same` away from every member.
pub fn deflate_with<P: DeflationProblem>(
    problem: &mut P,
    params: &PenaltyParams,
    n: usize,
    tau_same: f64,
) -> Result<DeflationState<P::Solution>> {
    params.validate()?;
    if n == 0 {
        return Err(Error::invalid("deflation needs at least one iteration"));
    }
    let first = problem.solve(0, Start::Initial, &[], params)?;
    let mut state = DeflationState {
        defs: vec![first.clone()],
        solutions: vec![FoundMinimizer { solution: first, found_at: 0, via_restart: false }],
        rounds: vec![RoundRecord { round: 0, outcome: RoundOutcome::Found, n_penalties: 0 }],
        restarts: 0,
    };
    for round in 1..n {
        let n_penalties = state.defs.len();
        let outcome = match problem.solve(round, Start::Initial, &state.defs, params) {
            Err(e) => RoundOutcome::Failed(e.to_string()),
            Ok(sol) => {
                let mut vanishes = true;
                for d in &state.defs {
                    if problem.dist(&sol, d)? < params.gamma {
                        vanishes = false;
                        break;
                    }
                }
                state.defs.push(sol.clone());
                if vanishes {
                    state.solutions.push(FoundMinimizer { solution: sol, found_at: round, via_restart: false });
                    RoundOutcome::Found
                } else {
                    state.restarts += 1;
                    match problem.solve(round, Start::From(&sol), &[], params) {
                        Err(e) => RoundOutcome::RestartFailed(e.to_string()),
                        Ok(restarted) => {
                            let mut new = true;
                            for s in &state.solutions {
                                if problem.dist(&restarted, &s.solution)? < tau_same {
                                    new = false;
                                    break;
                                }
                            }
                            if new {
                                state.solutions.push(FoundMinimizer {
                                    solution: restarted,
                                    found_at: round,
                                    via_restart: true,
                                });
                            }
                            RoundOutcome::Restarted { new_minimizer: new }
                        }
                    }
                }
            }
        };
        state.rounds.push(RoundRecord { round, outcome, n_penalties });
    }
    Ok(state)
}

/// A converged (or stopped) level-set solve.
#[derive(Debug, Clone)]
pub struct Minimizer {
    pub snapshot: ShapeSnapshot,
    pub evaluation: Evaluation,
    pub penalty: f64,
    pub status: SolveStatus,
    pub history: Vec<HistoryRow>,
    pub restart: bool,
}

/// Callback invoked after every inner solve: round, restart flag, result.
pub type SolveObserver<'a> = dyn FnMut(usize, bool, std::result::Result<&Minimizer, &TopOptFailure>) + 'a;

/// Topology optimization as a deflation problem.
pub struct TopologyDeflation<'a> {
    pub problem: &'a Problem,
    pub init: LevelSet,
    pub solver: SolverParams,
    pub observer: Option<Box<SolveObserver<'a>>>,
}

impl DeflationProblem for TopologyDeflation<'_> {
    type Solution = Minimizer;

    fn solve(
        &mut self,
        round: usize,
        start: Start<'_, Minimizer>,
        defs: &[Minimizer],
        params: &PenaltyParams,
    ) -> Result<Minimizer> {
        let (init, restart) = match start {
            Start::Initial => (&self.init, false),
            Start::From(m) => (&m.snapshot.level_set, true),
        };
        let snapshots: Vec<ShapeSnapshot> = defs.iter().map(|m| m.snapshot.clone()).collect();
        let penalty = DeflationPenalty { defs: &snapshots, params: *params };
        let extra: Option<&dyn ExtraObjective> = if defs.is_empty() { None } else { Some(&penalty) };
        let result = solve_topopt(self.problem, init, &self.solver, extra)
            .map(|r| Minimizer {
                snapshot: ShapeSnapshot::new(r.minimizer, r.objective, round, restart),
                evaluation: r.evaluation,
                penalty: r.penalty,
                status: r.status,
                history: r.history,
                restart,
            });
        if let Some(obs) = self.observer.as_mut() {
            obs(round, restart, result.as_ref());
        }
        result.map_err(|f| f.error)
    }

    fn dist(&self, a: &Minimizer, b: &Minimizer) -> Result<f64> {
        shape_dist(&a.snapshot, &b.snapshot)
    }
}

/// Deflation for a topology optimization problem.
pub fn deflate(
    problem: &Problem,
    init: &LevelSet,
    solver: &SolverParams,
    params: &PenaltyParams,
    n: usize,
    tau_same: f64,
) -> Result<DeflationState<Minimizer>> {
    let mut td = TopologyDeflation { problem, init: init.clone(), solver: *solver, observer: None };
    deflate_with(&mut td, params, n, tau_same)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_rect_mesh, BoundaryRules, TrianglePattern};
    use std::f64::consts::E;

    const P: PenaltyParams = PenaltyParams { gamma: 0.4, delta: 3.0 };

    #[test]
    fn penalty_closed_forms() {
        assert!((penalty_value(0.0, &P) - 3.0 / E).abs() < 1e-15);
        assert!((penalty_value(0.4 / 2f64.sqrt(), &P) - 3.0 / (E * E)).abs() < 1e-14);
        assert_eq!(penalty_value(0.4, &P), 0.0);
        assert_eq!(penalty_value(1.0, &P), 0.0);
    }

    #[test]
    fn penalty_vanishes_continuously() {
        let mut prev = f64::INFINITY;
        for k in 1..=6 {
            let v = penalty_value(P.gamma * (1.0 - 10f64.powi(-k)), &P);
            assert!((v < prev || v == 0.0) && v >= 0.0);
            prev = v;
        }
        assert!(prev < 1e-100);
    }

    fn halves() -> (LevelSet, LevelSet, LevelSet) {
        let mesh = Arc::new(generate_rect_mesh(1.0, 1.0, 4, 4, TrianglePattern::Right, BoundaryRules::AllWall).unwrap());
        let left = LevelSet::new(ScalarFieldP1::from_fn(mesh.clone(), |p| p[0] - 0.5).unwrap());
        let bottom = LevelSet::new(ScalarFieldP1::from_fn(mesh.clone(), |p| p[1] - 0.5).unwrap());
        let right = LevelSet::new(ScalarFieldP1::from_fn(mesh, |p| 0.5 - p[0]).unwrap());
        (left, bottom, right)
    }

    #[test]
    fn distance_examples() {
        let (left, bottom, right) = halves();
        assert_eq!(fraction_dist(&left, &left).unwrap(), 0.0);
        assert!((fraction_dist(&left, &bottom).unwrap().powi(2) - 0.5).abs() < 1e-14);
        assert!((fraction_dist(&left, &right).unwrap().powi(2) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn penalty_set_duplicates_double() {
        let (left, _, _) = halves();
        let snap = ShapeSnapshot::new(left.clone(), 0.0, 0, false);
        let defs = vec![snap.clone(), snap];
        assert!((penalty_set(&left, &defs, &P).unwrap() - 2.0 * 3.0 / E).abs() < 1e-14);
        assert_eq!(penalty_set(&left, &[], &P).unwrap(), 0.0);
        assert!(!is_unperturbed_minimizer(&left, &defs, &P).unwrap());
        assert!(is_unperturbed_minimizer(&left, &[], &P).unwrap());
    }

    #[test]
    fn derivative_at_zero_distance() {
        let (left, _, _) = halves();
        let snap = ShapeSnapshot::new(left.clone(), 0.0, 0, false);
        let d = penalty_top_derivative(&left, &snap, &P).unwrap();
        let scale = P.delta / (E * P.gamma * P.gamma);
        for (v, &psi) in d.values().iter().zip(left.psi().values()) {
            let expect = if psi < 0.0 { scale } else { -scale };
            assert!((v - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn chain_rule_scalings() {
        let (left, _, _) = halves();
        let f = left.psi().clone();
        assert_eq!(compose_chain(&f, 3.0, |_| 1.0).values(), f.values());
        let sq = compose_chain(&f, 3.0, |z| 2.0 * z);
        for (a, b) in sq.values().iter().zip(f.values()) {
            assert!((a - 6.0 * b).abs() < 1e-15);
        }
        assert!(compose_chain(&f, 3.0, |_| 0.0).values().iter().all(|v| *v == 0.0));
    }
}
