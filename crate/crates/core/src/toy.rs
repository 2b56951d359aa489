//! One-dimensional deflation demo on the Rastrigin function, solved by
//! gradient descent. Distances are `|x - x̃|`.

use std::f64::consts::PI;

use crate::deflation::{deflate_with, penalty_slope, penalty_value, DeflationProblem, PenaltyParams, Start};
use crate::error::{Error, Result};

pub fn rastrigin(x: f64) -> f64 {
    10.0 + x * x - 10.0 * (2.0 * PI * x).cos()
}

pub fn rastrigin_prime(x: f64) -> f64 {
    2.0 * x + 20.0 * PI * (2.0 * PI * x).sin()
}

#[derive(Debug, Clone, Copy)]
pub struct ScalarProblem {
    pub f: fn(f64) -> f64,
    pub df: fn(f64) -> f64,
    pub lo: f64,
    pub hi: f64,
}

impl ScalarProblem {
    pub fn rastrigin() -> Self {
        ScalarProblem { f: rastrigin, df: rastrigin_prime, lo: -5.12, hi: 5.12 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo < self.hi && self.lo.is_finite() && self.hi.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid(format!("empty search interval [{}, {}]", self.lo, self.hi)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentParams {
    pub step: f64,
    pub grad_tol: f64,
    pub max_iters: usize,
}

impl Default for DescentParams {
    fn default() -> Self {
        DescentParams { step: 0.01, grad_tol: 1e-6, max_iters: 200_000 }
    }
}

/// Gradient descent with step halving until the objective decreases.
/// Iterates are clamped to `[lo, hi]`.
pub fn gradient_descent(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    x0: f64,
    bounds: (f64, f64),
    params: &DescentParams,
) -> Result<f64> {
    let mut x = x0.clamp(bounds.0, bounds.1);
    let mut fx = f(x);
    for _ in 0..params.max_iters {
        let g = df(x);
        if g.abs() <= params.grad_tol {
            return Ok(x);
        }
        let mut step = params.step;
        loop {
            let cand = (x - step * g).clamp(bounds.0, bounds.1);
            let fc = f(cand);
            if fc < fx {
                x = cand;
                fx = fc;
                break;
            }
            step *= 0.5;
            if step * g.abs() < 1e-15 * (1.0 + x.abs()) {
                // no representable decrease left: x is stationary to rounding
                return Ok(x);
            }
        }
    }
    Err(Error::invalid(format!("gradient descent did not converge from {x0} (last x = {x})")))
}

/// Penalized objective value and derivative at `x`.
fn penalized(p: &ScalarProblem, defs: &[f64], params: &PenaltyParams, x: f64) -> (f64, f64) {
    let mut val = (p.f)(x);
    let mut der = (p.df)(x);
    for &d in defs {
        let dist = (x - d).abs();
        val += penalty_value(dist, params);
        der += penalty_slope(dist, params) * 2.0 * (x - d);
    }
    (val, der)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyMinimizer {
    pub x: f64,
    pub f: f64,
}

/// A record of one inner solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToySolve {
    pub round: usize,
    pub x: f64,
    pub f: f64,
    pub restart: bool,
}

pub struct ToyDeflation {
    pub problem: ScalarProblem,
    pub x0: f64,
    pub descent: DescentParams,
    pub log: Vec<ToySolve>,
}

impl DeflationProblem for ToyDeflation {
    type Solution = ToyMinimizer;

    fn solve(
        &mut self,
        round: usize,
        start: Start<'_, ToyMinimizer>,
        defs: &[ToyMinimizer],
        params: &PenaltyParams,
    ) -> Result<ToyMinimizer> {
        let (x0, restart) = match start {
            Start::Initial => (self.x0, false),
            Start::From(m) => (m.x, true),
        };
        let centers: Vec<f64> = defs.iter().map(|m| m.x).collect();
        let p = self.problem;
        let x = gradient_descent(
            |x| penalized(&p, &centers, params, x).0,
            |x| penalized(&p, &centers, params, x).1,
            x0,
            (p.lo, p.hi),
            &self.descent,
        )?;
        let f = (p.f)(x);
        self.log.push(ToySolve { round, x, f, restart });
        Ok(ToyMinimizer { x, f })
    }

    fn dist(&self, a: &ToyMinimizer, b: &ToyMinimizer) -> Result<f64> {
        Ok((a.x - b.x).abs())
    }
}

/// Found minimizer with its provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyResult {
    pub x: f64,
    pub f: f64,
    pub found_at: usize,
    pub via_restart: bool,
}

#[derive(Debug, Clone)]
pub struct ToyRun {
    pub minimizers: Vec<ToyResult>,
    /// Every inner solve in order.
    pub solves: Vec<ToySolve>,
    /// Number of penalty centers after each round.
    pub def_sizes: Vec<usize>,
}

pub const TOY_TAU_SAME: f64 = 0.1;

/// Deflation on a scalar problem with `n` total iterations.
pub fn deflate_scalar(p: &ScalarProblem, x0: f64, params: &PenaltyParams, n: usize) -> Result<ToyRun> {
    p.validate()?;
    let mut toy = ToyDeflation { problem: *p, x0, descent: DescentParams::default(), log: Vec::new() };
    let state = deflate_with(&mut toy, params, n, TOY_TAU_SAME)?;
    let mut def_sizes = Vec::with_capacity(state.rounds.len());
    let mut count = 0;
    for r in &state.rounds {
        count = if r.round == 0 { 1 } else { r.n_penalties + 1 };
        def_sizes.push(count);
    }
    debug_assert_eq!(count, state.defs.len());
    let minimizers = state
        .solutions
        .iter()
        .map(|s| ToyResult { x: s.solution.x, f: s.solution.f, found_at: s.found_at, via_restart: s.via_restart })
        .collect();
    Ok(ToyRun { minimizers, solves: toy.log, def_sizes })
}

/// Writes `round, x, f, via_restart` for every found minimizer.
pub fn write_toy_csv(run: &ToyRun, w: impl std::io::Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["round", "x", "f", "via_restart"])?;
    for m in &run.minimizers {
        out.write_record([
            m.found_at.to_string(),
            format!("{:.12}", m.x),
            format!("{:.12e}", m.f),
            m.via_restart.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
