//! Limited-memory BFGS minimizer with a backtracking Armijo line search.
//!
//! Used for the Bradley-Terry fit, whose negated objective is smooth and
//! strictly convex once the ridge penalty is positive. The solver is fully
//! deterministic: no randomness, and the iteration order is fixed.

use std::collections::VecDeque;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions<T> {
    /// Number of correction pairs kept.
    pub memory: usize,
    /// Stop once the max-norm of the gradient is at or below this value.
    pub tolerance: T,
    pub max_iterations: usize,
}

impl<T: Scalar> Default for LbfgsOptions<T> {
    fn default() -> Self {
        Self {
            memory: 8,
            tolerance: T::lit(1e-8),
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsResult<T> {
    pub x: Vec<T>,
    pub value: T,
    pub gradient_max_norm: T,
    pub iterations: usize,
    pub converged: bool,
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn max_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
}

/// Minimizes `f` starting from `x0`. `f` returns the value and gradient.
pub fn minimize<T, F>(x0: Vec<T>, options: &LbfgsOptions<T>, mut f: F) -> LbfgsResult<T>
where
    T: Scalar,
    F: FnMut(&[T]) -> (T, Vec<T>),
{
    let armijo = T::lit(1e-4);
    let shrink = T::lit(0.5);
    let noise = T::epsilon() * T::lit(16.0);
    let min_step = T::lit(1e-20);

    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    let mut gnorm = max_norm(&g);
    let mut history: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::with_capacity(options.memory);
    let mut iterations = 0;

    while gnorm > options.tolerance && iterations < options.max_iterations {
        iterations += 1;

        // Two-loop recursion: d = -H g.
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = *rho * dot(s, &q);
            for (qi, &yi) in q.iter_mut().zip(y) {
                *qi = *qi - a * yi;
            }
            alphas.push(a);
        }
        let gamma = match history.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => T::one() / gnorm.max(T::one()),
        };
        for qi in q.iter_mut() {
            *qi = *qi * gamma;
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
            let b = *rho * dot(y, &q);
            for (qi, &si) in q.iter_mut().zip(s) {
                *qi = *qi + (a - b) * si;
            }
        }
        let mut direction: Vec<T> = q.into_iter().map(|v| -v).collect();
        let mut slope = dot(&g, &direction);
        if slope >= T::zero() {
            // Lost descent; restart from steepest descent.
            history.clear();
            let scale = T::one() / gnorm.max(T::one());
            direction = g.iter().map(|&v| -v * scale).collect();
            slope = dot(&g, &direction);
        }

        let mut step = T::one();
        let accepted = loop {
            let candidate: Vec<T> = x
                .iter()
                .zip(&direction)
                .map(|(&xi, &di)| xi + step * di)
                .collect();
            let (fc, gc) = f(&candidate);
            let sufficient = fc <= fx + armijo * step * slope;
            // Near the optimum the decrease drops below rounding; accept a
            // step that leaves the value flat but shrinks the gradient.
            let flat = (fc - fx).abs() <= noise * fx.abs().max(T::one())
                && max_norm(&gc) < gnorm;
            if fc.is_finite() && (sufficient || flat) {
                break Some((candidate, fc, gc));
            }
            step = step * shrink;
            if step < min_step {
                break None;
            }
        };

        let Some((x_new, f_new, g_new)) = accepted else {
            if history.is_empty() {
                break;
            }
            history.clear();
            continue;
        };

        let s: Vec<T> = x_new.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = g_new.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > T::epsilon() * dot(&y, &y) {
            if history.len() == options.memory {
                history.pop_front();
            }
            history.push_back((s, y, T::one() / sy));
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        gnorm = max_norm(&g);
    }

    LbfgsResult {
        converged: gnorm <= options.tolerance,
        x,
        value: fx,
        gradient_max_norm: gnorm,
        iterations,
    }
}
