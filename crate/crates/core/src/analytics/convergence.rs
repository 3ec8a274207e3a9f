//! Convergence of Q-value updates: the trailing maximum of |ΔQ| must fall
//! below a tolerance.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

pub const DEFAULT_THETA: f64 = 0.01;
pub const DEFAULT_WINDOW: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub converged: bool,
    /// Index of the last update in the first qualifying window.
    pub index: Option<usize>,
    pub theta: f64,
    pub window: usize,
}

pub fn convergence_check(deltas: &[f64], theta: f64, window: usize) -> Convergence {
    let window = window.max(1);
    // indices with decreasing |delta|, front holds the window maximum
    let mut maxima: VecDeque<usize> = VecDeque::new();
    let mut index = None;
    for (i, d) in deltas.iter().enumerate() {
        let d = d.abs();
        while maxima.back().is_some_and(|&j| deltas[j].abs() <= d) {
            maxima.pop_back();
        }
        maxima.push_back(i);
        if maxima.front().is_some_and(|&j| j + window <= i) {
            maxima.pop_front();
        }
        if i + 1 >= window && maxima.front().is_some_and(|&j| deltas[j].abs() < theta) {
            index = Some(i);
            break;
        }
    }
    Convergence {
        converged: index.is_some(),
        index,
        theta,
        window,
    }
}
