//! Opportunistic compass search: try `±step` along each coordinate, move on
//! the first strict improvement, halve the step after a full pass without one.

use crate::{Objective, Params, DIM};

pub(crate) fn search(obj: &mut Objective<'_>, min_step: f64) {
    let mut step = 1.0;
    while step >= min_step && !obj.exhausted() {
        let mut improved = false;
        for k in 0..DIM {
            for sign in [1.0, -1.0] {
                let mut cand: Params = obj.best.1;
                cand[k] += sign * step;
                let current = obj.best.0;
                let Some(f) = obj.eval(&cand) else { return };
                if f >= 1.0 {
                    return;
                }
                if f > current {
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
}
