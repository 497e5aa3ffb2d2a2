//! Central finite-difference check of the tape gradients.

use crate::error::Result;
use crate::model::Model;
use crate::train::Example;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_relative: f64,
    /// Parameter and flat index of the worst entry.
    pub worst: (String, usize),
    pub n_checked: usize,
}

/// Gradients below this magnitude are compared absolutely instead of relatively.
pub const RELATIVE_FLOOR: f64 = 1e-6;

/// Compares every analytic gradient entry of the teacher-forced loss on `example` with
/// `(L(θ+h) − L(θ−h)) / 2h`. The error is `|a − n| / max(|a|, |n|, RELATIVE_FLOOR)`.
pub fn max_relative_error(model: &Model, example: &Example, h: f64) -> Result<GradCheck> {
    let loss_of = |m: &Model| -> Result<f64> {
        let (f, _, l) = example.loss(m)?;
        Ok(f.tape.value(l)[[0, 0]])
    };
    let (f, _, l) = example.loss(model)?;
    let analytic = f.tape.backward(l, &model.params);
    drop(f);

    let mut probe = model.clone();
    let mut out = GradCheck { max_relative: 0.0, worst: (String::new(), 0), n_checked: 0 };
    for (p, name) in model.params.names().iter().enumerate() {
        for k in 0..analytic[p].len() {
            let orig = model.params.tensors()[p].as_slice().expect("standard layout")[k];
            let set = |m: &mut Model, v: f64| m.params.tensors_mut()[p].as_slice_mut().expect("standard layout")[k] = v;
            set(&mut probe, orig + h);
            let up = loss_of(&probe)?;
            set(&mut probe, orig - h);
            let down = loss_of(&probe)?;
            set(&mut probe, orig);
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[p].as_slice().expect("standard layout")[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
            if rel > out.max_relative {
                out.max_relative = rel;
                out.worst = (name.clone(), k);
            }
            out.n_checked += 1;
        }
    }
    Ok(out)
}
