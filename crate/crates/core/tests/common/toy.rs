//! A two-parameter linear regression model with closed-form gradients.

use fishdip::autodiff::{ParamStore, Tape, Tensor, Var};
use fishdip::model::LossModel;
use fishdip::Result;

/// `loss = (w0 * x + w1 - y)^2`.
pub struct Linear2;

#[derive(Clone, Copy, Debug)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl LossModel for Linear2 {
    type Example = Point;

    fn losses(&self, tape: &mut Tape, store: &ParamStore, batch: &[&Point]) -> Result<Vec<Var>> {
        let w = tape.param(store, "w")?;
        batch
            .iter()
            .map(|p| {
                let feat = tape.constant(Tensor::matrix(2, 1, vec![p.x, 1.0])?);
                let pred = tape.matmul(w, feat)?;
                let neg_y = tape.constant(Tensor::matrix(1, 1, vec![-p.y])?);
                let r = tape.add(pred, neg_y)?;
                let sq = tape.mul(r, r)?;
                tape.sum(sq)
            })
            .collect()
    }
}

pub fn store(w0: f64, w1: f64) -> ParamStore {
    let mut s = ParamStore::new();
    s.push("w", vec![1, 2], vec![w0, w1]).unwrap();
    s
}

pub fn residual(w: &[f64], p: &Point) -> f64 {
    w[0] * p.x + w[1] - p.y
}

pub fn loss(w: &[f64], p: &Point) -> f64 {
    residual(w, p).powi(2)
}

pub fn gradient(w: &[f64], p: &Point) -> [f64; 2] {
    let r = residual(w, p);
    [2.0 * r * p.x, 2.0 * r]
}

/// Eight points around the line `y = 1.5 x - 0.5`.
pub fn points() -> Vec<Point> {
    let xs = [-1.0, -0.6, -0.2, 0.1, 0.4, 0.7, 1.1, 1.6];
    let noise = [0.3, -0.2, 0.5, -0.4, 0.1, 0.6, -0.3, 0.2];
    xs.iter()
        .zip(noise)
        .map(|(&x, e)| Point { x, y: 1.5 * x - 0.5 + e })
        .collect()
}
