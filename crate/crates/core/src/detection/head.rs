use super::{BoundingBox, DetectionError};

pub const BCE_EPSILON: f64 = 1e-12;

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid_derivative(v: f64) -> f64 {
    let s = sigmoid(v);
    s * (1.0 - s)
}

/// Inverse of [`sigmoid`] on `(0, 1)`.
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Raw network outputs for one box plus the cell offset and prior it is relative to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxPrediction {
    pub t_x: f64,
    pub t_y: f64,
    pub t_w: f64,
    pub t_h: f64,
    pub c_x: f64,
    pub c_y: f64,
    pub p_w: f64,
    pub p_h: f64,
}

impl BoxPrediction {
    pub fn offsets(&self) -> [f64; 4] {
        [self.t_x, self.t_y, self.t_w, self.t_h]
    }
}

/// Grid-unit box from raw offsets.
pub fn decode_box(p: &BoxPrediction) -> BoundingBox {
    BoundingBox {
        x: sigmoid(p.t_x) + p.c_x,
        y: sigmoid(p.t_y) + p.c_y,
        w: p.p_w * p.t_w.exp(),
        h: p.p_h * p.t_h.exp(),
    }
}

/// Recovers the raw offsets that [`decode_box`] maps to `b`.
pub fn encode_box(b: &BoundingBox, cell: (f64, f64), prior: (f64, f64)) -> Result<BoxPrediction, DetectionError> {
    let fx = b.x - cell.0;
    let fy = b.y - cell.1;
    for offset in [fx, fy] {
        if !(offset > 0.0 && offset < 1.0) {
            return Err(DetectionError::OutOfCell { offset });
        }
    }
    Ok(BoxPrediction {
        t_x: logit(fx),
        t_y: logit(fy),
        t_w: (b.w / prior.0).ln(),
        t_h: (b.h / prior.1).ln(),
        c_x: cell.0,
        c_y: cell.1,
        p_w: prior.0,
        p_h: prior.1,
    })
}

/// Squared-error gradient for the coordinate offsets, ordered `(x, y, w, h)`:
/// ground truth minus prediction.
pub fn regression_gradient(t_hat: &BoxPrediction, t: &BoxPrediction) -> [f64; 4] {
    let a = t_hat.offsets();
    let b = t.offsets();
    std::array::from_fn(|i| a[i] - b[i])
}

/// Independent per-class logistic scores.
pub fn class_probabilities(logits: &[f64]) -> Vec<f64> {
    logits.iter().map(|&v| sigmoid(v)).collect()
}

pub fn binary_cross_entropy(pred: f64, target: bool) -> f64 {
    let p = pred.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
    if target {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}
