//! Detection-head output decoding and a scripted stand-in detector.
//!
//! Boxes are predicted relative to a grid cell and a prior:
//! `b_x = sigmoid(t_x) + c_x`, `b_y = sigmoid(t_y) + c_y`,
//! `b_w = p_w * exp(t_w)`, `b_h = p_h * exp(t_h)`.
//! Classes are scored by independent logistic units, not a softmax.

mod head;
mod scripted;

pub use head::{
    binary_cross_entropy, class_probabilities, decode_box, encode_box, logit, regression_gradient, sigmoid,
    sigmoid_derivative, BoxPrediction, BCE_EPSILON,
};
pub use scripted::{scripted_detect, GroundTruth, NoiseConfig, ScenarioState, SensorView, OBJECTNESS_THRESHOLD};

use thiserror::Error;

use crate::wire::{put_f64, put_u16, Reader};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectionError {
    #[error("box centre offset {offset} lies outside the open cell interval (0, 1)")]
    OutOfCell { offset: f64 },
    #[error("unknown sensor {0}")]
    UnknownSensor(crate::SensorId),
}

pub const LABEL_PERSON: u16 = 0;
pub const LABEL_VEHICLE: u16 = 1;
pub const NUM_CLASSES: usize = 2;

/// Centre-form box. Units are whatever the producer uses (grid cells or pixels).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        BoundingBox { x, y, w, h }
    }

    pub fn from_corners(left: f64, top: f64, right: f64, bottom: f64) -> Self {
        BoundingBox {
            x: (left + right) / 2.0,
            y: (top + bottom) / 2.0,
            w: right - left,
            h: bottom - top,
        }
    }

    /// `(left, top, right, bottom)`
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        (
            self.x - self.w / 2.0,
            self.y - self.h / 2.0,
            self.x + self.w / 2.0,
            self.y + self.h / 2.0,
        )
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        BoundingBox::new(self.x * factor, self.y * factor, self.w * factor, self.h * factor)
    }

    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let (l1, t1, r1, b1) = self.corners();
        let (l2, t2, r2, b2) = other.corners();
        let iw = (r1.min(r2) - l1.max(l2)).max(0.0);
        let ih = (b1.min(b2) - t1.max(t2)).max(0.0);
        let inter = iw * ih;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

/// One detector output in pixel units.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub objectness: f64,
    pub class_probs: Vec<f64>,
    pub label: u16,
}

/// Serialized size of one detection on the wire.
pub const DETECTION_WIRE_LEN: usize = 2 + 8 + 4 * 8;

impl Detection {
    /// A detection whose label is the argmax of `class_probs`.
    pub fn new(bbox: BoundingBox, objectness: f64, class_probs: Vec<f64>) -> Self {
        let label = class_probs
            .iter()
            .enumerate()
            .fold(
                (0usize, f64::NEG_INFINITY),
                |best, (i, &p)| {
                    if p > best.1 {
                        (i, p)
                    } else {
                        best
                    }
                },
            )
            .0 as u16;
        Detection {
            bbox,
            objectness,
            class_probs,
            label,
        }
    }

    /// Wire layout: label (u16), objectness (f64), box x, y, w, h (f64), big-endian.
    /// Class probabilities are not transmitted.
    pub fn write_wire(&self, out: &mut Vec<u8>) {
        put_u16(out, self.label);
        put_f64(out, self.objectness);
        put_f64(out, self.bbox.x);
        put_f64(out, self.bbox.y);
        put_f64(out, self.bbox.w);
        put_f64(out, self.bbox.h);
    }

    pub fn read_wire(r: &mut Reader<'_>) -> Option<Detection> {
        let label = r.u16()?;
        let objectness = r.f64()?;
        let bbox = BoundingBox::new(r.f64()?, r.f64()?, r.f64()?, r.f64()?);
        Some(Detection {
            bbox,
            objectness,
            class_probs: Vec::new(),
            label,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iou_basics() {
        let a = BoundingBox::new(5.0, 5.0, 10.0, 10.0);
        assert_eq!(a.iou(&a), 1.0);
        let b = BoundingBox::new(10.0, 5.0, 10.0, 10.0);
        assert!((a.iou(&b) - 50.0 / 150.0).abs() < 1e-12);
        assert_eq!(a.iou(&BoundingBox::new(50.0, 50.0, 1.0, 1.0)), 0.0);
    }

    #[test]
    fn detection_wire_layout() {
        let d = Detection::new(BoundingBox::new(1.0, 2.0, 3.0, 4.0), 0.75, vec![0.1, 0.9]);
        assert_eq!(d.label, 1);
        let mut buf = Vec::new();
        d.write_wire(&mut buf);
        assert_eq!(buf.len(), DETECTION_WIRE_LEN);
        assert_eq!(&buf[..2], &[0, 1]);
        assert_eq!(&buf[2..10], &0.75f64.to_be_bytes());
        let back = Detection::read_wire(&mut Reader::new(&buf)).unwrap();
        assert_eq!((back.label, back.objectness, back.bbox), (1, 0.75, d.bbox));
    }
}
