//! Box value types, IoU, area, and padding removal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Scalar;

/// Class id marking a padded (absent) box in a dense batch.
pub const PADDING_CLASS: i64 = -1;

/// Axis-aligned box in corner format with continuous pixel coordinates.
///
/// Construction checks that all coordinates are finite and that
/// `right >= left`, `bottom >= top`. Zero-area boxes are allowed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "[T; 4]",
    into = "[T; 4]",
    bound(serialize = "T: Scalar", deserialize = "T: Scalar")
)]
pub struct BoundingBox<T> {
    left: T,
    top: T,
    right: T,
    bottom: T,
}

impl<T: Scalar> BoundingBox<T> {
    pub fn new(left: T, top: T, right: T, bottom: T) -> Result<Self> {
        if ![left, top, right, bottom].iter().all(|v| v.is_finite()) {
            return Err(Error::Validation(format!(
                "box coordinates must be finite, got ({left}, {top}, {right}, {bottom})"
            )));
        }
        if right < left || bottom < top {
            return Err(Error::Validation(format!(
                "box corners out of order: ({left}, {top}, {right}, {bottom})"
            )));
        }
        Ok(Self {
            left,
            top,
            right,
            bottom,
        })
    }

    /// Builds a box from the interchange `(x, y, width, height)` layout.
    pub fn from_xywh(x: T, y: T, width: T, height: T) -> Result<Self> {
        if width < T::zero() || height < T::zero() {
            return Err(Error::Validation(format!(
                "negative box size: width {width}, height {height}"
            )));
        }
        Self::new(x, y, x + width, y + height)
    }

    pub fn left(&self) -> T {
        self.left
    }

    pub fn top(&self) -> T {
        self.top
    }

    pub fn right(&self) -> T {
        self.right
    }

    pub fn bottom(&self) -> T {
        self.bottom
    }

    pub fn width(&self) -> T {
        self.right - self.left
    }

    pub fn height(&self) -> T {
        self.bottom - self.top
    }

    pub fn area(&self) -> T {
        box_area(self)
    }

    pub fn to_xywh(&self) -> [T; 4] {
        [self.left, self.top, self.width(), self.height()]
    }
}

impl<T: Scalar> TryFrom<[T; 4]> for BoundingBox<T> {
    type Error = Error;

    fn try_from([l, t, r, b]: [T; 4]) -> Result<Self> {
        Self::new(l, t, r, b)
    }
}

impl<T: Scalar> From<BoundingBox<T>> for [T; 4] {
    fn from(b: BoundingBox<T>) -> Self {
        [b.left, b.top, b.right, b.bottom]
    }
}

pub fn box_area<T: Scalar>(b: &BoundingBox<T>) -> T {
    b.width() * b.height()
}

/// Intersection over union. Returns 0 when the union is empty, so a
/// zero-area box has IoU 0 with everything, itself included.
pub fn iou<T: Scalar>(a: &BoundingBox<T>, b: &BoundingBox<T>) -> T {
    let w = a.right.min(b.right) - a.left.max(b.left);
    let h = a.bottom.min(b.bottom) - a.top.max(b.top);
    if w <= T::zero() || h <= T::zero() {
        return T::zero();
    }
    let inter = w * h;
    let union = box_area(a) + box_area(b) - inter;
    if union <= T::zero() {
        return T::zero();
    }
    (inter / union).min(T::one())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct GroundTruth<T> {
    pub bbox: BoundingBox<T>,
    pub class_id: i64,
}

impl<T: Scalar> GroundTruth<T> {
    pub fn new(bbox: BoundingBox<T>, class_id: i64) -> Self {
        Self { bbox, class_id }
    }

    pub fn padding() -> Self {
        Self {
            bbox: BoundingBox::new(T::zero(), T::zero(), T::zero(), T::zero())
                .expect("zero box is valid"),
            class_id: PADDING_CLASS,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct Detection<T> {
    pub bbox: BoundingBox<T>,
    pub class_id: i64,
    pub confidence: T,
}

impl<T: Scalar> Detection<T> {
    /// Rejects class ids below -1 and, for non-padding entries, confidences
    /// outside `[0, 1]`.
    pub fn new(bbox: BoundingBox<T>, class_id: i64, confidence: T) -> Result<Self> {
        let d = Self {
            bbox,
            class_id,
            confidence,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn padding() -> Self {
        Self {
            bbox: BoundingBox::new(T::zero(), T::zero(), T::zero(), T::zero())
                .expect("zero box is valid"),
            class_id: PADDING_CLASS,
            confidence: T::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_id < PADDING_CLASS {
            return Err(Error::Validation(format!(
                "class id {} is below the padding marker",
                self.class_id
            )));
        }
        if self.class_id != PADDING_CLASS
            && !(self.confidence >= T::zero() && self.confidence <= T::one())
        {
            return Err(Error::Domain(format!(
                "detection confidence {} outside [0, 1]",
                self.confidence
            )));
        }
        Ok(())
    }
}

/// Anything carrying a class label that may be the padding marker.
pub trait Labeled {
    fn class_id(&self) -> i64;

    fn is_padding(&self) -> bool {
        self.class_id() == PADDING_CLASS
    }
}

impl<T> Labeled for GroundTruth<T> {
    fn class_id(&self) -> i64 {
        self.class_id
    }
}

impl<T> Labeled for Detection<T> {
    fn class_id(&self) -> i64 {
        self.class_id
    }
}

/// Drops entries whose class id is the padding marker, keeping input order.
pub fn strip_padding<B: Labeled + Clone>(boxes: &[B]) -> Vec<B> {
    boxes.iter().filter(|b| !b.is_padding()).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bx(l: f64, t: f64, r: f64, b: f64) -> BoundingBox<f64> {
        BoundingBox::new(l, t, r, b).unwrap()
    }

    #[test]
    fn iou_examples() {
        assert_eq!(iou(&bx(0., 0., 10., 10.), &bx(0., 0., 10., 10.)), 1.0);
        assert_eq!(iou(&bx(0., 0., 1., 1.), &bx(5., 5., 6., 6.)), 0.0);
        // intersection 1, union 4 + 4 - 1
        let v = iou(&bx(0., 0., 2., 2.), &bx(1., 1., 3., 3.));
        assert!((v - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn touching_edges_do_not_intersect() {
        assert_eq!(iou(&bx(0., 0., 1., 1.), &bx(1., 0., 2., 1.)), 0.0);
    }

    #[test]
    fn degenerate_box_has_zero_iou_with_itself() {
        let line = bx(3., 4., 3., 9.);
        assert_eq!(box_area(&line), 0.0);
        assert_eq!(iou(&line, &line), 0.0);
        assert_eq!(iou(&line, &bx(0., 0., 10., 10.)), 0.0);
    }

    #[test]
    fn area_examples() {
        assert_eq!(box_area(&bx(0., 0., 10., 10.)), 100.0);
        assert_eq!(box_area(&bx(0., 0., 32., 32.)), 1024.0);
    }

    #[test]
    fn constructor_rejects_bad_boxes() {
        assert!(BoundingBox::new(1.0, 0.0, 0.0, 1.0).is_err());
        assert!(BoundingBox::new(0.0, 2.0, 1.0, 1.0).is_err());
        assert!(BoundingBox::new(0.0, 0.0, f64::NAN, 1.0).is_err());
        assert!(BoundingBox::new(0.0, 0.0, f64::INFINITY, 1.0).is_err());
        assert!(BoundingBox::from_xywh(0.0, 0.0, -1.0, 1.0).is_err());
        assert_eq!(
            BoundingBox::from_xywh(10.0, 20.0, 30.0, 40.0).unwrap(),
            bx(10., 20., 40., 60.)
        );
    }

    #[test]
    fn deserialization_validates() {
        let ok: BoundingBox<f64> = serde_json::from_str("[0,0,2,3]").unwrap();
        assert_eq!(ok.area(), 6.0);
        assert!(serde_json::from_str::<BoundingBox<f64>>("[5,0,2,3]").is_err());
    }

    #[test]
    fn detection_confidence_domain() {
        let b = bx(0., 0., 1., 1.);
        assert!(Detection::new(b, 0, 1.5).is_err());
        assert!(Detection::new(b, 0, -0.1).is_err());
        assert!(Detection::new(b, 0, f64::NAN).is_err());
        assert!(Detection::new(b, 0, 1.0).is_ok());
        assert!(Detection::new(b, -2, 0.5).is_err());
        // padding entries carry no meaningful score
        assert!(Detection::new(b, PADDING_CLASS, 7.0).is_ok());
    }

    #[test]
    fn strip_padding_examples() {
        let empty: Vec<GroundTruth<f64>> = vec![];
        assert!(strip_padding(&empty).is_empty());

        let b = bx(0., 0., 1., 1.);
        let mixed = vec![
            GroundTruth::new(b, -1),
            GroundTruth::new(b, 3),
            GroundTruth::new(b, -1),
        ];
        assert_eq!(strip_padding(&mixed), vec![GroundTruth::new(b, 3)]);

        let clean = vec![GroundTruth::new(b, 0), GroundTruth::new(b, 2)];
        assert_eq!(strip_padding(&clean), clean);
    }

    #[test]
    fn works_in_single_precision() {
        let a = BoundingBox::<f32>::new(0., 0., 2., 2.).unwrap();
        let b = BoundingBox::<f32>::new(1., 1., 3., 3.).unwrap();
        assert!((iou(&a, &b) - 1.0 / 7.0).abs() < 1e-6);
    }

    fn arb_box() -> impl Strategy<Value = BoundingBox<f64>> {
        (-50.0..50.0f64, -50.0..50.0f64, 0.0..40.0f64, 0.0..40.0f64)
            .prop_map(|(x, y, w, h)| BoundingBox::from_xywh(x, y, w, h).unwrap())
    }

    proptest! {
        #[test]
        fn iou_is_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
            let ab = iou(&a, &b);
            prop_assert_eq!(ab, iou(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn iou_with_self_is_one(a in arb_box()) {
            if box_area(&a) > 0.0 {
                prop_assert_eq!(iou(&a, &a), 1.0);
            }
        }

        #[test]
        fn strip_padding_is_idempotent(classes in prop::collection::vec(-1i64..4, 0..20)) {
            let b = BoundingBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
            let gts: Vec<GroundTruth<f64>> = classes.iter().map(|&c| GroundTruth::new(b, c)).collect();
            let once = strip_padding(&gts);
            prop_assert_eq!(strip_padding(&once), once.clone());
            prop_assert!(once.iter().all(|g| g.class_id != PADDING_CLASS));
        }
    }
}
