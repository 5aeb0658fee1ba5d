//! Axis-aligned box arithmetic and the overlap measures built on it.
//!
//! Boxes are half-open rectangles `[x, x + w) × [y, y + h)` in pixel
//! coordinates, so two boxes sharing only an edge have zero intersection.
//! Every overlap ratio is defined as `0` when its union is empty.

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// An axis-aligned rectangle: top-left corner plus non-negative extents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        for (field, value) in [("x", x), ("y", y), ("w", w), ("h", h)] {
            if !value.is_finite() {
                return Err(GeometryError::NonFinite { field, value });
            }
        }
        if w < 0.0 {
            return Err(GeometryError::NegativeExtent { field: "w", value: w });
        }
        if h < 0.0 {
            return Err(GeometryError::NegativeExtent { field: "h", value: h });
        }
        Ok(Self { x, y, w, h })
    }

    /// Builds a box from its corner coordinates (`x1 ≤ x2`, `y1 ≤ y2`).
    pub fn from_corners(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, GeometryError> {
        Self::new(x1, y1, x2 - x1, y2 - y1)
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.x
    }

    #[inline]
    pub fn y(&self) -> f64 {
        self.y
    }

    #[inline]
    pub fn w(&self) -> f64 {
        self.w
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    #[inline]
    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    #[inline]
    pub fn center(&self) -> (f64, f64) {
        (self.x + 0.5 * self.w, self.y + 0.5 * self.h)
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Same extents, corner moved by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Result<Self, GeometryError> {
        Self::new(self.x + dx, self.y + dy, self.w, self.h)
    }

    /// Intersection with the horizontal band `[0, width]`. Boxes entirely
    /// outside the band collapse to zero width on the nearest border.
    pub fn clip_horizontal(&self, width: f64) -> Self {
        let left = self.x.clamp(0.0, width);
        let right = self.right().clamp(0.0, width);
        Self { x: left, y: self.y, w: (right - left).max(0.0), h: self.h }
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = GeometryError;

    fn try_from([x, y, w, h]: [f64; 4]) -> Result<Self, Self::Error> {
        Self::new(x, y, w, h)
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

/// One object seen in both modalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedBox {
    pub visible: BBox,
    pub thermal: BBox,
}

impl PairedBox {
    pub fn new(visible: BBox, thermal: BBox) -> Self {
        Self { visible, thermal }
    }

    /// A pair whose two modalities share one box.
    pub fn aligned(b: BBox) -> Self {
        Self { visible: b, thermal: b }
    }

    pub fn get(&self, modality: Modality) -> &BBox {
        match modality {
            Modality::Visible => &self.visible,
            Modality::Thermal => &self.thermal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Visible,
    Thermal,
}

#[inline]
pub fn area(b: &BBox) -> f64 {
    b.area()
}

/// Overlap area of two boxes; zero when disjoint or edge-touching.
#[inline]
pub fn intersection_area(a: &BBox, b: &BBox) -> f64 {
    let iw = a.right().min(b.right()) - a.x.max(b.x);
    let ih = a.bottom().min(b.bottom()) - a.y.max(b.y);
    if iw <= 0.0 || ih <= 0.0 {
        0.0
    } else {
        iw * ih
    }
}

/// Intersection and union areas, the two halves of every IoU.
#[inline]
pub fn overlap_parts(a: &BBox, b: &BBox) -> (f64, f64) {
    let inter = intersection_area(a, b);
    (inter, a.area() + b.area() - inter)
}

#[inline]
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let (inter, union) = overlap_parts(a, b);
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Multi-modal IoU: summed per-modality intersections over summed unions.
///
/// Always lies between the visible and thermal IoU when both unions are
/// positive, and coincides with plain [`iou`] when each pair's two boxes are
/// identical.
#[inline]
pub fn iou_multimodal(gt: &PairedBox, dt: &PairedBox) -> f64 {
    let (iv, uv) = overlap_parts(&gt.visible, &dt.visible);
    let (it, ut) = overlap_parts(&gt.thermal, &dt.thermal);
    let union = uv + ut;
    if union <= 0.0 {
        0.0
    } else {
        (iv + it) / union
    }
}

/// Which overlap measure drives a comparison between two paired boxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IouVariant {
    #[serde(rename = "V")]
    Visible,
    #[serde(rename = "T")]
    Thermal,
    #[serde(rename = "M")]
    MultiModal,
}

impl IouVariant {
    pub const ALL: [IouVariant; 3] = [IouVariant::Visible, IouVariant::Thermal, IouVariant::MultiModal];

    #[inline]
    pub fn overlap(self, gt: &PairedBox, dt: &PairedBox) -> f64 {
        match self {
            IouVariant::Visible => iou(&gt.visible, &dt.visible),
            IouVariant::Thermal => iou(&gt.thermal, &dt.thermal),
            IouVariant::MultiModal => iou_multimodal(gt, dt),
        }
    }

    /// Short tag used in tables and CSV files.
    pub fn tag(self) -> &'static str {
        match self {
            IouVariant::Visible => "V",
            IouVariant::Thermal => "T",
            IouVariant::MultiModal => "M",
        }
    }
}

impl std::fmt::Display for IouVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for IouVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "V" | "v" | "visible" => Ok(IouVariant::Visible),
            "T" | "t" | "thermal" => Ok(IouVariant::Thermal),
            "M" | "m" | "multimodal" => Ok(IouVariant::MultiModal),
            other => Err(format!("unknown IoU variant `{other}` (expected V, T or M)")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(x, y, w, h).unwrap()
    }

    /// Pixel-count oracle: scale by 10 and count half-open unit cells.
    fn raster(a: &BBox, c: &BBox) -> (u64, u64, u64) {
        const S: f64 = 10.0;
        let x0 = (a.x.min(c.x) * S) as i64;
        let y0 = (a.y.min(c.y) * S) as i64;
        let x1 = (a.right().max(c.right()) * S) as i64;
        let y1 = (a.bottom().max(c.bottom()) * S) as i64;
        let inside = |bx: &BBox, i: i64, j: i64| {
            let (px, py) = (i as f64, j as f64);
            px >= bx.x * S && px < bx.right() * S && py >= bx.y * S && py < bx.bottom() * S
        };
        let (mut na, mut nc, mut both) = (0, 0, 0);
        for j in y0..y1 {
            for i in x0..x1 {
                let (ia, ic) = (inside(a, i, j), inside(c, i, j));
                na += ia as u64;
                nc += ic as u64;
                both += (ia && ic) as u64;
            }
        }
        (na, nc, both)
    }

    #[test]
    fn area_examples() {
        assert_eq!(area(&b(0.0, 0.0, 10.0, 10.0)), 100.0);
        assert_eq!(area(&b(3.0, 7.0, 0.0, 5.0)), 0.0);
        assert_eq!(area(&b(1.0, 1.0, 2.0, 3.0)), 6.0);
        // oracle agrees (cells are 0.1 px, so 100 cells per square pixel)
        let (n, _, _) = raster(&b(1.0, 1.0, 2.0, 3.0), &b(1.0, 1.0, 2.0, 3.0));
        assert_eq!(n, 600);
    }

    #[test]
    fn intersection_examples() {
        let a = b(0.0, 0.0, 10.0, 10.0);
        assert_eq!(intersection_area(&a, &b(5.0, 0.0, 10.0, 10.0)), 50.0);
        assert_eq!(intersection_area(&a, &a), 100.0);
        assert_eq!(intersection_area(&a, &b(10.0, 0.0, 10.0, 10.0)), 0.0);
        let (_, _, both) = raster(&a, &b(5.0, 0.0, 10.0, 10.0));
        assert_eq!(both, 5000);
    }

    #[test]
    fn iou_examples() {
        let a = b(0.0, 0.0, 10.0, 10.0);
        assert!((iou(&a, &b(5.0, 0.0, 10.0, 10.0)) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &b(20.0, 20.0, 5.0, 5.0)), 0.0);
        // two empty boxes
        assert_eq!(iou(&b(1.0, 1.0, 0.0, 0.0), &b(1.0, 1.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn multimodal_examples() {
        let gt = PairedBox::new(b(0.0, 0.0, 10.0, 10.0), b(20.0, 0.0, 10.0, 10.0));
        let dt = PairedBox::new(b(0.0, 0.0, 10.0, 10.0), b(25.0, 0.0, 10.0, 10.0));
        assert!((iou_multimodal(&gt, &dt) - 0.6).abs() < 1e-15);
        assert_eq!(iou_multimodal(&gt, &gt), 1.0);

        let g = PairedBox::aligned(b(3.0, 4.0, 12.0, 9.0));
        let d = PairedBox::aligned(b(7.0, 1.0, 10.0, 10.0));
        assert_eq!(iou_multimodal(&g, &d), iou(&g.visible, &d.visible));
    }

    #[test]
    fn rejects_invalid_boxes() {
        assert!(matches!(BBox::new(0.0, 0.0, -3.0, 1.0), Err(GeometryError::NegativeExtent { field: "w", .. })));
        assert!(matches!(BBox::new(f64::NAN, 0.0, 3.0, 1.0), Err(GeometryError::NonFinite { field: "x", .. })));
        assert!(BBox::new(0.0, 0.0, 1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn clip_examples() {
        let c = b(650.0, 50.0, 30.0, 60.0).clip_horizontal(640.0);
        assert_eq!(c, b(640.0, 50.0, 0.0, 60.0));
        let c = b(-10.0, 0.0, 30.0, 5.0).clip_horizontal(640.0);
        assert_eq!(c, b(0.0, 0.0, 20.0, 5.0));
    }

    #[test]
    fn variant_parse() {
        assert_eq!("M".parse::<IouVariant>().unwrap(), IouVariant::MultiModal);
        assert!("X".parse::<IouVariant>().is_err());
    }

    fn int_box() -> impl Strategy<Value = BBox> {
        (0i32..15, 0i32..15, 0i32..9, 0i32..9).prop_map(|(x, y, w, h)| b(x as f64, y as f64, w as f64, h as f64))
    }

    fn real_box() -> impl Strategy<Value = BBox> {
        (-500.0..500.0f64, -500.0..500.0f64, 0.0..200.0f64, 0.0..200.0f64).prop_map(|(x, y, w, h)| b(x, y, w, h))
    }

    proptest! {
        #[test]
        fn iou_matches_raster(a in int_box(), c in int_box()) {
            let (na, nc, both) = raster(&a, &c);
            let union = na + nc - both;
            let expected = if union == 0 { 0.0 } else { both as f64 / union as f64 };
            prop_assert!((iou(&a, &c) - expected).abs() < 1e-9);
        }

        #[test]
        fn symmetric_and_bounded(a in real_box(), c in real_box(), d in real_box(), e in real_box()) {
            let v = iou(&a, &c);
            prop_assert_eq!(v, iou(&c, &a));
            prop_assert!((0.0..=1.0).contains(&v));
            let g = PairedBox::new(a, d);
            let t = PairedBox::new(c, e);
            let m = iou_multimodal(&g, &t);
            prop_assert_eq!(m, iou_multimodal(&t, &g));
            prop_assert!((0.0..=1.0).contains(&m));
        }

        #[test]
        fn translation_invariant(a in int_box(), c in int_box(), dx in -1000i32..1000, dy in -1000i32..1000) {
            let (dx, dy) = (dx as f64, dy as f64);
            let a2 = a.translated(dx, dy).unwrap();
            let c2 = c.translated(dx, dy).unwrap();
            prop_assert_eq!(iou(&a, &c), iou(&a2, &c2));
        }
    }
}
