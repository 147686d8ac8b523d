//! Lossless rotation augmentation.
//!
//! A rotation normally forces a choice: keep the canvas and lose the
//! corners (cropped fit), or keep everything and lose resolution (resized
//! fit). The composite here takes the cropped-fit rotation wherever it is
//! geometrically valid and fills the remaining corner regions from the
//! resized-fit rotation, so every output pixel is defined and the central
//! content keeps full source resolution.
//!
//! Angles are integer degrees, counterclockwise positive, stored modulo
//! 360. Multiples of 90 bypass interpolation entirely and are exact index
//! permutations.

use std::collections::BTreeSet;

use rand::Rng as _;
use thiserror::Error;

use crate::imgio::{resize, FloatImage, Mask, Patch, ResizeMethod};
use crate::seeds;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("duplicate rotation angle {0} in set")]
    DuplicateAngle(u16),
    #[error("empty angle list")]
    EmptyAngles,
    #[error("angle pool exhausted: {remaining} unused angles remain, need {needed}")]
    PoolExhausted { remaining: usize, needed: usize },
    #[error(transparent)]
    Img(#[from] crate::imgio::ImgError),
}

/// Rotation in integer degrees, counterclockwise positive, stored mod 360.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RotationAngle(u16);

impl RotationAngle {
    pub fn new(degrees: i64) -> Self {
        Self(degrees.rem_euclid(360) as u16)
    }

    pub fn degrees(self) -> u16 {
        self.0
    }

    pub fn radians(self) -> f64 {
        f64::from(self.0).to_radians()
    }

    pub fn is_multiple_of_90(self) -> bool {
        self.0.is_multiple_of(90)
    }
}

impl std::fmt::Display for RotationAngle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Identifies where an augmented patch came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub source_id: String,
    pub angle: RotationAngle,
}

/// One augmented patch: same canvas as the source, every pixel defined.
#[derive(Debug, Clone)]
pub struct AugmentedPatch {
    pub image: Patch,
    pub angle: RotationAngle,
    /// True where the full-resolution cropped-fit rotation was used.
    pub valid_crop_mask: Mask,
    pub provenance: Provenance,
}

/// Baseline angles every training image receives up front.
pub const BASELINE_ANGLES: [u16; 4] = [0, 90, 180, 270];

/// Number of fresh angles added per training session.
pub const ANGLES_PER_SESSION: usize = 30;

/// Source point pulled by destination pixel center `(x, y)` when the image
/// content is rotated counterclockwise by `theta` about `(cx, cy)`.
#[inline]
fn source_point(sin_t: f64, cos_t: f64, cx: f64, cy: f64, x: f64, y: f64) -> (f64, f64) {
    let dx = x - cx;
    let dy = y - cy;
    (cx + cos_t * dx - sin_t * dy, cy + sin_t * dx + cos_t * dy)
}

/// A source point is valid when it lies inside the pixel footprint of the
/// source raster (half a pixel beyond the outermost pixel centers).
#[inline]
fn in_footprint(qx: f64, qy: f64, w: usize, h: usize) -> bool {
    qx >= -0.5 && qx <= w as f64 - 0.5 && qy >= -0.5 && qy <= h as f64 - 0.5
}

/// Mirror a coordinate into `[-0.5, n - 0.5]` (reflect across the edges).
#[inline]
fn reflect_into(mut v: f64, n: usize) -> f64 {
    let lo = -0.5;
    let hi = n as f64 - 0.5;
    while v < lo || v > hi {
        if v < lo {
            v = 2.0 * lo - v;
        } else {
            v = 2.0 * hi - v;
        }
    }
    v
}

fn rotate90_float(img: &FloatImage, theta: RotationAngle) -> FloatImage {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    match theta.degrees() {
        0 => img.clone(),
        180 => {
            let mut out = FloatImage::zeros(w, h, ch);
            for y in 0..h {
                for x in 0..w {
                    for c in 0..ch {
                        out.set(x, y, c, img.get(w - 1 - x, h - 1 - y, c));
                    }
                }
            }
            out
        }
        90 => {
            // output canvas is h x w; for square inputs that equals w x h
            let mut out = FloatImage::zeros(h, w, ch);
            for y in 0..w {
                for x in 0..h {
                    for c in 0..ch {
                        out.set(x, y, c, img.get(h - 1 - y, x, c));
                    }
                }
            }
            out
        }
        270 => {
            let mut out = FloatImage::zeros(h, w, ch);
            for y in 0..w {
                for x in 0..h {
                    for c in 0..ch {
                        out.set(x, y, c, img.get(y, w - 1 - x, c));
                    }
                }
            }
            out
        }
        d => unreachable!("not a multiple of 90: {d}"),
    }
}

fn rotate90_patch(img: &Patch, theta: RotationAngle) -> Patch {
    let (w, h) = (img.width(), img.height());
    match theta.degrees() {
        0 => img.clone(),
        180 => {
            let mut out = img.clone();
            for y in 0..h {
                for x in 0..w {
                    out.set(x, y, img.get(w - 1 - x, h - 1 - y));
                }
            }
            out
        }
        90 => {
            debug_assert_eq!(w, h);
            let mut out = img.clone();
            for y in 0..h {
                for x in 0..w {
                    out.set(x, y, img.get(h - 1 - y, x));
                }
            }
            out
        }
        270 => {
            debug_assert_eq!(w, h);
            let mut out = img.clone();
            for y in 0..h {
                for x in 0..w {
                    out.set(x, y, img.get(y, w - 1 - x));
                }
            }
            out
        }
        d => unreachable!("not a multiple of 90: {d}"),
    }
}

/// Rotate keeping the original canvas.
///
/// Each output pixel pulls from its inverse-rotated source point; points
/// outside the source footprint are masked false and written as zero.
/// Multiples of 90 degrees are exact permutations with a fully-true mask
/// (90 and 270 require a square canvas to stay on the original canvas).
pub fn rotate_cropped_fit(img: &FloatImage, theta: RotationAngle) -> (FloatImage, Mask) {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    if theta.is_multiple_of_90() && (w == h || theta.degrees().is_multiple_of(180)) {
        return (rotate90_float(img, theta), Mask::filled(w, h, true));
    }
    let rad = theta.radians();
    let (sin_t, cos_t) = rad.sin_cos();
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let mut out = FloatImage::zeros(w, h, ch);
    let mut mask = Mask::filled(w, h, false);
    for y in 0..h {
        for x in 0..w {
            let (qx, qy) = source_point(sin_t, cos_t, cx, cy, x as f64, y as f64);
            if in_footprint(qx, qy, w, h) {
                mask.set(x, y, true);
                for c in 0..ch {
                    out.set(x, y, c, img.sample_clamped(qx, qy, c));
                }
            }
        }
    }
    (out, mask)
}

/// Rotate into the enclosing canvas, then resize back to the source canvas.
///
/// The expanded canvas is `ceil(w|cos| + h|sin|) x ceil(w|sin| + h|cos|)`,
/// so every source pixel maps inside it. Corner positions that receive no
/// source content are filled by mirroring the source coordinates back into
/// the footprint, so the result carries no padding. The final resize uses
/// area averaging. Multiples of 90 bypass resizing when the canvas already
/// matches.
pub fn rotate_resized_fit(img: &FloatImage, theta: RotationAngle) -> FloatImage {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    if theta.is_multiple_of_90() {
        let rotated = rotate90_float(img, theta);
        if rotated.width() == w && rotated.height() == h {
            return rotated;
        }
        // non-square canvas at 90/270: shrink the long axis back
        return resize(&rotated, w, h, ResizeMethod::Area).expect("target dims >= 1");
    }
    let rad = theta.radians();
    let (sin_t, cos_t) = rad.sin_cos();
    let ew = (w as f64 * cos_t.abs() + h as f64 * sin_t.abs()).ceil() as usize;
    let eh = (w as f64 * sin_t.abs() + h as f64 * cos_t.abs()).ceil() as usize;
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let ecx = (ew as f64 - 1.0) / 2.0;
    let ecy = (eh as f64 - 1.0) / 2.0;
    let mut expanded = FloatImage::zeros(ew, eh, ch);
    for y in 0..eh {
        for x in 0..ew {
            let (mut qx, mut qy) =
                source_point(sin_t, cos_t, cx, cy, x as f64 - ecx + cx, y as f64 - ecy + cy);
            if !in_footprint(qx, qy, w, h) {
                qx = reflect_into(qx, w);
                qy = reflect_into(qy, h);
            }
            for c in 0..ch {
                expanded.set(x, y, c, img.sample_clamped(qx, qy, c));
            }
        }
    }
    resize(&expanded, w, h, ResizeMethod::Area).expect("target dims >= 1")
}

/// Composite of the two fits: full-resolution cropped-fit content where the
/// mask is valid, resized-fit content elsewhere, quantized back to 8-bit.
///
/// Multiples of 90 produce the exact byte permutation of the source.
pub fn rotate_lossless(img: &Patch, theta: RotationAngle, source_id: &str) -> AugmentedPatch {
    let (w, h) = (img.width(), img.height());
    let provenance = Provenance {
        source_id: source_id.to_string(),
        angle: theta,
    };
    if theta.is_multiple_of_90() && (w == h || theta.degrees().is_multiple_of(180)) {
        return AugmentedPatch {
            image: rotate90_patch(img, theta),
            angle: theta,
            valid_crop_mask: Mask::filled(w, h, true),
            provenance,
        };
    }
    let float = img.to_float();
    let (cropped, mask) = rotate_cropped_fit(&float, theta);
    let resized = rotate_resized_fit(&float, theta);
    let mut composite = FloatImage::zeros(w, h, float.channels());
    for y in 0..h {
        for x in 0..w {
            let src = if mask.get(x, y) { &cropped } else { &resized };
            for c in 0..float.channels() {
                composite.set(x, y, c, src.get(x, y, c));
            }
        }
    }
    AugmentedPatch {
        image: composite.to_patch().expect("3-channel composite"),
        angle: theta,
        valid_crop_mask: mask,
        provenance,
    }
}

/// Apply a list of distinct angles to one source patch, in input order.
pub fn rotation_set(
    img: &Patch,
    angles: &[RotationAngle],
    source_id: &str,
) -> Result<Vec<AugmentedPatch>, AugmentError> {
    if angles.is_empty() {
        return Err(AugmentError::EmptyAngles);
    }
    let mut seen = BTreeSet::new();
    for a in angles {
        if !seen.insert(a.degrees()) {
            return Err(AugmentError::DuplicateAngle(a.degrees()));
        }
    }
    Ok(angles
        .iter()
        .map(|&a| rotate_lossless(img, a, source_id))
        .collect())
}

/// The full 1..=360 sweep (360 wraps to 0, so the original is included).
pub fn full_rotation_angles() -> Vec<RotationAngle> {
    (1..=360).map(RotationAngle::new).collect()
}

/// Draw the next session's angles without replacement.
///
/// The pool is `{1..359}` minus the baseline angles `{90, 180, 270}` minus
/// every angle already in the ledger. The draw is a seeded partial shuffle,
/// so the same `(seed, session_index, ledger)` always yields the same set.
/// The caller is responsible for adding the returned angles to the ledger.
pub fn sample_session_angles(
    seed: u64,
    session_index: u32,
    ledger: &BTreeSet<u16>,
) -> Result<Vec<RotationAngle>, AugmentError> {
    let mut pool: Vec<u16> = (1u16..=359)
        .filter(|d| !BASELINE_ANGLES.contains(d))
        .filter(|d| !ledger.contains(d))
        .collect();
    if pool.len() < ANGLES_PER_SESSION {
        return Err(AugmentError::PoolExhausted {
            remaining: pool.len(),
            needed: ANGLES_PER_SESSION,
        });
    }
    let mut rng = seeds::rng(seeds::derive_indexed(seed, "session-angles", u64::from(session_index)));
    for i in 0..ANGLES_PER_SESSION {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    Ok(pool[..ANGLES_PER_SESSION]
        .iter()
        .map(|&d| RotationAngle::new(i64::from(d)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgio::PATCH_CHANNELS;

    fn gray_image(w: usize, h: usize, values: &[f32]) -> FloatImage {
        FloatImage::new(w, h, 1, values.to_vec()).unwrap()
    }

    fn random_patch(w: usize, h: usize, seed: u64) -> Patch {
        let mut rng = seeds::rng(seed);
        Patch::new(w, h, (0..w * h * PATCH_CHANNELS).map(|_| rng.random()).collect()).unwrap()
    }

    #[test]
    fn zero_rotation_is_identity() {
        let img = gray_image(3, 2, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let (out, mask) = rotate_cropped_fit(&img, RotationAngle::new(0));
        assert_eq!(out, img);
        assert!(mask.all_true());
        assert_eq!(rotate_resized_fit(&img, RotationAngle::new(0)), img);
    }

    #[test]
    fn rotate90_permutes_2x2() {
        // [[a, b], [c, d]] rotated 90 ccw must become [[b, d], [a, c]]
        let (a, b, c, d) = (0.1f32, 0.2, 0.3, 0.4);
        let img = gray_image(2, 2, &[a, b, c, d]);
        let (out, mask) = rotate_cropped_fit(&img, RotationAngle::new(90));
        assert_eq!(out.data(), &[b, d, a, c]);
        assert!(mask.all_true());
    }

    #[test]
    fn rotate270_matches_three_quarter_turn() {
        let img = gray_image(2, 2, &[0.1, 0.2, 0.3, 0.4]);
        let once = rotate90_float(&img, RotationAngle::new(90));
        let thrice = rotate90_float(
            &rotate90_float(&once, RotationAngle::new(90)),
            RotationAngle::new(90),
        );
        let (out, _) = rotate_cropped_fit(&img, RotationAngle::new(270));
        assert_eq!(out, thrice);
    }

    #[test]
    fn rotate180_works_on_non_square() {
        let p = random_patch(5, 3, 11);
        let out = rotate_lossless(&p, RotationAngle::new(180), "s");
        for y in 0..3 {
            for x in 0..5 {
                assert_eq!(out.image.get(x, y), p.get(4 - x, 2 - y));
            }
        }
        assert!(out.valid_crop_mask.all_true());
    }

    /// Convex polygon clipping (Sutherland-Hodgman) used as the
    /// independent oracle for the valid-mask area.
    fn clip_polygon(poly: &[(f64, f64)], edge: ((f64, f64), (f64, f64))) -> Vec<(f64, f64)> {
        let ((ex0, ey0), (ex1, ey1)) = edge;
        let inside = |p: (f64, f64)| (ex1 - ex0) * (p.1 - ey0) - (ey1 - ey0) * (p.0 - ex0) >= 0.0;
        let intersect = |p: (f64, f64), q: (f64, f64)| {
            let (x1, y1, x2, y2) = (p.0, p.1, q.0, q.1);
            let (x3, y3, x4, y4) = (ex0, ey0, ex1, ey1);
            let den = (x1 - x2) * (y3 - y4) - (y1 - y2) * (x3 - x4);
            let t = ((x1 - x3) * (y3 - y4) - (y1 - y3) * (x3 - x4)) / den;
            (x1 + t * (x2 - x1), y1 + t * (y2 - y1))
        };
        let mut out = Vec::new();
        for i in 0..poly.len() {
            let cur = poly[i];
            let prev = poly[(i + poly.len() - 1) % poly.len()];
            if inside(cur) {
                if !inside(prev) {
                    out.push(intersect(prev, cur));
                }
                out.push(cur);
            } else if inside(prev) {
                out.push(intersect(prev, cur));
            }
        }
        out
    }

    fn polygon_area(poly: &[(f64, f64)]) -> f64 {
        let mut acc = 0.0;
        for i in 0..poly.len() {
            let (x0, y0) = poly[i];
            let (x1, y1) = poly[(i + 1) % poly.len()];
            acc += x0 * y1 - x1 * y0;
        }
        acc.abs() / 2.0
    }

    /// Fraction of the source footprint square still covered after rotating
    /// it by theta about its center.
    fn intersection_fraction_oracle(w: usize, h: usize, theta_deg: f64) -> f64 {
        let (wf, hf) = (w as f64, h as f64);
        let cx = (wf - 1.0) / 2.0;
        let cy = (hf - 1.0) / 2.0;
        let corners = [
            (-0.5, -0.5),
            (wf - 0.5, -0.5),
            (wf - 0.5, hf - 0.5),
            (-0.5, hf - 0.5),
        ];
        let rad = theta_deg.to_radians();
        let (s, c) = rad.sin_cos();
        let rotated: Vec<(f64, f64)> = corners
            .iter()
            .map(|&(x, y)| {
                let (dx, dy) = (x - cx, y - cy);
                (cx + c * dx - s * dy, cy + s * dx + c * dy)
            })
            .collect();
        let mut poly = rotated;
        for i in 0..4 {
            let edge = (corners[i], corners[(i + 1) % 4]);
            poly = clip_polygon(&poly, edge);
        }
        polygon_area(&poly) / (wf * hf)
    }

    #[test]
    fn mask_fraction_matches_polygon_oracle_at_45() {
        let img = FloatImage::zeros(64, 64, 1);
        let (_, mask) = rotate_cropped_fit(&img, RotationAngle::new(45));
        let oracle = intersection_fraction_oracle(64, 64, 45.0);
        // closed form for the square at 45 degrees: 2 (sqrt 2 - 1)
        assert!((oracle - 2.0 * (2f64.sqrt() - 1.0)).abs() < 1e-9);
        assert!(
            (mask.fraction_true() - oracle).abs() < 0.01,
            "mask {} vs oracle {}",
            mask.fraction_true(),
            oracle
        );
    }

    #[test]
    fn mask_fraction_matches_polygon_oracle_over_grid() {
        let img = FloatImage::zeros(64, 64, 1);
        for theta in (5..=85).step_by(10) {
            let (_, mask) = rotate_cropped_fit(&img, RotationAngle::new(theta));
            let oracle = intersection_fraction_oracle(64, 64, theta as f64);
            assert!(
                (mask.fraction_true() - oracle).abs() < 0.01,
                "theta {theta}: mask {} vs oracle {}",
                mask.fraction_true(),
                oracle
            );
        }
    }

    #[test]
    fn resized_fit_keeps_constant_images_constant() {
        for theta in [7, 33, 45, 121, 304] {
            let img = FloatImage::new(17, 17, 1, vec![0.25; 17 * 17]).unwrap();
            let out = rotate_resized_fit(&img, RotationAngle::new(theta));
            assert_eq!((out.width(), out.height()), (17, 17));
            for &v in out.data() {
                assert!((v - 0.25).abs() < 1e-6, "theta {theta}: {v}");
            }
        }
    }

    #[test]
    fn resized_fit_at_90_equals_cropped_fit() {
        let p = random_patch(6, 6, 3).to_float();
        let resized = rotate_resized_fit(&p, RotationAngle::new(90));
        let (cropped, _) = rotate_cropped_fit(&p, RotationAngle::new(90));
        assert_eq!(resized, cropped);
    }

    #[test]
    fn lossless_identity_and_half_turn_are_byte_exact() {
        let p = random_patch(9, 9, 5);
        let id = rotate_lossless(&p, RotationAngle::new(0), "s");
        assert_eq!(id.image, p);
        assert!(id.valid_crop_mask.all_true());
        let half = rotate_lossless(&p, RotationAngle::new(180), "s");
        let expected = rotate90_patch(&p, RotationAngle::new(180));
        assert_eq!(half.image, expected);
    }

    #[test]
    fn composite_matches_branches_per_pixel() {
        let p = random_patch(24, 24, 9);
        let theta = RotationAngle::new(30);
        let out = rotate_lossless(&p, theta, "s");
        let float = p.to_float();
        let (cropped, mask) = rotate_cropped_fit(&float, theta);
        let resized = rotate_resized_fit(&float, theta);
        let cropped_q = cropped.to_patch().unwrap();
        let resized_q = resized.to_patch().unwrap();
        for y in 0..24 {
            for x in 0..24 {
                let expect = if mask.get(x, y) {
                    cropped_q.get(x, y)
                } else {
                    resized_q.get(x, y)
                };
                assert_eq!(out.image.get(x, y), expect, "pixel ({x},{y})");
            }
        }
        assert_eq!(out.valid_crop_mask, mask);
    }

    #[test]
    fn composite_range_within_source_range() {
        let p = random_patch(16, 16, 21);
        let lo = *p.data().iter().min().unwrap();
        let hi = *p.data().iter().max().unwrap();
        for theta in [13, 77, 200] {
            let out = rotate_lossless(&p, RotationAngle::new(theta), "s");
            for &v in out.image.data() {
                assert!(v >= lo.saturating_sub(1) && v <= hi.saturating_add(1), "theta {theta}");
            }
        }
    }

    #[test]
    fn rotation_set_full_sweep_and_duplicates() {
        let p = random_patch(4, 4, 1);
        let angles = full_rotation_angles();
        assert_eq!(angles.len(), 360);
        let out = rotation_set(&p, &angles, "s").unwrap();
        assert_eq!(out.len(), 360);
        // 360 wraps to 0, so the sweep includes an identity copy
        assert_eq!(out[359].image, p);

        let dup = [RotationAngle::new(10), RotationAngle::new(370)];
        match rotation_set(&p, &dup, "s") {
            Err(AugmentError::DuplicateAngle(10)) => {}
            other => panic!("expected duplicate error, got {other:?}"),
        }
        let single = rotation_set(&p, &[RotationAngle::new(0)], "s").unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single[0].image, p);
    }

    #[test]
    fn session_angles_deterministic_and_disjoint() {
        let ledger = BTreeSet::new();
        let a = sample_session_angles(42, 1, &ledger).unwrap();
        let b = sample_session_angles(42, 1, &ledger).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 30);
        for angle in &a {
            assert!(![90u16, 180, 270].contains(&angle.degrees()));
            assert!(angle.degrees() >= 1 && angle.degrees() <= 359);
        }

        // 11 consecutive sessions use 330 distinct angles
        let mut ledger = BTreeSet::new();
        for session in 1..=11 {
            let drawn = sample_session_angles(42, session, &ledger).unwrap();
            for angle in drawn {
                assert!(ledger.insert(angle.degrees()), "angle {angle} reused");
            }
        }
        assert_eq!(ledger.len(), 330);
        // 12th session cannot be served: only 26 angles remain
        match sample_session_angles(42, 12, &ledger) {
            Err(AugmentError::PoolExhausted { remaining: 26, needed: 30 }) => {}
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }
}
