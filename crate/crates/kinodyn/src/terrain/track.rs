//! The bundled closed rally loop: stadium centerline (two straights joined by
//! two hairpins), staggered roll-exciter bumps on the bottom straight, a
//! washboard sector on the top straight, and light noise texture everywhere.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

/// Geometry and surface parameters of the rally-track recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RallyTrackRecipe {
    /// Length of each straight, m.
    pub straight_len: f64,
    /// Hairpin (centerline) radius, m.
    pub radius: f64,
    /// Track corridor half-width, m.
    pub half_width: f64,
    /// Peak height of the staggered bumps, m.
    pub stagger_amplitude: f64,
    /// Longitudinal distance between consecutive staggered bumps, m.
    pub stagger_spacing: f64,
    /// Lateral offset of bump centers from the centerline, m.
    pub stagger_offset: f64,
    /// Footprint radius of each staggered bump, m.
    pub stagger_radius: f64,
    /// Start/end of the stagger sector along the bottom straight, m.
    pub stagger_span: [f64; 2],
    /// Peak-to-trough washboard height, m.
    pub washboard_amplitude: f64,
    /// Washboard ridge period, m.
    pub washboard_wavelength: f64,
    /// Start/end of the washboard sector along the top straight, m.
    pub washboard_span: [f64; 2],
    /// Amplitude of the broadband noise texture, m.
    pub detail_amplitude: f64,
}

impl Default for RallyTrackRecipe {
    fn default() -> Self {
        Self {
            straight_len: 100.0,
            radius: 16.0,
            half_width: 5.0,
            stagger_amplitude: 0.26,
            stagger_spacing: 2.0,
            stagger_offset: 0.85,
            stagger_radius: 1.3,
            stagger_span: [40.0, 88.0],
            washboard_amplitude: 0.12,
            washboard_wavelength: 2.2,
            washboard_span: [30.0, 70.0],
            detail_amplitude: 0.02,
        }
    }
}

impl RallyTrackRecipe {
    pub fn layout(&self) -> RallyTrackLayout {
        RallyTrackLayout {
            straight_len: self.straight_len,
            radius: self.radius,
            half_width: self.half_width,
        }
    }

    pub fn height_at(&self, x: f64, y: f64, seed: u64) -> f64 {
        let mut h = super::fractal_noise(x, y, self.detail_amplitude, 7.0, 3, seed);

        // Staggered bumps along the bottom straight (y ≈ −radius), centers
        // alternating left/right of the centerline.
        let [s0, s1] = self.stagger_span;
        if x >= s0 - self.stagger_radius && x <= s1 + self.stagger_radius {
            let k_lo = ((x - self.stagger_radius - s0) / self.stagger_spacing).floor() as i64;
            let k_hi = ((x + self.stagger_radius - s0) / self.stagger_spacing).ceil() as i64;
            for k in k_lo.max(0)..=k_hi {
                let bx = s0 + (k as f64 + 0.5) * self.stagger_spacing;
                if bx > s1 {
                    break;
                }
                let side = if k % 2 == 0 { 1.0 } else { -1.0 };
                let by = -self.radius + side * self.stagger_offset;
                let d = ((x - bx).powi(2) + (y - by).powi(2)).sqrt() / self.stagger_radius;
                if d < 1.0 {
                    let c = (FRAC_PI_2 * d).cos();
                    h += self.stagger_amplitude * c * c;
                }
            }
        }

        // Washboard ridges across the top straight (y ≈ +radius).
        let [w0, w1] = self.washboard_span;
        if (y - self.radius).abs() <= self.half_width && x >= w0 && x <= w1 {
            let ramp = sector_window(x, w0, w1, 3.0);
            let phase = TAU * (x - w0) / self.washboard_wavelength;
            h += ramp * self.washboard_amplitude * 0.5 * (1.0 - phase.cos());
        }

        h
    }
}

/// Smooth 0→1→0 window over `[lo, hi]` with `edge`-meter cosine ramps.
fn sector_window(x: f64, lo: f64, hi: f64, edge: f64) -> f64 {
    if x <= lo || x >= hi {
        return 0.0;
    }
    let up = ((x - lo) / edge).min(1.0);
    let down = ((hi - x) / edge).min(1.0);
    let s = |t: f64| 0.5 * (1.0 - (PI * t).cos());
    s(up) * s(down)
}

/// Stadium centerline: bottom straight → right hairpin → top straight → left
/// hairpin. The bottom straight runs from (0, −radius) to (straight_len,
/// −radius) with heading +x; arc-length progress starts there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RallyTrackLayout {
    pub straight_len: f64,
    pub radius: f64,
    pub half_width: f64,
}

impl RallyTrackLayout {
    pub fn total_length(&self) -> f64 {
        2.0 * self.straight_len + TAU * self.radius
    }

    /// Unsigned distance from a point to the centerline.
    pub fn centerline_distance(&self, x: f64, y: f64) -> f64 {
        if x < 0.0 {
            ((x * x + y * y).sqrt() - self.radius).abs()
        } else if x > self.straight_len {
            let dx = x - self.straight_len;
            ((dx * dx + y * y).sqrt() - self.radius).abs()
        } else {
            (y + self.radius).abs().min((y - self.radius).abs())
        }
    }

    pub fn is_on_track(&self, x: f64, y: f64) -> bool {
        self.centerline_distance(x, y) <= self.half_width
    }

    /// Arc-length progress of the nearest centerline point, in
    /// `[0, total_length)`.
    pub fn progress(&self, x: f64, y: f64) -> f64 {
        if x < 0.0 {
            let a = y.atan2(x); // in (π/2, π] ∪ (−π, −π/2) for x < 0
            let a = if a >= FRAC_PI_2 { a } else { a + TAU };
            2.0 * self.straight_len + PI * self.radius + self.radius * (a - FRAC_PI_2)
        } else if x > self.straight_len {
            let a = y.atan2(x - self.straight_len); // in (−π/2, π/2)
            self.straight_len + self.radius * (a + FRAC_PI_2)
        } else if y < 0.0 {
            x.clamp(0.0, self.straight_len)
        } else {
            self.straight_len + PI * self.radius + (self.straight_len - x).clamp(0.0, self.straight_len)
        }
    }

    /// Start grid: on the bottom straight shortly after the lap line,
    /// heading +x.
    pub fn start_position(&self) -> (f64, f64, f64) {
        (2.0, -self.radius, 0.0)
    }

    /// Centerline point at arc-length `s` (wrapped into one lap).
    pub fn point_at(&self, s: f64) -> (f64, f64) {
        let total = self.total_length();
        let s = s.rem_euclid(total);
        let (l, r) = (self.straight_len, self.radius);
        if s < l {
            (s, -r)
        } else if s < l + PI * r {
            let a = -FRAC_PI_2 + (s - l) / r;
            (l + r * a.cos(), r * a.sin())
        } else if s < 2.0 * l + PI * r {
            (l - (s - l - PI * r), r)
        } else {
            let a = FRAC_PI_2 + (s - 2.0 * l - PI * r) / r;
            (r * a.cos(), r * a.sin())
        }
    }

    /// Centerline tangent heading at arc-length `s`.
    pub fn heading_at(&self, s: f64) -> f64 {
        let total = self.total_length();
        let s = s.rem_euclid(total);
        let (l, r) = (self.straight_len, self.radius);
        if s < l {
            0.0
        } else if s < l + PI * r {
            (s - l) / r
        } else if s < 2.0 * l + PI * r {
            PI
        } else {
            PI + (s - 2.0 * l - PI * r) / r
        }
    }

    /// World-extent bounding box with a margin, for sizing grids.
    pub fn bounds(&self, margin: f64) -> (f64, f64, f64, f64) {
        (
            -self.radius - self.half_width - margin,
            -self.radius - self.half_width - margin,
            self.straight_len + self.radius + self.half_width + margin,
            self.radius + self.half_width + margin,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> RallyTrackLayout {
        RallyTrackRecipe::default().layout()
    }

    #[test]
    fn total_length_is_about_300m() {
        let l = layout().total_length();
        assert!((l - (200.0 + TAU * 16.0)).abs() < 1e-9);
        assert!(l > 290.0 && l < 310.0);
    }

    #[test]
    fn centerline_points_have_zero_distance() {
        let t = layout();
        assert!(t.centerline_distance(50.0, -16.0) < 1e-12);
        assert!(t.centerline_distance(50.0, 16.0) < 1e-12);
        assert!(t.centerline_distance(-16.0, 0.0) < 1e-12);
        assert!(t.centerline_distance(116.0, 0.0) < 1e-12);
        assert!(!t.is_on_track(50.0, 0.0)); // infield
        assert!(t.is_on_track(50.0, -13.0));
    }

    #[test]
    fn progress_is_monotonic_around_the_loop() {
        let t = layout();
        let total = t.total_length();
        let mut prev = t.progress(2.0, -16.0);
        let mut travelled = 0.0;
        let n = 600;
        for i in 1..=n {
            let s = (i as f64 / n as f64) * total;
            // Parametrize the centerline explicitly.
            let (x, y) = centerline_point(&t, (2.0 + s) % total);
            let p = t.progress(x, y);
            let mut ds = p - prev;
            if ds < -total / 2.0 {
                ds += total;
            }
            assert!(ds >= -1e-6, "progress regressed by {ds} at s={s}");
            travelled += ds;
            prev = p;
        }
        assert!((travelled - total).abs() < 0.5);
    }

    fn centerline_point(t: &RallyTrackLayout, s: f64) -> (f64, f64) {
        t.point_at(s)
    }

    #[test]
    fn point_at_round_trips_progress() {
        let t = layout();
        for i in 0..120 {
            let s = i as f64 * t.total_length() / 120.0;
            let (x, y) = t.point_at(s);
            assert!(t.centerline_distance(x, y) < 1e-9);
            assert!((t.progress(x, y) - s).abs() < 1e-6, "s={s}");
        }
    }

    #[test]
    fn rally_surface_has_bumps_only_in_sectors() {
        let recipe = RallyTrackRecipe::default();
        // In the stagger sector the staggered bumps dominate the texture.
        let mut peak: f64 = 0.0;
        for i in 0..200 {
            let x = 40.0 + 48.0 * (i as f64 / 200.0);
            peak = peak.max(recipe.height_at(x, -16.0 + 0.85, 7));
        }
        assert!(peak > 0.15, "stagger sector peak {peak}");
        // Far outside any sector only the detail noise remains.
        let h = recipe.height_at(10.0, -16.0, 7).abs();
        assert!(h < 0.1, "off-sector height {h}");
    }
}
