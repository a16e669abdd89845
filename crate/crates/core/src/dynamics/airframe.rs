use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Piecewise-linear coefficient table over angle of attack (degrees),
/// clamped at both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct AeroTable {
    points: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for AeroTable {
    type Error = SimError;

    fn try_from(points: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<AeroTable> for Vec<(f64, f64)> {
    fn from(t: AeroTable) -> Self {
        t.points
    }
}

impl AeroTable {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(SimError::InvalidInput("aero table needs at least two points".into()));
        }
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(SimError::InvalidInput("aero table alphas must be strictly increasing".into()));
        }
        if points.iter().any(|(a, c)| !a.is_finite() || !c.is_finite()) {
            return Err(SimError::InvalidInput("aero table entries must be finite".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn eval(&self, alpha: f64) -> f64 {
        let pts = &self.points;
        if alpha <= pts[0].0 {
            return pts[0].1;
        }
        let last = pts[pts.len() - 1];
        if alpha >= last.0 {
            return last.1;
        }
        // partition_point gives the first node strictly right of alpha
        let i = pts.partition_point(|p| p.0 <= alpha);
        let (a0, c0) = pts[i - 1];
        let (a1, c1) = pts[i];
        c0 + (c1 - c0) * (alpha - a0) / (a1 - a0)
    }

    /// Maximum coefficient over the nodes at or below `alpha_limit`.
    pub fn max_below(&self, alpha_limit: f64) -> f64 {
        self.points
            .iter()
            .filter(|p| p.0 <= alpha_limit)
            .map(|p| p.1)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Inverts the table on the increasing branch that ends at `alpha_limit`.
    /// Returns `None` when `coeff` is outside the branch's range.
    pub fn invert_below(&self, coeff: f64, alpha_limit: f64) -> Option<f64> {
        let branch: Vec<(f64, f64)> = self.points.iter().copied().filter(|p| p.0 <= alpha_limit).collect();
        // walk back from the limit while the curve is increasing
        let mut start = branch.len().checked_sub(1)?;
        while start > 0 && branch[start - 1].1 < branch[start].1 {
            start -= 1;
        }
        let seg = &branch[start..];
        if seg.len() < 2 || coeff < seg[0].1 || coeff > seg[seg.len() - 1].1 {
            return None;
        }
        let i = seg.partition_point(|p| p.1 < coeff).max(1);
        let (a0, c0) = seg[i - 1];
        let (a1, c1) = seg[i];
        Some(a0 + (a1 - a0) * (coeff - c0) / (c1 - c0))
    }
}

/// Airframe description for a 737-class transport.
///
/// The pitch channel is parameterised by the short-period matrices acting on
/// `[w (m/s); q (rad/s)]` at the reference flight condition; moments scale with
/// dynamic pressure away from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AirframeParams {
    pub mass: f64,
    pub wing_area: f64,
    pub lift_curve: AeroTable,
    pub drag_polar: AeroTable,
    pub flaps_delta_cl: f64,
    pub flaps_delta_cd: f64,
    pub max_thrust: f64,
    pub short_period_a: [[f64; 2]; 2],
    pub short_period_b: [f64; 2],
    pub reference_airspeed: f64,
    pub reference_density: f64,
    /// Pitch acceleration (deg/s^2) per degree of stabilizer incidence.
    pub stab_moment_gain: f64,
    /// Constant pitch acceleration term (deg/s^2) at the reference condition.
    pub pitch_moment_bias: f64,
    /// Extra nose-up pitch acceleration (deg/s^2 at the reference condition)
    /// against angle of attack; zero through the normal envelope.
    pub pitch_break: AeroTable,
    pub hs_min: f64,
    pub hs_max: f64,
    /// Trim wheel rotations per stabilizer degree.
    pub rpd: f64,
    pub stall_alpha: f64,
    pub gravity: f64,
    pub rolling_friction: f64,
}

impl Default for AirframeParams {
    fn default() -> Self {
        Self::b737_class()
    }
}

impl AirframeParams {
    /// Canned 737-8-class parameter set.
    pub fn b737_class() -> Self {
        let lift_curve = AeroTable::new(vec![
            (-90.0, 0.0),
            (-30.0, -0.9),
            (-10.0, -0.65),
            (-2.0, 0.07),
            (0.0, 0.25),
            (13.0, 1.42),
            (15.0, 1.52),
            (16.0, 1.555),
            (17.0, 1.575),
            (20.0, 1.40),
            (25.0, 1.18),
            (30.0, 1.05),
            (45.0, 0.95),
            (60.0, 0.65),
            (90.0, 0.0),
        ])
        .expect("static table");
        let drag_polar = AeroTable::new(vec![
            (-90.0, 1.8),
            (-30.0, 0.55),
            (-10.0, 0.06),
            (-2.0, 0.0222),
            (0.0, 0.0248),
            (4.0, 0.0395),
            (8.0, 0.0680),
            (13.0, 0.1127),
            (17.0, 0.1420),
            (20.0, 0.2200),
            (25.0, 0.3500),
            (30.0, 0.5000),
            (45.0, 0.9500),
            (60.0, 1.3500),
            (90.0, 1.8000),
        ])
        .expect("static table");
        Self {
            mass: 65_000.0,
            wing_area: 127.0,
            lift_curve,
            drag_polar,
            flaps_delta_cl: 0.55,
            flaps_delta_cd: 0.045,
            max_thrust: 210_000.0,
            short_period_a: [[-0.62, 115.0], [-0.0335, -1.1]],
            short_period_b: [-6.0, -1.40],
            reference_airspeed: 115.0,
            reference_density: 1.056,
            stab_moment_gain: 12.0,
            pitch_moment_bias: 16.0,
            pitch_break: AeroTable::new(vec![
                (14.0, 0.0),
                (17.0, 32.5),
                (50.0, 137.0),
                (55.0, 189.0),
                (60.0, 239.0),
                (65.0, 288.0),
                (75.0, 321.0),
                (85.0, 268.0),
                (90.0, 209.0),
            ])
            .expect("static table"),
            hs_min: -12.0,
            hs_max: 5.0,
            rpd: 18.0,
            stall_alpha: 17.0,
            gravity: 9.806_65,
            rolling_friction: 0.02,
        }
    }

    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }

    pub fn lift_coefficient(&self, alpha: f64, flaps_up: bool) -> f64 {
        let base = self.lift_curve.eval(alpha);
        if flaps_up {
            base
        } else {
            base + self.flaps_delta_cl * flap_blend(alpha)
        }
    }

    pub fn drag_coefficient(&self, alpha: f64, flaps_up: bool) -> f64 {
        let base = self.drag_polar.eval(alpha);
        if flaps_up {
            base
        } else {
            base + self.flaps_delta_cd
        }
    }

    /// Eigenvalues of the short-period matrix as (re, im) pairs.
    pub fn short_period_eigenvalues(&self) -> [(f64, f64); 2] {
        let [[a, b], [c, d]] = self.short_period_a;
        let tr = a + d;
        let det = a * d - b * c;
        let disc = tr * tr / 4.0 - det;
        if disc >= 0.0 {
            let s = disc.sqrt();
            [(tr / 2.0 + s, 0.0), (tr / 2.0 - s, 0.0)]
        } else {
            let s = (-disc).sqrt();
            [(tr / 2.0, s), (tr / 2.0, -s)]
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SimError::InvalidInput(m.to_string()));
        if !(self.mass > 0.0 && self.wing_area > 0.0 && self.max_thrust > 0.0 && self.gravity > 0.0) {
            return bad("mass, wing_area, max_thrust and gravity must be positive");
        }
        if !(self.rpd > 0.0) {
            return bad("rpd must be positive");
        }
        if !(self.hs_min < 0.0 && 0.0 < self.hs_max) {
            return bad("stabilizer limits must straddle zero");
        }
        if !(self.reference_airspeed > 0.0 && self.reference_density > 0.0) {
            return bad("reference condition must be positive");
        }
        if self.short_period_eigenvalues().iter().any(|(re, _)| *re >= 0.0) {
            return bad("short-period matrix is not Hurwitz");
        }
        let pts = self.lift_curve.points();
        let stall = self.stall_alpha;
        let pre: Vec<_> = pts.iter().filter(|p| p.0 >= -2.0 && p.0 <= stall).collect();
        if pre.windows(2).any(|w| w[1].1 <= w[0].1) {
            return bad("lift curve must increase up to stall_alpha");
        }
        let post: Vec<_> = pts.iter().filter(|p| p.0 >= stall && p.0 <= 90.0).collect();
        if post.len() < 2 || post.windows(2).any(|w| w[1].1 > w[0].1) {
            return bad("lift curve must break (decrease) above stall_alpha");
        }
        if self.pitch_break.eval(0.0) != 0.0 {
            return bad("pitch_break must vanish at zero angle of attack");
        }
        Ok(())
    }
}

/// Flap lift increment fades out past the stall break.
fn flap_blend(alpha: f64) -> f64 {
    if alpha <= 15.0 {
        1.0
    } else if alpha >= 30.0 {
        0.3
    } else {
        1.0 - 0.7 * (alpha - 15.0) / 15.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_params_are_valid() {
        let p = AirframeParams::b737_class();
        p.validate().unwrap();
        assert_eq!(p.rpd, 18.0);
        assert_eq!(p.stall_alpha, 17.0);
        assert_eq!((p.hs_min, p.hs_max), (-12.0, 5.0));
    }

    #[test]
    fn tables_are_checked_when_loaded() {
        let ok: AeroTable = serde_json::from_str("[[0, 0], [10, 1]]").unwrap();
        assert_eq!(ok.eval(5.0), 0.5);
        assert!(serde_json::from_str::<AeroTable>("[[10, 0], [0, 1]]").is_err());
        assert!(serde_json::from_str::<AeroTable>("[[0, 0]]").is_err());
        let mut p = AirframeParams::b737_class();
        p.pitch_break = AeroTable::new(vec![(-10.0, 5.0), (10.0, 5.0)]).unwrap();
        assert!(p.validate().is_err());
    }

    #[test]
    fn table_interpolates_and_clamps() {
        let t = AeroTable::new(vec![(0.0, 0.0), (10.0, 1.0), (20.0, 0.5)]).unwrap();
        assert_eq!(t.eval(5.0), 0.5);
        assert_eq!(t.eval(-5.0), 0.0);
        assert_eq!(t.eval(25.0), 0.5);
        assert_eq!(t.eval(15.0), 0.75);
        assert_eq!(t.eval(10.0), 1.0);
    }

    #[test]
    fn inversion_uses_pre_stall_branch() {
        let t = AeroTable::new(vec![(-10.0, 0.5), (0.0, 0.0), (10.0, 1.0), (20.0, 0.5)]).unwrap();
        assert_eq!(t.invert_below(0.5, 10.0), Some(5.0));
        assert_eq!(t.invert_below(1.2, 10.0), None);
        assert_eq!(t.max_below(10.0), 1.0);
    }

    #[test]
    fn rejects_unsorted_table() {
        assert!(AeroTable::new(vec![(1.0, 0.0), (0.0, 1.0)]).is_err());
    }

    #[test]
    fn rejects_unstable_short_period() {
        let mut p = AirframeParams::b737_class();
        p.short_period_a = [[0.5, 115.0], [-0.0335, 0.2]];
        assert!(p.validate().is_err());
    }
}
