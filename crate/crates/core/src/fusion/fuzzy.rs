// SPDX-License-Identifier: Apache-2.0

//! Mamdani combination of LiDAR and camera confidence scores.
//!
//! Inputs and output live on `[0, 100]`. Rule strength uses `min` for AND,
//! consequents are clipped at their rule strength, aggregated with `max`, and
//! the result is defuzzified by its centroid over 1001 evenly spaced samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DOMAIN_MAX: f64 = 100.0;
pub const DEFUZZ_SAMPLES: usize = 1001;

/// Triangular `[a, b, c]` or trapezoidal `[a, b, c, d]` membership function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Membership {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl Membership {
    pub fn triangle(a: f64, b: f64, c: f64) -> Result<Self> {
        Self::trapezoid(a, b, b, c)
    }

    pub fn trapezoid(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        if ![a, b, c, d].iter().all(|v| v.is_finite()) || !(a <= b && b <= c && c <= d) {
            return Err(Error::config(format!("membership vertices must be ordered: {a}, {b}, {c}, {d}")));
        }
        if a == d {
            return Err(Error::config("membership support must be non-empty"));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn vertices(&self) -> Vec<f64> {
        if self.b == self.c {
            vec![self.a, self.b, self.d]
        } else {
            vec![self.a, self.b, self.c, self.d]
        }
    }

    pub fn grade(&self, x: f64) -> f64 {
        if x < self.a || x > self.d {
            0.0
        } else if x < self.b {
            (x - self.a) / (self.b - self.a)
        } else if x <= self.c {
            1.0
        } else {
            (self.d - x) / (self.d - self.c)
        }
    }
}

impl TryFrom<Vec<f64>> for Membership {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        match v[..] {
            [a, b, c] => Self::triangle(a, b, c),
            [a, b, c, d] => Self::trapezoid(a, b, c, d),
            _ => Err(Error::config(format!("membership needs 3 or 4 vertices, got {}", v.len()))),
        }
    }
}

impl From<Membership> for Vec<f64> {
    fn from(m: Membership) -> Self {
        m.vertices()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Term {
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSet {
    pub low: Membership,
    pub medium: Membership,
    pub high: Membership,
}

impl TermSet {
    pub fn get(&self, t: Term) -> &Membership {
        match t {
            Term::Low => &self.low,
            Term::Medium => &self.medium,
            Term::High => &self.high,
        }
    }

    fn covers(&self, x: f64) -> bool {
        [&self.low, &self.medium, &self.high].iter().any(|m| m.grade(x) > 0.0)
    }
}

/// Antecedents are ANDed; an absent antecedent places no constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lidar: Option<Term>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<Term>,
    pub output: Term,
}

const fn rule(lidar: Option<Term>, camera: Option<Term>, output: Term) -> Rule {
    Rule { lidar, camera, output }
}

pub const DEFAULT_RULES: [Rule; 5] = [
    rule(Some(Term::High), None, Term::High),
    rule(None, Some(Term::High), Term::High),
    rule(Some(Term::Medium), None, Term::Medium),
    rule(Some(Term::Low), Some(Term::Medium), Term::Medium),
    rule(Some(Term::Low), Some(Term::Low), Term::Low),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuzzySystem {
    pub lidar: TermSet,
    pub camera: TermSet,
    pub output: TermSet,
    pub rules: Vec<Rule>,
}

fn tri(a: f64, b: f64, c: f64) -> Membership {
    Membership::triangle(a, b, c).expect("static membership")
}

impl Default for FuzzySystem {
    fn default() -> Self {
        Self {
            lidar: TermSet {
                low: tri(0.0, 0.0, 50.0),
                medium: tri(0.0, 50.0, 100.0),
                high: tri(75.0, 100.0, 100.0),
            },
            camera: TermSet {
                low: tri(0.0, 0.0, 50.0),
                medium: tri(25.0, 50.0, 75.0),
                high: Membership::trapezoid(40.0, 80.0, 100.0, 100.0).expect("static membership"),
            },
            output: Self::symmetric_terms(),
            rules: DEFAULT_RULES.to_vec(),
        }
    }
}

impl FuzzySystem {
    /// Low `(0,0,50)`, medium `(25,50,75)`, high `(50,100,100)`.
    pub fn symmetric_terms() -> TermSet {
        TermSet {
            low: tri(0.0, 0.0, 50.0),
            medium: tri(25.0, 50.0, 75.0),
            high: tri(50.0, 100.0, 100.0),
        }
    }

    /// Same triangle layout on both inputs and the output.
    pub fn symmetric() -> Self {
        Self {
            lidar: Self::symmetric_terms(),
            camera: Self::symmetric_terms(),
            output: Self::symmetric_terms(),
            rules: DEFAULT_RULES.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rules.is_empty() {
            return Err(Error::config("fuzzy system needs at least one rule"));
        }
        for (name, set) in [("lidar", &self.lidar), ("camera", &self.camera)] {
            for i in 0..=1000 {
                let x = i as f64 * DOMAIN_MAX / 1000.0;
                if !set.covers(x) {
                    return Err(Error::config(format!("{name} memberships leave {x} uncovered")));
                }
            }
        }
        Ok(())
    }

    fn strength(&self, r: &Rule, lidar: f64, camera: f64) -> f64 {
        let l = r.lidar.map_or(1.0, |t| self.lidar.get(t).grade(lidar));
        let c = r.camera.map_or(1.0, |t| self.camera.get(t).grade(camera));
        l.min(c)
    }
}

/// Detection score in `[0, 100]`. Inputs are clamped to the domain. Returns
/// 0 when no rule fires.
pub fn fuzzy_fuse(lidar_score: f64, camera_score: f64, system: &FuzzySystem) -> f64 {
    let l = lidar_score.clamp(0.0, DOMAIN_MAX);
    let c = camera_score.clamp(0.0, DOMAIN_MAX);
    let strengths: Vec<(f64, &Membership)> = system
        .rules
        .iter()
        .map(|r| (system.strength(r, l, c), system.output.get(r.output)))
        .filter(|(s, _)| *s > 0.0)
        .collect();
    if strengths.is_empty() {
        return 0.0;
    }

    let step = DOMAIN_MAX / (DEFUZZ_SAMPLES - 1) as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..DEFUZZ_SAMPLES {
        let x = i as f64 * step;
        let mu = strengths.iter().map(|(s, m)| s.min(m.grade(x))).fold(0.0, f64::max);
        num += x * mu;
        den += mu;
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_grades() {
        let m = tri(25.0, 50.0, 75.0);
        assert_eq!(m.grade(50.0), 1.0);
        assert_eq!(m.grade(25.0), 0.0);
        assert_eq!(m.grade(37.5), 0.5);
        assert_eq!(m.grade(80.0), 0.0);
        let shoulder = tri(0.0, 0.0, 50.0);
        assert_eq!(shoulder.grade(0.0), 1.0);
        let right = tri(50.0, 100.0, 100.0);
        assert_eq!(right.grade(100.0), 1.0);
    }

    #[test]
    fn unordered_vertices_rejected() {
        assert!(Membership::triangle(10.0, 5.0, 20.0).is_err());
        assert!(serde_json::from_str::<Membership>("[1, 2]").is_err());
    }

    #[test]
    fn vertex_json_round_trip() {
        let sys = FuzzySystem::default();
        let json = serde_json::to_string(&sys).unwrap();
        let back: FuzzySystem = serde_json::from_str(&json).unwrap();
        assert_eq!(back, sys);
    }

    #[test]
    fn default_system_is_complete() {
        FuzzySystem::default().validate().unwrap();
        FuzzySystem::symmetric().validate().unwrap();
    }

    #[test]
    fn worked_example_lands_near_56() {
        let v = fuzzy_fuse(80.0, 20.0, &FuzzySystem::default());
        assert!((v - 56.0).abs() <= 8.0, "got {v}");
    }

    #[test]
    fn both_high_and_both_low() {
        let sys = FuzzySystem::default();
        assert!(fuzzy_fuse(100.0, 100.0, &sys) >= 80.0);
        assert!(fuzzy_fuse(0.0, 0.0, &sys) <= 25.0);
    }

    #[test]
    fn confident_camera_lifts_neutral_lidar_above_default_threshold() {
        let v = fuzzy_fuse(50.0, 80.0, &FuzzySystem::default());
        assert!(v >= 65.0, "got {v}");
    }

    #[test]
    fn output_stays_in_domain() {
        let sys = FuzzySystem::default();
        for l in (0..=100).step_by(5) {
            for c in (0..=100).step_by(5) {
                let v = fuzzy_fuse(l as f64, c as f64, &sys);
                assert!((0.0..=100.0).contains(&v));
            }
        }
    }
}
