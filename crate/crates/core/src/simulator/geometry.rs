// SPDX-License-Identifier: Apache-2.0

//! Analytic ray intersection for the scene primitives. Rays start at the
//! sensor origin; `t` is the distance along the unit direction.

const EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub dir: [f64; 3],
}

impl Ray {
    /// Unit ray at `azimuth` (from +x toward +y) and `elevation`, radians.
    pub fn from_angles(azimuth: f64, elevation: f64) -> Self {
        let (se, ce) = elevation.sin_cos();
        let (sa, ca) = azimuth.sin_cos();
        Self {
            dir: [ce * ca, ce * sa, se],
        }
    }

    pub fn at(&self, t: f64) -> [f64; 3] {
        [self.dir[0] * t, self.dir[1] * t, self.dir[2] * t]
    }
}

fn smallest_positive_root(a: f64, b: f64, c: f64, mut accept: impl FnMut(f64) -> bool) -> Option<f64> {
    if a.abs() < EPS {
        if b.abs() < EPS {
            return None;
        }
        let t = -c / b;
        return (t > 0.0 && accept(t)).then_some(t);
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let (mut t0, mut t1) = ((-b - s) / (2.0 * a), (-b + s) / (2.0 * a));
    if t0 > t1 {
        std::mem::swap(&mut t0, &mut t1);
    }
    [t0, t1].into_iter().find(|&t| t > 0.0 && accept(t))
}

/// Horizontal plane `z = z0`.
pub fn plane_z(ray: &Ray, z0: f64) -> Option<f64> {
    let dz = ray.dir[2];
    if dz.abs() < EPS {
        return None;
    }
    let t = z0 / dz;
    (t > 0.0).then_some(t)
}

/// Vertical cylinder with flat caps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cylinder {
    pub center: [f64; 2],
    pub radius: f64,
    pub z0: f64,
    pub z1: f64,
}

impl Cylinder {
    pub fn intersect(&self, ray: &Ray) -> Option<f64> {
        self.intersect_with_bloom(ray, 0.0, 0.0)
    }

    /// Like [`intersect`](Self::intersect), but a ray passing the side wall
    /// within `half_aperture + half_divergence * range` of the surface also
    /// registers, at its point of closest approach to the axis. Models the
    /// finite beam footprint on retro-reflective targets.
    pub fn intersect_with_bloom(&self, ray: &Ray, half_aperture: f64, half_divergence: f64) -> Option<f64> {
        let [dx, dy, dz] = ray.dir;
        let [cx, cy] = self.center;
        let a = dx * dx + dy * dy;
        let z_ok = |t: f64| {
            let z = dz * t;
            z >= self.z0 && z <= self.z1
        };
        let mut best: Option<f64> = None;
        if a > EPS {
            let tc = (dx * cx + dy * cy) / a;
            let d2 = (cx * cx + cy * cy - tc * tc * a).max(0.0);
            let r2 = self.radius * self.radius;
            if d2 < r2 {
                let t = tc - ((r2 - d2) / a).sqrt();
                if t > 0.0 && z_ok(t) {
                    best = Some(t);
                }
            } else if (half_aperture > 0.0 || half_divergence > 0.0) && tc > 0.0 {
                let reach = self.radius + half_aperture + half_divergence * tc * a.sqrt();
                if d2 < reach * reach && z_ok(tc) {
                    best = Some(tc);
                }
            }
        }
        for zc in [self.z0, self.z1] {
            if let Some(t) = plane_z(ray, zc) {
                let p = ray.at(t);
                if (p[0] - cx).powi(2) + (p[1] - cy).powi(2) <= self.radius * self.radius
                    && best.is_none_or(|b| t < b)
                {
                    best = Some(t);
                }
            }
        }
        best
    }
}

/// Vertical truncated cone, radius `r0` at `z0` to `r1` at `z1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frustum {
    pub center: [f64; 2],
    pub z0: f64,
    pub z1: f64,
    pub r0: f64,
    pub r1: f64,
}

impl Frustum {
    pub fn radius_at(&self, z: f64) -> f64 {
        self.r0 + (self.r1 - self.r0) * (z - self.z0) / (self.z1 - self.z0)
    }

    pub fn intersect(&self, ray: &Ray) -> Option<f64> {
        let [dx, dy, dz] = ray.dir;
        let [cx, cy] = self.center;
        let k = (self.r1 - self.r0) / (self.z1 - self.z0);
        let ra = self.r0 - k * self.z0;
        let rb = k * dz;
        let a = dx * dx + dy * dy - rb * rb;
        let b = -2.0 * (dx * cx + dy * cy) - 2.0 * ra * rb;
        let c = cx * cx + cy * cy - ra * ra;
        let side = smallest_positive_root(a, b, c, |t| {
            let z = dz * t;
            z >= self.z0 && z <= self.z1 && ra + rb * t >= 0.0
        });
        let mut best = side;
        for (zc, r) in [(self.z0, self.r0), (self.z1, self.r1)] {
            if let Some(t) = plane_z(ray, zc) {
                let p = ray.at(t);
                if (p[0] - cx).powi(2) + (p[1] - cy).powi(2) <= r * r && best.is_none_or(|b| t < b) {
                    best = Some(t);
                }
            }
        }
        best
    }
}

/// Box with vertical sides, rotated by `yaw` (radians) about its center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub center: [f64; 2],
    pub half_length: f64,
    pub half_width: f64,
    pub yaw: f64,
    pub z0: f64,
    pub z1: f64,
}

impl OrientedBox {
    pub fn bounding_radius(&self) -> f64 {
        self.half_length.hypot(self.half_width)
    }

    pub fn intersect(&self, ray: &Ray) -> Option<f64> {
        let (s, c) = self.yaw.sin_cos();
        // Ray in box-local coordinates.
        let ox = -(c * self.center[0] + s * self.center[1]);
        let oy = s * self.center[0] - c * self.center[1];
        let dx = c * ray.dir[0] + s * ray.dir[1];
        let dy = -s * ray.dir[0] + c * ray.dir[1];
        let dz = ray.dir[2];
        let mut tmin = f64::NEG_INFINITY;
        let mut tmax = f64::INFINITY;
        for (o, d, lo, hi) in [
            (ox, dx, -self.half_length, self.half_length),
            (oy, dy, -self.half_width, self.half_width),
            (0.0, dz, self.z0, self.z1),
        ] {
            if d.abs() < EPS {
                if o < lo || o > hi {
                    return None;
                }
            } else {
                let (mut t0, mut t1) = ((lo - o) / d, (hi - o) / d);
                if t0 > t1 {
                    std::mem::swap(&mut t0, &mut t1);
                }
                tmin = tmin.max(t0);
                tmax = tmax.min(t1);
            }
        }
        if tmax < tmin || tmax <= 0.0 {
            return None;
        }
        Some(if tmin > 0.0 { tmin } else { tmax })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ahead(elev_deg: f64) -> Ray {
        Ray::from_angles(0.0, elev_deg.to_radians())
    }

    #[test]
    fn ground_distance() {
        let t = plane_z(&ahead(-3.0), -1.4).unwrap();
        let p = ahead(-3.0).at(t);
        assert!((p[0] - 1.4 / 3f64.to_radians().tan()).abs() < 1e-9);
        assert!(plane_z(&ahead(3.0), -1.4).is_none());
    }

    #[test]
    fn cylinder_front_face() {
        let c = Cylinder {
            center: [10.0, 0.0],
            radius: 0.5,
            z0: -2.0,
            z1: 2.0,
        };
        assert!((c.intersect(&ahead(0.0)).unwrap() - 9.5).abs() < 1e-9);
        let miss = Ray::from_angles(0.1, 0.0);
        assert!(c.intersect(&miss).is_none());
    }

    #[test]
    fn cylinder_bloom_widens_thin_targets() {
        let c = Cylinder {
            center: [10.0, 0.0],
            radius: 0.025,
            z0: -1.0,
            z1: 1.0,
        };
        // Passes 0.035 m from the axis.
        let r = Ray::from_angles((0.035f64 / 10.0).atan(), 0.0);
        assert!(c.intersect(&r).is_none());
        assert!(c.intersect_with_bloom(&r, 0.0, 0.002).is_some());
    }

    #[test]
    fn frustum_degenerates_to_cylinder() {
        let f = Frustum {
            center: [5.0, 0.0],
            z0: -1.0,
            z1: 1.0,
            r0: 0.3,
            r1: 0.3,
        };
        assert!((f.intersect(&ahead(0.0)).unwrap() - 4.7).abs() < 1e-9);
    }

    #[test]
    fn frustum_radius_varies_with_height() {
        let f = Frustum {
            center: [5.0, 0.0],
            z0: -1.4,
            z1: -0.69,
            r0: 0.18,
            r1: 0.03,
        };
        let el = (-1.0f64 / 5.0).atan();
        let t = f.intersect(&Ray::from_angles(0.0, el)).unwrap();
        let p = Ray::from_angles(0.0, el).at(t);
        assert!((5.0 - p[0] - f.radius_at(p[2])).abs() < 1e-9);
    }

    #[test]
    fn rotated_box() {
        let b = OrientedBox {
            center: [10.0, 0.0],
            half_length: 1.0,
            half_width: 0.5,
            yaw: std::f64::consts::FRAC_PI_2,
            z0: -1.0,
            z1: 1.0,
        };
        assert!((b.intersect(&ahead(0.0)).unwrap() - 9.5).abs() < 1e-9);
        let unrotated = OrientedBox { yaw: 0.0, ..b };
        assert!((unrotated.intersect(&ahead(0.0)).unwrap() - 9.0).abs() < 1e-9);
    }
}
