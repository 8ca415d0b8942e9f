// SPDX-License-Identifier: Apache-2.0

//! Synthetic scenes with known labels.
//!
//! An eight-beam spinning LiDAR is ray cast against analytic object geometry
//! and a flat ground plane, and a pinhole camera produces detector-style
//! bounding boxes for beacons in its field of view. Every render is a pure
//! function of the scene, the sensor model and a seed.

pub mod geometry;
mod scenario;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::camera_map::BoundingBox;
use crate::error::{Error, Result};
use crate::point_cloud::{LidarPoint, RawCloud, RawPoint, NUM_BEAMS};
use geometry::{plane_z, Cylinder, Frustum, OrientedBox, Ray};

pub use scenario::{
    generate_dataset, lidar_file_name, load_dataset, parse_scenario, truth_rows, write_dataset, Dataset,
    DatasetManifest, DatasetWriter, Frame, GridSpec, ManifestFrame, RandomSpec, Scenario, SweepSpec, BOXES_FILE,
    LIDAR_DIR, MANIFEST_FILE, PAIRS_FILE, TRUTH_FILE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    Beacon,
    PersonVest,
    Vehicle,
    Pallet,
}

impl ObjectKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ObjectKind::Beacon => "beacon",
            ObjectKind::PersonVest => "person_vest",
            ObjectKind::Vehicle => "vehicle",
            ObjectKind::Pallet => "pallet",
        }
    }
}

impl std::str::FromStr for ObjectKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beacon" => Ok(ObjectKind::Beacon),
            "person_vest" => Ok(ObjectKind::PersonVest),
            "vehicle" => Ok(ObjectKind::Vehicle),
            "pallet" => Ok(ObjectKind::Pallet),
            other => Err(Error::invalid(format!("unknown object kind {other:?}"))),
        }
    }
}

/// Nominal surface intensities on the 0-255 scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reflectivity {
    /// Painted or fabric surfaces; kept under the bright threshold.
    pub diffuse: u32,
    /// Retro-reflective pole, tape or stripes.
    pub retro: u32,
}

impl Reflectivity {
    pub fn for_kind(kind: ObjectKind) -> Self {
        match kind {
            ObjectKind::Beacon => Self { diffuse: 8, retro: 140 },
            ObjectKind::PersonVest => Self { diffuse: 6, retro: 110 },
            ObjectKind::Vehicle => Self { diffuse: 10, retro: 130 },
            ObjectKind::Pallet => Self { diffuse: 5, retro: 5 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: u64,
    pub kind: ObjectKind,
    /// Ground contact point in the sensor frame (meters).
    pub position: [f64; 2],
    pub yaw_deg: f64,
    pub reflectivity: Reflectivity,
}

impl SceneObject {
    pub fn new(id: u64, kind: ObjectKind, position: [f64; 2], yaw_deg: f64) -> Self {
        Self {
            id,
            kind,
            position,
            yaw_deg,
            reflectivity: Reflectivity::for_kind(kind),
        }
    }

    pub fn distance(&self) -> f64 {
        self.position[0].hypot(self.position[1])
    }

    pub fn angle_deg(&self) -> f64 {
        self.position[1].atan2(self.position[0]).to_degrees()
    }

    /// Footprint radius used for placement and ray culling.
    pub fn footprint_radius(&self) -> f64 {
        match self.kind {
            ObjectKind::Beacon => BEACON_BASE_RADIUS,
            ObjectKind::PersonVest => 0.25,
            ObjectKind::Vehicle => VEHICLE_HALF_LENGTH.hypot(VEHICLE_HALF_WIDTH),
            ObjectKind::Pallet => PALLET_HALF_LENGTH.hypot(PALLET_HALF_WIDTH),
        }
    }
}

pub const BEACON_BASE_RADIUS: f64 = 0.18;
pub const BEACON_CONE_HEIGHT: f64 = 0.71;
pub const BEACON_CONE_TOP_RADIUS: f64 = 0.03;
pub const BEACON_POLE_RADIUS: f64 = 0.025;
pub const BEACON_TOTAL_HEIGHT: f64 = 2.0;
const PERSON_HEIGHT: f64 = 1.75;
const VEST_BAND: (f64, f64) = (1.0, 1.45);
const VEHICLE_HALF_LENGTH: f64 = 1.25;
const VEHICLE_HALF_WIDTH: f64 = 0.6;
const VEHICLE_HEIGHT: f64 = 2.0;
const VEHICLE_STRIP: (f64, f64) = (0.5, 0.7);
const PALLET_HALF_LENGTH: f64 = 0.6;
const PALLET_HALF_WIDTH: f64 = 0.5;
const PALLET_HEIGHT: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub frame_id: u64,
    pub timestamp: f64,
    pub objects: Vec<SceneObject>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LidarModel {
    /// Mounting height above the ground (meters).
    pub height: f64,
    /// Per-beam elevation (degrees), beam 0 first.
    pub elevations_deg: [f64; BEAMS],
    pub azimuth_step_deg: f64,
    pub max_range: f64,
    pub range_noise: f64,
    pub dropout: f64,
    /// Standard deviation of additive intensity noise.
    pub intensity_noise: f64,
    /// Beam exit aperture (meters) and full divergence (radians).
    pub beam_aperture: f64,
    pub beam_divergence: f64,
    /// Disables every random effect, including the azimuth phase.
    pub noise_free: bool,
}

impl Default for LidarModel {
    fn default() -> Self {
        Self {
            height: 1.4,
            elevations_deg: std::array::from_fn(|k| (k as f64 - 6.0) * 3.0),
            azimuth_step_deg: 0.2,
            max_range: 100.0,
            range_noise: 0.01,
            dropout: 0.002,
            intensity_noise: 2.0,
            beam_aperture: 0.03,
            beam_divergence: 0.003,
            noise_free: false,
        }
    }
}

impl LidarModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.height > 0.0) {
            return Err(Error::config("lidar height must be positive"));
        }
        if self.elevations_deg.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("beam elevations must increase with beam index"));
        }
        if !(self.azimuth_step_deg > 0.0 && self.azimuth_step_deg <= 10.0) {
            return Err(Error::config("azimuth step must lie in (0, 10] degrees"));
        }
        if !(self.max_range > 0.0) || self.range_noise < 0.0 || self.intensity_noise < 0.0 {
            return Err(Error::config("lidar range and noise parameters must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config("dropout must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn rays_per_beam(&self) -> usize {
        (360.0 / self.azimuth_step_deg).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraModel {
    pub image_width: f64,
    pub image_height: f64,
    /// Half of the horizontal field of view (degrees).
    pub half_fov_deg: f64,
    pub max_range: f64,
    pub pixel_noise: f64,
    /// Detector confidence at 3 m and its decay per meter.
    pub confidence_near: f64,
    pub confidence_slope: f64,
    pub confidence_noise: f64,
    /// Chance that a person in view yields a spurious box.
    pub false_box_rate: f64,
    /// Confidence range of spurious boxes.
    pub false_box_confidence: (f64, f64),
    pub noise_free: bool,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            image_width: 640.0,
            image_height: 480.0,
            half_fov_deg: 20.0,
            max_range: 40.0,
            pixel_noise: 1.0,
            confidence_near: 0.97,
            confidence_slope: 0.004,
            confidence_noise: 0.02,
            false_box_rate: 0.3,
            false_box_confidence: (0.3, 0.75),
            noise_free: false,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.image_width > 0.0 && self.image_height > 0.0) {
            return Err(Error::config("image size must be positive"));
        }
        if !(self.half_fov_deg > 0.0 && self.half_fov_deg < 89.0) {
            return Err(Error::config("camera half field of view must lie in (0, 89) degrees"));
        }
        if self.pixel_noise < 0.0 || self.confidence_noise < 0.0 {
            return Err(Error::config("camera noise must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.false_box_rate) {
            return Err(Error::config("false box rate must lie in [0, 1]"));
        }
        let (lo, hi) = self.false_box_confidence;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(Error::config("false box confidence range must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Focal length in pixels.
    pub fn focal(&self) -> f64 {
        0.5 * self.image_width / self.half_fov_deg.to_radians().tan()
    }

    /// Image column of a sensor-frame point. Column grows with azimuth, so
    /// the positive field-of-view edge is the right image margin.
    pub fn column(&self, x: f64, y: f64) -> f64 {
        0.5 * self.image_width + self.focal() * y / x
    }

    /// Image row of a sensor-frame point (rows grow downward).
    pub fn row(&self, x: f64, z: f64) -> f64 {
        0.5 * self.image_height - self.focal() * z / x
    }
}

/// Derives an independent stream seed for `(master, id)`.
pub fn derive_seed(master: u64, id: u64) -> u64 {
    // splitmix64 finalizer over the combined words
    let mut z = master ^ id.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(0x632b_e59b_d9b4_e019);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Surface {
    Ground,
    Diffuse,
    Retro,
}

enum Shape {
    Cyl(Cylinder, Surface, bool),
    Cone(Frustum, Surface),
    Boxed(OrientedBox, Surface),
    /// Box whose surface depends on hit height.
    BandedBox(OrientedBox, (f64, f64)),
    /// Cylinder whose surface depends on hit height.
    BandedCyl(Cylinder, (f64, f64)),
}

struct Body {
    reflectivity: Reflectivity,
    shapes: Vec<Shape>,
    /// Azimuth of the footprint center and half-width of the sector it covers.
    azimuth: f64,
    half_sector: f64,
}

fn bodies(scene: &Scene, h: f64) -> Vec<Body> {
    let ground = -h;
    scene
        .objects
        .iter()
        .map(|o| {
            let c = o.position;
            let yaw = o.yaw_deg.to_radians();
            let shapes = match o.kind {
                ObjectKind::Beacon => {
                    let cone_top = ground + BEACON_CONE_HEIGHT;
                    vec![
                        Shape::Cone(
                            Frustum {
                                center: c,
                                z0: ground,
                                z1: cone_top,
                                r0: BEACON_BASE_RADIUS,
                                r1: BEACON_CONE_TOP_RADIUS,
                            },
                            Surface::Diffuse,
                        ),
                        Shape::Cyl(
                            Cylinder {
                                center: c,
                                radius: BEACON_POLE_RADIUS,
                                z0: cone_top,
                                z1: ground + BEACON_TOTAL_HEIGHT,
                            },
                            Surface::Retro,
                            true,
                        ),
                    ]
                }
                ObjectKind::PersonVest => vec![
                    Shape::Cyl(
                        Cylinder {
                            center: c,
                            radius: 0.14,
                            z0: ground,
                            z1: ground + 0.85,
                        },
                        Surface::Diffuse,
                        false,
                    ),
                    Shape::BandedCyl(
                        Cylinder {
                            center: c,
                            radius: 0.2,
                            z0: ground + 0.85,
                            z1: ground + 1.5,
                        },
                        (ground + VEST_BAND.0, ground + VEST_BAND.1),
                    ),
                    Shape::Cyl(
                        Cylinder {
                            center: c,
                            radius: 0.1,
                            z0: ground + 1.5,
                            z1: ground + PERSON_HEIGHT,
                        },
                        Surface::Diffuse,
                        false,
                    ),
                ],
                ObjectKind::Vehicle => vec![Shape::BandedBox(
                    OrientedBox {
                        center: c,
                        half_length: VEHICLE_HALF_LENGTH,
                        half_width: VEHICLE_HALF_WIDTH,
                        yaw,
                        z0: ground,
                        z1: ground + VEHICLE_HEIGHT,
                    },
                    (ground + VEHICLE_STRIP.0, ground + VEHICLE_STRIP.1),
                )],
                ObjectKind::Pallet => vec![Shape::Boxed(
                    OrientedBox {
                        center: c,
                        half_length: PALLET_HALF_LENGTH,
                        half_width: PALLET_HALF_WIDTH,
                        yaw,
                        z0: ground,
                        z1: ground + PALLET_HEIGHT,
                    },
                    Surface::Diffuse,
                )],
            };
            let d = o.distance();
            let r = o.footprint_radius() + 0.1;
            let half_sector = if d <= r { PI } else { (r / d).asin() };
            Body {
                reflectivity: o.reflectivity,
                shapes,
                azimuth: c[1].atan2(c[0]),
                half_sector,
            }
        })
        .collect()
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = (a + PI) % (2.0 * PI);
    if a < 0.0 {
        a += 2.0 * PI;
    }
    a - PI
}

fn cast(ray: &Ray, bodies: &[Body], azimuth: f64, model: &LidarModel) -> Option<(f64, Surface, Reflectivity)> {
    let half_ap = 0.5 * model.beam_aperture;
    let half_div = 0.5 * model.beam_divergence;
    let mut best: Option<(f64, Surface, Reflectivity)> = plane_z(ray, -model.height).map(|t| {
        (
            t,
            Surface::Ground,
            Reflectivity {
                diffuse: GROUND_INTENSITY,
                retro: GROUND_INTENSITY,
            },
        )
    });
    for b in bodies {
        if wrap_angle(azimuth - b.azimuth).abs() > b.half_sector {
            continue;
        }
        for s in &b.shapes {
            let hit = match s {
                Shape::Cyl(c, surf, bloom) => {
                    let t = if *bloom {
                        c.intersect_with_bloom(ray, half_ap, half_div)
                    } else {
                        c.intersect(ray)
                    };
                    t.map(|t| (t, *surf))
                }
                Shape::Cone(f, surf) => f.intersect(ray).map(|t| (t, *surf)),
                Shape::Boxed(bx, surf) => bx.intersect(ray).map(|t| (t, *surf)),
                Shape::BandedBox(bx, band) => bx.intersect(ray).map(|t| (t, banded(ray, t, *band))),
                Shape::BandedCyl(c, band) => c.intersect(ray).map(|t| (t, banded(ray, t, *band))),
            };
            if let Some((t, surf)) = hit {
                if best.is_none_or(|(bt, _, _)| t < bt) {
                    best = Some((t, surf, b.reflectivity));
                }
            }
        }
    }
    best.filter(|(t, _, _)| *t <= model.max_range)
}

fn banded(ray: &Ray, t: f64, band: (f64, f64)) -> Surface {
    let z = ray.dir[2] * t;
    if z >= band.0 && z <= band.1 {
        Surface::Retro
    } else {
        Surface::Diffuse
    }
}

const BEAMS: usize = NUM_BEAMS as usize;

pub const GROUND_INTENSITY: u32 = 4;
/// Largest intensity a non retro-reflective surface may return.
pub const DIFFUSE_MAX_INTENSITY: u32 = 14;
/// Smallest intensity a retro-reflective surface may return.
pub const RETRO_MIN_INTENSITY: u32 = 100;

/// Ray casts one full revolution. Points are ordered by beam, then azimuth.
pub fn render_lidar(scene: &Scene, model: &LidarModel, seed: u64) -> RawCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noisy = !model.noise_free;
    let bodies = bodies(scene, model.height);
    let step = model.azimuth_step_deg.to_radians();
    let phase = if noisy { rng.random_range(0.0..step) } else { 0.0 };
    let n_az = model.rays_per_beam();
    let range_noise = Normal::new(0.0, model.range_noise.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let int_noise = Normal::new(0.0, model.intensity_noise.max(f64::MIN_POSITIVE)).expect("finite sigma");

    let mut points = Vec::with_capacity(BEAMS * n_az);
    for (beam, &elev) in model.elevations_deg.iter().enumerate() {
        let elev = elev.to_radians();
        for j in 0..n_az {
            let az = wrap_angle(phase + j as f64 * step);
            let ray = Ray::from_angles(az, elev);
            let beam = beam as u8;
            if noisy && model.dropout > 0.0 && rng.random::<f64>() < model.dropout {
                points.push(RawPoint::NoReturn { beam });
                continue;
            }
            let Some((t, surface, refl)) = cast(&ray, &bodies, az, model) else {
                points.push(RawPoint::NoReturn { beam });
                continue;
            };
            let (t, jitter) = if noisy {
                (t + range_noise.sample(&mut rng), int_noise.sample(&mut rng))
            } else {
                (t, 0.0)
            };
            let intensity = match surface {
                Surface::Retro => {
                    let base = refl.retro as f64 * (1.0 + 0.05 * jitter);
                    (base.round().max(0.0) as u32).max(RETRO_MIN_INTENSITY)
                }
                Surface::Diffuse => ((refl.diffuse as f64 + jitter).round().max(0.0) as u32).min(DIFFUSE_MAX_INTENSITY),
                Surface::Ground => ((GROUND_INTENSITY as f64 + jitter).round().max(0.0) as u32).min(DIFFUSE_MAX_INTENSITY),
            };
            let p = ray.at(t.max(0.0));
            points.push(RawPoint::Return(LidarPoint {
                x: p[0],
                y: p[1],
                z: p[2],
                intensity,
                beam,
            }));
        }
    }
    RawCloud {
        frame_id: scene.frame_id,
        timestamp: scene.timestamp,
        points,
    }
}

/// Hidden truth carried by a rendered box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxTruth {
    pub object_id: u64,
    pub kind: ObjectKind,
    pub distance: f64,
    pub angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraDetection {
    pub bbox: BoundingBox,
    pub truth: BoxTruth,
}

/// Half-width (meters) and vertical extent (above the ground) of the
/// object's silhouette.
fn silhouette(kind: ObjectKind) -> (f64, f64) {
    match kind {
        ObjectKind::Beacon => (BEACON_BASE_RADIUS, BEACON_TOTAL_HEIGHT),
        ObjectKind::PersonVest => (0.25, PERSON_HEIGHT),
        ObjectKind::Vehicle => (VEHICLE_HALF_WIDTH, VEHICLE_HEIGHT),
        ObjectKind::Pallet => (PALLET_HALF_WIDTH, PALLET_HEIGHT),
    }
}

/// Noise-free projection of an object's silhouette, clipped to the image.
/// `None` when the box center is outside the field of view, the object is
/// out of range, or nothing remains after clipping.
pub fn project_box(obj: &SceneObject, camera: &CameraModel, sensor_height: f64) -> Option<[f64; 4]> {
    let d = obj.distance();
    if d > camera.max_range || obj.position[0] <= 0.0 {
        return None;
    }
    if obj.angle_deg().abs() > camera.half_fov_deg {
        return None;
    }
    let (half_w, height) = silhouette(obj.kind);
    let [x, y] = obj.position;
    // Silhouette edges perpendicular to the line of sight.
    let (px, py) = (-y / d * half_w, x / d * half_w);
    let u_a = camera.column(x + px, y + py);
    let u_b = camera.column(x - px, y - py);
    let near = x - half_w * x / d;
    let top = camera.row(x, -sensor_height + height);
    let bottom = camera.row(near.max(0.1), -sensor_height);
    let xmin = u_a.min(u_b).max(0.0);
    let xmax = u_a.max(u_b).min(camera.image_width);
    let ymin = top.max(0.0);
    let ymax = bottom.min(camera.image_height);
    (xmax - xmin >= 1.0 && ymax - ymin >= 1.0).then_some([xmin, ymin, xmax, ymax])
}

/// Detector output for one frame, in object order.
pub fn render_camera(scene: &Scene, camera: &CameraModel, sensor_height: f64, seed: u64) -> Vec<CameraDetection> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noisy = !camera.noise_free;
    let px = Normal::new(0.0, camera.pixel_noise.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let conf_noise = Normal::new(0.0, camera.confidence_noise.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let image = (camera.image_width, camera.image_height);
    let mut out = Vec::new();
    for obj in &scene.objects {
        let confidence = match obj.kind {
            ObjectKind::Beacon => {
                let base = camera.confidence_near - camera.confidence_slope * (obj.distance() - 3.0);
                let c = if noisy { base + conf_noise.sample(&mut rng) } else { base };
                c.clamp(0.0, 1.0)
            }
            ObjectKind::PersonVest if noisy && camera.false_box_rate > 0.0 => {
                // Draw both numbers regardless of outcome to keep streams aligned.
                let fire = rng.random::<f64>() < camera.false_box_rate;
                let (lo, hi) = camera.false_box_confidence;
                let c = lo + (hi - lo) * rng.random::<f64>();
                if !fire {
                    continue;
                }
                c
            }
            _ => continue,
        };
        let Some(mut corners) = project_box(obj, camera, sensor_height) else {
            continue;
        };
        if noisy {
            for v in &mut corners {
                *v += px.sample(&mut rng);
            }
        }
        let [xmin, ymin, xmax, ymax] = [
            corners[0].clamp(0.0, camera.image_width),
            corners[1].clamp(0.0, camera.image_height),
            corners[2].clamp(0.0, camera.image_width),
            corners[3].clamp(0.0, camera.image_height),
        ];
        let Ok(bbox) = BoundingBox::new(xmin, ymin, xmax, ymax, confidence, image) else {
            continue;
        };
        out.push(CameraDetection {
            bbox,
            truth: BoxTruth {
                object_id: obj.id,
                kind: obj.kind,
                distance: obj.distance(),
                angle: obj.angle_deg(),
            },
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene(objects: Vec<SceneObject>) -> Scene {
        Scene {
            frame_id: 0,
            timestamp: 0.0,
            objects,
        }
    }

    fn quiet() -> LidarModel {
        LidarModel {
            noise_free: true,
            ..Default::default()
        }
    }

    fn returns(c: &RawCloud) -> Vec<LidarPoint> {
        c.points
            .iter()
            .filter_map(|p| match p {
                RawPoint::Return(p) => Some(*p),
                RawPoint::NoReturn { .. } => None,
            })
            .collect()
    }

    #[test]
    fn elevations_follow_three_degree_spacing() {
        let m = LidarModel::default();
        assert_eq!(m.elevations_deg[6], 0.0);
        assert_eq!(m.elevations_deg[7], 3.0);
        assert_eq!(m.elevations_deg[0], -18.0);
        m.validate().unwrap();
    }

    #[test]
    fn empty_scene_is_ground_only() {
        let c = render_lidar(&scene(vec![]), &LidarModel::default(), 1);
        let pts = returns(&c);
        assert!(!pts.is_empty());
        assert!(pts.iter().all(|p| p.z < -1.3));
        assert!(pts.iter().all(|p| p.beam <= 5));
        assert_eq!(c.points.len(), 8 * 1800);
    }

    #[test]
    fn same_seed_same_cloud() {
        let s = scene(vec![SceneObject::new(1, ObjectKind::Beacon, [10.0, 1.0], 0.0)]);
        let a = render_lidar(&s, &LidarModel::default(), 42);
        let b = render_lidar(&s, &LidarModel::default(), 42);
        assert_eq!(a, b);
        let c = render_lidar(&s, &LidarModel::default(), 43);
        assert_ne!(a, c);
    }

    #[test]
    fn retro_and_diffuse_intensities_straddle_threshold() {
        let s = scene(vec![
            SceneObject::new(1, ObjectKind::Beacon, [8.0, 0.0], 0.0),
            SceneObject::new(2, ObjectKind::PersonVest, [6.0, 3.0], 0.0),
        ]);
        let pts = returns(&render_lidar(&s, &LidarModel::default(), 5));
        assert!(pts.iter().all(|p| p.intensity <= DIFFUSE_MAX_INTENSITY || p.intensity >= RETRO_MIN_INTENSITY));
        assert!(pts.iter().any(|p| p.intensity >= RETRO_MIN_INTENSITY));
    }

    #[test]
    fn points_lie_on_their_beam() {
        let s = scene(vec![
            SceneObject::new(1, ObjectKind::Beacon, [7.0, -2.0], 0.0),
            SceneObject::new(2, ObjectKind::Vehicle, [12.0, 4.0], 30.0),
        ]);
        let m = quiet();
        for p in returns(&render_lidar(&s, &m, 0)) {
            let el = p.z.atan2(p.x.hypot(p.y)).to_degrees();
            assert!((el - m.elevations_deg[p.beam as usize]).abs() < 1e-6);
        }
    }

    #[test]
    fn dead_ahead_box_is_centered() {
        let cam = CameraModel {
            noise_free: true,
            ..Default::default()
        };
        let b = project_box(&SceneObject::new(1, ObjectKind::Beacon, [10.0, 0.0], 0.0), &cam, 1.4).unwrap();
        assert!((0.5 * (b[0] + b[2]) - 320.0).abs() < 1e-9);
    }

    #[test]
    fn positive_edge_is_right_margin() {
        let cam = CameraModel::default();
        let a = 20f64.to_radians();
        let obj = SceneObject::new(1, ObjectKind::Beacon, [10.0 * a.cos(), 10.0 * a.sin()], 0.0);
        let b = project_box(&obj, &cam, 1.4).unwrap();
        assert_eq!(b[2], 640.0);
        assert!(b[0] > 600.0);
    }

    #[test]
    fn out_of_view_objects_have_no_box() {
        let cam = CameraModel::default();
        let side = SceneObject::new(1, ObjectKind::Beacon, [5.0, 5.0], 0.0);
        assert!(project_box(&side, &cam, 1.4).is_none());
        let far = SceneObject::new(1, ObjectKind::Beacon, [41.0, 0.0], 0.0);
        assert!(project_box(&far, &cam, 1.4).is_none());
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }
}
