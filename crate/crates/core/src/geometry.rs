//! Pinhole camera geometry shared by the tracker, localizer and planners.
//!
//! Frame conventions:
//! - world: z up, x/y horizontal.
//! - body: x forward, y left, z up; the UAV is always level (hover
//!   approximation), so a body pose is a position plus a yaw.
//! - camera: z along the optical axis, x right (image u), y down (image v).
//!   The camera is mounted on the body looking forward, depressed by
//!   `gamma` below the horizontal plane.

use nalgebra::{Matrix3, Matrix4x3, Matrix6x4, SMatrix, Vector2, Vector3, Vector4, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point3 = Vector3<f64>;
pub type Pixel = Vector2<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point is behind the camera (camera-frame depth {depth})")]
    BehindCamera { depth: f64 },
    #[error("homogeneous entry {index} is {value}, expected 1")]
    MalformedHomogeneous { index: usize, value: f64 },
    #[error("invalid bounding box ({u_min}, {v_min}, {u_max}, {v_max})")]
    InvalidBox {
        u_min: f64,
        v_min: f64,
        u_max: f64,
        v_max: f64,
    },
    #[error("cone corners enclose zero area")]
    DegenerateCone,
    #[error("cone corners are not in clockwise image order")]
    WrongWinding,
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
}

/// Rigid transform `p' = R p + t`.
///
/// The name of a pose says which way it maps: a `world_to_camera` pose takes
/// world coordinates to camera coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseSE3 {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for PoseSE3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl PoseSE3 {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a pose, checking that `rotation` is a proper rotation.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        let ortho_err = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        if ortho_err > 1e-9 {
            return Err(GeometryError::InvalidPose(format!(
                "rotation not orthonormal (error {ortho_err:e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > 1e-9 {
            return Err(GeometryError::InvalidPose(format!("rotation determinant {det}")));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidPose("non-finite translation".into()));
        }
        Ok(Self { rotation, translation })
    }

    /// Level body pose: rotation about world z by `yaw`, positioned at `position`.
    pub fn from_yaw(yaw: f64, position: Point3) -> Self {
        Self {
            rotation: rot_z(yaw),
            translation: position,
        }
    }

    pub fn transform_point(&self, p: &Point3) -> Point3 {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &PoseSE3) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Heading of the body x axis projected on the world horizontal plane.
    pub fn yaw(&self) -> f64 {
        self.rotation[(1, 0)].atan2(self.rotation[(0, 0)])
    }
}

impl std::ops::Mul for PoseSE3 {
    type Output = PoseSE3;
    fn mul(self, rhs: PoseSE3) -> PoseSE3 {
        self.compose(&rhs)
    }
}

pub fn rot_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = a.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// Pinhole intrinsics plus the mount and scan angles of the camera.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraRig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: f64,
    pub height: f64,
    /// Depression of the optical axis below the horizontal plane, radians.
    pub gamma: f64,
    /// Vertical scanning angle used by the mapping planner, radians.
    pub beta: f64,
}

impl Default for CameraRig {
    fn default() -> Self {
        Self {
            fx: 500.0,
            fy: 500.0,
            cx: 320.0,
            cy: 240.0,
            width: 640.0,
            height: 480.0,
            gamma: 55f64.to_radians(),
            beta: 40f64.to_radians(),
        }
    }
}

impl CameraRig {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let fields = [
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            self.width,
            self.height,
            self.gamma,
            self.beta,
        ];
        if !fields.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidCamera("non-finite parameter".into()));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(GeometryError::InvalidCamera("focal lengths must be positive".into()));
        }
        if self.width <= 0.0 || self.height <= 0.0 {
            return Err(GeometryError::InvalidCamera("image size must be positive".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < std::f64::consts::FRAC_PI_2) {
            return Err(GeometryError::InvalidCamera("gamma must lie in (0, pi/2)".into()));
        }
        if !(self.beta > 0.0 && self.beta < std::f64::consts::PI) {
            return Err(GeometryError::InvalidCamera("beta must lie in (0, pi)".into()));
        }
        if self.beta >= self.vertical_fov() {
            return Err(GeometryError::InvalidCamera(format!(
                "beta ({:.4} rad) must be smaller than the vertical field of view ({:.4} rad)",
                self.beta,
                self.vertical_fov()
            )));
        }
        Ok(())
    }

    pub fn intrinsics(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn vertical_fov(&self) -> f64 {
        2.0 * (0.5 * self.height / self.fy).atan()
    }

    pub fn horizontal_fov(&self) -> f64 {
        2.0 * (0.5 * self.width / self.fx).atan()
    }

    pub fn contains_pixel(&self, p: &Pixel) -> bool {
        p.x >= 0.0 && p.x <= self.width && p.y >= 0.0 && p.y <= self.height
    }

    pub fn image_box(&self) -> BBox {
        BBox {
            u_min: 0.0,
            v_min: 0.0,
            u_max: self.width,
            v_max: self.height,
        }
    }

    /// Rotation taking camera-frame vectors to body-frame vectors.
    pub fn mount_rotation(&self) -> Matrix3<f64> {
        let (s, c) = self.gamma.sin_cos();
        let x_cam = Vector3::new(0.0, -1.0, 0.0);
        let z_cam = Vector3::new(c, 0.0, -s);
        let y_cam = z_cam.cross(&x_cam);
        Matrix3::from_columns(&[x_cam, y_cam, z_cam])
    }

    /// Camera-to-world pose for a camera mounted at the body origin.
    pub fn camera_to_world(&self, body_to_world: &PoseSE3) -> PoseSE3 {
        body_to_world.compose(&PoseSE3 {
            rotation: self.mount_rotation(),
            translation: Vector3::zeros(),
        })
    }

    pub fn world_to_camera(&self, body_to_world: &PoseSE3) -> PoseSE3 {
        self.camera_to_world(body_to_world).inverse()
    }
}

/// Euclidean bounding box `(u_min, v_min, u_max, v_max)` in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
}

impl BBox {
    pub fn new(u_min: f64, v_min: f64, u_max: f64, v_max: f64) -> Result<Self, GeometryError> {
        let b = Self {
            u_min,
            v_min,
            u_max,
            v_max,
        };
        if b.is_valid() {
            Ok(b)
        } else {
            Err(GeometryError::InvalidBox {
                u_min,
                v_min,
                u_max,
                v_max,
            })
        }
    }

    /// Box spanned by two opposite corners given in any order.
    pub fn from_corners(a: Pixel, b: Pixel) -> Result<Self, GeometryError> {
        Self::new(a.x.min(b.x), a.y.min(b.y), a.x.max(b.x), a.y.max(b.y))
    }

    pub fn from_vector(v: &Vector4<f64>) -> Result<Self, GeometryError> {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn is_valid(&self) -> bool {
        [self.u_min, self.v_min, self.u_max, self.v_max]
            .iter()
            .all(|v| v.is_finite())
            && self.u_min < self.u_max
            && self.v_min < self.v_max
    }

    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.u_min, self.v_min, self.u_max, self.v_max)
    }

    pub fn width(&self) -> f64 {
        self.u_max - self.u_min
    }

    pub fn height(&self) -> f64 {
        self.v_max - self.v_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Pixel {
        Pixel::new(0.5 * (self.u_min + self.u_max), 0.5 * (self.v_min + self.v_max))
    }

    pub fn contains(&self, p: &Pixel) -> bool {
        p.x >= self.u_min && p.x <= self.u_max && p.y >= self.v_min && p.y <= self.v_max
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = (self.u_max.min(other.u_max) - self.u_min.max(other.u_min)).max(0.0);
        let h = (self.v_max.min(other.v_max) - self.v_min.max(other.v_min)).max(0.0);
        w * h
    }

    /// Corners in clockwise image order (v points down): top-left, top-right,
    /// bottom-right, bottom-left.
    pub fn corners_clockwise(&self) -> [Pixel; 4] {
        [
            Pixel::new(self.u_min, self.v_min),
            Pixel::new(self.u_max, self.v_min),
            Pixel::new(self.u_max, self.v_max),
            Pixel::new(self.u_min, self.v_max),
        ]
    }
}

/// `T` in `x = T u + a`.
pub fn lift_matrix() -> Matrix6x4<f64> {
    let mut t = Matrix6x4::zeros();
    t[(0, 0)] = 1.0;
    t[(1, 1)] = 1.0;
    t[(3, 2)] = 1.0;
    t[(4, 3)] = 1.0;
    t
}

/// `a` in `x = T u + a`.
pub fn lift_offset() -> Vector6<f64> {
    Vector6::new(0.0, 0.0, 1.0, 0.0, 0.0, 1.0)
}

/// `M` in `u = M x`.
pub fn drop_matrix() -> SMatrix<f64, 4, 6> {
    lift_matrix().transpose()
}

pub fn to_homogeneous(u: &BBox) -> Vector6<f64> {
    lift_matrix() * u.as_vector() + lift_offset()
}

pub fn to_euclidean(x: &Vector6<f64>) -> Result<BBox, GeometryError> {
    for index in [2usize, 5] {
        if !((x[index] - 1.0).abs() <= 1e-6) {
            return Err(GeometryError::MalformedHomogeneous { index, value: x[index] });
        }
    }
    BBox::from_vector(&(drop_matrix() * x))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub pixel: Pixel,
    pub depth: f64,
}

/// Projects a world point; the pixel may fall outside the image.
pub fn project(point: &Point3, world_to_camera: &PoseSE3, cam: &CameraRig) -> Result<Projection, GeometryError> {
    project_camera(&world_to_camera.transform_point(point), cam)
}

pub fn project_camera(p: &Point3, cam: &CameraRig) -> Result<Projection, GeometryError> {
    if !(p.z > 0.0) {
        return Err(GeometryError::BehindCamera { depth: p.z });
    }
    Ok(Projection {
        pixel: Pixel::new(cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy),
        depth: p.z,
    })
}

/// `K⁻¹ l` with unit z.
pub fn back_project_direction(l: &Pixel, cam: &CameraRig) -> Vector3<f64> {
    Vector3::new((l.x - cam.cx) / cam.fx, (l.y - cam.cy) / cam.fy, 1.0)
}

/// Inward face normals of the polyhedral cone through four image corners.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeNormals(pub Matrix4x3<f64>);

impl ConeNormals {
    pub fn margins(&self, p_cam: &Point3) -> Vector4<f64> {
        self.0 * p_cam
    }

    pub fn contains(&self, p_cam: &Point3) -> bool {
        in_cone(self, p_cam)
    }
}

pub fn cone_normals(corners: &[Pixel; 4], cam: &CameraRig) -> Result<ConeNormals, GeometryError> {
    let twice_area: f64 = (0..4)
        .map(|i| {
            let a = corners[i];
            let b = corners[(i + 1) % 4];
            a.x * b.y - b.x * a.y
        })
        .sum();
    let scale = corners.iter().map(|c| c.norm()).fold(1.0, f64::max);
    if !twice_area.is_finite() || twice_area.abs() <= 1e-12 * scale * scale {
        return Err(GeometryError::DegenerateCone);
    }
    if twice_area < 0.0 {
        return Err(GeometryError::WrongWinding);
    }
    let dirs = corners.map(|c| back_project_direction(&c, cam));
    let mut n = Matrix4x3::zeros();
    for i in 0..4 {
        let normal = dirs[i].cross(&dirs[(i + 1) % 4]);
        n.set_row(i, &normal.transpose());
    }
    Ok(ConeNormals(n))
}

/// Registration test: all four face margins strictly positive.
pub fn in_cone(normals: &ConeNormals, p_cam: &Point3) -> bool {
    normals.margins(p_cam).iter().all(|&m| m > 0.0)
}
