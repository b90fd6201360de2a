use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};

use super::RenderError;

/// Pinhole camera, OpenCV convention: `+z` forward, `+y` down. Pixel
/// `(px, py)` is sampled at its center `(px + 0.5, py + 0.5)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// Row-major `[R | t]` mapping world to camera coordinates.
    pub world_to_camera: [[f64; 4]; 3],
}

impl Camera {
    pub fn validate(&self) -> Result<(), RenderError> {
        if self.width == 0 || self.height == 0 {
            return Err(RenderError::EmptyImage);
        }
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(RenderError::Camera(format!("focal lengths must be > 0, got {}, {}", self.fx, self.fy)));
        }
        let r = self.rotation();
        if (r.transpose() * r - Matrix3::identity()).abs().max() > 1e-6 {
            return Err(RenderError::Camera("rotation part is not orthonormal".into()));
        }
        if self.world_to_camera.iter().flatten().any(|v| !v.is_finite()) {
            return Err(RenderError::Camera("pose has non-finite entries".into()));
        }
        Ok(())
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.world_to_camera[i][j])
    }

    pub fn to_camera(&self, p: [f64; 3]) -> [f64; 3] {
        let m = &self.world_to_camera;
        [0, 1, 2].map(|i| m[i][0] * p[0] + m[i][1] * p[1] + m[i][2] * p[2] + m[i][3])
    }

    pub fn rotate(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.world_to_camera;
        [0, 1, 2].map(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
    }

    /// Camera at `eye` looking at `target`, `up` roughly world-up.
    pub fn look_at(
        eye: [f64; 3],
        target: [f64; 3],
        up: [f64; 3],
        fx: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, RenderError> {
        let eye_v = Vector3::from(eye);
        let f = (Vector3::from(target) - eye_v).normalize();
        let right = f.cross(&Vector3::from(up));
        if !(right.norm() > 1e-9) {
            return Err(RenderError::Camera("view direction is parallel to up".into()));
        }
        let x = right.normalize();
        let y = f.cross(&x);
        let mut m = [[0.0; 4]; 3];
        for (i, axis) in [x, y, f].iter().enumerate() {
            m[i][0] = axis[0];
            m[i][1] = axis[1];
            m[i][2] = axis[2];
            m[i][3] = -axis.dot(&eye_v);
        }
        Ok(Self {
            fx,
            fy: fx,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
            world_to_camera: m,
        })
    }

    pub fn to_text(&self) -> String {
        let pose: Vec<String> = self.world_to_camera.iter().flatten().map(|v| v.to_string()).collect();
        format!(
            "fx={}\nfy={}\ncx={}\ncy={}\nwidth={}\nheight={}\npose={}\n",
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            self.width,
            self.height,
            pose.join(" ")
        )
    }
}

const CAMERA_KEYS: [&str; 7] = ["fx", "fy", "cx", "cy", "width", "height", "pose"];

fn parse_block(lines: &[(usize, &str)]) -> Result<Camera, RenderError> {
    let mut values: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    for &(line, text) in lines {
        let (k, v) = text
            .split_once('=')
            .ok_or_else(|| RenderError::CameraFile { line, message: "expected key=value".into() })?;
        let key = k.trim();
        if !CAMERA_KEYS.contains(&key) {
            return Err(RenderError::CameraFile { line, message: format!("unknown key {key:?}") });
        }
        if values.insert(key, (line, v.trim())).is_some() {
            return Err(RenderError::CameraFile { line, message: format!("duplicate key {key:?}") });
        }
    }
    let first = lines.first().map_or(0, |l| l.0);
    let get = |key: &str| {
        values
            .get(key)
            .copied()
            .ok_or_else(|| RenderError::CameraFile { line: first, message: format!("missing key {key:?}") })
    };
    let real = |key: &str| -> Result<f64, RenderError> {
        let (line, v) = get(key)?;
        v.parse()
            .map_err(|_| RenderError::CameraFile { line, message: format!("invalid number for {key}: {v:?}") })
    };
    let int = |key: &str| -> Result<usize, RenderError> {
        let (line, v) = get(key)?;
        v.parse()
            .map_err(|_| RenderError::CameraFile { line, message: format!("invalid integer for {key}: {v:?}") })
    };
    let (pose_line, pose_text) = get("pose")?;
    let pose: Vec<f64> = pose_text
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| RenderError::CameraFile { line: pose_line, message: "invalid pose value".into() })?;
    if pose.len() != 12 {
        return Err(RenderError::CameraFile {
            line: pose_line,
            message: format!("pose needs 12 values, got {}", pose.len()),
        });
    }
    let mut m = [[0.0; 4]; 3];
    for (i, v) in pose.iter().enumerate() {
        m[i / 4][i % 4] = *v;
    }
    let cam = Camera {
        fx: real("fx")?,
        fy: real("fy")?,
        cx: real("cx")?,
        cy: real("cy")?,
        width: int("width")?,
        height: int("height")?,
        world_to_camera: m,
    };
    cam.validate()?;
    Ok(cam)
}

/// Parses camera blocks separated by blank lines. `#` starts a comment.
pub fn parse_trajectory(text: &str) -> Result<Vec<Camera>, RenderError> {
    let mut cams = Vec::new();
    let mut block = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            if raw.trim().is_empty() && !block.is_empty() {
                cams.push(parse_block(&block)?);
                block.clear();
            }
            continue;
        }
        block.push((i + 1, line));
    }
    if !block.is_empty() {
        cams.push(parse_block(&block)?);
    }
    Ok(cams)
}

pub fn parse_camera(text: &str) -> Result<Camera, RenderError> {
    let mut cams = parse_trajectory(text)?;
    if cams.len() != 1 {
        return Err(RenderError::CameraFile {
            line: 0,
            message: format!("expected one camera block, found {}", cams.len()),
        });
    }
    Ok(cams.remove(0))
}
