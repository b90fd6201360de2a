//! Surface-aligned Gaussian splats built from a voxfield grid, a pinhole
//! camera model and a deterministic tile rasterizer.

mod camera;
mod image;
mod raster;
mod splat;

pub use camera::{parse_camera, parse_trajectory, Camera};
pub use image::{read_pnm, write_image, write_pnm, Image8};
pub use raster::{render, to_u8, RenderOutput, CUTOFF_SIGMAS, MIN_ALPHA, NEAR_PLANE, SIGMA_FRACTION};
pub use splat::{build_splats, estimate_normal, rotation_from_normal, NormalEstimate, Splat, SplatParams};

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error("image has zero width or height")]
    EmptyImage,
    #[error("invalid camera: {0}")]
    Camera(String),
    #[error("camera file line {line}: {message}")]
    CameraFile { line: usize, message: String },
    #[error("unsupported image format {0:?}")]
    UnsupportedFormat(String),
    #[error("image: {0}")]
    ImageFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RenderOutput {
    pub fn rgb_image(&self) -> Image8 {
        Image8 {
            width: self.width,
            height: self.height,
            channels: 3,
            data: self.rgb8(),
        }
    }

    pub fn sky_mask_image(&self) -> Image8 {
        Image8 {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.sky_mask8(),
        }
    }
}
