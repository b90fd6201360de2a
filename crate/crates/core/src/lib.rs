pub mod corpus;
pub mod denoiser;
pub mod diffusion;
pub mod ingest;
pub mod metrics;
pub mod outpaint;
pub mod render;
pub mod seed;
pub mod spatial;
pub mod voxfield;
pub mod vxf;
