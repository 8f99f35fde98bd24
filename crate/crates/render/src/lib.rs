//! Software rasterization and render-paste data synthesis.
//!
//! Two synthesis pipelines share the rasterizer: flying occlusions paste a
//! rendered object and an occluder over a background, and object swap
//! places a new mesh into a scene using its pointmap and re-renders it with
//! a depth test. Images are row-major with `(0, 0)` at the top-left.

pub mod camera;
pub mod error;
pub mod image;
pub mod io;
pub mod occlusion;
pub mod raster;
pub mod swap;
pub mod visibility;

pub use camera::Camera;
pub use error::{Error, Result};
pub use image::{BinaryMask, DepthBuffer, PixelBox, Pointmap, RgbImage};
pub use occlusion::{fo_compose, fo_filter, visible_mask, FoComposite, FoConfig, FoReject, ObjectRender, RenderPasteSample};
pub use raster::{rasterize, rasterize_with, Render, Shading};
pub use swap::{osr_cue_check, osr_place, osr_rerender, CueConfig, CueReport, OsrOutcome, OsrReject};
pub use visibility::{depth_visibility_aggregate, Aggregation, ViewPoints};
