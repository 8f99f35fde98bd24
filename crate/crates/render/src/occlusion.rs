//! Flying-occlusion synthesis: paste a rendered object and an occluder over
//! a background and keep samples with a moderate amount of occlusion.

use std::fmt;

use lift3d_core::geom::pose::Pose;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, Pointmap, RgbImage};
use crate::raster::Render;

/// Accepted range of `|M_vis| / |M_obj|` is `[MIN_VISIBLE_RATIO, MAX_VISIBLE_RATIO]`.
pub const MIN_VISIBLE_RATIO: f64 = 0.1;
pub const MAX_VISIBLE_RATIO: f64 = 0.9;
/// Minimum `|M_vis| / |I|`.
pub const MIN_IMAGE_FRACTION: f64 = 0.002;
/// Probability that the selected object is drawn on top as the occluder.
pub const OCCLUDER_AS_TARGET_PROB: f64 = 1.0 / 3.0;

/// One synthesized training example.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderPasteSample {
    pub image: RgbImage,
    pub m_vis: BinaryMask,
    pub m_obj: BinaryMask,
    pub pose: Pose,
    /// Identifier of the pasted mesh, filled in by the caller.
    pub mesh: Option<String>,
    pub pointmap: Option<Pointmap>,
}

/// `M_obj ⊙ (1 − M_occluder)`.
pub fn visible_mask(obj: &BinaryMask, occluder: &BinaryMask) -> Result<BinaryMask> {
    obj.and_not(occluder)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FoReject {
    EmptyObject,
    UnderVisible,
    OverVisible,
    TooSmall,
}

impl fmt::Display for FoReject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FoReject::EmptyObject => "empty object",
            FoReject::UnderVisible => "under-visible",
            FoReject::OverVisible => "over-visible",
            FoReject::TooSmall => "too-small",
        })
    }
}

/// Occlusion-degree filter. Bounds are evaluated in exact integer
/// arithmetic so the constants are hit exactly at the boundary.
pub fn fo_filter(m_vis: &BinaryMask, m_obj: &BinaryMask, image_area: usize) -> Result<(), FoReject> {
    let vis = m_vis.count() as u128;
    let obj = m_obj.count() as u128;
    if obj == 0 {
        return Err(FoReject::EmptyObject);
    }
    // 0.1 <= vis/obj <= 0.9
    if 10 * vis < obj {
        return Err(FoReject::UnderVisible);
    }
    if 10 * vis > 9 * obj {
        return Err(FoReject::OverVisible);
    }
    // vis/area >= 0.2%
    if 1000 * vis < 2 * image_area as u128 {
        return Err(FoReject::TooSmall);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FoConfig {
    pub occluder_as_target_prob: f64,
    /// The occluder is shifted by up to this multiple of the target's mask
    /// width/height in each direction.
    pub max_offset_factor: f64,
}

impl Default for FoConfig {
    fn default() -> Self {
        Self { occluder_as_target_prob: OCCLUDER_AS_TARGET_PROB, max_offset_factor: 0.5 }
    }
}

/// A rendered object with its placement.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectRender {
    pub render: Render,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoComposite {
    pub sample: RenderPasteSample,
    /// The selected object was drawn on top, so its mask is complete.
    pub target_is_occluder: bool,
    /// Pixel shift applied to the other object's render.
    pub offset: (i64, i64),
}

pub fn fo_compose<R: Rng + ?Sized>(
    background: &RgbImage,
    target: &ObjectRender,
    occluder: &ObjectRender,
    rng: &mut R,
    config: &FoConfig,
) -> Result<FoComposite> {
    if !(0.0..=1.0).contains(&config.occluder_as_target_prob) {
        return Err(Error::InvalidArgument("occluder_as_target_prob must lie in [0, 1]".into()));
    }
    for r in [&target.render, &occluder.render] {
        if r.rgb.dims() != background.dims() || r.mask.dims() != background.dims() {
            return Err(Error::DimensionMismatch("renders must match the background size".into()));
        }
    }
    let swap = rng.random::<f64>() < config.occluder_as_target_prob;
    let offset = match target.render.mask.bbox() {
        Some(b) => {
            let rx = (config.max_offset_factor * b.width() as f64).floor() as i64;
            let ry = (config.max_offset_factor * b.height() as f64).floor() as i64;
            (rng.random_range(-rx..=rx), rng.random_range(-ry..=ry))
        }
        None => (0, 0),
    };
    let other_mask = occluder.render.mask.shifted(offset.0, offset.1);
    let other_rgb = occluder.render.rgb.shifted(offset.0, offset.1, [0, 0, 0]);

    let m_obj = target.render.mask.clone();
    let (image, m_vis) = if swap {
        let under = background.composite(&other_rgb, &other_mask)?;
        (under.composite(&target.render.rgb, &m_obj)?, m_obj.clone())
    } else {
        let under = background.composite(&target.render.rgb, &m_obj)?;
        (under.composite(&other_rgb, &other_mask)?, visible_mask(&m_obj, &other_mask)?)
    };
    Ok(FoComposite {
        sample: RenderPasteSample { image, m_vis, m_obj, pose: target.pose, mesh: None, pointmap: None },
        target_is_occluder: swap,
        offset,
    })
}
