//! Monte Carlo path tracer producing paired input and reshaded renders.

mod bsdf;
mod geometry;
mod integrator;
mod lights;
mod render;

pub use bsdf::{eval_bsdf, sample_bsdf, Bsdf, BsdfSample};
pub use geometry::{intersect, Hit, Ray};
pub use integrator::{
    estimate_radiance, estimate_reshaded, oriented_normal, shade_first_hit, ReshadedSample, TraceScene,
    DEFAULT_MAX_DEPTH,
};
pub use lights::{direction_to_latlong, environment_radiance, latlong_to_direction, LightSample, LightSet};
pub use render::{render, render_with_first_hits, FirstHit, RenderOutputs, RenderSettings};
