//! Least-cost wireless backhaul planning over irregular terrain.
//!
//! This crate holds the algorithmic core and is `no_std` (it needs `alloc`).
//! File formats, the command line and scenario orchestration live in the
//! `backhaul` crate.
//!
//! The pipeline, bottom-up:
//!
//!  - [`raster`]: aligned planar grids (elevation, population, vegetation,
//!    canopy, administrative area ids) with nearest-cell sampling.
//!  - [`link_budget`]: EIRP, free-space path loss, received power, Fresnel
//!    radii, the frequency / rain-cap rules and the Fresnel clearance table.
//!  - [`viewshed`]: terrain profiles, point-to-point line of sight with earth
//!    curvature, obstruction clustering and knife-edge eligibility.
//!  - [`terrain`]: tiling, terrain irregularity deciles and the sampled
//!    line-of-sight probability lookup table.
//!  - [`demand`]: settlement extraction and modeling-region construction.
//!  - [`network`]: minimum spanning trees and the CLOS / hybrid edge planner.
//!  - [`cost`]: tower heights and capital cost aggregation.
//!  - [`report`]: decile curves, savings, and the embedded constant tables.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod cost;
pub mod demand;
pub mod link_budget;
pub mod network;
pub mod raster;
pub mod report;
pub mod rng;
pub mod terrain;
pub mod viewshed;

/// A point in projected planar metres.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance_m(&self, other: &Point) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }

    pub fn distance_km(&self, other: &Point) -> f64 {
        self.distance_m(other) / 1000.0
    }

    /// Linear interpolation towards `other`; `t = 0` is `self`.
    pub fn lerp(&self, other: &Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}
