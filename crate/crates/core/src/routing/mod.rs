//! Relay planning on power-line fronthaul networks.
//!
//! A [`Deployment`] is a random tree of radio cells. [`build_link_table`]
//! evaluates the end-to-end capacity of every ordered node pair with the
//! transmission-line solver. [`optimal_route`] finds the relay path that
//! uses the fewest routers while every hop meets a capacity floor, and the
//! [`nn`] submodule learns to imitate it from geometry alone.

mod dataset;
mod link;
pub mod nn;
mod optimal;
mod regression;

pub use dataset::{route_dataset, route_features, DatasetConfig, RouteDataset, RouteFeatureVector, RouteSample, FEATURE_NAMES};
pub use link::{build_link_table, Deployment, DeploymentConfig, LinkConfig, LinkTable};
pub use optimal::{enumerate_routes, optimal_route, RouteOutcome, RoutingProblem, RoutingSolution};
pub use regression::{capacity_regression, CapacityEstimate, CapacitySample, CapacitySurface};
