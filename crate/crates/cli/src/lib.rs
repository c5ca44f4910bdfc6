//! Scenario files, experiment presets, SVG charts, and the `dtsnsim` verbs.

pub mod app;
pub mod chart;
pub mod presets;
pub mod scenario;
