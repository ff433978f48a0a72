//! Experiment runner behind the `simkit` command line: configuration files,
//! sweeps, CSV output, bundled presets and phase portraits.

mod config;
mod portrait;
mod presets;
mod run;

pub use config::{
    load, CheckSection, CoefficientSpec, Expectation, ExperimentConfig, LoadedConfig,
    MethodSection, MinT0Section, ModelSection, OutputSection, RpvSection, SweepSection,
    SweepVariable,
};
pub use portrait::{phase_portrait, Portrait, PortraitSpec};
pub use presets::{preset, preset_names};
pub use run::{run, Point, PointFailure, Row, RunReport};
