//! Instruction templates shipped with the runtime.
//!
//! The files live under `resources/templates/v1`; bump [`TEMPLATE_VERSION`]
//! and add a new directory when their text changes.

pub const TEMPLATE_VERSION: u32 = 1;

/// The three-block output format every agent turn must follow.
pub const OUTPUT_FORMAT: &str = include_str!("../resources/templates/v1/output_format.txt");
pub const ON_DEVICE: &str = include_str!("../resources/templates/v1/on_device.txt");
pub const CLOUD: &str = include_str!("../resources/templates/v1/cloud.txt");
pub const ASSESSOR: &str = include_str!("../resources/templates/v1/assessor.txt");
pub const SWITCHER: &str = include_str!("../resources/templates/v1/switcher.txt");
/// Reasoning data-generation prompt. Documentation only; no runtime path uses it.
pub const DATA_GENERATION: &str = include_str!("../resources/templates/v1/data_generation.txt");
