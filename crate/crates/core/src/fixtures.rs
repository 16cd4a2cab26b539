//! Bundled example models.

/// Graphics-initialization excerpt of the coreboot 4.13 Kconfig, in the
/// feature-model dialect.
pub const COREBOOT_FM: &str = include_str!("../fixtures/coreboot.fm");
