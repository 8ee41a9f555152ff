//! Publishing QGIS project data, meshes and software versions to
//! deposition services that mint DOIs.
//!
//! The data flow parses a project ([`qgis_project`]), gathers every file it
//! references into a checksummed [`manifest`], and uploads the lot through
//! the deposition protocol ([`protocol`]). The software flow identifies the
//! exact version of a source tree ([`vcs_info`]), reuses an earlier DOI when
//! the service or the local [`cache`] knows one, and otherwise publishes a
//! reproducible [`archive`] of the tree. Both live in [`orchestrator`].

pub mod archive;
pub mod cache;
pub mod manifest;
pub mod orchestrator;
pub mod protocol;
pub mod qgis_project;
pub mod vcs_info;
