//! On-disk kappa tables.
//!
//! The JSON document has a `header` object (Hurst grid, depth, truncation
//! order, quadrature nodes, format version) followed by the flat `values`
//! array in the table's native layout.

use std::path::Path;

use rayon::prelude::*;
use roughvol_core::kappa::KappaTable;
use roughvol_core::quadrature::QuadSpec;
use serde::{Deserialize, Serialize};

use crate::config::KappaRequirement;
use crate::error::{format_err, io_err, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheHeader {
    pub format_version: u32,
    pub h_grid: Vec<f64>,
    pub p_max: u32,
    /// Truncation order `S`; values hold `a = 1..=S`.
    pub order: usize,
    pub quad_order: usize,
    pub quad_levels: usize,
    pub quad_interior: usize,
    /// Quadrature nodes per dimension.
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaCache {
    pub header: CacheHeader,
    pub values: Vec<f64>,
}

impl KappaCache {
    pub fn from_table(table: &KappaTable) -> Self {
        let q = table.quad();
        Self {
            header: CacheHeader {
                format_version: FORMAT_VERSION,
                h_grid: table.h_grid().to_vec(),
                p_max: table.p_max(),
                order: table.order(),
                quad_order: q.order,
                quad_levels: q.levels,
                quad_interior: q.interior,
                nodes: q.node_count(),
            },
            values: table.values().to_vec(),
        }
    }

    pub fn into_table(self) -> roughvol_core::Result<KappaTable> {
        let h = self.header;
        if h.format_version != FORMAT_VERSION {
            return Err(roughvol_core::Error::InvalidConfig(format!(
                "kappa cache format {} (expected {FORMAT_VERSION})",
                h.format_version
            )));
        }
        let quad = QuadSpec { order: h.quad_order, levels: h.quad_levels, interior: h.quad_interior };
        KappaTable::from_values(h.h_grid, h.p_max, h.order, quad, self.values)
    }
}

/// Builds the table with one task per Hurst grid point.
pub fn build_table(h_grid: Vec<f64>, p_max: u32, order: usize, quad: QuadSpec) -> Result<KappaTable> {
    let columns = h_grid
        .par_iter()
        .map(|&h| KappaTable::column(h, p_max, order, quad))
        .collect::<roughvol_core::Result<Vec<_>>>()?;
    Ok(KappaTable::from_columns(h_grid, p_max, order, quad, columns)?)
}

pub fn build_for(req: &KappaRequirement) -> Result<KappaTable> {
    let grid = KappaTable::uniform_grid(req.h_lo, req.h_hi, req.spacing)?;
    build_table(grid, req.p_max, req.order, req.quad)
}

/// Whether a table can serve an experiment with these needs.
pub fn satisfies(table: &KappaTable, req: &KappaRequirement) -> bool {
    table.covers(req.h_lo)
        && table.covers(req.h_hi)
        && table.p_max() >= req.p_max
        && table.order() >= req.order
        && table.quad() == req.quad
}

pub fn save(table: &KappaTable, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let text = serde_json::to_string(&KappaCache::from_table(table)).map_err(|e| format_err(path, e))?;
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn load(path: &Path) -> Result<KappaTable> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let cache: KappaCache = serde_json::from_str(&text).map_err(|e| format_err(path, e))?;
    cache.into_table().map_err(|e| format_err(path, e))
}

/// Loads the cache at `path` when it serves `req`; otherwise builds a
/// table and, if a path was given, writes it there.
pub fn load_or_build(path: Option<&Path>, req: &KappaRequirement) -> Result<KappaTable> {
    if let Some(path) = path.filter(|p| p.exists()) {
        let table = load(path)?;
        if satisfies(&table, req) {
            return Ok(table);
        }
    }
    let table = build_for(req)?;
    if let Some(path) = path {
        save(&table, path)?;
    }
    Ok(table)
}
