//! Portable persistence of policy tables: one CSV per slice plus a JSON manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{ClampReport, GridSpec, PolicyTables};
use crate::numeric::fmt12;

#[derive(Debug, Serialize)]
pub struct TablesManifest<'a> {
    pub horizon: usize,
    pub num_states: usize,
    pub grid: &'a GridSpec,
    pub bounds: Option<(f64, f64)>,
    pub xi_nodes: Vec<f64>,
    pub zsum_nodes: &'a [f64],
    pub clamp: ClampReport,
    pub clamp_fraction: f64,
    pub params_hash: &'a str,
    pub slices: Vec<String>,
}

pub fn slice_file_name(n: usize) -> String {
    format!("policy_n{n:04}.csv")
}

/// Write every slice and the manifest into `dir`. Returns the manifest path.
pub fn write_tables(tables: &PolicyTables, dir: &Path, params_hash: &str) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut names = Vec::with_capacity(tables.slices.len());
    for s in &tables.slices {
        let name = slice_file_name(s.n);
        let mut w = std::io::BufWriter::new(fs::File::create(dir.join(&name))?);
        writeln!(w, "xi,prev_sum,cur_sum,regime,pi_star,a,b,V")?;
        for i in 0..s.shape.len() {
            let (y, ix, ip, ic) = s.shape.unindex(i);
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                fmt12(tables.grid.log_xi[ix].exp()),
                fmt12(tables.grid.zsum[ip]),
                fmt12(s.cur_nodes[ic]),
                y + 1,
                fmt12(s.pi[i]),
                fmt12(s.a[i]),
                fmt12(s.b[i]),
                fmt12(s.value[i]),
            )?;
        }
        w.flush()?;
        names.push(name);
    }
    let manifest = TablesManifest {
        horizon: tables.horizon,
        num_states: tables.market.num_states,
        grid: &tables.options.grid,
        bounds: tables.options.bounds,
        xi_nodes: tables.grid.log_xi.iter().map(|l| l.exp()).collect(),
        zsum_nodes: &tables.grid.zsum,
        clamp: tables.clamp,
        clamp_fraction: tables.clamp.fraction(),
        params_hash,
        slices: names,
    };
    let path = dir.join("tables_manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?)?;
    Ok(path)
}
