//! Output files: per-stage iteration tables, solution dumps, flow traces and
//! the machine-readable summary. All writes go through a temp-file rename so
//! readers never observe a half-written artifact.

use cavsolve_core::auglag::IterationRecord;
use cavsolve_core::{DeformationField, Mesh};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

/// Write atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

/// `table_eps_<eps>.csv` with one row per outer iteration.
pub fn table_csv(records: &[IterationRecord]) -> String {
    let mut s = String::from("j,c,e_pen,e_raw,mu,eta,flow_steps\n");
    for r in records {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.j, r.c, r.e_pen, r.e_raw, r.mu, r.eta, r.flow_steps
        ));
    }
    s
}

/// `solution_eps_<eps>.csv` with deformed positions per node.
pub fn solution_csv(mesh: &Mesh, u: &DeformationField) -> String {
    let mut s = String::from("node_id,x,y,ux,uy\n");
    for (i, (p, v)) in mesh.nodes.iter().zip(&u.values).enumerate() {
        s.push_str(&format!("{i},{},{},{},{}\n", p[0], p[1], v[0], v[1]));
    }
    s
}

pub fn eps_file_name(prefix: &str, eps: f64) -> String {
    format!("{prefix}_eps_{eps}.csv")
}

/// Incremental CSV writer for per-step flow traces.
pub struct FlowTraceWriter {
    path: PathBuf,
    buffer: String,
}

impl FlowTraceWriter {
    pub fn new(path: PathBuf) -> Self {
        FlowTraceWriter {
            path,
            buffer: String::from("outer_j,step,dt,energy,c,grad_norm\n"),
        }
    }

    pub fn push(&mut self, outer_j: usize, step: usize, dt: f64, energy: f64, c: f64, grad: f64) {
        self.buffer
            .push_str(&format!("{outer_j},{step},{dt},{energy},{c},{grad}\n"));
    }

    pub fn finish(&self) -> io::Result<()> {
        write_atomic(&self.path, &self.buffer)
    }
}
