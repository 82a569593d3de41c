//! CSV, PGM and JSON writers. Files written through `Outputs` are removed
//! again unless the command commits them.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use henon_core::henon::PointC2;

use crate::CliError;

#[derive(Default)]
pub struct Outputs {
    written: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    fn create(&mut self, path: &Path) -> Result<BufWriter<File>, CliError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        let f = File::create(path).map_err(|e| CliError::io(path, e))?;
        self.written.push(path.to_path_buf());
        Ok(BufWriter::new(f))
    }

    pub fn csv(&mut self, path: &Path, cells: &[PointC2], values: &[f64]) -> Result<(), CliError> {
        let mut w = self.create(path)?;
        let io = |e| CliError::io(path, e);
        writeln!(w, "x_re,x_im,y_re,y_im,value").map_err(io)?;
        for (z, v) in cells.iter().zip(values) {
            writeln!(w, "{},{},{},{},{}", z.x.re, z.x.im, z.y.re, z.y.im, v).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    /// Binary P5, values scaled over the finite cells (NaN -> 0).
    pub fn pgm(
        &mut self,
        path: &Path,
        nx: usize,
        ny: usize,
        values: &[f64],
        log: bool,
    ) -> Result<(), CliError> {
        let t = |v: f64| if log { v.abs().max(1e-300).log10() } else { v };
        let finite = values.iter().filter(|v| v.is_finite()).map(|v| t(*v));
        let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
        let span = if hi > lo { hi - lo } else { 1.0 };
        let mut w = self.create(path)?;
        let io = |e| CliError::io(path, e);
        write!(w, "P5\n{nx} {ny}\n255\n").map_err(io)?;
        // row 0 of the grid is the bottom of the window; PGM rows run top-down
        let mut bytes = Vec::with_capacity(nx * ny);
        for row in (0..ny).rev() {
            for col in 0..nx {
                let v = values[row * nx + col];
                bytes.push(if v.is_finite() {
                    (255.0 * (t(v) - lo) / span).round().clamp(0.0, 255.0) as u8
                } else {
                    0
                });
            }
        }
        w.write_all(&bytes).map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn json(&mut self, path: &Path, doc: &serde_json::Value) -> Result<(), CliError> {
        let mut w = self.create(path)?;
        let io = |e| CliError::io(path, e);
        serde_json::to_writer_pretty(&mut w, doc).map_err(|e| CliError::io(path, e.into()))?;
        writeln!(w).map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.written {
                let _ = std::fs::remove_file(p);
            }
        }
    }
}
