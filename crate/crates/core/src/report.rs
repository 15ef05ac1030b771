//! CSV and JSON artifacts, and all-or-nothing output directories.
//!
//! CSV files are comma separated with LF line endings; floats are written in
//! shortest round-trip form, so reading a file back reproduces the records bit
//! for bit. Undefined values (AICc at the largest orders) are empty fields.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::BoundReport;
use crate::error::{Error, Result};
use crate::search::GreedyPath;
use crate::simulation::ExperimentRow;

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn write_records<W: Write, T: Serialize>(w: W, records: &[T]) -> Result<()> {
    let mut wtr = csv_writer(w);
    for r in records {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_experiment_csv<W: Write>(w: W, rows: &[ExperimentRow]) -> Result<()> {
    write_records(w, rows)
}

pub fn read_experiment_csv<R: Read>(r: R) -> Result<Vec<ExperimentRow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

pub fn write_bounds_csv<W: Write>(w: W, reports: &[BoundReport]) -> Result<()> {
    write_records(w, reports)
}

pub fn read_bounds_csv<R: Read>(r: R) -> Result<Vec<BoundReport>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// One greedy step as written to CSV; the empty `eliminated_block` marks the start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRow {
    pub step: usize,
    pub eliminated_block: Option<usize>,
    pub order: usize,
    pub rss: f64,
}

pub fn path_rows(path: &GreedyPath) -> Vec<PathRow> {
    path.steps
        .iter()
        .enumerate()
        .map(|(i, s)| PathRow {
            step: i,
            eliminated_block: s.eliminated_block,
            order: s.mask.order(),
            rss: s.rss,
        })
        .collect()
}

pub fn write_path_csv<W: Write>(w: W, path: &GreedyPath) -> Result<()> {
    write_records(w, &path_rows(path))
}

pub fn read_path_csv<R: Read>(r: R) -> Result<Vec<PathRow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// Record of one CLI invocation, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub artifacts: Vec<String>,
    pub wall_time_secs: f64,
    pub threads: usize,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            config,
            seed,
            artifacts: Vec::new(),
            wall_time_secs: 0.0,
            threads: rayon::current_num_threads(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// Name of the manifest file in every output directory.
pub const MANIFEST_FILE: &str = "manifest.json";

/// Files written to a hidden staging directory and moved into place only by
/// [`StagedOutput::commit`]. Dropping an uncommitted stage removes it.
#[derive(Debug)]
pub struct StagedOutput {
    out_dir: PathBuf,
    stage: PathBuf,
    files: Vec<String>,
    committed: bool,
}

impl StagedOutput {
    pub fn new(out_dir: impl Into<PathBuf>) -> Result<Self> {
        let out_dir = out_dir.into();
        fs::create_dir_all(&out_dir)?;
        let stage = out_dir.join(format!(".staging-{}", std::process::id()));
        if stage.exists() {
            fs::remove_dir_all(&stage)?;
        }
        fs::create_dir(&stage)?;
        Ok(Self {
            out_dir,
            stage,
            files: Vec::new(),
            committed: false,
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    /// Write `name` into the stage with `f`.
    pub fn write(&mut self, name: &str, f: impl FnOnce(&mut fs::File) -> Result<()>) -> Result<()> {
        let mut file = fs::File::create(self.stage.join(name))?;
        f(&mut file)?;
        file.sync_all()?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, |f| {
            serde_json::to_writer_pretty(&mut *f, value)?;
            f.write_all(b"\n")?;
            Ok(())
        })
    }

    /// Staged file names, in write order.
    pub fn files(&self) -> &[String] {
        &self.files
    }

    /// Move every staged file into the output directory.
    pub fn commit(mut self) -> Result<Vec<PathBuf>> {
        let mut paths = Vec::with_capacity(self.files.len());
        for name in &self.files {
            let dest = self.out_dir.join(name);
            fs::rename(self.stage.join(name), &dest)?;
            paths.push(dest);
        }
        fs::remove_dir_all(&self.stage)?;
        self.committed = true;
        Ok(paths)
    }
}

impl Drop for StagedOutput {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.stage);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::ModelMask;
    use crate::search::GreedyStep;

    fn row(i: usize, aicc: Option<f64>) -> ExperimentRow {
        ExperimentRow {
            model_id: i,
            order: i,
            rss: 0.1 + i as f64 / 3.0,
            gcv: 1.0 / 3.0,
            sp: 2.0f64.sqrt(),
            rho_hat2: 1e-300,
            aic: 123456.789,
            aicc,
            fpe: 0.1 + 0.2,
            bic: f64::MIN_POSITIVE,
            sigma2_m: 26.0,
            rho2: 1.0 + f64::EPSILON,
            r2: 7.0,
            gray_aic: 0.5,
            gray_fpe: 0.25,
            gray_aicc: aicc.map(|v| v * 2.0),
            gray_bic: 3.0,
        }
    }

    #[test]
    fn experiment_csv_round_trip() {
        let rows = vec![row(0, Some(0.7)), row(1, None)];
        let mut buf = Vec::new();
        write_experiment_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "model_id,order,rss,gcv,sp,rho_hat2,aic,aicc,fpe,bic,sigma2_m,rho2,r2,gray_aic,gray_fpe,gray_aicc,gray_bic\n"
        ));
        assert!(!text.contains('\r'));
        assert_eq!(read_experiment_csv(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn path_csv_columns() {
        let path = GreedyPath {
            steps: vec![
                GreedyStep {
                    mask: ModelMask::full(2),
                    rss: 1.5,
                    eliminated_block: None,
                },
                GreedyStep {
                    mask: ModelMask::empty(2),
                    rss: 4.0,
                    eliminated_block: Some(0),
                },
            ],
        };
        let mut buf = Vec::new();
        write_path_csv(&mut buf, &path).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "step,eliminated_block,order,rss\n0,,2,1.5\n1,0,0,4.0\n");
        assert_eq!(read_path_csv(buf.as_slice()).unwrap(), path_rows(&path));
    }

    #[test]
    fn bounds_csv_round_trip() {
        let r = BoundReport::evaluate(100, 50, 1.0, 1.0).unwrap();
        let mut buf = Vec::new();
        write_bounds_csv(&mut buf, &[r]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("n,k,sigma2_m,epsilon,thm32,b1,b2,b3,b4,a4_sum,c1,c2,a5_sum,a5_psi_form\n"));
        assert_eq!(read_bounds_csv(buf.as_slice()).unwrap(), vec![r]);
    }

    #[test]
    fn staged_output_is_all_or_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        {
            let mut stage = StagedOutput::new(&out).unwrap();
            stage.write("a.csv", |f| Ok(f.write_all(b"x\n")?)).unwrap();
        }
        assert_eq!(fs::read_dir(&out).unwrap().count(), 0);

        let mut stage = StagedOutput::new(&out).unwrap();
        stage.write("a.csv", |f| Ok(f.write_all(b"x\n")?)).unwrap();
        stage.write_json("m.json", &serde_json::json!({"k": 1})).unwrap();
        let paths = stage.commit().unwrap();
        assert_eq!(paths.len(), 2);
        let names: Vec<String> = fs::read_dir(&out)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        assert_eq!(names.len(), 2);
        assert_eq!(fs::read_to_string(out.join("a.csv")).unwrap(), "x\n");
    }
}
