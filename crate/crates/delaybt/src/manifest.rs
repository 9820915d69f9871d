//! TOML system manifests naming one Matrix Market file per matrix.

use std::fs;
use std::path::{Path, PathBuf};

use delaybt_core::{DMatrix, DelaySystem, DelayTerm, SystemKind};
use serde::{Deserialize, Serialize};

use crate::error::FileError;
use crate::mtx::{read_mtx, write_mtx};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemManifest {
    pub kind: String,
    pub d: usize,
    pub n: usize,
    pub k: usize,
    pub m: usize,
    #[serde(default)]
    pub delays: Vec<DelayEntry>,
    pub files: MatrixFiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayEntry {
    pub tau: f64,
    pub matrix_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixFiles {
    #[serde(rename = "A")]
    pub a: String,
    #[serde(rename = "B")]
    pub b: String,
    #[serde(rename = "B_in")]
    pub b_in: String,
    #[serde(rename = "C")]
    pub c: String,
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "system".into())
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Writes the manifest at `path` and the matrices next to it as
/// `<stem>.<role>.mtx`.
pub fn save_system(sys: &DelaySystem, path: &Path) -> Result<(), FileError> {
    let dir = base_dir(path);
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(&dir).map_err(FileError::io(&dir))?;
    }
    let stem = stem(path);
    let name = |role: &str| format!("{}.{}.mtx", stem, role);
    let put = |role: &str, m: &DMatrix<f64>| -> Result<String, FileError> {
        let file = name(role);
        write_mtx(&dir.join(&file), m)?;
        Ok(file)
    };
    let files = MatrixFiles {
        a: put("A", &sys.a)?,
        b: put("B", &sys.b)?,
        b_in: put("B_in", &sys.b_in)?,
        c: put("C", &sys.c)?,
    };
    let delays = sys
        .delays
        .iter()
        .enumerate()
        .map(|(i, t)| {
            Ok(DelayEntry {
                tau: t.tau,
                matrix_file: put(&format!("N{}", i + 1), &t.matrix)?,
            })
        })
        .collect::<Result<Vec<_>, FileError>>()?;
    let manifest = SystemManifest {
        kind: sys.kind.as_str().to_string(),
        d: sys.dim_state(),
        n: sys.dim_input(),
        k: sys.dim_initial(),
        m: sys.dim_output(),
        delays,
        files,
    };
    let text = toml::to_string(&manifest).map_err(|e| FileError::Manifest {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    fs::write(path, text).map_err(FileError::io(path))
}

pub fn read_manifest(path: &Path) -> Result<SystemManifest, FileError> {
    let text = fs::read_to_string(path).map_err(FileError::io(path))?;
    toml::from_str(&text).map_err(|e| FileError::Manifest {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

/// Loads a system without validating it; see [`delaybt_core::sysmodel::validate_system`].
pub fn load_system(path: &Path) -> Result<DelaySystem, FileError> {
    let man = read_manifest(path)?;
    let kind = SystemKind::parse(&man.kind).ok_or_else(|| FileError::Manifest {
        path: path.to_path_buf(),
        msg: format!("unknown kind {:?}", man.kind),
    })?;
    let dir = base_dir(path);
    let load = |file: &str, role: &str, expected: (usize, usize)| -> Result<DMatrix<f64>, FileError> {
        let p = dir.join(file);
        let m = read_mtx(&p)?;
        if m.shape() != expected {
            return Err(FileError::DimensionConflict {
                path: p,
                role: role.to_string(),
                expected,
                found: m.shape(),
            });
        }
        Ok(m)
    };
    let d = man.d;
    let a = load(&man.files.a, "A", (d, d))?;
    let b = load(&man.files.b, "B", (d, man.n))?;
    let b_in = load(&man.files.b_in, "B_in", (d, man.k))?;
    let c = load(&man.files.c, "C", (man.m, d))?;
    let delays = man
        .delays
        .iter()
        .enumerate()
        .map(|(i, e)| Ok(DelayTerm::new(load(&e.matrix_file, &format!("N{}", i + 1), (d, d))?, e.tau)))
        .collect::<Result<Vec<_>, FileError>>()?;
    Ok(DelaySystem::new(a, delays, b, b_in, c, kind))
}
