//! JSON Lines annotation files: one header line, then one person per line.

use std::path::{Path, PathBuf};

use hourglass_core::dataset::{Annotation, JointLayout};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, IoError, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationHeader {
    pub version: u32,
    pub num_joints: usize,
    pub joint_names: Vec<String>,
    pub flip_pairs: Vec<[usize; 2]>,
}

impl AnnotationHeader {
    pub fn from_layout(layout: &JointLayout) -> Self {
        Self {
            version: FORMAT_VERSION,
            num_joints: layout.num_joints(),
            joint_names: layout.names.clone(),
            flip_pairs: layout.flip_pairs.clone(),
        }
    }

    pub fn layout(&self) -> JointLayout {
        JointLayout {
            names: self.joint_names.clone(),
            flip_pairs: self.flip_pairs.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationFile {
    pub header: AnnotationHeader,
    pub annotations: Vec<Annotation>,
}

/// Parses annotation text; `path` only labels diagnostics. Blank lines are ignored.
pub fn parse(text: &str, path: &Path) -> Result<AnnotationFile> {
    let fail = |line: usize, message: String| IoError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let (hline, htext) = lines
        .next()
        .ok_or_else(|| fail(1, "missing header line".into()))?;
    let header: AnnotationHeader =
        serde_json::from_str(htext).map_err(|e| fail(hline, format!("header: {e}")))?;
    if header.version != FORMAT_VERSION {
        return Err(fail(
            hline,
            format!("unsupported version {}", header.version),
        ));
    }
    if header.joint_names.len() != header.num_joints {
        return Err(fail(
            hline,
            format!(
                "{} joint names for num_joints {}",
                header.joint_names.len(),
                header.num_joints
            ),
        ));
    }
    header
        .layout()
        .flip_permutation()
        .map_err(|e| fail(hline, e.to_string()))?;
    let mut annotations = Vec::new();
    for (n, l) in lines {
        let a: Annotation = serde_json::from_str(l).map_err(|e| fail(n, e.to_string()))?;
        a.validate(header.num_joints)
            .map_err(|e| fail(n, e.to_string()))?;
        annotations.push(a);
    }
    Ok(AnnotationFile {
        header,
        annotations,
    })
}

/// Header line followed by one line per annotation, each newline-terminated.
pub fn to_string(file: &AnnotationFile) -> String {
    let mut out = serde_json::to_string(&file.header).expect("header serializes");
    out.push('\n');
    for a in &file.annotations {
        out.push_str(&serde_json::to_string(a).expect("annotation serializes"));
        out.push('\n');
    }
    out
}

pub fn read(path: &Path) -> Result<AnnotationFile> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse(&text, path)
}

pub fn write(path: &Path, file: &AnnotationFile) -> Result<()> {
    std::fs::write(path, to_string(file)).map_err(io_err(PathBuf::from(path)))
}
