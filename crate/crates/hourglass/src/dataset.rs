//! Datasets on disk: an annotation file plus PNG images addressed relative to it.

use std::path::{Path, PathBuf};

use hourglass_core::dataset::{JointLayout, Sample};
use hourglass_core::image::RgbImage;

use crate::annotations::{self, AnnotationFile, AnnotationHeader};
use crate::error::{io_err, IoError, Result};

pub const ANNOTATION_FILE: &str = "annotations.jsonl";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub layout: JointLayout,
    pub samples: Vec<Sample>,
}

pub fn read_png(path: &Path) -> Result<RgbImage> {
    let img = image::open(path)
        .map_err(|source| IoError::Image {
            path: path.to_path_buf(),
            source,
        })?
        .into_rgb8();
    let (w, h) = img.dimensions();
    Ok(RgbImage::from_raw(w as usize, h as usize, img.into_raw())
        .expect("decoder returns w*h*3 bytes"))
}

pub fn write_png(path: &Path, img: &RgbImage) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    image::save_buffer(
        path,
        &img.data,
        img.width as u32,
        img.height as u32,
        image::ExtendedColorType::Rgb8,
    )
    .map_err(|source| IoError::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `annotations.jsonl` and every image under `dir`; returns the annotation path.
pub fn export(dir: &Path, dataset: &Dataset) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    for s in &dataset.samples {
        write_png(&dir.join(&s.annotation.image), &s.image)?;
    }
    let path = dir.join(ANNOTATION_FILE);
    annotations::write(
        &path,
        &AnnotationFile {
            header: AnnotationHeader::from_layout(&dataset.layout),
            annotations: dataset
                .samples
                .iter()
                .map(|s| s.annotation.clone())
                .collect(),
        },
    )?;
    Ok(path)
}

/// Loads an annotation file (or a directory containing `annotations.jsonl`) and its
/// images.
pub fn load(path: &Path) -> Result<Dataset> {
    let file_path = if path.is_dir() {
        path.join(ANNOTATION_FILE)
    } else {
        path.to_path_buf()
    };
    let file = annotations::read(&file_path)?;
    let base = file_path.parent().unwrap_or(Path::new("."));
    let samples = file
        .annotations
        .into_iter()
        .map(|annotation| {
            Ok(Sample {
                image: read_png(&base.join(&annotation.image))?,
                annotation,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Dataset {
        layout: file.header.layout(),
        samples,
    })
}
