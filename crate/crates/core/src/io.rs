//! File formats: domain CSVs, IDX image archives and experiment manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, Labels};
use crate::error::{Error, Result};

/// How the label column of a CSV is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Class,
    Real,
}

/// Loads a comma-separated numeric file. Lines starting with `#` are comments. When
/// `has_labels` is set the last column is the label.
///
/// Parse errors name the 1-based data row and column of the offending cell.
pub fn load_csv_domain(path: &Path, has_labels: bool, label_kind: LabelKind) -> Result<Domain> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let row_no = r + 1;
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRows {
                path: path.to_path_buf(),
                row: row_no,
                found: record.len(),
                expected,
            });
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        path: path.to_path_buf(),
                        row: row_no,
                        column: c + 1,
                        reason: format!("not a finite number: {cell:?}"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(values);
    }

    let width = width.unwrap_or(0);
    let n_features = if has_labels { width.saturating_sub(1) } else { width };
    let mut features = Array2::zeros((rows.len(), n_features));
    let mut label_col = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        for j in 0..n_features {
            features[[i, j]] = row[j];
        }
        if has_labels {
            label_col.push(row[width - 1]);
        }
    }

    let labels = if has_labels {
        Some(match label_kind {
            LabelKind::Real => Labels::Real(label_col),
            LabelKind::Class => {
                let mut ids = Vec::with_capacity(label_col.len());
                for (i, v) in label_col.into_iter().enumerate() {
                    if v.fract() != 0.0 {
                        return Err(Error::Parse {
                            path: path.to_path_buf(),
                            row: i + 1,
                            column: width,
                            reason: format!("class label must be an integer, got {v}"),
                        });
                    }
                    ids.push(v as i64);
                }
                Labels::Class(ids)
            }
        })
    } else {
        None
    };

    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "domain".into());
    Domain::new(id, features, labels)
}

/// Writes a domain as CSV: a `#` header line, one row per sample, label last.
///
/// Floats use the shortest representation that parses back to the same value, so a
/// load after save reproduces the features exactly.
pub fn save_csv_domain(domain: &Domain, path: &Path) -> Result<()> {
    let mut out = String::new();
    let mut header: Vec<String> = (0..domain.dim()).map(|j| format!("x{j}")).collect();
    if domain.labels().is_some() {
        header.push("label".into());
    }
    out.push_str("# ");
    out.push_str(&header.join(","));
    out.push('\n');
    for (i, row) in domain.features().rows().into_iter().enumerate() {
        let mut cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        match domain.labels() {
            Some(Labels::Class(l)) => cells.push(l[i].to_string()),
            Some(Labels::Real(l)) => cells.push(format!("{:?}", l[i])),
            None => {}
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::TruncatedIdx {
            path: path.to_path_buf(),
            expected: offset + 4,
            found: bytes.len(),
        })
}

/// Loads an IDX image archive (u8 pixels, dims `[count, rows, cols]`), optionally paired
/// with an IDX label file. Pixels are scaled to [0, 1] and each image is flattened
/// row-major into one sample.
pub fn load_idx_images(images_path: &Path, labels_path: Option<&Path>) -> Result<Domain> {
    let bytes = fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let magic = read_be_u32(&bytes, 0, images_path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::UnsupportedIdxMagic {
            path: images_path.to_path_buf(),
            magic,
        });
    }
    let count = read_be_u32(&bytes, 4, images_path)? as usize;
    let rows = read_be_u32(&bytes, 8, images_path)? as usize;
    let cols = read_be_u32(&bytes, 12, images_path)? as usize;
    let pixels = rows * cols;
    let expected = 16 + count * pixels;
    if bytes.len() < expected {
        return Err(Error::TruncatedIdx {
            path: images_path.to_path_buf(),
            expected,
            found: bytes.len(),
        });
    }
    let data = &bytes[16..expected];
    let features = Array2::from_shape_fn((count, pixels), |(i, j)| data[i * pixels + j] as f64 / 255.0);

    let labels = match labels_path {
        None => None,
        Some(lp) => {
            let lbytes = fs::read(lp).map_err(|e| Error::io(lp, e))?;
            let lmagic = read_be_u32(&lbytes, 0, lp)?;
            if lmagic != IDX_LABELS_MAGIC {
                return Err(Error::UnsupportedIdxMagic {
                    path: lp.to_path_buf(),
                    magic: lmagic,
                });
            }
            let lcount = read_be_u32(&lbytes, 4, lp)? as usize;
            if lcount != count {
                return Err(Error::CountMismatch {
                    images: count,
                    labels: lcount,
                });
            }
            if lbytes.len() < 8 + lcount {
                return Err(Error::TruncatedIdx {
                    path: lp.to_path_buf(),
                    expected: 8 + lcount,
                    found: lbytes.len(),
                });
            }
            Some(Labels::Class(lbytes[8..8 + lcount].iter().map(|&b| b as i64).collect()))
        }
    };

    let id = images_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "idx".into());
    Domain::new(id, features, labels)?.with_image_shape(rows, cols)
}

/// Role a domain plays in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Source,
    Intermediate,
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    /// Relative paths resolve against the manifest's directory.
    pub path: PathBuf,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<f64>,
}

/// A JSON list of domain files and their roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default = "default_label_kind")]
    pub label_kind: LabelKind,
    pub domains: Vec<ManifestEntry>,
}

fn default_label_kind() -> LabelKind {
    LabelKind::Class
}

/// Domains of a manifest, split by role. Intermediates keep manifest order.
#[derive(Debug, Clone)]
pub struct LoadedManifest {
    pub source: Domain,
    pub target: Domain,
    pub intermediates: Vec<Domain>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        write_file(path, text.as_bytes())
    }

    /// Loads every listed domain. Exactly one source and one target are required.
    /// The labels of every domain are kept; callers decide which ones they may look at.
    pub fn resolve(&self, base_dir: &Path) -> Result<LoadedManifest> {
        let mut source = None;
        let mut target = None;
        let mut intermediates = Vec::new();
        for entry in &self.domains {
            let path: PathBuf = if entry.path.is_absolute() {
                entry.path.clone()
            } else {
                base_dir.join(&entry.path)
            };
            if !path.exists() {
                return Err(Error::io(
                    &path,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "domain file listed in manifest does not exist"),
                ));
            }
            let domain = load_csv_domain(&path, true, self.label_kind)?
                .with_id(entry.id.clone())
                .with_meta(entry.meta);
            let slot = match entry.role {
                Role::Source => &mut source,
                Role::Target => &mut target,
                Role::Intermediate => {
                    intermediates.push(domain);
                    continue;
                }
            };
            if slot.replace(domain).is_some() {
                return Err(Error::InvalidArgument(format!("manifest lists more than one {:?} domain", entry.role)));
            }
        }
        Ok(LoadedManifest {
            source: source.ok_or_else(|| Error::InvalidArgument("manifest has no source domain".into()))?,
            target: target.ok_or_else(|| Error::InvalidArgument("manifest has no target domain".into()))?,
            intermediates,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_half_moons;
    use approx::assert_abs_diff_eq;

    fn write(dir: &Path, name: &str, bytes: &[u8]) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, bytes).unwrap();
        p
    }

    #[test]
    fn loads_unlabeled_numeric_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.csv", b"# x,y\n1,2\n3,4\n5.5,-6e-1\n");
        let d = load_csv_domain(&p, false, LabelKind::Class).unwrap();
        assert_eq!((d.len(), d.dim()), (3, 2));
        for w in d.weights() {
            assert_abs_diff_eq!(*w, 1.0 / 3.0, epsilon = 1e-15);
        }
        assert_eq!(d.features()[[2, 1]], -0.6);
        assert_eq!(d.id(), "a");
    }

    #[test]
    fn non_numeric_cell_names_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "bad.csv", b"1,2\nfoo,4\n");
        let err = load_csv_domain(&p, false, LabelKind::Class).unwrap_err();
        match &err {
            Error::Parse { row, column, .. } => assert_eq!((*row, *column), (2, 1)),
            other => panic!("unexpected error {other:?}"),
        }
        assert!(err.to_string().contains("row 2, column 1"));
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "r.csv", b"1,2\n3\n");
        assert!(matches!(
            load_csv_domain(&p, false, LabelKind::Class),
            Err(Error::RaggedRows { row: 2, found: 1, expected: 2, .. })
        ));
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = load_csv_domain(Path::new("/nonexistent/x.csv"), false, LabelKind::Class).unwrap_err();
        assert!(matches!(err, Error::Csv { .. }));
    }

    #[test]
    fn half_moons_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let d = make_half_moons(40, 0.1, 21).unwrap();
        let p = dir.path().join("moons.csv");
        save_csv_domain(&d, &p).unwrap();
        let back = load_csv_domain(&p, true, LabelKind::Class).unwrap();
        assert_eq!(back.features(), d.features());
        assert_eq!(back.labels(), d.labels());
    }

    #[test]
    fn real_labels_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let d = Domain::new("r", ndarray::array![[0.5], [1.5]], Some(Labels::Real(vec![0.1, -2.25]))).unwrap();
        let p = dir.path().join("r.csv");
        save_csv_domain(&d, &p).unwrap();
        let back = load_csv_domain(&p, true, LabelKind::Real).unwrap();
        assert_eq!(back.labels(), d.labels());
    }

    fn idx_images(magic: u32, count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut v = Vec::new();
        for word in [magic, count, rows, cols] {
            v.extend_from_slice(&word.to_be_bytes());
        }
        v.extend_from_slice(pixels);
        v
    }

    #[test]
    fn idx_two_tiny_images() {
        let dir = tempfile::tempdir().unwrap();
        let img = write(dir.path(), "img.idx", &idx_images(0x803, 2, 2, 2, &[0, 255, 0, 255, 0, 255, 0, 255]));
        let mut lab = Vec::new();
        lab.extend_from_slice(&0x801u32.to_be_bytes());
        lab.extend_from_slice(&2u32.to_be_bytes());
        lab.extend_from_slice(&[3, 7]);
        let lab = write(dir.path(), "lab.idx", &lab);
        let d = load_idx_images(&img, Some(&lab)).unwrap();
        assert_eq!((d.len(), d.dim()), (2, 4));
        assert_eq!(d.features().row(0).to_vec(), vec![0.0, 1.0, 0.0, 1.0]);
        assert_eq!(d.labels(), Some(&Labels::Class(vec![3, 7])));
        assert_eq!(d.image_shape(), Some((2, 2)));
    }

    #[test]
    fn idx_wrong_magic() {
        let dir = tempfile::tempdir().unwrap();
        let img = write(dir.path(), "img.idx", &idx_images(0x802, 1, 1, 1, &[0]));
        let err = load_idx_images(&img, None).unwrap_err();
        assert!(err.to_string().contains("unsupported IDX magic"));
    }

    #[test]
    fn idx_truncated_and_mismatched() {
        let dir = tempfile::tempdir().unwrap();
        let img = write(dir.path(), "img.idx", &idx_images(0x803, 3, 2, 2, &[0; 8]));
        assert!(matches!(load_idx_images(&img, None), Err(Error::TruncatedIdx { .. })));

        let img = write(dir.path(), "ok.idx", &idx_images(0x803, 1, 1, 1, &[9]));
        let mut lab = Vec::new();
        lab.extend_from_slice(&0x801u32.to_be_bytes());
        lab.extend_from_slice(&2u32.to_be_bytes());
        lab.extend_from_slice(&[1, 2]);
        let lab = write(dir.path(), "lab.idx", &lab);
        assert!(matches!(
            load_idx_images(&img, Some(&lab)),
            Err(Error::CountMismatch { images: 1, labels: 2 })
        ));
    }

    #[test]
    fn real_mnist_subsample_if_present() {
        // Optional: only runs where an MNIST training archive is mounted.
        let Ok(dir) = std::env::var("MNIST_DIR") else { return };
        let images = Path::new(&dir).join("train-images-idx3-ubyte");
        let labels = Path::new(&dir).join("train-labels-idx1-ubyte");
        if !images.exists() {
            return;
        }
        let d = load_idx_images(&images, Some(&labels)).unwrap();
        let s = crate::domain::subsample(&d, 1000, 0).unwrap();
        assert_eq!((s.len(), s.dim()), (1000, 784));
        assert!(s.features().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn manifest_missing_file_names_it() {
        let dir = tempfile::tempdir().unwrap();
        let m = Manifest {
            label_kind: LabelKind::Class,
            domains: vec![ManifestEntry {
                id: "s".into(),
                path: "gone.csv".into(),
                role: Role::Source,
                meta: None,
            }],
        };
        let err = m.resolve(dir.path()).unwrap_err();
        assert!(err.to_string().contains("gone.csv"));
    }

    #[test]
    fn manifest_round_trip_and_resolve() {
        let dir = tempfile::tempdir().unwrap();
        let mut domains = Vec::new();
        for (id, role, meta) in [("s", Role::Source, 0.0), ("i", Role::Intermediate, 45.0), ("t", Role::Target, 90.0)] {
            let d = make_half_moons(5, 0.1, meta as u64).unwrap();
            save_csv_domain(&d, &dir.path().join(format!("{id}.csv"))).unwrap();
            domains.push(ManifestEntry {
                id: id.into(),
                path: format!("{id}.csv").into(),
                role,
                meta: Some(meta),
            });
        }
        let m = Manifest {
            label_kind: LabelKind::Class,
            domains,
        };
        let mp = dir.path().join("manifest.json");
        m.save(&mp).unwrap();
        let back = Manifest::load(&mp).unwrap();
        assert_eq!(back, m);
        let loaded = back.resolve(dir.path()).unwrap();
        assert_eq!(loaded.source.id(), "s");
        assert_eq!(loaded.target.meta(), Some(90.0));
        assert_eq!(loaded.intermediates.len(), 1);
    }
}
