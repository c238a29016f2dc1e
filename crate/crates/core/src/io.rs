//! Kernel and vector-manifest files.
//!
//! A kernel file is a JSON object
//!
//! ```text
//! { "dimension": N, "order": q,
//!   "entries": [ { "index": [i_1, ..., i_q], "value": v }, ... ] }
//! ```
//!
//! with 1-based indices sorted ascending (repeats allowed) and each index
//! listed at most once. An optional top-level `header` object is ignored. A manifest lists groups of elements, each element
//! being a path (relative to the manifest) or an inline kernel object:
//!
//! ```text
//! { "groups": [ { "order": q, "elements": [ "f.json", { ...kernel... } ] } ] }
//! ```

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::IgnoredAny;
use serde::Deserialize;
use thiserror::Error;

use crate::chaos::{ChaosElement, ChaosError};
use crate::independence::{ChaosVector, IndependenceError};
use crate::tensor::{HilbertSpace, SymmetricTensor};

/// Rescaling factors further than this from 1 are reported on load.
pub const RESCALE_WARN: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{source_name}: {error}")]
    Read {
        source_name: String,
        error: std::io::Error,
    },
    #[error("{source_name}: malformed document: {message}")]
    Parse {
        source_name: String,
        message: String,
    },
    #[error("{source_name}: entry {entry} (index {index:?}): {message}")]
    Entry {
        source_name: String,
        entry: usize,
        index: Vec<u32>,
        message: String,
    },
    #[error("{source_name}: {message}")]
    Kernel {
        source_name: String,
        message: String,
    },
    #[error("{source_name}: kernel has order {found} but its group declares {expected}")]
    OrderMismatch {
        source_name: String,
        expected: usize,
        found: usize,
    },
    #[error("{source_name}: kernel has dimension {found}, other kernels have {expected}")]
    DimensionMismatch {
        source_name: String,
        expected: usize,
        found: usize,
    },
    #[error("{source_name}: {error}")]
    Vector {
        source_name: String,
        error: IndependenceError,
    },
}

pub type Result<T> = std::result::Result<T, IoError>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelDoc {
    #[serde(default, rename = "header")]
    _header: Option<IgnoredAny>,
    dimension: usize,
    order: usize,
    entries: Vec<EntryDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryDoc {
    index: Vec<u32>,
    value: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestDoc {
    #[serde(default, rename = "header")]
    _header: Option<IgnoredAny>,
    groups: Vec<GroupDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupDoc {
    order: usize,
    elements: Vec<ElementDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ElementDoc {
    Path(PathBuf),
    Inline(KernelDoc),
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|error| IoError::Read {
        source_name: path.display().to_string(),
        error,
    })
}

fn parse_error(source_name: &str, e: serde_json::Error) -> IoError {
    IoError::Parse {
        source_name: source_name.to_owned(),
        message: e.to_string(),
    }
}

fn build_kernel(doc: KernelDoc, source_name: &str) -> Result<SymmetricTensor> {
    let kernel_err = |message: String| IoError::Kernel {
        source_name: source_name.to_owned(),
        message,
    };
    let space = HilbertSpace::new(doc.dimension).map_err(|e| kernel_err(e.to_string()))?;
    let mut seen = BTreeSet::new();
    let mut entries = Vec::with_capacity(doc.entries.len());
    for (k, e) in doc.entries.into_iter().enumerate() {
        let entry_err = |message: String| IoError::Entry {
            source_name: source_name.to_owned(),
            entry: k + 1,
            index: e.index.clone(),
            message,
        };
        if e.index.len() != doc.order {
            return Err(entry_err(format!(
                "index has length {}, expected order {}",
                e.index.len(),
                doc.order
            )));
        }
        if e.index.windows(2).any(|w| w[0] > w[1]) {
            return Err(entry_err("index is not sorted ascending".into()));
        }
        if let Some(&i) = e.index.iter().find(|&&i| i == 0 || i as usize > doc.dimension) {
            return Err(entry_err(format!(
                "index {i} outside 1..={}",
                doc.dimension
            )));
        }
        if !e.value.is_finite() {
            return Err(entry_err("value is not finite".into()));
        }
        if !seen.insert(e.index.clone()) {
            return Err(entry_err("index listed twice".into()));
        }
        let zero_based: Vec<u32> = e.index.iter().map(|i| i - 1).collect();
        entries.push((zero_based, e.value));
    }
    SymmetricTensor::from_entries(space, doc.order, entries).map_err(|e| kernel_err(e.to_string()))
}

/// Parses a kernel document. `source_name` labels errors.
pub fn parse_kernel(text: &str, source_name: &str) -> Result<SymmetricTensor> {
    let doc: KernelDoc = serde_json::from_str(text).map_err(|e| parse_error(source_name, e))?;
    build_kernel(doc, source_name)
}

pub fn load_kernel(path: impl AsRef<Path>) -> Result<SymmetricTensor> {
    let path = path.as_ref();
    parse_kernel(&read(path)?, &path.display().to_string())
}

fn write_kernel_body(out: &mut String, t: &SymmetricTensor, indent: &str) {
    let _ = writeln!(out, "{{");
    let _ = writeln!(out, "{indent}  \"dimension\": {},", t.space().dim());
    let _ = writeln!(out, "{indent}  \"order\": {},", t.order());
    let _ = write!(out, "{indent}  \"entries\": [");
    for (k, (idx, v)) in t.iter().enumerate() {
        let sep = if k == 0 { "" } else { "," };
        let index: Vec<String> = idx.iter().map(|i| (i + 1).to_string()).collect();
        let _ = write!(
            out,
            "{sep}\n{indent}    {{ \"index\": [{}], \"value\": {v:.16e} }}",
            index.join(", ")
        );
    }
    if t.is_empty() {
        let _ = writeln!(out, "]");
    } else {
        let _ = writeln!(out, "\n{indent}  ]");
    }
    let _ = write!(out, "{indent}}}");
}

/// Canonical kernel document: entries in lexicographic order, values with
/// 17 significant digits so they re-parse to the same bits.
pub fn kernel_to_string(t: &SymmetricTensor) -> String {
    let mut out = String::new();
    write_kernel_body(&mut out, t, "");
    out.push('\n');
    out
}

/// Manifest with every kernel inline.
pub fn manifest_to_string(v: &ChaosVector) -> String {
    let mut out = String::from("{\n  \"groups\": [");
    for (g, group) in v.groups().iter().enumerate() {
        let sep = if g == 0 { "" } else { "," };
        let _ = write!(
            out,
            "{sep}\n    {{\n      \"order\": {},\n      \"elements\": [",
            group.order()
        );
        for (e, el) in group.elements().iter().enumerate() {
            let sep = if e == 0 { "" } else { "," };
            let _ = write!(out, "{sep}\n        ");
            write_kernel_body(&mut out, el.kernel(), "        ");
        }
        let _ = write!(out, "\n      ]\n    }}");
    }
    out.push_str("\n  ]\n}\n");
    out
}

fn standardize(kernel: SymmetricTensor, source_name: &str) -> Result<ChaosElement> {
    let el = ChaosElement::new(kernel).map_err(|e| chaos_error(source_name, e))?;
    if el.is_standardized() {
        return Ok(el);
    }
    let factor = 1.0 / el.variance().sqrt();
    if (factor - 1.0).abs() > RESCALE_WARN {
        log::warn!("{source_name}: kernel rescaled by {factor:.9} to unit variance");
    }
    el.normalize().map_err(|e| chaos_error(source_name, e))
}

fn chaos_error(source_name: &str, e: ChaosError) -> IoError {
    let message = match e {
        ChaosError::Degenerate => "kernel is zero".to_owned(),
        ChaosError::ZeroOrder => "kernel has order 0; elements need order at least 1".to_owned(),
        other => other.to_string(),
    };
    IoError::Kernel {
        source_name: source_name.to_owned(),
        message,
    }
}

/// Parses a manifest. Relative element paths resolve against `base`.
pub fn parse_manifest(text: &str, source_name: &str, base: &Path) -> Result<ChaosVector> {
    let doc: ManifestDoc = serde_json::from_str(text).map_err(|e| parse_error(source_name, e))?;
    let mut dimension: Option<usize> = None;
    let mut groups = Vec::with_capacity(doc.groups.len());
    for (g, group) in doc.groups.into_iter().enumerate() {
        let mut elements = Vec::with_capacity(group.elements.len());
        for (e, element) in group.elements.into_iter().enumerate() {
            let (kernel, name) = match element {
                ElementDoc::Path(p) => {
                    let path = base.join(p);
                    (load_kernel(&path)?, path.display().to_string())
                }
                ElementDoc::Inline(doc) => {
                    let name = format!("{source_name}: groups[{}].elements[{}]", g + 1, e + 1);
                    (build_kernel(doc, &name)?, name)
                }
            };
            if kernel.order() != group.order {
                return Err(IoError::OrderMismatch {
                    source_name: name,
                    expected: group.order,
                    found: kernel.order(),
                });
            }
            let dim = kernel.space().dim();
            let expected = *dimension.get_or_insert(dim);
            if dim != expected {
                return Err(IoError::DimensionMismatch {
                    source_name: name,
                    expected,
                    found: dim,
                });
            }
            elements.push(standardize(kernel, &name)?);
        }
        groups.push(elements);
    }
    ChaosVector::new(groups).map_err(|error| IoError::Vector {
        source_name: source_name.to_owned(),
        error,
    })
}

/// Reads a manifest file and builds a standardized vector.
pub fn load_vector(path: impl AsRef<Path>) -> Result<ChaosVector> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&read(path)?, &path.display().to_string(), base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::independence::criterion_check;

    const DISJOINT: &str = r#"{ "groups": [
        { "order": 1, "elements": [ { "dimension": 2, "order": 1, "entries": [ { "index": [1], "value": 1.0 } ] } ] },
        { "order": 1, "elements": [ { "dimension": 2, "order": 1, "entries": [ { "index": [2], "value": 1.0 } ] } ] }
    ] }"#;

    #[test]
    fn disjoint_manifest_has_zero_witnesses() {
        let v = parse_manifest(DISJOINT, "m.json", Path::new(".")).unwrap();
        let c = criterion_check(&v, 1e-12).unwrap();
        assert_eq!(c.squared_covariance.value, 0.0);
        assert_eq!(c.contraction.value, 0.0);
    }

    #[test]
    fn unsorted_index_names_the_entry() {
        let text = r#"{ "dimension": 2, "order": 2, "entries": [
            { "index": [1, 1], "value": 1.0 },
            { "index": [2, 1], "value": 0.5 } ] }"#;
        let err = parse_kernel(text, "k.json").unwrap_err();
        match &err {
            IoError::Entry { entry, index, .. } => {
                assert_eq!(*entry, 2);
                assert_eq!(index, &vec![2, 1]);
            }
            other => panic!("{other:?}"),
        }
        let msg = err.to_string();
        assert!(msg.contains("k.json") && msg.contains("entry 2") && msg.contains("sorted"), "{msg}");
    }

    #[test]
    fn entry_errors() {
        let cases = [
            (r#"[{ "index": [1, 1], "value": 1.0 }, { "index": [1, 1], "value": 2.0 }]"#, "twice"),
            (r#"[{ "index": [1, 3], "value": 1.0 }]"#, "outside"),
            (r#"[{ "index": [0, 1], "value": 1.0 }]"#, "outside"),
            (r#"[{ "index": [1], "value": 1.0 }]"#, "length"),
        ];
        for (entries, needle) in cases {
            let text = format!(r#"{{ "dimension": 2, "order": 2, "entries": {entries} }}"#);
            let msg = parse_kernel(&text, "k").unwrap_err().to_string();
            assert!(msg.contains(needle), "{msg}");
        }
        assert!(matches!(
            parse_kernel(r#"{ "dimension": 2, "order": 2 }"#, "k"),
            Err(IoError::Parse { .. })
        ));
    }

    #[test]
    fn zero_kernel_and_order_mismatch() {
        let zero = r#"{ "groups": [
            { "order": 1, "elements": [ { "dimension": 2, "order": 1, "entries": [] } ] },
            { "order": 1, "elements": [ { "dimension": 2, "order": 1, "entries": [ { "index": [2], "value": 1.0 } ] } ] }
        ] }"#;
        let msg = parse_manifest(zero, "m", Path::new(".")).unwrap_err().to_string();
        assert!(msg.contains("zero") && msg.contains("groups[1].elements[1]"), "{msg}");

        let mismatch = DISJOINT.replacen("\"order\": 1, \"elements\"", "\"order\": 2, \"elements\"", 1);
        assert!(matches!(
            parse_manifest(&mismatch, "m", Path::new(".")),
            Err(IoError::OrderMismatch { expected: 2, found: 1, .. })
        ));
    }

    #[test]
    fn unnormalized_kernels_are_rescaled() {
        let text = DISJOINT.replace("\"value\": 1.0", "\"value\": 3.0");
        let v = parse_manifest(&text, "m", Path::new(".")).unwrap();
        for (_, e) in v.elements() {
            assert!((e.variance() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_text_round_trips() {
        let s = HilbertSpace::new(3).unwrap();
        let t = SymmetricTensor::from_entries(
            s,
            2,
            [(vec![0u32, 2], 0.1f64), (vec![1, 1], -1.0 / 3.0), (vec![2, 2], 1e-300)],
        )
        .unwrap();
        let text = kernel_to_string(&t);
        let back = parse_kernel(&text, "t").unwrap();
        assert_eq!(back, t);
        assert!(text.contains("\"index\": [1, 3]"));
    }
}
