//! Model and dataset files.
//!
//! Model files start with the 8-byte magic `DIVNET01`, followed by the
//! manifest length as a little-endian `u64`, a UTF-8 text manifest (one
//! `key value` pair per line, tensors as `tensor <name> <d0,d1,...>`) and
//! the tensor payloads as little-endian `f64` in manifest order.
//!
//! Dataset files are plain text: a header of `key value` lines, then one
//! comma-separated record per item holding the input values, the label
//! count and the flattened labels.

use std::fmt::Write as _;
use std::path::Path;

use divnet_core::data::{Generator, Quadrant, Split};
use divnet_core::model::Parameter;
use divnet_core::{
    Activation, BaggedEnsemble, ControlKind, DataItem, Dataset, Model, ModelConfig, Tensor, Trained, TreenetModel,
};
use thiserror::Error;

use crate::config::{format_mode, parse_mode};

pub const MAGIC_PREFIX: &[u8; 6] = b"DIVNET";
pub const VERSION: &[u8; 2] = b"01";
const DATASET_HEADER: &str = "divnet-dataset 1";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("not a divnet model file (bad magic)")]
    BadMagic,
    #[error("unsupported model file version {found:?} (expected 01)")]
    Version { found: String },
    #[error("truncated file: {0}")]
    Truncated(String),
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("tensor `{tensor}`: {message}")]
    Extent { tensor: String, message: String },
    #[error("line {line}, field {field}: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn write_config(out: &mut String, c: &ModelConfig) {
    let _ = writeln!(out, "input_dim {}", c.input_dim);
    let _ = writeln!(out, "output_dim {}", c.output_dim);
    let _ = writeln!(out, "encoder_widths {}", join(&c.encoder_widths));
    let _ = writeln!(out, "decoder_widths {}", join(&c.decoder_widths));
    let _ = writeln!(out, "hidden_activation {}", c.hidden_activation.name());
    let _ = writeln!(out, "output_activation {}", c.output_activation.name());
    let _ = writeln!(out, "injection_points {}", join(&c.injection_points));
    let _ = writeln!(out, "control_dim {}", c.control_dim);
    let kind = match c.control_kind {
        ControlKind::Discrete => "discrete",
        ControlKind::Continuous => "continuous",
    };
    let _ = writeln!(out, "control_kind {kind}");
    let _ = writeln!(out, "seed {}", c.seed);
}

fn push_tensors<'a>(out: &mut String, payload: &mut Vec<u8>, params: impl Iterator<Item = (String, &'a Tensor)>) {
    for (name, t) in params {
        let _ = writeln!(out, "tensor {name} {}", join(t.shape()));
        for v in t.data() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
}

/// Serializes a trained network of any kind.
pub fn model_to_bytes(trained: &Trained) -> Vec<u8> {
    let mut manifest = String::new();
    let mut payload = Vec::new();
    match trained {
        Trained::Single(m) => {
            manifest.push_str("kind single\n");
            write_config(&mut manifest, m.config());
            push_tensors(
                &mut manifest,
                &mut payload,
                m.parameters().iter().map(|p| (p.name.clone(), &p.value)),
            );
        }
        Trained::Treenet(t) => {
            manifest.push_str("kind treenet\n");
            write_config(&mut manifest, t.config());
            let _ = writeln!(manifest, "members {}", t.n_members());
            push_tensors(&mut manifest, &mut payload, t.parameters().map(|p| (p.name.clone(), &p.value)));
        }
        Trained::Bagged(e) => {
            manifest.push_str("kind bagged\n");
            let base = e.members.first().map(|m| m.config().clone());
            if let Some(c) = &base {
                write_config(&mut manifest, c);
            }
            let _ = writeln!(manifest, "members {}", e.members.len());
            for (j, m) in e.members.iter().enumerate() {
                let _ = writeln!(manifest, "member_seed {j} {}", m.config().seed);
            }
            for (j, s) in e.subsets.iter().enumerate() {
                let _ = writeln!(manifest, "subset {j} {}", join(s));
            }
            for (j, m) in e.members.iter().enumerate() {
                push_tensors(
                    &mut manifest,
                    &mut payload,
                    m.parameters().iter().map(|p| (format!("member{j}.{}", p.name), &p.value)),
                );
            }
        }
    }
    let mut out = Vec::with_capacity(16 + manifest.len() + payload.len());
    out.extend_from_slice(MAGIC_PREFIX);
    out.extend_from_slice(VERSION);
    out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    out.extend_from_slice(manifest.as_bytes());
    out.extend_from_slice(&payload);
    out
}

struct Manifest {
    entries: Vec<(usize, String, String)>,
}

impl Manifest {
    fn get(&self, key: &str) -> Result<(usize, &str), FormatError> {
        self.entries
            .iter()
            .find(|(_, k, _)| k == key)
            .map(|(l, _, v)| (*l, v.as_str()))
            .ok_or_else(|| FormatError::Manifest {
                line: self.entries.len() + 1,
                message: format!("missing key `{key}`"),
            })
    }

    fn all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = (usize, &'a str)> + 'a {
        self.entries
            .iter()
            .filter(move |(_, k, _)| k == key)
            .map(|(l, _, v)| (*l, v.as_str()))
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<T, FormatError> {
        let (line, v) = self.get(key)?;
        v.parse().map_err(|_| FormatError::Manifest {
            line,
            message: format!("`{key}` has invalid value `{v}`"),
        })
    }

    fn list(&self, key: &str) -> Result<Vec<usize>, FormatError> {
        let (line, v) = self.get(key)?;
        parse_list(v).map_err(|_| FormatError::Manifest {
            line,
            message: format!("`{key}` has invalid list `{v}`"),
        })
    }
}

fn parse_list<T: std::str::FromStr>(v: &str) -> Result<Vec<T>, T::Err> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| s.trim().parse()).collect()
}

fn read_config(m: &Manifest) -> Result<ModelConfig, FormatError> {
    let act = |key: &str| -> Result<Activation, FormatError> {
        let (line, v) = m.get(key)?;
        Activation::from_name(v).ok_or_else(|| FormatError::Manifest {
            line,
            message: format!("unknown activation `{v}`"),
        })
    };
    let (kline, kind) = m.get("control_kind")?;
    let control_kind = match kind {
        "discrete" => ControlKind::Discrete,
        "continuous" => ControlKind::Continuous,
        other => {
            return Err(FormatError::Manifest {
                line: kline,
                message: format!("unknown control kind `{other}`"),
            })
        }
    };
    Ok(ModelConfig {
        input_dim: m.num("input_dim")?,
        output_dim: m.num("output_dim")?,
        encoder_widths: m.list("encoder_widths")?,
        decoder_widths: m.list("decoder_widths")?,
        hidden_activation: act("hidden_activation")?,
        output_activation: act("output_activation")?,
        injection_points: m.list("injection_points")?,
        control_dim: m.num("control_dim")?,
        control_kind,
        seed: m.num("seed")?,
    })
}

/// Reads a model file written by [`model_to_bytes`].
pub fn model_from_bytes(bytes: &[u8]) -> Result<Trained, FormatError> {
    if bytes.len() < 8 || &bytes[..6] != MAGIC_PREFIX {
        return Err(FormatError::BadMagic);
    }
    if &bytes[6..8] != VERSION {
        return Err(FormatError::Version {
            found: String::from_utf8_lossy(&bytes[6..8]).into_owned(),
        });
    }
    if bytes.len() < 16 {
        return Err(FormatError::Truncated("missing manifest length".into()));
    }
    let mlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = &bytes[16..];
    if body.len() < mlen {
        return Err(FormatError::Truncated(format!(
            "manifest declares {mlen} bytes, {} available",
            body.len()
        )));
    }
    let text = std::str::from_utf8(&body[..mlen]).map_err(|_| FormatError::Manifest {
        line: 0,
        message: "manifest is not UTF-8".into(),
    })?;
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let (k, v) = line.split_once(' ').unwrap_or((line, ""));
        entries.push((i + 1, k.to_string(), v.to_string()));
    }
    let manifest = Manifest { entries };

    let mut payload = &body[mlen..];
    let mut tensors: Vec<Parameter> = Vec::new();
    for (line, v) in manifest.all("tensor") {
        let (name, shape) = v.split_once(' ').ok_or_else(|| FormatError::Manifest {
            line,
            message: "tensor line needs a name and a shape".into(),
        })?;
        let shape: Vec<usize> = parse_list(shape).map_err(|_| FormatError::Extent {
            tensor: name.into(),
            message: format!("invalid shape `{shape}`"),
        })?;
        let n: usize = shape.iter().product();
        if payload.len() < n * 8 {
            return Err(FormatError::Truncated(format!(
                "tensor `{name}` needs {} bytes, {} remain",
                n * 8,
                payload.len()
            )));
        }
        let data = payload[..n * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        payload = &payload[n * 8..];
        let value = Tensor::new(&shape, data).map_err(|e| FormatError::Extent {
            tensor: name.into(),
            message: e.to_string(),
        })?;
        tensors.push(Parameter {
            name: name.to_string(),
            value,
        });
    }
    if !payload.is_empty() {
        return Err(FormatError::Invalid(format!(
            "{} trailing payload bytes after the last tensor",
            payload.len()
        )));
    }

    let extent = |e: divnet_core::Error| FormatError::Extent {
        tensor: extract_tensor_name(&e.to_string()),
        message: e.to_string(),
    };
    let (_, kind) = manifest.get("kind")?;
    match kind {
        "single" => {
            let config = read_config(&manifest)?;
            Ok(Trained::Single(Model::from_parameters(config, tensors).map_err(extent)?))
        }
        "treenet" => {
            let config = read_config(&manifest)?;
            let n: usize = manifest.num("members")?;
            let mut shared = Vec::new();
            let mut members: Vec<Vec<Parameter>> = vec![Vec::new(); n];
            for p in tensors {
                if p.name.starts_with("shared.") {
                    shared.push(p);
                } else {
                    let j = member_index(&p.name)?;
                    members
                        .get_mut(j)
                        .ok_or_else(|| FormatError::Extent {
                            tensor: p.name.clone(),
                            message: format!("member index beyond the declared {n}"),
                        })?
                        .push(p);
                }
            }
            Ok(Trained::Treenet(
                TreenetModel::from_parameters(config, shared, members).map_err(extent)?,
            ))
        }
        "bagged" => {
            let n: usize = manifest.num("members")?;
            if n == 0 {
                return Ok(Trained::Bagged(BaggedEnsemble {
                    members: Vec::new(),
                    subsets: Vec::new(),
                }));
            }
            let base = read_config(&manifest)?;
            let mut seeds = vec![None; n];
            for (line, v) in manifest.all("member_seed") {
                let bad = || FormatError::Manifest {
                    line,
                    message: format!("invalid member_seed `{v}`"),
                };
                let (j, s) = v.split_once(' ').ok_or_else(bad)?;
                let j: usize = j.parse().map_err(|_| bad())?;
                *seeds.get_mut(j).ok_or_else(bad)? = Some(s.parse::<u64>().map_err(|_| bad())?);
            }
            let mut subsets = vec![Vec::new(); n];
            for (line, v) in manifest.all("subset") {
                let bad = || FormatError::Manifest {
                    line,
                    message: format!("invalid subset `{v}`"),
                };
                let (j, s) = v.split_once(' ').unwrap_or((v, ""));
                let j: usize = j.parse().map_err(|_| bad())?;
                *subsets.get_mut(j).ok_or_else(bad)? = parse_list(s).map_err(|_| bad())?;
            }
            let mut grouped: Vec<Vec<Parameter>> = vec![Vec::new(); n];
            for mut p in tensors {
                let j = member_index(&p.name)?;
                let rest = p.name.split_once('.').map(|(_, r)| r.to_string()).unwrap_or_default();
                p.name = rest;
                grouped
                    .get_mut(j)
                    .ok_or_else(|| FormatError::Extent {
                        tensor: p.name.clone(),
                        message: format!("member index beyond the declared {n}"),
                    })?
                    .push(p);
            }
            let members = grouped
                .into_iter()
                .zip(seeds)
                .enumerate()
                .map(|(j, (params, seed))| {
                    let mut c = base.clone();
                    c.seed = seed.ok_or_else(|| FormatError::Manifest {
                        line: 0,
                        message: format!("missing member_seed for member {j}"),
                    })?;
                    Model::from_parameters(c, params).map_err(extent)
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Trained::Bagged(BaggedEnsemble { members, subsets }))
        }
        other => Err(FormatError::Manifest {
            line: 1,
            message: format!("unknown model kind `{other}`"),
        }),
    }
}

fn member_index(name: &str) -> Result<usize, FormatError> {
    name.strip_prefix("member")
        .and_then(|r| r.split_once('.'))
        .and_then(|(j, _)| j.parse().ok())
        .ok_or_else(|| FormatError::Extent {
            tensor: name.into(),
            message: "expected a `member<j>.` prefix".into(),
        })
}

fn extract_tensor_name(msg: &str) -> String {
    msg.split('`').nth(1).unwrap_or("?").to_string()
}

pub fn save_model(trained: &Trained, path: &Path) -> Result<(), FormatError> {
    std::fs::write(path, model_to_bytes(trained))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Trained, FormatError> {
    model_from_bytes(&std::fs::read(path)?)
}

fn describe_generator(g: &Generator) -> String {
    match g {
        Generator::Multimodal { modes, noise_sd } => {
            let ms: Vec<String> = modes.iter().map(format_mode).collect();
            format!("multimodal modes={} noise_sd={}", ms.join(";"), noise_sd)
        }
        Generator::Occluded { .. } => g.describe(),
    }
}

fn parse_generator(line: usize, s: &str) -> Result<Generator, FormatError> {
    let bad = |field: &str, message: String| FormatError::Parse {
        line,
        field: field.into(),
        message,
    };
    let mut words = s.split_whitespace();
    let kind = words.next().unwrap_or("");
    let kv: Vec<(&str, &str)> = words.filter_map(|w| w.split_once('=')).collect();
    let get = |k: &str| {
        kv.iter()
            .find(|(key, _)| *key == k)
            .map(|(_, v)| *v)
            .ok_or_else(|| bad(k, "missing".into()))
    };
    let num = |k: &str| -> Result<usize, FormatError> {
        let v = get(k)?;
        v.parse().map_err(|_| bad(k, format!("invalid integer `{v}`")))
    };
    match kind {
        "multimodal" => {
            let modes = get("modes")?
                .split(';')
                .map(|m| parse_mode(m).map_err(|e| bad("modes", e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            let nv = get("noise_sd")?;
            let noise_sd = nv.parse().map_err(|_| bad("noise_sd", format!("invalid number `{nv}`")))?;
            Ok(Generator::Multimodal { modes, noise_sd })
        }
        "occluded" => {
            let q = get("visible")?;
            Ok(Generator::Occluded {
                grid_side: num("grid_side")?,
                n_shapes: num("n_shapes")?,
                visible: Quadrant::from_name(q).ok_or_else(|| bad("visible", format!("unknown quadrant `{q}`")))?,
                k_neighbors: num("k_neighbors")?,
            })
        }
        other => Err(bad("generator", format!("unknown generator `{other}`"))),
    }
}

/// Text form of a dataset.
pub fn dataset_to_string(ds: &Dataset) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{DATASET_HEADER}");
    let _ = writeln!(out, "generator {}", describe_generator(&ds.generator));
    let _ = writeln!(out, "seed {}", ds.seed);
    let _ = writeln!(out, "split {}", ds.split.name());
    let _ = writeln!(out, "index_offset {}", ds.index_offset);
    let _ = writeln!(out, "input_dim {}", ds.input_dim());
    let _ = writeln!(out, "output_dim {}", ds.output_dim());
    let _ = writeln!(out, "n_items {}", ds.len());
    for item in &ds.items {
        let mut fields: Vec<String> = item.x.iter().map(|v| v.to_string()).collect();
        fields.push(item.labels.len().to_string());
        fields.extend(item.labels.iter().flatten().map(|v| v.to_string()));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Parses the text form; errors carry the 1-based line and the field name.
pub fn dataset_from_str(text: &str) -> Result<Dataset, FormatError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |field: &str| -> Result<(usize, String), FormatError> {
        lines
            .next()
            .map(|(n, l)| (n, l.to_string()))
            .ok_or_else(|| FormatError::Truncated(format!("missing header field `{field}`")))
    };
    let (n, first) = next("format")?;
    if first != DATASET_HEADER {
        return Err(FormatError::Parse {
            line: n,
            field: "format".into(),
            message: format!("expected `{DATASET_HEADER}`"),
        });
    }
    let mut header = |key: &str| -> Result<(usize, String), FormatError> {
        let (n, l) = next(key)?;
        match l.split_once(' ') {
            Some((k, v)) if k == key => Ok((n, v.to_string())),
            _ => Err(FormatError::Parse {
                line: n,
                field: key.into(),
                message: format!("expected `{key} <value>`"),
            }),
        }
    };
    fn int(n: usize, key: &str, v: &str) -> Result<usize, FormatError> {
        v.parse().map_err(|_| FormatError::Parse {
            line: n,
            field: key.into(),
            message: format!("invalid integer `{v}`"),
        })
    }
    let (gl, gv) = header("generator")?;
    let generator = parse_generator(gl, &gv)?;
    let (sl, sv) = header("seed")?;
    let seed: u64 = sv.parse().map_err(|_| FormatError::Parse {
        line: sl,
        field: "seed".into(),
        message: format!("invalid integer `{sv}`"),
    })?;
    let (pl, pv) = header("split")?;
    let split = Split::from_name(&pv).ok_or_else(|| FormatError::Parse {
        line: pl,
        field: "split".into(),
        message: format!("unknown split `{pv}`"),
    })?;
    let (l, v) = header("index_offset")?;
    let index_offset = int(l, "index_offset", &v)?;
    let (l, v) = header("input_dim")?;
    let din = int(l, "input_dim", &v)?;
    let (l, v) = header("output_dim")?;
    let dout = int(l, "output_dim", &v)?;
    let (l, v) = header("n_items")?;
    let n_items = int(l, "n_items", &v)?;

    let mut items = Vec::with_capacity(n_items);
    for (line, rec) in lines {
        if rec.is_empty() {
            continue;
        }
        if items.len() == n_items {
            return Err(FormatError::Parse {
                line,
                field: "record".into(),
                message: format!("more records than the declared {n_items}"),
            });
        }
        let fields: Vec<&str> = rec.split(',').collect();
        let real = |i: usize, name: String| -> Result<f64, FormatError> {
            let f = fields.get(i).ok_or_else(|| FormatError::Parse {
                line,
                field: name.clone(),
                message: "missing".into(),
            })?;
            f.trim().parse().map_err(|_| FormatError::Parse {
                line,
                field: name,
                message: format!("invalid number `{f}`"),
            })
        };
        let x = (0..din).map(|i| real(i, format!("x[{i}]"))).collect::<Result<Vec<_>, _>>()?;
        let nl = fields.get(din).ok_or_else(|| FormatError::Parse {
            line,
            field: "n_labels".into(),
            message: "missing".into(),
        })?;
        let nl: usize = int(line, "n_labels", nl.trim())?;
        if nl == 0 {
            return Err(FormatError::Parse {
                line,
                field: "n_labels".into(),
                message: "label set must be non-empty".into(),
            });
        }
        let expected = din + 1 + nl * dout;
        if fields.len() != expected {
            return Err(FormatError::Parse {
                line,
                field: "record".into(),
                message: format!("expected {expected} fields, found {}", fields.len()),
            });
        }
        let labels = (0..nl)
            .map(|j| {
                (0..dout)
                    .map(|d| real(din + 1 + j * dout + d, format!("label[{j}][{d}]")))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        items.push(DataItem { x, labels });
    }
    if items.len() != n_items {
        return Err(FormatError::Truncated(format!(
            "header declares {n_items} records, found {}",
            items.len()
        )));
    }
    Ok(Dataset {
        generator,
        seed,
        split,
        index_offset,
        items,
    })
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<(), FormatError> {
    std::fs::write(path, dataset_to_string(ds))?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset, FormatError> {
    dataset_from_str(&std::fs::read_to_string(path)?)
}
