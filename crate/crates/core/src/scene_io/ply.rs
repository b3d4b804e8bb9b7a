//! Binary little-endian PLY in the standard 3DGS vertex layout.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use super::{SceneError, SceneFile};
use crate::projection::{coefficient_count, Splat3D};

const REQUIRED: [&str; 14] = [
    "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2",
    "rot_0", "rot_1", "rot_2", "rot_3",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }
}

struct Element {
    name: String,
    count: usize,
    /// (name, type, byte offset within the record)
    properties: Vec<(String, ScalarType, usize)>,
    stride: usize,
    has_list: bool,
}

struct Header {
    elements: Vec<Element>,
    data_offset: usize,
}

fn malformed(m: impl Into<String>) -> SceneError {
    SceneError::MalformedHeader(m.into())
}

fn parse_header(bytes: &[u8]) -> Result<Header, SceneError> {
    let mut pos = 0;
    let mut next_line = || -> Result<&str, SceneError> {
        let rest = &bytes[pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| malformed("header is not terminated by end_header"))?;
        pos += end + 1;
        std::str::from_utf8(&rest[..end])
            .map(|s| s.trim_end_matches('\r'))
            .map_err(|_| malformed("header is not valid UTF-8"))
    };

    if next_line()? != "ply" {
        return Err(malformed("missing `ply` magic"));
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut format_seen = false;
    loop {
        let line = next_line()?;
        let mut words = line.split_whitespace();
        match words.next() {
            Some("format") => {
                match words.next() {
                    Some("binary_little_endian") => {}
                    Some(f @ ("ascii" | "binary_big_endian")) => {
                        return Err(SceneError::UnsupportedFormat(f.to_string()))
                    }
                    other => return Err(malformed(format!("unknown format {other:?}"))),
                }
                format_seen = true;
            }
            Some("element") => {
                let name = words
                    .next()
                    .ok_or_else(|| malformed("element without name"))?;
                let count = words
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| malformed(format!("element {name} without count")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                    stride: 0,
                    has_list: false,
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| malformed("property before any element"))?;
                let ty = words
                    .next()
                    .ok_or_else(|| malformed("property without type"))?;
                if ty == "list" {
                    el.has_list = true;
                    continue;
                }
                let ty = ScalarType::parse(ty)
                    .ok_or_else(|| malformed(format!("unknown property type {ty}")))?;
                let name = words
                    .next()
                    .ok_or_else(|| malformed("property without name"))?;
                el.properties.push((name.to_string(), ty, el.stride));
                el.stride += ty.size();
            }
            Some("end_header") => break,
            Some("comment") | Some("obj_info") | None => {}
            Some(other) => return Err(malformed(format!("unexpected header line `{other}`"))),
        }
    }
    if !format_seen {
        return Err(malformed("missing format line"));
    }
    Ok(Header {
        elements,
        data_offset: pos,
    })
}

pub(super) fn parse_ply(bytes: &[u8]) -> Result<SceneFile, SceneError> {
    let header = parse_header(bytes)?;
    let mut offset = header.data_offset;
    let mut vertex = None;
    for el in &header.elements {
        if el.name == "vertex" {
            vertex = Some(el);
            break;
        }
        if el.has_list {
            return Err(SceneError::UnsupportedFormat(format!(
                "list properties in element `{}`",
                el.name
            )));
        }
        offset += el.count * el.stride;
    }
    let vertex = vertex.ok_or(SceneError::MissingProperty("element vertex".into()))?;
    if vertex.has_list {
        return Err(SceneError::UnsupportedFormat(
            "list properties in element `vertex`".into(),
        ));
    }

    let lookup: HashMap<&str, (ScalarType, usize)> = vertex
        .properties
        .iter()
        .map(|(n, t, o)| (n.as_str(), (*t, *o)))
        .collect();
    let field = |name: &str| {
        lookup
            .get(name)
            .copied()
            .ok_or_else(|| SceneError::MissingProperty(name.to_string()))
    };
    let core: Vec<(ScalarType, usize)> = REQUIRED
        .iter()
        .map(|n| field(n))
        .collect::<Result<_, _>>()?;

    let rest_count = (0..)
        .take_while(|k| lookup.contains_key(format!("f_rest_{k}").as_str()))
        .count();
    let sh_degree = match rest_count {
        0 => 0,
        9 => 1,
        24 => 2,
        45 => 3,
        n => {
            return Err(malformed(format!(
                "unexpected number of f_rest properties: {n}"
            )))
        }
    };
    let per_channel = rest_count / 3;
    let rest: Vec<(ScalarType, usize)> = (0..rest_count)
        .map(|k| field(&format!("f_rest_{k}")))
        .collect::<Result<_, _>>()?;

    let needed = vertex
        .count
        .checked_mul(vertex.stride)
        .and_then(|n| n.checked_add(offset))
        .ok_or_else(|| malformed("vertex count overflows"))?;
    if bytes.len() < needed {
        return Err(SceneError::TruncatedData {
            expected: needed,
            actual: bytes.len(),
        });
    }

    let mut splats = Vec::with_capacity(vertex.count);
    for i in 0..vertex.count {
        let rec = &bytes[offset + i * vertex.stride..offset + (i + 1) * vertex.stride];
        let v: Vec<f64> = core.iter().map(|&(t, o)| t.read(&rec[o..])).collect();
        let mut sh = [[0.0; 3]; 16];
        sh[0] = [v[3], v[4], v[5]];
        for ch in 0..3 {
            for k in 0..per_channel {
                let (t, o) = rest[ch * per_channel + k];
                sh[k + 1][ch] = t.read(&rec[o..]);
            }
        }
        let q = Quaternion::new(v[10], v[11], v[12], v[13]);
        let rotation = if q.norm() > 0.0 {
            UnitQuaternion::from_quaternion(q)
        } else {
            UnitQuaternion::identity()
        };
        splats.push(Splat3D {
            mean: Vector3::new(v[0], v[1], v[2]),
            scale: Vector3::new(v[7].exp(), v[8].exp(), v[9].exp()),
            rotation,
            opacity: sigmoid(v[6]),
            sh,
        });
    }
    Ok(SceneFile {
        splats,
        source_path: None,
        sh_degree,
    })
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-7, 1.0 - 1e-7);
    (p / (1.0 - p)).ln()
}

pub(super) fn encode_ply(scene: &SceneFile) -> Vec<u8> {
    let degree = scene.sh_degree.min(3);
    let per_channel = coefficient_count(degree) - 1;
    let mut out = Vec::new();
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    header += &format!("element vertex {}\n", scene.splats.len());
    let mut names: Vec<String> = [
        "x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    names.extend((0..3 * per_channel).map(|k| format!("f_rest_{k}")));
    names.extend(
        [
            "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    for n in &names {
        header += &format!("property float {n}\n");
    }
    header += "end_header\n";
    out.write_all(header.as_bytes()).expect("write to vec");

    for s in &scene.splats {
        let mut rec: Vec<f64> = vec![s.mean.x, s.mean.y, s.mean.z, 0.0, 0.0, 0.0];
        rec.extend_from_slice(&s.sh[0]);
        for ch in 0..3 {
            for k in 0..per_channel {
                rec.push(s.sh[k + 1][ch]);
            }
        }
        rec.push(logit(s.opacity));
        rec.extend(s.scale.iter().map(|v| v.ln()));
        let q = s.rotation.quaternion();
        rec.extend([q.w, q.i, q.j, q.k]);
        for v in rec {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn write_ply(scene: &SceneFile, path: impl AsRef<Path>) -> Result<(), SceneError> {
    std::fs::write(path, encode_ply(scene))?;
    Ok(())
}
