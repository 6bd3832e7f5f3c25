use std::fmt::Write;

use super::{fan_triangulate, Face, Point3, TriangleMesh};
use crate::error::{Error, Result};

pub type Rgb = [u8; 3];

#[derive(Debug)]
enum Property {
    Scalar(String),
    List(String),
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

impl Element {
    /// Whether a body line's token count is consistent with this element.
    fn accepts(&self, tokens: &[&str]) -> bool {
        let mut pos = 0;
        for prop in &self.properties {
            match prop {
                Property::Scalar(_) => pos += 1,
                Property::List(_) => match tokens.get(pos).and_then(|t| t.parse::<usize>().ok()) {
                    Some(n) => pos += 1 + n,
                    None => return false,
                },
            }
        }
        pos == tokens.len()
    }
}

struct Header {
    elements: Vec<Element>,
    body_start: usize,
}

fn parse_header(lines: &[&str]) -> Result<Header> {
    if lines.first().map(|l| l.trim()) != Some("ply") {
        return Err(Error::parse(1, "missing `ply` magic"));
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut saw_format = false;
    for (idx, raw) in lines.iter().enumerate().skip(1) {
        let line_no = idx + 1;
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        match tokens.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", fmt, _version] => {
                if *fmt != "ascii" {
                    return Err(Error::UnsupportedFormat(fmt.to_string()));
                }
                saw_format = true;
            }
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| Error::parse(line_no, format!("bad element count `{count}`")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["property", "list", _count_ty, _item_ty, name] => elements
                .last_mut()
                .ok_or_else(|| Error::parse(line_no, "property before any element"))?
                .properties
                .push(Property::List(name.to_string())),
            ["property", _ty, name] => elements
                .last_mut()
                .ok_or_else(|| Error::parse(line_no, "property before any element"))?
                .properties
                .push(Property::Scalar(name.to_string())),
            ["end_header"] => {
                if !saw_format {
                    return Err(Error::parse(line_no, "missing `format` line"));
                }
                return Ok(Header {
                    elements,
                    body_start: idx + 1,
                });
            }
            _ => {
                return Err(Error::parse(
                    line_no,
                    format!("unrecognized header line `{raw}`"),
                ))
            }
        }
    }
    Err(Error::parse(lines.len(), "missing `end_header`"))
}

fn parse_num<T: std::str::FromStr>(token: &str, line_no: usize) -> Result<T> {
    token
        .parse()
        .map_err(|_| Error::parse(line_no, format!("bad number `{token}`")))
}

/// Parses an ASCII PLY file with `vertex` (x, y, z) and `face`
/// (`vertex_indices`) elements. Other elements and properties are skipped.
pub fn parse_ply(text: &str) -> Result<TriangleMesh> {
    let lines: Vec<&str> = text.lines().collect();
    let header = parse_header(&lines)?;

    let body: Vec<(usize, Vec<&str>)> = lines[header.body_start..]
        .iter()
        .enumerate()
        .map(|(k, l)| {
            (
                header.body_start + k + 1,
                l.split_whitespace().collect::<Vec<_>>(),
            )
        })
        .filter(|(_, t)| !t.is_empty())
        .collect();

    let mut vertices: Vec<Point3> = Vec::new();
    let mut faces: Vec<Face> = Vec::new();
    let mut cursor = 0;

    for (e, element) in header.elements.iter().enumerate() {
        let next = header.elements.get(e + 1);
        for found in 0..element.count {
            let Some((line_no, tokens)) = body.get(cursor) else {
                return Err(Error::CountMismatch {
                    element: element.name.clone(),
                    declared: element.count,
                    found,
                });
            };
            if !element.accepts(tokens) {
                if next.is_some_and(|n| n.accepts(tokens)) {
                    return Err(Error::CountMismatch {
                        element: element.name.clone(),
                        declared: element.count,
                        found,
                    });
                }
                return Err(Error::parse(
                    *line_no,
                    format!("malformed `{}` record", element.name),
                ));
            }
            cursor += 1;

            let mut pos = 0;
            let mut xyz = [None; 3];
            let mut polygon: Option<Vec<usize>> = None;
            for prop in &element.properties {
                match prop {
                    Property::Scalar(name) => {
                        let slot = match name.as_str() {
                            "x" => Some(0),
                            "y" => Some(1),
                            "z" => Some(2),
                            _ => None,
                        };
                        if let (Some(s), "vertex") = (slot, element.name.as_str()) {
                            let v: f64 = parse_num(tokens[pos], *line_no)?;
                            if !v.is_finite() {
                                return Err(Error::parse(*line_no, "non-finite coordinate"));
                            }
                            xyz[s] = Some(v);
                        }
                        pos += 1;
                    }
                    Property::List(name) => {
                        let n: usize = parse_num(tokens[pos], *line_no)?;
                        let items = &tokens[pos + 1..pos + 1 + n];
                        if element.name == "face"
                            && (name == "vertex_indices" || name == "vertex_index")
                        {
                            polygon = Some(
                                items
                                    .iter()
                                    .map(|t| parse_num(t, *line_no))
                                    .collect::<Result<_>>()?,
                            );
                        }
                        pos += 1 + n;
                    }
                }
            }

            match element.name.as_str() {
                "vertex" => match xyz {
                    [Some(x), Some(y), Some(z)] => vertices.push([x, y, z]),
                    _ => return Err(Error::parse(*line_no, "vertex lacks x/y/z properties")),
                },
                "face" => {
                    let polygon = polygon.ok_or_else(|| {
                        Error::parse(*line_no, "face element lacks vertex_indices")
                    })?;
                    if polygon.len() < 3 {
                        return Err(Error::parse(
                            *line_no,
                            format!("face has {} vertices, need at least 3", polygon.len()),
                        ));
                    }
                    if let Some(bad) = polygon.iter().find(|&&v| v >= vertices.len()) {
                        return Err(Error::parse(
                            *line_no,
                            format!(
                                "face index {bad} out of range ({} vertices)",
                                vertices.len()
                            ),
                        ));
                    }
                    for tri in fan_triangulate(&polygon) {
                        if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                            return Err(Error::parse(*line_no, "face repeats a vertex"));
                        }
                        faces.push(tri);
                    }
                }
                _ => {}
            }
        }
    }

    if cursor < body.len() {
        let last = header.elements.last();
        return Err(Error::CountMismatch {
            element: last.map(|e| e.name.clone()).unwrap_or_default(),
            declared: last.map_or(0, |e| e.count),
            found: last.map_or(0, |e| e.count) + body.len() - cursor,
        });
    }
    if faces.is_empty() {
        return Err(Error::NoFaces);
    }
    TriangleMesh::new(vertices, faces)
}

/// Formats a coordinate with 9 significant digits, in the shortest form that
/// reads back as the rounded value.
fn fmt_coord(v: f64) -> String {
    let rounded: f64 = format!("{v:.8e}").parse().unwrap_or(v);
    if rounded == 0.0 {
        "0".to_string()
    } else {
        format!("{rounded}")
    }
}

/// Writes the mesh as ASCII PLY with per-face `red`/`green`/`blue` taken from
/// `palette[label]`.
pub fn write_ply_colored(mesh: &TriangleMesh, labels: &[usize], palette: &[Rgb]) -> Result<String> {
    if labels.len() != mesh.face_count() {
        return Err(Error::Shape(format!(
            "{} labels for {} faces",
            labels.len(),
            mesh.face_count()
        )));
    }
    if let Some(&missing) = labels.iter().find(|&&l| l >= palette.len()) {
        return Err(Error::MissingPalette(missing));
    }

    let mut out = String::new();
    // Writing into a String cannot fail.
    let _ = write!(
        out,
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n\
         element face {}\nproperty list uchar int vertex_indices\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
        mesh.vertices().len(),
        mesh.face_count()
    );
    for p in mesh.vertices() {
        let _ = writeln!(
            out,
            "{} {} {}",
            fmt_coord(p[0]),
            fmt_coord(p[1]),
            fmt_coord(p[2])
        );
    }
    for (face, &label) in mesh.faces().iter().zip(labels) {
        let [r, g, b] = palette[label];
        let _ = writeln!(out, "3 {} {} {} {r} {g} {b}", face[0], face[1], face[2]);
    }
    Ok(out)
}

/// A palette of `n` distinct colors.
pub fn default_palette(n: usize) -> Vec<Rgb> {
    const BASE: [Rgb; 10] = [
        [31, 119, 180],
        [255, 127, 14],
        [44, 160, 44],
        [214, 39, 40],
        [148, 103, 189],
        [140, 86, 75],
        [227, 119, 194],
        [127, 127, 127],
        [188, 189, 34],
        [23, 190, 207],
    ];
    (0..n)
        .map(|i| {
            if i < BASE.len() {
                BASE[i]
            } else {
                // golden-ratio hue walk, mapped onto a coarse RGB cube
                let h = (i as f64 * 0.618_033_988_75).fract();
                let c = |shift: f64| ((((h + shift) * 6.0).sin() * 0.5 + 0.5) * 255.0) as u8;
                [c(0.0), c(1.0 / 3.0), c(2.0 / 3.0)]
            }
        })
        .collect()
}
