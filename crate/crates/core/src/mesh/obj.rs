use super::{fan_triangulate, Face, Point3, TriangleMesh};
use crate::error::{Error, Result};

/// Parses the `v`/`f` subset of ASCII Wavefront OBJ.
///
/// Face corners may carry texture/normal sub-indices (`f 1/2/3 ...`); only
/// the vertex index is used. Negative indices count back from the most
/// recent vertex. Polygons are fan-triangulated. Other record types are
/// skipped.
pub fn parse_obj(text: &str) -> Result<TriangleMesh> {
    let mut vertices: Vec<Point3> = Vec::new();
    // (line number, polygon) so out-of-range indices can be reported in place.
    let mut polygons: Vec<(usize, Vec<usize>)> = Vec::new();

    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .map(|t| {
                        t.parse::<f64>()
                            .ok()
                            .filter(|x| x.is_finite())
                            .ok_or_else(|| Error::parse(line_no, format!("bad coordinate `{t}`")))
                    })
                    .collect::<Result<_>>()?;
                if !(3..=4).contains(&coords.len()) {
                    return Err(Error::parse(
                        line_no,
                        format!("vertex needs 3 coordinates, got {}", coords.len()),
                    ));
                }
                vertices.push([coords[0], coords[1], coords[2]]);
            }
            Some("f") => {
                let mut polygon = Vec::new();
                for token in tokens {
                    let index_str = token.split('/').next().unwrap_or("");
                    let index: i64 = index_str
                        .parse()
                        .map_err(|_| Error::parse(line_no, format!("bad face index `{token}`")))?;
                    let resolved = match index {
                        0 => return Err(Error::parse(line_no, "face index 0 is not valid in OBJ")),
                        i if i > 0 => (i - 1) as usize,
                        i => {
                            let back = i.unsigned_abs() as usize;
                            if back > vertices.len() {
                                return Err(Error::parse(
                                    line_no,
                                    format!("relative index {i} out of range"),
                                ));
                            }
                            vertices.len() - back
                        }
                    };
                    polygon.push(resolved);
                }
                if polygon.len() < 3 {
                    return Err(Error::parse(
                        line_no,
                        format!("face has {} vertices, need at least 3", polygon.len()),
                    ));
                }
                polygons.push((line_no, polygon));
            }
            _ => {}
        }
    }

    let mut faces: Vec<Face> = Vec::new();
    for (line_no, polygon) in &polygons {
        if let Some(&bad) = polygon.iter().find(|&&v| v >= vertices.len()) {
            return Err(Error::parse(
                *line_no,
                format!(
                    "face index {} out of range ({} vertices)",
                    bad + 1,
                    vertices.len()
                ),
            ));
        }
        for tri in fan_triangulate(polygon) {
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::parse(*line_no, "face repeats a vertex"));
            }
            faces.push(tri);
        }
    }
    if faces.is_empty() {
        return Err(Error::NoFaces);
    }
    TriangleMesh::new(vertices, faces)
}
