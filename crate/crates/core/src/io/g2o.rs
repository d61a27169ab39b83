//! g2o-style text dump of a pose graph, for interoperability with
//! external graph-optimization tooling:
//!
//! ```text
//! VERTEX_SE3:QUAT id tx ty tz qx qy qz qw
//! EDGE_SE3:QUAT from to tx ty tz qx qy qz qw i11 i12 ... i66
//! ```
//!
//! The information matrix is written as its 21 upper-triangular entries,
//! row major. On read, edges between consecutive ids are classified as
//! sequential and all others as loop edges, mirroring how the pipeline
//! builds its graphs.

use std::path::Path;

use nalgebra::{Matrix6, Vector3};

use super::{path_str, IoError};
use crate::geometry::PoseSE3;
use crate::loopgraph::{LoopEdge, PoseGraph};

fn upper_triangular(m: &Matrix6<f64>) -> [f64; 21] {
    let mut out = [0.0; 21];
    let mut k = 0;
    for i in 0..6 {
        for j in i..6 {
            out[k] = m[(i, j)];
            k += 1;
        }
    }
    out
}

fn from_upper_triangular(values: &[f64]) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    let mut k = 0;
    for i in 0..6 {
        for j in i..6 {
            m[(i, j)] = values[k];
            m[(j, i)] = values[k];
            k += 1;
        }
    }
    m
}

pub fn write_pose_graph_g2o(path: &Path, graph: &PoseGraph) -> Result<(), IoError> {
    let mut out = String::new();
    for (&id, pose) in graph.nodes() {
        let q = pose.rotation;
        out.push_str(&format!(
            "VERTEX_SE3:QUAT {id} {} {} {} {} {} {} {}\n",
            pose.translation.x, pose.translation.y, pose.translation.z, q.i, q.j, q.k, q.w
        ));
    }
    for edge in graph.sequential_edges().iter().chain(graph.loop_edges()) {
        let q = edge.measurement.rotation;
        let t = edge.measurement.translation;
        let info = upper_triangular(&edge.information)
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(" ");
        out.push_str(&format!(
            "EDGE_SE3:QUAT {} {} {} {} {} {} {} {} {} {info}\n",
            edge.from, edge.to, t.x, t.y, t.z, q.i, q.j, q.k, q.w
        ));
    }
    Ok(std::fs::write(path, out)?)
}

pub fn read_pose_graph_g2o(path: &Path) -> Result<PoseGraph, IoError> {
    let text = std::fs::read_to_string(path)?;
    let origin = path_str(path);
    let bad = |line: usize, message: String| IoError::MalformedLine {
        path: origin.clone(),
        line,
        message,
    };

    let mut graph = PoseGraph::new();
    let mut edges: Vec<(usize, u64, u64, PoseSE3, Matrix6<f64>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parse_f64s = |slice: &[&str]| -> Result<Vec<f64>, IoError> {
            slice
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| bad(i + 1, format!("bad number {s:?}: {e}")))
                })
                .collect()
        };
        match fields[0] {
            "VERTEX_SE3:QUAT" => {
                if fields.len() != 9 {
                    return Err(bad(i + 1, format!("vertex needs 9 fields, got {}", fields.len())));
                }
                let id: u64 = fields[1]
                    .parse()
                    .map_err(|e| bad(i + 1, format!("bad id: {e}")))?;
                let v = parse_f64s(&fields[2..9])?;
                graph.add_node(
                    id,
                    PoseSE3::from_parts(0.0, v[6], v[3], v[4], v[5], Vector3::new(v[0], v[1], v[2])),
                );
            }
            "EDGE_SE3:QUAT" => {
                if fields.len() != 3 + 7 + 21 {
                    return Err(bad(i + 1, format!("edge needs 31 fields, got {}", fields.len())));
                }
                let from: u64 = fields[1]
                    .parse()
                    .map_err(|e| bad(i + 1, format!("bad from id: {e}")))?;
                let to: u64 = fields[2]
                    .parse()
                    .map_err(|e| bad(i + 1, format!("bad to id: {e}")))?;
                let v = parse_f64s(&fields[3..10])?;
                let info = parse_f64s(&fields[10..31])?;
                let measurement =
                    PoseSE3::from_parts(0.0, v[6], v[3], v[4], v[5], Vector3::new(v[0], v[1], v[2]));
                edges.push((i + 1, from, to, measurement, from_upper_triangular(&info)));
            }
            other => return Err(bad(i + 1, format!("unknown record type {other:?}"))),
        }
    }

    for (line, from, to, measurement, information) in edges {
        let sequential = to == from + 1 || from == to + 1;
        let result = if sequential {
            graph.add_sequential_edge(from, to, measurement, information)
        } else {
            graph.add_loop_edge(&LoopEdge {
                from: from.min(to),
                to: from.max(to),
                relative: if from < to {
                    measurement
                } else {
                    measurement.inverse()
                },
                information,
                inlier_count: 0,
            })
        };
        result.map_err(|e| bad(line, e.to_string()))?;
    }
    Ok(graph)
}
