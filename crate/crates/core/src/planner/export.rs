use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::{PlanError, PlanReport, Result};
use crate::mesh::{PlyScene, TriangleMesh, Vec3};

const RED: [u8; 3] = [220, 30, 30];
const GREEN: [u8; 3] = [30, 190, 60];
const VIEWPOINT: [u8; 3] = [255, 200, 0];

/// 0 = red, 1 = green, 2+ = blue getting brighter up to 6 covers.
pub fn cover_color(count: u32) -> [u8; 3] {
    match count {
        0 => RED,
        1 => GREEN,
        c => {
            let s = (c.min(6) - 2) as f64 / 4.0;
            [20, (60.0 + 120.0 * s) as u8, (150.0 + 105.0 * s) as u8]
        }
    }
}

/// Mesh faces colored by cover count, one yellow vertex per viewpoint and a
/// direction stub edge from it.
pub fn visualization_scene(mesh: &TriangleMesh, report: &PlanReport) -> PlyScene {
    let counts = &report.cover_counts;
    let mut scene = PlyScene::from_mesh(mesh, "cover_count", |t| {
        let c = counts.get(t).copied().unwrap_or(0);
        (cover_color(c), c as i64)
    });
    let stub = mesh.bounding_box().map(|b| 0.1 * b.size().norm()).unwrap_or(1.0).max(1.0);
    for vp in &report.viewpoints {
        let a = scene.vertices.len();
        scene.vertices.push((vp.position, VIEWPOINT));
        scene.vertices.push((vp.position + vp.direction * stub, VIEWPOINT));
        scene.edges.push(([a, a + 1], VIEWPOINT));
    }
    scene
}

pub fn export_visualization(mesh: &TriangleMesh, report: &PlanReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, visualization_scene(mesh, report).to_ply_string()).map_err(|source| PlanError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Serialize)]
struct ViewpointRecord {
    position: Vec3,
    direction: Vec3,
    cluster: i64,
}

/// `[{position, direction, cluster}]`; cluster is -1 for sampled viewpoints.
pub fn viewpoints_json(report: &PlanReport) -> String {
    let records: Vec<ViewpointRecord> = report
        .viewpoints
        .iter()
        .map(|v| ViewpointRecord {
            position: v.position,
            direction: v.direction,
            cluster: v.source_cluster.map_or(-1, |c| c as i64),
        })
        .collect();
    serde_json::to_string_pretty(&records).expect("viewpoints serialize") + "\n"
}

/// One row per triangle.
pub fn coverage_csv(mesh: &TriangleMesh, report: &PlanReport) -> String {
    let mut s = String::from("triangle,cx,cy,cz,area,cover_count,uncoverable\n");
    let mut unc = report.uncoverable.iter().peekable();
    for t in 0..mesh.len() {
        let is_unc = unc.next_if_eq(&&t).is_some();
        let c = mesh.centroid(t);
        let _ = writeln!(
            s,
            "{t},{},{},{},{},{},{}",
            c.x,
            c.y,
            c.z,
            mesh.area(t),
            report.cover_counts.get(t).copied().unwrap_or(0),
            is_unc as u8
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;
    use crate::synthetic;

    fn report() -> (TriangleMesh, PlanReport) {
        let mut c = PlanConfig::default();
        c.max_area = Some(2.0);
        c.ga.max_generations = 30;
        let m = prepare_mesh(&synthetic::flat_plate(10.0, 10.0, 0.0), &c).unwrap();
        let r = plan(&m, &c).unwrap();
        (m, r)
    }

    fn count(ply: &str, element: &str) -> usize {
        ply.lines()
            .find_map(|l| l.strip_prefix(&format!("element {element} ")))
            .unwrap()
            .parse()
            .unwrap()
    }

    #[test]
    fn covered_mesh_has_no_red() {
        let (m, r) = report();
        let scene = visualization_scene(&m, &r);
        assert!(scene.faces.iter().all(|f| f.1 != RED));
        let ply = scene.to_ply_string();
        assert_eq!(count(&ply, "edge"), r.viewpoints.len());
        assert_eq!(count(&ply, "face"), m.len());
    }

    #[test]
    fn stubs_match_viewpoint_count() {
        let (m, mut r) = report();
        let vp = r.viewpoints[0];
        r.viewpoints = vec![vp; 5];
        assert_eq!(visualization_scene(&m, &r).edges.len(), 5);
    }

    #[test]
    fn empty_selection_is_all_red() {
        let (m, mut r) = report();
        r.viewpoints.clear();
        r.cover_counts = vec![0; m.len()];
        let scene = visualization_scene(&m, &r);
        assert!(scene.faces.iter().all(|f| f.1 == RED));
        assert!(scene.edges.is_empty());
    }

    #[test]
    fn blue_gradient_brightens() {
        assert!(cover_color(2)[2] < cover_color(5)[2]);
        assert_eq!(cover_color(6), cover_color(60));
    }

    #[test]
    fn viewpoint_and_coverage_tables() {
        let (m, r) = report();
        let v: serde_json::Value = serde_json::from_str(&viewpoints_json(&r)).unwrap();
        let first = &v[0];
        assert_eq!(first["position"].as_array().unwrap().len(), 3);
        assert!(first["cluster"].is_i64());
        let csv = coverage_csv(&m, &r);
        assert_eq!(csv.lines().count(), m.len() + 1);
    }
}
