use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::datagen::{Dataset, Label};
use crate::error::{Error, Result};
use crate::qubo::TrainedModel;

use super::{write_meta, MapArgs, ModelFile};

const SVG_SIZE: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapCell {
    pub x1: f64,
    pub x2: f64,
    pub decision_value: f64,
    pub label: Label,
}

/// Decision function of a two-feature model on an `r × r` grid over `[0, 2π]²`,
/// row-major with `x2` varying fastest.
pub fn classification_map(model: &TrainedModel, resolution: usize) -> Result<Vec<MapCell>> {
    if resolution < 2 {
        return Err(Error::InvalidParameter(format!(
            "resolution must be at least 2, got {resolution}"
        )));
    }
    if model.n_features() != Some(2) {
        return Err(Error::InvalidParameter(
            "classification maps need a model with exactly two features".into(),
        ));
    }
    let coord = |i: usize| 2.0 * PI * i as f64 / (resolution - 1) as f64;
    let grid: Vec<Vec<f64>> = (0..resolution)
        .flat_map(|i| (0..resolution).map(move |j| vec![coord(i), coord(j)]))
        .collect();
    let values = model.decision_values(&grid)?;
    Ok(grid
        .iter()
        .zip(values)
        .map(|(p, v)| MapCell {
            x1: p[0],
            x2: p[1],
            decision_value: v,
            label: Label::from_sign(v),
        })
        .collect())
}

pub(super) fn cmd_map(a: &MapArgs) -> Result<()> {
    let file = ModelFile::read(&a.model)?;
    let cells = classification_map(&file.model, a.resolution)?;
    let mut csv = String::from("x1,x2,decision_value,label\n");
    for c in &cells {
        writeln!(csv, "{},{},{},{}", c.x1, c.x2, c.decision_value, c.label).expect("string write");
    }
    std::fs::write(&a.out, csv).map_err(|e| Error::io(&a.out, e))?;
    write_meta(&a.out, "map", a)?;
    if let Some(svg) = &a.svg {
        let test = a.test_data.as_deref().map(Dataset::read_csv).transpose()?;
        write_svg(svg, &cells, a.resolution, &file.model, test.as_ref())?;
    }
    Ok(())
}

fn colour(label: Label) -> &'static str {
    match label {
        Label::Positive => "#d62728",
        Label::Negative => "#1f77b4",
    }
}

fn write_svg(
    path: &Path,
    cells: &[MapCell],
    resolution: usize,
    model: &TrainedModel,
    test: Option<&Dataset>,
) -> Result<()> {
    let cell = SVG_SIZE / resolution as f64;
    // x1 runs left to right, x2 bottom to top.
    let px = |x: f64| x / (2.0 * PI) * (SVG_SIZE - cell) + cell / 2.0;
    let py = |y: f64| SVG_SIZE - px(y);
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_SIZE}" height="{SVG_SIZE}" viewBox="0 0 {SVG_SIZE} {SVG_SIZE}">"#
    )
    .expect("string write");
    for c in cells {
        writeln!(
            s,
            r#"<rect x="{:.3}" y="{:.3}" width="{cell:.3}" height="{cell:.3}" fill="{}" fill-opacity="0.35"/>"#,
            px(c.x1) - cell / 2.0,
            py(c.x2) - cell / 2.0,
            colour(c.label)
        )
        .expect("string write");
    }
    for (p, l) in model.train_points.iter().zip(&model.train_labels) {
        writeln!(
            s,
            r#"<circle cx="{:.3}" cy="{:.3}" r="4" fill="{}" stroke="black"/>"#,
            px(p[0]),
            py(p[1]),
            colour(*l)
        )
        .expect("string write");
    }
    if let Some(test) = test {
        for (p, l) in test.points().iter().zip(test.labels()) {
            if p.len() < 2 {
                continue;
            }
            let (x, y) = (px(p[0]), py(p[1]));
            writeln!(
                s,
                r#"<polygon points="{:.3},{:.3} {:.3},{:.3} {:.3},{:.3}" fill="{}" stroke="black"/>"#,
                x,
                y - 5.0,
                x - 4.5,
                y + 4.0,
                x + 4.5,
                y + 4.0,
                colour(*l)
            )
            .expect("string write");
        }
    }
    s.push_str("</svg>\n");
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Kernel;
    use crate::qubo::QuboBuilder;

    fn constant_model(beta: f64) -> TrainedModel {
        let ds = Dataset::new(
            "t",
            vec![vec![1.0, 2.0], vec![3.0, 4.0]],
            vec![Label::Positive, Label::Negative],
        )
        .unwrap();
        TrainedModel::new(vec![0, 0], beta, &ds, Kernel::Linear, QuboBuilder::Paper).unwrap()
    }

    #[test]
    fn two_by_two_grid_hits_corners() {
        let cells = classification_map(&constant_model(0.5), 2).unwrap();
        let coords: Vec<(f64, f64)> = cells.iter().map(|c| (c.x1, c.x2)).collect();
        let t = 2.0 * PI;
        assert_eq!(coords, vec![(0.0, 0.0), (0.0, t), (t, 0.0), (t, t)]);
    }

    #[test]
    fn constant_classifier_and_sign_consistency() {
        let cells = classification_map(&constant_model(0.5), 7).unwrap();
        assert_eq!(cells.len(), 49);
        assert!(cells.iter().all(|c| c.label == Label::Positive));
        let cells = classification_map(&constant_model(0.0), 3).unwrap();
        assert!(cells
            .iter()
            .all(|c| c.label == Label::from_sign(c.decision_value)));
        assert!(cells.iter().all(|c| c.label == Label::Positive));
    }

    #[test]
    fn rejects_bad_resolution_and_dimension() {
        assert!(classification_map(&constant_model(0.5), 1).is_err());
        let ds = Dataset::new("t", vec![vec![1.0]], vec![Label::Positive]).unwrap();
        let m = TrainedModel::new(vec![1], 0.0, &ds, Kernel::Linear, QuboBuilder::Paper).unwrap();
        assert!(classification_map(&m, 4).is_err());
    }
}
