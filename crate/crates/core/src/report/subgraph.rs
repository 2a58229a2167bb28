//! Subgraph export: labeled similarity matrix CSV plus a filtered-network
//! drawing with new concepts visually distinguished.

use std::io::{BufWriter, Write};
use std::path::Path;

use super::ReportError;
use crate::embedding::EmbeddingMatrix;
use crate::metrics::SubgraphSample;

const MAX_EXPORT: usize = 200;

/// Symmetric pairwise similarity matrix of the sample, row-major.
fn similarity_matrix(
    sample: &SubgraphSample,
    m: &EmbeddingMatrix,
) -> Result<Vec<f64>, ReportError> {
    let n = sample.len();
    let mut values = vec![0.0f64; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in (i + 1)..n {
            let s = m.cosine(sample.concept_ids[i], sample.concept_ids[j])?;
            values[i * n + j] = s;
            values[j * n + i] = s;
        }
    }
    Ok(values)
}

/// Similarity of the pair at the 90th percentile (nearest rank), the default
/// edge filter for network drawings.
fn percentile_threshold(values: &[f64], n: usize) -> f64 {
    let mut sims: Vec<f64> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| values[i * n + j])
        .collect();
    sims.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if sims.is_empty() {
        return f64::INFINITY;
    }
    let rank = ((0.9 * sims.len() as f64).ceil() as usize).clamp(1, sims.len());
    sims[rank - 1]
}

/// Writes the sample's adjacency CSV (term, new flag, similarity columns)
/// and a companion filtered-network SVG. Edges above `threshold` (default:
/// the sample's 90th-percentile similarity) are drawn; new concepts are
/// flagged in both outputs.
pub fn export_subgraph(
    sample: &SubgraphSample,
    m: &EmbeddingMatrix,
    csv_path: &Path,
    svg_path: &Path,
    threshold: Option<f64>,
) -> Result<(), ReportError> {
    let n = sample.len();
    if n > MAX_EXPORT {
        return Err(ReportError::TooLarge(n));
    }
    if n == 0 {
        return Err(ReportError::EmptyData);
    }
    let values = similarity_matrix(sample, m)?;
    let terms: Vec<&str> = sample
        .concept_ids
        .iter()
        .map(|&id| m.term(id))
        .collect();

    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| ReportError::Io {
            path: path.clone(),
            source,
        }
    };
    let mut w = BufWriter::new(std::fs::File::create(csv_path).map_err(io_err(csv_path))?);
    let mut header = String::from("term,is_new");
    for t in &terms {
        header.push(',');
        header.push_str(&csv_field(t));
    }
    writeln!(w, "{header}").map_err(io_err(csv_path))?;
    for i in 0..n {
        let mut row = csv_field(terms[i]);
        row.push(',');
        row.push_str(&u8::from(sample.new_flags[i]).to_string());
        for j in 0..n {
            row.push_str(&format!(",{:.12}", values[i * n + j]));
        }
        writeln!(w, "{row}").map_err(io_err(csv_path))?;
    }
    w.flush().map_err(io_err(csv_path))?;

    let threshold = threshold.unwrap_or_else(|| percentile_threshold(&values, n));
    let svg = network_svg(sample, &terms, &values, threshold);
    std::fs::write(svg_path, svg).map_err(io_err(svg_path))?;
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[allow(clippy::needless_range_loop)]
fn network_svg(sample: &SubgraphSample, terms: &[&str], values: &[f64], threshold: f64) -> String {
    let n = sample.len();
    let size = 640.0;
    let cx = size / 2.0;
    let cy = size / 2.0;
    let radius = size / 2.0 - 80.0;
    let pos = |i: usize| -> (f64, f64) {
        let angle = 2.0 * std::f64::consts::PI * i as f64 / n as f64 - std::f64::consts::FRAC_PI_2;
        (cx + radius * angle.cos(), cy + radius * angle.sin())
    };
    let fx = |v: f64| format!("{v:.2}");
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">\n<rect x=\"0\" y=\"0\" width=\"{size}\" height=\"{size}\" fill=\"white\"/>\n"
    ));
    for i in 0..n {
        for j in (i + 1)..n {
            let s = values[i * n + j];
            if s > threshold {
                let (x1, y1) = pos(i);
                let (x2, y2) = pos(j);
                out.push_str(&format!(
                    "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#b0b0b0\" stroke-width=\"1\" class=\"edge\" data-similarity=\"{s:.12}\"/>\n",
                    fx(x1),
                    fx(y1),
                    fx(x2),
                    fx(y2)
                ));
            }
        }
    }
    for i in 0..n {
        let (x, y) = pos(i);
        let (fill, class) = if sample.new_flags[i] {
            ("#d62728", "new")
        } else {
            ("#1f77b4", "prior")
        };
        out.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"6\" fill=\"{fill}\" class=\"{class}\" data-term=\"{}\"/>\n",
            fx(x),
            fx(y),
            terms[i].replace('"', "&quot;")
        ));
        let anchor = if x < cx { "end" } else { "start" };
        let dx = if x < cx { -9.0 } else { 9.0 };
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"{anchor}\" font-family=\"sans-serif\" font-size=\"9\">{}</text>\n",
            fx(x + dx),
            fx(y + 3.0),
            terms[i]
                .replace('&', "&amp;")
                .replace('<', "&lt;")
                .replace('>', "&gt;")
        ));
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ConceptId;

    fn fixture(n: usize, new: usize) -> (SubgraphSample, EmbeddingMatrix) {
        let mut rng = crate::seeds::rng(41, &[1]);
        use rand::Rng;
        let dim = 8;
        let rows: Vec<f32> = (0..n * dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let terms = (0..n).map(|i| format!("concept{i:03}")).collect();
        let m = EmbeddingMatrix::new(terms, dim, rows).unwrap();
        let sample = SubgraphSample {
            year: 1990,
            concept_ids: (0..n as ConceptId).collect(),
            new_flags: (0..n).map(|i| i < new).collect(),
            rng_seed: 0,
            truncated: false,
        };
        (sample, m)
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn thirty_concept_export_matches_contract() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("sub.csv");
        let svg = dir.path().join("sub.svg");
        let (sample, m) = fixture(30, 2);
        export_subgraph(&sample, &m, &csv, &svg, None).unwrap();

        let content = std::fs::read_to_string(&csv).unwrap();
        let lines: Vec<&str> = content.lines().collect();
        assert_eq!(lines.len(), 31, "header plus 30 rows");
        let flagged = lines[1..]
            .iter()
            .filter(|l| l.split(',').nth(1) == Some("1"))
            .count();
        assert_eq!(flagged, 2);

        // Parse back the matrix: diagonal 1.0, transpose-equal.
        let mut grid = vec![vec![0.0f64; 30]; 30];
        for (i, line) in lines[1..].iter().enumerate() {
            for (j, v) in line.split(',').skip(2).enumerate() {
                grid[i][j] = v.parse().unwrap();
            }
        }
        for i in 0..30 {
            assert_eq!(grid[i][i], 1.0);
            for j in 0..30 {
                assert!((grid[i][j] - grid[j][i]).abs() < 1e-12);
            }
        }

        let svg_content = std::fs::read_to_string(&svg).unwrap();
        assert_eq!(svg_content.matches("class=\"new\"").count(), 2);
        assert_eq!(svg_content.matches("class=\"prior\"").count(), 28);
        assert!(svg_content.contains("class=\"edge\""));
    }

    #[test]
    fn exports_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let (sample, m) = fixture(12, 1);
        let render = |tag: &str| {
            let csv = dir.path().join(format!("{tag}.csv"));
            let svg = dir.path().join(format!("{tag}.svg"));
            export_subgraph(&sample, &m, &csv, &svg, None).unwrap();
            (
                std::fs::read(&csv).unwrap(),
                std::fs::read(&svg).unwrap(),
            )
        };
        assert_eq!(render("a"), render("b"));
    }

    #[test]
    fn oversized_sample_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (sample, m) = fixture(201, 0);
        let err = export_subgraph(
            &sample,
            &m,
            &dir.path().join("x.csv"),
            &dir.path().join("x.svg"),
            None,
        );
        assert!(matches!(err, Err(ReportError::TooLarge(201))));
    }

    #[test]
    fn explicit_threshold_filters_edges() {
        let dir = tempfile::tempdir().unwrap();
        let (sample, m) = fixture(10, 0);
        let csv = dir.path().join("t.csv");
        let svg_all = dir.path().join("all.svg");
        let svg_none = dir.path().join("none.svg");
        export_subgraph(&sample, &m, &csv, &svg_all, Some(-2.0)).unwrap();
        export_subgraph(&sample, &m, &csv, &svg_none, Some(2.0)).unwrap();
        let all = std::fs::read_to_string(&svg_all).unwrap();
        let none = std::fs::read_to_string(&svg_none).unwrap();
        assert_eq!(all.matches("class=\"edge\"").count(), 45);
        assert_eq!(none.matches("class=\"edge\"").count(), 0);
    }
}
