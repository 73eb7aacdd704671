//! Error metrics, centerline extraction, and the bundled Ghia reference table.

use crate::error::{QnsError, Result};
use crate::grid::Grid2D;

/// Denominator guard used throughout.
pub const ARE_EPS: f64 = 1e-8;

fn check_shape(a: &[f64], r: &[f64]) -> Result<()> {
    if a.len() != r.len() {
        return Err(QnsError::Shape { expected: r.len(), got: a.len() });
    }
    Ok(())
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Pointwise `||a| − |r|| / (|r| + eps)`.
pub fn are(candidate: &[f64], reference: &[f64], eps: f64) -> Result<Vec<f64>> {
    check_shape(candidate, reference)?;
    Ok(candidate.iter().zip(reference).map(|(a, r)| (a.abs() - r.abs()).abs() / (r.abs() + eps)).collect())
}

/// Per-point ARE and its mean.
pub fn metric_are(candidate: &[f64], reference: &[f64], eps: f64) -> Result<(Vec<f64>, f64)> {
    let e = are(candidate, reference, eps)?;
    let m = mean(&e);
    Ok((e, m))
}

/// `|r − a| / max|r|` pointwise.
pub fn metric_normalized_are(candidate: &[f64], reference: &[f64]) -> Result<Vec<f64>> {
    check_shape(candidate, reference)?;
    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(QnsError::Degenerate("reference field is identically zero".into()));
    }
    Ok(candidate.iter().zip(reference).map(|(a, r)| (r - a).abs() / scale).collect())
}

pub fn mse(candidate: &[f64], reference: &[f64]) -> Result<f64> {
    check_shape(candidate, reference)?;
    Ok(mean(&candidate.iter().zip(reference).map(|(a, r)| (a - r) * (a - r)).collect::<Vec<_>>()))
}

pub fn rms(v: &[f64]) -> f64 {
    mean(&v.iter().map(|x| x * x).collect::<Vec<_>>()).sqrt()
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Pointwise velocity magnitude.
pub fn magnitude(u: &[f64], v: &[f64]) -> Vec<f64> {
    u.iter().zip(v).map(|(a, b)| a.hypot(*b)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Centerline {
    /// Along the line `x = L/2`, parametrised by `y`.
    Vertical,
    /// Along the line `y = L/2`, parametrised by `x`.
    Horizontal,
}

/// Linear interpolation of `ys` sampled at ascending `xs`.
pub fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|&v| v < x);
    if k == 0 {
        return ys[0];
    }
    if k >= xs.len() {
        return ys[xs.len() - 1];
    }
    let (x0, x1) = (xs[k - 1], xs[k]);
    let w = (x - x0) / (x1 - x0);
    ys[k - 1] * (1.0 - w) + ys[k] * w
}

/// Samples a full nodal field (boundary nodes included) along a centerline.
/// Returns `(coordinate, value)` pairs over every node of the other axis.
pub fn centerline_extract(grid: &Grid2D, field: &[f64], line: Centerline) -> Result<Vec<(f64, f64)>> {
    if field.len() != grid.total_nodes() {
        return Err(QnsError::Shape { expected: grid.total_nodes(), got: field.len() });
    }
    let (across, along) = match line {
        Centerline::Vertical => (&grid.xi, &grid.eta),
        Centerline::Horizontal => (&grid.eta, &grid.xi),
    };
    let mid = 0.5 * across.length;
    let pos = &across.coords;
    let mut out = Vec::with_capacity(along.n + 2);
    for (b, &s) in along.coords.iter().enumerate() {
        let vals: Vec<f64> = (0..pos.len())
            .map(|a| match line {
                Centerline::Vertical => field[grid.node(a, b)],
                Centerline::Horizontal => field[grid.node(b, a)],
            })
            .collect();
        out.push((s, interp(pos, &vals, mid)));
    }
    Ok(out)
}

/// Ghia et al. (1982) Re = 100 centerline velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct GhiaReference {
    /// `(y, u)` along the vertical centerline, ascending in `y`.
    pub u_profile: Vec<(f64, f64)>,
    /// `(x, v)` along the horizontal centerline, ascending in `x`.
    pub v_profile: Vec<(f64, f64)>,
}

const GHIA_RE100: &str = include_str!("../data/ghia_re100.csv");

impl GhiaReference {
    pub fn re100() -> Result<Self> {
        Self::parse(GHIA_RE100)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let mut u_profile = Vec::new();
        let mut v_profile = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|f| f.trim().parse::<f64>().map_err(|e| QnsError::Parse(format!("`{f}`: {e}"))))
                .collect::<Result<_>>()?;
            if vals.len() != 4 {
                return Err(QnsError::Parse(format!("expected 4 columns, got {}", vals.len())));
            }
            u_profile.push((vals[0], vals[1]));
            v_profile.push((vals[2], vals[3]));
        }
        u_profile.reverse();
        v_profile.reverse();
        for p in [&u_profile, &v_profile] {
            if p.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(QnsError::Parse("coordinates must be strictly monotone".into()));
            }
            if p.iter().any(|(_, v)| v.abs() > 1.0) {
                return Err(QnsError::Parse("velocity outside [-1, 1]".into()));
            }
        }
        Ok(Self { u_profile, v_profile })
    }

    /// RMS deviation of a computed profile (ascending coordinates) from the
    /// tabulated points, interpolating the computed profile.
    pub fn rms_deviation(table: &[(f64, f64)], computed: &[(f64, f64)]) -> f64 {
        let xs: Vec<f64> = computed.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = computed.iter().map(|p| p.1).collect();
        let d: Vec<f64> = table.iter().map(|&(s, r)| interp(&xs, &ys, s) - r).collect();
        rms(&d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, StretchConfig};
    use approx::assert_abs_diff_eq;

    #[test]
    fn are_cases() {
        let a = [1.0, -2.0, 3.0];
        assert_eq!(are(&a, &a, 0.0).unwrap(), vec![0.0; 3]);
        assert_abs_diff_eq!(are(&[1.1], &[1.0], 0.0).unwrap()[0], 0.1, epsilon = 1e-15);
        assert_eq!(are(&[-2.0], &[2.0], ARE_EPS).unwrap()[0], 0.0);
        assert!(matches!(are(&[1.0], &[1.0, 2.0], 0.0), Err(QnsError::Shape { .. })));
        let (_, m) = metric_are(&[2.0, 1.0], &[1.0, 1.0], 0.0).unwrap();
        assert_eq!(m, 0.5);
    }

    #[test]
    fn normalized_are_cases() {
        let r = [0.5, -2.0, 1.0];
        assert_eq!(metric_normalized_are(&r, &r).unwrap(), vec![0.0; 3]);
        let e = metric_normalized_are(&[0.5, 0.0, 1.0], &r).unwrap();
        assert_eq!(e, vec![0.0, 1.0, 0.0]);
        assert!(matches!(metric_normalized_are(&[1.0], &[0.0]), Err(QnsError::Degenerate(_))));
    }

    #[test]
    fn mse_value() {
        assert_eq!(mse(&[1.0, 3.0], &[0.0, 1.0]).unwrap(), 2.5);
    }

    #[test]
    fn centerline_symmetric_field() {
        let g = build_grid(9, 9, &StretchConfig::hyperbolic(2.5, 1.0)).unwrap();
        let mut f = vec![0.0; g.total_nodes()];
        for j in 0..g.stride() {
            for i in 0..g.stride() {
                let (x, y) = (g.xi.coords[i], g.eta.coords[j]);
                f[g.node(i, j)] = (y - 0.5).powi(2) + (x - 0.5).abs();
            }
        }
        let prof = centerline_extract(&g, &f, Centerline::Vertical).unwrap();
        let n = prof.len();
        for k in 0..n {
            assert_abs_diff_eq!(prof[k].1, prof[n - 1 - k].1, epsilon = 1e-12);
        }
        // odd node count: x = 0.5 is a node, so the |x − 0.5| term vanishes
        assert_abs_diff_eq!(prof[n / 2].1, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn centerline_interpolates_between_nodes() {
        let g = build_grid(4, 4, &StretchConfig::uniform(1.0)).unwrap();
        let mut f = vec![0.0; g.total_nodes()];
        for j in 0..g.stride() {
            for i in 0..g.stride() {
                f[g.node(i, j)] = g.xi.coords[i] * 3.0 + 1.0;
            }
        }
        let prof = centerline_extract(&g, &f, Centerline::Vertical).unwrap();
        assert!(prof.iter().all(|p| (p.1 - 2.5).abs() < 1e-12));
        let prof = centerline_extract(&g, &f, Centerline::Horizontal).unwrap();
        assert_abs_diff_eq!(prof.last().unwrap().1, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn ghia_table_loads() {
        let g = GhiaReference::re100().unwrap();
        assert_eq!(g.u_profile.len(), 17);
        assert_eq!(g.v_profile.len(), 17);
        assert_eq!(g.u_profile.last().unwrap(), &(1.0, 1.0));
        assert_eq!(g.u_profile[8], (0.5, -0.20581));
        assert_eq!(g.v_profile[8], (0.5, 0.05454));
        assert_eq!(GhiaReference::rms_deviation(&g.u_profile, &g.u_profile), 0.0);
    }

    #[test]
    fn ghia_parse_rejects_bad_rows() {
        assert!(GhiaReference::parse("y,u,x,v\n0.0,0,0,0\n0.0,0,1,0\n").is_err());
        assert!(GhiaReference::parse("y,u,x,v\n0.0,2,0,0\n").is_err());
        assert!(GhiaReference::parse("y,u,x,v\n0.0,a,0,0\n").is_err());
    }
}
