use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_GRID_NODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Spacing {
    Uniform,
    /// Cell widths grow by `ratio` away from the first node.
    Geometric { ratio: f64 },
    Custom,
}

/// Strictly increasing node set.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    nodes: Vec<f64>,
    spacing: Spacing,
}

impl Grid1D {
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        Self::geometric(a, b, n, 1.0)
    }

    pub fn geometric(a: f64, b: f64, n: usize, ratio: f64) -> Result<Self> {
        if n < MIN_GRID_NODES {
            return Err(Error::GridTooSmall { needed: MIN_GRID_NODES, got: n });
        }
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidField(format!("bad grid interval [{a}, {b}]")));
        }
        if !(ratio >= 1.0) || !ratio.is_finite() {
            return Err(Error::InvalidField(format!("stretch ratio {ratio} must be >= 1")));
        }
        let cells = n - 1;
        let mut nodes = Vec::with_capacity(n);
        if (ratio - 1.0).abs() < 1e-14 {
            let h = (b - a) / cells as f64;
            for i in 0..n {
                nodes.push(a + h * i as f64);
            }
        } else {
            let h0 = (b - a) * (ratio - 1.0) / (ratio.powi(cells as i32) - 1.0);
            let mut x = a;
            let mut h = h0;
            for _ in 0..cells {
                nodes.push(x);
                x += h;
                h *= ratio;
            }
            nodes.push(b);
        }
        nodes[n - 1] = b;
        let spacing = if (ratio - 1.0).abs() < 1e-14 {
            Spacing::Uniform
        } else {
            Spacing::Geometric { ratio }
        };
        Ok(Self { nodes, spacing })
    }

    /// Geometric grid whose last cell is `stretch` times its first, so that refining `n`
    /// keeps the same node mapping.
    pub fn stretched(a: f64, b: f64, n: usize, stretch: f64) -> Result<Self> {
        if !(stretch >= 1.0) || !stretch.is_finite() {
            return Err(Error::InvalidField(format!("stretch {stretch} must be >= 1")));
        }
        let ratio = if n > 2 { stretch.powf(1.0 / (n - 2) as f64) } else { 1.0 };
        Self::geometric(a, b, n, ratio)
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < MIN_GRID_NODES {
            return Err(Error::GridTooSmall { needed: MIN_GRID_NODES, got: nodes.len() });
        }
        check_increasing(&nodes)?;
        Ok(Self { nodes, spacing: Spacing::Custom })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.nodes[0]
    }

    pub fn last(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn max_step(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn min_step(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    /// Splits every cell into `k` equal sub-cells; original nodes land on indices `k*i`.
    pub fn refine(&self, k: usize) -> Self {
        let k = k.max(1);
        let mut nodes = Vec::with_capacity((self.len() - 1) * k + 1);
        for w in self.nodes.windows(2) {
            let h = (w[1] - w[0]) / k as f64;
            for s in 0..k {
                nodes.push(w[0] + h * s as f64);
            }
        }
        nodes.push(self.last());
        Self { nodes, spacing: if k == 1 { self.spacing } else { Spacing::Custom } }
    }

    /// Trapezoid weights.
    pub fn trapz_weights(&self) -> Vec<f64> {
        trapz_weights(&self.nodes)
    }

    /// Appends the nodes of `tail` lying strictly beyond the last node.
    pub fn extended_with(&self, tail: &[f64]) -> Self {
        let last = self.last();
        let h_last = self.nodes[self.len() - 1] - self.nodes[self.len() - 2];
        let mut nodes = self.nodes.clone();
        nodes.extend(tail.iter().copied().filter(|&t| t > last + 0.5 * h_last));
        Self { nodes, spacing: Spacing::Custom }
    }
}

pub fn check_increasing(nodes: &[f64]) -> Result<()> {
    for w in nodes.windows(2) {
        if !(w[1] > w[0]) || !w[0].is_finite() || !w[1].is_finite() {
            return Err(Error::InvalidField(format!(
                "nodes must be finite and strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

pub fn trapz_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let h = x[i + 1] - x[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainTag {
    /// Full channel in physical coordinates, y in [0, 2].
    Physical,
    /// Lower half channel, y in [0, 1].
    Half,
    /// Boundary-layer variable, y in [0, 1/sqrt(eps)].
    Scaled { eps: f64 },
    /// Half-line in the boundary-layer variable, truncated at some y_max.
    HalfLine,
    /// Von Mises variable.
    VonMises,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub gx: Grid1D,
    pub gy: Grid1D,
    pub tag: DomainTag,
}

impl Grid2D {
    pub fn new(gx: Grid1D, gy: Grid1D, tag: DomainTag) -> Result<Self> {
        let tol = 1e-12;
        let top = match tag {
            DomainTag::Physical => Some(2.0),
            DomainTag::Half => Some(1.0),
            DomainTag::Scaled { eps } => Some(1.0 / eps.sqrt()),
            DomainTag::HalfLine | DomainTag::VonMises => None,
        };
        if gy.first().abs() > tol {
            return Err(Error::GridMismatch(format!("y grid must start at 0, got {}", gy.first())));
        }
        if gx.first().abs() > tol {
            return Err(Error::GridMismatch(format!("x grid must start at 0, got {}", gx.first())));
        }
        if let Some(top) = top {
            if (gy.last() - top).abs() > tol * top.max(1.0) {
                return Err(Error::GridMismatch(format!(
                    "y grid ends at {} but domain {:?} ends at {}",
                    gy.last(),
                    tag,
                    top
                )));
            }
        }
        Ok(Self { gx, gy, tag })
    }

    pub fn nx(&self) -> usize {
        self.gx.len()
    }

    pub fn ny(&self) -> usize {
        self.gy.len()
    }

    pub fn x(&self) -> &[f64] {
        self.gx.nodes()
    }

    pub fn y(&self) -> &[f64] {
        self.gy.nodes()
    }

    pub fn len(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.ny() + j
    }

    pub fn same_nodes(&self, other: &Grid2D) -> bool {
        self.gx.nodes() == other.gx.nodes() && self.gy.nodes() == other.gy.nodes()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_grid_hits_endpoints_and_ratio() {
        let g = Grid1D::geometric(0.0, 5.0, 33, 1.04).unwrap();
        assert_eq!(g.first(), 0.0);
        assert_eq!(g.last(), 5.0);
        let h: Vec<f64> = g.nodes().windows(2).map(|w| w[1] - w[0]).collect();
        for w in h.windows(2).take(h.len() - 2) {
            assert!((w[1] / w[0] - 1.04).abs() < 1e-9);
        }
    }

    #[test]
    fn too_few_nodes_rejected() {
        assert!(matches!(Grid1D::uniform(0.0, 1.0, 5), Err(Error::GridTooSmall { .. })));
    }

    #[test]
    fn refine_keeps_original_nodes() {
        let g = Grid1D::geometric(0.0, 1.0, 9, 1.1).unwrap();
        let r = g.refine(4);
        assert_eq!(r.len(), 33);
        for i in 0..g.len() {
            assert!((r.nodes()[4 * i] - g.nodes()[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn scaled_tag_checks_top() {
        let gx = Grid1D::uniform(0.0, 1.0, 9).unwrap();
        let gy = Grid1D::uniform(0.0, 5.0, 9).unwrap();
        assert!(Grid2D::new(gx.clone(), gy.clone(), DomainTag::Scaled { eps: 0.04 }).is_ok());
        assert!(Grid2D::new(gx, gy, DomainTag::Scaled { eps: 0.01 }).is_err());
    }
}
