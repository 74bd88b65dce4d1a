use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Topology {
    #[default]
    Rectangular,
    /// Offset rows: odd rows are shifted right by half a cell and rows are
    /// √3/2 apart, so all six neighbors are at distance 1.
    Hexagonal,
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Topology::Rectangular => "rectangular",
            Topology::Hexagonal => "hexagonal",
        })
    }
}

impl FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rectangular" | "rect" => Ok(Topology::Rectangular),
            "hexagonal" | "hex" => Ok(Topology::Hexagonal),
            other => Err(Error::InvalidArgument(format!("unknown topology `{other}`"))),
        }
    }
}

/// Map geometry. Node `i` sits at row `i / cols`, column `i % cols`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub topology: Topology,
}

impl GridSpec {
    pub fn new(rows: usize, cols: usize, topology: Topology) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "grid must be at least 1x1, got {rows}x{cols}"
            )));
        }
        Ok(GridSpec { rows, cols, topology })
    }

    pub fn rectangular(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, Topology::Rectangular)
    }

    pub fn nodes(&self) -> usize {
        self.rows * self.cols
    }

    pub fn row_col(&self, i: usize) -> (usize, usize) {
        (i / self.cols, i % self.cols)
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    /// Planar position of a node as (x, y).
    pub fn position(&self, i: usize) -> (f64, f64) {
        let (r, c) = self.row_col(i);
        match self.topology {
            Topology::Rectangular => (c as f64, r as f64),
            Topology::Hexagonal => {
                let shift = if r % 2 == 1 { 0.5 } else { 0.0 };
                (c as f64 + shift, r as f64 * 3f64.sqrt() / 2.0)
            }
        }
    }

    /// Grid-adjacent nodes: 4-neighborhood on rectangular grids,
    /// 6-neighborhood on hexagonal ones. Sorted by index.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let (r, c) = self.row_col(i);
        let (r, c) = (r as isize, c as isize);
        let offsets: &[(isize, isize)] = match self.topology {
            Topology::Rectangular => &[(-1, 0), (0, -1), (0, 1), (1, 0)],
            Topology::Hexagonal if r % 2 == 0 => &[(-1, -1), (-1, 0), (0, -1), (0, 1), (1, -1), (1, 0)],
            Topology::Hexagonal => &[(-1, 0), (-1, 1), (0, -1), (0, 1), (1, 0), (1, 1)],
        };
        let mut out: Vec<usize> = offsets
            .iter()
            .map(|&(dr, dc)| (r + dr, c + dc))
            .filter(|&(rr, cc)| rr >= 0 && cc >= 0 && (rr as usize) < self.rows && (cc as usize) < self.cols)
            .map(|(rr, cc)| self.index(rr as usize, cc as usize))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn are_adjacent(&self, i: usize, j: usize) -> bool {
        i != j && map_distance(self, i, j) <= 1.0 + 1e-9
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{} {}", self.rows, self.cols, self.topology)
    }
}

/// Euclidean distance between two nodes' map positions.
pub fn map_distance(grid: &GridSpec, i: usize, j: usize) -> f64 {
    let (xi, yi) = grid.position(i);
    let (xj, yj) = grid.position(j);
    (xi - xj).hypot(yi - yj)
}

/// Gaussian neighborhood `exp(-d² / (2r))` where `d` is the map distance.
///
/// `r` is the width parameter itself, not a standard deviation: the
/// exponent divides by `2r`, not `2r²`.
pub fn neighborhood(grid: &GridSpec, i: usize, j: usize, r: f64) -> f64 {
    let d = map_distance(grid, i, j);
    gaussian(d * d, r)
}

#[inline]
pub(crate) fn gaussian(d2: f64, r: f64) -> f64 {
    (-d2 / (2.0 * r)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangular_distances() {
        let g = GridSpec::rectangular(5, 5).unwrap();
        assert_eq!(map_distance(&g, 7, 7), 0.0);
        assert_eq!(map_distance(&g, g.index(0, 0), g.index(0, 3)), 3.0);
        assert_eq!(map_distance(&g, g.index(0, 0), g.index(3, 4)), 5.0);
    }

    #[test]
    fn hexagonal_neighbors_are_unit_distance() {
        let g = GridSpec::new(4, 5, Topology::Hexagonal).unwrap();
        for i in 0..g.nodes() {
            let ns = g.neighbors(i);
            assert!(ns.len() <= 6);
            for &j in &ns {
                assert!((map_distance(&g, i, j) - 1.0).abs() < 1e-12);
                assert!(g.neighbors(j).contains(&i));
            }
        }
        assert_eq!(g.neighbors(g.index(1, 2)).len(), 6);
    }

    #[test]
    fn rectangular_neighbors() {
        let g = GridSpec::rectangular(3, 3).unwrap();
        assert_eq!(g.neighbors(4), vec![1, 3, 5, 7]);
        assert_eq!(g.neighbors(0), vec![1, 3]);
        assert!(g.are_adjacent(0, 1));
        assert!(!g.are_adjacent(0, 4));
    }

    #[test]
    fn neighborhood_values() {
        let g = GridSpec::rectangular(1, 5).unwrap();
        assert_eq!(neighborhood(&g, 2, 2, 0.7), 1.0);
        // d = 2, r = 2 → exp(-4/4)
        assert!((neighborhood(&g, 0, 2, 2.0) - (-1f64).exp()).abs() < 1e-15);
        // d² = 2r
        assert!((neighborhood(&g, 0, 1, 0.5) - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn bad_grid() {
        assert!(GridSpec::rectangular(0, 3).is_err());
        assert_eq!("hex".parse::<Topology>().unwrap(), Topology::Hexagonal);
    }
}
