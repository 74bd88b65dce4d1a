use ndarray::Array2;

use crate::som::SomModel;

/// One value per node: the mean distance between its weight and the weights
/// of its grid neighbors. High values mark borders between trends.
#[derive(Debug, Clone, PartialEq)]
pub struct UMatrix {
    /// `rows × cols`, laid out like the map.
    pub values: Array2<f64>,
}

/// Edge nodes average over the neighbors they have; a node without
/// neighbors (1×1 map) gets 0.
pub fn compute_umatrix(model: &SomModel) -> UMatrix {
    let grid = &model.grid;
    let mut values = Array2::zeros((grid.rows, grid.cols));
    for i in 0..grid.nodes() {
        let neighbors = grid.neighbors(i);
        if neighbors.is_empty() {
            continue;
        }
        let wi = model.weight(i);
        let total: f64 = neighbors
            .iter()
            .map(|&j| {
                let wj = model.weight(j);
                wi.iter().zip(wj.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
            })
            .sum();
        let (r, c) = grid.row_col(i);
        values[[r, c]] = total / neighbors.len() as f64;
    }
    UMatrix { values }
}
