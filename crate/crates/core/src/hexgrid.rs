//! Hexagonal grid topology.
//!
//! Nodes sit at the centres of a `rows × cols` patch of regular hexagons laid
//! out in odd-row offset coordinates (pointy-top, odd rows shifted right by
//! half a cell). For a node at `(r, c)` the six candidate neighbours are
//!
//! ```text
//! even r:  (r-1, c-1) (r-1, c)        odd r:  (r-1, c) (r-1, c+1)
//!          (r,   c-1) (r,   c+1)              (r,   c-1) (r,   c+1)
//!          (r+1, c-1) (r+1, c)                (r+1, c) (r+1, c+1)
//! ```
//!
//! Candidates outside the grid are dropped, so boundary nodes have fewer
//! than six neighbours and every node off the first/last row and column has
//! exactly six.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("invalid grid dimensions {rows}x{cols}: both must be at least 1")]
    InvalidDimension { rows: usize, cols: usize },
    #[error("node ({row}, {col}) is outside the {rows}x{cols} grid")]
    InvalidNode {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
}

/// Position of a sensor node. Ordering is row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub row: usize,
    pub col: usize,
}

impl NodeId {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

/// Immutable node set and adjacency of a hexagonal grid.
///
/// Nodes are addressed either by [`NodeId`] or by their dense row-major
/// index `row * cols + col`; neighbour lists are kept sorted in row-major
/// order so every traversal is deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridTopology {
    rows: usize,
    cols: usize,
    adjacency: Vec<Vec<usize>>,
    nodes: Vec<NodeId>,
    neighbor_ids: Vec<Vec<NodeId>>,
}

const EVEN_ROW_OFFSETS: [(isize, isize); 6] = [(-1, -1), (-1, 0), (0, -1), (0, 1), (1, -1), (1, 0)];
const ODD_ROW_OFFSETS: [(isize, isize); 6] = [(-1, 0), (-1, 1), (0, -1), (0, 1), (1, 0), (1, 1)];

impl GridTopology {
    pub fn new(rows: usize, cols: usize) -> Result<Self, GridError> {
        if rows == 0 || cols == 0 {
            return Err(GridError::InvalidDimension { rows, cols });
        }
        let n = rows * cols;
        let mut adjacency = Vec::with_capacity(n);
        for row in 0..rows {
            let offsets = if row % 2 == 0 {
                &EVEN_ROW_OFFSETS
            } else {
                &ODD_ROW_OFFSETS
            };
            for col in 0..cols {
                let mut list: Vec<usize> = offsets
                    .iter()
                    .filter_map(|&(dr, dc)| {
                        let r = row.checked_add_signed(dr)?;
                        let c = col.checked_add_signed(dc)?;
                        (r < rows && c < cols).then_some(r * cols + c)
                    })
                    .collect();
                list.sort_unstable();
                adjacency.push(list);
            }
        }
        let nodes: Vec<NodeId> = (0..n).map(|i| NodeId::new(i / cols, i % cols)).collect();
        let neighbor_ids = adjacency
            .iter()
            .map(|list| list.iter().map(|&j| nodes[j]).collect())
            .collect();
        Ok(Self {
            rows,
            cols,
            adjacency,
            nodes,
            neighbor_ids,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of nodes, `|R|`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// All nodes in row-major order.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.row < self.rows && node.col < self.cols
    }

    pub fn index_of(&self, node: NodeId) -> Result<usize, GridError> {
        if self.contains(node) {
            Ok(node.row * self.cols + node.col)
        } else {
            Err(GridError::InvalidNode {
                row: node.row,
                col: node.col,
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    pub fn node_at(&self, index: usize) -> NodeId {
        self.nodes[index]
    }

    /// The adjacent set `B(N)`.
    pub fn neighbors(&self, node: NodeId) -> Result<&[NodeId], GridError> {
        let i = self.index_of(node)?;
        Ok(&self.neighbor_ids[i])
    }

    /// Neighbour indices of the node with dense index `index`.
    pub fn neighbor_indices(&self, index: usize) -> &[usize] {
        &self.adjacency[index]
    }

    /// Neighbour count `k(N)`.
    pub fn degree(&self, node: NodeId) -> Result<usize, GridError> {
        Ok(self.neighbors(node)?.len())
    }

    pub fn degree_of_index(&self, index: usize) -> usize {
        self.adjacency[index].len()
    }

    /// Count of nodes per degree `0..=6`.
    pub fn degree_histogram(&self) -> [usize; 7] {
        let mut hist = [0usize; 7];
        for list in &self.adjacency {
            hist[list.len()] += 1;
        }
        hist
    }

    /// Degrees that actually occur in this grid, ascending.
    pub fn distinct_degrees(&self) -> Vec<usize> {
        self.degree_histogram()
            .iter()
            .enumerate()
            .filter(|(_, &count)| count > 0)
            .map(|(k, _)| k)
            .collect()
    }
}
