use crate::linalg::{self, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    /// Euclidean distance in mm.
    pub distance: f64,
}

/// Per query point: neighbors within the radius, nearest first, query excluded.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborIndex {
    pub radius: f64,
    pub max_neighbors: usize,
    lists: Vec<Vec<Neighbor>>,
}

impl NeighborIndex {
    pub fn neighbors(&self, query: usize) -> &[Neighbor] {
        &self.lists[query]
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[Neighbor]> {
        self.lists.iter().map(Vec::as_slice)
    }
}

fn cell_of(p: Vec3, size: f64) -> [i64; 3] {
    p.map(|c| (c / size).floor() as i64)
}

/// Points bucketed by grid cell. Cells are addressed densely over the
/// bounding box when that is small, otherwise through sorted cell keys.
enum Grid {
    Dense {
        min: [i64; 3],
        dims: [i64; 3],
        offsets: Vec<usize>,
        members: Vec<usize>,
    },
    Sparse {
        /// `(cell, point)` sorted by cell, then point.
        keyed: Vec<([i64; 3], usize)>,
    },
}

impl Grid {
    fn new(cells: &[[i64; 3]]) -> Grid {
        let mut min = [i64::MAX; 3];
        let mut max = [i64::MIN; 3];
        for c in cells {
            for d in 0..3 {
                min[d] = min[d].min(c[d]);
                max[d] = max[d].max(c[d]);
            }
        }
        let dims = [0, 1, 2].map(|d| max[d].saturating_sub(min[d]).saturating_add(1));
        let total = dims.iter().try_fold(1i64, |acc, &x| acc.checked_mul(x));
        let limit = (8 * cells.len()).max(64) as i64;
        match total {
            Some(total) if !cells.is_empty() && total <= limit => {
                let id = |c: &[i64; 3]| {
                    (((c[2] - min[2]) * dims[1] + (c[1] - min[1])) * dims[0] + (c[0] - min[0])) as usize
                };
                let mut offsets = vec![0usize; total as usize + 1];
                for c in cells {
                    offsets[id(c) + 1] += 1;
                }
                for i in 0..total as usize {
                    offsets[i + 1] += offsets[i];
                }
                let mut fill = offsets.clone();
                let mut members = vec![0; cells.len()];
                for (i, c) in cells.iter().enumerate() {
                    members[fill[id(c)]] = i;
                    fill[id(c)] += 1;
                }
                Grid::Dense {
                    min,
                    dims,
                    offsets,
                    members,
                }
            }
            _ => {
                let mut keyed: Vec<([i64; 3], usize)> =
                    cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
                keyed.sort_unstable();
                Grid::Sparse { keyed }
            }
        }
    }

    fn bucket(&self, c: [i64; 3]) -> &[usize] {
        match self {
            Grid::Dense {
                min,
                dims,
                offsets,
                members,
            } => {
                let mut id = 0i64;
                for d in (0..3).rev() {
                    let k = c[d] - min[d];
                    if k < 0 || k >= dims[d] {
                        return &[];
                    }
                    id = id * dims[d] + k;
                }
                let id = id as usize;
                &members[offsets[id]..offsets[id + 1]]
            }
            Grid::Sparse { .. } => unreachable!("sparse grids are scanned by key"),
        }
    }
}

/// Radius search over a uniform grid with cell size equal to `radius`.
///
/// Each list holds at most `max_neighbors` entries, ordered by ascending
/// distance with ties broken by lower point index.
pub fn radius_neighbors(points: &[Vec3], radius: f64, max_neighbors: usize) -> NeighborIndex {
    assert!(radius > 0.0, "radius must be positive");
    assert!(max_neighbors >= 1, "max_neighbors must be at least 1");

    let cells: Vec<[i64; 3]> = points.iter().map(|&p| cell_of(p, radius)).collect();
    let grid = Grid::new(&cells);
    // loose prefilter; the exact test below uses the same norm as callers
    let r2 = radius * radius * (1.0 + 1e-9);

    let lists = points
        .iter()
        .enumerate()
        .map(|(q, &p)| {
            let mut found = Vec::new();
            let mut visit = |j: usize| {
                if j == q {
                    return;
                }
                let diff = linalg::sub(points[j], p);
                if linalg::dot(diff, diff) > r2 {
                    return;
                }
                let d = linalg::norm(diff);
                if d <= radius {
                    found.push(Neighbor {
                        index: j,
                        distance: d,
                    });
                }
            };
            let c = cells[q];
            for dz in -1..=1 {
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let nc = [c[0] + dx, c[1] + dy, c[2] + dz];
                        match &grid {
                            Grid::Sparse { keyed } => {
                                let start = keyed.partition_point(|(k, _)| *k < nc);
                                for &(k, j) in &keyed[start..] {
                                    if k != nc {
                                        break;
                                    }
                                    visit(j);
                                }
                            }
                            dense => dense.bucket(nc).iter().for_each(|&j| visit(j)),
                        }
                    }
                }
            }
            // distances are non-negative, so their bit patterns order like the values
            found.sort_unstable_by_key(|n| (n.distance.to_bits(), n.index));
            found.truncate(max_neighbors);
            found
        })
        .collect();

    NeighborIndex {
        radius,
        max_neighbors,
        lists,
    }
}
