//! Exact Euclidean nearest-neighbour queries over a static point set.

use nalgebra::Point3;

use super::PointCloud;
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: u32,
        end: u32,
    },
    Split {
        axis: u8,
        value: f64,
        left: u32,
        right: u32,
    },
}

/// Kd-tree over a point cloud. Immutable after construction.
#[derive(Debug, Clone)]
pub struct NnIndex {
    points: Vec<Point3<f64>>,
    /// Original index of each entry of `points` (tree order).
    order: Vec<u32>,
    nodes: Vec<Node>,
}

impl NnIndex {
    pub fn build(cloud: &PointCloud) -> Result<Self> {
        Self::from_points(&cloud.points)
    }

    pub fn from_points(points: &[Point3<f64>]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1);
        build_node(points, &mut order, 0, points.len(), &mut nodes);
        let sorted = order.iter().map(|&i| points[i as usize]).collect();
        Ok(Self {
            points: sorted,
            order,
            nodes,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index (into the original cloud) and squared distance of the nearest point.
    /// Ties resolve to the lowest original index.
    pub fn nearest(&self, query: &Point3<f64>) -> (usize, f64) {
        let (slot, d2) = self.nearest_slot(query);
        (self.order[slot] as usize, d2)
    }

    /// Nearest point itself and its squared distance.
    pub fn nearest_point(&self, query: &Point3<f64>) -> (Point3<f64>, f64) {
        let (slot, d2) = self.nearest_slot(query);
        (self.points[slot], d2)
    }

    pub fn nearest_distance(&self, query: &Point3<f64>) -> f64 {
        self.nearest_slot(query).1.sqrt()
    }

    /// The `k` nearest points as (original index, squared distance), closest
    /// first; fewer if the index holds fewer points.
    pub fn k_nearest(&self, query: &Point3<f64>, k: usize) -> Vec<(usize, f64)> {
        let mut found: Vec<(f64, u32)> = Vec::with_capacity(k + 1);
        if k > 0 {
            self.search_k(0, query, k, &mut found);
        }
        found.into_iter().map(|(d2, i)| (i as usize, d2)).collect()
    }

    fn search_k(&self, node: usize, q: &Point3<f64>, k: usize, found: &mut Vec<(f64, u32)>) {
        let bound = |found: &Vec<(f64, u32)>| {
            if found.len() < k {
                f64::INFINITY
            } else {
                found[k - 1].0
            }
        };
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for slot in start as usize..end as usize {
                    let entry = ((self.points[slot] - q).norm_squared(), self.order[slot]);
                    if found.len() == k && entry >= found[k - 1] {
                        continue;
                    }
                    let at = found.partition_point(|e| *e < entry);
                    found.insert(at, entry);
                    found.truncate(k);
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search_k(near as usize, q, k, found);
                if diff * diff <= bound(found) {
                    self.search_k(far as usize, q, k, found);
                }
            }
        }
    }

    fn nearest_slot(&self, query: &Point3<f64>) -> (usize, f64) {
        let mut best = Best {
            slot: usize::MAX,
            original: u32::MAX,
            d2: f64::INFINITY,
        };
        self.search(0, query, &mut best);
        (best.slot, best.d2)
    }

    fn search(&self, node: usize, q: &Point3<f64>, best: &mut Best) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for k in start as usize..end as usize {
                    let d2 = (self.points[k] - q).norm_squared();
                    let original = self.order[k];
                    if d2 < best.d2 || (d2 == best.d2 && original < best.original) {
                        *best = Best {
                            slot: k,
                            original,
                            d2,
                        };
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near as usize, q, best);
                if diff * diff <= best.d2 {
                    self.search(far as usize, q, best);
                }
            }
        }
    }
}

struct Best {
    slot: usize,
    original: u32,
    d2: f64,
}

fn build_node(
    points: &[Point3<f64>],
    order: &mut [u32],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> u32 {
    let id = nodes.len() as u32;
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: start as u32,
            end: end as u32,
        });
        return id;
    }
    let slice = &mut order[start..end];
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in slice.iter() {
        let p = &points[i as usize];
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap();
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis].total_cmp(&points[b as usize][axis])
    });
    let value = points[slice[mid] as usize][axis];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    // Left holds coordinates <= value, right >= value; queries visit both sides when needed.
    let left = build_node(points, order, start, start + mid, nodes);
    let right = build_node(points, order, start + mid, end, nodes);
    nodes[id as usize] = Node::Split {
        axis: axis as u8,
        value,
        left,
        right,
    };
    id
}
