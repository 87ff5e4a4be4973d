use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::Emitter;

use super::metrics::ConfusionCounts;

/// Matching radius in fine-grid pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchTolerance {
    pub delta: f64,
}

impl MatchTolerance {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::invalid(format!(
                "tolerance must be positive, got {delta}"
            )));
        }
        Ok(Self { delta })
    }

    pub fn standard() -> [MatchTolerance; 3] {
        [2.0, 4.0, 6.0].map(|delta| MatchTolerance { delta })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// `(gt index, estimate index)` of every matched pair, sorted by GT index.
    pub pairs: Vec<(usize, usize)>,
}

impl MatchResult {
    /// Confusion counts on a frame of `n_pixels` fine-grid pixels.
    pub fn counts(&self, n_pixels: usize) -> ConfusionCounts {
        ConfusionCounts::from_matching(self.tp, self.fp, self.fn_, n_pixels)
    }
}

/// Maximum-cardinality matching of ground truth to estimates, with an edge
/// wherever the distance is strictly below `tol.delta * pixel_size`.
///
/// Hopcroft-Karp with adjacency lists in index order, so the pairing is a
/// deterministic function of the input order.
pub fn match_emitters(
    gt: &[Emitter],
    est: &[Emitter],
    tol: MatchTolerance,
    pixel_size: f64,
) -> MatchResult {
    let radius = tol.delta * pixel_size;
    let adj: Vec<Vec<usize>> = gt
        .iter()
        .map(|g| {
            est.iter()
                .enumerate()
                .filter(|(_, e)| g.distance_to(e) < radius)
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    let pairs = hopcroft_karp(&adj, est.len());
    let tp = pairs.len();
    MatchResult {
        tp,
        fp: est.len() - tp,
        fn_: gt.len() - tp,
        pairs,
    }
}

const NIL: usize = usize::MAX;

fn hopcroft_karp(adj: &[Vec<usize>], n_right: usize) -> Vec<(usize, usize)> {
    let n_left = adj.len();
    let mut match_l = vec![NIL; n_left];
    let mut match_r = vec![NIL; n_right];
    let mut dist = vec![0usize; n_left];

    loop {
        // BFS from free left vertices builds the layered graph.
        let mut queue = VecDeque::new();
        for u in 0..n_left {
            if match_l[u] == NIL {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                let w = match_r[v];
                if w == NIL {
                    found = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            break;
        }
        for u in 0..n_left {
            if match_l[u] == NIL {
                augment(u, adj, &mut match_l, &mut match_r, &mut dist);
            }
        }
    }

    match_l
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != NIL)
        .map(|(u, v)| (u, *v))
        .collect()
}

fn augment(
    u: usize,
    adj: &[Vec<usize>],
    match_l: &mut [usize],
    match_r: &mut [usize],
    dist: &mut [usize],
) -> bool {
    for &v in &adj[u] {
        let w = match_r[v];
        let ok = if w == NIL {
            true
        } else if dist[w] == dist[u].wrapping_add(1) {
            augment(w, adj, match_l, match_r, dist)
        } else {
            false
        };
        if ok {
            match_l[u] = v;
            match_r[v] = u;
            return true;
        }
    }
    dist[u] = usize::MAX;
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(x: f64, y: f64) -> Emitter {
        Emitter::new(x, y, 1.0)
    }

    const TOL: MatchTolerance = MatchTolerance { delta: 2.0 };

    #[test]
    fn identical_sets_match_fully() {
        let pts = vec![e(10.0, 10.0), e(300.0, 40.0), e(55.0, 500.0)];
        let m = match_emitters(&pts, &pts, TOL, 25.0);
        assert_eq!((m.tp, m.fp, m.fn_), (3, 0, 0));
        assert_eq!(m.pairs, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn one_gt_two_candidates() {
        let m = match_emitters(&[e(0.0, 0.0)], &[e(10.0, 0.0), e(0.0, 20.0)], TOL, 25.0);
        assert_eq!((m.tp, m.fp, m.fn_), (1, 1, 0));
    }

    #[test]
    fn distance_must_be_strictly_below() {
        let m = match_emitters(&[e(0.0, 0.0)], &[e(50.0, 0.0)], TOL, 25.0);
        assert_eq!(m.tp, 0);
        let m = match_emitters(&[e(0.0, 0.0)], &[e(49.999, 0.0)], TOL, 25.0);
        assert_eq!(m.tp, 1);
    }

    #[test]
    fn augmenting_path_beats_greedy() {
        // gt0 can reach est0 and est1, gt1 only est0; greedy in index order
        // would pair gt0-est0 and leave gt1 alone.
        let gt = [e(0.0, 0.0), e(-40.0, 0.0)];
        let est = [e(-10.0, 0.0), e(40.0, 0.0)];
        let m = match_emitters(&gt, &est, TOL, 25.0);
        assert_eq!(m.tp, 2);
        assert_eq!(m.pairs, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn tolerance_validation() {
        assert!(MatchTolerance::new(0.0).is_err());
        assert!(MatchTolerance::new(2.0).is_ok());
    }
}
