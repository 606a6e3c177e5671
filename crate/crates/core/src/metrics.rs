//! Evaluation metrics: OSPA between point sets, localization errors,
//! target-track identification and Monte Carlo aggregation.

use crate::geometry::Position;

/// OSPA order and cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OspaParams {
    pub order: f64,
    pub cutoff: f64,
}

impl Default for OspaParams {
    fn default() -> Self {
        Self { order: 1.0, cutoff: 10.0 }
    }
}

/// Minimum-cost assignment of every row to a distinct column.
///
/// Requires `rows <= cols`. Returns the column of each row and the total cost.
/// Shortest augmenting paths with row/column potentials, `O(rows^2 cols)`.
pub fn hungarian(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let m = cost[0].len();
    assert!(n <= m, "hungarian needs rows <= cols ({n} > {m})");

    // 1-based arrays; column 0 is a virtual start.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0; n];
    for j in 1..=m {
        if owner[j] != 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    let total = assignment.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    (assignment, total)
}

/// OSPA distance between two finite point sets.
pub fn ospa(estimated: &[Position], truth: &[Position], params: OspaParams) -> f64 {
    let (small, large) = if estimated.len() <= truth.len() { (estimated, truth) } else { (truth, estimated) };
    let n = large.len();
    if n == 0 {
        return 0.0;
    }
    let c = params.cutoff;
    let p = params.order;
    let cost: Vec<Vec<f64>> =
        small.iter().map(|a| large.iter().map(|b| a.distance(*b).min(c).powf(p)).collect()).collect();
    let (_, matched) = hungarian(&cost);
    let unmatched = (n - small.len()) as f64 * c.powf(p);
    ((matched + unmatched) / n as f64).powf(1.0 / p)
}

/// Minimum cumulative path length for a track to count as the moving target.
pub const TARGET_MIN_PATH_M: f64 = 5.0;

/// Total length of the polyline through `points`.
pub fn path_length(points: &[Position]) -> f64 {
    points.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// The track with the longest cumulative path, if that path exceeds
/// [`TARGET_MIN_PATH_M`]. Ties go to the first track seen.
pub fn identify_target<'a, I>(tracks: I) -> Option<u64>
where
    I: IntoIterator<Item = (&'a u64, &'a Vec<Position>)>,
{
    let mut best: Option<(u64, f64)> = None;
    for (&id, points) in tracks {
        if points.len() < 2 {
            continue;
        }
        let len = path_length(points);
        if best.is_none_or(|(_, l)| len > l) {
            best = Some((id, len));
        }
    }
    best.filter(|&(_, l)| l > TARGET_MIN_PATH_M).map(|(id, _)| id)
}

/// Per-step metrics of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub tx_error: Vec<f64>,
    /// `None` where no track was identified as the target.
    pub target_error: Vec<Option<f64>>,
    pub ospa: Vec<f64>,
    /// Step at which tracking started, if it did.
    pub stage_transition: Option<usize>,
}

/// Per-step means across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateMetrics {
    pub tx_error: Vec<f64>,
    pub target_error: Vec<f64>,
    pub ospa: Vec<f64>,
    pub stage_transition_mean: Option<f64>,
}

fn column_mean(runs: &[RunMetrics], f: impl Fn(&RunMetrics, usize) -> f64) -> Vec<f64> {
    let len = runs.iter().map(|r| r.tx_error.len()).min().unwrap_or(0);
    (0..len).map(|i| runs.iter().map(|r| f(r, i)).sum::<f64>() / runs.len() as f64).collect()
}

/// Elementwise means. Steps where a run has no identified target contribute
/// `cutoff` to the target error.
pub fn aggregate(runs: &[RunMetrics], cutoff: f64) -> AggregateMetrics {
    let transitions: Vec<f64> = runs.iter().filter_map(|r| r.stage_transition.map(|s| s as f64)).collect();
    AggregateMetrics {
        tx_error: column_mean(runs, |r, i| r.tx_error[i]),
        target_error: column_mean(runs, |r, i| r.target_error[i].unwrap_or(cutoff)),
        ospa: column_mean(runs, |r, i| r.ospa[i]),
        stage_transition_mean: (!transitions.is_empty())
            .then(|| transitions.iter().sum::<f64>() / transitions.len() as f64),
    }
}
