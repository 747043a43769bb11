//! Correlation-based channel ordering for activation displays.
//!
//! Channels are clustered agglomeratively under the distance
//! `1 - |corr|`, then laid out with Bar-Joseph optimal leaf ordering:
//! among all leaf orders consistent with the merge tree, the one
//! minimizing the total distance between adjacent channels.

use std::collections::BTreeMap;

use ndarray::Array2;

use super::InterpretError;

/// `1 - |Pearson correlation|` over time. Identical rows have distance
/// zero; otherwise a constant (zero-variance) row is maximally distant
/// from everything, pushing dead channels to the edge of an ordering.
pub fn channel_distance(a: &[f64], b: &[f64]) -> Result<f64, InterpretError> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(InterpretError::Argument(format!(
            "rows must have equal lengths >= 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if !a.iter().chain(b).all(|v| v.is_finite()) {
        return Err(InterpretError::Argument("rows must be finite".into()));
    }
    if a == b {
        return Ok(0.0);
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(1.0);
    }
    // Rounding can push |corr| just past 1 for collinear rows.
    Ok((1.0 - (sab / (saa.sqrt() * sbb.sqrt())).abs()).clamp(0.0, 1.0))
}

/// Symmetric pairwise distances between the rows of `activations`
/// (row per channel, column per time step).
pub fn distance_matrix(activations: &Array2<f64>) -> Result<Array2<f64>, InterpretError> {
    let (n, t) = activations.dim();
    if n < 2 || t < 2 {
        return Err(InterpretError::Argument(format!(
            "need >= 2 channels and >= 2 time steps, got {n} x {t}"
        )));
    }
    let rows: Vec<Vec<f64>> = activations.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v = channel_distance(&rows[i], &rows[j])?;
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    Ok(d)
}

/// Cluster-distance update rule. Ward is deliberately absent: it needs
/// Euclidean coordinates, which a correlation dissimilarity lacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinkageMethod {
    #[default]
    Average,
    Complete,
    Single,
}

/// One agglomeration step. Leaves are nodes `0..n`; merge `k` creates
/// node `n + k`. `left < right` always.
#[derive(Debug, Clone, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
}

/// Merge tree over `n_leaves` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Linkage {
    pub n_leaves: usize,
    pub merges: Vec<Merge>,
}

fn check_distance_matrix(dist: &Array2<f64>) -> Result<(), InterpretError> {
    let (n, m) = dist.dim();
    if n != m || n < 2 {
        return Err(InterpretError::Argument(format!(
            "distance matrix must be square with >= 2 rows, got {n} x {m}"
        )));
    }
    for i in 0..n {
        if dist[[i, i]] != 0.0 {
            return Err(InterpretError::Argument(format!(
                "distance matrix diagonal must be zero, got {} at {i}",
                dist[[i, i]]
            )));
        }
        for j in 0..n {
            let v = dist[[i, j]];
            if !(v.is_finite() && v >= 0.0) {
                return Err(InterpretError::Argument(format!(
                    "distances must be finite and non-negative, got {v} at ({i}, {j})"
                )));
            }
            if v != dist[[j, i]] {
                return Err(InterpretError::Argument(format!(
                    "distance matrix must be symmetric, differs at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

/// Hierarchical agglomerative clustering via Lance-Williams updates.
/// Ties pick the first minimal pair in scan order, so the tree is
/// deterministic.
pub fn hac(dist: &Array2<f64>, method: LinkageMethod) -> Result<Linkage, InterpretError> {
    check_distance_matrix(dist)?;
    let n = dist.dim().0;
    let mut ids: Vec<usize> = (0..n).collect();
    let mut sizes: Vec<f64> = vec![1.0; n];
    let mut d: Vec<Vec<f64>> = dist.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut merges: Vec<Merge> = Vec::with_capacity(n - 1);
    while ids.len() > 1 {
        let (mut bi, mut bj) = (0, 1);
        for i in 0..ids.len() {
            for j in (i + 1)..ids.len() {
                if d[i][j] < d[bi][bj] {
                    (bi, bj) = (i, j);
                }
            }
        }
        let height = d[bi][bj];
        let (si, sj) = (sizes[bi], sizes[bj]);
        // The merged cluster takes over position bi.
        let merged: Vec<f64> = d[bi]
            .iter()
            .zip(&d[bj])
            .map(|(&di, &dj)| match method {
                LinkageMethod::Average => (si * di + sj * dj) / (si + sj),
                LinkageMethod::Complete => di.max(dj),
                LinkageMethod::Single => di.min(dj),
            })
            .collect();
        for (k, row) in d.iter_mut().enumerate() {
            if k != bi && k != bj {
                row[bi] = merged[k];
            }
        }
        d[bi] = merged;
        d[bi][bi] = 0.0;
        merges.push(Merge {
            left: ids[bi].min(ids[bj]),
            right: ids[bi].max(ids[bj]),
            height,
        });
        ids[bi] = n + merges.len() - 1;
        sizes[bi] = si + sj;
        ids.remove(bj);
        sizes.remove(bj);
        d.remove(bj);
        for row in &mut d {
            row.remove(bj);
        }
    }
    Ok(Linkage { n_leaves: n, merges })
}

/// [`hac`] with the default average linkage.
pub fn hac_average_linkage(dist: &Array2<f64>) -> Result<Linkage, InterpretError> {
    hac(dist, LinkageMethod::Average)
}

fn check_linkage(linkage: &Linkage) -> Result<(), InterpretError> {
    let n = linkage.n_leaves;
    if n < 2 || linkage.merges.len() != n - 1 {
        return Err(InterpretError::Argument(format!(
            "linkage over {n} leaves must have {} merges, got {}",
            n.saturating_sub(1),
            linkage.merges.len()
        )));
    }
    let mut used = vec![false; 2 * n - 1];
    for (k, m) in linkage.merges.iter().enumerate() {
        for child in [m.left, m.right] {
            if child >= n + k || used[child] {
                return Err(InterpretError::Argument(format!(
                    "merge {k}: node {child} is not an unused earlier node"
                )));
            }
            used[child] = true;
        }
        if m.left == m.right {
            return Err(InterpretError::Argument(format!("merge {k}: children coincide")));
        }
    }
    Ok(())
}

/// Leaf indices under every node, indexed by node id.
fn leaf_lists(linkage: &Linkage) -> Vec<Vec<usize>> {
    let n = linkage.n_leaves;
    let mut leaves: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for m in &linkage.merges {
        let mut combined = leaves[m.left].clone();
        combined.extend_from_slice(&leaves[m.right]);
        leaves.push(combined);
    }
    leaves
}

type OrderTable = BTreeMap<(usize, usize), (f64, (usize, usize))>;

/// Cost with endpoints (a, b); reversing an order preserves cost, so
/// each table stores one orientation. None when no consistent order of
/// the node's subtree has these endpoints (both under one child).
fn endpoint_cost(table: &OrderTable, a: usize, b: usize) -> Option<f64> {
    table.get(&(a, b)).or_else(|| table.get(&(b, a))).map(|e| e.0)
}

fn emit_order(
    tables: &[OrderTable],
    linkage: &Linkage,
    node: usize,
    l: usize,
    r: usize,
    out: &mut Vec<usize>,
) {
    let n = linkage.n_leaves;
    if node < n {
        out.push(node);
        return;
    }
    if let Some(&(_, (ml, mr))) = tables[node].get(&(l, r)) {
        let m = &linkage.merges[node - n];
        emit_order(tables, linkage, m.left, l, ml, out);
        emit_order(tables, linkage, m.right, mr, r, out);
    } else {
        // Stored orientation is (r, l); emit it and flip.
        let start = out.len();
        emit_order(tables, linkage, node, r, l, out);
        out[start..].reverse();
    }
}

/// Bar-Joseph optimal leaf ordering: among the `2^(n-1)` leaf orders
/// consistent with the merge tree, returns one minimizing the summed
/// distance between adjacent leaves, with its cost.
pub fn optimal_leaf_order(
    linkage: &Linkage,
    dist: &Array2<f64>,
) -> Result<(Vec<usize>, f64), InterpretError> {
    check_linkage(linkage)?;
    check_distance_matrix(dist)?;
    let n = linkage.n_leaves;
    if dist.dim().0 != n {
        return Err(InterpretError::Argument(format!(
            "distance matrix is {} x {} but linkage has {n} leaves",
            dist.dim().0,
            dist.dim().1
        )));
    }

    let leaves = leaf_lists(linkage);
    // tables[v][(l, r)]: best cost of v's subtree with leftmost leaf l
    // and rightmost leaf r, plus the inner leaf pair that achieves it.
    let mut tables: Vec<OrderTable> = Vec::with_capacity(2 * n - 1);
    for i in 0..n {
        tables.push(BTreeMap::from([((i, i), (0.0, (i, i)))]));
    }
    for (k, m) in linkage.merges.iter().enumerate() {
        let mut table = OrderTable::new();
        for &l in &leaves[m.left] {
            for &r in &leaves[m.right] {
                let mut best = (f64::INFINITY, (0, 0));
                for &ml in &leaves[m.left] {
                    let Some(cl) = endpoint_cost(&tables[m.left], l, ml) else {
                        continue;
                    };
                    for &mr in &leaves[m.right] {
                        let Some(cr) = endpoint_cost(&tables[m.right], mr, r) else {
                            continue;
                        };
                        let c = cl + dist[[ml, mr]] + cr;
                        if c < best.0 {
                            best = (c, (ml, mr));
                        }
                    }
                }
                table.insert((l, r), best);
            }
        }
        tables.push(table);
        debug_assert_eq!(tables.len() - 1, n + k);
    }

    let root = 2 * n - 2;
    let (&(l, r), &(cost, _)) = tables[root]
        .iter()
        .min_by(|a, b| a.1 .0.partial_cmp(&b.1 .0).expect("finite costs"))
        .expect("non-empty root table");
    let mut permutation = Vec::with_capacity(n);
    emit_order(&tables, linkage, root, l, r, &mut permutation);
    Ok((permutation, cost))
}

/// A display ordering for one layer's channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelOrdering {
    pub layer_name: String,
    /// `permutation[rank]` is the channel displayed at that rank.
    pub permutation: Vec<usize>,
    pub linkage: Linkage,
}

impl ChannelOrdering {
    pub fn csv(&self) -> String {
        let mut out = String::from("rank,channel\n");
        for (rank, ch) in self.permutation.iter().enumerate() {
            out.push_str(&format!("{rank},{ch}\n"));
        }
        out
    }
}

/// Distance matrix, clustering and optimal leaf ordering in one step.
pub fn order_channels(
    layer_name: &str,
    activations: &Array2<f64>,
    method: LinkageMethod,
) -> Result<ChannelOrdering, InterpretError> {
    let dist = distance_matrix(activations)?;
    let linkage = hac(&dist, method)?;
    let (permutation, _) = optimal_leaf_order(&linkage, &dist)?;
    Ok(ChannelOrdering { layer_name: layer_name.into(), permutation, linkage })
}

/// Flips every channel (row) whose mean over time is negative, so
/// predominantly negative traces read as positive activity. Returns
/// the adjusted trace and the per-channel flip mask. Idempotent, and
/// preserves per-element magnitudes.
pub fn normalize_lstm_signs(trace: &Array2<f64>) -> (Array2<f64>, Vec<bool>) {
    let mut out = trace.clone();
    let mut flips = Vec::with_capacity(trace.dim().0);
    for mut row in out.rows_mut() {
        let flip = row.mean().is_some_and(|m| m < 0.0);
        if flip {
            row.mapv_inplace(|v| -v);
        }
        flips.push(flip);
    }
    (out, flips)
}
