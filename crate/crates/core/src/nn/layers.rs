//! Per-layer forward and backward passes over a [`Hop`].

use ndarray::{concatenate, s, Array2, ArrayView2, Axis, Zip};

use super::{Hop, LayerKind, LayerSpec, Real};

const LEAKY_SLOPE: f64 = 0.2;

/// Values saved by the forward pass for the backward pass.
#[derive(Debug, Clone)]
pub(crate) enum LayerCache<F: Real> {
    Dense {
        z: Array2<F>,
    },
    Gcn {
        combined: Array2<F>,
        z: Array2<F>,
    },
    Sage {
        combined: Array2<F>,
        z: Array2<F>,
        pool_rows: Vec<usize>,
        pool_pre: Array2<F>,
        /// Winning row (index into `pool_rows`) per output row and pool unit;
        /// `usize::MAX` for rows without neighbours.
        argmax: Array2<usize>,
    },
    Gat {
        hh: Array2<F>,
        /// Softmax weights laid out `[(offset(i) + i + j) * heads + k]`, where
        /// candidate `j = 0` is the node itself.
        alpha: Vec<F>,
        pre: Vec<F>,
        z: Array2<F>,
    },
}

fn gather<F: Real>(x: &Array2<F>, hop: &Hop) -> Array2<F> {
    if hop.is_identity() {
        x.clone()
    } else {
        x.select(Axis(0), hop.self_indices())
    }
}

fn scatter_rows<F: Real>(dst: &mut Array2<F>, rows: &[usize], src: ArrayView2<F>) {
    for (r, &i) in rows.iter().enumerate() {
        let mut d = dst.row_mut(i);
        d += &src.row(r);
    }
}

fn relu<F: Real>(z: &Array2<F>) -> Array2<F> {
    z.mapv(|v| if v > F::zero() { v } else { F::zero() })
}

fn leaky<F: Real>(v: F) -> F {
    if v > F::zero() {
        v
    } else {
        v * F::lit(LEAKY_SLOPE)
    }
}

fn mean_neighbors<F: Real>(x: &Array2<F>, hop: &Hop) -> Array2<F> {
    let mut m = Array2::zeros((hop.len(), x.ncols()));
    for i in 0..hop.len() {
        let nb = hop.neighbors(i);
        if nb.is_empty() {
            continue;
        }
        let mut row = m.row_mut(i);
        for &u in nb {
            row += &x.row(u);
        }
        let inv = F::one() / F::from_usize(nb.len()).unwrap();
        row.mapv_inplace(|v| v * inv);
    }
    m
}

/// Element-wise max of pooled rows over each neighbour list, with argmax.
fn max_pool<F: Real>(
    pooled: &Array2<F>,
    pos: &dyn Fn(usize) -> usize,
    hop: &Hop,
) -> (Array2<F>, Array2<usize>) {
    let width = pooled.ncols();
    let mut out = Array2::zeros((hop.len(), width));
    let mut arg = Array2::from_elem((hop.len(), width), usize::MAX);
    for i in 0..hop.len() {
        let nb = hop.neighbors(i);
        let Some((&first, rest)) = nb.split_first() else {
            continue;
        };
        let p0 = pos(first);
        out.row_mut(i).assign(&pooled.row(p0));
        arg.row_mut(i).fill(p0);
        for &u in rest {
            let pu = pos(u);
            let src = pooled.row(pu);
            for j in 0..width {
                if src[j] > out[[i, j]] {
                    out[[i, j]] = src[j];
                    arg[[i, j]] = pu;
                }
            }
        }
    }
    (out, arg)
}

/// Rows of `x` that appear in any neighbour list, sorted, plus a lookup
/// from source row to position.
fn pool_rows(hop: &Hop, src_len: usize) -> (Vec<usize>, Vec<usize>) {
    let mut pos = vec![usize::MAX; src_len];
    let mut rows: Vec<usize> = hop.all_neighbors().to_vec();
    rows.sort_unstable();
    rows.dedup();
    for (p, &r) in rows.iter().enumerate() {
        pos[r] = p;
    }
    (rows, pos)
}

/// Per-head attention logits `Σ_f hh[u, k·f + t] · a[k, t]` for every row.
fn head_scores<F: Real>(hh: &Array2<F>, a: &Array2<F>) -> Array2<F> {
    let (heads, f) = a.dim();
    let mut out = Array2::zeros((hh.nrows(), heads));
    for u in 0..hh.nrows() {
        for k in 0..heads {
            let seg = hh.slice(s![u, k * f..(k + 1) * f]);
            out[[u, k]] = seg.dot(&a.row(k));
        }
    }
    out
}

pub(crate) fn forward<F: Real>(
    layer: &LayerSpec,
    t: &[Array2<F>],
    x: &Array2<F>,
    hop: &Hop,
) -> (Array2<F>, LayerCache<F>) {
    let n = hop.len();
    let (z, cache) = match layer.kind {
        LayerKind::Dense => {
            let xs = gather(x, hop);
            let z = xs.dot(&t[0]) + &t[1];
            (z.clone(), LayerCache::Dense { z })
        }
        LayerKind::Gcn => {
            let xs = gather(x, hop);
            let m = mean_neighbors(x, hop);
            let combined = concatenate![Axis(1), xs, m];
            let z = combined.dot(&t[0]);
            (z.clone(), LayerCache::Gcn { combined, z })
        }
        LayerKind::Sage { .. } => {
            let xs = gather(x, hop);
            let (rows, pos) = pool_rows(hop, x.nrows());
            let xp = x.select(Axis(0), &rows);
            let pool_pre = xp.dot(&t[0]) + &t[1];
            let pooled = relu(&pool_pre);
            let (m, argmax) = max_pool(&pooled, &|u| pos[u], hop);
            let combined = concatenate![Axis(1), xs, m];
            let z = combined.dot(&t[2]);
            (
                z.clone(),
                LayerCache::Sage {
                    combined,
                    z,
                    pool_rows: rows,
                    pool_pre,
                    argmax,
                },
            )
        }
        LayerKind::Gat { heads } => {
            let f = layer.out_dim / heads;
            let hh = x.dot(&t[0]);
            let es = head_scores(&hh, &t[1]);
            let ed = head_scores(&hh, &t[2]);
            let total = hop.total_neighbors() + n;
            let mut alpha = vec![F::zero(); total * heads];
            let mut pre = vec![F::zero(); total * heads];
            let mut z = Array2::zeros((n, layer.out_dim));
            let mut cand = Vec::new();
            for i in 0..n {
                let own = hop.self_index(i);
                cand.clear();
                cand.push(own);
                cand.extend_from_slice(hop.neighbors(i));
                let base = hop.offset(i) + i;
                for k in 0..heads {
                    let mut mx = F::neg_infinity();
                    for (j, &c) in cand.iter().enumerate() {
                        let p = ed[[own, k]] + es[[c, k]];
                        pre[(base + j) * heads + k] = p;
                        mx = mx.max(leaky(p));
                    }
                    let mut sum = F::zero();
                    for j in 0..cand.len() {
                        let e = (leaky(pre[(base + j) * heads + k]) - mx).exp();
                        alpha[(base + j) * heads + k] = e;
                        sum += e;
                    }
                    let mut zk = z.slice_mut(s![i, k * f..(k + 1) * f]);
                    for (j, &c) in cand.iter().enumerate() {
                        let a = alpha[(base + j) * heads + k] / sum;
                        alpha[(base + j) * heads + k] = a;
                        Zip::from(&mut zk)
                            .and(hh.slice(s![c, k * f..(k + 1) * f]))
                            .for_each(|o, &h| *o += a * h);
                    }
                }
            }
            (z.clone(), LayerCache::Gat { hh, alpha, pre, z })
        }
    };
    let mut out = if layer.relu { relu(&z) } else { z };
    if layer.residual {
        for i in 0..n {
            let mut row = out.row_mut(i);
            row += &x.row(hop.self_index(i));
        }
    }
    (out, cache)
}

fn relu_mask<F: Real>(mut d: Array2<F>, z: &Array2<F>) -> Array2<F> {
    Zip::from(&mut d).and(z).for_each(|g, &v| {
        if v <= F::zero() {
            *g = F::zero();
        }
    });
    d
}

/// Returns the parameter gradients of this layer and, when `need_dx`, the
/// gradient with respect to the layer input `x`.
pub(crate) fn backward<F: Real>(
    layer: &LayerSpec,
    t: &[Array2<F>],
    x: &Array2<F>,
    hop: &Hop,
    cache: &LayerCache<F>,
    d_out: &Array2<F>,
    need_dx: bool,
) -> (Vec<Array2<F>>, Option<Array2<F>>) {
    let n = hop.len();
    let din = layer.in_dim;
    let mut dx = need_dx.then(|| Array2::<F>::zeros(x.raw_dim()));
    if layer.residual {
        if let Some(dx) = dx.as_mut() {
            scatter_rows(dx, hop.self_indices(), d_out.view());
        }
    }
    let mask = |z: &Array2<F>| {
        if layer.relu {
            relu_mask(d_out.clone(), z)
        } else {
            d_out.clone()
        }
    };
    match cache {
        LayerCache::Dense { z } => {
            let dz = mask(z);
            let xs = gather(x, hop);
            let dw = xs.t().dot(&dz);
            let db = dz.sum_axis(Axis(0)).insert_axis(Axis(0));
            if let Some(dx) = dx.as_mut() {
                let dxs = dz.dot(&t[0].t());
                scatter_rows(dx, hop.self_indices(), dxs.view());
            }
            (vec![dw, db], dx)
        }
        LayerCache::Gcn { combined, z } => {
            let dz = mask(z);
            let dw = combined.t().dot(&dz);
            if let Some(dx) = dx.as_mut() {
                let dc = dz.dot(&t[0].t());
                scatter_rows(dx, hop.self_indices(), dc.slice(s![.., ..din]));
                for i in 0..n {
                    let nb = hop.neighbors(i);
                    if nb.is_empty() {
                        continue;
                    }
                    let inv = F::one() / F::from_usize(nb.len()).unwrap();
                    let g = dc.slice(s![i, din..]).mapv(|v| v * inv);
                    for &u in nb {
                        let mut row = dx.row_mut(u);
                        row += &g;
                    }
                }
            }
            (vec![dw], dx)
        }
        LayerCache::Sage {
            combined,
            z,
            pool_rows,
            pool_pre,
            argmax,
        } => {
            let dz = mask(z);
            let dw = combined.t().dot(&dz);
            let dc = dz.dot(&t[2].t());
            if let Some(dx) = dx.as_mut() {
                scatter_rows(dx, hop.self_indices(), dc.slice(s![.., ..din]));
            }
            let dm = dc.slice(s![.., din..]);
            let mut dpool = Array2::<F>::zeros(pool_pre.raw_dim());
            for ((i, j), &a) in argmax.indexed_iter() {
                if a != usize::MAX {
                    dpool[[a, j]] += dm[[i, j]];
                }
            }
            let dpre = relu_mask(dpool, pool_pre);
            let xp = x.select(Axis(0), pool_rows);
            let dwp = xp.t().dot(&dpre);
            let dbp = dpre.sum_axis(Axis(0)).insert_axis(Axis(0));
            if let Some(dx) = dx.as_mut() {
                let dxp = dpre.dot(&t[0].t());
                scatter_rows(dx, pool_rows, dxp.view());
            }
            (vec![dwp, dbp, dw], dx)
        }
        LayerCache::Gat { hh, alpha, pre, z } => {
            let LayerKind::Gat { heads } = layer.kind else {
                unreachable!("attention cache on a non-attention layer")
            };
            let f = layer.out_dim / heads;
            let dz = mask(z);
            let (a_src, a_dst) = (&t[1], &t[2]);
            let mut dhh = Array2::<F>::zeros(hh.raw_dim());
            let mut des = Array2::<F>::zeros((hh.nrows(), heads));
            let mut ded = Array2::<F>::zeros((hh.nrows(), heads));
            let slope = F::lit(LEAKY_SLOPE);
            let mut cand = Vec::new();
            let mut dalpha = Vec::new();
            for i in 0..n {
                let own = hop.self_index(i);
                cand.clear();
                cand.push(own);
                cand.extend_from_slice(hop.neighbors(i));
                let base = hop.offset(i) + i;
                for k in 0..heads {
                    let g = dz.slice(s![i, k * f..(k + 1) * f]);
                    dalpha.clear();
                    let mut weighted = F::zero();
                    for (j, &c) in cand.iter().enumerate() {
                        let a = alpha[(base + j) * heads + k];
                        let da = g.dot(&hh.slice(s![c, k * f..(k + 1) * f]));
                        dalpha.push(da);
                        weighted += a * da;
                        let mut dh = dhh.slice_mut(s![c, k * f..(k + 1) * f]);
                        Zip::from(&mut dh).and(&g).for_each(|o, &gv| *o += a * gv);
                    }
                    for (j, &c) in cand.iter().enumerate() {
                        let idx = (base + j) * heads + k;
                        let de = alpha[idx] * (dalpha[j] - weighted);
                        let dp = if pre[idx] > F::zero() { de } else { de * slope };
                        ded[[own, k]] += dp;
                        des[[c, k]] += dp;
                    }
                }
            }
            let mut da_src = Array2::<F>::zeros(a_src.raw_dim());
            let mut da_dst = Array2::<F>::zeros(a_dst.raw_dim());
            for u in 0..hh.nrows() {
                for k in 0..heads {
                    let (gs, gd) = (des[[u, k]], ded[[u, k]]);
                    if gs == F::zero() && gd == F::zero() {
                        continue;
                    }
                    let seg = hh.slice(s![u, k * f..(k + 1) * f]);
                    Zip::from(da_src.row_mut(k)).and(&seg).for_each(|o, &h| *o += gs * h);
                    Zip::from(da_dst.row_mut(k)).and(&seg).for_each(|o, &h| *o += gd * h);
                    let mut dh = dhh.slice_mut(s![u, k * f..(k + 1) * f]);
                    Zip::from(&mut dh)
                        .and(a_src.row(k))
                        .and(a_dst.row(k))
                        .for_each(|o, &as_, &ad| *o += gs * as_ + gd * ad);
                }
            }
            let dw = x.t().dot(&dhh);
            if let Some(dx) = dx.as_mut() {
                *dx += &dhh.dot(&t[0].t());
            }
            (vec![dw, da_src, da_dst], dx)
        }
    }
}

impl<F: Real> LayerCache<F> {
    /// Every branch decision taken by the forward pass: activation signs and
    /// max-pool winners. Two passes with equal patterns lie on the same
    /// smooth piece of the loss.
    pub(crate) fn branch_pattern(&self) -> Vec<usize> {
        let signs = |a: &mut dyn Iterator<Item = F>| a.map(|v| (v > F::zero()) as usize).collect::<Vec<_>>();
        match self {
            LayerCache::Dense { z } | LayerCache::Gcn { z, .. } => signs(&mut z.iter().copied()),
            LayerCache::Sage {
                z, pool_pre, argmax, ..
            } => {
                let mut p = signs(&mut z.iter().copied());
                p.extend(signs(&mut pool_pre.iter().copied()));
                p.extend(argmax.iter().copied());
                p
            }
            LayerCache::Gat { pre, z, .. } => {
                let mut p = signs(&mut z.iter().copied());
                p.extend(signs(&mut pre.iter().copied()));
                p
            }
        }
    }
}
