"""Numba kernel for exact path-dependent SHAP on one tree.

The recursion over (hot, cold) children is flattened onto an explicit stack.
Each frame owns a slice of the shared path buffers; a child's slice starts
past its parent's, so sibling subtrees can safely reuse the same region one
after the other. Node sample counts (covers) weight the off-path branches.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _extend(pf, pz, po, pw, off, ud, zero_frac, one_frac, feat_idx):
    pf[off + ud] = feat_idx
    pz[off + ud] = zero_frac
    po[off + ud] = one_frac
    pw[off + ud] = 1.0 if ud == 0 else 0.0
    for i in range(ud - 1, -1, -1):
        pw[off + i + 1] += one_frac * pw[off + i] * (i + 1.0) / (ud + 1.0)
        pw[off + i] = zero_frac * pw[off + i] * (ud - i) / (ud + 1.0)


@njit(cache=True, nogil=True)
def _unwind(pf, pz, po, pw, off, ud, path_index):
    one_frac = po[off + path_index]
    zero_frac = pz[off + path_index]
    next_one = pw[off + ud]
    for i in range(ud - 1, -1, -1):
        if one_frac != 0.0:
            tmp = pw[off + i]
            pw[off + i] = next_one * (ud + 1.0) / ((i + 1.0) * one_frac)
            next_one = tmp - pw[off + i] * zero_frac * (ud - i) / (ud + 1.0)
        else:
            pw[off + i] = pw[off + i] * (ud + 1.0) / (zero_frac * (ud - i))
    for i in range(path_index, ud):
        pf[off + i] = pf[off + i + 1]
        pz[off + i] = pz[off + i + 1]
        po[off + i] = po[off + i + 1]


@njit(cache=True, nogil=True)
def _unwound_sum(pz, po, pw, off, ud, path_index):
    one_frac = po[off + path_index]
    zero_frac = pz[off + path_index]
    next_one = pw[off + ud]
    total = 0.0
    for i in range(ud - 1, -1, -1):
        if one_frac != 0.0:
            tmp = next_one * (ud + 1.0) / ((i + 1.0) * one_frac)
            total += tmp
            next_one = pw[off + i] - tmp * zero_frac * (ud - i) / (ud + 1.0)
        else:
            total += pw[off + i] * (ud + 1.0) / (zero_frac * (ud - i))
    return total


@njit(cache=True, nogil=True)
def tree_shap_batch(left, right, feature, threshold, cover, values, Xb, phi):
    """Accumulate unscaled per-feature attributions of one tree into phi.

    Xb: (n_rows, n_features) binned rows; phi: (n_rows, n_features) in/out.
    """
    n_nodes = left.shape[0]
    # longest root-to-leaf chain bounds the path buffers
    depth = np.zeros(n_nodes, dtype=np.int64)
    max_depth = 0
    for node in range(n_nodes):
        if feature[node] >= 0:
            depth[left[node]] = depth[node] + 1
            depth[right[node]] = depth[node] + 1
    for node in range(n_nodes):
        if depth[node] > max_depth:
            max_depth = depth[node]

    buf = (max_depth + 3) * (max_depth + 4) // 2 + 8
    pf = np.empty(buf, dtype=np.int64)
    pz = np.empty(buf, dtype=np.float64)
    po = np.empty(buf, dtype=np.float64)
    pw = np.empty(buf, dtype=np.float64)
    cap = 2 * max_depth + 8
    st_node = np.empty(cap, dtype=np.int64)
    st_ud = np.empty(cap, dtype=np.int64)
    st_off = np.empty(cap, dtype=np.int64)
    st_copy = np.empty(cap, dtype=np.int64)
    st_pz = np.empty(cap, dtype=np.float64)
    st_po = np.empty(cap, dtype=np.float64)
    st_pf = np.empty(cap, dtype=np.int64)

    for row in range(Xb.shape[0]):
        xb = Xb[row]
        out = phi[row]
        top = 0
        st_node[top] = 0
        st_ud[top] = 0
        st_off[top] = 0
        st_copy[top] = -1
        st_pz[top] = 1.0
        st_po[top] = 1.0
        st_pf[top] = -1
        top = 1
        while top > 0:
            top -= 1
            node = st_node[top]
            ud = st_ud[top]
            off = st_off[top]
            cfrom = st_copy[top]
            if cfrom >= 0:
                for i in range(ud):
                    pf[off + i] = pf[cfrom + i]
                    pz[off + i] = pz[cfrom + i]
                    po[off + i] = po[cfrom + i]
                    pw[off + i] = pw[cfrom + i]
            _extend(pf, pz, po, pw, off, ud, st_pz[top], st_po[top], st_pf[top])

            if feature[node] < 0:
                leaf_value = values[node]
                for i in range(1, ud + 1):
                    w = _unwound_sum(pz, po, pw, off, ud, i)
                    out[pf[off + i]] += w * (po[off + i] - pz[off + i]) * leaf_value
                continue

            f = feature[node]
            if xb[f] <= threshold[node]:
                hot, cold = left[node], right[node]
            else:
                hot, cold = right[node], left[node]
            hot_zero = cover[hot] / cover[node]
            cold_zero = cover[cold] / cover[node]
            incoming_zero = 1.0
            incoming_one = 1.0
            found = -1
            for i in range(ud + 1):
                if pf[off + i] == f:
                    found = i
                    break
            eff = ud
            if found >= 0:
                incoming_zero = pz[off + found]
                incoming_one = po[off + found]
                _unwind(pf, pz, po, pw, off, ud, found)
                eff = ud - 1
            child_ud = eff + 1
            child_off = off + eff + 2
            st_node[top] = cold
            st_ud[top] = child_ud
            st_off[top] = child_off
            st_copy[top] = off
            st_pz[top] = cold_zero * incoming_zero
            st_po[top] = 0.0
            st_pf[top] = f
            top += 1
            st_node[top] = hot
            st_ud[top] = child_ud
            st_off[top] = child_off
            st_copy[top] = off
            st_pz[top] = hot_zero * incoming_zero
            st_po[top] = incoming_one
            st_pf[top] = f
            top += 1
