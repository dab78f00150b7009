"""Compiled inner loops for tree growth, routing and class-vector sums.

Randomness is never generated here: callers pass a matrix of uniforms
drawn from a numpy Generator, one row per node in creation order, so the
kernels stay deterministic and reentrant.
"""

import numpy as np
from numba import njit

@njit(cache=True, nogil=True)
def _spread(X, idx, lo, hi, cand, fmin, fmax):
    """Collect features that vary over rows idx[lo:hi]; returns their count."""
    d = X.shape[1]
    for f in range(d):
        fmin[f] = X[idx[lo], f]
        fmax[f] = fmin[f]
    for a in range(lo + 1, hi):
        r = idx[a]
        for f in range(d):
            v = X[r, f]
            if v < fmin[f]:
                fmin[f] = v
            elif v > fmax[f]:
                fmax[f] = v
    nc = 0
    for f in range(d):
        if fmax[f] > fmin[f]:
            cand[nc] = f
            nc += 1
    return nc


@njit(cache=True, nogil=True)
def _leaf_value(c0, m, laplace):
    if laplace:
        return (c0 + 1.0) / (m + 2.0)
    return c0 / m


@njit(cache=True, nogil=True)
def grow_random_tree(X, y, rows, min_leaf, max_depth, laplace, U):
    """Grow a completely-random tree on ``X[rows]``.

    Returns ``(feature, threshold, left, right, p0, n_nodes)``; leaves have
    ``feature == -1`` and ``p0`` holds the class-0 proportion of the node's
    training rows.  ``max_depth < 0`` means unlimited.  Node ``k`` consumes
    uniforms ``U[k, :3]``.
    """
    n = rows.shape[0]
    d = X.shape[1]
    cap = 2 * n - 1
    feature = np.full(cap, -1, np.int32)
    threshold = np.zeros(cap, np.float64)
    left = np.full(cap, -1, np.int32)
    right = np.full(cap, -1, np.int32)
    p0 = np.zeros(cap, np.float64)

    idx = rows.copy()
    st_node = np.empty(cap, np.int64)
    st_lo = np.empty(cap, np.int64)
    st_hi = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    cand = np.empty(d, np.int64)
    fmin = np.empty(d, np.float64)
    fmax = np.empty(d, np.float64)

    st_node[0] = 0
    st_lo[0] = 0
    st_hi[0] = n
    st_depth[0] = 0
    sp = 1
    n_nodes = 1

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        lo = st_lo[sp]
        hi = st_hi[sp]
        depth = st_depth[sp]
        m = hi - lo

        c0 = 0
        for a in range(lo, hi):
            if y[idx[a]] == 0:
                c0 += 1
        p0[node] = _leaf_value(c0, m, laplace)
        if c0 == 0 or c0 == m or m < 2 * min_leaf:
            continue
        if max_depth >= 0 and depth >= max_depth:
            continue

        u = U[node]
        # One uniformly drawn feature first, then a uniform draw over the
        # varying features if it is constant: overall uniform over the
        # varying features.
        f = int(u[0] * d)
        if f >= d:
            f = d - 1
        vlo = X[idx[lo], f]
        vhi = vlo
        for a in range(lo + 1, hi):
            v = X[idx[a], f]
            if v < vlo:
                vlo = v
            elif v > vhi:
                vhi = v
        if not vhi > vlo:
            nc = _spread(X, idx, lo, hi, cand, fmin, fmax)
            if nc == 0:
                continue
            j = int(u[2] * nc)
            if j >= nc:
                j = nc - 1
            f = cand[j]
            vlo = fmin[f]
            vhi = fmax[f]
        thr = vlo + u[1] * (vhi - vlo)
        if thr >= vhi or thr < vlo:
            thr = vlo

        i = lo
        j2 = hi - 1
        while i <= j2:
            if X[idx[i], f] <= thr:
                i += 1
            else:
                tmp = idx[i]
                idx[i] = idx[j2]
                idx[j2] = tmp
                j2 -= 1
        mid = i

        feature[node] = f
        threshold[node] = thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        st_node[sp] = n_nodes + 1
        st_lo[sp] = mid
        st_hi[sp] = hi
        st_depth[sp] = depth + 1
        sp += 1
        st_node[sp] = n_nodes
        st_lo[sp] = lo
        st_hi[sp] = mid
        st_depth[sp] = depth + 1
        sp += 1
        n_nodes += 2

    return feature, threshold, left, right, p0, n_nodes


@njit(cache=True, nogil=True)
def grow_gini_tree(Xr, yr, order, mtry, min_leaf, max_depth, laplace, U):
    """Grow a Gini random-subspace tree.

    ``Xr`` is the (features x rows) training matrix, ``yr`` its labels and
    ``order[f]`` the row positions sorted by feature ``f`` (modified in
    place).  Same return layout as :func:`grow_random_tree`.  Every split
    stably partitions the per-feature sorted lists, so a node's segment
    stays sorted in every feature.  Node ``k`` consumes ``U[k, :mtry]``.
    """
    d, n = Xr.shape
    cap = 2 * n - 1
    feature = np.full(cap, -1, np.int32)
    threshold = np.zeros(cap, np.float64)
    left = np.full(cap, -1, np.int32)
    right = np.full(cap, -1, np.int32)
    p0 = np.zeros(cap, np.float64)

    go_left = np.zeros(n, np.bool_)
    buf = np.empty(n, np.int64)

    st_node = np.empty(cap, np.int64)
    st_lo = np.empty(cap, np.int64)
    st_hi = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    cand = np.empty(d, np.int64)

    st_node[0] = 0
    st_lo[0] = 0
    st_hi[0] = n
    st_depth[0] = 0
    sp = 1
    n_nodes = 1

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        lo = st_lo[sp]
        hi = st_hi[sp]
        depth = st_depth[sp]
        m = hi - lo

        c0 = 0
        for a in range(lo, hi):
            if yr[order[0, a]] == 0:
                c0 += 1
        p0[node] = _leaf_value(c0, m, laplace)
        if c0 == 0 or c0 == m or m < 2 * min_leaf:
            continue
        if max_depth >= 0 and depth >= max_depth:
            continue

        nc = 0
        for f in range(d):
            if Xr[f, order[f, hi - 1]] > Xr[f, order[f, lo]]:
                cand[nc] = f
                nc += 1
        if nc == 0:
            continue

        u = U[node]
        k = mtry if mtry < nc else nc
        # partial Fisher-Yates: cand[:k] becomes a uniform k-subset
        for a in range(k):
            b = a + int(u[a] * (nc - a))
            if b >= nc:
                b = nc - 1
            tmp = cand[a]
            cand[a] = cand[b]
            cand[b] = tmp

        best_score = -1.0
        best_f = -1
        best_nl = 0
        best_thr = 0.0
        for a in range(k):
            f = cand[a]
            l0 = 0
            for r in range(m - 1):
                p = order[f, lo + r]
                if yr[p] == 0:
                    l0 += 1
                v_here = Xr[f, p]
                v_next = Xr[f, order[f, lo + r + 1]]
                if v_here == v_next:
                    continue
                nl = r + 1
                nr = m - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                l1 = nl - l0
                r0 = c0 - l0
                r1 = nr - r0
                # minimizing weighted Gini == maximizing this sum
                score = (l0 * l0 + l1 * l1) / nl + (r0 * r0 + r1 * r1) / nr
                if score > best_score:
                    best_score = score
                    best_f = f
                    best_nl = nl
                    thr = 0.5 * v_here + 0.5 * v_next
                    if thr >= v_next or thr < v_here:
                        thr = v_here
                    best_thr = thr
        if best_f < 0:
            continue

        for r in range(m):
            go_left[order[best_f, lo + r]] = r < best_nl
        for f in range(d):
            a_l = lo
            a_r = 0
            for r in range(lo, hi):
                p = order[f, r]
                if go_left[p]:
                    order[f, a_l] = p
                    a_l += 1
                else:
                    buf[a_r] = p
                    a_r += 1
            for r in range(a_r):
                order[f, a_l + r] = buf[r]
        mid = lo + best_nl

        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        st_node[sp] = n_nodes + 1
        st_lo[sp] = mid
        st_hi[sp] = hi
        st_depth[sp] = depth + 1
        sp += 1
        st_node[sp] = n_nodes
        st_lo[sp] = lo
        st_hi[sp] = mid
        st_depth[sp] = depth + 1
        sp += 1
        n_nodes += 2

    return feature, threshold, left, right, p0, n_nodes


@njit(cache=True, nogil=True)
def route_leaves(X, feature, threshold, left, right, roots):
    """Leaf index reached by every row of ``X`` in every tree (rows x trees)."""
    n = X.shape[0]
    T = roots.shape[0]
    out = np.empty((n, T), np.int64)
    for t in range(T):
        root = roots[t]
        for r in range(n):
            node = root
            while feature[node] >= 0:
                if X[r, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[r, t] = node
    return out


@njit(cache=True, nogil=True)
def tree_class0(X, feature, threshold, left, right, p0, roots):
    """Class-0 probability of every row under every tree (rows x trees)."""
    n = X.shape[0]
    T = roots.shape[0]
    out = np.empty((n, T), np.float64)
    for t in range(T):
        root = roots[t]
        for r in range(n):
            node = root
            while feature[node] >= 0:
                if X[r, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[r, t] = p0[node]
    return out


@njit(cache=True, nogil=True)
def weighted_rows(probs, w):
    """sum_t w[t] * probs[r, t], accumulated in tree order."""
    n, T = probs.shape
    out = np.empty(n, np.float64)
    for r in range(n):
        s = 0.0
        for t in range(T):
            s += probs[r, t] * w[t]
        out[r] = s
    return out


@njit(cache=True, nogil=True)
def mean_rows(probs):
    """(sum_t probs[r, t]) / T, accumulated in tree order."""
    n, T = probs.shape
    out = np.empty(n, np.float64)
    for r in range(n):
        s = 0.0
        for t in range(T):
            s += probs[r, t]
        out[r] = s / T
    return out


@njit(cache=True, nogil=True)
def project_simplex(v):
    """Euclidean projection onto the unit simplex (sort and threshold)."""
    n = v.shape[0]
    u = np.sort(v)[::-1]
    css = 0.0
    theta = 0.0
    for k in range(n):
        css += u[k]
        t = (css - 1.0) / (k + 1)
        if u[k] - t > 0:
            theta = t
    w = np.empty(n)
    s = 0.0
    for k in range(n):
        x = v[k] - theta
        w[k] = x if x > 0 else 0.0
        s += w[k]
    for k in range(n):
        w[k] /= s
    return w


@njit(cache=True, nogil=True)
def _hinge_objective(A, w, lam, h):
    """Fill h = max(0, A w) and return sum h^2 + lam |w|^2."""
    n, T = A.shape
    f = 0.0
    for r in range(n):
        s = 0.0
        for t in range(T):
            s += A[r, t] * w[t]
        h[r] = s if s > 0 else 0.0
        f += h[r] * h[r]
    for t in range(T):
        f += lam * w[t] * w[t]
    return f


@njit(cache=True, nogil=True)
def pgd_simplex(A, w0, lam, max_iter, tol, step0, shrink, armijo_c, min_step):
    """Projected gradient with Armijo backtracking on the projection arc.

    The first search starts at ``step0``; later searches start at twice the
    previously accepted step, capped at ``step0``.  Returns
    ``(w, trace, n_iter)``; ``trace`` holds the objective at ``w0`` and after
    every accepted step.
    """
    n, T = A.shape
    w = w0.copy()
    h = np.empty(n)
    h_new = np.empty(n)
    g = np.empty(T)
    trace = np.empty(max_iter + 1)
    f = _hinge_objective(A, w, lam, h)
    trace[0] = f
    it = 0
    last = step0
    while it < max_iter:
        for t in range(T):
            g[t] = 2.0 * lam * w[t]
        for r in range(n):
            if h[r] > 0:
                c = 2.0 * h[r]
                for t in range(T):
                    g[t] += c * A[r, t]
        for t in range(T):
            if not np.isfinite(g[t]):
                return w, trace[:it + 1], -1
        step = min(step0, last / shrink)
        while True:
            w_new = project_simplex(w - step * g)
            gd = 0.0
            for t in range(T):
                gd += g[t] * (w_new[t] - w[t])
            f_new = _hinge_objective(A, w_new, lam, h_new)
            if f_new <= f + armijo_c * gd or step < min_step:
                break
            step *= shrink
        if f_new > f:
            break
        last = step
        change = 0.0
        for t in range(T):
            dt = abs(w_new[t] - w[t])
            if dt > change:
                change = dt
        w = w_new
        f = f_new
        for r in range(n):
            h[r] = h_new[r]
        it += 1
        trace[it] = f
        if change < tol:
            break
    return w, trace[:it + 1], it
