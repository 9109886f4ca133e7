"""Hot inner loops, each available as a numba kernel and a numpy fallback.

``<name>_py`` is always the pure numpy/python implementation and
``<name>_jit`` the compiled one (identical to ``_py`` when numba is
missing). The unsuffixed ``<name>`` is what the rest of the package calls;
it resolves to the jit version unless ``IRSBEAM_DISABLE_NUMBA`` is set.
"""
import numpy as np

from ._accel import USE_NUMBA, jit, jitable


# ---------------------------------------------------------------------------
# single-user successive refinement (discrete levels)
# ---------------------------------------------------------------------------
def _su_sweeps_loop(a, h_hat, const, levels, table, threshold, max_sweeps, trace):
    n = a.shape[0]
    n_levels = table.shape[0]
    levels = levels.copy()
    v = np.conj(table[levels])
    av = a @ v
    obj = 0.0
    for i in range(n):
        obj += (np.conj(v[i]) * av[i]).real + 2.0 * (table[levels[i]] * h_hat[i]).real
    obj += const
    trace[0] = obj
    t = 1
    sweeps = 0
    converged = False
    scores = np.empty(n_levels)
    for _ in range(max_sweeps):
        start = obj
        sweeps += 1
        for i in range(n):
            zeta = av[i] - a[i, i] * v[i] + h_hat[i]
            best = -np.inf
            for l in range(n_levels):
                s = (table[l] * zeta).real
                scores[l] = s
                if s > best:
                    best = s
            tol = 1e-13 * abs(zeta)
            cur = levels[i]
            new = cur
            if scores[cur] < best - tol:
                for l in range(n_levels):
                    if scores[l] >= best - tol:
                        new = l
                        break
            if new != cur:
                obj += 2.0 * (scores[new] - scores[cur])
                vn = np.conj(table[new])
                dv = vn - v[i]
                for r in range(n):
                    av[r] += a[r, i] * dv
                v[i] = vn
                levels[i] = new
            trace[t] = obj
            t += 1
        if obj - start <= threshold * abs(start):
            converged = True
            break
    return levels, obj, sweeps, converged, t


def _su_sweeps_np(a, h_hat, const, levels, table, threshold, max_sweeps, trace):
    n = a.shape[0]
    levels = levels.copy()
    v = np.conj(table[levels])
    av = a @ v
    obj = float(np.real(np.vdot(v, av)) + 2.0 * np.real(np.sum(table[levels] * h_hat)) + const)
    trace[0] = obj
    t = 1
    sweeps = 0
    converged = False
    for _ in range(max_sweeps):
        start = obj
        sweeps += 1
        for i in range(n):
            zeta = av[i] - a[i, i] * v[i] + h_hat[i]
            scores = np.real(table * zeta)
            best = scores.max()
            tol = 1e-13 * abs(zeta)
            cur = levels[i]
            if scores[cur] < best - tol:
                new = int(np.flatnonzero(scores >= best - tol)[0])
                obj += 2.0 * (scores[new] - scores[cur])
                vn = np.conj(table[new])
                av += a[:, i] * (vn - v[i])
                v[i] = vn
                levels[i] = new
            trace[t] = obj
            t += 1
        if obj - start <= threshold * abs(start):
            converged = True
            break
    return levels, obj, sweeps, converged, t


# ---------------------------------------------------------------------------
# single-user continuous coordinate ascent
# ---------------------------------------------------------------------------
def _cont_sweeps_loop(a, h_hat, const, u, threshold, max_sweeps, trace):
    # u holds exp(j theta); the update sets exp(j theta_n) = conj(zeta)/|zeta|
    n = a.shape[0]
    u = u.copy()
    v = np.conj(u)
    av = a @ v
    obj = 0.0
    for i in range(n):
        obj += (np.conj(v[i]) * av[i]).real + 2.0 * (u[i] * h_hat[i]).real
    obj += const
    trace[0] = obj
    t = 1
    sweeps = 0
    converged = False
    for _ in range(max_sweeps):
        start = obj
        sweeps += 1
        for i in range(n):
            zeta = av[i] - a[i, i] * v[i] + h_hat[i]
            mag = abs(zeta)
            if mag > 0.0:
                un = np.conj(zeta) / mag
                gain = mag - (u[i] * zeta).real
                if gain > 0.0:
                    obj += 2.0 * gain
                    vn = np.conj(un)
                    dv = vn - v[i]
                    for r in range(n):
                        av[r] += a[r, i] * dv
                    v[i] = vn
                    u[i] = un
            trace[t] = obj
            t += 1
        if obj - start <= threshold * abs(start):
            converged = True
            break
    return u, obj, sweeps, converged, t


# ---------------------------------------------------------------------------
# branch and bound over phase levels
# ---------------------------------------------------------------------------
def _bnb_search(a, h_hat, table, inc_levels, inc_value, base, node_budget):
    """Depth-first branch and bound maximising the single-user quadratic.

    Elements are fixed in order 0..N-1. For a fixed prefix the bound is the
    exact prefix value, plus for every free element the best level against
    its linear coefficient (direct term and couplings to fixed elements),
    plus ``2|A(i,n)|`` for every pair of free elements.
    Returns ``(levels, value, nodes, proved_optimal)``.
    """
    n = a.shape[0]
    n_levels = table.shape[0]
    suffix = np.zeros(n + 1)
    for d in range(n - 1, -1, -1):
        acc = 0.0
        for m in range(d + 1, n):
            acc += 2.0 * abs(a[d, m])
        suffix[d] = suffix[d + 1] + acc
    coef = np.zeros((n + 1, n), dtype=np.complex128)
    for m in range(n):
        coef[0, m] = h_hat[m]
    exact = np.zeros(n + 1)
    exact[0] = base
    order = np.zeros((n, n_levels), dtype=np.int64)
    pos = np.zeros(n, dtype=np.int64)
    cur = np.zeros(n, dtype=np.int64)
    best = inc_levels.copy()
    best_val = inc_value
    scores = np.empty(n_levels)
    nodes = 0

    # children of the root, best refine preference first, ties -> lower level
    for l in range(n_levels):
        scores[l] = (table[l] * coef[0, 0]).real
        order[0, l] = l
    for p in range(1, n_levels):
        key = order[0, p]
        q = p - 1
        while q >= 0 and scores[order[0, q]] < scores[key]:
            order[0, q + 1] = order[0, q]
            q -= 1
        order[0, q + 1] = key

    d = 0
    while d >= 0:
        if pos[d] >= n_levels:
            pos[d] = 0
            d -= 1
            continue
        l = order[d, pos[d]]
        pos[d] += 1
        nodes += 1
        if nodes > node_budget:
            return best, best_val, nodes, False
        cur[d] = l
        val = exact[d] + 2.0 * (table[l] * coef[d, d]).real
        if d == n - 1:
            if val > best_val:
                best_val = val
                for m in range(n):
                    best[m] = cur[m]
            continue
        exact[d + 1] = val
        vconj = np.conj(table[l])
        bound = val + suffix[d + 1]
        for m in range(d + 1, n):
            c = coef[d, m] + a[m, d] * vconj
            coef[d + 1, m] = c
            top = -np.inf
            for k in range(n_levels):
                s = (table[k] * c).real
                if s > top:
                    top = s
            bound += 2.0 * top
        if bound <= best_val:
            continue
        d += 1
        for k in range(n_levels):
            scores[k] = (table[k] * coef[d, d]).real
            order[d, k] = k
        for p in range(1, n_levels):
            key = order[d, p]
            q = p - 1
            while q >= 0 and scores[order[d, q]] < scores[key]:
                order[d, q + 1] = order[d, q]
                q -= 1
            order[d, q + 1] = key
        pos[d] = 0
    return best, best_val, nodes, True


# ---------------------------------------------------------------------------
# cascaded-link Monte-Carlo power
# ---------------------------------------------------------------------------
def _cascade_power_loop(amp, err):
    trials, n = amp.shape
    out = np.empty(trials)
    for t in range(trials):
        re = 0.0
        im = 0.0
        for i in range(n):
            re += amp[t, i] * np.cos(err[t, i])
            im += amp[t, i] * np.sin(err[t, i])
        out[t] = re * re + im * im
    return out


def _cascade_power_np(amp, err):
    return np.abs(np.sum(amp * np.exp(1j * err), axis=1)) ** 2


# ---------------------------------------------------------------------------
# MMSE dual-power fixed point
# ---------------------------------------------------------------------------
@jitable
def _uplink_update(hcol, hconj, sigma2, gamma, lam, out):
    # out_k = gamma_k sigma_k^2 / (h_k^H T_k^{-1} h_k),
    # T_k = I + sum_{i != k} lam_i / sigma_i^2 h_i h_i^H
    w = (lam / sigma2).astype(np.complex128)
    eye = np.eye(hcol.shape[0], dtype=np.complex128)
    for k in range(hcol.shape[1]):
        wk = w.copy()
        wk[k] = 0.0
        t = eye + (hcol * wk) @ hconj
        hk = np.ascontiguousarray(hcol[:, k])
        y = np.linalg.solve(t, hk)
        out[k] = gamma[k] * sigma2[k] / np.real(np.vdot(hk, y))


def _mmse_fixed_point(hc, sigma2, gamma, lam, tol, max_iter):
    """Dual (uplink) power fixed point
    ``lam_k = gamma_k sigma_k^2 / (h_k^H T_k^{-1} h_k)``,
    ``T_k = I + sum_{i != k} lam_i/sigma_i^2 h_i h_i^H``.

    Same fixed point as ``lam_k = sigma_k^2 / ((1 + 1/gamma_k) h_k^H T^{-1} h_k)``
    with the full ``T`` but without its slow ``gamma/(1+gamma)`` contraction.
    ``hc`` holds h_k as rows. Returns ``(lam, iterations, residual, ok)``
    where ``residual`` is the max relative fixed-point residual at the
    returned ``lam``.
    """
    k_users, m = hc.shape
    hcol = np.ascontiguousarray(hc.T)
    hconj = np.conj(hc)
    lam = lam.copy()
    new = lam.copy()
    iters = 0
    change = np.inf
    while iters < max_iter:
        iters += 1
        _uplink_update(hcol, hconj, sigma2, gamma, lam, new)
        change = 0.0
        for k in range(k_users):
            c = abs(new[k] - lam[k]) / abs(new[k])
            if c > change:
                change = c
        lam[:] = new
        if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
            return lam, iters, np.inf, False
        if change < tol:
            break
    _uplink_update(hcol, hconj, sigma2, gamma, lam, new)
    residual = 0.0
    for k in range(k_users):
        c = abs(new[k] - lam[k]) / abs(lam[k])
        if c > residual:
            residual = c
    return lam, iters, residual, change < tol


su_sweeps_py = _su_sweeps_np
su_sweeps_jit = jit(_su_sweeps_loop)
cont_sweeps_py = _cont_sweeps_loop
cont_sweeps_jit = jit(_cont_sweeps_loop)
bnb_search_py = _bnb_search
bnb_search_jit = jit(_bnb_search)
cascade_power_py = _cascade_power_np
cascade_power_jit = jit(_cascade_power_loop)
mmse_fixed_point_py = _mmse_fixed_point
mmse_fixed_point_jit = jit(_mmse_fixed_point)

if USE_NUMBA:
    su_sweeps = su_sweeps_jit
    cont_sweeps = cont_sweeps_jit
    bnb_search = bnb_search_jit
    cascade_power = cascade_power_jit
    mmse_fixed_point = mmse_fixed_point_jit
else:
    su_sweeps = su_sweeps_py
    cont_sweeps = cont_sweeps_py
    bnb_search = bnb_search_py
    cascade_power = cascade_power_py
    mmse_fixed_point = mmse_fixed_point_py
