"""Optional numba-compiled run loop.

This mirrors the pure-Python generation loop bit for bit: identical PCG64
draw order (numba reproduces numpy Generator streams exactly), identical
floating-point operation order, identical tie-breaking. Runs dispatched
here return byte-identical records to the reference path, which the test
suite asserts; anything the kernel cannot express (top/worst/tournament
blocks, custom objectives) falls back to the reference implementation.

Set GMDE_FAST=0 to disable dispatch entirely.
"""

from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised implicitly by dispatch tests
    from numba import njit

    NUMBA = True
except ImportError:  # pragma: no cover
    NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


ENABLED = NUMBA and os.environ.get("GMDE_FAST", "1") != "0"

_BLOCK = 8192

# block kind codes (mirrors mutation.Block kinds the kernel supports)
K_RAND, K_BEST, K_CURRENT, K_ECHO = 0, 1, 2, 3
# boundary policy codes
B_REFLECT, B_CLAMP, B_RESAMPLE = 0, 1, 2

CORE_ORDER = (
    "sphere",
    "schwefel_1_2",
    "elliptic",
    "rosenbrock",
    "rastrigin",
    "ackley",
    "griewank",
    "schwefel_2_26",
    "weierstrass",
    "expanded_scaffer_f6",
)

_E = float(np.e)
_TWO_PI = 2.0 * float(np.pi)
_SCHW_X = 420.9687462275036
_SCHW_C = _SCHW_X * np.sin(np.sqrt(_SCHW_X))
_W_APOW = 0.5 ** np.arange(21.0)
_W_BPOW = 3.0 ** np.arange(21.0)
_W_CONST = float(np.sum(_W_APOW * np.cos(np.pi * _W_BPOW)))


@njit(cache=True)
def _core_eval(core_id, z):
    d = z.shape[0]
    if core_id == 0:  # sphere
        s = 0.0
        for i in range(d):
            s += z[i] * z[i]
        return s
    if core_id == 1:  # schwefel 1.2
        s = 0.0
        c = 0.0
        for i in range(d):
            c += z[i]
            s += c * c
        return s
    if core_id == 2:  # elliptic
        s = 0.0
        for i in range(d):
            w = 1e6 ** (i / (d - 1)) if d > 1 else 1.0
            s += w * z[i] * z[i]
        return s
    if core_id == 3:  # rosenbrock
        s = 0.0
        for i in range(d - 1):
            a = z[i] * z[i] - z[i + 1]
            b = z[i] - 1.0
            s += 100.0 * a * a + b * b
        return s
    if core_id == 4:  # rastrigin
        s = 0.0
        for i in range(d):
            s += z[i] * z[i] - 10.0 * np.cos(_TWO_PI * z[i]) + 10.0
        return s
    if core_id == 5:  # ackley
        s1 = 0.0
        s2 = 0.0
        for i in range(d):
            s1 += z[i] * z[i]
            s2 += np.cos(_TWO_PI * z[i])
        return -20.0 * np.exp(-0.2 * np.sqrt(s1 / d)) - np.exp(s2 / d) + 20.0 + _E
    if core_id == 6:  # griewank
        s = 0.0
        p = 1.0
        for i in range(d):
            s += z[i] * z[i]
            p *= np.cos(z[i] / np.sqrt(i + 1.0))
        return 1.0 + s / 4000.0 - p
    if core_id == 7:  # schwefel 2.26
        s = 0.0
        for i in range(d):
            s += _SCHW_C - z[i] * np.sin(np.sqrt(abs(z[i])))
        return s
    if core_id == 8:  # weierstrass
        s = 0.0
        for i in range(d):
            zi = z[i] + 0.5
            for k in range(21):
                s += _W_APOW[k] * np.cos(_TWO_PI * _W_BPOW[k] * zi)
        return s - d * _W_CONST
    # expanded scaffer f6
    s = 0.0
    for i in range(d):
        x = z[i]
        y = z[(i + 1) % d]
        ss = x * x + y * y
        t = np.sin(np.sqrt(ss))
        s += 0.5 + (t * t - 0.5) / ((1.0 + 0.001 * ss) ** 2)
    return s


@njit(cache=True)
def _eval_row(core_id, x, shift, rot, has_rot, bias, zbuf, wbuf):
    d = x.shape[0]
    for j in range(d):
        zbuf[j] = x[j] - shift[j]
    if has_rot:
        for r in range(d):
            s = 0.0
            for c in range(d):
                s += rot[r, c] * zbuf[c]
            wbuf[r] = s
        return _core_eval(core_id, wbuf) + bias
    return _core_eval(core_id, zbuf) + bias


def eval_rows(core_id, x, shift, rot, has_rot, bias):
    """Row-wise objective evaluation shared by both engine paths."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        z = np.empty(x.shape[0])
        w = np.empty(x.shape[0])
        return float(_eval_row(core_id, x, shift, rot, has_rot, bias, z, w))
    return _eval_matrix(core_id, x, shift, rot, has_rot, bias)


@njit(cache=True)
def _eval_matrix(core_id, x, shift, rot, has_rot, bias):
    n, d = x.shape
    out = np.empty(n)
    z = np.empty(d)
    w = np.empty(d)
    for i in range(n):
        out[i] = _eval_row(core_id, x[i], shift, rot, has_rot, bias, z, w)
    return out


# --------------------------------------------------------------------------
# buffered uniform draws, mirroring core.RngStream exactly


@njit(cache=True, inline="always")
def _u(gen, buf, st):
    p = st[0]
    if p == _BLOCK:
        buf[:] = gen.random(_BLOCK)
        p = 0
    v = buf[p]
    st[0] = p + 1
    return v


@njit(cache=True)
def _fill_u(gen, buf, st, out, n):
    p = st[0]
    take = _BLOCK - p
    if n <= take:
        for i in range(n):
            out[i] = buf[p + i]
        st[0] = p + n
        return
    k = 0
    for i in range(take):
        out[k] = buf[p + i]
        k += 1
    n -= take
    while n > _BLOCK:
        tmp = gen.random(_BLOCK)
        for i in range(_BLOCK):
            out[k] = tmp[i]
            k += 1
        n -= _BLOCK
    buf[:] = gen.random(_BLOCK)
    for i in range(n):
        out[k] = buf[i]
        k += 1
    st[0] = n


# --------------------------------------------------------------------------
# the run loop


@njit(cache=True)
def _run_kernel(
    gen,
    core_id,
    shift,
    rot,
    has_rot,
    bias,
    lower,
    upper,
    is_cube,
    np_size,
    d,
    max_fes,
    ensemble,
    base_kind,  # (K,)
    n_diffs,  # (K,)
    kinds,  # (K, 2*nmax) diff-element kinds in slot order
    modes,  # (K,) 0 standard, 1 current-to-rand
    pool1,  # rows into the strategy arrays
    pool2,
    ssr,
    jde,
    tau1,
    tau2,
    f_l,
    f_u,
    fixed_f,
    fixed_cr,
    boundary,
    record_every,
):
    span = np.empty(d)
    for j in range(d):
        span[j] = upper[j] - lower[j]
    lo0 = lower[0]
    hi0 = upper[0]

    buf = gen.random(_BLOCK)
    st = np.zeros(1, dtype=np.int64)

    # ---- init population (matches core.init_population draw order)
    u0 = np.empty(np_size * d)
    _fill_u(gen, buf, st, u0, np_size * d)
    x = np.empty((np_size, d))
    for i in range(np_size):
        for j in range(d):
            x[i, j] = lower[j] + u0[i * d + j] * span[j]
    zbuf = np.empty(d)
    wbuf = np.empty(d)
    fit = np.empty(np_size)
    for i in range(np_size):
        fit[i] = _eval_row(core_id, x[i], shift, rot, has_rot, bias, zbuf, wbuf)
    used = np_size
    best = 0
    for i in range(1, np_size):
        if fit[i] < fit[best]:
            best = i

    n_strat = base_kind.shape[0]
    f_mat = np.full((n_strat, np_size), 0.5)
    cr_arr = np.full(np_size, 0.9)

    max_samples = max_fes // record_every + 4
    s_gen = np.empty(max_samples, dtype=np.int64)
    s_fes = np.empty(max_samples, dtype=np.int64)
    s_fit = np.empty(max_samples)
    s_gen[0] = 0
    s_fes[0] = used
    s_fit[0] = fit[best]
    n_samples = 1

    unit = 1
    if ensemble:
        unit = min(pool1.shape[0], pool2.shape[0])

    taken = np.empty(16, dtype=np.int64)
    resolved = np.empty(16, dtype=np.int64)
    m_max = max(pool1.shape[0], pool2.shape[0]) if ensemble else 1
    trials = np.empty((m_max, d))
    t_fits = np.empty(m_max)
    f_news = np.empty(m_max)
    v = np.empty(d)
    uu = np.empty(d)
    generation = 0

    while max_fes - used >= unit:
        used_before = used
        # ---- select strategies for this generation
        if ensemble:
            gate = 1.0 - _u(gen, buf, st)
            rows = pool1 if gate <= ssr else pool2
        else:
            rows = pool1
        m = rows.shape[0]

        for i in range(np_size):
            if max_fes - used < m:
                break
            # parameter proposals (per strategy F, shared Cr)
            if jde:
                for jj in range(m):
                    f_new = f_mat[rows[jj], i]
                    if _u(gen, buf, st) < tau1:
                        f_new = f_l + _u(gen, buf, st) * f_u
                    f_news[jj] = f_new
                cr_new = cr_arr[i]
                if _u(gen, buf, st) < tau2:
                    cr_new = _u(gen, buf, st)
            else:
                for jj in range(m):
                    f_news[jj] = fixed_f
                cr_new = fixed_cr

            for jj in range(m):
                krow = rows[jj]
                nd = n_diffs[krow]
                n_slots = 1 + 2 * nd
                # ---- roles: selective first, then rands, then echoes
                taken[0] = i
                tcount = 1
                for s in range(n_slots):
                    kind = base_kind[krow] if s == 0 else kinds[krow, s - 1]
                    if kind == K_BEST or kind == K_CURRENT:
                        r = best if kind == K_BEST else i
                        resolved[s] = r
                        pos = tcount
                        for ti in range(tcount):
                            if taken[ti] >= r:
                                pos = ti
                                break
                        if pos == tcount or taken[pos] != r:
                            for mv in range(tcount, pos, -1):
                                taken[mv] = taken[mv - 1]
                            taken[pos] = r
                            tcount += 1
                avail = np_size - tcount
                for s in range(n_slots):
                    kind = base_kind[krow] if s == 0 else kinds[krow, s - 1]
                    if kind == K_RAND:
                        r = int(_u(gen, buf, st) * avail)
                        pos = tcount
                        for ti in range(tcount):
                            if r >= taken[ti]:
                                r += 1
                            else:
                                pos = ti
                                break
                        resolved[s] = r
                        for mv in range(tcount, pos, -1):
                            taken[mv] = taken[mv - 1]
                        taken[pos] = r
                        tcount += 1
                        avail -= 1
                for s in range(n_slots):
                    kind = base_kind[krow] if s == 0 else kinds[krow, s - 1]
                    if kind == K_ECHO:
                        resolved[s] = resolved[0]
                # ---- donor
                b = resolved[0]
                for j in range(d):
                    v[j] = x[b, j]
                k_coef = 0.0
                if modes[krow] == 1:
                    k_coef = _u(gen, buf, st)
                for dd in range(nd):
                    if modes[krow] == 1:
                        c = k_coef if dd == 0 else k_coef * f_news[jj]
                    else:
                        c = f_news[jj]
                    p_i = resolved[1 + 2 * dd]
                    m_i = resolved[2 + 2 * dd]
                    for j in range(d):
                        v[j] = v[j] + (x[p_i, j] - x[m_i, j]) * c
                # ---- boundary repair
                if is_cube:
                    vmin = v[0]
                    vmax = v[0]
                    for j in range(1, d):
                        if v[j] < vmin:
                            vmin = v[j]
                        if v[j] > vmax:
                            vmax = v[j]
                    inside = lo0 <= vmin and vmax <= hi0
                else:
                    inside = True
                    for j in range(d):
                        if v[j] < lower[j] or v[j] > upper[j]:
                            inside = False
                            break
                if not inside:
                    if boundary == B_REFLECT:
                        for j in range(d):
                            period = 2.0 * span[j]
                            y = (v[j] - lower[j]) % period
                            alt = period - y
                            v[j] = lower[j] + (y if y < alt else alt)
                    elif boundary == B_CLAMP:
                        for j in range(d):
                            if v[j] < lower[j]:
                                v[j] = lower[j]
                            elif v[j] > upper[j]:
                                v[j] = upper[j]
                    else:  # resample violated coordinates in order
                        nbad = 0
                        for j in range(d):
                            if v[j] < lower[j] or v[j] > upper[j]:
                                nbad += 1
                        _fill_u(gen, buf, st, uu, nbad)
                        ui = 0
                        for j in range(d):
                            if v[j] < lower[j] or v[j] > upper[j]:
                                v[j] = lower[j] + uu[ui] * (upper[j] - lower[j])
                                ui += 1
                # ---- binomial crossover
                _fill_u(gen, buf, st, uu, d)
                jr = int(_u(gen, buf, st) * d)
                for j in range(d):
                    if uu[j] < cr_new or j == jr:
                        trials[jj, j] = v[j]
                    else:
                        trials[jj, j] = x[i, j]
            used += m
            for jj in range(m):
                t_fits[jj] = _eval_row(
                    core_id, trials[jj], shift, rot, has_rot, bias, zbuf, wbuf
                )
            j_best = 0
            fb = np.inf
            for jj in range(m):
                fj = t_fits[jj]
                if np.isnan(fj):
                    fj = np.inf
                if fj < fb:
                    fb = fj
                    j_best = jj
            t_fit = t_fits[j_best]
            acc = False
            if not np.isnan(t_fit):
                acc = True if np.isnan(fit[i]) else t_fit < fit[i]
            if acc:
                for j in range(d):
                    x[i, j] = trials[j_best, j]
                fit[i] = t_fit
                if t_fit < fit[best] or (t_fit == fit[best] and i < best):
                    best = i
                if jde:
                    f_mat[rows[j_best], i] = f_news[j_best]
                    cr_arr[i] = cr_new
        generation += 1
        if used == used_before:
            break
        if generation % record_every == 0:
            s_gen[n_samples] = generation
            s_fes[n_samples] = used
            s_fit[n_samples] = fit[best]
            n_samples += 1

    if (
        s_gen[n_samples - 1] != generation
        or s_fes[n_samples - 1] != used
        or s_fit[n_samples - 1] != fit[best]
    ):
        s_gen[n_samples] = generation
        s_fes[n_samples] = used
        s_fit[n_samples] = fit[best]
        n_samples += 1

    final_x = x[best].copy()
    return n_samples, s_gen, s_fes, s_fit, final_x, fit[best], used


def run_kernel(gen, *args):
    n, s_gen, s_fes, s_fit, final_x, final_fit, used = _run_kernel(gen, *args)
    samples = [(int(s_gen[i]), int(s_fes[i]), float(s_fit[i])) for i in range(n)]
    return samples, final_x, float(final_fit), int(used)
