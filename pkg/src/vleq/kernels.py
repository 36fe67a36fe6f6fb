"""Per-sample simulation loops.

These are the hot paths of every experiment: one pass over the received
samples with strict sample-to-sample data dependence.  They are compiled with
numba unless ``VLEQ_DISABLE_NUMBA`` is set, in which case the identical source
runs as plain Python.

Weight vectors are allocated at their maximum size and the *active* taps are
always a leading prefix (segments and FBF taps are added/removed at the tail),
so the RLS inverse-correlation matrix is handled as its leading ``M x M``
block.
"""

from __future__ import annotations

import numpy as np

from ._accel import jit

ALG_LMS = 0
ALG_NLMS = 1
ALG_VSLMS = 2
ALG_RLS = 3

ALGORITHMS = {"lms": ALG_LMS, "nlms": ALG_NLMS, "vslms": ALG_VSLMS, "rls": ALG_RLS}

DIVERGENCE_LIMIT = 1e6


@jit
def markov_walk(c0, increments, renormalize, out):
    """Fill ``out[n]`` with the channel at sample n, starting from ``c0``.

    ``increments[n]`` is added to go from sample n-1 to n (row 0 unused).
    """
    n_taps = c0.shape[0]
    c = c0.copy()
    for j in range(n_taps):
        out[0, j] = c[j]
    for n in range(1, increments.shape[0]):
        s = 0.0
        for j in range(n_taps):
            c[j] += increments[n, j]
            s += c[j] * c[j]
        if renormalize and s > 0.0:
            inv = 1.0 / np.sqrt(s)
            for j in range(n_taps):
                c[j] *= inv
        for j in range(n_taps):
            out[n, j] = c[j]


@jit
def received_signal(taps, symbols, lead, noise, out):
    """r(n) = sum_j taps[n, j] * symbols[n - j + lead] + noise[n]."""
    for n in range(out.shape[0]):
        acc = noise[n]
        for j in range(taps.shape[1]):
            acc += taps[n, j] * symbols[n - j + lead]
        out[n] = acc


@jit
def _rls_reset(w, pm, m, delta):
    for i in range(pm.shape[0]):
        w[i] = 0.0
        for j in range(pm.shape[1]):
            pm[i, j] = 0.0
    for i in range(m):
        pm[i, i] = 1.0 / delta


@jit
def _rls_grow(w, pm, old_m, new_m, delta):
    # zero-padded inverse with delta^-1 on the new diagonal entries
    for i in range(old_m, new_m):
        w[i] = 0.0
        for j in range(pm.shape[0]):
            pm[i, j] = 0.0
            pm[j, i] = 0.0
        pm[i, i] = 1.0 / delta


@jit
def _rls_drop(w, pm, new_m, old_m):
    for i in range(new_m, old_m):
        w[i] = 0.0
        for j in range(pm.shape[0]):
            pm[i, j] = 0.0
            pm[j, i] = 0.0


@jit
def _adapt(alg, w, u, m, e, step, reg, sq, lam, pm, pu):
    """One weight update over the first ``m`` taps with a-priori error ``e``."""
    if alg == ALG_RLS:
        den = lam
        for i in range(m):
            acc = 0.0
            for j in range(m):
                acc += pm[i, j] * u[j]
            pu[i] = acc
            den += u[i] * acc
        for i in range(m):
            w[i] += pu[i] / den * e
        for i in range(m):
            ki = pu[i] / den
            for j in range(m):
                pm[i, j] = (pm[i, j] - ki * pu[j]) / lam
        for i in range(m):
            for j in range(i):
                a = 0.5 * (pm[i, j] + pm[j, i])
                pm[i, j] = a
                pm[j, i] = a
    else:
        if alg == ALG_NLMS:
            g = step * e / (reg + sq)
        else:
            g = step * e
        for i in range(m):
            w[i] += g * u[i]


@jit
def _diverged(alg, w, m, pm):
    for i in range(m):
        if not np.isfinite(w[i]) or abs(w[i]) > DIVERGENCE_LIMIT:
            return True
    if alg == ALG_RLS:
        for i in range(m):
            if not np.isfinite(pm[i, i]):
                return True
    return False


@jit
def _lms_bound(m, power):
    return 2.0 / (3.0 * m * power)


@jit
def le_run(r, ref, train, delay, seg_len, max_segs, segs0, variable,
           alpha_up, alpha_dw, beta, t_hold, n_tau,
           alg, mu, reg, vs_a, vs_rho, vs_mu0, vs_mu_min, pw_beta, lam, delta,
           e2, dec, length, steps):
    """Run a (segmented, optionally variable-length) linear equalizer.

    Parameters mirror :class:`vleq.sim.SimulationConfig`.  ``ref`` holds the
    true delayed symbols d(n-D); ``train[n]`` selects whether the adaptation
    reference is ``ref[n]`` or the detector output.  ``e2`` always records
    the squared error against the true symbol.

    Returns ``(n_changes, n_restarts, diverged_at)``; ``diverged_at`` is -1
    unless an LMS-family filter blew up, after which ``e2`` is ``inf``.
    """
    n_samples = r.shape[0]
    m_max = max_segs * seg_len
    x = np.zeros(m_max)
    w = np.zeros(m_max)
    pm = np.zeros((m_max, m_max))
    pu = np.zeros(m_max)
    segs = segs0
    m = segs * seg_len
    min_segs = (delay + seg_len) // seg_len
    if min_segs < 1:
        min_segs = 1
    _rls_reset(w, pm, m, delta)
    power = 1.0
    if alg == ALG_VSLMS:
        step = vs_mu0
    elif alg == ALG_LMS and variable:
        step = min(mu, _lms_bound(m, power))
    else:
        step = mu
    ase_last = 0.0
    ase_prev = 0.0
    n_eff = 0.0
    hold = t_hold
    n_changes = 0
    n_restarts = 0
    for n in range(n_samples):
        for i in range(m_max - 1, 0, -1):
            x[i] = x[i - 1]
        x[0] = r[n]
        split = m - seg_len
        y_prev = 0.0
        for i in range(split):
            y_prev += w[i] * x[i]
        y = y_prev
        for i in range(split, m):
            y += w[i] * x[i]
        dh = 1.0 if y >= 0.0 else -1.0
        dec[n] = dh
        d = ref[n] if train[n] else dh
        e = d - y
        e2[n] = (ref[n] - y) * (ref[n] - y)

        sq = 0.0
        for i in range(m):
            sq += x[i] * x[i]
        power = pw_beta * power + (1.0 - pw_beta) * sq / m
        _adapt(alg, w, x, m, e, step, reg, sq, lam, pm, pu)
        if alg == ALG_VSLMS:
            step = vs_a * step + vs_rho * e * e
            if step < vs_mu_min:
                step = vs_mu_min
            bound = _lms_bound(m, power)
            if step > bound:
                step = bound
        steps[n] = lam if alg == ALG_RLS else step

        if _diverged(alg, w, m, pm):
            if alg == ALG_RLS:
                _rls_reset(w, pm, m, delta)
                n_restarts += 1
            else:
                for k in range(n, n_samples):
                    e2[k] = np.inf
                    dec[k] = 0.0
                    length[k] = m
                return n_changes, n_restarts, n

        if variable:
            e_prev = d - y_prev
            ase_last = beta * ase_last + e * e
            ase_prev = beta * ase_prev + e_prev * e_prev
            n_eff = beta * n_eff + 1.0
            change = 0
            if hold > 0:
                hold -= 1
            elif (ase_last <= alpha_up * ase_prev and segs < max_segs
                  and (n_tau <= 0.0 or ase_last > n_eff * n_tau)):
                change = 1
            elif ase_last >= alpha_dw * ase_prev and segs > min_segs:
                change = -1
            if change != 0:
                old_m = m
                segs += change
                m = segs * seg_len
                if change > 0:
                    if alg == ALG_RLS:
                        _rls_grow(w, pm, old_m, m, delta)
                else:
                    for i in range(m, old_m):
                        w[i] = 0.0
                    if alg == ALG_RLS:
                        _rls_reset(w, pm, m, delta)
                        n_restarts += 1
                if alg == ALG_LMS:
                    step = min(mu, _lms_bound(m, power))
                elif alg == ALG_VSLMS:
                    bound = _lms_bound(m, power)
                    if step > bound:
                        step = bound
                ase_last = 0.0
                ase_prev = 0.0
                n_eff = 0.0
                hold = t_hold
                n_changes += 1
        length[n] = m
    return n_changes, n_restarts, -1


@jit
def dfe_run(r, ref, train, n_ff, nb0, nb_min, nb_max, variable, chi, window, probe,
            alg, mu, reg, vs_a, vs_rho, vs_mu0, vs_mu_min, pw_beta, lam, delta,
            e2, dec, length, steps):
    """Run a DFE whose feedback section optionally adapts its length.

    The regressor is ``[r(n), ..., r(n-Nf+1), s(n-D-1), ..., s(n-D-Nb)]``
    where ``s`` are the references fed back (training symbols or decisions).
    ``length`` records the active feedback length N_b.
    """
    n_samples = r.shape[0]
    m_max = n_ff + nb_max
    u = np.zeros(m_max)
    fb = np.zeros(nb_max)
    w = np.zeros(m_max)
    pm = np.zeros((m_max, m_max))
    pu = np.zeros(m_max)
    nb = nb0
    m = n_ff + nb
    _rls_reset(w, pm, m, delta)
    power = 1.0
    if alg == ALG_VSLMS:
        step = vs_mu0
    elif alg == ALG_LMS and variable:
        step = min(mu, _lms_bound(m, power))
    else:
        step = mu
    tp_last = 0.0
    tp_prev = 0.0
    sse = 0.0
    count = 0
    since_probe = 0
    n_changes = 0
    n_restarts = 0
    for n in range(n_samples):
        for i in range(n_ff - 1, 0, -1):
            u[i] = u[i - 1]
        u[0] = r[n]
        for j in range(nb):
            u[n_ff + j] = fb[j]
        y = 0.0
        for i in range(m):
            y += w[i] * u[i]
        dh = 1.0 if y >= 0.0 else -1.0
        dec[n] = dh
        d = ref[n] if train[n] else dh
        e = d - y
        e2[n] = (ref[n] - y) * (ref[n] - y)

        sq = 0.0
        for i in range(m):
            sq += u[i] * u[i]
        power = pw_beta * power + (1.0 - pw_beta) * sq / m
        _adapt(alg, w, u, m, e, step, reg, sq, lam, pm, pu)
        if alg == ALG_VSLMS:
            step = vs_a * step + vs_rho * e * e
            if step < vs_mu_min:
                step = vs_mu_min
            bound = _lms_bound(m, power)
            if step > bound:
                step = bound
        steps[n] = lam if alg == ALG_RLS else step

        if _diverged(alg, w, m, pm):
            if alg == ALG_RLS:
                _rls_reset(w, pm, m, delta)
                n_restarts += 1
            else:
                for k in range(n, n_samples):
                    e2[k] = np.inf
                    dec[k] = 0.0
                    length[k] = nb
                return n_changes, n_restarts, n

        for j in range(nb_max - 1, 0, -1):
            fb[j] = fb[j - 1]
        if nb_max > 0:
            fb[0] = d

        if variable:
            wl = w[n_ff + nb - 1]
            tp_last += wl * wl
            if nb >= 2:
                wp = w[n_ff + nb - 2]
                tp_prev += wp * wp
            sse += e * e
            count += 1
            since_probe += 1
            if count == window:
                thr = chi * sse
                new_nb = nb
                if tp_last > thr and nb < nb_max:
                    new_nb = nb + 1
                elif tp_last < thr and tp_prev < thr and nb > nb_min:
                    new_nb = nb - 1
                if probe > 0 and since_probe >= probe:
                    new_nb = nb_max
                    since_probe = 0
                if new_nb != nb:
                    old_m = m
                    nb = new_nb
                    m = n_ff + nb
                    if m > old_m:
                        if alg == ALG_RLS:
                            _rls_grow(w, pm, old_m, m, delta)
                    else:
                        if alg == ALG_RLS:
                            _rls_drop(w, pm, m, old_m)
                        else:
                            for i in range(m, old_m):
                                w[i] = 0.0
                    if alg == ALG_LMS:
                        step = min(mu, _lms_bound(m, power))
                    elif alg == ALG_VSLMS:
                        bound = _lms_bound(m, power)
                        if step > bound:
                            step = bound
                    n_changes += 1
                tp_last = 0.0
                tp_prev = 0.0
                sse = 0.0
                count = 0
        length[n] = nb
    return n_changes, n_restarts, -1
