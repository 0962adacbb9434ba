"""Compiled inner loops shared by CFR, CCFR and best-response evaluation.

Every kernel works on a player's strategy space in flat form:

``action_ptr``   infoset ``j`` owns sequences ``action_ptr[j]:action_ptr[j+1]``
``in_*``         CSR over infosets: the (sequence, weight) pairs feeding it
``succ_*``       CSR over sequences: the (infoset, weight) pairs it feeds

Infosets are numbered topologically (feeders before the fed).  Sequence 0 is
the empty sequence with realization weight 1.
"""

import numpy as np
from numba import njit

STEP_CONSTANT = 0
STEP_DECAYING = 1


@njit(cache=True)
def realization(action_ptr, in_ptr, in_seq, in_w, behav, out):
    out[0] = 1.0
    n_info = action_ptr.shape[0] - 1
    for j in range(n_info):
        m = 0.0
        for k in range(in_ptr[j], in_ptr[j + 1]):
            m += in_w[k] * out[in_seq[k]]
        for s in range(action_ptr[j], action_ptr[j + 1]):
            out[s] = m * behav[s]


@njit(cache=True)
def spmv(indptr, indices, data, v, out, sign):
    n = indptr.shape[0] - 1
    for r in range(n):
        acc = 0.0
        for k in range(indptr[r], indptr[r + 1]):
            acc += data[k] * v[indices[k]]
        out[r] = sign * acc


@njit(cache=True)
def regret_matching(action_ptr, regrets, behav):
    n_info = action_ptr.shape[0] - 1
    for j in range(n_info):
        lo = action_ptr[j]
        hi = action_ptr[j + 1]
        pos = 0.0
        for s in range(lo, hi):
            if regrets[s] > 0.0:
                pos += regrets[s]
        if pos > 0.0:
            for s in range(lo, hi):
                behav[s] = regrets[s] / pos if regrets[s] > 0.0 else 0.0
        else:
            u = 1.0 / (hi - lo)
            for s in range(lo, hi):
                behav[s] = u


@njit(cache=True)
def tilted_values(action_ptr, succ_ptr, succ_info, succ_w, behav, g, tilt, vals, ivals):
    """Bottom-up sweep: action values ``vals`` and infoset values ``ivals``.

    ``vals[s] = (g[s] + sum_succ w * ivals[I']) - tilt[s]`` and
    ``ivals[I] = sum_a behav[s] * vals[s]``.  ``vals[0]`` is the value of the
    empty sequence (the whole game from the player's side).
    """
    n_info = action_ptr.shape[0] - 1
    for j in range(n_info - 1, -1, -1):
        v_info = 0.0
        for s in range(action_ptr[j], action_ptr[j + 1]):
            v = g[s]
            for k in range(succ_ptr[s], succ_ptr[s + 1]):
                v += succ_w[k] * ivals[succ_info[k]]
            v = v - tilt[s]
            vals[s] = v
            v_info += behav[s] * v
        ivals[j] = v_info
    v = g[0]
    for k in range(succ_ptr[0], succ_ptr[1]):
        v += succ_w[k] * ivals[succ_info[k]]
    vals[0] = v - tilt[0]


@njit(cache=True)
def regret_update(action_ptr, succ_ptr, succ_info, succ_w, behav, regrets, g, tilt,
                  vals, ivals):
    """One (C)CFR update of a single player; ``behav`` is replaced in place."""
    tilted_values(action_ptr, succ_ptr, succ_info, succ_w, behav, g, tilt, vals, ivals)
    n_info = action_ptr.shape[0] - 1
    for j in range(n_info):
        for s in range(action_ptr[j], action_ptr[j + 1]):
            regrets[s] += vals[s] - ivals[j]
    regret_matching(action_ptr, regrets, behav)


@njit(cache=True)
def best_response(action_ptr, succ_ptr, succ_info, succ_w, g, ivals, choice):
    """Maximize ``<g, x>`` over the polytope; returns the optimum.

    ``choice[j]`` receives the local index of the chosen action; ties go to
    the lowest index.
    """
    n_info = action_ptr.shape[0] - 1
    for j in range(n_info - 1, -1, -1):
        best = -np.inf
        arg = 0
        lo = action_ptr[j]
        for s in range(lo, action_ptr[j + 1]):
            v = g[s]
            for k in range(succ_ptr[s], succ_ptr[s + 1]):
                v += succ_w[k] * ivals[succ_info[k]]
            if v > best:
                best = v
                arg = s - lo
        ivals[j] = best
        choice[j] = arg
    v = g[0]
    for k in range(succ_ptr[0], succ_ptr[1]):
        v += succ_w[k] * ivals[succ_info[k]]
    return v


@njit(cache=True)
def ccfr_chunk(
    # player 1 (maximizer, constrained)
    ap1, inp1, ins1, inw1, sp1, si1, sw1,
    # player 2
    ap2, inp2, ins2, inw2, sp2, si2, sw2,
    # payoff rows by player-1 sequence and by player-2 sequence
    a_ptr, a_idx, a_val, at_ptr, at_idx, at_val,
    # linear constraints (rows) and their transpose (rows by sequence)
    c_ptr, c_idx, c_val, c_off, ct_ptr, ct_idx, ct_val,
    # state
    behav1, behav2, reg1, reg2, x1, y, xbar1, xbar2, ssum1, ssum2,
    lam, lam_sum, f_prev, f_sum, lamf_sum,
    t_start, n_iters, step_kind, step_c, beta, clamp,
):
    """Run ``n_iters`` CCFR iterations in the alternating order of the loop.

    Per iteration ``t``: player 2 takes a CFR step against the previous
    player-1 strategy; the multipliers move along ``f_prev`` (the constraint
    values of that previous strategy) and are clamped to ``[0, beta]``; player
    1 takes a tilted CFR step against the new player-2 strategy.  Both running
    means absorb the freshly produced strategies, and ``f_prev`` is refreshed
    from the new player-1 strategy.  ``f_sum`` and ``lamf_sum`` accumulate
    ``f(x^t)`` and ``lam^t . f(x^t)`` for the multiplier regret.
    """
    n1 = x1.shape[0]
    n2 = y.shape[0]
    k = lam.shape[0]
    g1 = np.empty(n1)
    g2 = np.empty(n2)
    tilt1 = np.zeros(n1)
    tilt2 = np.zeros(n2)
    vals1 = np.empty(n1)
    vals2 = np.empty(n2)
    iv1 = np.empty(ap1.shape[0] - 1)
    iv2 = np.empty(ap2.shape[0] - 1)
    for it in range(n_iters):
        t = t_start + it + 1
        # unconstrained player
        spmv(at_ptr, at_idx, at_val, x1, g2, -1.0)
        regret_update(ap2, sp2, si2, sw2, behav2, reg2, g2, tilt2, vals2, iv2)
        realization(ap2, inp2, ins2, inw2, behav2, y)
        # multipliers
        if k > 0:
            if step_kind == STEP_DECAYING:
                alpha = step_c / np.sqrt(t)
            else:
                alpha = step_c
            for i in range(k):
                li = lam[i] + alpha * f_prev[i]
                if li < 0.0:
                    li = 0.0
                if clamp and li > beta:
                    li = beta
                lam[i] = li
                lam_sum[i] += li
            for s in range(n1):
                acc = 0.0
                for q in range(ct_ptr[s], ct_ptr[s + 1]):
                    acc += ct_val[q] * lam[ct_idx[q]]
                tilt1[s] = acc
        # constrained player
        spmv(a_ptr, a_idx, a_val, y, g1, 1.0)
        regret_update(ap1, sp1, si1, sw1, behav1, reg1, g1, tilt1, vals1, iv1)
        realization(ap1, inp1, ins1, inw1, behav1, x1)
        inv = 1.0 / t
        for s in range(n2):
            xbar2[s] += (y[s] - xbar2[s]) * inv
            ssum2[s] += y[s]
        for s in range(n1):
            xbar1[s] += (x1[s] - xbar1[s]) * inv
            ssum1[s] += x1[s]
        for i in range(k):
            acc = 0.0
            for q in range(c_ptr[i], c_ptr[i + 1]):
                acc += c_val[q] * x1[c_idx[q]]
            f_prev[i] = acc - c_off[i]
            f_sum[i] += f_prev[i]
            lamf_sum[0] += lam[i] * f_prev[i]
