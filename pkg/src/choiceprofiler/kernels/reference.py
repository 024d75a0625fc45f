"""Pure-numpy likelihood kernels.

These are the reference implementations of the per-person log-likelihood
and score computations for the three model families.  A compiled backend
with identical signatures may be selected instead at import time; both
must return the same values up to floating-point reassociation.

Shared conventions:
  * ``attrs``:   (rows, J, A) float64, person blocks contiguous,
  * ``choices0``: (rows,) int64, 0-based chosen alternative,
  * ``starts``:  (N+1,) int64 person row offsets, strictly increasing,
  * log-sum-exp stabilisation by the per-row maximum utility everywhere,
  * per-person products over tasks accumulated in log space.

Score column layouts (documented here, relied on by the models layer):
  * MNL:  one column per attribute.
  * LC:   coefficient for attribute a, class c in column a*C + c, then the
          C-1 free class-allocation constants.
  * MMNL: for each random dimension d: its location parameter, followed by
          its Cholesky row entries (d, 0..d).
"""

from __future__ import annotations

import numpy as np

from ..exceptions import EvaluationError


def _locate_row(starts, row):
    """(person ordinal, task ordinal) of a flat row index."""
    n = int(np.searchsorted(starts, row, side="right") - 1)
    return n, int(row - starts[n])


def _check_finite_utilities(v, starts):
    if np.isfinite(v).all():
        return
    row = int(np.argwhere(~np.isfinite(v).all(axis=tuple(range(1, v.ndim))))[0])
    n, t = _locate_row(starts, row)
    raise EvaluationError(
        f"non-finite utility at person {n}, task {t} (overflow or bad parameters)"
    )


def _row_logit(attrs, choices0, beta, starts, need_grad):
    """Per-row chosen log-probability and score rows for a plain logit."""
    v = attrs @ beta
    _check_finite_utilities(v, starts)
    vmax = v.max(axis=1)
    ex = np.exp(v - vmax[:, None])
    den = ex.sum(axis=1)
    r = np.arange(attrs.shape[0])
    ll_rows = v[r, choices0] - vmax - np.log(den)
    srow = None
    if need_grad:
        p = ex / den[:, None]
        srow = attrs[r, choices0, :] - np.einsum("rj,rja->ra", p, attrs)
    return ll_rows, srow


def mnl_panel(attrs, choices0, starts, beta, need_grad=True):
    ll_rows, srow = _row_logit(attrs, choices0, beta, starts, need_grad)
    seg = starts[:-1]
    ll_n = np.add.reduceat(ll_rows, seg)
    scores = np.add.reduceat(srow, seg, axis=0) if need_grad else None
    return ll_n, scores


def lc_panel(attrs, choices0, starts, coef, delta, need_grad=True):
    """Latent-class panel likelihood: per-person mixture over classes of
    within-person task products, with posterior-weighted scores."""
    C, A = coef.shape
    N = len(starts) - 1
    seg = starts[:-1]

    S = np.empty((N, C))
    G = np.empty((N, C, A)) if need_grad else None
    for c in range(C):
        ll_rows, srow = _row_logit(attrs, choices0, coef[c], starts, need_grad)
        S[:, c] = np.add.reduceat(ll_rows, seg)
        if need_grad:
            G[:, c, :] = np.add.reduceat(srow, seg, axis=0)

    dmax = delta.max()
    log_pi = delta - (dmax + np.log(np.exp(delta - dmax).sum()))
    M = log_pi[None, :] + S
    mmax = M.max(axis=1)
    ll_n = mmax + np.log(np.exp(M - mmax[:, None]).sum(axis=1))

    scores = None
    if need_grad:
        w = np.exp(M - ll_n[:, None])  # posterior class weights
        pi = np.exp(log_pi)
        scores = np.empty((N, A * C + C - 1))
        scores[:, :A * C] = (w[:, :, None] * G).transpose(0, 2, 1).reshape(N, A * C)
        scores[:, A * C:] = w[:, :C - 1] - pi[None, :C - 1]
    return ll_n, scores


def mmnl_panel(attrs, choices0, starts, cost_idx, mu, L, signs, z,
               need_grad=True, person_block=64):
    """Simulated panel likelihood for the money-metric (WTP-space) mixed
    logit with fully correlated lognormal coefficients.

    The per-draw task product is accumulated in log space and draws are
    combined with log-sum-exp; gradients are propagated analytically
    through the exp and Cholesky transforms, draw by draw.
    """
    N, R, D = z.shape
    K = D + D * (D + 1) // 2
    counts = np.diff(starts)
    val = np.array([d for d in range(D) if d != cost_idx], dtype=np.intp)
    r_all = None

    ll_n = np.empty(N)
    scores = np.empty((N, K)) if need_grad else None
    mu_cols = np.array([d + d * (d + 1) // 2 for d in range(D)], dtype=np.intp)

    for b0 in range(0, N, person_block):
        b1 = min(b0 + person_block, N)
        B = b1 - b0
        zb = z[b0:b1]                                   # (B, R, D)
        beta = signs * np.exp(mu + zb @ L.T)            # (B, R, D)
        lo, hi = int(starts[b0]), int(starts[b1])
        nb_rows = hi - lo
        Xb = attrs[lo:hi]
        yb = choices0[lo:hi]
        pb = np.repeat(np.arange(B), counts[b0:b1])
        local = (starts[b0:b1] - lo).astype(np.intp)
        rloc = np.arange(nb_rows)

        beta_rows = beta[pb]                            # (rows_b, R, D)
        inner = (Xb[:, None, :, cost_idx]
                 + np.einsum("rjd,rnd->rnj", Xb[:, :, val], beta_rows[:, :, val]))
        V = beta_rows[:, :, cost_idx][:, :, None] * inner   # (rows_b, R, J)
        if not np.isfinite(V).all():
            bad = int(np.argwhere(~np.isfinite(V).all(axis=(1, 2)))[0])
            n, t = _locate_row(starts, lo + bad)
            raise EvaluationError(
                f"non-finite utility at person {n}, task {t} "
                f"(overflow or bad parameters)"
            )
        vmax = V.max(axis=2)
        ex = np.exp(V - vmax[:, :, None])
        den = ex.sum(axis=2)
        ll_rows = (np.take_along_axis(V, yb[:, None, None], axis=2)[:, :, 0]
                   - vmax - np.log(den))                # (rows_b, R)
        S = np.add.reduceat(ll_rows, local, axis=0)     # (B, R)

        smax = S.max(axis=1)
        if not np.isfinite(smax).all():
            n = b0 + int(np.argwhere(~np.isfinite(smax))[0])
            raise EvaluationError(
                f"simulated likelihood underflow for person {n} (all draws zero)"
            )
        lse = smax + np.log(np.exp(S - smax[:, None]).sum(axis=1))
        ll_n[b0:b1] = lse - np.log(R)

        if need_grad:
            p = ex / den[:, :, None]
            e = -p
            e[rloc, :, yb] += 1.0                       # (rows_b, R, J)
            dval_rows = (beta_rows[:, :, cost_idx][:, :, None]
                         * np.einsum("rnj,rjd->rnd", e, Xb[:, :, val]))
            dcost_rows = np.einsum("rnj,rnj->rn", e, inner)
            dbeta_rows = np.empty((nb_rows, R, D))
            dbeta_rows[:, :, val] = dval_rows
            dbeta_rows[:, :, cost_idx] = dcost_rows
            dbeta = np.add.reduceat(dbeta_rows, local, axis=0)  # (B, R, D)

            w = np.exp(S - lse[:, None])                # draw weights, sum to 1
            T = w[:, :, None] * dbeta * beta            # (B, R, D)
            dmu = T.sum(axis=1)                         # (B, D)
            dL = np.einsum("brd,brj->bdj", T, zb)       # (B, D, D)
            sc = scores[b0:b1]
            sc[:, mu_cols] = dmu
            for d in range(D):
                off = d + d * (d + 1) // 2 + 1
                sc[:, off:off + d + 1] = dL[:, d, :d + 1]
    return ll_n, scores
