"""Batched search over control patterns.

Both synthesis routes reduce to the same question: over all mode sequences
up to a horizon, which ones map a (parametrically extended) tile inside a
target, and how far can the extension parameter grow before inclusion
breaks.  The search walks pattern prefixes level by level, keeping whole
levels as numpy batches.  Rows are kept in lexicographic pattern order so
argmax tie-breaking reproduces enumeration order.

Two propagation styles:

* joint scan - composes the per-step maps and bounds the image of the tile
  under the exact composed map (tightest box for a given pattern);
* component scan - the step-by-step recursion where the other component's
  state is replaced by a fixed parametric box each step, which is the
  distributed over-approximation and is deliberately not collapsed into a
  composed map.

Each candidate's admissibility is feasibility of its margins at a = 0; the
returned value is the closed-form supremum of feasible a (conjunction of
affine one-variable inequalities).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import AffineMap, Box, ParamBox

__all__ = ["ScanBudgetError", "PatternHit", "scan_joint_patterns",
           "scan_component_patterns"]

NODE_BUDGET = 6_000_000


class ScanBudgetError(RuntimeError):
    """Pattern enumeration would exceed the node budget."""


@dataclass(frozen=True)
class PatternHit:
    """Best admissible pattern of one length: supremum a and the sequence."""

    a_sup: float
    pattern: tuple[int, ...]


def _inclusion_margins(lo0, lo1, hi0, hi1, target: ParamBox):
    """Stacked margin coefficients m0 + m1*a >= 0 for batched boxes.

    Arrays are (P, n); the result pair is (P, 2n).
    """
    m0 = np.concatenate([lo0 - target.lo0, target.hi0 - hi0], axis=1)
    m1 = np.concatenate([lo1 - target.lo1, target.hi1 - hi1], axis=1)
    return m0, m1


def _feasible_and_sup(m0, m1, tol):
    """Row-wise feasibility at a = 0 and supremum of feasible a."""
    feas = np.all(m0 >= -tol, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        caps = np.where(m1 < 0.0, m0 / np.where(m1 < 0.0, -m1, 1.0), np.inf)
    sup = np.min(caps, axis=1)
    return feas, sup


def _record_best(best: dict[int, PatternHit], length: int, feas, a_vals, pats):
    vals = np.where(feas, a_vals, -np.inf)
    if vals.size == 0:
        return
    idx = int(np.argmax(vals))
    if vals[idx] == -np.inf:
        return
    best[length] = PatternHit(float(vals[idx]), tuple(int(v) for v in pats[idx]))


def scan_joint_patterns(maps: list[AffineMap], tile: ParamBox, target: Box,
                        horizon: int, intermediate: ParamBox | None = None,
                        tol: float = 0.0,
                        node_budget: int = NODE_BUDGET) -> dict[int, PatternHit]:
    """Per-length best pattern steering the extended tile into the target.

    maps: one affine map per admissible joint mode, in enumeration order.
    For each length k in 1..horizon, a pattern is admissible when the exact
    image of the tile under its composed map lies in the target at a = 0
    (and, if `intermediate` is given, every strict-prefix image lies in
    that parametric box at a = 0, the stability side constraint).
    """
    n = tile.dims
    n_modes = len(maps)
    final_target = ParamBox.from_box(target)
    # batched composed maps, row-major so pattern rows stay lexicographic
    mats = np.eye(n)[None, :, :]
    offs = np.zeros((1, n))
    pats = np.zeros((1, 0), dtype=np.int32)
    feas_acc = np.ones(1, dtype=bool)
    sup_acc = np.full(1, np.inf)
    mode_mats = np.stack([m.matrix for m in maps])
    mode_offs = np.stack([m.offset for m in maps])
    best: dict[int, PatternHit] = {}
    nodes = 0
    for level in range(1, horizon + 1):
        p = mats.shape[0]
        nodes += p * n_modes
        if nodes > node_budget:
            raise ScanBudgetError(
                f"joint pattern scan needs more than {node_budget} nodes "
                f"({n_modes} modes, horizon {horizon}); reduce K or the mode set")
        # extend every prefix by every mode: new index = prefix * n_modes + mode
        mats = np.einsum("mij,pjk->pmik", mode_mats, mats).reshape(-1, n, n)
        offs = (np.einsum("mij,pj->pmi", mode_mats, offs)
                + mode_offs[None, :, :]).reshape(-1, n)
        pats = np.concatenate(
            [np.repeat(pats, n_modes, axis=0),
             np.tile(np.arange(n_modes, dtype=np.int32), p)[:, None]], axis=1)
        feas_acc = np.repeat(feas_acc, n_modes)
        sup_acc = np.repeat(sup_acc, n_modes)
        # exact image of the parametric tile under each composed map
        pos = np.maximum(mats, 0.0)
        neg = np.minimum(mats, 0.0)
        lo0 = pos @ tile.lo0 + neg @ tile.hi0 + offs
        lo1 = pos @ tile.lo1 + neg @ tile.hi1
        hi0 = pos @ tile.hi0 + neg @ tile.lo0 + offs
        hi1 = pos @ tile.hi1 + neg @ tile.lo1
        m0, m1 = _inclusion_margins(lo0, lo1, hi0, hi1, final_target)
        feas_fin, sup_fin = _feasible_and_sup(m0, m1, tol)
        _record_best(best, level, feas_acc & feas_fin,
                     np.minimum(sup_acc, sup_fin), pats)
        if level == horizon:
            break
        if intermediate is not None:
            m0i, m1i = _inclusion_margins(lo0, lo1, hi0, hi1, intermediate)
            feas_int, sup_int = _feasible_and_sup(m0i, m1i, tol)
            feas_acc = feas_acc & feas_int
            sup_acc = np.minimum(sup_acc, sup_int)
            keep = feas_acc
            if not np.all(keep):
                mats, offs, pats = mats[keep], offs[keep], pats[keep]
                feas_acc, sup_acc = feas_acc[keep], sup_acc[keep]
            if mats.shape[0] == 0:
                break
    return best


def scan_component_patterns(own_mats: list[np.ndarray],
                            other_mats: list[np.ndarray],
                            offsets: list[np.ndarray],
                            x0: ParamBox, other_init: ParamBox,
                            other_margin: ParamBox,
                            final_target: Box, intermediate: ParamBox,
                            horizon: int, tol: float = 0.0,
                            node_budget: int = NODE_BUDGET
                            ) -> dict[int, PatternHit]:
    """Per-length best component pattern under the step-wise recursion.

    The k-th step applies the component's row map with its own-block
    columns against the running box and its other-block columns against the
    neighbour envelope: the neighbour's initial set `other_init` on the
    first step (both components start a macro-step together) and the
    certified wander envelope `other_margin` afterwards.  Strict-prefix
    steps must lie inside `intermediate` (a-dependent margin box), the
    final step inside `final_target`; all checks at a = 0, with the
    supremum over a returned.
    """
    n_modes = len(own_mats)

    # constant contribution of the other component's envelope, per mode
    def contrib(moth, off, envelope):
        pos = np.maximum(moth, 0.0)
        neg = np.minimum(moth, 0.0)
        return (pos @ envelope.lo0 + neg @ envelope.hi0 + off,
                pos @ envelope.lo1 + neg @ envelope.hi1,
                pos @ envelope.hi0 + neg @ envelope.lo0 + off,
                pos @ envelope.hi1 + neg @ envelope.lo1)

    contribs_init = [contrib(m, off, other_init)
                     for m, off in zip(other_mats, offsets)]
    contribs_rest = [contrib(m, off, other_margin)
                     for m, off in zip(other_mats, offsets)]
    own_pos = [np.maximum(m, 0.0) for m in own_mats]
    own_neg = [np.minimum(m, 0.0) for m in own_mats]
    lo0 = x0.lo0[None, :]
    lo1 = x0.lo1[None, :]
    hi0 = x0.hi0[None, :]
    hi1 = x0.hi1[None, :]
    pats = np.zeros((1, 0), dtype=np.int32)
    sup_acc = np.full(1, np.inf)
    best: dict[int, PatternHit] = {}
    nodes = 0
    for level in range(1, horizon + 1):
        p = lo0.shape[0]
        nodes += p * n_modes
        if nodes > node_budget:
            raise ScanBudgetError(
                f"component pattern scan needs more than {node_budget} nodes; "
                "reduce K or the component mode set")
        contribs = contribs_init if level == 1 else contribs_rest
        parts = []
        for m in range(n_modes):
            c_lo0, c_lo1, c_hi0, c_hi1 = contribs[m]
            mp, mn = own_pos[m], own_neg[m]
            parts.append((
                lo0 @ mp.T + hi0 @ mn.T + c_lo0,
                lo1 @ mp.T + hi1 @ mn.T + c_lo1,
                hi0 @ mp.T + lo0 @ mn.T + c_hi0,
                hi1 @ mp.T + lo1 @ mn.T + c_hi1,
            ))
        # interleave to (prefix, mode) row order so rows remain lexicographic
        lo0 = np.stack([q[0] for q in parts], axis=1).reshape(-1, x0.dims)
        lo1 = np.stack([q[1] for q in parts], axis=1).reshape(-1, x0.dims)
        hi0 = np.stack([q[2] for q in parts], axis=1).reshape(-1, x0.dims)
        hi1 = np.stack([q[3] for q in parts], axis=1).reshape(-1, x0.dims)
        pats = np.concatenate(
            [np.repeat(pats, n_modes, axis=0),
             np.tile(np.arange(n_modes, dtype=np.int32), p)[:, None]], axis=1)
        sup_acc = np.repeat(sup_acc, n_modes)
        m0, m1 = _inclusion_margins(lo0, lo1, hi0, hi1,
                                    ParamBox.from_box(final_target))
        feas_fin, sup_fin = _feasible_and_sup(m0, m1, tol)
        _record_best(best, level, feas_fin, np.minimum(sup_acc, sup_fin), pats)
        if level == horizon:
            break
        m0i, m1i = _inclusion_margins(lo0, lo1, hi0, hi1, intermediate)
        feas_int, sup_int = _feasible_and_sup(m0i, m1i, tol)
        sup_acc = np.minimum(sup_acc, sup_int)
        keep = feas_int
        if not np.all(keep):
            lo0, lo1, hi0, hi1 = lo0[keep], lo1[keep], hi0[keep], hi1[keep]
            pats, sup_acc = pats[keep], sup_acc[keep]
        if lo0.shape[0] == 0:
            break
    return best
