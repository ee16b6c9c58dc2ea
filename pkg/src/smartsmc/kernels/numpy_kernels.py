"""Lockstep vectorised simulation: every lane advances one step per loop iteration.

Same outputs as :mod:`.numba_kernels`, bit for bit.  uint64 arrays wrap on
overflow silently, which is exactly the arithmetic the PRNG needs.
"""

from __future__ import annotations

import numpy as np

from ..scheduler import GOLDEN, MIX1, MIX2, MODULUS
from . import codes

_GOLDEN = np.uint64(GOLDEN)
_MIX1 = np.uint64(MIX1)
_MIX2 = np.uint64(MIX2)
_M = np.uint64(MODULUS)
_ZERO = np.uint64(0)
_UNIT = 2.0**-53


def mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def to_unit(r: np.ndarray) -> np.ndarray:
    return (r >> np.uint64(11)).astype(np.float64) * _UNIT


_CMP = {
    codes.OP_EQ: np.equal,
    codes.OP_NE: np.not_equal,
    codes.OP_LT: np.less,
    codes.OP_LE: np.less_equal,
    codes.OP_GT: np.greater,
    codes.OP_GE: np.greater_equal,
}


def eval_code(ops, args, lo, hi, state: np.ndarray) -> np.ndarray:
    n = state.shape[0]
    stack: list[np.ndarray] = []
    for pc in range(lo, hi):
        op = ops[pc]
        if op == codes.OP_CONST:
            stack.append(np.full(n, args[pc], dtype=np.int64))
        elif op == codes.OP_VAR:
            stack.append(state[:, args[pc]])
        elif op == codes.OP_NEG:
            stack.append(-stack.pop())
        elif op == codes.OP_NOT:
            stack.append((stack.pop() == 0).astype(np.int64))
        else:
            b = stack.pop()
            a = stack.pop()
            if op == codes.OP_ADD:
                stack.append(a + b)
            elif op == codes.OP_SUB:
                stack.append(a - b)
            elif op == codes.OP_MUL:
                stack.append(a * b)
            elif op == codes.OP_AND:
                stack.append(((a != 0) & (b != 0)).astype(np.int64))
            elif op == codes.OP_OR:
                stack.append(((a != 0) | (b != 0)).astype(np.int64))
            else:
                stack.append(_CMP[op](a, b).astype(np.int64))
    return stack[0]


def _hash_state(h: np.ndarray, state: np.ndarray, var_lo, var_bits) -> np.ndarray:
    for i in range(state.shape[1]):
        for _ in range(var_bits[i]):
            h = h + h
            h = np.where(h >= _M, h - _M, h)
        h = h + (state[:, i] - var_lo[i]).astype(np.uint64) % _M
        h = np.where(h >= _M, h - _M, h)
    return h


def _choose(h: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Index in ``[0, count)`` per lane; lanes with count 0 get 0."""
    n = np.maximum(counts, 1).astype(np.uint64)
    rem = (_ZERO - n) % n
    limit = _ZERO - rem
    s = h + _GOLDEN
    r = mix64(s)
    pending = (rem != _ZERO) & (r >= limit)
    while pending.any():
        s[pending] += _GOLDEN
        r[pending] = mix64(s[pending])
        pending &= (rem != _ZERO) & (r >= limit)
    return (r % n).astype(np.int64)


def eval_property(prop, traces: np.ndarray) -> np.ndarray:
    kind, pa, pb, bound, pvar, pcmp, pvalue, node_horizon, length = prop
    n = traces.shape[0]
    table: list[np.ndarray] = []
    for node in range(kind.shape[0]):
        k = kind[node]
        width = length + 1 - node_horizon[node]
        if k == codes.P_CONST:
            res = np.full((n, width), pvalue[node] != 0)
        elif k == codes.P_ATOM:
            res = _CMP[pcmp[node]](traces[:, :width, pvar[node]], pvalue[node])
        elif k == codes.P_NOT:
            res = ~table[pa[node]][:, :width]
        elif k == codes.P_AND:
            res = table[pa[node]][:, :width] & table[pb[node]][:, :width]
        elif k == codes.P_OR:
            res = table[pa[node]][:, :width] | table[pb[node]][:, :width]
        elif k == codes.P_NEXT:
            res = table[pa[node]][:, 1 : width + 1]
        elif k == codes.P_FINALLY:
            child = table[pa[node]]
            res = np.zeros((n, width), dtype=bool)
            for i in range(bound[node] + 1):
                res |= child[:, i : i + width]
        elif k == codes.P_GLOBALLY:
            child = table[pa[node]]
            res = np.ones((n, width), dtype=bool)
            for i in range(bound[node] + 1):
                res &= child[:, i : i + width]
        else:
            left, right = table[pa[node]], table[pb[node]]
            res = np.zeros((n, width), dtype=bool)
            alive = np.ones((n, width), dtype=bool)
            for i in range(bound[node] + 1):
                res |= alive & right[:, i : i + width]
                alive &= ~right[:, i : i + width] & left[:, i : i + width]
        table.append(res)
    return table[-1][:, 0]


def simulate_lanes(model, prop, sigmas, seeds, memoryless, record, traces, verdicts, deadlocks, status):
    (ops, args, guard_lo, guard_hi, br_lo, br_hi, br_cum, up_lo, up_hi, up_var,
     up_code_lo, up_code_hi, var_lo, var_hi, var_bits, init, _stack) = model
    length = prop[-1]
    n = sigmas.shape[0]
    nv = var_lo.shape[0]
    ncmd = guard_lo.shape[0]
    state = np.tile(init, (n, 1))
    lane_traces = np.empty((n, length + 1, nv), dtype=np.int64)
    lane_traces[:, 0] = state
    prob = seeds.copy()
    stuck = np.zeros(n, dtype=bool)
    bad = np.zeros(n, dtype=bool)
    base = sigmas % _M
    h = base
    for t in range(length):
        if memoryless:
            h = base
        h = _hash_state(h, state, var_lo, var_bits)
        en = np.empty((n, ncmd), dtype=bool)
        for c in range(ncmd):
            en[:, c] = eval_code(ops, args, guard_lo[c], guard_hi[c], state) != 0
        counts = en.sum(axis=1)
        idx = _choose(h, counts)
        cmd = np.argmax(np.cumsum(en, axis=1) > idx[:, None], axis=1)
        prob = prob + _GOLDEN
        u = to_unit(mix64(prob))
        live = (counts > 0) & ~bad
        stuck |= counts == 0
        new = state.copy()
        for c in range(ncmd):
            lanes_c = np.flatnonzero(live & (cmd == c))
            if lanes_c.size == 0:
                continue
            cum = br_cum[br_lo[c] : br_hi[c]]
            k = np.minimum(np.searchsorted(cum, u[lanes_c], side="right"), cum.size - 1)
            for j, br in enumerate(range(br_lo[c], br_hi[c])):
                sel = lanes_c[k == j]
                if sel.size == 0:
                    continue
                sub = state[sel]
                for upd in range(up_lo[br], up_hi[br]):
                    w = up_var[upd]
                    v = eval_code(ops, args, up_code_lo[upd], up_code_hi[upd], sub)
                    bad[sel[(v < var_lo[w]) | (v > var_hi[w])]] = True
                    new[sel, w] = v
        state = np.where(bad[:, None], state, new)
        lane_traces[:, t + 1] = state
    ok = eval_property(prop, lane_traces)
    verdicts[:] = np.where(bad, 0, ok).astype(np.int8)
    deadlocks[:] = stuck
    status[:] = np.where(bad, codes.STATUS_RANGE, codes.STATUS_OK)
    if record:
        traces[:] = lane_traces


def bernoulli_lanes(probs, seeds, verdicts):
    verdicts[:] = to_unit(mix64(seeds + _GOLDEN)) < probs


def lane_seeds(master, tag, sigmas, lane_ids, out):
    s = np.full(sigmas.shape, _ZERO, dtype=np.uint64)
    for w in (np.uint64(master), np.uint64(tag), sigmas, lane_ids):
        s = mix64((s ^ w) + _GOLDEN)
    out[:] = s
