"""Per-lane simulation loops compiled with numba (``nogil`` so worker threads overlap)."""

from __future__ import annotations

import numpy as np

from .._accel import njit
from ..scheduler import GOLDEN, MIX1, MIX2, MODULUS
from . import codes

_GOLDEN = np.uint64(GOLDEN)
_MIX1 = np.uint64(MIX1)
_MIX2 = np.uint64(MIX2)
_M = np.uint64(MODULUS)
_ZERO = np.uint64(0)
_S11 = np.uint64(11)
_S27 = np.uint64(27)
_S30 = np.uint64(30)
_S31 = np.uint64(31)
_UNIT = 2.0**-53

OP_CONST = codes.OP_CONST
OP_VAR = codes.OP_VAR
OP_NEG = codes.OP_NEG
OP_NOT = codes.OP_NOT
OP_ADD = codes.OP_ADD
OP_SUB = codes.OP_SUB
OP_MUL = codes.OP_MUL
OP_EQ = codes.OP_EQ
OP_NE = codes.OP_NE
OP_LT = codes.OP_LT
OP_LE = codes.OP_LE
OP_GT = codes.OP_GT
OP_GE = codes.OP_GE
OP_AND = codes.OP_AND
P_CONST = codes.P_CONST
P_ATOM = codes.P_ATOM
P_NOT = codes.P_NOT
P_AND = codes.P_AND
P_OR = codes.P_OR
P_NEXT = codes.P_NEXT
P_FINALLY = codes.P_FINALLY
P_GLOBALLY = codes.P_GLOBALLY


@njit(cache=True, nogil=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@njit(cache=True, nogil=True)
def _cmp(op, a, b):
    if op == OP_EQ:
        return a == b
    if op == OP_NE:
        return a != b
    if op == OP_LT:
        return a < b
    if op == OP_LE:
        return a <= b
    if op == OP_GT:
        return a > b
    return a >= b


@njit(cache=True, nogil=True)
def _eval_code(ops, args, lo, hi, state, stack):
    sp = 0
    for pc in range(lo, hi):
        op = ops[pc]
        if op == OP_CONST:
            stack[sp] = args[pc]
            sp += 1
        elif op == OP_VAR:
            stack[sp] = state[args[pc]]
            sp += 1
        elif op == OP_NEG:
            stack[sp - 1] = -stack[sp - 1]
        elif op == OP_NOT:
            stack[sp - 1] = 1 if stack[sp - 1] == 0 else 0
        else:
            b = stack[sp - 1]
            a = stack[sp - 2]
            sp -= 1
            if op == OP_ADD:
                r = a + b
            elif op == OP_SUB:
                r = a - b
            elif op == OP_MUL:
                r = a * b
            elif op == OP_AND:
                r = 1 if (a != 0 and b != 0) else 0
            elif op == codes.OP_OR:
                r = 1 if (a != 0 or b != 0) else 0
            else:
                r = 1 if _cmp(op, a, b) else 0
            stack[sp - 1] = r
    return stack[0]


@njit(cache=True, nogil=True)
def _hash_state(h, state, var_lo, var_bits):
    for i in range(state.shape[0]):
        for _ in range(var_bits[i]):
            h = h + h
            if h >= _M:
                h = h - _M
        v = np.uint64(state[i] - var_lo[i])
        if v >= _M:
            v = v % _M
        h = h + v
        if h >= _M:
            h = h - _M
    return h


@njit(cache=True, nogil=True)
def _eval_property(kind, a, b, bound, var, cmp, value, node_horizon, trace, table):
    length = trace.shape[0]
    for node in range(kind.shape[0]):
        k = kind[node]
        last = length - 1 - node_horizon[node]
        for pos in range(last + 1):
            if k == P_CONST:
                res = value[node] != 0
            elif k == P_ATOM:
                res = _cmp(cmp[node], trace[pos, var[node]], value[node])
            elif k == P_NOT:
                res = not table[a[node], pos]
            elif k == P_AND:
                res = table[a[node], pos] and table[b[node], pos]
            elif k == P_OR:
                res = table[a[node], pos] or table[b[node], pos]
            elif k == P_NEXT:
                res = table[a[node], pos + 1]
            elif k == P_FINALLY:
                res = False
                for i in range(bound[node] + 1):
                    if table[a[node], pos + i]:
                        res = True
                        break
            elif k == P_GLOBALLY:
                res = True
                for i in range(bound[node] + 1):
                    if not table[a[node], pos + i]:
                        res = False
                        break
            else:
                res = False
                for i in range(bound[node] + 1):
                    if table[b[node], pos + i]:
                        res = True
                        break
                    if not table[a[node], pos + i]:
                        break
            table[node, pos] = res
    return table[kind.shape[0] - 1, 0]


@njit(cache=True, nogil=True)
def simulate_lanes(model, prop, sigmas, seeds, memoryless, record, traces, verdicts, deadlocks, status):
    (ops, args, guard_lo, guard_hi, br_lo, br_hi, br_cum, up_lo, up_hi, up_var,
     up_code_lo, up_code_hi, var_lo, var_hi, var_bits, init, stack_size) = model
    (kind, pa, pb, bound, pvar, pcmp, pvalue, node_horizon, length) = prop
    nv = var_lo.shape[0]
    ncmd = guard_lo.shape[0]
    trace = np.empty((length + 1, nv), dtype=np.int64)
    state = np.empty(nv, dtype=np.int64)
    new = np.empty(nv, dtype=np.int64)
    choices = np.empty(ncmd, dtype=np.int64)
    stack = np.empty(stack_size + 1, dtype=np.int64)
    table = np.zeros((kind.shape[0], length + 1), dtype=np.bool_)
    # rejection threshold 2**64 - (2**64 mod n) for every possible choice count
    limits = np.empty(ncmd + 1, dtype=np.uint64)
    for k in range(1, ncmd + 1):
        nk = np.uint64(k)
        limits[k] = _ZERO - (_ZERO - nk) % nk
    for lane in range(sigmas.shape[0]):
        sigma = sigmas[lane]
        prob = seeds[lane]
        for i in range(nv):
            state[i] = init[i]
            trace[0, i] = init[i]
        h = sigma % _M
        stuck = False
        bad = False
        for t in range(length):
            if memoryless:
                h = sigma % _M
            h = _hash_state(h, state, var_lo, var_bits)
            n = 0
            for c in range(ncmd):
                if _eval_code(ops, args, guard_lo[c], guard_hi[c], state, stack) != 0:
                    choices[n] = c
                    n += 1
            prob = prob + _GOLDEN
            r_prob = mix64(prob)
            if n == 0:
                stuck = True
            else:
                nu = np.uint64(n)
                limit = limits[n]
                s = h
                while True:
                    s = s + _GOLDEN
                    r = mix64(s)
                    if limit == _ZERO or r < limit:
                        break
                c = choices[np.int64(r % nu)]
                u = np.float64(r_prob >> _S11) * _UNIT
                br = br_hi[c] - 1
                for k in range(br_lo[c], br_hi[c]):
                    if u < br_cum[k]:
                        br = k
                        break
                for i in range(nv):
                    new[i] = state[i]
                for j in range(up_lo[br], up_hi[br]):
                    v = _eval_code(ops, args, up_code_lo[j], up_code_hi[j], state, stack)
                    w = up_var[j]
                    if v < var_lo[w] or v > var_hi[w]:
                        bad = True
                    new[w] = v
                if bad:
                    break
                for i in range(nv):
                    state[i] = new[i]
            for i in range(nv):
                trace[t + 1, i] = state[i]
        deadlocks[lane] = stuck
        if bad:
            status[lane] = codes.STATUS_RANGE
            verdicts[lane] = 0
            continue
        status[lane] = codes.STATUS_OK
        ok = _eval_property(kind, pa, pb, bound, pvar, pcmp, pvalue, node_horizon, trace, table)
        verdicts[lane] = 1 if ok else 0
        if record:
            for t in range(length + 1):
                for i in range(nv):
                    traces[lane, t, i] = trace[t, i]


@njit(cache=True, nogil=True)
def bernoulli_lanes(probs, seeds, verdicts):
    for lane in range(seeds.shape[0]):
        u = np.float64(mix64(seeds[lane] + _GOLDEN) >> _S11) * _UNIT
        verdicts[lane] = 1 if u < probs[lane] else 0


@njit(cache=True, nogil=True)
def _derive(words):
    s = _ZERO
    for i in range(words.shape[0]):
        s = mix64((s ^ words[i]) + _GOLDEN)
    return s


@njit(cache=True, nogil=True)
def lane_seeds(master, tag, sigmas, lane_ids, out):
    words = np.empty(4, dtype=np.uint64)
    words[0] = master
    words[1] = tag
    for i in range(sigmas.shape[0]):
        words[2] = sigmas[i]
        words[3] = lane_ids[i]
        out[i] = _derive(words)
