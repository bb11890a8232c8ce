"""Hot loops over the full assignment space.

Two interchangeable backends work on integer-scaled weights in int64:

* ``numba``: ``@njit`` loops, one assignment at a time.
* ``numpy``: the same computation vectorized over blocks of assignments.

The backend is picked by the ``COORDMECH_BACKEND`` environment variable
(``numba`` or ``numpy``); ``numba`` is the default when it imports. Callers
must check :func:`fits_int64` first, the kernels do not detect overflow.

Assignments are numbered in mixed radix over each job's available machines,
job 0 most significant, so increasing index is lexicographic order of
``machine_of``.

Per-player keys are the deviation keys up to a positive per-player factor:
``(d+1) * Lambda`` for dcoord, ``Lambda / d!`` for ccoord and the load for
the makespan baseline.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover
    NUMBA_AVAILABLE = False

DCOORD, CCOORD, MAKESPAN = 0, 1, 2
KIND_CODES = {"dcoord": DCOORD, "ccoord": CCOORD, "makespan": MAKESPAN}

INT64_LIMIT = 2 ** 62
BLOCK = 1 << 15


def _default_backend() -> str:
    env = os.environ.get("COORDMECH_BACKEND", "").strip().lower()
    if env and env not in ("numba", "numpy"):
        raise ValueError(f"COORDMECH_BACKEND must be 'numba' or 'numpy', got {env!r}")
    if env == "numpy" or not NUMBA_AVAILABLE:
        return "numpy"
    return "numba"


BACKEND = _default_backend()


def fits_int64(W, d: int) -> bool:
    """True when every intermediate of the degree-``d`` keys stays below 2**62."""
    total = sum(int(max(row)) for row in W)
    return (d + 1) * total ** (d + 1) < INT64_LIMIT


def option_table(options) -> tuple[np.ndarray, np.ndarray]:
    """Pad per-job machine lists into an (n, m) int64 table plus counts."""
    n = len(options)
    width = max(len(o) for o in options)
    opts = np.zeros((n, width), dtype=np.int64)
    counts = np.empty(n, dtype=np.int64)
    for u, o in enumerate(options):
        opts[u, : len(o)] = o
        counts[u] = len(o)
    return opts, counts


def space_size(counts) -> int:
    out = 1
    for c in counts:
        out *= int(c)
    return out


def decode(idx: int, opts: np.ndarray, counts: np.ndarray) -> tuple[int, ...]:
    n = len(counts)
    out = [0] * n
    for u in range(n - 1, -1, -1):
        c = int(counts[u])
        out[u] = int(opts[u, idx % c])
        idx //= c
    return tuple(out)


# ---------------------------------------------------------------------------
# numba backend

if NUMBA_AVAILABLE:

    @njit(cache=True)
    def _ipow(x, e):
        r = 1
        for _ in range(e):
            r *= x
        return r

    @njit(cache=True)
    def _key_nb(W, asg, loads, u, j, d, kind, hbuf):
        w = W[u, j]
        base = loads[j]
        if asg[u] == j:
            base -= w
        if kind == DCOORD:
            return d * (_ipow(base + w, d + 1) - _ipow(base, d + 1)) + _ipow(w, d + 1)
        if kind == CCOORD:
            hbuf[0] = 1
            for k in range(1, d + 1):
                hbuf[k] = 0
            for v in range(asg.shape[0]):
                if v != u and asg[v] == j:
                    x = W[v, j]
                    for k in range(1, d + 1):
                        hbuf[k] += x * hbuf[k - 1]
            for k in range(1, d + 1):
                hbuf[k] += w * hbuf[k - 1]
            return w * hbuf[d]
        return base + w

    @njit(cache=True)
    def _decode_nb(idx, opts, counts, asg):
        r = idx
        for u in range(counts.shape[0] - 1, -1, -1):
            c = counts[u]
            asg[u] = opts[u, r % c]
            r //= c

    @njit(cache=True)
    def _equilibria_nb(W, opts, counts, d, kind, start, stop, out):
        n, m = W.shape
        asg = np.empty(n, np.int64)
        loads = np.zeros(m, np.int64)
        hbuf = np.zeros(d + 1, np.int64)
        for idx in range(start, stop):
            _decode_nb(idx, opts, counts, asg)
            loads[:] = 0
            for u in range(n):
                loads[asg[u]] += W[u, asg[u]]
            ok = True
            for u in range(n):
                k0 = _key_nb(W, asg, loads, u, asg[u], d, kind, hbuf)
                for c in range(counts[u]):
                    j = opts[u, c]
                    if j != asg[u] and _key_nb(W, asg, loads, u, j, d, kind, hbuf) < k0:
                        ok = False
                        break
                if not ok:
                    break
            out[idx - start] = ok

    @njit(cache=True)
    def _min_makespan_nb(W, opts, counts, start, stop):
        n, m = W.shape
        asg = np.empty(n, np.int64)
        loads = np.zeros(m, np.int64)
        best = -1
        best_idx = -1
        for idx in range(start, stop):
            _decode_nb(idx, opts, counts, asg)
            loads[:] = 0
            for u in range(n):
                loads[asg[u]] += W[u, asg[u]]
            mk = loads.max()
            if best < 0 or mk < best:
                best = mk
                best_idx = idx
        return best, best_idx


# ---------------------------------------------------------------------------
# numpy backend


def _decode_block(idx: np.ndarray, opts: np.ndarray, counts: np.ndarray) -> np.ndarray:
    n = len(counts)
    A = np.empty((len(idx), n), dtype=np.int64)
    r = idx.copy()
    for u in range(n - 1, -1, -1):
        A[:, u] = opts[u, r % counts[u]]
        r //= counts[u]
    return A


def _loads_block(W: np.ndarray, A: np.ndarray) -> np.ndarray:
    B, n = A.shape
    loads = np.zeros((B, W.shape[1]), dtype=np.int64)
    rows = np.arange(B)
    for u in range(n):
        loads[rows, A[:, u]] += W[u, A[:, u]]
    return loads


def _h_block(W: np.ndarray, A: np.ndarray, d: int) -> np.ndarray:
    """h_0..h_d of every machine's job set, shape (B, m, d+1)."""
    B, n = A.shape
    H = np.zeros((B, W.shape[1], d + 1), dtype=np.int64)
    H[:, :, 0] = 1
    rows = np.arange(B)
    for v in range(n):
        j = A[:, v]
        x = W[v, j]
        for k in range(1, d + 1):
            H[rows, j, k] += x * H[rows, j, k - 1]
    return H


def _equilibria_np(W, opts, counts, d, kind, start, stop) -> np.ndarray:
    A = _decode_block(np.arange(start, stop, dtype=np.int64), opts, counts)
    B, n = A.shape
    loads = _loads_block(W, A)
    H = _h_block(W, A, d) if kind == CCOORD else None
    ok = np.ones(B, dtype=bool)
    for u in range(n):
        cand = opts[u, : counts[u]]
        keys = np.empty((B, len(cand)), dtype=np.int64)
        for c, j in enumerate(cand):
            w = W[u, j]
            here = A[:, u] == j
            base = loads[:, j] - np.where(here, w, 0)
            if kind == DCOORD:
                keys[:, c] = d * ((base + w) ** (d + 1) - base ** (d + 1)) + w ** (d + 1)
            elif kind == CCOORD:
                G = H[:, j, :].copy()
                # strip u from the machine it sits on: h_k(S) = h_k(S+u) - w * h_{k-1}(S+u)
                G[here, 1:] -= w * H[here, j, :-1]
                hd = np.zeros(B, dtype=np.int64)
                wp = 1
                for k in range(d + 1):
                    hd += wp * G[:, d - k]
                    wp *= w
                keys[:, c] = w * hd
            else:
                keys[:, c] = base + w
        current = keys[np.arange(B), np.searchsorted(cand, A[:, u])]
        ok &= keys.min(axis=1) >= current
    return ok


def _min_makespan_np(W, opts, counts, start, stop):
    A = _decode_block(np.arange(start, stop, dtype=np.int64), opts, counts)
    mk = _loads_block(W, A).max(axis=1)
    i = int(np.argmin(mk))
    return int(mk[i]), start + i


# ---------------------------------------------------------------------------
# dispatch


def _resolve(backend: str | None) -> str:
    backend = backend or BACKEND
    if backend == "numba" and not NUMBA_AVAILABLE:
        raise RuntimeError("numba backend requested but numba is not importable")
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    return backend


def equilibrium_indices(W, opts, counts, d: int, kind: str, backend: str | None = None,
                        block: int = BLOCK) -> np.ndarray:
    """Indices (ascending) of all assignments where no job has a strictly better machine."""
    backend = _resolve(backend)
    W = np.ascontiguousarray(W, dtype=np.int64)
    code = KIND_CODES[kind]
    total = space_size(counts)
    found = []
    for start in range(0, total, block):
        stop = min(total, start + block)
        if backend == "numba":
            mask = np.empty(stop - start, dtype=np.bool_)
            _equilibria_nb(W, opts, counts, d, code, start, stop, mask)
        else:
            mask = _equilibria_np(W, opts, counts, d, code, start, stop)
        found.append(np.flatnonzero(mask) + start)
    return np.concatenate(found) if found else np.empty(0, dtype=np.int64)


def min_makespan(W, opts, counts, backend: str | None = None, block: int = BLOCK) -> tuple[int, int]:
    """(optimal integer makespan, index of the first assignment attaining it)."""
    backend = _resolve(backend)
    W = np.ascontiguousarray(W, dtype=np.int64)
    total = space_size(counts)
    best, best_idx = None, -1
    for start in range(0, total, block):
        stop = min(total, start + block)
        if backend == "numba":
            val, idx = _min_makespan_nb(W, opts, counts, start, stop)
        else:
            val, idx = _min_makespan_np(W, opts, counts, start, stop)
        if best is None or val < best:
            best, best_idx = int(val), int(idx)
    return best, best_idx
