"""Atypicality scanner built on the PTW coder.

For a subsequence ``X(n, l) = x_n .. x_{n+l-1}`` the atypical codelength is

    L_A(n, l) = min_D [ -log2 Pw_root(D) + log*(D + 1) ] + log*(l)

where each depth-``D`` coder is a fresh tree whose context is the ``D``
samples right before ``n``. All candidate depths share one node prior,
estimated from the ``max(depths)`` samples before ``n``, so they differ only
in structure. The typical codelength ``L_T(n, l)`` is the
increment of a frozen coder run over the whole series. For every start

    dL(n) = min_l [ L_A(n, l) - L_T(n, l) ]

and ``n`` is atypical when ``dL(n) < -tau``. Both sides code exactly the
same ``l`` samples with differential codelengths, so a quantization step
would add the same ``l * log2(1/delta)`` to both and cancel.

Fresh trees for all starts are independent but share routing: the path of
sample ``t`` in a depth-``D`` tree depends only on ``x_{t-D} .. x_t``. The
kernel exploits this by advancing every start's tree in lockstep with
numpy, one sample offset at a time.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .pattern_tree import PSEUDO_COUNT, PatternTree, seed_stats
from .predictor import LOG2_E, log2_gamma_ratio

LOG_STAR_C0 = 2.865064
TRACE_COLUMNS = ("start_index", "delta_L_bits", "best_len", "best_depth")


def log_star(k: int, c0: float = LOG_STAR_C0) -> float:
    """Universal codelength of a positive integer in bits.

    ``log2(c0) + log2(k) + log2(log2(k)) + ...`` keeping positive terms.
    """
    if int(k) != k or k < 1:
        raise ValueError(f"log_star needs a positive integer, got {k!r}")
    total = math.log2(c0)
    v = math.log2(k)
    while v > 0.0:
        total += v
        v = math.log2(v)
    return total


@dataclass(frozen=True)
class ScanConfig:
    """Scanner settings.

    ``floor=None`` borrows the typical coder's variance floor.
    ``min_len=None`` means ``min(depths) + 2``.
    """

    tau: float = 40.0
    depths: tuple[int, ...] = (1, 2, 3, 4)
    max_len: int = 400
    stride: int = 1
    floor: float | None = None
    predictor: str = "ss"
    c0: float = LOG_STAR_C0
    min_len: int | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        depths = tuple(sorted({int(d) for d in self.depths}))
        object.__setattr__(self, "depths", depths)
        if not depths:
            raise ValueError("depth set is empty")
        if depths[0] < 0:
            raise ValueError("depths must be >= 0")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.max_len < depths[-1] + 2:
            raise ValueError(f"max_len must be >= max(depths) + 2 = {depths[-1] + 2}")
        if self.predictor not in ("ss", "op"):
            raise ValueError(f"unknown predictor kind {self.predictor!r}")
        if self.floor is not None and not self.floor > 0:
            raise ValueError("variance floor must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.min_len is not None and not 1 <= self.min_len <= self.max_len:
            raise ValueError("min_len must be in [1, max_len]")

    @property
    def shortest(self) -> int:
        return self.min_len if self.min_len is not None else self.depths[0] + 2


@dataclass
class DeltaTrace:
    starts: np.ndarray
    delta: np.ndarray
    best_len: np.ndarray
    best_depth: np.ndarray
    evaluations: int = 0

    def __len__(self) -> int:
        return len(self.starts)

    def rows(self) -> Iterable[tuple[int, float, int, int]]:
        for s, d, l, k in zip(self.starts, self.delta, self.best_len, self.best_depth):
            yield int(s), float(d), int(l), int(k)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for s, d, l, k in self.rows():
            w.writerow((s, repr(d), l, k))
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DeltaTrace":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or tuple(rows[0]) != TRACE_COLUMNS:
            raise ValueError(f"trace header must be {','.join(TRACE_COLUMNS)}")
        body = [r for r in rows[1:] if r]
        return cls(
            starts=np.array([int(r[0]) for r in body], dtype=np.int64),
            delta=np.array([float(r[1]) for r in body]),
            best_len=np.array([int(r[2]) for r in body], dtype=np.int64),
            best_depth=np.array([int(r[3]) for r in body], dtype=np.int64),
        )


@dataclass(frozen=True)
class AtypicalSegment:
    start: int
    length: int
    score: float

    @property
    def stop(self) -> int:
        return self.start + self.length

    def to_json(self) -> str:
        return json.dumps({"start": self.start, "length": self.length, "score_bits": self.score})


def segments_to_jsonl(segments: Sequence[AtypicalSegment]) -> str:
    return "".join(s.to_json() + "\n" for s in segments)


# -- single subsequence ---------------------------------------------------


def atypical_codelength(
    segment: Sequence[float], cfg: ScanConfig, context: Sequence[float] | None = None
) -> tuple[float, int]:
    """Self-description codelength of ``segment`` in bits (header excluded).

    Every candidate depth codes the same samples. With ``context`` (the
    samples preceding the segment) all ``l`` samples are coded and depth
    ``D`` takes the last ``D`` context samples. Without it the first
    ``max(depths)`` samples of the segment serve as the shared context and
    the rest is coded.
    """
    seg = [float(v) for v in segment]
    if context is None:
        feasible = [d for d in cfg.depths if len(seg) >= d + 2]
        if not feasible:
            raise ValueError(f"segment of length {len(seg)} too short for depths {cfg.depths}")
        lead = feasible[-1]
        ctx, body = seg[:lead], seg[lead:]
    else:
        ctx, body = [float(v) for v in context], seg
        feasible = [d for d in cfg.depths if d <= len(ctx)]
        if not feasible or not body:
            raise ValueError("context shorter than every candidate depth, or empty segment")
    floor = cfg.floor if cfg.floor is not None else 1e-8
    prior = seed_stats(ctx[len(ctx) - feasible[-1] :], floor)
    best, best_d = math.inf, feasible[0]
    for d in feasible:
        tree = PatternTree(d, ctx[len(ctx) - d :], cfg.predictor, floor, prior)  # type: ignore[arg-type]
        for x in body:
            tree.update(x)
        bits = tree.codelength + log_star(d + 1, cfg.c0)
        if bits < best:
            best, best_d = bits, d
    return best + log_star(len(body), cfg.c0), best_d


def typical_conditionals(coder: PatternTree, series: Sequence[float]) -> np.ndarray:
    """Per-sample codelengths (bits) of ``series`` under a copy of ``coder``."""
    if not coder.frozen:
        raise ValueError("typical coder must be frozen")
    c = coder.copy()
    return -np.array([c.update(x) for x in series], dtype=float)


def typical_prefix(coder: PatternTree, series: Sequence[float]) -> np.ndarray:
    """``P[k]`` = bits of the first ``k`` samples; ``L_T(n, l) = P[n+l] - P[n]``."""
    bits = typical_conditionals(coder, series)
    out = np.zeros(len(bits) + 1)
    np.cumsum(bits, out=out[1:])
    return out


def typical_codelength(coder: PatternTree, series: Sequence[float], n: int, l: int) -> float:
    """Frozen-coder bits of ``series[n:n+l]`` given it has already seen ``series[:n]``."""
    if n < 0 or l < 1 or n + l > len(series):
        raise IndexError(f"subsequence ({n}, {l}) outside series of length {len(series)}")
    c = coder.copy()
    if not c.frozen:
        raise ValueError("typical coder must be frozen")
    for x in series[:n]:
        c.update(x)
    total = 0.0
    for x in series[n : n + l]:
        total -= c.update(x)
    return total


def delta_at(
    series: Sequence[float], start: int, prefix: np.ndarray, cfg: ScanConfig, floor: float
) -> tuple[float, int, int]:
    """Reference ``dL(start)`` with plain scalar trees; slow, used as an oracle."""
    x = [float(v) for v in series]
    n_max = min(cfg.max_len, len(x) - start)
    la = np.full(n_max + 1, np.inf)
    la_depth = np.zeros(n_max + 1, dtype=int)
    prior = seed_stats(x[start - cfg.depths[-1] : start], floor)
    for d in cfg.depths:
        tree = PatternTree(d, x[start - d : start], cfg.predictor, floor, prior)  # type: ignore[arg-type]
        cost = log_star(d + 1, cfg.c0)
        for l in range(1, n_max + 1):
            tree.update(x[start + l - 1])
            v = tree.codelength + cost
            if v < la[l]:
                la[l], la_depth[l] = v, d
    best = (math.inf, 0, 0)
    for l in range(cfg.shortest, n_max + 1):
        v = la[l] + log_star(l, cfg.c0) - (prefix[start + l] - prefix[start])
        if v < best[0]:
            best = (v, l, int(la_depth[l]))
    return best


# -- vectorized kernel ----------------------------------------------------


def path_table(x: np.ndarray, depth: int) -> np.ndarray:
    """``T[t, d]`` = node visited at depth ``d`` by sample ``t`` (rows t < depth unused)."""
    n = len(x)
    table = np.ones((n, depth + 1), dtype=np.int64)
    drop = np.zeros(n, dtype=bool)
    drop[1:] = x[:-1] > x[1:]
    for d in range(1, depth + 1):
        # bit for sample t at depth d is drop[t - d + 1]
        b = np.zeros(n, dtype=np.int64)
        b[d - 1 :] = drop[: n - d + 1]
        table[:, d] = 2 * table[:, d - 1] + (1 - b)
    return table


def _gamma_table(size: int) -> np.ndarray:
    g = np.zeros(size + 1)
    for k in range(2, size + 1):
        g[k] = log2_gamma_ratio(k)
    return g


def _log2_density(kind: str, c, m, s, x, floor: float, gtab: np.ndarray):
    d = x - m
    if kind == "ss":
        a = np.maximum(s, c * floor)
        b = np.maximum(s + d * d * c / (c + 1), (c + 1) * floor)
        return (
            0.5 * np.log2(c / (np.pi * (c + 1)))
            + gtab[c.astype(np.int64)]
            + 0.5 * c * np.log2(a / b)
            - 0.5 * np.log2(b)
        )
    var = np.maximum(s / (c - 1), floor)
    return -0.5 * (np.log2(2.0 * var) + np.log2(np.pi)) - (d * d) / (2.0 * var) * LOG2_E


def shared_priors(x: np.ndarray, starts: np.ndarray, window: int, floor: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-start node prior from the ``window`` samples before each start."""
    pairs = [seed_stats(x[n - window : n].tolist(), floor) for n in starts]
    return np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])


def _depth_block(
    x: np.ndarray,
    starts: np.ndarray,
    depth: int,
    max_len: int,
    kind: str,
    floor: float,
    priors: tuple[np.ndarray, np.ndarray],
) -> tuple[np.ndarray, int]:
    """Codelengths ``-log2 Pw_root`` of fresh depth-``depth`` trees.

    Returns ``out[i, l-1]`` for the tree started at ``starts[i]`` after it
    has coded ``l`` samples (``inf`` past the end of the series), and the
    number of node predictor evaluations performed.
    """
    n_total = len(x)
    b_count = len(starts)
    size = 2 ** (depth + 1)
    leaf0 = 2**depth
    table = path_table(x, depth)
    gtab = _gamma_table(PSEUDO_COUNT + max_len + 1)

    cnt = np.full(b_count * size, float(PSEUDO_COUNT))
    mean = np.repeat(priors[0], size)
    ssd = np.repeat(priors[1], size)
    lpe = np.zeros(b_count * size)
    lpw = np.zeros(b_count * size)
    base = np.arange(b_count, dtype=np.int64) * size

    out = np.full((b_count, max_len), np.inf)
    lengths = np.minimum(max_len, n_total - starts)
    # starts ascend, so the still-active trees always form a prefix
    order_ok = np.all(np.diff(starts) > 0)
    if not order_ok:
        raise ValueError("starts must be strictly increasing")
    evals = 0
    for l in range(1, max_len + 1):
        k = int(np.count_nonzero(lengths >= l))
        if k == 0:
            break
        t = starts[:k] + (l - 1)
        xt = x[t]
        rb = base[:k]
        nodes = table[t]
        for d in range(depth, -1, -1):
            j = nodes[:, d]
            f = rb + j
            c, m, s = cnt[f], mean[f], ssd[f]
            lpe[f] += _log2_density(kind, c, m, s, xt, floor, gtab)
            c1 = c + 1
            delta = xt - m
            m1 = m + delta / c1
            cnt[f] = c1
            mean[f] = m1
            ssd[f] = np.maximum(s + delta * (xt - m1), 0.0)
            if j[0] >= leaf0:
                lpw[f] = lpe[f]
            else:
                kids = lpw[rb + 2 * j] + lpw[rb + 2 * j + 1]
                lpw[f] = np.logaddexp2(lpe[f], kids) - 1.0
            evals += k
        out[:k, l - 1] = -lpw[rb + 1]
    return out, evals


def _scan_block(args) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    x, starts, prefix, cfg, floor = args
    ls_tab = np.array([0.0] + [log_star(l, cfg.c0) for l in range(1, cfg.max_len + 1)])
    best_la = np.full((len(starts), cfg.max_len), np.inf)
    best_d = np.zeros((len(starts), cfg.max_len), dtype=np.int64)
    evals = 0
    priors = shared_priors(x, starts, cfg.depths[-1], floor)
    for d in cfg.depths:
        la, e = _depth_block(x, starts, d, cfg.max_len, cfg.predictor, floor, priors)
        evals += e
        la = la + log_star(d + 1, cfg.c0)
        better = la < best_la
        best_la = np.where(better, la, best_la)
        best_d = np.where(better, d, best_d)
    lens = np.arange(1, cfg.max_len + 1)
    idx = starts[:, None] + lens[None, :]
    valid = (idx <= len(x)) & (lens[None, :] >= cfg.shortest)
    lt = np.where(valid, prefix[np.minimum(idx, len(x))] - prefix[starts][:, None], 0.0)
    score = np.where(valid, best_la + ls_tab[1:][None, :] - lt, np.inf)
    arg = np.argmin(score, axis=1)
    rows = np.arange(len(starts))
    return score[rows, arg], arg + 1, best_d[rows, arg], evals


def scan_starts(n_total: int, cfg: ScanConfig) -> np.ndarray:
    first = cfg.depths[-1]
    last = n_total - cfg.shortest
    if last < first:
        return np.zeros(0, dtype=np.int64)
    return np.arange(first, last + 1, cfg.stride, dtype=np.int64)


BLOCK_STARTS = 1024


def _chunks(a: np.ndarray, workers: int) -> list[np.ndarray]:
    parts = max(workers, -(-len(a) // BLOCK_STARTS), 1)
    parts = min(parts, max(len(a), 1))
    return [c for c in np.array_split(a, parts) if len(c)]


def flag_segments(trace: DeltaTrace, tau: float) -> list[AtypicalSegment]:
    """Starts with ``dL < -tau``, overlapping ones merged keeping the minimum score."""
    hits = [
        AtypicalSegment(int(s), int(l), float(d))
        for s, d, l, _ in trace.rows()
        if d < -tau
    ]
    merged: list[AtypicalSegment] = []
    for seg in hits:
        if merged and seg.start < merged[-1].stop:
            cur = merged[-1]
            stop = max(cur.stop, seg.stop)
            merged[-1] = AtypicalSegment(cur.start, stop - cur.start, min(cur.score, seg.score))
        else:
            merged.append(seg)
    return merged


def scan(
    series: Sequence[float], typical: PatternTree, cfg: ScanConfig
) -> tuple[DeltaTrace, list[AtypicalSegment]]:
    """Compute ``dL(n)`` over the start grid and flag atypical segments.

    ``typical`` must be frozen and positioned just before ``series[0]``.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ValueError("series must be one-dimensional")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    if len(x) < cfg.max_len:
        raise ValueError(f"series length {len(x)} shorter than max_len {cfg.max_len}")
    floor = cfg.floor if cfg.floor is not None else typical.floor
    prefix = typical_prefix(typical, x.tolist())
    starts = scan_starts(len(x), cfg)
    jobs = [(x, c, prefix, cfg, floor) for c in _chunks(starts, cfg.workers)]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_scan_block, jobs))
    else:
        results = [_scan_block(j) for j in jobs]
    if results:
        delta = np.concatenate([r[0] for r in results])
        best_len = np.concatenate([r[1] for r in results])
        best_depth = np.concatenate([r[2] for r in results])
    else:
        delta = np.zeros(0)
        best_len = best_depth = np.zeros(0, dtype=np.int64)
    trace = DeltaTrace(starts, delta, best_len, best_depth, sum(r[3] for r in results))
    return trace, flag_segments(trace, cfg.tau)


def expected_evaluations(n_total: int, cfg: ScanConfig) -> int:
    """Exact node-evaluation count of :func:`scan` for a series of ``n_total`` samples."""
    total = 0
    for n in scan_starts(n_total, cfg):
        l = min(cfg.max_len, n_total - int(n))
        total += l * sum(d + 1 for d in cfg.depths)
    return total
