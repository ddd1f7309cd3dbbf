"""Pattern-tree weighting (PTW) coder.

A depth-``D`` complete binary tree stored as a flat array (index 1 is the
root, children of ``i`` are ``2i`` and ``2i + 1``). Each sample ``x_n`` is
routed by comparing consecutive samples walking backward from it: at depth
``d`` it goes to the left child ``2i`` when ``x_{n-d} > x_{n-d+1}`` (a drop)
and to ``2i + 1`` otherwise, ties included. Every node on the path scores
``x_n`` with its own Gaussian predictor, and the weighted block probability
is mixed CTW-style::

    Pw(leaf)     = Pe(leaf)
    Pw(internal) = 1/2 Pe + 1/2 Pw(left) Pw(right)

The off-path child keeps its stored ``Pw``, so one update touches only the
``D + 1`` nodes on a single root-to-leaf path.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from os import PathLike
from typing import Iterable, Sequence

from .predictor import GaussianStats, PredictorKind, raw_predictor, welford_step

MODEL_FORMAT = "ptw-model"
MODEL_VERSION = 1
PSEUDO_COUNT = 2


@dataclass(frozen=True, slots=True)
class NodeState:
    """Snapshot of one tree node.

    ``visits`` counts samples absorbed into ``stats``; the statistics also
    carry the context prior at pseudo-count 2, so ``stats.count`` is
    ``visits + 2``.
    """

    stats: GaussianStats
    visits: int
    log2_pe: float
    log2_pw: float


def route(context: Sequence[float], x: float) -> tuple[int, ...]:
    """Comparison pattern of ``x`` given the ``D`` samples before it.

    ``context`` is ordered oldest first, ``(x_{n-D}, ..., x_{n-1})``. Bit
    ``d - 1`` is 1 iff ``x_{n-d} > x_{n-d+1}``.
    """
    seq = list(context) + [x]
    depth = len(context)
    return tuple(1 if seq[-1 - d] > seq[-d] else 0 for d in range(1, depth + 1))


def path_nodes(bits: Sequence[int]) -> list[int]:
    """Node indices from the root to the leaf selected by ``bits``."""
    node = 1
    out = [node]
    for b in bits:
        node = 2 * node + (0 if b else 1)
        out.append(node)
    return out


def log2_mix(log2_pe: float, log2_children: float) -> float:
    """log2(0.5 * 2**a + 0.5 * 2**b) without leaving the log domain."""
    if log2_pe >= log2_children:
        hi, lo = log2_pe, log2_children
    else:
        hi, lo = log2_children, log2_pe
    return hi + math.log2(1.0 + 2.0 ** (lo - hi)) - 1.0


def seed_stats(context: Sequence[float], floor: float) -> tuple[float, float]:
    """Prior (mean, ssd at pseudo-count 2) estimated from the context samples."""
    if len(context) >= 2:
        g = GaussianStats.from_samples(context)
        return g.mean, max(g.variance, floor)
    if len(context) == 1:
        return float(context[0]), floor
    return 0.0, floor


class PatternTree:
    """Sequential PTW coder over a real-valued series.

    Args:
        depth: maximum tree depth ``D``.
        context: the ``D`` samples preceding the first coded sample, oldest
            first. They route the first samples and seed every node's
            statistics.
        predictor: ``"ss"`` or ``"op"``.
        floor: variance floor shared by every node.
        prior: optional ``(mean, ssd)`` seeding every node at pseudo-count 2
            instead of the statistics of ``context``.
    """

    def __init__(
        self,
        depth: int,
        context: Sequence[float] = (),
        predictor: PredictorKind = "ss",
        floor: float = 1e-8,
        prior: tuple[float, float] | None = None,
    ) -> None:
        if depth < 0:
            raise ValueError("depth must be >= 0")
        if len(context) != depth:
            raise ValueError(f"context must hold exactly {depth} samples, got {len(context)}")
        if not floor > 0.0:
            raise ValueError("variance floor must be positive")
        if not all(math.isfinite(c) for c in context):
            raise ValueError("context must be finite")
        self.depth = depth
        self.predictor = predictor
        self._f = raw_predictor(predictor)
        self.floor = float(floor)
        self.frozen = False
        self.n_coded = 0
        size = 2 ** (depth + 1)
        self._leaf0 = 2 ** depth
        mean0, ssd0 = seed_stats(context, self.floor) if prior is None else map(float, prior)
        self._count = [float(PSEUDO_COUNT)] * size
        self._mean = [mean0] * size
        self._ssd = [ssd0] * size
        self._visits = [0] * size
        self._lpe = [0.0] * size
        self._lpw = [0.0] * size
        self._context: deque[float] = deque((float(c) for c in context), maxlen=depth)

    # -- coding -----------------------------------------------------------

    def pattern(self, x: float) -> tuple[int, ...]:
        return route(self._context, x)

    def update(self, x: float) -> float:
        """Code ``x``; returns log2 of its weighted conditional density."""
        x = float(x)
        if not math.isfinite(x):
            raise ValueError(f"cannot code non-finite sample {x!r}")
        path = path_nodes(route(self._context, x)) if self.depth else [1]
        count, mean, ssd = self._count, self._mean, self._ssd
        lpe, lpw = self._lpe, self._lpw
        f, floor, frozen, leaf0 = self._f, self.floor, self.frozen, self._leaf0
        before = lpw[1]
        for i in reversed(path):
            lpe[i] += f(count[i], mean[i], ssd[i], x, floor)
            if not frozen:
                count[i], mean[i], ssd[i] = welford_step(count[i], mean[i], ssd[i], x)
                self._visits[i] += 1
            if i >= leaf0:
                lpw[i] = lpe[i]
            else:
                lpw[i] = log2_mix(lpe[i], lpw[2 * i] + lpw[2 * i + 1])
        if self.depth:
            self._context.append(x)
        self.n_coded += 1
        return lpw[1] - before

    def update_many(self, xs: Iterable[float]) -> list[float]:
        return [self.update(x) for x in xs]

    def freeze(self) -> "PatternTree":
        """Stop parameter updates; codelengths keep accumulating. Idempotent."""
        self.frozen = True
        return self

    @property
    def codelength(self) -> float:
        """Differential codelength of everything coded so far, in bits."""
        return -self._lpw[1]

    # -- inspection -------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return 2 ** (self.depth + 1) - 1

    @property
    def context(self) -> tuple[float, ...]:
        return tuple(self._context)

    def node(self, i: int) -> NodeState:
        if not 1 <= i <= self.n_nodes:
            raise IndexError(f"node index {i} outside 1..{self.n_nodes}")
        return NodeState(
            stats=GaussianStats(int(self._count[i]), self._mean[i], self._ssd[i]),
            visits=self._visits[i],
            log2_pe=self._lpe[i],
            log2_pw=self._lpw[i],
        )

    def is_leaf(self, i: int) -> bool:
        return i >= self._leaf0

    def visits(self) -> list[int]:
        """Per-node absorbed sample counts, index 0 unused."""
        return list(self._visits)

    def copy(self) -> "PatternTree":
        new = PatternTree.__new__(PatternTree)
        new.__dict__.update(self.__dict__)
        for name in ("_count", "_mean", "_ssd", "_visits", "_lpe", "_lpw"):
            setattr(new, name, list(getattr(self, name)))
        new._context = deque(self._context, maxlen=self.depth)
        return new

    # -- persistence ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "depth": self.depth,
            "predictor": self.predictor,
            "floor": self.floor,
            "frozen": self.frozen,
            "n_coded": self.n_coded,
            "context": list(self._context),
            "nodes": {
                "visits": self._visits[1:],
                "count": self._count[1:],
                "mean": self._mean[1:],
                "ssd": self._ssd[1:],
                "log2_pe": self._lpe[1:],
                "log2_pw": self._lpw[1:],
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PatternTree":
        if d.get("format") != MODEL_FORMAT:
            raise ValueError("not a ptw model")
        if d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')!r}")
        depth = int(d["depth"])
        tree = cls(depth, [0.0] * depth, d["predictor"], d["floor"])
        nodes = d["nodes"]
        size = 2 ** (depth + 1)
        for name, key, conv in (
            ("_visits", "visits", int),
            ("_count", "count", float),
            ("_mean", "mean", float),
            ("_ssd", "ssd", float),
            ("_lpe", "log2_pe", float),
            ("_lpw", "log2_pw", float),
        ):
            values = nodes[key]
            if len(values) != size - 1:
                raise ValueError(f"model field {key!r} has {len(values)} entries, expected {size - 1}")
            setattr(tree, name, [conv(0)] + [conv(v) for v in values])
        tree._context = deque((float(c) for c in d["context"]), maxlen=depth)
        tree.frozen = bool(d["frozen"])
        tree.n_coded = int(d["n_coded"])
        return tree

    def save(self, path: str | PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | PathLike) -> "PatternTree":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def __repr__(self) -> str:
        state = "frozen" if self.frozen else "adaptive"
        return (
            f"PatternTree(depth={self.depth}, predictor={self.predictor!r}, "
            f"{state}, coded={self.n_coded}, bits={self.codelength:.3f})"
        )


def train(
    series: Sequence[float],
    depth: int,
    predictor: PredictorKind = "ss",
    floor: float = 1e-8,
    freeze: bool = True,
) -> PatternTree:
    """Seed a tree from the first ``depth`` samples and code the rest."""
    if len(series) < depth + 2:
        raise ValueError(f"training needs at least depth + 2 = {depth + 2} samples")
    tree = PatternTree(depth, [float(v) for v in series[:depth]], predictor, floor)
    for x in series[depth:]:
        tree.update(x)
    if freeze:
        tree.freeze()
    return tree
