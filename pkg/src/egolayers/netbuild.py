"""Construction of weighted interaction networks from event streams.

Two builders are provided:

* ``build_ein_daily`` links investors whose same-side orders on the same stock
  co-occur within a short time window, keeping a directed count per ordered
  pair (earlier order initiates). An undirected edge exists once the two
  directed counts together reach a minimum co-occurrence.
* ``build_cn`` links phone users by reciprocal calls: an edge requires at
  least one call in each direction.

Every network retains the directed pair counts and the node marginals they
imply, because the downstream statistical validation tests each direction
against those marginals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Literal, NamedTuple

import numpy as np

from .ingest import CallEvent, OrderEvent


class DirectedEdgeStats(NamedTuple):
    source: str
    target: str
    count: int


def day_of(timestamp: int, day_offset: int = 0, day_seconds: int = 86400) -> int:
    """Map an epoch timestamp to a day index under a configurable boundary offset."""
    return (timestamp - day_offset) // day_seconds


@dataclass
class WeightedNetwork:
    """Undirected weighted network plus the directed counts it was built from.

    ``directed`` holds count(i -> j) keyed by ordered pair (only nonzero counts
    are stored). ``edge_weights`` is keyed by the lexicographically ordered
    pair and satisfies W{i,j} = count(i->j) + count(j->i). ``out_counts`` /
    ``in_counts`` are the per-node marginals of the retained directed counts
    and ``total`` their grand sum. Instances are treated as immutable after
    construction.
    """

    nodes: frozenset[str] = frozenset()
    directed: dict[tuple[str, str], int] = field(default_factory=dict)
    edge_weights: dict[tuple[str, str], int] = field(default_factory=dict)
    out_counts: dict[str, int] = field(default_factory=dict)
    in_counts: dict[str, int] = field(default_factory=dict)
    total: int = 0

    @classmethod
    def from_directed_counts(cls, directed: dict[tuple[str, str], int],
                             min_weight: int = 1) -> "WeightedNetwork":
        """Build the undirected view; pairs with W < min_weight are dropped entirely."""
        weights: dict[tuple[str, str], int] = {}
        for (i, j), c in directed.items():
            if i == j:
                raise ValueError(f"self-edge {i!r}")
            if c <= 0:
                raise ValueError(f"nonpositive count for pair ({i!r}, {j!r})")
            key = (i, j) if i < j else (j, i)
            weights[key] = weights.get(key, 0) + c
        if min_weight > 1:
            weights = {k: w for k, w in weights.items() if w >= min_weight}
            directed = {(i, j): c for (i, j), c in directed.items()
                        if ((i, j) if i < j else (j, i)) in weights}
        out_counts: dict[str, int] = {}
        in_counts: dict[str, int] = {}
        for (i, j), c in directed.items():
            out_counts[i] = out_counts.get(i, 0) + c
            in_counts[j] = in_counts.get(j, 0) + c
        nodes = frozenset(out_counts) | frozenset(in_counts)
        return cls(nodes=nodes, directed=dict(directed), edge_weights=weights,
                   out_counts=out_counts, in_counts=in_counts,
                   total=sum(directed.values()))

    # -- derived views ----------------------------------------------------

    def directed_stats(self) -> Iterator[DirectedEdgeStats]:
        for (i, j) in sorted(self.directed):
            yield DirectedEdgeStats(i, j, self.directed[(i, j)])

    def directed_count(self, i: str, j: str) -> int:
        return self.directed.get((i, j), 0)

    def n_nodes(self) -> int:
        return len(self.nodes)

    def n_edges(self) -> int:
        return len(self.edge_weights)

    def neighbors(self, node: str) -> dict[str, int]:
        """Alter -> undirected weight map for one ego."""
        out = {}
        for (i, j), w in self.edge_weights.items():
            if i == node:
                out[j] = w
            elif j == node:
                out[i] = w
        return out

    def degrees(self) -> dict[str, int]:
        deg = {n: 0 for n in self.nodes}
        for i, j in self.edge_weights:
            deg[i] += 1
            deg[j] += 1
        return deg

    def weighted_degrees(self) -> dict[str, int]:
        wd = {n: 0 for n in self.nodes}
        for (i, j), w in self.edge_weights.items():
            wd[i] += w
            wd[j] += w
        return wd

    def ego_weights(self) -> dict[str, dict[str, int]]:
        """All ego -> (alter -> weight) maps in one pass."""
        egos: dict[str, dict[str, int]] = {n: {} for n in self.nodes}
        for (i, j), w in self.edge_weights.items():
            egos[i][j] = w
            egos[j][i] = w
        return egos


def _window_pairs(inv: np.ndarray, ts: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Ordered (initiator, responder) index pairs with 0 <= t_b - t_a <= window.

    Input must be sorted by (ts, inv); the scan only looks forward, so a
    simultaneous pair is seen exactly once, with the lexicographically smaller
    id in the initiator role.
    """
    n = len(ts)
    if n < 2:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    hi = np.searchsorted(ts, ts + window, side="right")
    starts = np.arange(n, dtype=np.int64) + 1
    lengths = hi - starts
    lengths[lengths < 0] = 0
    m = int(lengths.sum())
    if m == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    src = np.repeat(np.arange(n, dtype=np.int64), lengths)
    offsets = np.concatenate(([0], np.cumsum(lengths)[:-1]))
    tgt = np.arange(m, dtype=np.int64) - np.repeat(offsets, lengths) + np.repeat(starts, lengths)
    keep = inv[src] != inv[tgt]
    return src[keep], tgt[keep]


def build_ein_daily(orders: Iterable[OrderEvent], window_seconds: int = 30,
                    min_cooccurrence: int = 3,
                    counting: Literal["pairs", "per_order"] = "pairs") -> WeightedNetwork:
    """Build one day's investor network from order co-occurrence.

    Orders are grouped by (stock, side); within a group every ordered pair of
    orders from distinct investors with 0 <= t_later - t_earlier <= window
    contributes one co-occurrence attributed earlier -> later (ties broken by
    lexicographic investor id). ``counting="per_order"`` instead credits each
    initiating order at most once per responder, for sensitivity analysis of
    the pair-counting convention.
    """
    if window_seconds <= 0:
        raise ValueError("window_seconds must be positive")
    if min_cooccurrence < 1:
        raise ValueError("min_cooccurrence must be >= 1")
    if counting not in ("pairs", "per_order"):
        raise ValueError(f"unknown counting strategy {counting!r}")

    groups: dict[tuple[str, str], list[OrderEvent]] = {}
    for ev in orders:
        groups.setdefault((ev.stock_id, ev.side), []).append(ev)

    directed: dict[tuple[str, str], int] = {}
    for key in sorted(groups):
        evs = groups[key]
        evs.sort(key=lambda e: (e.timestamp, e.investor_id))
        investors = sorted({e.investor_id for e in evs})
        if len(investors) < 2:
            continue
        code = {name: k for k, name in enumerate(investors)}
        inv = np.fromiter((code[e.investor_id] for e in evs), dtype=np.int64, count=len(evs))
        ts = np.fromiter((e.timestamp for e in evs), dtype=np.int64, count=len(evs))
        src, tgt = _window_pairs(inv, ts, window_seconds)
        if len(src) == 0:
            continue
        if counting == "per_order":
            # dedupe on (initiating order, responder investor)
            combo = src * len(investors) + inv[tgt]
            _, first = np.unique(combo, return_index=True)
            src, tgt = src[first], tgt[first]
        pair_code = inv[src] * len(investors) + inv[tgt]
        uniq, counts = np.unique(pair_code, return_counts=True)
        for pc, c in zip(uniq.tolist(), counts.tolist()):
            a, b = investors[pc // len(investors)], investors[pc % len(investors)]
            directed[(a, b)] = directed.get((a, b), 0) + c

    return WeightedNetwork.from_directed_counts(directed, min_weight=min_cooccurrence)


def aggregate_networks(networks: Iterable[WeightedNetwork]) -> WeightedNetwork:
    """Sum directed counts over networks (a commutative, associative merge)."""
    directed: dict[tuple[str, str], int] = {}
    for net in networks:
        for pair, c in net.directed.items():
            directed[pair] = directed.get(pair, 0) + c
    return WeightedNetwork.from_directed_counts(directed)


def build_cn(calls: Iterable[CallEvent],
             marginal_universe: Literal["reciprocal", "all"] = "reciprocal") -> WeightedNetwork:
    """Build the call network from reciprocal calls.

    count(i->j) is the number of calls from i to j; an edge {i,j} exists iff
    both directions have at least one call. Non-reciprocal pairs are dropped
    before the marginals are computed (``marginal_universe="reciprocal"``,
    the default). With ``"all"`` the marginals and grand total keep every
    directed call while edges remain reciprocal-only; this variant is not
    representable in the edge-list file format.
    """
    counts: dict[tuple[str, str], int] = {}
    for ev in calls:
        key = (ev.caller_id, ev.callee_id)
        counts[key] = counts.get(key, 0) + 1
    reciprocal = {(i, j): c for (i, j), c in counts.items() if (j, i) in counts}
    if marginal_universe == "reciprocal":
        return WeightedNetwork.from_directed_counts(reciprocal)
    if marginal_universe != "all":
        raise ValueError(f"unknown marginal universe {marginal_universe!r}")

    net = WeightedNetwork.from_directed_counts(reciprocal)
    out_counts: dict[str, int] = {}
    in_counts: dict[str, int] = {}
    for (i, j), c in counts.items():
        out_counts[i] = out_counts.get(i, 0) + c
        in_counts[j] = in_counts.get(j, 0) + c
    return WeightedNetwork(nodes=net.nodes | frozenset(out_counts) | frozenset(in_counts),
                           directed=net.directed, edge_weights=net.edge_weights,
                           out_counts=out_counts, in_counts=in_counts,
                           total=sum(counts.values()))
