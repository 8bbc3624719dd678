"""Keyword search over the tuple graph.

Two strategies share the same answer model.  Backward expanding search
runs one shortest-path iterator per keyword node, walking edges in
reverse; a node every term can reach becomes the root of an answer tree
assembled from the iterators' shortest paths.  Bidirectional search adds a
forward iterator from candidate roots and orders all expansion by spread
activation, trading guaranteed answers for a smaller search frontier.
"""

from __future__ import annotations

import heapq
import itertools
import time
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .graph import DataGraph
from .keywords import KeywordIndex
from .scoring import (AnswerTree, OutputHeap, ScoreConfig, ScoredAnswer,
                      EDGE_RECIPROCAL_SUM, score_tree, tree_score)

COMBOS_ALL = "all"
COMBOS_BEST = "best"


class NoMatchError(Exception):
    """A query term matched nothing searchable."""

    def __init__(self, term: str):
        super().__init__(f"no match for keyword {term!r}")
        self.term = term


@dataclass
class KeywordSets:
    """One node set per query term; every set is nonempty."""

    terms: list[str]
    sets: list[frozenset[int]]

    @classmethod
    def from_index(cls, index: KeywordIndex, terms: list[str]) -> KeywordSets:
        sets = []
        for term in terms:
            nodes = index.lookup(term)
            if not nodes:
                raise NoMatchError(term)
            sets.append(frozenset(nodes))
        return cls(list(terms), sets)

    def restrict(self, keep: dict[int, int]) -> KeywordSets:
        """Intersect with ``keep``'s keys and relabel through it."""
        sets = []
        for term, s in zip(self.terms, self.sets):
            mapped = frozenset(keep[n] for n in s if n in keep)
            if not mapped:
                raise NoMatchError(term)
            sets.append(mapped)
        return KeywordSets(list(self.terms), sets)


@dataclass
class SearchConfig:
    k: int = 10
    score: ScoreConfig = field(default_factory=ScoreConfig)
    steiner_filter: bool = True
    attenuation: float = 0.5
    combos: str = COMBOS_ALL

    def for_phase1(self, limit: int) -> SearchConfig:
        return replace(self, k=limit, steiner_filter=False)


@dataclass
class SearchStats:
    nodes_touched: int = 0
    nodes_explored: int = 0
    answers_emitted: int = 0
    clusters_read: int = 0
    bytes_read: int = 0
    elapsed: float = 0.0

    def __add__(self, other: SearchStats) -> SearchStats:
        return SearchStats(
            self.nodes_touched + other.nodes_touched,
            self.nodes_explored + other.nodes_explored,
            self.answers_emitted + other.answers_emitted,
            self.clusters_read + other.clusters_read,
            self.bytes_read + other.bytes_read,
            self.elapsed + other.elapsed,
        )


# --- activation -----------------------------------------------------------

@dataclass
class ActivationState:
    """Per (node, term) activation, combined by maximum."""

    a: np.ndarray  # float64 [n, terms]
    mu: float = 0.5


@dataclass
class SpreadRecord:
    """Accounting for one spread step, per term component."""

    received: np.ndarray
    retained: np.ndarray
    offered: list[tuple[int, np.ndarray]]

    def distributed(self) -> np.ndarray:
        total = np.zeros_like(self.received)
        for _, offer in self.offered:
            total += offer
        return total


def init_activation(ks: KeywordSets, prestige: np.ndarray,
                    mu: float = 0.5) -> ActivationState:
    """Each keyword node starts with its prestige split across its set."""
    a = np.zeros((len(prestige), len(ks.sets)), dtype=np.float64)
    for i, s in enumerate(ks.sets):
        size = len(s)
        for u in s:
            a[u, i] = float(prestige[u]) / size
    return ActivationState(a, mu)


def spread_activation(state: ActivationState, source: int,
                      neighbors: list[tuple[int, float]],
                      direction: str = "in") -> SpreadRecord:
    """Push a fraction mu of the source's activation to its neighbors.

    The source's held activation stays put; of the mass it forwards, each
    neighbor's share is inversely proportional to the connecting edge
    weight, and a receiving node keeps the maximum of old and offered
    activation.  Returns the conservation record for the step: retained
    plus distributed equals received.
    """
    received = state.a[source].copy()
    if not neighbors:
        return SpreadRecord(received, received.copy(), [])
    inv = [1.0 / w for _, w in neighbors]
    total_inv = sum(inv)
    retained = (1.0 - state.mu) * received
    offered: list[tuple[int, np.ndarray]] = []
    for (node, _), share in zip(neighbors, inv):
        offer = state.mu * received * (share / total_inv)
        offered.append((node, offer))
        np.maximum(state.a[node], offer, out=state.a[node])
    return SpreadRecord(received, retained, offered)


# --- answer assembly ------------------------------------------------------

def _tight_path(g: DataGraph, dist: dict[int, float],
                start: int) -> list[tuple[int, int, float]]:
    """Walk from ``start`` to the distance-0 node along tight edges.

    At every step the successor is the smallest-id out-neighbor whose
    distance plus the edge weight exactly reproduces the current distance,
    which makes the extracted path the lexicographically smallest of the
    minimum-cost ones.
    """
    edges: list[tuple[int, int, float]] = []
    x = start
    while dist[x] > 0.0:
        best: tuple[int, float] | None = None
        dx = dist[x]
        for _, v, w in g.out_edges(x):
            dv = dist.get(v)
            if dv is None or w + dv != dx:
                continue
            if best is None or v < best[0]:
                best = (v, w)
        if best is None:  # cannot happen for settled nodes
            raise RuntimeError(f"no tight successor at node {x}")
        edges.append((x, best[0], best[1]))
        x = best[0]
    return edges


def _union_tree(root: int, paths: list[list[tuple[int, int, float]]],
                keyword_nodes: tuple[int, ...]) -> AnswerTree | None:
    """Merge root-to-keyword paths; None when they disagree on a parent."""
    parent: dict[int, tuple[int, float]] = {}
    for path in paths:
        for u, v, w in path:
            known = parent.get(v)
            if known is None:
                parent[v] = (u, w)
            elif known != (u, w):
                return None
    if root in parent:
        return None
    edges = tuple(sorted((u, v, w) for v, (u, w) in parent.items()))
    return AnswerTree(root, edges, keyword_nodes)


def root_is_redundant(tree: AnswerTree, ks: KeywordSets) -> bool:
    """True when dropping a single-child root still covers every term."""
    kids = tree.children().get(tree.root, [])
    if len(kids) != 1:
        return False
    rest = tree.nodes - {tree.root}
    return all(any(n in s for n in rest) for s in ks.sets)


def steiner_minimality_filter(answers: list[ScoredAnswer]) -> list[ScoredAnswer]:
    """Drop answers whose node set strictly contains another answer's."""
    node_sets = [a.tree.nodes for a in answers]
    by_size = sorted(range(len(answers)), key=lambda i: len(node_sets[i]))
    keep = []
    for i, a in enumerate(answers):
        si = node_sets[i]
        dominated = False
        for j in by_size:
            sj = node_sets[j]
            if len(sj) >= len(si):
                break
            if sj < si:
                dominated = True
                break
        if not dominated:
            keep.append(a)
    return keep


def _finalize(candidates: dict, ks: KeywordSets, cfg: SearchConfig,
              stats: SearchStats) -> list[ScoredAnswer]:
    answers = sorted(candidates.values(), key=ScoredAnswer.sort_key)
    if cfg.steiner_filter:
        answers = steiner_minimality_filter(answers)
    top = answers[:cfg.k]
    stats.answers_emitted = len(top)
    return top


def _score_ceiling(g: DataGraph, ks: KeywordSets, cfg: ScoreConfig) -> float:
    """Largest node score any answer on this graph could reach."""
    best_root = float(np.max(g.prestige)) if g.node_count else 0.0
    per_set = sum(max(float(g.prestige[u]) for u in s) for s in ks.sets)
    return best_root + per_set


def _edge_ceiling(cfg: ScoreConfig, frontier: float) -> float:
    """Largest edge score a not-yet-found answer could reach."""
    if cfg.edge_variant == EDGE_RECIPROCAL_SUM and frontier > 0.0:
        return 1.0 / (1.0 + frontier)
    return 1.0


# --- backward expanding search --------------------------------------------

def backward_search(g: DataGraph, ks: KeywordSets,
                    cfg: SearchConfig | None = None
                    ) -> tuple[list[ScoredAnswer], SearchStats]:
    """One reverse shortest-path iterator per keyword node.

    Iterators advance globally by smallest tentative distance.  Whenever a
    node has been settled by at least one iterator per term, each fresh
    combination of arrived iterators yields an answer tree made of the
    lexicographically canonical shortest paths from that root.  Runs until
    the frontier is exhausted or the output bound releases ``cfg.k``
    answers.
    """
    cfg = cfg or SearchConfig()
    stats = SearchStats()
    started = time.perf_counter()
    _require_nonempty(ks)

    sources = sorted(set().union(*ks.sets))
    source_sets = [[i for i, s in enumerate(ks.sets) if n in s] for n in sources]
    nsets = len(ks.sets)
    dist: list[dict[int, float]] = [dict() for _ in sources]
    settled: list[set[int]] = [set() for _ in sources]
    heap: list[tuple[float, int, int]] = []
    for it, n in enumerate(sources):
        dist[it][n] = 0.0
        heapq.heappush(heap, (0.0, it, n))

    arrivals: dict[int, list[list[int]]] = {}
    done_combos: dict[int, set[tuple[int, ...]]] = {}
    candidates: dict = {}
    out = OutputHeap()
    n_ceiling = _score_ceiling(g, ks, cfg.score)

    while heap:
        d, it, x = heapq.heappop(heap)
        if x in settled[it]:
            continue
        settled[it].add(x)
        out.update_bound(tree_score(n_ceiling, _edge_ceiling(cfg.score, d), cfg.score))

        slots = arrivals.get(x)
        if slots is None:
            slots = arrivals.setdefault(x, [[] for _ in range(nsets)])
        for i in source_sets[it]:
            if cfg.combos == COMBOS_BEST and slots[i]:
                continue
            slots[i].append(it)
        if all(slots):
            seen = done_combos.setdefault(x, set())
            for combo in itertools.product(*slots):
                if combo in seen:
                    continue
                seen.add(combo)
                paths = [_tight_path(g, dist[c], x) for c in combo]
                tree = _union_tree(x, paths, tuple(sources[c] for c in combo))
                if tree is None or root_is_redundant(tree, ks):
                    continue
                key = tree.identity_key()
                if key in candidates:
                    continue
                answer = score_tree(tree, g.prestige, cfg.score)
                candidates[key] = answer
                out.push(answer)
        if len(out.emitted) >= cfg.k:
            break

        for y, w_in in g.in_edges(x):
            nd = w_in + d
            old = dist[it].get(y)
            if old is None or nd < old:
                dist[it][y] = nd
                heapq.heappush(heap, (nd, it, y))

    stats.nodes_touched = sum(len(d) for d in dist)
    stats.nodes_explored = sum(len(s) for s in settled)
    answers = _finalize(candidates, ks, cfg, stats)
    stats.elapsed = time.perf_counter() - started
    return answers, stats


# --- bidirectional search -------------------------------------------------

def bidirectional_search(g: DataGraph, ks: KeywordSets,
                         cfg: SearchConfig | None = None
                         ) -> tuple[list[ScoredAnswer], SearchStats]:
    """Activation-ordered search with one incoming and one outgoing iterator.

    The incoming iterator grows backward from the keyword nodes; every node
    it explores becomes a potential root and is handed to the outgoing
    iterator, which explores forward.  A single shortest-known-path table
    per term is shared by both iterators and repaired by propagating every
    distance improvement, so each node remembers only one way to each
    term: answers reachable exclusively through a second-best path are
    lost, which is the price of the smaller frontier.
    """
    cfg = cfg or SearchConfig()
    stats = SearchStats()
    started = time.perf_counter()
    _require_nonempty(ks)

    n, w = g.node_count, len(ks.sets)
    INF = float("inf")
    d = np.full((n, w), INF, dtype=np.float64)
    succ = np.full((n, w), -1, dtype=np.int64)
    succ_w = np.zeros((n, w), dtype=np.float64)
    missing = np.full(n, w, dtype=np.int64)
    for i, s in enumerate(ks.sets):
        for u in s:
            if d[u, i] == INF:
                missing[u] -= 1
            d[u, i] = 0.0

    act = init_activation(ks, g.prestige, cfg.attenuation)
    in_heap: list[tuple[float, int]] = []
    out_heap: list[tuple[float, int]] = []
    in_pushed = np.zeros(n, dtype=bool)
    out_pushed = np.zeros(n, dtype=bool)
    in_done = np.zeros(n, dtype=bool)
    out_done = np.zeros(n, dtype=bool)
    is_root = np.zeros(n, dtype=bool)
    emitted_roots = np.zeros(n, dtype=bool)
    pending_roots: deque[int] = deque()

    def push_in(node: int) -> None:
        if not in_pushed[node]:
            in_pushed[node] = True
            stats.nodes_touched += 1
        heapq.heappush(in_heap, (-float(np.sum(act.a[node])), node))

    def push_out(node: int) -> None:
        if not out_pushed[node]:
            out_pushed[node] = True
            stats.nodes_touched += 1
        heapq.heappush(out_heap, (-float(np.sum(act.a[node])), node))

    for u in sorted(set().union(*ks.sets)):
        push_in(u)

    def propagate(queue: deque[tuple[int, int]]) -> None:
        """Repair shortest-known distances after improvements at the queued nodes."""
        while queue:
            q, i = queue.popleft()
            base = d[q, i]
            for x, w_xq in g.in_edges(q):
                cand = w_xq + base
                if cand < d[x, i]:
                    if d[x, i] == INF:
                        missing[x] -= 1
                        if missing[x] == 0 and is_root[x] and not emitted_roots[x]:
                            pending_roots.append(x)
                    d[x, i] = cand
                    succ[x, i] = q
                    succ_w[x, i] = w_xq
                    queue.append((x, i))

    def build_root_tree(r: int) -> AnswerTree | None:
        paths = []
        kw_nodes = []
        for i in range(w):
            path: list[tuple[int, int, float]] = []
            x = r
            while d[x, i] > 0.0:
                s = int(succ[x, i])
                path.append((x, s, float(succ_w[x, i])))
                x = s
            paths.append(path)
            kw_nodes.append(x)
        return _union_tree(r, paths, tuple(kw_nodes))

    candidates: dict = {}
    out = OutputHeap()
    n_ceiling = _score_ceiling(g, ks, cfg.score)
    out.update_bound(tree_score(n_ceiling, 1.0, cfg.score))

    def emit(r: int) -> None:
        emitted_roots[r] = True
        tree = build_root_tree(r)
        if tree is None or root_is_redundant(tree, ks):
            return
        key = tree.identity_key()
        if key not in candidates:
            answer = score_tree(tree, g.prestige, cfg.score)
            candidates[key] = answer
            out.push(answer)

    while in_heap or out_heap:
        take_in = bool(in_heap)
        if take_in and out_heap and out_heap[0][0] < in_heap[0][0]:
            take_in = False
        if take_in:
            _, u = heapq.heappop(in_heap)
            if in_done[u]:
                continue
            in_done[u] = True
            stats.nodes_explored += 1
            is_root[u] = True
            push_out(u)
            if missing[u] == 0 and not emitted_roots[u]:
                pending_roots.append(u)
            queue = deque((u, i) for i in range(w) if d[u, i] < INF)
            propagate(queue)
            neighbors = list(g.in_edges(u))
            record = spread_activation(act, u, neighbors, "in")
            for x, _ in record.offered:
                if not in_done[x]:
                    push_in(x)
        else:
            _, v = heapq.heappop(out_heap)
            if out_done[v]:
                continue
            out_done[v] = True
            stats.nodes_explored += 1
            improved = deque()
            for _, y, w_vy in g.out_edges(v):
                for i in range(w):
                    cand = w_vy + d[y, i]
                    if cand < d[v, i]:
                        if d[v, i] == INF:
                            missing[v] -= 1
                            if missing[v] == 0 and is_root[v] and not emitted_roots[v]:
                                pending_roots.append(v)
                        d[v, i] = cand
                        succ[v, i] = y
                        succ_w[v, i] = w_vy
                        improved.append((v, i))
            propagate(improved)
            neighbors = [(y, wt) for _, y, wt in g.out_edges(v)]
            record = spread_activation(act, v, neighbors, "out")
            for y, _ in record.offered:
                if not out_done[y]:
                    push_out(y)
        while pending_roots:
            r = pending_roots.popleft()
            if not emitted_roots[r]:
                emit(r)
        if len(out.emitted) >= cfg.k:
            break

    stats.nodes_explored = int(np.count_nonzero(in_done) + np.count_nonzero(out_done))
    answers = _finalize(candidates, ks, cfg, stats)
    stats.elapsed = time.perf_counter() - started
    return answers, stats


def _require_nonempty(ks: KeywordSets) -> None:
    for term, s in zip(ks.terms, ks.sets):
        if not s:
            raise NoMatchError(term)
