"""Flat-array directed graph over database tuples.

Every foreign-key link is stored twice: a forward slot in the referencing
node's adjacency span and a backward slot in the referenced node's span.
The two slots carry independent weights and are tied together by a partner
index, so traversal can walk either direction of any link and always find
the cost of the opposite direction in O(1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

BYTES_PER_NODE = 20
BYTES_PER_EDGE = 12

DEFAULT_FORWARD_WEIGHT = 1.0


class GraphError(Exception):
    """Base class for graph construction and validation failures."""


class IngestError(GraphError):
    """Raised when schema or data files cannot be turned into a graph."""


@dataclass(frozen=True)
class TableSpec:
    name: str
    text_columns: tuple[str, ...] = ()
    prestige_column: str | None = None

    @property
    def has_text(self) -> bool:
        return len(self.text_columns) > 0


@dataclass(frozen=True)
class ForeignKey:
    from_table: str
    from_column: str
    to_table: str
    to_column: str


@dataclass
class IngestSpec:
    tables: list[TableSpec]
    foreign_keys: list[ForeignKey]
    forward_weight_default: float = DEFAULT_FORWARD_WEIGHT

    def table_index(self, name: str) -> int:
        for i, t in enumerate(self.tables):
            if t.name == name:
                return i
        raise IngestError(f"unknown table {name!r}")


@dataclass
class NodeMeta:
    """Per-node metadata kept outside the search arrays."""

    relation_names: list[str]
    node_relation: np.ndarray  # uint16, relation id per node
    node_text: list[str]
    node_key: list[str]

    def __len__(self) -> int:
        return len(self.node_text)


@dataclass
class DataGraph:
    """Both-direction adjacency arrays for one graph.

    ``adjacency_offset`` has ``node_count + 1`` entries; the slots of node
    ``u`` are ``range(adjacency_offset[u], adjacency_offset[u + 1])``.  Slot
    ``j`` describes a traversable edge ``u -> adjacent_nodes[j]`` whose
    weight is ``edge_weight[j]``; ``edge_direction[j]`` is True when the
    traversal follows the foreign-key direction.  ``pair_slot[j]`` is the
    slot of the same link seen from the other endpoint.
    """

    node_count: int
    prestige: np.ndarray        # float32 [n]
    node_type: np.ndarray       # uint16  [n]
    adjacency_offset: np.ndarray  # int64 [n + 1]
    adjacent_nodes: np.ndarray  # int64 [m]
    edge_weight: np.ndarray     # float32 [m]
    edge_priority: np.ndarray   # float32 [m]
    edge_direction: np.ndarray  # bool [m], True = forward
    pair_slot: np.ndarray       # int64 [m]

    @property
    def slot_count(self) -> int:
        return int(len(self.adjacent_nodes))

    def slots(self, node: int) -> range:
        return range(int(self.adjacency_offset[node]),
                     int(self.adjacency_offset[node + 1]))

    def out_edges(self, node: int):
        """Yield (slot, target, weight) for every traversable edge leaving node."""
        for j in self.slots(node):
            yield j, int(self.adjacent_nodes[j]), float(self.edge_weight[j])

    def in_edges(self, node: int):
        """Yield (source, weight of source->node) for every edge entering node.

        The sources are exactly the adjacency targets of ``node``; the cost
        of the opposite direction lives in the partner slot.
        """
        for j in self.slots(node):
            yield int(self.adjacent_nodes[j]), float(self.edge_weight[self.pair_slot[j]])

    def links(self):
        """Yield each stored link once as (u, v, w_fwd, w_bwd, p_fwd, p_bwd).

        ``u -> v`` is the foreign-key direction.
        """
        starts = np.repeat(np.arange(self.node_count, dtype=np.int64),
                           np.diff(self.adjacency_offset))
        for j in range(self.slot_count):
            if not self.edge_direction[j]:
                continue
            u = int(starts[j])
            v = int(self.adjacent_nodes[j])
            b = int(self.pair_slot[j])
            yield (u, v, float(self.edge_weight[j]), float(self.edge_weight[b]),
                   float(self.edge_priority[j]), float(self.edge_priority[b]))

    def validate(self) -> None:
        """Check the structural invariants, raising GraphError on breach."""
        if len(self.adjacency_offset) != self.node_count + 1:
            raise GraphError("adjacency_offset length must be node_count + 1")
        if self.adjacency_offset[0] != 0 or np.any(np.diff(self.adjacency_offset) < 0):
            raise GraphError("adjacency_offset must be nondecreasing from 0")
        if int(self.adjacency_offset[-1]) != self.slot_count:
            raise GraphError("adjacency_offset must end at the slot count")
        m = self.slot_count
        for arr, name in ((self.edge_weight, "edge_weight"),
                          (self.edge_priority, "edge_priority"),
                          (self.edge_direction, "edge_direction"),
                          (self.pair_slot, "pair_slot")):
            if len(arr) != m:
                raise GraphError(f"{name} length mismatch")
        if m and (np.min(self.adjacent_nodes) < 0
                  or np.max(self.adjacent_nodes) >= self.node_count):
            raise GraphError("adjacency target out of range")
        if np.any(self.edge_weight <= 0):
            raise GraphError("edge weights must be positive")
        starts = np.repeat(np.arange(self.node_count, dtype=np.int64),
                           np.diff(self.adjacency_offset))
        for j in range(m):
            b = int(self.pair_slot[j])
            if b < 0 or b >= m or int(self.pair_slot[b]) != j:
                raise GraphError(f"slot {j}: partner index not an involution")
            if int(self.adjacent_nodes[b]) != int(starts[j]):
                raise GraphError(f"slot {j}: partner does not point back")
            if int(starts[b]) != int(self.adjacent_nodes[j]):
                raise GraphError(f"slot {j}: partner not owned by the target")
            if bool(self.edge_direction[b]) == bool(self.edge_direction[j]):
                raise GraphError(f"slot {j}: partner must have the opposite direction")


class GraphBuilder:
    """Accumulates nodes and links, then freezes them into a DataGraph."""

    def __init__(self) -> None:
        self._prestige: list[float] = []
        self._types: list[int] = []
        # (u, v, w_fwd, w_bwd, p_fwd, p_bwd) with u -> v the FK direction
        self._links: list[tuple[int, int, float, float, float, float]] = []

    def add_node(self, prestige: float = 0.0, node_type: int = 0) -> int:
        self._prestige.append(prestige)
        self._types.append(node_type)
        return len(self._prestige) - 1

    def add_link(self, u: int, v: int, forward_weight: float,
                 backward_weight: float,
                 forward_priority: float = 0.0,
                 backward_priority: float = 0.0) -> None:
        n = len(self._prestige)
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"link ({u}, {v}) references an unknown node")
        if forward_weight <= 0 or backward_weight <= 0:
            raise GraphError("link weights must be positive")
        self._links.append((u, v, forward_weight, backward_weight,
                            forward_priority, backward_priority))

    def set_prestige(self, node: int, value: float) -> None:
        self._prestige[node] = value

    def build(self) -> DataGraph:
        n = len(self._prestige)
        m = 2 * len(self._links)
        counts = np.zeros(n, dtype=np.int64)
        for u, v, *_ in self._links:
            counts[u] += 1
            counts[v] += 1
        offset = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=offset[1:])
        fill = offset[:-1].copy()
        adjacent = np.zeros(m, dtype=np.int64)
        weight = np.zeros(m, dtype=np.float32)
        priority = np.zeros(m, dtype=np.float32)
        direction = np.zeros(m, dtype=bool)
        pair = np.zeros(m, dtype=np.int64)
        for u, v, wf, wb, pf, pb in self._links:
            jf = int(fill[u]); fill[u] += 1
            jb = int(fill[v]); fill[v] += 1
            adjacent[jf] = v
            weight[jf] = wf
            priority[jf] = pf
            direction[jf] = True
            adjacent[jb] = u
            weight[jb] = wb
            priority[jb] = pb
            direction[jb] = False
            pair[jf] = jb
            pair[jb] = jf
        return DataGraph(
            node_count=n,
            prestige=np.asarray(self._prestige, dtype=np.float32),
            node_type=np.asarray(self._types, dtype=np.uint16),
            adjacency_offset=offset,
            adjacent_nodes=adjacent,
            edge_weight=weight,
            edge_priority=priority,
            edge_direction=direction,
            pair_slot=pair,
        )


def degree(g: DataGraph, node: int, mode: str = "out") -> int:
    """Count adjacency slots of ``node`` by direction bit.

    ``out`` counts forward slots (links the node's tuple makes), ``in``
    counts backward slots (links made to it).  In this both-direction
    representation a node with a balanced span of s slots has
    in = out = s / 2.
    """
    span = g.edge_direction[g.adjacency_offset[node]:g.adjacency_offset[node + 1]]
    if mode == "out":
        return int(np.count_nonzero(span))
    if mode == "in":
        return int(len(span) - np.count_nonzero(span))
    raise ValueError(f"mode must be 'in' or 'out', got {mode!r}")


def estimate_memory(nodes: int, edges: int) -> int:
    """Bytes needed to hold a graph of the given size in the flat arrays.

    Five 4-byte values per node and three per adjacency slot.
    """
    if nodes < 0 or edges < 0:
        raise ValueError("node and edge counts must be nonnegative")
    return BYTES_PER_NODE * nodes + BYTES_PER_EDGE * edges


def assign_backward_weights(g: DataGraph,
                            default: float = DEFAULT_FORWARD_WEIGHT) -> DataGraph:
    """Reweight every backward slot as ln(1 + in-degree of its target).

    The in-degree is the number of foreign-key links pointing at the
    target.  The result is floored at ``default`` so no slot ever gets a
    weight below the forward default (in particular ln(1) = 0 is lifted).
    Mutates and returns ``g``.
    """
    indeg = np.zeros(g.node_count, dtype=np.int64)
    starts = np.repeat(np.arange(g.node_count, dtype=np.int64),
                       np.diff(g.adjacency_offset))
    for j in range(g.slot_count):
        if not g.edge_direction[j]:
            indeg[starts[j]] += 1
    for j in range(g.slot_count):
        if not g.edge_direction[j]:
            target = int(g.adjacent_nodes[j])
            g.edge_weight[j] = np.float32(max(math.log1p(indeg[target]), default))
    return g


def parse_schema(path: str | Path) -> IngestSpec:
    """Read a schema description file.

    Lines::

        table <name> text=<col,col,...> [prestige=<col>]
        fk <table>.<column> -> <table>.<column>
        default_weight <value>

    Blank lines and lines starting with ``#`` are skipped.
    """
    path = Path(path)
    tables: list[TableSpec] = []
    fks: list[ForeignKey] = []
    default = DEFAULT_FORWARD_WEIGHT
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        kind = parts[0]
        try:
            if kind == "table":
                name = parts[1]
                text_cols: tuple[str, ...] = ()
                prestige_col = None
                for extra in parts[2:]:
                    key, _, value = extra.partition("=")
                    if key == "text":
                        text_cols = tuple(c for c in value.split(",") if c)
                    elif key == "prestige":
                        prestige_col = value or None
                    else:
                        raise IngestError(f"{path}:{lineno}: unknown table option {key!r}")
                tables.append(TableSpec(name, text_cols, prestige_col))
            elif kind == "fk":
                if parts[2] != "->":
                    raise IndexError
                src = parts[1].split(".")
                dst = parts[3].split(".")
                fks.append(ForeignKey(src[0], src[1], dst[0], dst[1]))
            elif kind == "default_weight":
                default = float(parts[1])
            else:
                raise IngestError(f"{path}:{lineno}: unknown directive {kind!r}")
        except (IndexError, ValueError) as exc:
            raise IngestError(f"{path}:{lineno}: malformed line {line!r}") from exc
    if not tables:
        raise IngestError(f"{path}: no tables declared")
    return IngestSpec(tables, fks, default)


def _read_tsv(path: Path) -> tuple[list[str], list[list[str]]]:
    if not path.exists():
        raise IngestError(f"missing data file {path}")
    rows: list[list[str]] = []
    header: list[str] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if lineno == 1:
                header = line.split("\t")
                continue
            if not line:
                continue
            cells = line.split("\t")
            if len(cells) != len(header):
                raise IngestError(
                    f"{path}:{lineno}: expected {len(header)} columns, got {len(cells)}")
            rows.append(cells)
    if not header or header == [""]:
        raise IngestError(f"{path}: missing header row")
    return header, rows


@dataclass
class IngestResult:
    graph: DataGraph
    meta: NodeMeta
    warnings: list[str] = field(default_factory=list)


def ingest(spec: IngestSpec, data_dir: str | Path) -> IngestResult:
    """Load ``<table>.tsv`` files and build the tuple graph.

    Node ids are assigned table by table in declaration order, row by row
    in file order.  Prestige comes from the table's prestige column when
    declared, otherwise it defaults to the node's foreign-key in-degree.
    Dangling references are skipped with a warning; malformed rows raise.
    """
    data_dir = Path(data_dir)
    warnings: list[str] = []
    builder = GraphBuilder()
    node_text: list[str] = []
    node_key: list[str] = []
    node_relation: list[int] = []
    # table -> column -> value -> node id; filled per FK target column on demand
    tables_rows: dict[str, tuple[list[str], list[list[str]], int]] = {}
    explicit_prestige: dict[int, float] = {}

    for rel_id, table in enumerate(spec.tables):
        header, rows = _read_tsv(data_dir / f"{table.name}.tsv")
        col_index = {c: i for i, c in enumerate(header)}
        for col in table.text_columns:
            if col not in col_index:
                raise IngestError(f"{table.name}: text column {col!r} not in header")
        if table.prestige_column and table.prestige_column not in col_index:
            raise IngestError(
                f"{table.name}: prestige column {table.prestige_column!r} not in header")
        first_id = len(node_text)
        for rownum, row in enumerate(rows, 2):
            node = builder.add_node(0.0, rel_id)
            node_relation.append(rel_id)
            node_text.append(" ".join(row[col_index[c]] for c in table.text_columns))
            node_key.append(row[col_index[header[0]]] if header else "")
            if table.prestige_column:
                raw = row[col_index[table.prestige_column]]
                try:
                    explicit_prestige[node] = float(raw)
                except ValueError as exc:
                    raise IngestError(
                        f"{table.name}.tsv:{rownum}: bad prestige value {raw!r}") from exc
        tables_rows[table.name] = (header, rows, first_id)

    def key_lookup(table: str, column: str) -> dict[str, int]:
        header, rows, first_id = tables_rows[table]
        if column not in header:
            raise IngestError(f"{table}: foreign-key column {column!r} not in header")
        ci = header.index(column)
        out: dict[str, int] = {}
        for i, row in enumerate(rows):
            value = row[ci]
            if value and value not in out:
                out[value] = first_id + i
        return out

    lookups: dict[tuple[str, str], dict[str, int]] = {}
    for fk in spec.foreign_keys:
        if fk.from_table not in tables_rows or fk.to_table not in tables_rows:
            raise IngestError(f"foreign key references unknown table: {fk}")
        key = (fk.to_table, fk.to_column)
        if key not in lookups:
            lookups[key] = key_lookup(*key)
        target_by_value = lookups[key]
        header, rows, first_id = tables_rows[fk.from_table]
        if fk.from_column not in header:
            raise IngestError(
                f"{fk.from_table}: foreign-key column {fk.from_column!r} not in header")
        ci = header.index(fk.from_column)
        for i, row in enumerate(rows):
            value = row[ci]
            if not value:
                continue
            target = target_by_value.get(value)
            if target is None:
                warnings.append(
                    f"{fk.from_table}.tsv row {i + 2}: dangling reference "
                    f"{fk.from_column}={value!r} -> {fk.to_table}.{fk.to_column}")
                continue
            builder.add_link(first_id + i, target,
                             spec.forward_weight_default,
                             spec.forward_weight_default)

    graph = builder.build()
    # Default prestige is the foreign-key in-degree (count of backward slots).
    for node in range(graph.node_count):
        if node in explicit_prestige:
            graph.prestige[node] = np.float32(explicit_prestige[node])
        else:
            graph.prestige[node] = np.float32(degree(graph, node, "in"))
    meta = NodeMeta(
        relation_names=[t.name for t in spec.tables],
        node_relation=np.asarray(node_relation, dtype=np.uint16),
        node_text=node_text,
        node_key=node_key,
    )
    return IngestResult(graph, meta, warnings)


def prune_transitive(g: DataGraph, spec: IngestSpec) -> tuple[DataGraph, np.ndarray]:
    """Remove nodes of relations that carry no text, preserving distances.

    Each removed node is spliced out: every pair of links meeting at it is
    replaced by a direct link whose per-direction weights are the path sums.
    Returns the new graph and an old->new node id map (-1 for removed).
    """
    prunable = {i for i, t in enumerate(spec.tables) if not t.has_text}
    if not prunable:
        remap = np.arange(g.node_count, dtype=np.int64)
        return g, remap

    # Mutable link records [u, v, w_uv, w_vu, p_uv, p_vu]; incidence per node.
    links: list[list[float] | None] = [list(l) for l in g.links()]
    incident: list[set[int]] = [set() for _ in range(g.node_count)]
    for li, l in enumerate(links):
        incident[int(l[0])].add(li)
        incident[int(l[1])].add(li)

    def ends(l: list[float], at: int) -> tuple[int, float, float]:
        """Other endpoint plus (cost into ``at``, cost out of ``at``)."""
        u, v = int(l[0]), int(l[1])
        if u == at:
            return v, float(l[3]), float(l[2])
        return u, float(l[2]), float(l[3])

    # Composed links are merged per node pair (minimum cost per direction);
    # keeping every parallel composition would grow exponentially on chains
    # of prunable nodes, and only the cheapest one can lie on a shortest path.
    composed: dict[tuple[int, int], int] = {}

    def compose(a: int, b: int, cost_ab: float, cost_ba: float) -> None:
        lo, hi = (a, b) if a < b else (b, a)
        fwd, bwd = (cost_ab, cost_ba) if a < b else (cost_ba, cost_ab)
        li = composed.get((lo, hi))
        if li is not None and links[li] is not None:
            links[li][2] = min(links[li][2], fwd)
            links[li][3] = min(links[li][3], bwd)
            return
        li = len(links)
        links.append([float(lo), float(hi), fwd, bwd, 0.0, 0.0])
        composed[(lo, hi)] = li
        incident[lo].add(li)
        incident[hi].add(li)

    doomed = [n for n in range(g.node_count) if int(g.node_type[n]) in prunable]
    for w in doomed:
        ids = sorted(incident[w])
        # Compose every unordered pair of distinct incident links through w.
        for ai in range(len(ids)):
            la = links[ids[ai]]
            if la is None:
                continue
            a_other, a_in, a_out = ends(la, w)
            if a_other == w:
                continue
            for bi in range(ai + 1, len(ids)):
                lb = links[ids[bi]]
                if lb is None:
                    continue
                b_other, b_in, b_out = ends(lb, w)
                if b_other == w or b_other == a_other:
                    continue
                compose(a_other, b_other, a_in + b_out, b_in + a_out)
        for li in ids:
            l = links[li]
            if l is None:
                continue
            for end in {int(l[0]), int(l[1])}:
                incident[end].discard(li)
            links[li] = None

    remap = np.full(g.node_count, -1, dtype=np.int64)
    builder = GraphBuilder()
    for n in range(g.node_count):
        if int(g.node_type[n]) in prunable:
            continue
        remap[n] = builder.add_node(float(g.prestige[n]), int(g.node_type[n]))
    for l in links:
        if l is None:
            continue
        u, v = int(l[0]), int(l[1])
        if remap[u] < 0 or remap[v] < 0:
            continue
        builder.add_link(int(remap[u]), int(remap[v]),
                         float(np.float32(l[2])), float(np.float32(l[3])),
                         float(l[4]), float(l[5]))
    return builder.build(), remap


def apply_remap(meta: NodeMeta, remap: np.ndarray) -> NodeMeta:
    """Project node metadata through a prune remap."""
    keep = [i for i in range(len(meta)) if remap[i] >= 0]
    return NodeMeta(
        relation_names=list(meta.relation_names),
        node_relation=meta.node_relation[keep],
        node_text=[meta.node_text[i] for i in keep],
        node_key=[meta.node_key[i] for i in keep],
    )


def build_graph(spec: IngestSpec, data_dir: str | Path,
                prune: bool = True) -> tuple[DataGraph, NodeMeta, list[str]]:
    """Full ingest pipeline: load, weight backward slots, prune key-only nodes."""
    result = ingest(spec, data_dir)
    graph = assign_backward_weights(result.graph, spec.forward_weight_default)
    meta = result.meta
    if prune:
        graph, remap = prune_transitive(graph, spec)
        meta = apply_remap(meta, remap)
    return graph, meta, result.warnings
