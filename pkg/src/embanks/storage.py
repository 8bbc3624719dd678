"""On-disk store: one compressed cluster-level graph plus one file per cluster.

Layout under a store directory::

    graph.emb       cluster graph, clustering arrays, per-cluster metadata
    clusters/*.clu  member nodes and edges of each cluster
    index.kwi       keyword index over the original nodes (optional)
    tuples.emb      the ingested tuple graph (kept for clustering and
                    baseline runs)

All integers are little-endian and ids fit 32 bits; weights are 32-bit
floats.  Every file begins with a four-byte magic and a format version and
ends with a CRC32 of everything before it.
"""

from __future__ import annotations

import os
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .clustering import (ClusterGraph, ClusterMetadata, Clustering,
                         WeightConfig)
from .graph import BYTES_PER_EDGE, BYTES_PER_NODE, DataGraph, GraphBuilder, NodeMeta
from .keywords import KeywordIndex

GRAPH_FILE = "graph.emb"
TUPLES_FILE = "tuples.emb"
INDEX_FILE = "index.kwi"
CLUSTER_DIR = "clusters"

MAGIC_GRAPH = b"EMBK"
MAGIC_TUPLES = b"EMBT"
MAGIC_CLUSTER = b"EMBC"
MAGIC_INDEX = b"EMBI"
FORMAT_VERSION = 1

_EDGE_COMBINER_IDS = {"inverse-sum": 0, "harmonic-mean": 1, "min": 2}
_PRESTIGE_COMBINER_IDS = {"sum": 0, "max": 1, "avg": 2}
_EDGE_COMBINER_NAMES = {v: k for k, v in _EDGE_COMBINER_IDS.items()}
_PRESTIGE_COMBINER_NAMES = {v: k for k, v in _PRESTIGE_COMBINER_IDS.items()}


class StorageError(Exception):
    pass


class StorageFormatError(StorageError):
    """A file failed magic, version, checksum, or bounds validation."""


class StorageOrderError(StorageError):
    """Cluster files must be written in ascending id order within a build."""


class _Writer:
    def __init__(self) -> None:
        self._parts: list[bytes] = []

    def raw(self, data: bytes) -> None:
        self._parts.append(data)

    def u8(self, v: int) -> None:
        self.raw(int(v).to_bytes(1, "little"))

    def u16(self, v: int) -> None:
        self.raw(int(v).to_bytes(2, "little"))

    def u32(self, v: int) -> None:
        self.raw(int(v).to_bytes(4, "little"))

    def arr(self, values: np.ndarray, dtype: str) -> None:
        self.raw(np.ascontiguousarray(values, dtype=np.dtype(dtype)).tobytes())

    def bits(self, flags: np.ndarray) -> None:
        self.raw(np.packbits(np.asarray(flags, dtype=bool)).tobytes())

    def string(self, text: str) -> None:
        data = text.encode("utf-8")
        self.u32(len(data))
        self.raw(data)

    def finish(self, path: Path) -> int:
        body = b"".join(self._parts)
        blob = body + zlib.crc32(body).to_bytes(4, "little")
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as fh:
            fh.write(blob)
            fh.flush()
            os.fsync(fh.fileno())
        return len(blob)


class _Reader:
    def __init__(self, path: Path, magic: bytes) -> None:
        self.path = path
        try:
            blob = path.read_bytes()
        except OSError as exc:
            raise StorageError(f"{path}: {exc}") from exc
        if len(blob) < 12:
            raise StorageFormatError(f"{path}: truncated file")
        body, crc = blob[:-4], int.from_bytes(blob[-4:], "little")
        if zlib.crc32(body) != crc:
            raise StorageFormatError(f"{path}: checksum mismatch")
        self._body = body
        self._pos = 0
        got = self.raw(4)
        if got != magic:
            raise StorageFormatError(f"{path}: bad magic {got!r}")
        version = self.u32()
        if version != FORMAT_VERSION:
            raise StorageFormatError(f"{path}: unsupported version {version}")

    def raw(self, n: int) -> bytes:
        if self._pos + n > len(self._body):
            raise StorageFormatError(f"{self.path}: truncated file")
        out = self._body[self._pos:self._pos + n]
        self._pos += n
        return out

    def u8(self) -> int:
        return int.from_bytes(self.raw(1), "little")

    def u16(self) -> int:
        return int.from_bytes(self.raw(2), "little")

    def u32(self) -> int:
        return int.from_bytes(self.raw(4), "little")

    def arr(self, count: int, dtype: str) -> np.ndarray:
        dt = np.dtype(dtype)
        return np.frombuffer(self.raw(count * dt.itemsize), dtype=dt).copy()

    def bits(self, count: int) -> np.ndarray:
        packed = np.frombuffer(self.raw((count + 7) // 8), dtype=np.uint8)
        return np.unpackbits(packed, count=count).astype(bool)

    def string(self) -> str:
        return self.raw(self.u32()).decode("utf-8")

    def done(self) -> None:
        if self._pos != len(self._body):
            raise StorageFormatError(f"{self.path}: {len(self._body) - self._pos} "
                                     "trailing bytes")


def _write_graph_arrays(w: _Writer, g: DataGraph) -> None:
    w.arr(g.prestige, "<f4")
    w.arr(g.node_type, "<u2")
    w.arr(g.adjacency_offset, "<u4")
    w.arr(g.adjacent_nodes, "<u4")
    w.arr(g.edge_weight, "<f4")
    w.arr(g.edge_priority, "<f4")
    w.bits(g.edge_direction)
    w.arr(g.pair_slot, "<u4")


def _read_graph_arrays(r: _Reader, n: int, m: int) -> DataGraph:
    return DataGraph(
        node_count=n,
        prestige=r.arr(n, "<f4"),
        node_type=r.arr(n, "<u2"),
        adjacency_offset=r.arr(n + 1, "<u4").astype(np.int64),
        adjacent_nodes=r.arr(m, "<u4").astype(np.int64),
        edge_weight=r.arr(m, "<f4"),
        edge_priority=r.arr(m, "<f4"),
        edge_direction=r.bits(m),
        pair_slot=r.arr(m, "<u4").astype(np.int64),
    )


# --- tuple graph ------------------------------------------------------------

def write_tuple_graph(path: str | Path, g: DataGraph, meta: NodeMeta) -> int:
    w = _Writer()
    w.raw(MAGIC_TUPLES)
    w.u32(FORMAT_VERSION)
    w.u32(g.node_count)
    w.u32(g.slot_count)
    w.u32(len(meta.relation_names))
    _write_graph_arrays(w, g)
    for name in meta.relation_names:
        w.string(name)
    w.arr(meta.node_relation, "<u2")
    for texts in (meta.node_text, meta.node_key):
        blobs = [t.encode("utf-8") for t in texts]
        offsets = np.zeros(len(blobs) + 1, dtype=np.int64)
        np.cumsum([len(b) for b in blobs], out=offsets[1:])
        w.arr(offsets, "<u4")
        w.raw(b"".join(blobs))
    return w.finish(Path(path))


def read_tuple_graph(path: str | Path) -> tuple[DataGraph, NodeMeta]:
    r = _Reader(Path(path), MAGIC_TUPLES)
    n = r.u32()
    m = r.u32()
    relations = r.u32()
    g = _read_graph_arrays(r, n, m)
    names = [r.string() for _ in range(relations)]
    node_relation = r.arr(n, "<u2")
    texts: list[list[str]] = []
    for _ in range(2):
        offsets = r.arr(n + 1, "<u4")
        blob = r.raw(int(offsets[-1]))
        texts.append([blob[offsets[i]:offsets[i + 1]].decode("utf-8")
                      for i in range(n)])
    r.done()
    return g, NodeMeta(names, node_relation, texts[0], texts[1])


# --- compressed cluster graph -----------------------------------------------

@dataclass
class StoreHeader:
    cluster_graph: ClusterGraph
    clustering: Clustering
    metadata: ClusterMetadata
    intra_links: np.ndarray     # per cluster, link records inside it
    crossing_links: np.ndarray  # per cluster, crossing links incident to it


def write_compressed_graph(path: str | Path, header: StoreHeader) -> int:
    cg = header.cluster_graph
    cl = header.clustering
    k = cg.graph.node_count
    w = _Writer()
    w.raw(MAGIC_GRAPH)
    w.u32(FORMAT_VERSION)
    w.u32(k)
    w.u32(cg.graph.slot_count)
    w.u32(cl.node_count)
    w.u32(cl.max_cluster_size)
    w.u8(_EDGE_COMBINER_IDS[cg.wcfg.edge_combiner])
    w.u8(_PRESTIGE_COMBINER_IDS[cg.wcfg.prestige_combiner])
    w.u16(0)
    _write_graph_arrays(w, cg.graph)
    w.arr(cg.min_crossing, "<f4")
    w.arr(cl.node_mapping, "<u4")
    w.arr(cl.node_order, "<u4")
    w.arr(cl.cluster_offset, "<u4")
    w.arr(header.metadata.diameter, "<f4")
    w.arr(header.metadata.min_in_out, "<f4")
    w.arr(header.intra_links, "<u4")
    w.arr(header.crossing_links, "<u4")
    return w.finish(Path(path))


def read_compressed_graph(path: str | Path) -> StoreHeader:
    r = _Reader(Path(path), MAGIC_GRAPH)
    k = r.u32()
    m = r.u32()
    n = r.u32()
    max_size = r.u32()
    edge_comb = r.u8()
    prestige_comb = r.u8()
    r.u16()
    if edge_comb not in _EDGE_COMBINER_NAMES or prestige_comb not in _PRESTIGE_COMBINER_NAMES:
        raise StorageFormatError(f"{path}: unknown combiner ids")
    graph = _read_graph_arrays(r, k, m)
    min_crossing = r.arr(m, "<f4")
    clustering = Clustering(
        node_mapping=r.arr(n, "<u4").astype(np.int64),
        node_order=r.arr(n, "<u4").astype(np.int64),
        cluster_offset=r.arr(k + 1, "<u4").astype(np.int64),
        max_cluster_size=max_size,
    )
    metadata = ClusterMetadata(
        diameter=r.arr(k, "<f4").astype(np.float64),
        min_in_out=r.arr(k, "<f4").astype(np.float64),
    )
    intra = r.arr(k, "<u4").astype(np.int64)
    crossing = r.arr(k, "<u4").astype(np.int64)
    r.done()
    wcfg = WeightConfig(_EDGE_COMBINER_NAMES[edge_comb],
                        _PRESTIGE_COMBINER_NAMES[prestige_comb])
    return StoreHeader(ClusterGraph(graph, min_crossing, wcfg),
                       clustering, metadata, intra, crossing)


# --- per-cluster files --------------------------------------------------------

@dataclass
class ClusterPayload:
    """Members and edges of one cluster.

    Edges are stored as whole links (both direction weights in one record).
    ``intra`` links join two members; ``boundary`` links lead from a member
    to a node in another cluster and live only in the file of the cluster
    owning the link's foreign-key source, so a reader joining two clusters
    restores the opposite direction itself.
    """

    cluster_id: int
    members: np.ndarray      # int64, global node ids
    prestige: np.ndarray     # float32
    node_type: np.ndarray    # uint16
    text_offset: np.ndarray  # int64, into the tuple text blob
    text_len: np.ndarray     # int64
    intra_src: np.ndarray    # int64, local member index
    intra_dst: np.ndarray
    intra_w: np.ndarray      # float32 [ln, 2] forward/backward
    intra_p: np.ndarray      # float32 [ln, 2]
    bound_src: np.ndarray    # int64, local member index
    bound_dst: np.ndarray    # int64, global node id
    bound_cluster: np.ndarray  # int64, cluster of the target
    bound_w: np.ndarray      # float32 [lb, 2]
    bound_p: np.ndarray      # float32 [lb, 2]

    @property
    def member_count(self) -> int:
        return len(self.members)


def cluster_file_name(cluster_id: int, cluster_count: int) -> str:
    width = max(4, len(str(cluster_count)))
    return f"{cluster_id:0{width}d}.clu"


def write_cluster(path: str | Path, payload: ClusterPayload) -> int:
    w = _Writer()
    w.raw(MAGIC_CLUSTER)
    w.u32(FORMAT_VERSION)
    w.u32(payload.cluster_id)
    w.u32(len(payload.members))
    w.u32(len(payload.intra_src))
    w.u32(len(payload.bound_src))
    w.arr(payload.members, "<u4")
    w.arr(payload.prestige, "<f4")
    w.arr(payload.node_type, "<u2")
    w.arr(payload.text_offset, "<u4")
    w.arr(payload.text_len, "<u4")
    w.arr(payload.intra_src, "<u4")
    w.arr(payload.intra_dst, "<u4")
    w.arr(payload.intra_w, "<f4")
    w.arr(payload.intra_p, "<f4")
    w.arr(payload.bound_src, "<u4")
    w.arr(payload.bound_dst, "<u4")
    w.arr(payload.bound_cluster, "<u4")
    w.arr(payload.bound_w, "<f4")
    w.arr(payload.bound_p, "<f4")
    return w.finish(Path(path))


def read_cluster(path: str | Path) -> ClusterPayload:
    r = _Reader(Path(path), MAGIC_CLUSTER)
    cid = r.u32()
    nm = r.u32()
    ln = r.u32()
    lb = r.u32()
    payload = ClusterPayload(
        cluster_id=cid,
        members=r.arr(nm, "<u4").astype(np.int64),
        prestige=r.arr(nm, "<f4"),
        node_type=r.arr(nm, "<u2"),
        text_offset=r.arr(nm, "<u4").astype(np.int64),
        text_len=r.arr(nm, "<u4").astype(np.int64),
        intra_src=r.arr(ln, "<u4").astype(np.int64),
        intra_dst=r.arr(ln, "<u4").astype(np.int64),
        intra_w=r.arr(2 * ln, "<f4").reshape(ln, 2),
        intra_p=r.arr(2 * ln, "<f4").reshape(ln, 2),
        bound_src=r.arr(lb, "<u4").astype(np.int64),
        bound_dst=r.arr(lb, "<u4").astype(np.int64),
        bound_cluster=r.arr(lb, "<u4").astype(np.int64),
        bound_w=r.arr(2 * lb, "<f4").reshape(lb, 2),
        bound_p=r.arr(2 * lb, "<f4").reshape(lb, 2),
    )
    r.done()
    return payload


def text_blob_offsets(meta: NodeMeta) -> np.ndarray:
    """Byte offsets of each node's text inside the utf-8 text blob."""
    offsets = np.zeros(len(meta) + 1, dtype=np.int64)
    np.cumsum([len(t.encode("utf-8")) for t in meta.node_text], out=offsets[1:])
    return offsets


def make_cluster_payload(g: DataGraph, clustering: Clustering, cluster_id: int,
                         text_offsets: np.ndarray | None = None) -> ClusterPayload:
    """Slice one cluster out of the tuple graph.

    Every link whose foreign-key source node lives in this cluster is
    recorded here, either as an intra link (target in the same cluster) or
    a boundary link (target elsewhere).
    """
    members = clustering.members(cluster_id)
    local = {int(n): i for i, n in enumerate(members)}
    text_offset = np.zeros(len(members), dtype=np.int64)
    text_len = np.zeros(len(members), dtype=np.int64)
    if text_offsets is not None:
        for i, n in enumerate(members):
            text_offset[i] = text_offsets[int(n)]
            text_len[i] = text_offsets[int(n) + 1] - text_offsets[int(n)]
    intra: list[tuple] = []
    bound: list[tuple] = []
    for u in members:
        u = int(u)
        for j in g.slots(u):
            if not g.edge_direction[j]:
                continue
            v = int(g.adjacent_nodes[j])
            b = int(g.pair_slot[j])
            record = (float(g.edge_weight[j]), float(g.edge_weight[b]),
                      float(g.edge_priority[j]), float(g.edge_priority[b]))
            if int(clustering.node_mapping[v]) == cluster_id:
                intra.append((local[u], local[v]) + record)
            else:
                bound.append((local[u], v, int(clustering.node_mapping[v])) + record)
    ln, lb = len(intra), len(bound)
    return ClusterPayload(
        cluster_id=cluster_id,
        members=np.asarray(members, dtype=np.int64),
        prestige=np.asarray([g.prestige[int(n)] for n in members], dtype=np.float32),
        node_type=np.asarray([g.node_type[int(n)] for n in members], dtype=np.uint16),
        text_offset=text_offset,
        text_len=text_len,
        intra_src=np.asarray([r[0] for r in intra], dtype=np.int64),
        intra_dst=np.asarray([r[1] for r in intra], dtype=np.int64),
        intra_w=np.asarray([r[2:4] for r in intra], dtype=np.float32).reshape(ln, 2),
        intra_p=np.asarray([r[4:6] for r in intra], dtype=np.float32).reshape(ln, 2),
        bound_src=np.asarray([r[0] for r in bound], dtype=np.int64),
        bound_dst=np.asarray([r[1] for r in bound], dtype=np.int64),
        bound_cluster=np.asarray([r[2] for r in bound], dtype=np.int64),
        bound_w=np.asarray([r[3:5] for r in bound], dtype=np.float32).reshape(lb, 2),
        bound_p=np.asarray([r[5:7] for r in bound], dtype=np.float32).reshape(lb, 2),
    )


class ClusterStoreWriter:
    """Writes cluster files for one build, enforcing ascending id order."""

    def __init__(self, store_dir: str | Path, cluster_count: int) -> None:
        self.dir = Path(store_dir) / CLUSTER_DIR
        self.dir.mkdir(parents=True, exist_ok=True)
        self.cluster_count = cluster_count
        self._last = -1

    def write(self, payload: ClusterPayload) -> int:
        if payload.cluster_id <= self._last:
            raise StorageOrderError(
                f"cluster {payload.cluster_id} written after {self._last}; "
                "ids must ascend within a build")
        self._last = payload.cluster_id
        name = cluster_file_name(payload.cluster_id, self.cluster_count)
        return write_cluster(self.dir / name, payload)


# --- keyword index ------------------------------------------------------------

def write_keyword_index(path: str | Path, index: KeywordIndex) -> int:
    w = _Writer()
    w.raw(MAGIC_INDEX)
    w.u32(FORMAT_VERSION)
    terms = index.terms()
    w.u32(len(terms))
    for term in terms:
        data = term.encode("utf-8")
        w.u16(len(data))
        w.raw(data)
        postings = index.postings[term]
        w.u32(len(postings))
        w.arr(np.asarray(postings, dtype=np.int64), "<u4")
    return w.finish(Path(path))


def read_keyword_index(path: str | Path) -> KeywordIndex:
    r = _Reader(Path(path), MAGIC_INDEX)
    count = r.u32()
    postings: dict[str, list[int]] = {}
    for _ in range(count):
        term = r.raw(r.u16()).decode("utf-8")
        postings[term] = r.arr(r.u32(), "<u4").astype(np.int64).tolist()
    r.done()
    return KeywordIndex({t: [int(x) for x in p] for t, p in postings.items()})


# --- store assembly and expansion ----------------------------------------------

def write_store(store_dir: str | Path, g: DataGraph, clustering: Clustering,
                cluster_graph: ClusterGraph, metadata: ClusterMetadata,
                meta: NodeMeta | None = None) -> None:
    """Write graph.emb and every cluster file for a finished clustering."""
    store_dir = Path(store_dir)
    k = clustering.cluster_count
    intra = np.zeros(k, dtype=np.int64)
    crossing = np.zeros(k, dtype=np.int64)
    offsets = text_blob_offsets(meta) if meta is not None else None
    writer = ClusterStoreWriter(store_dir, k)
    for c in range(k):
        payload = make_cluster_payload(g, clustering, c, offsets)
        intra[c] = len(payload.intra_src)
        writer.write(payload)
    for u, v, *_ in g.links():
        cu = int(clustering.node_mapping[u])
        cv = int(clustering.node_mapping[v])
        if cu != cv:
            crossing[cu] += 1
            crossing[cv] += 1
    header = StoreHeader(cluster_graph, clustering, metadata, intra, crossing)
    write_compressed_graph(store_dir / GRAPH_FILE, header)


@dataclass
class ExpandedGraph:
    """A node-level subgraph rebuilt from cluster files."""

    graph: DataGraph
    global_ids: np.ndarray          # int64, local -> original node id
    global_to_local: dict[int, int]
    clusters: tuple[int, ...]

    def to_global(self, local: int) -> int:
        return int(self.global_ids[local])


@dataclass
class ClusterStore:
    """Read access to one store directory, counting disk traffic."""

    dir: Path
    header: StoreHeader
    clusters_read: int = 0
    bytes_read: int = 0
    _cache: dict[int, ClusterPayload] = field(default_factory=dict)
    _index: KeywordIndex | None = None

    @classmethod
    def open(cls, store_dir: str | Path) -> ClusterStore:
        store_dir = Path(store_dir)
        return cls(store_dir, read_compressed_graph(store_dir / GRAPH_FILE))

    @property
    def cluster_graph(self) -> ClusterGraph:
        return self.header.cluster_graph

    @property
    def clustering(self) -> Clustering:
        return self.header.clustering

    @property
    def metadata(self) -> ClusterMetadata:
        return self.header.metadata

    @property
    def cluster_count(self) -> int:
        return self.clustering.cluster_count

    def read_cluster(self, cluster_id: int) -> ClusterPayload:
        if cluster_id in self._cache:
            return self._cache[cluster_id]
        name = cluster_file_name(cluster_id, self.cluster_count)
        path = self.dir / CLUSTER_DIR / name
        payload = read_cluster(path)
        if payload.cluster_id != cluster_id:
            raise StorageFormatError(f"{path}: holds cluster {payload.cluster_id}")
        self.clusters_read += 1
        self.bytes_read += path.stat().st_size
        self._cache[cluster_id] = payload
        return payload

    def cluster_cost(self, cluster_id: int) -> int:
        """Upper bound on the bytes expanding this cluster can add."""
        members = int(self.header.clustering.cluster_offset[cluster_id + 1]
                      - self.header.clustering.cluster_offset[cluster_id])
        slots = 2 * int(self.header.intra_links[cluster_id]) \
            + 2 * int(self.header.crossing_links[cluster_id])
        return BYTES_PER_NODE * members + BYTES_PER_EDGE * slots

    def min_crossing_map(self) -> dict[tuple[int, int], float]:
        cg = self.cluster_graph
        out: dict[tuple[int, int], float] = {}
        starts = np.repeat(np.arange(cg.graph.node_count, dtype=np.int64),
                           np.diff(cg.graph.adjacency_offset))
        for j in range(cg.graph.slot_count):
            out[(int(starts[j]), int(cg.graph.adjacent_nodes[j]))] = \
                float(cg.min_crossing[j])
        return out

    def keyword_index(self) -> KeywordIndex:
        if self._index is None:
            self._index = read_keyword_index(self.dir / INDEX_FILE)
        return self._index

    def tuple_graph(self) -> tuple[DataGraph, NodeMeta]:
        return read_tuple_graph(self.dir / TUPLES_FILE)


def expand_clusters(store: ClusterStore, cluster_ids) -> ExpandedGraph:
    """Materialize the subgraph induced by the given clusters.

    Intra links come straight from each file; boundary links are included
    only when both endpoints' clusters are requested, and the stored record
    provides the weights of both directions.
    """
    ids = tuple(sorted(set(int(c) for c in cluster_ids)))
    wanted = set(ids)
    builder = GraphBuilder()
    global_ids: list[int] = []
    local: dict[int, int] = {}
    payloads = [store.read_cluster(c) for c in ids]
    for payload in payloads:
        for i, n in enumerate(payload.members):
            local[int(n)] = builder.add_node(float(payload.prestige[i]),
                                             int(payload.node_type[i]))
            global_ids.append(int(n))
    for payload in payloads:
        for i in range(len(payload.intra_src)):
            u = local[int(payload.members[payload.intra_src[i]])]
            v = local[int(payload.members[payload.intra_dst[i]])]
            builder.add_link(u, v,
                             float(payload.intra_w[i, 0]), float(payload.intra_w[i, 1]),
                             float(payload.intra_p[i, 0]), float(payload.intra_p[i, 1]))
        for i in range(len(payload.bound_src)):
            if int(payload.bound_cluster[i]) not in wanted:
                continue
            u = local[int(payload.members[payload.bound_src[i]])]
            v = local[int(payload.bound_dst[i])]
            builder.add_link(u, v,
                             float(payload.bound_w[i, 0]), float(payload.bound_w[i, 1]),
                             float(payload.bound_p[i, 0]), float(payload.bound_p[i, 1]))
    return ExpandedGraph(builder.build(), np.asarray(global_ids, dtype=np.int64),
                         local, ids)
