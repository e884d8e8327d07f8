"""Bipartite graphs and k-partite k-graphs with exact counting primitives.

Bipartite adjacency is bit-packed (one uint64 row per left vertex, LSB
first).  k-graph edges are kept as a sorted array of mixed-radix encoded
tuples.  All densities are exact ``fractions.Fraction`` values; no verdict in
this package ever goes through floating point.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels


def pack_indices(indices, n: int) -> np.ndarray:
    """Bit-pack a set of indices < n into a row of uint64 words."""
    words = (n + 63) // 64
    row = np.zeros(words, dtype=np.uint64)
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size:
        np.bitwise_or.at(row, idx >> 6, np.uint64(1) << (idx & 63).astype(np.uint64))
    return row


def unpack_row(row: np.ndarray, n: int) -> np.ndarray:
    bits = np.unpackbits(row.view(np.uint8), bitorder="little")
    return np.flatnonzero(bits[:n]).astype(np.int64)


@dataclass(frozen=True)
class VertexClass:
    """A named contiguous range of vertex indices."""

    name: str
    size: int
    offset: int = 0

    def __post_init__(self):
        if self.size <= 0:
            raise ValueError(f"vertex class {self.name!r} must be non-empty")

    def global_range(self):
        return range(self.offset, self.offset + self.size)


@dataclass(frozen=True)
class ProductClass(VertexClass):
    """A vertex class whose elements are tuples over factor classes.

    Elements are mixed-radix encoded, row-major: the last factor varies
    fastest.  Constructions index into product classes exactly like plain
    vertex sets, so the decode table is part of the class.
    """

    factors: tuple = ()

    @staticmethod
    def of(factors, name=None, offset=0):
        factors = tuple(factors)
        size = 1
        for f in factors:
            size *= f.size
        name = name or "x".join(f.name for f in factors)
        return ProductClass(name=name, size=size, offset=offset, factors=factors)

    def encode(self, tup) -> int:
        idx = 0
        for f, v in zip(self.factors, tup):
            if not (0 <= v < f.size):
                raise IndexError(f"vertex {v} out of range for factor {f.name}")
            idx = idx * f.size + int(v)
        return idx

    def decode(self, idx: int):
        out = []
        for f in reversed(self.factors):
            out.append(idx % f.size)
            idx //= f.size
        return tuple(reversed(out))

    def decode_array(self, idx: np.ndarray) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        cols = []
        for f in reversed(self.factors):
            cols.append(idx % f.size)
            idx = idx // f.size
        return np.stack(list(reversed(cols)), axis=1)

    def encode_array(self, tuples: np.ndarray) -> np.ndarray:
        tuples = np.asarray(tuples, dtype=np.int64)
        idx = np.zeros(len(tuples), dtype=np.int64)
        for j, f in enumerate(self.factors):
            idx = idx * f.size + tuples[:, j]
        return idx


class VertexClassSet:
    """Ordered, disjoint, contiguously indexed vertex classes."""

    def __init__(self, classes):
        self.classes = []
        offset = 0
        for c in classes:
            if isinstance(c, VertexClass):
                if c.offset != offset:
                    c = _reoffset(c, offset)
            else:
                name, size = c
                c = VertexClass(name=name, size=size, offset=offset)
            self.classes.append(c)
            offset += c.size
        self.total = offset
        self.by_name = {c.name: c for c in self.classes}
        if len(self.by_name) != len(self.classes):
            raise ValueError("class names must be distinct")

    def __len__(self):
        return len(self.classes)

    def __getitem__(self, i):
        return self.classes[i]

    def sizes(self):
        return [c.size for c in self.classes]

    def class_of(self, global_idx: int) -> int:
        for i, c in enumerate(self.classes):
            if c.offset <= global_idx < c.offset + c.size:
                return i
        raise IndexError(global_idx)


def _reoffset(c: VertexClass, offset: int) -> VertexClass:
    if isinstance(c, ProductClass):
        return ProductClass(name=c.name, size=c.size, offset=offset, factors=c.factors)
    return VertexClass(name=c.name, size=c.size, offset=offset)


class BipartiteGraph:
    """Immutable bipartite graph on (left, right), bit-packed by left rows."""

    def __init__(self, left: VertexClass, right: VertexClass, rows: np.ndarray):
        words = (right.size + 63) // 64
        rows = np.ascontiguousarray(rows, dtype=np.uint64)
        if rows.shape != (left.size, words):
            raise ValueError(f"row array shape {rows.shape} != {(left.size, words)}")
        if right.size % 64:
            tail = np.uint64((1 << (right.size % 64)) - 1)
            if np.any(rows[:, -1] & ~tail):
                raise ValueError("stray bits beyond the right class")
        self.left = left
        self.right = right
        self.rows = rows
        self.rows.setflags(write=False)
        self._ecount = int(_kernels.popcount_rows(rows).sum())
        self._transposed = None

    @staticmethod
    def from_edges(left, right, edges) -> "BipartiteGraph":
        words = (right.size + 63) // 64
        rows = np.zeros((left.size, words), dtype=np.uint64)
        for u, v in edges:
            rows[u, v >> 6] |= np.uint64(1) << np.uint64(v & 63)
        return BipartiteGraph(left, right, rows)

    @staticmethod
    def complete(left, right) -> "BipartiteGraph":
        words = (right.size + 63) // 64
        rows = np.full((left.size, words), np.uint64(0xFFFFFFFFFFFFFFFF), dtype=np.uint64)
        if right.size % 64:
            rows[:, -1] = np.uint64((1 << (right.size % 64)) - 1)
        return BipartiteGraph(left, right, rows)

    @staticmethod
    def empty(left, right) -> "BipartiteGraph":
        words = (right.size + 63) // 64
        return BipartiteGraph(left, right, np.zeros((left.size, words), dtype=np.uint64))

    def edge_count(self) -> int:
        return self._ecount

    def has_edge(self, u: int, v: int) -> bool:
        return bool((self.rows[u, v >> 6] >> np.uint64(v & 63)) & np.uint64(1))

    def degrees(self) -> np.ndarray:
        return _kernels.popcount_rows(self.rows)

    def neighbors(self, u: int) -> np.ndarray:
        return unpack_row(self.rows[u], self.right.size)

    def edges(self):
        for u in range(self.left.size):
            for v in self.neighbors(u):
                yield (u, int(v))

    def transposed(self) -> "BipartiteGraph":
        if self._transposed is None:
            words = (self.left.size + 63) // 64
            rows = np.zeros((self.right.size, words), dtype=np.uint64)
            bits = np.unpackbits(self.rows.view(np.uint8), axis=1, bitorder="little")[:, : self.right.size]
            packed = np.packbits(bits.T, axis=1, bitorder="little")
            buf = np.zeros((self.right.size, words * 8), dtype=np.uint8)
            buf[:, : packed.shape[1]] = packed
            rows = buf.view(np.uint64)
            t = BipartiteGraph(self.right, self.left, rows)
            t._transposed = self
            self._transposed = t
        return self._transposed

    def __eq__(self, other):
        return (
            isinstance(other, BipartiteGraph)
            and self.left.size == other.left.size
            and self.right.size == other.right.size
            and np.array_equal(self.rows, other.rows)
        )

    def __repr__(self):
        return f"BipartiteGraph({self.left.name}:{self.left.size} x {self.right.name}:{self.right.size}, e={self._ecount})"


def density(g: BipartiteGraph) -> Fraction:
    """Exact edge density e(G) / (|A| * |B|)."""
    return Fraction(g.edge_count(), g.left.size * g.right.size)


def codegree(g: BipartiteGraph, v: int, w: int, side: str = "left") -> int:
    """|N(v) & N(w)| for two vertices on the same side."""
    if side == "left":
        return int(_kernels.and_popcount_pairs(g.rows, np.array([[v, w]], dtype=np.int64))[0])
    if side == "right":
        t = g.transposed()
        return int(_kernels.and_popcount_pairs(t.rows, np.array([[v, w]], dtype=np.int64))[0])
    raise ValueError("side must be 'left' or 'right'")


def edges_between(g: BipartiteGraph, S, T) -> int:
    """Exact e(S, T) via masked popcounts."""
    S = np.asarray(S, dtype=np.int64)
    T = np.asarray(T, dtype=np.int64)
    if S.size and (S.min() < 0 or S.max() >= g.left.size):
        raise IndexError("left subset out of range")
    if T.size and (T.min() < 0 or T.max() >= g.right.size):
        raise IndexError("right subset out of range")
    if S.size == 0 or T.size == 0:
        return 0
    mask = pack_indices(T, g.right.size)
    return int(_kernels.masked_degrees(g.rows[S], mask).sum())


def pair_density(g: BipartiteGraph, S, T) -> Fraction:
    """d(S,T); 0 by convention when either side is empty."""
    S = np.asarray(S, dtype=np.int64)
    T = np.asarray(T, dtype=np.int64)
    if S.size == 0 or T.size == 0:
        return Fraction(0)
    return Fraction(edges_between(g, S, T), int(S.size) * int(T.size))


class KPartiteKGraph:
    """k-partite k-uniform hypergraph; one vertex per class per edge."""

    def __init__(self, classes: VertexClassSet, edges: np.ndarray):
        self.k = len(classes)
        if self.k < 2:
            raise ValueError("uniformity must be at least 2")
        self.classes = classes
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, self.k)
        for j, c in enumerate(classes.classes):
            if edges.size and (edges[:, j].min() < 0 or edges[:, j].max() >= c.size):
                raise ValueError(f"edge vertex out of range in class {c.name}")
        enc = self._encode(edges)
        order = np.argsort(enc, kind="stable")
        enc = enc[order]
        if enc.size and np.any(enc[1:] == enc[:-1]):
            raise ValueError("duplicate edges")
        self.edges_arr = edges[order]
        self.encoded = enc
        self.encoded.setflags(write=False)
        self.edges_arr.setflags(write=False)

    def _encode(self, edges: np.ndarray) -> np.ndarray:
        enc = np.zeros(len(edges), dtype=np.int64)
        for j, c in enumerate(self.classes.classes):
            enc = enc * c.size + edges[:, j]
        return enc

    def edge_count(self) -> int:
        return len(self.encoded)

    def density(self) -> Fraction:
        prod = 1
        for c in self.classes.classes:
            prod *= c.size
        return Fraction(self.edge_count(), prod)

    def contains(self, tup) -> bool:
        enc = 0
        for j, c in enumerate(self.classes.classes):
            enc = enc * c.size + int(tup[j])
        pos = np.searchsorted(self.encoded, enc)
        return pos < len(self.encoded) and self.encoded[pos] == enc

    def __eq__(self, other):
        return (
            isinstance(other, KPartiteKGraph)
            and self.k == other.k
            and self.classes.sizes() == other.classes.sizes()
            and np.array_equal(self.encoded, other.encoded)
        )

    def __repr__(self):
        sizes = "x".join(str(c.size) for c in self.classes.classes)
        return f"KPartiteKGraph(k={self.k}, {sizes}, e={self.edge_count()})"


@dataclass
class AuxGraphView:
    """Bipartite view of a k-graph along one axis.

    Left vertices are (k-1)-tuples over the other classes (a ProductClass);
    an aux edge ((..tuple..), v_i) exists iff the full k-tuple is an edge.
    """

    source: KPartiteKGraph
    axis: int
    product: ProductClass
    graph: BipartiteGraph

    def edge_count(self) -> int:
        return self.graph.edge_count()


def aux_graph(h: KPartiteKGraph, axis: int) -> AuxGraphView:
    """Axis view: 1-based axis per the usual convention."""
    if not (1 <= axis <= h.k):
        raise ValueError(f"axis {axis} out of range 1..{h.k}")
    i = axis - 1
    others = [c for j, c in enumerate(h.classes.classes) if j != i]
    product = ProductClass.of(others)
    right = h.classes.classes[i]
    tuples = np.delete(h.edges_arr, i, axis=1)
    lefts = product.encode_array(tuples) if len(tuples) else np.empty(0, dtype=np.int64)
    rights = h.edges_arr[:, i] if len(h.edges_arr) else np.empty(0, dtype=np.int64)
    words = (right.size + 63) // 64
    rows = np.zeros((product.size, words), dtype=np.uint64)
    if lefts.size:
        np.bitwise_or.at(rows, (lefts, rights >> 6), np.uint64(1) << (rights & 63).astype(np.uint64))
    g = BipartiteGraph(VertexClass(product.name, product.size), VertexClass(right.name, right.size), rows)
    return AuxGraphView(source=h, axis=axis, product=product, graph=g)


def lift_graph_to_kgraph(g: BipartiteGraph, product: ProductClass, right_class=None) -> KPartiteKGraph:
    """Inverse of the axis-k view: a bipartite graph on (product, V_k) lifts
    to the k-graph whose axis-k view is edge-identical to g."""
    if product.size != g.left.size:
        raise ValueError("left class size does not match the product class")
    right_class = right_class or VertexClass(g.right.name, g.right.size)
    classes = VertexClassSet(list(product.factors) + [VertexClass(right_class.name, right_class.size)])
    lefts = []
    rights = []
    for u in range(g.left.size):
        nb = g.neighbors(u)
        if nb.size:
            lefts.append(np.full(nb.size, u, dtype=np.int64))
            rights.append(nb)
    if lefts:
        lefts = np.concatenate(lefts)
        rights = np.concatenate(rights)
        tuples = product.decode_array(lefts)
        edges = np.concatenate([tuples, rights[:, None]], axis=1)
    else:
        edges = np.empty((0, len(product.factors) + 1), dtype=np.int64)
    return KPartiteKGraph(classes, edges)


def blowup(g: BipartiteGraph, m: int) -> BipartiteGraph:
    """Replace each vertex by m copies and each edge by a complete m x m block."""
    if m < 1:
        raise ValueError("blowup factor must be at least 1")
    if m == 1:
        return g
    nl, nr = g.left.size * m, g.right.size * m
    bits = np.unpackbits(g.rows.view(np.uint8), axis=1, bitorder="little")[:, : g.right.size]
    big = np.repeat(np.repeat(bits, m, axis=0), m, axis=1)
    words = (nr + 63) // 64
    packed = np.packbits(big, axis=1, bitorder="little")
    buf = np.zeros((nl, words * 8), dtype=np.uint8)
    buf[:, : packed.shape[1]] = packed
    rows = buf.view(np.uint64)
    return BipartiteGraph(
        VertexClass(g.left.name, nl), VertexClass(g.right.name, nr), rows
    )


# -- canonical serialization ------------------------------------------------

_MAGIC = b"DRBG"


def bipartite_to_binary(g: BipartiteGraph) -> bytes:
    head = struct.pack("<4sHII", _MAGIC, 1, g.left.size, g.right.size)
    names = f"{g.left.name}\n{g.right.name}\n".encode()
    return head + struct.pack("<I", len(names)) + names + g.rows.tobytes()


def bipartite_from_binary(data: bytes) -> BipartiteGraph:
    magic, ver, nl, nr = struct.unpack_from("<4sHII", data, 0)
    if magic != _MAGIC or ver != 1:
        raise ValueError("not a v1 bipartite container")
    off = struct.calcsize("<4sHII")
    (nlen,) = struct.unpack_from("<I", data, off)
    off += 4
    lname, rname, _ = data[off : off + nlen].decode().split("\n")
    off += nlen
    words = (nr + 63) // 64
    rows = np.frombuffer(data[off:], dtype=np.uint64).reshape(nl, words).copy()
    return BipartiteGraph(VertexClass(lname, nl), VertexClass(rname, nr), rows)


def bipartite_to_text(g: BipartiteGraph) -> str:
    lines = [
        "bipartite v1",
        f"left {g.left.name} {g.left.size}",
        f"right {g.right.name} {g.right.size}",
        f"edges {g.edge_count()}",
    ]
    for u, v in g.edges():
        lines.append(f"{u} {v}")
    return "\n".join(lines) + "\n"


def bipartite_from_text(text: str) -> BipartiteGraph:
    lines = text.strip("\n").split("\n")
    if lines[0] != "bipartite v1":
        raise ValueError("bad header")
    _, lname, nl = lines[1].split()
    _, rname, nr = lines[2].split()
    _, m = lines[3].split()
    edges = [tuple(map(int, ln.split())) for ln in lines[4 : 4 + int(m)]]
    return BipartiteGraph.from_edges(VertexClass(lname, int(nl)), VertexClass(rname, int(nr)), edges)


_KMAGIC = b"DRKG"


def kgraph_to_binary(h: KPartiteKGraph) -> bytes:
    head = struct.pack("<4sHB", _KMAGIC, 1, h.k)
    names = "\n".join(c.name for c in h.classes.classes).encode() + b"\n"
    sizes = struct.pack(f"<{h.k}I", *[c.size for c in h.classes.classes])
    body = h.edges_arr.astype("<i8").tobytes()
    return head + struct.pack("<I", len(names)) + names + sizes + struct.pack("<Q", h.edge_count()) + body


def kgraph_from_binary(data: bytes) -> KPartiteKGraph:
    magic, ver, k = struct.unpack_from("<4sHB", data, 0)
    if magic != _KMAGIC or ver != 1:
        raise ValueError("not a v1 k-graph container")
    off = struct.calcsize("<4sHB")
    (nlen,) = struct.unpack_from("<I", data, off)
    off += 4
    names = data[off : off + nlen].decode().strip("\n").split("\n")
    off += nlen
    sizes = struct.unpack_from(f"<{k}I", data, off)
    off += 4 * k
    (m,) = struct.unpack_from("<Q", data, off)
    off += 8
    edges = np.frombuffer(data[off:], dtype="<i8").reshape(m, k).astype(np.int64)
    return KPartiteKGraph(VertexClassSet(list(zip(names, sizes))), edges)


def kgraph_to_text(h: KPartiteKGraph) -> str:
    lines = ["kgraph v1", f"k {h.k}"]
    for c in h.classes.classes:
        lines.append(f"class {c.name} {c.size}")
    lines.append(f"edges {h.edge_count()}")
    for row in h.edges_arr:
        lines.append(" ".join(str(int(x)) for x in row))
    return "\n".join(lines) + "\n"


def kgraph_from_text(text: str) -> KPartiteKGraph:
    lines = text.strip("\n").split("\n")
    if lines[0] != "kgraph v1":
        raise ValueError("bad header")
    k = int(lines[1].split()[1])
    classes = []
    for j in range(k):
        _, name, size = lines[2 + j].split()
        classes.append((name, int(size)))
    m = int(lines[2 + k].split()[1])
    rows = [list(map(int, ln.split())) for ln in lines[3 + k : 3 + k + m]]
    edges = np.array(rows, dtype=np.int64).reshape(-1, k)
    return KPartiteKGraph(VertexClassSet(classes), edges)


def graph_hash(g: BipartiteGraph) -> str:
    return hashlib.sha256(bipartite_to_binary(g)).hexdigest()
