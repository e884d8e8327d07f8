"""Iterative construction of dyadic edge-partition chains over a bipartite
ground set, driven by balanced-graph sampling, plus exact verification of
every structural property and the irregularity-refutation pipeline.

Level 0 is the trivial partition (one complete bipartite graph, quotient a
single edge).  At level i each member splits into two halves: a fresh
balanced graph is sampled on the level-i cluster sets and the member's
quotient blocks are halved along it; the intersection becomes one child and
the remainder the other.  Every member of level j is a blowup of its
quotient on the level-j cluster partitions, has density exactly 2^-j, and
each vertex block is complete or empty.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels
from .balanced import BalanceSpec, check_one_twelve, sample_balanced
from .graphs import (
    BipartiteGraph,
    VertexClass,
    bipartite_from_binary,
    bipartite_to_binary,
    edges_between,
    graph_hash,
    pack_indices,
    unpack_row,
)
from .partitions import VertexPartition, refines_beta


def derive_seed(master: int, *labels) -> int:
    """Deterministic seed split: command -> module -> level."""
    h = hashlib.sha256(("/".join([str(master)] + [str(x) for x in labels])).encode()).digest()
    return int.from_bytes(h[:8], "little")


def _is_pow2(x: int) -> bool:
    return x > 0 and (x & (x - 1)) == 0


@dataclass
class GrowthProfile:
    """Shape of a chain build.

    r_sizes/l_sizes are the per-level cluster counts; each l must equal
    2^(r/e) for an integer divisor e.  strict_mode additionally demands the
    full-scale side conditions (first right count >= 2^200, quadrupling,
    divisor schedule e(i) = 2^(i+10)), which no desk profile meets.
    """

    s: int
    r_sizes: list
    l_sizes: list
    blowup_left: int = 1
    blowup_right: int = 1
    alpha: object = Fraction(3, 4)  # Fraction, list of Fractions, or "paper"
    beta: Fraction = Fraction(1, 2)
    enforce: tuple = ("ii", "iii")
    strict_mode: bool = False
    max_retries: int = 50

    def __post_init__(self):
        if len(self.r_sizes) != self.s or len(self.l_sizes) != self.s:
            raise ValueError("need one size per level")
        prev_r, prev_l = 1, 1
        for i in range(self.s):
            r, l = self.r_sizes[i], self.l_sizes[i]
            if not (_is_pow2(r) and _is_pow2(l)):
                raise ValueError("cluster counts must be powers of 2")
            if r % prev_r or (r // prev_r) < 2 or (r // prev_r) % 2:
                raise ValueError("right counts must at least double, evenly")
            if l % prev_l or (l // prev_l) < 2 or (l // prev_l) % 2:
                raise ValueError("left counts must at least double, evenly")
            e = Fraction(r, l.bit_length() - 1)
            if e.denominator != 1:
                raise ValueError(f"level {i+1}: left count {l} is not 2^({r}/e) for integer e")
            if r < (1 << i):
                raise ValueError("right counts too small for the level")
            prev_r, prev_l = r, l
        if self.strict_mode:
            for i in range(1, self.s):
                if self.r_sizes[i] < 4 * self.r_sizes[i - 1]:
                    raise ValueError("strict mode requires right counts to quadruple")
            for i in range(1, self.s + 1):
                if self.divisor(i) != 1 << (i + 10):
                    raise ValueError("strict mode pins the divisor schedule to 2^(level+10)")
            if self.r_sizes[0] < 1 << 200:
                raise ValueError("strict mode requires an astronomically large first right count")
        self.beta = Fraction(self.beta)

    def divisor(self, i: int) -> Fraction:
        return Fraction(self.r_sizes[i - 1], self.l_sizes[i - 1].bit_length() - 1)

    def alpha_at(self, i: int) -> Fraction:
        if self.alpha == "paper":
            return Fraction(1, _iroot_floor(self.l_sizes[i - 1], 6))
        if isinstance(self.alpha, (list, tuple)):
            return Fraction(self.alpha[i - 1])
        return Fraction(self.alpha)

    def to_json(self) -> dict:
        return {
            "s": self.s,
            "r_sizes": list(self.r_sizes),
            "l_sizes": list(self.l_sizes),
            "blowup_left": self.blowup_left,
            "blowup_right": self.blowup_right,
            "alpha": str(self.alpha) if not isinstance(self.alpha, (list, tuple)) else [str(a) for a in self.alpha],
            "beta": str(self.beta),
            "enforce": list(self.enforce),
            "strict_mode": self.strict_mode,
            "max_retries": self.max_retries,
        }

    @staticmethod
    def from_json(d: dict) -> "GrowthProfile":
        alpha = d.get("alpha", "3/4")
        if isinstance(alpha, list):
            alpha = [Fraction(a) for a in alpha]
        elif alpha != "paper":
            alpha = Fraction(alpha)
        return GrowthProfile(
            s=d["s"],
            r_sizes=d["r_sizes"],
            l_sizes=d["l_sizes"],
            blowup_left=d.get("blowup_left", 1),
            blowup_right=d.get("blowup_right", 1),
            alpha=alpha,
            beta=Fraction(d.get("beta", "1/2")),
            enforce=tuple(d.get("enforce", ["ii", "iii"])),
            strict_mode=d.get("strict_mode", False),
            max_retries=d.get("max_retries", 50),
        )


def _iroot_floor(n: int, r: int) -> int:
    if n < 1:
        raise ValueError
    z = max(1, int(round(n ** (1.0 / r))))
    while z**r > n:
        z -= 1
    while (z + 1) ** r <= n:
        z += 1
    return z


def iroot_ceil(n: int, r: int) -> int:
    f = _iroot_floor(n, r)
    return f if f**r == n else f + 1


@dataclass
class CoreMember:
    level: int
    index: int
    quotient: BipartiteGraph  # abstract (l_j x r_j) cluster adjacency
    parent: int | None


@dataclass
class NeighborFamily:
    level: int
    left_cluster: int
    members: np.ndarray  # level-i right clusters

    def cardinality(self) -> int:
        return len(self.members)


class CoreSequence:
    """Built chain: cluster partitions, per-member quotients, sampler
    records, and materialization of members as vertex-level graphs."""

    def __init__(self, profile: GrowthProfile, left_chain, right_chain, seed: int):
        self.profile = profile
        self.seed = seed
        self.left_chain = left_chain  # list of VertexPartition, level 1..s
        self.right_chain = right_chain
        self.n_left = left_chain[0].n
        self.n_right = right_chain[0].n
        self.lparent = [_parent_map(left_chain[i], left_chain[i - 1]) if i else np.zeros(len(left_chain[0]), dtype=np.int64) for i in range(len(left_chain))]
        self.rparent = [_parent_map(right_chain[i], right_chain[i - 1]) if i else np.zeros(len(right_chain[0]), dtype=np.int64) for i in range(len(right_chain))]
        root = CoreMember(level=0, index=0, quotient=BipartiteGraph.complete(VertexClass("L", 1), VertexClass("R", 1)), parent=None)
        self.members = [[root]]
        self.gamma_records = {}
        self._materialized = {}

    # -- chain access ---------------------------------------------------

    def left_parts(self, i: int) -> VertexPartition:
        return self.left_chain[i - 1]

    def right_parts(self, i: int) -> VertexPartition:
        return self.right_chain[i - 1]

    def member(self, level: int, index: int) -> CoreMember:
        return self.members[level][index]

    def ancestor_index(self, level: int, index: int, at_level: int) -> int:
        return index >> (level - at_level)

    def x_cells(self, i: int) -> VertexPartition:
        """Level-i left clusters grouped by their level-(i-1) parent."""
        key = ("xcells", i)
        if key not in self._materialized:
            self._materialized[key] = _group_partition(self.profile.l_sizes[i - 1], self.lparent[i - 1])
        return self._materialized[key]

    def y_cells(self, i: int) -> VertexPartition:
        key = ("ycells", i)
        if key not in self._materialized:
            self._materialized[key] = _group_partition(self.profile.r_sizes[i - 1], self.rparent[i - 1])
        return self._materialized[key]

    # -- materialization -------------------------------------------------

    def quotient_t_bits(self, level: int, index: int) -> np.ndarray:
        """Per-right-cluster 0/1 rows over left clusters, cached."""
        key = ("tqbits", level, index)
        if key not in self._materialized:
            q = self.members[level][index].quotient
            tq = q.transposed()
            bits = np.unpackbits(tq.rows.view(np.uint8), axis=1, bitorder="little")[:, : q.left.size].astype(np.int64)
            self._materialized[key] = bits
        return self._materialized[key]

    def member_graph(self, level: int, index: int) -> BipartiteGraph:
        key = (level, index)
        if key not in self._materialized:
            m = self.members[level][index]
            if level == 0:
                g = BipartiteGraph.complete(VertexClass("L", self.n_left), VertexClass("R", self.n_right))
            else:
                lp = self.left_parts(level)
                rp = self.right_parts(level)
                qbits = np.unpackbits(m.quotient.rows.view(np.uint8), axis=1, bitorder="little")[:, : len(rp.cells)]
                expanded = qbits[:, rp.owner]  # (l_j, n_right) 0/1
                words = (self.n_right + 63) // 64
                packed = np.packbits(expanded, axis=1, bitorder="little")
                buf = np.zeros((len(lp.cells), words * 8), dtype=np.uint8)
                buf[:, : packed.shape[1]] = packed
                cluster_rows = buf.view(np.uint64)
                rows = cluster_rows[lp.owner]
                g = BipartiteGraph(VertexClass("L", self.n_left), VertexClass("R", self.n_right), rows)
            self._materialized[key] = g
        return self._materialized[key]


def _group_partition(n: int, parent: np.ndarray) -> VertexPartition:
    order = np.argsort(parent, kind="stable")
    bounds = np.flatnonzero(np.diff(parent[order])) + 1
    cells = np.split(order, bounds)
    return VertexPartition(n, cells)


def _parent_map(child: VertexPartition, parent: VertexPartition) -> np.ndarray:
    out = np.empty(len(child.cells), dtype=np.int64)
    for ci, cell in enumerate(child.cells):
        owners = set(parent.owner[cell].tolist())
        if len(owners) != 1:
            raise ValueError("chain is not an exact successive refinement")
        out[ci] = owners.pop()
    return out


def default_chains(profile: GrowthProfile):
    """Nested contiguous-block cluster chains at the profile's sizes."""
    nl = profile.l_sizes[-1] * profile.blowup_left
    nr = profile.r_sizes[-1] * profile.blowup_right
    left = [VertexPartition.blocks(nl, c) for c in profile.l_sizes]
    right = [VertexPartition.blocks(nr, c) for c in profile.r_sizes]
    return left, right


def neighbor_family(seq: CoreSequence, i: int, left_cluster: int, member: int = 0) -> NeighborFamily:
    """Level-i right clusters inside level-(i-1) clusters adjacent to the
    given level-(i-1) left cluster in the member's quotient."""
    if i < 1 or i - 1 >= len(seq.members):
        raise ValueError("level out of range")
    parentq = seq.members[i - 1][member].quotient
    nb = unpack_row(parentq.rows[left_cluster], parentq.right.size)
    nbset = set(nb.tolist())
    rp = seq.rparent[i - 1]
    members = np.flatnonzero(np.isin(rp, list(nbset))).astype(np.int64)
    return NeighborFamily(level=i, left_cluster=left_cluster, members=members)


def build_core_sequence(profile: GrowthProfile, seed: int, left_chain=None, right_chain=None) -> CoreSequence:
    """Run the full construction at the profile's scale."""
    if left_chain is None or right_chain is None:
        left_chain, right_chain = default_chains(profile)
    seq = CoreSequence(profile, left_chain, right_chain, seed)
    for i in range(1, profile.s + 1):
        xs = seq.x_cells(i)
        ys = seq.y_cells(i)
        level_members = []
        for idx, parent in enumerate(seq.members[i - 1]):
            fam = [neighbor_family(seq, i, L, member=idx).members for L in range(parent.quotient.left.size)]
            spec = BalanceSpec(x_cells=xs, y_cells=ys, family=fam, alpha=profile.alpha_at(i), beta=profile.beta)
            gseed = derive_seed(seed, "gamma", i, idx)
            bg, telemetry = sample_balanced(spec, gseed, max_retries=profile.max_retries, enforce=profile.enforce)
            seq.gamma_records[(i, idx)] = {"seed": gseed, "telemetry": telemetry, "balanced": bg}
            expand = _expand_quotient(parent.quotient, seq.lparent[i - 1], seq.rparent[i - 1], profile.l_sizes[i - 1], profile.r_sizes[i - 1])
            inter = expand.rows & bg.graph.rows
            rest = expand.rows & ~bg.graph.rows
            lcls = VertexClass("L", profile.l_sizes[i - 1])
            rcls = VertexClass("R", profile.r_sizes[i - 1])
            child1 = BipartiteGraph(lcls, rcls, inter)
            child2 = BipartiteGraph(lcls, rcls, rest)
            level_members.append(CoreMember(level=i, index=2 * idx, quotient=child1, parent=idx))
            level_members.append(CoreMember(level=i, index=2 * idx + 1, quotient=child2, parent=idx))
        seq.members.append(level_members)
    return seq


def _expand_quotient(q: BipartiteGraph, lparent, rparent, l_new, r_new) -> BipartiteGraph:
    bits = np.unpackbits(q.rows.view(np.uint8), axis=1, bitorder="little")[:, : q.right.size]
    big = bits[lparent][:, rparent]
    words = (r_new + 63) // 64
    packed = np.packbits(big, axis=1, bitorder="little")
    buf = np.zeros((l_new, words * 8), dtype=np.uint8)
    buf[:, : packed.shape[1]] = packed
    return BipartiteGraph(VertexClass("L", l_new), VertexClass("R", r_new), buf.view(np.uint64))


# -- structural verification --------------------------------------------


def verify_structure(seq: CoreSequence) -> dict:
    """Exact recount of the four structural invariants: dyadic densities,
    two-child chain splits, zero/one block densities, neighbor-family
    cardinalities."""
    prof = seq.profile
    nl, nr = seq.n_left, seq.n_right
    report = {"density": True, "chain": True, "blocks": True, "families": True, "failures": []}
    for j in range(1, prof.s + 1):
        lp, rp = seq.left_parts(j), seq.right_parts(j)
        area = nl * nr
        for m in seq.members[j]:
            g = seq.member_graph(j, m.index)
            if g.edge_count() * (1 << j) != area:
                report["density"] = False
                report["failures"].append(("density", j, m.index))
            D = _block_degree_matrix(g, lp, rp)
            lsz = np.array([len(c) for c in lp.cells], dtype=np.int64)
            rsz = np.array([len(c) for c in rp.cells], dtype=np.int64)
            full = np.outer(lsz, rsz)
            bad = np.argwhere((D != 0) & (D != full))
            if bad.size:
                report["blocks"] = False
                for a, b in bad[:8]:
                    report["failures"].append(("block", j, m.index, int(a), int(b)))
        for idx in range(len(seq.members[j - 1])):
            gparent = seq.member_graph(j - 1, idx)
            c1 = seq.member_graph(j, 2 * idx)
            c2 = seq.member_graph(j, 2 * idx + 1)
            if np.any(c1.rows & c2.rows) or not np.array_equal(c1.rows | c2.rows, gparent.rows):
                report["chain"] = False
                report["failures"].append(("chain", j, idx))
    for i in range(1, prof.s + 1):
        expected = prof.r_sizes[i - 1] >> (i - 1)
        for idx in range(len(seq.members[i - 1])):
            for L in range(prof.l_sizes[i - 2] if i >= 2 else 1):
                fam = neighbor_family(seq, i, L, member=idx)
                if fam.cardinality() != expected:
                    report["families"] = False
                    report["failures"].append(("family", i, idx, L))
    report["ok"] = all(report[k] for k in ("density", "chain", "blocks", "families"))
    return report


def _is_block_partition(p: VertexPartition) -> bool:
    w = p.n // len(p.cells)
    if p.n % len(p.cells):
        return False
    return all(int(c[0]) == i * w and int(c[-1]) == (i + 1) * w - 1 and c.size == w for i, c in enumerate(p.cells))


def _block_degree_matrix(g: BipartiteGraph, lp: VertexPartition, rp: VertexPartition) -> np.ndarray:
    bits = np.unpackbits(g.rows.view(np.uint8), axis=1, bitorder="little")[:, : g.right.size].astype(np.int64)
    if _is_block_partition(lp) and _is_block_partition(rp):
        wl = g.left.size // len(lp.cells)
        wr = g.right.size // len(rp.cells)
        return bits.reshape(len(lp.cells), wl, len(rp.cells), wr).sum(axis=(1, 3))
    lgroup = np.zeros((len(lp.cells), g.right.size), dtype=np.int64)
    np.add.at(lgroup, lp.owner, bits)
    out = np.zeros((len(lp.cells), len(rp.cells)), dtype=np.int64)
    np.add.at(out.T, rp.owner, lgroup.T)
    return out


def verify_core_properties(seq: CoreSequence, i: int, left_cluster=None, member: int = 0) -> dict:
    """Two per-level properties of a level-i member:

    1. within every parent-adjacent block, the member's vertex graph is
       biregular of density one half (and the member is biregular overall);
    2. codegrees of distinct neighbor-family clusters inside each parent
       left cell stay at or below (1 + alpha_i)/4 of the cell.
    """
    prof = seq.profile
    parent_idx = member // 2
    parentq = seq.members[i - 1][parent_idx].quotient
    q = seq.members[i][member].quotient
    g = seq.member_graph(i, member)
    lp_prev = seq.left_parts(i - 1) if i >= 2 else VertexPartition(seq.n_left, [range(seq.n_left)])
    rp_prev = seq.right_parts(i - 1) if i >= 2 else VertexPartition(seq.n_right, [range(seq.n_right)])
    report = {"item1": True, "item2": True, "failures": []}
    lclusters = list(range(parentq.left.size)) if left_cluster is None else [left_cluster]
    # item 1, vectorized: per-vertex degrees into every parent block must be
    # exactly half the block side where the parent block is present, 0 where
    # absent; checked on both sides.
    bits = np.unpackbits(g.rows.view(np.uint8), axis=1, bitorder="little")[:, : seq.n_right]
    par_bits = np.unpackbits(parentq.rows.view(np.uint8), axis=1, bitorder="little")[:, : parentq.right.size].astype(np.int64)
    deg_into_R = _group_cols(bits, rp_prev)  # (n_left, r_parent)
    lsizes = np.array([len(c) for c in rp_prev.cells], dtype=np.int64)
    expected = par_bits[lp_prev.owner] * (lsizes[None, :] // 2)
    if not np.array_equal(deg_into_R, expected):
        report["item1"] = False
        bad = np.argwhere(deg_into_R != expected)
        for v, b in bad[:4]:
            report["failures"].append(("item1-left", i, member, int(lp_prev.owner[v]), int(b)))
    deg_into_L = _group_rows(bits, lp_prev)  # (l_parent, n_right)
    rsizes = np.array([len(c) for c in lp_prev.cells], dtype=np.int64)
    expectedR = par_bits[:, rp_prev.owner] * (rsizes[:, None] // 2)
    if not np.array_equal(deg_into_L, expectedR):
        report["item1"] = False
        report["failures"].append(("item1-right", i, member))
    degs = g.degrees()
    if np.any(degs * (1 << i) != seq.n_right):
        report["item1"] = False
        report["failures"].append(("item1-global-left", i, member))
    # item 2 on the quotient: codegrees inside each parent left cell
    alpha = prof.alpha_at(i)
    an, ad = alpha.numerator, alpha.denominator
    xcells = seq.x_cells(i)
    tq = q.transposed()  # per right-cluster bits over left clusters
    starts, ends, aligned = _seg_bounds(xcells)
    fams = {L: neighbor_family(seq, i, L, member=parent_idx).members for L in lclusters}
    if aligned:
        ri = q.right.size
        fam_pairkeys = {}
        all_keys = []
        for L in lclusters:
            fam = fams[L]
            if len(fam) < 2:
                fam_pairkeys[L] = np.empty(0, dtype=np.int64)
                continue
            iu = np.triu_indices(len(fam), k=1)
            keys = fam[iu[0]] * ri + fam[iu[1]]
            fam_pairkeys[L] = keys
            all_keys.append(keys)
        if all_keys:
            uniq = np.unique(np.concatenate(all_keys))
            pairs = np.stack([uniq // ri, uniq % ri], axis=1).astype(np.int64)
            counts = _kernels.and_popcount_pairs_segmented(tq.rows, pairs, starts, ends)
            parent_of_seg = {int(seq.lparent[i - 1][cell[0]]): j for j, cell in enumerate(xcells.cells)}
            for L in lclusters:
                keys = fam_pairkeys[L]
                if not keys.size:
                    continue
                idx = np.searchsorted(uniq, keys)
                seg = parent_of_seg[L]
                lim = len(xcells.cells[seg]) * (ad + an)
                if np.any(4 * counts[idx, seg] * ad > lim):
                    report["item2"] = False
                    report["failures"].append(("item2", i, member, L))
    else:
        for L in lclusters:
            fam = fams[L]
            cell = xcells.cells[L]
            cellmask = pack_indices(cell, prof.l_sizes[i - 1])
            if len(fam) >= 2:
                pairs = np.array([(int(a), int(b)) for ai, a in enumerate(fam) for b in fam[ai + 1 :]], dtype=np.int64)
                sub = tq.rows & cellmask[None, :]
                counts = _kernels.and_popcount_pairs(sub, pairs)
                lim = len(cell) * (ad + an)
                if np.any(4 * counts * ad > lim):
                    report["item2"] = False
                    report["failures"].append(("item2", i, member, L))
    report["ok"] = report["item1"] and report["item2"]
    return report


def _group_cols(bits: np.ndarray, p: VertexPartition) -> np.ndarray:
    """Sum bit columns by cell: (n, |cells|)."""
    if _is_block_partition(p):
        w = p.n // len(p.cells)
        return bits.reshape(bits.shape[0], len(p.cells), w).sum(axis=2)
    out = np.zeros((bits.shape[0], len(p.cells)), dtype=np.int64)
    np.add.at(out.T, p.owner, bits.T)
    return out


def _group_rows(bits: np.ndarray, p: VertexPartition) -> np.ndarray:
    if _is_block_partition(p):
        w = p.n // len(p.cells)
        return bits.reshape(len(p.cells), w, bits.shape[1]).sum(axis=1)
    out = np.zeros((len(p.cells), bits.shape[1]), dtype=np.int64)
    np.add.at(out, p.owner, bits)
    return out


def _seg_bounds(cells: VertexPartition):
    starts, ends = [], []
    for cell in cells.cells:
        lo, hi = int(cell[0]), int(cell[-1]) + 1
        if hi - lo != len(cell) or lo % 64 or hi % 64:
            return None, None, False
        starts.append(lo // 64)
        ends.append(hi // 64)
    return np.array(starts, dtype=np.int64), np.array(ends, dtype=np.int64), True


def verify_degree_property(seq: CoreSequence, ell: int, i: int, L: int, R: int, member: int = 0) -> dict:
    """With the level-i ancestor block (L, R) present, every vertex of the
    level-i left cluster L has exactly 2^(i-ell) |R| neighbors in R."""
    anc = seq.ancestor_index(ell, member, i)
    qi = seq.members[i][anc].quotient
    if not qi.has_edge(L, R):
        raise ValueError("block (L, R) is not present at the ancestor level")
    g = seq.member_graph(ell, member)
    Lverts = seq.left_parts(i).cells[L]
    Rverts = seq.right_parts(i).cells[R]
    mask = pack_indices(Rverts, seq.n_right)
    degs = _kernels.masked_degrees(g.rows[Lverts], mask)
    expected_num = len(Rverts)  # degree = |R| * 2^(i-ell): exact integer check
    ok = bool(np.all(degs.astype(object) * (1 << (ell - i)) == expected_num))
    return {"ok": ok, "degrees": degs, "expected_times_2tothe(ell-i)": expected_num}


def rational_sixth_root_ceil(q: Fraction, scale_bits: int = 20) -> Fraction:
    """Smallest dyadic rational z/2^scale_bits with z^6 >= q."""
    if q <= 0:
        return Fraction(0)
    target = -(-q.numerator * (1 << (6 * scale_bits)) // q.denominator)  # ceil
    z = iroot_ceil(target, 6)
    return Fraction(z, 1 << scale_bits)


def verify_quasirandomness(seq: CoreSequence, ell: int, member: int = 0, subsample_cap: int = 20) -> dict:
    """Exact codegree-excess accounting over the right side and the derived
    deviation parameter; includes an exact small-subsample deviation check.
    """
    g = seq.member_graph(ell, member)
    q = seq.members[ell][member].quotient
    nl, nr = seq.n_left, seq.n_right
    p = Fraction(1, 1 << ell)
    rp = seq.right_parts(ell)
    wl = nl // q.left.size  # left cluster width
    tq = q.transposed()
    rpairs = np.array([(a, b) for a in range(q.right.size) for b in range(q.right.size)], dtype=np.int64)
    cod = _kernels.and_popcount_pairs(tq.rows, rpairs).reshape(q.right.size, q.right.size)
    # vertex-level codegree between v in R_a, v' in R_b is cod[a,b] * wl
    base = p * p * nl
    cluster_sizes = np.array([len(c) for c in rp.cells], dtype=np.int64)
    worst = Fraction(0)
    for a in range(q.right.size):
        excess = Fraction(0)
        for b in range(q.right.size):
            cd = Fraction(int(cod[a, b]) * wl)
            if cd > base:
                excess += (cd - base) * int(cluster_sizes[b])
        if excess > worst:
            worst = excess
    alpha_hat = worst / (p * p * nl * nr)
    eps = 2 * rational_sixth_root_ceil(alpha_hat)
    out = {"alpha_hat": alpha_hat, "eps": eps, "eps_vacuous": eps >= 1}
    if not out["eps_vacuous"]:
        from .regularity import CapExceeded, is_eps_regular_graph

        sub = _induced_subgraph(g, np.arange(min(subsample_cap, nl)), np.arange(min(subsample_cap, nr)))
        try:
            out["subsample_exact"] = is_eps_regular_graph(sub, eps, mode="exact")
        except CapExceeded:
            out["subsample_exact"] = {"status": "cap-exceeded"}
        out["sampled_scan"] = is_eps_regular_graph(g, eps, mode="sampled", seed=derive_seed(seq.seed, "qr", ell, member))
    return out


def _induced_subgraph(g: BipartiteGraph, S, T) -> BipartiteGraph:
    from .regularity import _induced_pair

    return _induced_pair(g, S, T)


@dataclass
class Witness:
    right_cluster: int
    r_vertices: np.ndarray
    p1_vertices: np.ndarray
    d_pr_num: int  # e_G(P, R)
    level: int


def find_irregularity_witnesses(
    seq: CoreSequence, ell: int, member: int, i: int, P: np.ndarray, gamma, require_count: bool = True
) -> list[Witness]:
    """Adversarial cluster witnesses for a left subset that sits mostly in a
    level-(i-1) cluster yet is far from every level-i cluster.

    For each qualifying right cluster: the subset restricted to non-neighbor
    left clusters spans no edges into it, yet the whole subset has density
    at least 2^(i - ell - 2) into it.  With require_count the number of
    qualifying clusters is asserted to reach one sixth of 2^-i of the
    level-i right cluster count.
    """
    gamma = Fraction(gamma)
    P = np.unique(np.asarray(P, dtype=np.int64))
    lp_i = seq.left_parts(i)
    lp_prev = seq.left_parts(i - 1) if i >= 2 else VertexPartition(seq.n_left, [range(seq.n_left)])
    mass = np.bincount(lp_i.owner[P], minlength=len(lp_i.cells)).astype(np.int64)
    tot = int(P.size)
    # precondition: P in_{1/4} previous level
    prev_mass = np.bincount(lp_prev.owner[P], minlength=len(lp_prev.cells)).astype(np.int64)
    host = int(np.argmax(prev_mass))
    outside_prev = tot - int(prev_mass[host])
    if not (outside_prev == 0 or 4 * outside_prev < tot):
        raise ValueError("subset is not 1/4-inside a previous-level cluster")
    # precondition: P not gamma-inside any level-i cluster
    outside_all = tot - mass
    inside_some = np.any((outside_all == 0) | (outside_all * gamma.denominator < gamma.numerator * tot))
    if inside_some:
        raise ValueError("subset is gamma-inside a level-i cluster; no witnesses")
    anc = seq.ancestor_index(ell, member, i)
    qi = seq.members[i][anc].quotient
    fam = neighbor_family(seq, i, host, member=seq.ancestor_index(ell, member, i - 1)).members
    li = qi.left.size
    host_mask = (seq.lparent[i - 1] == host)
    maxmass = int(mass.max())
    out_of_host_mass = tot - int(mass[host_mask].sum())
    p = Fraction(1, 1 << ell)
    g = seq.member_graph(ell, member)
    tq_bits = seq.quotient_t_bits(i, anc)
    nb_bits = tq_bits[fam]
    in_nb = nb_bits @ mass
    in_nb_in_host = nb_bits @ (mass * host_mask.astype(np.int64))
    witnesses = []
    for fi, R in enumerate(fam):
        not_nb_mass = tot - int(in_nb[fi])
        # (a) non-neighbor mass >= (|P| - max cluster mass) / 8
        # (b) in-host neighbor mass >= |P|/2 - out-of-host mass
        if 8 * not_nb_mass >= tot - maxmass and 2 * int(in_nb_in_host[fi]) >= tot - 2 * out_of_host_mass:
            sel = nb_bits[fi][lp_i.owner[P]] == 0
            p1 = P[sel]
            rverts = seq.right_parts(i).cells[int(R)]
            e_p1 = edges_between(g, p1, rverts) if p1.size else 0
            e_pr = edges_between(g, P, rverts)
            assert e_p1 == 0, "witness construction must be edge-free"
            assert Fraction(e_pr, tot * len(rverts)) >= Fraction(1, 4) * (1 << i) * p
            assert 8 * Fraction(int(p1.size)) >= gamma * tot
            witnesses.append(Witness(right_cluster=int(R), r_vertices=np.asarray(rverts), p1_vertices=p1, d_pr_num=e_pr, level=i))
    bound = Fraction(seq.profile.r_sizes[i - 1], 6) / (1 << i)
    if require_count and Fraction(len(witnesses)) < bound:
        raise AssertionError(f"witness count {len(witnesses)} below the {bound} cluster bound")
    return witnesses


def one_twelve_context(seq: CoreSequence, ell: int, member: int, i: int, host: int, lam) -> dict:
    """Weighted-count check at level i for the member's ancestor chain."""
    anc = seq.ancestor_index(ell, member, i)
    qi = seq.members[i][anc].quotient
    tq = qi.transposed()
    fam = neighbor_family(seq, i, host, member=seq.ancestor_index(ell, member, i - 1)).members
    inside = np.flatnonzero(seq.lparent[i - 1] == host)
    return check_one_twelve(
        tq.rows,
        qi.left.size,
        fam,
        lam,
        inside,
        level=i,
        right_total=seq.profile.r_sizes[i - 1],
    )


# -- refutation certificates ----------------------------------------------


@dataclass
class LedgerLine:
    entry: int
    right_cluster_level: int
    r_vertices: np.ndarray
    p1_vertices: np.ndarray
    correction: int  # e_G(P, R \ Rstar_i)
    value: Fraction


@dataclass
class CertEntry:
    p_vertices: np.ndarray
    level: int
    lines: list


@dataclass
class IrregularityCertificate:
    graph_sha256: str
    n_left: int
    n_right: int
    ell: int
    delta: Fraction
    gamma: Fraction
    gamma_prime: Fraction
    host_c: Fraction
    t: int
    q_cells: list
    r_level_cells: dict  # level -> list of cluster vertex arrays
    entries: list
    total: Fraction
    budget: Fraction

    @property
    def refutes(self) -> bool:
        return self.total > self.budget

    def to_text(self) -> str:
        out = ["irregularity-certificate v1"]
        out.append(f"graph-sha256 {self.graph_sha256}")
        out.append(f"n-left {self.n_left}")
        out.append(f"n-right {self.n_right}")
        out.append(f"level {self.ell}")
        out.append(f"delta {self.delta}")
        out.append(f"gamma {self.gamma}")
        out.append(f"gamma-prime {self.gamma_prime}")
        out.append(f"host-c {self.host_c}")
        out.append(f"t {self.t}")
        out.append(f"budget {self.budget}")
        out.append(f"q-cells {len(self.q_cells)}")
        for cell in self.q_cells:
            out.append("q " + _ranges_encode(cell))
        for lvl in sorted(self.r_level_cells):
            cells = self.r_level_cells[lvl]
            out.append(f"r-level {lvl} {len(cells)}")
            for cell in cells:
                out.append("r " + _ranges_encode(cell))
        out.append(f"entries {len(self.entries)}")
        for k, e in enumerate(self.entries):
            out.append(f"entry {k} level {e.level}")
            out.append("p " + _ranges_encode(e.p_vertices))
            out.append(f"lines {len(e.lines)}")
            for ln in e.lines:
                out.append(
                    f"line R={_ranges_encode(ln.r_vertices)} P1={_ranges_encode(ln.p1_vertices)} corr={ln.correction} value={ln.value}"
                )
        out.append(f"total {self.total}")
        return "\n".join(out) + "\n"

    @staticmethod
    def from_text(text: str) -> "IrregularityCertificate":
        lines = text.strip("\n").split("\n")
        it = iter(lines)
        if next(it) != "irregularity-certificate v1":
            raise ValueError("bad header")
        kv = {}
        while "q-cells" not in kv:
            k, v = next(it).split(" ", 1)
            kv[k] = v
        nq = int(kv["q-cells"])
        q_cells = []
        for _ in range(nq):
            ln = next(it)
            assert ln.startswith("q ")
            q_cells.append(_ranges_decode(ln[2:]))
        r_level_cells = {}
        pos = None
        ln = next(it)
        while ln.startswith("r-level"):
            _, lvl, cnt = ln.split()
            cells = []
            for _ in range(int(cnt)):
                l2 = next(it)
                assert l2.startswith("r ")
                cells.append(_ranges_decode(l2[2:]))
            r_level_cells[int(lvl)] = cells
            ln = next(it)
        assert ln.startswith("entries ")
        n_entries = int(ln.split()[1])
        entries = []
        for _ in range(n_entries):
            head = next(it).split()
            level = int(head[3])
            pline = next(it)
            p_vertices = _ranges_decode(pline[2:])
            nlines = int(next(it).split()[1])
            lns = []
            for _ in range(nlines):
                parts = next(it).split()
                d = dict(p.split("=", 1) for p in parts[1:])
                lns.append(
                    LedgerLine(
                        entry=len(entries),
                        right_cluster_level=level,
                        r_vertices=_ranges_decode(d["R"]),
                        p1_vertices=_ranges_decode(d["P1"]),
                        correction=int(d["corr"]),
                        value=Fraction(d["value"]),
                    )
                )
            entries.append(CertEntry(p_vertices=p_vertices, level=level, lines=lns))
        total = Fraction(next(it).split()[1])
        return IrregularityCertificate(
            graph_sha256=kv["graph-sha256"],
            n_left=int(kv["n-left"]),
            n_right=int(kv["n-right"]),
            ell=int(kv["level"]),
            delta=Fraction(kv["delta"]),
            gamma=Fraction(kv["gamma"]),
            gamma_prime=Fraction(kv["gamma-prime"]),
            host_c=Fraction(kv["host-c"]),
            t=int(kv["t"]),
            q_cells=q_cells,
            r_level_cells=r_level_cells,
            entries=entries,
            total=total,
            budget=Fraction(kv["budget"]),
        )


def _ranges_encode(arr) -> str:
    arr = np.unique(np.asarray(arr, dtype=np.int64))
    if arr.size == 0:
        return "-"
    runs = []
    start = prev = int(arr[0])
    for v in arr[1:]:
        v = int(v)
        if v == prev + 1:
            prev = v
            continue
        runs.append((start, prev))
        start = prev = v
    runs.append((start, prev))
    return ",".join(f"{a}" if a == b else f"{a}-{b}" for a, b in runs)


def _ranges_decode(s: str) -> np.ndarray:
    if s == "-":
        return np.empty(0, dtype=np.int64)
    out = []
    for tok in s.split(","):
        if "-" in tok[1:]:
            a, b = tok.split("-", 1) if not tok.startswith("-") else (tok[0:1], tok[2:])
            out.append(np.arange(int(a), int(b) + 1))
        else:
            out.append(np.array([int(tok)]))
    return np.concatenate(out).astype(np.int64)


def refute_partition(
    seq: CoreSequence,
    ell: int,
    member: int,
    P: VertexPartition,
    Q: VertexPartition,
    delta,
    t: int,
    gamma=None,
) -> IrregularityCertificate:
    """Build the irregularity certificate for a partition pair against a
    chain member.

    Preconditions: the right partition c-refines the level-t right clusters
    (c = 2^-9) and the left partition does NOT gamma-refine the level-t left
    clusters.  Emits per-cell ledger lines whose total, when above
    delta * e(G), certifies that no edit of at most that many edges makes
    every cross pair delta-regular.
    """
    delta = Fraction(delta)
    c = Fraction(1, 512)
    if gamma is None:
        gamma = max(32 * _sqrt_ceil(delta), Fraction(32, _iroot_floor(seq.profile.r_sizes[0], 6)))
    gamma = Fraction(gamma)
    if gamma > Fraction(1, 4):
        raise ValueError("gamma must be at most 1/4 for the witness pipeline")
    if 32 * _sqrt_ceil(delta) > gamma:
        raise ValueError("delta too large for gamma: need gamma >= 32*sqrt(delta)")
    gamma_prime = gamma / 32
    g = seq.member_graph(ell, member)
    rep_q = refines_beta(Q, seq.right_parts(t), c)
    if not rep_q.verdict:
        raise ValueError("right partition does not c-refine the level-t clusters")
    rep_p = refines_beta(P, seq.left_parts(t), gamma)
    if rep_p.verdict:
        raise ValueError("left partition gamma-refines the level-t clusters; nothing to refute")
    # classify cells by the deepest level they gamma-refine
    lp_chain = [seq.left_parts(i) for i in range(1, t + 1)]
    entries = []
    used_levels = set()
    for cell in P.cells:
        lvl = 0
        for i in range(1, t + 1):
            m = np.bincount(lp_chain[i - 1].owner[cell], minlength=len(lp_chain[i - 1].cells))
            outside = int(cell.size - m.max())
            if outside == 0 or Fraction(outside) < gamma * int(cell.size):
                lvl = i
            else:
                break
        if lvl >= t:
            continue  # inside level t: not in the deficient family
        entries.append((cell, lvl + 1))
        used_levels.add(lvl + 1)
    # Rstar per used level
    rstar = {}
    for i in sorted(used_levels):
        rstar[i] = _rstar_mask(Q, seq.right_parts(i), c, seq.n_right)
    p = Fraction(1, 1 << ell)
    cert_entries = []
    total = Fraction(0)
    for cell, i in entries:
        wits = find_irregularity_witnesses(seq, ell, member, i, cell, gamma, require_count=False)
        lines = []
        comp_mask = ~rstar[i]
        for w in wits:
            if Fraction(int(w.p1_vertices.size)) < delta * int(cell.size):
                continue
            r_out = np.asarray([v for v in w.r_vertices if comp_mask[int(v)]], dtype=np.int64)
            corr = edges_between(g, cell, r_out) if r_out.size else 0
            raw = gamma_prime * (Fraction(1, 4) * (1 << i) * p * int(cell.size) * len(w.r_vertices) - corr)
            val = raw if raw > 0 else Fraction(0)
            lines.append(
                LedgerLine(
                    entry=len(cert_entries),
                    right_cluster_level=i,
                    r_vertices=np.asarray(w.r_vertices),
                    p1_vertices=w.p1_vertices,
                    correction=corr,
                    value=val,
                )
            )
            total += val
        cert_entries.append(CertEntry(p_vertices=cell, level=i, lines=lines))
    budget = delta * g.edge_count()
    cert = IrregularityCertificate(
        graph_sha256=graph_hash(g),
        n_left=seq.n_left,
        n_right=seq.n_right,
        ell=ell,
        delta=delta,
        gamma=gamma,
        gamma_prime=gamma_prime,
        host_c=c,
        t=t,
        q_cells=[np.asarray(cq) for cq in Q.cells],
        r_level_cells={i: [np.asarray(cc) for cc in seq.right_parts(i).cells] for i in sorted(used_levels)},
        entries=cert_entries,
        total=total,
        budget=budget,
    )
    return cert


def _sqrt_ceil(q: Fraction) -> Fraction:
    if q == 0:
        return Fraction(0)
    scale = 1 << 40
    target = -(-q.numerator * scale * scale // q.denominator)
    return Fraction(iroot_ceil(target, 2), scale)


def _rstar_mask(Q: VertexPartition, rparts: VertexPartition, c: Fraction, n_right: int) -> np.ndarray:
    """Boolean mask over right vertices: inside the union of Q&R for Q-cells
    c-inside a cluster R."""
    mask = np.zeros(n_right, dtype=bool)
    for cell in Q.cells:
        m = np.bincount(rparts.owner[cell], minlength=len(rparts.cells))
        host = int(np.argmax(m))
        outside = int(cell.size - m[host])
        if outside == 0 or Fraction(outside) < c * int(cell.size):
            inter = cell[rparts.owner[cell] == host]
            mask[inter] = True
    return mask


def reverify_certificate(cert: IrregularityCertificate, g: BipartiteGraph) -> dict:
    """Re-check every ledger line from the serialized certificate plus the
    graph alone.  Returns per-line results and the final verdict."""
    report = {"ok": True, "failures": [], "lines_checked": 0}
    if graph_hash(g) != cert.graph_sha256:
        return {"ok": False, "failures": [("graph-hash", None)], "lines_checked": 0}
    if cert.gamma > Fraction(1, 4) or 32 * _sqrt_ceil(cert.delta) > cert.gamma:
        report["ok"] = False
        report["failures"].append(("parameters", None))
    if cert.gamma_prime != cert.gamma / 32:
        report["ok"] = False
        report["failures"].append(("gamma-prime", None))
    p = Fraction(1, 1 << cert.ell)
    # rebuild Rstar masks per level from Q and the stored cluster cells
    q_part = VertexPartition(cert.n_right, cert.q_cells)
    rstar = {}
    for lvl, cells in cert.r_level_cells.items():
        rparts = VertexPartition(cert.n_right, cells)
        rstar[lvl] = _rstar_mask(q_part, rparts, cert.host_c, cert.n_right)
    # entry cells must be disjoint
    seen = np.zeros(cert.n_left, dtype=bool)
    total = Fraction(0)
    for k, e in enumerate(cert.entries):
        if np.any(seen[e.p_vertices]):
            report["ok"] = False
            report["failures"].append(("entry-overlap", k))
        seen[e.p_vertices] = True
        rseen = np.zeros(cert.n_right, dtype=bool)
        for ln in e.lines:
            report["lines_checked"] += 1
            ok = True
            if np.any(rseen[ln.r_vertices]):
                ok = False
            rseen[ln.r_vertices] = True
            psize = int(e.p_vertices.size)
            if Fraction(int(ln.p1_vertices.size)) < max(cert.delta, cert.gamma / 8) * psize:
                ok = False
            if not set(ln.p1_vertices.tolist()) <= set(e.p_vertices.tolist()):
                ok = False
            if edges_between(g, ln.p1_vertices, ln.r_vertices) != 0:
                ok = False
            e_pr = edges_between(g, e.p_vertices, ln.r_vertices)
            if Fraction(e_pr, psize * len(ln.r_vertices)) < Fraction(1, 4) * (1 << e.level) * p:
                ok = False
            comp = ~rstar[e.level]
            r_out = np.asarray([v for v in ln.r_vertices if comp[int(v)]], dtype=np.int64)
            corr = edges_between(g, e.p_vertices, r_out) if r_out.size else 0
            if corr != ln.correction:
                ok = False
            raw = cert.gamma_prime * (Fraction(1, 4) * (1 << e.level) * p * psize * len(ln.r_vertices) - corr)
            val = raw if raw > 0 else Fraction(0)
            if val != ln.value:
                ok = False
            if not ok:
                report["ok"] = False
                report["failures"].append(("line", k, int(ln.r_vertices[0]) if ln.r_vertices.size else -1))
            total += val
    if total != cert.total:
        report["ok"] = False
        report["failures"].append(("total", None))
    if cert.budget != cert.delta * g.edge_count():
        report["ok"] = False
        report["failures"].append(("budget", None))
    report["refutes"] = cert.total > cert.budget and report["ok"]
    return report


# -- directory serialization ----------------------------------------------


def save_core_sequence(seq: CoreSequence, out_dir: str) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "profile": seq.profile.to_json(),
        "seed": seq.seed,
        "n_left": seq.n_left,
        "n_right": seq.n_right,
        "gamma_seeds": {f"{i}/{idx}": rec["seed"] for (i, idx), rec in seq.gamma_records.items()},
        "gamma_telemetry": {f"{i}/{idx}": rec["telemetry"]["draws"] for (i, idx), rec in seq.gamma_records.items()},
        "member_hashes": {},
    }
    for i, lp in enumerate(seq.left_chain, start=1):
        with open(os.path.join(out_dir, f"left-{i}.part"), "w") as f:
            f.write(lp.to_text())
    for i, rp in enumerate(seq.right_chain, start=1):
        with open(os.path.join(out_dir, f"right-{i}.part"), "w") as f:
            f.write(rp.to_text())
    for j in range(1, seq.profile.s + 1):
        for m in seq.members[j]:
            path = os.path.join(out_dir, f"quotient-{j}-{m.index}.bin")
            blob = bipartite_to_binary(m.quotient)
            with open(path, "wb") as f:
                f.write(blob)
            manifest["member_hashes"][f"{j}/{m.index}"] = hashlib.sha256(blob).hexdigest()
    for (i, idx), rec in seq.gamma_records.items():
        path = os.path.join(out_dir, f"gamma-{i}-{idx}.bin")
        with open(path, "wb") as f:
            f.write(bipartite_to_binary(rec["balanced"].graph))
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
    return manifest


def load_core_sequence(out_dir: str) -> CoreSequence:
    with open(os.path.join(out_dir, "manifest.json")) as f:
        manifest = json.load(f)
    profile = GrowthProfile.from_json(manifest["profile"])
    nl, nr = manifest["n_left"], manifest["n_right"]
    left_chain = []
    for i in range(1, profile.s + 1):
        with open(os.path.join(out_dir, f"left-{i}.part")) as f:
            left_chain.append(VertexPartition.from_text(nl, f.read()))
    right_chain = []
    for i in range(1, profile.s + 1):
        with open(os.path.join(out_dir, f"right-{i}.part")) as f:
            right_chain.append(VertexPartition.from_text(nr, f.read()))
    seq = CoreSequence(profile, left_chain, right_chain, manifest["seed"])
    for j in range(1, profile.s + 1):
        members = []
        for idx in range(1 << j):
            with open(os.path.join(out_dir, f"quotient-{j}-{idx}.bin"), "rb") as f:
                q = bipartite_from_binary(f.read())
            members.append(CoreMember(level=j, index=idx, quotient=q, parent=idx // 2))
        seq.members.append(members)
    return seq
