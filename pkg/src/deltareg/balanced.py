"""Balanced bipartite graphs: verification, sampling, and weighted counts.

A graph on (X, Y) with cell partitions and a family of Y-subsets is balanced
when (i) every y sees exactly half of every X-cell, (ii) within each family
member, every pair of X-vertices agrees (both neighbors or both
non-neighbors) on at most a (1/2 + beta) fraction, (iii) codegrees of
distinct family Y-vertices inside each X-cell stay below (1+alpha)/4 of the
cell, and (iv) each Y-cell is closed under complement via an involution.

The sampler draws exact half neighborhoods per (X-cell, y) for one half of
each Y-cell and mirrors the complement onto the other half, so (i) and (iv)
hold on every draw; (ii) and (iii) are verified and the whole draw is
retried on failure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernels
from .graphs import BipartiteGraph, VertexClass, pack_indices, unpack_row
from .partitions import VertexPartition


@dataclass
class BalanceSpec:
    """Cell structure and parameters for balancedness.

    X and Y partition abstract index spaces; family members are unions of
    Y-cells, all of one size.  X-cells share one even size.
    """

    x_cells: VertexPartition
    y_cells: VertexPartition
    family: list  # list of sorted np.ndarray of Y indices
    alpha: Fraction
    beta: Fraction

    def __post_init__(self):
        self.alpha = Fraction(self.alpha)
        self.beta = Fraction(self.beta)
        sizes = self.x_cells.cell_sizes()
        if len(set(sizes)) != 1 or sizes[0] % 2:
            raise ValueError("X-cells must share one even size")
        self.m = sizes[0]
        if any(s % 2 for s in self.y_cells.cell_sizes()):
            raise ValueError("Y-cells must have even size")
        self.family = [np.unique(np.asarray(F, dtype=np.int64)) for F in self.family]
        ksizes = {len(F) for F in self.family}
        if len(ksizes) > 1:
            raise ValueError("family members must share one size")
        self.k = ksizes.pop() if ksizes else 0
        for F in self.family:
            cells = {self.y_cells.cell_of(int(y)) for y in F}
            covered = sorted(int(v) for c in cells for v in self.y_cells.cells[c])
            if covered != F.tolist():
                raise ValueError("family members must be unions of Y-cells")

    @property
    def nx(self):
        return self.x_cells.n

    @property
    def ny(self):
        return self.y_cells.n


@dataclass
class BalancedGraph:
    graph: BipartiteGraph  # on (X, Y)
    spec: BalanceSpec
    involution: np.ndarray  # phi over Y indices

    def y_rows(self) -> np.ndarray:
        return self.graph.transposed().rows

    def to_text(self) -> str:
        """Graph plus explicit pairing table; verification needs nothing
        else beyond the cell spec."""
        from .graphs import bipartite_to_text

        phi = " ".join(str(int(v)) for v in self.involution)
        return bipartite_to_text(self.graph) + "phi " + phi + "\n"


def balanced_from_text(text: str, spec: BalanceSpec) -> BalancedGraph:
    from .graphs import bipartite_from_text

    body, phi_line = text.rstrip("\n").rsplit("\n", 1)
    if not phi_line.startswith("phi "):
        raise ValueError("missing pairing table")
    phi = np.array([int(x) for x in phi_line.split()[1:]], dtype=np.int64)
    graph = bipartite_from_text(body + "\n")
    if len(phi) != spec.ny or np.any(phi[phi] != np.arange(spec.ny)):
        raise ValueError("pairing table is not an involution")
    return BalancedGraph(graph=graph, spec=spec, involution=phi)


@dataclass
class VerifyReport:
    ok: bool
    first_violation: str | None
    checked: dict = field(default_factory=dict)
    involution: np.ndarray | None = None


def _y_major(graph: BipartiteGraph) -> np.ndarray:
    return graph.transposed().rows


def verify_balanced(candidate: BipartiteGraph, spec: BalanceSpec, conditions=("i", "ii", "iii", "iv")) -> VerifyReport:
    """Exact check of the four conditions; reports the first violated one."""
    if candidate.left.size != spec.nx or candidate.right.size != spec.ny:
        raise ValueError("graph does not match the spec's index spaces")
    yrows = _y_major(candidate)  # per-y bits over X
    checked = {}
    # (i) exact half degrees per X-cell
    if "i" in conditions:
        for ci, cell in enumerate(spec.x_cells.cells):
            mask = pack_indices(cell, spec.nx)
            degs = _kernels.masked_degrees(yrows, mask)
            if np.any(degs * 2 != len(cell)):
                bad = int(np.flatnonzero(degs * 2 != len(cell))[0])
                return VerifyReport(False, f"equitable-degrees: y={bad} X-cell={ci}", checked)
        checked["i"] = True
    # (ii) agreement bound per family member
    if "ii" in conditions:
        if spec.beta >= Fraction(1, 2):
            checked["ii"] = "vacuous"  # bound >= |F| always holds
        else:
            xrows = candidate.rows  # per-x bits over Y
            bn, bd = spec.beta.numerator, spec.beta.denominator
            pairs = _all_pairs(spec.nx)
            for fi, F in enumerate(spec.family):
                fm = pack_indices(F, spec.ny)
                sub = xrows & fm[None, :]
                ham = _kernels.xor_popcount_pairs(sub, pairs)
                agree = len(F) - ham
                # agree > (1/2 + beta)|F|  <=>  2*agree*bd > |F|*(bd + 2*bn)
                bad = np.flatnonzero(2 * agree * bd > len(F) * (bd + 2 * bn))
                if bad.size:
                    i, j = pairs[int(bad[0])]
                    return VerifyReport(False, f"agreement: member={fi} x={int(i)} x'={int(j)}", checked)
            checked["ii"] = True
    # (iii) codegree bound per (X-cell, member, y pair)
    if "iii" in conditions:
        viol = _codegree_violation(yrows, spec)
        if viol is not None:
            return VerifyReport(False, f"codegree: {viol}", checked)
        checked["iii"] = True
    # (iv) per-Y-cell complement involution, found by complement lookup
    phi = None
    if "iv" in conditions:
        phi = _find_involution(yrows, spec)
        if phi is None:
            return VerifyReport(False, "complement-closure", checked)
        checked["iv"] = True
    return VerifyReport(True, None, checked, involution=phi)


def _all_pairs(n: int) -> np.ndarray:
    iu = np.triu_indices(n, k=1)
    return np.stack([iu[0], iu[1]], axis=1).astype(np.int64)


def _codegree_violation(yrows: np.ndarray, spec: BalanceSpec):
    """(1+alpha)/4 codegree bound inside every X-cell, per family member."""
    starts, ends, aligned = _cell_segments(spec.x_cells)
    # codeg > (1+alpha)*m/4  <=>  4*codeg*ad > m*(ad + an), all integers
    an, ad = spec.alpha.numerator, spec.alpha.denominator
    lim = spec.m * (ad + an)
    for fi, F in enumerate(spec.family):
        pairs = _member_pairs(F)
        if not len(pairs):
            continue
        if aligned:
            counts = _kernels.and_popcount_pairs_segmented(yrows, pairs, starts, ends)
            worst = counts.max(axis=1)
            bad = np.flatnonzero(4 * worst * ad > lim)
            if bad.size:
                p = pairs[int(bad[0])]
                return f"member={fi} y={int(p[0])} y'={int(p[1])}"
        else:
            for ci, cell in enumerate(spec.x_cells.cells):
                mask = pack_indices(cell, spec.nx)
                sub = yrows & mask[None, :]
                counts = _kernels.and_popcount_pairs(sub, pairs)
                bad = np.flatnonzero(4 * counts * ad > lim)
                if bad.size:
                    p = pairs[int(bad[0])]
                    return f"member={fi} X-cell={ci} y={int(p[0])} y'={int(p[1])}"
    return None


def _member_pairs(F: np.ndarray) -> np.ndarray:
    k = len(F)
    iu = np.triu_indices(k, k=1)
    return np.stack([F[iu[0]], F[iu[1]]], axis=1).astype(np.int64)


def _cell_segments(cells: VertexPartition):
    """Word-aligned segment bounds when every cell is a contiguous 64-aligned
    block; enables the segmented kernel."""
    starts, ends = [], []
    for cell in cells.cells:
        lo, hi = int(cell[0]), int(cell[-1]) + 1
        if hi - lo != len(cell) or lo % 64 or hi % 64:
            return None, None, False
        starts.append(lo // 64)
        ends.append(hi // 64)
    return np.array(starts, dtype=np.int64), np.array(ends, dtype=np.int64), True


def _find_involution(yrows: np.ndarray, spec: BalanceSpec):
    phi = np.full(spec.ny, -1, dtype=np.int64)
    for cell in spec.y_cells.cells:
        lookup = {}
        for y in cell:
            lookup.setdefault(yrows[int(y)].tobytes(), []).append(int(y))
        for y in cell:
            if phi[int(y)] != -1:
                continue
            comp = (~yrows[int(y)]).copy()
            extra = spec.nx % 64
            if extra:
                comp[-1] &= np.uint64((1 << extra) - 1)
            mates = lookup.get(comp.tobytes(), [])
            mate = next((m for m in mates if phi[m] == -1 and m != int(y)), None)
            if mate is None:
                return None
            phi[int(y)] = mate
            phi[mate] = int(y)
    return phi


class SamplerExhausted(Exception):
    def __init__(self, failures):
        self.failures = failures
        super().__init__(f"sampler retries exhausted; failure counts {failures}")


def sample_balanced(
    spec: BalanceSpec,
    seed: int,
    max_retries: int = 50,
    enforce=("ii", "iii"),
) -> tuple[BalancedGraph, dict]:
    """Draw until a sample passes the enforced conditions.

    Each Y-cell splits in index order into a first and second half; the
    first half receives independent exact-half neighborhoods per X-cell and
    the second half mirrors the complement through the pairing.  Conditions
    (i) and (iv) are asserted on every draw (they are construction-forced);
    the retry loop rejects on the enforced subset of (ii)/(iii).  Returns
    the accepted graph plus telemetry (draws, per-condition failures).
    """
    rng = np.random.default_rng(np.random.PCG64(seed))
    failures = {"ii": 0, "iii": 0}
    telemetry = {"draws": 0, "failures": failures}
    words = (spec.nx + 63) // 64
    for attempt in range(max_retries):
        telemetry["draws"] += 1
        yrows = np.zeros((spec.ny, words), dtype=np.uint64)
        phi = np.full(spec.ny, -1, dtype=np.int64)
        for cell in spec.y_cells.cells:
            half = len(cell) // 2
            firsts = cell[:half]
            seconds = cell[half:]
            phi[firsts] = seconds
            phi[seconds] = firsts
            for y in firsts:
                row = np.zeros(words, dtype=np.uint64)
                for xc in spec.x_cells.cells:
                    picks = rng.permutation(xc)[: len(xc) // 2]
                    row |= pack_indices(picks, spec.nx)
                yrows[int(y)] = row
            for y1, y2 in zip(firsts, seconds):
                comp = (~yrows[int(y1)]).copy()
                extra = spec.nx % 64
                if extra:
                    comp[-1] &= np.uint64((1 << extra) - 1)
                yrows[int(y2)] = comp
        graph = _from_y_major(yrows, spec)
        forced = verify_balanced(graph, spec, conditions=("i", "iv"))
        assert forced.ok, "construction-forced conditions must hold on every draw"
        ok = True
        for cond in enforce:
            rep = verify_balanced(graph, spec, conditions=(cond,))
            if not rep.ok:
                failures[cond] += 1
                ok = False
                break
        if ok:
            return BalancedGraph(graph=graph, spec=spec, involution=phi), telemetry
    raise SamplerExhausted(failures)


def _from_y_major(yrows: np.ndarray, spec: BalanceSpec) -> BipartiteGraph:
    g_t = BipartiteGraph(VertexClass("Y", spec.ny), VertexClass("X", spec.nx), yrows)
    return g_t.transposed()


def is_beta_balanced(graph: BipartiteGraph, beta) -> bool:
    """Standalone pairwise agreement bound over the whole right side."""
    beta = Fraction(beta)
    n_y = graph.right.size
    pairs = _all_pairs(graph.left.size)
    ham = _kernels.xor_popcount_pairs(graph.rows, pairs)
    limit = (Fraction(1, 2) + beta) * n_y
    return all(Fraction(n_y - int(h)) <= limit for h in ham)


def check_one_six(gamma: BipartiteGraph, lam, require_balanced: bool = True) -> dict:
    """Count right-side vertices whose neighborhood splits the weight mass:
    min(inside, outside) >= (1 - max-weight)/8.  For a 1/16-balanced graph
    the count is at least |Y|/6.

    lam: nonnegative weights over the left side with total mass one.
    """
    import math as _math

    lam = [Fraction(x) for x in lam]
    if len(lam) != gamma.left.size:
        raise ValueError("weight vector length must match the left side")
    if any(x < 0 for x in lam) or sum(lam) != 1:
        raise ValueError("weights must be nonnegative with total mass 1")
    if require_balanced and not is_beta_balanced(gamma, Fraction(1, 16)):
        raise ValueError("graph is not 1/16-balanced")
    den = 1
    for x in lam:
        den = den * x.denominator // _math.gcd(den, x.denominator)
    if den > 1 << 40:
        raise ValueError("weight denominators too large for exact vectorized sums")
    mass = np.array([x.numerator * (den // x.denominator) for x in lam], dtype=np.int64)
    linf = max(lam)
    threshold = (1 - linf) / 8
    yrows = gamma.transposed().rows
    nb_bits = np.unpackbits(yrows.view(np.uint8), axis=1, bitorder="little")[:, : gamma.left.size].astype(np.int64)
    inside_num = nb_bits @ mass  # inside mass, numerator over den
    tn, td = threshold.numerator, threshold.denominator
    qualifying = [
        int(y)
        for y in range(gamma.right.size)
        if min(int(inside_num[y]), den - int(inside_num[y])) * td >= tn * den
    ]
    bound = Fraction(gamma.right.size, 6)
    return {
        "qualifying": qualifying,
        "count": len(qualifying),
        "bound": bound,
        "count_ok": Fraction(len(qualifying)) >= bound,
        "threshold": threshold,
    }


def check_one_twelve(
    neighbor_rows: np.ndarray,
    nx: int,
    family_member: np.ndarray,
    lam,
    inside_cell: np.ndarray,
    level: int,
    right_total: int,
) -> dict:
    """Qualifying-cluster count for a weighted left mass against a neighbor
    family member.

    neighbor_rows: per-right-vertex packed bits over the left index space
    (adjacency used for the two mass inequalities); family_member: the
    right vertices scanned; lam: weights over the left space (mass one);
    inside_cell: the left indices regarded as "inside" for the second
    inequality.  A right vertex qualifies when
        mass outside its neighborhood >= (1 - max-weight)/8, and
        mass inside (neighborhood and inside_cell) >= 1/2 - mass outside
        inside_cell.
    The reported bound is (1/6) * 2^-level * right_total.
    """
    import math as _math

    lam = [Fraction(x) for x in lam]
    if any(x < 0 for x in lam) or sum(lam) != 1:
        raise ValueError("weights must be nonnegative with total mass 1")
    # integer mass vector over a common denominator keeps the comparisons
    # exact while letting dot products run in numpy
    den = 1
    for x in lam:
        den = den * x.denominator // _math.gcd(den, x.denominator)
    if den > 1 << 40:
        raise ValueError("weight denominators too large for exact vectorized sums")
    mass = np.array([x.numerator * (den // x.denominator) for x in lam], dtype=np.int64)
    linf = max(lam)
    thr1 = (1 - linf) / 8
    inside_mask = np.zeros(nx, dtype=np.int64)
    inside_mask[np.asarray(inside_cell, dtype=np.int64)] = 1
    mass_outside_cell = Fraction(int((mass * (1 - inside_mask)).sum()), den)
    thr2 = Fraction(1, 2) - mass_outside_cell
    fam = np.asarray(family_member, dtype=np.int64)
    nb_bits = np.unpackbits(neighbor_rows[fam].view(np.uint8), axis=1, bitorder="little")[:, :nx].astype(np.int64)
    in_nb = nb_bits @ mass
    in_nb_in_cell = nb_bits @ (mass * inside_mask)
    qualifying = []
    for fi, rv in enumerate(fam):
        not_nb_mass = Fraction(den - int(in_nb[fi]), den)
        if not_nb_mass >= thr1 and Fraction(int(in_nb_in_cell[fi]), den) >= thr2:
            qualifying.append(int(rv))
    bound = Fraction(right_total, 6) / (1 << level)
    return {
        "qualifying": qualifying,
        "count": len(qualifying),
        "bound": bound,
        "count_ok": Fraction(len(qualifying)) >= bound,
        "thresholds": (thr1, thr2),
    }
