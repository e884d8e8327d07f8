"""Growth-function hierarchy and parameter schedules.

The tower hierarchy: level 1 is plain exponentiation 2^x, and level k+1 at
argument n is the n-fold self-composition of level k started from 1 (tower,
then iterated-tower, and so on).  Values explode immediately, so evaluation
is exact below a configurable magnitude cutoff and returns a symbolic tower
descriptor beyond it.

A schedule bundles the level functions used by the layered constructions:
the part-count function t, its divisor function e, the index maps A_k and
A_k*, the composed depth m_k, and the per-uniformity tolerance
delta(k) = 2^(-8^k).  Strict schedules follow the full-scale recurrences
(t(1) = 2^200, e(i) = 2^(i+10), A_k(1) = 2^(2^(3k+2))) and are essentially
never materializable; desk schedules supply small explicit tables that keep
the recurrence shapes and declare which strict identities they violate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

DEFAULT_CUTOFF_BITS = 1 << 20


@dataclass(frozen=True)
class TowerDescriptor:
    """Symbolic stand-in for a value too large to materialize."""

    expr: str

    def __repr__(self):
        return f"<tower {self.expr}>"


def _exp2(x, cutoff_bits: int):
    if isinstance(x, TowerDescriptor):
        return TowerDescriptor(f"2^({x.expr})")
    if x > cutoff_bits:
        if x.bit_length() > 64:
            return TowerDescriptor(f"2^(an integer of {x.bit_length()} bits)")
        return TowerDescriptor(f"2^{x}")
    return 1 << x


def ackermann(k: int, n: int, cutoff_bits: int = DEFAULT_CUTOFF_BITS):
    """Level-k hierarchy value at n; exact int below the cutoff, a
    TowerDescriptor beyond it."""
    if k < 1 or n < 0:
        raise ValueError("need level >= 1 and argument >= 0")
    if k == 1:
        return _exp2(n, cutoff_bits)
    v = 1
    for step in range(n):
        if isinstance(v, TowerDescriptor):
            return TowerDescriptor(f"ack_{k-1}({v.expr})^(x{n - step})")
        v = ackermann(k - 1, v, cutoff_bits)
    return v


def delta_level(k: int) -> Fraction:
    """Per-uniformity tolerance 2^(-8^k), exact."""
    if k < 1:
        raise ValueError("uniformity starts at 1")
    return Fraction(1, 1 << (8**k))


class StrictSchedule:
    """Full-scale recurrences; values saturate to descriptors quickly."""

    def __init__(self, cutoff_bits: int = DEFAULT_CUTOFF_BITS):
        self.cutoff_bits = cutoff_bits
        self.kind = "strict"

    def e(self, i: int) -> int:
        return 1 << (i + 10)

    def t(self, i: int):
        if i < 1:
            raise ValueError("t starts at level 1")
        v = 1 << 200
        for j in range(1, i):
            if isinstance(v, TowerDescriptor):
                return TowerDescriptor(f"2^(({v.expr})/2^{j + 10})")
            exponent = v // self.e(j)
            v = _exp2(exponent, self.cutoff_bits)
        return v

    def a(self, k: int, i: int):
        if k == 2:
            return i
        if i == 1:
            return _exp2(1 << (3 * k + 2), self.cutoff_bits)
        prev = self.a_star(k, i - 1)
        if isinstance(prev, TowerDescriptor):
            return TowerDescriptor(f"a_{k-1}({prev.expr})")
        return self.a(k - 1, prev)

    def a_star(self, k: int, i: int):
        ak = self.a(k, i)
        if isinstance(ak, TowerDescriptor):
            return TowerDescriptor(f"t({ak.expr})/2^{i + 10}")
        tv = self.t(ak) if not isinstance(ak, TowerDescriptor) else ak
        if isinstance(tv, TowerDescriptor):
            return TowerDescriptor(f"({tv.expr})/2^{i + 10}")
        q, r = divmod(tv, self.e(i))
        if r:
            raise ValueError("strict divisor must divide the part count")
        return q

    def m(self, k: int, s: int):
        v = s
        for kk in range(k, 2, -1):
            v = self.a_star(kk, v) if not isinstance(v, TowerDescriptor) else TowerDescriptor(f"a*_{kk}({v.expr})")
        if isinstance(v, TowerDescriptor):
            return TowerDescriptor(f"a*_2({v.expr})")
        return self.a_star(2, v)

    def delta(self, k: int) -> Fraction:
        return delta_level(k)


@dataclass
class DeskSchedule:
    """Small explicit tables preserving the recurrence shapes.

    t_values[i-1] = t(i); a_maps[k][j-1] = A_k(j); a_star_maps likewise.
    ``violations`` declares which strict identities the tables break (for
    example "a-star-identity" when A_k*(j) != t(A_k(j))/e(j)).
    """

    t_values: tuple
    a_maps: dict
    a_star_maps: dict
    delta_overrides: dict = field(default_factory=dict)
    violations: tuple = ()
    kind: str = "desk"

    def __post_init__(self):
        self.t_values = tuple(int(x) for x in self.t_values)
        for i, tv in enumerate(self.t_values):
            if tv & (tv - 1):
                raise ValueError("part counts must be powers of 2")
            if i and tv < self.t_values[i - 1]:
                raise ValueError("part counts must be monotone")

    def t(self, i: int) -> int:
        if not (1 <= i <= len(self.t_values)):
            raise ValueError(f"t({i}) outside the desk table")
        return self.t_values[i - 1]

    def e(self, i: int) -> int:
        """Divisor reproducing t(i+1) = 2^(t(i)/e(i)); needs both levels."""
        num = self.t(i)
        log_next = self.t(i + 1).bit_length() - 1
        if log_next == 0 or num % log_next:
            raise ValueError(f"no integer divisor links levels {i} and {i+1}")
        return num // log_next

    def a(self, k: int, j: int) -> int:
        return int(self.a_maps[k][j - 1])

    def a_star(self, k: int, j: int) -> int:
        return int(self.a_star_maps[k][j - 1])

    def m(self, k: int, s: int) -> int:
        """Chain depth the recursion actually consumes."""
        if k == 2:
            return s + 1
        return self.m(k - 1, self.a_star(k, s))

    def delta(self, k: int) -> Fraction:
        if k in self.delta_overrides:
            return Fraction(self.delta_overrides[k])
        return delta_level(k)

    def to_json(self) -> dict:
        return {
            "kind": "desk",
            "t_values": list(self.t_values),
            "a_maps": {str(k): list(v) for k, v in self.a_maps.items()},
            "a_star_maps": {str(k): list(v) for k, v in self.a_star_maps.items()},
            "delta_overrides": {str(k): str(v) for k, v in self.delta_overrides.items()},
            "violations": list(self.violations),
        }

    @staticmethod
    def from_json(d: dict) -> "DeskSchedule":
        return DeskSchedule(
            t_values=tuple(d["t_values"]),
            a_maps={int(k): tuple(v) for k, v in d["a_maps"].items()},
            a_star_maps={int(k): tuple(v) for k, v in d["a_star_maps"].items()},
            delta_overrides={int(k): Fraction(v) for k, v in d.get("delta_overrides", {}).items()},
            violations=tuple(d.get("violations", ())),
        )


def desk_schedule_k3(s: int = 2) -> DeskSchedule:
    """The standing small schedule for 3-uniform desk builds at depth 2:
    t = (2, 4, 16), index maps A_3 = A_3* = (1, 2)."""
    if s != 2:
        raise ValueError("the standing desk schedule is tabulated for depth 2")
    return DeskSchedule(
        t_values=(2, 4, 16),
        a_maps={3: (1, 2)},
        a_star_maps={3: (1, 2)},
        violations=("t-base", "e-schedule", "a-base", "a-star-identity"),
    )


def schedule_eval(sched, which: str, *args):
    """Uniform accessor: which in t, e, f*, a, a*, m, delta."""
    table = {
        "t": lambda: sched.t(*args),
        "e": lambda: sched.e(*args),
        "a": lambda: sched.a(*args),
        "a*": lambda: sched.a_star(*args),
        "f*": lambda: sched.a_star(*args),
        "m": lambda: sched.m(*args),
        "delta": lambda: sched.delta(*args),
    }
    if which not in table:
        raise ValueError(f"unknown schedule function {which!r}")
    return table[which]()
