"""Spacetime cubic lattice of the x+y circuit, its boundary classes and the
projected qubit layout.

All half-integer positions are stored as doubled integers.  A cell is a
triple ``(X, Y, Z) = 2*(x, y, z)``; the parity pattern of the triple fixes
its rank and orientation (vertices are all even, cubes all odd).  Time is
``t = x + y``, so the doubled time of a cell is ``H = X + Y``; the spatial
coordinate along the squeezed lattice is ``x2 = Y - X`` (twice x-bar).

One circuit period spans ``H -> H + 4``.  Even ``H`` hosts the measurement
layers, odd ``H`` the CX layers.
"""

from __future__ import annotations

import dataclasses
import enum
import functools
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple


class GeometryError(ValueError):
    """Raised for invalid geometry specifications or coordinates."""


class Kind(str, enum.Enum):
    TORUS = "torus"
    RECTANGLE = "rectangle"
    SURGERY = "surgery"


class Rank(enum.IntEnum):
    VERTEX = 0
    EDGE = 1
    FACE = 2
    CUBE = 3


class BoundaryClass(str, enum.Enum):
    BULK = "bulk"
    SMOOTH = "smooth"
    ROUGH = "rough"
    CORNER = "corner"
    REMOVED = "removed"
    STATE_INITIAL = "state_initial"
    STATE_FINAL = "state_final"


GREEN = "g"
PURPLE = "p"


@dataclasses.dataclass(frozen=True)
class GeometrySpec:
    """Experiment geometry.

    For ``Kind.SURGERY`` only ``l``, ``t0`` and ``t1`` are free; the merged
    block has ``l1 = 2l + 1`` unit cells along z and ``l2 = l`` along x-bar.
    ``t0`` and ``t1`` are measured in periods.
    """

    kind: Kind
    l1: int = 0
    l2: int = 0
    rounds: int = 1
    l: Optional[int] = None
    t0: Optional[int] = None
    t1: Optional[int] = None

    @classmethod
    def torus(cls, l1: int, l2: int, rounds: int) -> "GeometrySpec":
        return cls(Kind.TORUS, l1, l2, rounds)

    @classmethod
    def rectangle(cls, l1: int, l2: int, rounds: int) -> "GeometrySpec":
        return cls(Kind.RECTANGLE, l1, l2, rounds)

    @classmethod
    def surgery(cls, l: int, t0: int, t1: int, rounds: int) -> "GeometrySpec":
        return cls(Kind.SURGERY, 2 * l + 1, l, rounds, l, t0, t1)

    def validate(self) -> None:
        kind = Kind(self.kind)
        if self.rounds < 0:
            raise GeometryError("rounds must be non-negative")
        if kind is Kind.TORUS:
            if self.l1 < 2 or self.l2 < 2:
                raise GeometryError("torus requires l1, l2 >= 2")
            if self.l2 % 2:
                # The identification (x, y) ~ (x - l2/2, y + l2/2) only maps
                # cells to cells of the same type when l2 is even.
                raise GeometryError("torus requires an even l2")
        elif kind is Kind.RECTANGLE:
            if self.l1 < 1 or self.l2 < 2:
                raise GeometryError("rectangle requires l1 >= 1 and l2 >= 2")
        else:
            if self.l is None or self.t0 is None or self.t1 is None:
                raise GeometryError("surgery requires l, t0 and t1")
            if self.l < 2:
                raise GeometryError("surgery requires l >= 2")
            if self.l1 != 2 * self.l + 1 or self.l2 != self.l:
                raise GeometryError("surgery block must be l x (2l+1)")
            if self.t1 - self.t0 < 1:
                raise GeometryError("merge window requires t1 - t0 >= 1")
            if self.t0 < 1 or self.t1 > self.rounds - 1:
                raise GeometryError(
                    "merge window outside time extent: need 1 <= t0 < t1 <= rounds - 1")

    @property
    def h_final(self) -> int:
        """Doubled time of the final readout layer."""
        return 4 * self.rounds


@functools.total_ordering
@dataclasses.dataclass(frozen=True)
class Cell:
    """A cell of the cubic lattice in doubled coordinates."""

    X: int
    Y: int
    Z: int

    @property
    def parity(self) -> Tuple[int, int, int]:
        return (self.X & 1, self.Y & 1, self.Z & 1)

    @property
    def rank(self) -> Rank:
        return Rank(sum(self.parity))

    @property
    def orientation(self) -> str:
        px, py, pz = self.parity
        r = px + py + pz
        if r == 1:
            return "X" if px else ("Y" if py else "Z")
        if r == 2:
            return "YZ" if not px else ("XZ" if not py else "XY")
        return ""

    @property
    def h2(self) -> int:
        return self.X + self.Y

    @property
    def x2(self) -> int:
        return self.Y - self.X

    @classmethod
    def from_htz(cls, h2: int, x2: int, z2: int) -> "Cell":
        if (h2 - x2) & 1:
            raise GeometryError("h2 and x2 must have equal parity")
        return cls((h2 - x2) // 2, (h2 + x2) // 2, z2)

    def key(self) -> Tuple[int, int, int]:
        # Canonical order: time, then z, then x-bar.
        return (self.h2, self.Z, self.x2)

    def __lt__(self, other: "Cell") -> bool:
        return self.key() < other.key()

    def shifted(self, dx: int, dy: int, dz: int) -> "Cell":
        return Cell(self.X + dx, self.Y + dy, self.Z + dz)

    def boundary(self) -> List["Cell"]:
        """Cells of one lower rank incident to this one (unwrapped)."""
        out = []
        for axis, odd in enumerate(self.parity):
            if odd:
                for s in (-1, 1):
                    d = [0, 0, 0]
                    d[axis] = s
                    out.append(self.shifted(*d))
        return out

    def coboundary(self) -> List["Cell"]:
        """Cells of one higher rank incident to this one (unwrapped)."""
        out = []
        for axis, odd in enumerate(self.parity):
            if not odd:
                for s in (-1, 1):
                    d = [0, 0, 0]
                    d[axis] = s
                    out.append(self.shifted(*d))
        return out

    def __repr__(self) -> str:
        return f"Cell({self.X},{self.Y},{self.Z})"


@functools.total_ordering
@dataclasses.dataclass(frozen=True)
class QubitId:
    """Qubit of the projected lattice: species and doubled (z, x-bar)."""

    species: str
    z2: int
    x2: int

    def __post_init__(self):
        if self.species not in (GREEN, PURPLE):
            raise GeometryError(f"unknown species {self.species!r}")
        if not self.x2 & 1:
            raise GeometryError("qubits sit at odd doubled x-bar")
        if (self.z2 & 1) != (self.species == PURPLE):
            raise GeometryError("green qubits have even z2, purple odd z2")

    def key(self) -> Tuple[int, int, str]:
        return (self.z2, self.x2, self.species)

    def __lt__(self, other: "QubitId") -> bool:
        return self.key() < other.key()

    def __str__(self) -> str:
        return f"{self.species}({self.z2},{self.x2})"

    @property
    def is_green(self) -> bool:
        return self.species == GREEN


def worldline_position(q: QubitId, h2: int) -> Tuple[int, int, int]:
    """(h2, x2, z2) of the tensor that qubit ``q`` traverses at time ``h2``.

    Green worldlines alternate x/y edges (odd h2) and xy faces (even h2);
    purple worldlines alternate xz/yz faces (odd h2) and z edges (even h2).
    On even h2 the tensor sits at the neighbouring x-bar position whose
    parity is fixed by the layer: xy faces where x2/2 = h2/2 + 1 (mod 2),
    vertices where x2/2 = h2/2 (mod 2).
    """
    if h2 & 1:
        return (h2, q.x2, q.z2)
    want = (h2 // 2 + (1 if q.is_green else 0)) & 1
    lo = q.x2 - 1
    x2 = lo if ((lo // 2) & 1) == want else q.x2 + 1
    return (h2, x2, q.z2)


def raw_worldline_cell(q: QubitId, h2: int) -> Cell:
    return Cell.from_htz(*worldline_position(q, h2))


class SpacetimeLattice:
    """The classified cubic lattice of one experiment geometry.

    The lattice covers doubled times ``-2 .. 4*rounds``: cells with negative
    time belong to the initial state boundary and cells at ``4*rounds`` to
    the final one.
    """

    def __init__(self, spec: GeometrySpec):
        spec.validate()
        self.spec = spec
        self.kind = Kind(spec.kind)
        self.l1 = spec.l1
        self.l2 = spec.l2
        self.rounds = spec.rounds
        self.h_min = -2
        self.h_max = spec.h_final
        self._classes: Dict[Cell, BoundaryClass] = {}
        for c in self._enumerate_box():
            self._classes[c] = self._classify(c)

    # -- coordinates -------------------------------------------------------
    @property
    def periodic(self) -> bool:
        return self.kind is Kind.TORUS

    def canonical(self, c: Cell) -> Cell:
        """Wrap a cell into the fundamental domain (torus only)."""
        if not self.periodic:
            return c
        x2 = c.x2 % (2 * self.l2)
        z2 = c.Z % (2 * self.l1)
        return Cell.from_htz(c.h2, x2, z2)

    def in_box(self, c: Cell) -> bool:
        if not (self.h_min <= c.h2 <= self.h_max):
            return False
        if self.periodic:
            return True
        return 0 <= c.x2 <= 2 * self.l2 and 0 <= c.Z <= 2 * self.l1

    def _enumerate_box(self) -> Iterator[Cell]:
        if self.periodic:
            x2s = range(0, 2 * self.l2)
            z2s = range(0, 2 * self.l1)
        else:
            x2s = range(0, 2 * self.l2 + 1)
            z2s = range(0, 2 * self.l1 + 1)
        for h2 in range(self.h_min, self.h_max + 1):
            for z2 in z2s:
                for x2 in x2s:
                    # (h2, x2, z2) with h2 = x2 (mod 2) is in bijection
                    # with cells.
                    if not (h2 - x2) & 1:
                        yield Cell.from_htz(h2, x2, z2)

    # -- surgery helpers ---------------------------------------------------
    @property
    def bridge_z2(self) -> Optional[int]:
        if self.kind is not Kind.SURGERY:
            return None
        return 2 * self.spec.l + 1

    def bridge_cube_kept(self, c: Cell) -> bool:
        t0, t1 = self.spec.t0, self.spec.t1
        return 4 * t0 <= c.h2 <= 4 * t1

    def _removed(self, c: Cell) -> bool:
        if self.kind is not Kind.SURGERY or c.Z != self.bridge_z2:
            return False
        if c.rank is Rank.CUBE:
            return not self.bridge_cube_kept(c)
        return not any(self.bridge_cube_kept(k) for k in self._cubes_around(c))

    def _cubes_around(self, c: Cell) -> List[Cell]:
        """Cubes whose closure contains ``c`` (unwrapped)."""
        px, py, pz = c.parity
        out = []
        for dx in ((0,) if px else (-1, 1)):
            for dy in ((0,) if py else (-1, 1)):
                for dz in ((0,) if pz else (-1, 1)):
                    out.append(c.shifted(dx, dy, dz))
        return out

    def _touches_removed(self, c: Cell) -> bool:
        if self.kind is not Kind.SURGERY:
            return False
        return any(k.Z == self.bridge_z2 and not self.bridge_cube_kept(k)
                   for k in self._cubes_around(c))

    # -- classification ----------------------------------------------------
    def _classify(self, c: Cell) -> BoundaryClass:
        if self._removed(c):
            return BoundaryClass.REMOVED
        if c.h2 < 0:
            return BoundaryClass.STATE_INITIAL
        if c.h2 >= self.h_max:
            return BoundaryClass.STATE_FINAL
        if self.periodic:
            return BoundaryClass.BULK
        rough = c.x2 in (0, 2 * self.l2)
        smooth = c.Z in (0, 2 * self.l1) or self._touches_removed(c)
        if rough and smooth:
            return BoundaryClass.CORNER
        if smooth and c.rank is Rank.EDGE and c.Z & 1 == 0 and c.x2 in (1, 2 * self.l2 - 1):
            # x/y edges running next to the rough sheet inside a smooth
            # sheet form the zigzag corner chains.
            return BoundaryClass.CORNER
        if rough:
            return BoundaryClass.ROUGH
        if smooth:
            return BoundaryClass.SMOOTH
        return BoundaryClass.BULK

    def classify(self, c: Cell) -> BoundaryClass:
        key = self.canonical(c)
        try:
            return self._classes[key]
        except KeyError:
            raise GeometryError(f"cell {c} outside the lattice") from None

    def __contains__(self, c: Cell) -> bool:
        return self.canonical(c) in self._classes

    def cells(self, rank: Optional[Rank] = None,
              include_removed: bool = False) -> List[Cell]:
        out = [c for c, k in self._classes.items()
               if (rank is None or c.rank is rank)
               and (include_removed or k is not BoundaryClass.REMOVED)]
        out.sort()
        return out

    def count(self, rank: Rank, cls: BoundaryClass) -> int:
        return sum(1 for c, k in self._classes.items() if c.rank is rank and k is cls)

    def boundary(self, c: Cell) -> List[Cell]:
        """Incident lower cells that are present (not removed, in range)."""
        out = []
        for b in c.boundary():
            b = self.canonical(b)
            k = self._classes.get(b)
            if k is not None and k is not BoundaryClass.REMOVED:
                out.append(b)
        return out

    def coboundary(self, c: Cell) -> List[Cell]:
        out = []
        for b in c.coboundary():
            b = self.canonical(b)
            k = self._classes.get(b)
            if k is not None and k is not BoundaryClass.REMOVED:
                out.append(b)
        return out

    # -- qubits ------------------------------------------------------------
    def qubits(self) -> List[QubitId]:
        out = []
        if self.periodic:
            for z2 in range(0, 2 * self.l1):
                for x2 in range(1, 2 * self.l2, 2):
                    out.append(QubitId(PURPLE if z2 & 1 else GREEN, z2, x2))
        else:
            for z2 in range(0, 2 * self.l1 + 1):
                for x2 in range(1, 2 * self.l2, 2):
                    out.append(QubitId(PURPLE if z2 & 1 else GREEN, z2, x2))
        out.sort()
        return out

    def is_bridge(self, q: QubitId) -> bool:
        return self.kind is Kind.SURGERY and q.z2 == self.bridge_z2

    def qubit_active(self, q: QubitId, h2: int) -> bool:
        """Whether the qubit carries a worldline tensor at time ``h2``."""
        if not self.is_bridge(q):
            return True
        t0, t1 = self.spec.t0, self.spec.t1
        return 4 * t0 - 2 <= h2 <= 4 * t1 + 2

    def worldline_cell(self, q: QubitId, h2: int) -> Cell:
        return self.canonical(raw_worldline_cell(q, h2))

    def wrap_x2(self, x2: int) -> int:
        return x2 % (2 * self.l2) if self.periodic else x2

    def wrap_z2(self, z2: int) -> int:
        return z2 % (2 * self.l1) if self.periodic else z2

    def qubit_at(self, species: str, z2: int, x2: int) -> Optional[QubitId]:
        z2, x2 = self.wrap_z2(z2), self.wrap_x2(x2)
        if self.periodic:
            ok = 0 <= z2 < 2 * self.l1 and 0 < x2 < 2 * self.l2
        else:
            ok = 0 <= z2 <= 2 * self.l1 and 0 < x2 < 2 * self.l2
        if not ok or (z2 & 1) != (species == PURPLE) or not x2 & 1:
            return None
        return QubitId(species, z2, x2)


def build_spacetime_lattice(spec: GeometrySpec) -> SpacetimeLattice:
    return SpacetimeLattice(spec)


def classify_cell(lat: SpacetimeLattice, c: Cell) -> BoundaryClass:
    return lat.classify(c)


@dataclasses.dataclass(frozen=True)
class SpatialLayout:
    """Qubits of the squeezed square lattice with stable indexing."""

    lattice: SpacetimeLattice
    qubits: Tuple[QubitId, ...]
    index: Dict[QubitId, int]
    adjacency: Dict[QubitId, Tuple[QubitId, ...]]

    @property
    def n(self) -> int:
        return len(self.qubits)

    def greens(self) -> List[QubitId]:
        return [q for q in self.qubits if q.is_green]

    def purples(self) -> List[QubitId]:
        return [q for q in self.qubits if not q.is_green]

    def adjacent(self, a: QubitId, b: QubitId) -> bool:
        return b in self.adjacency.get(a, ())

    def unused(self, h2: int) -> List[QubitId]:
        return [q for q in self.qubits if not self.lattice.qubit_active(q, h2)]


def project_spatial(lat: SpacetimeLattice) -> SpatialLayout:
    qubits = tuple(lat.qubits())
    index = {q: i for i, q in enumerate(qubits)}
    adj: Dict[QubitId, set] = {q: set() for q in qubits}
    for q in qubits:
        # Same-species neighbours along x-bar (XX / ZZ pairs) and
        # green/purple neighbours along z (CX pairs).
        for dz, dx, sp in ((0, 2, q.species), (0, -2, q.species)):
            o = lat.qubit_at(sp, q.z2 + dz, q.x2 + dx)
            if o is not None and o != q:
                adj[q].add(o)
        for dz in (1, -1):
            sp = PURPLE if q.is_green else GREEN
            o = lat.qubit_at(sp, q.z2 + dz, q.x2)
            if o is not None:
                adj[q].add(o)
    adjacency = {q: tuple(sorted(v)) for q, v in adj.items()}
    return SpatialLayout(lat, qubits, index, adjacency)
