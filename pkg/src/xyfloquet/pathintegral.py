"""Brute-force evaluation of the discrete toric-code path integral.

The path integral sums over Z2 variables ``A`` on edges.  Every face
carries the constraint that the edges around it add up to ``W_m`` of that
face, and every edge contributes the sign ``(-1)^(A(e) W_e(e))``.  Edges on
a state boundary are fixed by the boundary configuration; rough boundary
edges carry no variable.

All constraints are affine over GF(2), so values are computed by Gaussian
elimination: the solution set is a coset of the constraint kernel and the
sign sum over it is either zero or ``+-2^dim``.  The kernel can also be
enumerated explicitly, and a naive enumerator over all edge assignments
serves as a third route on tiny complexes.

Besides generic complexes (cubic boxes and the classified spacetime
lattice), the module builds the operator of one period of a circuit by
cutting the lattice between two time slices; the qubit bonds crossing the
cut become the input and output indices.
"""

from __future__ import annotations

import dataclasses
import itertools
from fractions import Fraction
from typing import Dict, FrozenSet, Hashable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .geometry import BoundaryClass, Cell, Kind, Rank, SpacetimeLattice


class OracleError(ValueError):
    pass


class CapExceeded(OracleError):
    pass


DEFAULT_CAP = 30


@dataclasses.dataclass(frozen=True)
class AnyonConfig:
    """Characteristic sets of the e worldline (edges) and m worldline (faces)."""

    W_e: FrozenSet = frozenset()
    W_m: FrozenSet = frozenset()

    @classmethod
    def of(cls, e: Iterable = (), m: Iterable = ()) -> "AnyonConfig":
        se, sm = set(), set()
        for c in e:
            se ^= {c}
        for c in m:
            sm ^= {c}
        return cls(frozenset(se), frozenset(sm))

    @classmethod
    def from_segments(cls, segs) -> "AnyonConfig":
        return cls(frozenset(segs.e), frozenset(segs.m))

    def __xor__(self, other: "AnyonConfig") -> "AnyonConfig":
        return AnyonConfig(self.W_e ^ other.W_e, self.W_m ^ other.W_m)


# --------------------------------------------------------------------------
# Complexes
# --------------------------------------------------------------------------

class Complex:
    """Edges and faces with their incidence.

    ``face_edges[i]`` lists the edges of face ``i`` with multiplicity
    reduced mod 2.  ``fixed`` edges belong to a state boundary.  Vertices
    and cubes are only used for endpoint parities: an endpoint that is
    missing or listed in ``absorbing`` may terminate a worldline.
    """

    def __init__(self, edges: Sequence[Hashable], faces: Sequence[Hashable],
                 face_edges: Sequence[Iterable[Hashable]], fixed: Iterable[Hashable] = (),
                 edge_vertices: Optional[Dict[Hashable, Sequence[Hashable]]] = None,
                 face_cubes: Optional[Dict[Hashable, Sequence[Hashable]]] = None,
                 absorbing: Iterable[Hashable] = ()):
        self.edges = list(edges)
        self.faces = list(faces)
        self.edge_index = {e: i for i, e in enumerate(self.edges)}
        self.face_index = {f: i for i, f in enumerate(self.faces)}
        self.face_edges: List[Tuple[Hashable, ...]] = []
        for fe in face_edges:
            s: set = set()
            for e in fe:
                if e in self.edge_index:
                    s ^= {e}
            self.face_edges.append(tuple(sorted(s, key=self.edge_index.__getitem__)))
        fixed = set(fixed)
        self.fixed = [e for e in self.edges if e in fixed]
        self.free = [e for e in self.edges if e not in fixed]
        self.edge_vertices = edge_vertices or {}
        self.face_cubes = face_cubes or {}
        self.absorbing = frozenset(absorbing)

    @property
    def num_free(self) -> int:
        return len(self.free)

    def dual(self) -> "Complex":
        """Swap the roles of edges and faces (closed complexes only)."""
        if self.fixed:
            raise OracleError("dual of a complex with state boundaries is not supported")
        cob: Dict[Hashable, List[Hashable]] = {e: [] for e in self.edges}
        for f, fe in zip(self.faces, self.face_edges):
            for e in fe:
                cob[e].append(f)
        return Complex(self.faces, self.edges, [cob[e] for e in self.edges],
                       edge_vertices=self.face_cubes, face_cubes=self.edge_vertices,
                       absorbing=self.absorbing)


def _axis_range(n: int, bc) -> Tuple[range, bool, Tuple[str, str]]:
    if bc == "periodic":
        return range(2 * n), True, ("periodic", "periodic")
    lo, hi = (bc, bc) if isinstance(bc, str) else bc
    for b in (lo, hi):
        if b not in ("smooth", "rough", "state"):
            raise OracleError(f"unknown boundary condition {b!r}")
    start = 1 if lo == "rough" else 0
    stop = 2 * n - 1 if hi == "rough" else 2 * n
    return range(start, stop + 1), False, (lo, hi)


def box_complex(shape: Sequence[int], bc: Sequence = ("periodic",) * 3) -> Complex:
    """Cubic box of ``shape`` unit cells in doubled integer coordinates.

    Each axis is ``"periodic"`` or a boundary type (or a ``(low, high)``
    pair) among ``smooth``, ``rough`` and ``state``.  A rough end removes the
    cells lying in its plane, a state end fixes the edges lying in it.
    """
    if len(shape) != 3 or len(bc) != 3:
        raise OracleError("box_complex needs three axes")
    axes = [_axis_range(n, b) for n, b in zip(shape, bc)]
    mods = [2 * n if per else None for n, (_, per, _) in zip(shape, axes)]

    def wrap(k):
        return tuple(v % m if m else v for v, m in zip(k, mods))

    cells = set(itertools.product(*(r for r, _, _ in axes)))

    def rank(k):
        return sum(v & 1 for v in k)

    def faces_of(k):
        out = []
        for ax in range(3):
            if k[ax] & 1:
                for s in (-1, 1):
                    j = list(k)
                    j[ax] += s
                    out.append(wrap(j))
        return out

    def cofaces_of(k):
        out = []
        for ax in range(3):
            if not k[ax] & 1:
                for s in (-1, 1):
                    j = list(k)
                    j[ax] += s
                    out.append(wrap(j))
        return out

    def in_state_plane(k):
        for ax, (r, per, ends) in enumerate(axes):
            if per or k[ax] & 1:
                continue
            if (ends[0] == "state" and k[ax] == r.start) or (ends[1] == "state" and k[ax] == r.stop - 1):
                return True
        return False

    ordered = sorted(cells)
    edges = [k for k in ordered if rank(k) == 1]
    faces = [k for k in ordered if rank(k) == 2]
    fixed = [k for k in edges if in_state_plane(k)]
    face_edges = [[e for e in faces_of(f) if e in cells] for f in faces]
    edge_vertices = {e: [v for v in faces_of(e) if v in cells] for e in edges}
    face_cubes = {f: [c for c in cofaces_of(f) if c in cells] for f in faces}
    absorbing = [k for k in ordered if rank(k) == 0 and in_state_plane(k)]
    cx = Complex(edges, faces, face_edges, fixed, edge_vertices, face_cubes, absorbing)
    cx.shape = tuple(shape)
    cx.bc = tuple(ends for _, _, ends in axes)
    return cx


_E_REAL = (BoundaryClass.BULK, BoundaryClass.SMOOTH)
_M_REAL = (BoundaryClass.BULK, BoundaryClass.ROUGH)


def lattice_complex(lat: SpacetimeLattice) -> Complex:
    """The complex of a classified spacetime lattice.

    Variables live on edges that some qubit worldline passes through; in
    particular edges in a rough sheet carry none.  Edges with negative time
    or at the final time are fixed by the state boundaries.  Vertices off
    the bulk/smooth classes and cubes off the bulk/rough classes absorb
    worldline ends.
    """
    cache = lat.__dict__.setdefault("_pi_complex", None)
    if cache is not None:
        return cache
    wl: set = set()
    for q in lat.qubits():
        for h2 in range(lat.h_min, lat.h_max + 1):
            if lat.qubit_active(q, h2):
                c = lat.worldline_cell(q, h2)
                if c in lat and lat.classify(c) is not BoundaryClass.REMOVED:
                    wl.add(c)
    edges = sorted(c for c in wl if c.rank is Rank.EDGE)
    faces = sorted(c for c in wl if c.rank is Rank.FACE)
    eset = set(edges)
    face_edges = [[lat.canonical(e) for e in f.boundary() if lat.canonical(e) in eset]
                  for f in faces]
    fixed = [e for e in edges if e.h2 < 0 or e.h2 >= lat.h_max]
    absorbing = set()
    edge_vertices = {}
    for e in edges:
        vs = []
        for v in e.boundary():
            v = lat.canonical(v)
            if v not in lat or lat.classify(v) not in _E_REAL:
                absorbing.add(v)
            vs.append(v)
        edge_vertices[e] = vs
    face_cubes = {}
    for f in faces:
        ks = []
        for k in f.coboundary():
            k = lat.canonical(k)
            if k not in lat or lat.classify(k) not in _M_REAL:
                absorbing.add(k)
            ks.append(k)
        face_cubes[f] = ks
    cx = Complex(edges, faces, face_edges, fixed, edge_vertices, face_cubes, absorbing)
    lat.__dict__["_pi_complex"] = cx
    return cx


@dataclasses.dataclass
class PathIntegralInstance:
    complex: Complex
    anyons: AnyonConfig = AnyonConfig()
    fixed: Dict[Hashable, int] = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        extra = set(self.fixed) - set(self.complex.fixed)
        if extra:
            raise OracleError(f"fixed values given for non-boundary edges {sorted(extra)[:3]}")


def instance_for_lattice(lat: SpacetimeLattice, anyons: AnyonConfig = AnyonConfig(),
                         fixed: Optional[Dict[Hashable, int]] = None) -> PathIntegralInstance:
    return PathIntegralInstance(lattice_complex(lat), anyons, dict(fixed or {}))


# --------------------------------------------------------------------------
# Affine GF(2) systems
# --------------------------------------------------------------------------

def _parity(v: int) -> int:
    return bin(v).count("1") & 1


class AffineSystem:
    """Equations ``var_mask . A + par_mask . x = const`` and the sign
    ``(-1)^(w_var . A + w_par . x + w_const)``, summed over ``A``.

    ``x`` are parameter bits (boundary values); the result is a function of
    ``x`` that is evaluated for many ``x`` at once.
    """

    def __init__(self, nvars: int, nparams: int):
        self.nvars = nvars
        self.nparams = nparams
        self.rows: List[Tuple[int, int, int]] = []
        self.w_var = 0
        self.w_par = 0
        self.w_const = 0
        self._solved = None

    def add(self, var_mask: int, par_mask: int, const: int) -> None:
        self.rows.append((var_mask, par_mask, const & 1))
        self._solved = None

    def solve(self):
        """Reduced row echelon form.

        Returns (pivot rows, conditions, kernel basis) where pivot rows are
        ``(pivot, var_mask, par_mask, const)`` and conditions are the
        ``(par_mask, const)`` left over from dependent equations.
        """
        if self._solved is not None:
            return self._solved
        piv: List[List[int]] = []  # [pivot, var, par, const]
        cond: List[Tuple[int, int]] = []
        for var, par, const in self.rows:
            for p, v2, p2, c2 in piv:
                if var >> p & 1:
                    var ^= v2
                    par ^= p2
                    const ^= c2
            if var == 0:
                if par or const:
                    cond.append((par, const))
                continue
            p = (var & -var).bit_length() - 1
            for row in piv:
                if row[1] >> p & 1:
                    row[1] ^= var
                    row[2] ^= par
                    row[3] ^= const
            piv.append([p, var, par, const])
        pivots = {row[0] for row in piv}
        kernel = []
        for j in range(self.nvars):
            if j in pivots:
                continue
            k = 1 << j
            for p, v, _, _ in piv:
                if v >> j & 1:
                    k |= 1 << p
            kernel.append(k)
        self._solved = (piv, cond, kernel)
        return self._solved

    @property
    def kernel_dim(self) -> int:
        return len(self.solve()[2])

    def closed_form(self):
        """(scale, conditions, sign mask, sign const).

        The value at ``x`` is ``scale * (-1)^(mask . x + const)`` when every
        condition holds and 0 otherwise; ``scale`` is 0 when the sign is not
        constant on the kernel.
        """
        piv, cond, kernel = self.solve()
        if any(_parity(self.w_var & k) for k in kernel):
            return 0, cond, 0, 0
        mask, const = self.w_par, self.w_const
        for p, _, par, c in piv:
            if self.w_var >> p & 1:
                mask ^= par
                const ^= c
        return 1 << len(kernel), cond, mask, const

    def value(self, x: int = 0) -> int:
        scale, cond, mask, const = self.closed_form()
        if scale == 0:
            return 0
        for par, c in cond:
            if _parity(par & x) != c:
                return 0
        return -scale if (_parity(mask & x) ^ const) else scale

    def table(self, xs: Optional[np.ndarray] = None) -> np.ndarray:
        """Values for every parameter assignment (or the given ones)."""
        if xs is None:
            if self.nparams > 24:
                raise CapExceeded(f"{self.nparams} boundary bits is too many to tabulate")
            xs = np.arange(1 << self.nparams, dtype=np.uint64)
        xs = np.asarray(xs, dtype=np.uint64)
        scale, cond, mask, const = self.closed_form()
        out = np.zeros(len(xs), dtype=np.int64)
        if scale == 0:
            return out
        ok = np.ones(len(xs), dtype=bool)
        for par, c in cond:
            ok &= (np.bitwise_count(xs & np.uint64(par)) & 1) == c
        sgn = (np.bitwise_count(xs & np.uint64(mask)) & 1) ^ const
        out[ok] = np.where(sgn[ok] == 1, -scale, scale)
        return out

    def enumerate_kernel(self, x: int = 0, cap: int = DEFAULT_CAP) -> int:
        """Value at ``x`` by summing the sign over every kernel element."""
        piv, cond, kernel = self.solve()
        if len(kernel) > cap:
            raise CapExceeded(f"kernel dimension {len(kernel)} exceeds cap {cap}")
        for par, c in cond:
            if _parity(par & x) != c:
                return 0
        a0 = 0
        for p, _, par, c in piv:
            if _parity(par & x) ^ c:
                a0 |= 1 << p
        base = _parity(self.w_par & x) ^ self.w_const
        signs = [_parity(self.w_var & k) for k in kernel]
        s = _parity(self.w_var & a0) ^ base
        total = -1 if s else 1
        # Gray-code walk over the kernel.
        for i in range(1, 1 << len(kernel)):
            j = (i & -i).bit_length() - 1
            s ^= signs[j]
            total += -1 if s else 1
        return total


def _system(inst: PathIntegralInstance) -> Tuple[AffineSystem, int]:
    """System with the fixed edges as parameters, plus the parameter word of
    the instance's fixed assignment."""
    cx = inst.complex
    vi = {e: i for i, e in enumerate(cx.free)}
    pi = {e: i for i, e in enumerate(cx.fixed)}
    sysm = AffineSystem(len(cx.free), len(cx.fixed))
    for f, fe in zip(cx.faces, cx.face_edges):
        var = par = 0
        for e in fe:
            if e in vi:
                var ^= 1 << vi[e]
            else:
                par ^= 1 << pi[e]
        sysm.add(var, par, 1 if f in inst.anyons.W_m else 0)
    for e in inst.anyons.W_e:
        if e in vi:
            sysm.w_var ^= 1 << vi[e]
        elif e in pi:
            sysm.w_par ^= 1 << pi[e]
    x = 0
    for e, b in inst.fixed.items():
        if b & 1:
            x |= 1 << pi[e]
    return sysm, x


def evaluate(inst: PathIntegralInstance, cap: Optional[int] = DEFAULT_CAP,
             method: str = "kernel") -> int:
    """Exact value of the path integral.

    ``method="kernel"`` sums over the explicit constraint kernel (bounded by
    ``cap`` on the kernel dimension); ``"closed"`` uses the orthogonality
    shortcut and has no size limit.  Unassigned fixed edges are 0.
    """
    sysm, x = _system(inst)
    if method == "closed":
        return sysm.value(x)
    if method != "kernel":
        raise OracleError(f"unknown method {method!r}")
    return sysm.enumerate_kernel(x, cap if cap is not None else 1 << 30)


def evaluate_naive(inst: PathIntegralInstance, cap: int = 22) -> int:
    """Direct sum over all assignments of the free edges."""
    cx = inst.complex
    if cx.num_free > cap:
        raise CapExceeded(f"{cx.num_free} free edges exceeds naive cap {cap}")
    vi = {e: i for i, e in enumerate(cx.free)}
    checks = []
    for f, fe in zip(cx.faces, cx.face_edges):
        mask = 0
        rhs = 1 if f in inst.anyons.W_m else 0
        for e in fe:
            if e in vi:
                mask ^= 1 << vi[e]
            else:
                rhs ^= inst.fixed.get(e, 0) & 1
        checks.append((mask, rhs))
    wmask = 0
    wconst = 0
    for e in inst.anyons.W_e:
        if e in vi:
            wmask ^= 1 << vi[e]
        elif e in inst.fixed:
            wconst ^= inst.fixed[e] & 1
    total = 0
    for a in range(1 << cx.num_free):
        if all(_parity(m & a) == r for m, r in checks):
            total += -1 if (_parity(wmask & a) ^ wconst) else 1
    return total


def amplitude_table(cx: Complex, anyons: AnyonConfig = AnyonConfig()) -> np.ndarray:
    """Values for every assignment of the fixed edges.

    Bit ``i`` of the index is the value of ``cx.fixed[i]``.
    """
    sysm, _ = _system(PathIntegralInstance(cx, anyons))
    return sysm.table()


def ground_state_amplitudes(inst: PathIntegralInstance,
                            cap: Optional[int] = DEFAULT_CAP) -> Dict[Tuple[int, ...], int]:
    """Boundary configuration (tuple over ``complex.fixed``) -> value.

    Configurations with value 0 are omitted.
    """
    cx = inst.complex
    if not cx.fixed:
        raise OracleError("instance has no state boundary")
    sysm, _ = _system(PathIntegralInstance(cx, inst.anyons))
    if cap is not None and sysm.kernel_dim > cap:
        raise CapExceeded(f"kernel dimension {sysm.kernel_dim} exceeds cap {cap}")
    vals = sysm.table()
    out = {}
    k = len(cx.fixed)
    for x in np.flatnonzero(vals):
        out[tuple((int(x) >> i) & 1 for i in range(k))] = int(vals[x])
    return out


def duality_factor(cx: Complex) -> Fraction:
    """Ratio between a closed complex's value and its dual's value."""
    return Fraction(2) ** (len(cx.edges) - len(cx.faces))


# --------------------------------------------------------------------------
# Closure, deformations, homology
# --------------------------------------------------------------------------

@dataclasses.dataclass
class ClosureReport:
    odd_vertices: FrozenSet
    odd_cubes: FrozenSet

    @property
    def closed(self) -> bool:
        return not self.odd_vertices and not self.odd_cubes

    def parity(self, node) -> int:
        return int(node in self.odd_vertices or node in self.odd_cubes)


def closure(cx: Complex, anyons: AnyonConfig) -> ClosureReport:
    ev: set = set()
    for e in anyons.W_e:
        for v in cx.edge_vertices.get(e, ()):
            ev ^= {v}
    mc: set = set()
    for f in anyons.W_m:
        for k in cx.face_cubes.get(f, ()):
            mc ^= {k}
    return ClosureReport(frozenset(ev - cx.absorbing), frozenset(mc - cx.absorbing))


def is_closed(anyons: AnyonConfig, lat) -> ClosureReport:
    """Endpoint parities of a configuration on a lattice or complex."""
    cx = lat if isinstance(lat, Complex) else lattice_complex(lat)
    return closure(cx, anyons)


def move_face(cx: Complex, anyons: AnyonConfig, face) -> Tuple[AnyonConfig, int]:
    """Add the boundary of ``face`` to the e worldline.

    Returns the new configuration and the sign relating the two values:
    ``Z(new) = sign * Z(old)``.
    """
    i = cx.face_index[face]
    new = AnyonConfig(anyons.W_e ^ frozenset(cx.face_edges[i]), anyons.W_m)
    return new, -1 if face in anyons.W_m else 1


def move_edge(cx: Complex, anyons: AnyonConfig, edge) -> Tuple[AnyonConfig, int]:
    """Add the faces around a free ``edge`` to the m worldline."""
    if edge in set(cx.fixed):
        raise OracleError("cannot deform across a fixed boundary edge")
    cob = frozenset(f for f, fe in zip(cx.faces, cx.face_edges) if edge in fe)
    new = AnyonConfig(anyons.W_e, anyons.W_m ^ cob)
    return new, -1 if edge in anyons.W_e else 1


@dataclasses.dataclass(frozen=True)
class HomologyLabel:
    kind: str
    m: Tuple[int, ...]
    e: Tuple[int, ...]

    @property
    def name(self) -> str:
        if self.kind == "torus":
            return "B%d%d" % self.m
        if self.kind == "rectangle":
            return "B%d" % self.m
        return "M%d" % self.m

    def __str__(self) -> str:
        return self.name


def _cut_parity(cells: Iterable, pred) -> int:
    return sum(1 for c in cells if pred(c)) & 1


def homology_label(anyons: AnyonConfig, lat: SpacetimeLattice) -> HomologyLabel:
    """Winding parities across cuts pinned at coordinate-zero planes.

    Torus: ``m = (z-bar winding, x-bar winding)`` of the m worldlines, read
    off the xy faces at ``Z=0`` and the vertical faces at ``x2=1``; the e
    pair uses the z edges at ``Z=1`` and the x/y edges at ``x2=1``.
    Rectangle: the m bit counts strings between the two smooth sides, the e
    bit strings between the rough sides.  Surgery: the m bit counts crossings
    of the boundary of the removed bridge region below the merge window.
    """
    rep = is_closed(anyons, lat)
    if not rep.closed:
        raise OracleError("homology label needs a closed configuration")
    W_e = {lat.canonical(c) for c in anyons.W_e}
    W_m = {lat.canonical(c) for c in anyons.W_m}
    mz = _cut_parity(W_m, lambda c: c.orientation == "XY" and c.Z == 0)
    ex = _cut_parity(W_e, lambda c: c.orientation in ("X", "Y") and c.x2 == 1)
    if lat.kind is Kind.TORUS:
        mx = _cut_parity(W_m, lambda c: c.orientation in ("XZ", "YZ") and c.x2 == 1)
        ez = _cut_parity(W_e, lambda c: c.orientation == "Z" and c.Z == 1)
        return HomologyLabel("torus", (mz, mx), (ez, ex))
    if lat.kind is Kind.RECTANGLE:
        return HomologyLabel("rectangle", (mz,), (ex,))
    b = lat.bridge_z2
    t0 = lat.spec.t0
    removed = {k for k in lat.cells(Rank.CUBE, include_removed=True)
               if k.Z == b and k.h2 < 4 * t0}
    count: Dict[Cell, int] = {}
    for k in removed:
        for f in k.boundary():
            count[f] = count.get(f, 0) + 1
    cut = {f for f, n in count.items() if n & 1 and f in lat
           and lat.classify(f) is not BoundaryClass.REMOVED}
    return HomologyLabel("surgery", (len(W_m & cut) & 1,), ())


# --------------------------------------------------------------------------
# One period of a circuit as an operator
# --------------------------------------------------------------------------

@dataclasses.dataclass
class Window:
    """Cut of a circuit's lattice between doubled times ``h_lo`` and
    ``h_hi`` (inclusive).  Parameter bit ``i`` is the input value of qubit
    ``i``, bit ``n + i`` its output value."""

    circuit: object
    h_lo: int
    h_hi: int
    layers: Tuple[int, ...]
    edges: List[Cell]
    faces: List[Cell]
    face_terms: List[Tuple[List[Cell], List[int]]]  # inside edges, param bits
    bond_terms: List[Tuple[Cell, int, Cell]]  # inside edge, param bit, outside face
    outside_edge_param: Dict[Cell, List[int]]

    def system(self, anyons: AnyonConfig = AnyonConfig()) -> AffineSystem:
        n = self.circuit.n
        vi = {e: i for i, e in enumerate(self.edges)}
        lat = self.circuit.lattice
        W_e = {lat.canonical(c) for c in anyons.W_e}
        W_m = {lat.canonical(c) for c in anyons.W_m}
        used_e, used_m = set(), set()
        s = AffineSystem(len(self.edges), 2 * n)
        for f, (es, ps) in zip(self.faces, self.face_terms):
            var = 0
            for e in es:
                var ^= 1 << vi[e]
            par = 0
            for p in ps:
                par ^= 1 << p
            const = 1 if f in W_m else 0
            used_m.add(f)
            s.add(var, par, const)
        bond_faces: Dict[Cell, int] = {}
        for e, p, F in self.bond_terms:
            bond_faces[F] = bond_faces.get(F, 0) + 1
        for e, p, F in self.bond_terms:
            const = 0
            if F in W_m:
                if bond_faces[F] > 1:
                    raise OracleError(f"m segment on shared outside face {F}")
                const = 1
                used_m.add(F)
            s.add(1 << vi[e], 1 << p, const)
        for e in W_e:
            if e in vi:
                s.w_var ^= 1 << vi[e]
                used_e.add(e)
            elif e in self.outside_edge_param:
                ps = self.outside_edge_param[e]
                if len(ps) > 1:
                    raise OracleError(f"e segment on shared outside edge {e}")
                s.w_par ^= 1 << ps[0]
                used_e.add(e)
        rest = (W_e - used_e) | (W_m - used_m)
        if rest:
            raise OracleError(f"segments outside the window: {sorted(rest)[:4]}")
        return s

    def operator(self, anyons: AnyonConfig = AnyonConfig()) -> np.ndarray:
        """Matrix ``T[y, x]`` over the computational basis (qubit ``i`` is
        bit ``i`` of the index)."""
        n = self.circuit.n
        vals = self.system(anyons).table()
        # Parameter word is x | y << n.
        return vals.reshape(1 << n, 1 << n)


def circuit_window(c, period: int) -> Window:
    """The lattice slab of one period of ``c`` (doubled times
    ``4t .. 4t+3``)."""
    lat = c.lattice
    h_lo, h_hi = 4 * period, 4 * period + 3
    tl = c.timelines()
    layers = tuple(L.index for L in c.layers if h_lo <= L.h2 <= h_hi and L.phase in (0, 1, 2, 3, 4, 5)
                   and L.index > 0)
    lay = set(layers)
    inside: set = set()
    first: Dict[int, Tuple[Cell, Optional[Cell]]] = {}
    last: Dict[int, Tuple[Cell, Optional[Cell]]] = {}
    for qi, q in enumerate(c.qubits):
        evs = tl[q]
        idx = [i for i, ev in enumerate(evs) if ev.layer in lay]
        if not idx:
            continue
        for i in idx:
            if evs[i].tensor not in ("delta", "z2"):
                raise OracleError("window contains a preparation or readout")
            inside.add(evs[i].cell)
        i0, i1 = idx[0], idx[-1]
        if i0 == 0 or i1 == len(evs) - 1:
            raise OracleError("window must have neighbours on both sides")
        first[qi] = (evs[i0].cell, evs[i0 - 1].cell)
        last[qi] = (evs[i1].cell, evs[i1 + 1].cell)
    edges = sorted(x for x in inside if x.rank is Rank.EDGE)
    faces = sorted(x for x in inside if x.rank is Rank.FACE)
    eset = set(edges)
    n = c.n
    # Outside edge bonded to an inside face, per qubit.
    ext: Dict[Tuple[Cell, Cell], int] = {}
    outside_edge_param: Dict[Cell, List[int]] = {}
    bond_terms = []
    for qi, (cin, prev) in first.items():
        if cin.rank is Rank.FACE:
            ext[(cin, prev)] = qi
            outside_edge_param.setdefault(prev, []).append(qi)
        else:
            bond_terms.append((cin, qi, prev))
    for qi, (cout, nxt) in last.items():
        if cout.rank is Rank.FACE:
            ext[(cout, nxt)] = n + qi
            outside_edge_param.setdefault(nxt, []).append(n + qi)
        else:
            bond_terms.append((cout, n + qi, nxt))
    face_terms = []
    for f in faces:
        es: set = set()
        ps = []
        for e in f.boundary():
            e = lat.canonical(e)
            if e in eset:
                es ^= {e}
            elif (f, e) in ext:
                ps.append(ext[(f, e)])
        face_terms.append((sorted(es), ps))
    return Window(c, h_lo, h_hi, layers, edges, faces, face_terms, bond_terms,
                  outside_edge_param)
