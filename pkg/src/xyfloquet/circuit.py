"""Layered circuit of the x+y Floquet code.

One period has six layers: a measurement layer (MXX on green pairs, MZZ on
purple pairs), CX layer (c), CX layer (d), the shifted measurement layer,
then (c) and (d) again.  Layer 0 holds the preparations and the final layer
the transversal readout.

Each qubit also carries a *timeline* of tensor events: the cells of the
spacetime lattice its worldline passes through, tagged with the tensor type
(``delta`` on edges, ``z2`` on faces, or a Z/X terminal).  The syndrome
module maps Pauli faults and measurement outcomes onto anyon segments using
these timelines.
"""

from __future__ import annotations

import dataclasses
import re
from typing import Dict, List, Optional, Sequence, Tuple

from .geometry import (
    GREEN, PURPLE, Cell, GeometryError, GeometrySpec, Kind, QubitId,
    SpacetimeLattice, SpatialLayout, build_spacetime_lattice, project_spatial,
)

HEADER = "XYFLOQUET v1"

CX = "CX"
MXX = "MXX"
MZZ = "MZZ"
MZ = "MZ"
MX = "MX"
PREP_PLUS = "PREP+"
PREP_ZERO = "PREP0"

MEASUREMENTS = (MXX, MZZ, MZ, MX)
PREPS = (PREP_PLUS, PREP_ZERO)
OP_NAMES = (CX, MXX, MZZ, MZ, MX, PREP_PLUS, PREP_ZERO)
# Basis of each measurement / preparation.
OP_BASIS = {MXX: "X", MX: "X", PREP_PLUS: "X", MZZ: "Z", MZ: "Z", PREP_ZERO: "Z"}

# Doubled-time offset of each phase inside a period.
PHASE_H2 = {0: 0, 1: 1, 2: 1, 3: 2, 4: 3, 5: 3}
PHASE_PART = {1: "c", 2: "d", 4: "c", 5: "d"}


class CircuitError(ValueError):
    pass


class ParseError(CircuitError):
    def __init__(self, line_no: int, msg: str):
        super().__init__(f"line {line_no}: {msg}")
        self.line_no = line_no


@dataclasses.dataclass(frozen=True)
class Op:
    name: str
    qubits: Tuple[QubitId, ...]
    label: int = -1

    @property
    def is_measurement(self) -> bool:
        return self.name in MEASUREMENTS

    @property
    def is_prep(self) -> bool:
        return self.name in PREPS

    @property
    def basis(self) -> Optional[str]:
        return OP_BASIS.get(self.name)

    def text(self) -> str:
        qs = " ".join(str(q) for q in self.qubits)
        if self.is_measurement:
            return f"{self.name} {self.label} {qs}"
        return f"{self.name} {qs}"


@dataclasses.dataclass(frozen=True)
class Layer:
    index: int
    phase: int
    ops: Tuple[Op, ...]
    h2: Optional[int] = None
    noiseless: bool = False

    def qubits(self) -> List[QubitId]:
        return [q for op in self.ops for q in op.qubits]


@dataclasses.dataclass(frozen=True)
class Event:
    """One tensor on a qubit worldline.

    ``tensor`` is ``delta`` (edge), ``z2`` (face), ``zterm`` (Z-basis
    preparation or measurement) or ``xterm``.  ``part`` is ``c``/``d`` for
    the two halves of a CX-layer tensor, ``m`` for measurement layers and
    ``prep``/``meas`` for terminals.
    """

    layer: int
    h2: int
    cell: Cell
    tensor: str
    part: str
    op: Optional[Op]


@dataclasses.dataclass
class Circuit:
    qubits: Tuple[QubitId, ...]
    layers: Tuple[Layer, ...]
    geometry: Optional[GeometrySpec] = None
    meta: Dict[str, str] = dataclasses.field(default_factory=dict)
    logicals: Dict[str, dict] = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        self.index = {q: i for i, q in enumerate(self.qubits)}
        self._meas: List[Tuple[int, Op]] = []
        for layer in self.layers:
            seen = set()
            for op in layer.ops:
                for q in op.qubits:
                    if q in seen:
                        raise CircuitError(
                            f"qubit {q} appears twice in layer {layer.index}")
                    seen.add(q)
                if op.is_measurement:
                    if op.label != len(self._meas):
                        raise CircuitError("measurement labels must be contiguous")
                    self._meas.append((layer.index, op))
        self._lattice: Optional[SpacetimeLattice] = None
        self._layout: Optional[SpatialLayout] = None
        self._timelines = None
        self._compiled = None

    def __eq__(self, other) -> bool:
        if not isinstance(other, Circuit):
            return NotImplemented
        return (self.qubits == other.qubits and self.layers == other.layers
                and self.geometry == other.geometry and self.meta == other.meta)

    @property
    def n(self) -> int:
        return len(self.qubits)

    @property
    def num_measurements(self) -> int:
        return len(self._meas)

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def measurement(self, label: int) -> Tuple[int, Op]:
        return self._meas[label]

    def measurements(self) -> List[Tuple[int, Op]]:
        return list(self._meas)

    @property
    def lattice(self) -> SpacetimeLattice:
        if self._lattice is None:
            if self.geometry is None:
                raise CircuitError("circuit has no geometry attached")
            self._lattice = _lattice_for(self.geometry, self.meta)
        return self._lattice

    @property
    def layout(self) -> SpatialLayout:
        if self._layout is None:
            self._layout = project_spatial(self.lattice)
        return self._layout

    def compiled(self) -> List[List[tuple]]:
        """Integer form used by the simulators.

        Each layer becomes a list of ``(name, qubit indices, label)``.
        """
        if self._compiled is None:
            self._compiled = [
                [(op.name, tuple(self.index[q] for q in op.qubits), op.label)
                 for op in layer.ops]
                for layer in self.layers
            ]
        return self._compiled

    def timelines(self) -> Dict[QubitId, List[Event]]:
        if self._timelines is None:
            self._timelines = _build_timelines(self)
        return self._timelines


def _lattice_for(spec: GeometrySpec, meta: Dict[str, str]) -> SpacetimeLattice:
    # Stabilizer init adds one noiseless period in front of the T rounds.
    rounds = spec.rounds + (1 if meta.get("init") == "stabilizer" else 0)
    return build_spacetime_lattice(dataclasses.replace(spec, rounds=rounds))


# --------------------------------------------------------------------------
# Schedule
# --------------------------------------------------------------------------

def _cx_active(lat: SpacetimeLattice, q: QubitId, h2: int) -> bool:
    if not lat.is_bridge(q):
        return True
    t0, t1 = lat.spec.t0, lat.spec.t1
    return 4 * t0 - 2 < h2 < 4 * t1 + 2


def _measurement_ops(lat: SpacetimeLattice, h2: int) -> List[Tuple[str, Tuple[QubitId, ...]]]:
    """MXX / MZZ / MZ ops of the measurement layer at even ``h2``."""
    ops = []
    top = 2 * lat.l1
    xmax = 2 * lat.l2 if lat.periodic else 2 * lat.l2 + 1
    zs = range(0, top) if lat.periodic else range(0, top + 1)
    for z2 in zs:
        green = not z2 & 1
        sp = GREEN if green else PURPLE
        # Greens pair across xy faces with x2/2 = h2/2 + 1, purples across
        # vertices with x2/2 = h2/2 (mod 2).
        want = (h2 // 2 + (1 if green else 0)) & 1
        for x2c in range(0, xmax, 2):
            if (x2c // 2) & 1 != want:
                continue
            pair = []
            for dx in (-1, 1):
                q = lat.qubit_at(sp, z2, x2c + dx)
                if q is not None and lat.qubit_active(q, h2):
                    pair.append(q)
            if len(pair) == 2 and pair[0] != pair[1]:
                ops.append((MXX if green else MZZ, tuple(pair)))
            elif len(pair) == 1 and not green:
                ops.append((MZ, tuple(pair)))
            # A lone green at the rough boundary gets an identity slot.
    return ops


def _cx_ops(lat: SpacetimeLattice, h2: int, part: str) -> List[Tuple[str, Tuple[QubitId, ...]]]:
    dz = 1 if part == "c" else -1
    ops = []
    for g in lat.qubits():
        if not g.is_green:
            continue
        p = lat.qubit_at(PURPLE, g.z2 + dz, g.x2)
        if p is None or not _cx_active(lat, p, h2):
            continue
        ops.append((CX, (g, p)))
    return ops


def _bridge_first_op(lat: SpacetimeLattice, q: QubitId, h2: int) -> str:
    for name, qs in _measurement_ops(lat, h2):
        if q in qs:
            return name
    raise GeometryError(f"bridge qubit {q} unmeasured at h2={h2}")


class _Builder:
    def __init__(self, lat: SpacetimeLattice, qubits: Sequence[QubitId]):
        self.lat = lat
        self.qubits = tuple(sorted(qubits))
        self.layers: List[Layer] = []
        self.label = 0

    def add(self, phase: int, h2: int, raw_ops, noiseless: bool = False) -> None:
        def first_key(item):
            return min(q.key() for q in item[1])
        ops = []
        for name, qs in sorted(raw_ops, key=first_key):
            if name in MEASUREMENTS:
                ops.append(Op(name, tuple(qs), self.label))
                self.label += 1
            else:
                ops.append(Op(name, tuple(qs)))
        self.layers.append(Layer(len(self.layers), phase, tuple(ops), h2, noiseless))


def _schedule(lat: SpacetimeLattice, prep_basis: str, readout_basis: str,
              noiseless_periods: int) -> Tuple[Tuple[Layer, ...], Tuple[QubitId, ...]]:
    qubits = lat.qubits()
    b = _Builder(lat, qubits)
    prep = PREP_ZERO if prep_basis == "Z" else PREP_PLUS
    read = MZ if readout_basis == "Z" else MX
    bridge = [q for q in qubits if lat.is_bridge(q)]
    spec = lat.spec
    b.add(5, -1, [(prep, (q,)) for q in qubits if not lat.is_bridge(q)],
          noiseless=noiseless_periods > 0)
    for period in range(lat.rounds):
        quiet = period < noiseless_periods
        for phase in range(6):
            h2 = 4 * period + PHASE_H2[phase]
            if phase in (0, 3):
                raw = _measurement_ops(lat, h2)
            else:
                raw = _cx_ops(lat, h2, PHASE_PART[phase])
            if bridge and period == spec.t0 - 1 and phase == 2:
                # Bridge qubits enter just before the first merged layer.
                first = 4 * spec.t0 - 2
                raw += [(PREP_ZERO if _bridge_first_op(lat, q, first) == MZ
                         else PREP_PLUS, (q,)) for q in bridge]
            if bridge and period == spec.t1 and phase == 4:
                last = 4 * spec.t1 + 2
                raw += [(MZ if _bridge_first_op(lat, q, last) == MZ
                         else MX, (q,)) for q in bridge]
            b.add(phase, h2, raw, noiseless=quiet)
    b.add(0, 4 * lat.rounds, [(read, (q,)) for q in qubits if not lat.is_bridge(q)])
    return tuple(b.layers), b.qubits


# --------------------------------------------------------------------------
# Logical representatives
# --------------------------------------------------------------------------

def _logicals(lat: SpacetimeLattice, readout: str) -> Dict[str, dict]:
    """Cut surfaces that define each logical observable.

    An observable equals the parity of measurement labels whose anyon
    segments cross the cut an odd number of times.  ``species`` is the anyon
    type the cut detects (``m`` cuts are sets of faces, ``e`` cuts sets of
    edges); ``operator`` is the matching final-time Pauli string.
    """
    out: Dict[str, dict] = {}
    faces = lat.cells()
    qs = lat.qubits()
    if lat.kind is Kind.SURGERY:
        top = 2 * lat.l1
        out["Z1"] = _row_cut(lat, faces, 0, qs)
        out["Z2"] = _row_cut(lat, faces, top, qs)
        out["X1X2"] = _column_cut(lat, faces, 1, qs)
        out["M"] = _bottom_cut(lat)
    else:
        out["Z1"] = _row_cut(lat, faces, 0, qs)
        out["X1"] = _column_cut(lat, faces, 1, qs)
        if lat.periodic:
            cells = [c for c in faces if c.orientation in ("XZ", "YZ") and c.x2 == 1]
            out["Z2"] = dict(species="m", cells=frozenset(cells), basis="Z",
                             operator=tuple(q for q in qs if not q.is_green and q.x2 == 1))
            cells = [c for c in faces if c.orientation == "Z" and c.Z == 1]
            out["X2"] = dict(species="e", cells=frozenset(cells), basis="X",
                             operator=tuple(q for q in qs if not q.is_green and q.z2 == 1))
    for k, v in out.items():
        v["name"] = k
    return out


def _row_cut(lat, cells, z2, qs) -> dict:
    cut = [c for c in cells if c.orientation == "XY" and c.Z == z2]
    return dict(species="m", cells=frozenset(cut), basis="Z",
                operator=tuple(q for q in qs if q.is_green and q.z2 == z2))


def _column_cut(lat, cells, x2, qs) -> dict:
    cut = [c for c in cells if c.orientation in ("X", "Y") and c.x2 == x2]
    return dict(species="e", cells=frozenset(cut), basis="X",
                operator=tuple(q for q in qs if q.is_green and q.x2 == x2 and not lat.is_bridge(q)))


def _bottom_cut(lat: SpacetimeLattice) -> dict:
    """Faces bounding the removed bridge chunk below the merge window."""
    from .geometry import Rank
    counts: Dict[Cell, int] = {}
    t0 = lat.spec.t0
    for c in lat.cells(Rank.CUBE, include_removed=True):
        if c.Z != lat.bridge_z2 or c.h2 >= 4 * t0:
            continue
        for f in c.boundary():
            counts[f] = counts.get(f, 0) + 1
    cut = [f for f, k in counts.items() if k & 1 and f in lat
           and lat.classify(f).value != "removed"]
    return dict(species="m", cells=frozenset(cut), basis="Z", operator=())


# --------------------------------------------------------------------------
# Public builders
# --------------------------------------------------------------------------

_INIT = {"Z-basis": "Z", "X-basis": "X", "Stabilizer": "stabilizer",
         "Z": "Z", "X": "X", "stabilizer": "stabilizer"}
_READ = {"Z-basis": "Z", "X-basis": "X", "Z": "Z", "X": "X"}


def build_memory_circuit(layout, rounds: int, init: str = "Stabilizer",
                         readout: str = "Z-basis") -> Circuit:
    """Memory experiment on a torus or rectangle layout.

    ``layout`` may be a SpatialLayout, a SpacetimeLattice or a GeometrySpec;
    only its geometry is used.
    """
    spec = _spec_of(layout)
    if Kind(spec.kind) is Kind.SURGERY:
        raise CircuitError("build_memory_circuit: unsupported layout kind surgery")
    if rounds < 0:
        raise CircuitError("rounds must be non-negative")
    try:
        init_k = _INIT[init]
        read_k = _READ[readout]
    except KeyError as exc:
        raise CircuitError(f"unknown basis {exc}") from None
    spec = dataclasses.replace(spec, rounds=rounds)
    meta = {"init": init_k, "readout": read_k}
    lat = _lattice_for(spec, meta)
    # Stabilizer init prepares the readout basis so that the measured
    # logical is fixed by the noiseless first period.
    prep = read_k if init_k == "stabilizer" else init_k
    layers, qubits = _schedule(lat, prep, read_k, 1 if init_k == "stabilizer" else 0)
    c = Circuit(qubits, layers, spec, meta)
    c.logicals = _logicals(lat, read_k)
    return c


def build_surgery_circuit(spec: GeometrySpec, basis: str = "Z") -> Circuit:
    """Lattice-surgery ZZ measurement between two L x L blocks.

    ``basis`` selects both the product-state preparation and the readout of
    the two data blocks (``Z`` for the computational basis, ``X`` for
    plus states).
    """
    if Kind(spec.kind) is not Kind.SURGERY:
        raise CircuitError("build_surgery_circuit requires a surgery geometry")
    spec.validate()
    basis = _READ[basis]
    meta = {"init": basis, "readout": basis}
    lat = _lattice_for(spec, meta)
    layers, qubits = _schedule(lat, basis, basis, 0)
    c = Circuit(qubits, layers, spec, meta)
    c.logicals = _logicals(lat, basis)
    return c


def _spec_of(obj) -> GeometrySpec:
    if isinstance(obj, GeometrySpec):
        return obj
    if isinstance(obj, SpatialLayout):
        return obj.lattice.spec
    if isinstance(obj, SpacetimeLattice):
        return obj.spec
    raise CircuitError(f"cannot derive geometry from {type(obj).__name__}")


def build_from_meta(spec: GeometrySpec, meta: Dict[str, str]) -> Circuit:
    if Kind(spec.kind) is Kind.SURGERY:
        return build_surgery_circuit(spec, meta.get("init", "Z"))
    return build_memory_circuit(spec, spec.rounds, meta.get("init", "stabilizer"),
                                meta.get("readout", "Z"))


# --------------------------------------------------------------------------
# Timelines
# --------------------------------------------------------------------------

def _build_timelines(c: Circuit) -> Dict[QubitId, List[Event]]:
    lat = c.lattice
    per: Dict[QubitId, Dict[int, Op]] = {q: {} for q in c.qubits}
    for layer in c.layers:
        for op in layer.ops:
            for q in op.qubits:
                per[q][layer.index] = op
    out: Dict[QubitId, List[Event]] = {}
    last = len(c.layers) - 1
    for q in c.qubits:
        events: List[Event] = []
        alive = False
        for layer in c.layers:
            op = per[q].get(layer.index)
            h2 = layer.h2
            if op is not None and op.is_prep:
                alive = True
                tensor = "zterm" if op.basis == "Z" else "xterm"
                events.append(Event(layer.index, h2, lat.worldline_cell(q, h2),
                                    tensor, "prep", op))
                continue
            if not alive:
                continue
            terminal = op is not None and (op.name in (MZ, MX)) and (
                layer.index == last or lat.is_bridge(q) and h2 & 1)
            if terminal:
                tensor = "zterm" if op.basis == "Z" else "xterm"
                events.append(Event(layer.index, h2, lat.worldline_cell(q, h2),
                                    tensor, "meas", op))
                alive = False
                continue
            if h2 & 1:
                if not _cx_active(lat, q, h2):
                    continue
                tensor = "delta" if q.is_green else "z2"
                part = PHASE_PART[layer.phase]
            else:
                if not lat.qubit_active(q, h2):
                    continue
                tensor = "z2" if q.is_green else "delta"
                part = "m"
            events.append(Event(layer.index, h2, lat.worldline_cell(q, h2),
                                tensor, part, op))
        out[q] = events
    return out


# --------------------------------------------------------------------------
# Text format
# --------------------------------------------------------------------------

def emit_text(c: Circuit) -> str:
    lines = [HEADER]
    if c.geometry is not None:
        g = c.geometry
        parts = [f"kind={Kind(g.kind).value}", f"l1={g.l1}", f"l2={g.l2}",
                 f"rounds={g.rounds}"]
        if g.l is not None:
            parts += [f"l={g.l}", f"t0={g.t0}", f"t1={g.t1}"]
        lines.append("# geometry " + " ".join(parts))
    if c.meta:
        lines.append("# meta " + " ".join(f"{k}={v}" for k, v in sorted(c.meta.items())))
    lines.append(f"QUBITS {c.n}")
    for layer in c.layers:
        head = f"LAYER {layer.index} phase={layer.phase}"
        if layer.h2 is not None:
            head += f" h={layer.h2}"
        if layer.noiseless:
            head += " noiseless"
        lines.append(head)
        for op in layer.ops:
            lines.append("  " + op.text())
    return "\n".join(lines) + "\n"


_QUBIT_RE = re.compile(r"^([gpq])\((-?\d+),(-?\d+)\)$")
_LAYER_RE = re.compile(r"^LAYER (\d+) phase=(\d+)(?: h=(-?\d+))?( noiseless)?$")
_ARITY = {CX: 2, MXX: 2, MZZ: 2, MZ: 1, MX: 1, PREP_PLUS: 1, PREP_ZERO: 1}


def _parse_qubit(tok: str, line_no: int) -> QubitId:
    m = _QUBIT_RE.match(tok)
    if not m:
        raise ParseError(line_no, f"bad qubit {tok!r}")
    sp, z2, x2 = m.group(1), int(m.group(2)), int(m.group(3))
    if sp == "q":
        sp = PURPLE if z2 & 1 else GREEN
    try:
        return QubitId(sp, z2, x2)
    except GeometryError as exc:
        raise ParseError(line_no, str(exc)) from None


def _parse_kv(rest: str, line_no: int) -> Dict[str, str]:
    out = {}
    for tok in rest.split():
        if "=" not in tok:
            raise ParseError(line_no, f"expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        out[k] = v
    return out


def parse_text(text: str) -> Circuit:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != HEADER:
        raise ParseError(1, f"expected header {HEADER!r}")
    geometry = None
    meta: Dict[str, str] = {}
    n = None
    layers: List[Layer] = []
    cur = None
    ops: List[Op] = []

    def close():
        if cur is not None:
            idx, phase, h2, quiet = cur
            layers.append(Layer(idx, phase, tuple(ops), h2, quiet))

    for i, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            raise ParseError(i, "empty line")
        if line.startswith("# geometry "):
            kv = _parse_kv(line[len("# geometry "):], i)
            try:
                geometry = GeometrySpec(
                    Kind(kv["kind"]), int(kv["l1"]), int(kv["l2"]), int(kv["rounds"]),
                    int(kv["l"]) if "l" in kv else None,
                    int(kv["t0"]) if "t0" in kv else None,
                    int(kv["t1"]) if "t1" in kv else None)
            except (KeyError, ValueError) as exc:
                raise ParseError(i, f"bad geometry line: {exc}") from None
            continue
        if line.startswith("# meta "):
            meta = _parse_kv(line[len("# meta "):], i)
            continue
        if line.startswith("#"):
            raise ParseError(i, "unknown comment directive")
        if line.startswith("QUBITS "):
            try:
                n = int(line.split()[1])
            except ValueError:
                raise ParseError(i, "bad qubit count") from None
            continue
        if line.startswith("LAYER"):
            m = _LAYER_RE.match(line)
            if not m:
                raise ParseError(i, f"bad layer header {line!r}")
            close()
            cur = (int(m.group(1)), int(m.group(2)),
                   int(m.group(3)) if m.group(3) is not None else None,
                   bool(m.group(4)))
            if cur[0] != len(layers):
                raise ParseError(i, "layer indices must be consecutive from 0")
            if cur[1] > 5:
                raise ParseError(i, "phase must be in 0..5")
            ops = []
            continue
        if cur is None:
            raise ParseError(i, "op outside a layer")
        toks = line.split()
        name = toks[0]
        if name not in _ARITY:
            raise ParseError(i, f"unknown op {name!r}")
        label = -1
        args = toks[1:]
        if name in MEASUREMENTS:
            if not args:
                raise ParseError(i, "missing measurement label")
            try:
                label = int(args[0])
            except ValueError:
                raise ParseError(i, f"bad label {args[0]!r}") from None
            args = args[1:]
        if len(args) != _ARITY[name]:
            raise ParseError(i, f"{name} takes {_ARITY[name]} qubits")
        qs = tuple(_parse_qubit(a, i) for a in args)
        _check_species(name, qs, i)
        ops.append(Op(name, qs, label))
    close()
    if n is None:
        raise ParseError(len(lines), "missing QUBITS line")
    if geometry is not None:
        lat = _lattice_for(geometry, meta)
        qubits = tuple(lat.qubits())
    else:
        qubits = tuple(sorted({q for l in layers for op in l.ops for q in op.qubits}))
    if len(qubits) != n:
        raise ParseError(len(lines), f"QUBITS {n} does not match {len(qubits)} qubits used")
    try:
        c = Circuit(qubits, tuple(layers), geometry, meta)
    except CircuitError as exc:
        raise ParseError(len(lines), str(exc)) from None
    if geometry is not None:
        c.logicals = _logicals(c.lattice, meta.get("readout", "Z"))
    return c


def _check_species(name: str, qs: Tuple[QubitId, ...], line_no: int) -> None:
    if name == CX and not (qs[0].is_green and not qs[1].is_green):
        raise ParseError(line_no, "CX control must be green and target purple")
    if name == MXX and not all(q.is_green for q in qs):
        raise ParseError(line_no, "MXX acts on green qubits")
    if name == MZZ and any(q.is_green for q in qs):
        raise ParseError(line_no, f"{name} acts on purple qubits")
