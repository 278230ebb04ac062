"""Anyon segments of outcomes and faults, and the detector graph.

A Pauli sitting on a qubit between two consecutive worldline tensors is
moved onto a tensor it can be absorbed into: Z onto a delta tensor (an e
segment on that edge), X onto a Z2 tensor (an m segment on that face).
Z next to a Z-basis terminal and X next to an X-basis terminal are
stabilized and vanish.  When both neighbouring tensors have the wrong type
(the bond between the two halves of a CX-layer tensor) the Pauli is pushed
back through the CX.

A -1 outcome inserts a charged tensor pair: Z on the in- and out-bond of the
first qubit of an MXX, X on those of the first qubit of an MZZ or of a
non-destructive MZ.  A destructive readout acts on its final bond only.

Detector nodes are the endpoints: vertices for e segments, cubes for m
segments.  A node is real when the parity of its incident measurement
labels is fixed in the noiseless circuit; otherwise it lies on a boundary
where that anyon can condense and becomes a virtual node.
"""

from __future__ import annotations

import dataclasses
import json
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .circuit import CX, MX, MXX, MZ, MZZ, Circuit, Event
from .geometry import BoundaryClass, Cell, QubitId, Rank
from .noise import Fault, enumerate_faults
from .tableau import MeasRecord, reference_record

E = "E"
M = "M"


class SyndromeError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class Segment:
    species: str
    cell: Cell


class SegmentSet:
    """Parity set of segments (duplicates cancel)."""

    def __init__(self, e: Iterable[Cell] = (), m: Iterable[Cell] = ()):
        self.e: set = set()
        self.m: set = set()
        for c in e:
            self.e ^= {c}
        for c in m:
            self.m ^= {c}

    def __xor__(self, other: "SegmentSet") -> "SegmentSet":
        out = SegmentSet()
        out.e = self.e ^ other.e
        out.m = self.m ^ other.m
        return out

    def __ixor__(self, other: "SegmentSet") -> "SegmentSet":
        self.e ^= other.e
        self.m ^= other.m
        return self

    def __eq__(self, other) -> bool:
        return isinstance(other, SegmentSet) and self.e == other.e and self.m == other.m

    def __bool__(self) -> bool:
        return bool(self.e or self.m)

    def segments(self) -> List[Segment]:
        return ([Segment(E, c) for c in sorted(self.e)]
                + [Segment(M, c) for c in sorted(self.m)])

    def __repr__(self) -> str:
        return f"SegmentSet(e={sorted(self.e)}, m={sorted(self.m)})"


# --------------------------------------------------------------------------
# Bond rules
# --------------------------------------------------------------------------

_DELTA_LIKE = ("delta", "xterm")
_Z2_LIKE = ("z2", "zterm")


class _Mapper:
    def __init__(self, c: Circuit):
        self.c = c
        self.lat = c.lattice
        self.tl = c.timelines()
        # Position of each layer in each qubit's timeline.
        self.pos: Dict[QubitId, Dict[int, int]] = {
            q: {ev.layer: i for i, ev in enumerate(evs)} for q, evs in self.tl.items()}

    def last_event_at_or_before(self, q: QubitId, layer: int) -> int:
        evs = self.tl[q]
        lo, hi = 0, len(evs)
        while lo < hi:
            mid = (lo + hi) // 2
            if evs[mid].layer <= layer:
                lo = mid + 1
            else:
                hi = mid
        return lo - 1

    def bond(self, q: QubitId, i: int, pauli: str) -> SegmentSet:
        """Segments of ``pauli`` on the bond between events i and i+1."""
        out = SegmentSet()
        if pauli in ("Z", "Y"):
            out ^= self._bond_single(q, i, "Z")
        if pauli in ("X", "Y"):
            out ^= self._bond_single(q, i, "X")
        return out

    def _bond_single(self, q: QubitId, i: int, p: str) -> SegmentSet:
        evs = self.tl[q]
        if i < 0 or i + 1 >= len(evs):
            return SegmentSet()
        a, b = evs[i], evs[i + 1]
        kill = "zterm" if p == "Z" else "xterm"
        if a.tensor == kill or b.tensor == kill:
            return SegmentSet()
        good = _DELTA_LIKE if p == "Z" else _Z2_LIKE
        inner = "delta" if p == "Z" else "z2"
        for ev in (a, b):
            if ev.tensor == inner:
                return self._place(p, ev.cell)
        for ev in (a, b):
            if ev.tensor in good:
                return self._place(p, ev.cell)
        return self._push_back(q, i, p)

    def _place(self, p: str, cell: Cell) -> SegmentSet:
        return SegmentSet(e=[cell]) if p == "Z" else SegmentSet(m=[cell])

    def _push_back(self, q: QubitId, i: int, p: str) -> SegmentSet:
        """Move the Pauli to just before the op of event i."""
        a = self.tl[q][i]
        out = self.bond(q, i - 1, p)
        op = a.op
        if op is not None and op.name == CX:
            ctrl, tgt = op.qubits
            if p == "Z" and q == tgt:
                out ^= self.bond(ctrl, self.pos[ctrl][a.layer] - 1, "Z")
            elif p == "X" and q == ctrl:
                out ^= self.bond(tgt, self.pos[tgt][a.layer] - 1, "X")
        return out

    def fault(self, f: Fault) -> SegmentSet:
        if f.kind == "flip":
            return self.outcome(f.label)
        q = self.c.qubits[f.qubit] if isinstance(f.qubit, int) else f.qubit
        i = self.last_event_at_or_before(q, f.layer)
        return self.bond(q, i, f.pauli)

    def outcome(self, label: int) -> SegmentSet:
        if not 0 <= label < self.c.num_measurements:
            raise SyndromeError(f"unknown measurement label {label}")
        layer, op = self.c.measurement(label)
        q = op.qubits[0]
        i = self.pos[q][layer]
        ev = self.tl[q][i]
        if ev.tensor in ("zterm", "xterm"):
            return self.bond(q, i - 1, "X" if ev.tensor == "zterm" else "Z")
        p = "Z" if op.name == MXX else "X"
        return self.bond(q, i - 1, p) ^ self.bond(q, i, p)


def segments_for_outcome(c: Circuit, label: int) -> SegmentSet:
    return _mapper(c).outcome(label)


def segments_for_error(c: Circuit, fault: Fault) -> SegmentSet:
    return _mapper(c).fault(fault)


_MAPPERS: Dict[int, _Mapper] = {}


def _mapper(c: Circuit) -> _Mapper:
    m = getattr(c, "_mapper", None)
    if m is None:
        m = _Mapper(c)
        c._mapper = m
    return m


# --------------------------------------------------------------------------
# Endpoints
# --------------------------------------------------------------------------

def _edge_ends(lat, cell: Cell) -> List[Cell]:
    return [lat.canonical(v) for v in cell.boundary()]


def _face_ends(lat, cell: Cell) -> List[Cell]:
    return [lat.canonical(k) for k in cell.coboundary()]


def endpoints(c: Circuit, segs: SegmentSet) -> Tuple[FrozenSet[Cell], FrozenSet[Cell]]:
    """Odd-incidence vertices of the e segments and cubes of the m segments."""
    lat = c.lattice
    ev: set = set()
    for cell in segs.e:
        for v in _edge_ends(lat, cell):
            ev ^= {v}
    mv: set = set()
    for cell in segs.m:
        for k in _face_ends(lat, cell):
            mv ^= {k}
    return frozenset(ev), frozenset(mv)


def cut_parity(segs: SegmentSet, logical: dict) -> int:
    cells = segs.e if logical["species"] == "e" else segs.m
    return len(cells & logical["cells"]) & 1


# --------------------------------------------------------------------------
# Detector graph
# --------------------------------------------------------------------------

@dataclasses.dataclass
class Node:
    index: int
    species: str
    cell: Cell
    labels: Tuple[int, ...]
    virtual: bool
    boundary: str  # boundary class of the cell, or "outside"
    expected: int = 0  # noiseless parity of the labels (real nodes)


@dataclasses.dataclass
class FaultEdge:
    fault_id: int
    species: str
    nodes: Tuple[int, ...]  # node indices (0, 1 or 2 after boundary merge)
    observables: Tuple[int, ...]


@dataclasses.dataclass
class DetectorGraph:
    circuit: Circuit
    nodes: List[Node]
    node_index: Dict[Tuple[str, Cell], int]
    detectors: List[int]  # indices of real nodes, in detector order
    det_of_node: Dict[int, int]
    faults: List[Fault]
    edges: List[FaultEdge]
    fault_segments: List[SegmentSet]
    observables: List[str]
    obs_labels: Dict[str, Tuple[int, ...]]
    obs_expected: Dict[str, Optional[int]]
    ref: MeasRecord

    @property
    def num_detectors(self) -> int:
        return len(self.detectors)

    def detector_matrix(self):
        """Sparse (detectors x labels) incidence as a scipy CSR matrix."""
        from scipy.sparse import csr_matrix
        rows, cols = [], []
        for d, ni in enumerate(self.detectors):
            for lab in self.nodes[ni].labels:
                rows.append(d)
                cols.append(lab)
        return csr_matrix((np.ones(len(rows), dtype=np.uint8), (rows, cols)),
                          shape=(len(self.detectors), self.circuit.num_measurements))

    def observable_matrix(self, names: Optional[Sequence[str]] = None):
        from scipy.sparse import csr_matrix
        names = list(names or self.observables)
        rows, cols = [], []
        for i, nm in enumerate(names):
            for lab in self.obs_labels[nm]:
                rows.append(i)
                cols.append(lab)
        return csr_matrix((np.ones(len(rows), dtype=np.uint8), (rows, cols)),
                          shape=(len(names), self.circuit.num_measurements))

    def expected_detectors(self) -> np.ndarray:
        return np.array([self.nodes[i].expected for i in self.detectors], dtype=np.uint8)


def _mask_parity(masks: Sequence[int], labels: Iterable[int]) -> int:
    acc = 0
    for lab in labels:
        acc ^= masks[lab]
    return acc


def build_detector_graph(c: Circuit, observables: Optional[Sequence[str]] = None,
                         check: bool = True) -> DetectorGraph:
    """Detector graph of a circuit.

    ``observables`` restricts the logical cuts that are tracked; by default
    all cuts whose noiseless value is deterministic are used.
    """
    mp = _mapper(c)
    lat = c.lattice
    ref = reference_record(c)
    masks = ref.masks
    members: Dict[Tuple[str, Cell], set] = {}
    label_segs = []
    for lab in range(c.num_measurements):
        segs = mp.outcome(lab)
        label_segs.append(segs)
        ev, mv = endpoints(c, segs)
        for sp, ends in ((E, ev), (M, mv)):
            for cell in ends:
                members.setdefault((sp, cell), set()).add(lab)
    nodes: List[Node] = []
    node_index: Dict[Tuple[str, Cell], int] = {}

    def add_node(sp, cell, labels):
        labels = tuple(sorted(labels))
        virtual = True
        expected = 0
        inside = cell in lat and lat.classify(cell) is not BoundaryClass.REMOVED
        if labels and inside:
            mk = _mask_parity(masks, labels)
            if mk >> 1 == 0:
                virtual = False
                expected = mk & 1
        if cell in lat:
            bclass = lat.classify(cell).value
        else:
            bclass = "outside"
        idx = len(nodes)
        nodes.append(Node(idx, sp, cell, labels, virtual, bclass, expected))
        node_index[(sp, cell)] = idx
        return idx

    for key in sorted(members, key=lambda k: (k[0], k[1].key())):
        add_node(key[0], key[1], members[key])

    faults = enumerate_faults(c)
    fault_segments = []
    fault_ends = []
    for f in faults:
        segs = mp.fault(f)
        fault_segments.append(segs)
        ends = endpoints(c, segs)
        fault_ends.append(ends)
        for sp, cells in ((E, ends[0]), (M, ends[1])):
            for cell in cells:
                if (sp, cell) not in node_index:
                    add_node(sp, cell, ())

    # Observables: cuts whose noiseless parity is fixed.
    if observables is not None:
        names = list(observables)
    else:
        # Only logicals in the readout basis are recoverable from the record.
        names = [nm for nm, lg in c.logicals.items()
                 if lg["basis"] == c.meta.get("readout", "Z") or nm == "M"]
    obs_labels: Dict[str, Tuple[int, ...]] = {}
    obs_expected: Dict[str, Optional[int]] = {}
    for nm in names:
        lg = c.logicals[nm]
        labs = tuple(lab for lab in range(c.num_measurements)
                     if cut_parity(label_segs[lab], lg))
        obs_labels[nm] = labs
        mk = _mask_parity(masks, labs)
        obs_expected[nm] = (mk & 1) if mk >> 1 == 0 else None
    if observables is None:
        names = [nm for nm in names if obs_expected[nm] is not None]

    edges = []
    for fid, (f, segs, ends) in enumerate(zip(faults, fault_segments, fault_ends)):
        obs = tuple(i for i, nm in enumerate(names) if cut_parity(segs, c.logicals[nm]))
        for sp, cells in ((E, ends[0]), (M, ends[1])):
            if not cells and not any(
                    cut_parity(segs, c.logicals[nm]) for nm in names
                    if c.logicals[nm]["species"] == sp.lower()):
                continue
            idxs = tuple(sorted(node_index[(sp, cell)] for cell in cells))
            sp_obs = tuple(i for i in obs if c.logicals[names[i]]["species"] == sp.lower())
            edges.append(FaultEdge(fid, sp, idxs, sp_obs))

    detectors = [n.index for n in nodes if not n.virtual]
    det_of_node = {ni: d for d, ni in enumerate(detectors)}
    g = DetectorGraph(c, nodes, node_index, detectors, det_of_node, faults, edges,
                      fault_segments, names, obs_labels, obs_expected, ref)
    if check:
        check_graph(g)
    return g


def allowed_virtual(species: str, bclass: str, h2: Optional[int] = None,
                    window: Optional[Tuple[int, int]] = None) -> bool:
    """Boundaries that may absorb an anyon of this species.

    Rough absorbs e, smooth absorbs m, temporal boundaries absorb both.
    ``window`` = (h_lo, h_hi) marks the times next to the initial and final
    state boundaries, where product-state preparation and transversal
    readout make first and last outcomes random.
    """
    if bclass in ("outside", "state_initial", "state_final", "corner", "removed"):
        return True
    if window is not None and h2 is not None and not window[0] < h2 < window[1]:
        return True
    if species == E:
        return bclass == "rough"
    return bclass == "smooth"


def temporal_window(c: Circuit) -> Tuple[int, int]:
    noiseless = sum(1 for l in c.layers[1:] if l.noiseless) // 6
    return 4 * noiseless + 6, 4 * c.lattice.rounds - 2


def check_graph(g: DetectorGraph) -> None:
    """Structural invariants; a violation is a construction bug."""
    window = temporal_window(g.circuit)
    for n in g.nodes:
        if n.virtual and not allowed_virtual(n.species, n.boundary, n.cell.h2, window):
            raise SyndromeError(
                f"{n.species} endpoint at {n.cell} on a {n.boundary} cell cannot be "
                "absorbed there (boundary constraint forces the amplitude to 0)")
    for e in g.edges:
        real = [i for i in e.nodes if not g.nodes[i].virtual]
        if len(real) > 2:
            raise SyndromeError(f"fault {e.fault_id} has {len(real)} real {e.species} endpoints")


def edge_real_nodes(g: DetectorGraph, e: FaultEdge) -> List[int]:
    return [g.det_of_node[i] for i in e.nodes if not g.nodes[i].virtual]


def fault_syndrome(g: DetectorGraph, fid: int) -> FrozenSet[int]:
    """Detector indices predicted to fire for an elementary fault."""
    ev, mv = endpoints(g.circuit, g.fault_segments[fid])
    out = set()
    for sp, cells in ((E, ev), (M, mv)):
        for cell in cells:
            ni = g.node_index[(sp, cell)]
            if not g.nodes[ni].virtual:
                out.add(g.det_of_node[ni])
    return frozenset(out)


# --------------------------------------------------------------------------
# Syndromes
# --------------------------------------------------------------------------

def syndrome(g: DetectorGraph, rec: MeasRecord, ref: Optional[MeasRecord] = None) -> FrozenSet[int]:
    """Fired detector indices: parity of (rec xor ref) over each detector."""
    ref = ref if ref is not None else g.ref
    if len(rec.bits) != len(ref.bits):
        raise SyndromeError("record length mismatch")
    diff = np.asarray(rec.bits, dtype=np.uint8) ^ np.asarray(ref.bits, dtype=np.uint8)
    fired = set()
    for d, ni in enumerate(g.detectors):
        par = 0
        for lab in g.nodes[ni].labels:
            par ^= int(diff[lab])
        if par:
            fired.add(d)
    return frozenset(fired)


def detector_bits(g: DetectorGraph, records: np.ndarray) -> np.ndarray:
    """(shots, labels) record bits -> (shots, detectors) detection events."""
    D = g.detector_matrix()
    raw = (D @ records.T.astype(np.int64)) & 1
    return (raw.T ^ g.expected_detectors()[None, :]).astype(np.uint8)


def observable_bits(g: DetectorGraph, records: np.ndarray,
                    names: Optional[Sequence[str]] = None) -> np.ndarray:
    names = list(names or g.observables)
    O = g.observable_matrix(names)
    raw = ((O @ records.T.astype(np.int64)) & 1).T
    exp = np.array([g.obs_expected[n] or 0 for n in names], dtype=np.uint8)
    return (raw ^ exp[None, :]).astype(np.uint8)


# --------------------------------------------------------------------------
# JSON export
# --------------------------------------------------------------------------

GRAPH_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "xyfloquet detector graph",
    "type": "object",
    "required": ["format", "num_measurements", "nodes", "edges", "observables"],
    "properties": {
        "format": {"const": "xyfloquet-detector-graph-v1"},
        "num_measurements": {"type": "integer", "minimum": 0},
        "observables": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "labels"],
                "properties": {
                    "name": {"type": "string"},
                    "labels": {"type": "array", "items": {"type": "integer"}},
                },
            },
        },
        "nodes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "species", "cell", "labels", "virtual"],
                "properties": {
                    "id": {"type": "integer"},
                    "species": {"enum": ["E", "M"]},
                    "cell": {"type": "array", "items": {"type": "integer"},
                             "minItems": 3, "maxItems": 3},
                    "labels": {"type": "array", "items": {"type": "integer"}},
                    "virtual": {"type": "boolean"},
                    "boundary": {"type": "string"},
                    "expected": {"enum": [0, 1]},
                },
            },
        },
        "edges": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["fault", "nodes", "species"],
                "properties": {
                    "fault": {"type": "integer"},
                    "nodes": {"type": "array", "items": {"type": "integer"}, "maxItems": 2},
                    "species": {"enum": ["E", "M"]},
                    "observables": {"type": "array", "items": {"type": "integer"}},
                },
            },
        },
    },
}


def graph_to_json(g: DetectorGraph) -> str:
    data = {
        "format": "xyfloquet-detector-graph-v1",
        "num_measurements": g.circuit.num_measurements,
        "observables": [{"name": nm, "labels": list(g.obs_labels[nm])}
                        for nm in g.observables],
        "nodes": [{"id": n.index, "species": n.species,
                   "cell": [n.cell.X, n.cell.Y, n.cell.Z], "labels": list(n.labels),
                   "virtual": n.virtual, "boundary": n.boundary,
                   "expected": n.expected} for n in g.nodes],
        "edges": [{"fault": e.fault_id, "nodes": list(e.nodes), "species": e.species,
                   "observables": list(e.observables)} for e in g.edges],
    }
    return json.dumps(data, indent=1, sort_keys=True) + "\n"
