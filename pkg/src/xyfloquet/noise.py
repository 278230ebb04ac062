"""Circuit-level noise: elementary faults, per-shot sampling and vectorized
frame noise for the sampler.

Faults act after a layer.  Two-qubit depolarizing noise follows each CX,
MXX and MZZ; idle qubits of a layer get single-qubit depolarizing noise;
measurement outcomes flip with ``p_meas``; preparations are followed by the
Pauli that spoils them (X after PREP0, Z after PREP+) with ``p_prep``.
"""

from __future__ import annotations

import dataclasses
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .circuit import CX, MX, MXX, MZ, MZZ, PREP_PLUS, PREP_ZERO, Circuit

PAULIS = ("X", "Z", "Y")
# Index 1..3 <-> X, Z, Y with bit 0 = X component, bit 1 = Z component.
_PAULI_OF = {1: "X", 2: "Z", 3: "Y"}


@dataclasses.dataclass(frozen=True)
class NoiseParams:
    p_gate: float = 0.0
    p_idle: float = 0.0
    p_meas: float = 0.0
    p_prep: float = 0.0
    bridge_idle: bool = False

    def __post_init__(self):
        for name in ("p_gate", "p_idle", "p_meas", "p_prep"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be a probability, got {v}")

    @classmethod
    def uniform(cls, p: float) -> "NoiseParams":
        return cls(p, p, p, p)


@dataclasses.dataclass(frozen=True)
class Fault:
    """A Pauli on one qubit after a layer, or a measurement flip."""

    kind: str  # "pauli" or "flip"
    layer: int = -1
    qubit: int = -1
    pauli: str = ""
    label: int = -1

    @classmethod
    def pauli_at(cls, layer: int, qubit: int, pauli: str) -> "Fault":
        return cls("pauli", layer, qubit, pauli, -1)

    @classmethod
    def flip(cls, label: int) -> "Fault":
        return cls("flip", -1, -1, "", label)


ErrorInstance = Tuple[Fault, ...]


def enumerate_faults(c: Circuit) -> List[Fault]:
    """All elementary faults: X, Z, Y on every qubit after every layer, then
    one flip per measurement label."""
    out = []
    for li in range(c.num_layers):
        for q in range(c.n):
            for p in PAULIS:
                out.append(Fault.pauli_at(li, q, p))
    out.extend(Fault.flip(lab) for lab in range(c.num_measurements))
    return out


@dataclasses.dataclass
class _LayerLocations:
    pairs: np.ndarray  # (k, 2) qubit indices of two-qubit ops
    idle: np.ndarray  # qubit indices
    prep_x: np.ndarray  # qubits followed by X (after PREP0)
    prep_z: np.ndarray  # qubits followed by Z (after PREP+)
    labels: np.ndarray  # measurement labels of this layer


def _active_windows(c: Circuit) -> List[Tuple[int, int]]:
    """Per qubit: (prep layer, terminal layer) bounding its lifetime."""
    first = [None] * c.n
    last = [None] * c.n
    for li, layer in enumerate(c.compiled()):
        for name, qs, _ in layer:
            for q in qs:
                if first[q] is None:
                    first[q] = li
                last[q] = li
    return [(f if f is not None else c.num_layers,
             l if l is not None else -1) for f, l in zip(first, last)]


def noise_locations(c: Circuit, params: NoiseParams) -> List[_LayerLocations]:
    windows = _active_windows(c)
    bridge = set()
    if params.bridge_idle and c.geometry is not None:
        lat = c.lattice
        bridge = {c.index[q] for q in c.qubits if lat.is_bridge(q)}
    out = []
    for li, (layer, raw) in enumerate(zip(c.layers, c.compiled())):
        if layer.noiseless:
            e = np.zeros(0, dtype=np.int64)
            out.append(_LayerLocations(np.zeros((0, 2), dtype=np.int64), e, e, e, e))
            continue
        busy = set()
        pairs, px, pz, labels = [], [], [], []
        for name, qs, label in raw:
            busy.update(qs)
            if name in (CX, MXX, MZZ):
                pairs.append(qs)
            elif name == PREP_ZERO:
                px.append(qs[0])
            elif name == PREP_PLUS:
                pz.append(qs[0])
            if label >= 0:
                labels.append(label)
        idle = [q for q in range(c.n) if q not in busy and (
            windows[q][0] < li < windows[q][1] or (q in bridge and 0 < li < c.num_layers - 1))]
        out.append(_LayerLocations(
            np.array(pairs, dtype=np.int64).reshape(-1, 2),
            np.array(idle, dtype=np.int64), np.array(px, dtype=np.int64),
            np.array(pz, dtype=np.int64), np.array(labels, dtype=np.int64)))
    return out


def sample_errors(c: Circuit, params: NoiseParams, rng: np.random.Generator,
                  locations: Optional[List[_LayerLocations]] = None) -> ErrorInstance:
    """One shot's faults."""
    locs = locations if locations is not None else noise_locations(c, params)
    faults: List[Fault] = []
    for li, loc in enumerate(locs):
        for a, b in loc.pairs:
            if rng.random() < params.p_gate:
                r = int(rng.integers(1, 16))
                if r & 3:
                    faults.append(Fault.pauli_at(li, int(a), _PAULI_OF[r & 3]))
                if r >> 2:
                    faults.append(Fault.pauli_at(li, int(b), _PAULI_OF[r >> 2]))
        for q in loc.idle:
            if rng.random() < params.p_idle:
                faults.append(Fault.pauli_at(li, int(q), _PAULI_OF[int(rng.integers(1, 4))]))
        for q in loc.prep_x:
            if rng.random() < params.p_prep:
                faults.append(Fault.pauli_at(li, int(q), "X"))
        for q in loc.prep_z:
            if rng.random() < params.p_prep:
                faults.append(Fault.pauli_at(li, int(q), "Z"))
        for lab in loc.labels:
            if rng.random() < params.p_meas:
                faults.append(Fault.flip(int(lab)))
    return tuple(faults)


def sparse_bernoulli(total: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """Indices in ``range(total)`` that fire, each independently with p."""
    if p <= 0 or total <= 0:
        return np.zeros(0, dtype=np.int64)
    if p >= 0.05:
        return np.flatnonzero(rng.random(total) < p)
    out = []
    pos = -1
    while True:
        mean = (total - pos) * p
        k = int(mean + 6 * np.sqrt(mean) + 16)
        gaps = rng.geometric(p, size=k)
        idx = pos + np.cumsum(gaps)
        if idx[-1] >= total:
            out.append(idx[idx < total])
            break
        out.append(idx)
        pos = int(idx[-1])
    return np.concatenate(out).astype(np.int64)


class FrameNoise:
    """Noise callback for :class:`FrameSampler` with packed shots."""

    def __init__(self, c: Circuit, params: NoiseParams, shots: int):
        self.params = params
        self.shots = shots
        self.locs = noise_locations(c, params)

    def _hits(self, nloc: int, p: float, rng):
        idx = sparse_bernoulli(nloc * self.shots, p, rng)
        loc = idx // self.shots
        shot = idx % self.shots
        return loc, shot >> 6, np.left_shift(np.uint64(1), (shot & 63).astype(np.uint64))

    def __call__(self, li: int, x: np.ndarray, z: np.ndarray, rec: np.ndarray, rng) -> None:
        loc = self.locs[li]
        p = self.params
        if len(loc.pairs) and p.p_gate > 0:
            k, w, bit = self._hits(len(loc.pairs), p.p_gate, rng)
            if len(k):
                r = rng.integers(1, 16, size=len(k))
                for col, part in ((0, r & 3), (1, r >> 2)):
                    q = loc.pairs[k, col]
                    m = (part & 1).astype(bool)
                    np.bitwise_xor.at(x, (q[m], w[m]), bit[m])
                    m = (part & 2).astype(bool)
                    np.bitwise_xor.at(z, (q[m], w[m]), bit[m])
        if len(loc.idle) and p.p_idle > 0:
            k, w, bit = self._hits(len(loc.idle), p.p_idle, rng)
            if len(k):
                r = rng.integers(1, 4, size=len(k))
                q = loc.idle[k]
                m = (r & 1).astype(bool)
                np.bitwise_xor.at(x, (q[m], w[m]), bit[m])
                m = (r & 2).astype(bool)
                np.bitwise_xor.at(z, (q[m], w[m]), bit[m])
        if p.p_prep > 0:
            for arr, target in ((loc.prep_x, x), (loc.prep_z, z)):
                if len(arr):
                    k, w, bit = self._hits(len(arr), p.p_prep, rng)
                    np.bitwise_xor.at(target, (arr[k], w), bit)
        if len(loc.labels) and p.p_meas > 0:
            k, w, bit = self._hits(len(loc.labels), p.p_meas, rng)
            np.bitwise_xor.at(rec, (loc.labels[k], w), bit)


def apply_faults_to_frame(c: Circuit, faults: Sequence[Fault]):
    """Noise callback applying a fixed fault list to every shot."""
    by_layer: Dict[int, List[Fault]] = {}
    for f in faults:
        by_layer.setdefault(f.layer if f.kind == "pauli" else -2, []).append(f)
    labels_layer = {lab: li for lab, (li, _) in enumerate(c.measurements())}
    for f in by_layer.pop(-2, []):
        by_layer.setdefault(labels_layer[f.label], []).append(f)
    full = np.uint64(0xFFFFFFFFFFFFFFFF)

    def fn(li, x, z, rec, rng):
        for f in by_layer.get(li, ()):
            if f.kind == "flip":
                rec[f.label] ^= full
                continue
            if f.pauli in ("X", "Y"):
                x[f.qubit] ^= full
            if f.pauli in ("Z", "Y"):
                z[f.qubit] ^= full
    return fn
