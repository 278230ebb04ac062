"""Oracle equivalence checks shared by the self-test and the test suite.

* circuit operator vs path-integral evaluation on one period window;
* forced -1 outcomes vs the worldline segments they insert;
* stabilizer tableau vs dense statevector on random small circuits.
"""

from __future__ import annotations

import dataclasses
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .circuit import (CX, MX, MXX, MZ, MZZ, PREP_PLUS, PREP_ZERO, Circuit, Layer, Op,
                      build_memory_circuit)
from .geometry import GREEN, GeometrySpec, QubitId
from .pathintegral import AnyonConfig, Window, circuit_window
from .statevector import DenseState, ForceOutcomes, forced_operator, run_statevector
from .syndrome import SegmentSet, segments_for_outcome
from .tableau import run as tableau_run


@dataclasses.dataclass
class WindowReport:
    period: int
    labels: List[int]
    factor: complex
    records: int
    nonzero: int
    max_deviation: float


def _factor(O: np.ndarray, T: np.ndarray) -> complex:
    i = np.unravel_index(np.argmax(np.abs(T)), T.shape)
    return complex(O[i] / T[i])


def window_labels(c: Circuit, w: Window) -> List[int]:
    return sorted({op.label for li in w.layers for op in c.layers[li].ops if op.label >= 0})


def check_window(c: Circuit, period: int, records: str = "single") -> WindowReport:
    """Compare forced circuit operators with oracle evaluations.

    ``records`` is ``plus`` (all outcomes +1 only), ``single`` (also each
    single -1) or ``all`` (every record of the window).  One global factor,
    fixed by the all-+1 record, must serve every record.
    """
    w = circuit_window(c, period)
    labels = window_labels(c, w)
    base = [0] * c.num_measurements
    O = forced_operator(c, base, w.layers)
    T = w.operator().astype(float)
    f = _factor(O, T)
    if records == "plus":
        subsets = [()]
    elif records == "single":
        subsets = [()] + [(lab,) for lab in labels]
    elif records == "all":
        subsets = [tuple(lab for i, lab in enumerate(labels) if k >> i & 1)
                   for k in range(1 << len(labels))]
    else:
        raise ValueError(f"unknown record set {records!r}")
    worst = 0.0
    nz = 0
    for sub in subsets:
        rec = list(base)
        segs = SegmentSet()
        for lab in sub:
            rec[lab] = 1
            segs ^= segments_for_outcome(c, lab)
        O = forced_operator(c, rec, w.layers)
        T = w.operator(AnyonConfig.from_segments(segs)).astype(float)
        worst = max(worst, float(np.max(np.abs(O - f * T))))
        nz += bool(T.any())
    return WindowReport(period, labels, f, len(subsets), nz, worst)


def torus_window_circuit(l1: int = 2, l2: int = 2, rounds: int = 3) -> Circuit:
    return build_memory_circuit(GeometrySpec.torus(l1, l2, rounds), rounds, "Z-basis", "Z-basis")


# --------------------------------------------------------------------------
# Tableau vs statevector
# --------------------------------------------------------------------------

def random_circuit(n: int, depth: int, rng: np.random.Generator) -> Circuit:
    """Random layers of CX, MXX, MZZ, MX, MZ and preparations on n qubits.

    The first layer prepares every qubit, since the tableau starts from
    the maximally mixed state.
    """
    qs = tuple(QubitId(GREEN, 0, 2 * i + 1) for i in range(n))
    prep = tuple(Op(PREP_ZERO if rng.random() < 0.5 else PREP_PLUS, (q,)) for q in qs)
    layers = [Layer(0, 0, prep)]
    label = 0
    for li in range(1, depth + 1):
        free = list(rng.permutation(n))
        ops = []
        while free:
            kind = rng.choice(["CX", "MXX", "MZZ", "MX", "MZ", "PREP0", "PREP+", "skip"],
                              p=[.25, .15, .15, .1, .1, .05, .05, .15])
            if kind in ("CX", "MXX", "MZZ") and len(free) < 2:
                kind = "skip"
            if kind == "skip":
                free.pop()
                continue
            if kind in ("CX", "MXX", "MZZ"):
                a, b = free.pop(), free.pop()
                targets = (qs[a], qs[b])
            else:
                targets = (qs[free.pop()],)
            if kind in ("MXX", "MZZ", "MX", "MZ"):
                ops.append(Op(kind, targets, label))
                label += 1
            else:
                ops.append(Op(kind, targets))
        layers.append(Layer(li, 0, tuple(ops)))
    return Circuit(qs, tuple(layers))


@dataclasses.dataclass
class OracleComparison:
    prob_tableau: float
    prob_statevector: float
    det_tableau: np.ndarray
    det_statevector: np.ndarray
    compared: int  # labels up to the first impossible outcome

    @property
    def agree(self) -> bool:
        k = self.compared
        return (abs(self.prob_tableau - self.prob_statevector) < 1e-9
                and bool(np.array_equal(self.det_tableau[:k], self.det_statevector[:k])))


def compare_forced(c: Circuit, record: Sequence[int]) -> OracleComparison:
    """Branch probability and determinism flags of a forced record."""
    rec, _ = tableau_run(c, mode="force", forced=list(record))
    p = 1.0
    m = c.num_measurements
    compared = m
    for lab in range(m):
        if rec.deterministic[lab]:
            if int(rec.bits[lab]) != int(record[lab]):
                p = 0.0
                compared = lab + 1
                break
        else:
            p *= 0.5
    psv, _, svr = run_statevector(c, DenseState.zero(c.n), ForceOutcomes(list(record)),
                                  cap=max(c.n, 1))
    return OracleComparison(p, psv, rec.deterministic, svr.deterministic, compared)


def random_oracle_trial(rng: np.random.Generator, max_qubits: int = 10,
                        max_depth: int = 12) -> OracleComparison:
    n = int(rng.integers(1, max_qubits + 1))
    c = random_circuit(n, int(rng.integers(1, max_depth + 1)), rng)
    sampled, _ = tableau_run(c, rng=rng)
    record = np.array(sampled.bits, dtype=np.uint8)
    if c.num_measurements and rng.random() < 0.3:
        record[int(rng.integers(c.num_measurements))] ^= 1
    return compare_forced(c, record)
