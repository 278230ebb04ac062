"""Circuit-level distance: smallest fault set with empty syndrome that flips
a tracked logical.

Fault signatures (syndrome mask, observable mask) come from the frame
sampler with one elementary fault per shot, independently of the segment
maps used to build the detector graph.
"""

from __future__ import annotations

import itertools
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .noise import Fault, enumerate_faults
from .syndrome import DetectorGraph, detector_bits, observable_bits
from .tableau import FrameSampler, unpack_shots

Signature = Tuple[int, int]  # (detector mask, observable mask)


def _pack(bits: np.ndarray) -> int:
    return int.from_bytes(np.packbits(bits, bitorder="little").tobytes(), "little")


def fault_signatures(g: DetectorGraph, faults: Optional[Sequence[Fault]] = None) -> List[Signature]:
    """Simulated signature of each elementary fault."""
    c = g.circuit
    faults = list(enumerate_faults(c) if faults is None else faults)
    shots = len(faults)
    if shots == 0:
        return []
    by_layer: Dict[int, List[Tuple[int, Fault]]] = {}
    label_layer = {lab: li for lab, (li, _) in enumerate(c.measurements())}
    for k, f in enumerate(faults):
        li = f.layer if f.kind == "pauli" else label_layer[f.label]
        by_layer.setdefault(li, []).append((k, f))

    def noise(li, x, z, rec, rng):
        for k, f in by_layer.get(li, ()):
            w, bit = k >> 6, np.uint64(1) << np.uint64(k & 63)
            if f.kind == "flip":
                rec[f.label, w] ^= bit
                continue
            if f.pauli in ("X", "Y"):
                x[f.qubit, w] ^= bit
            if f.pauli in ("Z", "Y"):
                z[f.qubit, w] ^= bit

    packed = FrameSampler(c).sample(shots, np.random.default_rng(0), noise,
                                    ref_bits=g.ref.bits)
    rec = unpack_shots(packed, shots)
    dets = detector_bits(g, rec)
    obs = observable_bits(g, rec)
    return [(_pack(dets[k]), _pack(obs[k])) for k in range(shots)]


def exhaustive_min_weight(sigs: Sequence[Signature], max_weight: int = 3) -> Optional[int]:
    """Smallest weight <= max_weight (at most 3) of an undetected logical."""
    if max_weight > 3:
        raise ValueError("exhaustive search supports weights up to 3")
    if any(s == 0 and o for s, o in sigs):
        return 1
    by_syn: Dict[int, set] = {}
    for s, o in sigs:
        by_syn.setdefault(s, set()).add(o)
    if max_weight >= 2 and any(len(v) > 1 for v in by_syn.values()):
        return 2
    if max_weight >= 3:
        for (s1, o1), (s2, o2) in itertools.combinations(sigs, 2):
            hit = by_syn.get(s1 ^ s2)
            if hit and any(o ^ o1 ^ o2 for o in hit):
                return 3
    return None


def random_search(sigs: Sequence[Signature], samples: int, rng: np.random.Generator,
                  max_len: int = 64) -> Tuple[Optional[int], int]:
    """Random-walk search for undetected logicals.

    Each sample starts from a random fault and keeps adding a random fault
    that touches the lowest fired detector until the syndrome is empty or
    ``max_len`` faults were used.  Returns the smallest weight found (None
    if nothing was found) and the number of logicals found.
    """
    touching: Dict[int, List[int]] = {}
    for k, (s, _) in enumerate(sigs):
        m = s
        while m:
            low = m & -m
            touching.setdefault(low.bit_length() - 1, []).append(k)
            m ^= low
    best: Optional[int] = None
    found = 0
    starts = rng.integers(0, len(sigs), size=samples)
    for k0 in starts:
        s, o = sigs[k0]
        used = {int(k0)}
        steps = 1
        while s and steps < max_len:
            d = (s & -s).bit_length() - 1
            cand = touching[d]
            k = cand[int(rng.integers(len(cand)))]
            s ^= sigs[k][0]
            o ^= sigs[k][1]
            used ^= {k}
            steps += 1
        if s == 0 and o:
            found += 1
            if best is None or len(used) < best:
                best = len(used)
    return best, found
