"""Stabilizer tableau with symbolic signs and a bit-packed Pauli frame sampler.

Paulis are stored in XZ form ``i^r X^x Z^z`` with ``x`` and ``z`` packed into
Python integers.  Products are then cheap:
``(X^a Z^b)(X^c Z^d) = (-1)^{|b & c|} X^{a^c} Z^{b^d}``.

The n system qubits are purified by n reference qubits, so the tableau
starts in the maximally mixed state and every preparation is a real
operation.  Signs of random measurement outcomes can be kept symbolic: each
random outcome becomes a fresh symbol and signs are bitmasks whose bit 0 is
the constant part and bit ``k + 1`` the k-th symbol.
"""

from __future__ import annotations

import dataclasses
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .circuit import CX, MX, MXX, MZ, MZZ, PREP_PLUS, PREP_ZERO, Circuit


def popcount(v: int) -> int:
    return bin(v).count("1")


@dataclasses.dataclass
class Row:
    x: int
    z: int
    r: int = 0  # power of i (mod 4) of the constant phase
    s: int = 0  # symbolic sign mask (bit k = symbol k)

    def copy(self) -> "Row":
        return Row(self.x, self.z, self.r, self.s)

    def mul(self, other: "Row") -> None:
        """self <- self * other."""
        self.r = (self.r + other.r + 2 * popcount(self.z & other.x)) & 3
        self.x ^= other.x
        self.z ^= other.z
        self.s ^= other.s

    def anticommutes(self, x: int, z: int) -> bool:
        return popcount((self.x & z) ^ (self.z & x)) & 1 == 1

    def sign_mask(self) -> int:
        """Sign of the row relative to the Hermitian canonical form.

        Bit 0 is the constant sign, higher bits are the symbols.
        """
        e = (self.r - popcount(self.x & self.z)) & 3
        if e & 1:
            raise ValueError("row is not Hermitian")
        return (e >> 1) | (self.s << 1)


def pauli_row(x: int, z: int, sign: int = 0) -> Row:
    """Hermitian Pauli with given X/Z support and sign bit."""
    return Row(x, z, (popcount(x & z) + 2 * sign) & 3, 0)


def pauli_from_ops(spec: Dict[int, str]) -> Tuple[int, int]:
    x = z = 0
    for q, p in spec.items():
        if p in ("X", "Y"):
            x |= 1 << q
        if p in ("Z", "Y"):
            z |= 1 << q
    return x, z


class Tableau:
    """Purified stabilizer state of n system plus n reference qubits."""

    def __init__(self, n: int):
        self.n = n
        big = 2 * n
        self.N = big
        self.stab: List[Row] = []
        self.destab: List[Row] = []
        for j in range(n):
            r = n + j
            self.stab.append(pauli_row((1 << j) | (1 << r), 0))
            self.destab.append(pauli_row(0, 1 << j))
            self.stab.append(pauli_row(0, (1 << j) | (1 << r)))
            self.destab.append(pauli_row(1 << r, 0))
        self.num_symbols = 0
        self.system_mask = (1 << n) - 1

    # -- gates -----------------------------------------------------------
    def cx(self, c: int, t: int) -> None:
        bc, bt = 1 << c, 1 << t
        for row in self.stab + self.destab:
            # In XZ form the image X_c^a X_t^(a^b) Z_c^(e^f) Z_t^f needs no
            # reordering, so the phase is unchanged.
            if row.x & bc:
                row.x ^= bt
            if row.z & bt:
                row.z ^= bc

    def apply_pauli(self, x: int, z: int, sign_mask: int = 1) -> None:
        """Conjugate by a Pauli; ``sign_mask`` selects when it is applied.

        ``sign_mask`` = 1 applies it unconditionally; a mask with symbol
        bits applies it conditioned on those symbols.
        """
        const, sym = sign_mask & 1, sign_mask >> 1
        for row in self.stab + self.destab:
            if row.anticommutes(x, z):
                if const:
                    row.r = (row.r + 2) & 3
                row.s ^= sym

    # -- measurement -----------------------------------------------------
    def measure(self, x: int, z: int, mode: str = "symbolic",
                forced: Optional[int] = None, rng=None) -> Tuple[int, bool]:
        """Measure the Hermitian Pauli ``X^x Z^z`` (canonical sign).

        Returns ``(mask, deterministic)``: the outcome bit as a sign mask
        (bit 0 constant, higher bits symbols) and whether it was determined
        by the state.  ``mode`` picks how random outcomes are resolved:
        ``symbolic`` (fresh symbol), ``sample`` (``rng``) or ``force``
        (``forced`` bit, default 0).
        """
        p = None
        for i, row in enumerate(self.stab):
            if row.anticommutes(x, z):
                p = i
                break
        if p is None:
            acc = Row(0, 0, 0, 0)
            for i, row in enumerate(self.destab):
                if row.anticommutes(x, z):
                    acc.mul(self.stab[i])
            if acc.x != x or acc.z != z:
                raise AssertionError("measured Pauli not in the stabilizer group")
            return acc.sign_mask(), True
        piv = self.stab[p]
        for i, row in enumerate(self.stab):
            if i != p and row.anticommutes(x, z):
                row.mul(piv)
        for i, row in enumerate(self.destab):
            if i != p and row.anticommutes(x, z):
                row.mul(piv)
        self.destab[p] = piv
        if mode == "symbolic":
            mask = 1 << (self.num_symbols + 1)
            self.num_symbols += 1
        elif mode == "sample":
            mask = int(rng.integers(2))
        elif mode == "force":
            mask = int(forced or 0) & 1
        else:
            raise ValueError(f"unknown mode {mode!r}")
        new = pauli_row(x, z, mask & 1)
        new.s = mask >> 1
        self.stab[p] = new
        return mask, False

    def peek(self, x: int, z: int) -> Optional[int]:
        """Sign mask if the Pauli is determined, else None."""
        for row in self.stab:
            if row.anticommutes(x, z):
                return None
        acc = Row(0, 0, 0, 0)
        for i, row in enumerate(self.destab):
            if row.anticommutes(x, z):
                acc.mul(self.stab[i])
        return acc.sign_mask()

    def reset(self, q: int, basis: str) -> None:
        """Prepare qubit q in |0> (Z) or |+> (X)."""
        x, z = (0, 1 << q) if basis == "Z" else (1 << q, 0)
        mask, det = self.measure(x, z, mode="force", forced=0)
        if det and mask:
            # Deterministically in the wrong eigenstate: flip it back,
            # conditioned on the symbols the sign depends on.
            fx, fz = (1 << q, 0) if basis == "Z" else (0, 1 << q)
            self.apply_pauli(fx, fz, mask)

    # -- analysis --------------------------------------------------------
    def isg_generators(self) -> List[Row]:
        """Basis of the stabilizers supported on system qubits only."""
        rows = [r.copy() for r in self.stab]
        ref_shift = self.n
        pivots_done = 0
        for col in range(self.n):
            for part in ("x", "z"):
                bit = 1 << (ref_shift + col)
                pr = None
                for i in range(pivots_done, len(rows)):
                    if getattr(rows[i], part) & bit:
                        pr = i
                        break
                if pr is None:
                    continue
                rows[pivots_done], rows[pr] = rows[pr], rows[pivots_done]
                piv = rows[pivots_done]
                for i in range(len(rows)):
                    if i != pivots_done and getattr(rows[i], part) & bit:
                        rows[i].mul(piv)
                pivots_done += 1
        return rows[pivots_done:]

    def isg_rank(self) -> int:
        return len(self.isg_generators())

    def check_symplectic(self) -> bool:
        rows = self.stab + self.destab
        half = len(self.stab)
        for i, a in enumerate(rows):
            for j, b in enumerate(rows):
                if a.anticommutes(b.x, b.z) != (abs(i - j) == half):
                    return False
        return True


def isg_rank(tab: Tableau) -> int:
    return tab.isg_rank()


# --------------------------------------------------------------------------
# Circuit execution
# --------------------------------------------------------------------------

def op_pauli(name: str, qs: Sequence[int]) -> Tuple[int, int]:
    m = 0
    for q in qs:
        m |= 1 << q
    if name in (MXX, MX):
        return m, 0
    return 0, m


@dataclasses.dataclass
class MeasRecord:
    """Outcome bits per label (bit b means outcome (-1)^b)."""

    bits: np.ndarray
    deterministic: np.ndarray
    masks: Optional[List[int]] = None

    @property
    def outcomes(self) -> np.ndarray:
        return 1 - 2 * self.bits.astype(np.int64)

    def __len__(self) -> int:
        return len(self.bits)


def _faults_by_layer(faults) -> Tuple[Dict[int, list], set]:
    by_layer: Dict[int, list] = {}
    flips = set()
    for f in faults or ():
        if f.kind == "flip":
            flips ^= {f.label}
        else:
            by_layer.setdefault(f.layer, []).append(f)
    return by_layer, flips


def run(c: Circuit, faults=None, rng=None, mode: Optional[str] = None,
        forced: Optional[Sequence[int]] = None) -> Tuple[MeasRecord, Tableau]:
    """Simulate the circuit on the tableau.

    ``mode`` defaults to ``sample`` when an rng is given, else
    ``symbolic``.  ``forced`` gives bits for ``force`` mode.  Faults are
    applied after their layer; measurement flips toggle the record only.
    """
    if mode is None:
        mode = "sample" if rng is not None else "symbolic"
    by_layer, flips = _faults_by_layer(faults)
    tab = Tableau(c.n)
    m = c.num_measurements
    masks = [0] * m
    det = np.zeros(m, dtype=bool)
    for li, layer in enumerate(c.compiled()):
        for name, qs, label in layer:
            if name == CX:
                tab.cx(qs[0], qs[1])
            elif name == PREP_ZERO:
                tab.reset(qs[0], "Z")
            elif name == PREP_PLUS:
                tab.reset(qs[0], "X")
            else:
                x, z = op_pauli(name, qs)
                f = None if forced is None else forced[label]
                mask, d = tab.measure(x, z, mode=mode, forced=f, rng=rng)
                masks[label] = mask
                det[label] = d
        for f in by_layer.get(li, ()):
            x, z = pauli_from_ops({c.index[f.qubit] if not isinstance(f.qubit, int)
                                   else f.qubit: f.pauli})
            tab.apply_pauli(x, z)
    bits = np.array([mk & 1 for mk in masks], dtype=np.uint8)
    for lab in flips:
        bits[lab] ^= 1
    return MeasRecord(bits, det, masks if mode == "symbolic" else None), tab


def reference_record(c: Circuit) -> MeasRecord:
    """Noiseless symbolic run; random outcomes resolved to +1."""
    rec, _ = run(c, mode="symbolic")
    return rec


# --------------------------------------------------------------------------
# Pauli frame sampler
# --------------------------------------------------------------------------

class FrameSampler:
    """Bit-packed Pauli frames for many shots at once.

    Frames live in arrays of shape ``(n, words)`` with 64 shots per word.
    After each measurement the frame is multiplied by the measured Pauli
    with probability 1/2, after preparations by the stabilized Pauli,
    which reproduces the randomness of non-deterministic outcomes.
    """

    def __init__(self, c: Circuit):
        self.c = c
        self.layers = c.compiled()

    def sample(self, shots: int, rng: np.random.Generator,
               noise_fn=None, ref_bits: Optional[np.ndarray] = None,
               initial_frame=None) -> np.ndarray:
        """Return packed measurement bits of shape ``(num_meas, words)``.

        ``noise_fn(layer_index, x, z, flips, rng)`` injects faults after
        each layer (it may toggle bits in ``flips``, the packed record of
        measurement flips).  ``initial_frame`` is an optional pair of
        bool arrays (n,) applied before layer 0 to every shot.
        """
        words = (shots + 63) // 64
        n = self.c.n
        x = np.zeros((n, words), dtype=np.uint64)
        z = np.zeros((n, words), dtype=np.uint64)
        rec = np.zeros((self.c.num_measurements, words), dtype=np.uint64)
        tail = shots % 64
        full = np.uint64(0xFFFFFFFFFFFFFFFF)

        def rand():
            return rng.integers(0, full, size=words, dtype=np.uint64, endpoint=True)

        if initial_frame is not None:
            fx, fz = initial_frame
            x[np.asarray(fx, dtype=bool)] = full
            z[np.asarray(fz, dtype=bool)] = full
        for li, layer in enumerate(self.layers):
            for name, qs, label in layer:
                if name == CX:
                    a, b = qs
                    x[b] ^= x[a]
                    z[a] ^= z[b]
                elif name == PREP_ZERO:
                    q = qs[0]
                    x[q] = 0
                    z[q] = rand()
                elif name == PREP_PLUS:
                    q = qs[0]
                    z[q] = 0
                    x[q] = rand()
                elif name in (MXX, MX):
                    f = z[qs[0]].copy()
                    for q in qs[1:]:
                        f ^= z[q]
                    rec[label] = f
                    r = rand()
                    for q in qs:
                        x[q] ^= r
                else:
                    f = x[qs[0]].copy()
                    for q in qs[1:]:
                        f ^= x[q]
                    rec[label] = f
                    r = rand()
                    for q in qs:
                        z[q] ^= r
            if noise_fn is not None:
                noise_fn(li, x, z, rec, rng)
        if ref_bits is not None:
            on = np.asarray(ref_bits, dtype=bool)
            rec[on] ^= full
        if tail:
            rec[:, -1] &= np.uint64((1 << tail) - 1)
        return rec


def unpack_shots(packed: np.ndarray, shots: int) -> np.ndarray:
    """(rows, words) uint64 -> (shots, rows) uint8."""
    b = np.unpackbits(packed.view(np.uint8).reshape(packed.shape[0], -1),
                      axis=1, bitorder="little")
    return np.ascontiguousarray(b[:, :shots].T)


def pauli_frame_sample(c: Circuit, ref: MeasRecord, faults) -> MeasRecord:
    """Record of a single shot with the given faults, by frame propagation.

    Random frame choices are fixed to 'no flip', so the result is the
    reference record flipped wherever the propagated fault frame
    anticommutes with the measured operator.
    """
    by_layer, flips = _faults_by_layer(faults)
    n = c.n
    x = np.zeros(n, dtype=np.uint8)
    z = np.zeros(n, dtype=np.uint8)
    bits = np.array(ref.bits, dtype=np.uint8).copy()
    for li, layer in enumerate(c.compiled()):
        for name, qs, label in layer:
            if name == CX:
                a, b = qs
                x[b] ^= x[a]
                z[a] ^= z[b]
            elif name == PREP_ZERO:
                x[qs[0]] = 0
                z[qs[0]] = 0
            elif name == PREP_PLUS:
                x[qs[0]] = 0
                z[qs[0]] = 0
            elif name in (MXX, MX):
                bits[label] ^= np.bitwise_xor.reduce(z[list(qs)])
            else:
                bits[label] ^= np.bitwise_xor.reduce(x[list(qs)])
        for f in by_layer.get(li, ()):
            q = c.index[f.qubit] if not isinstance(f.qubit, int) else f.qubit
            if f.pauli in ("X", "Y"):
                x[q] ^= 1
            if f.pauli in ("Z", "Y"):
                z[q] ^= 1
    for lab in flips:
        bits[lab] ^= 1
    return MeasRecord(bits, np.array(ref.deterministic))
