"""Dense state-vector simulation for small circuits.

Qubit ``i`` of a circuit is bit ``i`` of the basis index.  Measurements
apply the projector ``(1 + s P)/2`` for outcome ``s`` and renormalize;
preparations trace in a fresh qubit in ``|0>`` or ``|+>``.  Arrays carry a
leading batch axis so that several input states can share one run.
"""

from __future__ import annotations

import dataclasses
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .circuit import CX, MX, MXX, MZ, MZZ, PREP_PLUS, PREP_ZERO, Circuit

DEFAULT_CAP = 20
TOL = 1e-12


class StatevectorError(ValueError):
    pass


# --------------------------------------------------------------------------
# Array primitives; ``a`` has shape (batch, 2**n)
# --------------------------------------------------------------------------

def _view(a: np.ndarray, n: int) -> np.ndarray:
    return a.reshape((a.shape[0],) + (2,) * n)


def _axis(n: int, q: int) -> int:
    return n - q  # batch axis first, qubit 0 is the last axis


def apply_cx(a: np.ndarray, n: int, c: int, t: int) -> None:
    v = _view(a, n)
    ac, at = _axis(n, c), _axis(n, t)
    sl = [slice(None)] * (n + 1)
    sl[ac] = 1
    sub = v[tuple(sl)]
    sub[...] = np.flip(sub, axis=at - (1 if at > ac else 0)).copy()


def apply_x(a: np.ndarray, n: int, xmask: int) -> np.ndarray:
    axes = [_axis(n, q) for q in range(n) if xmask >> q & 1]
    if not axes:
        return a
    return np.flip(_view(a, n), axis=axes).reshape(a.shape)


_PARITY_CACHE: Dict[Tuple[int, int], np.ndarray] = {}


def z_signs(n: int, zmask: int) -> np.ndarray:
    """(-1)^(popcount(index & zmask)) as float array."""
    key = (n, zmask)
    s = _PARITY_CACHE.get(key)
    if s is None:
        idx = np.arange(1 << n, dtype=np.uint64)
        s = 1.0 - 2.0 * (np.bitwise_count(idx & np.uint64(zmask)) & 1)
        if len(_PARITY_CACHE) > 64:
            _PARITY_CACHE.clear()
        _PARITY_CACHE[key] = s
    return s


def apply_pauli(a: np.ndarray, n: int, x: int, z: int, r: int = 0) -> np.ndarray:
    """``i^r X^x Z^z`` applied to every batch row (returns a new array)."""
    out = a * z_signs(n, z) if z else a.copy()
    out = apply_x(out, n, x)
    r &= 3
    if r == 2:
        out = -out
    elif r:
        if not np.iscomplexobj(out):
            raise StatevectorError("imaginary Pauli phase on a real state")
        out = out * (1j if r == 1 else -1j)
    return out


def project(a: np.ndarray, n: int, x: int, z: int, sign: int) -> np.ndarray:
    """``(1 + sign P)/2 a`` for the Hermitian Pauli ``X^x Z^z`` (x, z
    disjoint)."""
    if x & z:
        raise StatevectorError("projector expects disjoint X and Z support")
    return 0.5 * (a + sign * apply_pauli(a, n, x, z))


def expectation(a: np.ndarray, n: int, x: int, z: int) -> np.ndarray:
    """Per-row <a|P|a> for a disjoint-support Pauli."""
    pa = apply_pauli(a, n, x, z)
    return np.real(np.sum(np.conj(a) * pa, axis=1))


def _norm2(a: np.ndarray) -> np.ndarray:
    return np.real(np.sum(np.conj(a) * a, axis=1))


def _prep(a: np.ndarray, n: int, q: int, basis: str) -> np.ndarray:
    """Reset qubit q: keep the +1 component of the prepared Pauli (Z for
    |0>, X for |+>), or flip the -1 component when the +1 part vanishes.

    This is the branch the tableau picks for a reset, so both simulators
    carry the same conditional state."""
    x, z = (0, 1 << q) if basis == "Z" else (1 << q, 0)
    keep = project(a, n, x, z, 1)
    rows = []
    for i in range(a.shape[0]):
        if _norm2(keep[i:i + 1])[0] > TOL:
            rows.append(keep[i])
        else:
            other = project(a[i:i + 1], n, x, z, -1)
            rows.append(apply_pauli(other, n, z, x)[0])
    out = np.stack(rows)
    nrm = np.sqrt(_norm2(out))
    return out / np.where(nrm > 0, nrm, 1.0)[:, None]


def op_masks(name: str, qs: Sequence[int]) -> Tuple[int, int]:
    m = 0
    for q in qs:
        m |= 1 << q
    if name in (MXX, MX):
        return m, 0
    if name in (MZZ, MZ):
        return 0, m
    raise StatevectorError(f"{name} is not a measurement")


# --------------------------------------------------------------------------
# Public API
# --------------------------------------------------------------------------

@dataclasses.dataclass
class DenseState:
    amplitudes: np.ndarray
    n: int

    @classmethod
    def zero(cls, n: int, dtype=np.complex128) -> "DenseState":
        a = np.zeros(1 << n, dtype=dtype)
        a[0] = 1
        return cls(a, n)

    @classmethod
    def basis(cls, bits: Sequence[int], dtype=np.complex128) -> "DenseState":
        n = len(bits)
        a = np.zeros(1 << n, dtype=dtype)
        a[sum(int(b) << i for i, b in enumerate(bits))] = 1
        return cls(a, n)

    def copy(self) -> "DenseState":
        return DenseState(self.amplitudes.copy(), self.n)

    def norm(self) -> float:
        return float(np.sqrt(np.real(np.vdot(self.amplitudes, self.amplitudes))))

    def normalized(self) -> "DenseState":
        return DenseState(self.amplitudes / self.norm(), self.n)


@dataclasses.dataclass
class SampleOutcomes:
    rng: np.random.Generator


@dataclasses.dataclass
class ForceOutcomes:
    record: Sequence[int]  # bit per label


@dataclasses.dataclass
class SVRecord:
    bits: np.ndarray
    deterministic: np.ndarray
    probabilities: np.ndarray  # probability of the recorded outcome


def run_statevector(c: Circuit, state: Optional[DenseState] = None, policy=None,
                    cap: int = DEFAULT_CAP, layers: Optional[Sequence[int]] = None,
                    renormalize: bool = True
                    ) -> Tuple[float, Optional[DenseState], SVRecord]:
    """Run ``c`` (or the listed layers) on a dense state.

    Returns the probability of the produced record, the final state and the
    record.  With ``ForceOutcomes`` a record of probability 0 yields
    ``(0.0, None, record)``.  With ``renormalize=False`` the state is left
    unnormalized so that it represents the forced branch operator applied
    to the input.
    """
    n = c.n
    if n > cap:
        raise StatevectorError(f"{n} qubits exceeds the cap of {cap}")
    if state is None:
        state = DenseState.zero(n)
    if state.n != n:
        raise StatevectorError("state and circuit sizes differ")
    if policy is None:
        policy = ForceOutcomes([0] * c.num_measurements)
    a = state.amplitudes.reshape(1, -1).copy()
    m = c.num_measurements
    bits = np.zeros(m, dtype=np.uint8)
    det = np.zeros(m, dtype=bool)
    probs = np.ones(m)
    prob = 1.0
    compiled = c.compiled()
    which = range(len(compiled)) if layers is None else layers
    for li in which:
        for name, qs, label in compiled[li]:
            if name == CX:
                apply_cx(a, n, qs[0], qs[1])
                continue
            if name in (PREP_ZERO, PREP_PLUS):
                a = _prep(a, n, qs[0], "Z" if name == PREP_ZERO else "X")
                continue
            x, z = op_masks(name, qs)
            nrm2 = _norm2(a)[0]
            p_plus = 0.5 * (1.0 + expectation(a, n, x, z)[0] / nrm2)
            p_plus = min(1.0, max(0.0, p_plus))
            det[label] = p_plus < TOL or p_plus > 1 - TOL
            if isinstance(policy, SampleOutcomes):
                b = int(policy.rng.random() >= p_plus)
            else:
                b = int(policy.record[label]) & 1
            p = p_plus if b == 0 else 1.0 - p_plus
            bits[label] = b
            probs[label] = p
            prob *= p
            if p < TOL:
                return 0.0, None, SVRecord(bits, det, probs)
            a = project(a, n, x, z, 1 - 2 * b)
            if renormalize:
                a = a / np.sqrt(p * nrm2)
    return prob, DenseState(a.reshape(-1), n), SVRecord(bits, det, probs)


def forced_operator(c: Circuit, record: Sequence[int], layers: Sequence[int],
                    cap: int = 12) -> np.ndarray:
    """Matrix ``O[y, x]`` of the listed layers with forced outcomes.

    Projectors are applied without renormalization, so ``O`` is the product
    of the CX unitaries and the ``(1 +- P)/2`` projectors.
    """
    n = c.n
    if n > cap:
        raise StatevectorError(f"{n} qubits exceeds the operator cap of {cap}")
    a = np.eye(1 << n)  # row x is the input basis state |x>
    compiled = c.compiled()
    for li in layers:
        for name, qs, label in compiled[li]:
            if name == CX:
                apply_cx(a, n, qs[0], qs[1])
            elif name in (PREP_ZERO, PREP_PLUS):
                raise StatevectorError("forced_operator does not support preparations")
            else:
                x, z = op_masks(name, qs)
                a = project(a, n, x, z, 1 - 2 * (int(record[label]) & 1))
    return a.T.copy()


def branch_tree(c: Circuit, state: Optional[DenseState] = None,
                cap: int = 12, max_meas: int = 12) -> List[Tuple[Tuple[int, ...], float]]:
    """Every outcome record with nonzero probability, by breadth-first
    expansion (deterministic outcomes contribute a single branch)."""
    n = c.n
    if n > cap or c.num_measurements > max_meas:
        raise StatevectorError("circuit too large for full branch enumeration")
    if state is None:
        state = DenseState.zero(n)
    live = [((), 1.0, state.amplitudes.reshape(1, -1).copy())]
    compiled = c.compiled()
    for layer in compiled:
        for name, qs, label in layer:
            nxt = []
            for rec, p, a in live:
                if name == CX:
                    apply_cx(a, n, qs[0], qs[1])
                    nxt.append((rec, p, a))
                elif name in (PREP_ZERO, PREP_PLUS):
                    nxt.append((rec, p, _prep(a, n, qs[0], "Z" if name == PREP_ZERO else "X")))
                else:
                    x, z = op_masks(name, qs)
                    pp = 0.5 * (1.0 + expectation(a, n, x, z)[0])
                    for b, pb in ((0, pp), (1, 1.0 - pp)):
                        if pb > TOL:
                            s = 1 - 2 * b
                            nxt.append((rec + (b,), p * pb, project(a, n, x, z, s) / np.sqrt(pb)))
            live = nxt
    return [(rec, p) for rec, p, _ in live]


# --------------------------------------------------------------------------
# Branch folding
# --------------------------------------------------------------------------

def _popcount(v: int) -> int:
    return bin(v).count("1")


@dataclasses.dataclass
class Pauli:
    """``i^r X^x Z^z`` on bit masks."""

    x: int
    z: int
    r: int = 0

    def copy(self) -> "Pauli":
        return Pauli(self.x, self.z, self.r)

    def mul(self, o: "Pauli") -> "Pauli":
        """self <- self * o"""
        self.r = (self.r + o.r + 2 * _popcount(self.z & o.x)) & 3
        self.x ^= o.x
        self.z ^= o.z
        return self

    def anticommutes(self, x: int, z: int) -> bool:
        return (_popcount(self.x & z) + _popcount(self.z & x)) & 1 == 1

    def cx(self, c: int, t: int) -> None:
        if self.x >> c & 1:
            self.x ^= 1 << t
        if self.z >> t & 1:
            self.z ^= 1 << c

    def apply(self, a: np.ndarray, n: int) -> np.ndarray:
        return apply_pauli(a, n, self.x, self.z, self.r)


@dataclasses.dataclass
class Fold:
    label: int
    frame: Pauli  # the stabilizer relating the two branches, kept current


@dataclasses.dataclass
class Branch:
    amps: np.ndarray  # (batch, 2**n), unnormalized
    stabs: List[Pauli]
    bits: Dict[int, int]
    folds: List[Fold]
    live: List[int]  # labels that split the branch
    flips: Dict[int, int]  # label -> mask of folds that flip it

    def copy(self) -> "Branch":
        return Branch(self.amps.copy(), [s.copy() for s in self.stabs], dict(self.bits),
                      [Fold(f.label, f.frame.copy()) for f in self.folds], list(self.live),
                      dict(self.flips))

    @classmethod
    def start(cls, amps: np.ndarray, stabs: Sequence[Pauli]) -> "Branch":
        return cls(amps, [s.copy() for s in stabs], {}, [], [], {})

    def parity_mask(self, labels: Sequence[int]) -> Tuple[int, int]:
        """(bit, fold mask) of the parity of ``labels`` in this branch."""
        bit = mask = 0
        for lab in labels:
            bit ^= self.bits[lab]
            mask ^= self.flips.get(lab, 0)
        return bit, mask


def _replace_anticommuting(stabs: List[Pauli], x: int, z: int, new: Pauli) -> Optional[Pauli]:
    """Stabilizer update for measuring ``X^x Z^z`` with result ``new``.

    Returns the removed generator that anticommuted (None if all commute).
    """
    idx = [i for i, s in enumerate(stabs) if s.anticommutes(x, z)]
    if not idx:
        stabs.append(new)
        return None
    p = idx[-1]
    piv = stabs[p]
    for i in idx[:-1]:
        stabs[i].mul(piv)
    stabs[p] = new
    return piv


def _is_eigen(a: np.ndarray, n: int, p: Pauli, sign: int, tol: float = 1e-9) -> bool:
    pa = p.apply(a, n)
    return float(np.max(np.abs(pa - sign * a))) <= tol * max(1.0, float(np.max(np.abs(a))))


def folded_run(c: Circuit, branch: Branch, layers: Sequence[int], verify: bool = True,
               max_branches: int = 64) -> List[Branch]:
    """Run layers on a batch of states sharing the stabilizers ``stabs``.

    A measurement anticommuting with a known stabilizer ``S`` is random; its
    -1 branch equals ``S`` times the +1 branch, so only the +1 branch is
    kept (scaled by sqrt 2) and ``S`` is remembered as a fold frame.  A
    measurement commuting with all known stabilizers is deterministic when
    every batch row is an eigenstate, and otherwise splits the branch.
    """
    n = c.n
    compiled = c.compiled()
    live = [branch]
    for li in layers:
        for name, qs, label in compiled[li]:
            nxt: List[Branch] = []
            for br in live:
                if name == CX:
                    apply_cx(br.amps, n, qs[0], qs[1])
                    for s in br.stabs:
                        s.cx(qs[0], qs[1])
                    for f in br.folds:
                        f.frame.cx(qs[0], qs[1])
                    nxt.append(br)
                    continue
                if name in (PREP_ZERO, PREP_PLUS):
                    q = qs[0]
                    x, z = (0, 1 << q) if name == PREP_ZERO else (1 << q, 0)
                    br.amps = _prep(br.amps, n, q, "Z" if name == PREP_ZERO else "X")
                    _replace_anticommuting(br.stabs, x, z, Pauli(x, z))
                    nxt.append(br)
                    continue
                x, z = op_masks(name, qs)
                P = Pauli(x, z)
                fm = 0
                for j, f in enumerate(br.folds):
                    if f.frame.anticommutes(x, z):
                        fm |= 1 << j
                if fm:
                    br.flips[label] = fm
                anti = [s for s in br.stabs if s.anticommutes(x, z)]
                if anti:
                    S = anti[-1].copy()
                    if verify and not _is_eigen(br.amps, n, S, 1):
                        raise StatevectorError(f"fold frame is not a stabilizer at label {label}")
                    br.amps = project(br.amps, n, x, z, 1) * np.sqrt(2.0)
                    _replace_anticommuting(br.stabs, x, z, P)
                    br.flips[label] = br.flips.get(label, 0) | (1 << len(br.folds))
                    br.folds.append(Fold(label, S))
                    br.bits[label] = 0
                    nxt.append(br)
                    continue
                # Deterministic outcomes are already in the stabilizer group.
                if _is_eigen(br.amps, n, P, 1):
                    br.bits[label] = 0
                    nxt.append(br)
                    continue
                if _is_eigen(br.amps, n, P, -1):
                    br.bits[label] = 1
                    nxt.append(br)
                    continue
                for b in (0, 1):
                    child = br.copy() if b == 0 else br
                    sign = 1 - 2 * b
                    child.amps = project(child.amps, n, x, z, sign)
                    child.bits[label] = b
                    child.stabs.append(Pauli(x, z, 0 if b == 0 else 2))
                    child.live.append(label)
                    nxt.append(child)
            live = nxt
            if len(live) > max_branches:
                raise StatevectorError("too many live branches")
    return live


# --------------------------------------------------------------------------
# Logical channels
# --------------------------------------------------------------------------

def strip_logicals(stabs: Sequence[Pauli], logicals: Sequence[Tuple[int, int]]) -> List[Pauli]:
    """Generators of the subgroup commuting with every given Pauli."""
    out = [s.copy() for s in stabs]
    for x, z in logicals:
        idx = [i for i, s in enumerate(out) if s.anticommutes(x, z)]
        if not idx:
            continue
        piv = out[idx[-1]]
        for i in idx[:-1]:
            out[i].mul(piv)
        del out[idx[-1]]
    return out


@dataclasses.dataclass
class ChannelResult:
    """Per outcome class ``m``: ``matrices[m][out, in]`` on the logical
    basis and the class probability of each input basis state."""

    matrices: Dict[int, np.ndarray]
    probabilities: Dict[int, np.ndarray]
    branches: List[Branch]

    def probability(self, m: int, coeffs: Sequence[complex]) -> float:
        """Class probability for the logical input ``sum coeffs[i] |i>``."""
        v = np.asarray(coeffs, dtype=complex)
        v = v / np.linalg.norm(v)
        K = self.matrices.get(m)
        if K is None:
            return 0.0
        return float(np.real(np.vdot(K @ v, K @ v)))


def logical_channel(c: Circuit, inputs: np.ndarray, stabs: Sequence[Pauli],
                    layers: Sequence[int], class_labels: Sequence[int],
                    reference: np.ndarray, cap: int = 24) -> ChannelResult:
    """Logical action of ``layers`` grouped by outcome class.

    ``inputs`` are logical basis states (rows) sharing the stabilizers
    ``stabs``; ``reference`` holds the output logical basis states.  The
    class of a branch is the parity of ``class_labels``.  Folded random
    outcomes are corrected by their fold frames, so each class collects
    every record of that class; a fold that changed the class parity would
    make the class ill defined and raises.
    """
    n = c.n
    if n > cap:
        raise StatevectorError(f"{n} qubits exceeds the cap of {cap}")
    branches = folded_run(c, Branch.start(np.array(inputs, copy=True), stabs), layers)
    mats: Dict[int, np.ndarray] = {}
    probs: Dict[int, np.ndarray] = {}
    for br in branches:
        bit, fm = br.parity_mask(class_labels)
        if fm:
            raise StatevectorError("a random outcome changes the class parity")
        K = np.conj(reference) @ br.amps.T
        p = _norm2(br.amps)
        mats[bit] = mats.get(bit, 0) + K
        probs[bit] = probs.get(bit, 0) + p
    return ChannelResult(mats, probs, branches)


def _mask(c: Circuit, pred) -> int:
    m = 0
    for i, q in enumerate(c.qubits):
        if pred(q):
            m |= 1 << i
    return m


def surgery_channel(c: Circuit) -> ChannelResult:
    """Logical ZZ channel of a surgery circuit on the basis |ab>.

    Inputs: the noiseless first period applied to ``|+>`` on both blocks
    (bridge in ``|0>``) gives the logical ``|++>``; projecting on the row
    operators ``Z1``, ``Z2`` gives ``|ab>`` with phases fixed by ``|++>``.
    References: the same inputs evolved by the memory schedule without the
    merge, with the bridge set to ``|+>``.  The outcome class is the
    parity of the labels crossing the ``M`` cut.
    """
    from .syndrome import cut_parity, segments_for_outcome

    lat = c.lattice
    n = c.n
    if n > 24:
        raise StatevectorError("surgery channel needs at most 24 qubits")
    bridge = _mask(c, lat.is_bridge)
    z1 = _mask(c, lambda q: q.is_green and q.z2 == 0)
    z2 = _mask(c, lambda q: q.is_green and q.z2 == 2 * lat.l1)
    idx = np.arange(1 << n, dtype=np.uint64)
    v = np.where((idx & np.uint64(bridge)) == 0, 1.0, 0.0)
    v /= np.linalg.norm(v)
    stabs = [Pauli(0, 1 << q) if bridge >> q & 1 else Pauli(1 << q, 0) for q in range(n)]
    period0 = [L.index for L in c.layers if 0 <= L.h2 < 4]
    if any(lat.is_bridge(q) for i in period0 for q in c.layers[i].qubits()):
        raise StatevectorError("surgery channel needs a merge-free first period")
    (br,) = folded_run(c, Branch.start(v[None, :], stabs), period0)
    plus = br.amps
    code = strip_logicals(br.stabs, [(0, z1), (0, z2)])
    ins = []
    for a in (0, 1):
        for b in (0, 1):
            w = project(project(plus, n, 0, z1, 1 - 2 * a), n, 0, z2, 1 - 2 * b) * 2
            ins.append(w[0])
    ins = np.array(ins)
    rest = [L.index for L in c.layers if 4 <= L.h2 < 4 * lat.rounds]
    nper = len({c.layers[i].h2 // 4 for i in rest})
    (mem,) = folded_run(c, Branch.start(ins.copy(), code), period0 * nper)
    ref = mem.amps
    for q in range(n):
        if bridge >> q & 1:
            ref = (ref + apply_x(ref, n, 1 << q)) / np.sqrt(2.0)
    labels = [lab for lab in range(c.num_measurements)
              if cut_parity(segments_for_outcome(c, lab), c.logicals["M"])]
    return logical_channel(c, ins, code, rest, labels, ref)
