import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xyfloquet.circuit import (CX, MX, MXX, MZ, MZZ, PREP_PLUS, PREP_ZERO, Circuit, Layer, Op,
                               build_memory_circuit)
from xyfloquet.geometry import GeometrySpec, QubitId
from xyfloquet.noise import Fault, enumerate_faults
from xyfloquet.tableau import (FrameSampler, Tableau, isg_rank, pauli_frame_sample,
                               reference_record, run, unpack_shots)

G0, G1 = QubitId("g", 0, 1), QubitId("g", 0, 3)
P0, P1 = QubitId("p", 1, 1), QubitId("p", 1, 3)


def small(*layers):
    qs = tuple(sorted({q for ops in layers for op in ops for q in op.qubits}))
    return Circuit(qs, tuple(Layer(i, 0, tuple(ops)) for i, ops in enumerate(layers)))


def first_period(c):
    # One six-layer period on the maximally mixed start, without preparations.
    return Circuit(c.qubits, c.layers[1:7])


def test_zz_twice_is_deterministic_and_equal():
    c = small([Op(PREP_PLUS, (P0,)), Op(PREP_PLUS, (P1,))],
              [Op(MZZ, (P0, P1), 0)], [Op(MZZ, (P0, P1), 1)])
    for seed in range(20):
        rec, _ = run(c, rng=np.random.default_rng(seed))
        assert not rec.deterministic[0] and rec.deterministic[1]
        assert rec.bits[0] == rec.bits[1]


def test_prep_plus_then_mx():
    c = small([Op(PREP_PLUS, (P0,))], [Op(MX, (P0,), 0)])
    rec, _ = run(c, rng=np.random.default_rng(0))
    assert rec.deterministic[0] and rec.outcomes[0] == 1


def test_fresh_prep_zero_rank():
    c = small([Op(PREP_ZERO, (q,)) for q in (G0, G1, P0, P1)])
    _, tab = run(c)
    assert isg_rank(tab) == 4


@pytest.mark.parametrize("l1,l2", [(2, 2), (3, 2), (2, 4), (3, 4)])
def test_torus_isg_rank_after_one_period(l1, l2):
    c = build_memory_circuit(GeometrySpec.torus(l1, l2, 1), 1, "Z-basis", "Z")
    _, tab = run(first_period(c))
    assert isg_rank(tab) == c.n - 2


@pytest.mark.parametrize("l1,l2", [(2, 2), (3, 3), (2, 4)])
def test_rectangle_isg_rank_after_one_period(l1, l2):
    c = build_memory_circuit(GeometrySpec.rectangle(l1, l2, 1), 1, "Z-basis", "Z")
    _, tab = run(first_period(c))
    assert isg_rank(tab) == c.n - 1


def test_symplectic_form_is_kept():
    c = build_memory_circuit(GeometrySpec.torus(2, 2, 1), 1, "Stabilizer", "Z")
    _, tab = run(c, rng=np.random.default_rng(1))
    assert tab.check_symplectic()


def test_measurement_flip_only_toggles_record():
    c = small([Op(PREP_ZERO, (P0,))], [Op(MZ, (P0,), 0)], [Op(MZ, (P0,), 1)])
    rec, _ = run(c, faults=[Fault.flip(0)])
    assert list(rec.bits) == [1, 0]


def test_x_before_mzz_flips_that_outcome():
    c = small([Op(PREP_ZERO, (P0,)), Op(PREP_ZERO, (P1,))],
              [Op(MZZ, (P0, P1), 0)], [Op(MZZ, (P0, P1), 1)])
    ref = reference_record(c)
    assert list(pauli_frame_sample(c, ref, []).bits) == list(ref.bits)
    rec = pauli_frame_sample(c, ref, [Fault.pauli_at(1, 0, "X")])
    assert list(rec.bits) == [0, 1]


def test_frame_equals_run_for_single_faults():
    # Torus 3 x 4 (even l2), two rounds: every single fault after the
    # stabilizer warm-up gives the same record in both simulators.
    c = build_memory_circuit(GeometrySpec.torus(3, 4, 2), 2, "Stabilizer", "Z")
    ref = reference_record(c)
    faults = [f for f in enumerate_faults(c) if f.kind == "flip" or f.layer >= 7]
    rng = np.random.default_rng(5)
    for i in rng.choice(len(faults), size=300, replace=False):
        f = faults[i]
        a = pauli_frame_sample(c, ref, [f])
        # Random outcomes take the frame's values; everything else must follow.
        forced = a.bits.copy()
        if f.kind == "flip":
            forced[f.label] ^= 1  # run() applies the flip on top of the forced bit
        b, _ = run(c, faults=[f], mode="force", forced=forced)
        assert np.array_equal(a.bits, b.bits), f


def test_sampler_matches_reference_when_deterministic():
    c = build_memory_circuit(GeometrySpec.rectangle(3, 3, 2), 2, "Stabilizer", "X")
    ref = reference_record(c)
    packed = FrameSampler(c).sample(200, np.random.default_rng(3), ref_bits=ref.bits)
    bits = unpack_shots(packed, 200)
    # Outcomes fixed by the preparation alone (no dependence on earlier
    # random outcomes) are identical in every shot.
    det = np.array([m >> 1 == 0 for m in ref.masks]) & ref.deterministic
    assert det.any()
    assert (bits[:, det] == ref.bits[det]).all()
    # Random outcomes are actually random.
    if (~det).any():
        assert bits[:, ~det].std() > 0.3


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_remeasurement_agrees_with_determinism_flag(seed):
    rng = np.random.default_rng(seed)
    n = 4
    tab = Tableau(n)
    for q in range(n):
        tab.reset(q, "Z" if rng.random() < 0.5 else "X")
    for _ in range(8):
        a, b = rng.choice(n, 2, replace=False)
        if rng.random() < 0.5:
            tab.cx(int(a), int(b))
        else:
            x = int(rng.integers(1 << n)) if rng.random() < 0.5 else 0
            z = 0 if x else int(rng.integers(1, 1 << n))
            tab.measure(x, z, mode="sample", rng=rng)
    x, z = int(rng.integers(1 << n)), int(rng.integers(1 << n))
    if not x and not z:
        return
    # Keep the product Hermitian: only X^x Z^z with even overlap has canonical sign.
    if bin(x & z).count("1") % 2:
        z ^= x & z
    predicted = tab.peek(x, z)
    m1, d1 = tab.measure(x, z, mode="sample", rng=rng)
    m2, d2 = tab.measure(x, z, mode="sample", rng=rng)
    assert d1 == (predicted is not None)
    assert d2 and m1 == m2
