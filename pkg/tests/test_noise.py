import numpy as np
import pytest

from xyfloquet.circuit import Circuit, build_memory_circuit
from xyfloquet.geometry import GeometrySpec
from xyfloquet.noise import (FrameNoise, NoiseParams, enumerate_faults, noise_locations,
                             sample_errors, sparse_bernoulli)
from xyfloquet.tableau import FrameSampler, reference_record, unpack_shots


def torus(l1, l2, rounds):
    return build_memory_circuit(GeometrySpec.torus(l1, l2, rounds), rounds, "Stabilizer", "Z")


def test_zero_noise_is_empty():
    c = torus(2, 2, 1)
    rng = np.random.default_rng(0)
    assert all(sample_errors(c, NoiseParams(), rng) == () for _ in range(20))


def test_invalid_probability():
    with pytest.raises(ValueError):
        NoiseParams(p_gate=1.5)


def test_all_measurements_flip_at_p_meas_one():
    c = torus(2, 2, 1)
    faults = sample_errors(c, NoiseParams(p_meas=1.0), np.random.default_rng(0))
    flipped = {f.label for f in faults if f.kind == "flip"}
    noisy = {lab for lab, (li, _) in enumerate(c.measurements()) if not c.layers[li].noiseless}
    assert flipped == noisy


def test_fault_enumeration():
    assert enumerate_faults(Circuit((), ())) == []
    c = torus(2, 2, 1)
    faults = enumerate_faults(c)
    assert len(faults) == 3 * c.n * c.num_layers + c.num_measurements
    assert faults == enumerate_faults(torus(2, 2, 1))


def test_gate_fault_count_mean():
    c = torus(3, 4, 3)
    p = 0.01
    pairs = sum(len(loc.pairs) for loc in noise_locations(c, NoiseParams(p_gate=p)))
    rng = np.random.default_rng(4)
    shots = 2000
    total = sum(len(sample_errors(c, NoiseParams(p_gate=p), rng)) for _ in range(shots))
    # A two-qubit Pauli drawn from the 15 non-identity ones touches 1.6
    # qubits on average, with second moment 2.8.
    mean = shots * pairs * 1.6 * p
    var = shots * pairs * (2.8 * p - (1.6 * p) ** 2)
    assert abs(total - mean) < 3 * np.sqrt(var)


def test_frame_noise_flip_rate():
    c = torus(2, 2, 2)
    shots = 4096
    p = 0.1
    fn = FrameNoise(c, NoiseParams(p_meas=p), shots)
    ref = reference_record(c)
    noisy = unpack_shots(FrameSampler(c).sample(shots, np.random.default_rng(1), noise_fn=fn,
                                                ref_bits=ref.bits), shots)
    # Labels fixed by the preparation are constant without noise.
    noisy_labels = [lab for lab, (li, _) in enumerate(c.measurements())
                    if not c.layers[li].noiseless and ref.deterministic[lab]
                    and ref.masks[lab] >> 1 == 0]
    assert noisy_labels
    rate = (noisy[:, noisy_labels] != ref.bits[noisy_labels]).mean()
    n = shots * len(noisy_labels)
    assert abs(rate - p) < 4 * np.sqrt(p * (1 - p) / n)


@pytest.mark.parametrize("p", [0.0, 0.001, 0.02, 0.3])
def test_sparse_bernoulli(p):
    total = 200_000
    idx = sparse_bernoulli(total, p, np.random.default_rng(7))
    assert np.all(np.diff(idx) > 0) and (len(idx) == 0 or idx[-1] < total)
    sd = np.sqrt(total * p * (1 - p))
    assert abs(len(idx) - total * p) <= 4 * sd + 1e-9


def test_bridge_idle_flag():
    from xyfloquet.circuit import build_surgery_circuit
    c = build_surgery_circuit(GeometrySpec.surgery(2, 2, 3, 4))
    off = sum(len(l.idle) for l in noise_locations(c, NoiseParams(p_idle=0.1)))
    on = sum(len(l.idle) for l in noise_locations(c, NoiseParams(p_idle=0.1, bridge_idle=True)))
    assert on > off
