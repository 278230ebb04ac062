import pytest
from hypothesis import given, settings, strategies as st

from xyfloquet.circuit import (CX, MX, MXX, MZZ, PREP_PLUS, Circuit, CircuitError, Layer, Op,
                               ParseError, build_memory_circuit, build_surgery_circuit,
                               emit_text, parse_text)
from xyfloquet.geometry import GeometrySpec, QubitId
from xyfloquet.tableau import run


def torus(l1=4, l2=4, rounds=2, basis="Z"):
    return build_memory_circuit(GeometrySpec.torus(l1, l2, rounds), rounds, "Stabilizer", basis)


def test_ops_act_on_adjacent_qubits():
    for c in (torus(), build_memory_circuit(GeometrySpec.rectangle(3, 3, 2), 2),
              build_surgery_circuit(GeometrySpec.surgery(2, 2, 3, 4))):
        for layer in c.layers:
            for op in layer.ops:
                if len(op.qubits) == 2:
                    assert c.layout.adjacent(*op.qubits), (layer.index, op)


def test_species_rules():
    c = torus()
    for layer in c.layers:
        for op in layer.ops:
            if op.name == CX:
                assert op.qubits[0].is_green and not op.qubits[1].is_green
            elif op.name == MXX:
                assert all(q.is_green for q in op.qubits)
            elif op.name == MZZ:
                assert not any(q.is_green for q in op.qubits)


def test_labels_contiguous():
    c = torus()
    labels = [op.label for _, op in c.measurements()]
    assert labels == list(range(c.num_measurements))


def test_measurement_layer_size_on_4x4_torus():
    c = torus()
    for layer in c.layers:
        ms = [op for op in layer.ops if op.name in (MXX, MZZ)]
        if ms:
            # Every qubit is in exactly one pair measurement.
            assert len(ms) == 16


def test_six_phase_period():
    c = torus(2, 2, 2)
    phases = [layer.phase for layer in c.layers[1:-1]]
    assert phases == [i % 6 for i in range(len(phases))]


@pytest.mark.parametrize("c", [torus(2, 2, 1), torus(2, 2, 2, "X"),
                               build_memory_circuit(GeometrySpec.rectangle(2, 3, 1), 1),
                               build_surgery_circuit(GeometrySpec.surgery(2, 1, 2, 3))])
def test_text_round_trip(c):
    text = emit_text(c)
    back = parse_text(text)
    assert back == c
    assert emit_text(back) == text


@pytest.mark.parametrize("mutate,fragment", [
    (lambda t: t.replace("XYFLOQUET v1", "XYFLOQUET v2"), "header"),
    (lambda t: t.replace("MXX 0 g(0,1) g(0,3)", "MXX 0 p(1,1) p(1,3)"), "green"),
    (lambda t: t.replace("CX g(0,1) p(1,1)", "CX p(1,1) g(0,1)"), "control"),
    (lambda t: t.replace("MZZ 1 ", "MZZ 7 ", 1), "contiguous"),
    (lambda t: t.replace("LAYER 3 ", "LAYER 4 ", 1), "consecutive"),
    (lambda t: t.replace("QUBITS 8", "QUBITS 9"), "QUBITS"),
    (lambda t: t.replace("  CX g(0,1) p(1,1)", "  SWAP g(0,1) p(1,1)", 1), "unknown op"),
])
def test_parse_errors(mutate, fragment):
    text = emit_text(torus(2, 2, 1))
    with pytest.raises(ParseError) as err:
        parse_text(mutate(text))
    assert fragment in str(err.value)
    assert err.value.line_no >= 1


def test_duplicate_qubit_in_layer():
    q = QubitId("g", 0, 1)
    with pytest.raises(CircuitError):
        Circuit((q,), (Layer(0, 0, (Op(MX, (q,), 0), Op(MX, (q,), 1))),))


@pytest.mark.parametrize("spec", [GeometrySpec.surgery(2, 1, 2, 3),
                                  GeometrySpec.surgery(2, 2, 3, 4)])
def test_surgery_bridge_prep_and_readout(spec):
    c = build_surgery_circuit(spec)
    lat = c.lattice
    preps = [op for layer in c.layers for op in layer.ops
             if op.name == PREP_PLUS and lat.is_bridge(op.qubits[0])]
    reads = [op for layer in c.layers for op in layer.ops
             if op.name == MX and lat.is_bridge(op.qubits[0])]
    assert len(preps) == spec.l
    assert len(reads) == spec.l


def test_memory_rejects_surgery():
    with pytest.raises(CircuitError):
        build_memory_circuit(GeometrySpec.surgery(2, 1, 2, 3), 3)


@settings(max_examples=8, deadline=None)
@given(st.sampled_from([(2, 2), (3, 2), (2, 4)]), st.integers(2, 3), st.sampled_from("ZX"))
def test_outcomes_deterministic_after_warmup(dims, rounds, basis):
    c = build_memory_circuit(GeometrySpec.torus(dims[0], dims[1], rounds), rounds,
                             "Z-basis", basis)
    rec, _ = run(c)
    # Measurements after the first two periods are products of earlier ones.
    for label, (li, op) in enumerate(c.measurements()):
        layer = c.layers[li]
        if layer.h2 is not None and layer.h2 >= 8 and op.name in (MXX, MZZ):
            assert rec.deterministic[label], (li, op)


def test_odd_surgery_lone_bridge_qubit_prepared_in_z():
    c = build_surgery_circuit(GeometrySpec.surgery(3, 2, 3, 4))
    lat = c.lattice
    first = {}
    for layer in c.layers:
        for op in layer.ops:
            for q in op.qubits:
                if lat.is_bridge(q):
                    first.setdefault(q, op.name)
    assert sorted(first.values()) == ["PREP+", "PREP+", "PREP0"]
