import json
from collections import Counter

import jsonschema
import numpy as np
import pytest

from xyfloquet.circuit import MX, MXX, MZ, MZZ, build_memory_circuit, build_surgery_circuit
from xyfloquet.distance import fault_signatures
from xyfloquet.geometry import BoundaryClass, GeometrySpec
from xyfloquet.goldens import load_schema
from xyfloquet.noise import Fault
from xyfloquet.syndrome import (build_detector_graph, endpoints, fault_syndrome, graph_to_json,
                                segments_for_error, segments_for_outcome, syndrome)
from xyfloquet.tableau import pauli_frame_sample


def mask(ds):
    m = 0
    for d in ds:
        m |= 1 << d
    return m


@pytest.fixture(scope="module")
def torus_graph():
    # Torus widths must be even along x-bar, so 3 x 4 stands in for 3 x 3.
    c = build_memory_circuit(GeometrySpec.torus(3, 4, 2), 2, "Stabilizer", "Z")
    return build_detector_graph(c)


@pytest.fixture(scope="module")
def rect_graphs():
    return {b: build_detector_graph(build_memory_circuit(GeometrySpec.rectangle(3, 3, 2), 2,
                                                         "Stabilizer", b)) for b in "ZX"}


def test_reference_record_has_empty_syndrome(torus_graph):
    assert syndrome(torus_graph, torus_graph.ref) == frozenset()


def test_measurement_flip_matches_outcome_segments(torus_graph):
    c = torus_graph.circuit
    for lab, (_, op) in enumerate(c.measurements()):
        if op.name in (MZZ, MXX):
            assert segments_for_error(c, Fault.flip(lab)) == segments_for_outcome(c, lab)


def test_single_flip_fires_outcome_endpoints(torus_graph):
    g = torus_graph
    c = g.circuit
    for lab in range(0, c.num_measurements, 7):
        rec = pauli_frame_sample(c, g.ref, [Fault.flip(lab)])
        ev, mv = endpoints(c, segments_for_outcome(c, lab))
        expect = set()
        for sp, cells in (("E", ev), ("M", mv)):
            for cell in cells:
                ni = g.node_index[(sp, cell)]
                if not g.nodes[ni].virtual:
                    expect.add(g.det_of_node[ni])
        assert syndrome(g, rec) == frozenset(expect)


def test_every_single_fault_matches_prediction(torus_graph):
    g = torus_graph
    sigs = fault_signatures(g, g.faults)
    bad = [fid for fid, (sim, _) in enumerate(sigs) if sim != mask(fault_syndrome(g, fid))]
    assert not bad


def test_y_fault_is_union_of_x_and_z(torus_graph):
    g = torus_graph
    c = g.circuit
    faults = []
    for li in range(8, c.num_layers - 1, 3):
        for q in range(0, c.n, 5):
            faults += [Fault.pauli_at(li, q, p) for p in "XZY"]
    sigs = fault_signatures(g, faults)
    for i in range(0, len(faults), 3):
        x, z, y = sigs[i][0], sigs[i + 1][0], sigs[i + 2][0]
        assert y == x ^ z


def test_green_z_fault_marks_two_vertices(torus_graph):
    c = torus_graph.circuit
    g_idx = next(i for i, q in enumerate(c.qubits) if q.is_green)
    li = next(li for li, layer in enumerate(c.layers) if layer.h2 == 9)
    ev, mv = endpoints(c, segments_for_error(c, Fault.pauli_at(li, g_idx, "Z")))
    assert len(ev) == 2 and not mv
    assert all(v.rank == 0 for v in ev)


def test_bulk_nodes_translation_invariant(torus_graph):
    g = torus_graph
    sizes = Counter()
    for n in g.nodes:
        if not n.virtual and n.boundary == "bulk":
            # Away from the time boundaries every detector has the same size.
            if 4 <= n.cell.h2 <= g.circuit.lattice.h_max - 6:
                sizes[(n.species, len(n.labels))] += 1
    assert {sp for sp, _ in sizes} == {"E", "M"}
    assert len(sizes) == 2


def test_rectangle_virtual_nodes(rect_graphs):
    g = rect_graphs["Z"]
    for n in g.nodes:
        if n.species == "E" and n.boundary == "rough":
            assert n.virtual
        if n.species == "M" and n.boundary == "rough":
            assert not n.virtual
        if n.species == "M" and n.boundary == "outside":
            assert n.virtual
    finals = {(b, n.species) for b, gr in rect_graphs.items() for n in gr.nodes
              if n.virtual and n.boundary == "state_final"}
    assert {sp for _, sp in finals} == {"E", "M"}


def test_all_measurements_flipped(rect_graphs):
    g = rect_graphs["Z"]
    c = g.circuit
    rec = pauli_frame_sample(c, g.ref, [Fault.flip(l) for l in range(c.num_measurements)])
    expect = 0
    for lab in range(c.num_measurements):
        ev, mv = endpoints(c, segments_for_outcome(c, lab))
        for sp, cells in (("E", ev), ("M", mv)):
            for cell in cells:
                ni = g.node_index[(sp, cell)]
                if not g.nodes[ni].virtual:
                    expect ^= 1 << g.det_of_node[ni]
    assert mask(syndrome(g, rec)) == expect


def test_boundary_measurement_segments():
    c = build_memory_circuit(GeometrySpec.rectangle(3, 3, 2), 2, "Stabilizer", "Z")
    lat = c.lattice
    lab = next(l for l, (li, op) in enumerate(c.measurements())
               if op.name == MZ and c.layers[li].h2 is not None and 0 < c.layers[li].h2 < 8)
    segs = segments_for_outcome(c, lab)
    assert not segs.e and len(segs.m) == 2
    # Both faces stand on the rough wall: each has a boundary edge in it.
    for f in segs.m:
        assert any(lat.classify(e) is BoundaryClass.ROUGH for e in f.boundary() if e in lat)


def test_surgery_split_mx_is_one_edge():
    c = build_surgery_circuit(GeometrySpec.surgery(2, 2, 3, 4), "Z")
    lat = c.lattice
    labs = [l for l, (li, op) in enumerate(c.measurements())
            if op.name == MX and lat.is_bridge(op.qubits[0])]
    assert labs
    for lab in labs:
        segs = segments_for_outcome(c, lab)
        assert len(segs.e) == 1 and not segs.m


def test_json_validates_against_schema(rect_graphs):
    data = json.loads(graph_to_json(rect_graphs["Z"]))
    jsonschema.validate(data, load_schema())
    bad = dict(data, format="other")
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(bad, load_schema())
