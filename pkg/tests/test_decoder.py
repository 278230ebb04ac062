import itertools
import json

import numpy as np
import pytest

from xyfloquet.circuit import build_memory_circuit
from xyfloquet.decoder import (brute_force_weight, build_matching_graph, decode, decode_batch,
                               decode_graph_json, decode_networkx, logical_failure)
from xyfloquet.distance import fault_signatures
from xyfloquet.geometry import GeometrySpec
from xyfloquet.syndrome import build_detector_graph, graph_to_json


def bits(mask):
    return [i for i in range(mask.bit_length()) if mask >> i & 1]


def memory_graph(l, basis):
    c = build_memory_circuit(GeometrySpec.rectangle(l, l, l), l, "Stabilizer", basis)
    names = [n for n, lg in c.logicals.items() if lg["basis"] == basis]
    return build_detector_graph(c, names)


@pytest.fixture(scope="module", params=["Z", "X"])
def l3(request):
    g = memory_graph(3, request.param)
    return g, build_matching_graph(g), fault_signatures(g)


def test_empty_syndrome(l3):
    _, mg, _ = l3
    dr = decode(mg, [])
    assert dr.pairs == [] and dr.weight == 0 and not any(dr.logical_flip)
    assert dr.correction == ()
    assert json.loads(dr.to_json())["fired"] == []


def test_single_edge_weight_one(l3):
    _, mg, _ = l3
    e = next(e for e in mg.edges if e.b is not None)
    dr = decode(mg, [e.a, e.b])
    assert dr.weight == 1.0


def test_weight_one_faults_are_corrected(l3):
    _, mg, sigs = l3
    for det, obs in sigs:
        if not det:
            assert not obs  # an undetected fault must not flip a logical
            continue
        dr = decode(mg, bits(det))
        true = [(obs >> i) & 1 for i in range(len(dr.logical_flip))]
        assert not any(logical_failure(dr, true))


def test_decode_batch_agrees(l3):
    g, mg, sigs = l3
    rng = np.random.default_rng(0)
    dets = np.zeros((50, g.num_detectors), dtype=np.uint8)
    for row in dets:
        for i in rng.choice(len(sigs), 2):
            for d in bits(sigs[i][0]):
                row[d] ^= 1
    batch = decode_batch(mg, dets)
    for row, pred in zip(dets, batch):
        assert tuple(pred) == decode(mg, np.flatnonzero(row)).logical_flip


def test_blossom_routes_agree(l3):
    g, mg, sigs = l3
    rng = np.random.default_rng(1)
    for _ in range(40):
        k = int(rng.integers(1, 4))
        det = 0
        for i in rng.choice(len(sigs), k):
            det ^= sigs[i][0]
        fired = bits(det)
        if len(fired) > 8:
            continue
        dr = decode(mg, fired)
        w_nx, _ = decode_networkx(mg, fired)
        assert dr.weight == pytest.approx(w_nx)
        assert dr.weight == pytest.approx(brute_force_weight(mg, fired))


def test_rough_wall_edges_exist_for_e():
    g = memory_graph(3, "Z")
    mg = build_matching_graph(g)
    # Every species has boundary edges; no edge links the two species.
    for e in mg.edges:
        if e.b is not None:
            assert mg.species_of[e.a] == mg.species_of[e.b]
    boundary_species = {mg.species_of[e.a] for e in mg.edges if e.b is None}
    assert boundary_species == {"E", "M"}
    # e endpoints may end on rough or corner sheets, never on a smooth sheet
    # away from the time boundaries.
    h_max = g.circuit.lattice.h_max
    for fe in g.edges:
        if fe.species != "E":
            continue
        for i in fe.nodes:
            n = g.nodes[i]
            if n.virtual and n.boundary == "smooth":
                assert n.cell.h2 < 2 or n.cell.h2 > h_max - 4


def test_weight_d_chain_fails():
    g = memory_graph(2, "X")
    mg = build_matching_graph(g)
    sigs = fault_signatures(g)
    by_det = {}
    chain = None
    for i, (det, obs) in enumerate(sigs):
        prev = by_det.get(det)
        if prev is not None and sigs[prev][1] != obs:
            chain = (prev, i)
            break
        by_det.setdefault(det, i)
    assert chain is not None
    det = sigs[chain[0]][0] ^ sigs[chain[1]][0]
    obs = sigs[chain[0]][1] ^ sigs[chain[1]][1]
    assert det == 0 and obs
    dr = decode(mg, bits(det))
    assert any(logical_failure(dr, [(obs >> i) & 1 for i in range(len(dr.logical_flip))]))


def test_decode_from_json(l3):
    g, mg, sigs = l3
    text = graph_to_json(g)
    det = sigs[10][0] ^ sigs[200][0]
    fired = bits(det)
    nodes = [g.detectors[d] for d in fired]
    out = decode_graph_json(text, nodes)
    dr = decode(mg, fired)
    assert list(out["observables"].values()) == list(dr.logical_flip)
