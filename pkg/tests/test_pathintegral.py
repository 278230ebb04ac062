import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xyfloquet.geometry import Cell, GeometrySpec, build_spacetime_lattice
from xyfloquet.pathintegral import (AnyonConfig, CapExceeded, OracleError,
                                    PathIntegralInstance, box_complex, closure, duality_factor,
                                    evaluate, evaluate_naive, ground_state_amplitudes,
                                    homology_label, is_closed, move_edge, move_face)


def value(cx, a=AnyonConfig(), **kw):
    return evaluate(PathIntegralInstance(cx, a), **kw)


def test_unit_periodic_box():
    cx = box_complex((1, 1, 1))
    inst = PathIntegralInstance(cx, AnyonConfig())
    assert evaluate(inst) == 8
    assert evaluate_naive(inst) == 8
    assert evaluate(inst, method="closed") == 8


@pytest.mark.parametrize("shape", [(1, 1, 2), (2, 1, 1), (2, 2, 1)])
def test_kernel_matches_naive(shape):
    cx = box_complex(shape)
    rng = np.random.default_rng(sum(shape))
    for _ in range(10):
        a = AnyonConfig.of(e=[cx.edges[i] for i in rng.choice(len(cx.edges), 2)],
                           m=[cx.faces[i] for i in rng.choice(len(cx.faces), 2)])
        inst = PathIntegralInstance(cx, a)
        assert evaluate(inst) == evaluate_naive(inst) == evaluate(inst, method="closed")


def test_naive_cap():
    with pytest.raises(CapExceeded):
        evaluate_naive(PathIntegralInstance(box_complex((3, 3, 3)), AnyonConfig()))


def test_closure_reports():
    cx = box_complex((2, 2, 2))
    assert closure(cx, AnyonConfig()).closed
    e = cx.edges[5]
    rep = closure(cx, AnyonConfig.of(e=[e]))
    assert len(rep.odd_vertices) == 2 and not rep.odd_cubes
    assert set(rep.odd_vertices) == set(cx.edge_vertices[e])


def test_rough_boundary_absorbs_e_endpoints():
    cx = box_complex((2, 2, 2), ("periodic", "periodic", "rough"))
    # A z edge touching the rough end has only one vertex inside the box.
    ends = [e for e in cx.edges if e[2] == 1 and len(cx.edge_vertices[e]) == 1]
    assert ends
    rep = closure(cx, AnyonConfig.of(e=[ends[0]]))
    assert len(rep.odd_vertices) == 1


def random_closed(cx, rng, moves=8):
    a = AnyonConfig()
    for _ in range(moves):
        if rng.random() < 0.5:
            a, _ = move_face(cx, a, cx.faces[rng.integers(len(cx.faces))])
        else:
            a, _ = move_edge(cx, a, cx.free[rng.integers(len(cx.free))])
    return a


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([(2, 2, 1), (2, 2, 2), (3, 3, 2)]))
def test_deformation_moves(seed, shape):
    cx = box_complex(shape)
    rng = np.random.default_rng(seed)
    a = random_closed(cx, rng)
    v = value(cx, a)
    for _ in range(5):
        if rng.random() < 0.5:
            b, sign = move_face(cx, a, cx.faces[rng.integers(len(cx.faces))])
        else:
            b, sign = move_edge(cx, a, cx.free[rng.integers(len(cx.free))])
        assert closure(cx, b).closed
        w = value(cx, b)
        # A move that does not cross the other worldline keeps the value.
        assert w == sign * v
        a, v = b, w


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_open_configs_vanish(seed):
    cx = box_complex((2, 2, 2))
    rng = np.random.default_rng(seed)
    a = random_closed(cx, rng) ^ AnyonConfig.of(e=[cx.edges[rng.integers(len(cx.edges))]])
    assert not closure(cx, a).closed
    assert value(cx, a) == 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.booleans(), st.booleans())
def test_duality(seed, e_loop, m_loop):
    cx = box_complex((2, 2, 2))
    dual = cx.dual()
    a = random_closed(cx, np.random.default_rng(seed))
    if e_loop:
        a = a ^ AnyonConfig.of(e=[(1, 0, 0), (3, 0, 0)])
    if m_loop:
        a = a ^ AnyonConfig.of(m=[(1, 0, 1), (1, 2, 1)])
    swapped = AnyonConfig(a.W_m, a.W_e)
    assert value(cx, a) == duality_factor(cx) * value(dual, swapped)


def test_dual_rejects_state_boundaries():
    with pytest.raises(OracleError):
        box_complex((2, 2, 1), ("periodic", "periodic", "state")).dual()


def test_slab_ground_state_is_uniform_on_closed_loops():
    cx = box_complex((2, 2, 1), ("periodic", "periodic", "state"))
    amps = ground_state_amplitudes(PathIntegralInstance(cx, AnyonConfig()))
    assert len(set(amps.values())) == 1
    # Each boundary plane of a 2x2 torus has 2^(8-4+1) closed configurations;
    # top and bottom must share their homology class.
    assert len(amps) == 32 * 32 // 4
    # Supported configurations satisfy every face constraint lying in a
    # state plane (closed loops on the dual lattice).
    pos = {e: i for i, e in enumerate(cx.fixed)}
    plane_faces = [fe for fe in cx.face_edges if all(e in pos for e in fe)]
    assert plane_faces
    for cfg in amps:
        assert all(sum(cfg[pos[e]] for e in fe) % 2 == 0 for fe in plane_faces)


def test_e_worldlines_give_relative_sign():
    cx = box_complex((2, 2, 1), ("periodic", "periodic", ("rough", "state")))
    # Two e worldlines rising from the rough floor into the state plane.
    # A single one would leave a lone anyon on a closed surface.
    z_edges = [e for e in cx.edges if e[2] == 1][:2]
    assert closure(cx, AnyonConfig.of(e=z_edges[:1])).closed
    alone = ground_state_amplitudes(PathIntegralInstance(cx, AnyonConfig.of(e=z_edges[:1])))
    assert alone == {}
    plain = ground_state_amplitudes(PathIntegralInstance(cx, AnyonConfig()))
    pierced = ground_state_amplitudes(PathIntegralInstance(cx, AnyonConfig.of(e=z_edges)))
    assert set(pierced) == set(plain)
    ratios = {pierced[k] // plain[k] for k in plain}
    assert ratios == {1, -1}


def test_homology_labels():
    lat = build_spacetime_lattice(GeometrySpec.torus(2, 2, 2))
    assert homology_label(AnyonConfig(), lat).name == "B00"
    loop = AnyonConfig.of(m=[Cell(1, 1, z) for z in range(0, 4, 2)])
    assert is_closed(loop, lat).closed
    assert homology_label(loop, lat).name == "B10"
    with pytest.raises(OracleError):
        homology_label(AnyonConfig.of(m=[Cell(1, 1, 0)]), lat)
