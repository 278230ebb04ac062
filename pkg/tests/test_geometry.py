import itertools

import pytest
from hypothesis import given, settings, strategies as st

from xyfloquet.geometry import (BoundaryClass, Cell, GeometryError, GeometrySpec, Kind,
                                QubitId, Rank, build_spacetime_lattice, classify_cell,
                                project_spatial, worldline_position)


def lat(spec):
    return build_spacetime_lattice(spec)


def test_torus_one_period_cubes_all_bulk():
    L = lat(GeometrySpec.torus(2, 2, 1))
    cubes = [c for c in L.cells(Rank.CUBE) if 0 <= c.h2 < 4]
    # Cube centres sit at x-bar of fixed parity per time slice, so one
    # period (two time slices) holds l1 * l2 cubes.
    assert len(cubes) == 4
    assert {L.classify(c) for c in cubes} == {BoundaryClass.BULK}


def test_rectangle_boundary_classes():
    L = lat(GeometrySpec.rectangle(2, 2, 2))
    bulk_time = [c for c in L.cells() if 0 <= c.h2 < L.h_max]
    rough = {c for c in bulk_time if L.classify(c) is BoundaryClass.ROUGH}
    smooth = {c for c in bulk_time if L.classify(c) is BoundaryClass.SMOOTH}
    corner = {c for c in bulk_time if L.classify(c) is BoundaryClass.CORNER}
    assert rough and smooth and corner
    assert all(c.x2 in (0, 2 * L.l2) for c in rough)
    assert all(c.Z in (0, 2 * L.l1) for c in smooth)
    # Corners sit on both sheets, or are the zigzag edges next to the rough sheet.
    for c in corner:
        both = c.x2 in (0, 2 * L.l2) and c.Z in (0, 2 * L.l1)
        zigzag = c.rank is Rank.EDGE and c.x2 in (1, 2 * L.l2 - 1)
        assert both or zigzag


def test_smooth_front_z_edge():
    L = lat(GeometrySpec.rectangle(2, 4, 2))
    z_edges = [c for c in L.cells(Rank.EDGE) if c.orientation == "Z" and 0 <= c.h2 < 8]
    front = [c for c in L.cells(Rank.EDGE) if c.Z == 0 and 1 < c.x2 < 2 * L.l2 - 1
             and 0 <= c.h2 < 8]
    assert z_edges
    assert front and all(L.classify(c) is BoundaryClass.SMOOTH for c in front)


def test_surgery_removed_cells():
    spec = GeometrySpec.surgery(2, 1, 2, 3)
    L = lat(spec)
    removed = [c for c, k in L._classes.items() if k is BoundaryClass.REMOVED]
    assert removed
    assert all(c.Z == L.bridge_z2 for c in removed)
    cubes = [c for c in removed if c.rank is Rank.CUBE and 0 <= c.h2 < L.h_max]
    kept = [c for c in L.cells(Rank.CUBE) if c.Z == L.bridge_z2 and 0 <= c.h2 < L.h_max]
    assert cubes and kept
    assert all(4 * spec.t0 <= c.h2 <= 4 * spec.t1 for c in kept)
    # Per unit of doubled time the bridge row has l cubes; removed time = t0 + (T - t1)
    # periods of height 4 minus the kept boundary slices.
    assert len(cubes) + len(kept) == len([c for c in L.cells(Rank.CUBE, include_removed=True)
                                          if c.Z == L.bridge_z2 and 0 <= c.h2 < L.h_max])


def test_surgery_wall_is_smooth():
    L = lat(GeometrySpec.surgery(2, 1, 2, 3))
    for c in L.cells():
        if L.classify(c) is not BoundaryClass.BULK:
            continue
        for b in c.boundary() + c.coboundary():
            if b in L:
                assert L.classify(b) is not BoundaryClass.REMOVED


@pytest.mark.parametrize("spec", [
    GeometrySpec.torus(1, 2, 1), GeometrySpec.torus(2, 3, 1),
    GeometrySpec.rectangle(2, 1, 1), GeometrySpec.surgery(2, 2, 2, 4),
    GeometrySpec.surgery(2, 0, 1, 3), GeometrySpec.surgery(2, 1, 3, 3),
])
def test_invalid_specs(spec):
    with pytest.raises(GeometryError):
        build_spacetime_lattice(spec)


def test_classify_out_of_range():
    L = lat(GeometrySpec.rectangle(2, 2, 1))
    with pytest.raises(GeometryError):
        classify_cell(L, Cell.from_htz(0, 99 * 2, 0))


@pytest.mark.parametrize("l1,l2", [(a, b) for a in range(2, 7) for b in (2, 4, 6)])
def test_torus_qubit_count(l1, l2):
    layout = project_spatial(lat(GeometrySpec.torus(l1, l2, 1)))
    assert layout.n == 2 * l1 * l2
    assert len(layout.greens()) == len(layout.purples()) == l1 * l2


def test_layout_adjacency_and_order():
    layout = project_spatial(lat(GeometrySpec.rectangle(3, 3, 1)))
    assert list(layout.qubits) == sorted(layout.qubits)
    for p in layout.purples():
        nb = layout.adjacency[p]
        # Purple pairs along x-bar, green CX partners along z.
        assert len(nb) <= 4
        assert all(q.z2 == p.z2 if not q.is_green else (abs(q.z2 - p.z2) == 1 and q.x2 == p.x2)
                   for q in nb)


def test_surgery_bridge_unused_outside_window():
    spec = GeometrySpec.surgery(2, 2, 3, 4)
    layout = project_spatial(lat(spec))
    early = layout.unused(0)
    assert early and all(layout.lattice.is_bridge(q) for q in early)
    assert len(early) == spec.l
    assert layout.unused(4 * spec.t0 + 1) == []


def test_qubit_parity_rules():
    with pytest.raises(GeometryError):
        QubitId("g", 1, 1)
    with pytest.raises(GeometryError):
        QubitId("p", 2, 1)
    with pytest.raises(GeometryError):
        QubitId("g", 0, 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(-6, 6), st.integers(-6, 6), st.integers(-6, 6))
def test_boundary_of_boundary_is_even(x, y, z):
    c = Cell(x, y, z)
    counts = {}
    for f in c.boundary():
        for e in f.boundary():
            counts[e] = counts.get(e, 0) + 1
    assert all(v % 2 == 0 for v in counts.values())


def test_incidence_counts():
    L = lat(GeometrySpec.torus(2, 2, 1))
    for f in L.cells(Rank.FACE):
        assert len(f.boundary()) == 4
    for e in L.cells(Rank.EDGE):
        assert len(e.boundary()) == 2


@pytest.mark.parametrize("spec", [GeometrySpec.torus(2, 2, 1), GeometrySpec.rectangle(2, 3, 1),
                                  GeometrySpec.surgery(2, 1, 2, 3)])
def test_classification_total(spec):
    L = lat(spec)
    for c in L._classes:
        assert isinstance(L.classify(c), BoundaryClass)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["g", "p"]), st.integers(0, 5), st.integers(0, 3), st.integers(-2, 12))
def test_worldline_stays_on_qubit(species, zr, xr, h2):
    z2 = 2 * zr + (species == "p")
    q = QubitId(species, z2, 2 * xr + 1)
    a = worldline_position(q, h2)
    b = worldline_position(q, h2 + 4)
    # Over one period the worldline moves by a pure time translation.
    assert len(a) == 3 and len(b) == 3
