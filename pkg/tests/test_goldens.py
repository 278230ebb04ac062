import shutil

from xyfloquet.goldens import GOLDENS, default_root, verify_goldens


def test_goldens_match():
    results = verify_goldens()
    assert [r.name for r in results] == [g.name for g in GOLDENS]
    assert all(r.ok for r in results), [r.diff for r in results if not r.ok]


def _copy(tmp_path):
    root = tmp_path / "goldens"
    shutil.copytree(default_root(), root)
    return root


def test_perturbed_phase_fails(tmp_path):
    root = _copy(tmp_path)
    path = root / "torus2x2_T1_circuit.txt"
    path.write_text(path.read_text().replace("LAYER 2 phase=1", "LAYER 2 phase=2", 1))
    bad = {r.name: r for r in verify_goldens(str(root))}
    assert not bad["torus2x2_T1_circuit.txt"].ok
    assert "phase" in bad["torus2x2_T1_circuit.txt"].diff


def test_schema_change_fails(tmp_path):
    root = _copy(tmp_path)
    path = root / "rect2x2_T1_graph.json"
    path.write_text(path.read_text().replace('"virtual"', '"is_virtual"'))
    bad = {r.name: r for r in verify_goldens(str(root))}
    assert not bad["rect2x2_T1_graph.json"].ok


def test_missing_golden(tmp_path):
    res = verify_goldens(str(tmp_path))
    assert not any(r.ok for r in res)
