import io

import numpy as np
import pytest

from xyfloquet.experiments import (CSV_COLUMNS, ConfigError, ExperimentConfig, Stats,
                                   run, run_memory_experiment, run_surgery_experiment, wilson,
                                   write_csv)


def csv_text(stats, timing=False):
    fh = io.StringIO()
    write_csv([stats], fh, timing)
    return fh.getvalue()


def test_noiseless_memory_never_fails():
    for geometry, l in (("rectangle", 3), ("torus", 2)):
        s = run_memory_experiment(ExperimentConfig(geometry=geometry, l=l, rounds=2,
                                                   shots=100_000 if l == 3 else 5000, seed=1))
        assert s.failures == 0 and s.rate == 0.0
        assert s.interval()[0] == 0.0


def test_same_seed_same_csv():
    cfg = ExperimentConfig(geometry="rectangle", l=3, rounds=3, p_gate=0.01, p_meas=0.01,
                           shots=3000, seed=42)
    a = csv_text(run(cfg))
    b = csv_text(run(cfg))
    assert a == b
    c = csv_text(run(ExperimentConfig(**{**cfg.__dict__, "seed": 43})))
    assert a != c


def test_workers_do_not_change_results():
    base = dict(geometry="rectangle", l=3, rounds=2, p_gate=0.02, shots=9000, seed=7)
    one = run(ExperimentConfig(**base, workers=1))
    two = run(ExperimentConfig(**base, workers=2))
    assert one.fails == two.fails


def test_csv_columns():
    s = run(ExperimentConfig(geometry="rectangle", l=2, rounds=1, shots=64, seed=0))
    text = csv_text(s)
    header = [l for l in text.splitlines() if not l.startswith("#")][0]
    assert header.split(",") == CSV_COLUMNS
    assert "# seed: 0" in text


@pytest.mark.parametrize("kw,field", [
    (dict(geometry="sphere", l=3, seed=1), "geometry"),
    (dict(l=3), "seed"),
    (dict(l=3, seed=1, shots=0), "shots"),
    (dict(l=3, seed=1, p_gate=2.0), "p_gate"),
    (dict(geometry="torus", l1=3, l2=3, seed=1), "geometry"),
    (dict(geometry="surgery", l=2, seed=1), "t0"),
    (dict(l=3, seed=1, surgery_input="11"), "surgery_input"),
])
def test_config_errors_name_the_field(kw, field):
    with pytest.raises(ConfigError) as err:
        ExperimentConfig(**kw).validate()
    assert err.value.field == field


def test_unknown_config_key():
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_dict({"l": 3, "colour": "red"})
    assert err.value.field == "colour"


def test_flags_override_file():
    cfg = ExperimentConfig.from_dict({"l": 3, "seed": 1, "shots": 10})
    merged = cfg.merged({"shots": 20, "seed": None})
    assert merged.shots == 20 and merged.seed == 1


@pytest.mark.parametrize("inp,cls", [("00", 0), ("01", 1)])
def test_noiseless_surgery_classes(inp, cls):
    s = run_surgery_experiment(ExperimentConfig(geometry="surgery", l=2, t0=2, t1=3, rounds=4,
                                                shots=400, seed=3, surgery_input=inp))
    assert s.class_counts[cls] == 400
    assert s.class_fails == 0 and s.failures == 0


def test_noiseless_surgery_plus_inputs_split_evenly():
    shots = 4000
    s = run_surgery_experiment(ExperimentConfig(geometry="surgery", l=2, t0=2, t1=3, rounds=4,
                                                shots=shots, seed=5, surgery_input="++"))
    assert sum(s.class_counts) == shots
    assert abs(s.class_counts[0] - shots / 2) < 4 * np.sqrt(shots / 4)
    assert s.failures == 0


def test_wilson():
    assert wilson(0, 100)[0] == 0.0
    assert wilson(100, 100)[1] == 1.0
    lo, hi = wilson(50, 100)
    assert lo < 0.5 < hi and hi - lo == pytest.approx(0.1924, abs=1e-3)
