"""Memory and surgery experiments: sample, decode, aggregate, write CSV.

Shots are split into fixed-size batches.  Each batch draws from its own
stream spawned from the run seed, so results do not depend on the worker
count or on the order in which batches finish.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .circuit import Circuit, build_memory_circuit, build_surgery_circuit
from .decoder import build_matching_graph, decode_batch
from .geometry import GeometryError, GeometrySpec
from .noise import FrameNoise, NoiseParams
from .syndrome import build_detector_graph, detector_bits, observable_bits
from .tableau import FrameSampler, unpack_shots

BATCH = 4096
GEOMETRIES = ("torus", "rectangle", "surgery")
SURGERY_INPUTS = ("00", "01", "++")
CSV_COLUMNS = ["geometry", "L1", "L2", "rounds", "p_gate", "p_idle", "p_meas", "p_prep",
               "shots", "fails_Z", "fails_X", "ci_low", "ci_high", "seed", "wall_seconds"]
SURGERY_COLUMNS = ["t0", "t1", "input", "class0", "class1", "class_fails",
                   "fails_m0", "fails_m1"]


class ConfigError(ValueError):
    def __init__(self, field: str, msg: str):
        super().__init__(f"{field}: {msg}")
        self.field = field


@dataclasses.dataclass
class ExperimentConfig:
    geometry: str = "rectangle"
    l1: Optional[int] = None
    l2: Optional[int] = None
    l: Optional[int] = None
    rounds: Optional[int] = None
    t0: Optional[int] = None
    t1: Optional[int] = None
    p_gate: float = 0.0
    p_idle: float = 0.0
    p_meas: float = 0.0
    p_prep: float = 0.0
    bridge_idle: bool = False
    shots: int = 1000
    seed: Optional[int] = None
    workers: int = 1
    surgery_input: str = "00"
    out: Optional[str] = None

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        extra = set(data) - names
        if extra:
            raise ConfigError(sorted(extra)[0], "unknown config field")
        return cls(**data)

    def merged(self, overrides: dict) -> "ExperimentConfig":
        """Copy with every non-None override applied (flags beat files)."""
        kw = {k: v for k, v in overrides.items() if v is not None}
        return dataclasses.replace(self, **kw)

    @property
    def noise(self) -> NoiseParams:
        return NoiseParams(self.p_gate, self.p_idle, self.p_meas, self.p_prep, self.bridge_idle)

    def validate(self) -> None:
        if self.geometry not in GEOMETRIES:
            raise ConfigError("geometry", f"expected one of {GEOMETRIES}")
        if self.seed is None:
            raise ConfigError("seed", "a seed is required")
        if not isinstance(self.shots, int) or self.shots < 1:
            raise ConfigError("shots", "must be a positive integer")
        if self.workers < 1:
            raise ConfigError("workers", "must be at least 1")
        for name in ("p_gate", "p_idle", "p_meas", "p_prep"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(name, "must lie in [0, 1]")
        if self.surgery_input not in SURGERY_INPUTS:
            raise ConfigError("surgery_input", f"expected one of {SURGERY_INPUTS}")
        try:
            self.spec().validate()
        except GeometryError as exc:
            raise ConfigError("geometry", str(exc)) from None

    def spec(self) -> GeometrySpec:
        if self.geometry == "surgery":
            for name in ("l", "t0", "t1", "rounds"):
                if getattr(self, name) is None:
                    raise ConfigError(name, "required for surgery")
            return GeometrySpec.surgery(self.l, self.t0, self.t1, self.rounds)
        l1 = self.l1 if self.l1 is not None else self.l
        l2 = self.l2 if self.l2 is not None else l1
        if l1 is None:
            raise ConfigError("l1", "required (or give l)")
        rounds = self.rounds if self.rounds is not None else l1
        if self.geometry == "torus":
            return GeometrySpec.torus(l1, l2, rounds)
        return GeometrySpec.rectangle(l1, l2, rounds)

    def header(self) -> List[str]:
        return [f"{k}: {json.dumps(v)}" for k, v in dataclasses.asdict(self).items()]


def wilson(k: int, n: int, z: float = 1.959963984540054) -> Tuple[float, float]:
    """Wilson score interval for k successes in n trials."""
    if n == 0:
        return 0.0, 1.0
    if k == 0:
        return 0.0, z * z / (n + z * z)
    if k == n:
        return n / (n + z * z), 1.0
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, mid - half), min(1.0, mid + half)


@dataclasses.dataclass
class Stats:
    config: ExperimentConfig
    shots: int
    fails: Dict[str, int]  # per memory basis ("Z", "X"), shots with any logical flip
    wall_seconds: float
    class_counts: Tuple[int, int] = (0, 0)
    class_fails: int = 0
    cond_fails: Tuple[int, int] = (0, 0)

    @property
    def trials(self) -> int:
        return self.shots * max(1, len(self.fails))

    @property
    def failures(self) -> int:
        return sum(self.fails.values())

    @property
    def rate(self) -> float:
        return self.failures / self.trials

    def interval(self) -> Tuple[float, float]:
        return wilson(self.failures, self.trials)

    def row(self, timing: bool = True) -> dict:
        cfg = self.config
        spec = cfg.spec()
        lo, hi = self.interval()
        out = {
            "geometry": cfg.geometry, "L1": spec.l1, "L2": spec.l2, "rounds": spec.rounds,
            "p_gate": cfg.p_gate, "p_idle": cfg.p_idle, "p_meas": cfg.p_meas,
            "p_prep": cfg.p_prep, "shots": self.shots,
            "fails_Z": self.fails.get("Z", 0), "fails_X": self.fails.get("X", 0),
            "ci_low": f"{lo:.6g}", "ci_high": f"{hi:.6g}", "seed": cfg.seed,
            "wall_seconds": f"{self.wall_seconds:.3f}" if timing else "0",
        }
        if cfg.geometry == "surgery":
            out.update({"t0": cfg.t0, "t1": cfg.t1, "input": cfg.surgery_input,
                        "class0": self.class_counts[0], "class1": self.class_counts[1],
                        "class_fails": self.class_fails,
                        "fails_m0": self.cond_fails[0], "fails_m1": self.cond_fails[1]})
        return out


def write_csv(stats: Sequence[Stats], fh, timing: bool = True) -> None:
    """Header comments echo the first config, then one CSV row per run."""
    if not stats:
        return
    for line in stats[0].config.header():
        fh.write(f"# {line}\n")
    cols = list(CSV_COLUMNS)
    if any(s.config.geometry == "surgery" for s in stats):
        cols += SURGERY_COLUMNS
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n", restval="")
    w.writeheader()
    for s in stats:
        w.writerow(s.row(timing))
    fh.write(buf.getvalue())


# --------------------------------------------------------------------------
# Sampling pipeline
# --------------------------------------------------------------------------

@dataclasses.dataclass
class Pipeline:
    """Circuit, detector graph and matcher built once per run."""

    circuit: Circuit
    graph: object
    matching: object
    observables: List[str]
    initial_frame: Optional[Tuple[np.ndarray, np.ndarray]] = None

    @classmethod
    def build(cls, c: Circuit, observables: Optional[Sequence[str]] = None,
              initial_frame=None) -> "Pipeline":
        g = build_detector_graph(c, observables)
        mg = build_matching_graph(g)
        return cls(c, g, mg, list(g.observables), initial_frame)

    def run_batch(self, shots: int, params: NoiseParams, seed) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(detection events, raw observable bits, decoded flips) for one batch."""
        rng = np.random.default_rng(seed)
        noise = FrameNoise(self.circuit, params, shots)
        if self.initial_frame is not None:
            noise = _with_input(noise, self.initial_frame)
        packed = FrameSampler(self.circuit).sample(
            shots, rng, noise, ref_bits=self.graph.ref.bits)
        rec = unpack_shots(packed, shots)
        dets = detector_bits(self.graph, rec)
        obs = observable_bits(self.graph, rec, self.observables)
        pred = decode_batch(self.matching, dets)
        return dets, obs, pred


def _with_input(noise, frame):
    """Apply ``frame`` to every shot right after the preparation layer."""
    fx, fz = (np.asarray(a, dtype=bool) for a in frame)
    full = np.uint64(0xFFFFFFFFFFFFFFFF)

    def fn(li, x, z, rec, rng):
        if li == 0:
            x[fx] ^= full
            z[fz] ^= full
        noise(li, x, z, rec, rng)
    return fn


def _batches(cfg: ExperimentConfig, tag: int) -> List[Tuple[int, np.random.SeedSequence]]:
    nb = (cfg.shots + BATCH - 1) // BATCH
    root = np.random.SeedSequence([cfg.seed, tag])
    seeds = root.spawn(nb)
    return [(min(BATCH, cfg.shots - i * BATCH), s) for i, s in enumerate(seeds)]


def _map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


_PIPE: Dict[tuple, Pipeline] = {}


def _memory_pipeline(cfg: ExperimentConfig, basis: str) -> Pipeline:
    key = ("memory", cfg.geometry, cfg.spec(), basis)
    if key not in _PIPE:
        c = build_memory_circuit(cfg.spec(), cfg.spec().rounds, "Stabilizer", basis)
        names = [n for n, lg in c.logicals.items() if lg["basis"] == basis]
        _PIPE[key] = Pipeline.build(c, names)
    return _PIPE[key]


def _memory_job(args) -> int:
    cfg, basis, shots, seed = args
    pipe = _memory_pipeline(cfg, basis)
    _, obs, pred = pipe.run_batch(shots, cfg.noise, seed)
    return int(np.any(obs != pred, axis=1).sum())


def run_memory_experiment(cfg: ExperimentConfig) -> Stats:
    """Logical failures of Z-basis and X-basis memory runs.

    Each basis is a separate run with ``cfg.shots`` shots; a shot fails when
    any logical of that basis is decoded wrongly.
    """
    cfg.validate()
    if cfg.geometry == "surgery":
        raise ConfigError("geometry", "use run_surgery_experiment for surgery")
    t = time.perf_counter()
    fails = {}
    for tag, basis in enumerate(("Z", "X")):
        jobs = [(cfg, basis, n, s) for n, s in _batches(cfg, tag)]
        fails[basis] = sum(_map(_memory_job, jobs, cfg.workers))
    return Stats(cfg, cfg.shots, fails, time.perf_counter() - t)


def surgery_initial_frame(c: Circuit, inp: str):
    """Pauli applied before the first layer to encode the logical input.

    ``01`` flips the second block by an X string along one green column of
    that block, which commutes with every check of the product state.
    """
    n = c.n
    fx = np.zeros(n, dtype=bool)
    fz = np.zeros(n, dtype=bool)
    if inp == "01":
        lat = c.lattice
        for i, q in enumerate(c.qubits):
            if q.is_green and q.x2 == 1 and q.z2 > lat.bridge_z2 and not lat.is_bridge(q):
                fx[i] = True
    return fx, fz


def _surgery_pipeline(cfg: ExperimentConfig) -> Pipeline:
    key = ("surgery", cfg.spec(), cfg.surgery_input)
    if key not in _PIPE:
        basis = "X" if cfg.surgery_input == "++" else "Z"
        c = build_surgery_circuit(cfg.spec(), basis)
        names = ["M"] + [n for n, lg in c.logicals.items()
                         if lg["basis"] == basis and n != "M"]
        _PIPE[key] = Pipeline.build(c, names, surgery_initial_frame(c, cfg.surgery_input))
    return _PIPE[key]


def _surgery_job(args):
    cfg, shots, seed = args
    pipe = _surgery_pipeline(cfg)
    _, obs, pred = pipe.run_batch(shots, cfg.noise, seed)
    _, ref, _ = pipe.run_batch(1, NoiseParams(), 0)
    decoded = obs ^ pred
    cls = decoded[:, 0]
    mem_fail = np.any(decoded[:, 1:] != ref[0, 1:], axis=1)
    expect = {"00": 0, "01": 1}.get(cfg.surgery_input)
    cf = int((cls != expect).sum()) if expect is not None else 0
    return (int((cls == 0).sum()), int((cls == 1).sum()), cf,
            int((mem_fail & (cls == 0)).sum()), int((mem_fail & (cls == 1)).sum()))


def run_surgery_experiment(cfg: ExperimentConfig) -> Stats:
    """Outcome-class counts and post-surgery memory failures.

    The class is the decoded parity of the merge cut.  Memory failures
    compare the decoded block logicals against a noiseless shot with the
    same input; they are reported conditioned on the class and summed
    into ``fails_Z`` (``fails_X`` for the ``++`` input).
    """
    cfg.validate()
    if cfg.geometry != "surgery":
        raise ConfigError("geometry", "surgery experiment needs geometry surgery")
    t = time.perf_counter()
    jobs = [(cfg, n, s) for n, s in _batches(cfg, 7)]
    parts = _map(_surgery_job, jobs, cfg.workers)
    tot = [sum(p[i] for p in parts) for i in range(5)]
    basis = "X" if cfg.surgery_input == "++" else "Z"
    return Stats(cfg, cfg.shots, {basis: tot[3] + tot[4]}, time.perf_counter() - t,
                 (tot[0], tot[1]), tot[2], (tot[3], tot[4]))


def run(cfg: ExperimentConfig) -> Stats:
    if cfg.geometry == "surgery":
        return run_surgery_experiment(cfg)
    return run_memory_experiment(cfg)


def metadata(stats: Stats, timing: bool = True) -> dict:
    from . import __version__
    return {
        "version": __version__,
        "config": dataclasses.asdict(stats.config),
        "row": stats.row(timing),
        "failure_rate": stats.rate,
        "batch_size": BATCH,
    }
