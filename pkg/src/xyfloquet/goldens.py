"""Golden artifacts: small, hand-reviewable outputs regenerated bit-exactly.

Run ``python -m xyfloquet.goldens`` to verify, ``--write`` to regenerate.
"""

from __future__ import annotations

import argparse
import dataclasses
import difflib
import json
import os
import sys
from typing import Callable, List, Optional

from .circuit import build_memory_circuit, emit_text
from .geometry import GeometrySpec
from .syndrome import GRAPH_SCHEMA, build_detector_graph, graph_to_json

PACKAGE_DATA = os.path.join(os.path.dirname(__file__), "data")
SCHEMA_PATH = os.path.join(PACKAGE_DATA, "detector_graph.schema.json")


@dataclasses.dataclass
class Golden:
    name: str
    format: str
    command: str
    note: str
    make: Callable[[], str]


def _torus_circuit() -> str:
    c = build_memory_circuit(GeometrySpec.torus(2, 2, 1), 1, "Stabilizer", "Z-basis")
    return emit_text(c)


def _rect_graph() -> str:
    c = build_memory_circuit(GeometrySpec.rectangle(2, 2, 1), 1, "Stabilizer", "Z-basis")
    return graph_to_json(build_detector_graph(c))


def schema_text() -> str:
    return json.dumps(GRAPH_SCHEMA, indent=1, sort_keys=True) + "\n"


GOLDENS: List[Golden] = [
    Golden("torus2x2_T1_circuit.txt", "circuit-text",
           "xyfloquet export --what circuit-text --geometry torus --l 2 --rounds 1",
           "Six-phase period: MXX on green pairs with MZZ on purple pairs, then the "
           "two CX parts c and d, then the same with the pairing shifted by one "
           "qubit. Check the phase column and that every qubit is paired once per "
           "measurement layer.",
           _torus_circuit),
    Golden("rect2x2_T1_graph.json", "detector-graph-json",
           "xyfloquet export --what detector-graph-json --geometry rectangle --l 2 --rounds 1",
           "Vertex (E) and cube (M) detectors. E endpoints are absorbed by virtual "
           "nodes on the rough sides, M endpoints by those outside the smooth sides.",
           _rect_graph),
    Golden("detector_graph.schema.json", "json-schema",
           "python -m xyfloquet.goldens --write",
           "Published schema of the detector-graph export.",
           schema_text),
]


def default_root() -> str:
    """The ``goldens`` directory of a source checkout."""
    here = os.path.dirname(os.path.abspath(__file__))
    return os.path.normpath(os.path.join(here, "..", "..", "goldens"))


@dataclasses.dataclass
class GoldenResult:
    name: str
    ok: bool
    diff: str = ""


def verify_goldens(root: Optional[str] = None) -> List[GoldenResult]:
    """Regenerate every golden and diff it against the stored file."""
    root = root or default_root()
    out = []
    for g in GOLDENS:
        path = os.path.join(root, g.name)
        new = g.make()
        try:
            with open(path) as fh:
                old = fh.read()
        except FileNotFoundError:
            out.append(GoldenResult(g.name, False, f"missing {path}"))
            continue
        if old == new:
            out.append(GoldenResult(g.name, True))
        else:
            diff = "".join(difflib.unified_diff(old.splitlines(True), new.splitlines(True),
                                                g.name + " (stored)", g.name + " (regenerated)",
                                                n=1))
            out.append(GoldenResult(g.name, False, diff[:4000]))
    return out


def write_goldens(root: Optional[str] = None) -> None:
    root = root or default_root()
    os.makedirs(root, exist_ok=True)
    for g in GOLDENS:
        with open(os.path.join(root, g.name), "w", newline="") as fh:
            fh.write(g.make())
    os.makedirs(PACKAGE_DATA, exist_ok=True)
    with open(SCHEMA_PATH, "w", newline="") as fh:
        fh.write(schema_text())


def load_schema() -> dict:
    with open(SCHEMA_PATH) as fh:
        return json.load(fh)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--write", action="store_true", help="regenerate the stored goldens")
    ap.add_argument("--root", default=None)
    args = ap.parse_args(argv)
    if args.write:
        write_goldens(args.root)
        return 0
    bad = 0
    for r in verify_goldens(args.root):
        print(f"{'PASS' if r.ok else 'FAIL'} {r.name}")
        if not r.ok:
            bad += 1
            print(r.diff)
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
