"""Minimum-weight perfect matching on the detector graph.

The production path hands the fault edges to PyMatching (sparse blossom).
A second, independent path computes all shortest paths with networkx and
solves the matching with its blossom implementation, using one boundary
twin per fired node; a brute-force pairing search covers tiny syndromes.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import pymatching

from .syndrome import DetectorGraph, E, M

BOUNDARY = "B"


class DecoderError(ValueError):
    pass


@dataclasses.dataclass
class MatchEdge:
    a: int  # detector index
    b: Optional[int]  # detector index or None for the boundary
    fault_id: int
    observables: Tuple[int, ...]
    weight: float = 1.0


@dataclasses.dataclass
class MatchingGraph:
    graph: DetectorGraph
    edges: List[MatchEdge]
    matching: pymatching.Matching
    species_of: List[str]  # per detector
    weights: str = "uniform"

    def nx_graph(self, species: str) -> nx.Graph:
        """Detector graph of one species with a single boundary node."""
        G = nx.Graph()
        for d, sp in enumerate(self.species_of):
            if sp == species:
                G.add_node(d)
        G.add_node(BOUNDARY)
        for e in self.edges:
            if self.species_of[e.a] != species:
                continue
            b = BOUNDARY if e.b is None else e.b
            if G.has_edge(e.a, b) and G[e.a][b]["weight"] <= e.weight:
                continue
            G.add_edge(e.a, b, weight=e.weight, obs=e.observables, fault=e.fault_id)
        return G


def build_matching_graph(g: DetectorGraph, weights: str = "uniform",
                         noise=None) -> MatchingGraph:
    """Matching graph with unit weight per elementary fault.

    ``weights="loglik"`` is accepted as a hook for likelihood weights but
    falls back to uniform weights unless a noise model supplies them.
    """
    species_of = [g.nodes[ni].species for ni in g.detectors]
    seen: Dict[Tuple[int, Optional[int]], MatchEdge] = {}
    for e in g.edges:
        real = sorted(g.det_of_node[i] for i in e.nodes if not g.nodes[i].virtual)
        if not real:
            continue
        if len(real) > 2:
            raise DecoderError(f"fault {e.fault_id} has more than two real endpoints")
        key = (real[0], real[1] if len(real) == 2 else None)
        if key in seen:
            continue
        seen[key] = MatchEdge(key[0], key[1], e.fault_id, tuple(e.observables))
    edges = list(seen.values())
    m = pymatching.Matching()
    nobs = len(g.observables)
    touched = set()
    for me in edges:
        touched.add(me.a)
        if me.b is None:
            m.add_boundary_edge(me.a, fault_ids=set(me.observables), weight=me.weight,
                                merge_strategy="keep-original")
        else:
            touched.add(me.b)
            m.add_edge(me.a, me.b, fault_ids=set(me.observables), weight=me.weight,
                       merge_strategy="keep-original")
    missing = set(range(g.num_detectors)) - touched
    if missing:
        raise DecoderError(f"detectors {sorted(missing)[:5]} cannot be reached by any fault")
    if m.num_detectors < g.num_detectors:
        # Pad so that detector indices line up.
        for d in range(m.num_detectors, g.num_detectors):
            m.add_boundary_edge(d, weight=1e9)
    if nobs and m.num_fault_ids < nobs:
        m.ensure_num_fault_ids(nobs)
    return MatchingGraph(g, edges, m, species_of, weights)


@dataclasses.dataclass
class DecodeResult:
    fired: FrozenSet[int]
    pairs: List[Tuple[int, Optional[int]]]
    paths: List[List[int]]  # fault ids along each matched path
    weight: float
    logical_flip: Tuple[int, ...]  # per tracked observable
    logical_outcome: Optional[int] = None  # surgery class m
    correction: Tuple[Tuple[str, str], ...] = ()

    def to_json(self) -> str:
        return json.dumps({
            "fired": sorted(self.fired),
            "pairs": [[a, b] for a, b in self.pairs],
            "paths": self.paths,
            "weight": self.weight,
            "logical_flip": list(self.logical_flip),
            "logical_outcome": self.logical_outcome,
            "correction": [list(c) for c in self.correction],
        }, sort_keys=True)


def _correction(g: DetectorGraph, flips: Sequence[int]) -> Tuple[Tuple[str, str], ...]:
    """Final-boundary Pauli string undoing the decoded logical flips.

    A flipped Z-type logical is undone by an X string on its operator
    support and vice versa.
    """
    out: Dict[str, str] = {}
    for i, bit in enumerate(flips):
        if not bit:
            continue
        lg = g.circuit.logicals[g.observables[i]]
        p = "X" if lg["basis"] == "Z" else "Z"
        for q in lg["operator"]:
            key = str(q)
            prev = out.get(key)
            out[key] = p if prev is None else ("I" if prev == p else "Y")
    return tuple(sorted((k, v) for k, v in out.items() if v != "I"))


def decode(mg: MatchingGraph, fired: Iterable[int], record_bits=None) -> DecodeResult:
    """Decode one syndrome given as a set of fired detector indices.

    When ``record_bits`` is given and the circuit tracks the surgery class
    ``M``, the logical outcome is the measured cut parity corrected by the
    matched paths.
    """
    fired = frozenset(int(d) for d in fired)
    g = mg.graph
    syn = np.zeros(g.num_detectors, dtype=np.uint8)
    syn[list(fired)] = 1
    pred, weight = mg.matching.decode(syn, return_weight=True)
    pairs = []
    if fired:
        arr = mg.matching.decode_to_matched_dets_array(syn)
        for a, b in arr:
            pairs.append((int(a), None if b < 0 else int(b)))
    paths = [witness_path(mg, a, b) for a, b in pairs]
    flips = tuple(int(x) for x in pred[:len(g.observables)])
    outcome = None
    if "M" in g.observables and record_bits is not None:
        i = g.observables.index("M")
        raw = 0
        for lab in g.obs_labels["M"]:
            raw ^= int(record_bits[lab])
        outcome = raw ^ flips[i]
    return DecodeResult(fired, pairs, paths, float(weight), flips, outcome,
                        _correction(g, flips))


def decode_batch(mg: MatchingGraph, dets: np.ndarray) -> np.ndarray:
    """(shots, detectors) -> (shots, observables) predicted flips."""
    if dets.shape[0] == 0:
        return np.zeros((0, len(mg.graph.observables)), dtype=np.uint8)
    pred = mg.matching.decode_batch(dets)
    return np.asarray(pred, dtype=np.uint8)[:, :len(mg.graph.observables)]


def logical_failure(dr: DecodeResult, true_flip: Sequence[int]) -> Tuple[int, ...]:
    return tuple(int(a) ^ int(b) for a, b in zip(dr.logical_flip, true_flip))


# --------------------------------------------------------------------------
# Independent route: networkx shortest paths + blossom
# --------------------------------------------------------------------------

def witness_path(mg: MatchingGraph, a: int, b: Optional[int]) -> List[int]:
    sp = mg.species_of[a]
    G = _cached_nx(mg, sp)
    target = BOUNDARY if b is None else b
    nodes = nx.shortest_path(G, a, target, weight="weight")
    return [G[u][v]["fault"] for u, v in zip(nodes, nodes[1:])]


def _cached_nx(mg: MatchingGraph, sp: str) -> nx.Graph:
    cache = mg.__dict__.setdefault("_nx", {})
    if sp not in cache:
        cache[sp] = mg.nx_graph(sp)
    return cache[sp]


def _path_obs(G: nx.Graph, nodes: Sequence) -> int:
    mask = 0
    for u, v in zip(nodes, nodes[1:]):
        for o in G[u][v]["obs"]:
            mask ^= 1 << o
    return mask


def decode_networkx(mg: MatchingGraph, fired: Iterable[int]) -> Tuple[float, int]:
    """(total weight, observable flip mask) from networkx blossom."""
    fired = sorted(set(int(d) for d in fired))
    total = 0.0
    mask = 0
    for sp in (E, M):
        nodes = [d for d in fired if mg.species_of[d] == sp]
        if not nodes:
            continue
        G = _cached_nx(mg, sp)
        dist, paths = {}, {}
        for a in nodes:
            d, p = nx.single_source_dijkstra(G, a, weight="weight")
            dist[a], paths[a] = d, p
        K = nx.Graph()
        big = 1.0 + sum(max(v for v in dist[a].values()) for a in nodes)
        for a, b in itertools.combinations(nodes, 2):
            if b in dist[a]:
                K.add_edge(a, b, weight=big - dist[a][b])
        for a in nodes:
            if BOUNDARY in dist[a]:
                K.add_edge(a, ("twin", a), weight=big - dist[a][BOUNDARY])
        for a, b in itertools.combinations(nodes, 2):
            K.add_edge(("twin", a), ("twin", b), weight=big)
        mt = nx.max_weight_matching(K, maxcardinality=True)
        for u, v in mt:
            if isinstance(u, tuple) and isinstance(v, tuple):
                continue
            if isinstance(u, tuple):
                u, v = v, u
            if isinstance(v, tuple):
                total += dist[u][BOUNDARY]
                mask ^= _path_obs(G, paths[u][BOUNDARY])
            else:
                total += dist[u][v]
                mask ^= _path_obs(G, paths[u][v])
    return total, mask


def brute_force_weight(mg: MatchingGraph, fired: Iterable[int]) -> float:
    """Exact minimum over all pairings (each node may also go to the
    boundary); exponential, for at most ~8 fired nodes."""
    fired = sorted(set(int(d) for d in fired))
    total = 0.0
    for sp in (E, M):
        nodes = [d for d in fired if mg.species_of[d] == sp]
        if not nodes:
            continue
        G = _cached_nx(mg, sp)
        dist = {a: nx.single_source_dijkstra_path_length(G, a, weight="weight") for a in nodes}
        inf = float("inf")

        def best(rest: Tuple[int, ...]) -> float:
            if not rest:
                return 0.0
            a, tail = rest[0], rest[1:]
            out = dist[a].get(BOUNDARY, inf) + best(tail)
            for i, b in enumerate(tail):
                w = dist[a].get(b, inf)
                if w < inf:
                    out = min(out, w + best(tail[:i] + tail[i + 1:]))
            return out
        total += best(tuple(nodes))
    return total


def decode_graph_json(text: str, fired_nodes: Sequence[int]) -> dict:
    """Decode a syndrome against an exported detector-graph JSON.

    ``fired_nodes`` are node ids from the JSON.  Returns the predicted
    observable flips and the matched node pairs.
    """
    data = json.loads(text)
    nodes = {n["id"]: n for n in data["nodes"]}
    real = [n["id"] for n in data["nodes"] if not n["virtual"]]
    det = {nid: i for i, nid in enumerate(real)}
    m = pymatching.Matching()
    for e in data["edges"]:
        r = sorted(det[i] for i in e["nodes"] if not nodes[i]["virtual"])
        obs = set(e.get("observables", []))
        if len(r) == 2:
            m.add_edge(r[0], r[1], fault_ids=obs, merge_strategy="keep-original")
        elif len(r) == 1:
            m.add_boundary_edge(r[0], fault_ids=obs, merge_strategy="keep-original")
    nobs = len(data["observables"])
    if nobs and m.num_fault_ids < nobs:
        m.ensure_num_fault_ids(nobs)
    syn = np.zeros(max(m.num_detectors, len(real)), dtype=np.uint8)
    for nid in fired_nodes:
        if nid not in det:
            raise DecoderError(f"node {nid} is virtual or unknown")
        syn[det[nid]] = 1
    pred = m.decode(syn)
    pairs = m.decode_to_matched_dets_array(syn) if syn.any() else np.zeros((0, 2), int)
    inv = {i: nid for nid, i in det.items()}
    return {
        "observables": {data["observables"][i]["name"]: int(pred[i]) for i in range(nobs)},
        "pairs": [[inv[int(a)], None if b < 0 else inv[int(b)]] for a, b in pairs],
    }
