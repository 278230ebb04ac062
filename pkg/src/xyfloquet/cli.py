"""Command-line front end: ``xyfloquet memory|surgery|export|selftest``."""

from __future__ import annotations

import json
import os
import sys
import time

import click

from .experiments import (GEOMETRIES, SURGERY_INPUTS, ConfigError, ExperimentConfig, Stats,
                          metadata, run, write_csv)

EXPORT_KINDS = ("circuit-text", "detector-graph-json")


def _load_config(path):
    if path is None:
        return ExperimentConfig()
    with open(path) as fh:
        data = json.load(fh)
    # Accept the flag spelling with dashes as well.
    data = {k.replace("-", "_"): v for k, v in data.items()}
    return ExperimentConfig.from_dict(data)


def common_options(fn):
    opts = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                     help="JSON config; flags override its fields."),
        click.option("--geometry", type=click.Choice(GEOMETRIES), default=None),
        click.option("--l1", type=int, default=None),
        click.option("--l2", type=int, default=None),
        click.option("--l", "l", type=int, default=None, help="Side length (sets l1=l2)."),
        click.option("--rounds", type=int, default=None),
        click.option("--t0", type=int, default=None),
        click.option("--t1", type=int, default=None),
        click.option("--p-gate", type=float, default=None),
        click.option("--p-idle", type=float, default=None),
        click.option("--p-meas", type=float, default=None),
        click.option("--p-prep", type=float, default=None),
        click.option("--shots", type=int, default=None),
        click.option("--seed", type=int, default=None),
        click.option("--workers", type=int, default=None),
        click.option("--out", type=click.Path(dir_okay=False), default=None,
                     help="CSV path (stdout when omitted)."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _config(config_path, overrides) -> ExperimentConfig:
    try:
        cfg = _load_config(config_path).merged(overrides)
        cfg.validate()
    except ConfigError as exc:
        raise click.UsageError(f"invalid config field {exc}")
    except TypeError as exc:
        raise click.UsageError(f"invalid config: {exc}")
    return cfg


def _emit(stats: Stats, timing: bool, report: bool) -> None:
    cfg = stats.config
    if cfg.out is None:
        write_csv([stats], sys.stdout, timing)
        if report:
            raise click.UsageError("--report needs --out")
        return
    with open(cfg.out, "w", newline="") as fh:
        write_csv([stats], fh, timing)
    base, _ = os.path.splitext(cfg.out)
    with open(base + ".json", "w") as fh:
        json.dump(metadata(stats, timing), fh, indent=1, sort_keys=True)
        fh.write("\n")
    if report:
        from .report import render
        for path in render(cfg.out):
            click.echo(f"wrote {path}", err=True)


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Simulate, decode and verify the x+y Floquet code."""


@main.command()
@common_options
@click.option("--no-timing", is_flag=True, help="Write wall_seconds as 0 for byte-identical output.")
@click.option("--report", is_flag=True, help="Also render PNG figures next to the CSV.")
def memory(config_path, no_timing, report, **kw):
    """Memory experiment on a torus or rectangle."""
    cfg = _config(config_path, kw)
    if cfg.geometry == "surgery":
        raise click.UsageError("memory needs --geometry torus or rectangle")
    _emit(run(cfg), not no_timing, report)


@main.command()
@common_options
@click.option("--input", "surgery_input", type=click.Choice(SURGERY_INPUTS), default=None,
              help="Logical input of the two blocks.")
@click.option("--bridge-idle", is_flag=True, default=None,
              help="Apply idle noise to bridge qubits outside the merge.")
@click.option("--no-timing", is_flag=True)
@click.option("--report", is_flag=True)
def surgery(config_path, no_timing, report, **kw):
    """Lattice-surgery ZZ measurement between two blocks."""
    kw["geometry"] = "surgery"
    cfg = _config(config_path, kw)
    _emit(run(cfg), not no_timing, report)


@main.command()
@common_options
@click.option("--what", type=click.Choice(EXPORT_KINDS), required=True)
@click.option("--basis", type=click.Choice(["Z", "X"]), default="Z",
              help="Readout basis of the exported circuit.")
def export(config_path, what, basis, **kw):
    """Write the circuit text or the detector-graph JSON."""
    from .circuit import build_memory_circuit, build_surgery_circuit, emit_text
    from .syndrome import build_detector_graph, graph_to_json
    if kw.get("seed") is None:
        kw["seed"] = 0  # export is deterministic; the seed is unused
    cfg = _config(config_path, kw)
    spec = cfg.spec()
    if cfg.geometry == "surgery":
        c = build_surgery_circuit(spec, basis)
    else:
        c = build_memory_circuit(spec, spec.rounds, "Stabilizer", basis)
    text = emit_text(c) if what == "circuit-text" else graph_to_json(build_detector_graph(c))
    if cfg.out is None:
        click.echo(text, nl=False)
    else:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)


@main.command()
@click.option("--quick", is_flag=True, help="Smaller random sample.")
def selftest(quick):
    """Run the oracle equivalence checks and print one line per check."""
    import numpy as np
    from .crosscheck import check_window, random_oracle_trial, torus_window_circuit

    ok = True

    def line(name, passed, detail):
        nonlocal ok
        ok &= passed
        click.echo(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")

    t = time.perf_counter()
    c = torus_window_circuit()
    r = check_window(c, 1, "single")
    line("circuit vs path integral", r.max_deviation < 1e-9,
         f"{r.records} records, max deviation {r.max_deviation:.2e}")
    rng = np.random.default_rng(2024)
    trials = 50 if quick else 500
    bad = sum(not random_oracle_trial(rng).agree for _ in range(trials))
    line("tableau vs statevector", bad == 0, f"{trials - bad}/{trials} random circuits agree")
    click.echo(f"elapsed {time.perf_counter() - t:.1f}s")
    if not ok:
        sys.exit(1)


if __name__ == "__main__":
    main()
