"""Command-line front end: ``ttess simulate|verify|render|stats``.

Runs are configured by a TOML file::

    seed = 1
    iterations = 100000
    burn_in = 1000            # iterations discarded before sampling
    subsample = 100           # sampling period after burn-in

    [domain]
    shape = "unit-square"     # or "square" with side = L, or vertices = [[x, y], ...]

    [model]
    name = "crtt"             # crtt | acs | area | angle | composite
    tau = 1.9
    # composite: components = [{name = "crtt", tau = 2.0}, {name = "area", alpha = 93000.0}]

    [proposals]
    p_split = 0.3333
    p_merge = 0.3333
    p_flip = 0.3333

    [output]
    dir = "out"
    trace_period = 100        # trace.csv row period
    svg_period = 0            # periodic SVG snapshots, 0 = final state only
    save_samples = true       # write samples.txt (input of `ttess stats`)

    [verify]
    gnz_states = 2000
    gnz_period = 10
    gnz_j = 10
    uniformity_states = 20000
    tolerance_se = 3.0

The log level is read from the ``TTESS_LOG_LEVEL`` environment variable.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import monitor, sampler
from .geom import GeometryError, Point, Polygon
from .lines import pattern_from_points
from .models import EnergyModel, model_from_config
from .tessellation import FormatError, TTessellation, dumps, load, loads, save

log = logging.getLogger("ttess")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_UNKNOWN = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class VerifyConfig:
    gnz_states: int = 2000
    gnz_period: int = 10
    gnz_j: int = 10
    uniformity_states: int = 20000
    tolerance_se: float = 3.0


@dataclass
class RunConfig:
    domain: Polygon
    model: EnergyModel
    proposals: sampler.ProposalConfig
    seed: Optional[int] = None
    iterations: int = 10000
    burn_in: int = 1000
    subsample: int = 100
    out: Path = Path("out")
    trace_period: int = 100
    svg_period: int = 0
    save_samples: bool = True
    verify: VerifyConfig = field(default_factory=VerifyConfig)


_TOP = {"seed", "iterations", "burn_in", "subsample", "domain", "model", "proposals", "output", "verify"}


def _int(tbl: dict, key: str, where: str, default, minimum: int = 0):
    v = tbl.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ConfigError(f"{where}{key}: expected an integer >= {minimum}, got {v!r}")
    return v


def _unknown(tbl: dict, allowed: set, where: str) -> None:
    extra = sorted(set(tbl) - allowed)
    if extra:
        raise ConfigError(f"{where}: unknown field(s) {', '.join(extra)}")


def parse_domain(spec) -> Polygon:
    if spec is None:
        return Polygon.square()
    if not isinstance(spec, dict):
        raise ConfigError("domain: expected a table")
    _unknown(spec, {"shape", "side", "vertices"}, "domain")
    try:
        if "vertices" in spec:
            return Polygon([tuple(map(float, v)) for v in spec["vertices"]])
        shape = spec.get("shape", "unit-square")
        if shape == "unit-square":
            return Polygon.square()
        if shape == "square":
            side = float(spec.get("side", 1.0))
            if not side > 0:
                raise ConfigError("domain.side: must be positive")
            return Polygon.square(side)
    except (TypeError, ValueError, GeometryError) as exc:
        raise ConfigError(f"domain: {exc}") from exc
    raise ConfigError(f"domain.shape: unknown shape {shape!r} (unit-square, square, or give vertices)")


def parse_config(data: dict, source: str = "<config>") -> RunConfig:
    """Validate a decoded TOML document; errors name the offending field."""
    _unknown(data, _TOP, source)
    domain = parse_domain(data.get("domain"))
    try:
        model = model_from_config(data.get("model", {"name": "crtt", "tau": 1.0}))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"model: {exc}") from exc
    prop = data.get("proposals", {})
    _unknown(prop, {"p_split", "p_merge", "p_flip"}, "proposals")
    try:
        proposals = sampler.ProposalConfig(**{k: float(v) for k, v in prop.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"proposals: {exc}") from exc
    out = data.get("output", {})
    _unknown(out, {"dir", "trace_period", "svg_period", "save_samples"}, "output")
    ver = data.get("verify", {})
    _unknown(ver, {"gnz_states", "gnz_period", "gnz_j", "uniformity_states", "tolerance_se"}, "verify")
    vc = VerifyConfig(
        gnz_states=_int(ver, "gnz_states", "verify.", 2000, 2),
        gnz_period=_int(ver, "gnz_period", "verify.", 10, 1),
        gnz_j=_int(ver, "gnz_j", "verify.", 10, 1),
        uniformity_states=_int(ver, "uniformity_states", "verify.", 20000, 1),
        tolerance_se=float(ver.get("tolerance_se", 3.0)),
    )
    save_samples = out.get("save_samples", True)
    if not isinstance(save_samples, bool):
        raise ConfigError("output.save_samples: expected true or false")
    return RunConfig(
        domain=domain,
        model=model,
        proposals=proposals,
        seed=_int(data, "seed", "", None),
        iterations=_int(data, "iterations", "", 10000),
        burn_in=_int(data, "burn_in", "", 1000),
        subsample=_int(data, "subsample", "", 100, 1),
        out=Path(out.get("dir", "out")),
        trace_period=_int(out, "trace_period", "output.", 100, 1),
        svg_period=_int(out, "svg_period", "output.", 0),
        save_samples=save_samples,
        verify=vc,
    )


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return parse_config({})
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        return parse_config(data, path)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


# ----------------------------------------------------------------------
# sample files: concatenated tessellation dumps

_SAMPLE_TAG = "sample"


def write_samples(states: list, path: Path) -> None:
    with open(path, "w") as fh:
        for it, text in states:
            fh.write(f"{_SAMPLE_TAG} {it}\n{text}end\n")


def read_samples(path) -> list:
    """``[(iteration, TTessellation)]`` from a samples file or a single state file."""
    with open(path) as fh:
        text = fh.read()
    if not text.startswith(_SAMPLE_TAG + " "):
        return [(0, loads(text))]
    out = []
    for block in text.split(_SAMPLE_TAG + " ")[1:]:
        head, _, body = block.partition("\n")
        if not body.rstrip().endswith("end"):
            raise FormatError(f"{path}: sample {head} is truncated")
        out.append((int(head), loads(body.rstrip()[: -len("end")])))
    return out


# ----------------------------------------------------------------------
# commands


def _simulate_one(cfg: RunConfig, seed, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    st = sampler.ChainState.new(cfg.domain, cfg.model, cfg.proposals, seed=seed)
    trace = monitor.TraceRecorder()
    samples: list = []
    callbacks = [(cfg.trace_period, trace)]
    if cfg.save_samples:

        def keep(s):
            if s.iteration > cfg.burn_in and (s.iteration - cfg.burn_in) % cfg.subsample == 0:
                samples.append((s.iteration, dumps(s.tessellation)))

        callbacks.append((1, keep))
    if cfg.svg_period:
        callbacks.append(
            (cfg.svg_period, lambda s: monitor.render_svg(s.tessellation, out / f"state_{s.iteration:09d}.svg"))
        )
    sampler.run(st, cfg.iterations, callbacks, record_trace=False)
    monitor.write_trace_csv(trace.records, out / "trace.csv")
    save(st.tessellation, out / "final.ttess")
    monitor.render_svg(st.tessellation, out / "final.svg")
    if cfg.save_samples:
        write_samples(samples, out / "samples.txt")
    summary = {
        "iterations": st.iteration,
        "energy": st.energy,
        "nseint": st.tessellation.stats.nseint,
        "acceptance": {k: st.acceptance_rate(k) for k in sampler.KINDS},
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return summary


def cmd_simulate(cfg: RunConfig, replicates: int = 1) -> int:
    if replicates <= 1:
        s = _simulate_one(cfg, cfg.seed, cfg.out)
        log.info("simulate: %s", s)
        return EXIT_OK
    seeds = np.random.SeedSequence(cfg.seed).spawn(replicates)
    dirs = [cfg.out / f"rep_{i:03d}" for i in range(replicates)]
    with ProcessPoolExecutor(max_workers=min(replicates, os.cpu_count() or 1)) as pool:
        for d, s in zip(dirs, pool.map(_simulate_one, [cfg] * replicates, seeds, dirs)):
            log.info("simulate %s: %s", d.name, s)
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    """Run the GNZ, uniformity and convergence checks; write verify.json."""
    vc = cfg.verify
    conv = sampler.check_convergence_conditions(cfg.model, cfg.proposals)
    report = {"convergence": {"verdict": conv.verdict, "h_strictly_positive": conv.h_strictly_positive,
                              "irreducible": conv.irreducible, "aperiodic": conv.aperiodic}}
    failed = False
    rng = np.random.default_rng(cfg.seed)
    if cfg.model.is_hereditary():
        for kind, fn, phi, name in (
            ("gnz_split", sampler.verify_gnz_split, 1.0, "phi=1"),
            ("gnz_flip", sampler.verify_gnz_flip, sampler.added_edge_length, "phi=added edge length"),
        ):
            r = fn(cfg.model, phi, vc.gnz_states, vc.gnz_period, rng, domain=cfg.domain,
                   proposals=cfg.proposals, name=name,
                   **({"j": vc.gnz_j} if kind == "gnz_split" else {}))
            ok = r.agrees(vc.tolerance_se)
            failed |= not ok
            report[kind] = {"lhs": r.lhs_estimate, "rhs": r.rhs_estimate, "lhs_se": r.lhs_se,
                            "rhs_se": r.rhs_se, "n_states": r.n_states, "z": r.z, "pass": ok}
            print(("PASS " if ok else "FAIL ") + r.summary())
    else:
        print("SKIP GNZ checks: model is not known to be hereditary")
    sq = Polygon.square()
    pattern = pattern_from_points(sq, [((0.0, 0.3), (1.0, 0.4)), ((0.6, 0.0), (0.5, 1.0))])
    u = sampler.conditional_uniformity_test(pattern, vc.uniformity_states, rng)
    ok = u.p_value > 0.01
    failed |= not ok
    report["uniformity_two_lines"] = {"chi2": u.chi2, "p_value": u.p_value, "n_states": u.n_states, "pass": ok}
    print(("PASS " if ok else "FAIL ") + f"conditional uniformity (2 lines): chi2={u.chi2:.3f} p={u.p_value:.3f}")
    print(f"convergence verdict: {conv.verdict}")
    cfg.out.mkdir(parents=True, exist_ok=True)
    with open(cfg.out / "verify.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    if failed:
        return EXIT_FAIL
    return EXIT_OK if conv.convergent else EXIT_UNKNOWN


def cmd_render(state: str, out: Optional[str], color: bool = True) -> int:
    t = load(state)
    target = Path(out) if out else Path(state).with_suffix(".svg")
    monitor.render_svg(t, target, color_segments=color)
    return EXIT_OK


def cmd_stats(inputs: list, out: Path, lags: Optional[list] = None) -> int:
    """Lorenz, angle and survival CSVs from saved samples (pooled over all inputs)."""
    out.mkdir(parents=True, exist_ok=True)
    samples = []
    for path in inputs:
        samples.extend(read_samples(path))
    if not samples:
        raise FormatError("no states in the inputs")
    areas = [a for _, t in samples for a in t.cell_areas()]
    monitor.write_lorenz_csv(monitor.lorenz_curve(areas), out / "lorenz.csv")
    angles = [a for _, t in samples for a in t.segment_angles()]
    if angles:
        monitor.write_angles_csv(monitor.angle_histogram(angles), out / "angles.csv")
    else:
        monitor.write_angles_csv(
            monitor.AngleHistogram(np.linspace(0, math.pi / 2, 33), np.zeros(32, dtype=int)), out / "angles.csv"
        )
    its = [it for it, _ in samples]
    spacing = its[1] - its[0] if len(its) > 1 else 1
    if len(its) > 1 and any(b - a != spacing for a, b in zip(its, its[1:])):
        raise FormatError("survival needs equally spaced samples from one chain")
    if len(samples) > 1:
        if lags is None:
            n = len(samples)
            lags = sorted({d * spacing for d in (0, 1, 2, 5, 10, 20, 50, 100, 200, 500) if d < n})
        curve = monitor.segment_survival([t for _, t in samples], lags, spacing=spacing)
    else:
        curve = monitor.SurvivalCurve([0], [1.0])
    monitor.write_survival_csv(curve, out / "survival.csv")
    return EXIT_OK


# ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ttess", description="Gibbs random T-tessellations")
    sub = p.add_subparsers(dest="command", required=True)

    def chain_flags(sp):
        sp.add_argument("--config", help="TOML run configuration")
        sp.add_argument("--seed", type=int, help="override the configured seed")
        sp.add_argument("--iterations", type=int, help="override the configured iteration count")
        sp.add_argument("--out", help="output directory")

    sim = sub.add_parser("simulate", help="run a chain from the empty tessellation")
    chain_flags(sim)
    sim.add_argument("--replicates", type=int, default=1, help="independent chains, run in parallel")
    ver = sub.add_parser("verify", help="numerical checks of the sampler for the configured model")
    chain_flags(ver)
    ren = sub.add_parser("render", help="SVG of a saved tessellation")
    ren.add_argument("state")
    ren.add_argument("--out", help="SVG path (default: state path with .svg)")
    ren.add_argument("--no-color", action="store_true", help="draw internal edges in one color")
    sta = sub.add_parser("stats", help="Lorenz, angle and survival CSVs from saved samples")
    sta.add_argument("inputs", nargs="+", help="samples.txt files or single state files")
    sta.add_argument("--out", default=".", help="output directory")
    sta.add_argument("--lags", type=int, nargs="*", help="survival lags in iterations")
    return p


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.iterations is not None:
        if args.iterations < 0:
            raise ConfigError("--iterations must be non-negative")
        cfg = replace(cfg, iterations=args.iterations)
    if args.out is not None:
        cfg = replace(cfg, out=Path(args.out))
    return cfg


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("TTESS_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        if args.command in ("simulate", "verify"):
            cfg = _apply_overrides(load_config(args.config), args)
            if args.command == "simulate":
                if args.replicates < 1:
                    raise ConfigError("--replicates must be at least 1")
                return cmd_simulate(cfg, args.replicates)
            return cmd_verify(cfg)
        if args.command == "render":
            return cmd_render(args.state, args.out, not args.no_color)
        return cmd_stats(args.inputs, Path(args.out), args.lags)
    except ConfigError as exc:
        print(f"ttess: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FormatError, GeometryError) as exc:
        print(f"ttess: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"ttess: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
