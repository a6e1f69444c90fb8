"""Command-line front end: ``generate``, ``analyze`` and ``sample``.

Exit codes: 0 success, 2 configuration error, 3 memory budget exceeded,
4 internal numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import corpus
from .branches import branch_entropy, joint_decomposition
from .errors import BranchRecError, ConfigError
from .estimator import PAULIS, ObservableProduct, npoint_exact, npoint_sampled
from .records import scan, verify_record
from .regions import Region, RegionLayout, cover_matrix, sphere_criterion
from .serialize import (SCHEMA_VERSION, complex_from_json, complex_to_json, dump_json, load_json,
                        observable_to_json, read_state, state_to_json)
from .statecore import Lattice, PureState

MAX_TOL = 1e-2


@dataclass
class RunConfig:
    state_path: str | None = None
    generator: str | None = None
    params: dict = field(default_factory=dict)
    candidates: Any = "singletons"
    tol: float = 1e-8
    seed: int = 0
    ell: float | None = None
    output: str | None = None
    layout_output: str | None = None
    product: list = field(default_factory=list)
    num_samples: int = 10000
    exhaustive: bool = False
    dump_branches: bool = False

    def validate(self) -> None:
        if (self.state_path is None) == (self.generator is None):
            raise ConfigError("exactly one state source (path or generator) is required")
        if not 0 < self.tol <= MAX_TOL:
            raise ConfigError(f"tol must lie in (0, {MAX_TOL}]")
        if self.seed is None:
            raise ConfigError("a seed is required")
        if self.ell is not None and self.ell <= 0:
            raise ConfigError("ell must be positive")


def load_config(args) -> RunConfig:
    data: dict = {}
    if getattr(args, "config", None):
        data = load_json(args.config)
    state = data.get("state", {})
    cfg = RunConfig(
        state_path=state.get("path"),
        generator=state.get("generator"),
        params=dict(state.get("params", {})),
        candidates=data.get("candidates", "singletons"),
        tol=float(data.get("tol", 1e-8)),
        seed=data.get("seed", 0),
        ell=data.get("ell"),
        output=data.get("output"),
        layout_output=data.get("layout_output"),
        product=data.get("product", []),
        num_samples=int(data.get("num_samples", 10000)),
        exhaustive=bool(data.get("exhaustive", False)),
        dump_branches=bool(data.get("dump_branches", False)),
    )
    if getattr(args, "state", None):
        cfg.state_path, cfg.generator = args.state, None
    if getattr(args, "generator", None):
        cfg.generator, cfg.state_path = args.generator, None
    if getattr(args, "params", None):
        cfg.params.update(_json_arg(args.params))
    if getattr(args, "candidates", None):
        cfg.candidates = _candidates_arg(args.candidates)
    for name in ("tol", "seed", "ell", "num_samples"):
        if getattr(args, name, None) is not None:
            setattr(cfg, name, getattr(args, name))
    if getattr(args, "out", None):
        cfg.output = args.out
    if getattr(args, "layout", None):
        cfg.layout_output = args.layout
    if getattr(args, "dump_branches", False):
        cfg.dump_branches = True
    if getattr(args, "exhaustive", False):
        cfg.exhaustive = True
    if getattr(args, "product", None):
        cfg.product = _json_arg(args.product)
    try:
        cfg.seed = int(cfg.seed)
    except (TypeError, ValueError):
        raise ConfigError("seed must be an integer") from None
    cfg.validate()
    return cfg


def _json_arg(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON argument: {exc}") from None


def _candidates_arg(text: str):
    text = text.strip()
    if text.startswith("["):
        return _json_arg(text)
    return [part.strip() for part in text.split(",")] if "," in text else text


def _complex(value) -> complex:
    if isinstance(value, (list, tuple)):
        return complex(value[0], value[1])
    return complex(value)


# -- generators -------------------------------------------------------------


def _region_list(items) -> list[list[int]]:
    return [list(map(int, r)) for r in items]


def generate(name: str, params: dict, seed: int) -> tuple[PureState, dict]:
    """Build a generator state and the layout naming its relevant regions."""
    p = dict(params)
    try:
        if name == "bell":
            state = corpus.bell_state(p.get("coords"))
            layout = {"candidates": [[0], [1]], "observables": {"z": [[0], [1]], "x": [[0], [1]]}}
        elif name == "ghz":
            n = int(p.get("n", 3))
            state = corpus.ghz_state(n)
            layout = {"candidates": [[k] for k in range(n)], "observables": {"z": [[k] for k in range(n)]}}
        elif name == "product":
            n = int(p.get("n", 4))
            state = corpus.product_state(n)
            layout = {"candidates": [[k] for k in range(n)], "observables": {}}
        elif name == "shor":
            M, Mp = int(p.get("M", 3)), int(p.get("Mp", 3))
            alpha = _complex(p.get("alpha", 2 ** -0.5))
            beta = _complex(p.get("beta", 2 ** -0.5))
            state = corpus.shor_state(M, Mp, alpha, beta)
            rows = [list(r.sites) for r in corpus.shor_rows(M, Mp)]
            cols = [list(c.sites) for c in corpus.shor_columns(M, Mp)]
            layout = {"candidates": rows + cols, "regions": {"rows": rows, "columns": cols},
                      "observables": {"omega_pm": rows, "omega_01": cols}}
        elif name == "dilated":
            inner = _region_list(p.get("inner", [[0], [1]]))
            outer = _region_list(p.get("outer", [[2], [3]]))
            state = corpus.dilated_state(inner, outer, p.get("num_sites"))
            union = sorted(s for r in inner for s in r)
            layout = {"candidates": inner + outer + [union],
                      "observables": {"omega_a": [union] + outer, "omega_b": inner}}
        elif name == "tripartite":
            planted = corpus.tripartite_counterexample(seed)
            state = planted.state
            layout = _planted_layout(planted)
        elif name == "planted":
            spec = corpus.PlantSpec(
                tuple(p["local_dims"]) if "local_dims" in p else (2,) * int(p["num_sites"]),
                [corpus.PlantedObservable(o["name"], o["regions"], int(o.get("outcomes", 2)), o.get("carriers"))
                 for o in p["observables"]],
                amplitudes=None if "amplitudes" not in p else complex_from_json(p["amplitudes"]),
                seed=seed,
                coords=p.get("coords"),
            )
            planted = corpus.planted_state(spec)
            state = planted.state
            layout = _planted_layout(planted)
            layout["oracle"] = {
                "weights": [{"index": list(k), "weight": w} for k, w in sorted(planted.oracle.weights.items())],
                "entropy": branch_entropy(planted.oracle),
            }
        else:
            raise ConfigError(f"unknown generator {name!r}")
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad parameters for generator {name!r}: {exc}") from None
    layout["generator"] = {"name": name, "params": params, "seed": seed}
    return state, layout


def _planted_layout(planted) -> dict:
    regions = [list(r.sites) for o in planted.observables for r in o.regions]
    unique = []
    for r in regions:
        if r not in unique:
            unique.append(r)
    return {"candidates": unique,
            "observables": {o.name: [list(r.sites) for r in o.regions] for o in planted.observables}}


def resolve_candidates(spec, lattice: Lattice) -> list[Region]:
    """Expand region-family shorthand (rows, columns, singletons, blocks:k) or explicit lists."""
    if isinstance(spec, str):
        spec = [spec]
    regions: list[Region] = []

    def add(r):
        r = lattice.validate(Region(r))
        if r not in regions:
            regions.append(r)

    for item in spec:
        if isinstance(item, str):
            if item == "singletons":
                for s in range(lattice.num_sites):
                    add([s])
            elif item.startswith("blocks:"):
                k = int(item.split(":", 1)[1])
                if not 0 < k <= lattice.num_sites:
                    raise ConfigError(f"bad block size {k}")
                for start in range(lattice.num_sites - k + 1):
                    add(range(start, start + k))
            elif item in ("rows", "columns"):
                if lattice.coords is None:
                    raise ConfigError(f"{item!r} needs lattice coordinates")
                axis = 0 if item == "rows" else 1
                keys = sorted({c[axis] for c in lattice.coords})
                for key in keys:
                    add(s for s, c in enumerate(lattice.coords) if c[axis] == key)
            else:
                raise ConfigError(f"unknown region family {item!r}")
        else:
            add(item)
    return regions


def _load_state(cfg: RunConfig) -> PureState:
    if cfg.state_path is not None:
        return read_state(cfg.state_path)
    state, _ = generate(cfg.generator, cfg.params, cfg.seed)
    return state


def parse_product(items) -> ObservableProduct:
    factors = []
    for item in items:
        if "pauli" in item:
            name = str(item["pauli"]).upper()
            if name not in PAULIS:
                raise ConfigError(f"unknown Pauli {name!r}")
            factors.append(([int(item["site"])], PAULIS[name]))
        elif "matrix" in item:
            factors.append((item["sites"], complex_from_json(item["matrix"])))
        else:
            raise ConfigError("product factors need 'pauli' or 'matrix'")
    if not factors:
        raise ConfigError("an observable product is required")
    return ObservableProduct(factors)


# -- commands ---------------------------------------------------------------


def analyze_state(state: PureState, cfg: RunConfig) -> dict:
    """Run the full redundancy pipeline and assemble the report."""
    timings = {}
    t0 = time.perf_counter()
    candidates = resolve_candidates(cfg.candidates, state.lattice)
    result = scan(state, candidates, cfg.tol, cfg.seed)
    timings["scan"] = time.perf_counter() - t0
    observables = result.observables

    obs_json = []
    for o in observables:
        obs_json.append(observable_to_json(o, residual=verify_record(state, o)))
    detections = [
        {
            "regions": [list(r.sites) for r in d.regions],
            "canonical": d.canonical,
            "gauge_dimension": d.gauge_dimension,
            "center_dimension": d.center_dimension,
            "num_outcomes": 1 if d.observable is None else d.observable.num_outcomes,
            "refined_outcomes": None if d.refinement is None else d.refinement.num_outcomes,
        }
        for d in result.detections
    ]
    names = [o.name for o in observables]
    report: dict = {
        "schema_version": SCHEMA_VERSION,
        "command": "analyze",
        "settings": {"tol": cfg.tol, "seed": cfg.seed, "ell": cfg.ell,
                     "candidates": [list(r.sites) for r in candidates]},
        "lattice": {"local_dims": list(state.lattice.local_dims)},
        "observables": obs_json,
        "detections": detections,
    }
    matrix = [[None] * len(names) for _ in names]
    if len(names) > 1:
        covers = cover_matrix(RegionLayout({o.name: o.regions for o in observables}))
        for i, a in enumerate(names):
            for j, b in enumerate(names):
                if i != j:
                    matrix[i][j] = covers[a, b]
    report["pair_cover"] = {"names": names, "matrix": matrix}
    if cfg.ell is not None:
        report["sphere_criterion"] = {
            o.name: sphere_criterion(o.regions, cfg.ell, state.lattice) for o in observables
        }

    t0 = time.perf_counter()
    decomposition: dict = {}
    if observables:
        decomp, verdict = joint_decomposition(state, observables, cfg.tol)
        decomposition = {
            "observables": [{"name": n, "outcomes": k} for n, k in decomp.observables],
            "verdict": verdict.as_dict(),
            "branches": [
                {"index": list(k), "weight": decomp.weights[k]}
                | ({"amplitudes": complex_to_json(decomp.branches[k])} if cfg.dump_branches else {})
                for k in sorted(decomp.branches)
            ],
            "entropy": branch_entropy(decomp),
        }
    timings["decomposition"] = time.perf_counter() - t0
    report["decomposition"] = decomposition
    report["timings"] = timings
    return report


def cmd_generate(cfg: RunConfig) -> dict:
    if cfg.generator is None:
        raise ConfigError("generate needs a generator")
    if cfg.output is None:
        raise ConfigError("generate needs an output path")
    state, layout = generate(cfg.generator, cfg.params, cfg.seed)
    out = Path(cfg.output)
    layout_path = Path(cfg.layout_output) if cfg.layout_output else out.with_suffix(".layout.json")
    _write(state_to_json(state), out)
    _write(layout, layout_path)
    return {"state": str(out), "layout": str(layout_path), "dimension": state.lattice.dim}


def cmd_analyze(cfg: RunConfig) -> dict:
    report = analyze_state(_load_state(cfg), cfg)
    if cfg.output:
        _write(report, cfg.output)
    return report


def cmd_sample(cfg: RunConfig) -> dict:
    state = _load_state(cfg)
    prod = parse_product(cfg.product)
    t0 = time.perf_counter()
    candidates = resolve_candidates(cfg.candidates, state.lattice)
    observables = scan(state, candidates, cfg.tol, cfg.seed).observables
    if not observables:
        raise ConfigError("no recorded observables found to sample over")
    sample = npoint_sampled(state, prod, observables, cfg.num_samples, cfg.seed, cfg.tol, cfg.exhaustive)
    exact = npoint_exact(state, prod)
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "sample",
        "settings": {"tol": cfg.tol, "seed": cfg.seed, "num_samples": cfg.num_samples},
        "observables": [o.name for o in observables],
        "sample": sample.as_dict(),
        "exact": [exact.real, exact.imag],
        "timings": {"total": time.perf_counter() - t0},
    }
    if cfg.output:
        _write(report, cfg.output)
    return report


def _write(payload, path) -> None:
    try:
        dump_json(payload, path)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="branchrec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=str, default=None, help="JSON run configuration")
        p.add_argument("--state", type=str, default=None, help="state JSON file")
        p.add_argument("--generator", type=str, default=None, help="generator name instead of a state file")
        p.add_argument("--params", type=str, default=None, help="generator parameters as JSON")
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", type=str, default=None, help="output path")

    g = sub.add_parser("generate", help="write an example state and its layout")
    common(g)
    g.add_argument("--layout", type=str, default=None, help="layout output path")

    a = sub.add_parser("analyze", help="detect records and build the joint decomposition")
    common(a)
    a.add_argument("--candidates", type=str, default=None,
                   help="region families (rows, columns, singletons, blocks:k) or JSON list")
    a.add_argument("--ell", type=float, default=None, help="length scale for the sphere criterion")
    a.add_argument("--dump-branches", action="store_true", help="include branch amplitudes")

    s = sub.add_parser("sample", help="estimate an N-point function by branch sampling")
    common(s)
    s.add_argument("--candidates", type=str, default=None)
    s.add_argument("--product", type=str, default=None, help='factors as JSON, e.g. [{"pauli":"Z","site":0}]')
    s.add_argument("--num-samples", dest="num_samples", type=int, default=None)
    s.add_argument("--exhaustive", action="store_true", help="sum over all branches instead of sampling")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        command = {"generate": cmd_generate, "analyze": cmd_analyze, "sample": cmd_sample}[args.command]
        result = command(cfg)
    except BranchRecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    if not cfg.output or args.command == "generate":
        print(json.dumps(result, indent=2, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
