"""JSON encodings: complex numbers as ``[re, im]`` pairs."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .records import RecordedObservable, RecordProjector
from .regions import Region
from .statecore import Lattice, PureState

SCHEMA_VERSION = "1.0"


def complex_to_json(values) -> list:
    arr = np.asarray(values, dtype=complex)
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def complex_from_json(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.shape[-1] != 2:
        raise ConfigError("complex entries must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def state_to_json(state: PureState) -> dict:
    out = {"local_dims": list(state.lattice.local_dims)}
    if state.lattice.coords is not None:
        out["coords"] = [list(c) for c in state.lattice.coords]
    out["amplitudes"] = complex_to_json(state.amplitudes)
    return out


def state_from_json(data: dict) -> PureState:
    try:
        lat = Lattice(tuple(data["local_dims"]), data.get("coords"))
        amps = complex_from_json(data["amplitudes"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed state file: {exc}") from None
    return PureState(amps, lat)


def dump_json(payload, path) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def write_state(state: PureState, path) -> None:
    dump_json(state_to_json(state), path)


def read_state(path) -> PureState:
    return state_from_json(load_json(path))


def observable_to_json(obs: RecordedObservable, residual: float | None = None, **extra) -> dict:
    out = {
        "name": obs.name,
        "outcomes": [str(o) for o in obs.outcomes],
        "redundancy": obs.redundancy,
        "records": [
            {"region": list(rec.region.sites), "bases": [complex_to_json(b) for b in rec.bases[:-1]]}
            for rec in obs.records
        ],
    }
    if residual is not None:
        out["residual"] = residual
    out.update(extra)
    return out


def observable_from_json(data: dict) -> RecordedObservable:
    records = []
    for rec in data["records"]:
        bases = [complex_from_json(b).reshape(len(b), -1) for b in rec["bases"]]
        records.append(RecordProjector.from_bases(Region(rec["region"]), bases))
    return RecordedObservable(data["name"], tuple(data["outcomes"]), tuple(records))
