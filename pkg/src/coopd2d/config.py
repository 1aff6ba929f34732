"""JSON config loading with strict validation.

An empty object gives the standard evaluation setup; every key is
optional and checked for type and range, with errors that name the file
and the offending key.
"""

from __future__ import annotations

import json
import math

from .channel import RadioParams
from .experiments import EXPERIMENT_NAMES, ExperimentSpec
from .sim import ScenarioConfig

LN2 = math.log(2.0)

KNOWN_KEYS = {
    "m_count", "n_count", "cell_radius", "d2d_ring", "d2d_link_range",
    "p_c_mw", "p_d_mw", "n0_dbm", "gamma", "r_th_bps", "weights",
    "subframes_per_frame", "training_samples", "eps", "seed",
    "experiment", "sweep", "replications", "output_dir",
}

SWEEP_KEYS = {"n_values", "eps_values", "sizes", "speeds", "duration_s",
              "bucket_s"}

# Experiments that vary the number of D2D pairs cannot honor a per-pair
# weight list sized for one particular N.
N_SWEEPING = {"gap-stats", "avg-utility", "sumrate-vs-n", "outage-vs-n",
              "one-timescale-compare", "iterations-vs-epsilon"}


class ConfigError(ValueError):
    """Raised for unreadable, malformed or out-of-range configuration."""


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) * 1e-3


def _require(cond: bool, path: str, msg: str) -> None:
    if not cond:
        raise ConfigError(f"{path}: {msg}")


def _number(raw: dict, key: str, path: str, default: float) -> float:
    if key not in raw:
        return default
    v = raw[key]
    _require(isinstance(v, (int, float)) and not isinstance(v, bool)
             and math.isfinite(v), path, f"{key!r} must be a finite number")
    return float(v)


def _integer(raw: dict, key: str, path: str, default: int) -> int:
    if key not in raw:
        return default
    v = raw[key]
    _require(isinstance(v, int) and not isinstance(v, bool), path,
             f"{key!r} must be an integer")
    return int(v)


def _pair(raw: dict, key: str, path: str,
          default: tuple[float, float]) -> tuple[float, float]:
    if key not in raw:
        return default
    v = raw[key]
    _require(isinstance(v, (list, tuple)) and len(v) == 2
             and all(isinstance(x, (int, float)) and not isinstance(x, bool)
                     and math.isfinite(x) for x in v),
             path, f"{key!r} must be a pair of finite numbers")
    return float(v[0]), float(v[1])


def _weights(raw: dict, path: str, n_count: int):
    if "weights" not in raw:
        return 1.0
    v = raw["weights"]
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        _require(math.isfinite(v) and v > 0, path,
                 "'weights' must be positive")
        return float(v)
    _require(isinstance(v, list) and len(v) > 0, path,
             "'weights' must be a positive number or a nonempty list")
    _require(all(isinstance(x, (int, float)) and not isinstance(x, bool)
                 and math.isfinite(x) and x > 0 for x in v),
             path, "'weights' entries must be positive finite numbers")
    _require(len(v) == n_count, path,
             f"'weights' list has {len(v)} entries but n_count is {n_count}")
    return [float(x) for x in v]


def _sweep(raw: dict, path: str) -> dict:
    if "sweep" not in raw:
        return {}
    v = raw["sweep"]
    _require(isinstance(v, dict), path, "'sweep' must be an object")
    unknown = sorted(set(v) - SWEEP_KEYS)
    _require(not unknown, path, f"unknown sweep key(s): {unknown}")
    out = {}
    for key in ("n_values", "eps_values", "speeds"):
        if key not in v:
            continue
        seq = v[key]
        _require(isinstance(seq, list) and len(seq) > 0
                 and all(isinstance(x, (int, float))
                         and not isinstance(x, bool)
                         and math.isfinite(x) and x > 0 for x in seq),
                 path, f"sweep {key!r} must be a nonempty list of "
                       "positive numbers")
        if key == "n_values":
            _require(all(isinstance(x, int) for x in seq), path,
                     "sweep 'n_values' entries must be integers")
            out[key] = [int(x) for x in seq]
        else:
            out[key] = [float(x) for x in seq]
    if "sizes" in v:
        seq = v["sizes"]
        ok = (isinstance(seq, list) and len(seq) > 0
              and all(isinstance(p, list) and len(p) == 2
                      and all(isinstance(x, int) and not isinstance(x, bool)
                              and x >= 1 for x in p) for p in seq))
        _require(ok, path, "sweep 'sizes' must be a nonempty list of "
                           "[m, n] integer pairs")
        out["sizes"] = [[int(p[0]), int(p[1])] for p in seq]
    for key in ("duration_s", "bucket_s"):
        if key not in v:
            continue
        x = v[key]
        _require(isinstance(x, (int, float)) and not isinstance(x, bool)
                 and math.isfinite(x) and x > 0,
                 path, f"sweep {key!r} must be a positive number")
        out[key] = float(x)
    return out


def build_config(raw: dict, path: str = "<config>"
                 ) -> tuple[ScenarioConfig, ExperimentSpec]:
    """Validate a parsed JSON object and build the two config objects."""
    _require(isinstance(raw, dict), path,
             "top level must be a JSON object")
    unknown = sorted(set(raw) - KNOWN_KEYS)
    _require(not unknown, path, f"unknown key(s): {unknown}")

    m_count = _integer(raw, "m_count", path, 15)
    n_count = _integer(raw, "n_count", path, 15)
    _require(m_count >= 1, path, "'m_count' must be at least 1")
    _require(n_count >= 1, path, "'n_count' must be at least 1")

    cell_radius = _number(raw, "cell_radius", path, 500.0)
    _require(cell_radius > 0, path, "'cell_radius' must be positive")
    d2d_ring = _pair(raw, "d2d_ring", path, (200.0, 400.0))
    d2d_link_range = _pair(raw, "d2d_link_range", path, (10.0, 30.0))

    p_c_mw = _number(raw, "p_c_mw", path, 20.0)
    p_d_mw = _number(raw, "p_d_mw", path, 20.0)
    _require(p_c_mw > 0 and p_d_mw > 0, path,
             "transmit powers must be positive")
    n0_dbm = _number(raw, "n0_dbm", path, -100.0)
    gamma = _number(raw, "gamma", path, 4.0)
    _require(gamma >= 2, path, "'gamma' must be at least 2")

    r_th_bps = _number(raw, "r_th_bps", path, 1.8)
    _require(r_th_bps >= 0, path, "'r_th_bps' must be nonnegative")

    subframes = _integer(raw, "subframes_per_frame", path, 1000)
    _require(subframes >= 1, path,
             "'subframes_per_frame' must be at least 1")
    training = _integer(raw, "training_samples", path, 10000)
    _require(training >= 1, path, "'training_samples' must be at least 1")

    eps = _number(raw, "eps", path, 1.0)
    _require(eps > 0, path, "'eps' must be strictly positive")
    seed = _integer(raw, "seed", path, 0)
    _require(seed >= 0, path, "'seed' must be nonnegative")

    weights = _weights(raw, path, n_count)

    experiment = raw.get("experiment", "single-run")
    _require(isinstance(experiment, str), path,
             "'experiment' must be a string")
    _require(experiment in EXPERIMENT_NAMES, path,
             f"unknown experiment {experiment!r}; choose from "
             f"{sorted(EXPERIMENT_NAMES)}")
    _require(not (isinstance(weights, list) and experiment in N_SWEEPING),
             path, f"experiment {experiment!r} sweeps the pair count and "
                   "needs a scalar 'weights'")

    replications = _integer(raw, "replications", path, 1000)
    _require(replications >= 1, path, "'replications' must be at least 1")
    output_dir = raw.get("output_dir", "results")
    _require(isinstance(output_dir, str) and output_dir, path,
             "'output_dir' must be a nonempty string")
    sweep = _sweep(raw, path)

    try:
        radio = RadioParams(p_c=p_c_mw * 1e-3, p_d=p_d_mw * 1e-3,
                            n0=dbm_to_watts(n0_dbm), gamma=gamma)
        cfg = ScenarioConfig(
            m_count=m_count, n_count=n_count, cell_radius=cell_radius,
            d2d_ring=d2d_ring, d2d_link_range=d2d_link_range, radio=radio,
            r_th=r_th_bps * LN2, weights=weights,
            subframes_per_frame=subframes, training_samples=training,
            eps=eps, seed=seed)
        spec = ExperimentSpec(name=experiment, sweep=sweep,
                              replications=replications, seed=seed,
                              output_dir=output_dir)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return cfg, spec


def parse_config(path: str) -> tuple[ScenarioConfig, ExperimentSpec]:
    """Read, parse and validate a JSON config file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON: {exc}") from exc
    return build_config(raw, path)
