"""Run configuration.

Config files are UTF-8 text, one ``key = value`` per line, ``#`` comments
allowed.  Keys (all optional, defaults below):

    map             built-in name or path to a map definition file
    chi             expansion threshold (default 0.5 ln 2)
    epsilon         chart-scale parameter in (0,1)
    back_depth      backward window depth N
    fwd_len         forward horizon F
    n_min           smallest block length tested by expansion certificates
    u_depth         fixed u-series truncation (0 = full available depth)
    seed            RNG seed (all sampling is deterministic given the seed)
    samples         regularity / random-orbit sample count
    max_period      periodic-orbit library: largest period enumerated
    sizes_per_center  cap on chart sizes per net center (0 = the full CG2 range)
    paths_per_vertex  sampled recurrent paths per vertex in the Markov cover
    cover_window    half-length of the sampled paths
    encode_lo/encode_hi  encoding range within windows
    contract_tol    shadowing nested-interval stop, relative to 2 p_0
    workers         accepted for compatibility; execution is serial
"""

import math
from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class RunConfig:
    map: str = "doubling"
    chi: float = 0.5 * math.log(2.0)
    epsilon: float = 0.1
    back_depth: int = 40
    fwd_len: int = 40
    n_min: int = 6
    u_depth: int = 0
    seed: int = 20260809
    samples: int = 10000
    max_period: int = 8
    sizes_per_center: int = 0
    paths_per_vertex: int = 3
    cover_window: int = 12
    encode_lo: int = 0
    encode_hi: int = 12
    contract_tol: float = 1e-13
    workers: int = 1

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name, value):
    t = _FIELD_TYPES[name]
    if t in (int, "int"):
        return int(value)
    if t in (float, "float"):
        return float(value)
    return value


def parse_config(text, base=None):
    cfg = base or RunConfig()
    updates = {}
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {i}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ValueError(f"config line {i}: unknown key {key!r}")
        updates[key] = _coerce(key, val)
    return replace(cfg, **updates)


def load_config(path, base=None):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), base=base)
