"""Economy parameters: validation, homogeneous construction, and JSON configs.

A config document is a JSON object with keys ``n, c, gamma, nu, rho, sigma,
mu, s0, q0, gamma_P, T, r``.  Per-agent keys (``c, gamma, nu, rho, q0, r``)
accept either a list of length ``n`` or a scalar, which is broadcast.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

__all__ = [
    "ParamsError",
    "ModelParams",
    "validate",
    "homogeneous_params",
    "load_config",
    "loads_config",
    "dumps_config",
    "preset",
    "PRESETS",
]

PER_AGENT = ("c", "gamma", "nu", "rho", "q0", "r")
SCALARS = ("sigma", "mu", "s0", "gamma_P", "T")
KNOWN_KEYS = frozenset(("n",) + PER_AGENT + SCALARS)
REQUIRED_KEYS = frozenset(("n", "c", "gamma", "nu", "rho", "sigma", "gamma_P"))
DEFAULTS = {"mu": 0.0, "s0": 1.0, "T": 1.0, "q0": 0.0, "r": 0.0}

PRESETS = ("table1", "table2", "table3")


class ParamsError(ValueError):
    """Invalid economy parameters or configuration document."""


def _frozen(x) -> np.ndarray:
    a = np.array(x, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Heterogeneous economy of ``n`` agents and one principal.

    Attributes
    ----------
    n : int
        Team size.
    c, gamma, nu, rho : ndarray, shape (n,)
        Effort-cost scales, agent risk aversions, signal volatilities and
        signal/asset correlations.
    sigma, mu, s0 : float
        Volatility, drift and initial price of the traded asset.
    q0 : ndarray, shape (n,)
        Initial signal levels.
    gamma_P : float
        Principal risk aversion; 0 is the risk-neutral limit.
    T : float
        Horizon.
    r : ndarray, shape (n,)
        Reservation certainty equivalents.
    """

    n: int
    c: np.ndarray
    gamma: np.ndarray
    nu: np.ndarray
    rho: np.ndarray
    sigma: float
    gamma_P: float
    mu: float = 0.0
    s0: float = 1.0
    q0: np.ndarray = field(default=None)
    T: float = 1.0
    r: np.ndarray = field(default=None)

    def __post_init__(self):
        n = int(self.n)
        object.__setattr__(self, "n", n)
        for name in ("c", "gamma", "nu", "rho"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        for name in ("q0", "r"):
            v = getattr(self, name)
            object.__setattr__(self, name, _frozen(np.zeros(n) if v is None else v))
        for name in SCALARS:
            object.__setattr__(self, name, float(getattr(self, name)))

    def __eq__(self, other):
        if not isinstance(other, ModelParams):
            return NotImplemented
        if self.n != other.n:
            return False
        return all(
            np.array_equal(getattr(self, k), getattr(other, k)) for k in PER_AGENT
        ) and all(getattr(self, k) == getattr(other, k) for k in SCALARS)

    __hash__ = None

    def with_gamma_P(self, gamma_P: float) -> "ModelParams":
        return validate(replace(self, gamma_P=gamma_P))

    def replace(self, **changes) -> "ModelParams":
        return validate(replace(self, **changes))

    def to_dict(self) -> dict:
        d = {"n": self.n}
        for k in PER_AGENT:
            d[k] = [float(v) for v in getattr(self, k)]
        for k in SCALARS:
            d[k] = getattr(self, k)
        return d


def validate(raw: ModelParams) -> ModelParams:
    """Check the standing assumptions on an economy and return it unchanged.

    Raises
    ------
    ParamsError
        On a shape mismatch or a value outside its admissible range.  The
        message names the offending field and, for per-agent fields, the
        1-based agent index.
    """
    n = raw.n
    if n < 1:
        raise ParamsError(f"n must be a positive integer, got {n}")
    for name in PER_AGENT:
        v = getattr(raw, name)
        if v.shape != (n,):
            raise ParamsError(
                f"dimension mismatch: {name} has shape {v.shape}, expected ({n},)"
            )
        bad = np.flatnonzero(~np.isfinite(v))
        if bad.size:
            raise ParamsError(f"{name}[{bad[0] + 1}] is not finite")
    for name in ("c", "gamma", "nu"):
        v = getattr(raw, name)
        bad = np.flatnonzero(v <= 0)
        if bad.size:
            i = bad[0]
            raise ParamsError(f"{name}[{i + 1}] = {v[i]} must be > 0")
    bad = np.flatnonzero(np.abs(raw.rho) >= 1)
    if bad.size:
        i = bad[0]
        raise ParamsError(
            f"rho[{i + 1}] = {raw.rho[i]}: correlation out of open interval (-1, 1)"
        )
    for name in SCALARS:
        if not np.isfinite(getattr(raw, name)):
            raise ParamsError(f"{name} is not finite")
    for name in ("sigma", "s0", "T"):
        if getattr(raw, name) <= 0:
            raise ParamsError(f"{name} = {getattr(raw, name)} must be > 0")
    if raw.gamma_P < 0:
        raise ParamsError(f"gamma_P = {raw.gamma_P} must be >= 0")
    return raw


def homogeneous_params(
    n: int,
    c: float,
    gamma: float,
    nu: float,
    rho: float,
    sigma: float,
    gamma_P: float,
    mu: float = 0.0,
    s0: float = 1.0,
    q0_scalar: float = 0.0,
    T: float = 1.0,
    r_scalar: float = 0.0,
) -> ModelParams:
    """Symmetric economy with every per-agent quantity replicated ``n`` times."""
    if int(n) != n or n < 1:
        raise ParamsError(f"n must be a positive integer, got {n}")
    n = int(n)
    full = lambda x: np.full(n, float(x))  # noqa: E731
    return validate(
        ModelParams(
            n=n, c=full(c), gamma=full(gamma), nu=full(nu), rho=full(rho),
            sigma=sigma, gamma_P=gamma_P, mu=mu, s0=s0, q0=full(q0_scalar),
            T=T, r=full(r_scalar),
        )
    )


def _from_mapping(doc) -> ModelParams:
    if not isinstance(doc, dict):
        raise ParamsError("config must be a JSON object")
    unknown = sorted(set(doc) - KNOWN_KEYS)
    if unknown:
        raise ParamsError(f"unknown key(s): {', '.join(unknown)}")
    missing = sorted(REQUIRED_KEYS - set(doc))
    if missing:
        raise ParamsError(f"missing required key(s): {', '.join(missing)}")
    n = doc["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ParamsError(f"n must be a positive integer, got {n!r}")
    values = {}
    for key in PER_AGENT:
        v = doc.get(key, DEFAULTS.get(key))
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            v = [float(v)] * n
        elif not isinstance(v, list) or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in v
        ):
            raise ParamsError(f"{key} must be a number or a list of numbers")
        values[key] = np.array(v, dtype=float)
    for key in SCALARS:
        v = doc.get(key, DEFAULTS.get(key))
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ParamsError(f"{key} must be a number, got {v!r}")
        values[key] = float(v)
    return validate(ModelParams(n=n, **values))


def loads_config(text: str) -> ModelParams:
    """Parse a JSON config document into validated parameters."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParamsError(
            f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    return _from_mapping(doc)


def dumps_config(params: ModelParams) -> str:
    """Serialize parameters; ``loads_config(dumps_config(p)) == p``."""
    return json.dumps(params.to_dict(), indent=2)


def preset(name: str) -> ModelParams:
    """Shipped calibration ``table1``, ``table2`` or ``table3``."""
    stem = name[:-5] if name.endswith(".json") else name
    if stem not in PRESETS:
        raise ParamsError(f"unknown preset {name!r}; choose from {PRESETS}")
    text = resources.files(__package__).joinpath("presets").joinpath(stem + ".json").read_text()
    return loads_config(text)


def load_config(source) -> ModelParams:
    """Load parameters from a path, or from a shipped preset name.

    ``source`` is tried as a file path first; if no such file exists and the
    name matches a preset (``table2`` or ``table2.json``) the preset is used.
    """
    path = Path(source)
    if path.is_file():
        return loads_config(path.read_text())
    stem = path.name[:-5] if path.name.endswith(".json") else path.name
    if stem in PRESETS and str(path.parent) in ("", "."):
        return preset(stem)
    raise ParamsError(f"config file not found: {source}")
