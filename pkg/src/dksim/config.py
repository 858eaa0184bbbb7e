"""Experiment configuration: a strict INI schema plus test-function expressions.

Config files have three sections, all optional keys typed and defaulted
below; unknown sections or keys are hard errors so coupled parameters cannot
be silently misspelled. Example::

    [experiment]
    dim = 1
    horizon = 0.25
    test_function = cos:1
    master_seed = 42
    n_list = 64 128 256
    mc_paths = 20000

    [numerics]
    dt_rule = 0.1
    grid_n = auto

    [output]
    out_dir = runs/weak

Test-function expressions are sums of closed-form terms, e.g. ``cos:1``,
``0.5*sin:2``, ``1 + 0.3*cos:1,2`` (d = 2 uses comma-separated wavenumbers;
a bare number is a constant term).
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .particles import PRESETS
from .torus import GridField, GridSpec

__all__ = [
    "ConfigError",
    "TestFunction",
    "parse_test_function",
    "ExperimentConfig",
    "load_config",
    "KINDS",
    "ESTIMATORS",
]

KINDS = ("weak-error", "comparison", "structure", "duality", "simulate")
ESTIMATORS = ("plain", "linear", "coupled")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


# -- test functions ----------------------------------------------------------


@dataclass(frozen=True)
class _Term:
    kind: str  # "cos" | "sin" | "const"
    wavevec: tuple[int, ...]
    coef: float


@dataclass(frozen=True)
class TestFunction:
    """Closed-form test function: a finite combination of Fourier terms."""

    dim: int
    terms: tuple[_Term, ...]
    text: str

    @property
    def max_band(self) -> int:
        """Largest |k|_inf over the terms (0 for pure constants)."""
        return max((max(map(abs, t.wavevec), default=0) for t in self.terms), default=0)

    def __call__(self, *coords: np.ndarray) -> np.ndarray:
        if len(coords) != self.dim:
            raise ValueError(f"expected {self.dim} coordinate arrays, got {len(coords)}")
        out = np.zeros(np.broadcast(*coords).shape) if coords else 0.0
        for t in self.terms:
            if t.kind == "const":
                out = out + t.coef
                continue
            phase = np.zeros_like(out)
            for k, x in zip(t.wavevec, coords):
                phase = phase + 2.0 * np.pi * k * x
            out = out + t.coef * (np.cos(phase) if t.kind == "cos" else np.sin(phase))
        return out

    def on_grid(self, spec: GridSpec) -> GridField:
        if spec.dim != self.dim:
            raise ValueError(f"grid dim {spec.dim} != test function dim {self.dim}")
        if self.max_band > spec.dealias_band:
            raise ValueError(
                f"test function band {self.max_band} exceeds grid band {spec.dealias_band}"
            )
        return GridField.from_function(spec, self)

    def __str__(self) -> str:
        return self.text


def _parse_term(raw: str, dim: int) -> _Term:
    body = raw.strip()
    coef = 1.0
    if "*" in body:
        cs, body = body.split("*", 1)
        try:
            coef = float(cs.strip())
        except ValueError as exc:
            raise ConfigError(f"bad coefficient in test-function term {raw!r}") from exc
        body = body.strip()
    if ":" not in body:
        try:
            return _Term("const", (), coef * float(body))
        except ValueError as exc:
            raise ConfigError(f"unrecognized test-function term {raw!r}") from exc
    name, _, kpart = body.partition(":")
    name = name.strip().lower()
    if name not in ("cos", "sin"):
        raise ConfigError(f"unknown test-function basis {name!r} in term {raw!r}")
    try:
        wavevec = tuple(int(p) for p in kpart.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad wavenumbers in test-function term {raw!r}") from exc
    if len(wavevec) != dim:
        raise ConfigError(
            f"term {raw!r} has {len(wavevec)} wavenumbers but dim = {dim}"
        )
    return _Term(name, wavevec, coef)


def _split_terms(text: str) -> list[str]:
    """Split on top-level +/- signs, keeping minus signs that belong to
    exponents (1e-3), coefficients (*-2) or wavenumbers (cos:-1) attached."""
    parts: list[str] = []
    cur: list[str] = []
    prev = ""
    for ch in text:
        if ch == "+" or (ch == "-" and prev not in ("", "e", "E", "*", ":", ",", "+", "-")):
            parts.append("".join(cur))
            cur = [] if ch == "+" else ["-"]
        else:
            cur.append(ch)
        if not ch.isspace():
            prev = ch
    parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]


def parse_test_function(text: str, dim: int) -> TestFunction:
    """Parse an expression like ``0.7*cos:1 - 0.3*sin:2`` into a TestFunction."""
    if dim not in (1, 2):
        raise ConfigError(f"dim must be 1 or 2, got {dim}")
    parts = _split_terms(text)
    if not parts:
        raise ConfigError(f"empty test-function expression {text!r}")
    terms = []
    for p in parts:
        if p.startswith("-"):
            t = _parse_term(p[1:].strip(), dim)
            t = _Term(t.kind, t.wavevec, -t.coef)
        else:
            t = _parse_term(p, dim)
        terms.append(t)
    return TestFunction(dim=dim, terms=tuple(terms), text=" ".join(text.split()))


# -- config schema -----------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    dim: int
    horizon: float
    master_seed: int
    n_list: tuple[int, ...]
    mc_paths: tuple[int, ...]
    test_function: TestFunction
    kind: str | None = None
    ic_preset: str = "uniform"
    ic_file: str | None = None
    safety: float = 0.5
    delta: float | None = None
    cutoff: int | None = None
    estimator: str = "coupled"
    comparison_base: TestFunction | None = None
    comparison_shift: float = 0.1
    dt_rule: float = 0.1
    grid_n: int | None = None  # None means the auto rule max(64, 4M+4 rounded up)
    c_res: int = 8
    band_factor: int = 4
    record_every: int = 1
    blowup_limit: float = 1e12
    chunk: int | None = None
    block: int | None = None
    workers: int = 1
    out_dir: str = "."

    def paths_for_row(self, row: int) -> int:
        if len(self.mc_paths) == 1:
            return self.mc_paths[0]
        return self.mc_paths[row]


def _to_int(raw: str, key: str) -> int:
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from exc


def _to_float(raw: str, key: str) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from exc


def _to_int_list(raw: str, key: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in raw.split())
    except ValueError as exc:
        raise ConfigError(f"{key}: expected whitespace-separated integers, got {raw!r}") from exc


_SCHEMA: dict[str, set[str]] = {
    "experiment": {
        "kind",
        "dim",
        "horizon",
        "test_function",
        "master_seed",
        "n_list",
        "mc_paths",
        "ic_preset",
        "ic_file",
        "safety",
        "delta",
        "cutoff",
        "estimator",
        "comparison_base",
        "comparison_shift",
    },
    "numerics": {
        "dt_rule",
        "grid_n",
        "c_res",
        "band_factor",
        "record_every",
        "blowup_limit",
        "chunk",
        "block",
        "workers",
    },
    "output": {"out_dir"},
}


def load_config(path) -> ExperimentConfig:
    """Read and validate an INI experiment config; any surprise is a ConfigError."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(p) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from exc

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")

    def get(section: str, key: str) -> str | None:
        if parser.has_section(section) and key in parser[section]:
            return parser[section][key].strip()
        return None

    def require(section: str, key: str) -> str:
        raw = get(section, key)
        if raw is None or raw == "":
            raise ConfigError(f"missing required key {key!r} in section [{section}]")
        return raw

    dim = _to_int(get("experiment", "dim") or "1", "dim")
    if dim not in (1, 2):
        raise ConfigError(f"dim must be 1 or 2, got {dim}")

    horizon = _to_float(require("experiment", "horizon"), "horizon")
    if horizon <= 0:
        raise ConfigError(f"horizon must be > 0, got {horizon}")

    master_seed = _to_int(require("experiment", "master_seed"), "master_seed")
    if master_seed < 0:
        raise ConfigError(f"master_seed must be >= 0, got {master_seed}")

    n_list = _to_int_list(require("experiment", "n_list"), "n_list")
    if any(n < 2 for n in n_list):
        raise ConfigError(f"n_list entries must be >= 2, got {n_list}")
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ConfigError(f"n_list must be strictly increasing, got {n_list}")

    mc_paths = _to_int_list(require("experiment", "mc_paths"), "mc_paths")
    if len(mc_paths) not in (1, len(n_list)):
        raise ConfigError(
            f"mc_paths needs 1 or {len(n_list)} entries, got {len(mc_paths)}"
        )
    if any(pth < 100 for pth in mc_paths):
        raise ConfigError(f"mc_paths entries must be >= 100, got {mc_paths}")

    kind = get("experiment", "kind")
    if kind is not None and kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")

    tf_text = get("experiment", "test_function") or "cos:" + ",".join(["1"] * dim)
    test_function = parse_test_function(tf_text, dim)

    ic_preset = get("experiment", "ic_preset") or "uniform"
    if ic_preset not in PRESETS:
        raise ConfigError(f"ic_preset must be one of {PRESETS}, got {ic_preset!r}")
    ic_file = get("experiment", "ic_file")

    safety = _to_float(get("experiment", "safety") or "0.5", "safety")
    if not 0.0 < safety < 1.0:
        raise ConfigError(f"safety must lie in (0, 1), got {safety}")

    delta_raw = get("experiment", "delta")
    delta = None if delta_raw is None else _to_float(delta_raw, "delta")
    if delta is not None and delta <= 0:
        raise ConfigError(f"delta must be > 0, got {delta}")
    cutoff_raw = get("experiment", "cutoff")
    cutoff = None if cutoff_raw is None else _to_int(cutoff_raw, "cutoff")
    if cutoff is not None and cutoff < 0:
        raise ConfigError(f"cutoff must be >= 0, got {cutoff}")
    if (delta is None) != (cutoff is None):
        raise ConfigError("delta and cutoff must be given together (or neither)")

    estimator = get("experiment", "estimator") or "coupled"
    if estimator not in ESTIMATORS:
        raise ConfigError(f"estimator must be one of {ESTIMATORS}, got {estimator!r}")

    cb_raw = get("experiment", "comparison_base")
    comparison_base = (
        parse_test_function(cb_raw, dim) if cb_raw is not None else None
    )
    comparison_shift = _to_float(get("experiment", "comparison_shift") or "0.1", "comparison_shift")
    if comparison_shift <= 0:
        raise ConfigError(f"comparison_shift must be > 0, got {comparison_shift}")

    dt_rule = _to_float(get("numerics", "dt_rule") or "0.1", "dt_rule")
    if dt_rule <= 0:
        raise ConfigError(f"dt_rule must be > 0, got {dt_rule}")

    grid_raw = get("numerics", "grid_n") or "auto"
    if grid_raw == "auto":
        grid_n = None
    else:
        grid_n = _to_int(grid_raw, "grid_n")
        if grid_n < 8 or (grid_n & (grid_n - 1)) != 0:
            raise ConfigError(f"grid_n must be 'auto' or a power of two >= 8, got {grid_raw}")

    c_res = _to_int(get("numerics", "c_res") or "8", "c_res")
    if c_res < 4:
        raise ConfigError(f"c_res must be >= 4, got {c_res}")

    band_factor = _to_int(get("numerics", "band_factor") or "4", "band_factor")
    if band_factor < 1 or (band_factor & (band_factor - 1)) != 0:
        raise ConfigError(f"band_factor must be a power of two >= 1, got {band_factor}")

    record_every = _to_int(get("numerics", "record_every") or "1", "record_every")
    if record_every < 1:
        raise ConfigError(f"record_every must be >= 1, got {record_every}")

    blowup_limit = _to_float(get("numerics", "blowup_limit") or "1e12", "blowup_limit")
    if blowup_limit <= 0:
        raise ConfigError(f"blowup_limit must be > 0, got {blowup_limit}")

    chunk_raw = get("numerics", "chunk")
    chunk = None if chunk_raw is None else _to_int(chunk_raw, "chunk")
    if chunk is not None and chunk < 1:
        raise ConfigError(f"chunk must be >= 1, got {chunk}")
    block_raw = get("numerics", "block")
    block = None if block_raw is None else _to_int(block_raw, "block")
    if block is not None and block < 1:
        raise ConfigError(f"block must be >= 1, got {block}")

    workers = _to_int(get("numerics", "workers") or "1", "workers")
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")

    out_dir = get("output", "out_dir") or "."

    return ExperimentConfig(
        dim=dim,
        horizon=horizon,
        master_seed=master_seed,
        n_list=n_list,
        mc_paths=mc_paths,
        test_function=test_function,
        kind=kind,
        ic_preset=ic_preset,
        ic_file=ic_file,
        safety=safety,
        delta=delta,
        cutoff=cutoff,
        estimator=estimator,
        comparison_base=comparison_base,
        comparison_shift=comparison_shift,
        dt_rule=dt_rule,
        grid_n=grid_n,
        c_res=c_res,
        band_factor=band_factor,
        record_every=record_every,
        blowup_limit=blowup_limit,
        chunk=chunk,
        block=block,
        workers=workers,
        out_dir=out_dir,
    )


def config_echo(cfg: ExperimentConfig) -> dict:
    """Plain-dict snapshot of the config for embedding in run manifests."""
    out = {}
    for f in fields(cfg):
        val = getattr(cfg, f.name)
        if isinstance(val, TestFunction):
            val = str(val)
        elif isinstance(val, tuple):
            val = list(val)
        out[f.name] = val
    return out
