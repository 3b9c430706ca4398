"""Run-configuration files: flat blocks of key = value lines.

The format is deliberately tiny so it can be specified exactly: blocks
are introduced by ``[name]`` lines, every other non-empty line is
``key = value``, ``#`` starts a comment line, and integer matrices are
written as semicolon-separated rows ("2 1; 1 1").  Unknown blocks or
keys are rejected with the offending line number — silent typos in a
numerics config are how wrong results are born.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from oseledets_lab import systems as _systems
from oseledets_lab.errors import InputError
from oseledets_lab.periodic import SearchConfig
from oseledets_lab.pesin import PesinParams

__all__ = ["Horizons", "RunConfig", "parse_config", "parse_config_text", "bundled_config_path"]

_KNOWN_KEYS = {
    "system": ("kind", "matrix", "delta", "a", "b"),
    "horizons": ("orbit", "splitting", "stats"),
    "pesin": ("alpha", "beta", "epsilon", "k", "m_range", "n_range"),
    "search": (
        "max_period",
        "seed_orbit_length",
        "return_radius",
        "newton_max_iters",
        "newton_tol",
        "dedup_tol",
    ),
    "run": ("epsilon", "eta", "seed", "threads", "output", "format"),
}

_SYSTEM_KEYS = {
    "toral_automorphism": ("kind", "matrix"),
    "perturbed_toral": ("kind", "matrix", "delta"),
    "henon": ("kind", "a", "b"),
}


@dataclass(slots=True)
class Horizons:
    """Step counts for the three orbit scales a run works at."""

    orbit: int = 10000
    splitting: int = 50
    stats: int = 200

    def __post_init__(self):
        self.orbit = int(self.orbit)
        self.splitting = int(self.splitting)
        self.stats = int(self.stats)
        if min(self.orbit, self.splitting, self.stats) < 1:
            raise InputError("all horizons must be >= 1")


@dataclass(slots=True)
class RunConfig:
    """Everything a command needs: system, horizons, tolerances, seed, output."""

    system: _systems.SystemSpec
    horizons: Horizons = field(default_factory=Horizons)
    pesin: PesinParams = field(
        default_factory=lambda: PesinParams(
            alpha=0.5, beta=0.5, epsilon=0.05, k=4, m_range=3, n_range=10
        )
    )
    search: SearchConfig = field(
        default_factory=lambda: SearchConfig(
            max_period=12, seed_orbit_length=2000, return_radius=0.05
        )
    )
    epsilon: float = 0.05
    eta: float = 0.1
    seed: int = 0
    threads: int = 1
    output: str | None = None
    format: str = "json"

    def __post_init__(self):
        self.epsilon = float(self.epsilon)
        self.eta = float(self.eta)
        self.seed = int(self.seed)
        self.threads = int(self.threads)
        if not (self.epsilon > 0 and self.eta > 0):
            raise InputError("epsilon and eta must be positive")
        if not 0 <= self.seed < 2**64:
            raise InputError("seed must fit in 64 bits")
        if self.threads < 1:
            raise InputError("threads must be >= 1")
        if self.format not in ("json", "csv"):
            raise InputError(f"format must be json or csv, got {self.format!r}")


def _scan(text: str, source: str) -> dict:
    """Split config text into {block: {key: (value, line_number)}}."""
    blocks: dict = {}
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in _KNOWN_KEYS:
                raise InputError(
                    f"{source}:{lineno}: unknown block [{name}] "
                    f"(expected one of {', '.join(sorted(_KNOWN_KEYS))})"
                )
            if name in blocks:
                raise InputError(f"{source}:{lineno}: duplicate block [{name}]")
            blocks[name] = {}
            current = name
            continue
        if "=" not in line:
            raise InputError(
                f"{source}:{lineno}: expected 'key = value' or '[block]', got {raw!r}"
            )
        if current is None:
            raise InputError(f"{source}:{lineno}: key outside any block")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _KNOWN_KEYS[current]:
            raise InputError(
                f"{source}:{lineno}: unknown key {key!r} in block [{current}] "
                f"(expected one of {', '.join(_KNOWN_KEYS[current])})"
            )
        if key in blocks[current]:
            raise InputError(f"{source}:{lineno}: duplicate key {key!r} in [{current}]")
        if not value:
            raise InputError(f"{source}:{lineno}: empty value for {key!r}")
        blocks[current][key] = (value, lineno)
    return blocks


def _coerce(block: dict, key: str, kind, source: str, default=None):
    if key not in block:
        return default
    value, lineno = block[key]
    try:
        return kind(value)
    except ValueError as exc:
        raise InputError(f"{source}:{lineno}: invalid value {value!r} for {key}: {exc}")


def _parse_matrix(text: str) -> np.ndarray:
    rows = []
    for chunk in text.split(";"):
        entries = chunk.split()
        if not entries:
            raise ValueError("empty matrix row")
        row = []
        for entry in entries:
            as_float = float(entry)
            if as_float != int(as_float):
                raise ValueError(f"matrix entries must be integers, got {entry}")
            row.append(int(as_float))
        rows.append(row)
    if len({len(r) for r in rows}) != 1:
        raise ValueError("matrix rows have unequal lengths")
    return np.array(rows, dtype=float)


def _build_system(block: dict, source: str) -> _systems.SystemSpec:
    kind = _coerce(block, "kind", str, source)
    if kind is None:
        raise InputError(f"{source}: [system] block must set 'kind'")
    if kind not in _SYSTEM_KEYS:
        _, lineno = block["kind"]
        raise InputError(
            f"{source}:{lineno}: unknown system kind {kind!r} "
            f"(expected one of {', '.join(_SYSTEM_KEYS)})"
        )
    for key in block:
        if key not in _SYSTEM_KEYS[kind]:
            _, lineno = block[key]
            raise InputError(f"{source}:{lineno}: key {key!r} is not used by {kind!r}")
    if kind == "henon":
        return _systems.henon(
            a=_coerce(block, "a", float, source, 1.4),
            b=_coerce(block, "b", float, source, 0.3),
        )
    matrix = _coerce(block, "matrix", _parse_matrix, source)
    if matrix is None:
        raise InputError(f"{source}: [system] block must set 'matrix' for {kind!r}")
    if kind == "perturbed_toral":
        return _systems.perturbed_toral(matrix, _coerce(block, "delta", float, source, 0.0))
    return _systems.toral_automorphism(matrix)


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    """Parse config text into a validated RunConfig."""
    blocks = _scan(text, source)
    if "system" not in blocks:
        raise InputError(f"{source}: missing required [system] block")
    system = _build_system(blocks["system"], source)
    hor = blocks.get("horizons", {})
    base = Horizons()
    horizons = Horizons(
        orbit=_coerce(hor, "orbit", int, source, base.orbit),
        splitting=_coerce(hor, "splitting", int, source, base.splitting),
        stats=_coerce(hor, "stats", int, source, base.stats),
    )
    pes = blocks.get("pesin", {})
    pesin = PesinParams(
        alpha=_coerce(pes, "alpha", float, source, 0.5),
        beta=_coerce(pes, "beta", float, source, 0.5),
        epsilon=_coerce(pes, "epsilon", float, source, 0.05),
        k=_coerce(pes, "k", int, source, 4),
        m_range=_coerce(pes, "m_range", int, source, 3),
        n_range=_coerce(pes, "n_range", int, source, 10),
    )
    sea = blocks.get("search", {})
    search = SearchConfig(
        max_period=_coerce(sea, "max_period", int, source, 12),
        seed_orbit_length=_coerce(sea, "seed_orbit_length", int, source, 2000),
        return_radius=_coerce(sea, "return_radius", float, source, 0.05),
        newton_max_iters=_coerce(sea, "newton_max_iters", int, source, 50),
        newton_tol=_coerce(sea, "newton_tol", float, source, 1e-13),
        dedup_tol=_coerce(sea, "dedup_tol", float, source, 1e-8),
    )
    run = blocks.get("run", {})
    return RunConfig(
        system=system,
        horizons=horizons,
        pesin=pesin,
        search=search,
        epsilon=_coerce(run, "epsilon", float, source, 0.05),
        eta=_coerce(run, "eta", float, source, 0.1),
        seed=_coerce(run, "seed", int, source, 0),
        threads=_coerce(run, "threads", int, source, 1),
        output=_coerce(run, "output", str, source, None),
        format=_coerce(run, "format", str, source, "json"),
    )


def parse_config(path) -> RunConfig:
    """Read and parse a config file."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read config {p}: {exc}")
    return parse_config_text(text, source=str(p))


def bundled_config_path(name: str) -> Path:
    """Path of a config shipped with the package (name without extension)."""
    root = resources.files("oseledets_lab") / "configs"
    candidate = root / f"{name}.conf"
    if not candidate.is_file():
        available = sorted(p.stem for p in root.iterdir() if p.name.endswith(".conf"))
        raise InputError(f"no bundled config {name!r} (available: {', '.join(available)})")
    return Path(str(candidate))
