"""Engine configuration: one TOML file, ENGINE_ env overrides, and a
JSON state sidecar that carries the calibrated threshold.

The sidecar exists so calibration never rewrites the config file a
human edits; the freshest theta_star always wins on load.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace

try:
    import tomllib
except ModuleNotFoundError:  # 3.10
    import tomli as tomllib

from refmatch.confidence import EnsembleSpec
from refmatch.errors import ConfigError, CorruptRecord, IoFailure

ENV_PREFIX = "ENGINE_"
STATE_SUFFIX = ".state.json"

_TOP_KEYS = {
    "library_path",
    "case_store_path",
    "k_neighbors",
    "top_n",
    "theta_star",
    "listen_address",
    "dim",
    "state_path",
    "ensemble",
}
_ENSEMBLE_KEYS = {"passes", "mask_rate", "seed"}


@dataclass(frozen=True)
class EngineConfig:
    """Everything the serving engine needs, validated on construction."""

    library_path: str
    case_store_path: str | None = None
    k_neighbors: int = 30
    top_n: int = 5
    ensemble: EnsembleSpec = field(default_factory=EnsembleSpec)
    theta_star: float | None = None
    listen_address: str = "127.0.0.1:8080"
    dim: int = 512
    state_path: str | None = None

    def __post_init__(self):
        if not self.library_path:
            raise ConfigError("library_path is required")
        if not isinstance(self.k_neighbors, int) or self.k_neighbors < 1:
            raise ConfigError(f"k_neighbors must be an int >= 1, got {self.k_neighbors!r}")
        if not isinstance(self.top_n, int) or self.top_n < 1:
            raise ConfigError(f"top_n must be an int >= 1, got {self.top_n!r}")
        if not isinstance(self.dim, int) or self.dim < 2:
            raise ConfigError(f"dim must be an int >= 2, got {self.dim!r}")
        if self.theta_star is not None:
            if not isinstance(self.theta_star, (int, float)) or isinstance(self.theta_star, bool):
                raise ConfigError(f"theta_star must be a number, got {self.theta_star!r}")
            if not 0.0 <= float(self.theta_star) <= 1.0:
                raise ConfigError(f"theta_star must lie in [0, 1], got {self.theta_star}")
        split_listen(self.listen_address)

    def with_theta(self, theta_star: float) -> "EngineConfig":
        return replace(self, theta_star=theta_star)


def split_listen(address: str) -> tuple[str, int]:
    """Parse "host:port" into its parts."""
    host, sep, port_text = address.rpartition(":")
    if not sep or not host:
        raise ConfigError(f"listen_address must look like host:port, got {address!r}")
    try:
        port = int(port_text)
    except ValueError:
        raise ConfigError(f"listen_address port must be an int, got {port_text!r}") from None
    if not 0 < port < 65536:
        raise ConfigError(f"listen_address port out of range: {port}")
    return host, port


def _coerce(name: str, text: str):
    if name in ("k_neighbors", "top_n", "dim", "ensemble_passes", "ensemble_seed"):
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{ENV_PREFIX}{name.upper()} must be an int, got {text!r}") from None
    if name in ("theta_star", "ensemble_mask_rate"):
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"{ENV_PREFIX}{name.upper()} must be a float, got {text!r}") from None
    return text


def _env_overrides(env: dict) -> dict:
    simple = (
        "library_path",
        "case_store_path",
        "k_neighbors",
        "top_n",
        "theta_star",
        "listen_address",
        "dim",
        "state_path",
        "ensemble_passes",
        "ensemble_mask_rate",
        "ensemble_seed",
    )
    found = {}
    for name in simple:
        raw = env.get(ENV_PREFIX + name.upper())
        if raw is not None and raw != "":
            found[name] = _coerce(name, raw)
    return found


def read_state(state_path: str | os.PathLike) -> dict:
    """Read the sidecar; missing file means empty state."""
    state_path = os.fspath(state_path)
    if not os.path.exists(state_path):
        return {}
    try:
        with open(state_path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read state {state_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CorruptRecord(f"state {state_path} is not valid json: {exc}") from exc
    if not isinstance(payload, dict):
        raise CorruptRecord(f"state {state_path} must be a json object")
    theta = payload.get("theta_star")
    if theta is not None and (
        isinstance(theta, bool) or not isinstance(theta, (int, float)) or not 0.0 <= theta <= 1.0
    ):
        raise CorruptRecord(f"state {state_path} theta_star out of range: {theta!r}")
    return payload


def write_state(state_path: str | os.PathLike, theta_star: float) -> None:
    state_path = os.fspath(state_path)
    try:
        with open(state_path, "w", encoding="utf-8") as fh:
            json.dump({"theta_star": float(theta_star)}, fh)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write state {state_path}: {exc}") from exc


def load_config(path: str | os.PathLike, env: dict | None = None) -> EngineConfig:
    """TOML file -> env overrides -> state sidecar, later layers win.

    Relative paths inside the file resolve against the file's directory
    so a config travels with its bundle.
    """
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config {path} is not valid toml: {exc}") from exc

    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    ensemble_raw = raw.pop("ensemble", {})
    if not isinstance(ensemble_raw, dict):
        raise ConfigError("ensemble must be a table")
    unknown = set(ensemble_raw) - _ENSEMBLE_KEYS
    if unknown:
        raise ConfigError(f"unknown ensemble keys: {sorted(unknown)}")

    merged = dict(raw)
    overrides = _env_overrides(dict(os.environ) if env is None else env)
    ensemble = {
        "passes": overrides.pop("ensemble_passes", ensemble_raw.get("passes", 100)),
        "mask_rate": overrides.pop("ensemble_mask_rate", ensemble_raw.get("mask_rate", 0.1)),
        "seed": overrides.pop("ensemble_seed", ensemble_raw.get("seed", 0)),
    }
    merged.update(overrides)

    base_dir = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        if p is None or p == "":
            return None
        return p if os.path.isabs(p) else os.path.join(base_dir, p)

    state_path = resolve(merged.get("state_path")) or path + STATE_SUFFIX
    state = read_state(state_path)
    theta_star = state.get("theta_star", merged.get("theta_star"))

    try:
        spec = EnsembleSpec(**ensemble)
    except Exception as exc:
        raise ConfigError(f"bad ensemble settings: {exc}") from exc

    return EngineConfig(
        library_path=resolve(merged.get("library_path")) or "",
        case_store_path=resolve(merged.get("case_store_path")),
        k_neighbors=merged.get("k_neighbors", 30),
        top_n=merged.get("top_n", 5),
        ensemble=spec,
        theta_star=theta_star,
        listen_address=merged.get("listen_address", "127.0.0.1:8080"),
        dim=merged.get("dim", 512),
        state_path=state_path,
    )
