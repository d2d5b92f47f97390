"""Flat INI-like run configuration.

Grammar (one statement per line):

    [section]          # section header
    key = value        # assignment inside the current section
    # comment          ; comment

Sections and keys are fixed; unknown ones are rejected with their line
number.  Environment variables ``STBCPIC_<SECTION>_<KEY>`` override file
values (e.g. ``STBCPIC_SIM_SEED=7``), and CLI flags override both.

Defaults: a 4-antenna, T=6 code with the givens(1.02) rotation and qam16
constellation, 4 receive antennas, PIC detector, seed 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .constellation import by_name
from .detectors import DETECTOR_KINDS, DetectorConfig
from .errors import ConfigError
from .rotation import RotationMatrix, cyclotomic, default_rotation, givens
from .stbc import CodeSpec, GroupingScheme
from .sim import SimConfig

__all__ = ["RunConfig", "parse_config", "load_config"]

_SCHEMA = {
    "code": {"m", "t", "constellation", "rotation", "theta", "cyclo_m", "cyclo_n"},
    "sim": {
        "n_rx",
        "detector",
        "detectors",
        "snr_db",
        "seed",
        "max_trials",
        "min_trials",
        "target_frame_errors",
        "block_trials",
        "workers",
        "groups",
        "allow_rank_deficient",
        "guard_bits",
    },
    "analyze": {"mode", "samples", "channels", "tol", "cap", "seed"},
    "output": {"dir", "plot"},
}

_DEFAULTS = {
    "code": {
        "m": "4",
        "t": "6",
        "constellation": "qam16",
        "rotation": "givens",
        "theta": "1.02",
        "cyclo_m": "4",
        "cyclo_n": "1,2,3",
    },
    "sim": {
        "n_rx": "4",
        "detector": "pic",
        "detectors": "",
        "snr_db": "8,10,12,14",
        "seed": "1",
        "max_trials": "100000",
        "min_trials": "1000",
        "target_frame_errors": "200",
        "block_trials": "1024",
        "workers": "1",
        "groups": "",
        "allow_rank_deficient": "false",
        "guard_bits": "24",
    },
    "analyze": {
        "mode": "exhaustive",
        "samples": "10000",
        "channels": "1000",
        "tol": "1e-8",
        "cap": "10000000",
        "seed": "1",
    },
    "output": {"dir": "out", "plot": "ber_curves.svg"},
}


def _parse_lines(text: str) -> dict:
    values = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(
                    f"line {lineno}, column {len(raw.rstrip())}: unterminated section header"
                )
            section = line[1:-1].strip().lower()
            if section not in _SCHEMA:
                raise ConfigError(
                    f"line {lineno}, column 1: unknown section [{section}]"
                )
            continue
        if "=" not in line:
            raise ConfigError(
                f"line {lineno}, column {len(raw) - len(raw.lstrip()) + 1}: "
                f"expected 'key = value'"
            )
        if section is None:
            raise ConfigError(f"line {lineno}, column 1: assignment before any [section]")
        key, _, val = line.partition("=")
        key = key.strip().lower()
        if key not in _SCHEMA[section]:
            raise ConfigError(
                f"line {lineno}, column 1: unknown key {key!r} in section [{section}]"
            )
        values[(section, key)] = val.strip()
    return values


def _get(values, env, section, key):
    env_key = f"STBCPIC_{section.upper()}_{key.upper()}"
    if env is not None and env_key in env:
        return env[env_key]
    return values.get((section, key), _DEFAULTS[section][key])


def _as_int(section, key, raw):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected an integer, got {raw!r}")


def _as_float(section, key, raw):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected a number, got {raw!r}")


def _as_bool(section, key, raw):
    low = raw.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"[{section}] {key}: expected a boolean, got {raw!r}")


def _float_list(section, key, raw):
    try:
        return tuple(float(tok) for tok in raw.split(",") if tok.strip())
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected comma-separated numbers, got {raw!r}")


@dataclass(frozen=True)
class RunConfig:
    spec: CodeSpec
    sim: SimConfig
    detectors: tuple
    analyze_mode: str
    analyze_samples: int
    analyze_channels: int
    analyze_tol: float
    analyze_cap: int
    analyze_seed: int
    out_dir: str
    plot_name: str


def _build_rotation(values, env) -> RotationMatrix:
    kind = _get(values, env, "code", "rotation").lower()
    m = _as_int("code", "m", _get(values, env, "code", "m"))
    dim = (m + (m % 2)) // 2
    if kind == "givens":
        theta_raw = _get(values, env, "code", "theta")
        if ("code", "theta") not in values and (env is None or "STBCPIC_CODE_THETA" not in env):
            return default_rotation(dim) if dim != 2 else givens(1.02)
        if dim != 2:
            raise ConfigError(f"[code] rotation=givens needs M_even/2 == 2, got {dim}")
        return givens(_as_float("code", "theta", theta_raw))
    if kind == "cyclotomic":
        cm = _as_int("code", "cyclo_m", _get(values, env, "code", "cyclo_m"))
        n_list = [
            _as_int("code", "cyclo_n", tok)
            for tok in _get(values, env, "code", "cyclo_n").split(",")
            if tok.strip()
        ]
        try:
            return cyclotomic(dim, cm, n_list)
        except ValueError as e:
            raise ConfigError(f"[code] cyclotomic rotation: {e}")
    if kind == "default":
        try:
            return default_rotation(dim)
        except ValueError as e:
            raise ConfigError(f"[code] rotation: {e}")
    raise ConfigError(f"[code] rotation: unknown kind {kind!r}")


def parse_config(text: str, env: Optional[dict] = None) -> RunConfig:
    """Parse and fully validate a config; raises ConfigError with location."""
    values = _parse_lines(text)

    m = _as_int("code", "m", _get(values, env, "code", "m"))
    t = _as_int("code", "t", _get(values, env, "code", "t"))
    try:
        constellation = by_name(_get(values, env, "code", "constellation"))
    except ValueError as e:
        raise ConfigError(f"[code] constellation: {e}")
    rotation = _build_rotation(values, env)
    try:
        spec = CodeSpec(m, t, rotation, constellation)
    except ValueError as e:
        raise ConfigError(f"[code] {e}")

    det_name = _get(values, env, "sim", "detector").strip().lower().replace("-", "_")
    det_multi = [
        tok.strip().lower().replace("-", "_")
        for tok in _get(values, env, "sim", "detectors").split(",")
        if tok.strip()
    ]
    for name in [det_name] + det_multi:
        if name not in DETECTOR_KINDS:
            raise ConfigError(
                f"[sim] detector: unknown kind {name!r}; choose from {DETECTOR_KINDS}"
            )

    groups_raw = _get(values, env, "sim", "groups")
    grouping = None
    if groups_raw:
        try:
            grouping = GroupingScheme.parse(groups_raw)
        except ValueError as e:
            raise ConfigError(f"[sim] groups: {e}")
        if grouping.total != spec.L:
            raise ConfigError(
                f"[sim] groups: cover {grouping.total} symbols but the code has L={spec.L}"
            )

    detector = DetectorConfig(
        kind=det_name,
        grouping=grouping,
        guard_bits=_as_int("sim", "guard_bits", _get(values, env, "sim", "guard_bits")),
        allow_rank_deficient=_as_bool(
            "sim", "allow_rank_deficient", _get(values, env, "sim", "allow_rank_deficient")
        ),
    )
    snr_list = _float_list("sim", "snr_db", _get(values, env, "sim", "snr_db"))
    if not snr_list:
        raise ConfigError("[sim] snr_db: need at least one SNR point")
    try:
        sim = SimConfig(
            spec=spec,
            n_rx=_as_int("sim", "n_rx", _get(values, env, "sim", "n_rx")),
            detector=detector,
            snr_db_list=snr_list,
            seed=_as_int("sim", "seed", _get(values, env, "sim", "seed")),
            max_trials=_as_int("sim", "max_trials", _get(values, env, "sim", "max_trials")),
            min_trials=_as_int("sim", "min_trials", _get(values, env, "sim", "min_trials")),
            target_frame_errors=_as_int(
                "sim", "target_frame_errors", _get(values, env, "sim", "target_frame_errors")
            ),
            block_trials=_as_int("sim", "block_trials", _get(values, env, "sim", "block_trials")),
            workers=_as_int("sim", "workers", _get(values, env, "sim", "workers")),
        )
    except ValueError as e:
        raise ConfigError(f"[sim] {e}")

    mode = _get(values, env, "analyze", "mode").strip().lower()
    if mode not in ("exhaustive", "sampled"):
        raise ConfigError(f"[analyze] mode: expected exhaustive or sampled, got {mode!r}")

    return RunConfig(
        spec=spec,
        sim=sim,
        detectors=tuple(det_multi) if det_multi else (det_name,),
        analyze_mode=mode,
        analyze_samples=_as_int("analyze", "samples", _get(values, env, "analyze", "samples")),
        analyze_channels=_as_int("analyze", "channels", _get(values, env, "analyze", "channels")),
        analyze_tol=_as_float("analyze", "tol", _get(values, env, "analyze", "tol")),
        analyze_cap=_as_int("analyze", "cap", _get(values, env, "analyze", "cap")),
        analyze_seed=_as_int("analyze", "seed", _get(values, env, "analyze", "seed")),
        out_dir=_get(values, env, "output", "dir"),
        plot_name=_get(values, env, "output", "plot"),
    )


def load_config(path: Optional[str], env: Optional[dict] = None) -> RunConfig:
    if path is None:
        return parse_config("", env)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path!r}: {e}")
    return parse_config(text, env)
