"""Command-line front end: encode, rate, analyze, simulate, sweep."""

from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction

import numpy as np

from .config import RunConfig, load_config
from .detectors import complexity_estimate
from .diversity import pic_criterion_check, pic_sic_criterion_check, rank_criterion_check
from .errors import CertificationError, ConfigError, GuardError, RankDeficiencyError
from .plot import emit_plot
from .sim import SimConfig, csv_lines, sweep as run_sweep
from .stbc import CodeSpec, default_grouping, encode, nominal_rate, normalization_mu, rate

from dataclasses import replace


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="stbc-pic",
        description="Layered-Alamouti STBC with PIC group decoding: encoding, "
        "diversity certification and BER simulation.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="INI-like config file (defaults used if omitted)")
        sp.add_argument("--seed", type=int, help="override the configured seed")
        sp.add_argument("--out", help="override the output directory")

    enc = sub.add_parser("encode", help="print a codeword and its nonzero pattern")
    common(enc)
    enc.add_argument("--m", type=int, help="transmit antennas")
    enc.add_argument("--t", type=int, help="block length")
    enc.add_argument("--rotation", help="rotation kind: givens | cyclotomic | default")
    enc.add_argument("--theta", type=float, help="givens rotation angle")
    enc.add_argument("--constellation", help="bpsk | qam4 | qam16 | qam64")

    rat = sub.add_parser("rate", help="print rate, normalization and complexity")
    common(rat)

    ana = sub.add_parser("analyze", help="run a diversity certification check")
    common(ana)
    ana.add_argument("check", choices=["rank", "pic", "pic-sic"])
    group = ana.add_mutually_exclusive_group()
    group.add_argument("--exhaustive", action="store_true", help="enumerate the difference set")
    group.add_argument("--samples", type=int, help="sampled mode with this many draws")

    simp = sub.add_parser("simulate", help="Monte Carlo BER sweep for one detector")
    common(simp)
    simp.add_argument("--detector", help="ml | zf | mmse | blast | pic | pic-sic")
    simp.add_argument("--groups", help="grouping override, e.g. '1,2|3,4|5,6|7,8'")

    swp = sub.add_parser("sweep", help="BER sweep for several detectors plus an SVG plot")
    common(swp)
    swp.add_argument("--detector", help=argparse.SUPPRESS)
    swp.add_argument("--groups", help="grouping override, e.g. '1,2|3,4|5,6|7,8'")
    return p


def _env_with_overrides(args) -> dict:
    env = dict(os.environ)
    cli_map = {
        "m": "STBCPIC_CODE_M",
        "t": "STBCPIC_CODE_T",
        "rotation": "STBCPIC_CODE_ROTATION",
        "theta": "STBCPIC_CODE_THETA",
        "constellation": "STBCPIC_CODE_CONSTELLATION",
        "detector": "STBCPIC_SIM_DETECTOR",
        "groups": "STBCPIC_SIM_GROUPS",
        "out": "STBCPIC_OUTPUT_DIR",
    }
    for attr, key in cli_map.items():
        val = getattr(args, attr, None)
        if val is not None:
            env[key] = str(val)
    if getattr(args, "seed", None) is not None:
        env["STBCPIC_SIM_SEED"] = str(args.seed)
        env["STBCPIC_ANALYZE_SEED"] = str(args.seed)
    return env


def _pattern(spec: CodeSpec) -> list:
    """Symbolic nonzero layout of the codeword, matching the encoder."""
    t2, hm, P = spec.T // 2, spec.half_m, spec.P
    grid = [["0"] * spec.m_even for _ in range(spec.T)]
    for i in range(2):
        for p in range(P):
            for k in range(hm):
                l = i * P + p + 1
                grid[p + k][i * hm + k] = f"X{l},{k + 1}"
                sign = "-" if i == 1 else ""
                grid[t2 + p + k][(1 - i) * hm + k] = f"{sign}X{l},{k + 1}*"
    return [row[: spec.M] for row in grid]


def _print_table(rows: list) -> None:
    widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
    for r in rows:
        print("  ".join(val.rjust(w) for val, w in zip(r, widths)))


def _cmd_encode(cfg: RunConfig, seed: int) -> int:
    spec = cfg.spec
    print(f"code: M={spec.M} T={spec.T} P={spec.P} L={spec.L} "
          f"rotation={spec.rotation.kind} constellation={spec.constellation.name}")
    print("nonzero pattern (rows = symbol periods, columns = antennas):")
    _print_table(_pattern(spec))
    rng = np.random.default_rng(seed)
    s = spec.constellation.points[rng.integers(0, spec.constellation.order, spec.L)]
    b = encode(spec, s)
    print(f"\nrandom symbol vector (seed {seed}):")
    print(np.array2string(s, precision=4))
    print("codeword:")
    print(np.array2string(b, precision=4, suppress_small=True))
    return 0


def _cmd_rate(cfg: RunConfig) -> int:
    spec = cfg.spec
    r = rate(spec)
    print(f"M={spec.M} T={spec.T} P={spec.P} L={spec.L}")
    print(f"rate = {r} symbols/channel use ({float(r):.4f})")
    if spec.M % 2:
        print(f"rate with nominal M in the numerator = {nominal_rate(spec)}")
    print(f"power normalization mu = {normalization_mu(spec):.6g} "
          f"(E_s = {spec.constellation.avg_energy:g})")
    g = default_grouping(spec)
    print(f"default grouping: {g}")
    print(f"PIC decoding complexity: {complexity_estimate(g, spec.constellation.order)} "
          f"metric evaluations ({2 * spec.P} groups of {spec.half_m})")
    return 0


def _cmd_analyze(cfg: RunConfig, check: str, args) -> int:
    spec = cfg.spec
    if check == "rank":
        mode = "exhaustive"
        if args.samples is not None:
            mode = args.samples
        elif not args.exhaustive and cfg.analyze_mode == "sampled":
            mode = cfg.analyze_samples
        report = rank_criterion_check(
            spec, mode=mode, cap=cfg.analyze_cap, rng_seed=cfg.analyze_seed
        )
    elif check == "pic":
        report = pic_criterion_check(
            spec,
            n_channels=cfg.analyze_channels,
            rng_seed=cfg.analyze_seed,
            tol=cfg.analyze_tol,
            cap=cfg.analyze_cap,
        )
    else:
        report = pic_sic_criterion_check(
            spec,
            n_channels=cfg.analyze_channels,
            rng_seed=cfg.analyze_seed,
            tol=cfg.analyze_tol,
            cap=cfg.analyze_cap,
        )
    for line in report.lines():
        print(line)
    for w in report.witnesses[:4]:
        print(f"witness: {w}")
    os.makedirs(cfg.out_dir, exist_ok=True)
    out_path = os.path.join(cfg.out_dir, f"cert_{report.kind}.txt")
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(report.lines()) + "\n")
    print(f"report written to {out_path}")
    if not report.passed:
        print("certification FAILED", file=sys.stderr)
        return 4
    return 0


def _run_one_detector(cfg: RunConfig, kind: str):
    det = replace(cfg.sim.detector, kind=kind)
    sim_cfg = replace(cfg.sim, detector=det)
    return run_sweep(sim_cfg)


def _write_csv(cfg: RunConfig, kind: str, points) -> str:
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, f"ber_{kind}.csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(csv_lines(points)) + "\n")
    return path


def _print_points(kind: str, points) -> None:
    print(f"detector {kind}:")
    rows = [["snr_db", "trials", "ber", "fer", "ci95"]]
    for p in points:
        rows.append(
            [f"{p.snr_db:g}", str(p.trials), f"{p.ber:.3e}", f"{p.fer:.3e}",
             f"{p.ci95_halfwidth:.2e}"]
        )
    _print_table(rows)


def _cmd_simulate(cfg: RunConfig) -> int:
    kind = cfg.sim.detector.kind
    points = run_sweep(cfg.sim)
    _print_points(kind, points)
    path = _write_csv(cfg, kind, points)
    print(f"csv written to {path}")
    return 0


def _cmd_sweep(cfg: RunConfig) -> int:
    all_points = {}
    for kind in cfg.detectors:
        points = _run_one_detector(cfg, kind)
        all_points[kind] = points
        _print_points(kind, points)
        print(f"csv written to {_write_csv(cfg, kind, points)}")
    plot_path = os.path.join(cfg.out_dir, cfg.plot_name)
    try:
        emit_plot(all_points, plot_path)
        print(f"plot written to {plot_path}")
    except ValueError as e:
        print(f"plot skipped: {e}", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _env_with_overrides(args))
        if args.command == "encode":
            return _cmd_encode(cfg, cfg.sim.seed)
        if args.command == "rate":
            return _cmd_rate(cfg)
        if args.command == "analyze":
            return _cmd_analyze(cfg, args.check, args)
        if args.command == "simulate":
            return _cmd_simulate(cfg)
        if args.command == "sweep":
            return _cmd_sweep(cfg)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (GuardError, RankDeficiencyError) as e:
        print(f"guard violation: {e}", file=sys.stderr)
        return 3
    except CertificationError as e:
        print(f"certification failure: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
