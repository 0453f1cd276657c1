"""Command-line front end: run sessions, sweeps, attack studies, and the
reduced-entanglement case experiments, reproducibly.

Every subcommand is deterministic given ``--seed``; repeated invocations
write byte-identical output files. Exit codes: 0 delivered/success, 2
session aborted, 1 usage or configuration error.

Option values may come from three sources with precedence
flags > config file > defaults. The config file is flat ``key = value``
text (``#`` comments allowed) with keys named after the session fields:

    n, concurrence, concurrence_r, concurrence_d, check_fraction,
    abort_threshold, adversary, intercept_probability, eve_strategy,
    eve_angle_deg, seed, exclude_check_bits_from_message, case_mode

``QDSQC_SEED`` supplies the seed when neither flag nor file does.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import analysis, protocol
from .adversary import AdversaryModel, EveStrategy, intercept_resend, IDEAL, attack_error_oracle, sample_error_rate
from .protocol import CaseMode, PerBasisPrep, SessionConfig, SessionStatus, UniformPrep
from .statevector import D, R

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ABORTED = 2

CONFIG_KEYS = {
    # session fields
    "n": int,
    "concurrence": float,
    "concurrence_r": float,
    "concurrence_d": float,
    "check_fraction": float,
    "abort_threshold": float,
    "adversary": str,
    "intercept_probability": float,
    "eve_strategy": str,
    "eve_angle_deg": float,
    "seed": int,
    "exclude_check_bits_from_message": bool,
    "case_mode": str,
    # experiment fields
    "message": str,
    "message_hex": str,
    "grid": str,
    "rounds": int,
    "trials": int,
    "strategies": str,
}


class UsageError(Exception):
    pass


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def read_config_file(path: str) -> dict:
    """Flat key = value config; unknown keys are rejected."""
    values: dict = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        caster = CONFIG_KEYS[key]
        try:
            values[key] = _parse_bool(val) if caster is bool else caster(val)
        except (ValueError, UsageError) as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return values


def merge_settings(defaults: dict, file_values: dict, flag_values: dict) -> dict:
    """Precedence: flags over config file over defaults. None flags mean 'not given'."""
    merged = dict(defaults)
    merged.update({k: v for k, v in file_values.items() if v is not None})
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    return merged


def resolve_seed(flag_seed, file_values: dict) -> int:
    if flag_seed is not None:
        return int(flag_seed)
    if "seed" in file_values:
        return int(file_values["seed"])
    env = os.environ.get("QDSQC_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise UsageError(f"QDSQC_SEED must be an integer, got {env!r}") from exc
    return 0


def build_adversary(settings: dict) -> AdversaryModel:
    kind = settings.get("adversary", "ideal")
    if kind == "ideal":
        return IDEAL
    if kind != "intercept":
        raise UsageError(f"unknown adversary {kind!r} (expected 'ideal' or 'intercept')")
    name = settings.get("eve_strategy", "uniform")
    try:
        strategy = EveStrategy(name)
    except ValueError as exc:
        raise UsageError(f"unknown interceptor strategy {name!r}") from exc
    return intercept_resend(
        probability=float(settings.get("intercept_probability", 1.0)),
        strategy=strategy,
        angle_deg=float(settings.get("eve_angle_deg", 0.0)),
    )


def build_session_config(settings: dict) -> SessionConfig:
    if settings.get("concurrence_r") is not None or settings.get("concurrence_d") is not None:
        if settings.get("concurrence_r") is None or settings.get("concurrence_d") is None:
            raise UsageError("per-basis preparation needs both concurrence_r and concurrence_d")
        policy = PerBasisPrep(float(settings["concurrence_r"]), float(settings["concurrence_d"]))
    else:
        policy = UniformPrep(float(settings.get("concurrence", 1.0)))
    try:
        config = SessionConfig(
            n=int(settings["n"]),
            prep_policy=policy,
            check_fraction=float(settings.get("check_fraction", 0.25)),
            abort_threshold=settings.get("abort_threshold"),
            adversary=build_adversary(settings),
            seed=int(settings["seed"]),
            exclude_check_bits_from_message=bool(settings.get("exclude_check_bits_from_message", False)),
        )
        config.validate()
    except (ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from exc
    return config


def parse_grid(text: str) -> list[float]:
    """Either 'start:stop:step' (inclusive) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"grid range must be start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise UsageError("grid step must be positive")
        count = int(math_floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(max(count, 0))]
    values = [float(p) for p in text.split(",") if p.strip() != ""]
    return values


def math_floor(x: float) -> int:
    return int(np.floor(x))


def write_output(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def parse_message(settings_n: int, message: str | None, message_hex: str | None, seed: int) -> np.ndarray:
    if message is not None and message_hex is not None:
        raise UsageError("give at most one of --message and --message-hex")
    if message is not None:
        bits = protocol.as_bits(message)
    elif message_hex is not None:
        text = message_hex[2:] if message_hex.lower().startswith("0x") else message_hex
        try:
            value = int(text, 16)
        except ValueError as exc:
            raise UsageError(f"bad hex message: {message_hex!r}") from exc
        bits = protocol.as_bits(format(value, f"0{4 * len(text)}b"))
    else:
        return protocol.random_message(settings_n, seed)
    if bits.shape[0] != settings_n:
        raise UsageError(f"message has {bits.shape[0]} bits but n = {settings_n}")
    return bits


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(args) -> int:
    file_values = read_config_file(args.config) if args.config else {}
    flag_values = {
        "n": args.n,
        "concurrence": args.concurrence,
        "concurrence_r": args.concurrence_r,
        "concurrence_d": args.concurrence_d,
        "check_fraction": args.check_fraction,
        "abort_threshold": args.abort_threshold,
        "adversary": args.adversary,
        "intercept_probability": args.intercept_probability,
        "eve_strategy": args.eve_strategy,
        "eve_angle_deg": args.eve_angle_deg,
        "exclude_check_bits_from_message": True if args.exclude_check_bits else None,
    }
    flag_values["message"] = args.message
    flag_values["message_hex"] = args.message_hex
    defaults = {"n": 1000, "adversary": "ideal", "message": None, "message_hex": None}
    settings = merge_settings(defaults, file_values, flag_values)
    settings["seed"] = resolve_seed(args.seed, file_values)
    config = build_session_config(settings)
    message = parse_message(config.n, settings.get("message"), settings.get("message_hex"), config.seed)
    transcript, outcome = protocol.run_session(config, message)
    payload = {
        "config": {
            "n": config.n,
            "prep_policy": config.prep_policy.concurrence if isinstance(config.prep_policy, UniformPrep)
            else [config.prep_policy.concurrence_r, config.prep_policy.concurrence_d],
            "check_fraction": config.check_fraction,
            "abort_threshold": config.resolved_threshold(),
            "adversary": settings.get("adversary"),
            "seed": config.seed,
            "exclude_check_bits_from_message": config.exclude_check_bits_from_message,
        },
        "transcript": protocol.transcript_to_dict(transcript),
        "outcome": protocol.outcome_to_dict(outcome),
    }
    write_output(json.dumps(payload, indent=2) + "\n", args.output)
    return EXIT_OK if outcome.status is SessionStatus.DELIVERED else EXIT_ABORTED


def cmd_sweep(args) -> int:
    file_values = read_config_file(args.config) if args.config else {}
    defaults = {"grid": "0:1:0.1", "rounds": 100000}
    settings = merge_settings(defaults, file_values, {"grid": args.grid, "rounds": args.rounds})
    grid = parse_grid(settings["grid"])
    if not grid:
        raise UsageError("concurrence grid is empty")
    seed = resolve_seed(args.seed, file_values)
    rows = analysis.sweep(grid, int(settings["rounds"]), seed)
    write_output(analysis.sweep_to_csv(rows), args.output)
    return EXIT_OK


STRATEGY_NAMES = {
    "ideal": None,
    "uniform": EveStrategy.UNIFORM_RD,
    "always_r": EveStrategy.ALWAYS_R,
    "always_d": EveStrategy.ALWAYS_D,
}


def cmd_attack(args) -> int:
    file_values = read_config_file(args.config) if args.config else {}
    defaults = {
        "grid": "0.25,0.5,0.75,1.0",
        "strategies": "ideal,uniform,always_r,always_d",
        "trials": 100000,
        "intercept_probability": 1.0,
    }
    flag_values = {
        "grid": args.grid,
        "strategies": args.strategies,
        "trials": args.trials,
        "intercept_probability": args.intercept_probability,
    }
    settings = merge_settings(defaults, file_values, flag_values)
    grid = parse_grid(settings["grid"])
    if not grid:
        raise UsageError("concurrence grid is empty")
    names = [s.strip() for s in settings["strategies"].split(",") if s.strip()]
    for name in names:
        if name not in STRATEGY_NAMES:
            raise UsageError(f"unknown strategy {name!r} (choose from {sorted(STRATEGY_NAMES)})")
    seed = resolve_seed(args.seed, file_values)
    trials = int(settings["trials"])
    lines = ["concurrence,strategy,basis,error_oracle,error_mc,trials"]
    point = 0
    for c in grid:
        for name in names:
            model = IDEAL if STRATEGY_NAMES[name] is None else intercept_resend(
                probability=float(settings["intercept_probability"]), strategy=STRATEGY_NAMES[name]
            )
            for basis in (R, D):
                oracle = float(attack_error_oracle(c, model, basis))
                mc = float(sample_error_rate(c, model, basis, trials, protocol.derive_seed(seed, point)))
                lines.append(f"{c!r},{name},{basis.label},{oracle!r},{mc!r},{trials}")
                point += 1
    write_output("\n".join(lines) + "\n", args.output)
    return EXIT_OK


def cmd_case(args) -> int:
    file_values = read_config_file(args.config) if args.config else {}
    flag_values = {
        "n": args.n,
        "concurrence_r": args.cr,
        "concurrence_d": args.cd,
        "check_fraction": args.check_fraction,
        "adversary": args.adversary,
        "intercept_probability": args.intercept_probability,
        "eve_strategy": args.eve_strategy,
        "eve_angle_deg": args.eve_angle_deg,
        "case_mode": args.mode,
    }
    defaults = {"n": 10000, "adversary": "ideal", "check_fraction": 0.25}
    settings = merge_settings(defaults, file_values, flag_values)
    settings["seed"] = resolve_seed(args.seed, file_values)
    mode_name = settings.get("case_mode")
    if mode_name not in ("i", "ii"):
        raise UsageError("case mode must be 'i' or 'ii'")
    mode = CaseMode.CASE_I if mode_name == "i" else CaseMode.CASE_II
    c_r = settings.get("concurrence_r")
    c_d = settings.get("concurrence_d")
    if c_r is None:
        raise UsageError("case experiments need --cr")
    if mode is CaseMode.CASE_II and (c_d is None or not (0.0 < float(c_d) < 1.0)):
        raise UsageError("schedule ii needs 0 < --cd < 1")
    adversary = build_adversary(settings)
    try:
        report = analysis.run_case(
            mode,
            int(settings["n"]),
            float(c_r),
            None if c_d is None else float(c_d),
            int(settings["seed"]),
            adversary=adversary,
            check_fraction=float(settings["check_fraction"]),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    write_output(json.dumps(report.to_dict(), indent=2) + "\n", args.output)
    return EXIT_OK if report.status is SessionStatus.DELIVERED else EXIT_ABORTED


# ---------------------------------------------------------------------------
# parser


def _add_common(sub) -> None:
    sub.add_argument("--seed", type=int, default=None, help="master seed (falls back to QDSQC_SEED, then 0)")
    sub.add_argument("--config", default=None, help="flat key = value config file")
    sub.add_argument("-o", "--output", default=None, help="output file (default: stdout)")


def _add_adversary_flags(sub) -> None:
    sub.add_argument("--adversary", choices=["ideal", "intercept"], default=None)
    sub.add_argument("--intercept-probability", type=float, default=None)
    sub.add_argument("--eve-strategy", choices=["uniform", "always_r", "always_d", "fixed_angle"], default=None)
    sub.add_argument("--eve-angle-deg", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdsqc", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="subcommand", required=True)

    run = subs.add_parser("run", help="run one session and write its transcript JSON")
    run.add_argument("--n", type=int, default=None, help="message length in bits")
    run.add_argument("--concurrence", type=float, default=None)
    run.add_argument("--concurrence-r", type=float, default=None)
    run.add_argument("--concurrence-d", type=float, default=None)
    run.add_argument("--check-fraction", type=float, default=None)
    run.add_argument("--abort-threshold", type=float, default=None)
    run.add_argument("--exclude-check-bits", action="store_true", help="carry checked positions through the pad")
    run.add_argument("--message", default=None, help="message as a 0/1 string")
    run.add_argument("--message-hex", default=None, help="message as hex (4 bits per digit)")
    run.add_argument("--format", choices=["json"], default="json")
    _add_adversary_flags(run)
    _add_common(run)
    run.set_defaults(func=cmd_run)

    sweep = subs.add_parser("sweep", help="concurrence sweep, estimates vs closed forms, CSV")
    sweep.add_argument("--grid", default=None, help="start:stop:step or comma list (default 0:1:0.1)")
    sweep.add_argument("--rounds", type=int, default=None, help="rounds per grid point (default 100000)")
    sweep.add_argument("--format", choices=["csv"], default="csv")
    _add_common(sweep)
    sweep.set_defaults(func=cmd_sweep)

    attack = subs.add_parser("attack", help="oracle vs Monte Carlo error rates per strategy, CSV")
    attack.add_argument("--grid", default=None, help="default 0.25,0.5,0.75,1.0")
    attack.add_argument("--strategies", default=None, help="default ideal,uniform,always_r,always_d")
    attack.add_argument("--trials", type=int, default=None, help="default 100000")
    attack.add_argument("--intercept-probability", type=float, default=None)
    attack.add_argument("--format", choices=["csv"], default="csv")
    _add_common(attack)
    attack.set_defaults(func=cmd_attack)

    case = subs.add_parser("case", help="reduced-entanglement schedule i or ii, report JSON")
    case.add_argument("--mode", choices=["i", "ii"], default=None)
    case.add_argument("--n", type=int, default=None, help="target sifted bits")
    case.add_argument("--cr", type=float, default=None, help="R-basis concurrence")
    case.add_argument("--cd", type=float, default=None, help="D-basis concurrence (mode ii)")
    case.add_argument("--check-fraction", type=float, default=None)
    case.add_argument("--format", choices=["json"], default="json")
    _add_adversary_flags(case)
    _add_common(case)
    case.set_defaults(func=cmd_case)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
