"""Command-line front end: scan tables, certificates, and property suites.

Subcommands map one-to-one onto the library layers: `scan-qudit` optimizes
the binned Bell value over phases for a dimension range, `tightness` emits
the enumeration certificate for one inequality, `scan-cv` tabulates the
squeezed-state Bell value against its closed form, `threshold` tabulates
the squeezing needed for near-maximal violation, and `certify` runs the
randomized property suites.

Scan output is CSV by default (one row per point, header first); reports
are JSON.  Floats are serialized with 17 significant digits and a `.`
decimal separator so identical flags and seed give byte-identical output.
Exit codes: 0 success, 1 property or I/O failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import cv
from . import lr_polytope as lr
from . import qudit

DEFAULT_GUARD_D = 32

_PRESET_KINDS = ("t1", "t2", "t3")


# ---------------------------------------------------------------------------
# Deterministic serialization


def format_float(value: float) -> str:
    """17-significant-digit, locale-independent float text."""
    return format(float(value), ".17g")


def _scalar_text(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    if value is None:
        return "null"
    return json.dumps(str(value))


def to_json_text(obj, indent: int = 0) -> str:
    """Minimal JSON writer so floats keep the fixed 17-digit format."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = [f"{inner}{json.dumps(str(k))}: {to_json_text(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(parts) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        parts = [f"{inner}{to_json_text(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(parts) + f"\n{pad}]"
    return _scalar_text(obj)


def _csv_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    text = str(value)
    if any(ch in text for ch in ",\"\n"):
        text = '"' + text.replace('"', '""') + '"'
    return text


def records_to_csv(records: list[dict]) -> str:
    if not records:
        return ""
    fields = list(records[0])
    lines = [",".join(fields)]
    for record in records:
        lines.append(",".join(_csv_cell(record[f]) for f in fields))
    return "\n".join(lines) + "\n"


def emit(payload, fmt: str, out_path: str | None) -> None:
    if fmt == "csv":
        records = payload if isinstance(payload, list) else [payload]
        text = records_to_csv(records)
    else:
        text = to_json_text(payload) + "\n"
    if out_path is None or out_path == "-":
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="ascii", newline="") as handle:
            handle.write(text)


# ---------------------------------------------------------------------------
# Config file and argument plumbing

# Converters for keys a config file may default; flags always win.
_CONFIG_TYPES = {
    "format": str,
    "out": str,
    "seed": int,
    "guard_d": int,
    "binning": str,
    "preset": str,
    "dmin": int,
    "dmax": int,
    "d": int,
    "window": float,
    "grid_points": int,
    "restarts": int,
    "s": int,
    "smax": int,
    "rmin": float,
    "rmax": float,
    "steps": int,
    "delta": str,
    "trials": int,
    "r1": str,
    "r2": str,
    "s1": str,
    "s2": str,
}


def load_config(path: str) -> dict:
    values = {}
    with open(path, "r", encoding="ascii") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if key not in _CONFIG_TYPES:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _CONFIG_TYPES[key](value.strip())
    return values


def _parse_subset_tokens(text: str, flag: str) -> tuple[int, ...]:
    indices = []
    for token in text.split(","):
        token = token.strip()
        try:
            indices.append(int(token))
        except ValueError:
            raise ValueError(f"invalid subset token {token!r} in {flag}") from None
    return tuple(indices)


def _parse_delta_tokens(text: str) -> tuple[float, ...]:
    deltas = []
    for token in text.split(","):
        token = token.strip()
        try:
            value = float(token)
        except ValueError:
            raise ValueError(f"invalid delta token {token!r}") from None
        if not 0.0 < value < cv.SQRT8 - 2.0:
            raise ValueError(
                f"delta {token!r} outside (0, {cv.SQRT8 - 2.0:.12g})"
            )
        deltas.append(value)
    return tuple(deltas)


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--out", default=None, help="output path (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=None,
                        help="output format (default: csv for scans, json for reports)")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized searches")
    common.add_argument("--guard-d", type=int, default=DEFAULT_GUARD_D,
                        help="upper bound on dimensions that trigger enumeration or "
                             f"optimization (default {DEFAULT_GUARD_D})")
    common.add_argument("--config", default=None,
                        help="key=value file supplying flag defaults")

    parser = argparse.ArgumentParser(
        prog="binned-bell",
        description="Binned Bell inequalities: scans, certificates, property suites.",
        allow_abbrev=False,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers = {}

    # Flags a config file may also supply stay optional here; presence is
    # validated in the handlers after config defaults are merged.
    p = subparsers["scan-qudit"] = sub.add_parser(
        "scan-qudit", parents=[common],
        help="optimize the Bell value over phases for a dimension range")
    p.add_argument("--binning", choices=_PRESET_KINDS, default=None)
    p.add_argument("--dmin", type=int, default=2)
    p.add_argument("--dmax", type=int, default=None)
    p.add_argument("--window", type=float, default=2.0,
                   help="phase search window [0, window) per setting")
    p.add_argument("--grid-points", type=int, default=17)
    p.add_argument("--restarts", type=int, default=5)

    p = subparsers["tightness"] = sub.add_parser(
        "tightness", parents=[common],
        help="enumeration certificate for one binned inequality")
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--preset", choices=_PRESET_KINDS, default=None)
    for flag in ("--r1", "--r2", "--s1", "--s2"):
        p.add_argument(flag, default=None, metavar="IDX[,IDX...]")

    p = subparsers["scan-cv"] = sub.add_parser(
        "scan-cv", parents=[common],
        help="squeezed-state Bell value against the closed form")
    p.add_argument("--s", type=int, default=None)
    p.add_argument("--rmin", type=float, default=0.1)
    p.add_argument("--rmax", type=float, default=5.0)
    p.add_argument("--steps", type=int, default=50)

    p = subparsers["threshold"] = sub.add_parser(
        "threshold", parents=[common],
        help="squeezing thresholds for near-maximal violation")
    p.add_argument("--smax", type=int, default=99)
    p.add_argument("--delta", default="0.01,0.001,0.0001",
                   help="comma-separated deficits from the quantum bound")

    p = subparsers["certify"] = sub.add_parser(
        "certify", parents=[common],
        help="randomized property suites over all modules")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--mutate-eps22", action="store_true",
                   help="flip the fourth coefficient block's sign to demonstrate "
                        "that the certification catches a wrong convention")

    return parser, subparsers


# ---------------------------------------------------------------------------
# Subcommands


def _require(parser: argparse.ArgumentParser, args, *names: str) -> None:
    for name in names:
        if getattr(args, name) is None:
            parser.error(f"--{name} is required (flag or config file)")


def cmd_scan_qudit(args, parser: argparse.ArgumentParser) -> int:
    _require(parser, args, "binning", "dmax")
    if args.binning not in _PRESET_KINDS:
        parser.error(f"unknown binning {args.binning!r}")
    if not 2 <= args.dmin <= args.dmax:
        parser.error(f"need 2 <= dmin <= dmax, got dmin={args.dmin} dmax={args.dmax}")
    if args.dmax > args.guard_d:
        parser.error(f"dmax={args.dmax} exceeds --guard-d={args.guard_d}")
    records = []
    for d in range(args.dmin, args.dmax + 1):
        try:
            preset = qudit.BinningPreset(args.binning, d)
            preset.to_binning_spec()
        except ValueError as exc:
            parser.error(f"binning {args.binning} invalid at d={d}: {exc}")
        phases, value = qudit.optimize_phases(
            d,
            preset,
            window=args.window,
            grid_points=args.grid_points,
            restarts=args.restarts,
            seed=args.seed,
        )
        records.append({
            "d": d,
            "binning": args.binning,
            "value": value,
            "alpha1": phases.alpha1,
            "alpha2": phases.alpha2,
            "beta1": phases.beta1,
            "beta2": phases.beta2,
        })
    emit(records, args.format or "csv", args.out)
    return 0


def cmd_tightness(args, parser: argparse.ArgumentParser) -> int:
    _require(parser, args, "d")
    if args.preset is not None and args.preset not in _PRESET_KINDS:
        parser.error(f"unknown preset {args.preset!r}")
    if args.d < 2:
        parser.error(f"need d >= 2, got {args.d}")
    if args.d > args.guard_d:
        parser.error(f"d={args.d} exceeds --guard-d={args.guard_d}")
    subset_flags = (args.r1, args.r2, args.s1, args.s2)
    if args.preset is not None:
        if any(flag is not None for flag in subset_flags):
            parser.error("--preset and explicit --r1/--r2/--s1/--s2 are mutually exclusive")
        try:
            spec = qudit.BinningPreset(args.preset, args.d).to_binning_spec()
        except ValueError as exc:
            parser.error(str(exc))
    else:
        if any(flag is None for flag in subset_flags):
            parser.error("need --preset or all of --r1 --r2 --s1 --s2")
        try:
            r1 = _parse_subset_tokens(args.r1, "--r1")
            r2 = _parse_subset_tokens(args.r2, "--r2")
            s1 = _parse_subset_tokens(args.s1, "--s1")
            s2 = _parse_subset_tokens(args.s2, "--s2")
            spec = lr.BinningSpec(d=args.d, r1=r1, r2=r2, s1=s1, s2=s2)
        except ValueError as exc:
            parser.error(str(exc))
    report = lr.tightness_certificate(spec, limit=args.guard_d)
    payload = {
        "d": spec.d,
        "r1": list(spec.r1),
        "r2": list(spec.r2),
        "s1": list(spec.s1),
        "s2": list(spec.s2),
        **report.to_dict(),
    }
    if (args.format or "json") == "csv":
        payload = {k: (",".join(map(str, v)) if isinstance(v, list) else v)
                   for k, v in payload.items()}
        emit([payload], "csv", args.out)
    else:
        emit(payload, "json", args.out)
    return 0


def cmd_scan_cv(args, parser: argparse.ArgumentParser) -> int:
    _require(parser, args, "s")
    if args.s < 1 or args.s % 2 == 0:
        parser.error(f"cutoff --s must be an odd integer >= 1, got {args.s}")
    if not 0.0 < args.rmin <= args.rmax:
        parser.error(f"need 0 < rmin <= rmax, got rmin={args.rmin} rmax={args.rmax}")
    if args.steps < 1:
        parser.error(f"need steps >= 1, got {args.steps}")
    records = []
    for r in np.linspace(args.rmin, args.rmax, args.steps):
        r = float(r)
        closed = cv.tmss_bell_closed_form(args.s, r)
        contraction = cv.cv_bell_expectation(cv.CvScenario.with_reference_angles(args.s, r))
        if abs(closed - contraction) > 1e-10:
            sys.stderr.write(
                f"error: closed form and contraction disagree at s={args.s} r={r}: "
                f"{closed!r} vs {contraction!r}\n"
            )
            return 1
        records.append({"s": args.s, "r": r, "closed_form": closed, "contraction": contraction})
    emit(records, args.format or "csv", args.out)
    return 0


def cmd_threshold(args, parser: argparse.ArgumentParser) -> int:
    if args.smax < 1:
        parser.error(f"need smax >= 1, got {args.smax}")
    try:
        deltas = _parse_delta_tokens(args.delta)
    except ValueError as exc:
        parser.error(str(exc))
    records = []
    for s in range(1, args.smax + 1, 2):
        r_boundary = cv.violation_boundary_r(s)
        records.append({
            "s": s,
            "kind": "boundary",
            "delta": cv.SQRT8 - 2.0,
            "f_value": math.tanh(r_boundary),
            "r_min": r_boundary,
            "bell_value": cv.tmss_bell_closed_form(s, r_boundary),
            "round_trip_error": abs(cv.tmss_bell_closed_form(s, r_boundary) - 2.0),
        })
        for delta in deltas:
            th = cv.squeezing_threshold(s, delta)
            bell = cv.tmss_bell_closed_form(s, th.r_min)
            records.append({
                "s": s,
                "kind": "violation",
                "delta": delta,
                "f_value": th.f_value,
                "r_min": th.r_min,
                "bell_value": bell,
                "round_trip_error": abs(bell - (cv.SQRT8 - delta)),
            })
    emit(records, args.format or "csv", args.out)
    return 0


# ---------------------------------------------------------------------------
# Property suites


def _random_spec(rng: np.random.Generator, d: int) -> lr.BinningSpec:
    def subset() -> tuple[int, ...]:
        size = int(rng.integers(1, d))
        return tuple(sorted(rng.choice(d, size=size, replace=False).tolist()))

    return lr.BinningSpec(d=d, r1=subset(), r2=subset(), s1=subset(), s2=subset())


def _random_phases(rng: np.random.Generator) -> qudit.PhaseSettings:
    values = rng.uniform(-2.0, 2.0, size=4)
    return qudit.PhaseSettings(*[float(v) for v in values])


def _suite_normalization(rng, trials, mutate):
    for _ in range(trials):
        d = int(rng.integers(2, 11))
        basis = qudit.MeasurementBasis.build(d, float(rng.uniform(-2, 2)))
        if basis.gram_residual() > 1e-10:
            yield f"basis d={d} offset={basis.offset!r} gram residual {basis.gram_residual():.3e}"
        s = int(rng.integers(0, 50)) * 2 + 1
        r = float(rng.uniform(0.01, 10.0))
        state = cv.TruncatedTmss.build(s, r)
        if state.normalization_error() > 1e-12:
            yield f"tmss s={s} r={r!r} normalization error {state.normalization_error():.3e}"


def _suite_identity(rng, trials, mutate):
    for _ in range(trials):
        d = int(rng.integers(2, 11))
        spec = _random_spec(rng, d)
        phases = _random_phases(rng)
        coeffs = lr.build_coefficients(spec)
        if mutate:
            eps = coeffs.eps.copy()
            eps[1, 1] = -eps[1, 1]
            coeffs = lr.CoefficientTensor(d=d, eps=eps)
        residual = qudit.operator_identity_residual(spec, phases, coeffs=coeffs)
        if residual > 1e-9:
            yield f"identity d={d} spec={spec} phases={phases} residual {residual:.3e}"


def _suite_norm_bound(rng, trials, mutate):
    for _ in range(trials):
        d = int(rng.integers(2, 11))
        spec = _random_spec(rng, d)
        phases = _random_phases(rng)
        coeffs = lr.build_coefficients(spec)
        if mutate:
            eps = coeffs.eps.copy()
            eps[1, 1] = -eps[1, 1]
            coeffs = lr.CoefficientTensor(d=d, eps=eps)
        operator = qudit.build_bell_operator(d, coeffs, phases)
        norm = operator.spectral_norm()
        if norm > qudit.SQRT8 + 1e-9:
            yield f"norm d={d} spec={spec} phases={phases} norm {norm!r}"


def _suite_m_formula(rng, trials, mutate):
    for _ in range(trials):
        d = int(rng.integers(2, 9))
        spec = _random_spec(rng, d)
        coeffs = lr.build_coefficients(spec)
        counted = lr.count_max_configs(coeffs)
        formula = lr.m_formula(spec)
        if counted != formula:
            yield f"M d={d} spec={spec} counted {counted} formula {formula}"
        if counted < lr.facet_threshold(d):
            yield f"M d={d} spec={spec} counted {counted} below threshold {lr.facet_threshold(d)}"


def _suite_rank(rng, trials, mutate):
    # Rank certification enumerates d^4 assignments; keep d small.
    for _ in range(max(1, trials // 10)):
        d = int(rng.integers(2, 7))
        spec = _random_spec(rng, d)
        report = lr.tightness_certificate(spec)
        if report.linear_rank < report.threshold:
            yield f"rank d={d} spec={spec} linear rank {report.linear_rank} < {report.threshold}"


_SUITES = (
    ("normalization", _suite_normalization),
    ("operator-identity", _suite_identity),
    ("norm-bound", _suite_norm_bound),
    ("m-formula", _suite_m_formula),
    ("rank", _suite_rank),
)


def cmd_certify(args, parser: argparse.ArgumentParser) -> int:
    if args.trials < 0:
        parser.error(f"need trials >= 0, got {args.trials}")
    if args.trials == 0:
        sys.stderr.write("warning: --trials 0 makes every suite pass vacuously\n")
    lines = []
    failures = 0
    for name, suite in _SUITES:
        rng = np.random.default_rng(args.seed)
        counterexamples = list(suite(rng, args.trials, args.mutate_eps22))
        if counterexamples:
            failures += len(counterexamples)
            lines.append(f"FAIL {name} ({len(counterexamples)} counterexamples)")
            lines.extend(f"  {c}" for c in counterexamples[:5])
            if len(counterexamples) > 5:
                lines.append(f"  ... {len(counterexamples) - 5} more")
        else:
            lines.append(f"PASS {name}")
    lines.append(
        f"{'FAIL' if failures else 'PASS'}: {len(_SUITES)} suites, "
        f"{args.trials} trials each, {failures} counterexamples"
    )
    text = "\n".join(lines) + "\n"
    if args.out is None or args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="ascii") as handle:
            handle.write(text)
    return 1 if failures else 0


_COMMANDS = {
    "scan-qudit": cmd_scan_qudit,
    "tightness": cmd_tightness,
    "scan-cv": cmd_scan_cv,
    "threshold": cmd_threshold,
    "certify": cmd_certify,
}

_GLOBAL_KEYS = frozenset({"out", "format", "seed", "guard_d"})

# Config keys each subcommand accepts; other keys in the file are treated
# as defaults for sibling subcommands and ignored.
_COMMAND_KEYS = {
    "scan-qudit": _GLOBAL_KEYS | {"binning", "dmin", "dmax", "window", "grid_points", "restarts"},
    "tightness": _GLOBAL_KEYS | {"d", "preset", "r1", "r2", "s1", "s2"},
    "scan-cv": _GLOBAL_KEYS | {"s", "rmin", "rmax", "steps"},
    "threshold": _GLOBAL_KEYS | {"smax", "delta"},
    "certify": _GLOBAL_KEYS | {"trials"},
}


def _extract_config_path(argv: list[str]) -> str | None:
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if token.startswith("--config="):
            return token.partition("=")[2]
    return None


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subparsers = build_parser()
    # Config defaults must be in place before parsing, so look for the
    # config flag and the subcommand token by hand first; flags still win
    # because explicit arguments override defaults.
    config_path = _extract_config_path(argv)
    command = next((token for token in argv if token in subparsers), None)
    if config_path is not None and command is not None:
        try:
            config = load_config(config_path)
        except (OSError, ValueError) as exc:
            parser.error(str(exc))
        known = _COMMAND_KEYS[command]
        subparsers[command].set_defaults(
            **{k: v for k, v in config.items() if k in known}
        )
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args, parser)
    except lr.EnumerationLimitError as exc:
        parser.error(str(exc))
    except cv.FockCutoffError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
