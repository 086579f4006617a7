"""Command-line interface: ``cheesetower <command> [options]``.

Exit codes: 0 success, 1 a certificate failed (the verdict is still written),
2 bad input or an impossible cheese, 3 the tower construction failed.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import itertools
import json
import os
import sys
import tempfile
from pathlib import Path

from cheesetower import __version__
from cheesetower.config import RunConfig
from cheesetower.errors import (
    BudgetExhausted,
    CheeseError,
    FormatVersionError,
    NoAdmissibleCut,
    NoRegularValue,
    TracingDivergence,
    TransversalityUnachievable,
    ZeroFreeCertificationFailed,
)
from cheesetower.geometry import CheeseSpec, canonical_json, crossing_angle, invariant_violations
from cheesetower.surface.rational import RationalFunction
from cheesetower.surface.tower import TowerSpec

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_BUILD = 0, 1, 2, 3


class UsageError(Exception):
    pass


def write_atomic(path, data) -> None:
    """Write text or bytes to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": "\n"})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_json(path, what: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UsageError(f"{what} file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what} file {path} is not valid JSON: {exc}") from None


def _config(args, inherited: dict | None = None) -> RunConfig:
    """Defaults, then values inherited from an input artifact, then the config file, then flags."""
    base = RunConfig().merged(inherited or {})
    if args.config:
        doc = _read_json(args.config, "config")
        RunConfig.from_dict(doc)
        base = base.merged({k: v for k, v in doc.items() if k not in ("version", "tolerances")})
        base = base.merged({f"tol_{k}": v for k, v in doc.get("tolerances", {}).items()})
    overrides = {
        key: getattr(args, key, None)
        for key in ("seed", "radius_budget", "hole_count", "min_crossing_angle", "truncations", "stages",
                    "kind", "dictionary_size", "target_delta", "tests")
    }
    return base.merged(overrides).validate()


def _load_spec(path) -> CheeseSpec:
    return CheeseSpec.from_dict(_read_json(path, "spec"))


def _load_tower(path) -> TowerSpec:
    return TowerSpec.from_dict(_read_json(path, "tower"))


def min_crossing_angle(spec: CheeseSpec) -> float | None:
    circles = spec.circles()
    angles = [crossing_angle(c1, r1, c2, r2) for (c1, r1), (c2, r2) in itertools.combinations(circles, 2)]
    angles = [a for a in angles if a is not None]
    return min(angles) if angles else None


# commands


def cmd_gen_cheese(args) -> int:
    from cheesetower.pipeline import make_spec

    cfg = _config(args)
    spec = make_spec(cfg)
    problems = invariant_violations(spec)
    if problems:
        raise UsageError("generated cheese breaks invariants: " + "; ".join(problems))
    write_atomic(args.out, spec.to_json())
    angle = min_crossing_angle(spec)
    print(f"holes={len(spec.holes)} sum_r={spec.radius_sum:.12g} (budget {spec.radius_budget:g})")
    print("min_crossing_angle=" + ("none (no crossings)" if angle is None else f"{angle:.6g}"))
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_build_tower(args) -> int:
    from cheesetower.pipeline import make_tower

    cfg = _config(args)
    spec = None
    if cfg.kind == "exp":
        if not args.spec:
            raise UsageError("build-tower --kind exp needs --spec")
        spec = _load_spec(args.spec)
        if max(cfg.truncations) > len(spec.holes):
            raise UsageError(f"truncation {max(cfg.truncations)} exceeds the {len(spec.holes)} holes of the cheese")
    dictionaries = None
    if args.dictionary_file:
        doc = _read_json(args.dictionary_file, "dictionary")
        dictionaries = {int(level): [RationalFunction.from_dict(g) for g in entries] for level, entries in doc.items()}
    tower = make_tower(spec, cfg, dictionaries)
    write_atomic(args.out, tower.to_json())
    for s in tower.stages:
        if tower.kind == "exponential":
            print(f"stage {s.level}: c={s.c:.6f} m={s.m} source={s.dict_source}")
        else:
            bound = 1.0 / s.level
            print(f"stage {s.level}: |alpha|={abs(s.alpha):.3e} < 1/{s.level}={bound:.3e} "
                  f"{'ok' if abs(s.alpha) < bound else 'VIOLATED'}")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_measure(args) -> int:
    from cheesetower.quadrature import boundary_measure

    tower = _load_tower(args.tower)
    if tower.kind != "exponential":
        raise UsageError("measure applies to exponential towers")
    if not 0 <= args.stage <= tower.height:
        raise UsageError(f"stage must lie in 0..{tower.height}")
    rep = boundary_measure(tower, args.stage, args.truncation, args.method)
    write_atomic(args.out, rep.to_json())
    if args.csv:
        write_atomic(args.csv, rep.contributions_csv())
    print(f"N={rep.stage} k={rep.truncation} variation={rep.total_variation:.12g} "
          f"moment={abs(rep.moment_zbar):.12g} ({rep.method})")
    return EXIT_OK


def cmd_certify(args) -> int:
    from cheesetower.pipeline import certify_tower

    tower = _load_tower(args.tower)
    inherited = {key: tower.config.get(key) for key in ("seed", "truncations", "dictionary_size", "target_delta")}
    inherited["kind"] = "exp" if tower.kind == "exponential" else "sqrt"
    inherited["stages"] = tower.height
    cfg = _config(args, inherited)
    verdict = certify_tower(tower, cfg, args.truncations)
    verdict["metadata"] = {
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "cheesetower_version": __version__,
    }
    write_atomic(args.out, canonical_json(verdict))
    for c in verdict.get("certificates", []):
        flag = "PASS" if c["pass_condition_8"] and c["pass_condition_9"] else "FAIL"
        print(f"N={c['stage']} k={c['truncation']} {flag} delta={c['delta_margin']:.6g}")
    print(f"all_passed={verdict['all_passed']}  wrote {args.out}")
    return EXIT_OK if verdict["all_passed"] else EXIT_FAILED


def cmd_report(args) -> int:
    from cheesetower.report import write_report

    tower = _load_tower(args.tower)
    verdict = _read_json(args.verdict, "verdict")
    if verdict.get("provenance", {}).get("tower_sha256") != tower.digest():
        raise UsageError("verdict was produced for a different tower")
    for p in write_report(tower, verdict, args.out_dir, write_atomic):
        print(f"wrote {p}")
    return EXIT_OK


# parser


def _positive_int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cheesetower", description="Swiss-cheese towers and their certificates.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON run configuration; flags override its values")
        sp.add_argument("--seed", type=int)

    g = sub.add_parser("gen-cheese", help="generate a random Swiss cheese")
    common(g)
    g.add_argument("--radius-budget", "--budget", dest="radius_budget", type=float)
    g.add_argument("--hole-count", "--holes", dest="hole_count", type=int)
    g.add_argument("--min-crossing-angle", "--min-angle", dest="min_crossing_angle", type=float)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_cheese)

    b = sub.add_parser("build-tower", help="build an exponential or square-root tower")
    common(b)
    b.add_argument("--spec", help="cheese JSON (exponential towers)")
    b.add_argument("--kind", choices=["exp", "sqrt"])
    b.add_argument("--stages", type=int)
    b.add_argument("--dictionary-size", "--dict", dest="dictionary_size", type=int)
    b.add_argument("--dictionary", dest="dictionary_file",
                   help='JSON {"level": [rational functions]} used instead of generated entries')
    b.add_argument("--truncations", "--k", dest="truncations", type=_positive_int_list)
    b.add_argument("--target-delta", dest="target_delta", type=float)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_build_tower)

    m = sub.add_parser("measure", help="boundary measure of one stage and truncation")
    m.add_argument("--tower", required=True)
    m.add_argument("--stage", type=int, required=True)
    m.add_argument("--truncation", type=int, required=True)
    m.add_argument("--method", choices=["direct", "recursive"], default="direct")
    m.add_argument("--out", required=True)
    m.add_argument("--csv", help="also write per-piece contributions")
    m.set_defaults(func=cmd_measure)

    c = sub.add_parser("certify", help="certify every stage and truncation of a tower")
    common(c)
    c.add_argument("--tower", required=True)
    c.add_argument("--truncations", "--k", dest="truncations", type=_positive_int_list)
    c.add_argument("--target-delta", dest="target_delta", type=float)
    c.add_argument("--tests", type=int)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_certify)

    r = sub.add_parser("report", help="SVG, CSV, summary and PNG artifacts")
    r.add_argument("--tower", required=True)
    r.add_argument("--verdict", required=True)
    r.add_argument("--out-dir", dest="out_dir", required=True)
    r.set_defaults(func=cmd_report)
    return p


BUILD_ERRORS = (NoAdmissibleCut, NoRegularValue, ZeroFreeCertificationFailed, TracingDivergence)
INPUT_ERRORS = (UsageError, ValueError, BudgetExhausted, TransversalityUnachievable, FormatVersionError, KeyError)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except BUILD_ERRORS as exc:
        print(f"error: tower construction failed: {exc}", file=sys.stderr)
        return EXIT_BUILD
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CheeseError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_BUILD


if __name__ == "__main__":
    sys.exit(main())
