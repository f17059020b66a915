"""Command-line front end: ``crossdet {region,sweep,detlab,check}``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from pathlib import Path

from . import scenario as scen
from .bc import capacity_region_no_relay
from .checks import run_checks
from .detlab import (PreconditionFailed, SearchBoundExceeded, cond_entropy, find_w_extractor,
                     linear_det_example, verify_capacity_match)
from .gaussian import SingularCovariance
from .ghf import Infeasible, failing_noninterfered_improvement, interfered_user_improvement
from .region import relay_extended_region
from .three_stage import RankDeficient, noninterfered_improvement

log = logging.getLogger("crossdet")

EXIT_OK, EXIT_VALIDATION, EXIT_SWEEP, EXIT_DETLAB, EXIT_CHECK = 0, 2, 3, 4, 5
SCHEMES = ("interfered", "failing", "three-stage")


class ValidationError(Exception):
    pass


def fmt(x) -> str:
    """Locale-independent 12-significant-digit number."""
    return format(float(x), ".12g")


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(r) for r in rows]
    return "\n".join(lines) + "\n"


def region_csv(region) -> str:
    return csv_text(["R1", "R2"], [(fmt(a), fmt(b)) for a, b in region.vertices])


def region_svg(base, extended, size=400, margin=40) -> str:
    """Two closed polylines (no-relay and extended region) on common axes."""
    top = max([float(c) for v in extended.vertices + base.vertices for c in v] + [1e-12])
    scale = (size - 2 * margin) / top

    def pts(region):
        return " ".join(f"{fmt(margin + float(a) * scale)},{fmt(size - margin - float(b) * scale)}"
                        for a, b in list(region.vertices) + [region.vertices[0]])

    o = size - margin
    return "\n".join([
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<line x1="{margin}" y1="{o}" x2="{o}" y2="{o}" stroke="black"/>',
        f'<line x1="{margin}" y1="{o}" x2="{margin}" y2="{margin}" stroke="black"/>',
        f'<text x="{o}" y="{o + 20}" font-size="12">R1</text>',
        f'<text x="{margin - 30}" y="{margin}" font-size="12">R2</text>',
        f'<text x="{margin - 10}" y="{o + 20}" font-size="10">0</text>',
        f'<text x="{o - 10}" y="{o + 32}" font-size="10">{fmt(top)}</text>',
        f'<polyline points="{pts(extended)}" fill="none" stroke="#c0392b" stroke-width="2"/>',
        f'<polyline points="{pts(base)}" fill="none" stroke="#2c3e80" stroke-width="2"/>',
        f'<text x="{o - 120}" y="{margin}" font-size="12" fill="#2c3e80">no relay</text>',
        f'<text x="{o - 120}" y="{margin + 16}" font-size="12" fill="#c0392b">'
        f'with relay link</text>',
        "</svg>",
    ]) + "\n"


def _gaussian(args) -> scen.GaussianScenario:
    s = scen.load(args.scenario) if args.scenario else scen.pinned()
    if s.kind != "gaussian":
        raise ValidationError("scenario: expected kind 'gaussian'")
    return s


def cmd_region(args) -> int:
    s = _gaussian(args)
    if args.grid < 2:
        raise ValidationError("--grid: must be at least 2")
    base = capacity_region_no_relay(s.spec, args.grid)
    ext = relay_extended_region(base, s.spec.R0)
    out = Path(args.out)
    write_atomic(out / "region_base.csv", region_csv(base))
    write_atomic(out / "region_extended.csv", region_csv(ext))
    write_atomic(out / "region.svg", region_svg(base, ext))
    print(f"max sum rate: no relay {fmt(base.max_sum())}, with relay {fmt(ext.max_sum())}")
    return EXIT_OK


def sweep_row(s: scen.GaussianScenario, scheme: str, N: float, split: float, jitter: bool):
    spec = s.spec.with_noise(N)
    R0 = spec.R0
    if scheme == "interfered":
        rep = interfered_user_improvement(spec, s.plan, R0, s.w_r, jitter)
        return rep, rep.total, None
    if scheme == "failing":
        rep = failing_noninterfered_improvement(spec, s.plan, R0, s.w_r, s.q, jitter)
        return rep, rep.total, None
    plan = s.plan if s.plan.stages == 3 else s.plan.split(split)
    rep = noninterfered_improvement(spec, plan, R0, jitter=jitter)
    return rep, rep.extras["r2"], rep.extras["residual"]


def cmd_sweep(args) -> int:
    s = _gaussian(args)
    if not 0 < args.power_split < 1:
        raise ValidationError("--power-split: must lie in (0, 1)")
    if args.scheme != "three-stage" and s.plan.stages != 2:
        raise ValidationError("plan: the two-stage schemes need a two-stage plan")
    header = ["N", "q", "bonus", "penalty", "delta_r", "total_rate"]
    if args.scheme == "three-stage":
        header.append("residual")
    header.append("status")
    rows, failures = [], 0
    for N in s.sweep:
        try:
            rep, total, residual = sweep_row(s, args.scheme, N, args.power_split, args.jitter)
        except (Infeasible, RankDeficient, SingularCovariance) as e:
            failures += 1
            log.warning("N=%s: %s", fmt(N), e)
            kind = {Infeasible: "infeasible", RankDeficient: "rank-deficient"}.get(
                type(e), "singular")
            rows.append([fmt(N)] + [""] * (len(header) - 2) + [kind])
            continue
        row = [fmt(N), fmt(rep.q), fmt(rep.bonus), fmt(rep.penalty), fmt(rep.delta_r),
               fmt(total)]
        if args.scheme == "three-stage":
            row.append(fmt(residual))
        row.append("ok+jitter" if args.jitter else "ok")
        rows.append(row)
        log.info("N=%s delta_r=%s", fmt(N), fmt(rep.delta_r))
    write_atomic(Path(args.out) / "sweep.csv", csv_text(header, rows))
    print(f"{args.scheme}: {len(rows) - failures}/{len(rows)} sweep points evaluated")
    return EXIT_SWEEP if failures == len(rows) else EXIT_OK


def cmd_detlab(args) -> int:
    if args.example:
        channel, _, g = linear_det_example(2 if args.r0 is None else args.r0)
    elif args.scenario:
        s = scen.load(args.scenario)
        if s.kind != "deterministic":
            raise ValidationError("scenario: expected kind 'deterministic'")
        channel, g = s.channel, s.g
        if args.r0 is not None:
            channel = channel.with_link(args.r0)
    else:
        raise ValidationError("detlab: give --example fig4 or --scenario")
    print(f"R0 = {channel.R0}")
    for label, (A, B) in (("H(Y1)", (["Y1"], [])), ("H(Y2)", (["Y2"], [])),
                          ("H(Y1,Y2)", (["Y1", "Y2"], [])), ("H(Yr)", (["Yr"], [])),
                          ("H(Yr|Y1,Y2)", (["Yr"], ["Y1", "Y2"]))):
        print(f"{label:<14}{cond_entropy(channel, A, B)}")
    try:
        rep = find_w_extractor(channel, g)
    except SearchBoundExceeded as e:
        raise ValidationError(f"g: {e}") from None
    if rep.found:
        print(f"extractor: found, H(W) = {rep.H_W}")
    else:
        print(f"extractor: none (best independent H(W) = {rep.H_W})")
    try:
        cert = verify_capacity_match(channel, g)
    except PreconditionFailed as e:
        print(f"capacity match: SKIPPED ({e})")
        return EXIT_OK
    out = Path(args.out)
    write_atomic(out / "detlab_outer.csv", region_csv(cert.outer))
    write_atomic(out / "detlab_achieved.csv", region_csv(cert.achieved))
    print("outer bound vertices:    " + " ".join(f"({a},{b})" for a, b in cert.outer.vertices))
    print("time-shared hull vertices: " + " ".join(
        f"({a},{b})" for a, b in cert.achieved.vertices))
    print(f"capacity match: {'PASS' if cert.match else 'FAIL'}")
    return EXIT_OK if cert.match else EXIT_DETLAB


def cmd_check(args) -> int:
    if not 0 <= args.seed < 2 ** 64:
        raise ValidationError("--seed: must be an unsigned 64-bit integer")
    results = run_checks(args.seed, sabotage=args.inject_fault)
    for name, ok, secs in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}")
        log.info("%s took %.3fs", name, secs)
    passed = sum(ok for _, ok, _ in results)
    print(f"{passed}/{len(results)} properties passed (seed {args.seed})")
    return EXIT_OK if passed == len(results) else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="JSON scenario file (default: built-in pinned scenario)")
    common.add_argument("--out", default=".", help="output directory (default: .)")
    p = argparse.ArgumentParser(prog="crossdet",
                                description="Broadcast relay rate regions and relay schemes.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("region", parents=[common], help="no-relay and relay-extended regions")
    r.add_argument("--grid", type=int, default=200, help="power-split grid size (default 200)")
    r.set_defaults(func=cmd_region)

    s = sub.add_parser("sweep", parents=[common], help="relay gain versus noise power")
    s.add_argument("--scheme", choices=SCHEMES, required=True)
    s.add_argument("--power-split", type=float, default=0.5,
                   help="share of user two's power on the first virtual stream (three-stage)")
    s.add_argument("--jitter", action="store_true",
                   help="regularize covariances with 1e-12*trace diagonal jitter")
    s.set_defaults(func=cmd_sweep)

    d = sub.add_parser("detlab", parents=[common], help="deterministic channel laboratory")
    d.add_argument("--example", choices=["fig4"], help="built-in five-bit instance")
    d.add_argument("--r0", type=int, default=None, help="override the relay link rate")
    d.set_defaults(func=cmd_detlab)

    c = sub.add_parser("check", help="run the seeded invariant suite")
    c.add_argument("--seed", type=int, default=42)
    c.add_argument("--inject-fault", action="store_true",
                   help="perturb coefficients on one side of the chain rule (must FAIL)")
    c.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    level = os.environ.get("CROSSDET_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, scen.ScenarioError) as e:
        print(f"crossdet: error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
