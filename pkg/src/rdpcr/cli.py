"""Command-line entry point: ``rdpcr {gauss,region,simulate,upgrade}``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, gaussian, region, synthesis, upgrade
from .dist import Channel, Distribution, DistortionMeasure
from .schemas import REGION_QUERY, SIM_CONFIG, UPGRADE_INPUT, SchemaError, validate


class CheckFailed(RuntimeError):
    pass


def _parse_rate(text) -> float:
    if isinstance(text, str) and text.strip().lower() in ("inf", "infinity"):
        return math.inf
    value = float(text)
    if value < 0:
        raise ValueError(f"rate must be nonnegative, got {text}")
    return value


def _rate_json(value: float):
    return "inf" if math.isinf(value) else value


def _fmt(x) -> str:
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{x:.6g}"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load(path: str, schema, what: str):
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise SchemaError(f"{what}: not valid JSON: {e}") from e
    validate(obj, schema, what)
    return obj


class _Outputs:
    """Collects named text outputs and writes them plus a manifest."""

    def __init__(self, args, config):
        self.args = args
        self.config = config
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str) -> None:
        self.files[name] = text

    def flush(self) -> None:
        if self.args.out is None:
            for text in self.files.values():
                sys.stdout.write(text)
            return
        out = Path(self.args.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in self.files.items():
            (out / name).write_text(text)
        manifest = {
            "command": self.args.command,
            "config": self.config,
            "seed": self.args.seed,
            "version": __version__,
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "outputs": sorted(self.files),
        }
        (out / f"{self.args.command}_manifest.json").write_text(_dumps(manifest))


def _gauss_rows(points):
    return [(p.delta, p.rc, p.rho, p.rho_tilde, p.rate) for p in points]


def _gauss_json(points):
    return [
        {"delta": p.delta, "rc": None if math.isnan(p.rc) else _rate_json(p.rc),
         "rho": None if math.isnan(p.rho) else p.rho,
         "rho_tilde": None if math.isnan(p.rho_tilde) else p.rho_tilde, "rate": p.rate}
        for p in points
    ]


def _check_gauss(points) -> None:
    for p in points:
        if math.isnan(p.rho):
            continue
        if abs((1.0 - p.delta / 2.0) - p.rho * p.rho_tilde) > 1e-10:
            raise CheckFailed(f"correlation identity violated at delta={p.delta}")


def cmd_gauss(args) -> None:
    header = ["delta", "rc", "rho", "rho_tilde", "rate"]
    if args.curves == "fig1":
        curves = gaussian.fig1_curves()
        config = {"curves": "fig1", "grid": gaussian.fig1_grid()}
        outs = _Outputs(args, config)
        for name, pts in curves.items():
            _check_gauss(pts)
            if args.format == "json":
                outs.add(f"fig1_{name}.json", _dumps(_gauss_json(pts)))
            else:
                outs.add(f"fig1_{name}.csv", _csv(header, _gauss_rows(pts)))
        outs.flush()
        return
    if args.delta is None:
        raise ValueError("give --delta or --curves fig1")
    deltas = [float(x) for x in args.delta.split(",")]
    rc = _parse_rate(args.rc)
    pts = gaussian.curve(deltas, rc)
    _check_gauss(pts)
    outs = _Outputs(args, {"delta": deltas, "rc": _rate_json(rc)})
    if args.format == "json":
        outs.add("gauss.json", _dumps(_gauss_json(pts)))
    else:
        outs.add("gauss.csv", _csv(header, _gauss_rows(pts)))
    outs.flush()


def _witness_json(res: region.MinRateResult):
    w = res.witness
    return {
        "min_rate": res.rate,
        "delta": res.delta,
        "rc": _rate_json(res.common_rate),
        "aux_size": res.aux_size,
        "n_starts": res.n_starts,
        "witness": {
            "forward": w.triple.forward.to_json(),
            "synthesis": w.triple.synthesis.to_json(),
            "info_xu": w.achieved.info_xu,
            "info_yu": w.achieved.info_yu,
            "distortion": w.achieved.distortion,
            "realism_gap": w.achieved.realism_gap,
        },
    }


def cmd_region(args) -> None:
    q = _load(args.query, REGION_QUERY, "query")
    source = Distribution.from_json(q["source"])
    d = DistortionMeasure.from_json(q["distortion"])
    rc = _parse_rate(q["rc"])
    aux = q.get("aux_size")
    kw = {"n_starts": q.get("n_starts", 8), "seed": q.get("seed", args.seed)}
    outs = _Outputs(args, q)
    if args.sweep == "delta":
        deltas = q.get("deltas") or list(np.round(np.linspace(0.0, q["delta"], 11)[1:], 10))
        rows = []
        for delta in deltas:
            try:
                res = region.solve_min_rate(float(delta), rc, source, d, aux, **kw)
                rows.append((float(delta), rc, res.rate, res.aux_size))
            except region.InfeasibleError:
                rows.append((float(delta), rc, math.nan, aux or source.alphabet_size + 1))
        outs.add("region_sweep.csv", _csv(["delta", "rc", "min_rate", "aux_size"], rows))
        outs.flush()
        return
    res = region.solve_min_rate(float(q["delta"]), rc, source, d, aux, **kw)
    report = _witness_json(res)
    if not res.witness.satisfies(res.rate, rc, res.delta):
        raise CheckFailed("returned witness fails its own constraint re-check")
    if "rate" in q:
        report["member"] = bool(res.witness.satisfies(float(q["rate"]), rc, res.delta))
    outs.add("region_report.json", _dumps(report))
    outs.flush()


def cmd_simulate(args) -> None:
    obj = _load(args.config, SIM_CONFIG, "config")
    if args.seed is not None:
        obj = {**obj, "seed": args.seed}
    cfg = synthesis.SimConfig.from_json(obj)
    outs = _Outputs(args, cfg.to_json())
    report = synthesis.run(cfg)
    if not 0.0 <= report.tv_gap <= 1.0:
        raise CheckFailed("tv_gap outside [0, 1]")
    outs.add("sim_report.json", _dumps(report.to_json()))
    if args.trace:
        ns = [int(x) for x in args.trace.split(",")]
        trace = synthesis.sweep(cfg, ns, args.codebooks)
        rows = [(p.n, p.tv_gap, p.tv_ci, p.distortion) for p in trace]
        outs.add("sim_trace.csv", _csv(["n", "tv_gap", "tv_ci", "distortion"], rows))
    outs.flush()


def cmd_upgrade(args) -> None:
    obj = _load(args.input, UPGRADE_INPUT, "input")
    inp = upgrade.UpgradeInput(
        Distribution.from_json(obj["target"]), Channel.from_json(obj["decoder"]), Distribution.from_json(obj["weights"])
    )
    out = upgrade.upgrade(inp)
    cert = upgrade.coupling_certificate(inp, out)
    if np.abs(inp.weights.mass @ out.upgraded.rows - inp.target.mass).max() > 1e-12:
        raise CheckFailed("upgraded decoder does not reproduce the target law")
    report = {
        "upgraded": out.upgraded.to_json(),
        "plus_set": out.plus_set.tolist(),
        "theta": {str(k): v for k, v in out.theta.items()},
        "phi": out.phi.tolist(),
        "residual": None if out.residual is None else out.residual.to_json(),
        "tv_before": out.tv_before,
        "certificate": {"mismatch_prob": cert.mismatch_prob, "tv_before": cert.tv_before},
    }
    outs = _Outputs(args, obj)
    outs.add("upgrade.json", _dumps(report))
    outs.flush()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", metavar="DIR", help="write outputs and a manifest here instead of stdout")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    p = argparse.ArgumentParser(prog="rdpcr", description="Rate-distortion-perception tradeoffs with common randomness.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gauss", parents=[common], help="quadratic-Gaussian tradeoff curves")
    g.add_argument("--delta", help="distortion or comma-separated list, each in (0, 2]")
    g.add_argument("--rc", default="inf", help="common randomness rate in bits, or 'inf'")
    g.add_argument("--curves", choices=("fig1",), help="emit the three reference curves")
    g.set_defaults(func=cmd_gauss)

    r = sub.add_parser("region", parents=[common], help="minimum rate and witness for a discrete source")
    r.add_argument("--query", required=True, metavar="FILE")
    r.add_argument("--sweep", choices=("delta",))
    r.set_defaults(func=cmd_region)

    s = sub.add_parser("simulate", parents=[common], help="finite-blocklength random-codebook simulation")
    s.add_argument("--config", required=True, metavar="FILE")
    s.add_argument("--trace", metavar="N1,N2,...", help="also sweep these blocklengths")
    s.add_argument("--codebooks", type=int, default=1, help="codebooks per blocklength in the trace")
    s.set_defaults(func=cmd_simulate)

    u = sub.add_parser("upgrade", parents=[common], help="exact-realism decoder upgrade")
    u.add_argument("--input", required=True, metavar="FILE")
    u.set_defaults(func=cmd_upgrade)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (SchemaError, ValueError, region.NotFoundError, CheckFailed, MemoryError, OSError) as e:
        print(f"rdpcr {args.command}: error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
