"""Command-line front end: configuration, demo corpus and report files."""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from . import demos
from .analysis import ac_modulus, default_grid, lipschitz_estimate, pseudo_norm_obstruction, variation
from .errors import ConfigError, EvaluationDomainError, ExpressionError, MollificationError, OutsideDomainError
from .expr import parse
from .extension import Exhaustion, ExtensionSurface, build_surface
from .extraction import REPORT_COLUMNS, extract_series
from .funcspace import BaireSeries, ExpressionMap, Interval, NormedTarget, as_points, norm, sum_series
from .smoothing import EpsSchedule

__all__ = ["JobConfig", "DEFAULTS", "ENV_PREFIX", "load_config", "run", "main", "load_schema"]

log = logging.getLogger("baireone")

ENV_PREFIX = "BAIREONE_"
DIAGONAL_SLACK = 1e-9
ROUNDTRIP_SLACK = 1e-6

DEFAULTS = {
    "domain": "[0,1]",
    "target": {"dim": 1, "kind": "L2"},
    "n_max": 20,
    "levels": 12,
    "extra_levels": 5,
    "eps_schedule": {"eps1": 0.05, "ratio": 0.75},
    "tol": 1e-12,
    "grid_points": 65,
    "samples": 1001,
    "sections": 10,
    "eps_list": [0.5, 0.1, 0.02],
    "p": 0.5,
    "scales": [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
    "seed": 0,
    "threads": 1,
}

# keys that cannot change any output byte and so are left out of the echoed config
_NON_SEMANTIC = ("threads",)


def load_schema(name: str) -> dict:
    text = resources.files("baireone").joinpath("schemas", f"{name}.schema.json").read_text("utf-8")
    return json.loads(text)


def _parse_env_value(text: str, string_typed: bool):
    if string_typed:
        return text
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _string_keys() -> set:
    props = load_schema("config")["properties"]
    out = set()
    for key, sch in props.items():
        if sch.get("type") == "string" or all(isinstance(v, str) for v in sch.get("enum", [0])):
            out.add(key)
    return out


def env_overrides(environ=None) -> dict:
    """Config keys from ``BAIREONE_<KEY>``; ``__`` descends into nested objects."""
    environ = os.environ if environ is None else environ
    out: dict = {}
    strings = _string_keys()
    for name in sorted(environ):
        if not name.startswith(ENV_PREFIX):
            continue
        path = name[len(ENV_PREFIX):].lower().split("__")
        node = out
        for part in path[:-1]:
            node = node.setdefault(part, {})
        node[path[-1]] = _parse_env_value(environ[name], len(path) == 1 and path[0] in strings)
    return out


def _merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None, environ=None) -> dict:
    """File, then environment, then explicit overrides; validated against the config schema."""
    raw: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text("utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
    raw = _merge(raw, env_overrides(environ))
    raw = _merge(raw, {k: v for k, v in (overrides or {}).items() if v is not None})
    validator = jsonschema.Draft202012Validator(load_schema("config"))
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {e.message}")
    return _merge(DEFAULTS, raw)


@dataclass(frozen=True)
class JobConfig:
    command: str
    demo: Optional[str]
    domain: Interval
    target: NormedTarget
    g_spec: Optional[dict]
    surface_spec: Optional[list]
    n_max: int
    levels: int
    extra_levels: int
    schedule: EpsSchedule
    tol: float
    grid_points: int
    samples: int
    sections: int
    eps_list: tuple
    p: float
    scales: tuple
    seed: int
    threads: int
    raw: dict

    @classmethod
    def from_dict(cls, cfg: dict) -> "JobConfig":
        try:
            domain = Interval.parse(cfg["domain"])
            t = cfg["target"]
            target = NormedTarget(int(t.get("dim", 1)), t.get("kind", "L2"), t.get("p"))
            schedule = EpsSchedule(float(cfg["eps_schedule"].get("eps1", 0.05)),
                                   float(cfg["eps_schedule"].get("ratio", 0.75)))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        command = cfg["command"]
        g_spec = cfg.get("g")
        surface = cfg.get("surface")
        if isinstance(surface, str):
            surface = [surface]
        needs_g = command in ("extend", "roundtrip")
        needs_surface = command in ("extract", "analyze")
        if needs_g and (g_spec is None or surface is not None):
            raise ConfigError(f"'{command}' needs exactly a 'g' entry")
        if needs_surface and (surface is None or g_spec is not None):
            raise ConfigError(f"'{command}' needs exactly a 'surface' entry")
        if command == "demo" and cfg.get("demo") is None:
            raise ConfigError("'demo' needs a demo name")
        raw = {k: v for k, v in cfg.items() if k not in _NON_SEMANTIC}
        return cls(command, cfg.get("demo"), domain, target, g_spec, surface, int(cfg["n_max"]),
                   int(cfg["levels"]), int(cfg["extra_levels"]), schedule, float(cfg["tol"]),
                   int(cfg["grid_points"]), int(cfg["samples"]), int(cfg["sections"]),
                   tuple(float(e) for e in cfg["eps_list"]), float(cfg["p"]),
                   tuple(float(h) for h in cfg["scales"]), int(cfg["seed"]), int(cfg["threads"]), raw)


# ---------------------------------------------------------------- specs

def _exprs(spec, arity):
    items = [spec] if isinstance(spec, str) else list(spec)
    return [parse(s, arity) for s in items]


def map_from_g_spec(spec: dict, domain: Interval, target: NormedTarget):
    """An ExpressionMap, or a BaireSeries for an explicit stage list."""
    overrides = {}
    for item in spec.get("overrides", []):
        overrides[float(item["at"])] = item["value"]
    if "expr" in spec:
        m = ExpressionMap(_exprs(spec["expr"], 1), overrides)
        _check_dim(m, target)
        return m
    maps = [ExpressionMap(_exprs(s, 1), overrides) for s in spec["stages"]]
    for m in maps:
        _check_dim(m, target)
    tails = [float(v) for v in spec["tails"]]
    if len(tails) != len(maps):
        raise ConfigError("need one tail bound per stage")
    if any(b > a for a, b in zip(tails, tails[1:])):
        raise ConfigError("tail bounds must be nonincreasing")
    count = len(maps)

    def stage(n):
        return maps[min(n, count) - 1]

    def tail(n, x):
        return np.full(len(as_points(x)), tails[min(n, count) - 1])

    return BaireSeries(domain, target, stage, count, tail, "stages", None)


def surface_from_spec(spec: list, target: NormedTarget) -> ExpressionMap:
    m = ExpressionMap(_exprs(spec, 2))
    _check_dim(m, target)
    return m


def _check_dim(m, target):
    if m.dim != target.dim:
        raise ConfigError(f"expression has {m.dim} coordinates but the target has dimension {target.dim}")


def _segment(domain: Interval, n: int) -> tuple:
    if domain.bounded:
        return domain.inner_segment()
    return Exhaustion(domain).segment(n)


# ---------------------------------------------------------------- output

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def write_json(path: Path, doc: dict, schema: Optional[dict] = None):
    doc = _jsonable(doc)
    if schema is not None:
        jsonschema.validate(doc, schema, cls=jsonschema.Draft202012Validator)
    text = json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"
    path.write_bytes(text.encode("utf-8"))


def write_csv(path: Path, header, rows):
    rows = np.asarray(rows, dtype=float)
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(_fmt(v) for v in r))
    path.write_bytes(("\n".join(lines) + "\n").encode("ascii"))


def _fmt(v: float) -> str:
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return "%.17g" % v


def _grid_header(d):
    return ["x", "y"] + [f"f_{j}" for j in range(1, d + 1)]


def _certificate(kind: str, job: JobConfig, **body) -> dict:
    return {"format": "baireone-certificate", "version": 1, "kind": kind, "config": job.raw, **body}


# ---------------------------------------------------------------- jobs

def _extension_job(job: JobConfig, g, out: Path, stage_index=None) -> bool:
    dom, target = job.domain, job.target
    if not target.is_norm:
        raise ConfigError("the extension needs a normed target")
    surface = build_surface(g, dom, target, job.n_max, job.schedule, stage_index, job.tol)
    lo, hi = _segment(dom, job.n_max)

    xs = np.linspace(lo, hi, job.grid_points)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    vals = surface(X.ravel(), Y.ravel())
    write_csv(out / "surface.csv", _grid_header(target.dim),
              np.column_stack([X.ravel(), Y.ravel(), vals]))

    diag = diagonal_check(surface, lo, hi, job.samples, job.tol)
    rng = np.random.default_rng(job.seed)
    x0s = rng.uniform(lo, hi, job.sections)
    tasks = [(fixed, float(x0)) for x0 in x0s for fixed in ("x", "y")]
    with ThreadPoolExecutor(max_workers=job.threads) as pool:
        sections = list(pool.map(lambda t: section_check(surface, t[0], t[1], job.eps_list, (lo, hi)), tasks))
    passed = diag["passed"] and all(c["passed"] for s in sections for c in s["checks"])
    doc = _certificate(
        "extension", job,
        domain=dom.to_dict(), target=target.to_dict(), n_max=job.n_max,
        eps_schedule=job.schedule.to_dict(), scheme=surface.scheme.to_dict(),
        diagonal_check=diag, sections=sections, passed=passed,
    )
    write_json(out / "certificate.json", doc, load_schema("certificate"))
    return passed


def diagonal_check(surface: ExtensionSurface, lo: float, hi: float, samples: int, tol: float) -> dict:
    """Compare ``f(x, x)`` with the limit of the source series (or its sum when no limit is known)."""
    xs = np.linspace(lo, hi, samples)
    sv = surface.evaluate(xs, xs, tol)
    src = surface.diagonal_source
    if src.limit is not None:
        ref, ref_res, kind = src.limit(xs), np.zeros(len(xs)), "limit"
    else:
        r = sum_series(src, xs, tol)
        ref, ref_res, kind = r.value, r.residual, "series"
    err = norm(surface.target, sv.value - ref)
    bound = DIAGONAL_SLACK + sv.residual + ref_res
    return {
        "samples": samples,
        "reference": kind,
        "max_error": float(err.max()),
        "max_residual": float(sv.residual.max()),
        "passed": bool(np.all(err <= bound)),
    }


def section_check(surface: ExtensionSurface, fixed: str, x0: float, eps_list, segment) -> dict:
    lo, hi = segment
    cert = surface.section_certificate(fixed, x0)
    f = surface.section(fixed, x0)
    edges = np.concatenate([[x0], x0 - surface.scheme.deltas, x0 + surface.scheme.deltas])
    grid = default_grid(lo, hi, None, edges)
    checks = []
    for eps in eps_list:
        delta = cert.delta_for_eps(eps)
        if delta is None:
            checks.append({"eps": eps, "delta": None, "modulus": None, "passed": False})
            continue
        mod = ac_modulus(f, (lo, hi), min(delta, hi - lo), grid, surface.target)
        checks.append({"eps": eps, "delta": delta, "modulus": mod, "passed": bool(mod < eps)})
    return {"fixed": fixed, "x0": x0, "certificate": cert.to_dict(), "checks": checks}


def _extract_job(job: JobConfig, out: Path) -> bool:
    f = surface_from_spec(job.surface_spec, job.target)
    lo, hi = _sample_range(job.domain)
    xs = np.linspace(lo, hi, job.samples)
    res = extract_series(f, job.levels, xs, job.domain, job.target)
    rows = [r.row() for r in res.reports]
    write_csv(out / "convergence.csv", REPORT_COLUMNS, rows)
    passed = all(r.certificate_ok and r.beta_gamma_ok for r in res.reports)
    doc = _certificate(
        "extraction", job,
        domain=job.domain.to_dict(), target=job.target.to_dict(), levels=job.levels,
        samples=len(xs), transfer=res.sequence.transfer.kind,
        reports=[dict(zip(REPORT_COLUMNS, _report_values(r))) for r in res.reports], passed=passed,
    )
    write_json(out / "extraction.json", doc, load_schema("certificate"))
    return passed


def _report_values(r):
    row = list(r.row())
    row[5] = bool(row[5])
    row[6] = bool(row[6])
    return row


def _sample_range(domain: Interval) -> tuple:
    if not domain.bounded:
        return Exhaustion(domain).segment(1)
    return domain.inner_segment()


def _analyze_job(job: JobConfig, out: Path) -> bool:
    dom, target = job.domain, job.target
    f = surface_from_spec(job.surface_spec, target)
    lo, hi = _sample_range(dom)

    def diag(x):
        x = as_points(x)
        return f(x, x)

    xs = np.linspace(lo, hi, job.samples)
    write_csv(out / "diagonal.csv", _grid_header(target.dim), np.column_stack([xs, xs, diag(xs)]))
    rep = variation(diag, (lo, hi), None, target)
    rng = np.random.default_rng(job.seed)
    sections = []
    for x0 in rng.uniform(lo, hi, job.sections):
        x0 = float(x0)
        for fixed in ("x", "y"):
            if fixed == "y":
                sec = lambda x, _x0=x0: f(as_points(x), np.full(len(as_points(x)), _x0))
            else:
                sec = lambda y, _x0=x0: f(np.full(len(as_points(y)), _x0), as_points(y))
            sections.append({
                "fixed": fixed, "x0": x0,
                "variation": variation(sec, (lo, hi), None, target).to_dict(),
                "lipschitz_estimate": lipschitz_estimate(sec, (lo, hi), None, target),
            })
    doc = _certificate("analysis", job, domain=dom.to_dict(), target=target.to_dict(),
                       diagonal=rep.to_dict(), sections=sections)
    write_json(out / "analysis.json", doc, load_schema("certificate"))
    return True


def _roundtrip_job(job: JobConfig, out: Path) -> bool:
    dom, target = job.domain, job.target
    if not target.is_norm:
        raise ConfigError("the extension needs a normed target")
    g = map_from_g_spec(job.g_spec, dom, target)
    surface = build_surface(g, dom, target, job.n_max, job.schedule, None, job.tol)
    lo, hi = _segment(dom, job.n_max)
    rng = np.random.default_rng(job.seed)
    xs = np.sort(rng.uniform(lo, hi, job.samples))
    levels = job.n_max + job.extra_levels
    res = extract_series(surface, levels, xs, dom, target)
    got = res.values[-1]
    diag = res.diagonal
    stage = surface.stage(job.n_max)(xs)
    residual = surface.truncation_residual(xs)
    err = norm(target, got - diag)
    excess = err - (ROUNDTRIP_SLACK + residual)
    stage_err = norm(target, got - stage)
    d = target.dim
    header = ["x"] + [f"diag_{j}" for j in range(1, d + 1)] + [f"extracted_{j}" for j in range(1, d + 1)] \
        + ["error", "residual"]
    write_csv(out / "roundtrip.csv", header, np.column_stack([xs, diag, got, err, residual]))
    passed = bool(np.all(excess <= 0))
    doc = _certificate(
        "roundtrip", job,
        extension={"n_max": job.n_max, "eps_schedule": job.schedule.to_dict(),
                   "delta_last": float(surface.scheme.deltas[-1]), "sum_K_delta": surface.scheme.sum_K_delta},
        levels=levels, samples=len(xs), max_error=float(err.max()), max_excess=float(excess.max()),
        max_stage_error=float(stage_err.max()), passed=passed,
    )
    write_json(out / "roundtrip.json", doc, load_schema("certificate"))
    return passed


def _pseudonorm_job(job: JobConfig, out: Path) -> bool:
    rows = pseudo_norm_obstruction(job.p, job.scales)
    write_csv(out / "pseudonorm.csv", ["h", "ratio", "h_pow_p_minus_1"],
              [[r["h"], r["ratio"], r["h_pow_p_minus_1"]] for r in rows])
    passed = all(math.isclose(r["ratio"], r["h_pow_p_minus_1"], rel_tol=1e-12) for r in rows)
    doc = _certificate("pseudonorm", job, p=job.p, rows=rows, passed=passed)
    write_json(out / "pseudonorm.json", doc, load_schema("certificate"))
    return passed


def _demo_job(job: JobConfig, out: Path) -> bool:
    name = job.demo
    if name == "pseudonorm":
        return _pseudonorm_job(job, out)
    if job.target.dim != 1 or not job.target.is_norm:
        raise ConfigError("the built-in demos are scalar with a norm target")
    if name == "step":
        return _extension_job(job, demos.step_series(job.domain), out, stage_index=lambda n: 2 ** n)
    if name == "weierstrass":
        return _extension_job(job, demos.weierstrass_series(job.domain), out)
    if name == "xsin":
        return _extension_job(job, demos.xsin(), out)
    return _extension_job(job, demos.identity(), out)


def run(config: dict, out_dir) -> int:
    """Run one job; returns the exit status."""
    try:
        job = JobConfig.from_dict(_merge(DEFAULTS, config))
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if job.command == "extend":
            passed = _extension_job(job, map_from_g_spec(job.g_spec, job.domain, job.target), out)
        elif job.command == "extract":
            passed = _extract_job(job, out)
        elif job.command == "analyze":
            passed = _analyze_job(job, out)
        elif job.command == "roundtrip":
            passed = _roundtrip_job(job, out)
        else:
            passed = _demo_job(job, out)
    except (ConfigError, ExpressionError) as exc:
        log.error("config error: %s", exc)
        return 1
    except (MollificationError, EvaluationDomainError, OutsideDomainError, FloatingPointError,
            OverflowError) as exc:
        log.error("numerical failure: %s", exc)
        return 2
    if not passed:
        log.error("verification failed; see the reports in %s", out_dir)
        return 2
    log.info("done: %s", out_dir)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="baireone", description=__doc__)
    p.add_argument("command", nargs="?", choices=["extend", "extract", "analyze", "roundtrip", "demo"])
    p.add_argument("demo", nargs="?", help="demo name for the demo command")
    p.add_argument("--config", help="JSON job configuration")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--seed", type=int, help="RNG seed for sampled sections")
    p.add_argument("--threads", type=int, help="worker threads for section checks")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {"command": args.command, "demo": args.demo, "seed": args.seed, "threads": args.threads}
    try:
        config = load_config(args.config, overrides)
    except ConfigError as exc:
        log.error("%s", exc)
        return 1
    return run(config, args.out)


if __name__ == "__main__":
    sys.exit(main())
