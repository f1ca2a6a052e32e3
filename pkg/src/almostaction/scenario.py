"""Deterministic scenario runner.

A scenario config selects a pipeline and supplies its inputs.  Running it
produces a report: the config echo, serialized intermediates (generated
almost-actions, solutions, matrices), tables derived from those
intermediates, and a verdict.  ``verify`` rederives the tables from the
intermediates and lists every entry that disagrees.

Tables are computed by the same functions in ``run`` and ``verify``, so a
report is checked against exactly the numbers it claims.
"""
from __future__ import annotations

import json
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np
import yaml

from .actions import CylinderAction, RotationAction, action_oracle
from .almost import (AlmostAction, StagePlan, approximation_defect, defect_report,
                     perturb_from_action, uniformize_by_tree)
from .cantor import MAX_DEPTH, CirclePoint, FiniteSample, circle_arc, decode_point, max_distance_codes
from .diagnostics import circle_orbit_almost_action, covariance_defect
from .errors import (AlmostActionError, ConditioningWarning, ConfigError, IntertwiningObstruction,
                     LabellingObstruction)
from .groups import GroupSpec, cayley_ball, parse_word, spec_from_config, word_str
from .instances import instance_rng, noisy_frame, noisy_orthogonal_sum, noisy_projection
from .lifting import (CanonicalEmbedding, MatrixUnitFrame, adj, conditional_fd_lift, lift_orthogonal_sum,
                      norm, project_almost_projection, projection_bound)
from .limits import equicontinuity_modulus, extract_limit_action
from .solver import (StageSolution, _Perms, residual_finiteness_witness, solve_stage,
                     verify_solution)

PIPELINES = ("solve", "witness", "limits", "covariance", "lift")
PRESETS = Path(__file__).with_name("presets")

EXIT_CODES = {
    "ok": 0,
    "config": 2,
    "count_mismatch": 3,
    "gap_violation": 3,
    "labelling_obstruction": 4,
    "intertwining_obstruction": 5,
    "insufficient_data": 6,
    "certificate_failure": 7,
    "verify_mismatch": 8,
    "not_equicontinuous": 9,
    "lifting": 10,
}


def exit_code(kind: str) -> int:
    return EXIT_CODES.get(kind, 1)


# --------------------------------------------------------------------------- config


@dataclass
class ScenarioConfig:
    pipeline: str
    seed: int
    model: str                      # "cantor" or "circle"
    depth: int
    spec: GroupSpec | None
    action: CylinderAction | RotationAction | None
    schedule: list
    eps: float
    radius: int
    tau: float
    match: float
    options: dict = field(default_factory=dict)   # pipeline-specific block
    raw: dict = field(default_factory=dict)


def load_config(path) -> dict:
    """Read a YAML or JSON config file (JSON is valid YAML)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc.strerror}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), f"not valid YAML/JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "config must be a mapping")
    return doc


def preset(name: str) -> dict:
    path = PRESETS / f"{name}.json"
    if not path.exists():
        raise ConfigError("pipeline", f"no preset named {name!r}")
    return json.loads(path.read_text())


def _number(v, path: str) -> float:
    try:
        return float(Fraction(str(v)))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(path, f"expected a number or 'p/q', got {v!r}") from None


def _int(v, path: str, lo: int | None = None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(path, f"must be >= {lo}")
    return v


def parse_config(doc: Mapping, seed: int | None = None) -> ScenarioConfig:
    """Validate a config document; every error names the offending field."""
    doc = dict(doc)
    pipeline = doc.get("pipeline")
    if pipeline not in PIPELINES:
        raise ConfigError("pipeline", f"expected one of {', '.join(PIPELINES)}, got {pipeline!r}")
    if seed is not None:
        doc["seed"] = seed
    s = _int(doc.get("seed", 0), "seed", 0)
    if s >= 1 << 64:
        raise ConfigError("seed", "must fit in 64 bits")
    tol = doc.get("tolerances", {}) or {}
    tau = _number(tol.get("tau", 1e-10), "tolerances.tau")
    opts = doc.get(pipeline, {}) or {}
    if not isinstance(opts, Mapping):
        raise ConfigError(pipeline, "expected a mapping")
    cfg = ScenarioConfig(pipeline, s, "none", 0, None, None, [], 0.0, 0, tau,
                         _number(tol.get("match", 0), "tolerances.match"), dict(opts), doc)
    if pipeline == "lift":
        return cfg

    model = doc.get("model")
    if not isinstance(model, Mapping) or model.get("kind") not in ("cantor", "circle"):
        raise ConfigError("model.kind", "expected 'cantor' or 'circle'")
    cfg.model = model["kind"]
    if cfg.model == "cantor":
        cfg.depth = _int(model.get("depth"), "model.depth", 1)
        if cfg.depth > MAX_DEPTH:
            raise ConfigError("model.depth", f"at most {MAX_DEPTH}")
    refs = doc.get("groups", {}) or {}
    if not isinstance(refs, Mapping):
        raise ConfigError("groups", "expected a mapping of named group nodes")
    if "group" not in doc:
        raise ConfigError("group", "missing group spec or reference")
    cfg.spec = spec_from_config(doc["group"], "group", refs)

    act = doc.get("action")
    if not isinstance(act, Mapping):
        raise ConfigError("action", "missing action block")
    try:
        if cfg.model == "cantor":
            if "generators" not in act:
                raise ConfigError("action.generators", "missing generator images")
            cfg.action = CylinderAction.from_images(cfg.spec, _int(act.get("depth"), "action.depth", 0),
                                                    act["generators"])
        else:
            if "rotations" not in act:
                raise ConfigError("action.rotations", "missing rotation angles")
            cfg.action = RotationAction.from_images(cfg.spec, act["rotations"])
    except ConfigError:
        raise
    except AlmostActionError as exc:
        raise ConfigError("action", str(exc)) from None

    if "eps" in doc:
        cfg.eps = _number(doc["eps"], "eps")
        if cfg.eps <= 0:
            raise ConfigError("eps", "must be positive")
        if cfg.model == "cantor" and cfg.eps < 2.0 ** -cfg.depth:
            raise ConfigError("eps", f"below the resolution 2^-{cfg.depth}")
    elif pipeline in ("solve", "witness", "limits"):
        raise ConfigError("eps", "missing")
    cfg.radius = _int(doc.get("radius", 0), "radius", 0)

    if pipeline in ("solve", "limits"):
        sched = doc.get("schedule")
        if not isinstance(sched, list) or not sched:
            raise ConfigError("schedule", "must be a nonempty list of {n, m, k, c}")
        for i, row in enumerate(sched):
            p = f"schedule[{i}]"
            if not isinstance(row, Mapping):
                raise ConfigError(p, "expected a mapping")
            cfg.schedule.append(StagePlan(*(_int(row.get(key, 0 if key == "c" else None), f"{p}.{key}", 0)
                                            for key in ("n", "m", "k", "c"))))
    if pipeline == "limits":
        _int(opts.get("resolution"), "limits.resolution", 1)
    if pipeline == "covariance" and cfg.model != "circle":
        raise ConfigError("model.kind", "covariance pipeline runs on the circle")
    return cfg


# --------------------------------------------------------------------------- report helpers


def _plain(v):
    """JSON-safe copy: numpy scalars to Python, infinities to strings."""
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, Fraction):
        return str(v)
    return v


def dumps(doc) -> str:
    return json.dumps(_plain(doc), sort_keys=True, indent=1) + "\n"


def _matrix_out(a: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(a)]


def _matrix_in(doc) -> np.ndarray:
    a = np.asarray(doc, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


@dataclass
class RunReport:
    config: dict
    verdict: str
    tables: dict
    intermediates: dict
    timing: dict = field(default_factory=dict)
    error: dict | None = None

    @property
    def exit_code(self) -> int:
        return exit_code("ok" if self.verdict in ("solved", "pass") else self.verdict)

    def bundle(self) -> dict:
        """Everything except wall-clock timing; byte-stable for a fixed config and seed."""
        out = {"config": self.config, "verdict": self.verdict, "tables": self.tables,
               "intermediates": self.intermediates}
        if self.error is not None:
            out["error"] = self.error
        return out

    def write(self, out_dir) -> Path:
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        (d / "report.json").write_text(dumps(self.bundle()))
        (d / "timing.json").write_text(dumps(self.timing))
        for name, rows in self.tables.items():
            if isinstance(rows, list) and rows and isinstance(rows[0], dict):
                _write_csv(d / f"{name}.csv", rows)
        return d / "report.json"


def _write_csv(path: Path, rows: list) -> None:
    import csv
    keys = sorted({k for r in rows for k in r})
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(_plain({k: r.get(k, "") for k in keys}))


# --------------------------------------------------------------------------- pipelines


def _solve_all(cfg: ScenarioConfig, alpha: AlmostAction, beta: CylinderAction, eps: float,
               jobs: int, timing: dict) -> tuple[list, dict]:
    """Per-stage solving, optionally threaded; results come back in schedule order."""

    def one(n):
        t0 = time.perf_counter()
        tries, last = [], None
        for attempt in range(int(cfg.options.get("reseed", 0)) + 1):
            a = alpha if attempt == 0 else _reseeded(cfg, alpha, n, attempt)
            try:
                sol = solve_stage(cfg.spec, beta, a, n, eps)
                return n, sol, None, time.perf_counter() - t0, attempt, a
            except (LabellingObstruction, IntertwiningObstruction) as exc:
                last = exc
                tries.append(exc.kind)
            except AlmostActionError as exc:
                return n, None, exc.to_dict(), time.perf_counter() - t0, attempt, a
        return n, None, last.to_dict(), time.perf_counter() - t0, attempt, None

    ns = alpha.schedule
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(one, ns))
    else:
        results = [one(n) for n in ns]
    sols, fails = [], {}
    for n, sol, err, dt, attempt, used in results:
        timing[f"solve_n{n}"] = dt
        if sol is not None:
            sols.append((sol, attempt, used.to_config() if attempt else None))
        else:
            fails[str(n)] = err
    return sols, fails


def _reseeded(cfg: ScenarioConfig, alpha: AlmostAction, n: int, attempt: int) -> AlmostAction:
    plan = next(p for p in cfg.schedule if p.n == n)
    return perturb_from_action(cfg.action, [plan], cfg.seed + attempt, cfg.depth)


def _solution_out(sol: StageSolution, attempt: int, alpha_doc: dict | None) -> dict:
    out = sol.to_dict()
    out["attempt"] = attempt
    out["alpha"] = alpha_doc
    return out


def _run_solve(cfg: ScenarioConfig, jobs: int, timing: dict) -> tuple[str, dict]:
    t0 = time.perf_counter()
    alpha = perturb_from_action(cfg.action, cfg.schedule, cfg.seed, cfg.depth)
    timing["generate"] = time.perf_counter() - t0
    sols, fails = _solve_all(cfg, alpha, cfg.action, cfg.eps, jobs, timing)
    inter = {"alpha": alpha.to_config(), "failures": fails,
             "solutions": [_solution_out(*x) for x in sols]}
    verdict = "solved" if sols else _first_kind(fails)
    return verdict, inter


def _first_kind(fails: dict) -> str:
    first = min(fails, key=int)
    return fails[first]["kind"]


def _run_witness(cfg: ScenarioConfig, jobs: int, timing: dict) -> tuple[str, dict]:
    ball = cayley_ball(cfg.spec, action_oracle(cfg.action), max(cfg.radius, 1))
    words = [ball.words[k] for k in ball.order]
    wit = residual_finiteness_witness(cfg.spec, cfg.action, words, cfg.eps, cfg.seed, cfg.depth,
                                      radius=int(cfg.options.get("radius", 0)),
                                      count=int(cfg.options.get("count", 0)))
    inter = {"words": [word_str(w) for w in words],
             "sample": [str(p) for p in wit.sample.points],
             "solution": wit.solution.to_dict()}
    return "solved", inter


def _run_limits(cfg: ScenarioConfig, jobs: int, timing: dict) -> tuple[str, dict]:
    alpha = perturb_from_action(cfg.action, cfg.schedule, cfg.seed, cfg.depth)
    res = int(cfg.options["resolution"])
    t0 = time.perf_counter()
    lim = extract_limit_action(cfg.spec, alpha, res)
    timing["extract"] = time.perf_counter() - t0
    sub = alpha.restrict(lim.subsequence)
    sols, fails = _solve_all(cfg, sub, lim.action, cfg.eps, jobs, timing)
    inter = {"alpha": alpha.to_config(), "limit": lim.to_dict(), "failures": fails,
             "solutions": [_solution_out(*x) for x in sols]}
    return ("solved" if sols else _first_kind(fails)), inter


def _covariance_inputs(cfg: ScenarioConfig) -> tuple[list, list]:
    opts = cfg.options
    base = [Fraction(str(b)) for b in opts.get("base", ["0"])]
    if "displacements" in opts:
        disp = [[Fraction(str(x)) for x in row] for row in opts["displacements"]]
    else:
        start = Fraction(str(opts.get("start", "1/100")))
        stages = int(opts.get("stages", 6))
        moved = int(opts.get("moved", 1))
        disp = [[start / 2 ** n] * moved for n in range(stages)]
    return base, disp


def _run_covariance(cfg: ScenarioConfig, jobs: int, timing: dict) -> tuple[str, dict]:
    base, disp = _covariance_inputs(cfg)
    alpha = circle_orbit_almost_action(cfg.action, base, disp)
    return "solved", {"alpha": alpha.to_config()}


def _lift_instances(cfg: ScenarioConfig) -> list[dict]:
    """Generate, lift and serialize the configured matrix instances."""
    o = cfg.options
    kind = o.get("kind", "projection")
    count = int(o.get("instances", 10))
    size = int(o.get("size", 8))
    noise = float(o.get("noise", 0.05))
    out = []
    for i in range(count):
        rng = instance_rng(cfg.seed, i)
        if kind == "projection":
            inst = noisy_projection(rng, size, noise)
            pt, _ = project_almost_projection(inst.noisy, inst.eps + cfg.tau)
            out.append({"kind": kind, "eps": inst.eps, "input": [_matrix_out(inst.noisy)],
                        "output": [_matrix_out(pt)]})
        elif kind == "orthogonal_sum":
            inst = noisy_orthogonal_sum(rng, size, int(o.get("summands", 3)), noise)
            vs, _ = lift_orthogonal_sum(inst.noisy, inst.target, inst.eps)
            out.append({"kind": kind, "eps": inst.eps, "target": _matrix_out(inst.target),
                        "input": [_matrix_out(x) for x in inst.noisy],
                        "output": [_matrix_out(x) for x in vs]})
        elif kind == "fd":
            emb = CanonicalEmbedding((1, 1), (2, 2), ((1, 0), (0, 1)))
            inst = noisy_frame(rng, emb, o.get("multiplicities", [2, 2]), size, noise)
            lifted, _ = conditional_fd_lift(inst.frame, emb, inst.fixed, noise * 4)
            out.append({"kind": kind, "eps": noise * 4,
                        "embedding": {"source": list(emb.source_sizes), "target": list(emb.target_sizes),
                                      "multiplicity": [list(r) for r in emb.multiplicity]},
                        "input": [_units_out(u) for u in inst.frame.units],
                        "fixed": [_units_out(f) for f in inst.fixed],
                        "output": [_units_out(u) for u in lifted.units]})
        else:
            raise ConfigError("lift.kind", f"expected projection, orthogonal_sum or fd, got {kind!r}")
    return out


def _units_out(u: np.ndarray) -> list:
    return [[_matrix_out(u[i, j]) for j in range(u.shape[1])] for i in range(u.shape[0])]


def _units_in(doc) -> np.ndarray:
    a = np.asarray(doc, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def _run_lift(cfg: ScenarioConfig, jobs: int, timing: dict) -> tuple[str, dict]:
    return "solved", {"instances": _lift_instances(cfg)}


_RUNNERS: dict[str, Callable] = {"solve": _run_solve, "witness": _run_witness, "limits": _run_limits,
                                 "covariance": _run_covariance, "lift": _run_lift}


# --------------------------------------------------------------------------- tables


def _sample_from(doc: list, n: int) -> FiniteSample:
    return FiniteSample(tuple(decode_point(t) for t in doc), n)


def _solution_rows(cfg: ScenarioConfig, alpha: AlmostAction, solutions: list) -> list[dict]:
    rows = []
    for s in solutions:
        n = int(s["n"])
        a = AlmostAction.from_config(cfg.spec, s["alpha"]) if s.get("alpha") else alpha
        st = a.stage(n)
        perms = {parse_word(g)[0]: np.asarray(p, dtype=np.int64) for g, p in s["perms"].items()}
        sol = StageSolution(n, st.sample, perms, int(s["partition_depth"]), {}, {})
        violations = len(verify_solution(cfg.spec, sol))
        for g in sorted(perms, key=str):
            d = st.sample.max_distance(perms[g], st.perm((g,)))
            bound = 2.0 ** -sol.partition_depth * (2 if g.stable else 1)
            rows.append({"n": n, "generator": str(g), "partition_depth": sol.partition_depth,
                         "distance": d, "bound": bound, "within": bool(d <= bound),
                         "relation_violations": violations})
    return rows


def derive_tables(cfg: ScenarioConfig, inter: Mapping) -> dict:
    """Every reported number, recomputed from the intermediates."""
    p = cfg.pipeline
    if p == "lift":
        return {"lift": _lift_rows(inter["instances"])}
    if p == "witness":
        return _witness_tables(cfg, inter)
    alpha = AlmostAction.from_config(cfg.spec, inter["alpha"])
    if p == "covariance":
        return {"covariance": _covariance_rows(cfg, alpha)}
    tables = {"solutions": _solution_rows(cfg, alpha, inter["solutions"]),
              "failures": [{"n": int(n), "kind": e["kind"]} for n, e in sorted(inter["failures"].items(),
                                                                               key=lambda kv: int(kv[0]))]}
    if p == "solve":
        rep = defect_report(alpha, cfg.action)
        tables["defects"] = rep.to_rows()
        if cfg.radius:
            _, urep = uniformize_by_tree(alpha, cfg.radius, action_oracle(cfg.action))
            tables["uniform_defects"] = [{"n": int(n), "kind": k, "value": v}
                                         for n, kinds in urep.summary()["per_stage"].items()
                                         for k, v in sorted(kinds.items())]
    else:
        lim = inter["limit"]
        limit = CylinderAction.from_config(cfg.spec, lim["limit"])
        res = int(cfg.options["resolution"])
        tables["moduli"] = [{"gamma": row.word, "c": c, "modulus": v}
                            for g in cfg.spec.generator_symbols()
                            for row in [equicontinuity_modulus(alpha, (g,), res)]
                            for c, v in enumerate(row.moduli, start=1)]
        conv = []
        for n in lim["subsequence"]:
            st = alpha.stage(n)
            for g in cfg.spec.generator_symbols():
                img = limit.act_codes((g,), st.sample.codes, st.sample.depth)
                conv.append({"n": n, "gamma": str(g),
                             "value": max_distance_codes(st.sample.codes[st.perm((g,))], img, st.sample.depth)})
        tables["convergence"] = conv
        tables["limit_relation_violations"] = len(limit.violations())
    return tables


def _witness_tables(cfg: ScenarioConfig, inter: Mapping) -> dict:
    sample = _sample_from(inter["sample"], 0)
    s = inter["solution"]
    perms = {parse_word(g)[0]: np.asarray(p, dtype=np.int64) for g, p in s["perms"].items()}
    ev = _Perms(cfg.spec, perms, len(sample))
    cert = []
    for text in inter["words"]:
        w = parse_word(text)
        img = cfg.action.act_codes(w, sample.codes, sample.depth)
        cert.append({"gamma": text, "value": max_distance_codes(img, sample.codes[ev.evaluate(w)], sample.depth)})
    worst = max((r["value"] for r in cert), default=0.0)
    return {"certificate": cert, "max_defect": worst, "eps": cfg.eps, "below_eps": bool(worst < cfg.eps),
            "size": len(sample), "relation_violations": len(ev.violations())}


def _arc_to_zero(x: CirclePoint) -> float:
    return float(circle_arc(x.position, Fraction(0)))


def _covariance_rows(cfg: ScenarioConfig, alpha: AlmostAction) -> list[dict]:
    fname = cfg.options.get("function", "arc_to_zero")
    fns = {"arc_to_zero": _arc_to_zero, "constant": lambda x: 0.0}
    if fname not in fns:
        raise ConfigError("covariance.function", f"expected one of {', '.join(fns)}")
    f = fns[fname]
    rows = []
    for n in alpha.schedule:
        for g in cfg.spec.generator_symbols():
            rows.append({"n": n, "gamma": str(g),
                         "covariance": covariance_defect(alpha, n, cfg.action, f, (g,)),
                         "approximation": float(approximation_defect(alpha, n, cfg.action, (g,)))})
    return rows


def _lift_rows(instances: list) -> list[dict]:
    rows = []
    for i, inst in enumerate(instances):
        kind, eps = inst["kind"], inst["eps"]
        if kind == "projection":
            p, pt = _matrix_in(inst["input"][0]), _matrix_in(inst["output"][0])
            rows.append({"i": i, "kind": kind, "input_defect": norm(p @ p - p),
                         "idempotent": norm(pt @ pt - pt), "hermitian": norm(pt - adj(pt)),
                         "distance": norm(pt - p), "bound": float(projection_bound(eps)),
                         "rank_out": int(round(np.trace(pt).real)),
                         "rank_in": int(np.sum(np.linalg.eigvalsh((p + adj(p)) / 2) > 0.5))})
        elif kind == "orthogonal_sum":
            v = _matrix_in(inst["target"])
            vs = [_matrix_in(x) for x in inst["input"]]
            out = [_matrix_in(x) for x in inst["output"]]
            rows.append({"i": i, "kind": kind, "input_defect": eps,
                         "sum": norm(sum(out) - v),
                         "partial_isometry": max(norm(o @ adj(o) @ o - o) for o in out),
                         "distance": max(norm(o - x) for o, x in zip(out, vs)),
                         "bound": 10 * eps})
        else:
            e = inst["embedding"]
            emb = CanonicalEmbedding(tuple(e["source"]), tuple(e["target"]),
                                     tuple(tuple(r) for r in e["multiplicity"]))
            frame = MatrixUnitFrame(emb.target_sizes, [_units_in(u) for u in inst["input"]])
            out = MatrixUnitFrame(emb.target_sizes, [_units_in(u) for u in inst["output"]])
            fixed = [_units_in(f) for f in inst["fixed"]]
            agree = max(norm(emb.image(out.units, m, a, b) - fixed[m][a, b])
                        for m, l in enumerate(emb.source_sizes) for a in range(l) for b in range(l))
            rows.append({"i": i, "kind": kind, "input_defect": frame.relation_defect(),
                         "relations": out.relation_defect(), "agreement": agree,
                         "distance": max(float(np.max(np.abs(a - b))) for a, b in zip(out.units, frame.units))})
    return rows


# --------------------------------------------------------------------------- run / verify


def run(doc: Mapping, seed: int | None = None, jobs: int = 1, strict: bool = False) -> RunReport:
    """Execute the configured pipeline.

    Obstructions do not raise: they become the verdict, with the error
    serialized in the report.  Config errors do raise.
    """
    cfg = parse_config(doc, seed)
    echo = _plain(dict(cfg.raw, seed=cfg.seed))
    timing: dict[str, float] = {}
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        if strict:
            warnings.simplefilter("error", ConditioningWarning)
        try:
            verdict, inter = _RUNNERS[cfg.pipeline](cfg, max(1, jobs), timing)
        except ConditioningWarning as w:
            timing["total"] = time.perf_counter() - t0
            return RunReport(echo, "lifting", {}, {}, timing, {"kind": "lifting", "message": str(w)})
        except ConfigError:
            raise
        except AlmostActionError as exc:
            timing["total"] = time.perf_counter() - t0
            return RunReport(echo, exc.kind, {}, {}, timing, exc.to_dict())
        tables = _plain(derive_tables(cfg, inter))
    timing["total"] = time.perf_counter() - t0
    rep = RunReport(echo, verdict, tables, _plain(inter), timing)
    if verdict == "solved" and cfg.pipeline == "solve" and not _all_within(tables):
        rep.verdict = "relation_violation"
    return rep


def _all_within(tables: dict) -> bool:
    return all(r["within"] and r["relation_violations"] == 0 for r in tables.get("solutions", []))


@dataclass(frozen=True)
class Mismatch:
    path: str
    recorded: Any
    recomputed: Any

    def to_dict(self) -> dict:
        return {"path": self.path, "recorded": self.recorded, "recomputed": self.recomputed}


def verify(bundle: Mapping, tau: float | None = None) -> list[Mismatch]:
    """Recompute the tables of a report bundle and list every disagreement.

    The generated almost-action (solve and limits pipelines) is also
    regenerated from the seed, so a bundle from another machine checks the
    determinism of generation too.
    """
    for key in ("config", "tables", "intermediates"):
        if key not in bundle:
            raise ConfigError(key, "bundle is missing this section")
    cfg = parse_config(bundle["config"])
    tau = cfg.tau if tau is None else tau
    inter = bundle["intermediates"]
    out: list[Mismatch] = []
    if not inter:
        return out if not bundle["tables"] else [Mismatch("intermediates", "missing", "required")]
    if cfg.pipeline in ("solve", "limits"):
        regen = _plain(perturb_from_action(cfg.action, cfg.schedule, cfg.seed, cfg.depth).to_config())
        _diff("intermediates.alpha", inter.get("alpha"), regen, tau, out)
    try:
        fresh = _plain(derive_tables(cfg, inter))
    except AlmostActionError as exc:   # edited intermediates that no longer parse
        out.append(Mismatch("intermediates", exc.kind, str(exc)))
        return out
    _diff("tables", bundle["tables"], fresh, tau, out)
    return out


def _diff(path: str, a, b, tau: float, out: list) -> None:
    if isinstance(a, dict) and isinstance(b, dict):
        for k in sorted(set(a) | set(b)):
            if k not in a or k not in b:
                out.append(Mismatch(f"{path}.{k}", a.get(k, "<missing>"), b.get(k, "<missing>")))
            else:
                _diff(f"{path}.{k}", a[k], b[k], tau, out)
    elif isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            out.append(Mismatch(f"{path}", f"{len(a)} entries", f"{len(b)} entries"))
            return
        for i, (x, y) in enumerate(zip(a, b)):
            _diff(f"{path}[{i}]", x, y, tau, out)
    elif isinstance(a, bool) or isinstance(b, bool):
        if a is not b:
            out.append(Mismatch(path, a, b))
    elif isinstance(a, (int, float)) and isinstance(b, (int, float)):
        if not abs(a - b) <= tau:
            out.append(Mismatch(path, a, b))
    elif a != b:
        out.append(Mismatch(path, a, b))


def load_bundle(path) -> dict:
    p = Path(path)
    if p.is_dir():
        p = p / "report.json"
    try:
        return json.loads(p.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(str(path), f"cannot read bundle: {exc}") from None
