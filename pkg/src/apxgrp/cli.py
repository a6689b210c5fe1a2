"""``apxgrp`` experiment harness.

Usage::

    apxgrp <subcommand> --config run.toml [--out report.json] [--threads N]

Each run writes one JSON report ``{"config", "payload", "meta"}``. Only
``meta`` (wall clock, thread count, version) may differ between reruns of the
same config. ``sweep``/``cayley`` also write the table as CSV next to the
JSON file.

Exit codes: 0 success, 2 config/usage error, 3 resource budget exceeded,
4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from apxgrp import __version__, cayley, setops, structure
from apxgrp.errors import ApxGrpError, InvariantViolation, UsageError
from apxgrp.families import UNIPOTENT_LOWER, UNIPOTENT_UPPER, FamilySpec
from apxgrp.ffmat import MatSL, check_prime, sl_order

log = logging.getLogger("apxgrp")

SUBCOMMANDS = ("growth", "certify", "structure", "involved", "lp", "diam", "girth", "gap", "sweep", "cayley")

DEFAULTS = {
    "n": 2,
    "seed": 0,
    "budget": setops.DEFAULT_BUDGET,
    "tolerance": 0.05,
    "iter_cap": cayley.DEFAULT_ITER_CAP,
    "residual": cayley.DEFAULT_RESIDUAL,
    "m": [1],
    "conjugators": "auto",
    "fail_on_violation": "full_group",
}


@dataclass
class ExperimentConfig:
    n: int
    p: int | None
    p_list: list[int]
    family: FamilySpec
    knobs: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> ExperimentConfig:
        exp = dict(raw.get("experiment", {}))
        fam = raw.get("family")
        if fam is None:
            raise UsageError("config needs a [family] table")
        knobs = {k: exp.get(k, v) for k, v in DEFAULTS.items()}
        extra = set(exp) - set(DEFAULTS) - {"p", "p_list", "torus_anchor", "output"}
        if extra:
            raise UsageError(f"unknown [experiment] keys: {sorted(extra)}")
        if "torus_anchor" in exp:
            knobs["torus_anchor"] = exp["torus_anchor"]
        n = int(knobs.pop("n"))
        if n < 2:
            raise UsageError("n must be >= 2")
        p = exp.get("p")
        p_list = exp.get("p_list", [] if p is None else [p])
        if not isinstance(p_list, list):
            raise UsageError("p_list must be a list of primes")
        p_list = [check_prime(int(q)) for q in p_list]
        if p is not None:
            p = check_prime(int(p))
        m = knobs["m"]
        knobs["m"] = [int(x) for x in (m if isinstance(m, list) else [m])]
        if any(x < 1 for x in knobs["m"]):
            raise UsageError("powers m must be >= 1")
        for key in ("budget", "iter_cap"):
            knobs[key] = int(knobs[key])
        for key in ("tolerance", "residual"):
            knobs[key] = float(knobs[key])
        fam = dict(fam)
        if fam.get("kind") == "random":
            fam.setdefault("seed", int(knobs["seed"]))
        return cls(n=n, p=p, p_list=p_list, family=FamilySpec.from_dict(fam), knobs=knobs)

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise UsageError(f"invalid TOML in {path}: {exc}") from exc
        return cls.from_dict(raw)

    def single_p(self) -> int:
        if self.p is not None:
            return self.p
        if len(self.p_list) == 1:
            return self.p_list[0]
        raise UsageError("this subcommand needs a single prime 'p'")

    def echo(self) -> dict:
        d = {"n": self.n, "p": self.p, "p_list": self.p_list, "family": self.family.to_dict()}
        d.update(self.knobs)
        return d


# -- subcommands ----------------------------------------------------------------


def _build_set(cfg: ExperimentConfig):
    p = cfg.single_p()
    return cfg.family.build(p, cfg.n, budget=cfg.knobs["budget"])


def cmd_growth(cfg: ExperimentConfig) -> dict:
    a = _build_set(cfg)
    budget = cfg.knobs["budget"]
    rep = setops.growth_report(a, budget=budget)
    wit = setops.certify_approximate(a, budget=budget)
    rep.greedy_k = int(wit.K)
    _check_growth_invariants(a, rep, wit, budget)
    return {"growth": rep.to_dict(), "certificate": wit.to_dict()}


def _check_growth_invariants(a, rep, wit, budget) -> None:
    if not rep.size1 <= rep.size2 <= rep.size3:
        raise InvariantViolation("|A| <= |A^2| <= |A^3| failed for a symmetric set with identity")
    if not wit.X.is_symmetric() or len(wit.X) > wit.K:
        raise InvariantViolation("certificate X is not symmetric or exceeds K")
    if rep.size3 > wit.K**2 * rep.size1:
        raise InvariantViolation("|A^3| <= K^2 |A| failed for the greedy K")


def cmd_certify(cfg: ExperimentConfig) -> dict:
    a = _build_set(cfg)
    budget = cfg.knobs["budget"]
    wit = setops.certify_approximate(a, budget=budget)
    a2 = setops.product(a, a, budget=budget)
    out = wit.to_dict()
    out["X"] = [m.rows() for m in wit.X]
    out["set_size"] = len(a)
    out["product_size"] = len(a2)
    out["verified"] = bool(setops.product(wit.X, a, budget=budget).contains_codes(a2.codes).all())
    if not out["verified"]:
        raise InvariantViolation("certificate does not cover A·A")
    return {"certificate": out}


def _torus(cfg: ExperimentConfig, a) -> structure.TorusHandle | None:
    if "torus_anchor" in cfg.knobs:
        p = cfg.single_p()
        rows = [[int(x) % p for x in r] for r in cfg.knobs["torus_anchor"]]
        return structure.TorusHandle(MatSL.from_rows(rows, p))
    t = structure.default_torus(cfg.n, cfg.single_p())
    if t is None:
        tori = structure.enumerate_involved_tori(a, budget=cfg.knobs["budget"])
        t = tori[0] if tori else None
    return t


def _conjugators(cfg: ExperimentConfig, a):
    mode = cfg.knobs["conjugators"]
    if mode == "auto":
        mode = "generators" if cfg.family.kind in ("ball", "mod_p_reduction", "random") else "set"
    if mode == "set":
        return a
    if mode == "generators":
        return cfg.family.generating_set(cfg.single_p(), cfg.n).elements
    raise UsageError(f"conjugators must be 'auto', 'set' or 'generators', got {mode!r}")


def _lp_block(cfg: ExperimentConfig, a, t) -> list[dict]:
    out = []
    if t is None or len(a) < 2:
        return out
    budget = cfg.knobs["budget"]
    cls = structure.ConjClassHandle.of(t.anchor)
    for m in cfg.knobs["m"]:
        for rep in (
            structure.lp_exponent(a, m, t, budget=budget),
            structure.lp_exponent(a, m, t, kind="deficient", budget=budget),
            structure.lp_exponent(a, m, cls, budget=budget),
        ):
            d = rep.to_dict()
            d["within_tolerance"] = abs(rep.measured_exponent - rep.predicted_exponent) <= cfg.knobs["tolerance"]
            out.append(d)
    return out


def _census(cfg: ExperimentConfig, a) -> dict:
    budget = cfg.knobs["budget"]
    tori = structure.enumerate_involved_tori(a, budget=budget)
    cnt = structure.count_involved_vs_bound(a, budget=budget)
    return {
        "involved_tori": len(tori),
        "anchors": [t.anchor.rows() for t in tori],
        "count_vs_bound": cnt.to_dict(),
    }


def cmd_structure(cfg: ExperimentConfig) -> dict:
    a = _build_set(cfg)
    budget = cfg.knobs["budget"]
    p = cfg.single_p()
    census = _census(cfg, a)
    viol = structure.check_conjugation_invariance(a, _conjugators(cfg, a), budget=budget)
    full = len(a) == sl_order(cfg.n, p)
    if viol and full and cfg.knobs["fail_on_violation"] == "full_group":
        raise InvariantViolation(f"{len(viol)} conjugation-invariance violations on the full group")
    t = _torus(cfg, a)
    regular = {str(m): str(structure.regular_proportion(a, m, budget=budget)) for m in cfg.knobs["m"]}
    deficient = {}
    if t is not None:
        deficient = {str(m): structure.deficient_count(a, m, t, budget=budget) for m in cfg.knobs["m"]}
    return {
        "set_size": len(a),
        "full_group": full,
        "census": census,
        "violations": [v.to_dict() for v in viol],
        "torus_anchor": None if t is None else t.anchor.rows(),
        "lp": _lp_block(cfg, a, t),
        "regular_proportion": regular,
        "deficient_counts": deficient,
    }


def cmd_involved(cfg: ExperimentConfig) -> dict:
    a = _build_set(cfg)
    return {"set_size": len(a), "census": _census(cfg, a)}


def cmd_lp(cfg: ExperimentConfig) -> dict:
    a = _build_set(cfg)
    t = _torus(cfg, a)
    return {"set_size": len(a), "torus_anchor": None if t is None else t.anchor.rows(), "lp": _lp_block(cfg, a, t)}


def _primes(cfg: ExperimentConfig) -> list[int]:
    return cfg.p_list if cfg.p_list else [cfg.single_p()]


def _gens(cfg: ExperimentConfig, p: int):
    return cfg.family.generating_set(p, cfg.n)


def cmd_diam(cfg: ExperimentConfig) -> dict:
    rows = []
    for p in _primes(cfg):
        st = cayley.diameter(_gens(cfg, p), budget=cfg.knobs["budget"])
        rows.append({"p": p, **st.to_dict()})
    return {"diameter": rows}


def cmd_girth(cfg: ExperimentConfig) -> dict:
    return {"girth": [{"p": p, "girth": cayley.girth(_gens(cfg, p), budget=cfg.knobs["budget"])} for p in _primes(cfg)]}


def cmd_gap(cfg: ExperimentConfig) -> dict:
    rows = []
    for p in _primes(cfg):
        rep = cayley.spectral_gap(
            _gens(cfg, p), iter_cap=cfg.knobs["iter_cap"], residual_tol=cfg.knobs["residual"], budget=cfg.knobs["budget"]
        )
        rows.append(rep.to_dict())
    return {"gap": rows}


def _int_generators(cfg: ExperimentConfig) -> list:
    fam = cfg.family
    if "generators" in fam.params:
        return fam.params["generators"]
    if fam.kind == "random" or "seed" in fam.params:
        raise UsageError("sweep needs integer generators (random generators are not defined over Z)")
    return [UNIPOTENT_UPPER, UNIPOTENT_LOWER]


def cmd_sweep(cfg: ExperimentConfig) -> dict:
    table = cayley.sweep(
        _int_generators(cfg),
        cfg.p_list,
        iter_cap=cfg.knobs["iter_cap"],
        residual_tol=cfg.knobs["residual"],
        budget=cfg.knobs["budget"],
    )
    return table.to_dict()


COMMANDS = {
    "growth": cmd_growth,
    "certify": cmd_certify,
    "structure": cmd_structure,
    "involved": cmd_involved,
    "lp": cmd_lp,
    "diam": cmd_diam,
    "girth": cmd_girth,
    "gap": cmd_gap,
    "sweep": cmd_sweep,
    "cayley": cmd_sweep,
}


# -- reports --------------------------------------------------------------------


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def payload_bytes(report: dict) -> bytes:
    """Canonical serialization of the reproducible part of a report."""
    return json.dumps(report["payload"], sort_keys=True, separators=(",", ":")).encode()


def run(subcommand: str, cfg: ExperimentConfig, threads: int | None = None) -> dict:
    if subcommand not in COMMANDS:
        raise UsageError(f"unknown subcommand {subcommand!r}")
    setops.set_threads(threads)
    t0 = time.perf_counter()
    payload = COMMANDS[subcommand](cfg)
    wall = time.perf_counter() - t0
    return {
        "subcommand": subcommand,
        "config": _clean(cfg.echo()),
        "payload": _clean(payload),
        "meta": {"wall_clock_s": wall, "version": __version__, "threads": setops.get_threads()},
    }


def write_csv(rows: list[dict], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cayley.CSV_COLUMNS, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r[k]) for k in cayley.CSV_COLUMNS})


def write_report(report: dict, out: Path | None) -> None:
    text = json.dumps(report, sort_keys=True, indent=2)
    if out is None:
        sys.stdout.write(text + "\n")
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text + "\n")
    if report["subcommand"] in ("sweep", "cayley"):
        write_csv(report["payload"]["rows"], out.with_suffix(".csv"))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="apxgrp", description="Approximate subgroups of SL_n(F_p): growth, structure and Cayley-graph experiments.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, help="TOML experiment config")
    ap.add_argument("--out", help="JSON report path (default: stdout)")
    ap.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _emit_error(exc: Exception, code: int) -> int:
    err = {"error": {"type": type(exc).__name__, "message": str(exc), "exit_code": code}}
    sys.stderr.write(json.dumps(err) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = ExperimentConfig.load(args.config)
        report = run(args.subcommand, cfg, threads=args.threads)
        write_report(report, Path(args.out) if args.out else None)
    except ApxGrpError as exc:
        return _emit_error(exc, exc.exit_code)
    except (ValueError, TypeError, KeyError) as exc:
        return _emit_error(exc, 2)
    except MemoryError as exc:
        return _emit_error(exc, 3)
    except AssertionError as exc:
        return _emit_error(exc, 4)
    log.info("wrote %s report in %.2fs", args.subcommand, report["meta"]["wall_clock_s"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
