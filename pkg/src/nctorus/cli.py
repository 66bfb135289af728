"""Config-driven command line front end.

Exit codes: 0 all checks pass, 1 usage or I/O error, 2 numerical validity
failure (monotonicity, positivity, gating), 3 violation of a bound that must
hold for a correct build.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import afk
from . import circle as cd
from . import dirac as dr
from . import gns
from . import liouville as lv
from . import seminorms as sm
from . import weyl

log = logging.getLogger("nctorus")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_BOUND = 0, 1, 2, 3
CATEGORY_CODE = {"numerical": EXIT_NUMERIC, "bound": EXIT_BOUND}

DEFAULTS = {
    "seed": 0,
    "truncation": {"N": 8, "M": 16, "G": 1024},
    "growth": {"nmax": 64},
    "liouville": {"N": 5, "count": 2},
    "state": {"bases": 50, "basis_size": 8, "elements": 100},
    "gns": {"M": 64, "elements": 5, "tol": {"vector_state": 1e-8, "product": 1e-6, "crossed": 1e-8, "tomita": 1e-5}},
    "dirac": {},
    "commutators": {"N_values": [8, 16]},
    "seminorms": {"elements": 4, "kmax": 3, "probe_samples": 4, "G": 4096},
}


class UsageError(Exception):
    pass


# formatting


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def dump_json(obj, indent=0) -> str:
    """JSON with sorted keys and floats at 17 significant digits."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {dump_json(obj[k], indent + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(dump_json(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dump_json(v, indent + 1) for v in obj) + "\n" + end + "]"
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    return fmt(obj)


def config_hash(cfg) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


class Output:
    def __init__(self, out_dir: Path, chash: str, seed: int):
        self.dir = Path(out_dir)
        self.meta = {"config_hash": chash, "seed": seed}
        try:
            self.dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise UsageError(f"cannot create output directory {out_dir}: {exc}") from exc
        self.written = []

    def json(self, name, payload):
        body = dict(_plain(payload))
        body["meta"] = dict(self.meta, file=name)
        self._write(name, dump_json(body) + "\n")

    def csv(self, name, header, rows):
        buf = io.StringIO()
        buf.write(f"# config_hash={self.meta['config_hash']} seed={self.meta['seed']} file={name}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in r])
        self._write(name, buf.getvalue())

    def _write(self, name, text):
        path = self.dir / name
        try:
            path.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot write {path}: {exc}") from exc
        self.written.append(name)
        log.info("wrote %s", path)


def check(name, ok, category="bound", **info):
    return {"check": name, "ok": bool(ok), "category": category, **info}


# configuration


def load_config(path) -> tuple[dict, Path]:
    p = Path(path)
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise UsageError("config must be a JSON object")
    return raw, p.resolve().parent


def resolve(raw: dict) -> dict:
    """Defaults, then preset stage parameters, then explicit keys."""
    cfg = copy.deepcopy(DEFAULTS)
    preset = raw.get("preset")
    if preset is not None:
        if preset not in afk.PRESETS:
            raise UsageError(f"unknown preset {preset!r}; choose from {sorted(afk.PRESETS)}")
        cfg.update(copy.deepcopy(afk.PRESETS[preset]))
    for k, v in raw.items():
        if isinstance(v, dict) and isinstance(cfg.get(k), dict):
            merged = dict(cfg[k])
            merged.update(v)
            cfg[k] = merged
        else:
            cfg[k] = v
    return cfg


def truncation(cfg, section=None) -> gns.Truncation:
    t = dict(cfg["truncation"])
    if section and isinstance(cfg.get(section), dict):
        sec = cfg[section]
        t.update({k: v for k, v in sec.items() if k in ("N", "M", "G")})
        if "M" in sec and "G" not in sec:
            t["G"] = max(int(t.get("G", 0)), 8 * int(sec["M"]))
    try:
        return gns.Truncation(int(t["N"]), int(t["M"]), int(t.get("G", 8 * int(t["M"]))))
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid truncation {t}: {exc}") from exc


class Context:
    def __init__(self, cfg, base: Path, out: Output, jobs: int):
        self.cfg = cfg
        self.base = base
        self.out = out
        self.jobs = max(1, int(jobs))
        self.seed = int(cfg.get("seed", 0))
        self._build = None
        self._md = None
        self._diffeo = None

    def rng(self, stream: int):
        return np.random.default_rng([self.seed, stream])

    def pmap(self, fn, items):
        if self.jobs == 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(self.jobs) as ex:
            return list(ex.map(fn, items))

    def build(self):
        if self._build is None:
            if "stages" not in self.cfg:
                raise UsageError("config needs 'stages' (or a 'preset') to build a diffeomorphism")
            try:
                self._build = afk.build_from_config(self.cfg)
            except lv.InsufficientApproximants as exc:
                raise UsageError(str(exc)) from exc
        return self._build

    def diffeo_file(self):
        """Optional diffeomorphism bundle named by the config."""
        if self._diffeo is None and self.cfg.get("diffeo"):
            p = Path(self.cfg["diffeo"])
            p = p if p.is_absolute() else self.base / p
            try:
                d = json.loads(p.read_text(encoding="utf-8"))
                f = cd.CircleDiffeo.from_json(d)
                H = cd.CircleDiffeo.from_json(d["conjugacy"]) if "conjugacy" in d else None
                beta = float(d["final_rotation"]) if "final_rotation" in d else None
            except OSError as exc:
                raise UsageError(f"cannot read diffeo file {p}: {exc}") from exc
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                if isinstance(exc, cd.MonotonicityError):
                    raise
                raise UsageError(f"malformed diffeo file {p}: {exc}") from exc
            self._diffeo = (f, H, beta)
        return self._diffeo

    def circle_map(self):
        d = self.diffeo_file()
        return d[0] if d else self.build().f

    def modular(self) -> gns.ModularData:
        if self._md is None:
            d = self.diffeo_file()
            if d is None:
                self._md = gns.ModularData.from_build(self.build())
            else:
                f, H, beta = d
                if H is not None:
                    self._md = gns.ModularData.from_conjugacy(H, (beta if beta is not None else f.mean_translation) / 2.0, f)
                elif f.is_rotation():
                    self._md = gns.ModularData.rotation(f.mean_translation / 2.0, f.grid)
                else:
                    raise UsageError("diffeo file has no 'conjugacy' record; only rotations can be used without one")
        return self._md

    def alpha_weyl(self):
        """Exact rational alpha for the Weyl algebra (alpha = rotation / 2)."""
        return Fraction(self.modular().alpha).limit_denominator(1 << 52)


# commands


def cmd_build_diffeo(ctx: Context):
    b = ctx.build()
    nmax = int(ctx.cfg["growth"].get("nmax", 64))
    ok, tab, bounds = afk.contraction_check(b, nmax) if b.K else (True, np.zeros((0, nmax)), np.zeros((0, nmax)))
    bundle = b.f.to_json()
    bundle.update({"conjugacy": b.H.to_json(), "final_rotation": b.rotation_final, "alpha": b.alpha.label})
    ctx.out.json("diffeo.json", bundle)
    rep = b.report()
    rep["contraction_ok"] = ok
    rep["reconstruction_residual"] = [afk.reconstruction_residual(b, k) for k in range(b.K + 1)]
    ctx.out.json("build_report.json", rep)
    g = cd.growth_sequence(b.f, nmax)
    ctx.out.csv("growth.csv", ["n", "gamma"], [(n, g.gamma(n)) for n in range(1, nmax + 1)])
    rows = [(k + 1, n + 1, tab[k, n], bounds[k, n]) for k in range(tab.shape[0]) for n in range(nmax)]
    ctx.out.csv("contraction.csv", ["k", "n", "d1", "bound"], rows)
    return [check("contraction_chain", ok, "bound", stages=b.K, nmax=nmax)]


def cmd_growth(ctx: Context):
    f = ctx.circle_map()
    nmax = int(ctx.cfg["growth"].get("nmax", 64))
    g = cd.growth_sequence(f, nmax)
    n = np.arange(1, nmax + 1)
    logn = np.log(n)
    rows = [(int(k), g.gamma(int(k)), g.gamma(int(k)) / k, (g.gamma(int(k)) / lk) if k > 1 else None) for k, lk in zip(n, logn)]
    ctx.out.csv("growth_table.csv", ["n", "gamma", "gamma_over_n", "gamma_over_log_n"], [[v if v is not None else "" for v in r] for r in rows])
    rep = {"nmax": nmax, "gamma_max": float(g.values.max()), "rotation_number": cd.rotation_number(f)}
    checks = []
    if nmax >= 64:
        mode = ctx.cfg.get("mode", "o_n")
        fit = afk.growth_asymptotics_fit(g, mode)
        rep["fit"] = fit.to_dict()
    if ctx.cfg.get("mode") == "o_log_n" and not ctx.cfg.get("diffeo"):
        b = ctx.build()
        if len(b.m_sequence) >= 2:
            ok, lo, norms, bound = afk.log_growth_check(b, nmax)
            rep["log_growth"] = {"ok": ok, "from": lo, "norms": norms, "bound": bound}
            checks.append(check("log_growth_bound", ok, "bound", start=lo, nmax=nmax))
    ctx.out.json("growth_report.json", rep)
    return checks


def _approx_record(a: lv.Approximant):
    return {"label": a.label, "p": None if a.p is None else str(a.p), "q": None if a.q is None else str(a.q),
            "log2_q": a.log2_q, "bound": a.bound.describe()}


def cmd_liouville(ctx: Context):
    spec = ctx.cfg.get("alpha", "tower:2")
    try:
        x = lv.parse_alpha(spec)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad alpha specification: {exc}") from exc
    opt = ctx.cfg["liouville"]
    N, count = int(opt.get("N", 5)), int(opt.get("count", 1))
    count = min(count, len(x))
    res = lv.check_L(x, N, count)
    rep = {
        "alpha": x.label,
        "approximants": [_approx_record(a) for a in x.approximants],
        "check_L": {"N": N, "count": count, "holds": res.ok, "witnesses": [a.label for a in res.witnesses],
                    "failures": res.failures, "certified_failures": res.certified_failures},
    }
    if "ul" in opt:
        u = opt["ul"]
        r = lv.check_UL(x, int(u["N"]), Fraction(str(u["C"])), Fraction(str(u["eps"])), int(u.get("count", 1)))
        rep["check_UL"] = {"N": int(u["N"]), "C": str(u["C"]), "eps": str(u["eps"]), "holds": r.ok,
                           "witnesses": [a.label for a in r.witnesses], "failures": r.failures}
    ctx.out.json("liouville.json", rep)
    return []


def _random_elements(rng, alpha, count, m_range=3, n_range=2, nterms=6):
    return [weyl.WeylElement.random(rng, alpha, m_range, n_range, nterms) for _ in range(count)]


def cmd_state(ctx: Context):
    md = ctx.modular()
    mu = md.measure()
    a = ctx.alpha_weyl()
    opt = ctx.cfg["state"]
    rng = ctx.rng(1)
    bases = [_random_elements(rng, a, int(opt.get("basis_size", 8))) for _ in range(int(opt.get("bases", 50)))]
    mins = ctx.pmap(lambda B: weyl.gram_positivity_check(B, mu), bases)
    els = _random_elements(rng, a, int(opt.get("elements", 100)))

    def cross(f):
        lhs = weyl.state_omega_mu(weyl.star(f) @ f, mu)
        return abs(lhs - weyl.omega_integral_form(f, mu))

    diffs = ctx.pmap(cross, els)
    rep = {"alpha": str(a), "measure": mu.kind, "gram_min_eigenvalues": mins, "cross_check_max": max(diffs)}
    ctx.out.json("state_report.json", rep)
    return [
        check("state_positivity", min(mins) >= -1e-8, "numerical", min_eigenvalue=min(mins)),
        check("state_formula_agreement", max(diffs) <= 1e-8, "bound", max_difference=max(diffs)),
    ]


def _band_limited(rng, alpha, count, M):
    m = max(1, M // 8)
    return _random_elements(rng, alpha, count, m_range=m, n_range=1, nterms=4)


def cmd_gns(ctx: Context):
    md = ctx.modular()
    tr = truncation(ctx.cfg, "gns")
    a = ctx.alpha_weyl()
    opt = ctx.cfg["gns"]
    tol = dict(DEFAULTS["gns"]["tol"], **opt.get("tol", {}))
    rng = ctx.rng(2)
    els = _band_limited(rng, a, int(opt.get("elements", 5)), tr.M)
    mu = md.measure()
    vs = max(abs(gns.vector_state(f, md, tr) - weyl.state_omega_mu(f, mu)) for f in els)
    tom = max(gns.tomita_check(f, md, tr) for f in els)
    prod = max(gns.product_residual(f, g, md, tr) for f, g in zip(els, els[1:] + els[:1]))
    H = {m: complex(rng.normal(), rng.normal()) / (1 + m * m) for m in range(-2, 3)}
    cross = gns.crossed_product_check(H, md, tr, 1, a)
    rank = gns.cyclicity_rank(md, tr)
    spec = gns.delta_spectrum_report(md, tr)
    rep = {"truncation": tr.to_json(), "vector_state_error": vs, "tomita_residual": tom, "product_residual": prod,
           "crossed_product_residual": cross, "cyclicity_rank": rank, "dim": tr.dim, "delta_spectrum": spec,
           "cocycle_symmetry_residual": max(md.cocycle_symmetry_residual(n, tr.G) for n in range(1, tr.N + 1)),
           "tolerances": tol}
    ctx.out.json("gns_report.json", rep)
    return [
        check("vector_state", vs <= tol["vector_state"], "bound", error=vs),
        check("tomita", tom <= tol["tomita"], "bound", residual=tom),
        check("product", prod <= tol["product"], "bound", residual=prod),
        check("crossed_product", cross <= tol["crossed"], "bound", residual=cross),
        check("cyclicity", rank == tr.dim, "numerical", rank=rank),
    ]


def cmd_dirac(ctx: Context):
    md = ctx.modular()
    tr = truncation(ctx.cfg, "dirac")
    gamma = md.growth(tr.N)
    plain = dr.dirac_untwisted(tr)
    rows = dr.spectrum_rows(plain)
    ctx.out.csv("dirac_spectrum.csv", ["n", "m", "eigenvalue_closed_form", "eigenvalue_numeric"], rows)
    spec_err = max(abs(r[2] - r[3]) for r in rows)
    deformed = dr.dirac_deformed(tr, md)
    rep = dr.resolvent_report(deformed, md, gamma, tr, modified=False, strict=False)
    mod = dr.resolvent_report(dr.dirac_deformed(tr, md, True, gamma), md, gamma, tr, modified=True, strict=False)
    ctx.out.json("resolvent_report.json", {"standard": rep.to_dict(), "modified": mod.to_dict(), "truncation": tr.to_json(),
                                           "spectrum_max_error": spec_err,
                                           "symmetry_residual": max(b.symmetry_residual() for b in deformed)})
    return [
        check("dirac_spectrum", spec_err <= 1e-10, "numerical", max_error=spec_err),
        check("resolvent_bound", rep.ok(), "bound", violations=rep.violations),
        check("resolvent_bound_modified", mod.ok(), "bound", violations=mod.violations),
    ]


def shift_commutator_norm(md, tr, modified, gamma=None):
    blocks = dr.dirac_deformed(tr, md, modified, gamma)
    _, nrm = dr.deformed_commutator(gns.shift_lambda(1, tr), blocks, md, tr)
    return nrm


def cmd_commutators(ctx: Context):
    md = ctx.modular()
    base = truncation(ctx.cfg, "commutators")
    Ns = [int(n) for n in ctx.cfg["commutators"].get("N_values", [8, 16])]
    gamma = md.growth(max(Ns))
    g1 = gamma.gamma(1)
    rows, checks = [], []
    for N in Ns:
        tr = gns.Truncation(N, base.M, base.G)
        std = shift_commutator_norm(md, tr, False)
        mod = shift_commutator_norm(md, tr, True, gamma)
        rows.append((N, std, mod, g1))
        checks.append(check(f"modified_shift_commutator_N{N}", mod <= g1 + 1e-6, "bound", norm=mod, bound=g1))
    ctx.out.csv("shift_commutators.csv", ["N", "standard_norm", "modified_norm", "gamma_1"], rows)
    F = {1: 1.0, -1: 0.5}
    fam, sup_n, sup_df = dr.commutator_multiplication_part(F, md, base)
    ratios = [rows[i + 1][1] / rows[i][1] for i in range(len(rows) - 1)]
    ctx.out.json("commutators.json", {"rows": [dict(zip(("N", "standard", "modified", "gamma_1"), r)) for r in rows],
                                      "standard_doubling_ratios": ratios,
                                      "multiplication_part": {"sup_over_n": sup_n, "sup_zdF": sup_df}})
    return checks


def cmd_seminorms(ctx: Context):
    md = ctx.modular()
    tr = truncation(ctx.cfg, "seminorms")
    opt = ctx.cfg["seminorms"]
    gamma = md.growth(tr.N)
    rng = ctx.rng(3)
    count, kmax = int(opt.get("elements", 4)), int(opt.get("kmax", 3))
    bw = max(2, tr.M // 2 - 4)
    els = [sm.random_smooth_element(rng, md.h_conj, md.alpha, n_range=2, m_range=2, bandwidth=bw, G=tr.G)
           for _ in range(count)]
    table, dens, stars = [], [], []
    for i, f in enumerate(els):
        for k, l, v in sm.profile(f, md.h_conj, kmax, tr).rows():
            table.append((i, k, l, v))
        for k in range(kmax):
            for l in (0, 1):
                lhs, rhs, ok = sm.density_check(f, md.h_conj, k, l, 1, tr)
                dens.append({"element": i, "k": k, "l": l, "lhs": lhs, "rhs": rhs, "ok": ok})
        stars.append(sm.star_symmetry(f, md.h_conj, 2, 0, tr))
    ctx.out.csv("seminorms.csv", ["element", "k", "l", "value"], table)
    bounds = ctx.pmap(lambda f: sm.commutator_bound_check(f, md, gamma, tr), els)
    probe = sm.product_inequality_probe(md.h_conj, md.alpha, 2, int(opt.get("probe_samples", 4)), tr,
                                        seed=ctx.seed, support=1)
    ctx.out.json("seminorm_report.json", {"truncation": tr.to_json(), "density": dens, "commutator_bounds": bounds,
                                          "product_probe": probe, "star_symmetry_max": max(stars),
                                          "elements": [f.to_json() for f in els]})
    return [
        check("density_estimate", all(d["ok"] for d in dens), "bound"),
        check("commutator_seminorm_bound", all(b["pass"] for b in bounds), "bound"),
        check("seminorm_star_symmetry", max(stars) <= 1e-8, "numerical", max_difference=max(stars)),
    ]


COMMANDS = {
    "build-diffeo": cmd_build_diffeo,
    "growth": cmd_growth,
    "liouville-check": cmd_liouville,
    "state-check": cmd_state,
    "gns-check": cmd_gns,
    "dirac": cmd_dirac,
    "commutators": cmd_commutators,
    "seminorms": cmd_seminorms,
}


def exit_code(checks) -> int:
    codes = [CATEGORY_CODE[c["category"]] for c in checks if not c["ok"]]
    return min(codes) if codes else EXIT_OK


def run(command: str, cfg_raw: dict, base: Path, out_dir, jobs: int = 1) -> int:
    cfg = resolve(cfg_raw)
    out = Output(Path(out_dir), config_hash(cfg_raw), int(cfg.get("seed", 0)))
    ctx = Context(cfg, base, out, jobs)
    names = list(COMMANDS) if command == "all" else [command]
    if ctx.cfg.get("diffeo") and "build-diffeo" in names and command == "all":
        names.remove("build-diffeo")
    checks = []
    for name in names:
        log.info("running %s", name)
        checks += [dict(c, command=name) for c in COMMANDS[name](ctx)]
    failures = [c for c in checks if not c["ok"]]
    code = exit_code(checks)
    out.json("summary.json" if command == "all" else f"summary_{command}.json",
             {"command": command, "checks": checks, "failures": failures, "exit_code": code})
    return code


def parser():
    p = argparse.ArgumentParser(prog="nctorus", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=list(COMMANDS) + ["all"])
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", default="nctorus_out", help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="worker threads for sampled checks")
    p.add_argument("--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    try:
        args = parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    try:
        raw, base = load_config(args.config)
        return run(args.command, raw, base, args.out, args.jobs)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (cd.MonotonicityError, gns.PositivityError, afk.ContractionError, sm.MajorantExceeded) as exc:
        print(f"numerical validity failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except dr.BoundViolation as exc:
        print(f"bound violation: {exc}", file=sys.stderr)
        return EXIT_BOUND
    except (ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
