"""Acceptance criteria, each at its stated tolerance and runtime limit.

Every test records a one-line detail; conftest prints PASS/FAIL per criterion.
"""
import json
import time
from fractions import Fraction

import numpy as np
import pytest

import oracles
from nctorus import afk, cli, dirac, gns
from nctorus import circle as cd
from nctorus import liouville as lv
from nctorus import seminorms as sm
from nctorus import weyl as wy


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def finish(record_property, ok, limit, elapsed, **info):
    parts = [f"{k}={v:.3e}" if isinstance(v, float) else f"{k}={v}" for k, v in info.items()]
    parts.append(f"time={elapsed:.1f}s" + (f"/{limit}s" if limit is not None else ""))
    detail = ", ".join(parts)
    record_property("detail", detail)
    print(detail)
    assert ok, detail
    if limit is not None:
        assert elapsed < limit, f"runtime {elapsed:.1f}s exceeds {limit}s"


@pytest.mark.criterion(1, "Dirac spectrum")
def test_criterion_01_dirac_spectrum(record_property):
    with Timer() as t:
        tr = gns.Truncation(16, 16, 4096)
        err, zero_mult = 0.0, None
        for b in dirac.dirac_untwisted(tr):
            ev = np.linalg.eigvalsh(b.matrix)
            err = max(err, float(np.abs(ev - oracles.dirac_block_spectrum(b.n, 16)).max()))
            if b.n == 0:
                zero_mult = int((np.abs(ev) < 1e-10).sum())
    finish(record_property, err <= 1e-10 and zero_mult == 2, 10, t.elapsed, max_error=err, zero_multiplicity=zero_mult)


@pytest.mark.criterion(2, "Tracial degeneracy")
def test_criterion_02_tracial(record_property):
    with Timer() as t:
        alpha = Fraction(3, 17)
        tr = gns.Truncation(8, 16, 1024)
        md = gns.ModularData.rotation(float(alpha), tr.G)
        delta_one = all(np.all(md.delta(n, tr.G) == 1.0) for n in tr.blocks)
        same = all(np.array_equal(a.matrix, b.matrix)
                   for a, b in zip(dirac.dirac_untwisted(tr), dirac.dirac_deformed(tr, md)))
        rng = np.random.default_rng(2)
        els = [wy.WeylElement.random(rng, alpha, 3, 2, 6) for _ in range(20)]
        tom = max(gns.tomita_check(f, md, tr) for f in els)
        mu = md.measure()
        # omega_mu is exactly the trace; its GNS vector form carries only rounding
        exact = all(wy.state_omega_mu(f, mu) == wy.trace(f) for f in els)
        vec = max(abs(gns.vector_state(f, md, tr) - wy.trace(f)) for f in els)
    finish(record_property, delta_one and same and tom < 1e-8 and exact and vec < 1e-8, 10, t.elapsed,
           delta_identically_one=delta_one, deformed_equals_standard=same, tomita=tom,
           state_is_trace=exact, vector_state_minus_trace=vec)


@pytest.mark.criterion(3, "Resolvent bound, AFK o(n) build")
def test_criterion_03_resolvent(record_property):
    with Timer() as t:
        b = afk.build_from_config(afk.PRESETS["o_n"])
        md = gns.ModularData.from_build(b)
        tr = gns.Truncation(64, 16, 4096)
        gamma = md.growth(64)
        rep = dirac.resolvent_report(dirac.dirac_deformed(tr, md), md, gamma, tr, strict=False)
        slack = min(bd + 1e-8 - x for x, bd in zip(rep.norms, rep.bounds))
    finish(record_property, b.K == 6 and rep.ok() and rep.verdict == "PASS", 300, t.elapsed,
           K=b.K, min_slack=slack, verdict=rep.verdict)


@pytest.mark.criterion(4, "Contraction chain")
def test_criterion_04_contraction(record_property):
    with Timer() as t:
        b = afk.build_from_config(afk.PRESETS["o_n"])
        ok, tab, bounds = afk.contraction_check(b, 64)
        gated = all(s.gate_ok and s.slack is not None and s.slack >= 0 for s in b.stages)
        exact = all(isinstance(s.slack, Fraction) for s in b.stages)
        ratio = float((tab / bounds).max())
    finish(record_property, ok and gated and exact and b.K == 6, 120, t.elapsed,
           max_ratio_to_bound=ratio, gates_exact=exact, gates_ok=gated)


@pytest.mark.criterion(5, "o(log n) variant")
def test_criterion_05_log_growth(record_property):
    with Timer() as t:
        b = afk.build_from_config(afk.PRESETS["o_log_n"])
        ul = all(s.ul_ok for s in b.stages)
        ok, lo, norms, bound = afk.log_growth_check(b, 256)
        margin = float((bound - norms).min()) if norms.size else float("nan")
    finish(record_property, ok and ul and norms.size > 0, 300, t.elapsed, m2=lo, min_margin=margin, ul_gated=ul)


@pytest.mark.criterion(6, "State positivity")
def test_criterion_06_state(record_property):
    with Timer() as t:
        b = afk.build_from_config(afk.PRESETS["o_n"])
        md = gns.ModularData.from_build(b)
        mu = md.measure()
        alpha = Fraction(md.alpha).limit_denominator(1 << 52)
        rng = np.random.default_rng(6)
        mins = [wy.gram_positivity_check([wy.WeylElement.random(rng, alpha, 3, 2, 6) for _ in range(8)], mu)
                for _ in range(50)]
        diffs = []
        for _ in range(100):
            f = wy.WeylElement.random(rng, alpha, 3, 2, 6)
            diffs.append(abs(wy.state_omega_mu(wy.star(f) @ f, mu) - wy.omega_integral_form(f, mu)))
    finish(record_property, min(mins) >= -1e-8 and max(diffs) <= 1e-8, 60, t.elapsed,
           min_eigenvalue=min(mins), max_formula_difference=max(diffs))


@pytest.mark.criterion(7, "GNS consistency at M = 64")
def test_criterion_07_gns(record_property):
    with Timer() as t:
        b = afk.build_from_config(afk.PRESETS["o_n"])
        md = gns.ModularData.from_build(b)
        tr = gns.Truncation(8, 64, 4096)
        alpha = Fraction(md.alpha).limit_denominator(1 << 52)
        mu = md.measure()
        rng = np.random.default_rng(7)
        els = [wy.WeylElement.random(rng, alpha, 8, 1, 4) for _ in range(6)]
        vs = max(abs(gns.vector_state(f, md, tr) - wy.state_omega_mu(f, mu)) for f in els)
        prod = max(gns.product_residual(f, g, md, tr) for f, g in zip(els, els[1:] + els[:1]))
        H = {m: complex(rng.normal(), rng.normal()) / (1 + m * m) for m in range(-3, 4)}
        cross = max(gns.crossed_product_check(H, md, tr, k, alpha) for k in (1, 2))
    finish(record_property, vs <= 1e-8 and prod <= 1e-6 and cross < 1e-8, 120, t.elapsed,
           vector_state=vs, product=prod, crossed_product=cross)


@pytest.mark.criterion(8, "Commutator dichotomy")
def test_criterion_08_dichotomy(record_property):
    with Timer() as t:
        b = afk.build_from_config(afk.PRESETS["growth"])
        md = gns.ModularData.from_build(b)
        gamma = md.growth(64)
        g1 = gamma.gamma(1)
        std = {N: dirac.weighted_shift_norm(md, gns.Truncation(N, 16, 4096)) for N in (16, 32)}
        ratio = std[32] / std[16]
        mod = {}
        for N in (16, 32, 64):
            tr = gns.Truncation(N, 16, 4096)
            blocks = dirac.dirac_deformed(tr, md, True, gamma)
            mod[N] = dirac.deformed_commutator(gns.shift_lambda(1, tr), blocks, md, tr)[1]
        worst = max(mod.values())
    finish(record_property, ratio > 1.5 and worst <= g1 + 1e-6, 180, t.elapsed,
           standard_doubling_ratio=ratio, modified_max=worst, gamma_1=g1)


@pytest.mark.criterion(9, "a-sequence identity")
def test_criterion_09_a_sequence(record_property, md_o_n):
    gamma = md_o_n.growth(256)
    with Timer() as t:
        N = 256
        a = dirac.a_sequence(gamma, N, modified=True)
        g = gamma.as_array(with_zero=True)
        n = np.arange(-N + 1, N + 1)
        lhs = np.abs(a[n - 1 + N] - a[n + N]) * g[np.abs(n)]
        err = float(np.abs(lhs - 1).max())
        unit = np.array_equal(dirac.a_sequence(cd.GrowthTable.constant(N), N, True), np.arange(-N, N + 1).astype(float))
    finish(record_property, err <= 1e-12 and unit, 1, t.elapsed, max_error=err, unit_gamma_recovers_n=unit)


@pytest.mark.criterion(10, "Seminorm commutator bound and density")
def test_criterion_10_appendix(record_property):
    with Timer() as t:
        b = afk.build_from_config(afk.PRESETS["o_n"])
        md = gns.ModularData.from_build(b)
        tr = gns.Truncation(32, 64, 4096)
        gamma = md.growth(32)
        rng = np.random.default_rng(10)
        els = [sm.random_smooth_element(rng, md.h_conj, md.alpha, 3, 3, 24, tr.G) for _ in range(20)]
        res = [sm.commutator_bound_check(f, md, gamma, tr) for f in els]
        dens = [sm.density_check(f, md.h_conj, k, l, N, tr)[2]
                for f in els for k in (0, 1, 2) for l in (0, 1) for N in (0, 1, 2)]
        ratio = max((r["lhs"] if r["lhs"] is not None else r["lhs_upper"]) / r["rhs"] for r in res)
    finish(record_property, all(r["pass"] for r in res) and all(dens), 180, t.elapsed,
           elements=len(els), max_lhs_over_rhs=ratio, density_checks=len(dens))


@pytest.mark.criterion(11, "Liouville arithmetic")
def test_criterion_11_liouville(record_property):
    with Timer() as t:
        tower = lv.tower_liouville(2)
        s2 = tower.approximants[1].fraction
        L = lv.check_L(lv.tower_liouville(2), 5, count=2)
        gold = lv.check_L(lv.golden_ratio_convergents(12), 3, count=5)
    ok = s2 == Fraction(129, 256) and L.ok and len(L.witnesses) == 2 and not gold.ok and gold.certified_failures
    finish(record_property, bool(ok), 1, t.elapsed, s2=str(s2), tower_witnesses=len(L.witnesses),
           golden_holds=gold.ok, golden_certified_failures=len(gold.certified_failures))


@pytest.mark.criterion(12, "Determinism of `all`")
def test_criterion_12_determinism(record_property, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"preset": "o_n", "seed": 12}))
    with Timer() as t:
        codes = [cli.main(["all", "--config", str(cfg), "--out", str(tmp_path / o)]) for o in ("r1", "r2")]
        names = sorted(p.name for p in (tmp_path / "r1").iterdir())
        same = names == sorted(p.name for p in (tmp_path / "r2").iterdir()) and all(
            (tmp_path / "r1" / n).read_bytes() == (tmp_path / "r2" / n).read_bytes() for n in names)
    finish(record_property, same and codes == [0, 0], None, t.elapsed, files=len(names), identical=same, exit_codes=codes)
