import json
from fractions import Fraction


from nctorus import circle as cd
from nctorus import cli

SMALL = {
    "seed": 1,
    "truncation": {"N": 4, "M": 8, "G": 512},
    "growth": {"nmax": 16},
    "state": {"bases": 3, "basis_size": 4, "elements": 5},
    "gns": {"M": 16, "elements": 2},
    "commutators": {"N_values": [4, 8]},
    "seminorms": {"elements": 2, "kmax": 2, "probe_samples": 2},
}


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return p


def run(tmp_path, command, cfg, out="out", extra=()):
    p = write(tmp_path, "cfg.json", cfg)
    return cli.main([command, "--config", str(p), "--out", str(tmp_path / out), *extra])


def summary(tmp_path, command, out="out"):
    name = "summary.json" if command == "all" else f"summary_{command}.json"
    return json.loads((tmp_path / out / name).read_text())


def test_build_diffeo_tower(tmp_path):
    assert run(tmp_path, "build-diffeo", dict(SMALL, preset="tower")) == 0
    d = json.loads((tmp_path / "out" / "diffeo.json").read_text())
    assert "conjugacy" in d and d["final_rotation"] == 129 / 256
    assert d["meta"]["seed"] == 1 and len(d["meta"]["config_hash"]) == 16
    first = (tmp_path / "out" / "growth.csv").read_text().splitlines()[0]
    assert first.startswith("#") and d["meta"]["config_hash"] in first


def test_amplitude_too_large_exit_2(tmp_path):
    cfg = dict(SMALL, alpha="tower:3", stages=[{"q": 2, "amplitude": 1.5}])
    assert run(tmp_path, "build-diffeo", cfg) == 2


def test_zero_amplitude_stages_give_rotation(tmp_path):
    cfg = dict(SMALL, alpha="lacunary:2,5,9,20,40,80",
               stages=[{"q": 4, "amplitude": 0.0}, {"q": 32, "amplitude": 0.0}, {"q": 512, "amplitude": 0.0}])
    assert run(tmp_path, "build-diffeo", cfg) == 0
    f = cd.CircleDiffeo.from_json(json.loads((tmp_path / "out" / "diffeo.json").read_text()))
    assert f.is_rotation()
    assert f.mean_translation == float(sum(Fraction(1, 2 ** e) for e in (2, 5, 9, 20)))


def test_rotation_diffeo_spectral_suite(tmp_path):
    write(tmp_path, "rot.json", cd.rotation(0.3819660112501051, 512).to_json())
    cfg = dict(SMALL, diffeo="rot.json", alpha="golden:20")
    for cmd in ("gns-check", "dirac", "commutators", "seminorms"):
        assert run(tmp_path, cmd, cfg) == 0, cmd
    g = json.loads((tmp_path / "out" / "gns_report.json").read_text())
    assert g["tomita_residual"] < 1e-8 and g["vector_state_error"] < 1e-8


def test_corrupted_diffeo_exit_1(tmp_path):
    write(tmp_path, "bad.json", '{"mean_translation": 0.1, "periodic": [[0.1')
    assert run(tmp_path, "dirac", dict(SMALL, diffeo="bad.json")) == 1


def test_non_rotation_without_conjugacy_exit_1(tmp_path):
    f = cd.CircleDiffeo(0.3, [0.01 + 0.02j], 512)
    write(tmp_path, "f.json", f.to_json())
    assert run(tmp_path, "dirac", dict(SMALL, diffeo="f.json")) == 1


def test_usage_errors(tmp_path):
    assert cli.main(["dirac", "--config", str(tmp_path / "missing.json")]) == 1
    assert cli.main(["nonsense", "--config", "x"]) == 1
    assert run(tmp_path, "dirac", {"preset": "nope"}) == 1
    assert run(tmp_path, "dirac", dict(SMALL, preset="tower", truncation={"N": 4, "M": 8, "G": 16})) == 1
    assert run(tmp_path, "build-diffeo", {"seed": 0}) == 1


def test_liouville_check(tmp_path):
    assert run(tmp_path, "liouville-check", dict(SMALL, alpha="tower:2")) == 0
    d = json.loads((tmp_path / "out" / "liouville.json").read_text())
    assert d["check_L"]["holds"] is True and d["check_L"]["witnesses"] == ["s_1", "s_2"]


def test_exit_code_precedence():
    checks = [{"ok": False, "category": "bound"}, {"ok": False, "category": "numerical"}, {"ok": True, "category": "bound"}]
    assert cli.exit_code(checks) == 2
    assert cli.exit_code(checks[:1]) == 3
    assert cli.exit_code(checks[2:]) == 0


def test_fmt_round_trips():
    for x in (0.1, 1 / 3, 1e-300, -2.5e17):
        assert float(cli.fmt(x)) == x
    assert cli.fmt(True) == "true" and cli.fmt(3) == "3"


def test_all_deterministic_across_runs_and_jobs(tmp_path):
    cfg = dict(SMALL, preset="tower")
    assert run(tmp_path, "all", cfg, "a") == 0
    assert run(tmp_path, "all", cfg, "b", ("--jobs", "3")) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes(), n
    assert summary(tmp_path, "all", "a")["exit_code"] == 0
