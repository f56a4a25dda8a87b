from __future__ import annotations

import json
import textwrap

import pytest

from roughns import __version__
from roughns import cli

EXPECTED_PRESETS = [
    "taylor-green-2d", "enstrophy-bm-2d", "wong-zakai-2d", "moving-frame-2d", "local-3d",
    "tstar-3d", "pressure-2d", "remainder-scaling-2d", "stability-2d",
]

TG_SHORT = """\
schema_version = 1
kind = "enstrophy"

[solver]
d = 2
N = 8
nu = 0.01
dt = 0.01
T = 0.1

[initial]
kind = "taylor-green"
"""


def _write(tmp_path, text, name="exp.toml"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return path


def test_presets_listing(capsys):
    assert cli.main(["presets"]) == 0
    out = capsys.readouterr().out.splitlines()
    names = [line.split()[0] for line in out]
    assert names == EXPECTED_PRESETS
    assert len(names) >= 8


@pytest.mark.parametrize("name", EXPECTED_PRESETS)
def test_presets_validate(name):
    doc = cli.preset_config(name)
    assert doc["kind"] in cli.KINDS


def test_unknown_preset(capsys):
    assert cli.main(["run", "--preset", "nope"]) == 2
    assert "unknown preset" in capsys.readouterr().err


def test_malformed_toml_reports_line(tmp_path, capsys):
    path = _write(tmp_path, "schema_version = 1\nkind = \"solve\"\n[solver\nN = 8\n")
    assert cli.main(["run", str(path), "--output", str(tmp_path / "o")]) == 2
    assert "line 3" in capsys.readouterr().err


def test_unknown_key_reports_line(tmp_path, capsys):
    path = _write(tmp_path, TG_SHORT + "\n[study]\nbogus = 3\n")
    assert cli.main(["validate", str(path)]) == 2
    err = capsys.readouterr().err
    assert "line 15" in err and "study.bogus" in err


def test_wrong_type_reports_line(tmp_path, capsys):
    path = _write(tmp_path, TG_SHORT.replace("N = 8", "N = \"eight\""))
    assert cli.main(["validate", str(path)]) == 2
    assert "line 6" in capsys.readouterr().err


def test_wongzakai_single_mesh_rejected(tmp_path, capsys):
    path = _write(tmp_path, """\
        schema_version = 1
        kind = "wongzakai"

        [solver]
        N = 8
        T = 0.25

        [family]
        kind = "random"

        [noise]
        kind = "brownian"

        [study]
        meshes = [0.0625]
        reference = 0.015625
        """)
    assert cli.main(["run", str(path), "--output", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "at least 3 meshes" in err and "line 15" in err


def test_validate_ok(tmp_path, capsys):
    path = _write(tmp_path, TG_SHORT)
    assert cli.main(["validate", str(path)]) == 0
    assert "ok" in capsys.readouterr().out


def test_run_needs_exactly_one_source(capsys):
    assert cli.main(["run"]) == 2


def test_taylor_green_end_to_end(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", "--preset", "taylor-green-2d", "--output", str(out1)]) == 0
    assert cli.main(["run", "--preset", "taylor-green-2d", "--output", str(out2)]) == 0
    s1 = json.loads((out1 / "summary.json").read_text())
    s2 = json.loads((out2 / "summary.json").read_text())
    assert s1["artifact_version"] == __version__
    assert len(s1["config_hash"]) == 64 and s1["config_hash"] == s2["config_hash"]
    assert s1["metrics"] == s2["metrics"]
    assert s1["checks"]["residual"]["passed"] and s1["checks"]["residual"]["value"] <= 1e-6
    assert s1["status"] == 0
    for name in ("trajectory.csv", "trajectory.svg"):
        assert (out1 / name).exists()
    assert (out1 / "trajectory.svg").read_text().startswith("<svg")


def test_failed_check_exit_one(tmp_path):
    path = _write(tmp_path, TG_SHORT + "\n[checks]\nresidual_tol = 1e-30\n")
    assert cli.main(["run", str(path), "--output", str(tmp_path / "o")]) == 1
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["status"] == 1 and not summary["checks"]["residual"]["passed"]


def test_unexpected_blowup_exit_three(tmp_path):
    text = TG_SHORT.replace('kind = "enstrophy"', 'kind = "solve"').replace(
        "T = 0.1", "T = 0.1\nblowup_threshold = 1e-6")
    path = _write(tmp_path, text)
    assert cli.main(["run", str(path), "--output", str(tmp_path / "o")]) == 3
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert "HorizonReached" in summary["error"] or "exceeded" in summary["error"]


def test_expected_blowup_passes(tmp_path):
    text = TG_SHORT.replace('kind = "enstrophy"', 'kind = "solve"').replace(
        "T = 0.1", "T = 0.1\nblowup_threshold = 1e-6") + "\n[study]\nexpect_blowup = true\n"
    path = _write(tmp_path, text)
    assert cli.main(["run", str(path), "--output", str(tmp_path / "o")]) == 0


def test_output_root_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("ROUGHNS_OUTPUT_ROOT", str(tmp_path / "root"))
    path = _write(tmp_path, TG_SHORT, "tg.toml")
    assert cli.main(["run", str(path)]) == 0
    assert (tmp_path / "root" / "tg" / "summary.json").exists()


def test_config_hash_changes_with_config():
    a = cli.preset_config("taylor-green-2d")
    b = cli.preset_config("taylor-green-2d")
    b["solver"]["dt"] = 2e-3
    assert cli.config_hash(a) != cli.config_hash(b)


def test_tstar_runner(tmp_path):
    path = _write(tmp_path, """\
        schema_version = 1
        kind = "tstar"

        [solver]
        d = 3
        N = 4
        nu = 0.1
        dt = 0.05
        T = 0.1

        [initial]
        kind = "random"
        norm = 0.1
        band = 2

        [study]
        q = 1.0
        """)
    assert cli.main(["run", str(path), "--output", str(tmp_path / "o")]) == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["metrics"]["tstar"] > 0
