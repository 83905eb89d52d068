import json
import subprocess
import sys

import numpy as np
import pytest

from gffperc.cli import load_config, main, UsageError

pytestmark = pytest.mark.filterwarnings("ignore:scales .* needed jitter:RuntimeWarning")


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    header = lines[0].split(",")
    return header, [l.split(",") for l in lines[1:]]


def test_green_path3(capsys):
    code, out, _ = run_cli(capsys, "green", "--domain", "path3")
    assert code == 0
    header, body = rows(out)
    assert header == ["x", "y", "green"]
    vals = {(int(a), int(b)): float(c) for a, b, c in body}
    assert vals[(1, 3)] == pytest.approx(0.25)
    assert vals[(2, 2)] == pytest.approx(1.0)
    assert "# domain = path3" in out


def test_cap_and_exit_code(capsys):
    code, out, _ = run_cli(capsys, "cap", "--domain", "box:1x3", "--set", "b")
    assert code == 0
    _, body = rows(out)
    assert float(body[0][2]) == pytest.approx(1.0)


def test_exact_edge(capsys):
    code, out, _ = run_cli(capsys, "exact", "--domain", "edge", "--set", "a", "--q", "0.3")
    assert code == 0
    _, body = rows(out)
    assert float(body[0][2]) == pytest.approx(0.3)
    assert float(body[0][3]) == pytest.approx(1.0)


def test_decompose_and_env(capsys):
    code, out, _ = run_cli(capsys, "decompose", "--domain", "box2")
    assert code == 0 and "deficit" in out
    code, out, _ = run_cli(capsys, "env", "--domain", "pair", "--kind", "overlay", "--lam", "inf")
    assert code == 0
    header, body = rows(out)
    assert header[-1] == "effective"
    assert all(float(r[5]) == 0 and float(r[6]) == 0 for r in body)


def test_gff_sample_summary(capsys):
    code, out, _ = run_cli(capsys, "gff-sample", "--domain", "single", "--samples", "20000",
                           "--summary")
    assert code == 0
    _, body = rows(out)
    assert float(body[0][2]) == pytest.approx(0.25, rel=0.05)


def test_percolate_constant(capsys):
    code, out, _ = run_cli(capsys, "percolate", "--domain", "edge", "--kind", "constant",
                           "--q", "0.25", "--set", "a", "--samples", "40000")
    assert code == 0
    _, body = rows(out)
    assert abs(float(body[0][2]) - 0.25) <= 4 * float(body[0][3])


def test_russo_check(capsys):
    code, out, _ = run_cli(capsys, "russo-check", "--instances", "5")
    assert code == 0
    _, body = rows(out)
    assert len(body) == 45


def test_decay(capsys):
    code, out, _ = run_cli(capsys, "decay", "--domain", "box:1x64:torus", "--vertex", "0")
    assert code == 0
    _, body = rows(out)
    assert float(body[0][1]) == pytest.approx(-0.5, abs=0.1)


def test_usage_errors(capsys, tmp_path):
    assert run_cli(capsys, "green", "--domain", "nowhere")[0] == 2
    assert run_cli(capsys, "frobnicate")[0] == 2
    assert run_cli(capsys, "percolate", "--samples", "1")[0] == 2
    assert run_cli(capsys, "verify", "sgn", "--q", "0.3")[0] == 2
    assert run_cli(capsys, "verify", "flow", "--alpha", "0.01", "--n0", "4")[0] == 2
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert run_cli(capsys, "green", "--config", str(cfg))[0] == 2
    cfg.write_text("q = 0.3\n")
    assert run_cli(capsys, "green", "--config", str(cfg))[0] == 2


def test_load_config_sections(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("[domain]\ndomain = path3\n[model]\nq = 0.25\n[run]\nseed = 4\nsummary = yes\n")
    assert load_config(str(cfg)) == {"domain": "path3", "q": 0.25, "seed": 4, "summary": True}
    cfg.write_text("[weird]\nseed = 1\n")
    with pytest.raises(UsageError):
        load_config(str(cfg))


def test_config_round_trip(capsys, tmp_path):
    out1 = tmp_path / "a.csv"
    assert main(["exact", "--domain", "pair", "--q", "0.4", "--set", "a", "--out", str(out1)]) == 0
    # the comment header is itself a valid config
    cfg = tmp_path / "a.cfg"
    cfg.write_text("".join(l[2:] for l in out1.read_text().splitlines(True) if l.startswith("# ")))
    out2 = tmp_path / "b.csv"
    assert main(["exact", "--config", str(cfg), "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_flag_overrides_config(capsys, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("domain = path5\nq = 0.9\n")
    code, out, _ = run_cli(capsys, "exact", "--config", str(cfg), "--q", "0.1", "--set", "a")
    assert code == 0 and "# q = 0.10000000000000001" in out and "# domain = path5" in out


def test_verify_report(capsys):
    code, out, _ = run_cli(capsys, "verify", "sgn", "--domain", "single", "--samples", "4000")
    assert code == 0
    rep = json.loads(out)
    assert rep["experiment"] == "sgn" and rep["pass"] is True
    assert rep["config"] == {"domain": "single", "samples": 4000}


def test_verify_lambda_uses_its_defaults(capsys):
    code, out, _ = run_cli(capsys, "verify", "lambda")
    assert code == 0
    assert json.loads(out)["spec"]["domain"] == "edge"


def test_verify_failure_exit_code(capsys):
    # 5000 draws leave no cell with 1000 hits, so there is nothing to pass on
    code, out, _ = run_cli(capsys, "verify", "sign-law", "--samples", "5000")
    assert code == 1
    assert json.loads(out)["pass"] is False


@pytest.mark.parametrize("argv", [
    ["verify", "prop21", "--domain", "path5", "--samples", "9000"],
    ["verify", "arcsin", "--domain", "box3", "--pairs", "a-b;a-e", "--samples", "9000"],
    ["percolate", "--domain", "box3", "--samples", "9000"],
])
def test_bit_identical_across_workers(capsys, argv):
    a = run_cli(capsys, *argv, "--workers", "1")
    b = run_cli(capsys, *argv, "--workers", "8")
    assert a == b


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "gffperc", "green", "--domain", "single"],
                         capture_output=True, text=True, check=True).stdout
    assert np.isclose(float(out.strip().splitlines()[-1].split(",")[-1]), 0.25)
