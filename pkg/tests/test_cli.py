import json
import subprocess
import sys

import numpy as np
import pytest

from auocs.bench import REPORT_HEADER
from auocs.cli import main
from auocs.linalg import read_array
from auocs.model import read_instance


def _config_line(out):
    first = out.splitlines()[0]
    assert first.startswith("config: ")
    return json.loads(first[len("config: "):])


def _gen(tmp_path, name="inst.txt", *extra):
    path = tmp_path / name
    assert main(["gen", "--out", str(path), *extra]) == 0
    return path


def test_gen_defaults(tmp_path, capsys):
    path = _gen(tmp_path)
    cfg = _config_line(capsys.readouterr().out)
    assert (cfg["N"], cfg["M"], cfg["K"], cfg["delta"]) == (500, 125, 6, 0.7)
    inst = read_instance(path)
    assert inst.B.shape == (125, 500)


def test_gen_is_reproducible(tmp_path):
    a = _gen(tmp_path, "a.txt", "--n", "30", "--m", "10", "--k", "3", "--seed", "4")
    b = _gen(tmp_path, "b.txt", "--n", "30", "--m", "10", "--k", "3", "--seed", "4")
    assert a.read_bytes() == b.read_bytes()


def test_gen_rejects_m_above_n(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["gen", "--n", "5", "--m", "6", "--out", str(tmp_path / "x.txt")])
    assert info.value.code == 2


def test_dump_config_writes_nothing(tmp_path, capsys):
    out = tmp_path / "x.txt"
    assert main(["gen", "--out", str(out), "--dump-config"]) == 0
    assert not out.exists()
    assert _config_line(capsys.readouterr().out)["command"] == "gen"


def test_recover_bp_square_noiseless(tmp_path, capsys):
    path = _gen(tmp_path, "sq.txt", "--n", "12", "--m", "12", "--k", "3", "--delta", "0")
    est = tmp_path / "est.txt"
    capsys.readouterr()
    assert main(["recover", "--instance", str(path), "--method", "bp", "--out", str(est)]) == 0
    out = capsys.readouterr().out
    assert "status: Optimal" in out
    inst = read_instance(path)
    assert f"support: {','.join(map(str, inst.support))}" in out
    np.testing.assert_allclose(read_array(est, vector=True), inst.theta_true, atol=1e-5)


def test_recover_auo_prints_constraint_diagnostics(tmp_path, capsys):
    path = _gen(tmp_path, "a.txt", "--n", "40", "--m", "15", "--k", "2", "--delta", "0.3")
    trace = tmp_path / "trace.csv"
    capsys.readouterr()
    assert main(["recover", "--instance", str(path), "--method", "auo", "--delta", "0.3",
                 "--trace", str(trace)]) == 0
    out = capsys.readouterr().out
    assert "(<= t: True)" in out
    assert "= " in out and out.count(": True)") == 2
    assert trace.read_text().splitlines()[0] == "iter,primal_res,dual_res,gap"


@pytest.mark.parametrize("argv", [
    ["--method", "auo"],
    ["--method", "ds"],
    ["--method", "omp"],
    ["--method", "bp", "--tau", "1.5"],
    ["--method", "auo", "--delta", "-1"],
])
def test_recover_usage_errors(tmp_path, argv):
    path = _gen(tmp_path, "u.txt", "--n", "10", "--m", "5", "--k", "1")
    with pytest.raises(SystemExit) as info:
        main(["recover", "--instance", str(path), *argv])
    assert info.value.code == 2


def test_recover_missing_file(tmp_path, capsys):
    assert main(["recover", "--instance", str(tmp_path / "nope.txt"), "--method", "bp"]) == 1
    assert "error" in capsys.readouterr().err


def test_recover_corrupt_file(tmp_path, capsys):
    path = _gen(tmp_path, "c.txt", "--n", "10", "--m", "5", "--k", "1")
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-3]) + "\n")
    assert main(["recover", "--instance", str(path), "--method", "bp"]) == 1
    assert "line" in capsys.readouterr().err


def test_bench_writes_report(tmp_path, capsys):
    out = tmp_path / "rho.csv"
    assert main(["bench", "--n", "16", "--m", "8", "--k-list", "1,2", "--delta", "0.3",
                 "--trials", "3", "--methods", "bp,auo,omp", "--seed", "7", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(REPORT_HEADER)
    assert len(lines) == 1 + 2 * 3
    assert _config_line(capsys.readouterr().out)["sweep_var"] == "K"


def test_bench_requires_one_sweep_list(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["bench", "--out", str(tmp_path / "r.csv")])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["bench", "--k-list", "1", "--m-list", "5", "--out", str(tmp_path / "r.csv")])
    assert info.value.code == 2


def test_bench_rejects_sweep_point_above_n(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["bench", "--n", "10", "--m-list", "5,11", "--out", str(tmp_path / "r.csv")])
    assert info.value.code == 2


def test_profile_columns(tmp_path):
    out = tmp_path / "p.csv"
    assert main(["profile", "--n", "20", "--m", "10", "--k", "2", "--delta", "0.2", "--trials", "2",
                 "--methods", "bp,auo", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "index,true,bp,auo"
    assert len(lines) == 21


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "auocs", "--version"], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.startswith("auocs")
