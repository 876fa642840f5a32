import csv
import io
import json

import jsonschema
import numpy as np
import pytest

from specmeas.cli import COMMANDS, RunConfig, build_parser, main, write_csv


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def table(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.reader(lines))


CASES = [
    (["resolve", "--op", "free", "--z", "0+2j"], ["k", "re", "im"]),
    (["measure", "--op", "diag", "--set", "(0.5,1.5);(1.5,2.5)", "--n", "20"], ["a", "b", "re", "im"]),
    (["project", "--op", "free", "--set", "(-0.5,0.5)", "--n", "8"], ["k", "re", "im"]),
    (["atoms", "--op", "charlier", "--params", "a=1", "--window=-0.5,2.5", "--eps", "1e-4"], ["location", "weight", "background"]),
    (["density", "--op", "free", "--set", "(-0.9,0.9)", "--n", "6", "--grid", "5"], ["u", "re", "im"]),
    (["funcalc", "--op", "free", "--f", "exp(-l^2)", "--n", "6"], ["k", "re", "im"]),
    (["funcalc", "--op", "free", "--f", "exp(l)", "--contour=-1.5,1.5,1"], ["k", "re", "im"]),
    (["evolve", "--op", "free", "--t", "0.5,1"], ["t", "k", "re", "im"]),
    (["collocate", "--op", "rogers_szego", "--params", "q=0.1", "--basis", "fourier", "--M", "11"], ["m", "re", "im"]),
]


@pytest.mark.parametrize("argv,header", CASES, ids=[c[0][0] + str(i) for i, c in enumerate(CASES)])
def test_csv_commands(argv, header, capsys):
    code, out, err = run(argv, capsys)
    assert code == 0, err
    rows = table(out)
    assert rows[0] == header and len(rows) > 1
    assert out.startswith(f"# command: {argv[0]}")


def test_repeat_runs_are_byte_identical(capsys):
    argv = ["measure", "--op", "jacobi", "--params", "a=0.7,b=0.3", "--set", "(-0.5,0.5)", "--n", "16"]
    _, a, _ = run(argv, capsys)
    _, b, _ = run(argv, capsys)
    assert a == b


def test_json_commands(capsys):
    code, out, _ = run(["decompose", "--op", "zero", "--set", "(-1,1)", "--stages", "8,4"], capsys)
    d = json.loads(out)
    assert code == 0 and set(d) >= {"pp", "ac", "sc", "mu"}
    code, out, _ = run(["spectrum", "--op", "free", "--type", "pp", "--stages", "4,2"], capsys)
    d = json.loads(out)
    assert code == 0 and d["type"] == "pp" and d["intervals"] == []


def test_gallery_commands(capsys, tmp_path):
    code, out, _ = run(["gallery", "list"], capsys)
    assert code == 0 and "rogers_szego" in out
    path = tmp_path / "m.txt"
    code, _, _ = run(["gallery", "dump", "--name", "free", "--n", "4", "--out", str(path)], capsys)
    assert code == 0
    code, out, err = run(["resolve", "--matrix", str(path), "--z", "2j"], capsys)
    assert code == 0, err
    # the dumped block is a finite matrix, continued by zeros
    M = np.diag([0.5] * 3, 1) + np.diag([0.5] * 3, -1)
    ref = np.linalg.solve(M - 2j * np.eye(4), np.eye(4)[0])
    got = np.array([complex(float(r[1]), float(r[2])) for r in table(out)[1:5]])
    assert np.allclose(got, ref, atol=1e-10)


def test_output_file(tmp_path, capsys):
    path = tmp_path / "r.csv"
    assert main(["resolve", "--z", "1j", "--out", str(path)]) == 0
    assert capsys.readouterr().out == ""
    assert table(path.read_text())[0] == ["k", "re", "im"]


def test_x_file(tmp_path, capsys):
    path = tmp_path / "x.csv"
    path.write_text("0\n1\n")
    _, a, _ = run(["resolve", "--z", "1j", "--x-file", str(path)], capsys)
    _, b, _ = run(["resolve", "--z", "1j", "--x", "2"], capsys)
    assert table(a)[1:] == table(b)[1:]


@pytest.mark.parametrize("argv", [
    ["measure", "--set", "(0,1"],
    ["measure", "--set", "(1,0)"],
    ["resolve", "--z", "0.5"],
    ["resolve", "--op", "nope", "--z", "1j"],
    ["funcalc", "--f", "__import__('os')"],
    ["spectrum", "--stages", "4"],
    ["nonsense"],
])
def test_errors_are_json_with_exit_2(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code == 2
    msg = json.loads(err.strip().splitlines()[-1])
    assert set(msg) == {"error", "message"}


def test_config_file(tmp_path, capsys):
    good = tmp_path / "c.json"
    good.write_text(json.dumps({"command": "resolve", "operator": {"gallery": "free"}, "params": {"z": "2j"}}))
    code, out, err = run(["--config", str(good)], capsys)
    assert code == 0, err
    _, direct, _ = run(["resolve", "--z", "2j"], capsys)
    assert table(out) == table(direct)
    bad = tmp_path / "b.json"
    bad.write_text(json.dumps({"command": "resolve", "bogus": 1}))
    code, _, err = run(["--config", str(bad)], capsys)
    assert code == 2 and json.loads(err)["error"] == "ValidationError"


def test_run_config_validation():
    with pytest.raises(jsonschema.ValidationError):
        RunConfig(command="teleport").validate()
    assert set(COMMANDS) >= {"resolve", "measure", "project", "atoms", "density", "funcalc", "evolve", "decompose",
                             "spectrum", "collocate", "gallery", "reproduce"}


def test_write_csv_float_format():
    buf = io.StringIO()
    write_csv(buf, {"a": 1}, ["x"], [[0.1]])
    assert buf.getvalue() == "# a: 1\nx\n0.10000000000000001\n"


def test_parser_has_subcommands():
    p = build_parser()
    ns = p.parse_args(["--threads", "1", "resolve", "--z", "1j"])
    assert ns.threads == 1 and ns.command == "resolve"
