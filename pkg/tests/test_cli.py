import json
import subprocess
import sys

import numpy as np
import pytest

from cookir.cli import run
from cookir.matrixio import read_matrix, write_matrix
from cookir.taxonomy import FeatureTable, write_features

from helpers import BAKE, CHICKEN, KITCHEN_VOCAB, PASTA


def cli(capsys, *argv, stdin=None, monkeypatch=None):
    if stdin is not None:
        import io
        monkeypatch.setattr(sys, "stdin", io.StringIO(stdin))
    code = run([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_parse_valid_and_invalid(capsys, tmp_path):
    code, out, _ = cli(capsys, "parse", PASTA)
    doc = json.loads(out)
    assert code == 0 and doc["programs"][0]["valid"] and doc["programs"][0]["commands"] == 6
    bad = tmp_path / "bad.prog"
    bad.write_text("out = Mix(h1);\n")
    code, out, _ = cli(capsys, "parse", bad)
    assert code == 1
    assert json.loads(out)["programs"][0]["diagnostics"][0]["kind"] == "use-before-def"
    code, out, _ = cli(capsys, "parse", "--pretty", bad)
    assert "INVALID" in out


def test_parse_error_exit_code(capsys, tmp_path):
    bad = tmp_path / "bad.prog"
    bad.write_text("out = Boil(water)\n")
    code, out, err = cli(capsys, "parse", bad)
    assert code == 1 and out == ""
    assert "1:17" in err


def test_usage_errors(capsys, tmp_path):
    assert cli(capsys, "parse")[0] == 2
    assert cli(capsys, "nonsense")[0] == 2
    assert cli(capsys, "parse", tmp_path / "missing.prog")[0] == 2
    assert cli(capsys, "loss", "ce")[0] == 2
    assert cli(capsys, "--version")[0] == 0


def test_fmt_then_parse_pipeline(capsys, monkeypatch):
    messy = "# note\nx = Cook(pasta,time='10 minutes',tool=pot);y=Drain(x);\nout = Serve( y );\n"
    code, out, _ = cli(capsys, "fmt", "-", stdin=messy, monkeypatch=monkeypatch)
    assert code == 0
    assert out.splitlines()[0] == "h1 = Cook(pasta, tool=pot, time='10 minutes');"
    code, out2, _ = cli(capsys, "parse", "-", stdin=out, monkeypatch=monkeypatch)
    assert code == 0 and json.loads(out2)["programs"][0]["valid"]


def test_graph_formats(capsys):
    code, out, _ = cli(capsys, "graph", PASTA)
    g = json.loads(out)
    assert code == 0 and g["sink"] == 5 and len(g["nodes"]) == 14
    code, out, _ = cli(capsys, "graph", PASTA, "--dot")
    assert out.startswith("digraph") and out.count("shape=box") == 6
    code, out2, _ = cli(capsys, "graph", PASTA, "--format", "dot", "--merge-entities")
    assert out2.count("shape=ellipse") == 8


def test_perms(capsys, tmp_path):
    code, out, _ = cli(capsys, "perms", PASTA)
    doc = json.loads(out)
    assert doc["count"] == 10 and doc["permutations"][0] == [0, 1, 2, 3, 4, 5]
    code, out, _ = cli(capsys, "perms", PASTA, "--count")
    assert json.loads(out) == {"count": 10}
    code, out, _ = cli(capsys, "perms", PASTA, "--cap", "5")
    assert code == 1
    code, out, _ = cli(capsys, "perms", BAKE, "--programs")
    assert json.loads(out)["programs"] == [BAKE.read_text().rstrip("\n")]


def test_validate_seq(capsys):
    assert json.loads(cli(capsys, "validate-seq", PASTA, "2,3,4,0,1,5")[1]) == {"valid": True}
    assert json.loads(cli(capsys, "validate-seq", PASTA, "1,0,2,3,4,5")[1]) == {"valid": False}
    assert cli(capsys, "validate-seq", PASTA, "0,1")[0] == 1
    assert cli(capsys, "validate-seq", PASTA, "a,b")[0] == 2


def test_assemble_and_canonicalize(capsys, tmp_path):
    code, out, err = cli(capsys, "assemble", CHICKEN, "--vocab", KITCHEN_VOCAB)
    assert code == 0
    assert out.splitlines()[1] == "h2 = Mix('olive oil', 'lemon juice', garlic, pepper, tool=bowl);"
    assert "s6" in err
    code, out, err = cli(capsys, "assemble", CHICKEN)
    assert "black pepper" in out and "uncanonicalized" in err
    code, out, _ = cli(capsys, "canonicalize", "black pepper", "saffron", "--vocab", KITCHEN_VOCAB)
    assert json.loads(out) == [{"raw": "black pepper", "value": "pepper", "canonical": True},
                               {"raw": "saffron", "value": "saffron", "canonical": False}]
    prog = tmp_path / "p.prog"
    prog.write_text("out = whisk('Black Pepper', tool=skillet);")
    code, out, _ = cli(capsys, "canonicalize", "--program", prog, "--vocab", KITCHEN_VOCAB)
    assert out.strip() == "out = Mix(pepper, tool=pan);"
    assert cli(capsys, "canonicalize", "--vocab", KITCHEN_VOCAB)[0] == 2


def _features(tmp_path):
    rng = np.random.default_rng(0)
    x = np.vstack([rng.normal(0, 0.1, (4, 2)), rng.normal(5, 0.1, (4, 2))])
    t = FeatureTable(tuple(f"w{i}" for i in range(8)), x)
    path = tmp_path / "f.txt"
    write_features(t, path)
    return path


def test_cluster(capsys, tmp_path, monkeypatch):
    path = _features(tmp_path)
    code, out, _ = cli(capsys, "cluster", path, "-k", "4", "--seed", "1", "--merge-threshold", "2")
    docs = json.loads(out)
    assert code == 0 and len(docs[0]["canonical"]) == 2
    assert len(docs[0]["synonyms"]) == 6
    monkeypatch.setenv("COOKIR_SEED", "1")
    assert cli(capsys, "cluster", path, "-k", "4", "--merge-threshold", "2")[1] == out
    code, out, err = cli(capsys, "cluster", path, "-k", "2", "--merge-threshold", "100", "--confirm",
                         stdin="n\n", monkeypatch=monkeypatch)
    assert len(json.loads(out)[0]["canonical"]) == 2 and "merge" in err
    monkeypatch.setenv("COOKIR_SEED", "x")
    assert cli(capsys, "cluster", path, "-k", "2")[0] == 2


def test_ged(capsys, tmp_path):
    a = tmp_path / "a.prog"
    b = tmp_path / "b.prog"
    a.write_text("out = Boil(water);")
    b.write_text("out = Boil(salt, tool=pot);")
    assert json.loads(cli(capsys, "ged", a, b)[1]) == {"ged": 3.0, "mode": "exact"}
    assert json.loads(cli(capsys, "ged", a, b, "--beam", "4")[1])["mode"] == "beam"
    assert json.loads(cli(capsys, "ged", a, b, "--functions-only")[1])["ged"] == 0.0
    gj = tmp_path / "g.json"
    cli(capsys, "graph", b)
    code, out, _ = cli(capsys, "graph", b)
    gj.write_text(out)
    assert json.loads(cli(capsys, "ged", b, gj)[1])["ged"] == 0.0
    costs = tmp_path / "c.json"
    costs.write_text(json.dumps({"node_insert": 2.0}))
    assert json.loads(cli(capsys, "ged", a, b, "--costs", costs)[1])["ged"] == 4.0
    assert cli(capsys, "ged", PASTA, BAKE)[0] == 1  # too large for exact


def test_f1(capsys, tmp_path):
    q = tmp_path / "q.prog"
    q.write_text("h1 = Cook(pasta, tool=pot); out = Mix(h1, cheese);")
    doc = json.loads(cli(capsys, "f1", q, PASTA, "--kind", "all")[1])
    assert set(doc) == {"ingredient", "action", "tool"}
    assert doc["tool"]["precision"] == 1.0
    one = json.loads(cli(capsys, "f1", PASTA, PASTA)[1])
    assert one == {"precision": 1.0, "recall": 1.0, "f1": 1.0}


def test_retrieval(capsys, tmp_path):
    m = np.random.default_rng(0).uniform(size=(30, 30)) + 3 * np.eye(30)
    path = tmp_path / "sim.bin"
    write_matrix(m, path, binary=True)
    code, out, _ = cli(capsys, "retrieval", path, "--pool", "30", "--trials", "3")
    assert json.loads(out) == {"medR": 1.0, "recall_at": {"1": 100.0, "5": 100.0, "10": 100.0}}
    assert cli(capsys, "retrieval", path)[0] == 1  # default pool of 1000 is too large
    code, out, _ = cli(capsys, "retrieval", path, "--pool", "30", "--k", "1,2", "--pretty")
    assert out.split()[:3] == ["medR", "R@1", "R@2"]


def test_loss_subcommands(capsys, tmp_path):
    img, txt = tmp_path / "i.txt", tmp_path / "t.txt"
    write_matrix([[1.0, 0.0], [0.0, 1.0]], img)
    write_matrix([[1.0, 0.0], [1.0, 0.0]], txt)
    doc = json.loads(cli(capsys, "loss", "triplet", "--image", img, "--text", txt)[1])
    assert doc["value"] == pytest.approx(0.95)
    pred = tmp_path / "p.txt"
    write_matrix(np.full((2, 2), 0.5), pred)
    assert json.loads(cli(capsys, "loss", "ce", "--pred", pred, "--target", "0,1")[1])["value"] == pytest.approx(np.log(2))
    cands = tmp_path / "c.json"
    cands.write_text("[[0, 1], [1, 1]]")
    doc = json.loads(cli(capsys, "loss", "mince", "--pred", pred, "--candidates", cands)[1])
    assert doc["argmin"] == 0 and doc["candidates"] == 2
    assert cli(capsys, "loss", "mince", "--pred", pred)[0] == 2
    doc = json.loads(cli(capsys, "loss", "total", "--l-ss", "1", "--l-pv", "2", "--l-pt", "3")[1])
    assert doc["value"] == pytest.approx(1.5, abs=1e-12)


def test_loss_mince_from_program(capsys, tmp_path):
    from cookir.dsl import parse_program
    from cookir.ir import SymbolTable, Vocabulary, tokenize_program
    table = SymbolTable(Vocabulary.load(KITCHEN_VOCAB))
    n_tokens = len(table)
    text = "h1 = Preheat(tool=oven); h2 = Mix(salt); out = Bake(h1, h2);"
    prog = tmp_path / "p.prog"
    prog.write_text(text)
    steps = len(tokenize_program(parse_program(text), table))
    pred = tmp_path / "pred.txt"
    write_matrix(np.full((steps, n_tokens), 1.0 / n_tokens), pred)
    doc = json.loads(cli(capsys, "loss", "mince", "--pred", pred, "--program", prog, "--vocab", KITCHEN_VOCAB)[1])
    assert doc["candidates"] == 2
    assert doc["value"] == pytest.approx(np.log(n_tokens))


def test_matrix_files(tmp_path):
    m = np.arange(6, dtype=float).reshape(2, 3) / 4
    for binary in (False, True):
        path = tmp_path / f"m{binary}"
        write_matrix(m, path, binary=binary)
        assert np.array_equal(read_matrix(path), m)


def test_stdout_is_deterministic(capsys):
    first = cli(capsys, "perms", PASTA, "--programs")[1]
    assert cli(capsys, "perms", PASTA, "--programs")[1] == first


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "cookir", "fmt", str(BAKE)], capture_output=True, text=True)
    assert r.returncode == 0
    assert r.stdout == BAKE.read_text()
