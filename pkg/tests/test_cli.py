import json
import subprocess
import sys
from io import StringIO

import pytest

from ultrasos.cli import FAIL, INCONCLUSIVE, OK, USAGE, main, split_roots

M4 = ("m4 { elems: 0 a b 1; unit: 0; add: (a a -> 1) (a b -> 1) (a 1 -> 1) "
      "(b b -> 1) (b 1 -> 1) (1 1 -> 1) }\n")

OVERLAP = """monoid nat
labels a
sig f/1
wsig bot/0
interp bot = zero
rule r1: f(x1) -[a]-> bot when x1 -[a]-> phi1, x1 -/[a]
"""

TOY = """monoid nat
labels a
sig c/0 d/0 k/0 f/1
wsig bot/0 oplus/2
interp bot = zero
interp oplus = sum
rule c -[a]-> oplus(d, k)
rule d -[a]-> bot
rule k -[a]-> bot
rule f(x1) -[a]-> f(f(x1))
"""

WGSOS = """monoid rat
labels a b
sig f/1 g/0 h/2
rule g -[a, 2]-> g
rule g -[a, 3]-> g
rule g -[b, 1]-> f(g)
rule f(x1) -[a, u1 + u2]-> h(y1, y2) when x1 -[a]-> 5, x1 -[a, u1]-> y1, x1 -[b, u2]-> y2
rule h(x1, x2) -[b, 2*u1]-> y1 when x2 -[a, u1]-> y1
"""

SGSOS = """labels a b
sig c/0 d/0
rule c -[a]-> 1/2 * c + 1/2 * d
rule d -[b]-> 1 * d
"""


def run(*argv):
    out, err = StringIO(), StringIO()
    code = main([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def files(tmp_path):
    def write(name, text):
        p = tmp_path / name
        p.write_text(text)
        return p
    return write


def test_race_files_are_bisimilar(files):
    p1 = files("pepa1.spec", "P = (a,2).nil + (a,3).nil\nmain P\n")
    p2 = files("pepa2.spec", "Q = (a,5).nil\nmain Q\n")
    code, out, _ = run("bisim", p1, p2, "--roots", "P,Q")
    assert code == OK
    assert "{1:(a,2).nil + (a,3).nil, 2:(a,5).nil}" in out


def test_different_rates_are_not_bisimilar(files):
    p1 = files("a.pepa", "P = (a,2).nil\n")
    p2 = files("b.pepa", "Q = (a,3).nil\n")
    assert run("bisim", p1, p2, "--roots", "P,Q")[0] == FAIL
    assert run("pepa", p1, p2, "--roots", "P,Q")[0] == FAIL


def test_one_file_two_roots(files):
    f = files("m.pepa", "A = (b,2).nil\nR = (a,1).A\nS = (a,1).(A + A)\nT = (a,1).(b,4).nil\n")
    assert run("bisim", f, "--roots", "R,S")[0] == FAIL
    code, out, _ = run("bisim", f, "--roots", "S,T", "--oracle")
    assert code == OK and "oracle: agrees" in out
    assert run("pepa", f, "--roots", "S,T")[0] == OK


def test_check_overlap_names_the_clause(files):
    code, out, _ = run("check", files("bad.spec", OVERLAP))
    assert code == FAIL
    assert "r1: overlapping positive/negative premises: x1 on a" in out


def test_check_ok(files):
    assert run("check", files("toy.spec", TOY)) == (OK, "ok\n", "")
    assert run("check", files("s.wgsos", WGSOS))[0] == OK
    assert run("check", files("s.sgsos", SGSOS))[0] == OK


def test_inconclusive(files):
    f = files("toy.spec", TOY)
    code, _, err = run("bisim", f, "--roots", "f(c),f(d)", "--budget", "5")
    assert code == INCONCLUSIVE and err.startswith("inconclusive")
    assert run("minimize", f, "--roots", "f(c)", "--budget", "5")[0] == INCONCLUSIVE


def test_derive_and_minimize(files):
    f = files("toy.spec", TOY)
    code, out, _ = run("derive", f, "--roots", "c")
    assert code == OK and "c -a-> {d: 1, k: 1}\n" in out
    code, out, _ = run("minimize", f, "--roots", "c")
    assert code == OK and "states 2" in out


def test_bisim_in_a_spec_file(files):
    f = files("toy.spec", TOY)
    code, out, _ = run("bisim", f, "--roots", "d,k", "--oracle")
    assert code == OK and "oracle: agrees" in out
    assert run("bisim", f, "--roots", "c,d")[0] == FAIL


def test_usage_errors(files, capsys):
    f = files("toy.spec", TOY)
    assert run("bisim", f, "--roots", "c")[0] == USAGE
    assert run("derive", files("broken.spec", "monoid nat\nsig f/x\n"))[0] == USAGE
    assert run("derive", f.parent / "missing.spec")[0] == USAGE
    assert run("translate", f)[0] == USAGE
    assert run("derive", f, "--roots", "nope(c)")[0] == USAGE
    for argv in (["derive", str(f), "--budget", "0"], ["frobnicate"], []):
        with pytest.raises(SystemExit) as e:
            main(argv, StringIO(), StringIO())
        assert e.value.code == USAGE
    capsys.readouterr()


def test_monoid_reports(files):
    code, out, _ = run("monoid", files("m4.table", M4))
    assert code == OK
    assert out == "positive: yes, refinement: no, clubs: {}, {a,b,1}\n"
    doc = json.loads(run("monoid", files("m4.table", M4), "--format", "structured")[1])
    assert doc["positive"] is True and doc["refinement"] is False


def test_translate_emits_a_valid_spec(files, tmp_path):
    code, out, _ = run("translate", files("s.wgsos", WGSOS))
    assert code == OK and out.startswith("monoid rat\n")
    compiled = tmp_path / "compiled.spec"
    compiled.write_text(out)
    assert run("check", compiled)[0] == OK
    direct = run("derive", tmp_path / "s.wgsos", "--roots", "f(g)")[1]
    assert run("derive", compiled, "--roots", "f(g)")[1] == direct


@pytest.mark.parametrize("fmt", ["text", "structured", "graph"])
def test_output_is_byte_identical(files, fmt):
    f = files("r.pepa", "P = (a,1).(b,2).nil <a> ((a,3).nil + (b,1).nil)\nmain P\n")
    a, b = run("derive", f, "--format", fmt), run("derive", f, "--format", fmt)
    assert a == b and a[0] == OK


def test_structured_output_reads_back(files, tmp_path):
    f = files("r.pepa", "P = (a,1).(b,2).nil\nmain P\n")
    out = run("derive", f, "--format", "structured")[1]
    back = tmp_path / "r.json"
    back.write_text(out)
    assert run("derive", back, "--format", "structured")[1] == out


def test_split_roots():
    assert split_roots("P,Q") == ["P", "Q"]
    assert split_roots("g(c, d),f(c)") == ["g(c, d)", "f(c)"]
    assert split_roots(None) == []


def test_console_module_runs(files):
    f = files("m4.table", M4)
    proc = subprocess.run([sys.executable, "-m", "ultrasos.cli", "monoid", str(f)],
                          capture_output=True, text=True, timeout=60)
    assert proc.returncode == OK and proc.stdout.startswith("positive: yes")
