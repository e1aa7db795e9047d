import csv
import io
import json
import subprocess
import sys

import jsonschema
import pytest

from coinsieve.cli import main, parse_real
from coinsieve.primes import odd_squarefree_upto
from coinsieve.reporting import load_schema

SMALL_RUNS = {
    "mass": ["--rho", "3/4", "--m", "4", "--n", "5"],
    "sample": ["--rho", "0.75", "--m", "8", "--count", "5"],
    "rq": ["--q", "3", "--m", "2", "--rho", "1/2"],
    "sweep": ["--rho", "3/4", "--m", "8", "--q-max", "31"],
    "exponent": ["--rho", "0.95", "--m", "8,16", "--precision-bits", "53"],
    "pseudoprimes": ["--rho", "3/5", "--m", "10", "--r", "1,2"],
    "legendre": ["--rho", "3/4", "--m", "10", "--z", "5"],
    "lemmas": ["--samples", "500"],
    "integral312": ["--h", "2,4", "--delta", "0.1"],
    "chain": ["--rho", "3/4", "--Q", "16"],
    "entropy": ["--c", "1/sqrt3"],
    "rate": ["--t", "0.7", "--r", "3"],
    "claim": ["--probs", "1/3,1/3,1/3", "--m", "8", "--B", "3"],
    "mc-squares": ["--probs", "1/3,1/3,1/3", "--m", "6", "--B", "2", "--k-max", "5",
                   "--samples", "2000"],
}


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize("command", sorted(SMALL_RUNS))
def test_json_validates_against_schema(capsys, command):
    code, out, _ = run(capsys, command, *SMALL_RUNS[command], "--format", "json", "--threads", "2")
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, load_schema())
    assert doc["schema"] == "coinsieve/v1" and doc["command"] == command


@pytest.mark.parametrize("command", sorted(SMALL_RUNS))
def test_csv_parses(capsys, command):
    code, out, _ = run(capsys, command, *SMALL_RUNS[command])
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out, newline="")))
    assert rows


def test_rq_prints_float_and_exact(capsys):
    code, out, _ = run(capsys, "rq", "--q", "3", "--m", "2", "--rho", "1/2")
    row = next(csv.DictReader(io.StringIO(out)))
    assert code == 0 and row["rq"].startswith("0.1666666666") and row["rq_exact"] == "1/6"
    code, out, _ = run(capsys, "rq", "--q", "3", "--m", "2", "--rho", "0.5")
    assert "rq_exact" not in next(csv.DictReader(io.StringIO(out)))


def test_sweep_row_count(capsys):
    code, out, _ = run(capsys, "sweep", "--rho", "0.75", "--m", "32", "--q-max", "99",
                       "--precision-bits", "53")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0
    assert [int(r["q"]) for r in rows] == [int(q) for q in odd_squarefree_upto(99)]


def test_entropy_prints_root(capsys):
    code, out, _ = run(capsys, "entropy", "--c", "1/sqrt3")
    row = next(csv.DictReader(io.StringIO(out)))
    assert code == 0 and float(row["t"]) == pytest.approx(0.76153323642591895, abs=1e-15)


def test_parse_real():
    assert parse_real("1/sqrt3") == pytest.approx(3**-0.5, abs=1e-16)
    assert parse_real("2/sqrt(5)") == pytest.approx(2 / 5**0.5)
    assert parse_real("0.9") == 0.9
    with pytest.raises(ValueError):
        parse_real("__import__('os')")


def test_exit_codes(capsys, tmp_path):
    assert run(capsys, "bogus")[0] == 1
    assert run(capsys)[0] == 1
    assert run(capsys, "rq", "--q", "3")[0] == 1
    code, _, err = run(capsys, "rq", "--q", "4", "--m", "2", "--rho", "1/2")
    assert code == 2 and "odd" in err
    assert run(capsys, "rq", "--q", "3", "--m", "2", "--rho", "1/3")[0] == 2
    assert run(capsys, "entropy", "--c", "0.3")[0] == 2
    out = tmp_path / "partial.json"
    code, _, err = run(capsys, "sweep", "--rho", "3/4", "--m", "16", "--q-max", "99",
                       "--work-budget", "500", "--format", "json", "--out", str(out))
    doc = json.loads(out.read_text())
    assert code == 3 and doc["partial"] is True and doc["rows"]
    jsonschema.validate(doc, load_schema())


def test_config_file(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"rho": "3/4", "m": 8, "q": 5}))
    code, out, _ = run(capsys, "rq", "--config", str(cfg))
    assert code == 0 and "3721/81920" in out
    code, out, _ = run(capsys, "rq", "--config", str(cfg), "--q", "7", "--precision-bits", "53")
    assert code == 0 and "15167/458752" in out
    cfg.write_text(json.dumps({"rho": "3/4", "bogus": 1}))
    assert run(capsys, "rq", "--config", str(cfg))[0] == 2


def test_byte_identical_across_threads(tmp_path):
    outs = []
    for threads in ("1", "3", "1"):
        path = tmp_path / f"out{len(outs)}.csv"
        subprocess.run([sys.executable, "-m", "coinsieve", "mc-squares", "--t", "0.5", "--m", "9",
                        "--B", "2", "--samples", "140000", "--seed", "4", "--threads", threads,
                        "--out", str(path)], check=True)
        outs.append(path.read_bytes())
    assert outs[0] == outs[1] == outs[2]
