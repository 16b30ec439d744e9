import json
import subprocess
import sys
from pathlib import Path

import pytest

from kfplab import cli


def run_cli(args):
    return cli.main(args)


def test_unknown_suite(tmp_path, capsys):
    code = run_cli(["run", "--suite", "nonsense", "--out", str(tmp_path)])
    assert code == 1
    assert "unknown suite" in capsys.readouterr().err


def test_missing_config(tmp_path, capsys):
    code = run_cli(["run", "--suite", "geometry", "--out", str(tmp_path),
                    "--config", str(tmp_path / "missing.ini")])
    assert code == 1


def test_report_empty_dir(tmp_path, capsys):
    code = run_cli(["report", "--out", str(tmp_path)])
    assert code == 1


def test_default_config_prints(capsys):
    assert run_cli(["default-config"]) == 0
    text = capsys.readouterr().out
    assert "[geometry]" in text and "[sparse]" in text


def test_geometry_suite_end_to_end(tmp_path, capsys):
    code = run_cli(["run", "--suite", "geometry", "--out", str(tmp_path),
                    "--seed", "3"])
    assert code == 0
    summary = json.loads((tmp_path / "geometry" / "summary.json").read_text())
    assert summary["n_failed"] == 0
    assert summary["seed"] == 3
    assert (tmp_path / "geometry" / "checks.csv").exists()


def test_determinism_byte_identical(tmp_path):
    for sub in ("one", "two"):
        assert run_cli(["run", "--suite", "geometry", "--out",
                        str(tmp_path / sub), "--seed", "7"]) == 0
    a = (tmp_path / "one" / "geometry" / "summary.json").read_bytes()
    b = (tmp_path / "two" / "geometry" / "summary.json").read_bytes()
    assert a == b


def test_tampered_golden_exits_2(tmp_path):
    # run the kernels suite against a package copy with a corrupted golden
    # table; the process must exit 2 and name the mismatched table
    import kfplab
    pkg_dir = Path(kfplab.__file__).parent
    golden = pkg_dir / "goldens" / "gamma_parabolic.csv"
    original = golden.read_text()
    lines = original.splitlines()
    cols = lines[1].split(",")
    cols[-1] = str(float(cols[-1]) * 1.5 + 1.0)
    tampered = "\n".join([lines[0], ",".join(cols)] + lines[2:]) + "\n"
    try:
        golden.write_text(tampered)
        proc = subprocess.run(
            [sys.executable, "-m", "kfplab.cli", "run", "--suite", "kernels",
             "--out", str(tmp_path)],
            capture_output=True, text=True, timeout=1200)
        assert proc.returncode == 2
        assert "gamma_parabolic" in proc.stderr
    finally:
        golden.write_text(original)


def test_report_after_suite(tmp_path):
    assert run_cli(["run", "--suite", "geometry", "--out", str(tmp_path)]) == 0
    assert run_cli(["report", "--out", str(tmp_path)]) == 0
    merged = json.loads((tmp_path / "report" / "summary.json").read_text())
    assert merged["suites"]["geometry"]["status"] == "PASSED"
    assert merged["suites"]["sparse"]["status"] == "SKIPPED"
    assert (tmp_path / "report" / "theorems.csv").exists()
