import json
import os
import subprocess

import pytest

CLI = os.environ.get("PCAPLAB_CLI")

pytestmark = pytest.mark.skipif(not CLI, reason="PCAPLAB_CLI not set")


def run(*args):
    return subprocess.run([CLI, *args], capture_output=True, text=True, timeout=600)


def test_missing_subcommand_is_usage_error():
    assert run().returncode == 2


def test_unknown_check_is_configuration_error(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[experiment]\nfixtures = ball\nchecks = capacity, bogus\n")
    r = run("verify", "--config", str(cfg), "--out", str(tmp_path / "run"))
    assert r.returncode == 2
    assert not (tmp_path / "run").exists()


def test_p_out_of_range_is_configuration_error(tmp_path):
    assert run("solve", "--p", "3.5", "--out", str(tmp_path / "run")).returncode == 2


def test_solve_writes_manifest_and_compare(tmp_path):
    for name in ("a", "b"):
        r = run("solve", "--fixture", "ball", "--p", "1.5", "--h", "0.125", "--out", str(tmp_path / name), "--json")
        assert r.returncode == 0, r.stderr
        manifest = json.loads(r.stdout)
        assert manifest["overall"] == "PASS"
    assert (tmp_path / "a" / "manifest.json").exists()
    assert (tmp_path / "a" / "reports.csv").exists()
    c = run("compare", str(tmp_path / "a"), str(tmp_path / "b"))
    assert c.returncode == 0, c.stdout
