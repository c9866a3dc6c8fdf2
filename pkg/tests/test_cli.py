import logging
import subprocess
import sys

import pytest

from fkslab.cli import ConfigError, main, parse_config, run

MINIMAL = """
[model]
q = 1
p = 0.5
[geometry]
width = 6
height = 6
[experiment]
samples = 200
"""


def test_minimal_config_fills_and_logs_defaults(caplog):
    with caplog.at_level(logging.INFO, logger="fkslab"):
        cfg = parse_config(MINIMAL, "sample", env={})
    assert cfg.model["sampler"] == "auto" and cfg.geometry["fiber"] == "trivial"
    assert "default applied: [model] boundary = 'free'" in caplog.text
    assert "master seed = 0" in caplog.text


def test_q_below_one_rejected():
    with pytest.raises(ConfigError, match="q must be ≥ 1"):
        parse_config("[model]\nq = 0.5\n", env={})


@pytest.mark.parametrize("text,field", [("[model]\nqq = 1\n", "qq"),
                                        ("[modle]\nq = 1\n", "modle"),
                                        ("[model]\np = 1.5\n", "p"),
                                        ("[experiment]\nsamples = 0\n", "samples"),
                                        ("[geometry]\nfiber = Z9\n", "fiber"),
                                        ("[model]\nsampler = gibbs\n", "sampler")])
def test_bad_configs_name_the_field(text, field):
    with pytest.raises(ConfigError, match=field):
        parse_config(text, env={})


def test_disconnected_fiber_file_lists_components(tmp_path):
    f = tmp_path / "fiber.txt"
    f.write_text("4\n0 1\n2 3\n")
    with pytest.raises(ConfigError, match=r"\[\[0, 1\], \[2, 3\]\]"):
        parse_config(f"[geometry]\nfiber_file = {f}\n", env={})


def test_seed_precedence():
    assert parse_config(MINIMAL, env={"RC_SEED": "5"}).seed == 5
    assert parse_config(MINIMAL + "seed = 9\n", env={"RC_SEED": "5"}).seed == 9
    assert parse_config(MINIMAL + "seed = 9\n", seed=3, env={"RC_SEED": "5"}).seed == 3
    with pytest.raises(ConfigError):
        parse_config(MINIMAL, env={"RC_SEED": "abc"})


def test_hash_depends_on_config_and_seed():
    a = parse_config(MINIMAL, env={})
    b = parse_config(MINIMAL, seed=1, env={})
    c = parse_config(MINIMAL.replace("p = 0.5", "p = 0.4"), env={})
    assert len({a.config_hash, b.config_hash, c.config_hash}) == 3


def _run(tmp_path, sub, text, out="out", extra=()):
    cfgf = tmp_path / f"{sub}.ini"
    cfgf.write_text(text)
    return main([sub, "--config", str(cfgf), "--out", str(tmp_path / out), *extra])


def test_invalid_config_exits_2_and_writes_nothing(tmp_path):
    assert _run(tmp_path, "sample", "[model]\nq = 0\n") == 2
    assert not (tmp_path / "out").exists()


@pytest.mark.parametrize("sub,text", [
    ("sample", MINIMAL),
    ("crossing", "[geometry]\nn = 4\n[experiment]\nsamples = 300\nps = 0.4,0.6\n"),
    ("hamming", "[geometry]\nfiber = K2\nrects = 0,1,0,2\n[experiment]\nsamples = 300\n"),
    ("potts", "[model]\nq = 2\nbeta = 0.5\n[geometry]\ngraph = diamond\n"
              "[experiment]\nsamples = 500\n"),
    ("gluing-demo", "[model]\np = 0.45\n[geometry]\nfiber = K2\nn = 2\n"
                    "[experiment]\nsamples = 200\n"),
    ("decay", "[model]\np = 0.3\n[geometry]\nn = 2,4\n[experiment]\nsamples = 200\n"),
    ("sharpness", "[geometry]\nn = 4\n[experiment]\nsamples = 200\nps = 0.7\n"),
    ("scan-pc", "[geometry]\nn = 4\n[experiment]\nsamples = 300\ntolerance = 0.02\n"),
])
def test_subcommands_are_byte_identical_on_rerun(tmp_path, sub, text):
    assert _run(tmp_path, sub, text, "a") == 0
    assert _run(tmp_path, sub, text, "b") == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files
    for name in files:
        a = (tmp_path / "a" / name).read_bytes()
        assert a == (tmp_path / "b" / name).read_bytes()
        first = a.decode().splitlines()[0]
        assert first.startswith("# config_hash=") and " seed=0 " in first


def test_verify_exact_exit_zero(tmp_path):
    assert _run(tmp_path, "verify-exact", "[experiment]\nfamilies = false\n") == 0
    text = (tmp_path / "out" / "verify-exact.csv").read_text()
    assert ",0," not in text.split("\n", 2)[2] or "pass" in text


def test_plot_flag_writes_svg(tmp_path):
    pytest.importorskip("matplotlib")
    text = "[geometry]\nn = 4\n[experiment]\nsamples = 200\nps = 0.4,0.6\n"
    assert _run(tmp_path, "crossing", text, extra=["--plot"]) == 0
    assert (tmp_path / "out" / "crossing.svg").read_text().lstrip().startswith("<?xml")


def test_missing_beta_is_a_config_error(tmp_path):
    assert _run(tmp_path, "potts", "[model]\nq = 2\n") == 2


def test_experiment_failure_exits_1(tmp_path, monkeypatch):
    import fkslab.cli as cli

    def boom(cfg):
        raise RuntimeError("chain diverged")
    monkeypatch.setitem(cli.COMMANDS, "sample", boom)
    assert _run(tmp_path, "sample", MINIMAL) == 1
    assert not (tmp_path / "out").exists()


def test_module_entry_point(tmp_path):
    cfgf = tmp_path / "c.ini"
    cfgf.write_text(MINIMAL)
    res = subprocess.run([sys.executable, "-m", "fkslab", "sample", "--config", str(cfgf),
                          "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "o" / "sample.csv").exists()
