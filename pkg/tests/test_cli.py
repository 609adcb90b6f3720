import argparse

import pytest

from nomaisac import cli


def test_parse_eps():
    assert cli.parse_eps("1e-2, 1e-3") == [1e-2, 1e-3]
    r = cli.parse_eps("1e-4:1e-2:3")
    assert r == pytest.approx([1e-4, 1e-3, 1e-2])
    for bad in ("", "1:2", "0:1:3", "a,b"):
        with pytest.raises(argparse.ArgumentTypeError):
            cli.parse_eps(bad)


def test_parse_schemes_and_seed():
    assert cli.parse_schemes("noma,no_senic") == ["noma", "no_senic"]
    with pytest.raises(argparse.ArgumentTypeError):
        cli.parse_schemes("noma,bogus")
    with pytest.raises(argparse.ArgumentTypeError):
        cli.seed_type(str(2**64))


def _run(tmp_path, name, *args):
    out = tmp_path / name
    code = cli.main([*args, "--out", str(out)])
    return code, out


def test_tradeoff_command_is_deterministic(tmp_path):
    args = ("tradeoff", "--schemes", "noma,ideal_senic", "--eps", "1e-2,1e-3", "--realizations", "1")
    c1, o1 = _run(tmp_path, "a", *args)
    c2, o2 = _run(tmp_path, "b", *args)
    assert c1 == c2 == 0
    for f in ("tradeoff.csv", "tradeoff_avg.csv", "config.ini"):
        assert (o1 / f).read_bytes() == (o2 / f).read_bytes()


def test_config_file_and_overrides(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[system]\nn_antennas = 4\nn_users = 2\n")
    code, out = _run(tmp_path, "c", "convergence", "--config", str(ini), "--seed", "7", "--q", "2")
    assert code == 0
    text = (out / "config.ini").read_text()
    assert "rng_seed = 7" in text and "q_streams = 2" in text and "n_antennas = 4" in text
    assert (out / "convergence.csv").exists()
    assert "wall_ms" not in (out / "trace.jsonl").read_text()


def test_oracle_check_command(tmp_path, capsys):
    code, out = _run(tmp_path, "o", "oracle-check", "--resolution", "40")
    assert code == 0
    assert (out / "oracle.csv").read_text().count("\n") == 4
    assert "worst relative gap" in capsys.readouterr().out


def test_plot_writes_svg(tmp_path):
    pytest.importorskip("matplotlib")
    code, out = _run(tmp_path, "p", "q-sweep", "--q-values", "1,2", "--realizations", "1", "--plot")
    assert code == 0
    svg = (out / "qsweep.svg").read_text()
    assert svg.lstrip().startswith("<?xml")


def test_unknown_subcommand_exits():
    with pytest.raises(SystemExit):
        cli.main(["nope"])
