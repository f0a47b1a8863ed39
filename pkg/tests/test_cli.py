import os

import pytest

from noisyflow.cli import main
from noisyflow.config import parse_config, parse_expression, serialize_config, serialize_expression
from noisyflow.errors import ConfigError
from noisyflow.experiments import SweepConfig, SystemSpec, NoiseSpec, Thresholds
from noisyflow.fields import Const, Power, Product, Trig
from noisyflow.geometry import Circle, Torus2

MINIMAL = """\
[domain]
kind = circle
length = 1.0
n = 64

[drift]
catalog = circle-positive

[noise]
kind = coordinate
eps = 0.2

[experiment]
kind = stability
"""


def test_parse_minimal_config():
    cfg = parse_config(MINIMAL)
    assert cfg.domain == Circle(1.0)
    assert cfg.n == (64,)
    assert cfg.epsilons == (0.2,)
    assert cfg.system.catalog == "circle-positive"
    assert cfg.kind == "stability"


def test_ascending_eps_is_an_error():
    text = MINIMAL.replace("eps = 0.2", "eps = 0.1, 0.5")
    with pytest.raises(ConfigError, match="descending"):
        parse_config(text)


def test_unknown_key_names_nearest():
    text = MINIMAL.replace("eps = 0.2", "epsilon = 0.2")
    with pytest.raises(ConfigError, match="nearest valid key: eps"):
        parse_config(text)


def test_unknown_section_is_an_error():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config(MINIMAL + "\n[domian]\nkind = circle\n")


def test_duplicate_key_is_an_error():
    text = MINIMAL.replace("length = 1.0", "length = 1.0\nlength = 2.0")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config(text)


def test_error_reports_line_numbers():
    text = MINIMAL.replace("eps = 0.2", "eps = 0.2, 0.9")  # ascending, on line 11
    try:
        parse_config(text)
        raise AssertionError("expected ConfigError")
    except ConfigError as exc:
        (line, key, _), = exc.locations
        assert key == "eps"
        assert line == 11


# ---------------------------------------------------------------------------
# expressions
# ---------------------------------------------------------------------------


def test_expression_parsing_matches_forms():
    lengths = (1.0,)
    assert parse_expression("const:2.5", lengths) == Const(2.5)
    form = parse_expression("cos:axis=0,freq=2,amp=0.5,offset=1.0", lengths)
    assert form == Trig("cos", 0, 2, 0.5, 1.0, 1.0)
    nested = parse_expression("product(const:2.0; rsqrt(sin:axis=0,freq=1,offset=2.0))", lengths)
    assert nested == Product(Const(2.0), Power(Trig("sin", 0, 1, 1.0, 2.0, 1.0), -0.5))


def test_expression_round_trip():
    lengths = (1.0,)
    for text in (
        "const:1.5",
        "cos:axis=0,freq=1,amp=0.5,offset=1",
        "sum(const:1; sin:axis=0,freq=3,amp=0.25,offset=0)",
        "product(affine:axis=0,slope=2,intercept=1; const:3)",
        "rsqrt(cos:axis=0,freq=1,amp=0.5,offset=2)",
    ):
        form = parse_expression(text, lengths)
        assert parse_expression(serialize_expression(form), lengths) == form


def test_expression_errors():
    with pytest.raises(ValueError):
        parse_expression("cos:axis=5,freq=1", (1.0,))  # axis out of range
    with pytest.raises(ValueError):
        parse_expression("cos:axis=0,freq=1.5", (1.0,))  # fractional cycles
    with pytest.raises(ValueError):
        parse_expression("tan:axis=0", (1.0,))
    with pytest.raises(ValueError):
        parse_expression("cos:axis=0,zzz=1", (1.0,))


def test_config_round_trip_rich():
    cfg = SweepConfig(
        kind="selection",
        domain=Torus2(1.0, 1.0),
        n=(32, 32),
        epsilons=(0.5, 0.1),
        system=SystemSpec(catalog="torus-shear"),
        noise=NoiseSpec(kind="explicit",
                        a0_forms=(Const(0.0), Const(0.0)),
                        ai_forms=((Const(1.0), Const(0.0)), (Const(0.0), Const(1.0)))),
        target=Trig("cos", 1, 1, 0.5, 1.0, 1.0),
        out_dir="results",
        thresholds=Thresholds(selection_sup=1e-3),
        dt_factor=1e-3,
        scheme="crank-nicolson",
        workers=4,
        admissibility_p=3.5,
    )
    assert parse_config(serialize_config(cfg)) == cfg


# ---------------------------------------------------------------------------
# command-line entry
# ---------------------------------------------------------------------------


def write_config(tmp_path, text):
    path = tmp_path / "exp.ini"
    path.write_text(text)
    return str(path)


ROTATION = """\
[domain]
kind = torus2
lengths = 1.0, 1.0
n = 16, 16

[drift]
catalog = torus-rotation

[noise]
kind = coordinate
eps = 0.5, 0.1

[experiment]
kind = stability
"""


def test_cli_sweep_rotation_passes(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["sweep", "--config", write_config(tmp_path, ROTATION), "--out", str(out)])
    assert code == 0
    lines = (out / "stability.csv").read_text().splitlines()
    assert lines[0] == "eps,n,min_u,max_u,w12,residual,l1_dist_to_u0"
    for line in lines[1:]:
        assert float(line.split(",")[-1]) <= 1e-10


def test_cli_verdict_failure_exits_2(tmp_path, capsys):
    text = ROTATION.replace("kind = stability", "kind = stability\nbound_factor = 0.5")
    code = main(["sweep", "--config", write_config(tmp_path, text)])
    assert code == 2
    assert "verdict failure" in capsys.readouterr().err


def test_cli_evolve_rejects_bad_dt(tmp_path, capsys):
    code = main(["evolve", "--config", write_config(tmp_path, ROTATION), "--dt", "-0.5"])
    assert code == 1
    assert "dt must be positive" in capsys.readouterr().err


def test_cli_bad_config_exits_1(tmp_path, capsys):
    code = main(["sweep", "--config", write_config(tmp_path, ROTATION.replace("eps =", "epsilon ="))])
    assert code == 1
    assert "nearest valid key" in capsys.readouterr().err


def test_cli_oracle1d_artifacts(tmp_path):
    circle = MINIMAL.replace("n = 64", "n = 128")
    out = tmp_path / "out"
    code = main(["oracle1d", "--config", write_config(tmp_path, circle),
                 "--eps", "0.3", "--out", str(out), "--quiet"])
    assert code == 0
    lines = (out / "oracle.csv").read_text().splitlines()
    assert lines[0] == "x,u,u0"
    assert len(lines) == 129
    assert "C_eps" in (out / "oracle_summary.txt").read_text()
    # atomic writes leave no temporaries behind
    assert not [p for p in os.listdir(out) if p.startswith(".tmp-")]


def test_cli_check_degenerate_noise_fails(tmp_path):
    text = MINIMAL.replace(
        "kind = coordinate",
        "kind = explicit\na1 = sin:axis=0,freq=1,amp=1,offset=0",
    ).replace("n = 64", "n = 65")
    code = main(["check", "--config", write_config(tmp_path, text), "--quiet"])
    assert code == 2


def test_cli_check_passes_for_coordinate_noise(tmp_path):
    code = main(["check", "--config", write_config(tmp_path, MINIMAL), "--quiet"])
    assert code == 0


def test_cli_n_and_eps_overrides(tmp_path, capsys):
    code = main(["stationary", "--config", write_config(tmp_path, MINIMAL),
                 "--n", "128", "--eps", "0.4,0.2"])
    assert code == 0
    out = capsys.readouterr().out
    assert "eps=0.4" in out and "eps=0.2" in out
