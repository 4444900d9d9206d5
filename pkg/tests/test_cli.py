import csv
import io
import math

import pytest

from conftest import make_config
from rcotto import cli
from rcotto.cli import (
    CSV_HEADER,
    EXIT_CONFIG,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_UNCONVERGED,
    ConfigError,
    SweepSpec,
    converged_at,
    format_config,
    main,
    parse_config,
    parse_config_text,
    parse_variants,
    render_csv,
    run_converge,
    run_cycle,
    run_sweep,
    sweep_rows,
)
from rcotto.linops import NumericalError
from rcotto.otto import CouplingModel, DecouplingMode, StrokeMode

BASE = """\
# reference parameters, energies in units of epsilon_c
epsilon_h = 2
epsilon_c = 1
delta_h = 1
delta_c = 1
beta_h = 1
beta_c = 2.5   # colder side
omega_c = 2
alpha = 0.005
"""


def config_text(**overrides):
    lines = []
    for line in BASE.splitlines():
        key = line.split("=")[0].strip()
        if key in overrides:
            value = overrides.pop(key)
            if value is not None:
                lines.append(f"{key} = {value}")
        else:
            lines.append(line)
    lines += [f"{k} = {v}" for k, v in overrides.items()]
    return "\n".join(lines) + "\n"


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


# -- config ---------------------------------------------------------------------

def test_parse_reference_config_and_defaults():
    cfg = parse_config_text(BASE)
    assert cfg == make_config()
    assert cfg.n == 30
    assert cfg.coupling_model is CouplingModel.RC_STRONG
    assert cfg.stroke_mode is StrokeMode.ADIABATIC
    assert cfg.decoupling_mode is DecouplingMode.INSTANTANEOUS


@pytest.mark.parametrize("cfg", [make_config(), make_config(eps_h=0.1 + 0.2, alpha=1e-5, n=17, model="weak",
                                                            stroke="sudden"),
                                 make_config(decoupling="adiabatic", beta_c=1.75)])
def test_config_round_trip(cfg):
    assert parse_config_text(format_config(cfg)) == cfg


def test_parse_config_from_file(tmp_path):
    path = tmp_path / "cycle.cfg"
    path.write_text(BASE)
    assert parse_config(path) == make_config()


def test_reject_inverted_temperatures_with_line():
    with pytest.raises(ConfigError, match="cold reservoir must be colder") as info:
        parse_config_text(config_text(beta_c=0.5))
    assert info.value.line is not None


def test_reject_negative_alpha():
    with pytest.raises(ConfigError, match="alpha") as info:
        parse_config_text(config_text(alpha=-0.1))
    assert info.value.line == 9


@pytest.mark.parametrize("text, match", [
    (config_text(gamma=1), "unknown key"),
    (config_text(beta_h="one"), "line 6"),
    (config_text(alpha=None), "missing"),
    (config_text(n="3.5"), "integer"),
    (config_text(n=0), "n must be"),
    (config_text(coupling_model="medium"), "CouplingModel"),
    (BASE + "alpha = 0.1\n", "duplicate"),
    (BASE + "just text\n", "key = value"),
    (config_text(epsilon_c=0, delta_c=0), "degenerate"),
])
def test_config_rejections(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config_text(text)


def test_parse_variants():
    vs = parse_variants("weak:adiabatic:instantaneous, rc-strong:sudden:adiabatic")
    assert vs == [(CouplingModel.WEAK, StrokeMode.ADIABATIC, DecouplingMode.INSTANTANEOUS),
                  (CouplingModel.RC_STRONG, StrokeMode.SUDDEN, DecouplingMode.ADIABATIC)]
    with pytest.raises(ConfigError):
        parse_variants("weak:adiabatic")
    with pytest.raises(ConfigError):
        parse_variants("")


# -- single cycle ---------------------------------------------------------------

def test_run_cycle_weak_reference():
    row = run_cycle(make_config(model="weak"))
    assert row.W_out == pytest.approx(0.0560834173683, abs=1e-12)
    assert row.eta == pytest.approx(0.367544467966, abs=1e-12)
    fields = row.to_csv().split(",")
    assert fields[0] == "none" and fields[1] == ""
    assert fields[5] == "0.0560834173683"
    assert fields[-2:] == ["30", "true"]


def test_decoupled_strong_row_matches_weak_row():
    strong = run_cycle(make_config(alpha=0.0))
    weak = run_cycle(make_config(alpha=0.0, model="weak"))
    for name in ("W_out", "Q_hot", "Q_cold", "W_dec_h", "W_dec_c", "Q_dec_h", "Q_dec_c", "eta"):
        assert abs(getattr(strong, name) - getattr(weak, name)) <= 1e-8, name


def test_sudden_weak_without_stroke_has_no_work():
    row = run_cycle(make_config(eps_h=1.0, model="weak", stroke="sudden"))
    assert abs(row.W_out) <= 1e-15
    # Heat still leaks from hot to cold, so the efficiency is defined and zero.
    assert row.Q_hot > 0 and row.eta == 0.0
    assert ",0,neither," in row.to_csv()


def test_negative_zero_is_not_printed():
    assert cli.fmt(-0.0) == "0"
    assert cli.fmt(1 / 3) == "0.333333333333"


# -- sweeps ---------------------------------------------------------------------

def test_two_step_sweep_hits_endpoints():
    rows = sweep_rows(SweepSpec("epsilon_h", 0.5, 4.0, 2, make_config(model="weak")))
    assert [r.value for r in rows] == [0.5, 4.0]


def test_sweep_row_count_and_order():
    variants = parse_variants("weak:adiabatic:instantaneous,rc-strong:adiabatic:adiabatic")
    rows = sweep_rows(SweepSpec("delta_h", 0.5, 2.0, 4, make_config(), variants))
    assert len(rows) == 8
    assert [r.coupling_model.value for r in rows] == ["weak"] * 4 + ["rc-strong"] * 4
    assert [r.value for r in rows[:4]] == [0.5, 1.0, 1.5, 2.0]
    assert all(r.sweep_param == "delta_h" for r in rows)


def test_sweep_csv_identical_across_workers(tmp_path):
    spec = SweepSpec("epsilon_h", 0.5, 4.0, 6, make_config(n=10),
                     parse_variants("weak:sudden:instantaneous,rc-strong:sudden:instantaneous"))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run_sweep(spec, a, workers=1)
    run_sweep(spec, b, workers=2)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == CSV_HEADER


def test_alpha_sweep_weak_constant_strong_approaches_weak():
    variants = parse_variants("weak:adiabatic:instantaneous,rc-strong:adiabatic:instantaneous,"
                              "rc-strong:adiabatic:adiabatic")
    rows = sweep_rows(SweepSpec("alpha", 1e-5, 0.05, 5, make_config(), variants))
    weak = [r for r in rows if r.coupling_model is CouplingModel.WEAK]
    assert len({r.to_csv().split(",", 2)[2] for r in weak}) == 1
    for mode in DecouplingMode:
        strong = [r for r in rows if r.coupling_model is CouplingModel.RC_STRONG and r.decoupling_mode is mode]
        gaps = [abs(r.W_out - weak[0].W_out) for r in strong]
        assert all(a < b for a, b in zip(gaps, gaps[1:]))
        assert abs(strong[0].eta - weak[0].eta) <= 0.01 * weak[0].eta


def test_alpha_sweep_moves_both_reservoirs():
    (_, _, cfg), = SweepSpec("alpha", 0.0, 0.2, 2, make_config()).configs()[1:]
    assert cfg.hot.alpha == cfg.cold.alpha == 0.2


def test_sweep_spec_rejections():
    with pytest.raises(ConfigError):
        SweepSpec("epsilon_h", 1.0, 1.0, 3, make_config())
    with pytest.raises(ConfigError):
        SweepSpec("epsilon_h", 0.0, 1.0, 1, make_config())
    with pytest.raises(ConfigError):
        SweepSpec("omega_c", 0.0, 1.0, 3, make_config())
    with pytest.raises(ConfigError):
        SweepSpec("beta_c", 0.1, 2.0, 3, make_config()).configs()


# -- convergence study ----------------------------------------------------------

def test_converge_decoupled_has_zero_change():
    rows = run_converge(make_config(alpha=0.0, n=20), 20)
    assert [r.n for r in rows] == [5, 10, 15, 20]
    assert rows[0].rel_delta is None
    assert all(r.rel_delta <= 1e-12 for r in rows[1:])


def test_converge_reference_parameters_by_thirty():
    rows = run_converge(make_config(), 30)
    assert converged_at(rows, 30)
    assert rows[-1].rel_delta <= 1e-6


def test_converge_strong_coupling_status_is_reported():
    cfg = make_config(eps_h=1.0, eps_c=1.0, delta_h=1.5, alpha=1.0)
    rows = run_converge(cfg, 40)
    assert all(r.rel_delta is None or math.isfinite(r.rel_delta) for r in rows)
    # Reported rather than assumed: the flag must agree with the tolerance.
    assert converged_at(rows, 30) == (rows[5].rel_delta <= 1e-6)


def test_converge_rejects_short_study():
    with pytest.raises(ConfigError):
        run_converge(make_config(n=30), 20)


# -- entry point ----------------------------------------------------------------

def write_cfg(tmp_path, text):
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return str(path)


def test_main_cycle_to_stdout(tmp_path, capsys):
    assert main(["cycle", "--config", write_cfg(tmp_path, config_text(coupling_model="weak"))]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[0] == CSV_HEADER and len(out) == 2
    assert rows_of("\n".join(out))[0]["W_out"] == "0.0560834173683"


def test_main_sweep_to_file(tmp_path):
    out = tmp_path / "sweep.csv"
    args = ["sweep", "--config", write_cfg(tmp_path, config_text(n=10)), "--param", "epsilon_h",
            "--from", "0.5", "--to", "4", "--steps", "3", "--variants", "weak:adiabatic:instantaneous",
            "--out", str(out)]
    assert main(args) == EXIT_OK
    rows = rows_of(out.read_text())
    assert [r["value"] for r in rows] == ["0.5", "2.25", "4"]


def test_main_converge(tmp_path, capsys):
    assert main(["converge", "--config", write_cfg(tmp_path, BASE), "--n-max", "30"]) == EXIT_OK
    assert capsys.readouterr().out.splitlines()[0] == "n,W_out,Q_hot,eta,rel_delta"


def test_main_config_errors(tmp_path):
    assert main(["cycle", "--config", write_cfg(tmp_path, config_text(beta_c=0.5))]) == EXIT_CONFIG
    assert main(["cycle", "--config", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG


def test_main_numerical_failure(tmp_path, monkeypatch):
    def broken(cfg):
        raise NumericalError("eigensolver diverged")
    monkeypatch.setattr(cli, "evaluate", broken)
    assert main(["cycle", "--config", write_cfg(tmp_path, BASE)]) == EXIT_NUMERICAL


def test_main_unconverged_and_override(tmp_path, capsys):
    path = write_cfg(tmp_path, config_text(n=4))
    assert main(["cycle", "--config", path]) == EXIT_UNCONVERGED
    assert capsys.readouterr().out.strip().endswith("false")
    assert main(["cycle", "--config", path, "--allow-unconverged"]) == EXIT_OK


def test_render_csv_header_only_when_empty():
    assert render_csv([]) == CSV_HEADER + "\n"
