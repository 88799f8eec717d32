import io
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from drm.model import (ConfigError, ModelParams, derive_geometry, load_config)


class TestModelParams:
    def test_defaults(self):
        p = ModelParams()
        assert (p.g, p.v_plus, p.v_minus, p.omega, p.gamma, p.hbar) == \
            (1.0, 1.0, 1.0, 4.0, 0.0, 0.5)

    @pytest.mark.parametrize("kw,name", [
        (dict(g=0.0), "G"), (dict(g=-1.0), "G"),
        (dict(v_plus=-0.1), "V_plus"), (dict(v_minus=-2.0), "V_minus"),
        (dict(omega=0.0), "omega"), (dict(omega=-4.0), "omega"),
        (dict(gamma=-0.05), "gamma"),
        (dict(hbar=0.0), "hbar"), (dict(hbar=-0.5), "hbar"),
    ])
    def test_validation_names_field(self, kw, name):
        with pytest.raises(ValueError, match=name):
            ModelParams(**kw)

    def test_period(self):
        assert ModelParams(omega=4.0).period == pytest.approx(math.pi / 2)
        assert ModelParams(omega=2.1).period == pytest.approx(2 * math.pi / 2.1)


class TestGeometry:
    def test_resonance_centers_and_widths(self):
        geo = derive_geometry(ModelParams(omega=4.0))
        assert geo.i_plus == 4.0
        assert geo.i_minus == -4.0
        assert geo.delta_i_plus == pytest.approx(4.0)
        assert geo.delta_i_minus == pytest.approx(4.0)

    def test_gamma_critical_matches_stated_value(self):
        # omega=4, G=V+=1 -> gamma_c = 0.25
        assert derive_geometry(ModelParams(omega=4.0)).gamma_critical == pytest.approx(0.25)

    def test_locked_phase_zero_at_zero_damping(self):
        geo = derive_geometry(ModelParams(omega=4.0, gamma=0.0))
        assert geo.theta0 == 0.0
        assert geo.theta0_unstable == pytest.approx(math.pi)

    def test_locked_phase_value(self):
        p = ModelParams(omega=4.0, gamma=0.05)
        geo = derive_geometry(p)
        assert geo.theta0 == pytest.approx(math.asin(0.05 * 4.0 / 1.0))
        assert geo.theta0_unstable == pytest.approx(math.pi - geo.theta0)

    def test_locked_phase_absent_beyond_critical(self):
        geo = derive_geometry(ModelParams(omega=4.0, gamma=0.3))
        assert geo.theta0 is None and geo.theta0_unstable is None

    def test_locked_phase_at_exact_threshold(self):
        geo = derive_geometry(ModelParams(omega=4.0, gamma=0.25))
        assert geo.theta0 == pytest.approx(math.pi / 2)

    def test_asymmetric_widths(self):
        geo = derive_geometry(ModelParams(v_plus=1.0, v_minus=0.0))
        assert geo.delta_i_plus == pytest.approx(4.0)
        assert geo.delta_i_minus == 0.0

    @given(st.floats(0.1, 10), st.floats(0.0, 5), st.floats(0.5, 8),
           st.floats(0.0, 1.0))
    def test_geometry_invariants(self, g, v, omega, gamma):
        p = ModelParams(g=g, v_plus=v, v_minus=v, omega=omega, gamma=gamma)
        geo = derive_geometry(p)
        assert geo.i_plus == -geo.i_minus > 0
        assert geo.delta_i_plus == pytest.approx(4 * math.sqrt(v / g))
        ratio = gamma * geo.i_plus / v if v > 0 else (0.0 if gamma == 0 else math.inf)
        if abs(ratio) <= 1:
            assert geo.theta0 is not None and 0 <= geo.theta0 <= math.pi / 2
        else:
            assert geo.theta0 is None


class TestConfig:
    def test_full_document(self):
        cfg = load_config(io.StringIO("""
[model]
G = 2.0
V_plus = 0.5
V_minus = 0.0
omega = 3.0
gamma = 0.1
hbar = 0.25

[classical]
grid_theta = 100
grid_action = 50
tol = 0.2

[quantum]
n_max = 40
steps_per_period = 256

[run]
seed = 7
out_dir = "results"
"""))
        assert cfg.params == ModelParams(g=2.0, v_plus=0.5, v_minus=0.0,
                                         omega=3.0, gamma=0.1, hbar=0.25)
        assert cfg.classical.grid_theta == 100
        assert cfg.classical.tol == 0.2
        assert cfg.quantum.n_max == 40
        assert cfg.run.seed == 7 and cfg.run.out_dir == "results"

    def test_missing_gamma_defaults_to_zero(self):
        cfg = load_config(io.StringIO("[model]\nomega = 2.1\n"))
        assert cfg.params.gamma == 0.0
        assert cfg.params.omega == 2.1

    def test_empty_document_gives_defaults(self):
        cfg = load_config(io.StringIO(""))
        assert cfg.params == ModelParams()
        assert cfg.classical.steps_per_period == 512
        assert cfg.quantum.sample_every_periods == 10
        assert cfg.run.workers == 1

    def test_unknown_key_named(self):
        with pytest.raises(ConfigError, match="Vplus"):
            load_config(io.StringIO("[model]\nVplus = 1.0\n"))
        with pytest.raises(ConfigError, match="grid"):
            load_config(io.StringIO("[classical]\ngrid = 10\n"))

    def test_unknown_section_named(self):
        with pytest.raises(ConfigError, match="modle"):
            load_config(io.StringIO("[modle]\nG = 1.0\n"))

    def test_malformed_document(self):
        with pytest.raises(ConfigError, match="malformed"):
            load_config(io.StringIO("[model\nG = 1.0\n"))

    def test_constraint_violation_named(self):
        with pytest.raises(ConfigError, match="gamma"):
            load_config(io.StringIO("[model]\ngamma = -0.1\n"))

    def test_wrong_type_named(self):
        with pytest.raises(ConfigError, match="steps_per_period"):
            load_config(io.StringIO('[classical]\nsteps_per_period = "fast"\n'))
        with pytest.raises(ConfigError, match="n_max"):
            load_config(io.StringIO("[quantum]\nn_max = 12.5\n"))

    def test_missing_file_named(self, tmp_path):
        path = tmp_path / "nope.toml"
        with pytest.raises(ConfigError, match="nope.toml"):
            load_config(path)

    def test_file_roundtrip(self, tmp_path):
        path = tmp_path / "c.toml"
        path.write_text("[model]\nomega = 1.6\nhbar = 0.25\n")
        cfg = load_config(path)
        assert cfg.params.omega == 1.6 and cfg.params.hbar == 0.25
