"""Annotated parameter file loading and provenance enforcement."""

import math

import pytest

from floatfarm.params import (
    ParameterError,
    default_params,
    default_params_path,
    load_params,
    parse_annotated,
)


@pytest.fixture(scope="module")
def params():
    return default_params()


class TestParseAnnotated:
    """Sectioned key/value parsing keeps the trailing comments."""

    def test_values_and_notes(self, tmp_path):
        f = tmp_path / "a.params"
        f.write_text("[sec]\nalpha = 2.5  # catalog: somewhere\n")
        values, notes = parse_annotated(f)
        assert values == {"sec": {"alpha": 2.5}}
        assert notes["sec.alpha"] == "catalog: somewhere"

    def test_blank_lines_and_comments_skipped(self, tmp_path):
        f = tmp_path / "a.params"
        f.write_text("# header\n\n[sec]\n\nk = 1 # default: x\n")
        values, _ = parse_annotated(f)
        assert values["sec"]["k"] == 1.0

    def test_key_before_section_rejected(self, tmp_path):
        f = tmp_path / "a.params"
        f.write_text("k = 1 # default: x\n")
        with pytest.raises(ParameterError, match="before any"):
            parse_annotated(f)

    def test_non_numeric_value_rejected(self, tmp_path):
        f = tmp_path / "a.params"
        f.write_text("[sec]\nk = fast # default: x\n")
        with pytest.raises(ParameterError, match="non-numeric"):
            parse_annotated(f)

    def test_missing_equals_rejected(self, tmp_path):
        f = tmp_path / "a.params"
        f.write_text("[sec]\njust a line\n")
        with pytest.raises(ParameterError, match="key = value"):
            parse_annotated(f)


class TestLoadDefaults:
    """The bundled parameter file builds a complete, consistent set."""

    def test_catalog_spot_values(self, params):
        assert params.aero.rotor_diameter == 126.0
        assert params.hub_height == 90.0
        assert params.rated_power == 5.0e6
        assert params.gear_ratio == 97.0
        assert params.generator_efficiency == 0.944

    def test_limit_unit_conversion(self, params):
        lim = params.limits
        assert lim.omega_g_min == pytest.approx(669.3 * math.pi / 30.0)
        assert lim.omega_g_max == pytest.approx(1173.7 * math.pi / 30.0)
        assert lim.yaw_max == 60.0
        assert lim.beta_min == -30.0

    def test_mooring_geometry_wired_through(self, params):
        assert len(params.mooring.lines) == 3
        assert params.mooring.lines[0].water_depth == 200.0

    def test_platform_secondary_dofs(self, params):
        # roll and pitch share the catalog inertia; heave is much lighter
        assert params.platform.roll.inertia == params.platform.pitch.inertia
        assert params.platform.heave.total_inertia < params.platform.roll.total_inertia

    def test_every_constant_has_provenance(self, params):
        assert len(params.provenance) >= 45
        for note in params.provenance.values():
            tag = note.split(":", 1)[0]
            assert tag in ("catalog", "default", "derived")

    def test_provenance_lines_echo(self, params):
        lines = params.provenance_lines()
        assert len(lines) == len(params.provenance)
        assert any(line.startswith("aero.rotor_diameter") for line in lines)

    def test_default_path_exists(self):
        assert default_params_path().exists()


class TestLoadValidation:
    """Structural problems in a parameter file are reported precisely."""

    def _mutate_default(self, tmp_path, old, new):
        text = default_params_path().read_text()
        assert old in text
        f = tmp_path / "edited.params"
        f.write_text(text.replace(old, new))
        return f

    def test_missing_section(self, tmp_path):
        f = self._mutate_default(tmp_path, "[mooring]", "[moorings]")
        with pytest.raises(ParameterError, match="mooring"):
            load_params(f)

    def test_missing_key(self, tmp_path):
        f = self._mutate_default(tmp_path, "rotor_diameter", "rotor_size")
        with pytest.raises(ParameterError, match="rotor_diameter"):
            load_params(f)

    def test_untagged_value_rejected(self, tmp_path):
        f = self._mutate_default(tmp_path,
                                 "# catalog: reference 5 MW rotor diameter, m",
                                 "# reference 5 MW rotor diameter, m")
        with pytest.raises(ParameterError, match="provenance"):
            load_params(f)
