import json
import math

import pytest
from hypothesis import given, strategies as st

from modsynth.library import (
    LIBRARY_ENV_VAR, TWIST_LATTICE, LibraryError, ModularUnit, default_library, load_library, torque_limit,
    validate_assembly,
)


def U(variant, kind, twist=0, link=None):
    if kind in (3, 4) and link is None:
        link = "S1"
    return ModularUnit(variant, kind, twist, link)


def test_catalog_values():
    lib = default_library()
    H, L = lib.actuator("H"), lib.actuator("L")
    assert (H.mass, H.rated_speed, H.nominal_torque, H.max_torque, H.epsilon) == (0.57, 12.2, 12, 30.5, 3)
    assert (L.mass, L.rated_speed, L.nominal_torque, L.max_torque, L.epsilon) == (0.357, 20.3, 3.6, 6.8, 3)
    assert torque_limit("H") == 12 and torque_limit("L") == 3.6
    assert H.nominal_torque < H.max_torque and L.nominal_torque < L.max_torque


def test_twist_lattice():
    assert TWIST_LATTICE == tuple(range(-45, 91, 15))
    assert len(TWIST_LATTICE) == 10


def test_velocity_limits():
    lib = default_library()
    assert lib.actuator("H").velocity_limit == pytest.approx(1.2776, abs=1e-4)
    assert lib.actuator("L").velocity_limit == pytest.approx(2.1258, abs=1e-4)


def test_default_geometry():
    lib = default_library()
    assert dict(lib.module_body_length) == {"H": 0.12, "L": 0.09}
    assert dict(lib.module_body_radius) == {"H": 0.035, "L": 0.03}
    assert [lib.link(n).length for n in ("S1", "S2", "C1", "C2")] == [0.10, 0.15, 0.12, 0.12]
    assert lib.link("S1").bend_angle == 0 and abs(lib.link("C1").bend_angle) == 90
    assert all(lib.link(n).mass == 0.08 for n in ("S1", "S2", "C1", "C2"))


def test_reference_sequences_accepted():
    first = [U("H", 1), U("H", 4, -45, "S2"), U("H", 3, 45, "C2")]
    second = [U("H", 1), U("H", 2, 15), U("L", 2), U("L", 1, -45), U("L", 2, 60)]
    assert validate_assembly(first).ok
    assert validate_assembly(second).ok


def test_rule_violations():
    r = validate_assembly([U("L", 1), U("H", 2)])
    assert not r.ok and r.rules == {"R1", "R3"}
    r = validate_assembly([U("H", 1), U("H", 2), U("H", 3), U("H", 4)])
    assert r.rules == {"R2", "R4"}
    # the R3 offender is reported by index
    r = validate_assembly([U("H", 1), U("L", 1), U("H", 1)])
    assert [(v.rule, v.index) for v in r.violations] == [("R3", 2)]


def test_r2_inactive_up_to_three():
    assert validate_assembly([U("H", 1), U("H", 1), U("H", 1)]).ok
    assert not validate_assembly([U("H", 1), U("H", 1), U("L", 1), U("H", 1)]).ok


@pytest.mark.parametrize("n", [0, 1, 7])
def test_sequence_length_domain(n):
    with pytest.raises(ValueError):
        validate_assembly([U("H", 1)] * n)


def test_unit_link_presence():
    with pytest.raises(ValueError):
        ModularUnit("H", 1, 0, "S1")
    with pytest.raises(ValueError):
        ModularUnit("H", 3, 0, None)
    with pytest.raises(ValueError):
        ModularUnit("H", 1, 20)
    assert ModularUnit("H", 4, -45, "S2").label() == "H4(-45)[S2]"


valid_seq = st.tuples(st.integers(1, 3), st.integers(0, 3)).filter(lambda t: 2 <= sum(t) <= 6).map(
    lambda t: [U("H", 1)] * t[0] + [U("L", 1)] * t[1])


@given(valid_seq, st.data())
def test_swapping_an_hl_pair_breaks_r3(seq, data):
    # R2 forces an L at the end of long sequences, so only check sequences that carry one
    if validate_assembly(seq).ok and any(u.variant == "L" for u in seq) and any(u.variant == "H" for u in seq):
        i = max(k for k, u in enumerate(seq) if u.variant == "H")
        j = data.draw(st.integers(i + 1, len(seq) - 1))
        swapped = list(seq)
        swapped[i], swapped[j] = swapped[j], swapped[i]
        assert "R3" in validate_assembly(swapped).rules


@given(valid_seq)
def test_validation_is_pure(seq):
    assert validate_assembly(seq) == validate_assembly(list(seq))


def _write(tmp_path, d):
    p = tmp_path / "lib.json"
    p.write_text(json.dumps(d))
    return p


def _default_dict():
    return default_library().to_dict()


def test_load_default_file():
    assert load_library().actuator("H").mass == 0.57


def test_missing_geometry_uses_defaults(tmp_path):
    d = _default_dict()
    del d["geometry"]["module_body_length"]
    lib = load_library(_write(tmp_path, d))
    assert dict(lib.module_body_length) == {"H": 0.12, "L": 0.09}


def test_negative_link_length_names_field(tmp_path):
    d = _default_dict()
    d["links"]["S2"]["length"] = -0.1
    with pytest.raises(LibraryError, match="links.S2.length"):
        load_library(_write(tmp_path, d))


def test_parse_error(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{ not json")
    with pytest.raises(LibraryError, match="parse error"):
        load_library(p)


def test_env_var_override(tmp_path, monkeypatch):
    d = _default_dict()
    d["actuators"]["L"]["nominal_torque"] = 4.0
    monkeypatch.setenv(LIBRARY_ENV_VAR, str(_write(tmp_path, d)))
    assert load_library().actuator("L").nominal_torque == 4.0


def test_config_is_immutable():
    lib = default_library()
    with pytest.raises(TypeError):
        lib.module_body_length["H"] = 1.0
    with pytest.raises(AttributeError):
        lib.collision_padding = 0.0
    assert math.isclose(lib.joint_limits["H"][1], math.pi)
