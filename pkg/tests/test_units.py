import pytest

from nwcollapse.units import (
    CM,
    HBARC_GEV_CM,
    SECOND,
    km_s_to_c,
    parse_quantity,
    to_unit,
)


@pytest.mark.parametrize("text,value,power", [
    ("1 keV", 1e-6, 1),
    ("2 GeV", 2.0, 1),
    ("1 cm", 1 / HBARC_GEV_CM, -1),
    ("1e-5 cm", 1e-5 / HBARC_GEV_CM, -1),
    ("0.3 GeV/cm^3", 0.3 * HBARC_GEV_CM**3, 4),
    ("1 cm^3/s", CM**3 / SECOND, -2),
    ("1 GeV * cm", 1 / HBARC_GEV_CM, 0),
    ("5", 5.0, 0),
    (".5 MeV", 5e-4, 1),
])
def test_parse(text, value, power):
    q = parse_quantity(text)
    assert q.value == pytest.approx(value, rel=1e-14)
    assert q.power == power


@pytest.mark.parametrize("bad", ["", "keV", "1 parsec", "1 cm^x", "one GeV"])
def test_parse_errors(bad):
    with pytest.raises(ValueError):
        parse_quantity(bad)


def test_numbers_pass_through():
    assert parse_quantity(3.0).value == 3.0


def test_round_trip():
    assert to_unit(parse_quantity("3.3e-5 cm").value, "cm") == pytest.approx(3.3e-5)
    assert to_unit(parse_quantity("2 s").value, "s") == pytest.approx(2.0)


def test_velocity():
    assert km_s_to_c(299792.458) == 1.0
