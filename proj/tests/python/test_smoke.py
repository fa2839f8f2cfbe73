import math

import pytest

import pcaplab


def test_constants():
    assert pcaplab.sphere_area(3) == pytest.approx(4 * math.pi)
    assert pcaplab.ball_volume(3) == pytest.approx(4 * math.pi / 3)
    assert pcaplab.radial_capacity(2.0, 1.5) == pytest.approx(2.0**1.5)
    assert pcaplab.up_limit_zero(1.0, 1.5) == pytest.approx(4 * math.pi * 3**1.5)


def test_radial_kato_identity():
    k = pcaplab.kato_radial(1.0, 1.5, 3, 2.0)
    assert k["relative"] < 1e-12


def test_convex_hull_oracle():
    square = [[0, 0], [1, 0], [1, 1], [0, 1]]
    assert pcaplab.convex_hull_perimeter(square) == pytest.approx(4.0)


def test_shape_info_and_bad_parameters():
    info = pcaplab.shape_info("dumbbell")
    assert info["dimension"] == 3
    assert pcaplab.shape_info("ball", {"radius": 2.0})["circumradius"] == pytest.approx(2.0)
    with pytest.raises(ValueError):
        pcaplab.shape_info("ball", {"radius": -1.0})
    with pytest.raises(ValueError):
        pcaplab.shape_info("teapot")


def test_solve_ball_capacity():
    r = pcaplab.solve("ball", p=1.5, h=1 / 8, R_out=4.0)
    assert r["cap_energy"] == pytest.approx(1.0, rel=0.08)
    assert r["cap_flux"] == pytest.approx(1.0, rel=0.15)


def test_solve_rejects_p_out_of_range():
    with pytest.raises(ValueError):
        pcaplab.solve("ball", p=3.5, h=1 / 8)


def test_surface_reports_on_sphere():
    s = pcaplab.surface("ball", h=1 / 16)
    assert s["euler_characteristic"] == 2
    assert s["gauss_bonnet_integral"] == pytest.approx(8 * math.pi, rel=0.01)
    names = {r["name"] for r in s["reports"]}
    assert "willmore_topology" in names


def test_parse_config_round_trip():
    c = pcaplab.parse_config("[experiment]\nfixtures = ball\np = 1.5, 2.0\nh = 0.125\nchecks = capacity\n")
    assert c["p"] == [1.5, 2.0]
    with pytest.raises(ValueError):
        pcaplab.parse_config("[experiment]\nchecks = nonsense\n")


def test_run_experiment_and_compare(tmp_path):
    text = (
        "[experiment]\nfixtures = ball\np = 1.5\nh = 0.125\n"
        "checks = capacity, lp_minkowski, willmore_topology\noutput = {}\n"
    )
    a = pcaplab.run_experiment(text.format(tmp_path / "a"))
    b = pcaplab.run_experiment(text.format(tmp_path / "b"))
    assert a["overall"] in ("PASS", "FAIL")
    assert a["summary"]["reports"] == b["summary"]["reports"] > 0
    diff = pcaplab.compare_runs(str(tmp_path / "a"), str(tmp_path / "b"))
    assert diff["drift"] == []
