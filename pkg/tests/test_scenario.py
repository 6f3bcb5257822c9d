import pytest

from packsim.scenario import ScenarioError, from_dict, load_scenario, parse_overrides


def test_bundled_grid():
    sc = load_scenario("grid7x7")
    cfg = sc.config
    assert cfg["nodes"]["grid"] == {"rows": 7, "cols": 7, "spacing": 200}
    assert len(cfg["flows"]) == 5
    assert cfg["duration_s"] == 360
    assert sc.speed == 0.0
    assert (sc.routing, sc.pack, sc.variant) == ("aodv", False, "newreno")


def test_bundled_mobile():
    sc = load_scenario("mobile30")
    cfg = sc.config
    assert cfg["nodes"] == {"random": 30}
    assert cfg["flows"]["random"] == 10
    assert cfg["mobility"]["pause_s"] == 100
    assert (cfg["area_w"], cfg["area_h"]) == (1500, 300)
    assert sc.speed == 20


def test_overrides_use_aliases_and_dotted_keys():
    sc = load_scenario("mobile30", {"variant": "vegas", "speed": "5", "routing": "part",
                                    "pack": "true", "routing.repair_ttl": "2"})
    assert sc.variant == "vegas"
    assert sc.speed == 5
    assert sc.pack is True
    assert sc.config["routing"]["repair_ttl"] == 2
    assert sc.overrides["variant"] == "vegas"


def test_pack_requires_part():
    with pytest.raises(ScenarioError, match="PART"):
        load_scenario("grid7x7", {"pack": "true"})


@pytest.mark.parametrize("overrides", [
    {"tcp.colour": "red"}, {"nosuch": "1"}, {"variant": "cubic"}, {"routing": "dsr"},
])
def test_bad_overrides_rejected(overrides):
    with pytest.raises(ScenarioError):
        load_scenario("grid7x7", overrides)


def test_speed_override_needs_mobile_scenario():
    with pytest.raises(ScenarioError, match="mobile"):
        load_scenario("grid7x7", {"speed": "10"})


def test_unknown_file_key_rejected():
    with pytest.raises(ScenarioError, match="bogus"):
        from_dict({"nodes": {"random": 3}, "flows": [], "bogus": 1})


def test_missing_sections_rejected():
    with pytest.raises(ScenarioError, match="nodes"):
        from_dict({"flows": []})


def test_unknown_scenario_name(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(str(tmp_path / "missing.yaml"))


def test_scenario_file_round_trip(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text("name: tiny\nnodes: {chain: {n: 3, spacing: 200}}\n"
                    "flows: [{src: 0, dst: 2}]\nduration_s: 5\n")
    sc = load_scenario(str(path))
    assert sc.name == "tiny" and sc.config["duration_s"] == 5
    assert sc.config["radio"]["range_m"] == 250.0


def test_parse_overrides():
    assert parse_overrides(["a=1", " b = x=y "]) == {"a": "1", "b": "x=y"}
    with pytest.raises(ScenarioError):
        parse_overrides(["novalue"])
