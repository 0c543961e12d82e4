from __future__ import annotations

import json

import pytest

from lab.config import (
    ConfigError,
    ExperimentConfig,
    WEDGE_Z0,
    build_config,
    defaults_for,
    from_dict,
    kappa_for,
    kappa_schedule,
    load_config,
)
from lab.settings import CONFIGS_DIR


@pytest.mark.parametrize("path", sorted(CONFIGS_DIR.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_load(path):
    config = load_config(path)
    assert config.problem in path.stem
    if config.experiment == "kappa-sweep":
        assert config.resolved_kappa0() > 0.0


def test_defaults_per_experiment():
    force = from_dict(defaults_for("shell", "force-sweep", obstacle="two_plane"))
    assert force.n == 16
    assert force.params["z0"] == WEDGE_Z0
    assert len(force.half_spaces()) == 2
    assert force.load_scaling == "thickness_cubed"
    roof = from_dict(defaults_for("biharmonic", "force-sweep", obstacle="two_plane"))
    assert roof.obstacle == {"kind": "two_plane"}
    assert roof.ell[-1] == 750
    assert roof.forcing_at(300).c == pytest.approx(-0.0059 * 300 * 500.0)
    cauchy = from_dict(defaults_for("shell", "h-cauchy"))
    assert cauchy.mesh_sequence == (4, 8, 16, 32, 64)
    assert cauchy.load_scaling == "thickness_cubed"
    assert cauchy.newton_criterion == "relative"
    assert from_dict(defaults_for("shell", "kappa-sweep")).load_scaling == "thickness_cubed"


def test_kappa_schedule_halves():
    config = ExperimentConfig(kappa0=1e-3, halvings=3)
    assert kappa_schedule(config) == [2e-3, 1e-3, 5e-4, 2.5e-4]
    assert kappa_for(0.0625, 0.5) == pytest.approx(0.25)


def test_kappa0_preset_is_per_resolution():
    assert ExperimentConfig(n=8).resolved_kappa0() == 1.5e-9
    with pytest.raises(ConfigError):
        ExperimentConfig(n=128).resolved_kappa0()


@pytest.mark.parametrize(
    "changes",
    [
        {"problem": "plate"},
        {"n": 12},
        {"n": True},
        {"radius": 0.0},
        {"halvings": 1},
        {"experiment": "h-cauchy", "q": 0.5},
        {"mesh_sequence": [8, 32]},
        {"experiment": "force-sweep", "ell": []},
        {"ell": [-1]},
        {"newton_criterion": "energy"},
        {"forcing": {"kind": "point"}},
        {"forcing": {"kind": "radial", "a": 1.0}},
        {"forcing": {"kind": "radial", "a": 1.0, "c": 0.0, "s": 0.1, "scale": 0.0}},
        {"obstacle": {"kind": "sphere"}},
        {"problem": "shell", "constraints": [[1.0, 0.0, 0.0]]},
        {"problem": "shell", "constraints": [[0.0, 0.0, 2.0]]},
        {"colour": "red"},
    ],
)
def test_invalid_configs(changes):
    with pytest.raises(ConfigError):
        from_dict({**defaults_for("biharmonic", "kappa-sweep"), **changes})


def test_file_values_then_overrides(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"problem": "shell", "n": 16, "halvings": 4}), encoding="utf-8")
    config = build_config(None, "kappa-sweep", path=path, overrides={"n": 32, "halvings": None})
    assert config.problem == "shell"
    assert config.n == 32
    assert config.halvings == 4
    switched = build_config(None, "force-sweep", path=path, overrides={"ell": [0, 5]})
    assert switched.experiment == "force-sweep"
    assert switched.ell == (0, 5)


def test_bad_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(broken)
    listed = tmp_path / "list.json"
    listed.write_text("[]", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(listed)


def test_content_hash_ignores_output_dir():
    a = ExperimentConfig(output_dir="a")
    b = ExperimentConfig(output_dir="b")
    assert a.content_hash() == b.content_hash()
    assert a.content_hash() != ExperimentConfig(n=16).content_hash()
    assert a.with_overrides(n=None) is a


def test_shell_loads_scaling():
    config = from_dict({**defaults_for("shell", "force-sweep"), "in_plane_load": [1.0, 0.0]})
    loads = config.shell_loads(20)
    eps = config.shell_params().eps
    assert loads.in_plane[0] == pytest.approx(eps**2)
    assert loads.transverse.s == pytest.approx(0.0059 * 20)
    assert loads.transverse.c == pytest.approx(-0.0059 * 20 * 100.0 * eps**3)


def test_forcing_scale_multiplies_amplitude():
    base = {"kind": "radial_sweep", "a": 0.25, "rate": 0.0059}
    plain = ExperimentConfig(forcing=base).forcing_at(40)
    scaled = ExperimentConfig(forcing={**base, "scale": 2000.0}).forcing_at(40)
    assert scaled.a == pytest.approx(2000.0 * plain.a)
    assert scaled.c == pytest.approx(2000.0 * plain.c)
    assert scaled.s == plain.s
