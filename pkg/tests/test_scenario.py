import numpy as np
import pytest
import yaml
from hypothesis import given, settings, strategies as st

from gpata.privacy import PrivacyProfile
from gpata.scenario import (ConfigError, GameConfig, ScenarioConfig, dump_scenario, load_scenario,
                            reference_scenario, stream)

MINIMAL = """
hierarchy:
  cities:
    - name: town
      streets:
        - name: main
          pois: [[0, 1], [0, 2]]
servers:
  - {id: 0, location: [0, 0]}
devices:
  - {id: 0, cpu_freq: 1.5, cpu_usage: 0.2, location: [0, 1], power_comp: 3, power_trans_per_byte: 1e-7}
"""


def write(tmp_path, text):
    p = tmp_path / "s.yaml"
    p.write_text(text)
    return p


def test_minimal_file_gets_defaults(tmp_path):
    cfg = load_scenario(write(tmp_path, MINIMAL))
    assert cfg.game == GameConfig()
    assert cfg.deadline == 2.0 and cfg.cycles == 100 and cfg.privacy == "medium"
    assert cfg.game.lambda1 == cfg.game.lambda2 == 1.0
    assert cfg.reward.beta == 1.2 and cfg.reward.thres_high is None


def test_mu_out_of_range_names_the_key(tmp_path):
    with pytest.raises(ConfigError, match=r"μ must lie in \(0,1\]") as exc:
        load_scenario(write(tmp_path, MINIMAL + "game: {mu: 1.5}\n"))
    assert "game.mu" in str(exc.value)


@pytest.mark.parametrize("extra,key", [
    ("game: {rho: 0}\n", "game.rho"),
    ("game: {estimation: psychic}\n", "game.estimation"),
    ("reward: {loss_pairing: crossed}\n", "reward.loss_pairing"),
    ("deadline: -1\n", "deadline"),
    ("privacy: extreme\n", "privacy"),
    ("network: {bandwidth: 0}\n", "network"),
    ("game: {colour: red}\n", "game.colour"),
    ("bogus: 1\n", "scenario.bogus"),
])
def test_invalid_values_name_the_key(tmp_path, extra, key):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        load_scenario(write(tmp_path, MINIMAL + extra))


def test_device_off_the_map_is_rejected(tmp_path):
    with pytest.raises(ConfigError, match=r"devices\[0\]\.location"):
        load_scenario(write(tmp_path, MINIMAL.replace("location: [0, 1]", "location: [9, 9]")))


def test_high_preset_expands_to_full_hiding(tmp_path):
    from gpata.engine import Simulator
    cfg = load_scenario(write(tmp_path, MINIMAL + "privacy: high\n"))
    assert set(Simulator(cfg).profiles(0).values()) == {PrivacyProfile(3, 3, 3)}


def test_per_device_override(tmp_path):
    from gpata.engine import Simulator
    text = MINIMAL.replace("power_trans_per_byte: 1e-7}", "power_trans_per_byte: 1e-7, privacy: [1, 2, 0]}")
    cfg = load_scenario(write(tmp_path, text + "privacy: high\n"))
    assert Simulator(cfg).profiles(0)[0] == PrivacyProfile(1, 2, 0)


def test_reference_round_trip(tmp_path):
    cfg = reference_scenario(5)
    path = tmp_path / "ref.yaml"
    dump_scenario(cfg, path)
    assert load_scenario(path) == cfg


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 64 - 1), st.floats(0.1, 20), st.sampled_from(["high", "medium", "low"]),
       st.floats(0.01, 1.0), st.integers(0, 40))
def test_serialisation_round_trip(seed, deadline, privacy, mu, per_cycle):
    cfg = reference_scenario(seed).with_deadline(deadline).with_privacy(privacy).with_game(mu=mu)
    cfg = cfg.with_tasks(per_cycle)
    text = yaml.safe_dump(cfg.to_dict())
    assert ScenarioConfig.from_dict(yaml.safe_load(text)) == cfg


def test_reference_shape():
    cfg = reference_scenario()
    assert (len(cfg.devices), len(cfg.servers), cfg.tasks.per_cycle, cfg.cycles) == (15, 3, 30, 100)


def test_device_sweep_variants():
    cfg = reference_scenario()
    assert len(cfg.with_devices(5).devices) == 5
    big = cfg.with_devices(40)
    assert len(big.devices) == 40 and len({d.id for d in big.devices}) == 40
    assert big == cfg.with_devices(40)


def test_streams_are_independent_and_reproducible():
    a = stream(3, "tasks", 1).random(4)
    assert np.array_equal(a, stream(3, "tasks", 1).random(4))
    assert not np.array_equal(a, stream(3, "tasks", 2).random(4))
    assert not np.array_equal(a, stream(3, "privacy", 1).random(4))
    assert not np.array_equal(a, stream(4, "tasks", 1).random(4))
