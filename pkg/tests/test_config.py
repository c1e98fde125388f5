"""Experiment config validation, overrides, hashing, seed streams."""
import numpy as np
import pytest

from mcbnav.config import (
    ConfigError,
    ExperimentConfig,
    PROFILES,
    seed_streams,
)


def test_defaults_validate():
    cfg = ExperimentConfig.from_dict({})
    assert cfg.method == "MCB"
    assert cfg.effective_k == 2


def test_scr_forces_k1():
    cfg = ExperimentConfig.from_dict({"method": "SCR", "k": 7})
    assert cfg.effective_k == 1
    assert cfg.resolved()["k"] == 1
    assert cfg.label == "SCR"


def test_mcb_pf_requires_tau():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"method": "MCB-PF", "tau_deg": None})
    cfg = ExperimentConfig.from_dict({"method": "MCB-PF", "tau_deg": 3.0,
                                      "k": 5})
    assert cfg.pf_enabled
    assert cfg.label == "MCB-K5-PF3"


def test_eval_every_must_divide_total():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"total_steps": 1000,
                                    "eval_every": 300})


def test_unknown_method_rejected():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"method": "DDPG"})


def test_bad_k_rejected():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"method": "MCB", "k": 0})


def test_duplicate_seeds_rejected():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"seeds": [1, 1, 2]})


def test_overrides_dotted_keys():
    cfg = ExperimentConfig.from_dict({})
    out = cfg.apply_overrides(["sac.gamma=0.9", "k=10",
                               "world.n_beams=16", "seeds=[3,4]"])
    assert out.raw["sac"]["gamma"] == 0.9
    assert out.effective_k == 10
    assert out.raw["world"]["n_beams"] == 16
    assert out.raw["seeds"] == [3, 4]
    # original untouched
    assert cfg.raw["k"] == 2


def test_profiles():
    desk = ExperimentConfig.from_dict({}, profile="desk")
    assert desk.raw["total_steps"] == 15_000
    paper = ExperimentConfig.from_dict({}, profile="paper")
    assert paper.raw["total_steps"] == 50_000
    assert len(paper.raw["seeds"]) == 10
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({}, profile="nope")
    assert set(PROFILES) == {"desk", "paper"}


def test_config_hash_stable_and_sensitive():
    a = ExperimentConfig.from_dict({"k": 2})
    b = ExperimentConfig.from_dict({"k": 2})
    c = ExperimentConfig.from_dict({"k": 3})
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != c.config_hash()


def test_learner_config_tracks_world():
    cfg = ExperimentConfig.from_dict({"world": {"n_beams": 16}})
    lc = cfg.learner_config()
    assert lc.obs_dim == 20
    assert lc.n_beams == 16


def test_seed_streams_independent_and_deterministic():
    a = seed_streams(7)
    b = seed_streams(7)
    assert set(a) == {"net_init", "scenario", "policy", "sampler"}
    for name in a:
        assert a[name].random() == b[name].random()
    draws = {name: gen.random() for name, gen in seed_streams(7).items()}
    assert len(set(draws.values())) == len(draws)


def test_from_file_roundtrip(tmp_path):
    import yaml

    path = tmp_path / "exp.yaml"
    path.write_text(yaml.safe_dump({"method": "MCB", "k": 5,
                                    "seeds": [0, 1]}))
    cfg = ExperimentConfig.from_file(path)
    assert cfg.effective_k == 5
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("method: [unclosed")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(bad)
