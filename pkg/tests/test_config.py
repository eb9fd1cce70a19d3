import math

import pytest

from ngrc_readout.config import (FEATURE_PRESETS, SIM_PRESETS, TABLE_PRESETS, all_presets,
                                 expand_preset, feature_spec, load_config, parse_alpha_grid,
                                 parse_kv, sim_config, split_config, train_options)
from ngrc_readout.data import Layout
from ngrc_readout.errors import ConfigError
from ngrc_readout.features import count_complexity


def test_parse_kv_basics():
    kv = parse_kv("a = 1  # note\n\n# full comment\nb=x,y\n")
    assert kv == {"a": "1", "b": "x,y"}
    with pytest.raises(ConfigError, match=r"cfg:2: duplicate key 'a'"):
        parse_kv("a=1\na=2\n", "cfg")
    with pytest.raises(ConfigError, match="expected key = value"):
        parse_kv("just words")
    with pytest.raises(ConfigError, match="empty key"):
        parse_kv("= 3")


def test_presets_expand_under_explicit_keys(tmp_path):
    kv = expand_preset({"preset": "1q-demo", "noise_sigma": "2"})
    assert kv["noise_sigma"] == "2" and kv["n_samples"] == "200" and kv["name"] == "1q-demo"
    with pytest.raises(ConfigError, match="unknown preset"):
        expand_preset({"preset": "nope"})
    p = tmp_path / "c.cfg"
    p.write_text("preset = 5q-coupled\nshots_per_config = 3\n")
    assert load_config(p)["shots_per_config"] == "3"
    assert load_config("5q-quadratic-w50")["window"] == "50"
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")
    assert set(all_presets()) == set(SIM_PRESETS) | set(FEATURE_PRESETS)


def test_every_sim_preset_builds():
    for name in SIM_PRESETS:
        cfg = sim_config(load_config(name))
        assert cfg.shots_per_config > 0
    demo = sim_config(load_config("1q-demo"))
    assert demo.n_classes == 2 and demo.n_samples == 200 and demo.shots_per_config == 100
    three = sim_config(load_config("1q-3state"))
    assert three.n_classes == 3
    mux = sim_config(load_config("5q-coupled"))
    assert mux.n_qubits == 5 and mux.crosstalk.coupling[0, 1] == pytest.approx(0.1)
    assert mux.qubits[2].if_freq == 0.25


def test_every_feature_preset_builds():
    for name in FEATURE_PRESETS:
        feats, _ = split_config(load_config(name))
        spec, n_models = feature_spec(feats)
        assert spec.n_features(0) > 0
    spec, n = feature_spec(load_config("5q-linear-nodemod"))
    assert spec.layout is Layout.RAW_MULTIPLEXED and n == 5


def test_table_presets_give_table_counts():
    want = [(5005, 5005), (2075, 10299), (18275, 30069), (18270, 30121)]
    for name, (p, m) in zip(TABLE_PRESETS, want):
        spec, n = feature_spec(load_config(name))
        c = count_complexity(spec, n)
        assert (c.parameters, c.multiplications) == (p, m)


def test_sim_errors_name_the_key():
    with pytest.raises(ConfigError, match="colour"):
        sim_config({"colour": "red"})
    with pytest.raises(ConfigError, match="noise_sigma"):
        sim_config({"noise_sigma": "loud"})
    with pytest.raises(ConfigError, match="if_freqs"):
        sim_config({"task": "multiplexed", "n_qubits": "2"})
    with pytest.raises(ConfigError, match="phases"):
        sim_config({"task": "multiplexed", "n_qubits": "3", "if_freqs": "0.1,0.2,0.3", "phases": "0,1"})
    with pytest.raises(ConfigError, match="coupling"):
        sim_config({"task": "single", "coupling": "0.1"})
    with pytest.raises(ConfigError, match="task"):
        sim_config({"task": "both"})
    cfg = sim_config({"t1_steps": "inf"})
    assert math.isinf(cfg.qubits[0].t1_steps)


def test_feature_and_training_keys():
    with pytest.raises(ConfigError, match="bogus"):
        split_config({"degree": "2", "bogus": "1"})
    with pytest.raises(ConfigError, match="window"):
        feature_spec({"window": "wide"})
    feats, train = split_config({"degree": "2", "split": "0.7", "alpha_grid": "0,1e-3"})
    opts = train_options(train)
    assert opts.split == 0.7 and opts.alphas == (0.0, 1e-3)
    with pytest.raises(ConfigError, match="split"):
        train_options({"split": "1.5"})


def test_alpha_grid_parsing():
    assert parse_alpha_grid(None) is None
    assert len(parse_alpha_grid("single")) == 14
    assert len(parse_alpha_grid("multi")) == 22
    with pytest.raises(ConfigError):
        parse_alpha_grid("-1")
    with pytest.raises(ConfigError):
        parse_alpha_grid("a,b")
