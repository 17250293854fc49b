import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ter.config import ConfigError, ExperimentConfig, coerce, parse_assignments


def test_defaults_validate():
    ExperimentConfig().validate()


def test_text_round_trip():
    cfg = ExperimentConfig(env="crossing:7x7:lava", sampler="ter_mixed", eta=0.2, hidden=(32, 16),
                           pred_budget=None, double=False, lr=0.1)
    assert ExperimentConfig.from_text(cfg.to_text()) == cfg


def test_json_and_dict_round_trip():
    cfg = ExperimentConfig(seed=4, batch_size=64)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    assert '"batch_size": 64' in cfg.to_json()


def test_text_grammar():
    text = """
    # an offline run
    mode = offline
    sampler = ebu   # trailing comment
    n_updates = 1e2
    per_edge_budget = all
    double = no
    hidden = 8, 8
    """
    cfg = ExperimentConfig.from_text(text)
    assert (cfg.mode, cfg.sampler, cfg.n_updates, cfg.per_edge_budget, cfg.double, cfg.hidden) == \
        ("offline", "ebu", 100, None, False, (8, 8))


def test_load_from_file(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("seed = 9\nenv = nchain:N=5\n")
    cfg = ExperimentConfig.load(p)
    assert cfg.seed == 9 and cfg.env == "nchain:N=5"


@pytest.mark.parametrize("text", [
    "sampler = magic", "eta = 1.5", "gamma = 0", "warmup_steps = 20000", "batch_size = 0",
    "bogus = 1", "double = maybe", "seed = x", "no equals sign here", "roots_mode = up",
])
def test_invalid_configs_rejected(text):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text(text)


def test_warmup_equal_to_total_is_valid():
    ExperimentConfig(total_steps=500, warmup_steps=500).validate()


def test_replace_validates():
    with pytest.raises(ConfigError):
        ExperimentConfig().replace(eta=-0.1)


def test_parse_assignments_keeps_last():
    assert parse_assignments(["a = 1", "a = 2"]) == {"a": "2"}


def test_coerce_passthrough():
    assert coerce("hidden", [4, 5]) == (4, 5)
    assert coerce("eta", 0.5) == 0.5


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.integers(1, 512), st.integers(0, 10**6), st.booleans())
def test_round_trip_property(eta, b, seed, weighted):
    cfg = ExperimentConfig(eta=eta, batch_size=b, seed=seed, weighted_predecessors=weighted)
    assert ExperimentConfig.from_text(cfg.to_text()) == cfg
