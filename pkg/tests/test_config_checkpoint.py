from fractions import Fraction

import numpy as np
import pytest
import torch

from condgen.checkpoint import (
    Checkpoint,
    CheckpointError,
    ConfigHashMismatch,
    load_checkpoint,
    load_optimizer_arrays,
    load_policy_arrays,
    optimizer_arrays,
    policy_arrays,
    restore_torch_rng,
    save_checkpoint,
    torch_rng_array,
    verify_config_hash,
)
from condgen.config import ConfigError, config_hash, load_config, parse_config
from condgen.policy import PolicyNet

MINIMAL = {
    "domain": {"name": "binary", "size": [6, 6]},
    "control": {"controlled": ["regions"]},
}


def cfg(**overrides):
    raw = {k: dict(v) for k, v in MINIMAL.items()}
    for key, value in overrides.items():
        raw[key] = value
    return raw


class TestParseConfig:
    def test_minimal_with_defaults(self):
        config = parse_config(cfg())
        assert config.domain.name == "binary"
        assert config.teacher.mode == "uniform"
        assert config.training.learning_rate == 2.5e-4
        assert config.training.segment_length == 128
        assert config.eval.episodes_per_cell == 20
        assert config.service.interval_ms == 50

    def test_build_env(self):
        env = parse_config(cfg()).build_env()
        assert env.domain.default_size == (6, 6)
        assert env.n_actions == 3

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="unknown key 'trainnig'"):
            parse_config(cfg(trainnig={}))

    def test_unknown_nested_key_has_full_path(self):
        raw = cfg(training={"learning_rte": 0.1})
        with pytest.raises(ConfigError, match="training: unknown key 'learning_rte'"):
            parse_config(raw)

    def test_bad_domain_name(self):
        raw = cfg()
        raw["domain"]["name"] = "doom"
        with pytest.raises(ConfigError, match="domain.name"):
            parse_config(raw)

    def test_bad_size(self):
        raw = cfg()
        raw["domain"]["size"] = [6]
        with pytest.raises(ConfigError, match="domain.size"):
            parse_config(raw)
        raw["domain"]["size"] = [2, 6]
        with pytest.raises(ConfigError, match="domain.size"):
            parse_config(raw)

    def test_unknown_metric_surfaces_at_parse(self):
        raw = cfg()
        raw["control"]["controlled"] = ["lava"]
        with pytest.raises(ConfigError, match="unknown metric"):
            parse_config(raw)

    def test_change_ratio_range(self):
        with pytest.raises(ConfigError, match="change_ratio"):
            parse_config(cfg(env={"change_ratio": 0}))
        with pytest.raises(ConfigError, match="change_ratio"):
            parse_config(cfg(env={"change_ratio": 1.2}))

    def test_teacher_mode(self):
        with pytest.raises(ConfigError, match="teacher.mode"):
            parse_config(cfg(teacher={"mode": "bandit"}))

    def test_explore_ratio_range(self):
        with pytest.raises(ConfigError, match="explore_ratio"):
            parse_config(cfg(teacher={"mode": "alp_gmm", "explore_ratio": 2}))

    def test_weights_parse_as_exact_rationals(self):
        raw = cfg()
        raw["control"]["weights"] = {"regions": "1/3"}
        config = parse_config(raw)
        assert config.control.weights["regions"] == Fraction(1, 3)
        raw["control"]["weights"] = {"regions": 0.5}
        assert parse_config(raw).control.weights["regions"] == Fraction(1, 2)

    def test_bad_weight_rejected(self):
        raw = cfg()
        raw["control"]["weights"] = {"regions": "much"}
        with pytest.raises(ConfigError, match="weights.regions"):
            parse_config(raw)

    def test_bounds_shape_checked(self):
        raw = cfg()
        raw["control"]["bounds"] = {"regions": [1]}
        with pytest.raises(ConfigError, match="bounds.regions"):
            parse_config(raw)

    def test_type_errors_carry_paths(self):
        with pytest.raises(ConfigError, match="training.workers"):
            parse_config(cfg(training={"workers": "eight"}))
        with pytest.raises(ConfigError, match="env.raster_order"):
            parse_config(cfg(env={"raster_order": "yes"}))

    def test_booleans_not_accepted_as_ints(self):
        with pytest.raises(ConfigError, match="training.workers"):
            parse_config(cfg(training={"workers": True}))


class TestConfigHash:
    def test_stable_under_key_order(self):
        a = parse_config({"control": MINIMAL["control"], "domain": MINIMAL["domain"]})
        b = parse_config(cfg())
        assert config_hash(a) == config_hash(b)

    def test_changes_with_values(self):
        base = config_hash(parse_config(cfg()))
        changed = config_hash(parse_config(cfg(training={"seed": 1})))
        assert base != changed

    def test_weight_representation_is_exact(self):
        raw_third = cfg()
        raw_third["control"]["weights"] = {"regions": "1/3"}
        raw_close = cfg()
        raw_close["control"]["weights"] = {"regions": 0.3333}
        assert config_hash(parse_config(raw_third)) != config_hash(parse_config(raw_close))

    def test_default_size_materialized(self):
        explicit = parse_config({"domain": {"name": "binary", "size": [14, 14]},
                                 "control": MINIMAL["control"]})
        implicit = parse_config({"domain": {"name": "binary"},
                                 "control": MINIMAL["control"]})
        assert config_hash(explicit) == config_hash(implicit)


class TestLoadConfig:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text(
            "domain:\n  name: binary\n  size: [6, 6]\ncontrol:\n  controlled: [regions]\n"
        )
        config = load_config(path)
        assert config.domain.size == (6, 6)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "nope.yaml")

    def test_bad_yaml(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("domain: [unclosed\n")
        with pytest.raises(ConfigError, match="syntax"):
            load_config(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("")
        with pytest.raises(ConfigError, match="empty"):
            load_config(path)

    def test_shipped_configs_parse(self):
        import pathlib

        for name in ("binary", "binary_small", "zelda", "sokoban"):
            config = load_config(pathlib.Path("configs") / f"{name}.yaml")
            env = config.build_env()
            assert env.n_actions >= 3


def sample_checkpoint():
    return Checkpoint(
        config_hash="a" * 64,
        frames=1000,
        updates=7,
        episodes=42,
        arrays={
            "w_f32": np.arange(6, dtype=np.float32).reshape(2, 3),
            "w_f64": np.linspace(0, 1, 4),
            "counts": np.array([1, 2, 3], dtype=np.int32),
            "bytes": np.array([0, 255, 7], dtype=np.uint8),
        },
        optimizer={"param_groups": [], "steps": {}},
        teacher={"mode": "uniform", "episodes": 42, "rng": {"k": 1}},
        numpy_rng=np.random.default_rng(0).bit_generator.state,
        extra={"note": "x"},
    )


class TestCheckpointContainer:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "ckpt.bin"
        src = sample_checkpoint()
        save_checkpoint(path, src)
        out = load_checkpoint(path)
        assert out.config_hash == src.config_hash
        assert (out.frames, out.updates, out.episodes) == (1000, 7, 42)
        assert out.teacher == src.teacher
        assert out.extra == {"note": "x"}
        assert out.numpy_rng == src.numpy_rng
        for name, arr in src.arrays.items():
            assert np.array_equal(out.arrays[name], arr), name

    def test_canonical_dtypes(self, tmp_path):
        path = tmp_path / "ckpt.bin"
        save_checkpoint(path, sample_checkpoint())
        out = load_checkpoint(path)
        assert out.arrays["w_f32"].dtype == np.dtype("<f4")
        assert out.arrays["w_f64"].dtype == np.dtype("<f8")
        assert out.arrays["counts"].dtype == np.dtype("<i8")  # widened
        assert out.arrays["bytes"].dtype == np.dtype("|u1")

    def test_save_load_save_byte_identical(self, tmp_path):
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        save_checkpoint(p1, sample_checkpoint())
        save_checkpoint(p2, load_checkpoint(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_magic_and_version(self, tmp_path):
        path = tmp_path / "ckpt.bin"
        save_checkpoint(path, sample_checkpoint())
        data = bytearray(path.read_bytes())
        data[:4] = b"NOPE"
        bad = tmp_path / "bad.bin"
        bad.write_bytes(bytes(data))
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(bad)

        data = bytearray(path.read_bytes())
        data[4] = 9
        bad.write_bytes(bytes(data))
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(bad)

    def test_truncation_detected(self, tmp_path):
        path = tmp_path / "ckpt.bin"
        save_checkpoint(path, sample_checkpoint())
        data = path.read_bytes()
        for cut in (10, len(data) // 2, len(data) - 3):
            bad = tmp_path / "cut.bin"
            bad.write_bytes(data[:cut])
            with pytest.raises(CheckpointError):
                load_checkpoint(bad)

    def test_unsupported_dtype(self, tmp_path):
        ckpt = sample_checkpoint()
        ckpt.arrays["c"] = np.array([1 + 2j])
        with pytest.raises(CheckpointError, match="dtype"):
            save_checkpoint(tmp_path / "x.bin", ckpt)

    def test_hash_verification(self):
        ckpt = sample_checkpoint()
        verify_config_hash(ckpt, "a" * 64)
        with pytest.raises(ConfigHashMismatch, match="--force"):
            verify_config_hash(ckpt, "b" * 64)
        verify_config_hash(ckpt, "b" * 64, force=True)  # no raise


def tiny_net(seed=0):
    torch.manual_seed(seed)
    return PolicyNet(2, 3, (5, 5))


class TestTorchAdapters:
    def test_policy_round_trip(self):
        src = tiny_net(seed=1)
        arrays = policy_arrays(src)
        assert all(name.startswith("policy/") for name in arrays)
        assert all(a.dtype == np.float32 for a in arrays.values())

        dst = tiny_net(seed=2)
        load_policy_arrays(dst, arrays)
        x = torch.as_tensor(np.random.default_rng(0).random((1, 2, 5, 5)).astype(np.float32))
        with torch.no_grad():
            la, va = src(x)
            lb, vb = dst(x)
        assert torch.equal(la, lb) and torch.equal(va, vb)

    def test_policy_missing_tensor(self):
        net = tiny_net()
        arrays = policy_arrays(net)
        arrays.pop(sorted(arrays)[0])
        with pytest.raises(CheckpointError, match="missing policy tensor"):
            load_policy_arrays(net, arrays)

    def test_optimizer_round_trip(self):
        net_a = tiny_net(seed=3)
        opt_a = torch.optim.Adam(net_a.parameters(), lr=1e-3, eps=1e-5)
        x = torch.randn(4, 2, 5, 5)
        for _ in range(2):
            logits, value = net_a(x)
            loss = logits.square().mean() + value.square().mean()
            opt_a.zero_grad()
            loss.backward()
            opt_a.step()

        arrays, meta = optimizer_arrays(opt_a)
        net_b = tiny_net(seed=3)
        load_policy_arrays(net_b, policy_arrays(net_a))
        opt_b = torch.optim.Adam(net_b.parameters(), lr=1e-3, eps=1e-5)
        load_optimizer_arrays(opt_b, arrays, meta)

        # one more identical step must land on near-identical parameters
        for net, opt in ((net_a, opt_a), (net_b, opt_b)):
            logits, value = net(x)
            loss = logits.square().mean() + value.square().mean()
            opt.zero_grad()
            loss.backward()
            opt.step()
        for pa, pb in zip(net_a.parameters(), net_b.parameters()):
            assert torch.allclose(pa, pb, atol=1e-6)

    def test_optimizer_empty_meta_noop(self):
        net = tiny_net()
        opt = torch.optim.Adam(net.parameters())
        load_optimizer_arrays(opt, {}, {})  # nothing to restore, no error

    def test_torch_rng_round_trip(self):
        torch.manual_seed(123)
        saved = torch_rng_array()
        first = torch.randn(4)
        restore_torch_rng(saved)
        second = torch.randn(4)
        assert torch.equal(first, second)
