#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
数据读取、划分、合成数据与配置测试
"""

import json

import pytest
import numpy as np

from kernelmix.config import InducingConfig, RunConfig, SplitConfig, SynthConfig, TrainingConfig
from kernelmix.data import (
    Dataset,
    Task,
    comparison_generator,
    load_csv,
    load_generator,
    load_inputs,
    principal_projection,
    resolve_generator,
    run_synth,
    save_csv,
    split,
)
from kernelmix.utils import ConfigError, KernelMixError, Likelihood
from tests.conftest import write_csv


class TestCsv:
    """CSV 读写测试"""

    def test_default_target_is_last_column(self, tmp_path):
        """测试默认最后一列为目标"""
        path = write_csv(tmp_path / "d.csv", ["a", "b", "t"], [[1, 10, 0.5], [2, 20, 1.5], [3, 30, 2.5]])
        ds = load_csv(path)
        assert ds.target == "t"
        assert ds.columns == ["a", "b"]
        assert np.allclose(ds.X.mean(axis=0), 0.0)
        assert np.allclose(ds.raw_X(), [[1, 10], [2, 20], [3, 30]])

    def test_named_target(self, tmp_path):
        """测试指定目标列"""
        path = write_csv(tmp_path / "d.csv", ["t", "x"], [[0, 1], [1, 2]])
        ds = load_csv(path, target="t", task=Task.CLASSIFICATION)
        assert ds.columns == ["x"]
        assert np.array_equal(ds.y, [0.0, 1.0])

    def test_bad_row_reports_line(self, tmp_path):
        """测试解析失败时报告行号"""
        path = write_csv(tmp_path / "d.csv", ["x", "y"], [[1, 2], ["abc", 3]])
        with pytest.raises(ConfigError, match=r"d\.csv:3"):
            load_csv(path)

    def test_missing_file_and_target(self, tmp_path):
        """测试文件或目标列不存在"""
        with pytest.raises(ConfigError):
            load_csv(str(tmp_path / "missing.csv"))
        path = write_csv(tmp_path / "d.csv", ["x", "y"], [[1, 2]])
        with pytest.raises(ConfigError):
            load_csv(path, target="z")

    def test_non_finite_rejected(self, tmp_path):
        """测试非有限值"""
        path = write_csv(tmp_path / "d.csv", ["x", "y"], [[1, "nan"]])
        with pytest.raises(ConfigError):
            load_csv(path)

    def test_classification_targets(self, tmp_path):
        """测试分类目标必须为 0/1"""
        path = write_csv(tmp_path / "d.csv", ["x", "y"], [[1, 2], [2, 0]])
        with pytest.raises(ConfigError):
            load_csv(path, task=Task.CLASSIFICATION)

    def test_save_and_reload(self, tmp_path):
        """测试写出原始单位后可读回"""
        ds, _ = run_synth(SynthConfig(n=12, seed=2))
        path = str(tmp_path / "data.csv")
        save_csv(ds, path)
        back = load_csv(path)
        assert np.allclose(back.y, ds.y)
        assert np.allclose(back.raw_X(), ds.raw_X())

    def test_load_inputs_by_name(self, tmp_path):
        """测试按列名读取输入，忽略其他列"""
        path = write_csv(tmp_path / "d.csv", ["y", "b", "a"], [[0, 2, 1], [0, 4, 3]])
        X = load_inputs(path, ["a", "b"])
        assert np.array_equal(X, [[1, 2], [3, 4]])
        with pytest.raises(ConfigError):
            load_inputs(path, ["c"])


class TestSplits:
    """训练/测试划分测试"""

    def test_random_split_is_seeded(self):
        """测试随机划分由种子决定且互不重叠"""
        ds = Dataset(np.arange(20.0).reshape(-1, 1), np.arange(20.0))
        train_a, test_a = split(ds, SplitConfig(fraction=0.75, seed=1))
        train_b, _ = split(ds, SplitConfig(fraction=0.75, seed=1))
        assert train_a.N == 15 and test_a.N == 5
        assert np.array_equal(train_a.y, train_b.y)
        assert not set(train_a.y) & set(test_a.y)

    def test_pca_split_takes_both_ends(self):
        """测试主成分外推划分取两端"""
        X = np.column_stack([np.arange(30.0), 2.0 * np.arange(30.0)])
        ds = Dataset(X, np.arange(30.0))
        train, test = split(ds, SplitConfig(mode="pca"))
        assert test.N == 4
        assert sorted(test.y.tolist()) == [0.0, 1.0, 28.0, 29.0]
        assert train.N == 26

    def test_pca_split_needs_enough_points(self):
        """测试点数过少"""
        with pytest.raises(ConfigError):
            split(Dataset(np.zeros((10, 1)), np.zeros(10)), SplitConfig(mode="pca"))

    def test_projection_sign(self):
        """测试主方向符号约定"""
        X = np.column_stack([-np.arange(10.0), np.zeros(10)])
        proj = principal_projection(X)
        assert np.allclose(proj, X[:, 0] - X[:, 0].mean())


class TestSynthetic:
    """合成数据测试"""

    def test_default_generator(self, generator):
        """测试默认生成核与网格"""
        pool, weights = generator
        ds, truth = run_synth(SynthConfig(n=50, seed=0))
        assert ds.N == 50
        assert ds.X[0, 0] == pytest.approx(-5.0) and ds.X[-1, 0] == pytest.approx(5.0)
        assert truth["names"] == pool.names() == ["PER", "SE×PER"]
        assert truth["weights"] == weights.tolist() == [1.0, 1.0]

    def test_comparison_generator(self, tmp_path):
        """测试后验比较默认使用 SE₁ + SE₂ + PER₁，给出文件时读取文件"""
        pool, weights = resolve_generator(SynthConfig(), comparison_generator)
        assert pool.names() == ["SE", "SE", "PER"]
        assert [e.factors[0].lengthscale for e in pool] == [1.0, 3.0, 1.0]
        assert weights.tolist() == [1.0, 1.0, 1.0]
        spec = {"pool": [{"factors": [{"kind": "SE", "lengthscale": 0.5}]}], "weights": [2.0]}
        path = tmp_path / "gen.json"
        path.write_text(json.dumps(spec))
        pool, _ = resolve_generator(SynthConfig(kernel=str(path)), comparison_generator)
        assert pool.names() == ["SE"]
        ds, truth = run_synth(SynthConfig(n=10), (pool, np.array([2.0])))
        assert truth["weights"] == [2.0] and ds.N == 10

    def test_seeded(self):
        """测试同一种子得到相同数据"""
        a, _ = run_synth(SynthConfig(seed=3))
        b, _ = run_synth(SynthConfig(seed=3))
        assert np.array_equal(a.y, b.y)

    def test_custom_generator(self, tmp_path):
        """测试从 JSON 读取生成核"""
        spec = {"pool": [{"factors": [{"kind": "SE", "lengthscale": 0.5}]}], "weights": [2.0]}
        path = tmp_path / "gen.json"
        path.write_text(json.dumps(spec))
        pool, weights = load_generator(str(path))
        assert pool.names() == ["SE"]
        assert weights.tolist() == [2.0]
        ds, truth = run_synth(SynthConfig(n=10, kernel=str(path)))
        assert truth["names"] == ["SE"]

    def test_bad_generator(self, tmp_path):
        """测试无法解析的生成核文件"""
        path = tmp_path / "gen.json"
        path.write_text("[]")
        with pytest.raises(ConfigError):
            load_generator(str(path))


class TestRunConfig:
    """运行配置测试"""

    def test_defaults(self):
        """测试默认值"""
        cfg = RunConfig()
        assert cfg.training.iterations == 1000
        assert cfg.training.likelihood == Likelihood.GAUSSIAN
        assert cfg.inducing.resolve(500, 1) == 100
        assert cfg.inducing.resolve(500, 3) == 200
        assert cfg.inducing.resolve(50, 3) == 50

    def test_unknown_keys_rejected(self):
        """测试未知配置段或键"""
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"optimizer": {}})
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"training": {"epochs": 3}})

    def test_invalid_values(self):
        """测试非法取值"""
        with pytest.raises(ConfigError):
            RunConfig.from_json('{"training": {"learning_rate": 0}}')
        with pytest.raises(ConfigError):
            RunConfig.from_json('{"split": {"mode": "time"}}')
        with pytest.raises(ConfigError):
            RunConfig.from_json("[1, 2]")
        with pytest.raises(ConfigError):
            InducingConfig(count=0)

    def test_overrides(self):
        """测试命令行覆盖与种子传播"""
        cfg = RunConfig.from_json('{"training": {"iterations": 200}}')
        new = cfg.with_overrides(learning_rate=0.05, seed=9, count=None, mode="pca")
        assert new.training.learning_rate == 0.05
        assert new.training.iterations == 200
        assert new.seed == 9 and new.training.seed == 9 and new.split.seed == 9 and new.synth.seed == 9
        assert new.split.mode == "pca"
        assert new.inducing.count is None
        with pytest.raises(ConfigError):
            cfg.with_overrides(warp_speed=3)

    def test_root_seed_reaches_sections(self):
        """测试配置文件根级种子传给各段"""
        cfg = RunConfig.from_dict({"seed": 7})
        assert cfg.seed == 7
        assert cfg.training.seed == 7 and cfg.split.seed == 7 and cfg.synth.seed == 7
        own = RunConfig.from_dict({"seed": 7, "split": {"seed": 2}})
        assert own.split.seed == 2 and own.training.seed == 7
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"seed": "abc"})

    def test_round_trip_keeps_seeds(self):
        """测试写出的配置读回后种子不变"""
        cfg = RunConfig().with_overrides(seed=4)
        assert RunConfig.from_dict(cfg.to_dict()) == cfg

    def test_hash_is_canonical(self):
        """测试哈希只依赖配置内容"""
        a = RunConfig.from_json('{"training": {"iterations": 5, "learning_rate": 0.1}}')
        b = RunConfig.from_json('{"training": {"learning_rate": 0.1, "iterations": 5}}')
        assert a.hash() == b.hash()
        assert a.hash() != RunConfig().hash()

    def test_round_trip(self, tmp_path):
        """测试配置写出后读回"""
        cfg = RunConfig().with_overrides(likelihood="Bernoulli", max_order=1)
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg.to_dict()))
        back = RunConfig.from_file(str(path))
        assert back == cfg
        assert back.training.likelihood == Likelihood.BERNOULLI

    def test_errors_share_base(self):
        """测试异常层次"""
        with pytest.raises(KernelMixError):
            RunConfig.from_json("not json")
        with pytest.raises(ValueError):
            SplitConfig(fraction=1.5)

    def test_zero_iterations_allowed(self):
        """测试允许 0 次迭代"""
        assert TrainingConfig(iterations=0).iterations == 0
        with pytest.raises(ConfigError):
            TrainingConfig(iterations=-1)
