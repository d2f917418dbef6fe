#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
性能基准测试
后验精度、权重收缩与训练耗时
"""

import time

import pytest
import numpy as np

from kernelmix.cli import compare_posteriors, horseshoe_spike, median_by_inducing
from kernelmix.config import SynthConfig, TrainingConfig
from kernelmix.data import Dataset
from kernelmix.exact import WeightedKernel, sample_gp
from kernelmix.kernels import BaseKernel, BaseKind, KernelExpr, KernelPool, build_pool
from kernelmix.trainer import Batch, build_model, gradient, train


@pytest.mark.slow
@pytest.mark.performance
class TestPosteriorAccuracy:
    """与精确后验的距离"""

    def test_multisvgp_closer_than_svgp(self):
        """测试 SE₁ + SE₂ + PER₁ 上同样训练预算下 MultiSVGP 的 W2 中位数更小"""
        training = TrainingConfig(iterations=300, learning_rate=0.01)
        rows = compare_posteriors(SynthConfig(n=200), [15], grid_n=200, seeds=(0, 1, 2), training=training)
        assert len(rows) == 3
        multi, single = median_by_inducing(rows)[15]
        print(f"median W2 MultiSVGP={multi:.4g} SVGP={single:.4g}")
        assert multi < single

    def test_more_inducing_points_help(self):
        """测试增加诱导点数后距离下降"""
        rows = compare_posteriors(SynthConfig(n=80), [5, 40], grid_n=80, seeds=(0,))
        assert rows[1]["w2_multisvgp"] < rows[0]["w2_multisvgp"]
        assert rows[1]["w2_svgp"] < rows[0]["w2_svgp"]


@pytest.mark.slow
class TestShrinkage:
    """Horseshoe 收缩"""

    def test_horseshoe_finds_product_structure(self):
        """测试 PER₁ + SE×PER₂ 上 Horseshoe 把最大权重给 SE×PER，且无先验消融做不到"""
        training = TrainingConfig(iterations=1000, learning_rate=0.05)
        rows = horseshoe_spike(SynthConfig(n=100), training, inducing=10, seeds=(0, 1, 2))
        hs = [r for r in rows if r["prior"] == "horseshoe"]
        free = [r for r in rows if r["prior"] == "none"]
        for r in rows:
            print(f"seed={r['seed']} {r['prior']}: top={r['top']} top/median={r['ratio']:.3g}")
        assert len(hs) == len(free) == 3
        assert sum(r["passes"] for r in hs) >= 2
        assert sum(not r["passes"] for r in free) >= 2
        assert np.median([r["ratio"] for r in hs]) > np.median([r["ratio"] for r in free])

    def test_irrelevant_kernel_is_shrunk(self):
        """测试数据只来自 SE 时线性核的权重更小"""
        se = KernelExpr((BaseKernel(BaseKind.SE, lengthscale=1.0),))
        lin = KernelExpr((BaseKernel(BaseKind.LIN),))
        X = np.linspace(-4, 4, 60).reshape(-1, 1)
        y = sample_gp(WeightedKernel(KernelPool((se,)), np.ones(1)), X, 0.01, seed=2)
        config = TrainingConfig(iterations=400, learning_rate=0.05, seed=0)
        model = build_model(KernelPool((se, lin)), X, y, config, 10)
        trained, trace = train(model, Dataset(X, y), config)
        w = trained.summary_weights()
        print(f"weights: SE={w[0]:.4g} LIN={w[1]:.4g}, final ELBO {trace[-1].elbo:.4f}")
        assert w[1] < w[0]


@pytest.mark.performance
class TestTiming:
    """训练耗时"""

    def test_gradient_time_full_pool(self):
        """测试 24 成员核池上单次梯度的耗时"""
        X = np.linspace(-5, 5, 100).reshape(-1, 1)
        y = np.sin(2 * X[:, 0])
        pool = build_pool(X=X, y=y)
        config = TrainingConfig()
        model = build_model(pool, X, y, config, 10)
        batch = Batch(X, y, 100)
        eps = np.zeros(pool.m)
        gradient(model, batch, eps, config)
        start = time.perf_counter()
        g = gradient(model, batch, eps, config)
        elapsed = time.perf_counter() - start
        print(f"gradient over {g.size} parameters: {elapsed:.3f}s")
        assert np.all(np.isfinite(g))
        assert elapsed < 30.0

    @pytest.mark.slow
    def test_minibatch_step_is_cheaper(self):
        """测试小批量训练快于全批量"""
        X = np.linspace(-5, 5, 200).reshape(-1, 1)
        y = np.sin(X[:, 0])
        pool = build_pool(max_order=1, X=X, y=y)
        timings = {}
        for b in (None, 20):
            config = TrainingConfig(iterations=10, minibatch=b)
            model = build_model(pool, X, y, config, 10)
            start = time.perf_counter()
            train(model, Dataset(X, y), config)
            timings[b] = time.perf_counter() - start
        print(f"full batch {timings[None]:.3f}s, b=20 {timings[20]:.3f}s")
        assert timings[20] < timings[None] * 1.5
