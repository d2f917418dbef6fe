#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
核函数与核池测试
"""

import pytest
import numpy as np

from kernelmix.kernels import (
    BaseKernel,
    BaseKind,
    InitScheme,
    KernelExpr,
    KernelPool,
    additive_pool,
    additive_terms,
    build_pool,
    dominant_period,
    eval_base,
    eval_expr,
    gram,
)
from kernelmix.utils import ConfigError


class TestBaseKernels:
    """基核取值测试"""

    def test_se_at_zero_distance(self):
        """测试 SE 在零距离处为 1"""
        k = BaseKernel(BaseKind.SE, lengthscale=0.7)
        assert eval_base(k, [1.3], [1.3]) == pytest.approx(1.0)

    def test_se_value(self):
        """测试 SE 的解析值"""
        k = BaseKernel(BaseKind.SE, lengthscale=2.0)
        assert eval_base(k, [0.0], [1.0]) == pytest.approx(np.exp(-0.5 / 4.0))

    def test_lin_value(self):
        """测试 LIN 的内积"""
        k = BaseKernel(BaseKind.LIN, offset=0.0)
        assert eval_base(k, [2.0], [3.0]) == pytest.approx(6.0)
        shifted = BaseKernel(BaseKind.LIN, offset=1.0)
        assert eval_base(shifted, [2.0], [3.0]) == pytest.approx(2.0)

    def test_per_is_periodic(self):
        """测试 PER 在相差整数个周期时取 1"""
        k = BaseKernel(BaseKind.PER, lengthscale=0.5, period=1.5)
        assert eval_base(k, [0.2], [0.2 + 3.0]) == pytest.approx(1.0)
        assert eval_base(k, [0.0], [0.75]) < 1.0

    def test_invalid_hyperparameters(self):
        """测试非法超参数"""
        with pytest.raises(ConfigError):
            BaseKernel(BaseKind.SE, lengthscale=0.0)
        with pytest.raises(ConfigError):
            BaseKernel(BaseKind.PER, period=-1.0)

    def test_dimension_mismatch(self):
        """测试维度不一致时报错"""
        k = BaseKernel(BaseKind.SE)
        with pytest.raises(ConfigError):
            eval_base(k, [0.0, 1.0], [0.0])

    def test_params_round_trip(self):
        """测试无约束参数往返"""
        k = BaseKernel(BaseKind.PER, lengthscale=0.3, period=2.2)
        k2 = k.with_params(k.params())
        assert k2.lengthscale == pytest.approx(0.3)
        assert k2.period == pytest.approx(2.2)


class TestKernelExpr:
    """乘积核测试"""

    def test_product_equals_factor_product(self):
        """测试乘积核等于各因子取值之积"""
        se = BaseKernel(BaseKind.SE, lengthscale=1.2)
        per = BaseKernel(BaseKind.PER, lengthscale=0.8, period=1.7)
        e = KernelExpr((se, per))
        x, x2 = [0.4], [1.9]
        assert eval_expr(e, x, x2) == pytest.approx(eval_base(se, x, x2) * eval_base(per, x, x2))
        assert e.name == "SE×PER"
        assert e.order == 2

    def test_gram_symmetric_psd(self):
        """测试 Gram 矩阵对称半正定"""
        X = np.linspace(-2, 2, 15).reshape(-1, 1)
        e = KernelExpr((BaseKernel(BaseKind.SE), BaseKernel(BaseKind.PER, period=1.3)))
        K = gram(e, X)
        assert np.array_equal(K, K.T)
        assert np.linalg.eigvalsh(K).min() > -1e-8

    def test_diag_matches_gram(self):
        """测试 diag 与 Gram 对角线一致"""
        X = np.random.default_rng(0).normal(size=(6, 2))
        e = KernelExpr((BaseKernel(BaseKind.LIN, offset=0.5), BaseKernel(BaseKind.SE)))
        assert np.allclose(e.diag(X), np.diag(e.gram(X)))

    def test_column_mismatch(self):
        """测试输入列数不一致"""
        e = KernelExpr((BaseKernel(BaseKind.SE),))
        with pytest.raises(ConfigError):
            e.gram(np.zeros((3, 1)), np.zeros((3, 2)))

    def test_describe_mentions_hyperparameters(self):
        """测试描述文本包含超参数"""
        e = KernelExpr((BaseKernel(BaseKind.PER, lengthscale=1.0, period=1.001),))
        assert e.describe() == "a periodic component (period 1.001, lengthscale 1)"
        se_per = KernelExpr((BaseKernel(BaseKind.SE, lengthscale=3.0), BaseKernel(BaseKind.PER, period=2.5)))
        assert "varies smoothly" in se_per.describe()

    def test_dict_round_trip(self):
        """测试字典序列化"""
        e = KernelExpr((BaseKernel(BaseKind.LIN, offset=0.25), BaseKernel(BaseKind.PER, period=3.0)), InitScheme.STRONG)
        assert KernelExpr.from_dict(e.to_dict()) == e


class TestKernelPool:
    """核池测试"""

    def test_default_pool_has_24_members(self):
        """测试默认核池为 12 种结构 × 2 种初始化"""
        pool = build_pool()
        assert pool.m == 24
        assert sum(1 for e in pool if e.init_scheme == InitScheme.WEAK) == 12
        assert len(set(pool.names())) == 12

    def test_first_order_pool(self):
        """测试一阶核池"""
        pool = build_pool(max_order=1)
        assert pool.m == 6
        assert all(e.order == 1 for e in pool)

    def test_invalid_order(self):
        """测试非法阶数"""
        with pytest.raises(ConfigError):
            build_pool(max_order=3)

    def test_initialization_is_seeded(self):
        """测试同一种子初始化结果相同"""
        X = np.linspace(0, 10, 50).reshape(-1, 1)
        y = np.sin(X[:, 0])
        a = build_pool(X=X, y=y, seed=4)
        b = build_pool(X=X, y=y, seed=4)
        assert a == b

    def test_strong_scheme_finds_period(self):
        """测试 Strong 方案从 FFT 中估计周期"""
        X = np.linspace(0, 20, 200).reshape(-1, 1)
        y = np.sin(2 * np.pi * X[:, 0] / 4.0)
        pool = build_pool(max_order=1, schemes=("Strong",), X=X, y=y)
        per = [e for e in pool if e.name == "PER"][0]
        assert per.factors[0].period == pytest.approx(4.0, rel=0.1)

    def test_dominant_period_short_input(self):
        """测试点数过少时不估计周期"""
        assert dominant_period(np.arange(3.0), np.arange(3.0)) is None

    def test_json_round_trip(self):
        """测试核池 JSON 往返"""
        pool = build_pool(X=np.linspace(-1, 1, 20).reshape(-1, 1), seed=1)
        assert KernelPool.from_json(pool.to_json()) == pool

    def test_stationary_members_are_shift_invariant(self):
        """测试不含 LIN 的成员平移不变，含 LIN 的成员不是"""
        rng = np.random.default_rng(0)
        X = np.linspace(-5, 5, 60).reshape(-1, 1)
        pool = build_pool(X=X, y=np.sin(X[:, 0]), seed=2)
        Xs = rng.uniform(-3, 3, (8, 1))
        stationary = 0
        for e in pool:
            has_lin = any(f.kind == BaseKind.LIN for f in e.factors)
            same = np.allclose(e.gram(Xs + 1.7), e.gram(Xs), atol=1e-10)
            assert same != has_lin, e.name
            stationary += not has_lin
        assert stationary == 12

    def test_periodic_factors(self):
        """测试每个 PER 因子以其周期为周期，单因子 PER 成员也一样"""
        rng = np.random.default_rng(1)
        X = np.linspace(-5, 5, 60).reshape(-1, 1)
        pool = build_pool(X=X, y=np.sin(X[:, 0]), seed=3)
        Xs = rng.uniform(-3, 3, (8, 1))
        for e in pool:
            for f in e.factors:
                if f.kind == BaseKind.PER:
                    assert np.allclose(f.gram(Xs, Xs + f.period), f.gram(Xs), atol=1e-8)
            if e.name == "PER":
                p = e.factors[0].period
                assert np.allclose(e.gram(Xs, Xs + p), e.gram(Xs), atol=1e-8)
                assert np.allclose(e.gram(Xs, Xs - 2 * p), e.gram(Xs), atol=1e-8)


class TestAdditiveKernels:
    """d 阶加性核测试"""

    def test_term_count(self):
        """测试项数为 C(D, d)"""
        assert len(additive_terms(6, 3)) == 20
        assert len(additive_terms(4, 1)) == 4
        assert additive_terms(3, 2).subsets == ((0, 1), (0, 2), (1, 2))

    def test_invalid_order(self):
        """测试 d 超出范围"""
        with pytest.raises(ConfigError):
            additive_terms(3, 4)
        with pytest.raises(ConfigError):
            additive_terms(3, 0)

    def test_term_uses_only_its_columns(self):
        """测试每一项只依赖自己的输入列"""
        pool = additive_pool(3, 2)
        X = np.random.default_rng(1).normal(size=(5, 3))
        X_changed = X.copy()
        X_changed[:, 2] += 10.0
        K01 = pool[0].gram(X)
        assert np.allclose(K01, pool[0].gram(X_changed))
        assert not np.allclose(pool[1].gram(X), pool[1].gram(X_changed))

    def test_full_order_is_product(self):
        """测试 d = D 时为全部列上的 SE 之积"""
        pool = additive_pool(2, 2, lengthscale=1.0)
        X = np.random.default_rng(2).normal(size=(4, 2))
        full = KernelExpr((BaseKernel(BaseKind.SE),))
        assert np.allclose(pool[0].gram(X), full.gram(X))
        assert "input dimensions (1, 2)" in pool[0].describe()
