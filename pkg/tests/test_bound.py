#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
KL 上界验证测试
"""

import json

import pytest
import numpy as np

from kernelmix.bound import (
    c_multi,
    c_single,
    collapsed_bound,
    kl_upper_bound,
    ky_fan_check,
    trace_kl_bound,
    trace_term,
    verify_pool_recursive,
    verify_proposition,
)
from kernelmix.exact import WeightedKernel, log_marginal_likelihood, sample_gp, top_eigenvalues
from kernelmix.kernels import BaseKernel, BaseKind, KernelExpr, KernelPool
from kernelmix.utils import ConfigError


def random_psd(n: int, rank: int, seed: int) -> np.ndarray:
    A = np.random.default_rng(seed).normal(size=(n, rank))
    return A @ A.T


class TestSpectralQuantities:
    """特征值尾和测试"""

    def test_c_single(self):
        """测试尾和"""
        assert c_single([3.0, 2.0, 1.0], 1) == pytest.approx(3.0)
        assert c_single([3.0, 2.0, 1.0], 3) == 0.0
        with pytest.raises(ConfigError):
            c_single([1.0], -1)

    def test_c_multi_scaling(self):
        """测试原始口径为归一化口径乘以 N"""
        eigs, e1, e2 = [5.0, 2.0, 1.0], [3.0, 1.0, 0.5], [2.5, 0.5, 0.2]
        normalized = c_multi(eigs, e1, e2, 2, 3, normalized=True)
        assert normalized == pytest.approx((5 - 3 - 2.5) + (2 - 1 - 0.5) + 1.0)
        assert c_multi(eigs, e1, e2, 2, 3) == pytest.approx(3 * normalized)

    def test_c_multi_validation(self):
        """测试谱长度与 M"""
        with pytest.raises(ConfigError):
            c_multi([1.0, 0.5], [1.0], [1.0], 1, 2)
        with pytest.raises(ConfigError):
            c_multi([1.0], [1.0], [1.0], 2, 1)

    @pytest.mark.parametrize("seed", range(50))
    def test_multi_never_exceeds_single(self, seed):
        """测试 50 个随机半正定矩阵对上 C_multi ≤ C_single"""
        r1, r2 = np.random.default_rng(1000 + seed).integers(1, 13, size=2)
        K1 = random_psd(12, int(r1), seed)
        K2 = random_psd(12, int(r2), seed + 100)
        e = top_eigenvalues(K1 + K2, 12)
        e1 = top_eigenvalues(K1, 12)
        e2 = top_eigenvalues(K2, 12)
        for M in (1, 3, 6, 12):
            assert c_multi(e, e1, e2, M, 12, normalized=True) <= c_single(e, M) + 1e-9 * e.sum()
            assert ky_fan_check(K1, K2, M) >= -1e-9 * e.sum()


class TestTraceTerms:
    """经验迹项测试"""

    def test_full_inducing_set_gives_zero(self, se_kernel):
        """测试诱导点为全部输入时迹项为 0"""
        X = np.linspace(-2, 2, 15).reshape(-1, 1)
        K = se_kernel.gram(X)
        assert trace_term(K, K, K) == pytest.approx(0.0, abs=1e-6)

    def test_trace_nonnegative(self, se_kernel):
        """测试迹项非负"""
        X = np.linspace(-2, 2, 15).reshape(-1, 1)
        K = se_kernel.gram(X)
        idx = [0, 7, 14]
        assert trace_term(K, K[idx], K[np.ix_(idx, idx)]) > 0.0

    def test_shape_mismatch(self):
        """测试矩阵形状不一致"""
        with pytest.raises(ConfigError):
            trace_term(np.eye(3), np.ones((2, 4)), np.eye(2))

    def test_collapsed_gap_within_trace_bound(self, two_kernel_pool):
        """测试 log p(y) 与坍缩 ELBO 之差落在迹上界之内"""
        X = np.linspace(-4, 4, 25).reshape(-1, 1)
        wk = WeightedKernel(two_kernel_pool, np.ones(2))
        noise = 0.1
        y = sample_gp(wk, X, noise, seed=6)
        K = wk.gram(X)
        idx = np.arange(0, 25, 4)
        t = trace_term(K, K[idx], K[np.ix_(idx, idx)])
        gap = log_marginal_likelihood(wk, X, y, noise) - collapsed_bound(K, K[idx], K[np.ix_(idx, idx)], y, noise)
        assert gap >= -1e-8
        assert gap <= trace_kl_bound(t, noise, float(y @ y)) + 1e-8
        assert trace_kl_bound(t, noise, float(y @ y)) <= kl_upper_bound(t, noise, 1.0, float(y @ y))


class TestKLBounds:
    """KL 上界公式测试"""

    def test_kl_upper_bound_value(self):
        """测试上界公式"""
        assert kl_upper_bound(1.0, 1.0, 0.1, 0.0) == pytest.approx(5.0)
        assert kl_upper_bound(2.0, 0.5, 1.0, 1.0) == pytest.approx(2.0 / 1.0 * 3.0)

    @pytest.mark.parametrize("delta", [0.0, -0.1, 1.5])
    def test_invalid_delta(self, delta):
        """测试 δ 超出 (0, 1]"""
        with pytest.raises(ConfigError):
            kl_upper_bound(1.0, 1.0, delta, 0.0)

    def test_invalid_noise(self):
        """测试噪声必须为正"""
        with pytest.raises(ConfigError):
            trace_kl_bound(1.0, 0.0, 1.0)


class TestVerification:
    """两核与递归验证测试"""

    def test_se_per_report(self, se_kernel, per_kernel):
        """测试 SE 与 PER 的报告"""
        X = np.linspace(-5, 5, 40).reshape(-1, 1)
        y = sample_gp(WeightedKernel(KernelPool((se_kernel, per_kernel)), np.ones(2)), X, 0.1, seed=0)
        report = verify_proposition(se_kernel, per_kernel, X, y, M=10, noise=0.1)
        assert report.holds
        assert report.C_multi <= report.C_single + 1e-8 * max(1.0, report.C_single)
        assert report.C_multi_raw == pytest.approx(40 * report.C_multi)
        assert report.t_multi <= report.t_single + 1e-8 * 40
        assert report.bound_multi <= report.bound_single + 1e-8
        assert len(report.eigs) == 40
        data = json.loads(report.to_json())
        assert data["holds"] is True
        table = report.table()
        assert "SVGP" in table and "MultiSVGP" in table

    def test_weighted_kernels(self, se_kernel, per_kernel):
        """测试权重以平方进入"""
        X = np.linspace(-3, 3, 20).reshape(-1, 1)
        y = np.zeros(20)
        report = verify_proposition(se_kernel, per_kernel, X, y, M=5, noise=0.1, weights=(2.0, 1.0))
        assert report.eigs1[0] == pytest.approx(4.0 * top_eigenvalues(se_kernel.gram(X), 1)[0])

    def test_inducing_count_range(self, se_kernel, per_kernel):
        """测试 M 超出 [1, N]"""
        X = np.linspace(-1, 1, 5).reshape(-1, 1)
        with pytest.raises(ConfigError):
            verify_proposition(se_kernel, per_kernel, X, np.zeros(5), M=6, noise=0.1)

    def test_recursive_reports(self, se_kernel, per_kernel):
        """测试多于两个核时逐步折叠"""
        lin = KernelExpr((BaseKernel(BaseKind.LIN),))
        X = np.linspace(-2, 2, 20).reshape(-1, 1)
        reports = verify_pool_recursive([se_kernel, per_kernel, lin], X, np.sin(X[:, 0]), M=5, noise=0.1)
        assert len(reports) == 2
        assert all(r.heuristic and r.holds for r in reports)
        assert "(heuristic)" in reports[0].table()
        with pytest.raises(ConfigError):
            verify_pool_recursive([se_kernel], X, np.zeros(20), M=5, noise=0.1)

    @pytest.mark.parametrize("seed", range(50))
    def test_random_kernel_pairs(self, seed):
        """测试 50 个随机 (k1, k2, X, M) 实例上界检查成立"""
        rng = np.random.default_rng(seed)
        n = int(rng.integers(10, 31))
        X = np.sort(rng.uniform(-4, 4, n)).reshape(-1, 1)
        k1 = KernelExpr((BaseKernel(BaseKind.SE, lengthscale=float(rng.uniform(0.3, 3.0))),))
        k2 = KernelExpr((BaseKernel(BaseKind.PER, lengthscale=float(rng.uniform(0.3, 3.0)), period=float(rng.uniform(0.5, 4.0))),))
        M = int(rng.integers(1, n + 1))
        report = verify_proposition(k1, k2, X, rng.normal(size=n), M=M, noise=0.1, weights=tuple(rng.uniform(0.2, 2.0, 2)), seed=seed)
        assert report.holds
        assert report.C_multi <= report.C_single + 1e-8 * max(1.0, report.C_single)
