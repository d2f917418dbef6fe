#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
测试配置文件
提供测试用的fixtures和工具函数
"""

import pytest
import numpy as np

from kernelmix import BaseKernel, BaseKind, KernelExpr, KernelPool
from kernelmix.data import Dataset, Task, default_generator
from kernelmix.exact import WeightedKernel, sample_gp


@pytest.fixture
def se_kernel():
    """单因子 SE 核"""
    return KernelExpr((BaseKernel(BaseKind.SE, lengthscale=1.0),))


@pytest.fixture
def per_kernel():
    """单因子 PER 核"""
    return KernelExpr((BaseKernel(BaseKind.PER, lengthscale=1.0, period=2.0),))


@pytest.fixture
def two_kernel_pool(se_kernel, per_kernel):
    """SE + PER 两成员核池"""
    return KernelPool((se_kernel, per_kernel))


@pytest.fixture
def generator():
    """默认合成数据的生成核与权重"""
    return default_generator()


@pytest.fixture
def small_regression(two_kernel_pool):
    """[-5, 5] 上 30 个点的回归数据"""
    X = np.linspace(-5.0, 5.0, 30).reshape(-1, 1)
    y = sample_gp(WeightedKernel(two_kernel_pool, np.ones(2)), X, 0.01, seed=3)
    return Dataset(X, y, Task.REGRESSION, ["x"], "y")


@pytest.fixture
def small_classification():
    """一维阈值分类数据"""
    X = np.linspace(-3.0, 3.0, 40).reshape(-1, 1)
    y = (np.sin(X[:, 0]) > 0).astype(float)
    return Dataset(X, y, Task.CLASSIFICATION, ["x"], "label")


def write_csv(path, header, rows):
    """写一个简单的 CSV 测试文件"""
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(str(v) for v in row) + "\n")
    return str(path)


def assert_psd(S: np.ndarray, tol: float = 1e-9):
    """验证矩阵对称半正定"""
    assert np.allclose(S, S.T, atol=1e-10)
    assert np.min(np.linalg.eigvalsh(0.5 * (S + S.T))) > -tol * max(1.0, np.abs(S).max())
