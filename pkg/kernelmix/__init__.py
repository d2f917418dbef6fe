"""
KernelMix - 带 Horseshoe 核选择的多诱导点稀疏高斯过程

每个候选核拥有自己的一组诱导变量，核权重上放 Horseshoe 收缩先验，
训练后按权重给出可解释的核分解。

主要组件：
- MultiSVGPModel: 每核一组诱导点的稀疏 GP
- SVGPBaseline: 求和核上的单组 SVGP
- HorseshoeState: 核权重的变分后验
- KernelPool: 候选核池
- train / predict: 随机变分训练与预测
- verify_proposition: KL 上界的数值验证
"""

from .utils import logger, ConfigError, NumericalError, InvariantViolation, Likelihood
from .kernels import BaseKernel, BaseKind, KernelExpr, KernelPool, build_pool, additive_pool
from .exact import GaussianPosterior, WeightedKernel, exact_posterior, w2_gaussian, kl_gaussian
from .horseshoe import HorseshoeState
from .multisvgp import MultiSVGPModel, SVGPBaseline, InducingGroup, optimal_q, component_predictive
from .config import RunConfig, TrainingConfig
from .trainer import train, predict, build_model
from .bound import BoundReport, verify_proposition
from .data import Dataset, load_csv, run_synth

# 导出主要类
__all__ = [
    "MultiSVGPModel",
    "SVGPBaseline",
    "InducingGroup",
    "HorseshoeState",
    "BaseKernel",
    "BaseKind",
    "KernelExpr",
    "KernelPool",
    "build_pool",
    "additive_pool",
    "GaussianPosterior",
    "WeightedKernel",
    "exact_posterior",
    "w2_gaussian",
    "kl_gaussian",
    "optimal_q",
    "component_predictive",
    "RunConfig",
    "TrainingConfig",
    "train",
    "predict",
    "build_model",
    "BoundReport",
    "verify_proposition",
    "Dataset",
    "load_csv",
    "run_synth",
    "ConfigError",
    "NumericalError",
    "InvariantViolation",
    "Likelihood",
    "logger",
]

__version__ = "0.1.0"
