import autograd.numpy as np
from autograd.tracer import getval
import logging
import warnings
from enum import Enum
from typing import Optional, Sequence, Tuple, List, Dict, Any, Union

# Configure logging
logging.basicConfig(
    level=logging.INFO, format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger("KernelMix")

# Only ignore specific RuntimeWarning
warnings.filterwarnings(
    "ignore", category=RuntimeWarning, message="divide by zero encountered in .*"
)

# 每次分解前加入的抖动级别（乘以对角线均值）
JITTER_LEVELS: Tuple[float, ...] = (1e-6, 1e-5, 1e-4)


class Likelihood(str, Enum):
    GAUSSIAN = "Gaussian"
    BERNOULLI = "Bernoulli"


class KernelMixError(Exception):
    """kernelmix 所有异常的基类"""


class ConfigError(KernelMixError, ValueError):
    """配置或参数非法（CLI 退出码 2）"""


class NumericalError(KernelMixError, RuntimeError):
    """
    数值失败（CLI 退出码 3）

    Attributes:
        iteration (int, optional): 训练发散时的迭代序号
    """

    def __init__(self, message: str, iteration: Optional[int] = None):
        super().__init__(message)
        self.iteration = iteration


class InvariantViolation(KernelMixError, AssertionError):
    """界或分解恒等式不成立（CLI 退出码 4）"""


def jitter_scale(K) -> float:
    """对角线均值，作为抖动的尺度；退化时回落到 1.0"""
    scale = float(np.mean(np.diag(getval(K))))
    if not np.isfinite(scale) or scale <= 0.0:
        return 1.0
    return scale


def robust_cholesky(K, levels: Sequence[float] = JITTER_LEVELS, what: str = "matrix"):
    """
    带抖动升级的 Cholesky 分解

    依次尝试 levels 中的抖动 (乘以对角线均值)，全部失败则抛出 NumericalError。
    可以在 autograd 追踪中使用，抖动本身视为常数。

    Args:
        K (np.ndarray): 对称矩阵 (n, n)
        levels (Sequence[float], optional): 抖动级别. Defaults to JITTER_LEVELS.
        what (str, optional): 日志中使用的矩阵名称

    Returns:
        np.ndarray: 下三角因子 L，L @ L.T = K + jitter * I

    Raises:
        NumericalError: 所有抖动级别都无法分解
    """
    n = K.shape[0]
    scale = jitter_scale(K)
    last_error = None
    for attempt, level in enumerate(levels):
        try:
            L = np.linalg.cholesky(K + (level * scale) * np.eye(n))
            if not np.all(np.isfinite(getval(L))):
                raise np.linalg.LinAlgError("non-finite factor")
            if attempt > 0:
                logger.warning(f"Cholesky of {what} needed jitter {level:g} x mean diagonal")
            return L
        except np.linalg.LinAlgError as e:
            last_error = e
    logger.error(f"Cholesky of {what} failed after jitter escalation: {last_error}")
    raise NumericalError(f"factorization of {what} failed after jitter escalation") from last_error


def softplus(x):
    """数值稳定的 softplus"""
    return np.logaddexp(0.0, x)


def inv_softplus(y):
    """softplus 的反函数，y > 0"""
    y = np.asarray(y, dtype=float)
    return np.where(y > 20.0, y, np.log(np.expm1(np.minimum(y, 20.0))))


def check_finite(name: str, value) -> None:
    """非有限值检查，失败时抛出 ConfigError"""
    if not np.all(np.isfinite(np.asarray(getval(value), dtype=float))):
        raise ConfigError(f"{name} contains non-finite values")


def as_2d(X) -> np.ndarray:
    """把一维输入整理成 (N, 1) 矩阵"""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise ConfigError(f"expected a matrix, got array with shape {X.shape}")
    return X
