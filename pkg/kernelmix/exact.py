"""
稠密代数的精确 GP：后验、边际似然、采样、高斯 KL 与 Wasserstein-2 距离。

这里的结果作为稀疏模型与界验证的参照（oracle）。
"""

from .utils import *
from .kernels import KernelPool
from dataclasses import dataclass

import numpy as onp
import scipy.linalg as sla

# 精确模型先尝试不加抖动，失败再升级
EXACT_LEVELS: Tuple[float, ...] = (0.0,) + JITTER_LEVELS

LOG_2PI = float(onp.log(2.0 * onp.pi))


@dataclass
class GaussianPosterior:
    """
    多元高斯 N(mean, cov)

    Attributes:
        mean (np.ndarray): 长度 T 的均值
        cov (np.ndarray): (T, T) 对称协方差
    """

    mean: onp.ndarray
    cov: onp.ndarray

    def __post_init__(self):
        self.mean = onp.asarray(self.mean, dtype=float).reshape(-1)
        self.cov = onp.atleast_2d(onp.asarray(self.cov, dtype=float))
        if self.cov.shape != (self.mean.size, self.mean.size):
            raise ConfigError(f"covariance shape {self.cov.shape} does not match mean length {self.mean.size}")

    @property
    def var(self) -> onp.ndarray:
        return onp.diag(self.cov).copy()

    def __len__(self) -> int:
        return self.mean.size

    def to_dict(self) -> Dict[str, Any]:
        return {"mean": self.mean.tolist(), "cov": self.cov.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GaussianPosterior":
        return cls(onp.asarray(data["mean"]), onp.asarray(data["cov"]))


class WeightedKernel:
    """
    加权和核 k̃(x, x') = Σ_i w_i² k_i(x, x')

    Attributes:
        pool (KernelPool): 核池
        weights (np.ndarray): 长度 m 的非负权重
    """

    def __init__(self, pool: KernelPool, weights):
        weights = onp.asarray(weights, dtype=float).reshape(-1)
        if weights.size != pool.m:
            raise ConfigError(f"expected {pool.m} weights, got {weights.size}")
        if onp.any(weights < 0) or not onp.all(onp.isfinite(weights)):
            raise ConfigError("weights must be finite and nonnegative")
        self.pool = pool
        self.weights = weights

    def gram(self, X, X2=None) -> onp.ndarray:
        X = as_2d(X)
        X2n = X if X2 is None else as_2d(X2)
        K = onp.zeros((X.shape[0], X2n.shape[0]))
        # 固定求和顺序
        for w, e in zip(self.weights, self.pool):
            if w == 0.0:
                continue
            K = K + w ** 2 * onp.asarray(e.gram(X, None if X2 is None else X2n))
        return K

    def diag(self, X) -> onp.ndarray:
        X = as_2d(X)
        d = onp.zeros(X.shape[0])
        for w, e in zip(self.weights, self.pool):
            d = d + w ** 2 * onp.asarray(e.diag(X))
        return d


def _check_data(X, y, noise: float) -> Tuple[onp.ndarray, onp.ndarray]:
    X = as_2d(X)
    y = onp.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] != y.size:
        raise ConfigError(f"X has {X.shape[0]} rows but y has {y.size} entries")
    check_finite("X", X)
    check_finite("y", y)
    if not (noise > 0):
        raise ConfigError(f"noise variance must be positive, got {noise}")
    return X, y


def _noisy_factor(wk: WeightedKernel, X: onp.ndarray, noise: float) -> onp.ndarray:
    K = wk.gram(X) + noise * onp.eye(X.shape[0])
    return onp.asarray(robust_cholesky(K, levels=EXACT_LEVELS, what="K + noise"))


def exact_posterior(wk: WeightedKernel, X, y, noise: float, Xs) -> GaussianPosterior:
    """
    精确 GP 的潜函数后验（协方差不含观测噪声）

    mean = k(X*, X)(K + σ²I)⁻¹y,
    cov = k(X*, X*) − k(X*, X)(K + σ²I)⁻¹k(X*, X)ᵀ

    Args:
        wk (WeightedKernel): 加权核
        X (np.ndarray): (N, D) 训练输入
        y (np.ndarray): 长度 N 的目标
        noise (float): 噪声方差 σ_n²
        Xs (np.ndarray): (T, D) 测试输入

    Returns:
        GaussianPosterior: 后验
    """
    X, y = _check_data(X, y, noise)
    Xs = as_2d(Xs)
    check_finite("X*", Xs)
    L = _noisy_factor(wk, X, noise)
    Ksx = wk.gram(Xs, X)
    alpha = sla.cho_solve((L, True), y)
    V = sla.solve_triangular(L, Ksx.T, lower=True)
    cov = wk.gram(Xs) - V.T @ V
    cov = 0.5 * (cov + cov.T)
    return GaussianPosterior(Ksx @ alpha, cov)


def log_marginal_likelihood(wk: WeightedKernel, X, y, noise: float) -> float:
    """log N(y | 0, K̃ + σ²I)"""
    X, y = _check_data(X, y, noise)
    L = _noisy_factor(wk, X, noise)
    alpha = sla.solve_triangular(L, y, lower=True)
    return float(-0.5 * alpha @ alpha - onp.sum(onp.log(onp.diag(L))) - 0.5 * y.size * LOG_2PI)


def sample_gp(wk: WeightedKernel, X, noise: float, seed: int) -> onp.ndarray:
    """
    从 N(0, K̃ + σ²I) 采样，给定种子时结果确定

    Example:
        >>> y = sample_gp(wk, X, 0.1, seed=0)
    """
    X = as_2d(X)
    if not (noise >= 0):
        raise ConfigError(f"noise variance must be nonnegative, got {noise}")
    K = wk.gram(X) + noise * onp.eye(X.shape[0])
    L = onp.asarray(robust_cholesky(K, levels=EXACT_LEVELS, what="sampling covariance"))
    rng = onp.random.default_rng(seed)
    return L @ rng.standard_normal(X.shape[0])


def sqrtm_psd(S: onp.ndarray) -> onp.ndarray:
    """对称半正定矩阵的平方根（特征值截断到 0）"""
    S = 0.5 * (S + S.T)
    try:
        vals, vecs = sla.eigh(S)
    except (sla.LinAlgError, ValueError) as e:
        logger.error(f"Matrix square root failed: {e}")
        raise NumericalError("matrix square root failed") from e
    vals = onp.clip(vals, 0.0, None)
    return (vecs * onp.sqrt(vals)) @ vecs.T


def w2_gaussian(P: GaussianPosterior, Q: GaussianPosterior) -> float:
    """
    两个高斯之间的 Wasserstein-2 距离

    W2² = ‖m_P − m_Q‖² + tr(Σ_P + Σ_Q − 2(Σ_Q^½ Σ_P Σ_Q^½)^½)
    """
    if len(P) != len(Q):
        raise ConfigError(f"length mismatch: {len(P)} vs {len(Q)}")
    root_q = sqrtm_psd(Q.cov)
    cross = sqrtm_psd(root_q @ P.cov @ root_q)
    d2 = float(onp.sum((P.mean - Q.mean) ** 2) + onp.trace(P.cov) + onp.trace(Q.cov) - 2.0 * onp.trace(cross))
    return float(onp.sqrt(max(d2, 0.0)))


def kl_gaussian(P: GaussianPosterior, Q: GaussianPosterior) -> float:
    """
    KL(P ‖ Q)，多元高斯的标准闭式

    Raises:
        NumericalError: Q 的协方差奇异
    """
    if len(P) != len(Q):
        raise ConfigError(f"length mismatch: {len(P)} vs {len(Q)}")
    k = len(P)
    try:
        Lq = sla.cholesky(0.5 * (Q.cov + Q.cov.T), lower=True)
    except sla.LinAlgError as e:
        logger.error(f"KL reference covariance is singular: {e}")
        raise NumericalError("singular covariance in KL reference distribution") from e
    Lp = onp.asarray(robust_cholesky(0.5 * (P.cov + P.cov.T), levels=EXACT_LEVELS, what="KL source covariance"))
    A = sla.solve_triangular(Lq, Lp, lower=True)
    b = sla.solve_triangular(Lq, Q.mean - P.mean, lower=True)
    logdet_q = 2.0 * onp.sum(onp.log(onp.diag(Lq)))
    logdet_p = 2.0 * onp.sum(onp.log(onp.diag(Lp)))
    return float(0.5 * (onp.sum(A ** 2) + b @ b - k + logdet_q - logdet_p))


def top_eigenvalues(K: onp.ndarray, M: int, tol: float = 1e-8) -> onp.ndarray:
    """
    对称矩阵最大的 M 个特征值（降序）

    Raises:
        ConfigError: 矩阵不对称（超过容差）
    """
    K = onp.atleast_2d(onp.asarray(K, dtype=float))
    scale = max(float(onp.max(onp.abs(K))), 1.0) if K.size else 1.0
    if K.shape[0] != K.shape[1] or onp.max(onp.abs(K - K.T)) > tol * scale:
        raise ConfigError("eigenvalues requested for a non-symmetric matrix")
    if M < 0:
        raise ConfigError(f"M must be nonnegative, got {M}")
    vals = sla.eigh(0.5 * (K + K.T), eigvals_only=True)
    return vals[::-1][: min(M, vals.size)].copy()


def predictive_log_density(P: GaussianPosterior, y, noise: float) -> float:
    """留出数据的平均对数预测密度，方差加上观测噪声"""
    y = onp.asarray(y, dtype=float).reshape(-1)
    v = P.var + noise
    return float(onp.mean(-0.5 * (LOG_2PI + onp.log(v) + (y - P.mean) ** 2 / v)))
