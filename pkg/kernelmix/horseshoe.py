"""
核权重上的 Horseshoe 先验

半柯西尺度通过双逆伽马重参数化：
    τ² | φ_τ ~ IG(½, 1/φ_τ),   φ_τ ~ IG(½, A⁻²)
    λ_i² | φ_λi ~ IG(½, 1/φ_λi), φ_λi ~ IG(½, B⁻²)
变分分布：q(τ²)、q(λ_i²) 为对数正态，q(φ) 为逆伽马，后者由闭式更新刷新。
"""

from .utils import *
from dataclasses import dataclass, replace

import numpy as onp
from scipy.special import digamma, gammaln

LOG_GAMMA_HALF = float(gammaln(0.5))


@dataclass(frozen=True)
class HorseshoeState:
    """
    Horseshoe 变分参数

    Attributes:
        mu_tau (float): q(τ²) 的对数正态位置参数
        sigma_tau (float): q(τ²) 的对数正态尺度参数
        mu_lambda (np.ndarray): 每个核的 q(λ_i²) 位置参数
        sigma_lambda (np.ndarray): 每个核的 q(λ_i²) 尺度参数
        s_tau, r_tau (float): q(φ_τ) = IG(s_τ, r_τ)
        s_lambda, r_lambda (np.ndarray): q(φ_λi) = IG(s_λi, r_λi)
        A, B (float): 全局 / 局部半柯西尺度
    """

    mu_tau: float
    sigma_tau: float
    mu_lambda: onp.ndarray
    sigma_lambda: onp.ndarray
    s_tau: float
    r_tau: float
    s_lambda: onp.ndarray
    r_lambda: onp.ndarray
    A: float = 1.0
    B: float = 1.0

    def __post_init__(self):
        for name in ("mu_lambda", "sigma_lambda", "s_lambda", "r_lambda"):
            object.__setattr__(self, name, onp.asarray(getval(getattr(self, name)), dtype=float).reshape(-1))
        for name in ("mu_tau", "sigma_tau", "s_tau", "r_tau", "A", "B"):
            object.__setattr__(self, name, float(getval(getattr(self, name))))
        m = self.mu_lambda.size
        if any(v.size != m for v in (self.sigma_lambda, self.s_lambda, self.r_lambda)):
            raise ConfigError("Horseshoe per-kernel vectors must all have length m")
        if self.sigma_tau < 0 or onp.any(self.sigma_lambda < 0):
            raise ConfigError("log-normal scales must be nonnegative")
        if self.s_tau <= 0 or self.r_tau <= 0 or onp.any(self.s_lambda <= 0) or onp.any(self.r_lambda <= 0):
            raise ConfigError("inverse-Gamma parameters must be positive")
        if self.A <= 0 or self.B <= 0:
            raise ConfigError(f"Horseshoe scales must be positive, got A={self.A}, B={self.B}")

    @property
    def m(self) -> int:
        return self.mu_lambda.size

    @classmethod
    def initial(cls, m: int, A: float = 1.0, B: float = 1.0, sigma0: float = 0.05) -> "HorseshoeState":
        """权重从 1 附近开始（μ = 0, σ = sigma0），再做一次闭式辅助更新"""
        state = cls(
            mu_tau=0.0,
            sigma_tau=sigma0,
            mu_lambda=onp.zeros(m),
            sigma_lambda=onp.full(m, sigma0),
            s_tau=1.0,
            r_tau=1.0,
            s_lambda=onp.ones(m),
            r_lambda=onp.ones(m),
            A=A,
            B=B,
        )
        return update_aux(state)

    def params(self) -> Dict[str, onp.ndarray]:
        """可训练的无约束参数（σ 经 softplus）"""
        return {
            "mu_tau": onp.array(self.mu_tau),
            "raw_sigma_tau": onp.asarray(inv_softplus(self.sigma_tau)),
            "mu_lambda": self.mu_lambda.copy(),
            "raw_sigma_lambda": onp.asarray(inv_softplus(self.sigma_lambda)),
        }

    def with_params(self, params: Dict[str, Any]) -> "HorseshoeState":
        return replace(
            self,
            mu_tau=float(getval(params["mu_tau"])),
            sigma_tau=float(softplus(getval(params["raw_sigma_tau"]))),
            mu_lambda=onp.asarray(getval(params["mu_lambda"]), dtype=float),
            sigma_lambda=onp.asarray(softplus(getval(params["raw_sigma_lambda"])), dtype=float),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mu_tau": self.mu_tau,
            "sigma_tau": self.sigma_tau,
            "mu_lambda": self.mu_lambda.tolist(),
            "sigma_lambda": self.sigma_lambda.tolist(),
            "s_tau": self.s_tau,
            "r_tau": self.r_tau,
            "s_lambda": self.s_lambda.tolist(),
            "r_lambda": self.r_lambda.tolist(),
            "A": self.A,
            "B": self.B,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "HorseshoeState":
        return cls(**data)


def constrained(params: Dict[str, Any]) -> Tuple[Any, Any, Any, Any]:
    """无约束参数 -> (μ_τ, σ_τ, μ_λ, σ_λ)，可求导"""
    return (
        params["mu_tau"],
        softplus(params["raw_sigma_tau"]),
        params["mu_lambda"],
        softplus(params["raw_sigma_lambda"]),
    )


def weights_from(mu_tau, sigma_tau, mu_lambda, sigma_lambda, eps):
    """w_i = exp(μ_τ + μ_λi + ε_i(σ_τ + σ_λi))"""
    log_w = mu_tau + mu_lambda + eps * (sigma_tau + sigma_lambda)
    w = np.exp(log_w)
    if not onp.all(onp.isfinite(getval(w))):
        raise NumericalError("weight sample overflowed")
    return w


def sample_weights(state: HorseshoeState, eps) -> onp.ndarray:
    """
    重参数化采样核权重

    Args:
        state (HorseshoeState): 变分状态
        eps (np.ndarray): m 个标准正态样本

    Returns:
        np.ndarray: 长度 m 的正权重

    Example:
        >>> w = sample_weights(state, np.random.default_rng(0).standard_normal(state.m))
    """
    eps = onp.asarray(eps, dtype=float).reshape(-1)
    if eps.size != state.m:
        raise ConfigError(f"expected {state.m} noise draws, got {eps.size}")
    return weights_from(state.mu_tau, state.sigma_tau, state.mu_lambda, state.sigma_lambda, eps)


def lognormal_entropy(mu, sigma):
    """H[LogNormal(μ, σ²)] = μ + ½ log(2πeσ²)"""
    if onp.any(onp.asarray(getval(sigma)) <= 0):
        raise ConfigError("log-normal scale must be positive")
    return mu + 0.5 * np.log(2.0 * np.pi * np.e * sigma ** 2)


def lognormal_moments(mu, sigma):
    """(E[x⁻¹], E[log x]) = (exp(−μ + σ²/2), μ)"""
    return np.exp(-mu + 0.5 * sigma ** 2), mu


def invgamma_expectations(s, r):
    """逆伽马 IG(s, r) 的 (E[log φ], E[φ⁻¹]) = (log r − ψ(s), s / r)"""
    s = onp.asarray(s, dtype=float)
    r = onp.asarray(r, dtype=float)
    if onp.any(s <= 0) or onp.any(r <= 0):
        raise ConfigError("inverse-Gamma parameters must be positive")
    return onp.log(r) - digamma(s), s / r


def invgamma_entropy(s, r):
    """H[IG(s, r)] = s + log r + log Γ(s) − (1 + s) ψ(s)"""
    s = onp.asarray(s, dtype=float)
    r = onp.asarray(r, dtype=float)
    return s + onp.log(r) + gammaln(s) - (1.0 + s) * digamma(s)


def kl_block(mu, sigma, s, r, scale):
    """
    一个尺度变量 x（τ² 或 λ_i²）及其辅助变量 φ 的 KL 贡献

    KL = E[log q(x)] + E[log q(φ)] − E[log p(x | φ)] − E[log p(φ)]
    其中 p(x | φ) = IG(½, 1/φ)，p(φ) = IG(½, scale⁻²)。φ 相关的项对 (μ, σ) 无梯度。
    """
    e_log_phi, e_inv_phi = invgamma_expectations(s, r)
    e_inv_x, e_log_x = lognormal_moments(mu, sigma)
    neg_entropy_x = -lognormal_entropy(mu, sigma)
    neg_entropy_phi = -invgamma_entropy(s, r)
    log_p_x = -0.5 * e_log_phi - LOG_GAMMA_HALF - 1.5 * e_log_x - e_inv_x * e_inv_phi
    inv_scale2 = scale ** -2.0
    log_p_phi = 0.5 * onp.log(inv_scale2) - LOG_GAMMA_HALF - 1.5 * e_log_phi - inv_scale2 * e_inv_phi
    return neg_entropy_x + neg_entropy_phi - log_p_x - log_p_phi


def kl_terms(mu_tau, sigma_tau, mu_lambda, sigma_lambda, state: HorseshoeState):
    """用 state 的 (s, r, A, B) 组装 KL(q(w) ‖ p(w))，对 μ、σ 可求导"""
    kl_tau = kl_block(mu_tau, sigma_tau, state.s_tau, state.r_tau, state.A)
    kl_lambda = kl_block(mu_lambda, sigma_lambda, state.s_lambda, state.r_lambda, state.B)
    return kl_tau + np.sum(kl_lambda)


def kl_weights(state: HorseshoeState) -> float:
    """
    KL(q(τ²)q(φ_τ)Π q(λ_i²)q(φ_λi) ‖ p(τ²|φ_τ)p(φ_τ)Π p(λ_i²|φ_λi)p(φ_λi))

    Returns:
        float: 非负的 KL 值

    Raises:
        ConfigError: σ 不为正
    """
    value = kl_terms(state.mu_tau, state.sigma_tau, state.mu_lambda, state.sigma_lambda, state)
    return float(value)


def update_aux(state: HorseshoeState) -> HorseshoeState:
    """
    辅助变量的闭式最优更新

    s_τ ← 1, r_τ ← E[τ⁻²] + A⁻²；s_λi ← 1, r_λi ← E[λ_i⁻²] + B⁻²。其余字段不变。
    """
    e_inv_tau, _ = lognormal_moments(state.mu_tau, state.sigma_tau)
    e_inv_lambda, _ = lognormal_moments(state.mu_lambda, state.sigma_lambda)
    return replace(
        state,
        s_tau=1.0,
        r_tau=float(e_inv_tau + state.A ** -2),
        s_lambda=onp.ones(state.m),
        r_lambda=onp.asarray(e_inv_lambda + state.B ** -2, dtype=float),
    )


def sample_prior_scale(scale: float, size: int, rng: onp.random.Generator) -> onp.ndarray:
    """
    从双逆伽马复合先验采样尺度 √x

    φ ~ IG(½, scale⁻²)，x | φ ~ IG(½, 1/φ)；√x 服从半柯西分布 C⁺(0, scale)。
    IG(a, b) 由 b / Gamma(a, 1) 得到。
    """
    if not scale > 0:
        raise ConfigError(f"prior scale must be positive, got {scale}")
    phi = scale ** -2.0 / rng.gamma(0.5, size=size)
    x = 1.0 / (phi * rng.gamma(0.5, size=size))
    return onp.sqrt(x)


def weight_summary(state: HorseshoeState) -> onp.ndarray:
    """报告用的权重：对数正态乘积的中位数 exp(μ_τ + μ_λi)"""
    return onp.exp(state.mu_tau + state.mu_lambda)
