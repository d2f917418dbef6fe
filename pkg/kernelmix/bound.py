"""
KL 上界的数值验证

比较单组 SVGP（求和核）与每核一组的 MultiSVGP：特征值尾和 C_single / C_multi、
经验迹项 t = tr(K_ff − Q_ff)，以及对应的 KL 上界。

特征值采用 Gram 矩阵的特征值。C_multi 的"归一化"口径去掉公式中的因子 N，
与 C_single 直接可比；原始口径（乘以 N）同时写入报告。
"""

from .utils import *
from .kernels import KernelExpr
from .exact import LOG_2PI, top_eigenvalues
from dataclasses import asdict, dataclass
import json

import numpy as onp
import scipy.linalg as sla

# 比较时的相对容差
BOUND_TOL = 1e-8


def c_single(eigs, M: int) -> float:
    """
    特征值尾和 Σ_{i>M} λ_i

    Example:
        >>> c_single([3.0, 2.0, 1.0], 1)
        3.0
    """
    if M < 0:
        raise ConfigError(f"M must be nonnegative, got {M}")
    eigs = onp.asarray(eigs, dtype=float).reshape(-1)
    return float(onp.sum(eigs[M:]))


def c_multi(eigs, eigs1, eigs2, M: int, N: int, normalized: bool = False) -> float:
    """
    C_multi = N Σ_{i≤M} (λ_i − λ_i⁽¹⁾ − λ_i⁽²⁾) + N Σ_{j>M} λ_j

    normalized=True 时去掉因子 N，与 c_single 同一口径。

    Raises:
        ConfigError: 谱长度不一致或 M 非法
    """
    eigs = onp.asarray(eigs, dtype=float).reshape(-1)
    eigs1 = onp.asarray(eigs1, dtype=float).reshape(-1)
    eigs2 = onp.asarray(eigs2, dtype=float).reshape(-1)
    if M < 0:
        raise ConfigError(f"M must be nonnegative, got {M}")
    if not (eigs.size == eigs1.size == eigs2.size):
        raise ConfigError(f"spectra lengths differ: {eigs.size}, {eigs1.size}, {eigs2.size}")
    if M > eigs.size:
        raise ConfigError(f"M={M} exceeds the spectrum length {eigs.size}")
    head = float(onp.sum(eigs[:M] - eigs1[:M] - eigs2[:M]))
    value = head + c_single(eigs, M)
    return value if normalized else N * value


def ky_fan_check(K1, K2, M: int) -> float:
    """
    前 M 个特征值之和的次可加性余量

    slack = Σ_{i≤M} λ_i(K1) + Σ_{i≤M} λ_i(K2) − Σ_{i≤M} λ_i(K1 + K2) ≥ 0

    Raises:
        ConfigError: 输入不对称
    """
    K1 = onp.asarray(K1, dtype=float)
    K2 = onp.asarray(K2, dtype=float)
    if K1.shape != K2.shape:
        raise ConfigError(f"shape mismatch: {K1.shape} vs {K2.shape}")
    lhs = onp.sum(top_eigenvalues(K1 + K2, M))
    rhs = onp.sum(top_eigenvalues(K1, M)) + onp.sum(top_eigenvalues(K2, M))
    return float(rhs - lhs)


def _nystrom(K_uf, K_uu) -> onp.ndarray:
    """Q_ff = K_ufᵀ K_uu⁺ K_uf（对称特征分解的伪逆）"""
    K_uu = onp.atleast_2d(onp.asarray(K_uu, dtype=float))
    K_uf = onp.atleast_2d(onp.asarray(K_uf, dtype=float))
    if K_uu.shape[0] != K_uf.shape[0]:
        raise ConfigError(f"K_uu {K_uu.shape} and K_uf {K_uf.shape} are not conformable")
    try:
        inv = sla.pinvh(0.5 * (K_uu + K_uu.T))
    except (sla.LinAlgError, ValueError) as e:
        logger.error(f"Pseudo-inverse of K_uu failed: {e}")
        raise NumericalError("pseudo-inverse of K_uu failed") from e
    Q = K_uf.T @ inv @ K_uf
    return 0.5 * (Q + Q.T)


def trace_term(K_ff, K_uf, K_uu) -> float:
    """t = tr(K_ff) − tr(K_ufᵀ K_uu⁻¹ K_uf)"""
    K_ff = onp.atleast_2d(onp.asarray(K_ff, dtype=float))
    if K_ff.shape[0] != onp.atleast_2d(K_uf).shape[1]:
        raise ConfigError(f"K_ff {K_ff.shape} and K_uf {onp.shape(K_uf)} are not conformable")
    return float(onp.trace(K_ff) - onp.trace(_nystrom(K_uf, K_uu)))


def _check_delta(delta: float) -> None:
    if not 0.0 < delta <= 1.0:
        raise ConfigError(f"delta must lie in (0, 1], got {delta}")


def kl_upper_bound(C: float, noise: float, delta: float, y_norm2: float) -> float:
    """
    C / (2σ_n²δ) · (1 + ‖y‖² / σ_n²)

    δ = 1 对应输入固定时的确定性版本。

    Example:
        >>> kl_upper_bound(1.0, 1.0, 0.1, 0.0)
        5.0
    """
    _check_delta(delta)
    if not noise > 0:
        raise ConfigError(f"noise variance must be positive, got {noise}")
    return float(C / (2.0 * noise * delta) * (1.0 + y_norm2 / noise))


def trace_kl_bound(t: float, noise: float, y_norm2: float) -> float:
    """确定性的迹上界 t / (2σ_n²) · (1 + ‖y‖² / (σ_n² + t))"""
    if not noise > 0:
        raise ConfigError(f"noise variance must be positive, got {noise}")
    t = max(float(t), 0.0)
    return float(t / (2.0 * noise) * (1.0 + y_norm2 / (noise + t)))


def collapsed_bound(K_ff, K_uf, K_uu, y, noise: float) -> float:
    """
    坍缩 ELBO：log N(y | 0, Q_ff + σ_n²I) − t / (2σ_n²)

    与精确对数边际似然之差即为 KL(Q ‖ P̂)。
    """
    if not noise > 0:
        raise ConfigError(f"noise variance must be positive, got {noise}")
    y = onp.asarray(y, dtype=float).reshape(-1)
    Q = _nystrom(K_uf, K_uu)
    if Q.shape[0] != y.size:
        raise ConfigError(f"Q_ff has {Q.shape[0]} rows but y has {y.size} entries")
    L = onp.asarray(robust_cholesky(Q + noise * onp.eye(y.size), levels=(0.0,) + JITTER_LEVELS, what="Q_ff + noise"))
    a = sla.solve_triangular(L, y, lower=True)
    log_n = -0.5 * a @ a - onp.sum(onp.log(onp.diag(L))) - 0.5 * y.size * LOG_2PI
    return float(log_n - trace_term(K_ff, K_uf, K_uu) / (2.0 * noise))


@dataclass
class BoundReport:
    """
    界验证报告

    Attributes:
        M, N (int): 诱导点数 / 数据点数
        eigs, eigs1, eigs2 (list): K、K1、K2 的降序特征值
        C_single (float): Σ_{i>M} λ_i
        C_multi (float): 归一化口径的 C_multi，与 C_single 可比
        C_multi_raw (float): 原始口径（乘以 N）
        t_single, t_multi (float): 经验迹项
        bound_single, bound_multi (float): 由 C 得到的 KL 上界
        delta (float): 置信参数 δ
        noise (float): σ_n²
        y_norm2 (float): ‖y‖²
        heuristic (bool): 多于两个核时递归套用的结果
        label (str): 报告标签
    """

    M: int
    N: int
    eigs: List[float]
    eigs1: List[float]
    eigs2: List[float]
    C_single: float
    C_multi: float
    C_multi_raw: float
    t_single: float
    t_multi: float
    bound_single: float
    bound_multi: float
    delta: float
    noise: float
    y_norm2: float
    heuristic: bool = False
    label: str = ""

    @property
    def holds(self) -> bool:
        tol = BOUND_TOL * max(1.0, abs(self.C_single))
        return self.C_multi <= self.C_single + tol

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["holds"] = self.holds
        return data

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    def table(self) -> str:
        """对比表：model, C, t, bound"""
        rows = [
            ("model", "C", "t", "bound"),
            ("SVGP", f"{self.C_single:.6g}", f"{self.t_single:.6g}", f"{self.bound_single:.6g}"),
            ("MultiSVGP", f"{self.C_multi:.6g}", f"{self.t_multi:.6g}", f"{self.bound_multi:.6g}"),
        ]
        widths = [max(len(r[i]) for r in rows) for i in range(4)]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)) for r in rows]
        title = f"M={self.M} N={self.N} delta={self.delta:g} noise={self.noise:g}"
        if self.heuristic:
            title += " (heuristic)"
        if self.label:
            title = f"{self.label}: {title}"
        return "\n".join([title] + lines)


def _verify_grams(K1, K2, y, M: int, noise: float, delta: float, seed: int, label: str = "", heuristic: bool = False) -> BoundReport:
    N = K1.shape[0]
    if not 1 <= M <= N:
        raise ConfigError(f"M must lie in [1, N={N}], got {M}")
    _check_delta(delta)
    y = onp.asarray(y, dtype=float).reshape(-1)
    if y.size != N:
        raise ConfigError(f"y has {y.size} entries but the Gram matrices are {N}x{N}")
    K = K1 + K2
    eigs = top_eigenvalues(K, N)
    eigs1 = top_eigenvalues(K1, N)
    eigs2 = top_eigenvalues(K2, N)
    Cs = c_single(eigs, M)
    Cm = c_multi(eigs, eigs1, eigs2, M, N, normalized=True)
    Cm_raw = c_multi(eigs, eigs1, eigs2, M, N)

    # 同一组诱导位置：SVGP 用求和核，MultiSVGP 每个核一组
    rng = onp.random.default_rng(seed)
    idx = onp.sort(rng.choice(N, M, replace=False))
    t_single = trace_term(K, K[idx, :], K[onp.ix_(idx, idx)])
    K_uf = onp.vstack([K1[idx, :], K2[idx, :]])
    K_uu = sla.block_diag(K1[onp.ix_(idx, idx)], K2[onp.ix_(idx, idx)])
    t_multi = trace_term(K, K_uf, K_uu)

    y_norm2 = float(y @ y)
    report = BoundReport(
        M=M,
        N=N,
        eigs=eigs.tolist(),
        eigs1=eigs1.tolist(),
        eigs2=eigs2.tolist(),
        C_single=Cs,
        C_multi=Cm,
        C_multi_raw=Cm_raw,
        t_single=t_single,
        t_multi=t_multi,
        bound_single=kl_upper_bound(Cs, noise, delta, y_norm2),
        bound_multi=kl_upper_bound(max(Cm, 0.0), noise, delta, y_norm2),
        delta=delta,
        noise=noise,
        y_norm2=y_norm2,
        heuristic=heuristic,
        label=label,
    )
    scale = max(1.0, float(onp.trace(K)))
    if min(t_single, t_multi) < -BOUND_TOL * scale:
        raise InvariantViolation(f"negative trace term: t_single={t_single}, t_multi={t_multi}")
    if not report.holds:
        logger.error(f"C_multi={Cm} exceeds C_single={Cs}")
        raise InvariantViolation(f"C_multi={Cm} exceeds C_single={Cs}")
    return report


def verify_proposition(
    k1: KernelExpr,
    k2: KernelExpr,
    X,
    y,
    M: int,
    noise: float,
    delta: float = 0.1,
    weights: Tuple[float, float] = (1.0, 1.0),
    seed: int = 0,
) -> BoundReport:
    """
    两个核的界验证

    用 w1²k1、w2²k2 与其和的 Gram 矩阵计算谱、C 与两种模型的经验迹项，
    并断言 C_multi ≤ C_single。

    Raises:
        InvariantViolation: C_multi > C_single 或迹项为负
        ConfigError: M 不在 [1, N] 内或 δ 非法

    Example:
        >>> report = verify_proposition(se, per, X, y, M=10, noise=0.1)
        >>> report.holds
        True
    """
    X = as_2d(X)
    w1, w2 = (float(w) for w in weights)
    K1 = w1 ** 2 * onp.asarray(k1.gram(X))
    K2 = w2 ** 2 * onp.asarray(k2.gram(X))
    report = _verify_grams(K1, K2, y, M, noise, delta, seed, label=f"{k1.name} + {k2.name}")
    logger.info(f"Bound check {report.label}: C_multi={report.C_multi:.6g} <= C_single={report.C_single:.6g}")
    return report


def verify_pool_recursive(
    kernels: Sequence[KernelExpr],
    X,
    y,
    M: int,
    noise: float,
    delta: float = 0.1,
    seed: int = 0,
) -> List[BoundReport]:
    """
    多于两个核时从左到右折叠套用两核检查（启发式）

    第 j 步比较 (k_1 + … + k_j) 与 k_{j+1}。
    """
    if len(kernels) < 2:
        raise ConfigError("need at least two kernels")
    X = as_2d(X)
    acc = onp.asarray(kernels[0].gram(X))
    names = kernels[0].name
    reports = []
    for k in kernels[1:]:
        Kk = onp.asarray(k.gram(X))
        reports.append(_verify_grams(acc, Kk, y, M, noise, delta, seed, label=f"({names}) + {k.name}", heuristic=True))
        acc = acc + Kk
        names = f"{names} + {k.name}"
    return reports
