"""
稀疏变分 GP 模型

- MultiSVGPModel: 每个核一个诱导点组 (Z_i, m_i, S_i)，预测分布是各组条件分布的加权和
- SVGPBaseline: 单组诱导点，使用求和核 K̃_uu = Σ w_i² K_i,uu

S_i = L_i L_iᵀ，L_i 为下三角、对角线经 softplus 保证为正。采用非白化参数化。
"""

from .utils import *
from .kernels import KernelExpr, KernelPool
from .exact import EXACT_LEVELS, GaussianPosterior
from .horseshoe import HorseshoeState, weight_summary
from dataclasses import dataclass, field, replace
import json

import numpy as onp
import scipy.linalg as sla
from autograd.scipy.linalg import solve_triangular


def factor_from_raw(raw):
    """无约束矩阵 -> 对角线为正的下三角因子"""
    return np.tril(raw, -1) + np.diag(softplus(np.diag(raw)))


def raw_from_factor(L) -> onp.ndarray:
    L = onp.asarray(L, dtype=float)
    return onp.tril(L, -1) + onp.diag(inv_softplus(onp.diag(L)))


@dataclass
class InducingGroup:
    """
    一组诱导变量

    Attributes:
        Z (np.ndarray): (M, D) 诱导位置
        m (np.ndarray): 长度 M 的变分均值
        L (np.ndarray): (M, M) 下三角因子，S = L Lᵀ
    """

    Z: onp.ndarray
    m: onp.ndarray
    L: onp.ndarray

    def __post_init__(self):
        self.Z = as_2d(getval(self.Z))
        self.m = onp.asarray(getval(self.m), dtype=float).reshape(-1)
        self.L = onp.atleast_2d(onp.asarray(getval(self.L), dtype=float))
        M = self.Z.shape[0]
        if M < 1:
            raise ConfigError("an inducing group needs at least one location")
        if self.m.size != M or self.L.shape != (M, M):
            raise ConfigError(f"group shapes disagree: Z {self.Z.shape}, m {self.m.shape}, L {self.L.shape}")
        if onp.any(onp.triu(self.L, 1) != 0.0):
            raise ConfigError("L must be lower triangular")
        if onp.any(onp.diag(self.L) <= 0.0):
            raise ConfigError("diagonal of L must be positive")

    @property
    def M(self) -> int:
        return self.Z.shape[0]

    @property
    def S(self) -> onp.ndarray:
        return self.L @ self.L.T

    def params(self, optimize_inducing: bool = True) -> Dict[str, onp.ndarray]:
        p = {"m": self.m.copy(), "L": raw_from_factor(self.L)}
        if optimize_inducing:
            p["Z"] = self.Z.copy()
        return p

    def with_params(self, p: Dict[str, Any]) -> "InducingGroup":
        return InducingGroup(
            Z=p["Z"] if "Z" in p else self.Z,
            m=p["m"],
            L=factor_from_raw(getval(p["L"])),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {"Z": self.Z.tolist(), "m": self.m.tolist(), "L": self.L.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "InducingGroup":
        return cls(onp.asarray(data["Z"]), onp.asarray(data["m"]), onp.asarray(data["L"]))


@dataclass(frozen=True)
class TaggedLocations:
    """
    带组标签的查询位置，group[j] 表示 Z[j] 属于 𝒵_group[j]

    Attributes:
        Z (np.ndarray): (Q, D) 位置
        group (tuple): 每个位置所属的组索引（0 起始）
    """

    Z: onp.ndarray
    group: Tuple[Optional[int], ...]

    def __post_init__(self):
        object.__setattr__(self, "Z", as_2d(self.Z))
        object.__setattr__(self, "group", tuple(self.group))
        if len(self.group) != self.Z.shape[0]:
            raise ConfigError(f"{self.Z.shape[0]} locations but {len(self.group)} group tags")

    @classmethod
    def from_groups(cls, groups: Sequence[InducingGroup]) -> "TaggedLocations":
        Z = onp.vstack([g.Z for g in groups])
        tags = [i for i, g in enumerate(groups) for _ in range(g.M)]
        return cls(Z, tuple(tags))


# ---------------------------------------------------------------------------
# 可求导的核心计算（参数以 autograd 可追踪的数组给出）
# ---------------------------------------------------------------------------


def _q_moments(Kuu, Kuf, kdiag, m, L, Kss=None):
    """
    q(f*) = ∫ p(f* | u) q(u) du 的均值与方差（以及可选的完整协方差）

    A = Lk⁻¹ K_uf, mean = Aᵀ Lk⁻¹ m,
    var = k** − Σ A² + Σ (Lᵀ K_uu⁻¹ K_uf)²
    """
    Lk = robust_cholesky(Kuu, what="K_uu")
    A = solve_triangular(Lk, Kuf, lower=True)
    alpha = solve_triangular(Lk, m, lower=True)
    B = solve_triangular(Lk.T, A, lower=False)
    C = np.dot(L.T, B)
    mean = np.dot(A.T, alpha)
    var = kdiag - np.sum(A ** 2, axis=0) + np.sum(C ** 2, axis=0)
    cov = None
    if Kss is not None:
        cov = Kss - np.dot(A.T, A) + np.dot(C.T, C)
    return mean, var, cov


def _kl_group(Kuu, m, L):
    """KL(N(m, LLᵀ) ‖ N(0, K_uu))"""
    Lk = robust_cholesky(Kuu, what="K_uu")
    V = solve_triangular(Lk, L, lower=True)
    a = solve_triangular(Lk, m, lower=True)
    M = m.shape[0]
    logdet_k = 2.0 * np.sum(np.log(np.diag(Lk)))
    logdet_s = 2.0 * np.sum(np.log(np.abs(np.diag(L))))
    return 0.5 * (np.sum(V ** 2) + np.dot(a, a) - M + logdet_k - logdet_s)


def _summed_gram(pool: KernelPool, kparams, w, X, X2=None):
    K = None
    for i, (e, theta) in enumerate(zip(pool, kparams)):
        Ki = w[i] ** 2 * e.gram(X, X2, theta=theta)
        K = Ki if K is None else K + Ki
    return K


def _summed_diag(pool: KernelPool, kparams, w, X):
    d = None
    for i, (e, theta) in enumerate(zip(pool, kparams)):
        di = w[i] ** 2 * e.diag(X, theta=theta)
        d = di if d is None else d + di
    return d


def _check_weights(w, m: int):
    wv = onp.asarray(getval(w), dtype=float).reshape(-1)
    if wv.size != m:
        raise ConfigError(f"expected {m} weights, got {wv.size}")
    if onp.any(wv < 0) or not onp.all(onp.isfinite(wv)):
        raise ConfigError("weights must be finite and nonnegative")


# ---------------------------------------------------------------------------
# 模型
# ---------------------------------------------------------------------------


@dataclass
class _SparseModel:
    """
    两种稀疏模型的公共部分

    Attributes:
        pool (KernelPool): 核池
        weights (HorseshoeState | np.ndarray): Horseshoe 变分状态，或直接给定的权重向量
        noise (float): 高斯噪声方差 σ_n²（Bernoulli 似然时不使用）
        likelihood (Likelihood): 似然类型
        fixed_weights (bool): 权重向量不参与训练
        config_hash (str, optional): 训练配置的哈希
    """

    pool: KernelPool
    weights: Union[HorseshoeState, onp.ndarray]
    noise: float = 1.0
    likelihood: Likelihood = Likelihood.GAUSSIAN
    fixed_weights: bool = False
    config_hash: Optional[str] = None

    def _validate_common(self):
        self.likelihood = Likelihood(self.likelihood)
        if isinstance(self.weights, HorseshoeState):
            if self.weights.m != self.pool.m:
                raise ConfigError(f"Horseshoe state has {self.weights.m} kernels, pool has {self.pool.m}")
        else:
            self.weights = onp.asarray(self.weights, dtype=float).reshape(-1)
            _check_weights(self.weights, self.pool.m)
        if not (self.noise > 0 and onp.isfinite(self.noise)):
            raise ConfigError(f"noise variance must be positive, got {self.noise}")

    @property
    def m(self) -> int:
        return self.pool.m

    @property
    def uses_horseshoe(self) -> bool:
        return isinstance(self.weights, HorseshoeState)

    @property
    def groups_list(self) -> List[InducingGroup]:
        raise NotImplementedError

    def summary_weights(self) -> onp.ndarray:
        """报告用的点估计权重"""
        if self.uses_horseshoe:
            return weight_summary(self.weights)
        return onp.asarray(self.weights, dtype=float).copy()

    def params(self, optimize_inducing: bool = True) -> Dict[str, Any]:
        """
        可训练参数字典

        {"kernels": 每个核每个因子的无约束超参数, "groups": [{"m", "L", "Z"?}],
         "weights": Horseshoe 参数或 {"log_w"}（固定权重时缺省）, "log_noise"（仅高斯似然）}
        """
        p: Dict[str, Any] = {
            "kernels": self.pool.params(),
            "groups": [g.params(optimize_inducing) for g in self.groups_list],
        }
        if self.uses_horseshoe:
            p["weights"] = self.weights.params()
        elif not self.fixed_weights:
            p["weights"] = {"log_w": onp.log(self.weights)}
        if self.likelihood == Likelihood.GAUSSIAN:
            p["log_noise"] = onp.array(onp.log(self.noise))
        return p

    def _common_with_params(self, p: Dict[str, Any]) -> Dict[str, Any]:
        changes: Dict[str, Any] = {"pool": self.pool.with_params(p["kernels"])}
        if "weights" in p:
            if self.uses_horseshoe:
                changes["weights"] = self.weights.with_params(p["weights"])
            else:
                changes["weights"] = onp.exp(onp.asarray(getval(p["weights"]["log_w"]), dtype=float))
        if "log_noise" in p:
            changes["noise"] = float(onp.exp(getval(p["log_noise"])))
        return changes

    def _weights_to_dict(self) -> Dict[str, Any]:
        if self.uses_horseshoe:
            return {"horseshoe": self.weights.to_dict()}
        return {"vector": onp.asarray(self.weights).tolist(), "fixed": self.fixed_weights}


@dataclass
class MultiSVGPModel(_SparseModel):
    """
    每个核一个诱导点组的稀疏 GP

    f(·) = Σ_i w_i f_i(·)，f_i ~ GP(0, k_i)，第 i 组诱导变量 u_i 只与 k_i 相关。

    Attributes:
        groups (list): InducingGroup 列表，长度等于核池大小
    """

    groups: List[InducingGroup] = field(default_factory=list)

    def __post_init__(self):
        self._validate_common()
        self.groups = list(self.groups)
        if len(self.groups) != self.pool.m:
            raise ConfigError(f"need one inducing group per kernel: {len(self.groups)} groups, {self.pool.m} kernels")

    @property
    def groups_list(self) -> List[InducingGroup]:
        return self.groups

    def with_params(self, p: Dict[str, Any]) -> "MultiSVGPModel":
        changes = self._common_with_params(p)
        changes["groups"] = [g.with_params(gp) for g, gp in zip(self.groups, p["groups"])]
        return replace(self, **changes)

    def moments(self, p: Dict[str, Any], w, Xs, full_cov: bool = False):
        """
        可求导的预测矩：mean = Σ w_i μ_i, var = Σ w_i² v_i

        各组按固定顺序累加。
        """
        mean = var = cov = None
        for i, (e, theta, g, gp) in enumerate(zip(self.pool, p["kernels"], self.groups, p["groups"])):
            Z = gp["Z"] if "Z" in gp else g.Z
            Kss = e.gram(Xs, theta=theta) if full_cov else None
            mu_i, v_i, c_i = _q_moments(
                e.gram(Z, theta=theta),
                e.gram(Z, Xs, theta=theta),
                e.diag(Xs, theta=theta),
                gp["m"],
                factor_from_raw(gp["L"]),
                Kss,
            )
            mean = w[i] * mu_i if mean is None else mean + w[i] * mu_i
            var = w[i] ** 2 * v_i if var is None else var + w[i] ** 2 * v_i
            if full_cov:
                cov = w[i] ** 2 * c_i if cov is None else cov + w[i] ** 2 * c_i
        return mean, var, cov

    def kl_u(self, p: Dict[str, Any]):
        """Σ_i KL(q(u_i) ‖ p(u_i))，可求导"""
        total = 0.0
        for e, theta, g, gp in zip(self.pool, p["kernels"], self.groups, p["groups"]):
            Z = gp["Z"] if "Z" in gp else g.Z
            total = total + _kl_group(e.gram(Z, theta=theta), gp["m"], factor_from_raw(gp["L"]))
        return total


@dataclass
class SVGPBaseline(_SparseModel):
    """
    求和核上的标准 SVGP：f ~ GP(0, Σ w_i² k_i)，单组诱导点

    Attributes:
        group (InducingGroup): 唯一的诱导点组
    """

    group: Optional[InducingGroup] = None

    def __post_init__(self):
        self._validate_common()
        if self.group is None:
            raise ConfigError("SVGP baseline needs an inducing group")

    @property
    def groups_list(self) -> List[InducingGroup]:
        return [self.group]

    def with_params(self, p: Dict[str, Any]) -> "SVGPBaseline":
        changes = self._common_with_params(p)
        changes["group"] = self.group.with_params(p["groups"][0])
        return replace(self, **changes)

    def moments(self, p: Dict[str, Any], w, Xs, full_cov: bool = False):
        gp = p["groups"][0]
        Z = gp["Z"] if "Z" in gp else self.group.Z
        kp = p["kernels"]
        Kss = _summed_gram(self.pool, kp, w, Xs) if full_cov else None
        return _q_moments(
            _summed_gram(self.pool, kp, w, Z),
            _summed_gram(self.pool, kp, w, Z, Xs),
            _summed_diag(self.pool, kp, w, Xs),
            gp["m"],
            factor_from_raw(gp["L"]),
            Kss,
        )

    def kl_u(self, p: Dict[str, Any], w=None):
        """KL(q(u) ‖ N(0, K̃_uu))，K̃ 依赖权重，所以需要 w"""
        if w is None:
            w = self.summary_weights()
        gp = p["groups"][0]
        Z = gp["Z"] if "Z" in gp else self.group.Z
        return _kl_group(_summed_gram(self.pool, p["kernels"], w, Z), gp["m"], factor_from_raw(gp["L"]))


SparseModel = Union[MultiSVGPModel, SVGPBaseline]


# ---------------------------------------------------------------------------
# 公共操作
# ---------------------------------------------------------------------------


def group_conditional(g: InducingGroup, k: KernelExpr, Xs, full: bool = False):
    """
    条件分布 p(f_i(X*) | u_i = m_i)

    μ_i = k_uᵀ K_uu⁻¹ m_i，Σ_i = k − k_uᵀ K_uu⁻¹ k_u（不含 S_i）

    Args:
        g (InducingGroup): 诱导点组
        k (KernelExpr): 该组的核
        Xs (np.ndarray): (T, D) 查询点
        full (bool, optional): 是否返回完整协方差

    Returns:
        tuple: (μ_i, diag Σ_i, Σ_i 或 None)
    """
    Xs = as_2d(Xs)
    zero_L = onp.zeros((g.M, g.M))
    Kss = k.gram(Xs) if full else None
    mean, var, cov = _q_moments(k.gram(g.Z), k.gram(g.Z, Xs), k.diag(Xs), g.m, zero_L, Kss)
    return onp.asarray(mean), onp.asarray(var), None if cov is None else onp.asarray(cov)


def marginal_predictive(model: MultiSVGPModel, w, Xs) -> GaussianPosterior:
    """
    MultiSVGP 的边缘预测分布

    mean = Σ_i w_i k_uiᵀ K_uiui⁻¹ m_i
    cov = Σ_i w_i² [k_i − k_uiᵀ K_uiui⁻¹ (K_uiui − S_i) K_uiui⁻¹ k_ui]

    Example:
        >>> post = marginal_predictive(model, model.summary_weights(), X_grid)
    """
    _check_weights(w, model.m)
    w = onp.asarray(w, dtype=float).reshape(-1)
    mean, _, cov = model.moments(model.params(), w, as_2d(Xs), full_cov=True)
    cov = onp.asarray(cov)
    return GaussianPosterior(onp.asarray(mean), 0.5 * (cov + cov.T))


def svgp_predictive(base: SVGPBaseline, w, Xs) -> GaussianPosterior:
    """求和核 SVGP 的预测分布，形式与 marginal_predictive 相同"""
    _check_weights(w, base.m)
    w = onp.asarray(w, dtype=float).reshape(-1)
    mean, _, cov = base.moments(base.params(), w, as_2d(Xs), full_cov=True)
    cov = onp.asarray(cov)
    return GaussianPosterior(onp.asarray(mean), 0.5 * (cov + cov.T))


def predictive(model: SparseModel, w, Xs) -> GaussianPosterior:
    if isinstance(model, SVGPBaseline):
        return svgp_predictive(model, w, Xs)
    return marginal_predictive(model, w, Xs)


def kl_inducing(model: SparseModel, w=None) -> float:
    """
    诱导变量上的 KL

    MultiSVGP: Σ_i KL(N(m_i, S_i) ‖ N(0, K_uiui))；SVGP 基线使用 K̃_uu（默认取报告权重）。
    """
    if isinstance(model, SVGPBaseline):
        return float(model.kl_u(model.params(), w))
    return float(model.kl_u(model.params()))


def cross_covariance(model: MultiSVGPModel, w, Zq: TaggedLocations, X) -> onp.ndarray:
    """
    诱导域交叉协方差 k_uf(z, x) = Σ_i w_i 𝟙{z ∈ 𝒵_i} k_i(z, x)

    Raises:
        ConfigError: 存在没有组标签的位置
    """
    _check_weights(w, model.m)
    w = onp.asarray(w, dtype=float).reshape(-1)
    X = as_2d(X)
    tags = _validated_tags(Zq, model.m)
    K = onp.zeros((Zq.Z.shape[0], X.shape[0]))
    for i, e in enumerate(model.pool):
        rows = onp.flatnonzero(tags == i)
        if rows.size:
            K[rows] = w[i] * onp.asarray(e.gram(Zq.Z[rows], X))
    return K


def inducing_covariance(model: MultiSVGPModel, Zq: TaggedLocations, Zq2: Optional[TaggedLocations] = None) -> onp.ndarray:
    """k_uu(z, z') = Σ_i 𝟙{z ∈ 𝒵_i} 𝟙{z' ∈ 𝒵_i} k_i(z, z')，不同组之间为 0"""
    Zq2 = Zq if Zq2 is None else Zq2
    t1 = _validated_tags(Zq, model.m)
    t2 = _validated_tags(Zq2, model.m)
    K = onp.zeros((Zq.Z.shape[0], Zq2.Z.shape[0]))
    for i, e in enumerate(model.pool):
        r = onp.flatnonzero(t1 == i)
        c = onp.flatnonzero(t2 == i)
        if r.size and c.size:
            K[onp.ix_(r, c)] = onp.asarray(e.gram(Zq.Z[r], Zq2.Z[c]))
    return K


def _validated_tags(Zq: TaggedLocations, m: int) -> onp.ndarray:
    if any(t is None for t in Zq.group):
        raise ConfigError("every query location needs a group tag")
    tags = onp.asarray(Zq.group, dtype=int)
    if onp.any(tags < 0) or onp.any(tags >= m):
        raise ConfigError(f"group tags must lie in [0, {m})")
    return tags


def init_groups(pool: KernelPool, X, M_per_group: int, seed: int = 0) -> List[InducingGroup]:
    """
    初始化诱导点组

    每组独立随机抽取 M 个训练输入作为 Z_i；m_i = 0，L_i = chol(K_uiui + jitter)，即 q 从先验开始。

    Raises:
        ConfigError: M_per_group 超过 N 或小于 1
    """
    X = as_2d(X)
    N = X.shape[0]
    if M_per_group < 1 or M_per_group > N:
        raise ConfigError(f"inducing count must lie in [1, N={N}], got {M_per_group}")
    rng = onp.random.default_rng(seed)
    groups = []
    for e in pool:
        idx = rng.choice(N, M_per_group, replace=False)
        Z = X[idx]
        L = onp.asarray(robust_cholesky(onp.asarray(e.gram(Z)), what="K_uu"))
        groups.append(InducingGroup(Z, onp.zeros(M_per_group), L))
    logger.info(f"Initialized {len(groups)} inducing groups with M={M_per_group}")
    return groups


def init_svgp_group(pool: KernelPool, weights, X, M: int, seed: int = 0) -> InducingGroup:
    """SVGP 基线的单组初始化，q 从 N(0, K̃_uu) 开始"""
    X = as_2d(X)
    N = X.shape[0]
    if M < 1 or M > N:
        raise ConfigError(f"inducing count must lie in [1, N={N}], got {M}")
    rng = onp.random.default_rng(seed)
    Z = X[rng.choice(N, M, replace=False)]
    w = onp.asarray(weights, dtype=float)
    K = onp.asarray(_summed_gram(pool, pool.params(), w, Z))
    L = onp.asarray(robust_cholesky(K, what="K̃_uu"))
    return InducingGroup(Z, onp.zeros(M), L)


def _whitened_blocks(model: SparseModel, w, X):
    """每个块的 (Lk_i, A_i = Lk_i⁻¹ K_ui,f · 系数)"""
    if isinstance(model, SVGPBaseline):
        kp = model.pool.params()
        Kuu = onp.asarray(_summed_gram(model.pool, kp, w, model.group.Z))
        Kuf = onp.asarray(_summed_gram(model.pool, kp, w, model.group.Z, X))
        Lk = onp.asarray(robust_cholesky(Kuu, what="K̃_uu"))
        return [(Lk, sla.solve_triangular(Lk, Kuf, lower=True))]
    blocks = []
    for i, (e, g) in enumerate(zip(model.pool, model.groups)):
        Lk = onp.asarray(robust_cholesky(onp.asarray(e.gram(g.Z)), what="K_uu"))
        A = w[i] * sla.solve_triangular(Lk, onp.asarray(e.gram(g.Z, X)), lower=True)
        blocks.append((Lk, A))
    return blocks


def optimal_q(model: SparseModel, X, y, noise: float, w, mean_field: bool = True) -> SparseModel:
    """
    高斯似然下固定超参数时 q(U) 的解析最优解

    白化变量 v = Lk⁻¹U 的后验精度为 I + σ⁻² A Aᵀ。联合最优取完整精度；
    mean_field=True 时（仅 MultiSVGP 有意义）均值仍为联合均值，
    每组协方差取对应对角块精度的逆。

    Returns:
        与输入同类型的新模型，权重为 w 的固定向量
    """
    X = as_2d(X)
    y = onp.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] != y.size:
        raise ConfigError(f"X has {X.shape[0]} rows but y has {y.size} entries")
    if not noise > 0:
        raise ConfigError(f"noise variance must be positive, got {noise}")
    _check_weights(w, model.m)
    w = onp.asarray(w, dtype=float).reshape(-1)
    blocks = _whitened_blocks(model, w, X)
    A = onp.vstack([a for _, a in blocks])
    P = onp.eye(A.shape[0]) + A @ A.T / noise
    Lp = sla.cholesky(0.5 * (P + P.T), lower=True)
    v_mean = sla.cho_solve((Lp, True), A @ y) / noise

    groups = []
    start = 0
    for Lk, Ai in blocks:
        M = Lk.shape[0]
        sl = slice(start, start + M)
        if mean_field:
            Pi = onp.eye(M) + Ai @ Ai.T / noise
            Sv = sla.cho_solve((sla.cholesky(0.5 * (Pi + Pi.T), lower=True), True), onp.eye(M))
        else:
            Sv = sla.cho_solve((Lp, True), onp.eye(A.shape[0]))[sl, sl]
        Lv = onp.asarray(robust_cholesky(0.5 * (Sv + Sv.T), levels=EXACT_LEVELS, what="optimal S"))
        groups.append((Lk @ v_mean[sl], Lk @ Lv))
        start += M

    if not mean_field and isinstance(model, MultiSVGPModel) and model.m > 1:
        logger.warning("Joint optimum keeps only the diagonal blocks of S in a MultiSVGP model")
    common = {"weights": w.copy(), "fixed_weights": True, "noise": float(noise)}
    if isinstance(model, SVGPBaseline):
        m_opt, L_opt = groups[0]
        return replace(model, group=InducingGroup(model.group.Z, m_opt, onp.tril(L_opt)), **common)
    new_groups = [InducingGroup(g.Z, m_opt, onp.tril(L_opt)) for g, (m_opt, L_opt) in zip(model.groups, groups)]
    return replace(model, groups=new_groups, **common)


def component_predictive(model: MultiSVGPModel, w, Xs) -> List[Tuple[onp.ndarray, onp.ndarray]]:
    """
    每个分量的 q 边缘 (w_i μ_i, w_i² diag Σ_i)，按核池顺序

    各分量均值之和等于 marginal_predictive 的均值。
    """
    _check_weights(w, model.m)
    w = onp.asarray(w, dtype=float).reshape(-1)
    Xs = as_2d(Xs)
    out = []
    for i, (e, g) in enumerate(zip(model.pool, model.groups)):
        mu, var, _ = _q_moments(e.gram(g.Z), e.gram(g.Z, Xs), e.diag(Xs), g.m, g.L)
        out.append((w[i] * onp.asarray(mu), w[i] ** 2 * onp.asarray(var)))
    return out


def to_checkpoint(model: SparseModel) -> Dict[str, Any]:
    """模型检查点（JSON 可序列化）"""
    data: Dict[str, Any] = {
        "kind": "svgp" if isinstance(model, SVGPBaseline) else "multisvgp",
        "pool": json.loads(model.pool.to_json()),
        "groups": [g.to_dict() for g in model.groups_list],
        "weights": model._weights_to_dict(),
        "noise": model.noise,
        "likelihood": model.likelihood.value,
        "config_hash": model.config_hash,
    }
    return data


def from_checkpoint(data: Dict[str, Any]) -> SparseModel:
    """
    从检查点字典恢复模型

    Raises:
        ConfigError: 检查点格式错误
    """
    try:
        pool = KernelPool.from_json(json.dumps(data["pool"]))
        groups = [InducingGroup.from_dict(g) for g in data["groups"]]
        wdata = data["weights"]
        if "horseshoe" in wdata:
            weights: Union[HorseshoeState, onp.ndarray] = HorseshoeState.from_dict(wdata["horseshoe"])
            fixed = False
        else:
            weights = onp.asarray(wdata["vector"], dtype=float)
            fixed = bool(wdata.get("fixed", False))
        common = dict(
            pool=pool,
            weights=weights,
            noise=float(data["noise"]),
            likelihood=Likelihood(data["likelihood"]),
            fixed_weights=fixed,
            config_hash=data.get("config_hash"),
        )
        if data["kind"] == "svgp":
            return SVGPBaseline(group=groups[0], **common)
        return MultiSVGPModel(groups=groups, **common)
    except (KeyError, TypeError, IndexError) as e:
        logger.error(f"Malformed checkpoint: {e}")
        raise ConfigError(f"malformed checkpoint: {e}") from e


def save_checkpoint(model: SparseModel, path: str) -> None:
    with open(path, "w") as f:
        json.dump(to_checkpoint(model), f)
    logger.info(f"Checkpoint written: {path}")


def load_checkpoint(path: str) -> SparseModel:
    try:
        with open(path) as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        logger.error(f"Cannot read checkpoint {path}: {e}")
        raise ConfigError(f"cannot read checkpoint {path}: {e}") from e
    return from_checkpoint(data)
