"""
ELBO 与随机优化

每次迭代：取小批量 -> 采样 ε 得到权重 -> 计算 ELBO -> Adam 一步 -> 闭式更新 q(φ)。
梯度由 autograd 反向模式求得，优化器使用 autograd.misc.optimizers.adam。
"""

from .utils import *
from .config import TrainingConfig, HorseshoeConfig
from .horseshoe import HorseshoeState, constrained, kl_terms, update_aux, weights_from
from .kernels import KernelPool
from .multisvgp import MultiSVGPModel, SVGPBaseline, SparseModel, init_groups, init_svgp_group
from dataclasses import dataclass, replace
import csv

import numpy as onp
from autograd import grad, value_and_grad
from autograd.misc import flatten
from autograd.misc.optimizers import adam

GH_NODES = 20
LOG_2PI = float(onp.log(2.0 * onp.pi))

_gh_x, _gh_w = onp.polynomial.hermite.hermgauss(GH_NODES)


@dataclass(frozen=True)
class ElboBreakdown:
    """
    ELBO 的分解，elbo = expected_loglik − kl_inducing − kl_weights

    Attributes:
        expected_loglik (float): 期望对数似然（已乘 N/b）
        kl_inducing (float): KL(q(U) ‖ p(U))
        kl_weights (float): KL(q(w) ‖ p(w))
        elbo (float): 证据下界
    """

    expected_loglik: float
    kl_inducing: float
    kl_weights: float
    elbo: float

    @classmethod
    def assemble(cls, expected_loglik, kl_inducing, kl_weights) -> "ElboBreakdown":
        ell = float(getval(expected_loglik))
        klu = float(getval(kl_inducing))
        klw = float(getval(kl_weights))
        return cls(ell, klu, klw, ell - klu - klw)

    def is_finite(self) -> bool:
        return bool(onp.all(onp.isfinite([self.expected_loglik, self.kl_inducing, self.kl_weights, self.elbo])))


@dataclass(frozen=True)
class Batch:
    """
    小批量

    Attributes:
        X (np.ndarray): (b, D) 输入
        y (np.ndarray): 长度 b 的目标
        n_total (int, optional): 数据集大小 N，用于 N/b 缩放；None 表示 b
    """

    X: onp.ndarray
    y: onp.ndarray
    n_total: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "X", as_2d(self.X))
        object.__setattr__(self, "y", onp.asarray(self.y, dtype=float).reshape(-1))
        if self.X.shape[0] != self.y.size:
            raise ConfigError(f"batch X has {self.X.shape[0]} rows but y has {self.y.size} entries")
        if self.n_total is not None and self.n_total < self.y.size:
            raise ConfigError(f"n_total={self.n_total} is smaller than the batch size {self.y.size}")

    @property
    def scale(self) -> float:
        return 1.0 if self.n_total is None else self.n_total / self.y.size


def expected_loglik_gaussian(mu, v, y, noise, scale: float = 1.0):
    """
    scale · Σ_j [log N(y_j | μ_j, σ_n²) − v_j / (2σ_n²)]

    Raises:
        ConfigError: σ_n² ≤ 0 或长度不一致
    """
    if not onp.all(onp.asarray(getval(noise)) > 0):
        raise ConfigError(f"noise variance must be positive, got {getval(noise)}")
    if getval(mu).shape != getval(v).shape or getval(mu).shape != onp.shape(y):
        raise ConfigError("mean, variance and targets must have equal lengths")
    terms = -0.5 * (LOG_2PI + np.log(noise)) - 0.5 * ((y - mu) ** 2 + v) / noise
    return scale * np.sum(terms)


def _check_binary(y) -> None:
    yv = onp.asarray(y, dtype=float)
    if not onp.all((yv == 0.0) | (yv == 1.0)):
        raise ConfigError("Bernoulli targets must be 0 or 1")


def log_sigmoid(z):
    return -np.logaddexp(0.0, -z)


def expected_loglik_bernoulli(mu, v, y, scale: float = 1.0):
    """
    scale · Σ_j E_{f ~ N(μ_j, v_j)}[log σ((2y_j − 1) f)]，20 点 Gauss–Hermite 求积

    Raises:
        ConfigError: y 不在 {0, 1} 中
    """
    _check_binary(y)
    if getval(mu).shape != getval(v).shape or getval(mu).shape != onp.shape(y):
        raise ConfigError("mean, variance and targets must have equal lengths")
    sign = 2.0 * onp.asarray(y, dtype=float) - 1.0
    std = np.sqrt(2.0 * np.maximum(v, 0.0) + 1e-12)
    f = mu[:, None] + std[:, None] * _gh_x[None, :]
    values = log_sigmoid(sign[:, None] * f)
    return scale * np.sum(np.dot(values, _gh_w)) / onp.sqrt(onp.pi)


def _weights_and_kl(model: SparseModel, p: Dict[str, Any], eps):
    """采样（或读取）权重，并返回 KL(q(w) ‖ p(w))"""
    if model.uses_horseshoe:
        mu_tau, sigma_tau, mu_lambda, sigma_lambda = constrained(p["weights"])
        w = weights_from(mu_tau, sigma_tau, mu_lambda, sigma_lambda, eps)
        return w, kl_terms(mu_tau, sigma_tau, mu_lambda, sigma_lambda, model.weights)
    if "weights" in p:
        return np.exp(p["weights"]["log_w"]), 0.0
    return onp.asarray(model.weights, dtype=float), 0.0


def _elbo_parts(model: SparseModel, p: Dict[str, Any], batch: Batch, eps):
    w, kl_w = _weights_and_kl(model, p, eps)
    mean, var, _ = model.moments(p, w, batch.X)
    if model.likelihood == Likelihood.GAUSSIAN:
        ell = expected_loglik_gaussian(mean, var, batch.y, np.exp(p["log_noise"]), batch.scale)
    else:
        ell = expected_loglik_bernoulli(mean, var, batch.y, batch.scale)
    if isinstance(model, SVGPBaseline):
        kl_u = model.kl_u(p, w)
    else:
        kl_u = model.kl_u(p)
    return ell, kl_u, kl_w


def _check_eps(model: SparseModel, eps) -> onp.ndarray:
    eps = onp.asarray(eps, dtype=float).reshape(-1)
    if eps.size != model.m:
        raise ConfigError(f"expected {model.m} noise draws, got {eps.size}")
    return eps


def elbo_step(model: SparseModel, batch: Batch, eps, config: TrainingConfig) -> ElboBreakdown:
    """
    在给定小批量和 ε 下计算 ELBO 分解

    只有似然项乘以 N/b；给定 (model, batch, ε) 时结果确定。
    """
    eps = _check_eps(model, eps)
    p = model.params(config.optimize_inducing)
    return ElboBreakdown.assemble(*_elbo_parts(model, p, batch, eps))


def elbo_function(model: SparseModel, batch: Batch, eps, config: TrainingConfig):
    """
    ELBO 作为扁平参数向量的函数

    Returns:
        tuple: (f, x0, unflatten)，f(x) 返回标量 ELBO
    """
    eps = _check_eps(model, eps)
    x0, unflatten = flatten(model.params(config.optimize_inducing))

    def f(x):
        ell, kl_u, kl_w = _elbo_parts(model, unflatten(x), batch, eps)
        return ell - kl_u - kl_w

    return f, x0, unflatten


def gradient(model: SparseModel, batch: Batch, eps, config: TrainingConfig) -> onp.ndarray:
    """
    ELBO 对全部可训练参数的梯度（扁平向量）

    冻结的 Z 不出现在向量中；q(φ) 的 (s, r) 不是参数。

    Raises:
        NumericalError: 梯度含非有限值
    """
    f, x0, _ = elbo_function(model, batch, eps, config)
    g = grad(f)(x0)
    if not onp.all(onp.isfinite(g)):
        logger.error("Non-finite ELBO gradient")
        raise NumericalError("non-finite gradient")
    return g


class BatchSampler:
    """
    每轮不放回抽样，每轮用同一个 rng 重新打乱

    Attributes:
        n (int): 数据集大小
        b (int): 小批量大小
    """

    def __init__(self, n: int, b: int, rng: onp.random.Generator):
        if not 1 <= b <= n:
            raise ConfigError(f"minibatch size must lie in [1, {n}], got {b}")
        self.n = n
        self.b = b
        self.rng = rng
        self._perm = onp.arange(0)
        self._pos = 0

    def next(self) -> onp.ndarray:
        if self.b == self.n:
            return onp.arange(self.n)
        if self._pos + self.b > self._perm.size:
            self._perm = self.rng.permutation(self.n)
            self._pos = 0
        idx = self._perm[self._pos : self._pos + self.b]
        self._pos += self.b
        return idx


def train(model: SparseModel, dataset, config: TrainingConfig, callback=None) -> Tuple[SparseModel, List[ElboBreakdown]]:
    """
    随机变分训练

    Args:
        model (SparseModel): 初始模型
        dataset: 带 X、y 属性的数据集
        config (TrainingConfig): 训练配置
        callback (callable, optional): callback(iteration, ElboBreakdown)

    Returns:
        tuple: (训练后的模型, 每次迭代的 ElboBreakdown)

    Raises:
        NumericalError: ELBO 或梯度出现非有限值，带迭代序号
    """
    X = as_2d(dataset.X)
    y = onp.asarray(dataset.y, dtype=float).reshape(-1)
    if config.iterations == 0:
        return model, []
    if model.likelihood != config.likelihood:
        raise ConfigError(f"model likelihood {model.likelihood.value} does not match config {config.likelihood.value}")
    if model.likelihood == Likelihood.BERNOULLI:
        _check_binary(y)
    n = y.size
    b = config.batch_size(n)
    rng = onp.random.default_rng(config.seed)
    sampler = BatchSampler(n, b, rng)
    trace: List[ElboBreakdown] = []
    base_state = model.weights if model.uses_horseshoe else None

    logger.info(
        f"Training {type(model).__name__}: m={model.m}, N={n}, b={b}, "
        f"iterations={config.iterations}, lr={config.learning_rate}"
    )

    def current_model(x):
        if base_state is None:
            return model
        state = update_aux(base_state.with_params(x["weights"]))
        return replace(model, weights=state)

    def objective_grad(x, i):
        idx = sampler.next()
        batch = Batch(X[idx], y[idx], n)
        eps = rng.standard_normal(model.m)
        current = current_model(x)

        def negative_elbo(params):
            ell, kl_u, kl_w = _elbo_parts(current, params, batch, eps)
            trace_parts.append((ell, kl_u, kl_w))
            return -(ell - kl_u - kl_w)

        trace_parts: List[Any] = []
        try:
            _, g = value_and_grad(negative_elbo)(x)
        except NumericalError as e:
            e.iteration = i
            logger.error(f"Numerical failure at iteration {i}: {e}")
            raise
        breakdown = ElboBreakdown.assemble(*trace_parts[-1])
        if not breakdown.is_finite():
            logger.error(f"ELBO diverged at iteration {i}")
            raise NumericalError(f"non-finite ELBO at iteration {i}", iteration=i)
        flat_g, _ = flatten(g)
        if not onp.all(onp.isfinite(flat_g)):
            logger.error(f"Non-finite gradient at iteration {i}")
            raise NumericalError(f"non-finite gradient at iteration {i}", iteration=i)
        trace.append(breakdown)
        if i % config.log_every == 0:
            logger.debug(
                f"iter {i}: elbo={breakdown.elbo:.4f} ell={breakdown.expected_loglik:.4f} "
                f"kl_u={breakdown.kl_inducing:.4f} kl_w={breakdown.kl_weights:.4f}"
            )
        if callback is not None:
            callback(i, breakdown)
        return g

    x0 = model.params(config.optimize_inducing)
    x_final = adam(objective_grad, x0, num_iters=config.iterations, step_size=config.learning_rate)
    trained = model.with_params(x_final)
    if trained.uses_horseshoe:
        trained = replace(trained, weights=update_aux(trained.weights))
    logger.info(f"Training finished: final ELBO {trace[-1].elbo:.4f}")
    return trained, trace


def initial_noise(y, config: TrainingConfig) -> float:
    """σ_n² 初值：配置值或 0.1·var(y)"""
    if config.noise_init is not None:
        return float(config.noise_init)
    v = float(onp.var(onp.asarray(y, dtype=float)))
    return 0.1 * v if v > 0 else 0.1


def build_model(
    pool: KernelPool,
    X,
    y,
    config: TrainingConfig,
    inducing: int,
    horseshoe: Optional[HorseshoeConfig] = None,
) -> SparseModel:
    """
    按配置构建未训练的模型

    config.model 选择 MultiSVGP 或 SVGP 基线；config.prior = "none" 时权重为自由的正参数。
    """
    X = as_2d(X)
    horseshoe = horseshoe or HorseshoeConfig()
    if config.prior == "horseshoe":
        weights: Union[HorseshoeState, onp.ndarray] = HorseshoeState.initial(pool.m, horseshoe.A, horseshoe.B)
        start = onp.exp(weights.mu_tau + weights.mu_lambda)
    else:
        weights = onp.ones(pool.m)
        start = weights
    common = dict(
        pool=pool,
        weights=weights,
        noise=initial_noise(y, config),
        likelihood=config.likelihood,
    )
    if config.model == "svgp":
        group = init_svgp_group(pool, start, X, inducing, seed=config.seed)
        return SVGPBaseline(group=group, **common)
    return MultiSVGPModel(groups=init_groups(pool, X, inducing, seed=config.seed), **common)


def sigmoid_probability(mean, var) -> onp.ndarray:
    """E[σ(f)]，f ~ N(mean, var)，Gauss–Hermite 求积"""
    mean = onp.asarray(mean, dtype=float)
    std = onp.sqrt(2.0 * onp.maximum(var, 0.0))
    f = mean[:, None] + std[:, None] * _gh_x[None, :]
    return (onp.exp(-onp.logaddexp(0.0, -f)) @ _gh_w) / onp.sqrt(onp.pi)


def predict(model: SparseModel, Xs, mc_samples: int = 10, seed: int = 0) -> Tuple[onp.ndarray, onp.ndarray]:
    """
    潜函数预测 (mean, var)

    均值使用报告权重 exp(μ_τ + μ_λi)；方差在 mc_samples 次权重采样上取平均。
    固定或自由权重时两者都直接使用该权重。
    """
    Xs = as_2d(Xs)
    p = model.params()
    w_point = model.summary_weights()
    mean, var, _ = model.moments(p, w_point, Xs)
    if not model.uses_horseshoe:
        return onp.asarray(mean), onp.maximum(onp.asarray(var), 0.0)
    rng = onp.random.default_rng(seed)
    total = onp.zeros(Xs.shape[0])
    state = model.weights
    for _ in range(mc_samples):
        w = weights_from(state.mu_tau, state.sigma_tau, state.mu_lambda, state.sigma_lambda, rng.standard_normal(model.m))
        _, v, _ = model.moments(p, w, Xs)
        total = total + onp.asarray(v)
    return onp.asarray(mean), onp.maximum(total / mc_samples, 0.0)


def write_trace(trace: Sequence[ElboBreakdown], path: str) -> None:
    """写出 trace.csv：iter, elbo, expected_loglik, kl_u, kl_w"""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["iter", "elbo", "expected_loglik", "kl_u", "kl_w"])
        for i, t in enumerate(trace):
            writer.writerow([i, repr(t.elbo), repr(t.expected_loglik), repr(t.kl_inducing), repr(t.kl_weights)])
    logger.info(f"Trace written: {path} ({len(trace)} rows)")
