"""
核函数：基核 (SE / LIN / PER)、乘积组合、24 个成员的核池、d 阶加性核以及模板化描述。

所有核都不带方差超参数，幅度完全由外部权重 w_i 决定。
"""

from .utils import *
from dataclasses import dataclass, field, replace
from enum import Enum
from itertools import combinations
from math import comb
import json

import numpy as onp
from scipy.spatial.distance import pdist


class BaseKind(str, Enum):
    SE = "SE"
    LIN = "LIN"
    PER = "PER"


class InitScheme(str, Enum):
    WEAK = "Weak"
    STRONG = "Strong"


# 核池中默认的 12 种结构 (有序、允许重复)
DEFAULT_STRUCTURES: Tuple[Tuple[str, ...], ...] = (
    ("SE",),
    ("LIN",),
    ("PER",),
    ("SE", "SE"),
    ("SE", "LIN"),
    ("SE", "PER"),
    ("LIN", "LIN"),
    ("LIN", "PER"),
    ("PER", "PER"),
    ("LIN", "SE"),
    ("PER", "SE"),
    ("PER", "LIN"),
)


def _select(X, dims: Optional[Tuple[int, ...]]):
    if dims is None:
        return X
    return X[:, list(dims)]


def _sqdist(A, B):
    diff = A[:, None, :] - B[None, :, :]
    return np.sum(diff ** 2, axis=2)


def _safe_norm(d2):
    # sqrt 在 0 处梯度无穷，避免 0 * inf
    positive = d2 > 0.0
    return np.where(positive, np.sqrt(np.where(positive, d2, 1.0)), 0.0)


def base_gram(kind: BaseKind, theta, X, X2, active_dims: Optional[Tuple[int, ...]] = None):
    """
    用无约束参数 theta 计算基核 Gram 矩阵（可被 autograd 求导）

    theta 的布局：SE -> [log ℓ]，PER -> [log ℓ, log p]，LIN -> [offset]

    Args:
        kind (BaseKind): 基核类型
        theta (np.ndarray): 无约束参数向量
        X (np.ndarray): (N, D) 输入
        X2 (np.ndarray): (N', D) 输入
        active_dims (tuple, optional): 只使用这些输入列

    Returns:
        np.ndarray: (N, N') Gram 矩阵
    """
    A = _select(X, active_dims)
    B = _select(X2, active_dims)
    if kind == BaseKind.LIN:
        c = theta[0]
        return np.dot(A - c, (B - c).T)
    d2 = _sqdist(A, B)
    ell = np.exp(theta[0])
    if kind == BaseKind.SE:
        return np.exp(-0.5 * d2 / ell ** 2)
    period = np.exp(theta[1])
    r = _safe_norm(d2)
    return np.exp(-2.0 * np.sin(np.pi * r / period) ** 2 / ell ** 2)


@dataclass(frozen=True)
class BaseKernel:
    """
    基核

    Attributes:
        kind (BaseKind): SE / LIN / PER
        lengthscale (float): 长度尺度 ℓ（SE、PER 使用，必须 > 0）
        period (float, optional): 周期 p（仅 PER，必须 > 0）
        offset (float): LIN 的偏移量
        active_dims (tuple, optional): 参与计算的输入列；None 表示全部列
    """

    kind: BaseKind
    lengthscale: float = 1.0
    period: Optional[float] = None
    offset: float = 0.0
    active_dims: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", BaseKind(self.kind))
        if self.active_dims is not None:
            object.__setattr__(self, "active_dims", tuple(int(d) for d in self.active_dims))
        if self.kind in (BaseKind.SE, BaseKind.PER):
            if not (np.isfinite(self.lengthscale) and self.lengthscale > 0):
                raise ConfigError(f"{self.kind.value} lengthscale must be positive, got {self.lengthscale}")
        if self.kind == BaseKind.PER:
            if self.period is None:
                object.__setattr__(self, "period", 1.0)
            if not (np.isfinite(self.period) and self.period > 0):
                raise ConfigError(f"PER period must be positive, got {self.period}")
        if not np.isfinite(self.offset):
            raise ConfigError("LIN offset must be finite")

    def params(self) -> np.ndarray:
        if self.kind == BaseKind.SE:
            return onp.array([onp.log(self.lengthscale)])
        if self.kind == BaseKind.PER:
            return onp.array([onp.log(self.lengthscale), onp.log(self.period)])
        return onp.array([float(self.offset)])

    def with_params(self, theta) -> "BaseKernel":
        theta = onp.asarray(getval(theta), dtype=float)
        if self.kind == BaseKind.SE:
            return replace(self, lengthscale=float(onp.exp(theta[0])))
        if self.kind == BaseKind.PER:
            return replace(self, lengthscale=float(onp.exp(theta[0])), period=float(onp.exp(theta[1])))
        return replace(self, offset=float(theta[0]))

    def gram(self, X, X2=None, theta=None):
        theta = self.params() if theta is None else theta
        return base_gram(self.kind, theta, X, X if X2 is None else X2, self.active_dims)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"kind": self.kind.value, "lengthscale": self.lengthscale}
        if self.kind == BaseKind.PER:
            data["period"] = self.period
        if self.kind == BaseKind.LIN:
            data["offset"] = self.offset
        if self.active_dims is not None:
            data["active_dims"] = list(self.active_dims)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BaseKernel":
        dims = data.get("active_dims")
        return cls(
            kind=BaseKind(data["kind"]),
            lengthscale=float(data.get("lengthscale", 1.0)),
            period=data.get("period"),
            offset=float(data.get("offset", 0.0)),
            active_dims=tuple(dims) if dims is not None else None,
        )


def _check_pair(x, x2) -> Tuple[np.ndarray, np.ndarray]:
    x = onp.atleast_1d(onp.asarray(x, dtype=float))
    x2 = onp.atleast_1d(onp.asarray(x2, dtype=float))
    if x.shape != x2.shape or x.ndim != 1:
        raise ConfigError(f"dimension mismatch: {x.shape} vs {x2.shape}")
    return x.reshape(1, -1), x2.reshape(1, -1)


def eval_base(b: BaseKernel, x, x2) -> float:
    """
    计算单个基核的取值 k(x, x')

    Example:
        >>> eval_base(BaseKernel(BaseKind.LIN, offset=0.0), [2.0], [3.0])
        6.0
    """
    A, B = _check_pair(x, x2)
    return float(b.gram(A, B)[0, 0])


@dataclass(frozen=True)
class KernelExpr:
    """
    乘积核 Π B_i

    核池中的成员最多包含两个因子；加性核的项可以有 d 个单列因子。

    Attributes:
        factors (tuple): BaseKernel 因子
        init_scheme (InitScheme): 初始化方案 Weak / Strong
    """

    factors: Tuple[BaseKernel, ...]
    init_scheme: InitScheme = InitScheme.WEAK

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        object.__setattr__(self, "init_scheme", InitScheme(self.init_scheme))
        if len(self.factors) < 1:
            raise ConfigError("a kernel expression needs at least one factor")

    @property
    def order(self) -> int:
        return len(self.factors)

    @property
    def name(self) -> str:
        return "×".join(f.kind.value for f in self.factors)

    def params(self) -> List[np.ndarray]:
        return [f.params() for f in self.factors]

    def with_params(self, theta: Sequence) -> "KernelExpr":
        return replace(self, factors=tuple(f.with_params(t) for f, t in zip(self.factors, theta)))

    def gram(self, X, X2=None, theta=None):
        """
        Gram 矩阵，(i, j) 元素为 k(X_i, X2_j)

        X2 为 None 时结果严格对称。theta 给出时使用这些无约束参数（训练时用）。
        """
        symmetric = X2 is None
        X2 = X if X2 is None else X2
        if getval(X).shape[1] != getval(X2).shape[1]:
            raise ConfigError(f"column mismatch: {getval(X).shape[1]} vs {getval(X2).shape[1]}")
        theta = self.params() if theta is None else theta
        K = None
        for f, t in zip(self.factors, theta):
            Kf = base_gram(f.kind, t, X, X2, f.active_dims)
            K = Kf if K is None else K * Kf
        if symmetric:
            K = 0.5 * (K + K.T)
        return K

    def diag(self, X, theta=None):
        """k(x, x) 逐点取值"""
        theta = self.params() if theta is None else theta
        out = None
        for f, t in zip(self.factors, theta):
            A = _select(X, f.active_dims)
            if f.kind == BaseKind.LIN:
                d = np.sum((A - t[0]) ** 2, axis=1)
            else:
                d = np.ones(A.shape[0])
            out = d if out is None else out * d
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {"factors": [f.to_dict() for f in self.factors], "init_scheme": self.init_scheme.value}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "KernelExpr":
        return cls(
            factors=tuple(BaseKernel.from_dict(f) for f in data["factors"]),
            init_scheme=InitScheme(data.get("init_scheme", InitScheme.WEAK.value)),
        )

    def describe(self) -> str:
        return describe(self)


def eval_expr(e: KernelExpr, x, x2) -> float:
    """乘积核取值 = 各因子取值之积"""
    A, B = _check_pair(x, x2)
    return float(e.gram(A, B)[0, 0])


def gram(e: KernelExpr, X, X2=None):
    X = as_2d(X)
    return e.gram(X, None if X2 is None else as_2d(X2))


@dataclass(frozen=True)
class KernelPool:
    """
    核池 {k_i}，i = 1..m

    Attributes:
        members (tuple): KernelExpr 成员
    """

    members: Tuple[KernelExpr, ...]

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))

    @property
    def m(self) -> int:
        return len(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, i: int) -> KernelExpr:
        return self.members[i]

    def names(self) -> List[str]:
        return [e.name for e in self.members]

    def params(self) -> List[List[np.ndarray]]:
        return [e.params() for e in self.members]

    def with_params(self, theta: Sequence) -> "KernelPool":
        return KernelPool(tuple(e.with_params(t) for e, t in zip(self.members, theta)))

    def to_json(self, indent: Optional[int] = None) -> str:
        return json.dumps([e.to_dict() for e in self.members], indent=indent)

    @classmethod
    def from_json(cls, text: str) -> "KernelPool":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid pool JSON: {e}") from e
        return cls(tuple(KernelExpr.from_dict(d) for d in data))


@dataclass(frozen=True)
class AdditiveSpec:
    """
    d 阶加性核的规格

    Attributes:
        D (int): 输入维度
        d (int): 加性阶数
        subsets (tuple): 所有 d 元子集（0 起始、严格递增、字典序）
    """

    D: int
    d: int
    subsets: Tuple[Tuple[int, ...], ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.subsets)


def additive_terms(D: int, d: int) -> AdditiveSpec:
    """
    枚举 d 阶加性核的全部 C(D, d) 个维度子集

    Raises:
        ConfigError: d 不在 [1, D] 范围内

    Example:
        >>> len(additive_terms(6, 3))
        20
    """
    if D < 1 or d < 1 or d > D:
        raise ConfigError(f"additive order must satisfy 1 <= d <= D, got d={d}, D={D}")
    subsets = tuple(combinations(range(D), d))
    assert len(subsets) == comb(D, d)
    return AdditiveSpec(D=D, d=d, subsets=subsets)


def additive_pool(D: int, d: int, kind: BaseKind = BaseKind.SE, lengthscale: float = 1.0) -> KernelPool:
    """每个子集 {i_1..i_d} 对应一个单列因子之积 Π k(x[i], x'[i])"""
    spec = additive_terms(D, d)
    members = []
    for subset in spec.subsets:
        factors = tuple(BaseKernel(kind, lengthscale=lengthscale, active_dims=(i,)) for i in subset)
        members.append(KernelExpr(factors))
    logger.info(f"Additive pool: D={D}, d={d}, {len(members)} terms")
    return KernelPool(tuple(members))


def _input_range(X: onp.ndarray) -> float:
    span = onp.ptp(X, axis=0)
    value = float(onp.mean(span)) if span.size else 1.0
    return value if value > 0 else 1.0


def _median_distance(X: onp.ndarray, rng: onp.random.Generator) -> float:
    if X.shape[0] > 1000:
        X = X[rng.choice(X.shape[0], 1000, replace=False)]
    if X.shape[0] < 2:
        return 1.0
    d = pdist(X)
    d = d[d > 0]
    return float(onp.median(d)) if d.size else 1.0


def dominant_period(x: onp.ndarray, y: onp.ndarray) -> Optional[float]:
    """
    一维数据的主导周期（FFT 周期图最大非零频率）

    先把 (x, y) 插值到均匀网格上再做 rfft。
    """
    if x.size < 4:
        return None
    order = onp.argsort(x)
    xs, ys = x[order], y[order]
    span = xs[-1] - xs[0]
    if span <= 0:
        return None
    grid = onp.linspace(xs[0], xs[-1], xs.size)
    yg = onp.interp(grid, xs, ys)
    yg = yg - yg.mean()
    power = onp.abs(onp.fft.rfft(yg)) ** 2
    freqs = onp.fft.rfftfreq(grid.size, d=grid[1] - grid[0])
    if power.size < 2:
        return None
    k = 1 + int(onp.argmax(power[1:]))
    return float(1.0 / freqs[k])


def init_hyperparameters(
    expr: KernelExpr,
    X: Optional[onp.ndarray],
    y: Optional[onp.ndarray],
    rng: onp.random.Generator,
) -> KernelExpr:
    """
    按照 Weak / Strong 方案初始化超参数

    - Weak: ℓ ~ log-uniform [0.1, 2] × 输入范围；p ~ log-uniform [0.05, 0.5] × 输入范围
    - Strong: ℓ = 成对距离中位数；p = y 的 FFT 主导周期（仅一维，否则 0.25 × 范围）
    - LIN 偏移量初始化为输入均值
    """
    if X is None:
        return expr
    X = onp.asarray(X, dtype=float)
    factors = []
    for f in expr.factors:
        Xf = X if f.active_dims is None else X[:, list(f.active_dims)]
        span = _input_range(Xf)
        if f.kind == BaseKind.LIN:
            factors.append(replace(f, offset=float(onp.mean(Xf))))
            continue
        if expr.init_scheme == InitScheme.WEAK:
            ell = span * float(onp.exp(rng.uniform(onp.log(0.1), onp.log(2.0))))
            period = span * float(onp.exp(rng.uniform(onp.log(0.05), onp.log(0.5))))
        else:
            ell = _median_distance(Xf, rng)
            period = None
            if y is not None and Xf.shape[1] == 1:
                period = dominant_period(Xf[:, 0], onp.asarray(y, dtype=float))
            if period is None or not onp.isfinite(period) or period <= 0:
                period = 0.25 * span
        if f.kind == BaseKind.SE:
            factors.append(replace(f, lengthscale=ell))
        else:
            factors.append(replace(f, lengthscale=ell, period=period))
    return replace(expr, factors=tuple(factors))


def build_pool(
    max_order: int = 2,
    schemes: Sequence[str] = (InitScheme.WEAK.value, InitScheme.STRONG.value),
    structures: Optional[Sequence[Sequence[str]]] = None,
    X: Optional[onp.ndarray] = None,
    y: Optional[onp.ndarray] = None,
    seed: int = 0,
) -> KernelPool:
    """
    构建核池

    默认 12 种结构 × {Weak, Strong} = 24 个成员。给出数据时按方案初始化超参数。

    Args:
        max_order (int, optional): 最大乘积阶数（1 或 2）. Defaults to 2.
        schemes (Sequence[str], optional): 初始化方案
        structures (Sequence, optional): 显式结构列表，覆盖默认枚举
        X (np.ndarray, optional): 训练输入（用于初始化）
        y (np.ndarray, optional): 训练目标（Strong 方案估计周期）
        seed (int, optional): 随机种子

    Returns:
        KernelPool: 核池

    Example:
        >>> build_pool().m
        24
    """
    if max_order not in (1, 2):
        raise ConfigError(f"max_order must be 1 or 2, got {max_order}")
    chosen = DEFAULT_STRUCTURES if structures is None else tuple(tuple(s) for s in structures)
    chosen = tuple(s for s in chosen if 1 <= len(s) <= max_order)
    if not chosen:
        raise ConfigError("no kernel structures left in the pool")
    rng = onp.random.default_rng(seed)
    X2 = None if X is None else as_2d(X)
    members = []
    for scheme in schemes:
        for structure in chosen:
            expr = KernelExpr(tuple(BaseKernel(BaseKind(k)) for k in structure), InitScheme(scheme))
            members.append(init_hyperparameters(expr, X2, y, rng))
    logger.info(f"Kernel pool built: {len(members)} members (max order {max_order})")
    return KernelPool(tuple(members))


_SINGLE_TEMPLATES = {
    BaseKind.SE: "a smoothly varying component",
    BaseKind.LIN: "a linear trend",
    BaseKind.PER: "a periodic component",
}

_PAIR_TEMPLATES = {
    frozenset([BaseKind.SE]): "a smoothly varying component",
    frozenset([BaseKind.LIN]): "a quadratic trend",
    frozenset([BaseKind.PER]): "a periodic component with two interacting periods",
    frozenset([BaseKind.SE, BaseKind.PER]): "a periodic component whose shape varies smoothly",
    frozenset([BaseKind.SE, BaseKind.LIN]): "a smooth function with linearly varying amplitude",
    frozenset([BaseKind.LIN, BaseKind.PER]): "a periodic component with linearly varying amplitude",
}


def _format_hyper(f: BaseKernel) -> str:
    if f.kind == BaseKind.SE:
        return f"lengthscale {f.lengthscale:.4g}"
    if f.kind == BaseKind.PER:
        return f"period {f.period:.4g}, lengthscale {f.lengthscale:.4g}"
    return f"offset {f.offset:.4g}"


def describe(e: KernelExpr) -> str:
    """
    模板化的自然语言描述，包含超参数取值

    Example:
        >>> describe(KernelExpr((BaseKernel(BaseKind.PER, period=1.001),)))
        'a periodic component (period 1.001, lengthscale 1)'
    """
    kinds = [f.kind for f in e.factors]
    if len(kinds) == 1:
        phrase = _SINGLE_TEMPLATES[kinds[0]]
    elif len(kinds) == 2:
        phrase = _PAIR_TEMPLATES[frozenset(kinds)]
    else:
        phrase = f"an interaction of {len(kinds)} {'/'.join(sorted({k.value for k in kinds}))} factors"
    details = "; ".join(_format_hyper(f) for f in e.factors)
    text = f"{phrase} ({details})"
    dims = [f.active_dims for f in e.factors if f.active_dims is not None]
    if dims:
        used = sorted({d + 1 for ds in dims for d in ds})
        text += f" over input dimensions {tuple(used)}"
    return text
