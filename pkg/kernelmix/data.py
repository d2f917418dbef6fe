"""
数据集：CSV 读取、标准化、训练/测试划分与合成数据生成
"""

from .utils import *
from .config import SplitConfig, SynthConfig
from .kernels import BaseKernel, BaseKind, KernelExpr, KernelPool
from .exact import WeightedKernel, sample_gp
from dataclasses import dataclass, field, replace
import csv
import json

import numpy as onp


class Task(str, Enum):
    REGRESSION = "Regression"
    CLASSIFICATION = "Classification"


@dataclass
class Dataset:
    """
    数据集

    X 保存的是标准化后的输入，x_shift / x_scale 记录变换，用于把新输入映射到同一尺度。

    Attributes:
        X (np.ndarray): (N, D) 标准化输入
        y (np.ndarray): 长度 N 的目标
        task (Task): 回归或分类
        columns (list): 输入列名
        target (str): 目标列名
        x_shift (np.ndarray): 每列均值
        x_scale (np.ndarray): 每列标准差
    """

    X: onp.ndarray
    y: onp.ndarray
    task: Task = Task.REGRESSION
    columns: List[str] = field(default_factory=list)
    target: str = "y"
    x_shift: Optional[onp.ndarray] = None
    x_scale: Optional[onp.ndarray] = None

    def __post_init__(self):
        self.X = as_2d(self.X)
        self.y = onp.asarray(self.y, dtype=float).reshape(-1)
        self.task = Task(self.task)
        N, D = self.X.shape
        if self.y.size != N:
            raise ConfigError(f"X has {N} rows but y has {self.y.size} entries")
        check_finite("X", self.X)
        check_finite("y", self.y)
        if self.task == Task.CLASSIFICATION and not onp.all((self.y == 0.0) | (self.y == 1.0)):
            raise ConfigError("classification targets must be 0 or 1")
        if not self.columns:
            self.columns = [f"x{i + 1}" for i in range(D)]
        if len(self.columns) != D:
            raise ConfigError(f"{len(self.columns)} column names for {D} input columns")
        self.x_shift = onp.zeros(D) if self.x_shift is None else onp.asarray(self.x_shift, dtype=float).reshape(-1)
        self.x_scale = onp.ones(D) if self.x_scale is None else onp.asarray(self.x_scale, dtype=float).reshape(-1)

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def D(self) -> int:
        return self.X.shape[1]

    def transform(self, X_raw) -> onp.ndarray:
        """原始单位 -> 标准化"""
        return (as_2d(X_raw) - self.x_shift) / self.x_scale

    def inverse_transform(self, X) -> onp.ndarray:
        """标准化 -> 原始单位"""
        return as_2d(X) * self.x_scale + self.x_shift

    def raw_X(self) -> onp.ndarray:
        return self.inverse_transform(self.X)

    def subset(self, idx) -> "Dataset":
        idx = onp.asarray(idx, dtype=int)
        return replace(self, X=self.X[idx], y=self.y[idx])

    def transform_dict(self) -> Dict[str, Any]:
        return {
            "columns": list(self.columns),
            "target": self.target,
            "x_shift": self.x_shift.tolist(),
            "x_scale": self.x_scale.tolist(),
            "task": self.task.value,
        }


def standardize_columns(X: onp.ndarray) -> Tuple[onp.ndarray, onp.ndarray, onp.ndarray]:
    """每列零均值单位方差；常数列的尺度取 1"""
    shift = X.mean(axis=0)
    scale = X.std(axis=0)
    scale = onp.where(scale > 0, scale, 1.0)
    return (X - shift) / scale, shift, scale


def load_csv(path: str, target: Optional[str] = None, task: Task = Task.REGRESSION, standardize: bool = True) -> Dataset:
    """
    读取带表头的数值 CSV

    默认最后一列为目标；输入列标准化并记录变换。

    Args:
        path (str): 文件路径
        target (str, optional): 目标列名. Defaults to 最后一列.
        task (Task, optional): 任务类型
        standardize (bool, optional): 是否标准化输入

    Raises:
        ConfigError: 文件不存在、解析失败（带行号）或含非有限值

    Example:
        >>> ds = load_csv("airline.csv", target="passengers")
    """
    try:
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
    except OSError as e:
        logger.error(f"Cannot read {path}: {e}")
        raise ConfigError(f"cannot read {path}: {e}") from e
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if len(rows) < 2:
        raise ConfigError(f"{path}: need a header row and at least one data row")
    header = [h.strip() for h in rows[0]]
    if target is None:
        t_col = len(header) - 1
    elif target in header:
        t_col = header.index(target)
    else:
        raise ConfigError(f"{path}: target column '{target}' not found in header {header}")
    if len(header) < 2:
        raise ConfigError(f"{path}: need at least one input column and one target column")

    values = onp.empty((len(rows) - 1, len(header)))
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ConfigError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            parsed = [float(cell) for cell in row]
        except ValueError as e:
            raise ConfigError(f"{path}:{lineno}: {e}") from e
        if not all(onp.isfinite(parsed)):
            raise ConfigError(f"{path}:{lineno}: non-finite value")
        values[lineno - 2] = parsed

    in_cols = [i for i in range(len(header)) if i != t_col]
    X = values[:, in_cols]
    y = values[:, t_col]
    shift = scale = None
    if standardize:
        X, shift, scale = standardize_columns(X)
    ds = Dataset(X, y, task, [header[i] for i in in_cols], header[t_col], shift, scale)
    logger.info(f"Loaded {path}: N={ds.N}, D={ds.D}, target '{ds.target}'")
    return ds


def load_inputs(path: str, columns: Sequence[str]) -> onp.ndarray:
    """
    只读取指定的输入列（原始单位），其余列忽略

    Raises:
        ConfigError: 缺少列或解析失败（带行号）
    """
    try:
        with open(path, newline="") as f:
            rows = [r for r in csv.reader(f) if r and any(cell.strip() for cell in r)]
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    if not rows:
        raise ConfigError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    missing = [c for c in columns if c not in header]
    if missing:
        raise ConfigError(f"{path}: missing input columns {missing}")
    cols = [header.index(c) for c in columns]
    X = onp.empty((len(rows) - 1, len(cols)))
    for lineno, row in enumerate(rows[1:], start=2):
        try:
            X[lineno - 2] = [float(row[c]) for c in cols]
        except (ValueError, IndexError) as e:
            raise ConfigError(f"{path}:{lineno}: {e}") from e
        if not onp.all(onp.isfinite(X[lineno - 2])):
            raise ConfigError(f"{path}:{lineno}: non-finite value")
    return X


def save_csv(ds: Dataset, path: str) -> None:
    """按原始单位写出 CSV（load_csv 可读回）"""
    X = ds.raw_X()
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(list(ds.columns) + [ds.target])
        for xi, yi in zip(X, ds.y):
            writer.writerow([repr(float(v)) for v in xi] + [repr(float(yi))])
    logger.info(f"Dataset written: {path} ({ds.N} rows)")


def principal_projection(X: onp.ndarray) -> onp.ndarray:
    """在第一主成分上的投影；方向符号使绝对值最大的分量为正"""
    Xc = X - X.mean(axis=0)
    _, _, Vt = onp.linalg.svd(Xc, full_matrices=False)
    v = Vt[0]
    if v[onp.argmax(onp.abs(v))] < 0:
        v = -v
    return Xc @ v


def split(ds: Dataset, spec: SplitConfig) -> Tuple[Dataset, Dataset]:
    """
    训练/测试划分

    - pca: 投影到第一主成分并排序，两端各取 ⌊N/15⌋ 作为测试集（外推）
    - random: 用种子打乱，前 fraction 作为训练集

    Raises:
        ConfigError: 数据太少
    """
    N = ds.N
    if spec.mode == "pca":
        if N < 15:
            raise ConfigError(f"PCA extrapolation split needs N >= 15, got {N}")
        order = onp.argsort(principal_projection(ds.X), kind="stable")
        k = N // 15
        test_idx = onp.concatenate([order[:k], order[N - k :]])
        train_idx = order[k : N - k]
    else:
        if N < 2:
            raise ConfigError(f"random split needs N >= 2, got {N}")
        perm = onp.random.default_rng(spec.seed).permutation(N)
        n_train = min(max(int(round(spec.fraction * N)), 1), N - 1)
        train_idx, test_idx = perm[:n_train], perm[n_train:]
    train_idx = onp.sort(train_idx)
    test_idx = onp.sort(test_idx)
    logger.info(f"Split ({spec.mode}): train {train_idx.size}, test {test_idx.size}")
    return ds.subset(train_idx), ds.subset(test_idx)


def default_generator() -> Tuple[KernelPool, onp.ndarray]:
    """PER₁ + SE × PER₂"""
    per1 = KernelExpr((BaseKernel(BaseKind.PER, lengthscale=1.0, period=1.0),))
    se_per2 = KernelExpr(
        (BaseKernel(BaseKind.SE, lengthscale=3.0), BaseKernel(BaseKind.PER, lengthscale=1.0, period=2.5))
    )
    return KernelPool((per1, se_per2)), onp.ones(2)


def load_generator(path: str) -> Tuple[KernelPool, onp.ndarray]:
    """
    读取生成核：{"pool": [...], "weights": [...]}，weights 缺省为全 1

    Raises:
        ConfigError: 文件无法解析
    """
    try:
        with open(path) as f:
            data = json.load(f)
        pool = KernelPool.from_json(json.dumps(data["pool"]))
        weights = onp.asarray(data.get("weights", [1.0] * pool.m), dtype=float)
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as e:
        logger.error(f"Cannot read generator {path}: {e}")
        raise ConfigError(f"cannot read generator {path}: {e}") from e
    return pool, weights


def comparison_generator() -> Tuple[KernelPool, onp.ndarray]:
    """SE₁ + SE₂ + PER₁，后验比较实验的默认生成核"""
    se1 = KernelExpr((BaseKernel(BaseKind.SE, lengthscale=1.0),))
    se2 = KernelExpr((BaseKernel(BaseKind.SE, lengthscale=3.0),))
    per1 = KernelExpr((BaseKernel(BaseKind.PER, lengthscale=1.0, period=2.5),))
    return KernelPool((se1, se2, per1)), onp.ones(3)


def resolve_generator(cfg: SynthConfig, default=default_generator) -> Tuple[KernelPool, onp.ndarray]:
    """cfg.kernel 给出时读取 JSON，否则使用 default()"""
    return default() if cfg.kernel is None else load_generator(cfg.kernel)


def run_synth(cfg: SynthConfig, generator: Optional[Tuple[KernelPool, onp.ndarray]] = None) -> Tuple[Dataset, Dict[str, Any]]:
    """
    在 [low, high] 的均匀网格上从生成核采样

    Args:
        cfg (SynthConfig): 合成数据配置
        generator (tuple, optional): (核池, 权重)，覆盖 cfg.kernel 与默认生成核

    Returns:
        tuple: (数据集, 真实生成核记录)

    Example:
        >>> ds, truth = run_synth(SynthConfig(seed=1))
        >>> ds.N
        100
    """
    pool, weights = resolve_generator(cfg) if generator is None else generator
    weights = onp.asarray(weights, dtype=float)
    X = onp.linspace(cfg.low, cfg.high, cfg.n).reshape(-1, 1)
    wk = WeightedKernel(pool, weights)
    y = sample_gp(wk, X, cfg.noise, cfg.seed)
    truth = {
        "pool": json.loads(pool.to_json()),
        "weights": weights.tolist(),
        "names": pool.names(),
        "descriptions": [e.describe() for e in pool],
        "noise": cfg.noise,
        "seed": cfg.seed,
    }
    logger.info(f"Synthetic data: N={cfg.n} from {' + '.join(pool.names())}")
    return Dataset(X, y, Task.REGRESSION, ["x"], "y"), truth
