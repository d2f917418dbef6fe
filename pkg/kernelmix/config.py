"""
运行配置

所有配置都是 dataclass，在 __post_init__ 中校验并抛出 ConfigError。
RunConfig 是根配置，对应 CLI 的 JSON 配置文件，命令行参数优先。
"""

from .utils import *
from dataclasses import asdict, dataclass, field, fields, replace
import hashlib
import json


@dataclass
class PoolConfig:
    """
    核池配置

    Attributes:
        max_order (int): 最大乘积阶数（1 或 2）
        schemes (tuple): 初始化方案
        additive_order (int, optional): 给出时改用 d 阶加性核池
        base (str): 加性核使用的基核
    """

    max_order: int = 2
    schemes: Tuple[str, ...] = ("Weak", "Strong")
    additive_order: Optional[int] = None
    base: str = "SE"

    def __post_init__(self):
        self.schemes = tuple(self.schemes)
        if self.max_order not in (1, 2):
            raise ConfigError(f"pool.max_order must be 1 or 2, got {self.max_order}")
        if not self.schemes or any(s not in ("Weak", "Strong") for s in self.schemes):
            raise ConfigError(f"pool.schemes must be drawn from Weak/Strong, got {self.schemes}")
        if self.additive_order is not None and self.additive_order < 1:
            raise ConfigError(f"pool.additive_order must be >= 1, got {self.additive_order}")
        if self.base not in ("SE", "LIN", "PER"):
            raise ConfigError(f"pool.base must be SE, LIN or PER, got {self.base}")


@dataclass
class TrainingConfig:
    """
    训练配置

    Attributes:
        iterations (int): Adam 迭代次数（0 表示不训练）
        minibatch (int, optional): 小批量大小 b，None 表示全批量
        learning_rate (float): Adam 学习率
        seed (int): 随机种子
        mc_samples_eval (int): 预测方差的权重采样次数
        noise_init (float, optional): σ_n² 初值，None 表示 0.1·var(y)
        optimize_inducing (bool): 是否优化诱导点位置
        likelihood (Likelihood): 似然类型
        log_every (int): DEBUG 日志间隔
        model (str): "multisvgp" 或 "svgp"
        prior (str): "horseshoe" 或 "none"（无先验消融：自由的正权重）
    """

    iterations: int = 1000
    minibatch: Optional[int] = None
    learning_rate: float = 0.01
    seed: int = 0
    mc_samples_eval: int = 10
    noise_init: Optional[float] = None
    optimize_inducing: bool = True
    likelihood: Likelihood = Likelihood.GAUSSIAN
    log_every: int = 50
    model: str = "multisvgp"
    prior: str = "horseshoe"

    def __post_init__(self):
        try:
            self.likelihood = Likelihood(self.likelihood)
        except ValueError as e:
            raise ConfigError(f"unknown likelihood: {self.likelihood}") from e
        if self.iterations < 0:
            raise ConfigError(f"training.iterations must be >= 0, got {self.iterations}")
        if self.minibatch is not None and self.minibatch < 1:
            raise ConfigError(f"training.minibatch must be >= 1, got {self.minibatch}")
        if not self.learning_rate > 0:
            raise ConfigError(f"training.learning_rate must be positive, got {self.learning_rate}")
        if self.mc_samples_eval < 1:
            raise ConfigError(f"training.mc_samples_eval must be >= 1, got {self.mc_samples_eval}")
        if self.noise_init is not None and not self.noise_init > 0:
            raise ConfigError(f"training.noise_init must be positive, got {self.noise_init}")
        if self.log_every < 1:
            raise ConfigError(f"training.log_every must be >= 1, got {self.log_every}")
        if self.model not in ("multisvgp", "svgp"):
            raise ConfigError(f"training.model must be multisvgp or svgp, got {self.model}")
        if self.prior not in ("horseshoe", "none"):
            raise ConfigError(f"training.prior must be horseshoe or none, got {self.prior}")

    def batch_size(self, n: int) -> int:
        """实际使用的小批量大小，要求 b ≤ N"""
        b = n if self.minibatch is None else self.minibatch
        if b > n:
            raise ConfigError(f"minibatch size {b} exceeds dataset size {n}")
        return b


@dataclass
class HorseshoeConfig:
    A: float = 1.0
    B: float = 1.0

    def __post_init__(self):
        if not (self.A > 0 and self.B > 0):
            raise ConfigError(f"horseshoe scales must be positive, got A={self.A}, B={self.B}")


@dataclass
class InducingConfig:
    """count 为 None 时：一维输入 100 个，否则 200 个（不超过 N）"""

    count: Optional[int] = None

    def __post_init__(self):
        if self.count is not None and self.count < 1:
            raise ConfigError(f"inducing.count must be >= 1, got {self.count}")

    def resolve(self, n: int, d: int) -> int:
        count = self.count if self.count is not None else (100 if d == 1 else 200)
        return min(count, n)


@dataclass
class SplitConfig:
    """
    数据划分

    Attributes:
        mode (str): "random" 或 "pca"（主成分外推）
        fraction (float): random 模式下训练集比例
        seed (int): random 模式的种子
    """

    mode: str = "random"
    fraction: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("random", "pca"):
            raise ConfigError(f"split.mode must be random or pca, got {self.mode}")
        if not 0.0 < self.fraction < 1.0:
            raise ConfigError(f"split.fraction must lie in (0, 1), got {self.fraction}")


@dataclass
class SynthConfig:
    """
    合成数据生成

    Attributes:
        n (int): 点数
        low, high (float): 均匀网格的区间
        noise (float): 观测噪声方差
        kernel (str): 生成核的 JSON 文件路径；None 表示默认的 PER₁ + SE×PER₂
        seed (int): 随机种子
    """

    n: int = 100
    low: float = -5.0
    high: float = 5.0
    noise: float = 0.01
    kernel: Optional[str] = None
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError(f"synth.n must be >= 2, got {self.n}")
        if not self.high > self.low:
            raise ConfigError(f"synth interval is empty: [{self.low}, {self.high}]")
        if not self.noise >= 0:
            raise ConfigError(f"synth.noise must be nonnegative, got {self.noise}")


_SECTIONS = {
    "pool": PoolConfig,
    "training": TrainingConfig,
    "horseshoe": HorseshoeConfig,
    "inducing": InducingConfig,
    "split": SplitConfig,
    "synth": SynthConfig,
}


@dataclass
class RunConfig:
    """
    根配置 {pool, training, horseshoe, inducing, split, synth, seed}

    Example:
        >>> cfg = RunConfig.from_json('{"training": {"iterations": 200}}')
        >>> cfg.with_overrides(learning_rate=0.05).training.learning_rate
        0.05
    """

    pool: PoolConfig = field(default_factory=PoolConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    horseshoe: HorseshoeConfig = field(default_factory=HorseshoeConfig)
    inducing: InducingConfig = field(default_factory=InducingConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    seed: int = 0

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        """
        从字典构建；根级 seed 作用于没有显式给出 seed 的 training、split、synth 段
        """
        unknown = set(data) - set(_SECTIONS) - {"seed"}
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        try:
            seed = int(data.get("seed", 0))
        except (TypeError, ValueError) as e:
            raise ConfigError(f"seed must be an integer, got {data.get('seed')!r}") from e
        kwargs: Dict[str, Any] = {}
        for name, section in _SECTIONS.items():
            values = data.get(name, {})
            if not isinstance(values, dict):
                raise ConfigError(f"config section '{name}' must be an object")
            allowed = {f.name for f in fields(section)}
            bad = set(values) - allowed
            if bad:
                raise ConfigError(f"unknown keys in '{name}': {sorted(bad)}")
            if "seed" in allowed and "seed" not in values:
                values = dict(values, seed=seed)
            kwargs[name] = section(**values)
        kwargs["seed"] = seed
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid config JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError("config JSON must be an object")
        return cls.from_dict(data)

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        try:
            with open(path) as f:
                text = f.read()
        except OSError as e:
            raise ConfigError(f"cannot read config file {path}: {e}") from e
        return cls.from_json(text)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["training"]["likelihood"] = self.training.likelihood.value
        data["pool"]["schemes"] = list(self.pool.schemes)
        return data

    def with_overrides(self, **flags: Any) -> "RunConfig":
        """
        用命令行参数覆盖配置，None 表示未给出

        参数名在各个配置段中查找；seed 同时作用于根配置与各段的 seed。
        """
        sections = {name: getattr(self, name) for name in _SECTIONS}
        updates: Dict[str, Dict[str, Any]] = {name: {} for name in _SECTIONS}
        seed = self.seed
        for key, value in flags.items():
            if value is None:
                continue
            if key == "seed":
                seed = int(value)
                for name in ("training", "split", "synth"):
                    updates[name]["seed"] = seed
                continue
            owners = [name for name, section in sections.items() if key in {f.name for f in fields(section)}]
            if not owners:
                raise ConfigError(f"unknown configuration flag: {key}")
            for name in owners:
                updates[name][key] = value
        new_sections = {name: replace(sections[name], **updates[name]) for name in _SECTIONS}
        return RunConfig(seed=seed, **new_sections)

    def hash(self) -> str:
        """规范 JSON 的 SHA-256"""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
