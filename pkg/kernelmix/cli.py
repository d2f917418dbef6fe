"""
命令行入口

子命令：synth, train, predict, evaluate, decompose, verify-bound, pool, compare, spike
退出码：0 成功，2 配置错误，3 数值失败，4 不变量（界/分解恒等式）不成立
"""

from .utils import *
from .config import HorseshoeConfig, PoolConfig, RunConfig, SynthConfig, TrainingConfig
from .kernels import BaseKernel, BaseKind, KernelExpr, KernelPool, additive_pool, build_pool
from .exact import GaussianPosterior, WeightedKernel, exact_posterior, predictive_log_density, sample_gp, w2_gaussian
from .multisvgp import (
    MultiSVGPModel,
    SVGPBaseline,
    SparseModel,
    component_predictive,
    from_checkpoint,
    init_groups,
    init_svgp_group,
    marginal_predictive,
    optimal_q,
    svgp_predictive,
    to_checkpoint,
)
from .trainer import build_model, predict, sigmoid_probability, train, write_trace
from .bound import verify_pool_recursive, verify_proposition
from .data import Dataset, Task, comparison_generator, load_csv, load_inputs, resolve_generator, run_synth, save_csv, split
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
import argparse
import csv
import json
import os
import sys

import numpy as onp

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INVARIANT = 4

DECOMPOSE_TOL = 1e-8


@dataclass
class TargetScaler:
    """回归目标的标准化；分类任务保持恒等变换"""

    shift: float = 0.0
    scale: float = 1.0

    @classmethod
    def fit(cls, y, task: Task) -> "TargetScaler":
        if task == Task.CLASSIFICATION:
            return cls()
        y = onp.asarray(y, dtype=float)
        scale = float(y.std())
        return cls(float(y.mean()), scale if scale > 0 else 1.0)

    def transform(self, y) -> onp.ndarray:
        return (onp.asarray(y, dtype=float) - self.shift) / self.scale

    def mean(self, m) -> onp.ndarray:
        return onp.asarray(m) * self.scale + self.shift

    def var(self, v) -> onp.ndarray:
        return onp.asarray(v) * self.scale ** 2


def _ensure_dir(path: Optional[str]) -> Optional[str]:
    if path:
        os.makedirs(path, exist_ok=True)
    return path


def _write_json(data: Any, path: str) -> None:
    with open(path, "w") as f:
        json.dump(data, f, indent=2)
    logger.info(f"Written: {path}")


def make_pool(cfg: RunConfig, ds: Dataset) -> KernelPool:
    """按配置构建核池：d 阶加性核池或默认的 24 成员核池"""
    if cfg.pool.additive_order is not None:
        return additive_pool(ds.D, cfg.pool.additive_order, BaseKind(cfg.pool.base))
    return build_pool(cfg.pool.max_order, cfg.pool.schemes, X=ds.X, y=ds.y, seed=cfg.seed)


def save_bundle(model: SparseModel, ds: Dataset, scaler: TargetScaler, cfg: RunConfig, path: str) -> None:
    bundle = {
        "model": to_checkpoint(model),
        "data": ds.transform_dict(),
        "targets": {"shift": scaler.shift, "scale": scaler.scale},
        "config": cfg.to_dict(),
        "config_hash": cfg.hash(),
    }
    _write_json(bundle, path)


def load_bundle(path: str) -> Tuple[SparseModel, Dict[str, Any], TargetScaler]:
    """
    读取训练输出的检查点

    Raises:
        ConfigError: 文件缺失或格式错误
    """
    try:
        with open(path) as f:
            bundle = json.load(f)
        model = from_checkpoint(bundle["model"])
        scaler = TargetScaler(float(bundle["targets"]["shift"]), float(bundle["targets"]["scale"]))
        return model, bundle["data"], scaler
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as e:
        logger.error(f"Cannot load checkpoint {path}: {e}")
        raise ConfigError(f"cannot load checkpoint {path}: {e}") from e


def write_weights(model: SparseModel, path: str) -> None:
    """weights.csv：按权重降序的 (name, kernel_description, weight)"""
    w = model.summary_weights()
    order = onp.argsort(-w, kind="stable")
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["name", "kernel_description", "weight"])
        for i in order:
            writer.writerow([model.pool[i].name, model.pool[i].describe(), repr(float(w[i]))])
    logger.info(f"Weights written: {path}")


def run_train(cfg: RunConfig, ds: Dataset, out_dir: Optional[str] = None, do_split: bool = True):
    """
    训练流程：划分 -> 标准化目标 -> 构建核池和模型 -> 训练 -> 写出结果

    Returns:
        tuple: (模型, trace, TargetScaler, 测试指标或 None)
    """
    _ensure_dir(out_dir)
    train_ds, test_ds = split(ds, cfg.split) if do_split else (ds, None)
    scaler = TargetScaler.fit(train_ds.y, train_ds.task)
    fit_ds = replace(train_ds, y=scaler.transform(train_ds.y)) if train_ds.task == Task.REGRESSION else train_ds

    training = cfg.training
    expected = Likelihood.BERNOULLI if ds.task == Task.CLASSIFICATION else Likelihood.GAUSSIAN
    if training.likelihood != expected:
        training = replace(training, likelihood=expected)
    pool = make_pool(cfg, fit_ds)
    M = cfg.inducing.resolve(fit_ds.N, fit_ds.D)
    model = build_model(pool, fit_ds.X, fit_ds.y, training, M, cfg.horseshoe)
    model = replace(model, config_hash=cfg.hash())
    model, trace = train(model, fit_ds, training)

    metrics = None
    if out_dir:
        save_bundle(model, ds, scaler, cfg, os.path.join(out_dir, "checkpoint.json"))
        write_trace(trace, os.path.join(out_dir, "trace.csv"))
        write_weights(model, os.path.join(out_dir, "weights.csv"))
    if test_ds is not None and test_ds.N > 0:
        metrics, preds = evaluate(model, test_ds, scaler, training.mc_samples_eval, cfg.seed)
        if out_dir:
            _write_json(metrics, os.path.join(out_dir, "metrics.json"))
            write_predictions(test_ds.raw_X(), preds, test_ds.columns, os.path.join(out_dir, "predictions.csv"), y=test_ds.y)
    return model, trace, scaler, metrics


def evaluate(model: SparseModel, test: Dataset, scaler: TargetScaler, mc_samples: int = 10, seed: int = 0):
    """
    测试集指标（原始单位）

    回归：RMSE 与平均测试对数似然（含噪声）；分类：阈值 ½ 的错误率与平均 Bernoulli 对数似然。

    Raises:
        ConfigError: 模型似然与任务不匹配
    """
    mean, var = predict(model, test.X, mc_samples, seed)
    if test.task == Task.REGRESSION:
        if model.likelihood != Likelihood.GAUSSIAN:
            raise ConfigError("a classification model cannot be evaluated on a regression task")
        mu = scaler.mean(mean)
        v = scaler.var(var)
        loglik = predictive_log_density(GaussianPosterior(mu, onp.diag(v)), test.y, float(scaler.var(model.noise)))
        resid = test.y - mu
        metrics = {"task": test.task.value, "n": test.N, "rmse": float(onp.sqrt(onp.mean(resid ** 2))), "mean_loglik": loglik, "nll": -loglik}
        preds = {"mean": mu, "var": v}
    else:
        if model.likelihood != Likelihood.BERNOULLI:
            raise ConfigError("a regression model cannot be evaluated on a classification task")
        p = onp.clip(sigmoid_probability(mean, var), 1e-12, 1.0 - 1e-12)
        loglik = float(onp.mean(test.y * onp.log(p) + (1.0 - test.y) * onp.log(1.0 - p)))
        error = float(onp.mean((p > 0.5).astype(float) != test.y))
        metrics = {"task": test.task.value, "n": test.N, "error_rate": error, "mean_loglik": loglik, "nll": -loglik}
        preds = {"mean": p, "var": p * (1.0 - p)}
    logger.info(f"Evaluation: {metrics}")
    return metrics, preds


def write_predictions(X_raw, preds: Dict[str, onp.ndarray], columns: Sequence[str], path: str, y=None) -> None:
    """predictions.csv：输入列（原始单位）、mean、var，以及可选的 y"""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        header = list(columns) + ["mean", "var"] + (["y"] if y is not None else [])
        writer.writerow(header)
        for j, x in enumerate(as_2d(X_raw)):
            row = [repr(float(v)) for v in x] + [repr(float(preds["mean"][j])), repr(float(preds["var"][j]))]
            if y is not None:
                row.append(repr(float(y[j])))
            writer.writerow(row)
    logger.info(f"Predictions written: {path}")


def decompose(model: SparseModel, X_grid, scaler: Optional[TargetScaler] = None) -> List[Dict[str, Any]]:
    """
    每个核分量的报告，按权重降序

    每项包含 weight、description、(w_i μ_i, w_i² diag Σ_i)（原始单位的尺度）。
    分量不含目标的平移量：分量均值之和加上 scaler.shift 等于原始单位的预测均值，
    write_decomposition 把平移量写成 "constant"。

    Raises:
        ConfigError: 模型不是 MultiSVGP
        InvariantViolation: 分量均值之和与预测均值不一致
    """
    if not isinstance(model, MultiSVGPModel):
        raise ConfigError("decomposition needs a MultiSVGP model")
    scaler = scaler or TargetScaler()
    X_grid = as_2d(X_grid)
    w = model.summary_weights()
    parts = component_predictive(model, w, X_grid)
    total, _, _ = model.moments(model.params(), w, X_grid)
    summed = onp.sum([mu for mu, _ in parts], axis=0)
    tol = DECOMPOSE_TOL * max(1.0, float(onp.max(onp.abs(total))))
    if onp.max(onp.abs(summed - onp.asarray(total))) > tol:
        raise InvariantViolation("component means do not sum to the predictive mean")
    order = onp.argsort(-w, kind="stable")
    report = []
    for rank, i in enumerate(order):
        mu, var = parts[i]
        report.append(
            {
                "rank": rank + 1,
                "index": int(i),
                "name": model.pool[i].name,
                "description": model.pool[i].describe(),
                "weight": float(w[i]),
                "mean": (onp.asarray(mu) * scaler.scale).tolist(),
                "var": scaler.var(var).tolist(),
            }
        )
    return report


def write_decomposition(report: List[Dict[str, Any]], X_raw, columns: Sequence[str], out_dir: str, constant: float = 0.0) -> None:
    """components.json 与 components.csv；constant 为各分量之外的常数平移"""
    _ensure_dir(out_dir)
    _write_json(
        {"grid": as_2d(X_raw).tolist(), "columns": list(columns), "constant": float(constant), "components": report},
        os.path.join(out_dir, "components.json"),
    )
    path = os.path.join(out_dir, "components.csv")
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["rank", "name", "weight"] + list(columns) + ["mean", "var"])
        for comp in report:
            for x, m, v in zip(as_2d(X_raw), comp["mean"], comp["var"]):
                writer.writerow([comp["rank"], comp["name"], repr(comp["weight"])] + [repr(float(c)) for c in x] + [repr(m), repr(v)])
    logger.info(f"Decomposition written: {path}")


def parse_grid(text: str) -> onp.ndarray:
    """"LOW:HIGH:COUNT" -> (COUNT, 1) 网格"""
    try:
        low, high, count = text.split(":")
        grid = onp.linspace(float(low), float(high), int(count))
    except ValueError as e:
        raise ConfigError(f"grid must look like LOW:HIGH:COUNT, got '{text}'") from e
    if grid.size < 1:
        raise ConfigError(f"grid '{text}' is empty")
    return grid.reshape(-1, 1)


def parse_kernel(text: str) -> KernelExpr:
    """
    "SE"、"PER*SE" 或 "PER×SE"；超参数使用默认值

    Example:
        >>> parse_kernel("PER*SE").name
        'PER×SE'
    """
    names = [t.strip().upper() for t in text.replace("×", "*").split("*")]
    try:
        return KernelExpr(tuple(BaseKernel(BaseKind(n)) for n in names))
    except ValueError as e:
        raise ConfigError(f"unknown kernel expression '{text}'") from e


def _map_seeds(one_seed, seeds: Sequence[int], jobs: int) -> List[Dict[str, Any]]:
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool_exec:
            results = list(pool_exec.map(one_seed, seeds))
    else:
        results = [one_seed(s) for s in seeds]
    return [row for rows in results for row in rows]


def compare_posteriors(
    synth: SynthConfig,
    inducing_counts: Sequence[int],
    grid_n: int = 200,
    seeds: Sequence[int] = (0,),
    jobs: int = 1,
    training: Optional[TrainingConfig] = None,
) -> List[Dict[str, Any]]:
    """
    MultiSVGP 与 SVGP 相对精确后验的 W2 距离

    生成核默认为 SE₁ + SE₂ + PER₁（synth.kernel 给出时读取该文件）。两个模型都固定在
    真实权重上，从 q(U) 的解析最优解开始（MultiSVGP 为分组平均场，SVGP 为联合最优）；
    给出 training 时再用同一个训练配置各自训练。在 [low, high] 的 grid_n 点稠密网格上
    与精确后验比较，不同种子可以并行。

    Returns:
        list: 每个 (seed, M) 一行 {seed, M, w2_multisvgp, w2_svgp}
    """
    if synth.noise <= 0:
        raise ConfigError("posterior comparison needs a positive noise variance")
    pool, w = resolve_generator(synth, comparison_generator)
    grid = onp.linspace(synth.low, synth.high, grid_n).reshape(-1, 1)
    budget = training if training is not None and training.iterations > 0 else None

    def one_seed(seed: int) -> List[Dict[str, Any]]:
        ds, _ = run_synth(replace(synth, seed=seed), (pool, w))
        exact = exact_posterior(WeightedKernel(pool, w), ds.X, ds.y, synth.noise, grid)
        rows = []
        for M in inducing_counts:
            multi = MultiSVGPModel(pool=pool, weights=w, noise=synth.noise, fixed_weights=True, groups=init_groups(pool, ds.X, M, seed))
            multi = optimal_q(multi, ds.X, ds.y, synth.noise, w, mean_field=True)
            base = SVGPBaseline(pool=pool, weights=w, noise=synth.noise, fixed_weights=True, group=init_svgp_group(pool, w, ds.X, M, seed))
            base = optimal_q(base, ds.X, ds.y, synth.noise, w, mean_field=False)
            if budget is not None:
                run = replace(budget, seed=seed, likelihood=Likelihood.GAUSSIAN)
                multi, _ = train(multi, ds, run)
                base, _ = train(base, ds, run)
            rows.append(
                {
                    "seed": seed,
                    "M": M,
                    "w2_multisvgp": w2_gaussian(marginal_predictive(multi, w, grid), exact),
                    "w2_svgp": w2_gaussian(svgp_predictive(base, w, grid), exact),
                }
            )
            logger.info(f"seed={seed} M={M}: W2 multi={rows[-1]['w2_multisvgp']:.4g} svgp={rows[-1]['w2_svgp']:.4g}")
        return rows

    return _map_seeds(one_seed, seeds, jobs)


SPIKE_TARGETS: Tuple[str, ...] = ("SE×PER", "PER×SE")


def horseshoe_spike(
    synth: SynthConfig,
    training: TrainingConfig,
    inducing: int,
    seeds: Sequence[int] = (0, 1, 2),
    pool_cfg: Optional[PoolConfig] = None,
    horseshoe: Optional[HorseshoeConfig] = None,
    ratio: float = 5.0,
    targets: Sequence[str] = SPIKE_TARGETS,
    jobs: int = 1,
) -> List[Dict[str, Any]]:
    """
    Horseshoe 收缩实验与无先验消融

    每个种子在合成数据（默认 PER₁ + SE×PER₂）上用完整核池分别训练 prior=horseshoe 与
    prior=none 的 MultiSVGP。某次训练通过当且仅当权重最大的成员属于 targets，
    并且最大权重与权重中位数之比不小于 ratio。

    Returns:
        list: 每个 (seed, prior) 一行 {seed, prior, top, ratio, structure_found, passes}
    """
    pool_cfg = pool_cfg or PoolConfig()

    def one_seed(seed: int) -> List[Dict[str, Any]]:
        ds, _ = run_synth(replace(synth, seed=seed))
        scaler = TargetScaler.fit(ds.y, ds.task)
        y = scaler.transform(ds.y)
        fit_ds = replace(ds, y=y)
        pool = build_pool(pool_cfg.max_order, pool_cfg.schemes, X=ds.X, y=y, seed=seed)
        rows = []
        for prior in ("horseshoe", "none"):
            run = replace(training, prior=prior, seed=seed, model="multisvgp", likelihood=Likelihood.GAUSSIAN)
            model = build_model(pool, ds.X, y, run, min(inducing, ds.N), horseshoe)
            trained, _ = train(model, fit_ds, run)
            w = trained.summary_weights()
            top = int(onp.argmax(w))
            spread = float(w[top] / onp.median(w))
            found = pool[top].name in targets
            rows.append(
                {
                    "seed": seed,
                    "prior": prior,
                    "top": pool[top].name,
                    "ratio": spread,
                    "structure_found": found,
                    "passes": bool(found and spread >= ratio),
                }
            )
            logger.info(f"seed={seed} prior={prior}: top {pool[top].name}, top/median {spread:.3g}")
        return rows

    return _map_seeds(one_seed, seeds, jobs)


# ---------------------------------------------------------------------------
# 子命令
# ---------------------------------------------------------------------------


def _config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if getattr(args, "config", None) else RunConfig()
    flags = {
        "seed": getattr(args, "seed", None),
        "iterations": getattr(args, "iterations", None),
        "learning_rate": getattr(args, "lr", None),
        "minibatch": getattr(args, "minibatch", None),
        "count": getattr(args, "inducing", None),
        "model": getattr(args, "model", None),
        "prior": getattr(args, "prior", None),
        "max_order": getattr(args, "max_order", None),
        "additive_order": getattr(args, "additive_order", None),
        "mode": getattr(args, "split", None),
        "fraction": getattr(args, "fraction", None),
        "mc_samples_eval": getattr(args, "mc_samples", None),
        "optimize_inducing": getattr(args, "optimize_inducing", None),
        "A": getattr(args, "A", None),
        "B": getattr(args, "B", None),
        "n": getattr(args, "n", None),
        "noise": getattr(args, "noise", None),
        "kernel": getattr(args, "kernel", None),
    }
    return cfg.with_overrides(**flags)


def _task(args) -> Task:
    return Task.CLASSIFICATION if getattr(args, "task", "regression") == "classification" else Task.REGRESSION


def cmd_synth(args) -> int:
    cfg = _config(args)
    ds, truth = run_synth(cfg.synth)
    out = _ensure_dir(args.out or ".")
    save_csv(ds, os.path.join(out, "data.csv"))
    _write_json(truth, os.path.join(out, "truth.json"))
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    ds = load_csv(args.data, target=args.target, task=_task(args))
    _, trace, _, metrics = run_train(cfg, ds, args.out or ".", do_split=not args.no_split)
    print(f"final ELBO: {trace[-1].elbo:.6g}" if trace else "no training iterations")
    if metrics:
        print(json.dumps(metrics, indent=2))
    return EXIT_OK


def _grid_or_data(args, data_info: Dict[str, Any]) -> onp.ndarray:
    if args.grid:
        X_raw = parse_grid(args.grid)
        if X_raw.shape[1] != len(data_info["columns"]):
            raise ConfigError("--grid only works for one-dimensional inputs; use --data")
        return X_raw
    if args.data:
        return load_inputs(args.data, data_info["columns"])
    raise ConfigError("give either --grid or --data")


def _standardize(X_raw, data_info: Dict[str, Any]) -> onp.ndarray:
    return (as_2d(X_raw) - onp.asarray(data_info["x_shift"])) / onp.asarray(data_info["x_scale"])


def cmd_predict(args) -> int:
    model, info, scaler = load_bundle(args.checkpoint)
    X_raw = _grid_or_data(args, info)
    mean, var = predict(model, _standardize(X_raw, info), args.mc_samples, args.seed)
    if model.likelihood == Likelihood.BERNOULLI:
        p = sigmoid_probability(mean, var)
        preds = {"mean": p, "var": p * (1.0 - p)}
    else:
        preds = {"mean": scaler.mean(mean), "var": scaler.var(var)}
    out = _ensure_dir(args.out or ".")
    write_predictions(X_raw, preds, info["columns"], os.path.join(out, "predictions.csv"))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model, info, scaler = load_bundle(args.checkpoint)
    task = Task(info.get("task", Task.REGRESSION.value))
    X_raw = load_inputs(args.data, info["columns"])
    y = load_inputs(args.data, [info["target"]])[:, 0]
    test = Dataset(_standardize(X_raw, info), y, task, info["columns"], info["target"], info["x_shift"], info["x_scale"])
    metrics, preds = evaluate(model, test, scaler, args.mc_samples, args.seed)
    out = _ensure_dir(args.out or ".")
    _write_json(metrics, os.path.join(out, "metrics.json"))
    write_predictions(X_raw, preds, info["columns"], os.path.join(out, "predictions.csv"), y=y)
    print(json.dumps(metrics, indent=2))
    return EXIT_OK


def cmd_decompose(args) -> int:
    model, info, scaler = load_bundle(args.checkpoint)
    X_raw = _grid_or_data(args, info)
    report = decompose(model, _standardize(X_raw, info), scaler)
    out = _ensure_dir(args.out or ".")
    write_decomposition(report, X_raw, info["columns"], os.path.join(out, "decomposition"), constant=scaler.shift)
    for comp in report[: args.top]:
        print(f"{comp['rank']:>3}  {comp['weight']:10.4g}  {comp['name']:<10} {comp['description']}")
    return EXIT_OK


def cmd_verify_bound(args) -> int:
    kernels = [parse_kernel(k) for k in args.kernels]
    if len(kernels) < 2:
        raise ConfigError("verify-bound needs at least two kernels")
    if args.data:
        ds = load_csv(args.data, target=args.target)
        X, y = ds.X, ds.y
    else:
        X = onp.linspace(-5.0, 5.0, args.n).reshape(-1, 1)
        y = sample_gp(WeightedKernel(KernelPool(tuple(kernels)), onp.ones(len(kernels))), X, args.noise, args.seed)
    out = _ensure_dir(args.out or ".")
    if len(kernels) == 2:
        report = verify_proposition(kernels[0], kernels[1], X, y, args.M, args.noise, args.delta, seed=args.seed)
        _write_json(report.to_dict(), os.path.join(out, "bound.json"))
        print(report.table())
    else:
        reports = verify_pool_recursive(kernels, X, y, args.M, args.noise, args.delta, seed=args.seed)
        _write_json([r.to_dict() for r in reports], os.path.join(out, "bound.json"))
        print("\n\n".join(r.table() for r in reports))
    return EXIT_OK


def cmd_pool(args) -> int:
    cfg = _config(args)
    X = y = None
    if args.data:
        ds = load_csv(args.data, target=args.target)
        X, y = ds.X, ds.y
    pool = build_pool(cfg.pool.max_order, cfg.pool.schemes, X=X, y=y, seed=cfg.seed)
    for i, e in enumerate(pool):
        print(f"{i + 1:>3}  {e.name:<10} {e.init_scheme.value:<7} {e.describe()}")
    if args.out:
        _ensure_dir(args.out)
        with open(os.path.join(args.out, "pool.json"), "w") as f:
            f.write(pool.to_json(indent=2))
    return EXIT_OK


def median_by_inducing(rows: Sequence[Dict[str, Any]]) -> Dict[int, Tuple[float, float]]:
    """每个 M 上跨种子的 (W2 MultiSVGP 中位数, W2 SVGP 中位数)"""
    summary = {}
    for M in sorted({int(r["M"]) for r in rows}):
        chosen = [r for r in rows if int(r["M"]) == M]
        summary[M] = (
            float(onp.median([r["w2_multisvgp"] for r in chosen])),
            float(onp.median([r["w2_svgp"] for r in chosen])),
        )
    return summary


def cmd_compare(args) -> int:
    cfg = _config(args)
    seeds = args.seeds if args.seeds else [cfg.seed]
    training = cfg.training if args.iterations else None
    rows = compare_posteriors(cfg.synth, args.inducing_counts, args.grid_n, seeds, args.jobs, training)
    out = _ensure_dir(args.out or ".")
    path = os.path.join(out, "compare.csv")
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["seed", "M", "w2_multisvgp", "w2_svgp"])
        writer.writeheader()
        writer.writerows(rows)
    logger.info(f"Comparison written: {path}")
    for r in rows:
        print(f"seed={r['seed']} M={r['M']:>4}  W2 MultiSVGP={r['w2_multisvgp']:.4g}  SVGP={r['w2_svgp']:.4g}")
    for M, (multi, single) in median_by_inducing(rows).items():
        print(f"median M={M:>4}  W2 MultiSVGP={multi:.4g}  SVGP={single:.4g}")
    return EXIT_OK


def cmd_spike(args) -> int:
    cfg = _config(args)
    seeds = args.seeds if args.seeds else [0, 1, 2]
    M = cfg.inducing.count if cfg.inducing.count is not None else 20
    rows = horseshoe_spike(cfg.synth, cfg.training, M, seeds, cfg.pool, cfg.horseshoe, args.ratio, jobs=args.jobs)
    out = _ensure_dir(args.out or ".")
    path = os.path.join(out, "spike.csv")
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["seed", "prior", "top", "ratio", "structure_found", "passes"])
        writer.writeheader()
        writer.writerows(rows)
    logger.info(f"Spike experiment written: {path}")
    for r in rows:
        print(f"seed={r['seed']} {r['prior']:<9} top={r['top']:<8} top/median={r['ratio']:.3g}  {'pass' if r['passes'] else 'fail'}")
    for prior in ("horseshoe", "none"):
        passed = sum(r["passes"] for r in rows if r["prior"] == prior)
        print(f"{prior}: {passed}/{len(seeds)} seeds pass")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="输出目录")
    common.add_argument("--seed", type=int, help="随机种子")
    common.add_argument("--config", help="JSON 配置文件")
    common.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="日志级别")

    parser = argparse.ArgumentParser(prog="kernelmix", description="带 Horseshoe 核选择的多诱导点稀疏 GP")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="生成合成数据")
    p.add_argument("--n", type=int, help="点数")
    p.add_argument("--noise", type=float, help="噪声方差")
    p.add_argument("--kernel", help="生成核 JSON 文件")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", parents=[common], help="训练模型")
    p.add_argument("--data", required=True, help="CSV 数据")
    p.add_argument("--target", help="目标列名（默认最后一列）")
    p.add_argument("--task", choices=["regression", "classification"], default="regression")
    p.add_argument("--iterations", type=int)
    p.add_argument("--lr", type=float, help="学习率")
    p.add_argument("--minibatch", type=int)
    p.add_argument("--inducing", type=int, help="每组诱导点数")
    p.add_argument("--model", choices=["multisvgp", "svgp"])
    p.add_argument("--prior", choices=["horseshoe", "none"])
    p.add_argument("--max-order", type=int, dest="max_order")
    p.add_argument("--additive-order", type=int, dest="additive_order")
    p.add_argument("--split", choices=["random", "pca"])
    p.add_argument("--fraction", type=float)
    p.add_argument("--no-split", action="store_true", help="全部数据用于训练")
    p.add_argument("--freeze-inducing", action="store_const", const=False, dest="optimize_inducing")
    p.add_argument("--mc-samples", type=int, dest="mc_samples")
    p.add_argument("--A", type=float)
    p.add_argument("--B", type=float)
    p.set_defaults(func=cmd_train)

    for name, func, helptext in (
        ("predict", cmd_predict, "预测"),
        ("decompose", cmd_decompose, "核分解报告"),
    ):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--grid", help="LOW:HIGH:COUNT（一维）")
        p.add_argument("--data", help="输入 CSV")
        p.add_argument("--mc-samples", type=int, default=10, dest="mc_samples")
        p.add_argument("--top", type=int, default=3, help="打印前几个分量")
        p.set_defaults(func=func)

    p = sub.add_parser("evaluate", parents=[common], help="测试集指标")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--mc-samples", type=int, default=10, dest="mc_samples")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("verify-bound", parents=[common], help="验证 C_multi ≤ C_single")
    p.add_argument("--kernels", nargs="+", default=["SE", "PER"], help="两个或更多核表达式，如 SE PER*SE")
    p.add_argument("--n", type=int, default=40)
    p.add_argument("--M", type=int, default=10)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--data", help="CSV 数据（默认在 [-5, 5] 上采样）")
    p.add_argument("--target")
    p.set_defaults(func=cmd_verify_bound)

    p = sub.add_parser("pool", parents=[common], help="列出核池")
    p.add_argument("--max-order", type=int, dest="max_order")
    p.add_argument("--data", help="用数据初始化超参数")
    p.add_argument("--target")
    p.set_defaults(func=cmd_pool)

    p = sub.add_parser("compare", parents=[common], help="与精确后验的 W2 比较")
    p.add_argument("--inducing-counts", type=int, nargs="+", default=[5, 10, 20, 40], dest="inducing_counts")
    p.add_argument("--grid-n", type=int, default=200, dest="grid_n")
    p.add_argument("--seeds", type=int, nargs="*")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--n", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--kernel", help="生成核 JSON 文件")
    p.add_argument("--iterations", type=int, help="从解析最优解出发再训练的迭代次数（默认不训练）")
    p.add_argument("--lr", type=float, help="学习率")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("spike", parents=[common], help="Horseshoe 收缩实验与无先验消融")
    p.add_argument("--seeds", type=int, nargs="*")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--n", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--kernel", help="生成核 JSON 文件")
    p.add_argument("--iterations", type=int)
    p.add_argument("--lr", type=float, help="学习率")
    p.add_argument("--inducing", type=int, help="每组诱导点数（默认 20）")
    p.add_argument("--max-order", type=int, dest="max_order")
    p.add_argument("--ratio", type=float, default=5.0, help="最大权重 / 中位数 的阈值")
    p.set_defaults(func=cmd_spike)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logger.setLevel(args.log_level)
    if args.seed is None:
        args.seed = 0 if args.command in ("predict", "decompose", "evaluate", "verify-bound") else None
    try:
        return args.func(args)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except NumericalError as e:
        where = f" at iteration {e.iteration}" if e.iteration is not None else ""
        logger.error(f"Numerical failure{where}: {e}")
        return EXIT_NUMERICAL
    except InvariantViolation as e:
        logger.error(f"Invariant violated: {e}")
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
