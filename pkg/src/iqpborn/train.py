"""Gradient-based training of the IQP Born machine under the MMD loss."""

from __future__ import annotations

import io
import math
import time
from dataclasses import dataclass

import numpy as np

from .datasets import TargetStats
from .errors import ConfigError, TrainingAbort
from .initializers import PatchDraw
from .mmd import (
    LossEstimate,
    MCLossConfig,
    MMDConfig,
    loss_and_gradient_mc,
    loss_exact_subsets,
    loss_gradient,
    loss_mc,
)
from .topology import GeneratorIndex, InteractionGraph


@dataclass(frozen=True)
class TrainConfig:
    """Step budget, optimizer, loss engine budgets, and seed streams.

    The evaluation stream is independent of the update stream and defaults
    to a fixed seed so loss curves are comparable across strategies.
    """

    steps: int = 300
    learning_rate: float = 0.05
    optimizer: str = "gd"  # "gd" | "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    engine: str = "mc"  # "mc" | "exact"
    subsets: int = 256
    z_samples: int = 256
    eval_every: int = 10
    eval_subsets: int = 2048
    eval_z_samples: int = 512
    seed: int = 0
    eval_seed: int = 987654321

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning rate must be positive")
        if self.optimizer not in ("gd", "adam"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.engine not in ("mc", "exact"):
            raise ConfigError(f"unknown engine {self.engine!r}")


@dataclass(frozen=True)
class TraceRecord:
    step: int
    loss: float
    std_error: float
    seconds: float


@dataclass(frozen=True)
class TrainTrace:
    records: tuple[TraceRecord, ...]
    final_params: np.ndarray

    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.records])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("step,loss,se,seconds\n")
        for r in self.records:
            buf.write(f"{r.step},{r.loss:.12g},{r.std_error:.12g},{r.seconds:.3f}\n")
        return buf.getvalue()

    def params_text(self) -> str:
        return "".join(f"{float(v)!r}\n" for v in self.final_params)


def _step_seed(seed: int, step: int) -> int:
    ss = np.random.SeedSequence(entropy=(int(seed), 3, int(step)))
    return int(ss.generate_state(1, np.uint64)[0])


def _evaluate(g, idx, theta, target, cfg, tcfg) -> LossEstimate:
    if tcfg.engine == "exact":
        return LossEstimate(loss_exact_subsets(g, idx, theta, target, cfg), 0.0)
    mc = MCLossConfig(tcfg.eval_subsets, tcfg.eval_z_samples, seed=tcfg.eval_seed)
    return loss_mc(g, idx, theta, target, cfg, mc)


def train(g: InteractionGraph, idx: GeneratorIndex, init: PatchDraw,
          target: TargetStats, cfg: MMDConfig, tcfg: TrainConfig) -> TrainTrace:
    """Plain gradient descent (optionally Adam) on the MMD loss.

    Deterministic given the config seeds: the update stream derives one
    seed per step, evaluations use the held-out stream. Aborts with the
    partial trace when the loss or gradient goes non-finite.
    """
    theta = np.array(init.sample, dtype=np.float64, copy=True)
    records: list[TraceRecord] = []
    t0 = time.perf_counter()
    m1 = np.zeros_like(theta)
    m2 = np.zeros_like(theta)

    def log(step: int) -> None:
        est = _evaluate(g, idx, theta, target, cfg, tcfg)
        if not math.isfinite(est.value):
            raise TrainingAbort(f"non-finite loss at step {step}",
                                TrainTrace(tuple(records), theta.copy()))
        records.append(TraceRecord(step, est.value, est.std_error,
                                   time.perf_counter() - t0))

    log(0)
    for step in range(1, tcfg.steps + 1):
        if tcfg.engine == "exact":
            grad = loss_gradient(g, idx, theta, target, cfg)
        else:
            mc = MCLossConfig(tcfg.subsets, tcfg.z_samples, seed=_step_seed(tcfg.seed, step))
            _, grad = loss_and_gradient_mc(g, idx, theta, target, cfg, mc)
        if not np.all(np.isfinite(grad)):
            raise TrainingAbort(f"non-finite gradient at step {step}",
                                TrainTrace(tuple(records), theta.copy()))
        if tcfg.optimizer == "gd":
            theta -= tcfg.learning_rate * grad
        else:
            m1 = tcfg.adam_beta1 * m1 + (1 - tcfg.adam_beta1) * grad
            m2 = tcfg.adam_beta2 * m2 + (1 - tcfg.adam_beta2) * grad**2
            m1_hat = m1 / (1 - tcfg.adam_beta1**step)
            m2_hat = m2 / (1 - tcfg.adam_beta2**step)
            theta -= tcfg.learning_rate * m1_hat / (np.sqrt(m2_hat) + tcfg.adam_eps)
        if step % tcfg.eval_every == 0 or step == tcfg.steps:
            log(step)
    return TrainTrace(tuple(records), theta.copy())
