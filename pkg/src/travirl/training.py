"""Training loops: plain demonstration matching and its energy-ranked
extension.

Each iteration of the baseline loop picks one demonstration, solves the
soft MDP under the current reward prediction, and ascends the visitation
difference (demonstrated minus expected) chained through the model.  The
ranked variant picks a preference pair per iteration, applies that same
ascent for both trajectories, and additionally descends the pairwise
ranking loss on their predicted path returns, so rewards can move beyond
what suboptimal demonstrations justify.

The optimizer is plain SGD: theta <- theta * (1 - lr * weight_decay)
+ lr * accumulated_gradient, where the accumulated gradient already carries
the ranking term with a negative sign.  Runs are bit-for-bit reproducible
from (seed, config, dataset).
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericError
from .grid import GridMdp, GridSpec
from .models import ParamVector
from .ranking import path_return, ranking_loss, visit_map
from .solver import SvfPair, demo_svf, medirl_grad, policy_propagation, soft_value_iteration

REPORT_COLUMNS = ("iter", "nll_proxy", "rank_loss", "grad_norm", "millis")


@dataclass
class TrainConfig:
    algorithm: str = "medirl"  # "medirl" | "tmedirl"
    lr: float = 1e-3
    iterations: int = 1000
    seed: int = 0
    gamma: float = 0.95
    sweeps: int = None  # None -> 2 * (rows + cols)
    tol: float = 1e-6
    discounting: bool = True
    weight_decay: float = 0.0
    dropout: float = 0.0
    checkpoint_every: int = 0
    pairs_per_iter: int = 1
    rank_batch: int = 2  # trajectories drawn per ranked iteration; ranking
    # is summed over every distinct-AEC cross pair, so batches above 2
    # weight the ranking term up relative to the demonstration terms
    horizon_factor: int = 2  # propagation horizon = factor * demo length

    def __post_init__(self):
        if self.algorithm not in ("medirl", "tmedirl"):
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.lr}")
        if self.iterations < 0:
            raise ConfigError(f"iterations must be >= 0, got {self.iterations}")
        if not (0.0 <= self.dropout < 1.0):
            raise ConfigError(f"dropout rate must be in [0,1), got {self.dropout}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight decay must be >= 0, got {self.weight_decay}")
        if self.pairs_per_iter < 1:
            raise ConfigError(f"pairs_per_iter must be >= 1, got {self.pairs_per_iter}")
        if self.rank_batch < 2:
            raise ConfigError(f"rank_batch must be >= 2, got {self.rank_batch}")


@dataclass
class IterRecord:
    iteration: int
    nll_proxy: float
    rank_loss: float
    grad_norm: float
    millis: float


@dataclass
class TrainReport:
    records: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(REPORT_COLUMNS)
            for r in self.records:
                writer.writerow(
                    [r.iteration, f"{r.nll_proxy:.12g}", f"{r.rank_loss:.12g}",
                     f"{r.grad_norm:.12g}", f"{r.millis:.3f}"]
                )


def sgd_update(params: ParamVector, lr: float, weight_decay: float = 0.0) -> None:
    """Ascend the accumulated gradient after optional decay shrinkage."""
    if weight_decay:
        params.values *= 1.0 - lr * weight_decay
    params.values += lr * params.grad


def _mdp_for(model, cfg: TrainConfig) -> GridMdp:
    return GridMdp(GridSpec(rows=model.rows, cols=model.cols, gamma=cfg.gamma))


def _accumulate_demo_term(model, mdp, sample, cfg, rng):
    """Forward + solve + visitation difference for one sample; accumulates
    the demonstration-ascent gradient into the model and returns what the
    ranking term needs."""
    maps = model.forward(sample.features, sample.imu, dropout_rate=cfg.dropout, rng=rng)
    cache = model.pop_cache()
    solution = soft_value_iteration(mdp, maps, sweeps=cfg.sweeps, tol=cfg.tol)
    dp, dg = demo_svf(mdp, sample.trajectory, cfg.discounting)
    start = np.zeros(mdp.n_cells)
    first = sample.trajectory.start
    start[mdp.cell_index(first.row, first.col)] = 1.0
    horizon = max(1, cfg.horizon_factor * len(sample.trajectory))
    ep, eg = policy_propagation(mdp, solution.policy, start, horizon, cfg.discounting)
    gp, gg = medirl_grad(SvfPair(dp, dg, ep, eg))
    proxy = float(np.abs(gp).sum() + np.abs(gg).sum())
    return maps, cache, gp.reshape(mdp.rows, mdp.cols), gg.reshape(mdp.rows, mdp.cols), proxy


def _batch_contribution(model, mdp, batch, cfg, rng):
    """Accumulate gradients for a batch of labeled samples: one
    demonstration-ascent term per sample plus the ranking loss summed over
    every distinct-AEC cross pair (descended).  Returns
    (nll_proxy_sum, rank_loss_sum)."""
    items = []
    proxy_total = 0.0
    for sample in batch:
        maps, cache, gp, gg, proxy = _accumulate_demo_term(model, mdp, sample, cfg, rng)
        items.append(
            {
                "sample": sample,
                "cache": cache,
                "gp": gp,
                "gg": gg,
                "ret": path_return(maps.path, sample.trajectory),
                "rank_up": 0.0,
            }
        )
        proxy_total += proxy
    loss_total = 0.0
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            a, b = items[i], items[j]
            if a["sample"].trajectory.aec == b["sample"].trajectory.aec:
                continue
            lo, hi = (a, b) if a["sample"].trajectory.aec > b["sample"].trajectory.aec else (b, a)
            loss, d_lo, d_hi = ranking_loss(lo["ret"], hi["ret"])
            loss_total += loss
            lo["rank_up"] = lo["rank_up"] + d_lo * visit_map(
                lo["sample"].trajectory, mdp.rows, mdp.cols
            )
            hi["rank_up"] = hi["rank_up"] + d_hi * visit_map(
                hi["sample"].trajectory, mdp.rows, mdp.cols
            )
    for item in items:
        model.backward(item["gp"] - item["rank_up"], item["gg"], item["cache"])
    return proxy_total, loss_total


def medirl_step(model, sample, cfg: TrainConfig, mdp: GridMdp = None, rng=None,
                iteration: int = 0) -> IterRecord:
    """One demonstration-matching update on one sample."""
    if mdp is None:
        mdp = _mdp_for(model, cfg)
    t0 = time.perf_counter()
    model.params.zero_grad()
    try:
        _maps, cache, gp, gg, proxy = _accumulate_demo_term(model, mdp, sample, cfg, rng)
        model.backward(gp, gg, cache)
    except NumericError as err:
        raise NumericError(f"sample {getattr(sample, 'sample_id', '?')}: {err}") from err
    grad_norm = float(np.linalg.norm(model.params.grad))
    _abort_if_bad(grad_norm, iteration, sample)
    sgd_update(model.params, cfg.lr, cfg.weight_decay)
    return IterRecord(iteration, proxy, 0.0, grad_norm,
                      (time.perf_counter() - t0) * 1e3)


def tmedirl_step(model, low, high, cfg: TrainConfig, mdp: GridMdp = None, rng=None,
                 iteration: int = 0) -> IterRecord:
    """One ranked update on an oriented pair: ``high`` is the preferred
    (lower-AEC) trajectory."""
    if mdp is None:
        mdp = _mdp_for(model, cfg)
    t0 = time.perf_counter()
    model.params.zero_grad()
    try:
        proxy, loss = _batch_contribution(model, mdp, [low, high], cfg, rng)
    except NumericError as err:
        raise NumericError(
            f"samples {getattr(low, 'sample_id', '?')}/{getattr(high, 'sample_id', '?')}: {err}"
        ) from err
    grad_norm = float(np.linalg.norm(model.params.grad))
    _abort_if_bad(grad_norm, iteration, low)
    sgd_update(model.params, cfg.lr, cfg.weight_decay)
    return IterRecord(iteration, proxy, loss, grad_norm,
                      (time.perf_counter() - t0) * 1e3)


def tmedirl_batch_step(model, batch, cfg: TrainConfig, mdp: GridMdp = None, rng=None,
                       iteration: int = 0) -> IterRecord:
    """One ranked update on a batch of labeled samples with the ranking
    loss summed over all distinct-AEC cross pairs."""
    if mdp is None:
        mdp = _mdp_for(model, cfg)
    t0 = time.perf_counter()
    model.params.zero_grad()
    try:
        proxy, loss = _batch_contribution(model, mdp, batch, cfg, rng)
    except NumericError as err:
        ids = "/".join(str(getattr(s, "sample_id", "?")) for s in batch)
        raise NumericError(f"samples {ids}: {err}") from err
    grad_norm = float(np.linalg.norm(model.params.grad))
    _abort_if_bad(grad_norm, iteration, batch[0])
    sgd_update(model.params, cfg.lr, cfg.weight_decay)
    return IterRecord(iteration, proxy, loss, grad_norm,
                      (time.perf_counter() - t0) * 1e3)


def _abort_if_bad(grad_norm: float, iteration: int, sample) -> None:
    if not np.isfinite(grad_norm):
        raise NumericError(
            f"non-finite gradient norm at iteration {iteration} "
            f"(sample {getattr(sample, 'sample_id', '?')})"
        )


def _draw_pair(train, rng):
    """Seeded draw of a distinct-AEC pair, oriented (low, high)."""
    while True:
        i, j = rng.choice(len(train), size=2, replace=False)
        a, b = train[int(i)], train[int(j)]
        if a.trajectory.aec == b.trajectory.aec:
            continue
        return (a, b) if a.trajectory.aec > b.trajectory.aec else (b, a)


def _draw_batch(train, rng, size):
    """Seeded draw of ``size`` samples containing >= 2 distinct AECs."""
    size = min(size, len(train))
    while True:
        idx = rng.choice(len(train), size=size, replace=False)
        batch = [train[int(i)] for i in idx]
        if len({s.trajectory.aec for s in batch}) >= 2:
            return batch


def train(model, dataset, cfg: TrainConfig, checkpoint_dir=None):
    """Run the configured loop over the train split.

    Returns (params, TrainReport); the model is updated in place.  With a
    checkpoint directory and a positive cadence, checkpoints land in
    ``checkpoint_dir/ckpt_{iter:06d}.travckpt``.
    """
    train_split = [s for s in dataset if s.split == "train"]
    if not train_split:
        raise ConfigError("train split is empty")
    if cfg.algorithm == "tmedirl":
        aecs = [s.trajectory.aec for s in train_split]
        if any(a is None for a in aecs):
            raise ConfigError("tmedirl requires AEC labels on every training trajectory")
        if len(set(aecs)) < 2:
            raise ConfigError("tmedirl requires at least two distinct AEC values")

    mdp = _mdp_for(model, cfg)
    rng = np.random.default_rng(cfg.seed)
    report = TrainReport()
    for it in range(cfg.iterations):
        if cfg.algorithm == "medirl":
            sample = train_split[int(rng.integers(len(train_split)))]
            record = medirl_step(model, sample, cfg, mdp=mdp, rng=rng, iteration=it)
        elif cfg.rank_batch > 2:
            batch = _draw_batch(train_split, rng, cfg.rank_batch)
            record = tmedirl_batch_step(model, batch, cfg, mdp=mdp, rng=rng, iteration=it)
        elif cfg.pairs_per_iter == 1:
            low, high = _draw_pair(train_split, rng)
            record = tmedirl_step(model, low, high, cfg, mdp=mdp, rng=rng, iteration=it)
        else:
            t0 = time.perf_counter()
            model.params.zero_grad()
            proxy_total, loss_total = 0.0, 0.0
            for _ in range(cfg.pairs_per_iter):
                low, high = _draw_pair(train_split, rng)
                proxy, loss = _batch_contribution(model, mdp, [low, high], cfg, rng)
                proxy_total += proxy
                loss_total += loss
            grad_norm = float(np.linalg.norm(model.params.grad))
            _abort_if_bad(grad_norm, it, low)
            sgd_update(model.params, cfg.lr, cfg.weight_decay)
            record = IterRecord(it, proxy_total, loss_total, grad_norm,
                                (time.perf_counter() - t0) * 1e3)
        model.params.check_finite()
        report.records.append(record)
        if checkpoint_dir is not None and cfg.checkpoint_every > 0 and (it + 1) % cfg.checkpoint_every == 0:
            from .dataio import save_checkpoint

            save_checkpoint(f"{checkpoint_dir}/ckpt_{it + 1:06d}.travckpt", model, cfg.gamma)
    return model.params, report
