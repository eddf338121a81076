"""Training and evaluation loops.

Minibatches are gradient-accumulated sample by sample (the core is
per-sequence), clipped, and stepped with AdamW under a warmup-cosine
schedule.  Sampler noise is on during training and off at evaluation;
graph positional noise stays on at evaluation from a fixed seed, so
repeated evaluations are bitwise identical.
"""

import csv
import json
import math
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .optim import AdamW, cosine_warmup_lr
from .rng import GumbelRng
from .tensor import no_grad, scale


class TrainingDiverged(RuntimeError):
    """Raised when the training loss stops being finite."""


@dataclass
class TrainConfig:
    steps: int = 2000
    batch_size: int = 32
    lr: float = 1e-3
    weight_decay: float = 0.01
    clip_norm: float = 2.0
    warmup_steps: int = 200
    eval_every: int = 50
    log_every: int = 10
    seed: int = 0
    early_stop_acc: float = 0.0   # stop once val accuracy reaches this; 0 disables


@dataclass
class MetricsRecord:
    step: int
    split: str
    loss: float
    metric: float       # accuracy for classifiers, MAE for regressors
    lr: float
    wall_ms: float
    tokens_per_s: float


def _sample_tokens(x):
    if hasattr(x, "n_nodes"):
        return x.n_nodes + x.n_edges
    return np.asarray(x).shape[0]


def evaluate(model, samples, seed=0):
    """Deterministic evaluation: sampler noise off, seeded positional noise."""
    model.eval()
    rng = GumbelRng(seed)
    total_loss = 0.0
    metric_acc = 0.0
    with no_grad():
        for x, y in samples:
            out = model.forward(x, rng=rng)
            total_loss += model.output_loss(out, y).item()
            pred = model.output_prediction(out)
            if model.cfg.head == "classify":
                metric_acc += float(pred == int(y))
            else:
                metric_acc += abs(pred - float(y))
    n = max(len(samples), 1)
    return total_loss / n, metric_acc / n


def train(model, splits, tcfg, metrics_path=None):
    """Run the loop; returns (records, summary dict)."""
    params = model.parameters()
    opt = AdamW(params, lr=tcfg.lr, weight_decay=tcfg.weight_decay,
                clip_norm=tcfg.clip_norm)
    noise = GumbelRng(tcfg.seed ^ 0x5EED)
    order = np.random.Generator(np.random.PCG64(tcfg.seed))
    train_samples = splits["train"]
    records = []
    best_val_metric = None
    val_loss = val_metric = float("nan")
    classify = model.cfg.head == "classify"

    step = 0
    stopped_early = False
    while step < tcfg.steps:
        step += 1
        lr = cosine_warmup_lr(step, tcfg.warmup_steps, tcfg.steps, tcfg.lr)
        batch_idx = order.integers(0, len(train_samples), size=tcfg.batch_size)
        model.train()
        opt.zero_grad()
        batch_loss = 0.0
        batch_tokens = 0
        t0 = time.perf_counter()
        for idx in batch_idx:
            x, y = train_samples[int(idx)]
            loss = model.loss(x, y, rng=noise)
            scale(loss, 1.0 / tcfg.batch_size).backward()
            batch_loss += loss.item() / tcfg.batch_size
            batch_tokens += _sample_tokens(x)
        if not math.isfinite(batch_loss):
            raise TrainingDiverged(f"non-finite loss {batch_loss} at step {step}")
        opt.step(lr)
        wall_ms = (time.perf_counter() - t0) * 1e3

        if step % tcfg.log_every == 0 or step == tcfg.steps:
            records.append(MetricsRecord(step, "train", batch_loss, float("nan"),
                                         lr, wall_ms,
                                         batch_tokens / max(wall_ms / 1e3, 1e-9)))
        if step % tcfg.eval_every == 0 or step == tcfg.steps:
            t1 = time.perf_counter()
            val_loss, val_metric = evaluate(model, splits["val"], seed=tcfg.seed)
            ms = (time.perf_counter() - t1) * 1e3
            records.append(MetricsRecord(step, "val", val_loss, val_metric, lr, ms, 0.0))
            if classify:
                best_val_metric = (val_metric if best_val_metric is None
                                   else max(best_val_metric, val_metric))
                if tcfg.early_stop_acc and val_metric >= tcfg.early_stop_acc:
                    stopped_early = True
                    break
            else:
                best_val_metric = (val_metric if best_val_metric is None
                                   else min(best_val_metric, val_metric))

    summary = {
        "steps_run": step,
        "stopped_early": stopped_early,
        "final_val_loss": val_loss,
        "final_val_metric": val_metric,
        "best_val_metric": best_val_metric,
        "metric_kind": "accuracy" if classify else "mae",
        "seed": tcfg.seed,
        "train_config": asdict(tcfg),
        "noise_draws": noise.draws,
    }
    if metrics_path:
        write_metrics_csv(records, metrics_path)
    return records, summary


def write_metrics_csv(records, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "split", "loss", "metric", "lr", "wall_ms", "tokens_per_s"])
        for r in records:
            writer.writerow([r.step, r.split, f"{r.loss:.8g}", f"{r.metric:.8g}",
                             f"{r.lr:.8g}", f"{r.wall_ms:.3f}", f"{r.tokens_per_s:.1f}"])


def write_summary_json(summary, path):
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
