"""Independent oracles: finite-difference gradient checking, Monte-Carlo
distribution checks, a sequential top-k reference, and complexity probes.

These never share code with the paths they validate: gradients come from
central differences, set selection from enumeration, distributions from a
sequential sampler, and complexity from wall-clock fits plus operation
counters.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import counters
from .rng import GumbelRng
from .tensor import Tensor, no_grad, precision


@dataclass
class GradCheckEntry:
    name: str
    max_abs_err: float
    max_rel_err: float
    checked: int
    skipped: int


@dataclass
class GradCheckReport:
    tolerance: float
    step: float
    entries: list = field(default_factory=list)
    evaluations: int = 0

    @property
    def max_rel_err(self):
        return max((e.max_rel_err for e in self.entries), default=0.0)

    @property
    def passed(self):
        return self.max_rel_err < self.tolerance

    def as_dict(self):
        return {
            "tolerance": self.tolerance,
            "step": self.step,
            "evaluations": self.evaluations,
            "max_rel_err": self.max_rel_err,
            "passed": bool(self.passed),
            "entries": [vars(e) for e in self.entries],
        }


def finite_diff_gradcheck(f, wrt, h=1e-5, tol=1e-4, numeric_fn=None, names=None):
    """Central differences of ``numeric_fn`` (default ``f``) against the
    analytic gradients of ``f``, per coordinate of every tensor in ``wrt``.

    ``f`` must be a no-argument callable returning a scalar Tensor built
    from the (shared) tensors in ``wrt``; noise must be frozen.  For
    straight-through operators pass the soft forward as ``numeric_fn``.
    Inputs must be float64; entries where both gradients are below 1e-8 in
    magnitude are skipped, the rest use max(|analytic|, |numeric|, 1e-8) as
    the relative denominator.
    """
    if numeric_fn is None:
        numeric_fn = f
    for t in wrt:
        if t.dtype != np.float64:
            raise ValueError("gradcheck requires float64 inputs; wrap in precision(64)")
    report = GradCheckReport(tolerance=tol, step=h)

    with no_grad():
        base0 = np.array(numeric_fn().data)
        base1 = np.array(numeric_fn().data)
    report.evaluations += 2
    if not np.array_equal(base0, base1):
        raise ValueError("non-deterministic function: two baseline evaluations differ")

    for t in wrt:
        t.zero_grad()
        t.requires_grad = True
    out = f()
    report.evaluations += 1
    out.backward()
    analytic = [np.array(t.grad) if t.grad is not None else np.zeros_like(t.data)
                for t in wrt]

    for which, t in enumerate(wrt):
        flat = t.data.reshape(-1)
        num = np.zeros_like(flat)
        with no_grad():
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                fp = float(numeric_fn().data)
                flat[i] = orig - h
                fm = float(numeric_fn().data)
                flat[i] = orig
                report.evaluations += 2
                num[i] = (fp - fm) / (2.0 * h)
        ana = analytic[which].reshape(-1)
        max_abs = 0.0
        max_rel = 0.0
        checked = skipped = 0
        for a, n in zip(ana, num):
            if abs(a) + abs(n) <= 1e-8:
                skipped += 1
                continue
            checked += 1
            err = abs(a - n)
            max_abs = max(max_abs, err)
            max_rel = max(max_rel, err / max(abs(a), abs(n), 1e-8))
        name = names[which] if names else f"input{which}"
        report.entries.append(GradCheckEntry(name, max_abs, max_rel, checked, skipped))
    return report


def sequential_gumbel_topk(z, k, rng):
    """Reference sampler: k sequential Gumbel-max draws without replacement.

    Kept only as a distribution oracle; it is sequential by construction.
    """
    z = np.asarray(z, dtype=np.float64)
    remaining = list(range(z.shape[0]))
    picks = []
    for _ in range(k):
        noised = z[remaining] + rng.gumbel((len(remaining),))
        best = int(np.argmax(noised))
        picks.append(remaining.pop(best))
    return picks


def multinomial_3sigma_ok(freqs, probs, draws):
    """Every empirical frequency within 3 binomial standard errors."""
    freqs = np.asarray(freqs, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    bound = 3.0 * np.sqrt(probs * (1.0 - probs) / draws)
    return bool(np.all(np.abs(freqs - probs) <= bound))


def distribution_probe(z, draws=100_000, seed=0, k=1):
    """Selection frequencies of the parallel hard sampler vs softmax(z), and
    top-pick marginals vs the sequential reference."""
    from .sampler import sample_without_replacement

    if draws < 10_000:
        raise ValueError(f"need at least 1e4 draws for stable frequencies, got {draws}")
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    rng = GumbelRng(seed)
    hits = np.zeros(n, dtype=np.int64)
    x = Tensor(np.eye(n, dtype=np.float64))
    with no_grad(), precision(64):
        for _ in range(draws):
            noised = Tensor(z + rng.gumbel((n,)), dtype=np.float64)
            result = sample_without_replacement(noised, x, k, mode="hard",
                                                locality="full")
            hits[result.indices[0]] += 1
    freqs = hits / draws
    exp_z = np.exp(z - z.max())
    probs = exp_z / exp_z.sum()

    seq_rng = GumbelRng(seed + 1)
    seq_hits = np.zeros(n, dtype=np.int64)
    for _ in range(draws):
        picks = sequential_gumbel_topk(z, min(k, n), seq_rng)
        seq_hits[picks[0]] += 1
    seq_freqs = seq_hits / draws
    return {
        "draws": draws,
        "frequencies": freqs.tolist(),
        "softmax": probs.tolist(),
        "within_3sigma": multinomial_3sigma_ok(freqs, probs, draws),
        "sequential_frequencies": seq_freqs.tolist(),
        "max_marginal_gap": float(np.abs(freqs - seq_freqs).max()),
    }


def complexity_probe(forward, n_grid, repeats=3, warmup=1):
    """Median wall time per n plus a log-log least-squares exponent.

    ``forward`` takes n and runs one full pass; operation counters are
    snapshotted around each timed call.
    """
    rows = []
    for n in n_grid:
        for _ in range(warmup):
            forward(n)
        times = []
        ops = None
        for _ in range(repeats):
            counters.reset()
            t0 = time.perf_counter()
            forward(n)
            times.append(time.perf_counter() - t0)
            ops = counters.snapshot()
        times.sort()
        rows.append({
            "n": int(n),
            "median_s": times[len(times) // 2],
            "times_s": times,
            "ops": ops,
        })
    ns = np.log([r["n"] for r in rows])
    ts = np.log([r["median_s"] for r in rows])
    exponent = float(np.polyfit(ns, ts, 1)[0])
    return {"rows": rows, "exponent": exponent}
