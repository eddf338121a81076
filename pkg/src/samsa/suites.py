"""Check suites shared by the CLI and the test suite.

``PRIMITIVE_CASES`` maps every registered operator to a gradcheck case;
coverage is enforced by the tests, so an operator without a case fails CI.
The sweeps and benches here are thin drivers over ``verify``.
"""

import time

import numpy as np

from .attention import AttentionConfig, Model, ModelConfig, init_layer_params
from .graph import GraphInstance, GraphTokenizer
from .kernels import BACKEND, available_backends
from .rng import GumbelRng
from .sampler import arg_topk, brute_force_set_sample, sample_without_replacement
from .tensor import (
    Tensor,
    add,
    concat_cols,
    concat_rows,
    cross_entropy_logits,
    gather_rows,
    gelu,
    matmul,
    mul,
    neg,
    no_grad,
    outer_difference,
    powi,
    reduce_sum,
    reshape,
    scale,
    scale_rows,
    sigmoid,
    slice_cols,
    smooth_l1,
    softmax_lastdim,
    straight_through,
    transpose,
)
from .verify import complexity_probe, finite_diff_gradcheck


def _rand(gen, shape, lo=-2.0, hi=2.0):
    return Tensor(gen.uniform(lo, hi, size=shape), dtype=np.float64)


def _frozen_ws(shape, gen):
    # weighted-sum readout with a frozen weighting, so grads are non-uniform
    w = Tensor(gen.uniform(-1.0, 1.0, size=shape), dtype=np.float64)
    return lambda t: reduce_sum(mul(t, w))


def _build_primitive_cases(seed=0):
    gen = np.random.default_rng(seed)
    cases = {}

    a, b = _rand(gen, (3, 2)), _rand(gen, (2,))
    ws = _frozen_ws((3, 2), gen)
    cases["add"] = dict(f=lambda a=a, b=b, ws=ws: ws(add(a, b)), wrt=[a, b])

    a, b = _rand(gen, (3, 2)), _rand(gen, (2,))
    ws = _frozen_ws((3, 2), gen)
    cases["mul"] = dict(f=lambda a=a, b=b, ws=ws: ws(mul(a, b)), wrt=[a, b])

    a = _rand(gen, (4,))
    ws = _frozen_ws((4,), gen)
    cases["neg"] = dict(f=lambda a=a, ws=ws: ws(neg(a)), wrt=[a])

    a = _rand(gen, (3,))
    ws = _frozen_ws((3,), gen)
    cases["scale"] = dict(f=lambda a=a, ws=ws: ws(scale(a, 1.7)), wrt=[a])

    a = _rand(gen, (3,), lo=0.5, hi=2.0)
    ws = _frozen_ws((3,), gen)
    cases["pow"] = dict(f=lambda a=a, ws=ws: ws(powi(a, 1.5)), wrt=[a])

    a, b = _rand(gen, (3, 4)), _rand(gen, (4, 2))
    ws = _frozen_ws((3, 2), gen)
    cases["matmul"] = dict(f=lambda a=a, b=b, ws=ws: ws(matmul(a, b)), wrt=[a, b])

    a = _rand(gen, (3, 4))
    ws = _frozen_ws((4, 3), gen)
    cases["transpose"] = dict(f=lambda a=a, ws=ws: ws(transpose(a)), wrt=[a])

    a = _rand(gen, (6,))
    ws = _frozen_ws((2, 3), gen)
    cases["reshape"] = dict(f=lambda a=a, ws=ws: ws(reshape(a, (2, 3))), wrt=[a])

    a = _rand(gen, (5,))
    ws = _frozen_ws((5,), gen)
    cases["sigmoid"] = dict(f=lambda a=a, ws=ws: ws(sigmoid(a)), wrt=[a])

    a = _rand(gen, (5,))
    ws = _frozen_ws((5,), gen)
    cases["gelu"] = dict(f=lambda a=a, ws=ws: ws(gelu(a)), wrt=[a])

    a = _rand(gen, (2, 4))
    ws = _frozen_ws((2, 4), gen)
    cases["softmax_lastdim"] = dict(f=lambda a=a, ws=ws: ws(softmax_lastdim(a)), wrt=[a])

    a = _rand(gen, (3, 2))
    ws = _frozen_ws((3,), gen)
    cases["reduce_sum"] = dict(f=lambda a=a, ws=ws: ws(reduce_sum(a, axis=1)), wrt=[a])

    a = _rand(gen, (5, 3))
    idx = np.array([2, 0, 2])
    ws = _frozen_ws((3, 3), gen)
    cases["gather_rows"] = dict(f=lambda a=a, ws=ws: ws(gather_rows(a, idx)), wrt=[a])

    a, b = _rand(gen, (2, 3)), _rand(gen, (3, 3))
    ws = _frozen_ws((5, 3), gen)
    cases["concat_rows"] = dict(f=lambda a=a, b=b, ws=ws: ws(concat_rows([a, b])),
                                wrt=[a, b])

    a, b = _rand(gen, (3, 2)), _rand(gen, (3, 3))
    ws = _frozen_ws((3, 5), gen)
    cases["concat_cols"] = dict(f=lambda a=a, b=b, ws=ws: ws(concat_cols([a, b])),
                                wrt=[a, b])

    a = _rand(gen, (3, 5))
    ws = _frozen_ws((3, 3), gen)
    cases["slice_cols"] = dict(f=lambda a=a, ws=ws: ws(slice_cols(a, 1, 4)), wrt=[a])

    a, b = _rand(gen, (3,)), _rand(gen, (4,))
    ws = _frozen_ws((3, 4), gen)
    cases["outer_difference"] = dict(f=lambda a=a, b=b, ws=ws: ws(outer_difference(a, b)),
                                     wrt=[a, b])

    a, s = _rand(gen, (3, 4)), _rand(gen, (3,))
    ws = _frozen_ws((3, 4), gen)
    cases["scale_rows"] = dict(f=lambda a=a, s=s, ws=ws: ws(scale_rows(a, s)), wrt=[a, s])

    a = _rand(gen, (5,))
    ws = _frozen_ws((5,), gen)
    hard = (a.data > 0).astype(np.float64)
    cases["straight_through"] = dict(
        f=lambda a=a, ws=ws, hard=hard: ws(straight_through(hard, sigmoid(a))),
        numeric_fn=lambda a=a, ws=ws: ws(sigmoid(a)),
        wrt=[a])

    logits = _rand(gen, (5,))
    cases["cross_entropy_logits"] = dict(
        f=lambda logits=logits: cross_entropy_logits(logits, 2), wrt=[logits])

    pred = Tensor(np.array([-1.8, -0.4, 0.3, 1.9]), dtype=np.float64)
    target = np.zeros(4)
    cases["smooth_l1"] = dict(f=lambda pred=pred: smooth_l1(pred, target), wrt=[pred])

    return cases


PRIMITIVE_CASE_NAMES = tuple(sorted(_build_primitive_cases(0).keys()))


def _sampler_case(n, k, seed, mode):
    gen = np.random.default_rng(seed)
    z = Tensor(gen.uniform(-2.0, 2.0, size=(n,)), dtype=np.float64)
    X = Tensor(gen.uniform(-2.0, 2.0, size=(n, 3)), dtype=np.float64)
    w = Tensor(gen.uniform(-1.0, 1.0, size=(k, 3)), dtype=np.float64)

    def run(which):
        res = sample_without_replacement(z, X, k, mode=which, locality="truncated",
                                         tau=1.0, noisy=False)
        return reduce_sum(mul(res.rows, w))

    case = dict(f=lambda: run(mode), wrt=[z, X], names=["z", "X"])
    if mode == "hard":
        case["numeric_fn"] = lambda: run("soft")
    return case


def _graph_case(seed):
    gen = np.random.default_rng(seed)
    graph = GraphInstance(
        gen.standard_normal((4, 3)),
        np.array([[0, 1], [1, 0], [1, 2], [2, 3]]),
        gen.standard_normal((4, 2)),
    )
    tokenizer = GraphTokenizer(3, 2, 6, gen)
    noise = gen.standard_normal((4, 6))
    w = Tensor(gen.uniform(-1.0, 1.0, size=(8, 6)), dtype=np.float64)
    params = tokenizer.parameters()
    wrt = [params[name] for name in ("sigma", "phi.w1", "phi.b2", "phi_v.w1",
                                     "phi_e.w1", "phi_e.b2")]
    names = ["sigma", "phi.w1", "phi.b2", "phi_v.w1", "phi_e.w1", "phi_e.b2"]

    def f():
        batch = tokenizer.tokenize(graph, noise=noise)
        return reduce_sum(mul(batch.tokens, w))

    return dict(f=f, wrt=wrt, names=names)


def _model_case(seed):
    gen = np.random.default_rng(seed)
    layer = AttentionConfig(d_model=8, n_heads=2, k=2, d_ffn=16, mode="soft",
                            locality="truncated")
    mcfg = ModelConfig(attention="samsa", depth=2, layer=layer, embed="features",
                       in_dim=3, n_out=3, head="classify")
    model = Model(mcfg, seed=seed)
    model.eval()
    # central differences need signal well above fp noise and selection
    # margins well above the step size; the tiny training init gives
    # neither, so rescale every parameter for the check
    params = model.parameters()
    for name, p in params.items():
        if name.endswith(("gain_attn", "gain_ffn")):
            p.data = gen.uniform(0.7, 1.3, size=p.shape)
        else:
            p.data = gen.uniform(-0.6, 0.6, size=p.shape)
    model.alpha.data = np.asarray(0.5, dtype=np.float64)
    x = gen.standard_normal((6, 3))
    wrt = list(params.values())
    names = list(params.keys())
    return dict(f=lambda: model.loss(x, 1), wrt=wrt, names=names)


def gradcheck_suite(target="all", n=16, k=4, seed=0, h=1e-5, tol=1e-4):
    """Run the named gradcheck group(s); returns name -> GradCheckReport."""
    reports = {}
    if target in ("all", "primitives"):
        for name, case in _build_primitive_cases(seed).items():
            reports[f"primitive.{name}"] = finite_diff_gradcheck(
                case["f"], case["wrt"], h=h, tol=tol,
                numeric_fn=case.get("numeric_fn"), names=case.get("names"))
    if target in ("all", "sampler-soft"):
        case = _sampler_case(n, k, seed, "soft")
        reports["sampler-soft"] = finite_diff_gradcheck(
            case["f"], case["wrt"], h=h, tol=tol, names=case["names"])
    if target in ("all", "sampler-hard"):
        case = _sampler_case(n, k, seed, "hard")
        reports["sampler-hard"] = finite_diff_gradcheck(
            case["f"], case["wrt"], h=h, tol=tol,
            numeric_fn=case["numeric_fn"], names=case["names"])
    if target in ("all", "graph"):
        case = _graph_case(seed)
        reports["graph"] = finite_diff_gradcheck(
            case["f"], case["wrt"], h=h, tol=tol, names=case["names"])
    if target in ("all", "model"):
        case = _model_case(seed)
        reports["model"] = finite_diff_gradcheck(
            case["f"], case["wrt"], h=h, tol=tol, names=case["names"])
    if not reports:
        raise ValueError(f"unknown gradcheck target {target!r}")
    return reports


def oracle_sweep(n_max=12, k_max=6, trials=500, seed=0):
    """arg_topk vs brute-force enumeration on random continuous scores."""
    gen = np.random.default_rng(seed)
    agreements = 0
    for _ in range(trials):
        n = int(gen.integers(2, n_max + 1))
        k = int(gen.integers(1, min(k_max, n) + 1))
        z = gen.standard_normal(n)
        X = gen.standard_normal((n, 2))
        fast = set(int(i) for i in arg_topk(z, k))
        best_set, _rows = brute_force_set_sample(z, X, k)
        if fast == set(best_set):
            agreements += 1
    return {"trials": trials, "agreements": agreements,
            "n_max": n_max, "k_max": k_max, "seed": seed}


def _bench_layer_forward(attention, cfg, seed):
    from .attention import full_attention_layer_forward, samsa_layer_forward

    gen = np.random.default_rng(seed)
    alpha = Tensor(np.asarray(0.3, dtype=np.float32), requires_grad=True)
    params = init_layer_params(cfg, gen, alpha)
    fn = samsa_layer_forward if attention == "samsa" else full_attention_layer_forward
    inputs = {}

    def forward(n):
        if n not in inputs:
            inputs[n] = Tensor(gen.standard_normal((n, cfg.d_model)), dtype=np.float32)
        with no_grad():
            fn(inputs[n], params, cfg, training=False)

    return forward


def bench_models(sizes, k=128, d_model=64, heads=4, depth=1, repeats=3,
                 compare_full=True, seed=0):
    """Wall-time table over n for hard/soft sampling and full attention."""
    report = {"k": k, "d_model": d_model, "heads": heads, "sizes": list(sizes),
              "kernel_backend": BACKEND, "variants": {}}
    variants = [("samsa-hard", "samsa", "hard"), ("samsa-soft", "samsa", "soft")]
    if compare_full:
        variants.append(("full", "full", "hard"))
    for name, attention, mode in variants:
        cfg = AttentionConfig(d_model=d_model, n_heads=heads, k=k, d_ffn=2 * d_model,
                              mode=mode, locality="truncated")
        forward = _bench_layer_forward(attention, cfg, seed)
        report["variants"][name] = complexity_probe(forward, sizes, repeats=repeats)
    hard = report["variants"]["samsa-hard"]
    soft = report["variants"]["samsa-soft"]
    ratios = {"soft_over_hard": [
        s["median_s"] / h["median_s"] for s, h in zip(soft["rows"], hard["rows"])]}
    if compare_full:
        full = report["variants"]["full"]
        ratios["full_over_hard"] = [
            f["median_s"] / h["median_s"] for f, h in zip(full["rows"], hard["rows"])]
        ratios["full_over_soft"] = [
            f["median_s"] / s["median_s"] for f, s in zip(full["rows"], soft["rows"])]
    report["ratios"] = ratios
    return report


def bench_kernels(repeats=3, seed=0, n=1 << 19, k=512, rows=1 << 16, width=64):
    """Compiled vs numpy kernels on the selection and scatter hot paths."""
    gen = np.random.default_rng(seed)
    z = gen.standard_normal(n).astype(np.float64)
    idx = gen.integers(0, rows, size=rows).astype(np.intp)
    src = gen.standard_normal((rows, width))
    out = {"selected_backend": BACKEND, "n": n, "k": k, "rows": rows, "kernels": {}}
    for name, impl in available_backends().items():
        acc = np.zeros((rows, width))
        topk_times, scatter_times = [], []
        for _ in range(repeats):
            t0 = time.perf_counter()
            impl.topk_indices(z, k)
            topk_times.append(time.perf_counter() - t0)
            t0 = time.perf_counter()
            impl.scatter_add_rows(acc, idx, src)
            scatter_times.append(time.perf_counter() - t0)
        out["kernels"][name] = {
            "topk_median_s": sorted(topk_times)[len(topk_times) // 2],
            "scatter_median_s": sorted(scatter_times)[len(scatter_times) // 2],
        }
    return out


def baseline_parity(steps=500, seed=0, n=64, vocab=8):
    """Train hard sampling with k = n (supports deprioritized) next to full
    attention from identical weights, all stochastic regularizers off; their
    attention inputs coincide, so losses should track closely."""
    from .tasks import TaskSpec, generate_task, task_model_settings, task_n_out
    from .train import TrainConfig, train

    spec = TaskSpec(kind="seq-select", n=n, vocab=vocab, n_train=512, n_val=64,
                    n_test=64, seed=seed)
    splits = generate_task(spec)
    losses = {}
    for attention in ("samsa", "full"):
        layer = AttentionConfig(d_model=32, n_heads=2, k=n, d_ffn=64, mode="hard",
                                locality="truncated", outer_noise=False,
                                pair_noise=False)
        settings = task_model_settings("seq-select", vocab=vocab)
        mcfg = ModelConfig(attention=attention, depth=1, layer=layer,
                           n_out=task_n_out("seq-select", vocab=vocab), **settings)
        model = Model(mcfg, seed=seed)
        for i in range(mcfg.depth):
            # push support scores far below any realistic token score
            model.layers[i].z_supp.data = np.full_like(
                model.layers[i].z_supp.data, -1e4)
        tcfg = TrainConfig(steps=steps, batch_size=8, lr=1e-3, warmup_steps=50,
                           eval_every=steps, log_every=steps, seed=seed)
        _records, summary = train(model, splits, tcfg)
        losses[attention] = summary["final_val_loss"]
    return losses
