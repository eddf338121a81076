"""Operation counters backing the complexity assertions and the bench CLI.

Process-global and intentionally simple; reset before a measured region,
snapshot after.
"""

COUNTERS = {
    "topk_scans": 0,         # score entries scanned by top-k selection
    "pair_comparisons": 0,   # pairwise score comparisons relaxed by the sampler
    "attn_scores": 0,        # query-key score entries computed
    "set_enumerations": 0,   # candidate sets visited by the brute-force oracle
}


def bump(name, amount=1):
    COUNTERS[name] += int(amount)


def reset():
    for key in COUNTERS:
        COUNTERS[key] = 0


def snapshot():
    return dict(COUNTERS)
