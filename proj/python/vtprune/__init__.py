"""Vision-token pruning toolkit: text-guided scoring, pruning schedules,
attention-shift analytics, and an analytical FLOPs model."""

from ._core import (
    InfeasibleBudgetError,
    VtpruneError,
    __version__,
    cumulative_curve,
    decode_step_flops,
    detect_change_point,
    key_text_tokens,
    prefill_layer_flops,
    prune_overhead_flops,
    run_cost,
    schedule_averages,
    score_vision,
    simulate_attention,
    solve_schedule,
    text_prior,
    top_k_retain,
)

__all__ = [
    "InfeasibleBudgetError",
    "VtpruneError",
    "__version__",
    "cumulative_curve",
    "decode_step_flops",
    "detect_change_point",
    "key_text_tokens",
    "prefill_layer_flops",
    "prune_overhead_flops",
    "run_cost",
    "schedule_averages",
    "score_vision",
    "simulate_attention",
    "solve_schedule",
    "text_prior",
    "top_k_retain",
]
