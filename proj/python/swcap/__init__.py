"""Python bindings for the swcap captioner core."""

from swcap._core import (
    Captioner,
    SwcapError,
    bleu,
    cider_d,
    cyclic_shift,
    generate_synthetic,
    init_checkpoint,
    rouge_l,
    score,
    tokenize,
    window_merge,
    window_partition,
)

__all__ = [
    "Captioner",
    "SwcapError",
    "bleu",
    "cider_d",
    "cyclic_shift",
    "generate_synthetic",
    "init_checkpoint",
    "rouge_l",
    "score",
    "tokenize",
    "window_merge",
    "window_partition",
]
