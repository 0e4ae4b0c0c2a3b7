"""Block-structured connectivity masks and the cost model they imply.

Partitioning the graph's N nodes by layers partitions the N x N weight
matrix into blocks; each named connection kind selects a family of
blocks. ``forward`` alone reproduces the layerwise mask of a feedforward
stack, and the remaining kinds add skip, backward, lateral, and self
connections up to the full matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable

import numpy as np

from .core import Array, LayerSpec, layer_slices

# Multiply-add pairs per unmasked weight per inference step: one for the
# prediction product W a and one for the gradient backflow W.T u.
MADDS_PER_EDGE_PER_STEP = 2


class ConnectionKind(Enum):
    """Named families of weight-matrix blocks under a layer partition."""

    FORWARD = "forward"              # blocks (l, l-1)
    FORWARD_SKIP = "forward_skip"    # blocks (l, k), k <= l-2
    BACKWARD = "backward"            # blocks (l, l+1)
    BACKWARD_SKIP = "backward_skip"  # blocks (l, k), k >= l+2
    LATERAL = "lateral"              # within-layer, off-diagonal
    SELF_LOOP = "self_loop"          # the diagonal
    ALL_TO_ALL = "all_to_all"        # everything except the diagonal


def parse_kinds(kinds: Iterable[ConnectionKind | str]) -> tuple[ConnectionKind, ...]:
    """Normalize kind names to enum members, deduplicated, in enum order."""
    parsed = set()
    for kind in kinds:
        if isinstance(kind, ConnectionKind):
            parsed.add(kind)
            continue
        try:
            parsed.add(ConnectionKind(str(kind)))
        except ValueError:
            valid = ", ".join(k.value for k in ConnectionKind)
            raise ValueError(f"unknown connection kind {kind!r}; valid: {valid}") from None
    return tuple(k for k in ConnectionKind if k in parsed)


def build_mask(layers: LayerSpec, kinds: Iterable[ConnectionKind | str]) -> Array:
    """Union of the block patterns selected by ``kinds`` (boolean N x N)."""
    kinds = parse_kinds(kinds)
    if not kinds:
        raise ValueError("at least one connection kind is required")
    n = layers.n_nodes
    slices = layer_slices(layers)
    n_layers = len(slices)
    mask = np.zeros((n, n), dtype=bool)

    def fill_blocks(selector):
        for l in range(n_layers):
            for k in range(n_layers):
                if selector(l, k):
                    mask[slices[l], slices[k]] = True

    for kind in kinds:
        if kind is ConnectionKind.FORWARD:
            fill_blocks(lambda l, k: k == l - 1)
        elif kind is ConnectionKind.FORWARD_SKIP:
            fill_blocks(lambda l, k: k <= l - 2)
        elif kind is ConnectionKind.BACKWARD:
            fill_blocks(lambda l, k: k == l + 1)
        elif kind is ConnectionKind.BACKWARD_SKIP:
            fill_blocks(lambda l, k: k >= l + 2)
        elif kind is ConnectionKind.LATERAL:
            lateral = np.zeros((n, n), dtype=bool)
            for s in slices:
                lateral[s, s] = True
            np.fill_diagonal(lateral, False)
            mask |= lateral
        elif kind is ConnectionKind.SELF_LOOP:
            np.fill_diagonal(mask, True)
        elif kind is ConnectionKind.ALL_TO_ALL:
            full = np.ones((n, n), dtype=bool)
            np.fill_diagonal(full, False)
            mask |= full
    return mask


@dataclass(frozen=True)
class CostReport:
    """Operation counts implied by a mask and a step budget.

    ``dense_ops`` is the N^2-per-step cost of evaluating the full matrix,
    ``sparse_ops`` the d-per-step cost over the d unmasked weights (times
    the per-edge madd factor). ``fnn_ops`` is the single-pass feedforward
    cost L*M, with M the largest consecutive-layer block; it covers only
    the forward portion of the mask and is None when no layer partition
    is supplied.
    """

    n_nodes: int
    n_edges: int
    steps: int
    dense_ops: int
    sparse_ops: int
    fnn_ops: int | None
    madd_factor: int = MADDS_PER_EDGE_PER_STEP


def cost_report(mask: Array, steps: int, layers: LayerSpec | None = None) -> CostReport:
    """Account for the work of ``steps`` inference steps over ``mask``."""
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2 or mask.shape[0] != mask.shape[1]:
        raise ValueError(f"mask must be square, got {mask.shape}")
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    n = mask.shape[0]
    d = int(mask.sum())
    fnn_ops = None
    if layers is not None:
        if layers.n_nodes != n:
            raise ValueError(f"partition covers {layers.n_nodes} nodes, mask has {n}")
        sizes = layers.sizes
        largest_block = max(sizes[l] * sizes[l + 1] for l in range(layers.depth))
        fnn_ops = layers.depth * largest_block
    return CostReport(
        n_nodes=n,
        n_edges=d,
        steps=steps,
        dense_ops=n * n * steps,
        sparse_ops=d * steps * MADDS_PER_EDGE_PER_STEP,
        fnn_ops=fnn_ops,
    )
