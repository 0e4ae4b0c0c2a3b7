"""Numeric verification suites runnable from the CLI.

Four suites, each a list of named checks with hard tolerances:

    theorem1   testing-phase inference of a layered model reproduces the
               feedforward pass: exactly via the backward-substitution
               solver, and to tight tolerance via gradient descent.
    theorem2   the hierarchical embedding of a layered model into a graph
               preserves the energy up to the clamped-input constant and
               produces identical per-step activation and weight updates.
    gradients  every closed-form gradient (layered/graph x activation/
               weight, both conventions) matches central finite
               differences of the energy.
    cost       sparse inference executes exactly d * 2 multiply-adds per
               step, matching the cost report, and mask construction is
               consistent and monotone.

Checks never raise on failure; they return results so a runner can report
every outcome and exit nonzero if anything failed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fnn, pcg, pcn
from .core import (
    CONVENTIONS,
    MATRIX_ACTIVATION,
    TESTING,
    TRAINING,
    LayerSpec,
    MaddCounter,
    activation,
    flatten_activations,
    layer_slices,
)
from .pcn import InferenceConfig
from .topology import ConnectionKind, build_mask, cost_report
from .training import init_weights

SUITE_NAMES = ("theorem1", "theorem2", "gradients", "cost")


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def format_report(results: list[CheckResult]) -> str:
    lines = [r.line() for r in results]
    failed = sum(not r.passed for r in results)
    lines.append(
        f"{len(results) - failed}/{len(results)} checks passed"
        + (f" ({failed} FAILED)" if failed else "")
    )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Random instances
# ---------------------------------------------------------------------------

def _rng(seed, *extra) -> np.random.Generator:
    return np.random.default_rng([int(seed), *map(int, extra)])


def random_pcn(rng, max_depth=4, max_width=16, act_names=("tanh", "sigmoid"),
               conventions=CONVENTIONS, index=0) -> pcn.PcnModel:
    """Seeded layered model with spectrally normalized Gaussian weights.

    The ``1/(sqrt(m) + sqrt(n))`` scaling keeps every weight matrix near
    unit spectral norm regardless of its aspect ratio, which keeps the
    iterative checks well conditioned. Activation and convention cycle
    with ``index`` so a batch of instances covers every combination.
    """
    depth = int(rng.integers(2, max_depth + 1))
    sizes = tuple(int(n) for n in rng.integers(2, max_width + 1, size=depth + 1))
    layers = LayerSpec(sizes)
    weights = [
        rng.standard_normal((sizes[l + 1], sizes[l]))
        / (np.sqrt(sizes[l + 1]) + np.sqrt(sizes[l]))
        for l in range(depth)
    ]
    act = activation(act_names[index % len(act_names)])
    conv = conventions[(index // len(act_names)) % len(conventions)]
    return pcn.PcnModel(layers, tuple(weights), act, conv)


def random_pcn_state(model: pcn.PcnModel, rng, clamp: str) -> pcn.PcnState:
    acts = [rng.standard_normal(n) for n in model.layers.sizes]
    return pcn.PcnState(acts, clamp)


_KIND_MIXTURES = (
    (ConnectionKind.FORWARD,),
    (ConnectionKind.FORWARD, ConnectionKind.FORWARD_SKIP),
    (ConnectionKind.FORWARD, ConnectionKind.BACKWARD),
    (ConnectionKind.FORWARD, ConnectionKind.LATERAL),
    (ConnectionKind.FORWARD, ConnectionKind.BACKWARD_SKIP, ConnectionKind.SELF_LOOP),
    (ConnectionKind.ALL_TO_ALL,),
)


def random_pcg(rng, index=0, act_names=("tanh", "sigmoid")) -> tuple[pcg.PcgModel, LayerSpec]:
    """Seeded graph model over a random partition and connection mixture."""
    depth = int(rng.integers(2, 4))
    sizes = tuple(int(n) for n in rng.integers(2, 7, size=depth + 1))
    layers = LayerSpec(sizes)
    kinds = _KIND_MIXTURES[index % len(_KIND_MIXTURES)]
    act = act_names[index % len(act_names)]
    conv = CONVENTIONS[(index // 2) % 2]
    model = init_weights(layers, kinds, act, conv, rng=rng)
    return model, layers


# ---------------------------------------------------------------------------
# Finite-difference oracles
# ---------------------------------------------------------------------------

FD_STEP = 1e-5


def _relative_error(analytic, reference) -> float:
    analytic = np.concatenate([np.ravel(g) for g in analytic])
    reference = np.concatenate([np.ravel(g) for g in reference])
    scale = max(float(np.max(np.abs(reference))), 1e-12)
    return float(np.max(np.abs(analytic - reference))) / scale


def fd_pcn_activation_gradients(model, state, h=FD_STEP):
    """Central differences of the energy over the free layers."""
    free = range(1, model.layers.depth) if state.clamp == TRAINING \
        else range(1, model.layers.depth + 1)
    grads = []
    for l in free:
        g = np.zeros_like(state.activations[l])
        for i in range(g.size):
            acts = [a.copy() for a in state.activations]
            acts[l][i] += h
            e_plus = pcn.energy(model, pcn.PcnState(acts, state.clamp))
            acts[l][i] -= 2 * h
            e_minus = pcn.energy(model, pcn.PcnState(acts, state.clamp))
            g[i] = (e_plus - e_minus) / (2 * h)
        grads.append(g)
    return grads


def fd_pcn_weight_gradients(model, state, h=FD_STEP):
    """Central differences of the energy over every weight entry."""
    grads = []
    for l, w in enumerate(model.weights):
        g = np.zeros_like(w)
        for (i, j), _ in np.ndenumerate(w):
            for sign in (1.0, -1.0):
                perturbed = [np.array(m) for m in model.weights]
                perturbed[l][i, j] += sign * h
                bumped = pcn.PcnModel(model.layers, tuple(perturbed),
                                      model.activation, model.convention)
                g[i, j] += sign * pcn.energy(bumped, state)
            g[i, j] /= 2 * h
        grads.append(g)
    return grads


def fd_pcg_activation_gradient(model, state, h=FD_STEP):
    """Central differences over the unclamped nodes (zeros elsewhere)."""
    fixed = pcg.clamp_mask(model, state.clamp)
    g = np.zeros(model.n_nodes)
    for i in np.flatnonzero(~fixed):
        a = state.activations.copy()
        a[i] += h
        e_plus = pcg.energy(model, pcg.PcgState(a, state.clamp), "dense")
        a[i] -= 2 * h
        e_minus = pcg.energy(model, pcg.PcgState(a, state.clamp), "dense")
        g[i] = (e_plus - e_minus) / (2 * h)
    return g


def fd_pcg_weight_gradient(model, state, h=FD_STEP):
    """Central differences over the unmasked weights (zeros elsewhere)."""
    g = np.zeros_like(model.weights)
    rows, cols = np.nonzero(model.mask)
    for i, j in zip(rows, cols):
        for sign in (1.0, -1.0):
            w = np.array(model.weights)
            w[i, j] += sign * h
            bumped = pcg.PcgModel(w, model.mask, model.activation,
                                  model.convention, model.n_in, model.n_out)
            g[i, j] += sign * pcg.energy(bumped, state, "dense")
        g[i, j] /= 2 * h
    return g


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------

def _theorem1_instance(seed: int, i: int):
    rng = _rng(seed, 1, i)
    model = random_pcn(rng, index=i)
    x = rng.standard_normal(model.layers.n_in)
    return model, x


def exact_equivalence_check(seed: int = 0, instances: int = 50) -> CheckResult:
    """The exact testing solver reproduces the forward pass bit-for-bit."""
    exact_ok = 0
    for i in range(instances):
        model, x = _theorem1_instance(seed, i)
        reference = fnn.forward(pcn.to_fnn(model), x)
        solved = pcn.infer(model, x, config=InferenceConfig(solver="exact"))
        exact_ok += all(
            a.tobytes() == b.tobytes()
            for a, b in zip(solved.activations, reference)
        )
    return CheckResult(
        "exact solver reproduces the forward pass bit-for-bit",
        exact_ok == instances,
        f"{exact_ok}/{instances} instances identical",
    )


def descent_equivalence_check(seed: int = 0, instances: int = 50) -> CheckResult:
    """Testing-phase gradient descent converges to the forward pass."""
    worst_dev = 0.0
    worst_energy = 0.0
    descent = InferenceConfig(max_steps=2000, step_size=0.05,
                              stop_tolerance=1e-9, init="zero")
    for i in range(instances):
        model, x = _theorem1_instance(seed, i)
        reference = fnn.forward(pcn.to_fnn(model), x)
        settled = pcn.infer(model, x, config=descent)
        dev = max(
            float(np.max(np.abs(a - b)))
            for a, b in zip(settled.activations[1:], reference[1:])
        )
        worst_dev = max(worst_dev, dev)
        worst_energy = max(worst_energy, pcn.energy(model, settled))
    return CheckResult(
        "gradient descent converges to the forward pass",
        worst_dev < 1e-4 and worst_energy < 1e-8,
        f"worst |a - a_ff| = {worst_dev:.3e} (< 1e-4), "
        f"worst energy = {worst_energy:.3e} (< 1e-8)",
    )


def theorem1_suite(seed: int = 0, instances: int = 50) -> list[CheckResult]:
    """Exact and iterative testing-phase equivalence with the forward pass."""
    return [
        exact_equivalence_check(seed, instances),
        descent_equivalence_check(seed, instances),
    ]


def _embedding_constant(model: pcn.PcnModel, x) -> float:
    # The flat graph also scores the clamped input nodes, whose prediction
    # is f(0) (no incoming weights) or 0 under activation-matrix.
    if model.convention == MATRIX_ACTIVATION:
        return 0.5 * float(np.sum((x - model.activation.f(np.zeros_like(x))) ** 2))
    return 0.5 * float(np.sum(x * x))


def embedding_energy_check(seed: int = 0, states: int = 100) -> CheckResult:
    """E_graph = E_layered + C for the hierarchical embedding, any state."""
    worst_gap = 0.0
    for k in range(states):
        rng = _rng(seed, 2, k)
        model = random_pcn(rng, max_depth=4, max_width=8, index=k)
        state = random_pcn_state(model, rng, TRAINING if k % 2 else TESTING)
        graph = pcg.hierarchical_embed(model)
        flat = pcg.PcgState(flatten_activations(state.activations), state.clamp)
        e_graph = pcg.energy(graph, flat, "sparse" if k % 2 else "dense")
        e_layered = pcn.energy(model, state)
        constant = _embedding_constant(model, state.activations[0])
        worst_gap = max(worst_gap, abs(e_graph - e_layered - constant))
    return CheckResult(
        "embedded graph energy equals layered energy plus input constant",
        worst_gap < 1e-12,
        f"worst |E_graph - E_layered - C| = {worst_gap:.3e} (< 1e-12) "
        f"over {states} states",
    )


def embedding_dynamics_checks(seed: int = 0, instances: int = 20,
                              steps: int = 20) -> list[CheckResult]:
    """Per-step activation and weight updates agree through the index map."""
    step_size, rate = 0.05, 0.1
    worst_act = 0.0
    worst_weight = 0.0
    masked_clean = True
    for k in range(instances):
        rng = _rng(seed, 3, k)
        model = random_pcn(rng, max_depth=4, max_width=8, index=k)
        layers = model.layers
        graph = pcg.hierarchical_embed(model)
        slices = layer_slices(layers)
        x = rng.standard_normal(layers.n_in)
        y = rng.standard_normal(layers.n_out)

        state = pcn.feedforward_init(model, x, y)
        acts = [a.copy() for a in state.activations]
        flat = pcg.feedforward_init(graph, x, layers, y)
        a_flat = flat.activations.copy()
        free = ~pcg.clamp_mask(graph, TRAINING)

        for _ in range(steps):
            grads = pcn.activation_gradients(model, pcn.PcnState(acts, TRAINING))
            for l, g in zip(range(1, layers.depth), grads):
                acts[l] = acts[l] - step_size * g
            g_flat = pcg.activation_gradient(graph, pcg.PcgState(a_flat, TRAINING))
            a_flat[free] = a_flat[free] - step_size * g_flat[free]
            worst_act = max(
                worst_act,
                float(np.max(np.abs(flatten_activations(acts) - a_flat))),
            )

            stepped = pcn.learn_step(model, pcn.PcnState(acts, TRAINING), rate)
            graph_stepped = pcg.learn_step(graph, pcg.PcgState(a_flat, TRAINING), rate)
            for l in range(1, len(slices)):
                block = graph_stepped.weights[slices[l], slices[l - 1]]
                worst_weight = max(
                    worst_weight,
                    float(np.max(np.abs(block - stepped.weights[l - 1]))),
                )
            masked_clean &= bool(
                np.all(graph_stepped.weights[~graph_stepped.mask] == 0.0)
            )

    return [
        CheckResult(
            "embedded graph reproduces per-step activation updates",
            worst_act < 1e-12,
            f"worst deviation = {worst_act:.3e} (< 1e-12) over "
            f"{instances} x {steps} steps",
        ),
        CheckResult(
            "embedded graph reproduces weight updates on the blocks",
            worst_weight < 1e-12 and masked_clean,
            f"worst deviation = {worst_weight:.3e} (< 1e-12), "
            f"masked entries exactly zero: {masked_clean}",
        ),
    ]


def theorem2_suite(seed: int = 0, states: int = 100,
                   instances: int = 20, steps: int = 20) -> list[CheckResult]:
    """Energy and update equivalence of the hierarchical embedding."""
    return [embedding_energy_check(seed, states),
            *embedding_dynamics_checks(seed, instances, steps)]


def gradients_suite(seed: int = 0, instances: int = 20) -> list[CheckResult]:
    """Closed-form gradients against central finite differences."""
    worst = {"layered-activation": 0.0, "layered-weight": 0.0,
             "graph-activation": 0.0, "graph-weight": 0.0}

    for i in range(instances):
        rng = _rng(seed, 4, i)
        model = random_pcn(rng, max_depth=3, max_width=7, index=i)
        state = random_pcn_state(model, rng, TRAINING if i % 2 else TESTING)
        worst["layered-activation"] = max(
            worst["layered-activation"],
            _relative_error(pcn.activation_gradients(model, state),
                            fd_pcn_activation_gradients(model, state)),
        )
        worst["layered-weight"] = max(
            worst["layered-weight"],
            _relative_error(pcn.weight_gradients(model, state),
                            fd_pcn_weight_gradients(model, state)),
        )

    for i in range(instances):
        rng = _rng(seed, 5, i)
        model, _ = random_pcg(rng, index=i)
        clamp = TRAINING if i % 2 else TESTING
        state = pcg.PcgState(rng.standard_normal(model.n_nodes), clamp)
        worst["graph-activation"] = max(
            worst["graph-activation"],
            _relative_error([pcg.activation_gradient(model, state)],
                            [fd_pcg_activation_gradient(model, state)]),
        )
        worst["graph-weight"] = max(
            worst["graph-weight"],
            _relative_error([pcg.weight_gradient(model, state)],
                            [fd_pcg_weight_gradient(model, state)]),
        )

    return [
        CheckResult(
            f"{kind} gradient matches finite differences",
            err < 1e-6,
            f"worst relative error = {err:.3e} (< 1e-6) over {instances} instances",
        )
        for kind, err in worst.items()
    ]


def counted_madds_checks(seed: int = 0, steps: int = 25) -> list[CheckResult]:
    """Instrumented sparse inference executes exactly d*c*T multiply-adds."""
    results = []
    layers = LayerSpec((2, 3, 3, 2))
    cases = [
        ((ConnectionKind.FORWARD,), 21),
        ((ConnectionKind.LATERAL,), 16),
        ((ConnectionKind.ALL_TO_ALL,), 90),
    ]
    # Gaussian starting states: a zero start can sit exactly at a
    # stationary point (e.g. lateral masks), stopping before T steps.
    config = InferenceConfig(max_steps=steps, step_size=0.01,
                             stop_tolerance=0.0, init="gaussian",
                             evaluation="sparse")
    for kinds, expected_edges in cases:
        rng = _rng(seed, 6, expected_edges)
        model = init_weights(layers, kinds, "tanh", MATRIX_ACTIVATION, rng=rng)
        counter = MaddCounter()
        pcg.infer(model, rng.standard_normal(layers.n_in),
                  config=config, rng=rng, counter=counter)
        report = cost_report(model.mask, steps, layers)
        expected = expected_edges * report.madd_factor * steps
        names = "+".join(k.value for k in kinds)
        results.append(CheckResult(
            f"sparse inference over {names} mask counts d*c*T madds",
            model.n_edges == expected_edges
            and counter.count == expected
            and report.sparse_ops == expected,
            f"d = {model.n_edges}, counted {counter.count}, "
            f"expected {expected_edges}*{report.madd_factor}*{steps} = {expected}",
        ))
    return results


def cost_suite(seed: int = 0, steps: int = 25) -> list[CheckResult]:
    """Counted sparse work against the cost model; mask consistency."""
    results = counted_madds_checks(seed, steps)

    rng = _rng(seed, 7)
    embed_ok = True
    for _ in range(10):
        model = random_pcn(rng, max_depth=4, max_width=6)
        forward = build_mask(model.layers, (ConnectionKind.FORWARD,))
        embed_ok &= bool(np.array_equal(
            forward, pcg.hierarchical_embed(model).mask
        ))
    results.append(CheckResult(
        "forward mask equals the hierarchical embedding mask",
        embed_ok, "bitwise equal over 10 random partitions",
    ))

    monotone = True
    all_kinds = list(ConnectionKind)
    for i in range(20):
        rng = _rng(seed, 8, i)
        sizes = tuple(int(n) for n in rng.integers(1, 6, size=rng.integers(2, 5)))
        layers_i = LayerSpec(sizes)
        base_count = int(rng.integers(1, len(all_kinds)))
        base = rng.choice(len(all_kinds), size=base_count, replace=False)
        extra = rng.choice(len(all_kinds), size=1)
        smaller = [all_kinds[j] for j in base]
        bigger = smaller + [all_kinds[int(extra[0])]]
        monotone &= bool(np.all(
            build_mask(layers_i, smaller) <= build_mask(layers_i, bigger)
        ))
    results.append(CheckResult(
        "mask construction is monotone in the kind set",
        monotone, "subset kinds never add connections, 20 random cases",
    ))
    return results


SUITES = {
    "theorem1": theorem1_suite,
    "theorem2": theorem2_suite,
    "gradients": gradients_suite,
    "cost": cost_suite,
}


def run_suite(name: str, seed: int = 0) -> list[CheckResult]:
    """Run one named suite and return its check results."""
    try:
        suite = SUITES[name]
    except KeyError:
        raise ValueError(
            f"unknown suite {name!r}; choose from {', '.join(SUITE_NAMES)}"
        ) from None
    return suite(seed)
