"""Benchmark domains, the generic environment file format, and the onion sort simulation.

Forestworld states are s = x * 4 + y on a 4x4 grid; Onionworld states are
((onion * 4 + effector) * 3 + prediction) * extra + e.
"""

import itertools
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from numpy.typing import NDArray

from mmap_birl.models.config import EnvironmentConfig
from mmap_birl.models.domain import (
    DeterministicPolicy,
    DiscountedMdp,
    FeatureMap,
    FeatureWeights,
    ObservationModel,
    StochasticPolicy,
    check_deterministic_policy,
    one_hot_policy,
)
from mmap_birl.models.records import ConfusionCounts
from mmap_birl.utils.error_handling import FormatError, ValidationError
from mmap_birl.utils.mdp_solver import boltzmann, solve_optimal
from mmap_birl.utils.observation_model import (
    SORT_STREAM,
    confusion_observation_model,
    derived_rng,
    encode_observation,
    identity_observation_model,
)
from mmap_birl.utils.reward_model import reward_of

logger = logging.getLogger(__name__)

DEFAULT_DISCOUNT = 0.99


@dataclass(frozen=True)
class Environment:
    """A benchmark domain: MDP, features, learner observation model and the expert's true weights."""

    name: str
    mdp: DiscountedMdp
    features: FeatureMap
    observation_model: ObservationModel
    true_weights: FeatureWeights
    state_labels: Tuple[str, ...] = ()
    action_labels: Tuple[str, ...] = ()
    has_positive_class: bool = False
    onion_spec: Optional["OnionWorldSpec"] = field(default=None, compare=False)

    @property
    def true_reward(self) -> NDArray[np.float64]:
        return reward_of(self.true_weights, self.features)


# -- Forestworld -------------------------------------------------------------

FOREST_ACTIONS = ("north", "south", "east", "west")
_FOREST_MOVES = ((0, 1), (0, -1), (1, 0), (-1, 0))


@dataclass(frozen=True)
class ForestworldSpec:
    """4x4 fugitive gridworld with slip, two cells to avoid, an absorbing goal and a tunnel."""

    size: int = 4
    intended_prob: float = 0.9
    tunnel_noise: float = 0.3
    avoid_cells: Tuple[Tuple[int, int], ...] = ((1, 1), (3, 2))
    goal_cell: Tuple[int, int] = (3, 3)
    tunnel_cell: Tuple[int, int] = (2, 3)
    true_weights: Tuple[float, ...] = (-1.0, -1.0, 1.0)
    start: str = "safe"
    discount: float = DEFAULT_DISCOUNT

    def state_of(self, x: int, y: int) -> int:
        return x * self.size + y

    def cell_of(self, state: int) -> Tuple[int, int]:
        return divmod(state, self.size)


def _forest_start(spec: ForestworldSpec) -> NDArray[np.float64]:
    num_states = spec.size * spec.size
    allowed = np.ones(num_states, dtype=bool)
    if spec.start in ("safe", "non_goal"):
        allowed[spec.state_of(*spec.goal_cell)] = False
    if spec.start == "safe":
        for cell in spec.avoid_cells:
            allowed[spec.state_of(*cell)] = False
    elif spec.start not in ("non_goal", "uniform"):
        raise ValidationError(f"unknown forestworld start '{spec.start}'", field_name="start")
    return allowed / allowed.sum()


def build_forestworld(spec: Optional[ForestworldSpec] = None) -> Environment:
    """Forestworld with features Avoidable(1,1), Avoidable(3,2) and Goal(3,3).

    The intended move happens with ``intended_prob``; each of the other three
    directions takes an equal share of the rest. Moves off the grid leave the
    fugitive in place. At the goal the tunnel makes the learner perceive the
    tunnel cell instead with probability ``tunnel_noise``; actions are always
    observed exactly.
    """
    spec = spec or ForestworldSpec()
    size = spec.size
    num_states, num_actions = size * size, len(FOREST_ACTIONS)
    slip = (1.0 - spec.intended_prob) / (num_actions - 1)
    goal = spec.state_of(*spec.goal_cell)

    transitions = np.zeros((num_states, num_actions, num_states))
    for (x, y), action in itertools.product(itertools.product(range(size), repeat=2), range(num_actions)):
        state = spec.state_of(x, y)
        if state == goal:
            transitions[state, action, state] = 1.0
            continue
        for direction, (dx, dy) in enumerate(_FOREST_MOVES):
            nx, ny = x + dx, y + dy
            target = spec.state_of(nx, ny) if 0 <= nx < size and 0 <= ny < size else state
            transitions[state, action, target] += spec.intended_prob if direction == action else slip

    phi = np.zeros((num_states, num_actions, len(spec.avoid_cells) + 1))
    for k, cell in enumerate(spec.avoid_cells):
        phi[spec.state_of(*cell), :, k] = 1.0
    phi[goal, :, -1] = 1.0
    names = tuple(f"avoidable_{x}_{y}" for x, y in spec.avoid_cells) + ("goal_{}_{}".format(*spec.goal_cell),)

    confusion = np.zeros((num_states, num_actions, num_states * num_actions))
    tunnel = spec.state_of(*spec.tunnel_cell)
    for action in range(num_actions):
        confusion[goal, action, encode_observation(tunnel, action, num_actions)] = 1.0
    observation = confusion_observation_model(num_states, num_actions, spec.tunnel_noise, confusion)

    return Environment(
        name="forestworld",
        mdp=DiscountedMdp(transitions, spec.discount, _forest_start(spec)),
        features=FeatureMap(phi, names),
        observation_model=observation,
        true_weights=np.asarray(spec.true_weights, dtype=np.float64),
        state_labels=tuple(f"({x},{y})" for x, y in map(spec.cell_of, range(num_states))),
        action_labels=FOREST_ACTIONS,
    )


# -- Onionworld --------------------------------------------------------------

ONION_LOCATIONS = ("conveyor", "hover", "front", "bin")
PREDICTIONS = ("good", "bad", "unknown")
ONION_ACTIONS = ("claim", "pick", "inspect", "place_conveyor", "place_bin")
ONION_FEATURES = (
    "good_on_conveyor",
    "bad_on_conveyor",
    "good_in_bin",
    "bad_in_bin",
    "claim_new_onion",
    "pick_if_unknown",
)

CONVEYOR, HOVER, FRONT, BIN = range(4)
GOOD, BAD, UNKNOWN = range(3)
CLAIM, PICK, INSPECT, PLACE_CONVEYOR, PLACE_BIN = range(5)

OnionState = Tuple[int, int, int]


@dataclass(frozen=True)
class OnionWorldSpec:
    """Factored onion sorting task; ``extra_factor_size`` adds an inert state variable."""

    blemish_rate: float = 0.5
    prediction_noise: float = 0.3
    true_weights: Tuple[float, ...] = (1.0, -1.0, -1.0, 1.0, 0.1, 0.1)
    extra_factor_size: int = 1
    start: str = "fresh"
    discount: float = DEFAULT_DISCOUNT

    @property
    def num_states(self) -> int:
        return len(ONION_LOCATIONS) ** 2 * len(PREDICTIONS) * self.extra_factor_size

    def state_of(self, onion: int, effector: int, prediction: int, extra: int = 0) -> int:
        base = (onion * len(ONION_LOCATIONS) + effector) * len(PREDICTIONS) + prediction
        return base * self.extra_factor_size + extra

    def factors_of(self, state: int) -> Tuple[int, int, int, int]:
        base, extra = divmod(state, self.extra_factor_size)
        rest, prediction = divmod(base, len(PREDICTIONS))
        onion, effector = divmod(rest, len(ONION_LOCATIONS))
        return onion, effector, prediction, extra


def _holding(onion: int, effector: int) -> bool:
    return onion == effector and onion in (HOVER, FRONT)


def _has_no_focus(onion: int, prediction: int) -> bool:
    return onion == BIN or (onion == CONVEYOR and prediction != UNKNOWN)


def onion_successors(
    onion: int, effector: int, prediction: int, action: int, blemish_rate: float
) -> List[Tuple[float, OnionState]]:
    """Outcomes of ``action`` as (probability, (onion, effector, prediction)) pairs."""
    unchanged = [(1.0, (onion, effector, prediction))]
    if action == CLAIM:
        return [(1.0, (CONVEYOR, CONVEYOR, UNKNOWN))]
    if action == PICK:
        if onion == CONVEYOR and prediction == UNKNOWN:
            return [(1.0, (HOVER, HOVER, UNKNOWN))]
        return unchanged
    if not _holding(onion, effector):
        return unchanged
    if action == INSPECT:
        if prediction != UNKNOWN:
            return [(1.0, (FRONT, FRONT, prediction))]
        outcomes = [(1.0 - blemish_rate, (FRONT, FRONT, GOOD)), (blemish_rate, (FRONT, FRONT, BAD))]
        return [outcome for outcome in outcomes if outcome[0] > 0.0]
    destination = CONVEYOR if action == PLACE_CONVEYOR else BIN
    return [(1.0, (destination, destination, prediction))]


def _onion_features(onion: int, effector: int, prediction: int, action: int) -> NDArray[np.float64]:
    values = np.zeros(len(ONION_FEATURES))
    if _holding(onion, effector) and prediction != UNKNOWN and action in (PLACE_CONVEYOR, PLACE_BIN):
        values[(0 if prediction == GOOD else 1) + (2 if action == PLACE_BIN else 0)] = 1.0
    if action == CLAIM and _has_no_focus(onion, prediction):
        values[4] = 1.0
    if action == PICK and onion == CONVEYOR and prediction == UNKNOWN:
        values[5] = 1.0
    return values


def build_onionworld(spec: Optional[OnionWorldSpec] = None, noise: Optional[float] = None) -> Environment:
    """Onion sorting MDP with deterministic task dynamics except the inspection outcome.

    The learner sees the prediction component flipped (good <-> bad) with
    probability ``spec.prediction_noise``; locations and actions are never
    corrupted.
    """
    spec = spec or OnionWorldSpec()
    if noise is not None:
        spec = replace(spec, prediction_noise=noise)
    num_states, num_actions = spec.num_states, len(ONION_ACTIONS)
    transitions = np.zeros((num_states, num_actions, num_states))
    phi = np.zeros((num_states, num_actions, len(ONION_FEATURES)))
    confusion = np.zeros((num_states, num_actions, num_states * num_actions))

    for state in range(num_states):
        onion, effector, prediction, extra = spec.factors_of(state)
        for action in range(num_actions):
            for probability, (o, e, p) in onion_successors(onion, effector, prediction, action, spec.blemish_rate):
                transitions[state, action, spec.state_of(o, e, p, extra)] += probability
            phi[state, action] = _onion_features(onion, effector, prediction, action)
            if prediction != UNKNOWN:
                flipped = spec.state_of(onion, effector, BAD if prediction == GOOD else GOOD, extra)
                confusion[state, action, encode_observation(flipped, action, num_actions)] = 1.0

    if spec.start == "fresh":
        start = np.zeros(num_states)
        for extra in range(spec.extra_factor_size):
            start[spec.state_of(CONVEYOR, CONVEYOR, UNKNOWN, extra)] = 1.0
    elif spec.start == "uniform":
        start = np.ones(num_states)
    else:
        raise ValidationError(f"unknown onionworld start '{spec.start}'", field_name="start")

    labels = []
    for state in range(num_states):
        onion, effector, prediction, extra = spec.factors_of(state)
        label = f"{ONION_LOCATIONS[onion]}/{ONION_LOCATIONS[effector]}/{PREDICTIONS[prediction]}"
        labels.append(label if spec.extra_factor_size == 1 else f"{label}/{extra}")

    return Environment(
        name="onionworld",
        mdp=DiscountedMdp(transitions, spec.discount, start / start.sum()),
        features=FeatureMap(phi, ONION_FEATURES),
        observation_model=confusion_observation_model(num_states, num_actions, spec.prediction_noise, confusion),
        true_weights=np.asarray(spec.true_weights, dtype=np.float64),
        state_labels=tuple(labels),
        action_labels=ONION_ACTIONS,
        has_positive_class=True,
        onion_spec=spec,
    )


def simulate_onion_sort(
    env: Environment,
    policy: DeterministicPolicy,
    num_onions: int,
    seed: int,
    max_steps_per_onion: int = 20,
) -> ConfusionCounts:
    """Sort ``num_onions`` onions with latent classes under ``policy``.

    A blemished onion is the positive class: binning it is a true positive,
    binning a good onion a false positive. Onions the policy abandons (claims
    past, or never places within ``max_steps_per_onion``) are not counted.
    """
    spec = env.onion_spec
    if spec is None:
        raise ValidationError("sort simulation needs an onionworld environment", field_name="env")
    policy = check_deterministic_policy(policy, env.mdp)
    rng = derived_rng(seed, SORT_STREAM)
    counts: Dict[str, int] = {"tp": 0, "fp": 0, "tn": 0, "fn": 0}

    for _ in range(num_onions):
        blemished = bool(rng.random() < spec.blemish_rate)
        onion, effector, prediction = CONVEYOR, CONVEYOR, UNKNOWN
        for _ in range(max_steps_per_onion):
            action = int(policy[spec.state_of(onion, effector, prediction)])
            if action in (PLACE_CONVEYOR, PLACE_BIN) and _holding(onion, effector):
                binned = action == PLACE_BIN
                key = ("tp" if blemished else "fp") if binned else ("fn" if blemished else "tn")
                counts[key] += 1
                break
            if action == CLAIM:
                break
            if action == INSPECT and _holding(onion, effector):
                onion, effector = FRONT, FRONT
                prediction = BAD if blemished else GOOD
                continue
            outcomes = onion_successors(onion, effector, prediction, action, spec.blemish_rate)
            _, (onion, effector, prediction) = outcomes[0]

    logger.debug(f"Sorted {sum(counts.values())} of {num_onions} onions: {counts}")
    return ConfusionCounts(**counts)


# -- Generic environment files ----------------------------------------------

PathLike = Union[str, Path]
_COUNT_KEYS = ("states", "actions", "observations", "features")


def read_environment_file(path: PathLike) -> Environment:
    """Parse the line-oriented environment format.

    Keys: ``states S``, ``actions A``, ``observations O``, ``features K``,
    ``discount g``, ``initial s p``, ``transition s a s' p``,
    ``feature s a k v``, ``observation s a o p`` and ``weights t1 .. tK``.
    Counts must precede the entries that use them. Without observation lines
    the identity model is used, which requires O = S * A.
    """
    name = str(path)
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise FormatError(f"cannot read environment file: {e}", path=name) from e

    counts: Dict[str, int] = {}
    discount = DEFAULT_DISCOUNT
    initial: Dict[int, float] = {}
    transitions: List[Tuple[int, int, int, float]] = []
    features: List[Tuple[int, int, int, float]] = []
    observations: List[Tuple[int, int, int, float]] = []
    weights: Optional[List[float]] = None

    def need(*keys: str, line_number: int) -> None:
        missing = [k for k in keys if k not in counts]
        if missing:
            raise FormatError(f"'{missing[0]}' must be declared first", path=name, line_number=line_number)

    for line_number, raw in enumerate(lines, start=1):
        tokens = raw.split("#", 1)[0].split()
        if not tokens:
            continue
        key, args = tokens[0], tokens[1:]
        try:
            if key in _COUNT_KEYS and len(args) == 1:
                counts[key] = int(args[0])
                if counts[key] < 1:
                    raise ValueError(f"{key} must be positive")
            elif key == "discount" and len(args) == 1:
                discount = float(args[0])
            elif key == "initial" and len(args) == 2:
                need("states", line_number=line_number)
                initial[int(args[0])] = float(args[1])
            elif key in ("transition", "feature", "observation") and len(args) == 4:
                need("states", "actions", line_number=line_number)
                entry = (int(args[0]), int(args[1]), int(args[2]), float(args[3]))
                {"transition": transitions, "feature": features, "observation": observations}[key].append(entry)
            elif key == "weights":
                weights = [float(a) for a in args]
            else:
                raise ValueError(f"unrecognized line '{raw.strip()}'")
        except ValueError as e:
            raise FormatError(str(e), path=name, line_number=line_number) from e

    need("states", "actions", "features", line_number=len(lines))
    num_states, num_actions, num_features = counts["states"], counts["actions"], counts["features"]
    num_observations = counts.get("observations", num_states * num_actions)

    def fill(shape: Tuple[int, ...], entries: List[Tuple[int, int, int, float]], what: str) -> NDArray[np.float64]:
        table = np.zeros(shape)
        for s, a, j, value in entries:
            if not (0 <= s < shape[0] and 0 <= a < shape[1] and 0 <= j < shape[2]):
                raise FormatError(f"{what} index ({s}, {a}, {j}) out of range", path=name)
            table[s, a, j] = value
        return table

    start = np.zeros(num_states)
    for s, p in initial.items():
        if not 0 <= s < num_states:
            raise FormatError(f"initial state {s} out of range", path=name)
        start[s] = p
    if not initial:
        start[:] = 1.0 / num_states

    phi = fill((num_states, num_actions, num_features), features, "feature")
    if observations:
        observation_model = ObservationModel(
            fill((num_states, num_actions, num_observations), observations, "observation")
        )
    elif num_observations == num_states * num_actions:
        observation_model = identity_observation_model(num_states, num_actions)
    else:
        raise FormatError("observation lines are required when O != S * A", path=name)
    if weights is not None and len(weights) != num_features:
        raise FormatError(f"weights line must list {num_features} values", path=name)

    return Environment(
        name=Path(path).stem,
        mdp=DiscountedMdp(fill((num_states, num_actions, num_states), transitions, "transition"), discount, start),
        features=FeatureMap(phi),
        observation_model=observation_model,
        true_weights=np.asarray(weights if weights is not None else np.zeros(num_features), dtype=np.float64),
    )


def format_environment(env: Environment) -> str:
    """Serialize ``env`` in the generic format, listing only non-zero entries."""
    mdp, phi, obs = env.mdp, env.features.phi, env.observation_model.prob
    lines = [
        f"# {env.name}",
        f"states {mdp.num_states}",
        f"actions {mdp.num_actions}",
        f"observations {env.observation_model.num_observations}",
        f"features {env.features.num_features}",
        f"discount {float(mdp.discount)!r}",
    ]
    lines += [f"initial {s} {float(p)!r}" for s, p in enumerate(mdp.initial_distribution) if p > 0.0]
    for label, table in (("transition", mdp.transitions), ("feature", phi), ("observation", obs)):
        lines += [f"{label} {s} {a} {j} {float(table[s, a, j])!r}" for s, a, j in zip(*np.nonzero(table))]
    lines.append("weights " + " ".join(repr(float(w)) for w in env.true_weights))
    return "\n".join(lines) + "\n"


def write_environment_file(path: PathLike, env: Environment) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(format_environment(env), encoding="utf-8")


# -- Registry ----------------------------------------------------------------


def load_environment(config: EnvironmentConfig, discount: float = DEFAULT_DISCOUNT) -> Environment:
    """Resolve a builtin name or a generic environment file."""
    if config.name == "forestworld":
        spec = ForestworldSpec(
            tunnel_noise=0.3 if config.noise is None else config.noise, start=config.start, discount=discount
        )
        return build_forestworld(spec)
    if config.name == "onionworld":
        spec_onion = OnionWorldSpec(
            blemish_rate=config.blemish_rate,
            prediction_noise=0.3 if config.noise is None else config.noise,
            extra_factor_size=config.extra_factor_size,
            start="uniform" if config.start == "uniform" else "fresh",
            discount=discount,
        )
        return build_onionworld(spec_onion)
    env = read_environment_file(config.name)
    return Environment(
        name=env.name,
        mdp=env.mdp.with_discount(discount),
        features=env.features,
        observation_model=env.observation_model,
        true_weights=env.true_weights,
    )


def expert_policy(env: Environment, expert_beta: Optional[float] = None) -> StochasticPolicy:
    """Greedy optimal policy for the true reward, or Boltzmann(expert_beta) when set."""
    greedy, values = solve_optimal(env.mdp, env.true_reward)
    if expert_beta is None:
        return one_hot_policy(greedy, env.mdp.num_actions)
    return boltzmann(values.q, expert_beta)
