"""Mining difficulty: HV dimension on a ladder plus an exact accuracy threshold."""
from dataclasses import dataclass
from fractions import Fraction

from .errors import ConfigurationError

DEFAULT_LADDER = (3000, 5000, 7000, 10000, 15000)


def parse_fraction(value):
    """Exact rational from int, Fraction, or text such as ``"85/100"`` or ``"0.85"``.

    Floats are rejected so nothing on the consensus path depends on binary rounding.
    """
    if isinstance(value, float):
        raise ConfigurationError(f"use a string like '85/100' instead of the float {value!r}")
    try:
        return Fraction(value)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ConfigurationError(f"not a rational number: {value!r}") from exc


@dataclass(frozen=True)
class Difficulty:
    dimension: int
    accuracy_threshold: Fraction = Fraction(0)
    num_levels: int = 10

    def __post_init__(self):
        threshold = parse_fraction(self.accuracy_threshold)
        object.__setattr__(self, "accuracy_threshold", threshold)
        if not 0 <= threshold <= 1:
            raise ConfigurationError(f"accuracy threshold must lie in [0, 1], got {threshold}")
        if self.dimension < 1:
            raise ConfigurationError(f"dimension must be positive, got {self.dimension}")
        if self.num_levels < 2:
            raise ConfigurationError(f"need at least 2 levels, got {self.num_levels}")

    def with_threshold(self, threshold):
        return Difficulty(self.dimension, threshold, self.num_levels)


@dataclass(frozen=True)
class ControllerParams:
    """Knobs of the difficulty controller. Times are in seconds."""

    initial: Difficulty
    ladder: tuple = DEFAULT_LADDER
    window: int = 10
    t_low: Fraction = Fraction(1)
    t_high: Fraction = Fraction(30)
    margin: Fraction = Fraction(2, 100)
    decay_step: Fraction = Fraction(1, 100)

    def __post_init__(self):
        ladder = tuple(sorted(set(int(d) for d in self.ladder)))
        object.__setattr__(self, "ladder", ladder)
        for name in ("t_low", "t_high", "margin", "decay_step"):
            object.__setattr__(self, name, parse_fraction(getattr(self, name)))
        if not ladder:
            raise ConfigurationError("dimension ladder is empty")
        if self.initial.dimension not in ladder:
            raise ConfigurationError(
                f"initial dimension {self.initial.dimension} is not on the ladder {ladder}"
            )
        if self.window < 1:
            raise ConfigurationError("controller window must be >= 1")
        if self.t_low > self.t_high:
            raise ConfigurationError("t_low must not exceed t_high")
        if self.margin < 0 or self.decay_step <= 0:
            raise ConfigurationError("margin must be >= 0 and decay step > 0")


def step_dimension(ladder, current, direction):
    i = ladder.index(current)
    return ladder[min(max(i + direction, 0), len(ladder) - 1)]


def round_times_ms(headers):
    """Wall time of each mined block: its timestamp minus its parent's."""
    return [
        child.timestamp - parent.timestamp
        for parent, child in zip(headers, headers[1:])
        if child.height >= 1
    ]


def exact_median(values):
    ordered = sorted(values)
    mid = len(ordered) // 2
    if len(ordered) % 2:
        return Fraction(ordered[mid])
    return Fraction(ordered[mid - 1] + ordered[mid], 2)


def initial_difficulty(params, baseline):
    start = params.initial
    return start.with_threshold(max(start.accuracy_threshold, baseline))


def next_difficulty(headers, params, baseline):
    """Difficulty for the block after ``headers[-1]``.

    ``headers`` is the chain (or its tail) ending at the tip. Over the last
    ``window`` mined blocks: a median round time below ``t_low`` moves one
    rung up the ladder, above ``t_high`` one rung down. The threshold is the
    best accuracy in the window minus ``margin``, never below ``baseline``.
    """
    tail = list(headers[-(params.window + 1):])
    mined = [h for h in tail if h.height >= 1][-params.window:]
    if not mined:
        return initial_difficulty(params, baseline)
    current = tail[-1].difficulty
    median_ms = exact_median(round_times_ms(tail)[-params.window:])
    dimension = current.dimension
    if dimension in params.ladder:
        if median_ms < params.t_low * 1000:
            dimension = step_dimension(params.ladder, dimension, +1)
        elif median_ms > params.t_high * 1000:
            dimension = step_dimension(params.ladder, dimension, -1)
    best = max(h.accuracy.fraction for h in mined)
    threshold = min(max(best - params.margin, baseline, Fraction(0)), Fraction(1))
    return Difficulty(dimension, threshold, params.initial.num_levels)


def decay_threshold(threshold, params, baseline):
    """One step of stuck-round relief; returns None once the floor is reached."""
    floor = min(baseline, threshold)
    if threshold <= floor:
        return None
    return max(threshold - params.decay_step, floor)


def admissible_threshold(actual, expected, params, baseline):
    """Whether ``actual`` is ``expected`` after zero or more decay steps."""
    floor = min(baseline, expected)
    if actual == floor:
        return True
    if not floor < actual <= expected:
        return False
    steps = (expected - actual) / params.decay_step
    return steps.denominator == 1
