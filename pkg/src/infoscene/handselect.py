"""Dual-hand selection: contralateral prior, a small two-way MLP, and their fusion.

The classifier maps the four hand-to-source / hand-to-target distances to
a distribution over {left, right} through one tanh hidden layer. It is
trained by full-batch gradient descent on a reward-weighted cross-entropy:
each sample costs ``r_bonus * -ln pi(expert | s)``, and samples the current
model gets wrong are further multiplied by ``r_penalty`` when the batch is
averaged. At decision time the log-probabilities are biased by ``kappa``
toward the prior's action.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import EmptyBatch, EmptyDataset, InvalidConfig, NonFiniteInput, NonFiniteParameters

LEFT = "UseLeftHand"
RIGHT = "UseRightHand"
ACTIONS = (LEFT, RIGHT)
_WIRE = {LEFT: "left", RIGHT: "right"}
_FROM_WIRE = {"left": LEFT, "right": RIGHT}


def action_index(a):
    return 0 if a == LEFT else 1


def to_wire(a):
    return _WIRE[a]


def from_wire(s):
    try:
        return _FROM_WIRE[s]
    except KeyError:
        raise InvalidConfig(f"hand label must be 'left' or 'right', got {s!r}") from None


@dataclass(frozen=True)
class SelectorState:
    r_L_source: float
    r_R_source: float
    r_L_target: float
    r_R_target: float

    def __post_init__(self):
        v = self.as_array()
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise NonFiniteInput("selector distances must be finite and non-negative")

    def as_array(self):
        return np.array([self.r_L_source, self.r_R_source, self.r_L_target, self.r_R_target], dtype=float)

    def mirrored(self):
        return SelectorState(self.r_R_source, self.r_L_source, self.r_R_target, self.r_L_target)


def selector_state(left_hand_pos, right_hand_pos, source_pos, target_pos) -> SelectorState:
    pts = [np.asarray(p, dtype=float).reshape(3) for p in
           (left_hand_pos, right_hand_pos, source_pos, target_pos)]
    if not all(np.all(np.isfinite(p)) for p in pts):
        raise NonFiniteInput("positions must be finite")
    hl, hr, src, tgt = pts
    return SelectorState(
        float(np.linalg.norm(src - hl)),
        float(np.linalg.norm(src - hr)),
        float(np.linalg.norm(tgt - hl)),
        float(np.linalg.norm(tgt - hr)),
    )


def prior_policy(s: SelectorState) -> str:
    """Grasp with the hand opposite the one nearer the target; ties go right."""
    return LEFT if s.r_R_target < s.r_L_target else RIGHT


@dataclass(frozen=True)
class SelectorHyperparams:
    r_bonus: float = 1.0
    r_penalty: float = 1.0
    kappa: float = 1.0
    learning_rate: float = 0.05
    epochs: int = 500
    seed: int = 0
    hidden_size: int = 16
    normalize: bool = False

    def __post_init__(self):
        for name in ("r_bonus", "r_penalty", "learning_rate"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise InvalidConfig(f"{name} must be positive")
        if not (isinstance(self.kappa, (int, float)) and self.kappa >= 0):
            raise InvalidConfig("kappa must be >= 0")
        for name in ("epochs", "seed", "hidden_size"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int):
                raise InvalidConfig(f"{name} must be an integer")
        if self.epochs < 0 or self.hidden_size < 1:
            raise InvalidConfig("epochs must be >= 0 and hidden_size >= 1")
        if not isinstance(self.normalize, bool):
            raise InvalidConfig("normalize must be a boolean")

    def to_dict(self):
        return asdict(self)


class SelectorModel:
    """Parameters of the two-way classifier. ``w1`` is 4 x H, ``w2`` is H x 2.

    ``mean``/``scale`` hold the feature standardisation used when training
    with ``normalize=True``; they are the identity otherwise.
    """

    __slots__ = ("w1", "b1", "w2", "b2", "mean", "scale")

    def __init__(self, w1, b1, w2, b2, mean=None, scale=None):
        self.w1 = np.array(w1, dtype=float).reshape(4, -1)
        h = self.w1.shape[1]
        self.b1 = np.array(b1, dtype=float).reshape(h)
        self.w2 = np.array(w2, dtype=float).reshape(h, 2)
        self.b2 = np.array(b2, dtype=float).reshape(2)
        self.mean = np.zeros(4) if mean is None else np.array(mean, dtype=float).reshape(4)
        self.scale = np.ones(4) if scale is None else np.array(scale, dtype=float).reshape(4)
        if h < 1:
            raise NonFiniteParameters("hidden size must be >= 1")

    @property
    def hidden_size(self):
        return self.w1.shape[1]

    @classmethod
    def zeros(cls, hidden_size=16):
        return cls(np.zeros((4, hidden_size)), np.zeros(hidden_size), np.zeros((hidden_size, 2)), np.zeros(2))

    @classmethod
    def init(cls, hidden_size=16, seed=0, scale=0.1):
        rng = np.random.default_rng(seed)
        return cls(rng.uniform(-scale, scale, (4, hidden_size)),
                   rng.uniform(-scale, scale, hidden_size),
                   rng.uniform(-scale, scale, (hidden_size, 2)),
                   rng.uniform(-scale, scale, 2))

    def params(self):
        return (self.w1, self.b1, self.w2, self.b2)

    def with_params(self, params):
        return SelectorModel(*params, mean=self.mean, scale=self.scale)

    def check(self):
        if not all(np.all(np.isfinite(p)) for p in self.params()):
            raise NonFiniteParameters("model parameters must be finite")

    def __eq__(self, other):
        if not isinstance(other, SelectorModel):
            return NotImplemented
        mine = self.params() + (self.mean, self.scale)
        theirs = other.params() + (other.mean, other.scale)
        return all(np.array_equal(a, b) for a, b in zip(mine, theirs))

    def to_dict(self, hp: SelectorHyperparams | None = None):
        d = {
            "hidden_size": self.hidden_size,
            "layer1_weights": self.w1.ravel().tolist(),
            "layer1_bias": self.b1.tolist(),
            "layer2_weights": self.w2.ravel().tolist(),
            "layer2_bias": self.b2.tolist(),
            "feature_mean": self.mean.tolist(),
            "feature_scale": self.scale.tolist(),
        }
        if hp is not None:
            d["seed"] = hp.seed
            d["hyperparams"] = hp.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        try:
            h = int(d["hidden_size"])
            return cls(np.reshape(d["layer1_weights"], (4, h)), d["layer1_bias"],
                       np.reshape(d["layer2_weights"], (h, 2)), d["layer2_bias"],
                       d.get("feature_mean"), d.get("feature_scale"))
        except (KeyError, ValueError, TypeError) as exc:
            raise InvalidConfig(f"malformed selector model: {exc}") from None

    def to_json(self, hp=None):
        return json.dumps(self.to_dict(hp), indent=1) + "\n"


def _features(model, states):
    if isinstance(states, SelectorState):
        x = states.as_array()[None, :]
    else:
        x = np.atleast_2d(np.asarray([s.as_array() if isinstance(s, SelectorState) else s
                                      for s in states], dtype=float))
    return (x - model.mean) / model.scale


def _log_softmax(z):
    zmax = z.max(axis=-1, keepdims=True)
    shifted = z - zmax
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _forward(model, x):
    hidden = np.tanh(x @ model.w1 + model.b1)
    logits = hidden @ model.w2 + model.b2
    return hidden, logits


def classifier_forward(model: SelectorModel, s: SelectorState):
    """Return ``(logits, probabilities)`` for one state."""
    model.check()
    _, logits = _forward(model, _features(model, s))
    logp = _log_softmax(logits)
    return logits[0], np.exp(logp[0])


def log_probabilities(model: SelectorModel, states):
    model.check()
    _, logits = _forward(model, _features(model, states))
    return _log_softmax(logits)


def imitation_signal(chosen, expert, hp: SelectorHyperparams = SelectorHyperparams()) -> float:
    return hp.r_bonus if chosen == expert else -hp.r_penalty


def training_loss(model: SelectorModel, s: SelectorState, expert, hp: SelectorHyperparams = SelectorHyperparams()):
    """Per-sample loss ``r_bonus * -ln pi(expert | s)``."""
    logp = log_probabilities(model, [s])[0]
    return float(hp.r_bonus * -logp[action_index(expert)])


def _batch_arrays(model, batch):
    if len(batch) == 0:
        raise EmptyBatch("batch must be non-empty")
    x = _features(model, [s for s, _ in batch])
    y = np.array([action_index(a) for _, a in batch])
    return x, y


def _sample_weights(logp, y, hp):
    # mispredicted samples are scaled by r_penalty; the weights are held fixed under differentiation
    wrong = np.argmax(logp, axis=1) != y
    return hp.r_bonus * np.where(wrong, hp.r_penalty, 1.0)


def batch_loss(model: SelectorModel, batch, hp: SelectorHyperparams = SelectorHyperparams(), weights=None):
    model.check()
    x, y = _batch_arrays(model, batch)
    _, logits = _forward(model, x)
    logp = _log_softmax(logits)
    if weights is None:
        weights = _sample_weights(logp, y, hp)
    return float(np.mean(weights * -logp[np.arange(len(y)), y]))


def training_gradient(model: SelectorModel, batch, hp: SelectorHyperparams = SelectorHyperparams(), weights=None):
    """Analytic gradient of :func:`batch_loss`, as ``(dw1, db1, dw2, db2)``."""
    model.check()
    x, y = _batch_arrays(model, batch)
    return _gradient(model, x, y, hp, weights)


def _gradient(model, x, y, hp, weights=None):
    n = len(y)
    hidden, logits = _forward(model, x)
    logp = _log_softmax(logits)
    if weights is None:
        weights = _sample_weights(logp, y, hp)
    delta = np.exp(logp)
    delta[np.arange(n), y] -= 1.0
    delta *= (weights / n)[:, None]
    dw2 = hidden.T @ delta
    db2 = delta.sum(axis=0)
    dh = (delta @ model.w2.T) * (1.0 - hidden ** 2)
    dw1 = x.T @ dh
    db1 = dh.sum(axis=0)
    return dw1, db1, dw2, db2


def train(dataset, hp: SelectorHyperparams = SelectorHyperparams()) -> SelectorModel:
    """Full-batch gradient descent from a seeded uniform(-0.1, 0.1) initialisation."""
    if len(dataset) == 0:
        raise EmptyDataset("dataset must be non-empty")
    model = SelectorModel.init(hp.hidden_size, hp.seed)
    if hp.normalize:
        raw = np.array([s.as_array() for s, _ in dataset])
        sd = raw.std(axis=0)
        model = SelectorModel(*model.params(), mean=raw.mean(axis=0), scale=np.where(sd > 0, sd, 1.0))
    x, y = _batch_arrays(model, dataset)
    params = [p.copy() for p in model.params()]
    for _ in range(hp.epochs):
        grads = _gradient(model.with_params(params), x, y, hp)
        for p, g in zip(params, grads):
            p -= hp.learning_rate * g
    return model.with_params(params)


def fused_decision(model: SelectorModel, s: SelectorState, kappa):
    """Argmax of ``ln pi(a|s) + kappa * [a == prior(s)]``; ties go to the prior."""
    if kappa < 0:
        raise InvalidConfig("kappa must be >= 0")
    logp = log_probabilities(model, [s])[0]
    prior = prior_policy(s)
    bonus = np.array([kappa if a == prior else 0.0 for a in ACTIONS])
    scores = logp + bonus
    p, o = action_index(prior), 1 - action_index(prior)
    action = ACTIONS[o] if scores[o] > scores[p] else prior
    return action, scores


def decide_with_persistence(current, eoo_docked_active, model, s, kappa):
    """Keep ``current`` while an E-OO docked relation holds, otherwise re-decide."""
    if eoo_docked_active and current is not None:
        return current
    return fused_decision(model, s, kappa)[0]


def dumps_dataset(dataset) -> str:
    """JSONL, one ``{"state": [4 floats], "expert": "left"|"right"}`` per line."""
    return "".join(json.dumps({"state": s.as_array().tolist(), "expert": to_wire(a)}) + "\n" for s, a in dataset)


def loads_dataset(text):
    out = []
    for ln, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
            state = [float(v) for v in d["state"]]
            if len(state) != 4:
                raise ValueError("state needs 4 values")
            out.append((SelectorState(*state), from_wire(d["expert"])))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise InvalidConfig(f"dataset line {ln}: {exc}") from None
    return out
