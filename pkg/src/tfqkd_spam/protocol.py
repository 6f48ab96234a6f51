"""Alice, Bob and Charlie as message-passing parties over a simulated network.

One *batch* is one (Alice label, Bob label, trial, -Z slot) combination. For
each batch Charlie announces the shot count, Alice and Bob commit to an opaque
token and send their pulses down the quantum channel, Charlie measures and
publishes the counts, and only then does Bob reveal which of his four labels
he used. Alice's ledger sees counts and Bob's label tokens, nothing else: Bob's
phases and the interferometer model never reach the analysis side.
"""

import hashlib
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import streams
from .errors import MissingLabel, NoCounts, ProtocolViolation
from .measurement import CountRecord, estimate_expectation, simulate_counts
from .states import (
    MINUS_Z,
    STANDARD_PHASES,
    Z_SLOT_PHASES,
    apply_error_model,
    build_prep_matrix,
)

ALICE = "alice"
BOB = "bob"
CHARLIE = "charlie"

MIN_ALICE_LABELS = 5
MAX_ALICE_LABELS = 8


@dataclass(frozen=True)
class Schedule:
    alice_labels: tuple = ("+X", "-X", "+Y", "-Y", "-Z")
    bob_labels: tuple = ("+X", "-X", "+Y", "-Y")
    shots_per_pair: int = 1_000_000
    trials: int = 10
    a1_selection: tuple = ("+X", "-X", "+Y", "-Z")
    a2_selection: tuple = ("+X", "-X", "-Y", "-Z")

    def __post_init__(self):
        for name in ("alice_labels", "bob_labels", "a1_selection", "a2_selection"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        n = len(self.alice_labels)
        if len(set(self.alice_labels)) != n:
            raise ValueError("alice_labels must be distinct")
        if not MIN_ALICE_LABELS <= n <= MAX_ALICE_LABELS:
            raise ValueError(
                f"Alice needs between {MIN_ALICE_LABELS} and {MAX_ALICE_LABELS} "
                f"preparations, got {n}")
        if len(self.bob_labels) != 4 or len(set(self.bob_labels)) != 4:
            raise ValueError("bob_labels must be four distinct labels")
        if MINUS_Z in self.bob_labels:
            raise ValueError("Bob's labels must be fixed-phase states")
        for name in ("a1_selection", "a2_selection"):
            sel = getattr(self, name)
            if len(sel) != 4 or len(set(sel)) != 4:
                raise ValueError(f"{name} must be four distinct labels")
            missing = set(sel) - set(self.alice_labels)
            if missing:
                raise ValueError(f"{name} uses labels not in alice_labels: {sorted(missing)}")
        shared = set(self.a1_selection) & set(self.a2_selection)
        if len(shared) == 4:
            raise ValueError("A2 must change at least one of A1's preparations")
        if len(shared) < 3:
            raise ValueError("A1 and A2 must share at least three preparations")
        if self.shots_per_pair < 1:
            raise ValueError("shots_per_pair must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    @property
    def bob_tokens(self):
        return tuple(f"B{j}" for j in range(len(self.bob_labels)))

    def check_invertible(self, plan):
        """Raise DegenerateSet unless both A selections are invertible."""
        for sel in (self.a1_selection, self.a2_selection):
            build_prep_matrix(sel, plan)

    def batches(self, trial):
        """Block-sequenced batches: every Bob label for each Alice label in turn."""
        index = 0
        out = []
        for a in self.alice_labels:
            for j, b in enumerate(self.bob_labels):
                slots = range(len(Z_SLOT_PHASES)) if a == MINUS_Z else (None,)
                for slot in slots:
                    if slot is None:
                        shots = self.shots_per_pair
                    else:
                        base, extra = divmod(self.shots_per_pair, len(Z_SLOT_PHASES))
                        shots = base + (1 if slot < extra else 0)
                    if shots == 0:
                        continue
                    out.append(Batch(f"t{trial}-b{index}", trial, a, j, slot, shots))
                    index += 1
        return out


@dataclass(frozen=True)
class Batch:
    batch_id: str
    trial: int
    alice_label: str
    bob_index: int
    slot: object
    shots: int


# -- messages ---------------------------------------------------------------

@dataclass(frozen=True)
class ShotBatchAnnounce:
    batch: str
    shots: int
    kind = "announce"

    def record(self):
        return {"type": self.kind, "batch": self.batch, "shots": self.shots}


@dataclass(frozen=True)
class PrepCommit:
    party: str
    batch: str
    token: str
    kind = "commit"

    def record(self):
        return {"type": self.kind, "batch": self.batch, "party": self.party,
                "token": self.token}


@dataclass(frozen=True)
class DetectionReport:
    batch: str
    counts: CountRecord
    kind = "detection"

    def record(self):
        return {"type": self.kind, "batch": self.batch, "n_plus": self.counts.n_plus,
                "n_minus": self.counts.n_minus, "shots": self.counts.shots}


@dataclass(frozen=True)
class LabelReveal:
    party: str
    batch: str
    label: str
    kind = "reveal"

    def record(self):
        return {"type": self.kind, "batch": self.batch, "party": self.party,
                "label": self.label}


def message_from_record(rec):
    kind = rec["type"]
    if kind == "announce":
        return ShotBatchAnnounce(rec["batch"], int(rec["shots"]))
    if kind == "commit":
        return PrepCommit(rec["party"], rec["batch"], rec["token"])
    if kind == "detection":
        return DetectionReport(rec["batch"], CountRecord(int(rec["n_plus"]),
                                                         int(rec["n_minus"]),
                                                         int(rec["shots"])))
    if kind == "reveal":
        return LabelReveal(rec["party"], rec["batch"], rec["label"])
    raise ValueError(f"unknown message type {kind!r}")


@dataclass(frozen=True)
class Pulse:
    """What physically travels to Charlie; never part of the classical transcript."""

    phase: float
    source_label: str


class Network:
    """Ordered classical channel plus the quantum channel into Charlie."""

    def __init__(self, parties):
        self.parties = {p.name: p for p in parties}
        self.pending = deque()
        self.transcript = []

    def post(self, msg, recipients):
        self.transcript.append(msg)
        self.pending.extend((r, msg) for r in recipients)

    def send_pulse(self, batch, sender, pulse):
        self.parties[CHARLIE].accept_pulse(batch, sender, pulse)

    def pump(self):
        while self.pending:
            recipient, msg = self.pending.popleft()
            self.parties[recipient].receive(msg, self)


def _commit_token(seed, party, batch, label):
    digest = hashlib.sha256(f"{seed}|{party}|{batch}|{label}".encode("utf-8"))
    return digest.hexdigest()[:16]


class Charlie:
    name = CHARLIE

    def __init__(self, model, seed):
        self.model = model
        self.seed = seed
        self.announced = {}
        self.commits = {}
        self.pulses = {}
        self.slots = {}

    def announce(self, batch, net):
        self.announced[batch.batch_id] = batch.shots
        self.slots[batch.batch_id] = (batch.trial, batch.slot)
        net.post(ShotBatchAnnounce(batch.batch_id, batch.shots), [ALICE, BOB])

    def accept_pulse(self, batch_id, sender, pulse):
        if batch_id not in self.announced:
            raise ProtocolViolation(f"pulse for unannounced batch {batch_id}")
        self.pulses.setdefault(batch_id, {})[sender] = pulse

    def receive(self, msg, net):
        if not isinstance(msg, PrepCommit):
            raise ProtocolViolation(f"Charlie cannot handle {msg.kind}")
        if msg.batch not in self.announced:
            raise ProtocolViolation(f"commit for unannounced batch {msg.batch}")
        got = self.commits.setdefault(msg.batch, set())
        got.add(msg.party)
        if got == {ALICE, BOB}:
            self._measure(msg.batch, net)

    def _measure(self, batch_id, net):
        pulses = self.pulses.pop(batch_id)
        a, b = pulses[ALICE], pulses[BOB]
        trial, slot = self.slots[batch_id]
        rng = streams.substream(self.seed, streams.COUNTS, trial,
                                streams.label_key(a.source_label),
                                streams.label_key(b.source_label),
                                0 if slot is None else slot + 1)
        counts = simulate_counts(a.phase, b.phase, self.model, a.source_label,
                                 self.announced[batch_id], rng)
        net.post(DetectionReport(batch_id, counts), [ALICE, BOB])


class Bob:
    name = BOB

    def __init__(self, schedule, batches, seed):
        self.seed = seed
        self.labels = schedule.bob_labels
        self.tokens = schedule.bob_tokens
        self.plan = {b.batch_id: b.bob_index for b in batches}
        self.committed = set()

    def receive(self, msg, net):
        if isinstance(msg, ShotBatchAnnounce):
            j = self.plan[msg.batch]
            label = self.labels[j]
            net.send_pulse(msg.batch, BOB, Pulse(STANDARD_PHASES[label], label))
            self.committed.add(msg.batch)
            net.post(PrepCommit(BOB, msg.batch,
                                _commit_token(self.seed, BOB, msg.batch, label)), [CHARLIE])
        elif isinstance(msg, DetectionReport):
            if msg.batch not in self.committed:
                raise ProtocolViolation(f"detection for uncommitted batch {msg.batch}")
            net.post(LabelReveal(BOB, msg.batch, self.tokens[self.plan[msg.batch]]), [ALICE])
        else:
            raise ProtocolViolation(f"Bob cannot handle {msg.kind}")


class Alice:
    """Prepares states and keeps the analysis ledger (counts + Bob's tokens)."""

    name = ALICE

    def __init__(self, plan, batches, jitter, seed):
        self.plan = plan
        self.seed = seed
        self.jitter = jitter
        self.my_batches = {b.batch_id: b for b in batches}
        self.announced = set()
        self.counts = {}
        self.bob_token = {}

    def receive(self, msg, net):
        if isinstance(msg, ShotBatchAnnounce):
            batch = self.my_batches[msg.batch]
            label = batch.alice_label
            slot = 0 if batch.slot is None else batch.slot
            phase = apply_error_model(self.plan, label, self.jitter.get(label, 0.0), slot)
            self.announced.add(msg.batch)
            net.send_pulse(msg.batch, ALICE, Pulse(phase, label))
            net.post(PrepCommit(ALICE, msg.batch,
                                _commit_token(self.seed, ALICE, msg.batch, label)), [CHARLIE])
        elif isinstance(msg, DetectionReport):
            if msg.batch not in self.announced:
                raise ProtocolViolation(f"detection for unannounced batch {msg.batch}")
            self.counts[msg.batch] = msg.counts
        elif isinstance(msg, LabelReveal):
            if msg.batch not in self.announced:
                raise ProtocolViolation(f"reveal for unannounced batch {msg.batch}")
            if msg.batch not in self.counts:
                raise ProtocolViolation(f"label revealed before detection for {msg.batch}")
            self.bob_token[msg.batch] = msg.label
        else:
            raise ProtocolViolation(f"Alice cannot handle {msg.kind}")

    def tabulate(self, alice_labels, tokens):
        """Sum counts per (own label, Bob token) cell across -Z slots."""
        cells = {}
        for batch_id, counts in self.counts.items():
            token = self.bob_token.get(batch_id)
            if token is None:
                continue
            key = (self.my_batches[batch_id].alice_label, token)
            cells[key] = cells[key] + counts if key in cells else counts
        revealed = tuple(t for t in tokens if any(k[1] == t for k in cells))
        table = np.zeros((len(alice_labels), len(revealed), 2), dtype=np.int64)
        S = np.full((len(alice_labels), len(revealed)), np.nan)
        flags = []
        for i, a in enumerate(alice_labels):
            for j, t in enumerate(revealed):
                c = cells.get((a, t))
                if c is None:
                    flags.append(f"no batch recorded for ({a}, {t})")
                    continue
                table[i, j] = (c.n_plus, c.n_minus)
                try:
                    S[i, j] = estimate_expectation(c)
                except NoCounts:
                    flags.append(f"no counts for ({a}, {t})")
        return revealed, table, S, flags


@dataclass
class TrialResult:
    trial: int
    alice_labels: tuple
    bob_tokens: tuple
    counts: np.ndarray
    expectations: np.ndarray
    flags: list = field(default_factory=list)
    transcript: list = field(default_factory=list)


def _trial_jitter(schedule, plan, trial, seed):
    fixed = sorted(label for label in schedule.alice_labels if label != MINUS_Z)
    rng = streams.substream(seed, streams.JITTER, trial)
    return plan.sample_jitter(fixed, rng)


def run_trial(schedule, plan, model, trial, seed):
    """Run every batch of one trial through the three parties."""
    batches = schedule.batches(trial)
    jitter = _trial_jitter(schedule, plan, trial, seed)
    alice = Alice(plan, batches, jitter, seed)
    bob = Bob(schedule, batches, seed)
    charlie = Charlie(model, seed)
    net = Network([alice, bob, charlie])
    for batch in batches:
        charlie.announce(batch, net)
        net.pump()
    tokens, counts, S, flags = alice.tabulate(schedule.alice_labels, schedule.bob_tokens)
    return TrialResult(trial, schedule.alice_labels, tokens, counts, S, flags,
                       net.transcript)


def _run_trial_args(args):
    return run_trial(*args)


def run_experiment(schedule, plan, model, seed, workers=1):
    """All trials of an experiment, in trial order, independent of ``workers``."""
    if schedule.trials < 2:
        raise ValueError("an experiment needs at least 2 trials")
    schedule.check_invertible(plan)
    jobs = [(schedule, plan, model, t, seed) for t in range(schedule.trials)]
    if workers <= 1:
        return [run_trial(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_trial_args, jobs))


def assemble_expectations(results, schedule):
    """Stack per-trial S1 and S2 matrices, shape ``(trials, 4, 4)`` each.

    Rows follow the A1/A2 selections, columns follow the schedule's Bob token
    order. Rows shared by both selections come from the same measurement.
    """
    S1, S2 = [], []
    for res in results:
        missing = [t for t in schedule.bob_tokens if t not in res.bob_tokens]
        if missing:
            raise MissingLabel(f"trial {res.trial}: no reveals for Bob tokens {missing}")
        rows = {label: i for i, label in enumerate(res.alice_labels)}
        cols = [res.bob_tokens.index(t) for t in schedule.bob_tokens]
        for sel, out in ((schedule.a1_selection, S1), (schedule.a2_selection, S2)):
            absent = [label for label in sel if label not in rows]
            if absent:
                raise MissingLabel(f"trial {res.trial}: no rows for {absent}")
            out.append(res.expectations[np.ix_([rows[label] for label in sel], cols)])
    return np.array(S1), np.array(S2)
